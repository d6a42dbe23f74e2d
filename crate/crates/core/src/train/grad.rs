//! Mean squared error of a bilinear scheme and its gradients.
//!
//! The loss is `(1/|B|) Σ ‖v_pred − v_true‖²`: squared entries are summed per
//! sample and averaged over samples only.

use crate::error::{Error, Result};
use crate::model::BilinearScheme;

use super::dataset::Dataset;

/// Gradients with the layout of `H`, `K`, `F` (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    pub f: Vec<f64>,
}

impl Grads {
    pub fn zeros_like(s: &BilinearScheme) -> Self {
        Self {
            h: vec![0.0; s.h().len()],
            k: vec![0.0; s.k().len()],
            f: vec![0.0; s.f().len()],
        }
    }

    pub fn norm(&self) -> f64 {
        global_norm(&[&self.h, &self.k, &self.f])
    }

    pub fn into_parts(self) -> [Vec<f64>; 3] {
        [self.h, self.k, self.f]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.h.iter().chain(&self.k).chain(&self.f)
    }
}

pub fn global_norm(parts: &[&[f64]]) -> f64 {
    parts
        .iter()
        .flat_map(|p| p.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Mean over samples of the squared ℓ₂ norm of the residual.
pub fn mse(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch(preds.len(), targets.len()));
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::LengthMismatch(p.len(), t.len()));
        }
        total += p.iter().zip(t).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok(total / preds.len() as f64)
}

/// Loss of `s` over the samples `idx` of `data`.
pub fn batch_loss(s: &BilinearScheme, data: &Dataset, idx: &[usize]) -> f64 {
    let (n, r) = (s.n(), s.r());
    let m = n * n;
    let (h, k, f) = (s.h().data(), s.k().data(), s.f().data());
    let mut u = vec![0.0; r];
    let mut w = vec![0.0; r];
    let mut total = 0.0;
    for &i in idx {
        let (a, b, y) = data.sample(i);
        project(h, a, r, &mut u);
        project(k, b, r, &mut w);
        for o in 0..m {
            let mut v = 0.0;
            for q in 0..r {
                v += u[q] * w[q] * f[q * m + o];
            }
            let d = v - y[o];
            total += d * d;
        }
    }
    total / idx.len() as f64
}

/// `out = Mᵀx` for `M` of shape len(x) × r.
fn project(mat: &[f64], x: &[f64], r: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        let row = &mat[i * r..(i + 1) * r];
        for (o, &mv) in out.iter_mut().zip(row) {
            *o += mv * xi;
        }
    }
}

/// Loss and closed-form gradients over the samples `idx`.
///
/// Per sample, with `u = Hᵀa`, `w = Kᵀb`, `p = u ⋆ w`, `v = Fᵀp` and
/// `e = 2(v − y)/|B|`: `∂F += p eᵀ`, `g = F e`, `∂H += a (g ⋆ w)ᵀ`,
/// `∂K += b (g ⋆ u)ᵀ`.
pub fn loss_and_grad(s: &BilinearScheme, data: &Dataset, idx: &[usize]) -> (f64, Grads) {
    let (n, r) = (s.n(), s.r());
    let m = n * n;
    let (h, k, f) = (s.h().data(), s.k().data(), s.f().data());
    let mut grads = Grads::zeros_like(s);
    let scale = 2.0 / idx.len() as f64;
    let mut u = vec![0.0; r];
    let mut w = vec![0.0; r];
    let mut p = vec![0.0; r];
    let mut e = vec![0.0; m];
    let mut g = vec![0.0; r];
    let mut total = 0.0;
    for &i in idx {
        let (a, b, y) = data.sample(i);
        project(h, a, r, &mut u);
        project(k, b, r, &mut w);
        for q in 0..r {
            p[q] = u[q] * w[q];
        }
        for o in 0..m {
            let mut v = 0.0;
            for q in 0..r {
                v += p[q] * f[q * m + o];
            }
            let d = v - y[o];
            total += d * d;
            e[o] = scale * d;
        }
        for q in 0..r {
            let frow = &f[q * m..(q + 1) * m];
            let gq: f64 = frow.iter().zip(&e).map(|(fv, ev)| fv * ev).sum();
            g[q] = gq;
            for (df, ev) in grads.f[q * m..(q + 1) * m].iter_mut().zip(&e) {
                *df += p[q] * ev;
            }
        }
        for i in 0..m {
            for q in 0..r {
                grads.h[i * r + q] += a[i] * g[q] * w[q];
                grads.k[i * r + q] += b[i] * g[q] * u[q];
            }
        }
    }
    (total / idx.len() as f64, grads)
}

pub fn grad_analytic(s: &BilinearScheme, data: &Dataset, idx: &[usize]) -> Grads {
    loss_and_grad(s, data, idx).1
}

/// Central differences `(L(θ+h) − L(θ−h)) / 2h`, one parameter at a time.
pub fn grad_fd(s: &BilinearScheme, data: &Dataset, idx: &[usize], step: f64) -> Result<Grads> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
    }
    let mut out = Grads::zeros_like(s);
    let mut probe = s.clone();
    for (part, dst) in [&mut out.h, &mut out.k, &mut out.f].into_iter().enumerate() {
        for (j, d) in dst.iter_mut().enumerate() {
            let orig = probe.parts_mut()[part].data()[j];
            probe.parts_mut()[part].data_mut()[j] = orig + step;
            let up = batch_loss(&probe, data, idx);
            probe.parts_mut()[part].data_mut()[j] = orig - step;
            let down = batch_loss(&probe, data, idx);
            probe.parts_mut()[part].data_mut()[j] = orig;
            *d = (up - down) / (2.0 * step);
        }
    }
    Ok(out)
}

/// Central difference of a scalar function.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Rescales all parts jointly so their global ℓ₂ norm is at most
/// `threshold`; returns the norm before clipping.
pub fn clip_parts(parts: &mut [&mut [f64]], threshold: f64) -> f64 {
    let norm = parts
        .iter()
        .flat_map(|p| p.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > threshold {
        let c = threshold / norm;
        for p in parts.iter_mut() {
            for g in p.iter_mut() {
                *g *= c;
            }
        }
    }
    norm
}

pub fn clip(mut grads: Grads, threshold: f64) -> Grads {
    clip_parts(&mut [&mut grads.h, &mut grads.k, &mut grads.f], threshold);
    grads
}
