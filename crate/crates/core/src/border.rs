//! Schemes whose factors are Laurent polynomials in a small parameter ε,
//! trained along a shrinking ε schedule.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BilinearScheme;
use crate::tensor::{cp_reconstruct, Tensor};
use crate::train::{batch_loss, gen_dataset, loss_and_grad, train_loop, Dataset, Objective, RunRecord, TrainConfig};

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::EpsilonNonpositive(eps))
    }
}

/// `Σ_{p=lo}^{lo+len-1} ε^p C_p` over equally shaped coefficient matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrix {
    pub lo: i32,
    pub coeffs: Vec<Tensor>,
}

impl PolyMatrix {
    pub fn new(lo: i32, coeffs: Vec<Tensor>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidConfig("polynomial needs at least one coefficient".into()))?;
        if coeffs.iter().any(|c| c.dims() != first.dims()) {
            return Err(Error::ShapeMismatch("coefficient shapes differ".into()));
        }
        Ok(Self { lo, coeffs })
    }

    /// `base` at power 0, zeros at every other power in `lo..=hi`.
    pub fn lift(base: &Tensor, lo: i32, hi: i32) -> Self {
        let coeffs = (lo..=hi)
            .map(|p| if p == 0 { base.clone() } else { Tensor::zeros(base.dims()) })
            .collect();
        Self { lo, coeffs }
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn weights(&self, eps: f64) -> Vec<f64> {
        (self.lo..=self.hi()).map(|p| eps.powi(p)).collect()
    }

    pub fn evaluate(&self, eps: f64) -> Result<Tensor> {
        check_eps(eps)?;
        let w = self.weights(eps);
        let mut data: Vec<f64> = self.coeffs[0].data().iter().map(|c| w[0] * c).collect();
        for (c, wp) in self.coeffs.iter().zip(&w).skip(1) {
            for (d, x) in data.iter_mut().zip(c.data()) {
                *d += wp * x;
            }
        }
        Tensor::new(self.coeffs[0].dims().to_vec(), data)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsScheme {
    pub n: usize,
    pub r: usize,
    pub h: PolyMatrix,
    pub k: PolyMatrix,
    pub f: PolyMatrix,
    pub eps: f64,
}

impl EpsScheme {
    /// Powers `0..=d_max` for H and K and `f_min..=d_max` for F, with `base`
    /// as the constant term and every other coefficient zero.
    pub fn from_base(base: &BilinearScheme, d_max: u32, f_min: i32, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if f_min > 0 {
            return Err(Error::InvalidConfig(format!("lowest F power must be <= 0, got {f_min}")));
        }
        let d = d_max as i32;
        Ok(Self {
            n: base.n(),
            r: base.r(),
            h: PolyMatrix::lift(base.h(), 0, d),
            k: PolyMatrix::lift(base.k(), 0, d),
            f: PolyMatrix::lift(base.f(), f_min, d),
            eps,
        })
    }

    pub fn evaluate_at(&self, eps: f64) -> Result<BilinearScheme> {
        BilinearScheme::new(
            self.n,
            self.r,
            self.h.evaluate(eps)?,
            self.k.evaluate(eps)?,
            self.f.evaluate(eps)?,
        )
    }

    pub fn evaluate(&self) -> Result<BilinearScheme> {
        self.evaluate_at(self.eps)
    }

    pub fn set_eps(&mut self, eps: f64) -> Result<()> {
        check_eps(eps)?;
        self.eps = eps;
        Ok(())
    }

    fn blocks(&self) -> impl Iterator<Item = &Tensor> {
        self.h.coeffs.iter().chain(&self.k.coeffs).chain(&self.f.coeffs)
    }

    fn blocks_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.h
            .coeffs
            .iter_mut()
            .chain(self.k.coeffs.iter_mut())
            .chain(self.f.coeffs.iter_mut())
    }

    /// Gradients of the batch loss at the current ε, one block per
    /// coefficient matrix in the order H, K, F by ascending power.
    pub fn loss_and_grad(&self, data: &Dataset, idx: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let s = self.evaluate()?;
        let (loss, g) = loss_and_grad(&s, data, idx);
        let mut out = Vec::new();
        for (poly, gp) in [(&self.h, &g.h), (&self.k, &g.k), (&self.f, &g.f)] {
            for w in poly.weights(self.eps) {
                out.push(gp.iter().map(|x| w * x).collect());
            }
        }
        Ok((loss, out))
    }
}

/// Extension points for optimisers and regularisers beyond plain Adam.
/// Every default is a no-op.
pub trait EpsHooks {
    fn adjust_loss(&self, _scheme: &EpsScheme, _loss: &mut f64, _grads: &mut [Vec<f64>]) {}
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoHooks;

impl EpsHooks for NoHooks {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsSchedule {
    pub eps0: f64,
    /// Multiplier applied once per epoch; 1.0 holds ε fixed.
    pub decay: f64,
    pub eps_min: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps0: 0.02,
            decay: 0.95,
            eps_min: 1e-6,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps0)?;
        check_eps(self.eps_min)?;
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        Ok(())
    }

    /// `max(eps0 · decay^epoch, eps_min)`.
    pub fn at(&self, epoch: usize) -> f64 {
        (self.eps0 * self.decay.powi(epoch as i32)).max(self.eps_min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsConfig {
    pub train: TrainConfig,
    pub schedule: EpsSchedule,
    pub d_max: u32,
    pub f_min: i32,
    pub probe_eps: f64,
}

impl Default for EpsConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            schedule: EpsSchedule::default(),
            d_max: 2,
            f_min: -2,
            probe_eps: 1e-3,
        }
    }
}

impl EpsConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.schedule.validate()?;
        check_eps(self.probe_eps)?;
        if self.f_min > 0 {
            return Err(Error::InvalidConfig(format!("f_min must be <= 0, got {}", self.f_min)));
        }
        Ok(())
    }
}

struct Trainee<'a, H: EpsHooks> {
    scheme: EpsScheme,
    schedule: &'a EpsSchedule,
    hooks: &'a H,
}

impl<H: EpsHooks> Objective for Trainee<'_, H> {
    fn param_sizes(&self) -> Vec<usize> {
        self.scheme.blocks().map(Tensor::len).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.scheme.blocks_mut().map(|t| t.data_mut()).collect()
    }

    fn loss_and_grad(&self, data: &Dataset, idx: &[usize]) -> (f64, Vec<Vec<f64>>) {
        let (mut loss, mut grads) = self
            .scheme
            .loss_and_grad(data, idx)
            .expect("epsilon validated by the schedule");
        self.hooks.adjust_loss(&self.scheme, &mut loss, &mut grads);
        (loss, grads)
    }

    fn loss(&self, data: &Dataset, idx: &[usize]) -> f64 {
        let s = self.scheme.evaluate().expect("epsilon validated by the schedule");
        batch_loss(&s, data, idx)
    }

    fn begin_epoch(&mut self, epoch: usize) -> Result<()> {
        self.scheme.set_eps(self.schedule.at(epoch))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsRun {
    pub record: RunRecord,
    pub eps_scheme: EpsScheme,
}

pub fn train_eps(cfg: &EpsConfig) -> Result<EpsRun> {
    train_eps_with(cfg, &NoHooks)
}

/// The training loop of [`crate::train::train`] with forward passes and
/// gradients taken through the ε-polynomial at each epoch's ε.
pub fn train_eps_with<H: EpsHooks>(cfg: &EpsConfig, hooks: &H) -> Result<EpsRun> {
    cfg.validate()?;
    let t = &cfg.train;
    let start = Instant::now();
    let base = BilinearScheme::init(t.n, t.r, t.init_seed(), t.alpha)?;
    let mut model = Trainee {
        scheme: EpsScheme::from_base(&base, cfg.d_max, cfg.f_min, cfg.schedule.at(0))?,
        schedule: &cfg.schedule,
        hooks,
    };
    let val = gen_dataset(t.n, t.val_size, t.val_seed(), t.range)?;
    let val_idx: Vec<usize> = (0..val.len()).collect();
    let mut trajectory = Vec::with_capacity(t.epochs);
    let mut probes = Vec::with_capacity(t.epochs);
    let curves = train_loop(t, &mut model, |_, m| {
        trajectory.push(m.scheme.eps);
        probes.push(batch_loss(&m.scheme.evaluate_at(cfg.probe_eps)?, &val, &val_idx));
        Ok(())
    })?;
    let scheme = model.scheme.evaluate()?;
    Ok(EpsRun {
        record: RunRecord {
            config: t.clone(),
            train_loss: curves.train_loss,
            val_loss: curves.val_loss,
            scheme,
            seconds: start.elapsed().as_secs_f64(),
            epsilon_trajectory: Some(trajectory),
            probe_losses: Some(probes),
        },
        eps_scheme: model.scheme,
    })
}

/// The ε-family `U = V = [a + εb, a]`, `W = [(a + εb)/ε ; −a/ε]` whose limit
/// is `a⊗a⊗b + a⊗b⊗a + b⊗a⊗a`. `U`, `V` hold the terms as columns and `W`
/// as rows, ready for [`cp_reconstruct`].
pub fn w_state_family(a: &[f64], b: &[f64]) -> Result<[PolyMatrix; 3]> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let d = a.len();
    let cols = |c0: &[f64], c1: &[f64]| Tensor::from_fn(&[d, 2], |ix| if ix[1] == 0 { c0[ix[0]] } else { c1[ix[0]] });
    let rows = |r0: &[f64], r1: &[f64]| Tensor::from_fn(&[2, d], |ix| if ix[0] == 0 { r0[ix[1]] } else { r1[ix[1]] });
    let zero = vec![0.0; d];
    let neg_a: Vec<f64> = a.iter().map(|x| -x).collect();
    let uv = PolyMatrix::new(0, vec![cols(a, a), cols(b, &zero)])?;
    let w = PolyMatrix::new(-1, vec![rows(a, &neg_a), rows(b, &zero)])?;
    Ok([uv.clone(), uv, w])
}

pub fn w_state_target(a: &[f64], b: &[f64]) -> Tensor {
    let d = a.len();
    Tensor::from_fn(&[d, d, d], |ix| {
        let (x, y, z) = (ix[0], ix[1], ix[2]);
        a[x] * a[y] * b[z] + a[x] * b[y] * a[z] + b[x] * a[y] * a[z]
    })
}

/// Frobenius distance between the family at `eps` and its limit.
pub fn w_state_residual(a: &[f64], b: &[f64], eps: f64) -> Result<f64> {
    let [u, v, w] = w_state_family(a, b)?;
    let t = cp_reconstruct(&u.evaluate(eps)?, &v.evaluate(eps)?, &w.evaluate(eps)?)?;
    Ok(t.sub(&w_state_target(a, b))?.norm_sq().sqrt())
}
