//! The rank-r bilinear parameterisation `(H, K, F)` of n×n multiplication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::bilinear_pipeline;
use crate::scalar::{rational_from_f64, Rational, Scalar};
use crate::tensor::Tensor;

/// `H, K ∈ K^{n²×r}`, `F ∈ K^{r×n²}`; computes
/// `vec(AB) = Fᵀ((Hᵀ vec A) ⋆ (Kᵀ vec B))` with vec taken row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearScheme<S = f64> {
    n: usize,
    r: usize,
    h: Tensor<S>,
    k: Tensor<S>,
    f: Tensor<S>,
}

impl<S: Scalar> BilinearScheme<S> {
    pub fn new(n: usize, r: usize, h: Tensor<S>, k: Tensor<S>, f: Tensor<S>) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::ShapeMismatch("n and r must be positive".into()));
        }
        let m = n * n;
        for (name, t, want) in [("H", &h, [m, r]), ("K", &k, [m, r]), ("F", &f, [r, m])] {
            if t.dims() != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has dims {:?}, expected {want:?}",
                    t.dims()
                )));
            }
            if !t.data().iter().all(Scalar::is_finite_val) {
                return Err(Error::ShapeMismatch(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { n, r, h, k, f })
    }

    pub fn zeros(n: usize, r: usize) -> Self {
        let m = n * n;
        Self {
            n,
            r,
            h: Tensor::zeros(&[m, r]),
            k: Tensor::zeros(&[m, r]),
            f: Tensor::zeros(&[r, m]),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn h(&self) -> &Tensor<S> {
        &self.h
    }

    pub fn k(&self) -> &Tensor<S> {
        &self.k
    }

    pub fn f(&self) -> &Tensor<S> {
        &self.f
    }

    pub fn parts_mut(&mut self) -> [&mut Tensor<S>; 3] {
        [&mut self.h, &mut self.k, &mut self.f]
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> BilinearScheme<T> {
        BilinearScheme {
            n: self.n,
            r: self.r,
            h: self.h.map(&f),
            k: self.k.map(&f),
            f: self.f.map(&f),
        }
    }

    /// `Fᵀ((Hᵀa) ⋆ (Kᵀb))`.
    pub fn forward_fast(&self, a: &[S], b: &[S]) -> Result<Vec<S>> {
        let m = self.n * self.n;
        if a.len() != m || b.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "inputs of length {} and {}, expected {m}",
                a.len(),
                b.len()
            )));
        }
        let (h, k, f) = (self.h.data(), self.k.data(), self.f.data());
        let r = self.r;
        let mut out = vec![S::zero(); m];
        for s in 0..r {
            let mut u = S::zero();
            let mut w = S::zero();
            for i in 0..m {
                u = u + h[i * r + s].clone() * a[i].clone();
                w = w + k[i * r + s].clone() * b[i].clone();
            }
            let p = u * w;
            for (o, f_so) in out.iter_mut().zip(&f[s * m..(s + 1) * m]) {
                *o = o.clone() + p.clone() * f_so.clone();
            }
        }
        Ok(out)
    }

    /// Forward pass through the blow/forget/BMP network pipeline. Agrees with
    /// [`forward_fast`](Self::forward_fast); kept as an independent route.
    pub fn forward_bmp(&self, a: &Tensor<S>, b: &Tensor<S>) -> Result<Vec<S>> {
        let n = self.n;
        if a.dims() != [n, n] || b.dims() != [n, n] {
            return Err(Error::ShapeMismatch(format!(
                "operands {:?} and {:?} for n={n}",
                a.dims(),
                b.dims()
            )));
        }
        let av = Tensor::vector(a.data().to_vec());
        let bv = Tensor::vector(b.data().to_vec());
        let stages = bilinear_pipeline(&av, &bv, &self.h, &self.k, &self.f.transpose()?)?;
        Ok(stages.output.into_data())
    }

    /// Reorders the r slots: slot `s` of the result is slot `perm[s]` of self.
    pub fn permute_slots(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.r];
        if perm.len() != self.r || perm.iter().any(|&p| p >= self.r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::BadIndexSet(format!("{perm:?} is not a permutation of 0..{}", self.r)));
        }
        let m = self.n * self.n;
        Ok(Self {
            n: self.n,
            r: self.r,
            h: Tensor::from_fn(&[m, self.r], |ix| self.h.at(ix[0], perm[ix[1]]).clone()),
            k: Tensor::from_fn(&[m, self.r], |ix| self.k.at(ix[0], perm[ix[1]]).clone()),
            f: Tensor::from_fn(&[self.r, m], |ix| self.f.at(perm[ix[0]], ix[1]).clone()),
        })
    }

    /// Multiplies column `slot` of H by `lh`, of K by `lk` and row `slot` of F by `lf`.
    pub fn scale_slot(&self, slot: usize, lh: &S, lk: &S, lf: &S) -> Self {
        let mut out = self.clone();
        let (r, m) = (self.r, self.n * self.n);
        for i in 0..m {
            let o = i * r + slot;
            out.h.data_mut()[o] = self.h.data()[o].clone() * lh.clone();
            out.k.data_mut()[o] = self.k.data()[o].clone() * lk.clone();
        }
        for j in 0..m {
            let o = slot * m + j;
            out.f.data_mut()[o] = self.f.data()[o].clone() * lf.clone();
        }
        out
    }
}

impl BilinearScheme<f64> {
    /// Entries i.i.d. `N(0, alpha²)` drawn in the order H, K, F (row-major)
    /// from a ChaCha8 stream seeded with `seed`.
    pub fn init(n: usize, r: usize, seed: u64, alpha: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(n, r, alpha, &mut rng)
    }

    pub fn init_with(n: usize, r: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::InvalidConfig("n and r must be positive".into()));
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        let normal = Normal::new(0.0, alpha)
            .map_err(|e| Error::InvalidConfig(format!("alpha={alpha}: {e}")))?;
        let m = n * n;
        let mut draw = |dims: [usize; 2]| {
            let data = (0..dims[0] * dims[1]).map(|_| normal.sample(rng)).collect();
            Tensor::new(dims.to_vec(), data).expect("sized to dims")
        };
        let h = draw([m, r]);
        let k = draw([m, r]);
        let f = draw([r, m]);
        Ok(Self { n, r, h, k, f })
    }

    /// Exact rational image of the stored floats.
    pub fn to_rational(&self) -> Result<BilinearScheme<Rational>> {
        let conv = |t: &Tensor<f64>| -> Result<Tensor<Rational>> {
            let data = t
                .data()
                .iter()
                .map(|&v| {
                    rational_from_f64(v)
                        .ok_or_else(|| Error::ShapeMismatch(format!("non-finite entry {v}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Tensor::new(t.dims().to_vec(), data)
        };
        BilinearScheme::new(self.n, self.r, conv(&self.h)?, conv(&self.k)?, conv(&self.f)?)
    }
}

/// On-disk scheme: `{"n":..,"r":..,"H":[[..]],"K":[[..]],"F":[[..]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub n: usize,
    pub r: usize,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
}

impl<S: Scalar> From<&BilinearScheme<S>> for SchemeFile {
    fn from(s: &BilinearScheme<S>) -> Self {
        let rows = |t: &Tensor<S>| {
            t.rows()
                .into_iter()
                .map(|r| r.iter().map(Scalar::to_f64).collect())
                .collect()
        };
        SchemeFile {
            n: s.n,
            r: s.r,
            h: rows(&s.h),
            k: rows(&s.k),
            f: rows(&s.f),
        }
    }
}

impl TryFrom<SchemeFile> for BilinearScheme<f64> {
    type Error = Error;

    fn try_from(file: SchemeFile) -> Result<Self> {
        BilinearScheme::new(
            file.n,
            file.r,
            Tensor::from_rows(file.h)?,
            Tensor::from_rows(file.k)?,
            Tensor::from_rows(file.f)?,
        )
    }
}

impl Serialize for BilinearScheme<f64> {
    fn serialize<Ser: serde::Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        SchemeFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BilinearScheme<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = SchemeFile::deserialize(deserializer)?;
        BilinearScheme::try_from(file).map_err(serde::de::Error::custom)
    }
}
