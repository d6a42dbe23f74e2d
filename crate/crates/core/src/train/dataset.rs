use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Triples `(A, B, A·B)` stored as flat row-major vecs, one n² block per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub seed: u64,
    pub range: [f64; 2],
    a: Vec<f64>,
    b: Vec<f64>,
    p: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.a.len() / (self.n * self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `(vec A, vec B, vec AB)` of sample `i`.
    pub fn sample(&self, i: usize) -> (&[f64], &[f64], &[f64]) {
        let m = self.n * self.n;
        let r = i * m..(i + 1) * m;
        (&self.a[r.clone()], &self.b[r.clone()], &self.p[r])
    }
}

/// Row-major product of two n×n matrices by the triple loop.
pub fn direct_product(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a[i * n + j] * b[j * n + k];
            }
            c[i * n + k] = acc;
        }
    }
    c
}

/// `count` triples with entries uniform in `range`, deterministic per seed.
pub fn gen_dataset(n: usize, count: usize, seed: u64, range: [f64; 2]) -> Result<Dataset> {
    if n == 0 || count == 0 {
        return Err(Error::InvalidConfig("dataset needs n >= 1 and count >= 1".into()));
    }
    let [lo, hi] = range;
    if lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidConfig(format!("bad value range [{lo}, {hi}]")));
    }
    let m = n * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(count * m);
    let mut b = Vec::with_capacity(count * m);
    let mut p = Vec::with_capacity(count * m);
    for _ in 0..count {
        let sa: Vec<f64> = (0..m).map(|_| rng.random_range(lo..=hi)).collect();
        let sb: Vec<f64> = (0..m).map(|_| rng.random_range(lo..=hi)).collect();
        p.extend(direct_product(n, &sa, &sb));
        a.extend(sa);
        b.extend(sb);
    }
    Ok(Dataset {
        n,
        seed,
        range,
        a,
        b,
        p,
    })
}
