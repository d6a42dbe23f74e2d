use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moments for a list of flat parameter blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            step: 0,
        }
    }

    pub fn with_defaults(sizes: &[usize]) -> Self {
        Self::new(sizes, 0.9, 0.999, 1e-8)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state has {} blocks, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (j, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[j].len() || g.len() != self.m[j].len() {
                return Err(Error::ShapeMismatch(format!(
                    "adam block {j}: state {}, param {}, grad {}",
                    self.m[j].len(),
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
