//! Minibatch training of bilinear schemes with Adam.

pub mod adam;
pub mod dataset;
pub mod grad;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BilinearScheme;
use crate::seed::mix_seed;

pub use adam::AdamState;
pub use dataset::{direct_product, gen_dataset, Dataset};
pub use grad::{
    batch_loss, central_difference, clip, clip_parts, global_norm, grad_analytic, grad_fd,
    loss_and_grad, mse, Grads,
};

/// Stream tags folded into the run seed, one per random consumer.
const TAG_INIT: u64 = 0;
const TAG_TRAIN: u64 = 1;
const TAG_VAL: u64 = 2;
const TAG_SHUFFLE: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n: usize,
    pub r: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub alpha: f64,
    pub seed: u64,
    pub range: [f64; 2],
    /// Draw a fresh training set every epoch instead of reshuffling one.
    pub resample: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n: 3,
            r: 23,
            epochs: 60,
            batch_size: 32,
            lr: 1e-3,
            clip: 10.0,
            train_size: 10_000,
            val_size: 10_000,
            alpha: 1.0,
            seed: 0,
            range: [-1.0, 1.0],
            resample: false,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("n", self.n),
            ("r", self.r),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("train_size", self.train_size),
            ("val_size", self.val_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.batch_size > self.train_size {
            return bad(format!(
                "batch_size {} exceeds train_size {}",
                self.batch_size, self.train_size
            ));
        }
        for (name, v) in [
            ("lr", self.lr),
            ("clip", self.clip),
            ("alpha", self.alpha),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        let [lo, hi] = self.range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return bad(format!("bad value range [{lo}, {hi}]"));
        }
        Ok(())
    }

    pub fn init_seed(&self) -> u64 {
        mix_seed(&[self.seed, TAG_INIT])
    }

    pub fn train_seed(&self, epoch: usize) -> u64 {
        if self.resample {
            mix_seed(&[self.seed, TAG_TRAIN, epoch as u64])
        } else {
            mix_seed(&[self.seed, TAG_TRAIN])
        }
    }

    pub fn val_seed(&self) -> u64 {
        mix_seed(&[self.seed, TAG_VAL])
    }

    pub fn shuffle_seed(&self, epoch: usize) -> u64 {
        mix_seed(&[self.seed, TAG_SHUFFLE, epoch as u64])
    }
}

/// Anything trainable by [`train_loop`]: a list of flat parameter blocks
/// with a differentiable loss over dataset samples.
pub trait Objective {
    fn param_sizes(&self) -> Vec<usize>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
    fn loss_and_grad(&self, data: &Dataset, idx: &[usize]) -> (f64, Vec<Vec<f64>>);
    fn loss(&self, data: &Dataset, idx: &[usize]) -> f64;
    /// Called before each epoch, e.g. to move an ε schedule.
    fn begin_epoch(&mut self, _epoch: usize) -> Result<()> {
        Ok(())
    }
}

impl Objective for BilinearScheme {
    fn param_sizes(&self) -> Vec<usize> {
        vec![self.h().len(), self.k().len(), self.f().len()]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.parts_mut().into_iter().map(|t| t.data_mut()).collect()
    }

    fn loss_and_grad(&self, data: &Dataset, idx: &[usize]) -> (f64, Vec<Vec<f64>>) {
        let (l, g) = loss_and_grad(self, data, idx);
        (l, g.into_parts().to_vec())
    }

    fn loss(&self, data: &Dataset, idx: &[usize]) -> f64 {
        batch_loss(self, data, idx)
    }
}

/// Per-epoch losses from [`train_loop`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curves {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// Runs `cfg.epochs` epochs of shuffled minibatch Adam on `model`.
///
/// `after_epoch` sees the model after each epoch's validation pass.
pub fn train_loop<M: Objective>(
    cfg: &TrainConfig,
    model: &mut M,
    mut after_epoch: impl FnMut(usize, &M) -> Result<()>,
) -> Result<Curves> {
    cfg.validate()?;
    let val = gen_dataset(cfg.n, cfg.val_size, cfg.val_seed(), cfg.range)?;
    let val_idx: Vec<usize> = (0..val.len()).collect();
    let mut train = gen_dataset(cfg.n, cfg.train_size, cfg.train_seed(0), cfg.range)?;
    let mut adam = AdamState::new(&model.param_sizes(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut curves = Curves::default();
    let mut order: Vec<usize> = (0..cfg.train_size).collect();
    for epoch in 0..cfg.epochs {
        model.begin_epoch(epoch)?;
        if cfg.resample && epoch > 0 {
            train = gen_dataset(cfg.n, cfg.train_size, cfg.train_seed(epoch), cfg.range)?;
        }
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.shuffle_seed(epoch)));
        let mut running = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grads) = model.loss_and_grad(&train, batch);
            running += loss * batch.len() as f64;
            {
                let mut views: Vec<&mut [f64]> = grads.iter_mut().map(|g| g.as_mut_slice()).collect();
                clip_parts(&mut views, cfg.clip);
            }
            adam.step(&mut model.params_mut(), &grads, cfg.lr)?;
        }
        curves.train_loss.push(running / cfg.train_size as f64);
        curves.val_loss.push(model.loss(&val, &val_idx));
        after_epoch(epoch, model)?;
    }
    Ok(curves)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub scheme: BilinearScheme,
    /// Kept out of the JSON so repeated runs serialize identically.
    #[serde(skip)]
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_trajectory: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_losses: Option<Vec<f64>>,
}

impl RunRecord {
    /// Validation loss after the last epoch.
    pub fn final_val(&self) -> f64 {
        self.val_loss.last().copied().unwrap_or(f64::NAN)
    }
}

/// Trains a scheme initialised from `cfg.init_seed()`.
pub fn train(cfg: &TrainConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let mut scheme = BilinearScheme::init(cfg.n, cfg.r, cfg.init_seed(), cfg.alpha)?;
    let curves = train_loop(cfg, &mut scheme, |_, _| Ok(()))?;
    Ok(RunRecord {
        config: cfg.clone(),
        train_loss: curves.train_loss,
        val_loss: curves.val_loss,
        scheme,
        seconds: start.elapsed().as_secs_f64(),
        epsilon_trajectory: None,
        probe_losses: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        TrainConfig {
            n: 2,
            r: 7,
            epochs: 3,
            train_size: 100,
            val_size: 50,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { batch_size: 0, ..tiny() },
            TrainConfig { batch_size: 101, ..tiny() },
            TrainConfig { lr: -1.0, ..tiny() },
            TrainConfig { beta2: 1.0, ..tiny() },
            TrainConfig { range: [1.0, 1.0], ..tiny() },
        ] {
            assert!(matches!(train(&bad), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn record_shapes_and_determinism() {
        let a = train(&tiny()).unwrap();
        let b = train(&tiny()).unwrap();
        assert_eq!(a.train_loss.len(), 3);
        assert_eq!(a.val_loss.len(), 3);
        assert!(a.train_loss.iter().chain(&a.val_loss).all(|&l| l >= 0.0));
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.val_loss, b.val_loss);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = train(&TrainConfig { seed: 1, ..tiny() }).unwrap();
        assert_ne!(a.val_loss, c.val_loss);
    }

    #[test]
    fn partial_last_batch_and_resample() {
        let cfg = TrainConfig { batch_size: 33, resample: true, ..tiny() };
        let rec = train(&cfg).unwrap();
        assert!(rec.final_val().is_finite());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let ok: TrainConfig = serde_json::from_str(r#"{"n":2,"r":7}"#).unwrap();
        assert_eq!(ok.epochs, 60);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"n":2,"rank":7}"#).is_err());
    }
}
