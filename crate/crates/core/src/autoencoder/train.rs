use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::NetworkConfig;
use crate::error::{Error, Result};
use crate::neural::Tensor4;
use crate::solver::ResidualScope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from `lr` to zero over the run.
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    /// Weight λ of the PDE residual term (solution autoencoder only).
    pub pde_loss_weight: f64,
    pub pde_scope: ResidualScope,
    pub seed: u64,
    /// Share of the samples held out for model selection, in (0, 0.5].
    pub validation_fraction: f64,
    /// Gaussian noise added to the solution latent before decoding, relative
    /// to the batch standard deviation of each latent component.
    pub latent_noise: f64,
    /// Weight of the mean of `(E(D(z̃, c)) - z)²`.
    pub cycle_weight: f64,
    /// Weight of the mean of `(E(coarse) - z)²`.
    pub coarse_weight: f64,
    pub coarse_n: usize,
    pub coarse_iters: usize,
    /// Adds the reflection `x -> lx - x` of every training sample.
    pub mirror_augmentation: bool,
    pub network: NetworkConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 8,
            lr: 3e-3,
            lr_schedule: LrSchedule::Cosine,
            pde_loss_weight: 1e-4,
            pde_scope: ResidualScope::Temperature,
            seed: 0,
            validation_fraction: 0.1,
            latent_noise: 0.0,
            cycle_weight: 0.0,
            coarse_weight: 0.0,
            coarse_n: crate::solver::DEFAULT_COARSE_N,
            coarse_iters: crate::solver::DEFAULT_COARSE_ITERS,
            mirror_augmentation: false,
            network: NetworkConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.pde_loss_weight.is_finite() && self.pde_loss_weight >= 0.0) {
            return bad(format!("pde_loss_weight must be >= 0, got {}", self.pde_loss_weight));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad(format!(
                "validation_fraction must lie in (0, 0.5], got {}",
                self.validation_fraction
            ));
        }
        for (name, v) in [
            ("latent_noise", self.latent_noise),
            ("cycle_weight", self.cycle_weight),
            ("coarse_weight", self.coarse_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        self.network.validate()
    }

    pub(crate) fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine => {
                let t = epoch as f64 / self.epochs as f64;
                0.5 * self.lr * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean minibatch loss over the epoch.
    pub train_loss: f64,
    /// Loss on the validation split, without noise or auxiliary terms.
    pub val_loss: f64,
    /// Validation reconstruction MSE per output variable (normalized units).
    pub val_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub network: String,
    pub variables: Vec<String>,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// Fraction of consecutive epochs whose training loss did not increase.
    pub fn non_increasing_fraction(&self) -> f64 {
        let pairs = self.records.windows(2);
        let n = pairs.len();
        if n == 0 {
            return 1.0;
        }
        let ok = self
            .records
            .windows(2)
            .filter(|w| w[1].train_loss <= w[0].train_loss)
            .count();
        ok as f64 / n as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,val_loss");
        for v in &self.variables {
            out.push_str(&format!(",val_mse_{v}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}",
                r.epoch, r.lr, r.train_loss, r.val_loss
            ));
            for m in &r.val_mse {
                out.push_str(&format!(",{m:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Seeds for independent random streams derived from one user seed.
pub(crate) fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        ^ stream
}

pub(crate) mod streams {
    pub const SPLIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const ENCODER: u64 = 3;
    pub const DECODER: u64 = 4;
    pub const NOISE: u64 = 5;
}

/// Deterministic shuffle of `0..n` into (train, validation) with at least
/// one sample on each side.
pub(crate) fn split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Dataset(format!("need at least 2 samples, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, streams::SPLIT)));
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// Stacks equally shaped samples into a batch.
pub(crate) fn stack(samples: &[&[f64]], shape: [usize; 3]) -> Result<Tensor4> {
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(samples.len() * len);
    for s in samples {
        if s.len() != len {
            return Err(Error::Dimension(format!(
                "sample of {} values does not fit shape {shape:?}",
                s.len()
            )));
        }
        data.extend_from_slice(s);
    }
    Tensor4::new([samples.len(), shape[0], shape[1], shape[2]], data)
}

pub(crate) fn check_finite(loss: f64, network: &str, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::TrainingDiverged {
            network: network.to_string(),
            epoch,
        })
    }
}
