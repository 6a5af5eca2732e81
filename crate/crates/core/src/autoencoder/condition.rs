use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::{check_finite, split, stack, streams, sub_seed};
use super::{mirror_x, LatentRole, LatentVector, TrainConfig, TrainingLog};
use crate::autoencoder::EpochRecord;
use crate::error::{Error, Result};
use crate::field::{denormalize, normalize, FieldStats, Grid, ScalarField};
use crate::neural::{AdamConfig, AdamState, Model, Tensor4};

/// Autoencoder for one scalar condition field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAE {
    pub role: LatentRole,
    pub encoder: Model,
    pub decoder: Model,
    pub latent_dim: usize,
    pub stats: FieldStats,
    pub grid: Grid,
}

impl ConditionAE {
    /// Grid nodes per latent component.
    pub fn compression_ratio(&self) -> f64 {
        self.grid.len() as f64 / self.latent_dim as f64
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::Dimension(format!(
                "{} autoencoder expects a {}x{} grid, got {}x{}",
                self.role.name(),
                self.grid.nx,
                self.grid.ny,
                f.grid().nx,
                f.grid().ny
            )));
        }
        Ok(())
    }

    pub fn encode(&self, field: &ScalarField) -> Result<LatentVector> {
        Ok(self.encode_many(std::slice::from_ref(field))?.remove(0))
    }

    pub fn encode_many(&self, fields: &[ScalarField]) -> Result<Vec<LatentVector>> {
        let mut data = Vec::with_capacity(fields.len() * self.grid.len());
        for f in fields {
            self.check_grid(f)?;
            data.extend(normalize(f, &self.stats).into_values());
        }
        let x = Tensor4::new([fields.len(), 1, self.grid.ny, self.grid.nx], data)?;
        let z = self.encoder.infer(&x)?;
        (0..fields.len())
            .map(|b| LatentVector::new(self.role, z.sample(b).to_vec()))
            .collect()
    }

    pub fn decode(&self, latent: &LatentVector) -> Result<ScalarField> {
        if latent.len() != self.latent_dim {
            return Err(Error::Dimension(format!(
                "{} latent has length {}, expected {}",
                self.role.name(),
                latent.len(),
                self.latent_dim
            )));
        }
        let z = Tensor4::new([1, self.latent_dim, 1, 1], latent.values().to_vec())?;
        let out = self.decoder.infer(&z)?.into_data();
        Ok(denormalize(&ScalarField::new(self.grid, out)?, &self.stats))
    }
}

/// Trains an autoencoder on `fields` by minimizing the mean squared
/// reconstruction error of the normalized fields. `cfg.pde_loss_weight` and
/// the latent-regularization terms do not apply here and are ignored.
pub fn train_condition_ae(
    fields: &[ScalarField],
    role: LatentRole,
    latent_dim: usize,
    cfg: &TrainConfig,
) -> Result<(ConditionAE, TrainingLog)> {
    cfg.validate()?;
    if role == LatentRole::Solution {
        return Err(Error::InvalidSpec("the solution role has its own autoencoder".into()));
    }
    if fields.len() < 20 {
        return Err(Error::Dataset(format!(
            "condition autoencoder needs at least 20 samples, got {}",
            fields.len()
        )));
    }
    let grid = *fields[0].grid();
    if let Some(k) = fields.iter().position(|f| *f.grid() != grid) {
        return Err(Error::Dataset(format!("sample {k} is on a different grid than sample 0")));
    }
    let network = role.name();
    let (train_idx, val_idx) = split(fields.len(), cfg.validation_fraction, cfg.seed)?;
    let mut train: Vec<ScalarField> = train_idx.iter().map(|&i| fields[i].clone()).collect();
    if cfg.mirror_augmentation {
        let mirrored: Vec<ScalarField> = train.iter().map(mirror_x).collect();
        train.extend(mirrored);
    }
    let stats = FieldStats::from_fields(&train);
    let train: Vec<Vec<f64>> = train.iter().map(|f| normalize(f, &stats).into_values()).collect();
    let val: Vec<Vec<f64>> = val_idx
        .iter()
        .map(|&i| normalize(&fields[i], &stats).into_values())
        .collect();

    let shape = [1, grid.ny, grid.nx];
    let mut encoder = Model::new(
        cfg.network.encoder(1, &grid, latent_dim)?,
        sub_seed(cfg.seed, streams::ENCODER),
    )?;
    let mut decoder = Model::new(
        cfg.network.decoder(latent_dim, 1, &grid)?,
        sub_seed(cfg.seed, streams::DECODER),
    )?;
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut opt_e = AdamState::for_model(&encoder, adam);
    let mut opt_d = AdamState::for_model(&decoder, adam);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, streams::SHUFFLE));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        opt_e.config.lr = lr;
        opt_d.config.lr = lr;
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| train[i].as_slice()).collect();
            let x = stack(&rows, shape)?;
            let (z, tape_e) = encoder.forward(&x)?;
            let (y, tape_d) = decoder.forward(&z)?;
            let n = y.data().len() as f64;
            let mut dy = Tensor4::zeros(y.shape());
            let mut loss = 0.0;
            for ((d, a), b) in dy.data_mut().iter_mut().zip(y.data()).zip(x.data()) {
                let e = a - b;
                loss += e * e;
                *d = 2.0 * e / n;
            }
            loss /= n;
            check_finite(loss, network, epoch)?;
            let gd = decoder.backward(&tape_d, &dy)?;
            let ge = encoder.backward(&tape_e, &gd.input)?;
            crate::neural::adam_step(&mut decoder, &gd.params, &mut opt_d)?;
            crate::neural::adam_step(&mut encoder, &ge.params, &mut opt_e)?;
            sum += loss * chunk.len() as f64;
            count += chunk.len();
        }
        let train_loss = sum / count as f64;
        let val_loss = reconstruction_mse(&encoder, &decoder, &val, shape)?;
        check_finite(val_loss, network, epoch)?;
        records.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
            val_mse: vec![val_loss],
        });
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, epoch, encoder.params().to_vec(), decoder.params().to_vec()));
        }
    }
    let (_, best_epoch, pe, pd) = best.expect("at least one epoch");
    encoder.set_params(&pe)?;
    decoder.set_params(&pd)?;
    let log = TrainingLog {
        network: network.to_string(),
        variables: vec![network.to_string()],
        records,
        best_epoch,
    };
    Ok((
        ConditionAE {
            role,
            encoder,
            decoder,
            latent_dim,
            stats,
            grid,
        },
        log,
    ))
}

/// Mean squared reconstruction error over normalized samples.
pub(crate) fn reconstruction_mse(encoder: &Model, decoder: &Model, samples: &[Vec<f64>], shape: [usize; 3]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for chunk in samples.chunks(32) {
        let rows: Vec<&[f64]> = chunk.iter().map(|s| s.as_slice()).collect();
        let x = stack(&rows, shape)?;
        let y = decoder.infer(&encoder.infer(&x)?)?;
        for (a, b) in y.data().iter().zip(x.data()) {
            sum += (a - b) * (a - b);
        }
        n += x.data().len();
    }
    Ok(sum / n.max(1) as f64)
}
