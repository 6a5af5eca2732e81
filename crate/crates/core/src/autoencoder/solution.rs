use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::train::{check_finite, split, stack, streams, sub_seed};
use super::{
    encode_conditions, mirror_signs, mirror_x, mirrored_problem, ConditionAE, ConditionLatents,
    EpochRecord, LatentRole, LatentVector, TrainConfig, TrainingLog,
};
use crate::error::{Error, Result};
use crate::field::{FieldStats, Grid, ScalarField};
use crate::neural::{adam_step, AdamConfig, AdamState, Model, Tensor4};
use crate::solver::{coarse_initialize, residual_loss, Physics, Problem, ResidualScope};

/// Autoencoder for the full solution, decoded under condition latents.
///
/// Variables are z-scored individually with `stats`; `ranges` holds the
/// per-variable minimum and maximum of the normalized training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionAE {
    pub encoder: Model,
    pub decoder: Model,
    pub latent_dim: usize,
    pub physics: Physics,
    pub grid: Grid,
    pub stats: Vec<FieldStats>,
    pub ranges: Vec<(f64, f64)>,
    pub condition_dims: BTreeMap<LatentRole, usize>,
}

/// Loss of a batch: `total = reconstruction + weight * pde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub pde: f64,
}

impl SolutionAE {
    pub fn n_vars(&self) -> usize {
        self.stats.len()
    }

    /// Solution values per latent component.
    pub fn compression_ratio(&self) -> f64 {
        (self.n_vars() * self.grid.len()) as f64 / self.latent_dim as f64
    }

    pub fn condition_dim(&self) -> usize {
        self.condition_dims.values().sum()
    }

    fn check_fields(&self, fields: &[ScalarField]) -> Result<()> {
        if fields.len() != self.n_vars() {
            return Err(Error::Dimension(format!(
                "solution autoencoder takes {} variables, got {}",
                self.n_vars(),
                fields.len()
            )));
        }
        for f in fields {
            if *f.grid() != self.grid {
                return Err(Error::Dimension(format!(
                    "solution autoencoder expects a {}x{} grid, got {}x{}",
                    self.grid.nx,
                    self.grid.ny,
                    f.grid().nx,
                    f.grid().ny
                )));
            }
        }
        Ok(())
    }

    /// Channel-major normalized values of `fields`.
    pub fn normalize(&self, fields: &[ScalarField]) -> Result<Vec<f64>> {
        self.check_fields(fields)?;
        Ok(normalize_all(fields, &self.stats))
    }

    pub fn denormalize(&self, values: &[f64]) -> Result<Vec<ScalarField>> {
        let n = self.grid.len();
        if values.len() != n * self.n_vars() {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                n * self.n_vars(),
                values.len()
            )));
        }
        values
            .chunks(n)
            .zip(&self.stats)
            .map(|(c, s)| ScalarField::new(self.grid, c.iter().map(|v| v * s.std + s.mean).collect()))
            .collect()
    }

    /// Clips each variable to its training range.
    pub fn clamp_to_range(&self, fields: &[ScalarField]) -> Result<Vec<ScalarField>> {
        self.check_fields(fields)?;
        fields
            .iter()
            .zip(self.stats.iter().zip(&self.ranges))
            .map(|(f, (s, &(lo, hi)))| {
                let (lo, hi) = (lo * s.std + s.mean, hi * s.std + s.mean);
                f.map(|v| v.clamp(lo, hi))
            })
            .collect()
    }

    /// Concatenates condition latents in role order after checking that every
    /// registered role is present with its registered length.
    pub fn condition_vector(&self, cond: &ConditionLatents) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.condition_dim());
        for (role, &dim) in &self.condition_dims {
            let z = cond.get(role).ok_or_else(|| {
                Error::Dimension(format!("missing {} condition latent", role.name()))
            })?;
            if z.len() != dim {
                return Err(Error::Dimension(format!(
                    "{} latent has length {}, expected {dim}",
                    role.name(),
                    z.len()
                )));
            }
            out.extend_from_slice(z.values());
        }
        if cond.len() != self.condition_dims.len() {
            return Err(Error::Dimension(format!(
                "got {} condition latents, expected {}",
                cond.len(),
                self.condition_dims.len()
            )));
        }
        Ok(out)
    }

    /// Encoder applied to normalized values.
    pub fn encode_normalized(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = Tensor4::new([1, self.n_vars(), self.grid.ny, self.grid.nx], x.to_vec())?;
        Ok(self.encoder.infer(&t)?.into_data())
    }

    /// Decoder output in normalized units.
    pub fn decode_normalized(&self, z: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim || cond.len() != self.condition_dim() {
            return Err(Error::Dimension(format!(
                "decoder takes {}+{} inputs, got {}+{}",
                self.latent_dim,
                self.condition_dim(),
                z.len(),
                cond.len()
            )));
        }
        let mut input = Vec::with_capacity(z.len() + cond.len());
        input.extend_from_slice(z);
        input.extend_from_slice(cond);
        let t = Tensor4::new([1, input.len(), 1, 1], input)?;
        Ok(self.decoder.infer(&t)?.into_data())
    }

    pub fn encode(&self, fields: &[ScalarField]) -> Result<LatentVector> {
        let x = self.normalize(fields)?;
        LatentVector::new(LatentRole::Solution, self.encode_normalized(&x)?)
    }

    pub fn decode(&self, latent: &LatentVector, cond: &ConditionLatents) -> Result<Vec<ScalarField>> {
        if latent.len() != self.latent_dim {
            return Err(Error::Dimension(format!(
                "solution latent has length {}, expected {}",
                latent.len(),
                self.latent_dim
            )));
        }
        let c = self.condition_vector(cond)?;
        self.denormalize(&self.decode_normalized(latent.values(), &c)?)
    }

    /// Deterministic training objective (no latent noise or auxiliary
    /// terms) averaged over the given samples.
    pub fn loss(
        &self,
        solutions: &[Vec<ScalarField>],
        problems: &[Problem],
        conditions: &[ConditionLatents],
        pde_weight: f64,
        scope: ResidualScope,
    ) -> Result<SolutionLoss> {
        if solutions.len() != problems.len() || solutions.len() != conditions.len() || solutions.is_empty() {
            return Err(Error::Dimension("solutions, problems and conditions must pair up".into()));
        }
        let items = solutions
            .iter()
            .zip(problems)
            .zip(conditions)
            .map(|((s, p), c)| {
                Ok(Item {
                    x: self.normalize(s)?,
                    problem: p.clone(),
                    cond: self.condition_vector(c)?,
                    coarse: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Item> = items.iter().collect();
        let objective = Objective {
            stats: &self.stats,
            pde_weight,
            scope,
        };
        let shape = [self.n_vars(), self.grid.ny, self.grid.nx];
        let z = self.encoder.infer(&stack_x(&refs, shape)?)?;
        let y = self.decoder.infer(&decoder_input(&z, &refs)?)?;
        Ok(objective.evaluate(&y, &refs, false)?.0)
    }
}

fn normalize_all(fields: &[ScalarField], stats: &[FieldStats]) -> Vec<f64> {
    let mut out = Vec::with_capacity(fields.len() * fields[0].values().len());
    for (f, s) in fields.iter().zip(stats) {
        out.extend(f.values().iter().map(|v| (v - s.mean) / s.std));
    }
    out
}

/// One training sample in normalized form.
struct Item {
    x: Vec<f64>,
    problem: Problem,
    cond: Vec<f64>,
    coarse: Option<Vec<f64>>,
}

fn stack_x(items: &[&Item], shape: [usize; 3]) -> Result<Tensor4> {
    let rows: Vec<&[f64]> = items.iter().map(|i| i.x.as_slice()).collect();
    stack(&rows, shape)
}

fn decoder_input(z: &Tensor4, items: &[&Item]) -> Result<Tensor4> {
    let l = z.sample_len();
    let c = items.first().map_or(0, |i| i.cond.len());
    let mut data = Vec::with_capacity(items.len() * (l + c));
    for (b, it) in items.iter().enumerate() {
        data.extend_from_slice(z.sample(b));
        data.extend_from_slice(&it.cond);
    }
    Tensor4::new([items.len(), l + c, 1, 1], data)
}

struct Objective<'a> {
    stats: &'a [FieldStats],
    pde_weight: f64,
    scope: ResidualScope,
}

impl Objective<'_> {
    /// Batch loss and, if `with_grad`, its gradient with respect to the
    /// decoder output. Also returns the per-variable reconstruction MSE.
    fn evaluate(&self, y: &Tensor4, items: &[&Item], with_grad: bool) -> Result<(SolutionLoss, Tensor4, Vec<f64>)> {
        let b = items.len() as f64;
        let n_vars = self.stats.len();
        let per_var = y.sample_len() / n_vars;
        let n = y.data().len() as f64;
        let mut dy = Tensor4::zeros(if with_grad { y.shape() } else { [0, 0, 0, 0] });
        let mut recon = 0.0;
        let mut var_mse = vec![0.0; n_vars];
        for (k, it) in items.iter().enumerate() {
            let out = y.sample(k);
            for (p, (a, t)) in out.iter().zip(&it.x).enumerate() {
                let e = a - t;
                recon += e * e;
                var_mse[p / per_var] += e * e;
            }
            if with_grad {
                for ((d, a), t) in dy.sample_mut(k).iter_mut().zip(out).zip(&it.x) {
                    *d = 2.0 * (a - t) / n;
                }
            }
        }
        recon /= n;
        for m in &mut var_mse {
            *m /= b * per_var as f64;
        }

        let mut pde = 0.0;
        if self.pde_weight > 0.0 {
            for (k, it) in items.iter().enumerate() {
                let grid = *it.problem.grid();
                let fields = y
                    .sample(k)
                    .chunks(per_var)
                    .zip(self.stats)
                    .map(|(c, s)| ScalarField::new(grid, c.iter().map(|v| v * s.std + s.mean).collect()))
                    .collect::<Result<Vec<_>>>()?;
                let r = residual_loss(&it.problem, &fields, self.scope)?;
                pde += r.value / b;
                if with_grad {
                    let scale = self.pde_weight / b;
                    let d = dy.sample_mut(k);
                    for (v, (g, s)) in r.gradients.iter().zip(self.stats).enumerate() {
                        for (dst, gv) in d[v * per_var..(v + 1) * per_var].iter_mut().zip(g) {
                            *dst += scale * gv * s.std;
                        }
                    }
                }
            }
        }
        let loss = SolutionLoss {
            total: recon + self.pde_weight * pde,
            reconstruction: recon,
            pde,
        };
        Ok((loss, dy, var_mse))
    }
}

/// `weight * mean((a - target)²)` and its gradient with respect to `a`.
fn anchored_penalty(a: &Tensor4, target: &Tensor4, weight: f64) -> (f64, Tensor4) {
    let n = a.data().len() as f64;
    let mut d = Tensor4::zeros(a.shape());
    let mut loss = 0.0;
    for ((g, x), t) in d.data_mut().iter_mut().zip(a.data()).zip(target.data()) {
        let e = x - t;
        loss += e * e;
        *g = 2.0 * weight * e / n;
    }
    (weight * loss / n, d)
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Trains the solution autoencoder on `solutions[i]` (variables in
/// `Physics::var_names` order) for `problems[i]`. The condition autoencoders
/// stay frozen; their latents are appended to the decoder input.
///
/// Besides reconstruction and the weighted PDE residual, `cfg` can enable
/// latent noise, a re-encoding term tying `E(D(z̃, c))` to `z`, and a term
/// tying the encoding of the clamped coarse-grid solution to `z`. With
/// `cfg.mirror_augmentation` every training sample is also used reflected.
pub fn train_solution_ae(
    solutions: &[Vec<ScalarField>],
    condition_aes: &BTreeMap<LatentRole, ConditionAE>,
    problems: &[Problem],
    latent_dim: usize,
    cfg: &TrainConfig,
) -> Result<(SolutionAE, TrainingLog)> {
    cfg.validate()?;
    if solutions.len() != problems.len() {
        return Err(Error::Dataset(format!(
            "{} solutions but {} problems",
            solutions.len(),
            problems.len()
        )));
    }
    if solutions.len() < 20 {
        return Err(Error::Dataset(format!(
            "solution autoencoder needs at least 20 samples, got {}",
            solutions.len()
        )));
    }
    for role in LatentRole::CONDITIONS {
        if !condition_aes.contains_key(&role) {
            return Err(Error::InvalidSpec(format!(
                "missing {} condition autoencoder",
                role.name()
            )));
        }
    }
    let physics = problems[0].physics();
    let grid = *problems[0].grid();
    let n_vars = physics.n_vars();
    for (k, (s, p)) in solutions.iter().zip(problems).enumerate() {
        if p.physics() != physics || *p.grid() != grid {
            return Err(Error::Dataset(format!("problem {k} differs in physics or grid from problem 0")));
        }
        if s.len() != n_vars || s.iter().any(|f| *f.grid() != grid) {
            return Err(Error::Dataset(format!(
                "sample {k} must hold {n_vars} fields on the problem grid"
            )));
        }
    }
    let condition_dims: BTreeMap<LatentRole, usize> = condition_aes
        .iter()
        .filter(|(r, _)| LatentRole::CONDITIONS.contains(r))
        .map(|(&r, ae)| (r, ae.latent_dim))
        .collect();
    let cond_vec = |p: &Problem| -> Result<Vec<f64>> {
        let c = encode_conditions(condition_aes, p)?;
        Ok(c.values().flat_map(|z| z.values().iter().copied()).collect())
    };

    let (train_idx, val_idx) = split(solutions.len(), cfg.validation_fraction, cfg.seed)?;
    let mut raw: Vec<(Vec<ScalarField>, Problem)> = train_idx
        .iter()
        .map(|&i| (solutions[i].clone(), problems[i].clone()))
        .collect();
    if cfg.mirror_augmentation {
        let signs = mirror_signs(&problems[0]);
        let mut mirrored = Vec::with_capacity(raw.len());
        for (s, p) in &raw {
            let fields = s
                .iter()
                .zip(&signs)
                .map(|(f, &sg)| mirror_x(f).map(|v| sg * v))
                .collect::<Result<Vec<_>>>()?;
            mirrored.push((fields, mirrored_problem(p)?));
        }
        raw.extend(mirrored);
    }
    let stats: Vec<FieldStats> = (0..n_vars)
        .map(|v| FieldStats::from_fields(raw.iter().map(|(s, _)| &s[v])))
        .collect();
    let per_var = grid.len();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_vars];

    let mut train = Vec::with_capacity(raw.len());
    for (s, p) in raw {
        let x = normalize_all(&s, &stats);
        for (v, r) in ranges.iter_mut().enumerate() {
            for &val in &x[v * per_var..(v + 1) * per_var] {
                r.0 = r.0.min(val);
                r.1 = r.1.max(val);
            }
        }
        let cond = cond_vec(&p)?;
        train.push(Item {
            x,
            problem: p,
            cond,
            coarse: None,
        });
    }
    if cfg.coarse_weight > 0.0 {
        for it in &mut train {
            let coarse = coarse_initialize(&it.problem, cfg.coarse_n, cfg.coarse_iters, &grid)?;
            let mut c = normalize_all(&coarse, &stats);
            for (v, &(lo, hi)) in ranges.iter().enumerate() {
                for val in &mut c[v * per_var..(v + 1) * per_var] {
                    *val = val.clamp(lo, hi);
                }
            }
            it.coarse = Some(c);
        }
    }
    let val = val_idx
        .iter()
        .map(|&i| {
            Ok(Item {
                x: normalize_all(&solutions[i], &stats),
                problem: problems[i].clone(),
                cond: cond_vec(&problems[i])?,
                coarse: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cond_dim: usize = condition_dims.values().sum();
    let shape = [n_vars, grid.ny, grid.nx];
    let mut encoder = Model::new(
        cfg.network.encoder(n_vars, &grid, latent_dim)?,
        sub_seed(cfg.seed, streams::ENCODER),
    )?;
    let mut decoder = Model::new(
        cfg.network.decoder(latent_dim + cond_dim, n_vars, &grid)?,
        sub_seed(cfg.seed, streams::DECODER),
    )?;
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut opt_e = AdamState::for_model(&encoder, adam);
    let mut opt_d = AdamState::for_model(&decoder, adam);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, streams::SHUFFLE));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, streams::NOISE));
    let objective = Objective {
        stats: &stats,
        pde_weight: cfg.pde_loss_weight,
        scope: cfg.pde_scope,
    };
    let network = "solution";

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        opt_e.config.lr = lr;
        opt_d.config.lr = lr;
        order.shuffle(&mut shuffle_rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<&Item> = chunk.iter().map(|&i| &train[i]).collect();
            let x = stack_x(&items, shape)?;
            let (z, tape_z) = encoder.forward(&x)?;

            let mut z_in = z.clone();
            if cfg.latent_noise > 0.0 && z.batch() > 1 {
                let b = z.batch();
                for k in 0..latent_dim {
                    let mean = (0..b).map(|i| z.sample(i)[k]).sum::<f64>() / b as f64;
                    let sd = ((0..b).map(|i| (z.sample(i)[k] - mean).powi(2)).sum::<f64>() / b as f64).sqrt();
                    for i in 0..b {
                        let e: f64 = StandardNormal.sample(&mut noise_rng);
                        z_in.sample_mut(i)[k] += cfg.latent_noise * sd * e;
                    }
                }
            }
            let (y, tape_y) = decoder.forward(&decoder_input(&z_in, &items)?)?;
            let (parts, mut dy, _) = objective.evaluate(&y, &items, true)?;
            let mut loss = parts.total;
            let mut grad_e = vec![0.0; encoder.n_params()];

            if cfg.cycle_weight > 0.0 {
                let (z2, tape_2) = encoder.forward(&y)?;
                let (l, d) = anchored_penalty(&z2, &z, cfg.cycle_weight);
                loss += l;
                let g = encoder.backward(&tape_2, &d)?;
                add_into(&mut grad_e, &g.params);
                add_into(dy.data_mut(), g.input.data());
            }
            if cfg.coarse_weight > 0.0 {
                let rows: Vec<&[f64]> = items
                    .iter()
                    .map(|i| i.coarse.as_deref().expect("coarse fields prepared"))
                    .collect();
                let (zc, tape_c) = encoder.forward(&stack(&rows, shape)?)?;
                let (l, d) = anchored_penalty(&zc, &z, cfg.coarse_weight);
                loss += l;
                add_into(&mut grad_e, &encoder.backward(&tape_c, &d)?.params);
            }
            check_finite(loss, network, epoch)?;

            let gd = decoder.backward(&tape_y, &dy)?;
            let mut dz = Tensor4::zeros(z.shape());
            for b in 0..items.len() {
                dz.sample_mut(b).copy_from_slice(&gd.input.sample(b)[..latent_dim]);
            }
            add_into(&mut grad_e, &encoder.backward(&tape_z, &dz)?.params);
            adam_step(&mut decoder, &gd.params, &mut opt_d)?;
            adam_step(&mut encoder, &grad_e, &mut opt_e)?;
            sum += loss * items.len() as f64;
            count += items.len();
        }
        let train_loss = sum / count as f64;

        let (mut val_loss, mut val_mse) = (0.0, vec![0.0; n_vars]);
        for chunk in val.chunks(32) {
            let items: Vec<&Item> = chunk.iter().collect();
            let z = encoder.infer(&stack_x(&items, shape)?)?;
            let y = decoder.infer(&decoder_input(&z, &items)?)?;
            let (l, _, m) = objective.evaluate(&y, &items, false)?;
            let w = items.len() as f64 / val.len() as f64;
            val_loss += w * l.total;
            for (a, b) in val_mse.iter_mut().zip(m) {
                *a += w * b;
            }
        }
        check_finite(val_loss, network, epoch)?;
        records.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
            val_mse,
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
        variables: physics.var_names().iter().map(|s| s.to_string()).collect(),
        records,
        best_epoch,
    };
    Ok((
        SolutionAE {
            encoder,
            decoder,
            latent_dim,
            physics,
            grid,
            stats,
            ranges,
            condition_dims,
        },
        log,
    ))
}
