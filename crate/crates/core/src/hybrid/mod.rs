//! Hybrid inference: encode the conditions, initialize the solution latent
//! from a cheap classical solve, then iterate `eta <- E(D(eta, c))` until two
//! successive latents agree.

mod trace;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use trace::{parse_trace_csv, read_trace_csv, trace_csv, write_trace_csv};

use crate::autoencoder::{encode_conditions, ModelBundle, SolutionAE};
use crate::error::{Error, Result};
use crate::field::{l2_distance, ScalarField};
use crate::solver::{coarse_initialize, Problem, DEFAULT_COARSE_ITERS, DEFAULT_COARSE_N};

/// Starting point of the latent iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Classical solve on an `n`×`n` grid capped at `iters` outer
    /// iterations, interpolated to the fine grid.
    CoarseGrid { n: usize, iters: usize },
    ZeroField,
    #[serde(skip)]
    GivenFields(Vec<ScalarField>),
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::CoarseGrid {
            n: DEFAULT_COARSE_N,
            iters: DEFAULT_COARSE_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    /// Absolute bound on `‖eta - E(D(eta))‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation: `eta <- (1 - damping) eta + damping E(D(eta))`.
    pub damping: f64,
    pub init: InitStrategy,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            tol: 1e-6,
            max_iter: 500,
            damping: 1.0,
            init: InitStrategy::default(),
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSpec("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// `‖eta_k - E(D(eta_k))‖₂` for every iteration `k = 1..=iterations`.
    pub latent_deltas: Vec<f64>,
    pub converged: bool,
    /// Iteration whose re-encoded latent was returned (the last one on
    /// convergence, the one with the smallest delta otherwise).
    pub returned_iteration: usize,
    #[serde(with = "crate::solver::duration_secs")]
    pub wall_time_total: Duration,
    /// Condition encoding, initial solve and initial encoding.
    #[serde(with = "crate::solver::duration_secs")]
    pub wall_time_init: Duration,
}

/// Encoder/decoder pair the latent iteration runs on. Latents and condition
/// vectors are flat; fields are in physical units.
pub trait LatentCodec {
    fn latent_dim(&self) -> usize;

    fn encode_fields(&self, fields: &[ScalarField]) -> Result<Vec<f64>>;

    fn decode_fields(&self, eta: &[f64], cond: &[f64]) -> Result<Vec<ScalarField>>;

    /// `E(D(eta, cond))`. Implementations may skip the physical-unit round
    /// trip as long as the result equals encoding the decoded fields.
    fn reencode(&self, eta: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        self.encode_fields(&self.decode_fields(eta, cond)?)
    }

    /// Brings initial fields into the range the encoder was trained on.
    fn prepare_initial(&self, fields: Vec<ScalarField>) -> Result<Vec<ScalarField>> {
        Ok(fields)
    }
}

impl LatentCodec for SolutionAE {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn encode_fields(&self, fields: &[ScalarField]) -> Result<Vec<f64>> {
        Ok(self.encode(fields)?.into_values())
    }

    fn decode_fields(&self, eta: &[f64], cond: &[f64]) -> Result<Vec<ScalarField>> {
        self.denormalize(&self.decode_normalized(eta, cond)?)
    }

    fn reencode(&self, eta: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        let y = self.decode_normalized(eta, cond)?;
        self.encode_normalized(&y)
    }

    fn prepare_initial(&self, fields: Vec<ScalarField>) -> Result<Vec<ScalarField>> {
        self.clamp_to_range(&fields)
    }
}

/// One decode/re-encode pass: returns `E(D(eta, cond))` and the decoded fields.
pub fn latent_step<C: LatentCodec + ?Sized>(codec: &C, eta: &[f64], cond: &[f64]) -> Result<(Vec<f64>, Vec<ScalarField>)> {
    if eta.len() != codec.latent_dim() {
        return Err(Error::Dimension(format!(
            "latent has length {}, expected {}",
            eta.len(),
            codec.latent_dim()
        )));
    }
    let fields = codec.decode_fields(eta, cond)?;
    let next = codec.encode_fields(&fields)?;
    Ok((next, fields))
}

/// Result of [`iterate_latent`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    /// Re-encoded latent that is returned as the solution.
    pub latent: Vec<f64>,
    pub deltas: Vec<f64>,
    pub converged: bool,
    pub returned_iteration: usize,
    /// Iterates `eta_0, eta_1, ...` when recording was requested.
    pub history: Vec<Vec<f64>>,
}

/// Runs the damped fixed-point iteration from `eta0`.
pub fn iterate_latent<C: LatentCodec + ?Sized>(
    codec: &C,
    cond: &[f64],
    eta0: Vec<f64>,
    cfg: &HybridConfig,
    record: bool,
) -> Result<FixedPoint> {
    cfg.validate()?;
    if eta0.len() != codec.latent_dim() {
        return Err(Error::Dimension(format!(
            "initial latent has length {}, expected {}",
            eta0.len(),
            codec.latent_dim()
        )));
    }
    if eta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { iteration: 0 });
    }
    let alpha = cfg.damping;
    let mut eta = eta0;
    let mut history = Vec::new();
    if record {
        history.push(eta.clone());
    }
    let mut deltas = Vec::with_capacity(cfg.max_iter.min(4096));
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for k in 1..=cfg.max_iter {
        let next = codec.reencode(&eta, cond).map_err(|e| match e {
            Error::NonFinite(_) => Error::NumericalBlowup { iteration: k },
            e => e,
        })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { iteration: k });
        }
        let delta = l2_distance(&next, &eta)?;
        deltas.push(delta);
        if delta < cfg.tol {
            return Ok(FixedPoint {
                latent: next,
                deltas,
                converged: true,
                returned_iteration: k,
                history,
            });
        }
        if best.as_ref().is_none_or(|b| delta < b.0) {
            best = Some((delta, k, next.clone()));
        }
        if alpha == 1.0 {
            eta = next;
        } else {
            for (e, n) in eta.iter_mut().zip(&next) {
                *e += alpha * (n - *e);
            }
        }
        if record {
            history.push(eta.clone());
        }
    }
    let (_, k, latent) = best.expect("max_iter >= 1");
    Ok(FixedPoint {
        latent,
        deltas,
        converged: false,
        returned_iteration: k,
        history,
    })
}

/// Solves `problem` with the trained bundle. Non-convergence within
/// `cfg.max_iter` is reported, not raised.
pub fn hybrid_solve(problem: &Problem, bundle: &ModelBundle, cfg: &HybridConfig) -> Result<(Vec<ScalarField>, ConvergenceReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let ae = &bundle.solution;
    if problem.grid() != &ae.grid {
        return Err(Error::DomainMismatch(format!(
            "bundle was trained on a {}x{} grid, problem is {}x{}",
            ae.grid.nx,
            ae.grid.ny,
            problem.grid().nx,
            problem.grid().ny
        )));
    }
    if problem.physics() != ae.physics {
        return Err(Error::InvalidSpec(format!(
            "bundle was trained for {:?}, problem is {:?}",
            ae.physics,
            problem.physics()
        )));
    }
    let cond = ae.condition_vector(&encode_conditions(&bundle.conditions, problem)?)?;
    let initial = match &cfg.init {
        InitStrategy::CoarseGrid { n, iters } => coarse_initialize(problem, *n, *iters, &ae.grid)?,
        InitStrategy::ZeroField => vec![ScalarField::zeros(ae.grid); ae.n_vars()],
        InitStrategy::GivenFields(f) => f.clone(),
    };
    let eta0 = ae.encode_fields(&ae.prepare_initial(initial)?)?;
    let wall_time_init = start.elapsed();

    let fp = iterate_latent(ae, &cond, eta0, cfg, false)?;
    let fields = ae.decode_fields(&fp.latent, &cond)?;
    let report = ConvergenceReport {
        iterations: fp.deltas.len(),
        latent_deltas: fp.deltas,
        converged: fp.converged,
        returned_iteration: fp.returned_iteration,
        wall_time_total: start.elapsed(),
        wall_time_init,
    };
    Ok((fields, report))
}
