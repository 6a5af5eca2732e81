use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use latentpde::autoencoder::ModelBundle;
use latentpde::conditions::GaussianMixtureSpec;
use latentpde::field::io::{decode_field, encode_field};
use latentpde::hybrid::{hybrid_solve, trace_csv, ConvergenceReport, HybridConfig};
use latentpde::solver::{relative_residual, Problem};
use latentpde::{Error, Result, ScalarField};

use crate::config::ExperimentConfig;
use crate::io::{publish_dir, write_json};

/// Where the heat source of a solve comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceInput {
    /// Mixture drawn with the configured source ranges.
    Seed(u64),
    /// A mixture spec (`.json`) or an LPDF field on the configured grid.
    File(PathBuf),
}

impl SourceInput {
    pub fn label(&self) -> String {
        match self {
            SourceInput::Seed(s) => format!("seed_{s}"),
            SourceInput::File(p) => format!(
                "file_{}",
                p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            ),
        }
    }

    pub fn field(&self, cfg: &ExperimentConfig) -> Result<ScalarField> {
        match self {
            SourceInput::Seed(s) => Ok(cfg.sample_source(*s)?.1),
            SourceInput::File(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                if path.extension().is_some_and(|e| e == "json") {
                    let text = String::from_utf8(bytes).map_err(|e| Error::Format {
                        offset: e.utf8_error().valid_up_to(),
                        message: format!("{} is not UTF-8", path.display()),
                    })?;
                    let spec = GaussianMixtureSpec::from_json(&text).map_err(|e| match e {
                        Error::Json(j) => Error::Format {
                            offset: 0,
                            message: format!("{}: {j}", path.display()),
                        },
                        e => e,
                    })?;
                    spec.evaluate(&cfg.grid)
                } else {
                    decode_field(&bytes, &cfg.grid)
                }
            }
        }
    }
}

/// Deterministic part of a solve record; timings live in `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub source: String,
    pub converged: bool,
    pub iterations: usize,
    pub returned_iteration: usize,
    pub final_delta: Option<f64>,
    /// PDE residual of the decoded fields relative to the source scale.
    pub relative_residual: f64,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTiming {
    pub wall_time_total: f64,
    pub wall_time_init: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub problem: Problem,
    pub fields: Vec<ScalarField>,
    pub report: ConvergenceReport,
    pub summary: SolveSummary,
}

pub fn solve_source(
    cfg: &ExperimentConfig,
    bundle: &ModelBundle,
    source: &SourceInput,
    hybrid: &HybridConfig,
) -> Result<SolveOutcome> {
    let problem = cfg.problem(source.field(cfg)?)?;
    let (fields, report) = hybrid_solve(&problem, bundle, hybrid)?;
    let summary = SolveSummary {
        source: source.label(),
        converged: report.converged,
        iterations: report.iterations,
        returned_iteration: report.returned_iteration,
        final_delta: report.latent_deltas.last().copied(),
        relative_residual: relative_residual(&problem, &fields)?,
        variables: cfg.physics.var_names().iter().map(|v| v.to_string()).collect(),
    };
    Ok(SolveOutcome {
        problem,
        fields,
        report,
        summary,
    })
}

pub fn solve_dir(cfg: &ExperimentConfig, source: &SourceInput) -> PathBuf {
    cfg.output.join("solve").join(source.label())
}

/// Runs one hybrid solve and writes `<var>.lpdf`, `trace.csv`,
/// `summary.json` and `timing.json` into `dir`.
pub fn cmd_solve(
    cfg: &ExperimentConfig,
    bundle: &ModelBundle,
    source: &SourceInput,
    hybrid: &HybridConfig,
    dir: &Path,
) -> Result<SolveOutcome> {
    let out = solve_source(cfg, bundle, source, hybrid)?;
    publish_dir(dir, |tmp| {
        for (name, f) in cfg.physics.var_names().iter().zip(&out.fields) {
            let p = tmp.join(format!("{name}.lpdf"));
            std::fs::write(&p, encode_field(f)).map_err(|e| Error::io(&p, e))?;
        }
        let p = tmp.join("trace.csv");
        std::fs::write(&p, trace_csv(&out.report)).map_err(|e| Error::io(&p, e))?;
        write_json(&tmp.join("summary.json"), &out.summary)?;
        write_json(
            &tmp.join("timing.json"),
            &SolveTiming {
                wall_time_total: out.report.wall_time_total.as_secs_f64(),
                wall_time_init: out.report.wall_time_init.as_secs_f64(),
            },
        )
    })?;
    Ok(out)
}
