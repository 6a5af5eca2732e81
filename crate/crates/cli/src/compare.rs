use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use latentpde::autoencoder::ModelBundle;
use latentpde::conditions::Rect;
use latentpde::field::{max_abs_error, mse, relative_l2};
use latentpde::hybrid::{hybrid_solve, ConvergenceReport, HybridConfig};
use latentpde::{Error, Result, ScalarField};

use crate::config::ExperimentConfig;
use crate::dataset::{reference_solve, worker_pool};
use crate::io::{publish_dir, write_atomic, write_json};
use crate::plot::{centerline_csv, grid_csv, node_window, pgm};
use crate::stats::{mean, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMetrics {
    pub name: String,
    pub mse: f64,
    pub relative_l2: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMetrics {
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub first_delta: f64,
    pub variables: Vec<VariableMetrics>,
    /// Hybrid solve including initialization, seconds.
    pub hybrid_time: f64,
    pub hybrid_init_time: f64,
    pub reference_time: f64,
    /// `reference_time / hybrid_time`.
    pub speedup: f64,
}

impl ComparisonMetrics {
    pub fn variable(&self, name: &str) -> Option<&VariableMetrics> {
        self.variables.iter().find(|v| v.name == name)
    }
}

pub fn field_metrics(names: &[&str], hybrid: &[ScalarField], reference: &[ScalarField]) -> Result<Vec<VariableMetrics>> {
    if hybrid.len() != names.len() || reference.len() != names.len() {
        return Err(Error::Dimension(format!(
            "expected {} fields, got {} and {}",
            names.len(),
            hybrid.len(),
            reference.len()
        )));
    }
    names
        .iter()
        .zip(hybrid.iter().zip(reference))
        .map(|(n, (h, r))| {
            Ok(VariableMetrics {
                name: n.to_string(),
                mse: mse(h, r)?,
                relative_l2: relative_l2(h, r)?,
                max_abs_error: max_abs_error(h, r)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub metrics: ComparisonMetrics,
    pub hybrid: Vec<ScalarField>,
    pub reference: Vec<ScalarField>,
    pub report: ConvergenceReport,
}

/// Hybrid and fine reference solve of the source drawn from `seed`.
pub fn compare_case(cfg: &ExperimentConfig, bundle: &ModelBundle, seed: u64, hybrid: &HybridConfig) -> Result<CaseOutcome> {
    let start = Instant::now();
    let (problem, reference, _) = reference_solve(cfg, seed)?;
    let reference_time = start.elapsed().as_secs_f64();
    let (fields, report) = hybrid_solve(&problem, bundle, hybrid)?;
    let hybrid_time = report.wall_time_total.as_secs_f64();
    let metrics = ComparisonMetrics {
        seed,
        converged: report.converged,
        iterations: report.iterations,
        first_delta: report.latent_deltas[0],
        variables: field_metrics(cfg.physics.var_names(), &fields, &reference)?,
        hybrid_time,
        hybrid_init_time: report.wall_time_init.as_secs_f64(),
        reference_time,
        speedup: reference_time / hybrid_time.max(f64::MIN_POSITIVE),
    };
    Ok(CaseOutcome {
        metrics,
        hybrid: fields,
        reference,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub n_cases: usize,
    pub n_converged: usize,
    pub median_relative_l2: BTreeMap<String, f64>,
    /// Over all cases; a non-converged case counts with its iteration cap.
    pub median_iterations: f64,
    pub mean_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub hybrid: HybridConfig,
    pub cases: Vec<ComparisonMetrics>,
    pub summary: CompareSummary,
}

pub fn summarize(names: &[&str], cases: &[ComparisonMetrics]) -> CompareSummary {
    let iters: Vec<f64> = cases.iter().map(|c| c.iterations as f64).collect();
    let speedups: Vec<f64> = cases.iter().map(|c| c.speedup).collect();
    CompareSummary {
        n_cases: cases.len(),
        n_converged: cases.iter().filter(|c| c.converged).count(),
        median_relative_l2: names
            .iter()
            .map(|n| {
                let v: Vec<f64> = cases.iter().filter_map(|c| c.variable(n)).map(|m| m.relative_l2).collect();
                (n.to_string(), median(&v).unwrap_or(f64::NAN))
            })
            .collect(),
        median_iterations: median(&iters).unwrap_or(f64::NAN),
        mean_speedup: mean(&speedups).unwrap_or(f64::NAN),
    }
}

/// Contours (full and chip-cropped), grids and centerline profiles for one case.
pub fn write_case_plots(cfg: &ExperimentConfig, case: &CaseOutcome, dir: &Path) -> Result<()> {
    let grid = cfg.grid;
    let full = (0, grid.nx - 1, 0, grid.ny - 1);
    let chip = cfg
        .geometry
        .solid("chip")
        .map(|s| s.rect)
        .unwrap_or_else(|| Rect::of_grid(&grid));
    let crop = node_window(&grid, &chip);
    publish_dir(dir, |tmp| {
        for (k, name) in cfg.physics.var_names().iter().enumerate() {
            let (h, r) = (&case.hybrid[k], &case.reference[k]);
            let range = (h.min().min(r.min()), h.max().max(r.max()));
            for (label, f) in [("hybrid", h), ("reference", r)] {
                write_atomic(&tmp.join(format!("{name}_{label}.csv")), grid_csv(f).as_bytes())?;
                write_atomic(&tmp.join(format!("{name}_{label}.pgm")), &pgm(f, full, range))?;
                let crop_range = {
                    let (i0, i1, j0, j1) = crop;
                    let vals = (j0..=j1).flat_map(|j| (i0..=i1).flat_map(move |i| [h.at(i, j), r.at(i, j)]));
                    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
                };
                write_atomic(&tmp.join(format!("{name}_{label}_chip.pgm")), &pgm(f, crop, crop_range))?;
            }
            write_atomic(&tmp.join(format!("{name}_centerline.csv")), centerline_csv(h, r).as_bytes())?;
        }
        write_json(&tmp.join("metrics.json"), &case.metrics)
    })
}

pub fn compare_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.join("compare")
}

/// Compares hybrid and reference solves for every seed, writing per-seed
/// plots and `metrics.json` under `<output>/compare`.
pub fn cmd_compare(cfg: &ExperimentConfig, bundle: &ModelBundle, seeds: &[u64], hybrid: &HybridConfig) -> Result<CompareReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidSpec("compare needs at least one seed".into()));
    }
    let root = compare_dir(cfg);
    let pool = worker_pool()?;
    let cases: Vec<Result<ComparisonMetrics>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let case = compare_case(cfg, bundle, seed, hybrid)?;
                write_case_plots(cfg, &case, &root.join(format!("seed_{seed}")))?;
                Ok(case.metrics)
            })
            .collect()
    });
    let cases = cases.into_iter().collect::<Result<Vec<_>>>()?;
    let report = CompareReport {
        hybrid: hybrid.clone(),
        summary: summarize(cfg.physics.var_names(), &cases),
        cases,
    };
    write_json(&root.join("metrics.json"), &report)?;
    Ok(report)
}
