use std::time::Instant;

use serde::{Deserialize, Serialize};

use latentpde::autoencoder::ModelBundle;
use latentpde::hybrid::{hybrid_solve, HybridConfig};
use latentpde::Result;

use crate::config::{source_seed, ExperimentConfig, Split};
use crate::dataset::reference_solve;
use crate::io::write_json;
use crate::stats::TimeStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub hybrid_time: f64,
    pub hybrid_init_time: f64,
    /// `None` when the reference solve failed.
    pub reference_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_cases: usize,
    pub n_converged: usize,
    pub non_converged_seeds: Vec<u64>,
    pub reference_failures: Vec<u64>,
    /// Converged hybrid solves only, initialization included.
    pub hybrid: Option<TimeStats>,
    pub hybrid_init: Option<TimeStats>,
    pub reference: Option<TimeStats>,
    /// Mean reference time over mean hybrid time.
    pub speedup: Option<f64>,
    pub cases: Vec<BenchCase>,
}

/// Times hybrid and reference solves over `n_cases` fresh sources, one at a
/// time so the measurements do not compete for cores.
pub fn run_bench(cfg: &ExperimentConfig, bundle: &ModelBundle, n_cases: usize, hybrid: &HybridConfig) -> Result<BenchReport> {
    let mut cases = Vec::with_capacity(n_cases);
    for i in 0..n_cases {
        let seed = source_seed(cfg.dataset.seed, Split::Bench, i, 0);
        let problem = cfg.problem(cfg.sample_source(seed)?.1)?;
        let (_, report) = hybrid_solve(&problem, bundle, hybrid)?;
        let start = Instant::now();
        let reference_time = match reference_solve(cfg, seed) {
            Ok((_, _, s)) if s.converged => Some(start.elapsed().as_secs_f64()),
            Ok(_) => None,
            Err(e) if e.is_numerical() => None,
            Err(e) => return Err(e),
        };
        cases.push(BenchCase {
            seed,
            converged: report.converged,
            iterations: report.iterations,
            hybrid_time: report.wall_time_total.as_secs_f64(),
            hybrid_init_time: report.wall_time_init.as_secs_f64(),
            reference_time,
        });
    }
    let ok: Vec<&BenchCase> = cases.iter().filter(|c| c.converged).collect();
    let hybrid_times: Vec<f64> = ok.iter().map(|c| c.hybrid_time).collect();
    let init_times: Vec<f64> = ok.iter().map(|c| c.hybrid_init_time).collect();
    let reference_times: Vec<f64> = cases.iter().filter_map(|c| c.reference_time).collect();
    let hybrid_stats = TimeStats::of(&hybrid_times);
    let reference_stats = TimeStats::of(&reference_times);
    Ok(BenchReport {
        n_cases,
        n_converged: ok.len(),
        non_converged_seeds: cases.iter().filter(|c| !c.converged).map(|c| c.seed).collect(),
        reference_failures: cases.iter().filter(|c| c.reference_time.is_none()).map(|c| c.seed).collect(),
        speedup: match (hybrid_stats, reference_stats) {
            (Some(h), Some(r)) if h.mean > 0.0 => Some(r.mean / h.mean),
            _ => None,
        },
        hybrid: hybrid_stats,
        hybrid_init: TimeStats::of(&init_times),
        reference: reference_stats,
        cases,
    })
}

pub fn cmd_bench(cfg: &ExperimentConfig, bundle: &ModelBundle, n_cases: usize, hybrid: &HybridConfig) -> Result<BenchReport> {
    let report = run_bench(cfg, bundle, n_cases, hybrid)?;
    write_json(&cfg.output.join("bench").join("bench.json"), &report)?;
    Ok(report)
}
