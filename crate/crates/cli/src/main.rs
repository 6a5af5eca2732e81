use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use latentpde::autoencoder::ModelBundle;
use latentpde::hybrid::InitStrategy;
use latentpde::Result;
use latentpde_cli::bench::cmd_bench;
use latentpde_cli::compare::cmd_compare;
use latentpde_cli::dataset::{gen_data, load_manifest};
use latentpde_cli::solve::{cmd_solve, solve_dir, SourceInput};
use latentpde_cli::train::{bundle_dir, cmd_train};
use latentpde_cli::{exit_code, ExperimentConfig};

#[derive(Parser)]
#[command(name = "latentpde", version, about = "Latent-space hybrid PDE solver harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and test samples with the reference solver.
    GenData(Common),
    /// Train the condition and solution autoencoders.
    Train(Common),
    /// Hybrid solve for one source (`--seed` or `--source`).
    Solve {
        #[command(flatten)]
        common: Common,
        /// Mixture spec (.json) or LPDF source field.
        #[arg(long, conflicts_with = "seed")]
        source: Option<PathBuf>,
    },
    /// Hybrid vs reference solves with plots and metrics.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Source seeds; defaults to the test split of the dataset.
        #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
        seeds: Vec<u64>,
    },
    /// Wall-time statistics of hybrid and reference solves.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_cases: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Coarse,
    Zero,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gen-data and bench: dataset seed; train: training seed; solve and
    /// compare: source seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Damping of the latent iteration, in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(t) = self.tol {
            cfg.hybrid.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.hybrid.max_iter = m;
        }
        if let Some(a) = self.alpha {
            cfg.hybrid.damping = a;
        }
        match self.init {
            Some(InitArg::Zero) => cfg.hybrid.init = InitStrategy::ZeroField,
            Some(InitArg::Coarse) => {
                if !matches!(cfg.hybrid.init, InitStrategy::CoarseGrid { .. }) {
                    cfg.hybrid.init = InitStrategy::default();
                }
            }
            None => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_bundle(cfg: &ExperimentConfig) -> Result<ModelBundle> {
    ModelBundle::load(&bundle_dir(cfg))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let mut cfg = c.config()?;
            if let Some(s) = c.seed {
                cfg.dataset.seed = s;
            }
            let m = gen_data(&cfg)?;
            println!(
                "dataset: {} train + {} test samples, hash {}",
                m.train.len(),
                m.test.len(),
                m.dataset_hash
            );
        }
        Command::Train(c) => {
            let mut cfg = c.config()?;
            if let Some(s) = c.seed {
                cfg.train.seed = s;
                cfg.condition_train.seed = s;
            }
            let (_, summary) = cmd_train(&cfg)?;
            for n in &summary.networks {
                let mse: Vec<String> = n.val_mse.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
                println!(
                    "{}: latent {} (ratio {:.1}), best epoch {}, held-out MSE {}",
                    n.network,
                    n.latent_dim,
                    n.compression_ratio,
                    n.best_epoch,
                    mse.join(" ")
                );
            }
        }
        Command::Solve { common, source } => {
            let cfg = common.config()?;
            let input = match (source, common.seed) {
                (Some(p), _) => SourceInput::File(p),
                (None, Some(s)) => SourceInput::Seed(s),
                (None, None) => {
                    return Err(latentpde::Error::InvalidSpec("solve needs --seed or --source".into()))
                }
            };
            input.field(&cfg)?;
            let bundle = load_bundle(&cfg)?;
            let dir = solve_dir(&cfg, &input);
            let out = cmd_solve(&cfg, &bundle, &input, &cfg.hybrid, &dir)?;
            println!(
                "{}: converged={} after {} iterations, residual {:.3e}; wrote {}",
                out.summary.source,
                out.summary.converged,
                out.summary.iterations,
                out.summary.relative_residual,
                dir.display()
            );
        }
        Command::Compare { common, seeds } => {
            let cfg = common.config()?;
            let seeds = match (seeds.is_empty(), common.seed) {
                (false, _) => seeds,
                (true, Some(s)) => vec![s],
                (true, None) => load_manifest(&cfg)?.test.iter().map(|r| r.seed).collect(),
            };
            let bundle = load_bundle(&cfg)?;
            let report = cmd_compare(&cfg, &bundle, &seeds, &cfg.hybrid)?;
            let s = &report.summary;
            println!(
                "{} cases, {} converged, median iterations {}, mean speedup {:.2}",
                s.n_cases, s.n_converged, s.median_iterations, s.mean_speedup
            );
            for (v, e) in &s.median_relative_l2 {
                println!("median relative L2 {v}: {e:.4}");
            }
        }
        Command::Bench { common, n_cases } => {
            let mut cfg = common.config()?;
            if let Some(s) = common.seed {
                cfg.dataset.seed = s;
            }
            let bundle = load_bundle(&cfg)?;
            let r = cmd_bench(&cfg, &bundle, n_cases.unwrap_or(cfg.bench.n_cases), &cfg.hybrid)?;
            println!(
                "{} cases, {} converged; hybrid mean {:?}s, reference mean {:?}s, speedup {:?}",
                r.n_cases,
                r.n_converged,
                r.hybrid.map(|h| h.mean),
                r.reference.map(|h| h.mean),
                r.speedup
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
