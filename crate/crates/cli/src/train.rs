use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use latentpde::autoencoder::{
    condition_fields, train_condition_ae, train_solution_ae, LatentRole, ModelBundle, TrainingLog,
};
use latentpde::{Result, ScalarField};

use crate::config::{sha256_hex, ExperimentConfig, Split};
use crate::dataset::{load_manifest, load_split};
use crate::io::{publish_dir, read_json, write_atomic, write_json};

pub fn bundle_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.join("bundle")
}

pub fn logs_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.join("logs")
}

/// Best-epoch validation figures of one trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub network: String,
    pub latent_dim: usize,
    pub compression_ratio: f64,
    pub best_epoch: usize,
    /// Held-out reconstruction MSE per variable, normalized units.
    pub val_mse: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Identifies dataset and every training setting.
    pub stamp: String,
    pub networks: Vec<NetworkSummary>,
    /// Seconds spent training all networks.
    pub wall_time: f64,
}

fn stamp(cfg: &ExperimentConfig, dataset_hash: &str) -> String {
    let key = serde_json::json!({
        "dataset": dataset_hash,
        "latent": cfg.latent,
        "condition_train": cfg.condition_train,
        "train": cfg.train,
    });
    sha256_hex(key.to_string().as_bytes())
}

fn summarize(log: &TrainingLog, latent_dim: usize, ratio: f64) -> NetworkSummary {
    let best = log.best().expect("training ran at least one epoch");
    NetworkSummary {
        network: log.network.clone(),
        latent_dim,
        compression_ratio: ratio,
        best_epoch: log.best_epoch,
        val_mse: log.variables.iter().cloned().zip(best.val_mse.iter().copied()).collect(),
    }
}

fn latent_dim(cfg: &ExperimentConfig, role: LatentRole) -> usize {
    match role {
        LatentRole::Geometry => cfg.latent.geometry,
        LatentRole::Boundary => cfg.latent.boundary,
        LatentRole::Source => cfg.latent.source,
        LatentRole::Solution => cfg.latent.solution,
    }
}

/// Trains the condition autoencoders, then the solution autoencoder, and
/// writes the bundle plus per-network training logs. Returns the existing
/// bundle when one trained from the same data and settings is on disk.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(ModelBundle, TrainSummary)> {
    cfg.validate()?;
    let manifest = load_manifest(cfg)?;
    let stamp = stamp(cfg, &manifest.dataset_hash);
    let summary_path = logs_dir(cfg).join("summary.json");
    if let Ok(done) = read_json::<TrainSummary>(&summary_path) {
        if done.stamp == stamp {
            if let Ok(bundle) = ModelBundle::load(&bundle_dir(cfg)) {
                return Ok((bundle, done));
            }
        }
    }

    let start = Instant::now();
    let samples = load_split(cfg, &manifest, Split::Train)?;
    let problems = samples
        .iter()
        .map(|s| cfg.problem(s.source.clone()))
        .collect::<Result<Vec<_>>>()?;
    let fields = problems.iter().map(condition_fields).collect::<Result<Vec<_>>>()?;

    let mut conditions = BTreeMap::new();
    let mut logs = Vec::new();
    let mut networks = Vec::new();
    for role in LatentRole::CONDITIONS {
        let data: Vec<ScalarField> = fields.iter().map(|f| f[&role].clone()).collect();
        let dim = latent_dim(cfg, role);
        let (ae, log) = train_condition_ae(&data, role, dim, &cfg.condition_train)?;
        networks.push(summarize(&log, dim, ae.compression_ratio()));
        logs.push(log);
        conditions.insert(role, ae);
    }
    let solutions: Vec<Vec<ScalarField>> = samples.into_iter().map(|s| s.solution).collect();
    let (solution, log) = train_solution_ae(&solutions, &conditions, &problems, cfg.latent.solution, &cfg.train)?;
    networks.push(summarize(&log, cfg.latent.solution, solution.compression_ratio()));
    logs.push(log);

    let bundle = ModelBundle {
        conditions,
        solution,
        train_config: cfg.train.clone(),
        dataset_hash: manifest.dataset_hash,
    };
    publish_dir(&bundle_dir(cfg), |tmp| bundle.save(tmp))?;
    for log in &logs {
        write_atomic(&logs_dir(cfg).join(format!("{}.csv", log.network)), log.to_csv().as_bytes())?;
    }
    let summary = TrainSummary {
        stamp,
        networks,
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_json(&summary_path, &summary)?;
    Ok((bundle, summary))
}
