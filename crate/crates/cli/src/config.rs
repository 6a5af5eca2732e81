use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use latentpde::autoencoder::{NetworkConfig, TrainConfig};
use latentpde::conditions::{sample_gmm, BoundarySpec, GaussianMixtureSpec, GeometrySpec, Rect};
use latentpde::hybrid::HybridConfig;
use latentpde::solver::{HeatProblem, Physics, Problem};
use latentpde::{Error, Grid, Result, ScalarField};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Where the heat-source Gaussians are centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSupport {
    /// The rectangle of the named solid.
    Solid { name: String },
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub amplitude: (f64, f64),
    pub support: SourceSupport,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            k_min: 1,
            k_max: 20,
            amplitude: (50.0, 150.0),
            support: SourceSupport::Solid { name: "chip".into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Relative residual the reference solves must reach.
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_train: 200,
            n_test: 20,
            seed: 0,
            solver_tol: 1e-8,
            solver_max_iter: 400_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentDims {
    pub geometry: usize,
    pub boundary: usize,
    pub source: usize,
    pub solution: usize,
}

impl Default for LatentDims {
    fn default() -> Self {
        LatentDims {
            geometry: 8,
            boundary: 8,
            source: 341,
            solution: 192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n_cases: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n_cases: 100 }
    }
}

/// One JSON document that fully reproduces an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub grid: Grid,
    pub physics: Physics,
    pub geometry: GeometrySpec,
    pub boundary: BoundarySpec,
    pub source: SourceConfig,
    pub dataset: DatasetConfig,
    pub latent: LatentDims,
    /// Training settings of the geometry, boundary and source autoencoders.
    pub condition_train: TrainConfig,
    /// Training settings of the solution autoencoder.
    pub train: TrainConfig,
    pub hybrid: HybridConfig,
    pub bench: BenchConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            grid: Grid::unit_square(64).expect("valid grid"),
            physics: Physics::Boussinesq {
                rayleigh: 1e3,
                prandtl: 0.71,
            },
            geometry: GeometrySpec::chip_on_board(),
            boundary: BoundarySpec::cold_floor_and_ceiling(),
            source: SourceConfig::default(),
            dataset: DatasetConfig::default(),
            latent: LatentDims::default(),
            condition_train: default_condition_train(),
            train: default_solution_train(),
            hybrid: HybridConfig::default(),
            bench: BenchConfig::default(),
            output: PathBuf::from("runs/default"),
        }
    }
}

fn default_condition_train() -> TrainConfig {
    TrainConfig {
        epochs: 600,
        pde_loss_weight: 0.0,
        ..TrainConfig::default()
    }
}

fn default_solution_train() -> TrainConfig {
    TrainConfig {
        epochs: 600,
        mirror_augmentation: true,
        latent_noise: 1.0,
        network: NetworkConfig::default(),
        ..TrainConfig::default()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Format {
            offset: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!(
                "config schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.grid.validate()?;
        self.geometry.validate()?;
        self.boundary.validate()?;
        if self.dataset.n_train < 20 {
            return bad(format!("n_train must be at least 20, got {}", self.dataset.n_train));
        }
        if self.dataset.n_test == 0 {
            return bad("n_test must be positive".into());
        }
        if !(self.dataset.solver_tol > 0.0) || self.dataset.solver_max_iter == 0 {
            return bad("solver_tol and solver_max_iter must be positive".into());
        }
        let l = &self.latent;
        if l.geometry == 0 || l.boundary == 0 || l.source == 0 || l.solution == 0 {
            return bad("latent dimensions must be positive".into());
        }
        if self.bench.n_cases == 0 {
            return bad("bench.n_cases must be positive".into());
        }
        self.condition_train.validate()?;
        self.train.validate()?;
        self.hybrid.validate()?;
        // Catches bad source ranges before any solve runs.
        self.sample_source(0)?;
        self.problem(ScalarField::zeros(self.grid))?;
        Ok(())
    }

    pub fn support(&self) -> Result<Rect> {
        match &self.source.support {
            SourceSupport::Domain => Ok(self.geometry.domain),
            SourceSupport::Solid { name } => self
                .geometry
                .solid(name)
                .map(|s| s.rect)
                .ok_or_else(|| Error::InvalidSpec(format!("geometry has no solid named `{name}`"))),
        }
    }

    pub fn sample_source(&self, seed: u64) -> Result<(GaussianMixtureSpec, ScalarField)> {
        let s = &self.source;
        sample_gmm(seed, s.k_min, s.k_max, &self.grid, self.support()?, s.amplitude)
    }

    pub fn problem(&self, source: ScalarField) -> Result<Problem> {
        if *source.grid() != self.grid {
            return Err(Error::DomainMismatch(format!(
                "source is on a {}x{} grid, config expects {}x{}",
                source.grid().nx,
                source.grid().ny,
                self.grid.nx,
                self.grid.ny
            )));
        }
        let heat = HeatProblem::from_geometry(&self.geometry, self.boundary, source)?;
        Problem::build(self.physics, heat)
    }

    /// Hash of every setting that changes the content of a dataset sample.
    pub fn sample_hash(&self) -> String {
        let key = serde_json::json!({
            "grid": self.grid,
            "physics": self.physics,
            "geometry": self.geometry,
            "boundary": self.boundary,
            "source": self.source,
            "seed": self.dataset.seed,
            "solver_tol": self.dataset.solver_tol,
            "solver_max_iter": self.dataset.solver_max_iter,
        });
        sha256_hex(key.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sample populations whose source seeds must never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Bench,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Bench => "bench",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Source seed of sample `index` of `split`, redraw number `attempt`.
pub fn source_seed(base: u64, split: Split, index: usize, attempt: u32) -> u64 {
    let tag = split as u64 + 1;
    splitmix64(splitmix64(splitmix64(base ^ (tag << 56)) ^ index as u64) ^ u64::from(attempt) << 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_fields_take_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"dataset": {"n_train": 30}}"#).unwrap();
        assert_eq!(cfg.dataset.n_train, 30);
        assert_eq!(cfg.dataset.n_test, 20);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.n_train = 19;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.schema_version = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.source.support = SourceSupport::Solid { name: "heatsink".into() };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.hybrid.damping = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seeds_are_distinct_across_splits() {
        let mut seen = HashSet::new();
        for split in [Split::Train, Split::Test, Split::Bench] {
            for i in 0..500 {
                for a in 0..4 {
                    assert!(seen.insert(source_seed(7, split, i, a)));
                }
            }
        }
    }

    #[test]
    fn sample_hash_ignores_counts() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.dataset.n_train = 50;
        b.train.epochs = 3;
        assert_eq!(a.sample_hash(), b.sample_hash());
        b.dataset.seed = 1;
        assert_ne!(a.sample_hash(), b.sample_hash());
    }
}
