//! Model bundle directory:
//!
//! ```text
//! manifest.json
//! geometry.encoder.lpck   geometry.decoder.lpck
//! boundary.encoder.lpck   boundary.decoder.lpck
//! source.encoder.lpck     source.decoder.lpck
//! solution.encoder.lpck   solution.decoder.lpck
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConditionAE, LatentRole, SolutionAE, TrainConfig};
use crate::error::{Error, Result};
use crate::field::{FieldStats, Grid};
use crate::neural::{load_checkpoint, save_checkpoint, Model};
use crate::solver::Physics;

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const LATENT_MAPPING: &str =
    "geometry: solid mask; boundary: boundary-condition encoding; source: volumetric heat source";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub conditions: BTreeMap<LatentRole, ConditionAE>,
    pub solution: SolutionAE,
    pub train_config: TrainConfig,
    /// Hex digest identifying the training data.
    pub dataset_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConditionEntry {
    role: LatentRole,
    latent_dim: usize,
    stats: FieldStats,
    encoder: String,
    decoder: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionEntry {
    latent_dim: usize,
    variables: Vec<String>,
    stats: Vec<FieldStats>,
    ranges: Vec<(f64, f64)>,
    condition_dims: BTreeMap<LatentRole, usize>,
    encoder: String,
    decoder: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    grid: Grid,
    physics: Physics,
    latent_mapping: String,
    conditions: Vec<ConditionEntry>,
    solution: SolutionEntry,
    train_config: TrainConfig,
    dataset_hash: String,
}

fn files(name: &str) -> (String, String) {
    (format!("{name}.encoder.lpck"), format!("{name}.decoder.lpck"))
}

fn load_pair(dir: &Path, enc: &str, dec: &str) -> Result<(Model, Model)> {
    Ok((load_checkpoint(&dir.join(enc))?, load_checkpoint(&dir.join(dec))?))
}

impl ModelBundle {
    pub fn grid(&self) -> &Grid {
        &self.solution.grid
    }

    pub fn physics(&self) -> Physics {
        self.solution.physics
    }

    /// Writes checkpoints first and the manifest last.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut conditions = Vec::new();
        for (role, ae) in &self.conditions {
            let (enc, dec) = files(role.name());
            save_checkpoint(&ae.encoder, &dir.join(&enc))?;
            save_checkpoint(&ae.decoder, &dir.join(&dec))?;
            conditions.push(ConditionEntry {
                role: *role,
                latent_dim: ae.latent_dim,
                stats: ae.stats,
                encoder: enc,
                decoder: dec,
            });
        }
        let s = &self.solution;
        let (enc, dec) = files(LatentRole::Solution.name());
        save_checkpoint(&s.encoder, &dir.join(&enc))?;
        save_checkpoint(&s.decoder, &dir.join(&dec))?;
        let manifest = Manifest {
            schema_version: BUNDLE_SCHEMA_VERSION,
            grid: s.grid,
            physics: s.physics,
            latent_mapping: LATENT_MAPPING.into(),
            conditions,
            solution: SolutionEntry {
                latent_dim: s.latent_dim,
                variables: s.physics.var_names().iter().map(|v| v.to_string()).collect(),
                stats: s.stats.clone(),
                ranges: s.ranges.clone(),
                condition_dims: s.condition_dims.clone(),
                encoder: enc,
                decoder: dec,
            },
            train_config: self.train_config.clone(),
            dataset_hash: self.dataset_hash.clone(),
        };
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(0, format!("invalid bundle manifest: {e}")))?;
        if m.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::format(
                0,
                format!("unsupported bundle schema version {}", m.schema_version),
            ));
        }
        let mut conditions = BTreeMap::new();
        for c in m.conditions {
            let (encoder, decoder) = load_pair(dir, &c.encoder, &c.decoder)?;
            check_io(&encoder, &decoder, [1, m.grid.ny, m.grid.nx], c.latent_dim, c.latent_dim)?;
            conditions.insert(
                c.role,
                ConditionAE {
                    role: c.role,
                    encoder,
                    decoder,
                    latent_dim: c.latent_dim,
                    stats: c.stats,
                    grid: m.grid,
                },
            );
        }
        let s = m.solution;
        let n_vars = m.physics.n_vars();
        if s.stats.len() != n_vars || s.ranges.len() != n_vars {
            return Err(Error::format(0, "solution statistics do not match the physics"));
        }
        let (encoder, decoder) = load_pair(dir, &s.encoder, &s.decoder)?;
        let cond_dim: usize = s.condition_dims.values().sum();
        check_io(
            &encoder,
            &decoder,
            [n_vars, m.grid.ny, m.grid.nx],
            s.latent_dim,
            s.latent_dim + cond_dim,
        )?;
        for (role, dim) in &s.condition_dims {
            if conditions.get(role).map(|c| c.latent_dim) != Some(*dim) {
                return Err(Error::format(
                    0,
                    format!("{} condition latent is not provided by the bundle", role.name()),
                ));
            }
        }
        Ok(ModelBundle {
            conditions,
            solution: SolutionAE {
                encoder,
                decoder,
                latent_dim: s.latent_dim,
                physics: m.physics,
                grid: m.grid,
                stats: s.stats,
                ranges: s.ranges,
                condition_dims: s.condition_dims,
            },
            train_config: m.train_config,
            dataset_hash: m.dataset_hash,
        })
    }
}

fn check_io(encoder: &Model, decoder: &Model, field: [usize; 3], latent: usize, dec_in: usize) -> Result<()> {
    if encoder.input_shape() != field
        || encoder.output_shape() != [latent, 1, 1]
        || decoder.input_shape() != [dec_in, 1, 1]
        || decoder.output_shape() != field
    {
        return Err(Error::format(0, "checkpoint shapes disagree with the bundle manifest"));
    }
    Ok(())
}
