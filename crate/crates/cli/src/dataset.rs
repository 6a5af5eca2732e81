//! Dataset layout under `<output>/dataset`:
//!
//! ```text
//! manifest.json
//! train/0000/{sample.json, source.json, source.lpdf, <var>.lpdf ...}
//! test/0000/...
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use latentpde::field::io::{decode_field, encode_field};
use latentpde::solver::{relative_residual, solve, Physics, Problem};
use latentpde::{Error, Grid, Result, ScalarField};

use crate::config::{sha256_hex, source_seed, ExperimentConfig, Split};
use crate::io::{publish_dir, read_json, write_json};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
/// Extra source draws allowed when a reference solve fails.
pub const MAX_REDRAWS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub split: Split,
    pub index: usize,
    pub seed: u64,
    /// Seeds drawn first whose reference solve failed.
    pub rejected_seeds: Vec<u64>,
    pub sample_hash: String,
    pub solver_tol: f64,
    pub solve: SolveSummary,
    /// Residual of the stored solution, recomputed after the solve.
    pub relative_residual: f64,
    /// File name to SHA-256 digest.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRef {
    pub index: usize,
    pub seed: u64,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub sample_hash: String,
    pub grid: Grid,
    pub physics: Physics,
    pub variables: Vec<String>,
    pub train: Vec<SampleRef>,
    pub test: Vec<SampleRef>,
    /// Checked at generation time: no test seed is also a training seed.
    pub seeds_disjoint: bool,
    pub dataset_hash: String,
}

impl DatasetManifest {
    pub fn refs(&self, split: Split) -> &[SampleRef] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
            Split::Bench => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub seed: u64,
    pub source: ScalarField,
    pub solution: Vec<ScalarField>,
}

pub fn dataset_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.join("dataset")
}

/// Worker pool sized by `LATENTPDE_THREADS`, or by the available cores.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("LATENTPDE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidSpec(format!("LATENTPDE_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidState(format!("cannot start worker pool: {e}")))
}

/// Solves the reference problem for `seed`.
pub fn reference_solve(cfg: &ExperimentConfig, seed: u64) -> Result<(Problem, Vec<ScalarField>, SolveSummary)> {
    let (_, q) = cfg.sample_source(seed)?;
    let problem = cfg.problem(q)?;
    let (fields, rep) = solve(&problem, cfg.dataset.solver_tol, cfg.dataset.solver_max_iter)?;
    let summary = SolveSummary {
        iterations: rep.iterations,
        final_residual: rep.final_residual,
        converged: rep.converged,
    };
    Ok((problem, fields, summary))
}

fn sample_is_complete(dir: &Path, hash: &str) -> bool {
    let Ok(m) = read_json::<SampleManifest>(&dir.join("sample.json")) else {
        return false;
    };
    m.sample_hash == hash
        && m.files.iter().all(|(name, digest)| {
            std::fs::read(dir.join(name)).is_ok_and(|b| sha256_hex(&b) == *digest)
        })
}

fn generate_sample(cfg: &ExperimentConfig, split: Split, index: usize, dir: &Path) -> Result<SampleManifest> {
    let hash = cfg.sample_hash();
    if sample_is_complete(dir, &hash) {
        return read_json(&dir.join("sample.json"));
    }
    let mut rejected = Vec::new();
    let mut last_err = None;
    for attempt in 0..=MAX_REDRAWS {
        let seed = source_seed(cfg.dataset.seed, split, index, attempt);
        let outcome = reference_solve(cfg, seed).and_then(|(p, fields, summary)| {
            if summary.converged {
                Ok((p, fields, summary))
            } else {
                Err(Error::Divergence {
                    iterations: summary.iterations,
                    residual: summary.final_residual,
                })
            }
        });
        let (problem, fields, summary) = match outcome {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                eprintln!("{} sample {index}: seed {seed} rejected ({e}), drawing another", split.name());
                rejected.push(seed);
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let (spec, _) = cfg.sample_source(seed)?;
        let mut blobs: Vec<(String, Vec<u8>)> = vec![
            ("source.json".into(), spec.to_json()?.into_bytes()),
            ("source.lpdf".into(), encode_field(&problem.heat().source)),
        ];
        for (name, f) in cfg.physics.var_names().iter().zip(&fields) {
            blobs.push((format!("{name}.lpdf"), encode_field(f)));
        }
        let manifest = SampleManifest {
            split,
            index,
            seed,
            rejected_seeds: rejected,
            sample_hash: hash,
            solver_tol: cfg.dataset.solver_tol,
            relative_residual: relative_residual(&problem, &fields)?,
            solve: summary,
            files: blobs.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect(),
        };
        publish_dir(dir, |tmp| {
            for (name, bytes) in &blobs {
                std::fs::write(tmp.join(name), bytes).map_err(|e| Error::io(tmp.join(name), e))?;
            }
            write_json(&tmp.join("sample.json"), &manifest)
        })?;
        return Ok(manifest);
    }
    eprintln!("{} sample {index}: all {} source draws failed", split.name(), MAX_REDRAWS + 1);
    Err(last_err.expect("at least one draw was attempted"))
}

/// Generates (or completes) the dataset. Samples already on disk with a
/// matching configuration hash and intact files are kept as they are.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let root = dataset_dir(cfg);
    let jobs: Vec<(Split, usize)> = (0..cfg.dataset.n_train)
        .map(|i| (Split::Train, i))
        .chain((0..cfg.dataset.n_test).map(|i| (Split::Test, i)))
        .collect();
    let pool = worker_pool()?;
    let results: Vec<Result<SampleManifest>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(split, i)| generate_sample(cfg, split, i, &root.join(split.name()).join(format!("{i:04}"))))
            .collect()
    });
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut digest_input = String::new();
    for r in results {
        let m = r?;
        for (name, d) in &m.files {
            digest_input.push_str(&format!("{}/{:04}/{name}:{d}\n", m.split.name(), m.index));
        }
        let entry = SampleRef {
            index: m.index,
            seed: m.seed,
            dir: format!("{}/{:04}", m.split.name(), m.index),
        };
        match m.split {
            Split::Test => test.push(entry),
            _ => train.push(entry),
        }
    }
    let train_seeds: BTreeSet<u64> = train.iter().map(|r| r.seed).collect();
    let seeds_disjoint = test.iter().all(|r| !train_seeds.contains(&r.seed));
    if !seeds_disjoint {
        return Err(Error::Dataset("a test seed coincides with a training seed".into()));
    }
    let manifest = DatasetManifest {
        schema_version: DATASET_SCHEMA_VERSION,
        sample_hash: cfg.sample_hash(),
        grid: cfg.grid,
        physics: cfg.physics,
        variables: cfg.physics.var_names().iter().map(|v| v.to_string()).collect(),
        train,
        test,
        seeds_disjoint,
        dataset_hash: sha256_hex(digest_input.as_bytes()),
    };
    write_json(&root.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    let path = dataset_dir(cfg).join("manifest.json");
    let m: DatasetManifest = read_json(&path)?;
    if m.schema_version != DATASET_SCHEMA_VERSION {
        return Err(Error::Format {
            offset: 0,
            message: format!("unsupported dataset schema version {}", m.schema_version),
        });
    }
    if m.sample_hash != cfg.sample_hash() {
        return Err(Error::Dataset(
            "dataset was generated with a different configuration; run gen-data again".into(),
        ));
    }
    Ok(m)
}

fn read_checked(dir: &Path, name: &str, digest: Option<&String>, grid: &Grid) -> Result<ScalarField> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if digest != Some(&sha256_hex(&bytes)) {
        return Err(Error::Dataset(format!("{} does not match its recorded digest", path.display())));
    }
    decode_field(&bytes, grid)
}

/// Loads every sample of `split`, verifying file digests.
pub fn load_split(cfg: &ExperimentConfig, manifest: &DatasetManifest, split: Split) -> Result<Vec<Sample>> {
    let root = dataset_dir(cfg);
    manifest
        .refs(split)
        .iter()
        .map(|r| {
            let dir = root.join(&r.dir);
            let m: SampleManifest = read_json(&dir.join("sample.json"))?;
            let source = read_checked(&dir, "source.lpdf", m.files.get("source.lpdf"), &cfg.grid)?;
            let solution = cfg
                .physics
                .var_names()
                .iter()
                .map(|v| {
                    let name = format!("{v}.lpdf");
                    read_checked(&dir, &name, m.files.get(&name), &cfg.grid)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Sample {
                seed: m.seed,
                source,
                solution,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SourceSupport;

    pub(crate) fn tiny(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            grid: Grid::unit_square(17).unwrap(),
            physics: Physics::Heat,
            output: out.to_path_buf(),
            ..ExperimentConfig::default()
        };
        cfg.dataset.n_train = 20;
        cfg.dataset.n_test = 2;
        cfg.source.k_max = 4;
        cfg.source.support = SourceSupport::Solid { name: "chip".into() };
        cfg
    }

    #[test]
    fn generation_is_complete_resumable_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let m = gen_data(&cfg).unwrap();
        assert_eq!(m.train.len(), 20);
        assert_eq!(m.test.len(), 2);
        assert!(m.seeds_disjoint);
        let manifest_path = dataset_dir(&cfg).join("manifest.json");
        let first = std::fs::read(&manifest_path).unwrap();
        let sample_path = dataset_dir(&cfg).join("test/0001/T.lpdf");
        let before = std::fs::metadata(&sample_path).unwrap().modified().unwrap();
        assert_eq!(gen_data(&cfg).unwrap(), m);
        assert_eq!(std::fs::read(&manifest_path).unwrap(), first);
        assert_eq!(std::fs::metadata(&sample_path).unwrap().modified().unwrap(), before);

        // A damaged sample is regenerated to identical bytes.
        let good = std::fs::read(&sample_path).unwrap();
        std::fs::write(&sample_path, b"garbage").unwrap();
        assert_eq!(gen_data(&cfg).unwrap(), m);
        assert_eq!(std::fs::read(&sample_path).unwrap(), good);

        let other = tempfile::tempdir().unwrap();
        let again = gen_data(&tiny(other.path())).unwrap();
        assert_eq!(again.dataset_hash, m.dataset_hash);
    }

    #[test]
    fn stored_solutions_satisfy_the_recorded_tolerance() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let m = gen_data(&cfg).unwrap();
        for (r, s) in m.test.iter().zip(load_split(&cfg, &m, Split::Test).unwrap()) {
            let problem = cfg.problem(s.source.clone()).unwrap();
            let res = relative_residual(&problem, &s.solution).unwrap();
            assert!(res <= cfg.dataset.solver_tol, "{} {res}", r.dir);
        }
    }

    #[test]
    fn changed_config_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        gen_data(&cfg).unwrap();
        let mut other = cfg.clone();
        other.dataset.seed = 99;
        assert!(matches!(load_manifest(&other), Err(Error::Dataset(_))));
    }
}
