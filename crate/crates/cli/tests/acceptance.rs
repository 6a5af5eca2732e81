//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The desk-scale experiments (64x64 dataset and bundle, 128x128 timing
//! bundle) are cached under the cargo target tmp dir and reused while their
//! configuration is unchanged. Everything runs on one worker thread.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use latentpde::autoencoder::{encode_conditions, ModelBundle, NetworkConfig};
use latentpde::conditions::{sample_gmm, BoundarySpec, GeometrySpec};
use latentpde::field::io::{decode_field, encode_field};
use latentpde::field::{max_abs_error, normalize, relative_l2, restrict};
use latentpde::hybrid::{hybrid_solve, iterate_latent, HybridConfig, InitStrategy, LatentCodec};
use latentpde::neural::{decode_checkpoint, encode_checkpoint, Activation, Architecture, LayerSpec, Model, Tensor4};
use latentpde::solver::{relative_residual, solve, BoussinesqProblem, HeatProblem, Physics, Problem};
use latentpde::{Error, Grid, Result, ScalarField};
use latentpde_cli::bench::run_bench;
use latentpde_cli::dataset::{gen_data, load_manifest, load_split, Sample};
use latentpde_cli::solve::{cmd_solve, SourceInput};
use latentpde_cli::stats::median;
use latentpde_cli::train::cmd_train;
use latentpde_cli::{ExperimentConfig, Split};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn cache_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn desk_config() -> ExperimentConfig {
    ExperimentConfig {
        output: cache_root().join("desk64"),
        ..ExperimentConfig::default()
    }
}

fn timing_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        grid: Grid::unit_square(128).unwrap(),
        output: cache_root().join("timing128"),
        ..ExperimentConfig::default()
    };
    cfg.dataset.n_train = 40;
    cfg.dataset.n_test = 2;
    cfg.latent.source = 1365;
    cfg.latent.solution = 768;
    cfg.latent.geometry = 32;
    cfg.latent.boundary = 32;
    cfg.condition_train.epochs = 100;
    cfg.train.epochs = 150;
    for t in [&mut cfg.condition_train, &mut cfg.train] {
        t.network.channels = vec![8, 16, 32, 32];
    }
    cfg
}

/// Dataset and bundle of `cfg`, generated and trained unless cached.
fn experiment(cfg: &ExperimentConfig) -> Result<(ModelBundle, latentpde_cli::train::TrainSummary)> {
    gen_data(cfg)?;
    cmd_train(cfg)
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// 1. Fixed-point criterion fidelity

/// Linear autoencoder made of two bias-free dense layers: `E = Qᵀ`, `D = Q`.
struct DenseCodec {
    grid: Grid,
    encoder: Model,
    decoder: Model,
    dim: usize,
}

impl DenseCodec {
    /// `basis` holds the columns of `Q`.
    fn new(grid: Grid, basis: &[Vec<f64>]) -> Self {
        let (n, l) = (grid.len(), basis.len());
        let enc = Architecture {
            input: [1, grid.ny, grid.nx],
            layers: vec![LayerSpec::Flatten, LayerSpec::dense(l)],
        };
        let dec = Architecture {
            input: [l, 1, 1],
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::dense(n),
                LayerSpec::Reshape { dims: [1, grid.ny, grid.nx] },
            ],
        };
        // Dense weights are stored row-major as `out × in`, followed by the bias.
        let mut we: Vec<f64> = basis.iter().flatten().copied().collect();
        we.extend(std::iter::repeat(0.0).take(l));
        let mut wd: Vec<f64> = (0..n).flat_map(|i| basis.iter().map(move |q| q[i])).collect();
        wd.extend(std::iter::repeat(0.0).take(n));
        DenseCodec {
            grid,
            encoder: Model::from_parts(enc, 0, we).unwrap(),
            decoder: Model::from_parts(dec, 0, wd).unwrap(),
            dim: l,
        }
    }
}

impl LatentCodec for DenseCodec {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn encode_fields(&self, fields: &[ScalarField]) -> Result<Vec<f64>> {
        let x = Tensor4::new([1, 1, self.grid.ny, self.grid.nx], fields[0].values().to_vec())?;
        Ok(self.encoder.infer(&x)?.into_data())
    }

    fn decode_fields(&self, eta: &[f64], _cond: &[f64]) -> Result<Vec<ScalarField>> {
        let z = Tensor4::new([1, self.dim, 1, 1], eta.to_vec())?;
        Ok(vec![ScalarField::new(self.grid, self.decoder.infer(&z)?.into_data())?])
    }
}

/// `reencode(eta) = eta + shift`, so every delta equals `|shift|`.
struct ShiftCodec {
    shift: Vec<f64>,
}

impl LatentCodec for ShiftCodec {
    fn latent_dim(&self) -> usize {
        self.shift.len()
    }

    fn encode_fields(&self, _fields: &[ScalarField]) -> Result<Vec<f64>> {
        unreachable!()
    }

    fn decode_fields(&self, _eta: &[f64], _cond: &[f64]) -> Result<Vec<ScalarField>> {
        unreachable!()
    }

    fn reencode(&self, eta: &[f64], _cond: &[f64]) -> Result<Vec<f64>> {
        Ok(eta.iter().zip(&self.shift).map(|(e, s)| e + s).collect())
    }
}

/// Columns of the Sylvester Hadamard matrix of order `n`, scaled to unit norm.
fn hadamard_columns(n: usize, cols: &[usize]) -> Vec<Vec<f64>> {
    let s = 1.0 / (n as f64).sqrt();
    cols.iter()
        .map(|&c| (0..n).map(|r| if (r & c).count_ones() % 2 == 0 { s } else { -s }).collect())
        .collect()
}

/// Classical Gram-Schmidt with reorthogonalization.
fn gram_schmidt(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        for _ in 0..2 {
            for q in &out {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= d * qi);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push(v.into_iter().map(|x| x / norm).collect());
    }
    out
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn fixed_point_fidelity() -> Result<Outcome> {
    let grid = Grid::unit_square(16)?;
    let cfg = HybridConfig {
        tol: 1e-6,
        max_iter: 10,
        ..HybridConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut notes = Vec::new();
    let mut pass = true;

    let cols: Vec<usize> = (0..16).map(|k| 3 * k + 1).collect();
    let hadamard = DenseCodec::new(grid, &hadamard_columns(256, &cols));
    // Integer latents keep every product and sum exact.
    let eta0: Vec<f64> = (0..16).map(|_| rng.gen_range(-8i32..=8) as f64).collect();
    let fp = iterate_latent(&hadamard, &[], eta0, &cfg, false)?;
    pass &= fp.converged && fp.returned_iteration == 1 && fp.deltas == [0.0];
    notes.push(format!("hadamard delta {:e} at iteration {}", fp.deltas[0], fp.returned_iteration));

    let raw: Vec<Vec<f64>> = (0..24).map(|_| random_field(grid, &mut rng).into_values()).collect();
    let basis = gram_schmidt(raw);
    let codec = DenseCodec::new(grid, &basis);
    let mut worst_projection: f64 = 0.0;
    let mut worst_delta: f64 = 0.0;
    for _ in 0..10 {
        let x = random_field(grid, &mut rng);
        let eta0 = codec.encode_fields(std::slice::from_ref(&x))?;
        let decoded = codec.decode_fields(&eta0, &[])?.remove(0);
        let mut oracle = vec![0.0; grid.len()];
        for q in &basis {
            let c: f64 = q.iter().zip(x.values()).map(|(a, b)| a * b).sum();
            oracle.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
        }
        worst_projection = worst_projection.max(max_abs_error(&decoded, &ScalarField::new(grid, oracle)?)?);
        let fp = iterate_latent(&codec, &[], eta0, &cfg, false)?;
        pass &= fp.converged && fp.returned_iteration == 1;
        worst_delta = worst_delta.max(fp.deltas[0]);
    }
    pass &= worst_projection <= 1e-12 && worst_delta <= 1e-12;
    notes.push(format!(
        "orthonormalized basis: projection error {worst_projection:.1e}, delta {worst_delta:.1e} at iteration 1"
    ));

    // Strict inequality: a delta equal to the tolerance does not terminate.
    let shift = ShiftCodec { shift: vec![0.75, 0.0, 0.0] };
    let at = HybridConfig { tol: 0.75, max_iter: 3, ..cfg.clone() };
    let fp = iterate_latent(&shift, &[], vec![0.0; 3], &at, false)?;
    let above = HybridConfig {
        tol: f64::from_bits(0.75f64.to_bits() + 1),
        ..at
    };
    let fp2 = iterate_latent(&shift, &[], vec![0.0; 3], &above, false)?;
    let boundary_ok = !fp.converged && fp.deltas.len() == 3 && fp2.converged && fp2.deltas.len() == 1;
    pass &= boundary_ok;
    notes.push(format!("tolerance boundary strict: {boundary_ok}"));
    outcome(pass, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor4 {
    let n = shape.iter().product();
    Tensor4::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Worst relative error between analytic gradients and central differences
/// of `Σ r ⊙ model(x)` over parameters and inputs, for `cases` random draws.
fn gradient_error(arch: &Architecture, cases: u64, seed: u64) -> Result<f64> {
    let objective = |m: &Model, x: &Tensor4, r: &Tensor4| -> f64 {
        m.infer(x).unwrap().data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + case);
        let mut m = Model::new(arch.clone(), case)?;
        let params: Vec<f64> = m.params().iter().map(|p| p + rng.gen_range(-0.1..0.1)).collect();
        m.set_params(&params)?;
        let [c, h, w] = arch.input;
        let x = random_tensor([2, c, h, w], &mut rng);
        let (y, tape) = m.forward(&x)?;
        let r = random_tensor(y.shape(), &mut rng);
        let g = m.backward(&tape, &r)?;
        let step = 1e-5;
        let mut probe = m.clone();
        for k in 0..m.n_params() {
            let mut p = params.clone();
            p[k] += step;
            probe.set_params(&p)?;
            let up = objective(&probe, &x, &r);
            p[k] -= 2.0 * step;
            probe.set_params(&p)?;
            let down = objective(&probe, &x, &r);
            worst = worst.max(rel_err(g.params[k], (up - down) / (2.0 * step)));
        }
        for k in 0..x.data().len() {
            let mut xp = x.clone();
            xp.data_mut()[k] += step;
            let up = objective(&m, &xp, &r);
            xp.data_mut()[k] -= 2.0 * step;
            let down = objective(&m, &xp, &r);
            worst = worst.max(rel_err(g.input.data()[k], (up - down) / (2.0 * step)));
        }
    }
    Ok(worst)
}

fn gradient_correctness() -> Result<Outcome> {
    let arch = |input: [usize; 3], layers: Vec<LayerSpec>| Architecture { input, layers };
    let kinds: Vec<(&str, Architecture)> = vec![
        ("conv s1", arch([2, 5, 4], vec![LayerSpec::conv(3, 3, 1)])),
        ("conv s2", arch([2, 5, 5], vec![LayerSpec::conv(3, 3, 2)])),
        ("tconv even", arch([2, 3, 3], vec![LayerSpec::transposed_for(3, 3, 2, 6)])),
        ("tconv odd", arch([2, 4, 4], vec![LayerSpec::transposed_for(3, 3, 2, 7)])),
        ("dense", arch([3, 1, 1], vec![LayerSpec::Flatten, LayerSpec::dense(4)])),
        (
            "flatten+reshape",
            arch(
                [2, 2, 3],
                vec![LayerSpec::Flatten, LayerSpec::dense(6), LayerSpec::Reshape { dims: [1, 2, 3] }],
            ),
        ),
        ("tanh", arch([2, 3, 3], vec![LayerSpec::conv(2, 3, 1), LayerSpec::act(Activation::Tanh)])),
        ("relu", arch([2, 3, 3], vec![LayerSpec::conv(2, 3, 1), LayerSpec::act(Activation::Relu)])),
        (
            "identity",
            arch([2, 3, 3], vec![LayerSpec::conv(2, 3, 1), LayerSpec::act(Activation::Identity)]),
        ),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (i, (name, a)) in kinds.iter().enumerate() {
        let e = gradient_error(a, 20, i as u64 + 1)?;
        pass &= e <= 1e-4;
        notes.push(format!("{name} {e:.1e}"));
    }
    outcome(pass, format!("max relative error over 20 tensors: {}", notes.join(", ")))
}

// ---------------------------------------------------------------------------
// 3. Reference solver order of accuracy

fn manufactured_error(n: usize) -> Result<f64> {
    let g = Grid::unit_square(n)?;
    let exact = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin())?;
    let q = ScalarField::from_fn(g, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin())?;
    let problem = Problem::Heat(HeatProblem::homogeneous(q, BoundarySpec::all_dirichlet(0.0))?);
    let (t, report) = solve(&problem, 1e-12, 1_000_000)?;
    if !report.converged {
        return Err(Error::InvalidState(format!("manufactured solve on {n}x{n} did not converge")));
    }
    max_abs_error(&t[0], &exact)
}

fn boussinesq_temperature(n: usize, seed: u64) -> Result<ScalarField> {
    let g = Grid::unit_square(n)?;
    let geometry = GeometrySpec::chip_on_board();
    let chip = geometry.solid("chip").expect("chip_on_board has a chip").rect;
    let (spec, _) = sample_gmm(seed, 1, 20, &g, chip, (50.0, 150.0))?;
    let heat = HeatProblem::from_geometry(&geometry, BoundarySpec::cold_floor_and_ceiling(), spec.evaluate(&g)?)?;
    let problem = Problem::Boussinesq(BoussinesqProblem::new(heat, 1e3, 0.71)?);
    let (fields, report) = solve(&problem, 1e-8, 1_000_000)?;
    if !report.converged {
        return Err(Error::InvalidState(format!("Boussinesq solve on {n}x{n} did not converge")));
    }
    Ok(fields[2].clone())
}

fn solver_order() -> Result<Outcome> {
    let errors = [manufactured_error(17)?, manufactured_error(33)?, manufactured_error(65)?];
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let mut pass = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    let mut refinement = Vec::new();
    for seed in [1, 2, 3] {
        let coarse = boussinesq_temperature(33, seed)?;
        let fine = restrict(&boussinesq_temperature(65, seed)?, coarse.grid())?;
        refinement.push(relative_l2(&coarse, &fine)?);
    }
    let worst = refinement.iter().cloned().fold(0.0, f64::max);
    pass &= worst <= 0.05;
    outcome(
        pass,
        format!(
            "manufactured error ratios {:.3}, {:.3}; Boussinesq 33 vs 65 relative L2(T) max {:.2}% over 3 sources",
            ratios[0],
            ratios[1],
            100.0 * worst
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Desk-scale reconstruction

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn reconstruction(cfg: &ExperimentConfig, bundle: &ModelBundle, train_time: f64, test: &[Sample]) -> Result<Outcome> {
    let source_ae = &bundle.conditions[&latentpde::autoencoder::LatentRole::Source];
    let sol = &bundle.solution;
    let mut source_mse = Vec::new();
    let mut var_mse = vec![Vec::new(); sol.n_vars()];
    for s in test {
        let rec = source_ae.decode(&source_ae.encode(&s.source)?)?;
        source_mse.push(mse(
            normalize(&rec, &source_ae.stats).values(),
            normalize(&s.source, &source_ae.stats).values(),
        ));
        let problem = cfg.problem(s.source.clone())?;
        let cond = sol.condition_vector(&encode_conditions(&bundle.conditions, &problem)?)?;
        let x = sol.normalize(&s.solution)?;
        let y = sol.decode_normalized(&sol.encode_normalized(&x)?, &cond)?;
        let n = sol.grid.len();
        for (k, v) in var_mse.iter_mut().enumerate() {
            v.push(mse(&x[k * n..(k + 1) * n], &y[k * n..(k + 1) * n]));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let s = mean(&source_mse);
    let per_var: Vec<f64> = var_mse.iter().map(|v| mean(v)).collect();
    let ratios = (source_ae.compression_ratio(), sol.compression_ratio());
    let ratio_ok = (ratios.0 / 12.0 - 1.0).abs() <= 0.25 && (ratios.1 / 64.0 - 1.0).abs() <= 0.25;
    let pass = s <= 1e-3 && per_var.iter().all(|&m| m <= 1e-3) && ratio_ok && train_time <= 7200.0;
    let names = cfg.physics.var_names();
    outcome(
        pass,
        format!(
            "{} held-out samples: source MSE {s:.2e} (ratio {:.1}); solution MSE {} (ratio {:.1}); training {:.0} s",
            test.len(),
            ratios.0,
            names
                .iter()
                .zip(&per_var)
                .map(|(n, m)| format!("{n} {m:.2e}"))
                .collect::<Vec<_>>()
                .join(", "),
            ratios.1,
            train_time
        ),
    )
}

/// Decoded reconstruction residual against the reference residual on
/// training samples. Reported for information only.
fn residual_ratio(cfg: &ExperimentConfig, bundle: &ModelBundle, train: &[Sample]) -> Result<Outcome> {
    let mut ratios = Vec::new();
    for s in train.iter().take(10) {
        let problem = cfg.problem(s.source.clone())?;
        let cond = encode_conditions(&bundle.conditions, &problem)?;
        let decoded = bundle.solution.decode(&bundle.solution.encode(&s.solution)?, &cond)?;
        ratios.push(relative_residual(&problem, &decoded)? / relative_residual(&problem, &s.solution)?);
    }
    let m = median(&ratios).unwrap_or(f64::NAN);
    outcome(
        m <= 10.0,
        format!("median decoded/reference residual ratio {m:.2e} over {} training samples", ratios.len()),
    )
}

// ---------------------------------------------------------------------------
// 5 and 6. Generalization and initialization benefit

struct HybridCase {
    converged: bool,
    iterations: usize,
    first_delta: f64,
    relative_t: f64,
    seconds: f64,
}

fn hybrid_cases(cfg: &ExperimentConfig, bundle: &ModelBundle, test: &[Sample], init: InitStrategy) -> Result<Vec<HybridCase>> {
    let hybrid = HybridConfig { init, ..cfg.hybrid.clone() };
    let t_index = cfg.physics.temperature_index();
    test.iter()
        .map(|s| {
            let problem = cfg.problem(s.source.clone())?;
            let (fields, report) = hybrid_solve(&problem, bundle, &hybrid)?;
            Ok(HybridCase {
                converged: report.converged,
                iterations: report.iterations,
                first_delta: report.latent_deltas[0],
                relative_t: relative_l2(&fields[t_index], &s.solution[t_index])?,
                seconds: report.wall_time_total.as_secs_f64(),
            })
        })
        .collect()
}

fn generalization(cfg: &ExperimentConfig, coarse: &[HybridCase]) -> Result<Outcome> {
    let n = coarse.len();
    let converged = coarse.iter().filter(|c| c.converged && c.iterations <= 500).count();
    let rel: Vec<f64> = coarse.iter().map(|c| c.relative_t).collect();
    let med = median(&rel).unwrap_or(f64::NAN);
    let seconds: f64 = coarse.iter().map(|c| c.seconds).sum();
    let pass = n >= 20 && converged as f64 >= 0.9 * n as f64 && med <= 0.10 && seconds <= 1800.0;
    outcome(
        pass,
        format!(
            "{converged}/{n} converged within {} iterations; median relative L2(T) {:.2}%; {seconds:.0} s",
            cfg.hybrid.max_iter.min(500),
            100.0 * med
        ),
    )
}

fn init_benefit(coarse: &[HybridCase], zero: &[HybridCase]) -> Result<Outcome> {
    let iters = |cases: &[HybridCase]| median(&cases.iter().map(|c| c.iterations as f64).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    let (mc, mz) = (iters(coarse), iters(zero));
    let smaller = coarse.iter().zip(zero).filter(|(c, z)| c.first_delta < z.first_delta).count();
    let share = smaller as f64 / coarse.len() as f64;
    let first = |cases: &[HybridCase]| median(&cases.iter().map(|c| c.first_delta).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    outcome(
        mc <= mz && share >= 0.7,
        format!(
            "median iterations coarse {mc} vs zero {mz}; first delta smaller with coarse init in {smaller}/{} cases (median {:.3e} vs {:.3e})",
            coarse.len(),
            first(coarse),
            first(zero)
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Speedup directionality

fn speedup() -> Result<Outcome> {
    let cfg = timing_config();
    let (bundle, _) = experiment(&cfg)?;
    let report = run_bench(&cfg, &bundle, 20, &cfg.hybrid)?;
    if !report.reference_failures.is_empty() {
        return outcome(false, format!("reference solves failed for seeds {:?}", report.reference_failures));
    }
    let n = report.cases.len() as f64;
    let hybrid = report.cases.iter().map(|c| c.hybrid_time).sum::<f64>() / n;
    let reference = report.cases.iter().filter_map(|c| c.reference_time).sum::<f64>() / n;
    outcome(
        report.cases.len() >= 20 && hybrid < reference,
        format!(
            "128x128 over {} cases: mean hybrid {hybrid:.3} s (coarse init included, {} converged) vs reference {reference:.3} s, {:.1}x",
            report.cases.len(),
            report.n_converged,
            reference / hybrid
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Determinism and formats

fn tiny_config(out: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        grid: Grid::unit_square(17).unwrap(),
        physics: Physics::Boussinesq {
            rayleigh: 1e3,
            prandtl: 0.71,
        },
        output: out,
        ..ExperimentConfig::default()
    };
    cfg.dataset.n_train = 20;
    cfg.dataset.n_test = 2;
    cfg.source.k_max = 4;
    cfg.latent.source = 16;
    cfg.latent.solution = 8;
    for t in [&mut cfg.condition_train, &mut cfg.train] {
        t.epochs = 5;
        t.batch_size = 4;
        t.network = NetworkConfig {
            channels: vec![4, 8],
            ..NetworkConfig::default()
        };
    }
    cfg.hybrid.max_iter = 30;
    cfg
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let mut notes = Vec::new();
    let mut pass = true;

    let runs: Vec<ExperimentConfig> = ["a", "b"].iter().map(|r| tiny_config(dir.path().join(r))).collect();
    let mut trees = Vec::new();
    for cfg in &runs {
        gen_data(cfg)?;
        let (bundle, _) = cmd_train(cfg)?;
        let solve_dir = cfg.output.join("solve");
        cmd_solve(cfg, &bundle, &SourceInput::Seed(7), &cfg.hybrid, &solve_dir)?;
        let solve: Vec<_> = tree_bytes(&solve_dir).into_iter().filter(|(n, _)| n != "timing.json").collect();
        trees.push((tree_bytes(&cfg.output.join("dataset")), tree_bytes(&cfg.output.join("bundle")), solve));
    }
    let same = [trees[0].0 == trees[1].0, trees[0].1 == trees[1].1, trees[0].2 == trees[1].2];
    pass &= same.iter().all(|&s| s);
    notes.push(format!(
        "identical dataset {}, bundle {}, solve outputs {}",
        same[0], same[1], same[2]
    ));

    let bundle = ModelBundle::load(&runs[0].output.join("bundle"))?;
    let resaved = dir.path().join("resaved");
    bundle.save(&resaved)?;
    let bundle_round_trip = tree_bytes(&resaved) == trees[0].1;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lpdf_round_trip = true;
    for n in [2usize, 9, 33] {
        let g = Grid::new(n, n + 1, 1.0, 1.5, (-0.5, 0.25))?;
        let mut values: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1e6..1e6)).collect();
        values[0] = -0.0;
        values[1] = f64::MIN_POSITIVE / 8.0;
        let f = ScalarField::new(g, values)?;
        let bytes = encode_field(&f);
        let back = decode_field(&bytes, &g)?;
        lpdf_round_trip &= back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits())
            && encode_field(&back) == bytes;
    }
    let model = &bundle.solution.decoder;
    let ckpt = encode_checkpoint(model);
    let back = decode_checkpoint(&ckpt)?;
    let ckpt_round_trip = encode_checkpoint(&back) == ckpt
        && back.params().iter().zip(model.params()).all(|(a, b)| a.to_bits() == b.to_bits());
    pass &= bundle_round_trip && lpdf_round_trip && ckpt_round_trip;
    notes.push(format!(
        "bit-exact round trips: field {lpdf_round_trip}, checkpoint {ckpt_round_trip}, bundle {bundle_round_trip}"
    ));

    let mut detected = 0;
    let flips = 200;
    for _ in 0..flips {
        let mut bad = ckpt.clone();
        let bit = rng.gen_range(0..bad.len() * 8);
        bad[bit / 8] ^= 1 << (bit % 8);
        if matches!(decode_checkpoint(&bad), Err(Error::Format { .. })) {
            detected += 1;
        }
    }
    let truncated = (1..ckpt.len()).step_by(97).all(|k| decode_checkpoint(&ckpt[..k]).is_err());
    let corrupt_bundle = {
        let copy = dir.path().join("corrupt");
        bundle.save(&copy)?;
        let victim = copy.join("solution.decoder.lpck");
        let mut bytes = std::fs::read(&victim).map_err(|e| Error::io(&victim, e))?;
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        std::fs::write(&victim, bytes).map_err(|e| Error::io(&victim, e))?;
        matches!(ModelBundle::load(&copy), Err(Error::Format { .. }))
    };
    pass &= detected == flips && truncated && corrupt_bundle;
    notes.push(format!(
        "corruption detected: {detected}/{flips} bit flips, truncation {truncated}, bundle file {corrupt_bundle}"
    ));
    outcome(pass, notes.join("; "))
}

// ---------------------------------------------------------------------------

struct Report {
    /// Criterion ids named on the command line; empty runs all.
    selected: Vec<String>,
    failed: Vec<String>,
}

impl Report {
    fn wants(&self, id: &str) -> bool {
        self.selected.is_empty() || self.selected.iter().any(|s| s == id)
    }

    fn line(&mut self, id: &str, name: &str, gating: bool, run: impl FnOnce() -> Result<Outcome>) {
        if !self.wants(id) {
            return;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        let scope = if gating { "" } else { " (informational)" };
        println!("{tag} {id} {name}{scope}: {detail} [{secs:.1} s]");
        if !pass && gating {
            self.failed.push(id.to_string());
        }
    }
}

fn timed(limit: f64, run: impl FnOnce() -> Result<Outcome>) -> Result<Outcome> {
    let start = Instant::now();
    let mut o = run()?;
    let secs = start.elapsed().as_secs_f64();
    if secs >= limit {
        o.pass = false;
        o.detail.push_str(&format!("; exceeded the {limit:.0} s budget"));
    }
    Ok(o)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    std::env::set_var("LATENTPDE_THREADS", "1");
    let mut report = Report {
        selected: args.into_iter().filter(|a| !a.starts_with('-')).collect(),
        failed: Vec::new(),
    };
    report.line("1", "fixed-point criterion fidelity", true, || timed(1.0, fixed_point_fidelity));
    report.line("2", "gradient correctness", true, || timed(30.0, gradient_correctness));
    report.line("3", "reference solver order of accuracy", true, || timed(300.0, solver_order));

    const DESK: [(&str, &str); 3] = [
        ("4", "desk-scale reconstruction"),
        ("5", "end-to-end generalization"),
        ("6", "initialization benefit"),
    ];
    if DESK.iter().any(|(id, _)| report.wants(id)) || report.wants("4b") {
        let cfg = desk_config();
        let desk = experiment(&cfg).and_then(|(bundle, summary)| {
            let manifest = load_manifest(&cfg)?;
            let train = load_split(&cfg, &manifest, Split::Train)?;
            let test = load_split(&cfg, &manifest, Split::Test)?;
            Ok((bundle, summary, train, test))
        });
        match desk {
            Ok((bundle, summary, train, test)) => {
                report.line("4", DESK[0].1, true, || reconstruction(&cfg, &bundle, summary.wall_time, &test));
                report.line("4b", "decoded residual within 10x of reference", false, || {
                    residual_ratio(&cfg, &bundle, &train)
                });
                if report.wants("5") || report.wants("6") {
                    let cases = hybrid_cases(&cfg, &bundle, &test, cfg.hybrid.init.clone()).and_then(|coarse| {
                        Ok((coarse, hybrid_cases(&cfg, &bundle, &test, InitStrategy::ZeroField)?))
                    });
                    match cases {
                        Ok((coarse, zero)) => {
                            report.line("5", DESK[1].1, true, || generalization(&cfg, &coarse));
                            report.line("6", DESK[2].1, true, || init_benefit(&coarse, &zero));
                        }
                        Err(e) => {
                            for (id, name) in &DESK[1..] {
                                report.line(id, name, true, || Err(Error::InvalidState(e.to_string())));
                            }
                        }
                    }
                }
            }
            Err(e) => {
                let msg = format!("desk experiment failed: {e}");
                for (id, name) in DESK {
                    report.line(id, name, true, || Err(Error::InvalidState(msg.clone())));
                }
            }
        }
    }
    report.line("7", "speedup directionality", true, speedup);
    report.line("8", "determinism and formats", true, determinism);

    if report.failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {}", report.failed.join(", "));
        ExitCode::FAILURE
    }
}
