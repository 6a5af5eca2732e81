//! Small trained models shared by unit tests.

use std::collections::BTreeMap;

use super::{condition_fields, train_condition_ae, ConditionAE, LatentRole, NetworkConfig, TrainConfig};
use crate::conditions::{sample_gmm, BoundarySpec, GeometrySpec};
use crate::field::{Grid, ScalarField};
use crate::solver::{solve, BoussinesqProblem, HeatProblem, Problem};

pub(crate) fn grid() -> Grid {
    Grid::unit_square(17).unwrap()
}

pub(crate) fn problem(seed: u64, flow: bool) -> Problem {
    let g = grid();
    let geo = GeometrySpec::chip_on_board();
    let chip = geo.solid("chip").unwrap().rect;
    let (_, q) = sample_gmm(seed, 1, 4, &g, chip, (50.0, 150.0)).unwrap();
    let heat = HeatProblem::from_geometry(&geo, BoundarySpec::cold_floor_and_ceiling(), q).unwrap();
    if flow {
        Problem::Boussinesq(BoussinesqProblem::new(heat, 1e3, 0.71).unwrap())
    } else {
        Problem::Heat(heat)
    }
}

pub(crate) fn dataset(n: usize, flow: bool) -> (Vec<Problem>, Vec<Vec<ScalarField>>) {
    let problems: Vec<Problem> = (0..n as u64).map(|s| problem(s + 1, flow)).collect();
    let solutions = problems
        .iter()
        .map(|p| solve(p, 1e-9, 100_000).unwrap().0)
        .collect();
    (problems, solutions)
}

pub(crate) fn small_network() -> NetworkConfig {
    NetworkConfig {
        channels: vec![4, 8],
        ..NetworkConfig::default()
    }
}

pub(crate) fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        lr: 3e-3,
        network: small_network(),
        ..TrainConfig::default()
    }
}

pub(crate) fn condition_aes(problems: &[Problem], epochs: usize) -> BTreeMap<LatentRole, ConditionAE> {
    let fields: Vec<_> = problems.iter().map(|p| condition_fields(p).unwrap()).collect();
    LatentRole::CONDITIONS
        .iter()
        .map(|&role| {
            let data: Vec<ScalarField> = fields.iter().map(|f| f[&role].clone()).collect();
            let dim = if role == LatentRole::Source { 12 } else { 2 };
            (role, train_condition_ae(&data, role, dim, &config(epochs)).unwrap().0)
        })
        .collect()
}
