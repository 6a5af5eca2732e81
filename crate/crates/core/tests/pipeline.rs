use latentpde::conditions::{BoundarySpec, GeometrySpec};
use latentpde::field::io::{read_field, write_field};
use latentpde::field::relative_l2;
use latentpde::solver::{coarse_initialize, relative_residual, solve, HeatProblem, Physics, Problem};
use latentpde::{Grid, ScalarField};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn bump_source(grid: Grid, bumps: &[(f64, f64, f64)]) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        bumps
            .iter()
            .map(|&(cx, cy, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.01).exp())
            .sum()
    })
    .unwrap()
}

fn chip_problem(source: ScalarField) -> Problem {
    let heat = HeatProblem::from_geometry(
        &GeometrySpec::chip_on_board(),
        BoundarySpec::cold_floor_and_ceiling(),
        source,
    )
    .unwrap();
    Problem::build(Physics::Heat, heat).unwrap()
}

fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.35f64..0.65, 0.15f64..0.45, 0.1f64..5.0), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nonnegative_source_gives_nonnegative_temperature(b in bumps()) {
        let problem = chip_problem(bump_source(Grid::unit_square(17).unwrap(), &b));
        let (fields, report) = solve(&problem, TOL, 20_000).unwrap();
        prop_assert!(report.converged);
        prop_assert!(fields[0].min() >= -1e-10);
        prop_assert!(relative_residual(&problem, &fields).unwrap() < 1e-8);
    }

    #[test]
    fn conduction_is_linear_in_the_source(b in bumps(), s in 0.25f64..4.0) {
        let grid = Grid::unit_square(17).unwrap();
        let q = bump_source(grid, &b);
        let (t1, _) = solve(&chip_problem(q.clone()), TOL, 20_000).unwrap();
        let (t2, _) = solve(&chip_problem(q.map(|v| s * v).unwrap()), TOL, 20_000).unwrap();
        let scaled = t1[0].map(|v| s * v).unwrap();
        prop_assert!(relative_l2(&t2[0], &scaled).unwrap() < 1e-6);
    }

    #[test]
    fn field_files_round_trip_bit_exact(bits in prop::collection::vec(any::<u64>(), 25)) {
        let grid = Grid::unit_square(5).unwrap();
        let values: Vec<f64> = bits.iter().map(|&b| {
            let v = f64::from_bits(b);
            if v.is_finite() { v } else { 0.0 }
        }).collect();
        let field = ScalarField::new(grid, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.lpdf");
        write_field(&path, &field).unwrap();
        let back = read_field(&path, &grid).unwrap();
        let a: Vec<u64> = field.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn coarse_init_at_full_resolution_matches_reference() {
    let grid = Grid::unit_square(33).unwrap();
    let problem = chip_problem(bump_source(grid, &[(0.5, 0.3, 2.0)]));
    let (reference, _) = solve(&problem, 1e-10, 50_000).unwrap();
    let init = coarse_initialize(&problem, 33, 50_000, &grid).unwrap();
    assert!(relative_l2(&init[0], &reference[0]).unwrap() < 1e-8);
}

#[test]
fn coarse_init_approximates_the_fine_solution() {
    let grid = Grid::unit_square(65).unwrap();
    let problem = chip_problem(bump_source(grid, &[(0.45, 0.3, 1.0), (0.6, 0.35, 3.0)]));
    let (reference, _) = solve(&problem, 1e-10, 100_000).unwrap();
    let init = coarse_initialize(&problem, 17, 5_000, &grid).unwrap();
    let err = relative_l2(&init[0], &reference[0]).unwrap();
    assert!(err < 0.1, "coarse init error {err}");
}
