use super::flow::FlowSystem;
use super::{solve_heat, Problem};
use crate::error::{Error, Result};
use crate::field::{resample, Grid, ScalarField};

pub const DEFAULT_COARSE_N: usize = 16;
pub const DEFAULT_COARSE_ITERS: usize = 200;
/// Tolerance for the early exit of the coarse solve; the iteration budget
/// normally ends it first.
const COARSE_TOL: f64 = 1e-10;

/// Solves `problem` restated on a `coarse_n`×`coarse_n` grid for at most
/// `coarse_iters` outer iterations, with no convergence requirement, and
/// interpolates every solution variable onto `fine_grid`.
pub fn coarse_initialize(
    problem: &Problem,
    coarse_n: usize,
    coarse_iters: usize,
    fine_grid: &Grid,
) -> Result<Vec<ScalarField>> {
    if coarse_n < 4 {
        return Err(Error::InvalidSpec(format!("coarse_n must be >= 4, got {coarse_n}")));
    }
    if coarse_iters == 0 {
        return Err(Error::InvalidSpec("coarse_iters must be >= 1".into()));
    }
    let coarse_grid = problem.grid().with_resolution(coarse_n, coarse_n)?;
    let coarse = problem.restate_on(&coarse_grid)?;
    let fields = match &coarse {
        Problem::Heat(h) => vec![solve_heat(h, COARSE_TOL, coarse_iters)?.0],
        Problem::Boussinesq(b) => {
            b.validate()?;
            let sys = FlowSystem::new(b);
            let mut state = sys.initial_state();
            let initial = sys.residuals(&state).joint();
            for it in 1..=coarse_iters {
                sys.outer_iteration(&mut state);
                if it % 10 == 0 || it == coarse_iters {
                    let r = sys.residuals(&state).joint();
                    if !r.is_finite() || r > super::heat::DIVERGENCE_FACTOR * initial.max(1.0) {
                        return Err(Error::Divergence {
                            iterations: it,
                            residual: r,
                        });
                    }
                    if r <= COARSE_TOL {
                        break;
                    }
                }
            }
            sys.into_fields(state)?.into_vec()
        }
    };
    fields.iter().map(|f| resample(f, fine_grid)).collect()
}
