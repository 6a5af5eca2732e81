use std::time::Instant;

use super::operator::TemperatureOperator;
use super::{HeatProblem, SolveReport, SOR_OMEGA};
use crate::error::{Error, Result};
use crate::field::{norm_l2, ScalarField};

/// Residual is re-evaluated every this many sweeps.
const CHECK_EVERY: usize = 10;
/// Divergence is declared when the residual grows past this multiple of its
/// starting value.
pub(crate) const DIVERGENCE_FACTOR: f64 = 1e6;

/// SOR (relaxation 1.7) on the 5-point conduction system until
/// `‖r‖₂ / ‖q‖₂ <= tol` or `max_iter` sweeps.
pub fn solve_heat(problem: &HeatProblem, tol: f64, max_iter: usize) -> Result<(ScalarField, SolveReport)> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidSpec(format!(
            "need tol > 0 and max_iter >= 1, got {tol} and {max_iter}"
        )));
    }
    let start = Instant::now();
    let op = TemperatureOperator::new(problem);
    let g = problem.grid;
    let scale = op.residual_scale();
    let mut t = vec![op.dirichlet_mean(); g.len()];
    // Put boundary data in place before measuring the starting residual.
    for j in 0..g.ny {
        for i in 0..g.nx {
            let row = op.row(i, j, None);
            if row.kind == super::operator::RowKind::Dirichlet {
                t[g.idx(i, j)] = row.rhs;
            }
        }
    }
    let relres = |t: &[f64]| norm_l2(&op.residual_values(t, None)) / scale;

    let initial = relres(&t);
    let mut res = initial;
    let mut sweeps = 0;
    while res > tol && sweeps < max_iter {
        let batch = CHECK_EVERY.min(max_iter - sweeps);
        for _ in 0..batch {
            op.sor_sweep(&mut t, None, SOR_OMEGA);
        }
        sweeps += batch;
        res = relres(&t);
        if !res.is_finite() || res > DIVERGENCE_FACTOR * initial.max(1.0) {
            return Err(Error::Divergence {
                iterations: sweeps,
                residual: res,
            });
        }
    }
    let report = SolveReport {
        iterations: sweeps,
        final_residual: res,
        converged: res <= tol,
        wall_time: start.elapsed(),
    };
    Ok((ScalarField::new(g, t)?, report))
}
