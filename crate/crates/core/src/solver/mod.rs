//! Finite-difference reference solvers: conduction, Boussinesq natural
//! convection, and the coarse-grid initializer.

mod coarse;
mod flow;
mod heat;
pub mod operator;
mod problem;
mod residual_loss;

pub use coarse::{coarse_initialize, DEFAULT_COARSE_ITERS, DEFAULT_COARSE_N};
pub use flow::{
    flow_residuals, flow_velocity, solve_boussinesq, velocity_from_stream, FlowFields,
    FlowResiduals, PICARD_DAMPING,
};
pub use heat::solve_heat;
pub use operator::{heat_residual, TemperatureOperator};
pub use residual_loss::{residual_loss, ResidualLoss, ResidualScope};
pub use problem::{BoussinesqProblem, HeatProblem, Physics, Problem, SolveReport};
pub(crate) use problem::duration_secs;


use crate::error::Result;
use crate::field::ScalarField;

/// Over-relaxation factor of every SOR sweep.
pub const SOR_OMEGA: f64 = 1.7;

/// Solves either problem kind; variables in `Physics::var_names` order.
pub fn solve(problem: &Problem, tol: f64, max_iter: usize) -> Result<(Vec<ScalarField>, SolveReport)> {
    match problem {
        Problem::Heat(h) => {
            let (t, rep) = solve_heat(h, tol, max_iter)?;
            Ok((vec![t], rep))
        }
        Problem::Boussinesq(b) => {
            let (f, rep) = solve_boussinesq(b, tol, max_iter)?;
            Ok((f.into_vec(), rep))
        }
    }
}

/// Relative residual of the full PDE system for `fields`.
pub fn relative_residual(problem: &Problem, fields: &[ScalarField]) -> Result<f64> {
    match problem {
        Problem::Heat(h) => {
            let t = fields.first().ok_or_else(|| {
                crate::error::Error::Dimension("heat solution needs one field".into())
            })?;
            let r = heat_residual(t, h)?;
            Ok(r.norm_l2() / TemperatureOperator::new(h).residual_scale())
        }
        Problem::Boussinesq(b) => {
            if fields.len() != 3 {
                return Err(crate::error::Error::Dimension(format!(
                    "flow solution needs 3 fields, got {}",
                    fields.len()
                )));
            }
            let f = FlowFields {
                psi: fields[0].clone(),
                omega: fields[1].clone(),
                temperature: fields[2].clone(),
            };
            Ok(flow_residuals(b, &f)?.joint())
        }
    }
}
