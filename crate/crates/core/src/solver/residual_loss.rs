//! Differentiable PDE residual used as a training penalty. The advecting
//! velocity is treated as a constant, so every term is a quadratic in the
//! fields and its gradient is exact.

use serde::{Deserialize, Serialize};

use super::flow::FlowSystem;
use super::operator::TemperatureOperator;
use super::Problem;
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Which equations contribute to the residual penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualScope {
    #[default]
    Temperature,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualLoss {
    pub value: f64,
    /// Gradient with respect to each variable, in `Physics::var_names` order.
    pub gradients: Vec<Vec<f64>>,
}

/// Mean square interior residual of the temperature equation divided by the
/// mean square source, plus (for `All` on flow problems) the analogous
/// vorticity, stream-function and wall terms.
pub fn residual_loss(problem: &Problem, fields: &[ScalarField], scope: ResidualScope) -> Result<ResidualLoss> {
    let n_vars = problem.n_vars();
    if fields.len() != n_vars {
        return Err(Error::Dimension(format!(
            "expected {n_vars} fields, got {}",
            fields.len()
        )));
    }
    for f in fields {
        f.check_same_grid(&problem.heat().source)?;
    }
    let heat = problem.heat();
    let op = TemperatureOperator::new(heat);
    let ti = problem.physics().temperature_index();
    let t = fields[ti].values();

    let flow = match problem {
        Problem::Boussinesq(b) => Some(FlowSystem::new(b)),
        Problem::Heat(_) => None,
    };
    let vel = flow.as_ref().map(|s| s.velocities(fields[0].values()));
    let vel_ref = vel.as_ref().map(|(u, v)| (u.as_slice(), v.as_slice()));

    let (r, n_int) = op.interior_residual_values(t, vel_ref);
    let n_int = n_int.max(1) as f64;
    let mut ms_q = op.source().iter().map(|q| q * q).sum::<f64>() / op.source().len() as f64;
    if ms_q < 1e-28 {
        ms_q = op.residual_scale().powi(2) / op.source().len() as f64;
    }
    let value_t = r.iter().map(|x| x * x).sum::<f64>() / (n_int * ms_q);
    let c = 2.0 / (n_int * ms_q);
    let w: Vec<f64> = r.iter().map(|x| c * x).collect();
    let grad_t = op.interior_transpose_apply(&w, vel_ref);

    let mut gradients = vec![vec![0.0; t.len()]; n_vars];
    gradients[ti] = grad_t;
    let mut value = value_t;
    if let (Some(sys), ResidualScope::All) = (&flow, scope) {
        let (v, [dpsi, domega, dt]) = sys.equation_loss(fields[0].values(), fields[1].values(), t);
        value += v;
        gradients[0] = dpsi;
        gradients[1] = domega;
        for (a, b) in gradients[ti].iter_mut().zip(dt) {
            *a += b;
        }
    }
    Ok(ResidualLoss { value, gradients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{BoundarySpec, GeometrySpec};
    use crate::field::Grid;
    use crate::solver::{BoussinesqProblem, HeatProblem};

    fn field(g: Grid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::from_fn(g, f).unwrap()
    }

    fn problems() -> Vec<Problem> {
        let g = Grid::unit_square(9).unwrap();
        let q = field(g, |x, y| 40.0 * (-(x - 0.4).powi(2) * 20.0 - (y - 0.6).powi(2) * 20.0).exp());
        let bc = BoundarySpec::cold_floor_and_ceiling();
        let heat = HeatProblem::homogeneous(q.clone(), bc.clone()).unwrap();
        let geo = GeometrySpec::chip_on_board();
        let flow = BoussinesqProblem::new(
            HeatProblem::from_geometry(&geo, bc, q).unwrap(),
            500.0,
            0.71,
        )
        .unwrap();
        vec![Problem::Heat(heat), Problem::Boussinesq(flow)]
    }

    fn fields_for(p: &Problem) -> Vec<ScalarField> {
        let g = *p.grid();
        (0..p.n_vars())
            .map(|k| field(g, move |x, y| ((3.0 + k as f64) * x).sin() * (2.0 * y + k as f64).cos()))
            .collect()
    }

    fn check_gradient(p: &Problem, fields: &[ScalarField], vars: &[usize], scope: ResidualScope) {
        let base = residual_loss(p, fields, scope).unwrap();
        let g = *p.grid();
        let h = 1e-5;
        for &var in vars {
            for node in [g.idx(2, 3), g.idx(4, 4), g.idx(6, 1), g.idx(0, 5)] {
                let bump = |d: f64| {
                    let mut f = fields.to_vec();
                    let mut v = f[var].values().to_vec();
                    v[node] += d;
                    f[var] = ScalarField::new(g, v).unwrap();
                    f
                };
                let (plus, minus) = (bump(h), bump(-h));
                let lp = residual_loss(p, &plus, scope).unwrap().value;
                let lm = residual_loss(p, &minus, scope).unwrap().value;
                let fd = (lp - lm) / (2.0 * h);
                let an = base.gradients[var][node];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs().max(fd.abs())),
                    "{scope:?} var {var} node {node}: fd {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for p in problems() {
            let fields = fields_for(&p);
            let ti = p.physics().temperature_index();
            // The velocity depends on psi only, so T and omega enter quadratically.
            check_gradient(&p, &fields, &[ti], ResidualScope::Temperature);
            if p.n_vars() == 3 {
                check_gradient(&p, &fields, &[1, 2], ResidualScope::All);
                // With T and omega uniform the advection terms vanish for any
                // velocity, leaving psi quadratic as well.
                let g = *p.grid();
                let mut flat = fields.clone();
                flat[1] = ScalarField::constant(g, 0.3);
                flat[2] = ScalarField::constant(g, 1.2);
                check_gradient(&p, &flat, &[0], ResidualScope::All);
            }
        }
    }

    #[test]
    fn temperature_scope_ignores_flow_variables() {
        let p = &problems()[1];
        let l = residual_loss(p, &fields_for(p), ResidualScope::Temperature).unwrap();
        assert!(l.gradients[0].iter().chain(&l.gradients[1]).all(|&v| v == 0.0));
    }

    #[test]
    fn exact_solution_has_small_loss() {
        let p = &problems()[0];
        let Problem::Heat(h) = p else { unreachable!() };
        let (t, _) = crate::solver::solve_heat(h, 1e-12, 100_000).unwrap();
        let l = residual_loss(p, &[t], ResidualScope::Temperature).unwrap();
        assert!(l.value < 1e-18, "{}", l.value);
    }

    #[test]
    fn wrong_field_count() {
        let p = &problems()[1];
        let f = fields_for(&problems()[0]);
        assert!(matches!(
            residual_loss(p, &f, ResidualScope::All),
            Err(Error::Dimension(_))
        ));
    }
}
