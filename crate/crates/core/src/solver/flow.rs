//! Steady natural convection in stream-function/vorticity/temperature form:
//!
//! ```text
//! lap(psi) = -omega
//! u·grad(omega) = Pr lap(omega) + Ra Pr dT/dx
//! u·grad(T) = div(k grad T) + q
//! u = dpsi/dy,  v = -dpsi/dx
//! ```
//!
//! Walls and solids are no-slip with `psi = 0` (every solid is attached to a
//! wall); wall vorticity follows Thom's formula. Each outer (Picard)
//! iteration performs one sweep per equation (Gauss-Seidel for vorticity,
//! SOR otherwise), then relaxes the wall
//! vorticity and the advecting velocity toward their new values.

use std::time::Instant;

use super::heat::DIVERGENCE_FACTOR;
use super::operator::TemperatureOperator;
use super::{BoussinesqProblem, SolveReport, SOR_OMEGA};
use crate::error::{Error, Result};
use crate::field::{norm_l2, Grid, ScalarField};

pub const PICARD_DAMPING: f64 = 0.7;
const CHECK_EVERY: usize = 10;
const SCALE_FLOOR: f64 = 1e-3;
/// Over-relaxing the vorticity sweep destabilizes the wall-vorticity coupling.
const VORTICITY_RELAXATION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowFields {
    pub psi: ScalarField,
    pub omega: ScalarField,
    pub temperature: ScalarField,
}

impl FlowFields {
    /// `[psi, omega, T]`, the variable order used throughout the crate.
    pub fn into_vec(self) -> Vec<ScalarField> {
        vec![self.psi, self.omega, self.temperature]
    }
}

/// Per-node residual norms of a converged or partial flow state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResiduals {
    pub temperature: f64,
    pub vorticity: f64,
    pub stream: f64,
    pub wall: f64,
}

impl FlowResiduals {
    pub fn joint(&self) -> f64 {
        self.temperature
            .max(self.vorticity)
            .max(self.stream)
            .max(self.wall)
    }
}

pub(crate) struct FlowSystem<'a> {
    problem: &'a BoussinesqProblem,
    op: TemperatureOperator<'a>,
    grid: Grid,
    fluid: Vec<bool>,
    /// Non-fluid nodes with at least one fluid neighbour, and the
    /// coefficients of Thom's formula averaged over those neighbours.
    wall_nodes: Vec<usize>,
    wall_links: Vec<Vec<(usize, f64)>>,
}

pub(crate) struct FlowState {
    pub psi: Vec<f64>,
    pub omega: Vec<f64>,
    pub t: Vec<f64>,
    u_adv: Vec<f64>,
    v_adv: Vec<f64>,
}

impl<'a> FlowSystem<'a> {
    pub fn new(problem: &'a BoussinesqProblem) -> Self {
        let heat = &problem.heat;
        let g = heat.grid;
        let solid = heat.solid.values();
        let mut fluid = vec![false; g.len()];
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                fluid[p] = solid[p] == 0.0;
            }
        }
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut wall_nodes = Vec::new();
        let mut wall_links = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.idx(i, j);
                if fluid[p] {
                    continue;
                }
                let mut links = Vec::new();
                if i + 1 < g.nx && fluid[p + 1] {
                    links.push((p + 1, -2.0 * ihx2));
                }
                if i > 0 && fluid[p - 1] {
                    links.push((p - 1, -2.0 * ihx2));
                }
                if j + 1 < g.ny && fluid[p + g.nx] {
                    links.push((p + g.nx, -2.0 * ihy2));
                }
                if j > 0 && fluid[p - g.nx] {
                    links.push((p - g.nx, -2.0 * ihy2));
                }
                if !links.is_empty() {
                    let n = links.len() as f64;
                    for l in &mut links {
                        l.1 /= n;
                    }
                    wall_nodes.push(p);
                    wall_links.push(links);
                }
            }
        }
        FlowSystem {
            problem,
            op: TemperatureOperator::new(heat),
            grid: g,
            fluid,
            wall_nodes,
            wall_links,
        }
    }

    pub fn initial_state(&self) -> FlowState {
        let g = &self.grid;
        let mut t = vec![self.op.dirichlet_mean(); g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let row = self.op.row(i, j, None);
                if row.kind == super::operator::RowKind::Dirichlet {
                    t[g.idx(i, j)] = row.rhs;
                }
            }
        }
        FlowState {
            psi: vec![0.0; g.len()],
            omega: vec![0.0; g.len()],
            t,
            u_adv: vec![0.0; g.len()],
            v_adv: vec![0.0; g.len()],
        }
    }

    /// Nodal velocity from central differences at fluid nodes, zero elsewhere.
    pub fn velocities(&self, psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let (hx, hy) = (g.hx(), g.hy());
        let mut u = vec![0.0; g.len()];
        let mut v = vec![0.0; g.len()];
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                if self.fluid[p] {
                    u[p] = (psi[p + g.nx] - psi[p - g.nx]) / (2.0 * hy);
                    v[p] = -(psi[p + 1] - psi[p - 1]) / (2.0 * hx);
                }
            }
        }
        (u, v)
    }

    #[inline]
    fn thom(&self, k: usize, psi: &[f64]) -> f64 {
        self.wall_links[k].iter().map(|&(c, a)| a * psi[c]).sum()
    }

    #[inline]
    fn vorticity_row(&self, p: usize, s: &FlowState, u: f64, v: f64) -> (f64, f64) {
        let g = &self.grid;
        let (hx, hy) = (g.hx(), g.hy());
        let pr = self.problem.prandtl;
        let (dx2, dy2) = (pr / (hx * hx), pr / (hy * hy));
        let ae = dx2 - u.min(0.0) / hx;
        let aw = dx2 + u.max(0.0) / hx;
        let an = dy2 - v.min(0.0) / hy;
        let as_ = dy2 + v.max(0.0) / hy;
        let buoy = self.problem.rayleigh * pr * (s.t[p + 1] - s.t[p - 1]) / (2.0 * hx);
        let w = &s.omega;
        let nb = ae * w[p + 1] + aw * w[p - 1] + an * w[p + g.nx] + as_ * w[p - g.nx] + buoy;
        (ae + aw + an + as_, nb)
    }

    pub fn outer_iteration(&self, s: &mut FlowState) {
        let g = &self.grid;
        self.op
            .sor_sweep(&mut s.t, Some((&s.u_adv, &s.v_adv)), SOR_OMEGA);

        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                if !self.fluid[p] {
                    continue;
                }
                let (diag, nb) = self.vorticity_row(p, s, s.u_adv[p], s.v_adv[p]);
                s.omega[p] += VORTICITY_RELAXATION * (nb / diag - s.omega[p]);
            }
        }

        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let diag = 2.0 * (ihx2 + ihy2);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                if !self.fluid[p] {
                    continue;
                }
                let psi = &s.psi;
                let gs = ((psi[p + 1] + psi[p - 1]) * ihx2
                    + (psi[p + g.nx] + psi[p - g.nx]) * ihy2
                    + s.omega[p])
                    / diag;
                s.psi[p] += SOR_OMEGA * (gs - s.psi[p]);
            }
        }

        for k in 0..self.wall_nodes.len() {
            let p = self.wall_nodes[k];
            let target = self.thom(k, &s.psi);
            s.omega[p] += PICARD_DAMPING * (target - s.omega[p]);
        }
        let (u, v) = self.velocities(&s.psi);
        for p in 0..g.len() {
            s.u_adv[p] += PICARD_DAMPING * (u[p] - s.u_adv[p]);
            s.v_adv[p] += PICARD_DAMPING * (v[p] - s.v_adv[p]);
        }
    }

    /// Relative residuals of every equation at the current state, using the
    /// velocity implied by the current stream function.
    pub fn residuals(&self, s: &FlowState) -> FlowResiduals {
        let g = &self.grid;
        let (u, v) = self.velocities(&s.psi);
        let r_t = norm_l2(&self.op.residual_values(&s.t, Some((&u, &v))));

        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let (mut r_w, mut s_w, mut r_psi) = (0.0, 0.0, 0.0);
        let hx = g.hx();
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                if !self.fluid[p] {
                    continue;
                }
                let (diag, nb) = self.vorticity_row(p, s, u[p], v[p]);
                let rw = diag * s.omega[p] - nb;
                r_w += rw * rw;
                let buoy = self.problem.rayleigh * self.problem.prandtl * (s.t[p + 1] - s.t[p - 1])
                    / (2.0 * hx);
                s_w += buoy * buoy;
                let psi = &s.psi;
                let lap = (psi[p + 1] - 2.0 * psi[p] + psi[p - 1]) * ihx2
                    + (psi[p + g.nx] - 2.0 * psi[p] + psi[p - g.nx]) * ihy2;
                let rp = lap + s.omega[p];
                r_psi += rp * rp;
            }
        }
        let mut r_b = 0.0;
        for (k, &p) in self.wall_nodes.iter().enumerate() {
            let d = s.omega[p] - self.thom(k, &s.psi);
            r_b += d * d;
        }
        // Scales are floored at a small fraction of the magnitudes a buoyant
        // flow of the present temperature range would have, so a nearly
        // quiescent state is not measured against its own round-off.
        let n = (self.fluid.iter().filter(|&&f| f).count().max(1) as f64).sqrt();
        let t_ref = s.t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let len = self.grid.lx.max(self.grid.ly);
        let (ra, pr) = (self.problem.rayleigh, self.problem.prandtl);
        let floor = |x: f64, c: f64| {
            let f = SCALE_FLOOR * c * n;
            if x > f {
                x
            } else if f > 0.0 {
                f
            } else {
                1.0
            }
        };
        let s_t = self.op.residual_scale();
        let s_w = floor(s_w.sqrt(), ra * pr * t_ref / len);
        let s_psi = floor(norm_l2(&s.omega), ra * t_ref / len);
        FlowResiduals {
            temperature: r_t / s_t,
            vorticity: r_w.sqrt() / s_w,
            stream: r_psi.sqrt() / s_psi,
            wall: r_b.sqrt() / s_psi,
        }
    }

    /// Scaled mean squares of the vorticity, stream and wall residuals with
    /// the advecting velocity frozen at the one implied by `psi`, and their
    /// gradients with respect to `[psi, omega, T]`.
    pub fn equation_loss(&self, psi: &[f64], omega: &[f64], t: &[f64]) -> (f64, [Vec<f64>; 3]) {
        let g = &self.grid;
        let n = g.len();
        let (u, v) = self.velocities(psi);
        let (hx, hy) = (g.hx(), g.hy());
        let (ihx2, ihy2) = (1.0 / (hx * hx), 1.0 / (hy * hy));
        let (ra, pr) = (self.problem.rayleigh, self.problem.prandtl);
        let b = ra * pr / (2.0 * hx);
        let state = FlowState {
            psi: psi.to_vec(),
            omega: omega.to_vec(),
            t: t.to_vec(),
            u_adv: Vec::new(),
            v_adv: Vec::new(),
        };

        // Scales come from the problem data only, so the loss is an exact
        // quadratic in the fields once the velocity is fixed.
        let n_fluid = self.fluid.iter().filter(|&&f| f).count().max(1) as f64;
        let heat = &self.problem.heat;
        let q = heat.source.values();
        let k_mean = heat.conductivity.values().iter().sum::<f64>() / n as f64;
        let len = g.lx.max(g.ly);
        let q_rms = (q.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        let t_c = match q_rms * len * len / k_mean {
            x if x > 1e-12 => x,
            _ => 1.0,
        };
        let ms_w = (ra * pr * t_c / len).powi(2);
        let ms_psi = (ra * t_c / len).powi(2);
        let cw = 2.0 / (n_fluid * ms_w);
        let cp = 2.0 / (n_fluid * ms_psi);

        let mut d_psi = vec![0.0; n];
        let mut d_omega = vec![0.0; n];
        let mut d_t = vec![0.0; n];
        let mut loss = 0.0;
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                if !self.fluid[p] {
                    continue;
                }
                let (diag, nb) = self.vorticity_row(p, &state, u[p], v[p]);
                let rw = diag * omega[p] - nb;
                loss += rw * rw / (n_fluid * ms_w);
                let ae = pr * ihx2 - u[p].min(0.0) / hx;
                let aw = pr * ihx2 + u[p].max(0.0) / hx;
                let an = pr * ihy2 - v[p].min(0.0) / hy;
                let as_ = pr * ihy2 + v[p].max(0.0) / hy;
                let w = cw * rw;
                d_omega[p] += w * diag;
                d_omega[p + 1] -= w * ae;
                d_omega[p - 1] -= w * aw;
                d_omega[p + g.nx] -= w * an;
                d_omega[p - g.nx] -= w * as_;
                d_t[p + 1] -= w * b;
                d_t[p - 1] += w * b;

                let rp = (psi[p + 1] - 2.0 * psi[p] + psi[p - 1]) * ihx2
                    + (psi[p + g.nx] - 2.0 * psi[p] + psi[p - g.nx]) * ihy2
                    + omega[p];
                loss += rp * rp / (n_fluid * ms_psi);
                let w = cp * rp;
                d_psi[p] -= w * 2.0 * (ihx2 + ihy2);
                d_psi[p + 1] += w * ihx2;
                d_psi[p - 1] += w * ihx2;
                d_psi[p + g.nx] += w * ihy2;
                d_psi[p - g.nx] += w * ihy2;
                d_omega[p] += w;
            }
        }
        for (k, &p) in self.wall_nodes.iter().enumerate() {
            let rb = omega[p] - self.thom(k, psi);
            loss += rb * rb / (n_fluid * ms_psi);
            let w = cp * rb;
            d_omega[p] += w;
            for &(c, a) in &self.wall_links[k] {
                d_psi[c] -= w * a;
            }
        }
        (loss, [d_psi, d_omega, d_t])
    }

    pub fn into_fields(&self, s: FlowState) -> Result<FlowFields> {
        Ok(FlowFields {
            psi: ScalarField::new(self.grid, s.psi)?,
            omega: ScalarField::new(self.grid, s.omega)?,
            temperature: ScalarField::new(self.grid, s.t)?,
        })
    }
}

/// Damped Picard iteration over the three SOR sub-solves until the joint
/// relative residual is at most `tol` or `max_iter` outer iterations ran.
pub fn solve_boussinesq(
    problem: &BoussinesqProblem,
    tol: f64,
    max_iter: usize,
) -> Result<(FlowFields, SolveReport)> {
    problem.validate()?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidSpec(format!(
            "need tol > 0 and max_iter >= 1, got {tol} and {max_iter}"
        )));
    }
    let start = Instant::now();
    let sys = FlowSystem::new(problem);
    let mut state = sys.initial_state();
    let initial = sys.residuals(&state).joint();
    let mut res = initial;
    let mut iters = 0;
    while res > tol && iters < max_iter {
        let batch = CHECK_EVERY.min(max_iter - iters);
        for _ in 0..batch {
            sys.outer_iteration(&mut state);
        }
        iters += batch;
        res = sys.residuals(&state).joint();
        if !res.is_finite() || res > DIVERGENCE_FACTOR * initial.max(1.0) {
            return Err(Error::Divergence {
                iterations: iters,
                residual: res,
            });
        }
    }
    let report = SolveReport {
        iterations: iters,
        final_residual: res,
        converged: res <= tol,
        wall_time: start.elapsed(),
    };
    Ok((sys.into_fields(state)?, report))
}

/// Joint relative residual of arbitrary flow fields for `problem`.
pub fn flow_residuals(problem: &BoussinesqProblem, fields: &FlowFields) -> Result<FlowResiduals> {
    fields.psi.check_same_grid(&problem.heat.source)?;
    fields.omega.check_same_grid(&problem.heat.source)?;
    fields.temperature.check_same_grid(&problem.heat.source)?;
    let sys = FlowSystem::new(problem);
    let mut state = sys.initial_state();
    state.psi = fields.psi.values().to_vec();
    state.omega = fields.omega.values().to_vec();
    state.t = fields.temperature.values().to_vec();
    Ok(sys.residuals(&state))
}

/// Velocity of the flow solver (zero at walls and inside solids).
pub fn flow_velocity(problem: &BoussinesqProblem, psi: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    psi.check_same_grid(&problem.heat.source)?;
    let sys = FlowSystem::new(problem);
    let (u, v) = sys.velocities(psi.values());
    Ok((ScalarField::new(sys.grid, u)?, ScalarField::new(sys.grid, v)?))
}

/// `u = dpsi/dy`, `v = -dpsi/dx`: central differences inside, second-order
/// one-sided differences on the edges (first-order on 2-node axes).
pub fn velocity_from_stream(psi: &ScalarField) -> (ScalarField, ScalarField) {
    let g = *psi.grid();
    let d = |f: &dyn Fn(usize) -> f64, k: usize, n: usize, h: f64| -> f64 {
        if n == 2 {
            (f(1) - f(0)) / h
        } else if k == 0 {
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
        } else if k + 1 == n {
            (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
        } else {
            (f(k + 1) - f(k - 1)) / (2.0 * h)
        }
    };
    let mut u = Vec::with_capacity(g.len());
    let mut v = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            u.push(d(&|jj| psi.at(i, jj), j, g.ny, g.hy()));
            v.push(-d(&|ii| psi.at(ii, j), i, g.nx, g.hx()));
        }
    }
    (
        ScalarField::new(g, u).expect("finite differences of finite values"),
        ScalarField::new(g, v).expect("finite differences of finite values"),
    )
}
