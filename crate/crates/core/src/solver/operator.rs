//! Discrete temperature operator shared by the residual, the SOR sweeps and
//! the physics term of the solution-autoencoder loss.
//!
//! Interior rows discretize `u·grad T - div(k grad T) - q` with harmonic-mean
//! face conductivities and first-order upwind advection. Boundary rows are
//! `T - T_D` (Dirichlet) or a second-order one-sided outward derivative minus
//! the prescribed flux (Neumann).

use crate::conditions::{BoundaryCondition, Edge};
use crate::error::Result;
use crate::field::{Grid, ScalarField};

use super::HeatProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Dirichlet,
    Neumann,
    Interior,
}

/// One row `diag*x[p] + Σ off_c*x[c] = rhs`.
#[derive(Debug, Clone, Copy)]
pub struct StencilRow {
    pub kind: RowKind,
    pub diag: f64,
    pub off: [(usize, f64); 4],
    pub n_off: usize,
    pub rhs: f64,
}

impl StencilRow {
    #[inline]
    pub fn offdiag(&self) -> &[(usize, f64)] {
        &self.off[..self.n_off]
    }

    #[inline]
    pub fn residual(&self, p: usize, x: &[f64]) -> f64 {
        let mut r = self.diag * x[p] - self.rhs;
        for &(c, a) in self.offdiag() {
            r += a * x[c];
        }
        r
    }
}

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Velocity field sampled at the nodes; `None` means pure conduction.
pub type Velocity<'v> = Option<(&'v [f64], &'v [f64])>;

pub struct TemperatureOperator<'a> {
    grid: Grid,
    /// Face between (i,j) and (i+1,j), indexed `j*(nx-1) + i`.
    kx: Vec<f64>,
    /// Face between (i,j) and (i,j+1), indexed `j*nx + i`.
    ky: Vec<f64>,
    boundary: Vec<Option<(Edge, BoundaryCondition)>>,
    source: &'a [f64],
}

impl<'a> TemperatureOperator<'a> {
    pub fn new(problem: &'a HeatProblem) -> Self {
        let g = problem.grid;
        let k = problem.conductivity.values();
        let mut kx = Vec::with_capacity((g.nx - 1) * g.ny);
        for j in 0..g.ny {
            for i in 0..g.nx - 1 {
                kx.push(harmonic(k[g.idx(i, j)], k[g.idx(i + 1, j)]));
            }
        }
        let mut ky = Vec::with_capacity(g.nx * (g.ny - 1));
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                ky.push(harmonic(k[g.idx(i, j)], k[g.idx(i, j + 1)]));
            }
        }
        let mut boundary = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                boundary.push(problem.bc.temperature_at(&g, i, j));
            }
        }
        TemperatureOperator {
            grid: g,
            kx,
            ky,
            boundary,
            source: problem.source.values(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn row(&self, i: usize, j: usize, vel: Velocity<'_>) -> StencilRow {
        let g = &self.grid;
        let p = g.idx(i, j);
        let mut off = [(0usize, 0.0f64); 4];
        match self.boundary[p] {
            Some((_, BoundaryCondition::Dirichlet { value })) => StencilRow {
                kind: RowKind::Dirichlet,
                diag: 1.0,
                off,
                n_off: 0,
                rhs: value,
            },
            Some((edge, BoundaryCondition::Neumann { flux })) => {
                // Inward neighbours along the edge normal: p + stride, p + 2*stride.
                let (h, n, stride): (f64, usize, isize) = match edge {
                    Edge::Left => (g.hx(), g.nx, 1),
                    Edge::Right => (g.hx(), g.nx, -1),
                    Edge::Bottom => (g.hy(), g.ny, g.nx as isize),
                    Edge::Top => (g.hy(), g.ny, -(g.nx as isize)),
                };
                let step = |s: isize| (p as isize + s * stride) as usize;
                if n >= 3 {
                    off[0] = (step(1), -4.0 / (2.0 * h));
                    off[1] = (step(2), 1.0 / (2.0 * h));
                    StencilRow {
                        kind: RowKind::Neumann,
                        diag: 3.0 / (2.0 * h),
                        off,
                        n_off: 2,
                        rhs: flux,
                    }
                } else {
                    off[0] = (step(1), -1.0 / h);
                    StencilRow {
                        kind: RowKind::Neumann,
                        diag: 1.0 / h,
                        off,
                        n_off: 1,
                        rhs: flux,
                    }
                }
            }
            None => {
                let (hx, hy) = (g.hx(), g.hy());
                let (ihx2, ihy2) = (1.0 / (hx * hx), 1.0 / (hy * hy));
                let ke = self.kx[j * (g.nx - 1) + i];
                let kw = self.kx[j * (g.nx - 1) + i - 1];
                let kn = self.ky[j * g.nx + i];
                let ks = self.ky[(j - 1) * g.nx + i];
                let (u, v) = vel.map_or((0.0, 0.0), |(u, v)| (u[p], v[p]));
                let ae = ke * ihx2 - u.min(0.0) / hx;
                let aw = kw * ihx2 + u.max(0.0) / hx;
                let an = kn * ihy2 - v.min(0.0) / hy;
                let as_ = ks * ihy2 + v.max(0.0) / hy;
                off = [(p + 1, -ae), (p - 1, -aw), (p + g.nx, -an), (p - g.nx, -as_)];
                StencilRow {
                    kind: RowKind::Interior,
                    diag: ae + aw + an + as_,
                    off,
                    n_off: 4,
                    rhs: self.source[p],
                }
            }
        }
    }

    pub fn residual_values(&self, t: &[f64], vel: Velocity<'_>) -> Vec<f64> {
        let g = &self.grid;
        let mut r = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                r.push(self.row(i, j, vel).residual(g.idx(i, j), t));
            }
        }
        r
    }

    /// Residual values with every non-interior row zeroed, and the number of
    /// interior rows.
    pub fn interior_residual_values(&self, t: &[f64], vel: Velocity<'_>) -> (Vec<f64>, usize) {
        let g = &self.grid;
        let mut r = vec![0.0; g.len()];
        let mut n = 0;
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                let row = self.row(i, j, vel);
                if row.kind == RowKind::Interior {
                    r[p] = row.residual(p, t);
                    n += 1;
                }
            }
        }
        (r, n)
    }

    pub fn source(&self) -> &[f64] {
        self.source
    }

    /// `Aᵀ w` restricted to interior rows (rows outside the interior are
    /// treated as having zero weight).
    pub fn interior_transpose_apply(&self, w: &[f64], vel: Velocity<'_>) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let p = g.idx(i, j);
                let row = self.row(i, j, vel);
                if row.kind != RowKind::Interior {
                    continue;
                }
                out[p] += row.diag * w[p];
                for &(c, a) in row.offdiag() {
                    out[c] += a * w[p];
                }
            }
        }
        out
    }

    /// Scale used to make residual norms relative: `‖q‖₂`, or the norm of the
    /// boundary data when the source vanishes, or 1.
    pub fn residual_scale(&self) -> f64 {
        let q = crate::field::norm_l2(self.source);
        if q > 1e-14 {
            return q;
        }
        let b = self
            .boundary
            .iter()
            .flatten()
            .map(|(_, bc)| match bc {
                BoundaryCondition::Dirichlet { value } => value * value,
                BoundaryCondition::Neumann { flux } => flux * flux,
            })
            .sum::<f64>()
            .sqrt();
        if b > 1e-14 {
            b
        } else {
            1.0
        }
    }

    /// Mean of the Dirichlet values; the starting temperature for solves.
    pub fn dirichlet_mean(&self) -> f64 {
        let (sum, n) = self
            .boundary
            .iter()
            .flatten()
            .filter_map(|(_, bc)| match bc {
                BoundaryCondition::Dirichlet { value } => Some(*value),
                _ => None,
            })
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// One lexicographic SOR sweep. Interior rows are over-relaxed by
    /// `omega`; boundary rows are enforced directly.
    pub fn sor_sweep(&self, t: &mut [f64], vel: Velocity<'_>, omega: f64) {
        let g = &self.grid;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.idx(i, j);
                let row = self.row(i, j, vel);
                let mut s = row.rhs;
                for &(c, a) in row.offdiag() {
                    s -= a * t[c];
                }
                let gs = s / row.diag;
                t[p] = match row.kind {
                    RowKind::Interior => t[p] + omega * (gs - t[p]),
                    _ => gs,
                };
            }
        }
    }
}

/// Per-node residual of the conduction equation for `t`.
pub fn heat_residual(t: &ScalarField, problem: &HeatProblem) -> Result<ScalarField> {
    t.check_same_grid(&problem.source)?;
    let op = TemperatureOperator::new(problem);
    ScalarField::new(problem.grid, op.residual_values(t.values(), None))
}
