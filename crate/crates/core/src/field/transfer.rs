//! Grid transfer: bilinear prolongation, injection restriction, and generic
//! resampling between grids that share a domain.

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

fn check_domain(src: &Grid, dst: &Grid) -> Result<()> {
    if !src.same_domain(dst) {
        return Err(Error::DomainMismatch(format!(
            "extents {}x{} at {:?} vs {}x{} at {:?}",
            src.lx, src.ly, src.origin, dst.lx, dst.ly, dst.origin
        )));
    }
    Ok(())
}

/// Locates `t` in `[0, n-1]` node units: returns the lower node and the
/// fractional offset inside its cell.
#[inline]
fn locate(t: f64, n: usize) -> (usize, f64) {
    let t = t.clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n - 2);
    (i, t - i as f64)
}

fn bilinear_onto(src: &ScalarField, dst: &Grid) -> ScalarField {
    let g = src.grid();
    let v = src.values();
    // Node-unit coordinates from integer ratios keep coincident nodes exact.
    let rx = |i: usize| (i * (g.nx - 1)) as f64 / (dst.nx - 1) as f64;
    let ry = |j: usize| (j * (g.ny - 1)) as f64 / (dst.ny - 1) as f64;
    let mut out = Vec::with_capacity(dst.len());
    for j in 0..dst.ny {
        let (j0, fy) = locate(ry(j), g.ny);
        for i in 0..dst.nx {
            let (i0, fx) = locate(rx(i), g.nx);
            let a = v[g.idx(i0, j0)];
            let b = v[g.idx(i0 + 1, j0)];
            let c = v[g.idx(i0, j0 + 1)];
            let d = v[g.idx(i0 + 1, j0 + 1)];
            let lo = a * (1.0 - fx) + b * fx;
            let hi = c * (1.0 - fx) + d * fx;
            out.push(lo * (1.0 - fy) + hi * fy);
        }
    }
    ScalarField::new(*dst, out).expect("bilinear combination of finite values is finite")
}

/// Bilinear interpolation of coarse nodal values onto a finer grid of the
/// same domain. Reproduces any bilinear function of `(x, y)`.
pub fn prolongate(coarse: &ScalarField, fine_grid: &Grid) -> Result<ScalarField> {
    check_domain(coarse.grid(), fine_grid)?;
    let c = coarse.grid();
    if fine_grid.nx < c.nx || fine_grid.ny < c.ny {
        return Err(Error::DomainMismatch(format!(
            "target {}x{} is coarser than source {}x{}",
            fine_grid.nx, fine_grid.ny, c.nx, c.ny
        )));
    }
    Ok(bilinear_onto(coarse, fine_grid))
}

/// Bilinear resampling onto any grid of the same domain, finer or coarser.
pub fn resample(field: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    check_domain(field.grid(), grid)?;
    Ok(bilinear_onto(field, grid))
}

/// Nearest-node resampling; keeps piecewise-constant data (masks,
/// conductivity jumps) free of intermediate values.
pub fn resample_nearest(field: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    check_domain(field.grid(), grid)?;
    let g = field.grid();
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let sj = ((j * (g.ny - 1)) as f64 / (grid.ny - 1) as f64).round() as usize;
        for i in 0..grid.nx {
            let si = ((i * (g.nx - 1)) as f64 / (grid.nx - 1) as f64).round() as usize;
            out.push(field.at(si, sj));
        }
    }
    ScalarField::new(*grid, out)
}

/// Injection: every coarse node takes the value of the coincident fine node.
/// Requires `(fine.n - 1)` to be a multiple of `(coarse.n - 1)` on both axes.
pub fn restrict(fine: &ScalarField, coarse_grid: &Grid) -> Result<ScalarField> {
    let f = fine.grid();
    check_domain(f, coarse_grid)?;
    let nested = |nf: usize, nc: usize| nc <= nf && (nf - 1) % (nc - 1) == 0;
    if !nested(f.nx, coarse_grid.nx) || !nested(f.ny, coarse_grid.ny) {
        return Err(Error::DomainMismatch(format!(
            "grids {}x{} and {}x{} are not nested",
            f.nx, f.ny, coarse_grid.nx, coarse_grid.ny
        )));
    }
    let rx = (f.nx - 1) / (coarse_grid.nx - 1);
    let ry = (f.ny - 1) / (coarse_grid.ny - 1);
    let mut out = Vec::with_capacity(coarse_grid.len());
    for j in 0..coarse_grid.ny {
        for i in 0..coarse_grid.nx {
            out.push(fine.at(i * rx, j * ry));
        }
    }
    ScalarField::new(*coarse_grid, out)
}
