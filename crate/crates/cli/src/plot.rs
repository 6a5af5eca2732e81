//! Contour grids (CSV and binary PGM) and centerline profiles.

use latentpde::conditions::Rect;
use latentpde::{Grid, ScalarField};

/// Node index ranges `(i0..=i1, j0..=j1)` covering `rect`.
pub fn node_window(grid: &Grid, rect: &Rect) -> (usize, usize, usize, usize) {
    let (hx, hy) = (grid.hx(), grid.hy());
    let (x0, y0) = grid.origin;
    let lo = |v: f64, o: f64, h: f64, n: usize| (((v - o) / h - 1e-9).ceil().max(0.0) as usize).min(n - 1);
    let hi = |v: f64, o: f64, h: f64, n: usize| (((v - o) / h + 1e-9).floor().max(0.0) as usize).min(n - 1);
    (
        lo(rect.x0, x0, hx, grid.nx),
        hi(rect.x1, x0, hx, grid.nx),
        lo(rect.y0, y0, hy, grid.ny),
        hi(rect.y1, y0, hy, grid.ny),
    )
}

/// 8-bit P5 graymap of the window, top row = largest `y`, scaled so that
/// `range.0` is black and `range.1` white.
pub fn pgm(field: &ScalarField, window: (usize, usize, usize, usize), range: (f64, f64)) -> Vec<u8> {
    let (i0, i1, j0, j1) = window;
    let (w, h) = (i1 - i0 + 1, j1 - j0 + 1);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    let span = range.1 - range.0;
    for j in (j0..=j1).rev() {
        for i in i0..=i1 {
            let t = if span > 0.0 { (field.at(i, j) - range.0) / span } else { 0.0 };
            out.push((t.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

/// Node values as `ny` rows of `nx` columns, top row = largest `y`.
pub fn grid_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::new();
    for j in (0..g.ny).rev() {
        let row: Vec<String> = (0..g.nx).map(|i| format!("{:.16e}", field.at(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Values along the vertical line through the domain center, one per grid
/// row, interpolated linearly in `x` when the center falls between nodes.
pub fn centerline(field: &ScalarField) -> Vec<(f64, f64)> {
    let g = field.grid();
    let s = (g.nx - 1) as f64 / 2.0;
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(g.nx - 1);
    let t = s - i0 as f64;
    (0..g.ny)
        .map(|j| {
            (g.y(j), (1.0 - t) * field.at(i0, j) + t * field.at(i1, j))
        })
        .collect()
}

pub fn centerline_csv(hybrid: &ScalarField, reference: &ScalarField) -> String {
    let mut out = String::from("y,hybrid,reference\n");
    for ((y, a), (_, b)) in centerline(hybrid).into_iter().zip(centerline(reference)) {
        out.push_str(&format!("{y:.16e},{a:.16e},{b:.16e}\n"));
    }
    out
}
