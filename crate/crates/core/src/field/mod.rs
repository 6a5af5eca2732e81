//! Structured grids, scalar fields and the operators every other module
//! leans on: norms, z-score normalization, and coarse/fine transfer.

mod grid;
pub mod io;
mod transfer;

pub use grid::Grid;
pub use transfer::{prolongate, resample, resample_nearest, restrict};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node values on a [`Grid`], row-major (`j*nx + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid {}x{} needs {}",
                values.len(),
                grid.nx,
                grid.ny,
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        assert!(value.is_finite());
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Evaluates `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        ScalarField::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise map; fails if the map produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        norm_l2(&self.values)
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension(format!(
                "grid mismatch: {}x{} vs {}x{}",
                self.grid.nx, self.grid.ny, other.grid.nx, other.grid.ny
            )));
        }
        Ok(())
    }
}

/// Normalization statistics. `std` is floored at 1e-12 on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub mean: f64,
    pub std: f64,
}

impl FieldStats {
    pub const STD_FLOOR: f64 = 1e-12;

    pub fn new(mean: f64, std: f64) -> Self {
        FieldStats {
            mean,
            std: if std.is_finite() {
                std.max(Self::STD_FLOOR)
            } else {
                Self::STD_FLOOR
            },
        }
    }

    /// Pooled mean and population standard deviation over every node of every field.
    pub fn from_fields<'a>(fields: impl IntoIterator<Item = &'a ScalarField>) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        // Welford
        for f in fields {
            for &v in f.values() {
                n += 1;
                let d = v - mean;
                mean += d / n as f64;
                m2 += d * (v - mean);
            }
        }
        if n == 0 {
            return FieldStats::new(0.0, 1.0);
        }
        FieldStats::new(mean, (m2 / n as f64).sqrt())
    }
}

pub fn normalize(field: &ScalarField, stats: &FieldStats) -> ScalarField {
    let inv = 1.0 / stats.std;
    ScalarField {
        grid: field.grid,
        values: field.values.iter().map(|v| (v - stats.mean) * inv).collect(),
    }
}

pub fn denormalize(field: &ScalarField, stats: &FieldStats) -> ScalarField {
    ScalarField {
        grid: field.grid,
        values: field
            .values
            .iter()
            .map(|v| v * stats.std + stats.mean)
            .collect(),
    }
}

pub fn norm_l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two equal-length vectors.
pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `‖a − b‖₂ / ‖b‖₂`, or the absolute norm when `‖b‖₂ < 1e-14`.
pub fn relative_l2(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.check_same_grid(b)?;
    let d = l2_distance(&a.values, &b.values)?;
    let nb = b.norm_l2();
    Ok(if nb < 1e-14 { d } else { d / nb })
}

pub fn mse(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.check_same_grid(b)?;
    let n = a.values.len() as f64;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

pub fn max_abs_error(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}
