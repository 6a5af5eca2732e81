use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node-centered 2D grid. Node `(i, j)` sits at
/// `(x0 + i*hx, y0 + j*hy)` and is stored at index `j*nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub origin: (f64, f64),
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, origin: (f64, f64)) -> Result<Self> {
        let grid = Grid {
            nx,
            ny,
            lx,
            ly,
            origin,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `n`×`n` nodes over the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(n, n, 1.0, 1.0, (0.0, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 2 nodes per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) || !self.lx.is_finite() || !self.ly.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "grid extents must be positive, got {}x{}",
                self.lx, self.ly
            )));
        }
        if !self.origin.0.is_finite() || !self.origin.1.is_finite() {
            return Err(Error::InvalidSpec("grid origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        // Last node lands exactly on the far edge.
        if i + 1 == self.nx {
            self.origin.0 + self.lx
        } else {
            self.origin.0 + i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.origin.1 + self.ly
        } else {
            self.origin.1 + j as f64 * self.hy()
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Same physical extents and origin (within a relative 1e-12).
    pub fn same_domain(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        close(self.lx, other.lx)
            && close(self.ly, other.ly)
            && close(self.origin.0, other.origin.0)
            && close(self.origin.1, other.origin.1)
    }

    /// Same domain with a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Grid> {
        Grid::new(nx, ny, self.lx, self.ly, self.origin)
    }

    pub fn diagonal(&self) -> f64 {
        self.lx.hypot(self.ly)
    }
}
