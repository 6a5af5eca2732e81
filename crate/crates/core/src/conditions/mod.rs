//! PDE conditions: heat-source mixtures, solid geometry, boundary conditions,
//! and their field representations.

mod boundary;
mod geometry;
mod gmm;

pub use boundary::{boundary_field, BoundaryCondition, BoundarySpec, Edge, EdgeConditions};
pub use geometry::{
    binarize_levelset, geometry_to_levelset, rect_signed_distance, GeometrySpec, Solid,
};
pub use gmm::{
    integrated_power, sample_gmm, GaussianComponent, GaussianMixtureSpec, MAX_COMPONENTS,
    SIGMA_FRACTION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn of_grid(grid: &Grid) -> Self {
        Rect::new(
            grid.origin.0,
            grid.origin.1,
            grid.origin.0 + grid.lx,
            grid.origin.1 + grid.ly,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x1 <= self.x0 || self.y1 <= self.y0 {
            return Err(Error::InvalidSpec(format!("empty or invalid rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        let eps = 1e-12 * self.width().max(self.height()).max(1.0);
        other.x0 >= self.x0 - eps
            && other.x1 <= self.x1 + eps
            && other.y0 >= self.y0 - eps
            && other.y1 <= self.y1 + eps
    }
}
