//! Solid geometry as rectangles, its signed-distance level set, and the
//! binarized mask fed to the geometry autoencoder.

use serde::{Deserialize, Serialize};

use super::Rect;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solid {
    pub name: String,
    pub rect: Rect,
    /// Conductivity relative to the surrounding fluid.
    pub conductivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub domain: Rect,
    pub solids: Vec<Solid>,
}

impl GeometrySpec {
    /// A chip on a board attached to the floor of the unit cavity. Edges sit on
    /// multiples of 1/16 so they coincide with nodes of every `2^m + 1` grid.
    pub fn chip_on_board() -> Self {
        GeometrySpec {
            domain: Rect::new(0.0, 0.0, 1.0, 1.0),
            solids: vec![
                Solid {
                    name: "pcb".into(),
                    rect: Rect::new(0.125, 0.0, 0.875, 0.125),
                    conductivity: 2.0,
                },
                Solid {
                    name: "chip".into(),
                    rect: Rect::new(0.3125, 0.125, 0.6875, 0.5),
                    conductivity: 5.0,
                },
            ],
        }
    }

    pub fn empty(domain: Rect) -> Self {
        GeometrySpec {
            domain,
            solids: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        for s in &self.solids {
            s.rect.validate()?;
            if !self.domain.contains_rect(&s.rect) {
                return Err(Error::InvalidSpec(format!(
                    "solid '{}' extends outside the domain",
                    s.name
                )));
            }
            if !(s.conductivity > 0.0 && s.conductivity.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "solid '{}' conductivity must be positive",
                    s.name
                )));
            }
        }
        Ok(())
    }

    pub fn solid(&self, name: &str) -> Option<&Solid> {
        self.solids.iter().find(|s| s.name == name)
    }

    /// 1.0 in fluid; inside solids the conductivity of the last solid
    /// (in declaration order) that contains the node.
    pub fn conductivity_field(&self, grid: &Grid) -> Result<ScalarField> {
        ScalarField::from_fn(*grid, |x, y| {
            self.solids
                .iter()
                .rev()
                .find(|s| s.rect.contains(x, y))
                .map_or(1.0, |s| s.conductivity)
        })
    }

    pub fn solid_mask(&self, grid: &Grid) -> Result<ScalarField> {
        binarize_levelset(&geometry_to_levelset(self, grid)?)
    }
}

/// Signed distance from `(x, y)` to one rectangle, negative inside.
pub fn rect_signed_distance(r: &Rect, x: f64, y: f64) -> f64 {
    if r.contains(x, y) {
        -(x - r.x0).min(r.x1 - x).min(y - r.y0).min(r.y1 - y)
    } else {
        let dx = (r.x0 - x).max(0.0).max(x - r.x1);
        let dy = (r.y0 - y).max(0.0).max(y - r.y1);
        dx.hypot(dy)
    }
}

/// Signed distance to the union of solids (minimum over rectangles), clamped
/// to ± the grid diagonal. With no solids every node holds the diagonal.
pub fn geometry_to_levelset(spec: &GeometrySpec, grid: &Grid) -> Result<ScalarField> {
    spec.validate()?;
    let cap = grid.diagonal();
    ScalarField::from_fn(*grid, |x, y| {
        spec.solids
            .iter()
            .map(|s| rect_signed_distance(&s.rect, x, y))
            .fold(cap, f64::min)
            .max(-cap)
    })
}

/// 1 where `phi <= 0` (inside or on a solid boundary), else 0.
pub fn binarize_levelset(phi: &ScalarField) -> Result<ScalarField> {
    phi.map(|v| if v <= 0.0 { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_phi_gives_empty_mask() {
        let g = Grid::unit_square(5).unwrap();
        let m = binarize_levelset(&ScalarField::constant(g, 1.0)).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        let m = binarize_levelset(&ScalarField::zeros(g)).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn centered_square_mask_matches_sign_oracle() {
        let g = Grid::unit_square(9).unwrap();
        let phi = ScalarField::from_fn(g, |x, y| {
            (x - 0.5).abs().max((y - 0.5).abs()) - 0.25
        })
        .unwrap();
        let m = binarize_levelset(&phi).unwrap();
        for j in 0..9 {
            for i in 0..9 {
                let (x, y) = (i as f64 / 8.0, j as f64 / 8.0);
                let inside = (x - 0.5).abs().max((y - 0.5).abs()) <= 0.25;
                assert_eq!(m.at(i, j), if inside { 1.0 } else { 0.0 }, "node {i},{j}");
            }
        }
        // Nodes 2..=6 on each axis: a 5x5 block.
        assert_eq!(m.values().iter().sum::<f64>(), 25.0);
    }

    #[test]
    fn empty_geometry_is_capped_sentinel() {
        let g = Grid::new(6, 4, 2.0, 1.0, (0.0, 0.0)).unwrap();
        let phi = geometry_to_levelset(&GeometrySpec::empty(Rect::of_grid(&g)), &g).unwrap();
        assert!(phi.values().iter().all(|&v| v == g.diagonal()));
    }

    #[test]
    fn square_center_is_minus_half_width() {
        let g = Grid::new(5, 5, 2.0, 2.0, (-0.5, -0.5)).unwrap();
        let spec = GeometrySpec {
            domain: Rect::of_grid(&g),
            solids: vec![Solid {
                name: "unit".into(),
                rect: Rect::new(0.0, 0.0, 1.0, 1.0),
                conductivity: 3.0,
            }],
        };
        let phi = geometry_to_levelset(&spec, &g).unwrap();
        // node (2, 2) is (0.5, 0.5)
        assert_eq!(phi.at(2, 2), -0.5);
        // (1.5, 1.5) is sqrt(0.5) from the corner (1, 1)
        assert!((phi.at(4, 4) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn overlapping_union_matches_min_oracle() {
        let g = Grid::unit_square(17).unwrap();
        let a = Rect::new(0.1, 0.1, 0.6, 0.4);
        let b = Rect::new(0.4, 0.2, 0.8, 0.9);
        let spec = GeometrySpec {
            domain: Rect::of_grid(&g),
            solids: vec![
                Solid {
                    name: "a".into(),
                    rect: a,
                    conductivity: 1.0,
                },
                Solid {
                    name: "b".into(),
                    rect: b,
                    conductivity: 1.0,
                },
            ],
        };
        let phi = geometry_to_levelset(&spec, &g).unwrap();
        let brute = |r: &Rect, x: f64, y: f64| {
            let inside = x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1;
            if inside {
                -[x - r.x0, r.x1 - x, y - r.y0, r.y1 - y]
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            } else {
                // nearest point by clamping
                let cx = x.clamp(r.x0, r.x1);
                let cy = y.clamp(r.y0, r.y1);
                ((x - cx).powi(2) + (y - cy).powi(2)).sqrt()
            }
        };
        for j in 0..17 {
            for i in 0..17 {
                let (x, y) = (g.x(i), g.y(j));
                let oracle = brute(&a, x, y).min(brute(&b, x, y));
                assert!((phi.at(i, j) - oracle).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn conductivity_and_mask_of_canonical_case() {
        let spec = GeometrySpec::chip_on_board();
        spec.validate().unwrap();
        let g = Grid::unit_square(11).unwrap();
        let k = spec.conductivity_field(&g).unwrap();
        assert_eq!(k.at(5, 3), 5.0); // (0.5, 0.3) in the chip
        assert_eq!(k.at(2, 0), 2.0); // (0.2, 0.0) in the board
        assert_eq!(k.at(5, 8), 1.0); // fluid
        let m = spec.solid_mask(&g).unwrap();
        assert_eq!(m.at(5, 3), 1.0);
        assert_eq!(m.at(5, 8), 0.0);
        assert!(m.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn rejects_bad_solids() {
        let mut spec = GeometrySpec::chip_on_board();
        spec.solids[0].conductivity = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = GeometrySpec::chip_on_board();
        spec.solids[1].rect = Rect::new(0.5, 0.5, 1.2, 0.7);
        assert!(spec.validate().is_err());
    }
}
