//! Temperature boundary conditions per domain edge.
//!
//! Velocity is always no-slip on the walls; only temperature is configurable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet { value: f64 },
    /// Prescribed outward normal derivative.
    Neumann { flux: f64 },
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeConditions {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    pub bottom: BoundaryCondition,
    pub top: BoundaryCondition,
}

impl EdgeConditions {
    pub fn get(&self, edge: Edge) -> BoundaryCondition {
        match edge {
            Edge::Left => self.left,
            Edge::Right => self.right,
            Edge::Bottom => self.bottom,
            Edge::Top => self.top,
        }
    }

    pub fn uniform(bc: BoundaryCondition) -> Self {
        EdgeConditions {
            left: bc,
            right: bc,
            bottom: bc,
            top: bc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub temperature: EdgeConditions,
}

impl BoundarySpec {
    /// Cold floor and ceiling, adiabatic side walls.
    pub fn cold_floor_and_ceiling() -> Self {
        let cold = BoundaryCondition::Dirichlet { value: 0.0 };
        let adiabatic = BoundaryCondition::Neumann { flux: 0.0 };
        BoundarySpec {
            temperature: EdgeConditions {
                left: adiabatic,
                right: adiabatic,
                bottom: cold,
                top: cold,
            },
        }
    }

    pub fn all_dirichlet(value: f64) -> Self {
        BoundarySpec {
            temperature: EdgeConditions::uniform(BoundaryCondition::Dirichlet { value }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.temperature;
        let edges = [t.left, t.right, t.bottom, t.top];
        if !edges.iter().any(BoundaryCondition::is_dirichlet) {
            return Err(Error::InvalidSpec(
                "temperature needs at least one Dirichlet edge".into(),
            ));
        }
        for bc in edges {
            let v = match bc {
                BoundaryCondition::Dirichlet { value } => value,
                BoundaryCondition::Neumann { flux } => flux,
            };
            if !v.is_finite() {
                return Err(Error::InvalidSpec("boundary value must be finite".into()));
            }
        }
        Ok(())
    }

    /// Condition governing boundary node `(i, j)` and the edge it belongs to.
    /// Corners follow the bottom/top edge unless that edge is Neumann and the
    /// side edge is Dirichlet. Returns `None` for interior nodes.
    pub fn temperature_at(&self, grid: &Grid, i: usize, j: usize) -> Option<(Edge, BoundaryCondition)> {
        let side = if i == 0 {
            Some(Edge::Left)
        } else if i + 1 == grid.nx {
            Some(Edge::Right)
        } else {
            None
        };
        let cap = if j == 0 {
            Some(Edge::Bottom)
        } else if j + 1 == grid.ny {
            Some(Edge::Top)
        } else {
            None
        };
        let t = &self.temperature;
        match (side, cap) {
            (None, None) => None,
            (Some(e), None) | (None, Some(e)) => Some((e, t.get(e))),
            (Some(s), Some(c)) => {
                let (bs, bc) = (t.get(s), t.get(c));
                if !bc.is_dirichlet() && bs.is_dirichlet() {
                    Some((s, bs))
                } else {
                    Some((c, bc))
                }
            }
        }
    }
}

/// Field encoding of the boundary conditions: Dirichlet nodes hold
/// `1 + tanh(value)/2`, Neumann nodes `-(1 + tanh(flux)/2)`, interior 0.
pub fn boundary_field(spec: &BoundarySpec, grid: &Grid) -> Result<ScalarField> {
    spec.validate()?;
    let mut values = vec![0.0; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if let Some((_, bc)) = spec.temperature_at(grid, i, j) {
                values[grid.idx(i, j)] = match bc {
                    BoundaryCondition::Dirichlet { value } => 1.0 + 0.5 * value.tanh(),
                    BoundaryCondition::Neumann { flux } => -(1.0 + 0.5 * flux.tanh()),
                };
            }
        }
    }
    ScalarField::new(*grid, values)
}
