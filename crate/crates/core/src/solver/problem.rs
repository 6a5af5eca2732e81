use serde::{Deserialize, Serialize};
use std::time::Duration;

use crate::conditions::{BoundarySpec, GeometrySpec};
use crate::error::{Error, Result};
use crate::field::{resample, resample_nearest, Grid, ScalarField};

/// Steady conduction with volumetric source:
/// `-div(k grad T) = q` with per-edge temperature conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatProblem {
    pub grid: Grid,
    pub conductivity: ScalarField,
    pub source: ScalarField,
    pub bc: BoundarySpec,
    /// 1 inside solids, 0 in fluid. Only the flow solver and the geometry
    /// condition read it.
    pub solid: ScalarField,
}

impl HeatProblem {
    pub fn new(
        conductivity: ScalarField,
        source: ScalarField,
        bc: BoundarySpec,
        solid: ScalarField,
    ) -> Result<Self> {
        let grid = *source.grid();
        conductivity.check_same_grid(&source)?;
        solid.check_same_grid(&source)?;
        bc.validate()?;
        if conductivity.values().iter().any(|&k| k <= 0.0) {
            return Err(Error::InvalidSpec("conductivity must be positive everywhere".into()));
        }
        if solid.values().iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::InvalidSpec("solid mask must be 0/1".into()));
        }
        Ok(HeatProblem {
            grid,
            conductivity,
            source,
            bc,
            solid,
        })
    }

    /// Uniform unit conductivity, no solids.
    pub fn homogeneous(source: ScalarField, bc: BoundarySpec) -> Result<Self> {
        let g = *source.grid();
        HeatProblem::new(ScalarField::constant(g, 1.0), source, bc, ScalarField::zeros(g))
    }

    pub fn from_geometry(geometry: &GeometrySpec, bc: BoundarySpec, source: ScalarField) -> Result<Self> {
        let g = *source.grid();
        HeatProblem::new(
            geometry.conductivity_field(&g)?,
            source,
            bc,
            geometry.solid_mask(&g)?,
        )
    }

    /// The same problem sampled on another grid of the same domain. The
    /// source is interpolated; conductivity and mask take the nearest node.
    pub fn restate_on(&self, grid: &Grid) -> Result<Self> {
        HeatProblem::new(
            resample_nearest(&self.conductivity, grid)?,
            resample(&self.source, grid)?,
            self.bc,
            resample_nearest(&self.solid, grid)?,
        )
    }
}

/// Steady Boussinesq natural convection in stream-function/vorticity form.
#[derive(Debug, Clone, PartialEq)]
pub struct BoussinesqProblem {
    pub heat: HeatProblem,
    pub rayleigh: f64,
    pub prandtl: f64,
}

impl BoussinesqProblem {
    pub const MAX_RAYLEIGH: f64 = 1e6;

    pub fn new(heat: HeatProblem, rayleigh: f64, prandtl: f64) -> Result<Self> {
        let p = BoussinesqProblem {
            heat,
            rayleigh,
            prandtl,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rayleigh > 0.0 && self.rayleigh <= Self::MAX_RAYLEIGH) {
            return Err(Error::InvalidSpec(format!(
                "Rayleigh number {} outside (0, {:e}]",
                self.rayleigh,
                Self::MAX_RAYLEIGH
            )));
        }
        if !(self.prandtl > 0.0 && self.prandtl.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "Prandtl number {} must be positive",
                self.prandtl
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Physics {
    Heat,
    Boussinesq { rayleigh: f64, prandtl: f64 },
}

impl Physics {
    pub fn n_vars(&self) -> usize {
        self.var_names().len()
    }

    pub fn var_names(&self) -> &'static [&'static str] {
        match self {
            Physics::Heat => &["T"],
            Physics::Boussinesq { .. } => &["psi", "omega", "T"],
        }
    }

    /// Index of the temperature among the solution variables.
    pub fn temperature_index(&self) -> usize {
        self.n_vars() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Heat(HeatProblem),
    Boussinesq(BoussinesqProblem),
}

impl Problem {
    pub fn build(physics: Physics, heat: HeatProblem) -> Result<Self> {
        Ok(match physics {
            Physics::Heat => Problem::Heat(heat),
            Physics::Boussinesq { rayleigh, prandtl } => {
                Problem::Boussinesq(BoussinesqProblem::new(heat, rayleigh, prandtl)?)
            }
        })
    }

    pub fn heat(&self) -> &HeatProblem {
        match self {
            Problem::Heat(h) => h,
            Problem::Boussinesq(b) => &b.heat,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.heat().grid
    }

    pub fn physics(&self) -> Physics {
        match self {
            Problem::Heat(_) => Physics::Heat,
            Problem::Boussinesq(b) => Physics::Boussinesq {
                rayleigh: b.rayleigh,
                prandtl: b.prandtl,
            },
        }
    }

    pub fn n_vars(&self) -> usize {
        self.physics().n_vars()
    }

    pub fn restate_on(&self, grid: &Grid) -> Result<Problem> {
        Problem::build(self.physics(), self.heat().restate_on(grid)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual at exit.
    pub final_residual: f64,
    pub converged: bool,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

pub(crate) mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(secs.max(0.0)))
    }
}
