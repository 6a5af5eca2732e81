//! Condition and solution autoencoders.
//!
//! Condition autoencoders compress geometry, boundary and source fields and
//! are trained on reconstruction alone. The solution autoencoder compresses
//! the solution variables; its decoder also receives the condition latents,
//! and its loss adds a PDE residual penalty on the decoded fields.

mod bundle;
mod condition;
#[cfg(test)]
pub(crate) mod fixture;
mod network;
mod solution;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use bundle::{ModelBundle, BUNDLE_SCHEMA_VERSION};
pub use condition::{train_condition_ae, ConditionAE};
pub use network::NetworkConfig;
pub use solution::{train_solution_ae, SolutionAE, SolutionLoss};
pub use train::{EpochRecord, LrSchedule, TrainConfig, TrainingLog};

use crate::conditions::boundary_field;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::solver::{HeatProblem, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentRole {
    Geometry,
    Boundary,
    Source,
    Solution,
}

impl LatentRole {
    pub const CONDITIONS: [LatentRole; 3] = [LatentRole::Geometry, LatentRole::Boundary, LatentRole::Source];

    pub fn name(self) -> &'static str {
        match self {
            LatentRole::Geometry => "geometry",
            LatentRole::Boundary => "boundary",
            LatentRole::Source => "source",
            LatentRole::Solution => "solution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub role: LatentRole,
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(role: LatentRole, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} latent", role.name())));
        }
        Ok(LatentVector { role, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Condition latents keyed by role; iteration order is the decoder's
/// concatenation order.
pub type ConditionLatents = BTreeMap<LatentRole, LatentVector>;

/// The condition fields a problem is described by: the 0/1 solid mask, the
/// boundary encoding and the heat source.
pub fn condition_fields(problem: &Problem) -> Result<BTreeMap<LatentRole, ScalarField>> {
    let heat = problem.heat();
    let mut out = BTreeMap::new();
    out.insert(LatentRole::Geometry, heat.solid.clone());
    out.insert(LatentRole::Boundary, boundary_field(&heat.bc, &heat.grid)?);
    out.insert(LatentRole::Source, heat.source.clone());
    Ok(out)
}

/// Encodes every condition of `problem` with the matching autoencoder.
pub fn encode_conditions(
    aes: &BTreeMap<LatentRole, ConditionAE>,
    problem: &Problem,
) -> Result<ConditionLatents> {
    let fields = condition_fields(problem)?;
    let mut out = BTreeMap::new();
    for role in LatentRole::CONDITIONS {
        let ae = aes.get(&role).ok_or_else(|| {
            Error::InvalidSpec(format!("no autoencoder for the {} condition", role.name()))
        })?;
        out.insert(role, ae.encode(&fields[&role])?);
    }
    Ok(out)
}

/// Reflection `x -> lx - x` of a nodal field.
pub fn mirror_x(field: &ScalarField) -> ScalarField {
    let g = *field.grid();
    let v = field.values();
    let mut out = Vec::with_capacity(v.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.push(v[g.idx(g.nx - 1 - i, j)]);
        }
    }
    ScalarField::new(g, out).expect("same grid")
}

/// Sign each solution variable picks up under the reflection: the stream
/// function and vorticity are odd, temperature is even.
pub(crate) fn mirror_signs(problem: &Problem) -> Vec<f64> {
    match problem {
        Problem::Heat(_) => vec![1.0],
        Problem::Boussinesq(_) => vec![-1.0, -1.0, 1.0],
    }
}

fn mirror_invariant(f: &ScalarField) -> bool {
    mirror_x(f).values() == f.values()
}

/// The same problem with its source reflected. Fails unless geometry,
/// conductivity and boundary conditions are themselves symmetric, since only
/// then is the reflected solution the solution of the reflected problem.
pub(crate) fn mirrored_problem(problem: &Problem) -> Result<Problem> {
    let h = problem.heat();
    let t = &h.bc.temperature;
    if !(mirror_invariant(&h.conductivity) && mirror_invariant(&h.solid) && t.left == t.right) {
        return Err(Error::InvalidSpec(
            "mirror augmentation needs geometry, conductivity and side walls symmetric about x = lx/2".into(),
        ));
    }
    let heat = HeatProblem::new(h.conductivity.clone(), mirror_x(&h.source), h.bc, h.solid.clone())?;
    Problem::build(problem.physics(), heat)
}
