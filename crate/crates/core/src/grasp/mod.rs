//! Desk-scale grasp simulation over 7D gripper poses.
//!
//! A grasp is `(x, y, z, q_w, q_x, q_y, q_z)` in an object's canonical
//! frame. Objects are analytic signed distance fields ([`sdf`]), the hand is
//! a parallel-jaw gripper ([`gripper`]), and [`evaluate`] classifies a pose
//! into one of four outcomes with an antipodal quality score that serves as
//! the unnormalized target density.

pub mod catalog;
pub mod demonstrate;
pub mod evaluate;
pub mod gripper;
pub mod sdf;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::sampling::{UnitQuaternion, Vector};
use crate::{Error, Result};

pub use catalog::{object_catalog, Catalog, ObjectModel};
pub use demonstrate::{demonstrate_grasps, Demonstration};
pub use evaluate::{GraspEvaluator, GraspTarget, QualityParams};
pub use gripper::GripperModel;
pub use sdf::{Aabb, DistanceField, PosedObject, Shape};

/// Dimension of the grasp state vector.
pub const GRASP_DIM: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub position: [f64; 3],
    pub orientation: UnitQuaternion,
}

impl Grasp {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion) -> Self {
        Self {
            position: position.into(),
            orientation,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn to_state(&self) -> Vector {
        let q = self.orientation.to_array();
        Vector::from_vec(vec![
            self.position[0],
            self.position[1],
            self.position[2],
            q[0],
            q[1],
            q[2],
            q[3],
        ])
    }

    /// Read a state vector, renormalizing and canonicalizing its quaternion.
    pub fn from_state(x: &Vector) -> Result<Self> {
        if x.len() != GRASP_DIM {
            return Err(Error::DimensionMismatch {
                expected: GRASP_DIM,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite grasp state".into()));
        }
        let orientation = UnitQuaternion::canonicalize([x[3], x[4], x[5], x[6]])?;
        Ok(Self {
            position: [x[0], x[1], x[2]],
            orientation,
        })
    }

    /// Apply the rigid transform `p ↦ R p + t` to the gripper pose.
    pub fn transformed(&self, rotation: &UnitQuaternion, translation: &Vector3<f64>) -> Self {
        Self::new(
            rotation.rotate(&self.position()) + translation,
            rotation.compose(&self.orientation),
        )
    }
}

/// Renormalize and canonicalize the quaternion block of a 7D state in
/// place. Degenerate blocks are left untouched and later classified as Miss.
pub fn project_state(x: &mut Vector) {
    if x.len() != GRASP_DIM {
        return;
    }
    if let Ok(q) = UnitQuaternion::canonicalize([x[3], x[4], x[5], x[6]]) {
        for (i, v) in q.to_array().into_iter().enumerate() {
            x[3 + i] = v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeKind {
    Success,
    Slipped,
    Collision,
    Miss,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] = [
        OutcomeKind::Success,
        OutcomeKind::Slipped,
        OutcomeKind::Collision,
        OutcomeKind::Miss,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OutcomeKind::Success => "success",
            OutcomeKind::Slipped => "slipped",
            OutcomeKind::Collision => "collision",
            OutcomeKind::Miss => "miss",
        }
    }
}

/// Classified grasp. `quality > 0` exactly when `kind` is Success.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub kind: OutcomeKind,
    pub quality: f64,
}

impl GraspOutcome {
    pub fn failed(kind: OutcomeKind) -> Self {
        debug_assert_ne!(kind, OutcomeKind::Success);
        Self { kind, quality: 0.0 }
    }
}
