//! Synthetic demonstrated grasps: pick a surface point, stand the gripper
//! off along the outward normal, and hill-climb over orientation.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::GraspEvaluator;
use super::sdf::{surface_normal, DistanceField};
use super::{Grasp, GraspOutcome, OutcomeKind};
use crate::sampling::{standard_normal_vector, UnitQuaternion, Vector, VonMisesFisher};
use crate::{Error, Result};

/// Surface points are accepted within this distance of the zero set.
pub const SHELL_WIDTH: f64 = 1e-3;
pub const MAX_DEMONSTRATION_ATTEMPTS: usize = 10_000;
pub const HILL_CLIMB_TRIALS: usize = 200;
/// Palm standoff from the surface point, as a fraction of finger length.
pub const STANDOFF_FRACTION: f64 = 0.4;
const EXPLORE_KAPPA: f64 = 10.0;
const REFINE_KAPPA: f64 = 200.0;
const MAX_SHELL_DRAWS: usize = 10_000_000;
const PROJECTION_STEPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub grasp: Grasp,
    pub quality: f64,
}

/// Uniform draw from the bounds conditioned on `|sdf| < SHELL_WIDTH`, then
/// Newton-projected along the gradient onto the zero set.
pub fn sample_surface_point<F, R>(field: &F, rng: &mut R) -> Result<Vector3<f64>>
where
    F: DistanceField + ?Sized,
    R: Rng + ?Sized,
{
    let b = field.canonical_bounds();
    for _ in 0..MAX_SHELL_DRAWS {
        let p = Vector3::from_fn(|i, _| rng.random_range(b.min[i]..=b.max[i]));
        let d = field.distance(&p);
        if d.abs() < SHELL_WIDTH {
            return Ok(project_to_surface(field, p));
        }
    }
    Err(Error::InvalidParameter(
        "object surface could not be located inside its bounds".into(),
    ))
}

/// Composite fields are only distance bounds, so one step may fall short.
fn project_to_surface<F: DistanceField + ?Sized>(field: &F, mut p: Vector3<f64>) -> Vector3<f64> {
    for _ in 0..PROJECTION_STEPS {
        let d = field.distance(&p);
        if d.abs() < 1e-12 {
            break;
        }
        p -= surface_normal(field, &p) * d;
    }
    p
}

fn random_perpendicular<R: Rng + ?Sized>(axis: &Vector3<f64>, rng: &mut R) -> Vector3<f64> {
    loop {
        let v = standard_normal_vector(3, rng);
        let v = Vector3::new(v[0], v[1], v[2]);
        let t = v - axis * axis.dot(&v);
        let n = t.norm();
        if n > 1e-9 {
            return t / n;
        }
    }
}

fn quaternion_vector(q: &UnitQuaternion) -> Vector {
    Vector::from_row_slice(&q.to_array())
}

/// One surface attempt: the best grasp found by orientation search.
fn attempt<F, R>(
    field: &F,
    evaluator: &GraspEvaluator,
    rng: &mut R,
) -> Result<(Grasp, GraspOutcome)>
where
    F: DistanceField + ?Sized,
    R: Rng + ?Sized,
{
    let s = sample_surface_point(field, rng)?;
    let n = surface_normal(field, &s);
    if n == Vector3::zeros() {
        let g = Grasp::new(s, UnitQuaternion::IDENTITY);
        return Ok((g, GraspOutcome::failed(OutcomeKind::Miss)));
    }
    let position = s + n * (STANDOFF_FRACTION * evaluator.gripper().finger_length);
    let approach = -n;
    let closing = random_perpendicular(&approach, rng);
    let initial = UnitQuaternion::from_frame(&closing.cross(&approach), &closing, &approach)?;

    let mut best = Grasp::new(position, initial);
    let mut best_outcome = evaluator.evaluate(field, &best);
    for _ in 0..HILL_CLIMB_TRIALS {
        let (center, kappa) = if best_outcome.kind == OutcomeKind::Success {
            (best.orientation, REFINE_KAPPA)
        } else {
            (initial, EXPLORE_KAPPA)
        };
        let v = VonMisesFisher::new(quaternion_vector(&center), kappa)?.sample(rng);
        let q = UnitQuaternion::canonicalize([v[0], v[1], v[2], v[3]])?;
        let candidate = Grasp::new(position, q);
        let outcome = evaluator.evaluate(field, &candidate);
        if outcome.quality > best_outcome.quality {
            best = candidate;
            best_outcome = outcome;
        }
    }
    Ok((best, best_outcome))
}

/// `count` successful grasps, or [`Error::DemonstrationFailure`] after
/// [`MAX_DEMONSTRATION_ATTEMPTS`] surface attempts.
pub fn demonstrate_grasps<F, R>(
    field: &F,
    evaluator: &GraspEvaluator,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Demonstration>>
where
    F: DistanceField + ?Sized,
    R: Rng + ?Sized,
{
    if count == 0 {
        return Err(Error::InvalidParameter(
            "demonstration count must be at least 1".into(),
        ));
    }
    let mut found = Vec::with_capacity(count);
    for _ in 0..MAX_DEMONSTRATION_ATTEMPTS {
        let (grasp, outcome) = attempt(field, evaluator, rng)?;
        if outcome.kind == OutcomeKind::Success {
            found.push(Demonstration {
                grasp,
                quality: outcome.quality,
            });
            if found.len() == count {
                return Ok(found);
            }
        }
    }
    Err(Error::DemonstrationFailure {
        found: found.len(),
        requested: count,
        attempts: MAX_DEMONSTRATION_ATTEMPTS,
    })
}
