//! Grasp classification cascade and the quality-based target density.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::gripper::{GripperModel, ProbedPart};
use super::sdf::{surface_normal, DistanceField};
use super::{project_state, Grasp, GraspOutcome, OutcomeKind, GRASP_DIM};
use crate::sampling::Vector;
use crate::target::{Evaluation, TargetDensity};

/// Probe depth below which the gripper body intersects the object.
pub const COLLISION_DEPTH: f64 = 1e-4;
/// Smallest sphere-tracing step along a closing line.
pub const MIN_MARCH_STEP: f64 = 1e-5;
/// Width of the bracketing interval after contact bisection.
pub const CONTACT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub friction_coefficient: f64,
    pub slip_threshold: f64,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            friction_coefficient: 0.5,
            slip_threshold: 0.05,
        }
    }
}

/// Precomputed probes plus quality parameters; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct GraspEvaluator {
    gripper: GripperModel,
    params: QualityParams,
    parts: Vec<ProbedPart>,
    cos_friction: f64,
}

/// Contact found by one jaw.
#[derive(Clone, Copy, Debug)]
struct Contact {
    point: Vector3<f64>,
    travel: f64,
}

impl GraspEvaluator {
    pub fn new(gripper: GripperModel, params: QualityParams) -> crate::Result<Self> {
        gripper.validate()?;
        if !(params.friction_coefficient > 0.0) || !(params.slip_threshold >= 0.0) {
            return Err(crate::Error::InvalidParameter(
                "friction coefficient must be positive and slip threshold nonnegative".into(),
            ));
        }
        Ok(Self {
            parts: gripper.probed_parts(),
            cos_friction: params.friction_coefficient.atan().cos(),
            gripper,
            params,
        })
    }

    pub fn gripper(&self) -> &GripperModel {
        &self.gripper
    }

    pub fn params(&self) -> &QualityParams {
        &self.params
    }

    pub fn evaluate<F: DistanceField + ?Sized>(&self, field: &F, grasp: &Grasp) -> GraspOutcome {
        let position = grasp.position();
        let workspace = field.canonical_bounds().inflated(self.gripper.reach());
        if !workspace.contains(&field.to_canonical(&position)) {
            return GraspOutcome::failed(OutcomeKind::Miss);
        }
        let rotation = grasp.orientation.to_rotation_matrix();
        if self.collides(field, &position, &rotation) {
            return GraspOutcome::failed(OutcomeKind::Collision);
        }
        let closing = rotation * GripperModel::closing_axis();
        let (Some(upper), Some(lower)) = (
            self.jaw_contact(field, &position, &rotation, 1.0),
            self.jaw_contact(field, &position, &rotation, -1.0),
        ) else {
            return GraspOutcome::failed(OutcomeKind::Miss);
        };
        let n_upper = surface_normal(field, &upper.point);
        let n_lower = surface_normal(field, &lower.point);
        let quality = self.quality(&n_upper, &n_lower, &closing);
        if quality > self.params.slip_threshold {
            GraspOutcome {
                kind: OutcomeKind::Success,
                quality,
            }
        } else {
            GraspOutcome::failed(OutcomeKind::Slipped)
        }
    }

    /// Antipodality times the smaller normalized friction-cone margin.
    ///
    /// `n_upper` belongs to the jaw on the `+closing` side, so a well aligned
    /// contact has `n_upper · closing = 1` and `n_lower · closing = -1`.
    pub fn quality(
        &self,
        n_upper: &Vector3<f64>,
        n_lower: &Vector3<f64>,
        closing: &Vector3<f64>,
    ) -> f64 {
        let antipodality = (-n_upper.dot(n_lower)).max(0.0);
        let margin =
            |cos_theta: f64| ((cos_theta - self.cos_friction) / (1.0 - self.cos_friction)).max(0.0);
        let friction = margin(n_upper.dot(closing)).min(margin(-n_lower.dot(closing)));
        (antipodality * friction).min(1.0)
    }

    fn collides<F: DistanceField + ?Sized>(
        &self,
        field: &F,
        position: &Vector3<f64>,
        rotation: &Matrix3<f64>,
    ) -> bool {
        self.parts.iter().any(|part| {
            let center = position + rotation * part.center;
            // 1-Lipschitz: nothing within the bounding sphere can be inside
            if field.distance(&center) > part.bounding_radius() + COLLISION_DEPTH {
                return false;
            }
            part.probes
                .iter()
                .any(|q| field.distance(&(position + rotation * q)) < -COLLISION_DEPTH)
        })
    }

    /// Closest contact of the jaw on the `side · closing` face, sweeping it
    /// toward the opposite jaw along each closing line.
    fn jaw_contact<F: DistanceField + ?Sized>(
        &self,
        field: &F,
        position: &Vector3<f64>,
        rotation: &Matrix3<f64>,
        side: f64,
    ) -> Option<Contact> {
        let span = self.gripper.jaw_span;
        let direction = rotation * (-side * GripperModel::closing_axis());
        self.gripper
            .closing_depths()
            .iter()
            .filter_map(|&depth| {
                let start = position + rotation * Vector3::new(0.0, side * 0.5 * span, depth);
                march(field, &start, &direction, span)
            })
            .min_by(|a, b| a.travel.total_cmp(&b.travel))
    }
}

/// First zero crossing of the field along `start + t · direction`,
/// `t ∈ [0, length]`.
fn march<F: DistanceField + ?Sized>(
    field: &F,
    start: &Vector3<f64>,
    direction: &Vector3<f64>,
    length: f64,
) -> Option<Contact> {
    let at = |t: f64| start + direction * t;
    let mut t = 0.0;
    let mut d = field.distance(start);
    if d <= 0.0 {
        return Some(Contact {
            point: *start,
            travel: 0.0,
        });
    }
    loop {
        let next = t + d.max(MIN_MARCH_STEP);
        if next > length {
            let d_end = field.distance(&at(length));
            if d_end > 0.0 {
                return None;
            }
            return Some(bisect(field, &at, t, length));
        }
        let d_next = field.distance(&at(next));
        if d_next <= 0.0 {
            return Some(bisect(field, &at, t, next));
        }
        t = next;
        d = d_next;
    }
}

fn bisect<F: DistanceField + ?Sized>(
    field: &F,
    at: &impl Fn(f64) -> Vector3<f64>,
    mut outside: f64,
    mut inside: f64,
) -> Contact {
    while inside - outside > CONTACT_TOLERANCE {
        let mid = 0.5 * (outside + inside);
        if mid <= outside || mid >= inside {
            break;
        }
        if field.distance(&at(mid)) > 0.0 {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    let travel = 0.5 * (outside + inside);
    Contact {
        point: at(travel),
        travel,
    }
}

/// Target density over 7D grasp states for one object.
pub struct GraspTarget<'a, F: DistanceField + ?Sized> {
    field: &'a F,
    evaluator: &'a GraspEvaluator,
}

impl<'a, F: DistanceField + ?Sized> GraspTarget<'a, F> {
    pub fn new(field: &'a F, evaluator: &'a GraspEvaluator) -> Self {
        Self { field, evaluator }
    }

    pub fn outcome(&self, x: &Vector) -> GraspOutcome {
        match Grasp::from_state(x) {
            Ok(g) => self.evaluator.evaluate(self.field, &g),
            Err(_) => GraspOutcome::failed(OutcomeKind::Miss),
        }
    }
}

impl<F: DistanceField + ?Sized> TargetDensity for GraspTarget<'_, F> {
    fn dim(&self) -> usize {
        GRASP_DIM
    }

    fn evaluate(&self, x: &Vector) -> Evaluation {
        let outcome = self.outcome(x);
        Evaluation {
            density: outcome.quality,
            outcome: Some(outcome.kind),
        }
    }

    fn project(&self, x: &mut Vector) {
        project_state(x);
    }
}
