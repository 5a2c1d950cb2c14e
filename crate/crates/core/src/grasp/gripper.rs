//! Parallel-jaw gripper geometry.
//!
//! Gripper frame: the palm's front face is centered at the origin, the
//! fingers extend along the approach axis `+z` from `z = 0` to
//! `z = finger_length`, and the jaws close along `±y`. The palm occupies
//! `z ∈ [-palm_depth, 0]`. Each finger is `finger_width` wide along `x` and
//! half as thick along `y`; at full opening the inner finger faces sit at
//! `y = ±jaw_span / 2`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Collision probe spacing in meters.
pub const PROBE_PITCH: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub jaw_span: f64,
    pub finger_length: f64,
    pub finger_width: f64,
    pub palm_depth: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            jaw_span: 0.085,
            finger_length: 0.045,
            finger_width: 0.02,
            palm_depth: 0.03,
        }
    }
}

/// Axis-aligned box in the gripper frame with its surface probes.
#[derive(Clone, Debug)]
pub struct ProbedPart {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
    pub probes: Vec<Vector3<f64>>,
}

impl ProbedPart {
    fn new(center: Vector3<f64>, half_extents: Vector3<f64>, pitch: f64) -> Self {
        let counts: [usize; 3] =
            std::array::from_fn(|i| ((2.0 * half_extents[i] / pitch).ceil() as usize + 1).max(2));
        let coord = |axis: usize, k: usize| {
            let t = k as f64 / (counts[axis] - 1) as f64;
            center[axis] - half_extents[axis] + 2.0 * half_extents[axis] * t
        };
        let mut probes = Vec::new();
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                for k in 0..counts[2] {
                    let on_face = i == 0
                        || j == 0
                        || k == 0
                        || i + 1 == counts[0]
                        || j + 1 == counts[1]
                        || k + 1 == counts[2];
                    if on_face {
                        probes.push(Vector3::new(coord(0, i), coord(1, j), coord(2, k)));
                    }
                }
            }
        }
        Self {
            center,
            half_extents,
            probes,
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_extents.norm()
    }
}

impl GripperModel {
    pub fn approach_axis() -> Vector3<f64> {
        Vector3::z()
    }

    pub fn closing_axis() -> Vector3<f64> {
        Vector3::y()
    }

    pub fn finger_thickness(&self) -> f64 {
        0.5 * self.finger_width
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.jaw_span,
            self.finger_length,
            self.finger_width,
            self.palm_depth,
        ];
        if dims.iter().all(|d| *d > 0.0 && d.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "gripper dimensions must be positive".into(),
            ))
        }
    }

    /// Palm and both fingers at full opening, each with a surface lattice.
    pub fn probed_parts(&self) -> Vec<ProbedPart> {
        let t = self.finger_thickness();
        let half_span = 0.5 * self.jaw_span;
        let palm = ProbedPart::new(
            Vector3::new(0.0, 0.0, -0.5 * self.palm_depth),
            Vector3::new(
                0.5 * self.finger_width,
                half_span + t,
                0.5 * self.palm_depth,
            ),
            PROBE_PITCH,
        );
        let finger = |side: f64| {
            ProbedPart::new(
                Vector3::new(0.0, side * (half_span + 0.5 * t), 0.5 * self.finger_length),
                Vector3::new(0.5 * self.finger_width, 0.5 * t, 0.5 * self.finger_length),
                PROBE_PITCH,
            )
        };
        vec![finger(1.0), finger(-1.0), palm]
    }

    /// Depths along the approach axis of the closing lines swept by each
    /// jaw, from a quarter finger length to the fingertip.
    pub fn closing_depths(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.finger_length * (0.25 + 0.75 * i as f64 / 5.0))
    }

    /// Distance from the object's bounds within which contact is possible.
    pub fn reach(&self) -> f64 {
        2.0 * (self.jaw_span + self.finger_length)
    }
}
