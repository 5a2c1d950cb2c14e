use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Norm below which a 4-vector cannot be turned into a rotation.
pub const MIN_QUATERNION_NORM: f64 = 1e-12;

/// Unit quaternion in canonical form: `w ≥ 0`, and when `w == 0` the first
/// nonzero of `(x, y, z)` is positive. This picks one representative of the
/// `q ≡ -q` double cover so that Euclidean distances between states never
/// see antipodal duplicates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalize and canonicalize `[w, x, y, z]`. Idempotent: input already
    /// of unit norm (to a few ulps) is not rescaled, so serialized
    /// quaternions read back bit-identical.
    pub fn canonicalize(q: [f64; 4]) -> Result<Self> {
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > MIN_QUATERNION_NORM) || !norm.is_finite() {
            return Err(Error::ZeroQuaternion);
        }
        let mut c = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            q
        } else {
            q.map(|v| v / norm)
        };
        let flip = if c[0] != 0.0 {
            c[0] < 0.0
        } else {
            c[1..].iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
        };
        if flip {
            c = c.map(|v| -v);
        }
        // normalize -0.0 so equal rotations compare equal bitwise
        let c = c.map(|v| if v == 0.0 { 0.0 } else { v });
        Ok(Self {
            w: c[0],
            x: c[1],
            y: c[2],
            z: c[3],
        })
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > MIN_QUATERNION_NORM) {
            return Err(Error::InvalidParameter(
                "rotation axis has zero length".into(),
            ));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::canonicalize([c, s * a.x, s * a.y, s * a.z])
    }

    /// Quaternion of a proper rotation matrix.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let rot = Rotation3::from_matrix_unchecked(*m);
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
        Self::canonicalize([q.w, q.i, q.j, q.k])
    }

    /// Rotation taking the orthonormal frame `(e_x, e_y, e_z)` onto the given
    /// columns.
    pub fn from_frame(x: &Vector3<f64>, y: &Vector3<f64>, z: &Vector3<f64>) -> Result<Self> {
        Self::from_rotation_matrix(&Matrix3::from_columns(&[*x, *y, *z]))
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn as_nalgebra(&self) -> nalgebra::UnitQuaternion<f64> {
        Unit::new_unchecked(Quaternion::new(self.w, self.x, self.y, self.z))
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        self.as_nalgebra().to_rotation_matrix().into_inner()
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.as_nalgebra() * v
    }

    /// Hamilton product `self ⊗ rhs` (apply `rhs` first), canonicalized.
    pub fn compose(&self, rhs: &Self) -> Self {
        let q = self.as_nalgebra().into_inner() * rhs.as_nalgebra().into_inner();
        Self::canonicalize([q.w, q.i, q.j, q.k]).expect("product of unit quaternions is unit")
    }

    /// Geodesic angle of the relative rotation, in `[0, π]`.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let dot: f64 = self
            .to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| a * b)
            .sum();
        2.0 * dot.abs().min(1.0).acos()
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = <[f64; 4]>::deserialize(d)?;
        Self::canonicalize(q).map_err(serde::de::Error::custom)
    }
}
