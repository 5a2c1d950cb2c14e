//! Analytic signed distance fields built from primitives.
//!
//! Primitives are exact Euclidean distances; unions and differences combine
//! them with `min`/`max`, which keeps every field 1-Lipschitz (a lower bound
//! on the true distance away from the surface) and exact at the zero set.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::sampling::UnitQuaternion;
use crate::Result;

/// Parametric description of a solid, serializable with a `kind` tag.
///
/// `Cylinder` and `TorusSegment` use the z axis as their symmetry axis. The
/// torus segment lies in the xy plane and keeps the arc within `half_angle`
/// of the +y axis; its cut ends are capped with hemispheres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    Cuboid {
        half_extents: [f64; 3],
    },
    Cylinder {
        radius: f64,
        half_height: f64,
    },
    TorusSegment {
        major_radius: f64,
        minor_radius: f64,
        half_angle: f64,
    },
    /// `child` placed with rotation `rotation` (`[w, x, y, z]`) then
    /// translated by `translation`.
    Transform {
        translation: [f64; 3],
        rotation: [f64; 4],
        child: Box<Shape>,
    },
    Union {
        children: Vec<Shape>,
    },
    Difference {
        base: Box<Shape>,
        subtract: Vec<Shape>,
    },
}

impl Shape {
    pub fn transformed(self, translation: [f64; 3], rotation: [f64; 4]) -> Shape {
        Shape::Transform {
            translation,
            rotation,
            child: Box::new(self),
        }
    }

    pub fn translated(self, translation: [f64; 3]) -> Shape {
        self.transformed(translation, [1.0, 0.0, 0.0, 0.0])
    }

    /// Compile into an evaluation tree with precomputed rotations.
    pub fn compile(&self) -> Result<Node> {
        Ok(match self {
            Shape::Sphere { radius } => Node::Sphere(check_positive(*radius, "radius")?),
            Shape::Cuboid { half_extents } => {
                for h in half_extents {
                    check_positive(*h, "half extent")?;
                }
                Node::Cuboid(Vector3::from(*half_extents))
            }
            Shape::Cylinder {
                radius,
                half_height,
            } => Node::Cylinder {
                radius: check_positive(*radius, "radius")?,
                half_height: check_positive(*half_height, "half height")?,
            },
            Shape::TorusSegment {
                major_radius,
                minor_radius,
                half_angle,
            } => {
                if !(*half_angle > 0.0 && *half_angle <= std::f64::consts::PI) {
                    return Err(crate::Error::InvalidParameter(
                        "torus half angle must lie in (0, π]".into(),
                    ));
                }
                Node::Torus {
                    sin_cos: half_angle.sin_cos(),
                    major: check_positive(*major_radius, "major radius")?,
                    minor: check_positive(*minor_radius, "minor radius")?,
                }
            }
            Shape::Transform {
                translation,
                rotation,
                child,
            } => {
                let q = UnitQuaternion::canonicalize(*rotation)?;
                Node::Transform {
                    inverse_rotation: q.to_rotation_matrix().transpose(),
                    translation: Vector3::from(*translation),
                    child: Box::new(child.compile()?),
                }
            }
            Shape::Union { children } => {
                if children.is_empty() {
                    return Err(crate::Error::InvalidParameter("empty union".into()));
                }
                Node::Union(children.iter().map(Shape::compile).collect::<Result<_>>()?)
            }
            Shape::Difference { base, subtract } => Node::Difference(
                Box::new(base.compile()?),
                subtract.iter().map(Shape::compile).collect::<Result<_>>()?,
            ),
        })
    }

    /// Conservative axis-aligned bounds.
    pub fn bounds(&self) -> Aabb {
        match self {
            Shape::Sphere { radius } => Aabb::symmetric(Vector3::repeat(*radius)),
            Shape::Cuboid { half_extents } => Aabb::symmetric(Vector3::from(*half_extents)),
            Shape::Cylinder {
                radius,
                half_height,
            } => Aabb::symmetric(Vector3::new(*radius, *radius, *half_height)),
            Shape::TorusSegment {
                major_radius,
                minor_radius,
                ..
            } => {
                let r = major_radius + minor_radius;
                Aabb::symmetric(Vector3::new(r, r, *minor_radius))
            }
            Shape::Transform {
                translation,
                rotation,
                child,
            } => {
                let inner = child.bounds();
                let rot = UnitQuaternion::canonicalize(*rotation)
                    .map(|q| q.to_rotation_matrix())
                    .unwrap_or_else(|_| Matrix3::identity());
                let t = Vector3::from(*translation);
                let mut out = Aabb::empty();
                for corner in inner.corners() {
                    out.include(&(rot * corner + t));
                }
                out
            }
            Shape::Union { children } => children
                .iter()
                .fold(Aabb::empty(), |acc, c| acc.merged(&c.bounds())),
            Shape::Difference { base, .. } => base.bounds(),
        }
    }
}

fn check_positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(crate::Error::InvalidParameter(format!(
            "{what} must be positive, got {v}"
        )))
    }
}

/// Compiled evaluation tree.
#[derive(Clone, Debug)]
pub enum Node {
    Sphere(f64),
    Cuboid(Vector3<f64>),
    Cylinder {
        radius: f64,
        half_height: f64,
    },
    Torus {
        sin_cos: (f64, f64),
        major: f64,
        minor: f64,
    },
    Transform {
        inverse_rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        child: Box<Node>,
    },
    Union(Vec<Node>),
    Difference(Box<Node>, Vec<Node>),
}

impl Node {
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Node::Sphere(r) => p.norm() - r,
            Node::Cuboid(h) => {
                let q = p.abs() - h;
                q.sup(&Vector3::zeros()).norm() + q.max().min(0.0)
            }
            Node::Cylinder {
                radius,
                half_height,
            } => {
                let dx = p.xy().norm() - radius;
                let dz = p.z.abs() - half_height;
                dx.max(dz).min(0.0) + (dx.max(0.0).hypot(dz.max(0.0)))
            }
            Node::Torus {
                sin_cos: (s, c),
                major,
                minor,
            } => {
                let px = p.x.abs();
                let k = if c * px > s * p.y {
                    px * s + p.y * c
                } else {
                    px.hypot(p.y)
                };
                (p.norm_squared() + major * major - 2.0 * major * k)
                    .max(0.0)
                    .sqrt()
                    - minor
            }
            Node::Transform {
                inverse_rotation,
                translation,
                child,
            } => child.distance(&(inverse_rotation * (p - translation))),
            Node::Union(children) => children
                .iter()
                .map(|c| c.distance(p))
                .fold(f64::INFINITY, f64::min),
            Node::Difference(base, subtract) => subtract
                .iter()
                .map(|c| -c.distance(p))
                .fold(base.distance(p), f64::max),
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self {
            min: min.into(),
            max: max.into(),
        }
    }

    pub fn symmetric(half: Vector3<f64>) -> Self {
        Self::new(-half, half)
    }

    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn lower(&self) -> Vector3<f64> {
        Vector3::from(self.min)
    }

    pub fn upper(&self) -> Vector3<f64> {
        Vector3::from(self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.upper() - self.lower()
    }

    pub fn include(&mut self, p: &Vector3<f64>) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn merged(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.include(&other.lower());
        out.include(&other.upper());
        out
    }

    pub fn inflated(&self, margin: f64) -> Aabb {
        Aabb::new(
            self.lower() - Vector3::repeat(margin),
            self.upper() + Vector3::repeat(margin),
        )
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (lo, hi) = (self.lower(), self.upper());
        std::array::from_fn(|i| {
            Vector3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
    }
}

/// A solid queried through its signed distance, in world coordinates.
pub trait DistanceField: Send + Sync {
    fn distance(&self, p: &Vector3<f64>) -> f64;

    /// Bounds in the object's canonical frame.
    fn canonical_bounds(&self) -> Aabb;

    /// Map a world point into the canonical frame.
    fn to_canonical(&self, p: &Vector3<f64>) -> Vector3<f64> {
        *p
    }
}

/// Step for central-difference gradients.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Normalized central-difference gradient; zero when the gradient vanishes.
pub fn surface_normal<F: DistanceField + ?Sized>(field: &F, p: &Vector3<f64>) -> Vector3<f64> {
    let g = raw_gradient(field, p);
    let n = g.norm();
    if n > 0.0 {
        g / n
    } else {
        Vector3::zeros()
    }
}

pub fn raw_gradient<F: DistanceField + ?Sized>(field: &F, p: &Vector3<f64>) -> Vector3<f64> {
    let h = GRADIENT_STEP;
    Vector3::from_fn(|i, _| {
        let mut e = Vector3::zeros();
        e[i] = h;
        (field.distance(&(p + e)) - field.distance(&(p - e))) / (2.0 * h)
    })
}

/// A field seen through a rigid transform: `world = R · canonical + t`.
pub struct PosedObject<'a, F: DistanceField + ?Sized> {
    inner: &'a F,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl<'a, F: DistanceField + ?Sized> PosedObject<'a, F> {
    pub fn new(inner: &'a F, rotation: UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self {
            inner,
            rotation: rotation.to_rotation_matrix(),
            translation,
        }
    }
}

impl<F: DistanceField + ?Sized> DistanceField for PosedObject<'_, F> {
    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.inner.distance(&self.to_canonical(p))
    }

    fn canonical_bounds(&self) -> Aabb {
        self.inner.canonical_bounds()
    }

    fn to_canonical(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.inner
            .to_canonical(&self.rotation.tr_mul(&(p - self.translation)))
    }
}
