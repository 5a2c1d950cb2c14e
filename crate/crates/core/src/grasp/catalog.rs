//! The nine parametric objects: three families (pitcher, pan, plate) with
//! two size variants each. The catalog round-trips through TOML so objects
//! can be added without recompiling.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::sdf::{Aabb, DistanceField, Node, Shape};
use crate::{Error, Result};

pub const CATALOG_SCHEMA: &str = "graspmc.catalog/1";

/// Clearance added around an object's shape bounds.
pub const BOUNDS_PADDING: f64 = 0.005;

const WALL: f64 = 0.006;
/// Subtracted solids overshoot the part they cut so the difference field
/// has no spurious near-zero shell past the cut.
const CUT_OVERHANG: f64 = 0.05;
/// Maps the torus plane onto xz with the arc bulging toward +x.
const HANDLE_ROTATION: [f64; 4] = [0.5, -0.5, -0.5, -0.5];

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ObjectSpec {
    name: String,
    shape: Shape,
}

/// Named solid in its canonical frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "ObjectSpec", try_from = "ObjectSpec")]
pub struct ObjectModel {
    name: String,
    shape: Shape,
    node: Node,
    bounds: Aabb,
}

impl ObjectModel {
    pub fn new(name: impl Into<String>, shape: Shape) -> Result<Self> {
        let node = shape.compile()?;
        let bounds = shape.bounds().inflated(BOUNDS_PADDING);
        Ok(Self {
            name: name.into(),
            shape,
            node,
            bounds,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }
}

impl From<ObjectModel> for ObjectSpec {
    fn from(m: ObjectModel) -> Self {
        ObjectSpec {
            name: m.name,
            shape: m.shape,
        }
    }
}

impl TryFrom<ObjectSpec> for ObjectModel {
    type Error = Error;
    fn try_from(s: ObjectSpec) -> Result<Self> {
        ObjectModel::new(s.name, s.shape)
    }
}

impl DistanceField for ObjectModel {
    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.node.distance(p)
    }

    fn canonical_bounds(&self) -> Aabb {
        self.bounds
    }
}

/// Open-topped cylinder with walls and floor of thickness [`WALL`].
fn vessel(radius: f64, half_height: f64) -> Shape {
    Shape::Difference {
        base: Box::new(Shape::Cylinder {
            radius,
            half_height,
        }),
        subtract: vec![Shape::Cylinder {
            radius: radius - WALL,
            half_height: half_height + CUT_OVERHANG,
        }
        .translated([0.0, 0.0, WALL + CUT_OVERHANG])],
    }
}

pub fn pitcher(name: &str, radius: f64, half_height: f64) -> Result<ObjectModel> {
    let handle = Shape::TorusSegment {
        major_radius: 0.04,
        minor_radius: 0.008,
        half_angle: FRAC_PI_2,
    }
    .transformed([radius + 0.002, 0.0, 0.0], HANDLE_ROTATION);
    ObjectModel::new(
        name,
        Shape::Union {
            children: vec![vessel(radius, half_height), handle],
        },
    )
}

pub fn pan(name: &str, radius: f64, half_height: f64) -> Result<ObjectModel> {
    let half_length = 0.06;
    let handle = Shape::Cuboid {
        half_extents: [half_length, 0.012, 0.006],
    }
    .translated([radius + half_length - 0.003, 0.0, half_height - 0.006]);
    ObjectModel::new(
        name,
        Shape::Union {
            children: vec![vessel(radius, half_height), handle],
        },
    )
}

/// Disc of thickness 0.02 with a raised annular rim 0.02 wide.
pub fn plate(name: &str, radius: f64, rim_top: f64) -> Result<ObjectModel> {
    let disc_half = 0.01;
    let rim_half = 0.5 * (rim_top - disc_half);
    let rim_center = [0.0, 0.0, disc_half + rim_half];
    let rim = Shape::Difference {
        base: Box::new(
            Shape::Cylinder {
                radius,
                half_height: rim_half,
            }
            .translated(rim_center),
        ),
        subtract: vec![Shape::Cylinder {
            radius: radius - 0.02,
            half_height: rim_half + CUT_OVERHANG,
        }
        .translated(rim_center)],
    };
    ObjectModel::new(
        name,
        Shape::Union {
            children: vec![
                Shape::Cylinder {
                    radius,
                    half_height: disc_half,
                },
                rim,
            ],
        },
    )
}

/// The built-in catalog, in a fixed order.
pub fn object_catalog() -> Vec<ObjectModel> {
    let built = [
        pitcher("pitcher", 0.06, 0.09),
        pitcher("pitcher_tall", 0.05, 0.14),
        pitcher("pitcher_squat", 0.07, 0.07),
        pan("pan", 0.1, 0.025),
        pan("pan_small", 0.08, 0.025),
        pan("pan_deep", 0.09, 0.04),
        plate("plate", 0.12, 0.018),
        plate("plate_soup", 0.105, 0.024),
        plate("plate_dessert", 0.09, 0.018),
    ];
    built
        .into_iter()
        .map(|o| o.expect("built-in catalog parameters are valid"))
        .collect()
}

/// Serializable catalog document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Catalog {
    pub schema: String,
    pub objects: Vec<ObjectModel>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self {
            schema: CATALOG_SCHEMA.to_string(),
            objects: object_catalog(),
        }
    }
}

impl Catalog {
    pub fn find(&self, name: &str) -> Result<&ObjectModel> {
        self.objects
            .iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let catalog: Catalog = toml::from_str(text)?;
        if catalog.schema != CATALOG_SCHEMA {
            return Err(Error::Schema {
                expected: CATALOG_SCHEMA.to_string(),
                found: catalog.schema,
            });
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// Look up a built-in object by name.
pub fn find_object(name: &str) -> Result<ObjectModel> {
    object_catalog()
        .into_iter()
        .find(|o| o.name() == name)
        .ok_or_else(|| Error::UnknownObject(name.to_string()))
}
