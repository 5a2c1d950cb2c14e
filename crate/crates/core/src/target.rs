//! Target densities consumed by the samplers.

use serde::{Deserialize, Serialize};

use crate::grasp::OutcomeKind;
use crate::sampling::Vector;

/// Result of evaluating a target at one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Unnormalized density, `≥ 0`.
    pub density: f64,
    /// Outcome label for targets that classify states (grasps); `None` for
    /// purely numeric targets.
    pub outcome: Option<OutcomeKind>,
}

impl Evaluation {
    pub fn density(density: f64) -> Self {
        Self {
            density,
            outcome: None,
        }
    }
}

/// Unnormalized target density over a state space.
pub trait TargetDensity {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &Vector) -> Evaluation;

    fn density(&self, x: &Vector) -> f64 {
        self.evaluate(x).density
    }

    /// Map a raw proposal back onto the state space (e.g. renormalize a
    /// quaternion block). Euclidean targets leave the state untouched.
    fn project(&self, _x: &mut Vector) {}
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &Vector) -> Evaluation {
        (**self).evaluate(x)
    }
    fn project(&self, x: &mut Vector) {
        (**self).project(x)
    }
}

/// Mixture of isotropic Gaussians, used as an analytically known target.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
    dim: usize,
}

#[derive(Clone, Debug)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vector,
    pub sigma: f64,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Self {
        let dim = components.first().map_or(0, |c| c.mean.len());
        assert!(
            components
                .iter()
                .all(|c| c.mean.len() == dim && c.sigma > 0.0 && c.weight >= 0.0),
            "mixture components must share a dimension and have positive widths"
        );
        Self { components, dim }
    }

    /// Equal-weight mixture with a shared width.
    pub fn isotropic(means: Vec<Vector>, sigma: f64) -> Self {
        let w = 1.0 / means.len() as f64;
        Self::new(
            means
                .into_iter()
                .map(|mean| MixtureComponent {
                    weight: w,
                    mean,
                    sigma,
                })
                .collect(),
        )
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self::isotropic(vec![Vector::zeros(dim)], 1.0)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }
}

impl TargetDensity for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &Vector) -> Evaluation {
        let d = self.dim as f64;
        let density = self
            .components
            .iter()
            .map(|c| {
                let s2 = c.sigma * c.sigma;
                let norm = (2.0 * std::f64::consts::PI * s2).powf(-0.5 * d);
                c.weight * norm * (-(x - &c.mean).norm_squared() / (2.0 * s2)).exp()
            })
            .sum();
        Evaluation::density(density)
    }
}
