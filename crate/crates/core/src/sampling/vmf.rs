use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::gaussian::standard_normal_vector;
use super::linalg::Vector;
use crate::{Error, Result};

/// von Mises-Fisher distribution on the unit sphere `S^{p-1}` for
/// `p ∈ {3, 4}`, with density proportional to `exp(κ μᵀx)`.
///
/// Sampling uses Wood's rejection scheme for the component along `μ` and a
/// uniform tangent direction, so the normalization constant is never
/// evaluated. `κ = 0` is the uniform distribution; `κ = ∞` returns `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VonMisesFisher {
    mean_direction: Vector,
    kappa: f64,
}

impl VonMisesFisher {
    pub fn new(mean_direction: Vector, kappa: f64) -> Result<Self> {
        let p = mean_direction.len();
        if p != 3 && p != 4 {
            return Err(Error::InvalidParameter(format!(
                "von Mises-Fisher supports p in {{3, 4}}, got {p}"
            )));
        }
        if (mean_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "mean direction must have unit norm".into(),
            ));
        }
        if !(kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "concentration must be nonnegative, got {kappa}"
            )));
        }
        Ok(Self {
            mean_direction,
            kappa,
        })
    }

    pub fn mean_direction(&self) -> &Vector {
        &self.mean_direction
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mean_direction.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let p = self.dim();
        if self.kappa == f64::INFINITY {
            return self.mean_direction.clone();
        }
        if self.kappa == 0.0 {
            return uniform_on_sphere(p, rng);
        }
        let w = self.sample_cosine(rng);
        let tangent = self.tangent_direction(rng);
        let x = &self.mean_direction * w + tangent * (1.0 - w * w).max(0.0).sqrt();
        let n = x.norm();
        x / n
    }

    /// Component `w = μᵀx` (Wood 1994).
    fn sample_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let dof = (self.dim() - 1) as f64;
        let kappa = self.kappa;
        // b written without the cancellation in (-2κ + sqrt(4κ² + dof²)) / dof
        let b = dof / (2.0 * kappa + (4.0 * kappa * kappa + dof * dof).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let one_minus_x0_sq = 4.0 * b / ((1.0 + b) * (1.0 + b));
        let c = kappa * x0 + dof * one_minus_x0_sq.ln();
        let beta = Beta::new(0.5 * dof, 0.5 * dof).expect("positive shape parameters");
        loop {
            let z: f64 = beta.sample(rng);
            let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            let u: f64 = 1.0 - rng.random::<f64>();
            if kappa * w + dof * (1.0 - x0 * w).ln() - c >= u.ln() {
                return w.clamp(-1.0, 1.0);
            }
        }
    }

    fn tangent_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mu = &self.mean_direction;
        loop {
            let v = standard_normal_vector(self.dim(), rng);
            let t = &v - mu * mu.dot(&v);
            let n = t.norm();
            if n > 1e-12 {
                return t / n;
            }
        }
    }
}

pub fn uniform_on_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vector {
    loop {
        let v = standard_normal_vector(p, rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
