use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{cholesky_psd, Matrix, Vector};
use crate::{Error, Result};

pub fn standard_normal_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw `mean + L z` with `L Lᵀ = covariance` and `z ~ N(0, I)`.
pub fn sample_gaussian<R: Rng + ?Sized>(
    mean: &Vector,
    covariance: &Matrix,
    rng: &mut R,
) -> Result<Vector> {
    GaussianFactor::new(covariance)?.sample(mean, rng)
}

/// A factored covariance, reusable for sampling and log-density evaluation.
#[derive(Clone, Debug)]
pub struct GaussianFactor {
    lower: Matrix,
    log_det: f64,
}

impl GaussianFactor {
    pub fn new(covariance: &Matrix) -> Result<Self> {
        let lower = cholesky_psd(covariance)?;
        let log_det = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { lower, log_det })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: &Vector, rng: &mut R) -> Result<Vector> {
        if mean.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: mean.len(),
            });
        }
        let z = standard_normal_vector(self.dim(), rng);
        Ok(mean + &self.lower * z)
    }

    /// Log-density of `N(mean, Σ)` at `x`. Only meaningful for positive
    /// definite covariances; a singular factor yields `-inf` or NaN.
    pub fn log_density(&self, x: &Vector, mean: &Vector) -> f64 {
        let d = self.dim();
        let diff = x - mean;
        // forward substitution L y = diff
        let mut y = Vector::zeros(d);
        for i in 0..d {
            let mut acc = diff[i];
            for k in 0..i {
                acc -= self.lower[(i, k)] * y[k];
            }
            y[i] = acc / self.lower[(i, i)];
        }
        -0.5 * y.norm_squared()
            - 0.5 * self.log_det
            - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}
