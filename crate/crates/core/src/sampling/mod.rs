//! Foundation numerics shared by all samplers: dense symmetric
//! decompositions, multivariate Gaussian and von Mises-Fisher sampling,
//! and unit quaternions.

pub mod gaussian;
pub mod linalg;
pub mod quaternion;
pub mod vmf;

pub use gaussian::{sample_gaussian, standard_normal_vector, GaussianFactor};
pub use linalg::{
    cholesky_psd, sample_covariance, svd_symmetric, Matrix, SymmetricDecomposition, Vector,
};
pub use quaternion::UnitQuaternion;
pub use vmf::{uniform_on_sphere, VonMisesFisher};
