//! Mode hopping with ellipsoidal jump regions (generalized darting).
//!
//! Each region is centered on a known mode and shaped by the
//! eigendecomposition `Σ = U S Uᵀ` of a chain covariance. A state `x` lies
//! in a region when `‖S⁻¹ Uᵀ (x − μ)‖ ≤ ε`, i.e. the semi-axes are `ε λᵢ`,
//! which makes the cached volume `π^{d/2} εᵈ ∏λᵢ / Γ(1 + d/2)` the literal
//! volume of the membership set. The `sqrt_scales` option switches to
//! semi-axes `ε √λᵢ`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::linalg::{matrix_serde, svd_symmetric, vector_serde};
use crate::sampling::{Matrix, Vector};
use crate::target::{Evaluation, TargetDensity};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DartingConfig {
    /// Probability gate for local moves.
    pub p_check: f64,
    /// Region scaling factor ε.
    pub epsilon: f64,
    /// Lower bound on each eigenvalue, in the state's native units.
    pub scale_floor: f64,
    /// Use the acceptance rule `u > min[1, n(x)π(x) / (n(x')π(x'))]`
    /// instead of the detailed-balance form.
    pub paper_literal_acceptance: bool,
    /// Semi-axes `ε √λ` instead of `ε λ`.
    pub sqrt_scales: bool,
}

impl Default for DartingConfig {
    fn default() -> Self {
        Self {
            p_check: 0.6,
            epsilon: 0.7,
            scale_floor: 1e-6,
            paper_literal_acceptance: false,
            sqrt_scales: false,
        }
    }
}

impl DartingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_check) {
            return Err(Error::InvalidParameter("p_check must lie in [0, 1]".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.scale_floor > 0.0) || !self.scale_floor.is_finite() {
            return Err(Error::InvalidParameter(
                "scale floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisConvention {
    /// Semi-axes `ε λᵢ`.
    Linear,
    /// Semi-axes `ε √λᵢ`.
    Sqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRegion {
    #[serde(with = "vector_serde")]
    center: Vector,
    #[serde(with = "matrix_serde")]
    rotation: Matrix,
    /// Floored eigenvalues λ, descending.
    #[serde(with = "vector_serde")]
    scales: Vector,
    epsilon: f64,
    convention: AxisConvention,
    volume: f64,
}

impl JumpRegion {
    pub fn center(&self) -> &Vector {
        &self.center
    }
    pub fn rotation(&self) -> &Matrix {
        &self.rotation
    }
    pub fn scales(&self) -> &Vector {
        &self.scales
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn volume(&self) -> f64 {
        self.volume
    }
    pub fn convention(&self) -> AxisConvention {
        self.convention
    }
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Semi-axis lengths per unit ε.
    pub fn axis_lengths(&self) -> Vector {
        match self.convention {
            AxisConvention::Linear => self.scales.clone(),
            AxisConvention::Sqrt => self.scales.map(f64::sqrt),
        }
    }

    /// `‖A⁻¹ Uᵀ (x − μ)‖` with `A` the semi-axis matrix; the state is inside
    /// when this is at most ε.
    pub fn whitened_radius(&self, x: &Vector) -> f64 {
        let local = self.rotation.tr_mul(&(x - &self.center));
        local.component_div(&self.axis_lengths()).norm()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.dim() && self.whitened_radius(x) <= self.epsilon
    }
}

/// Gamma function at `1 + d/2` by its recurrence from Γ(1) or Γ(1/2).
fn gamma_one_plus_half(d: usize) -> f64 {
    let mut value = if d.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    // Γ(1 + d/2) = ∏ over k = d/2, d/2 − 1, … down to 1 or 1/2
    let mut k = d as f64 / 2.0;
    while k > 0.0 {
        value *= k;
        k -= 1.0;
    }
    value
}

/// Volume of a d-ellipsoid with semi-axes `ε aᵢ`.
pub fn ellipsoid_volume(epsilon: f64, axes: &[f64]) -> f64 {
    let d = axes.len();
    let pi_term = std::f64::consts::PI.powf(d as f64 / 2.0);
    let product: f64 = axes.iter().product();
    pi_term * epsilon.powi(d as i32) * product / gamma_one_plus_half(d)
}

pub fn build_jump_region(
    mode: &Vector,
    chain_covariance: &Matrix,
    config: &DartingConfig,
) -> Result<JumpRegion> {
    config.validate()?;
    if chain_covariance.nrows() != mode.len() {
        return Err(Error::DimensionMismatch {
            expected: mode.len(),
            found: chain_covariance.nrows(),
        });
    }
    let dec = svd_symmetric(chain_covariance)?;
    let scales = dec.eigenvalues.map(|l| l.max(config.scale_floor));
    let convention = if config.sqrt_scales {
        AxisConvention::Sqrt
    } else {
        AxisConvention::Linear
    };
    let mut region = JumpRegion {
        center: mode.clone(),
        rotation: dec.rotation,
        scales,
        epsilon: config.epsilon,
        convention,
        volume: 0.0,
    };
    region.volume = ellipsoid_volume(config.epsilon, region.axis_lengths().as_slice());
    Ok(region)
}

/// n(x): the number of regions containing `x`.
pub fn count_containing(regions: &[JumpRegion], x: &Vector) -> usize {
    regions.iter().filter(|r| r.contains(x)).count()
}

/// Region index drawn with probability `Vᵢ / Σⱼ Vⱼ`.
pub fn select_jump_target<R: Rng + ?Sized>(regions: &[JumpRegion], rng: &mut R) -> Result<usize> {
    if regions.is_empty() {
        return Err(Error::NoRegions);
    }
    if regions.len() == 1 {
        return Ok(0);
    }
    let weights = WeightedIndex::new(regions.iter().map(|r| r.volume))
        .map_err(|e| Error::InvalidParameter(format!("region volumes: {e}")))?;
    Ok(weights.sample(rng))
}

/// `μ_to − U_to S_to^{1/2} S_from^{−1/2} U_fromᵀ (x − μ_from)`.
pub fn jump_transform(x: &Vector, from: &JumpRegion, to: &JumpRegion) -> Vector {
    let whitened = from
        .rotation
        .tr_mul(&(x - &from.center))
        .component_div(&from.scales.map(f64::sqrt));
    let colored = whitened.component_mul(&to.scales.map(f64::sqrt));
    &to.center - &to.rotation * colored
}

#[derive(Clone, Debug)]
pub struct DartingStep {
    pub next: Vector,
    pub next_density: f64,
    /// A jump was proposed and accepted.
    pub jumped: bool,
    /// `false` when the current state lies outside every region; no
    /// proposal was generated.
    pub attempted: bool,
    pub proposal: Option<(Vector, Evaluation)>,
}

/// One jump attempt from `current`.
pub fn darting_step<T, R>(
    current: &Vector,
    current_density: f64,
    regions: &[JumpRegion],
    target: &T,
    config: &DartingConfig,
    rng: &mut R,
) -> Result<DartingStep>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    let containing: Vec<usize> = (0..regions.len())
        .filter(|&i| regions[i].contains(current))
        .collect();
    if containing.is_empty() {
        return Ok(DartingStep {
            next: current.clone(),
            next_density: current_density,
            jumped: false,
            attempted: false,
            proposal: None,
        });
    }
    let from = containing[rng.random_range(0..containing.len())];
    let to = select_jump_target(regions, rng)?;
    let mut proposal = jump_transform(current, &regions[from], &regions[to]);
    target.project(&mut proposal);
    let evaluation = target.evaluate(&proposal);
    let finite = proposal.iter().all(|v| v.is_finite());
    let proposal_density = if finite && evaluation.density > 0.0 {
        evaluation.density
    } else {
        0.0
    };
    let n_current = containing.len() as f64;
    let n_proposal = count_containing(regions, &proposal) as f64;
    let u: f64 = rng.random();

    let accepted = if proposal_density == 0.0 {
        false
    } else if config.paper_literal_acceptance {
        let p_accept = ((n_current * current_density) / (n_proposal * proposal_density)).min(1.0);
        u > p_accept
    } else if n_proposal == 0.0 {
        // the reverse jump is impossible
        false
    } else if !(current_density > 0.0) {
        true
    } else {
        let ratio = (n_current * proposal_density) / (n_proposal * current_density);
        u < ratio.min(1.0)
    };

    let evaluation = Evaluation {
        density: proposal_density,
        outcome: evaluation.outcome,
    };
    Ok(if accepted {
        DartingStep {
            next: proposal.clone(),
            next_density: proposal_density,
            jumped: true,
            attempted: true,
            proposal: Some((proposal, evaluation)),
        }
    } else {
        DartingStep {
            next: current.clone(),
            next_density: current_density,
            jumped: false,
            attempted: true,
            proposal: Some((proposal, evaluation)),
        }
    })
}
