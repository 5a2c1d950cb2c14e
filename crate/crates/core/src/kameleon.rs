//! Kernel-adaptive Metropolis-Hastings ("MCMC Kameleon").
//!
//! The proposal at `y` is `N(y, γ²I + ν² M H Mᵀ)` where column `i` of `M` is
//! `2 ∇ₓk(x, zᵢ)|_{x=y}` for a subsample `z` of the chain history and `H` is
//! the centering matrix. The gradient step size is fixed to one, so `ν`
//! alone controls the scale of the adapted term. The covariance depends on
//! the conditioning point, so the Hastings correction is always applied.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grasp::OutcomeKind;
use crate::sampling::gaussian::GaussianFactor;
use crate::sampling::linalg::{symmetrize, vector_serde, vectors_serde};
use crate::sampling::{Matrix, Vector};
use crate::target::{Evaluation, TargetDensity};
use crate::{Error, Result};

/// Lower bound for the median-heuristic bandwidth.
pub const MIN_BANDWIDTH: f64 = 1e-6;

/// `k(x, y) = exp(-‖x - y‖² / (2σ²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    bandwidth: f64,
}

impl GaussianKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn evaluate(&self, x: &Vector, y: &Vector) -> f64 {
        (-(x - y).norm_squared() / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    /// `∇ₓ k(x, z)` evaluated at `x = y`.
    pub fn gradient(&self, y: &Vector, z: &Vector) -> Vector {
        let s2 = self.bandwidth * self.bandwidth;
        (z - y) * (self.evaluate(y, z) / s2)
    }

    /// Median of the pairwise distances, floored at [`MIN_BANDWIDTH`].
    /// `None` when there are fewer than two points.
    pub fn median_heuristic(points: &[Vector]) -> Option<Self> {
        let n = points.len();
        if n < 2 {
            return None;
        }
        let mut dists = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push((&points[i] - &points[j]).norm());
            }
        }
        dists.sort_by(f64::total_cmp);
        let m = dists.len();
        let median = if m % 2 == 1 {
            dists[m / 2]
        } else {
            0.5 * (dists[m / 2 - 1] + dists[m / 2])
        };
        Some(Self {
            bandwidth: median.max(MIN_BANDWIDTH),
        })
    }
}

/// Which list of a [`ChainHistory`] adaptation subsamples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleSource {
    /// Chain states; the normal case.
    States,
    /// All recorded proposals, accepted or not; used when the history is a
    /// rough sketch.
    Proposals,
}

/// How a history entry came to be.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryOrigin {
    /// Rough-sketch construction.
    Sketch,
    /// A known state inserted before sampling (a demonstrated grasp).
    Seed,
    /// Copied from another model's chain.
    Reused,
    /// Local kernel-adaptive move.
    Local,
    /// Jump move between regions.
    Jump,
    /// Jump iteration taken outside every region: the current state is
    /// counted again and nothing new is evaluated.
    Repeat,
}

impl EntryOrigin {
    /// Entries produced by one iteration of the sampling loop.
    pub fn is_sampler_move(self) -> bool {
        matches!(self, Self::Local | Self::Jump | Self::Repeat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    #[serde(with = "vector_serde")]
    pub state: Vector,
    pub density: f64,
    pub outcome: Option<OutcomeKind>,
    pub origin: EntryOrigin,
}

/// Ordered record of a chain: entry `i` holds the proposal generated at
/// step `i`, whether it was accepted, and the chain state afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainHistory {
    source: SubsampleSource,
    #[serde(with = "vectors_serde")]
    states: Vec<Vector>,
    densities: Vec<f64>,
    proposals: Vec<ProposalRecord>,
    accepted: Vec<bool>,
}

impl ChainHistory {
    pub fn new(source: SubsampleSource) -> Self {
        Self {
            source,
            states: Vec::new(),
            densities: Vec::new(),
            proposals: Vec::new(),
            accepted: Vec::new(),
        }
    }

    pub fn source(&self) -> SubsampleSource {
        self.source
    }

    pub fn set_source(&mut self, source: SubsampleSource) {
        self.source = source;
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn proposals(&self) -> &[ProposalRecord] {
        &self.proposals
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    pub fn push(
        &mut self,
        proposal: ProposalRecord,
        accepted: bool,
        state: Vector,
        density: f64,
    ) -> Result<()> {
        if !(density >= 0.0) || !(proposal.density >= 0.0) {
            return Err(Error::InvalidParameter(
                "history densities must be nonnegative".into(),
            ));
        }
        self.proposals.push(proposal);
        self.accepted.push(accepted);
        self.states.push(state);
        self.densities.push(density);
        Ok(())
    }

    /// Record a known state as an accepted entry.
    pub fn push_seed(&mut self, state: Vector, evaluation: Evaluation) -> Result<()> {
        let density = evaluation.density.max(0.0);
        self.push(
            ProposalRecord {
                state: state.clone(),
                density,
                outcome: evaluation.outcome,
                origin: EntryOrigin::Seed,
            },
            true,
            state,
            density,
        )
    }

    /// Entries whose origin satisfies `keep`, in order.
    pub fn filtered(&self, keep: impl Fn(EntryOrigin) -> bool) -> Self {
        let mut out = Self::new(self.source);
        for i in 0..self.len() {
            if keep(self.proposals[i].origin) {
                out.proposals.push(self.proposals[i].clone());
                out.accepted.push(self.accepted[i]);
                out.states.push(self.states[i].clone());
                out.densities.push(self.densities[i]);
            }
        }
        out
    }

    /// Relabel every entry's origin.
    pub fn relabeled(mut self, origin: EntryOrigin) -> Self {
        for p in &mut self.proposals {
            p.origin = origin;
        }
        self
    }

    pub fn subsample_pool(&self) -> Vec<&Vector> {
        match self.source {
            SubsampleSource::States => self.states.iter().collect(),
            SubsampleSource::Proposals => self.proposals.iter().map(|p| &p.state).collect(),
        }
    }

    /// Check the index correspondence and density invariants, e.g. after
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if self.densities.len() != n || self.proposals.len() != n || self.accepted.len() != n {
            return Err(Error::InvalidParameter(
                "chain history lists have inconsistent lengths".into(),
            ));
        }
        if self.densities.iter().any(|d| !(*d >= 0.0))
            || self.proposals.iter().any(|p| !(p.density >= 0.0))
        {
            return Err(Error::InvalidParameter(
                "history densities must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KameleonConfig {
    /// Isotropic exploration noise γ.
    pub gamma: f64,
    /// Scale ν of the kernel-adapted covariance term.
    pub nu: f64,
    /// Subsample size n.
    pub subsample_size: usize,
    /// Iterations during which the proposal is re-adapted.
    pub burn_in: usize,
    /// Kernel used until (or instead of) the median heuristic.
    pub kernel: GaussianKernel,
    /// Re-estimate the bandwidth from each subsample.
    pub median_bandwidth: bool,
}

impl Default for KameleonConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            nu: 2.38 / 6f64.sqrt(),
            subsample_size: 100,
            burn_in: 100,
            kernel: GaussianKernel { bandwidth: 1.0 },
            median_bandwidth: true,
        }
    }
}

impl KameleonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be positive".into()));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParameter("nu must be nonnegative".into()));
        }
        if self.subsample_size == 0 {
            return Err(Error::InvalidParameter(
                "subsample size must be positive".into(),
            ));
        }
        GaussianKernel::new(self.kernel.bandwidth)?;
        Ok(())
    }
}

/// Uniform subsample without replacement of `min(n, |pool|)` entries of the
/// history's designated source list.
pub fn subsample_history<R: Rng + ?Sized>(
    history: &ChainHistory,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    let pool = history.subsample_pool();
    if pool.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let amount = n.min(pool.len());
    Ok(rand::seq::index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

/// `M_{z,y}`: column `i` is `2 ∇ₓk(x, zᵢ)|_{x=y}`.
pub fn kernel_gradient_matrix(z: &[Vector], y: &Vector, kernel: &GaussianKernel) -> Matrix {
    let mut m = Matrix::zeros(y.len(), z.len());
    for (i, zi) in z.iter().enumerate() {
        m.set_column(i, &(kernel.gradient(y, zi) * 2.0));
    }
    m
}

/// `γ²I + ν² M H Mᵀ`, symmetrized.
pub fn proposal_covariance(m: &Matrix, config: &KameleonConfig) -> Matrix {
    let d = m.nrows();
    let n = m.ncols();
    let mut cov = Matrix::identity(d, d) * (config.gamma * config.gamma);
    if n == 0 || config.nu == 0.0 {
        return cov;
    }
    // M H Mᵀ = (MH)(MH)ᵀ since H is a symmetric projection
    let mean = m.column_mean();
    let mut centered = m.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    cov += (&centered * centered.transpose()) * (config.nu * config.nu);
    symmetrize(&cov)
}

/// True while the proposal is still being adapted.
pub fn adaptation_schedule(iteration: usize, config: &KameleonConfig) -> bool {
    iteration < config.burn_in
}

#[derive(Clone, Debug)]
pub struct KameleonStep {
    pub next: Vector,
    pub next_density: f64,
    pub accepted: bool,
    pub proposal: Vector,
    pub evaluation: Evaluation,
}

/// Sampler state: the configuration plus the most recently adapted
/// subsample and bandwidth. Both stay frozen once burn-in ends.
#[derive(Clone, Debug)]
pub struct KameleonSampler {
    config: KameleonConfig,
    kernel: GaussianKernel,
    subsample: Vec<Vector>,
}

impl KameleonSampler {
    pub fn new(config: KameleonConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            kernel: config.kernel,
            config,
            subsample: Vec::new(),
        })
    }

    pub fn config(&self) -> &KameleonConfig {
        &self.config
    }

    pub fn kernel(&self) -> &GaussianKernel {
        &self.kernel
    }

    pub fn subsample(&self) -> &[Vector] {
        &self.subsample
    }

    /// Refresh the subsample (and bandwidth) from the history.
    pub fn adapt<R: Rng + ?Sized>(&mut self, history: &ChainHistory, rng: &mut R) -> Result<()> {
        let z = subsample_history(history, self.config.subsample_size, rng)?;
        if self.config.median_bandwidth {
            if let Some(kernel) = GaussianKernel::median_heuristic(&z) {
                self.kernel = kernel;
            }
        }
        self.subsample = z;
        Ok(())
    }

    pub fn covariance_at(&self, y: &Vector) -> Matrix {
        let m = kernel_gradient_matrix(&self.subsample, y, &self.kernel);
        proposal_covariance(&m, &self.config)
    }

    /// `log q(to | from)` under the current adapted proposal.
    pub fn log_proposal_density(&self, to: &Vector, from: &Vector) -> Result<f64> {
        let factor = GaussianFactor::new(&self.covariance_at(from))?;
        Ok(factor.log_density(to, from))
    }

    /// One Metropolis-Hastings step. The proposal is recorded in `history`
    /// whether or not it is accepted.
    ///
    /// With `ν = 0` no adaptation happens (and no randomness is spent on
    /// it), so the chain is a plain random-walk Metropolis chain.
    #[allow(clippy::too_many_arguments)]
    pub fn step<T, R>(
        &mut self,
        iteration: usize,
        current: &Vector,
        current_density: f64,
        target: &T,
        history: &mut ChainHistory,
        rng: &mut R,
    ) -> Result<KameleonStep>
    where
        T: TargetDensity + ?Sized,
        R: Rng + ?Sized,
    {
        if adaptation_schedule(iteration, &self.config)
            && self.config.nu != 0.0
            && !history.subsample_pool().is_empty()
        {
            self.adapt(history, rng)?;
        }
        let forward = GaussianFactor::new(&self.covariance_at(current))?;
        let mut proposal = forward.sample(current, rng)?;
        target.project(&mut proposal);
        let evaluation = target.evaluate(&proposal);
        let finite = proposal.iter().all(|v| v.is_finite());
        let proposal_density = if finite && evaluation.density > 0.0 {
            evaluation.density
        } else {
            0.0
        };
        let u: f64 = rng.random();

        let accepted = if proposal_density == 0.0 {
            false
        } else if !(current_density > 0.0) {
            // a chain sitting at a zero-density state moves to any supported proposal
            true
        } else {
            let reverse = GaussianFactor::new(&self.covariance_at(&proposal))?;
            let log_ratio = (proposal_density.ln() - current_density.ln())
                + (reverse.log_density(current, &proposal)
                    - forward.log_density(&proposal, current));
            u < log_ratio.min(0.0).exp()
        };

        let (next, next_density) = if accepted {
            (proposal.clone(), proposal_density)
        } else {
            (current.clone(), current_density.max(0.0))
        };
        history.push(
            ProposalRecord {
                state: proposal.clone(),
                density: proposal_density,
                outcome: evaluation.outcome,
                origin: EntryOrigin::Local,
            },
            accepted,
            next.clone(),
            next_density,
        )?;
        Ok(KameleonStep {
            next,
            next_density,
            accepted,
            proposal,
            evaluation: Evaluation {
                density: proposal_density,
                outcome: evaluation.outcome,
            },
        })
    }
}
