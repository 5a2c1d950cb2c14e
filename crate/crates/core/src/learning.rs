//! Active and transfer learning of grasp densities.
//!
//! Active learning builds a rough sketch with a random-walk sampler, then
//! runs the combined loop: each iteration draws `u₁ ~ U[0, 1)` and takes a
//! kernel-adaptive local step when `u₁ < P_check`, otherwise a jump attempt.
//! Transfer learning skips the sketch and seeds the adaptive sampler with a
//! previously learned chain.

use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::darting::{build_jump_region, darting_step, DartingConfig, JumpRegion};
use crate::grasp::{Aabb, Grasp, OutcomeKind, GRASP_DIM};
use crate::kameleon::{
    ChainHistory, EntryOrigin, KameleonConfig, KameleonSampler, ProposalRecord, SubsampleSource,
};
use crate::sampling::linalg::{sample_covariance, vector_serde};
use crate::sampling::{standard_normal_vector, uniform_on_sphere, Matrix, Vector, VonMisesFisher};
use crate::target::TargetDensity;
use crate::{Error, Result, SimRng};

pub const MODEL_SCHEMA: &str = "graspmc.model/1";

/// Outcome counts over evaluated proposals, in table column order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub success: usize,
    pub slipped: usize,
    pub collision: usize,
    pub miss: usize,
}

impl Tally {
    pub fn record(&mut self, kind: OutcomeKind) {
        match kind {
            OutcomeKind::Success => self.success += 1,
            OutcomeKind::Slipped => self.slipped += 1,
            OutcomeKind::Collision => self.collision += 1,
            OutcomeKind::Miss => self.miss += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.success + self.slipped + self.collision + self.miss
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.success, self.slipped, self.collision, self.miss]
    }

    /// Counts over proposals whose origin passes `keep`. Unlabeled proposals
    /// (numeric targets) are not counted.
    pub fn of_history(history: &ChainHistory, keep: impl Fn(EntryOrigin) -> bool) -> Self {
        let mut t = Tally::default();
        for p in history.proposals() {
            if let (true, Some(kind)) = (keep(p.origin), p.outcome) {
                t.record(kind);
            }
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchParams {
    pub iterations: usize,
    /// Standard deviation of the position step, meters.
    pub position_sigma: f64,
    /// von Mises-Fisher concentration of the orientation step.
    pub kappa: f64,
}

/// Proposals of a preliminary random walk, used to initialize adaptation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughSketch {
    pub history: ChainHistory,
    pub source_object: String,
    /// `None` for a random sketch.
    pub params: Option<SketchParams>,
}

impl RoughSketch {
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn proposal_states(&self) -> Vec<Vector> {
        self.history
            .proposals()
            .iter()
            .map(|p| p.state.clone())
            .collect()
    }

    pub fn tally(&self) -> Tally {
        Tally::of_history(&self.history, |_| true)
    }
}

fn check_grasp_dim<T: TargetDensity + ?Sized>(target: &T) -> Result<()> {
    if target.dim() != GRASP_DIM {
        return Err(Error::DimensionMismatch {
            expected: GRASP_DIM,
            found: target.dim(),
        });
    }
    Ok(())
}

/// Random-walk Metropolis over grasps with a Gaussian position step and a
/// von Mises-Fisher orientation step. Every proposal is kept.
pub fn build_rough_sketch<T, R>(
    target: &T,
    object: &str,
    start: &Grasp,
    params: &SketchParams,
    rng: &mut R,
) -> Result<RoughSketch>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    check_grasp_dim(target)?;
    if !(params.position_sigma >= 0.0) || !(params.kappa >= 0.0) {
        return Err(Error::InvalidParameter(
            "sketch step sizes must be nonnegative".into(),
        ));
    }
    let mut current = start.to_state();
    let mut current_density = target.density(&current);
    if !(current_density > 0.0) {
        return Err(Error::InvalidDemonstration { index: 0 });
    }
    let mut history = ChainHistory::new(SubsampleSource::Proposals);
    for _ in 0..params.iterations {
        let step = standard_normal_vector(3, rng) * params.position_sigma;
        let mean_q = Vector::from_row_slice(&current.as_slice()[3..7]);
        let q = VonMisesFisher::new(mean_q, params.kappa)?.sample(rng);
        let mut proposal = current.clone();
        for i in 0..3 {
            proposal[i] += step[i];
        }
        for i in 0..4 {
            proposal[3 + i] = q[i];
        }
        target.project(&mut proposal);
        let evaluation = target.evaluate(&proposal);
        let density = evaluation.density.max(0.0);
        let u: f64 = rng.random();
        // both steps are symmetric, so the Hastings ratio is π'/π
        let accepted = density > 0.0 && u < (density / current_density).min(1.0);
        if accepted {
            current = proposal.clone();
            current_density = density;
        }
        history.push(
            ProposalRecord {
                state: proposal,
                density,
                outcome: evaluation.outcome,
                origin: EntryOrigin::Sketch,
            },
            accepted,
            current.clone(),
            current_density,
        )?;
    }
    Ok(RoughSketch {
        history,
        source_object: object.to_string(),
        params: Some(params.clone()),
    })
}

/// Uniform positions in `workspace` with uniform orientations.
pub fn build_random_sketch<T, R>(
    target: &T,
    object: &str,
    workspace: &Aabb,
    size: usize,
    rng: &mut R,
) -> Result<RoughSketch>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    check_grasp_dim(target)?;
    let mut history = ChainHistory::new(SubsampleSource::Proposals);
    for _ in 0..size {
        let mut state = Vector::zeros(GRASP_DIM);
        for i in 0..3 {
            state[i] = rng.random_range(workspace.min[i]..=workspace.max[i]);
        }
        let q = uniform_on_sphere(4, rng);
        for i in 0..4 {
            state[3 + i] = q[i];
        }
        target.project(&mut state);
        let evaluation = target.evaluate(&state);
        let density = evaluation.density.max(0.0);
        history.push(
            ProposalRecord {
                state: state.clone(),
                density,
                outcome: evaluation.outcome,
                origin: EntryOrigin::Sketch,
            },
            true,
            state,
            density,
        )?;
    }
    Ok(RoughSketch {
        history,
        source_object: object.to_string(),
        params: None,
    })
}

/// Parameters of the combined local/jump loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub kameleon: KameleonConfig,
    pub darting: DartingConfig,
    /// Iterations after burn-in; the loop runs `burn_in + iterations` steps.
    pub iterations: usize,
    /// Take the local step when `u₁ ≥ P_check` instead.
    pub invert_p_check: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            kameleon: KameleonConfig::default(),
            darting: DartingConfig::default(),
            iterations: 1000,
            invert_p_check: false,
        }
    }
}

impl LoopConfig {
    pub fn total_steps(&self) -> usize {
        self.kameleon.burn_in + self.iterations
    }

    pub fn validate(&self) -> Result<()> {
        self.kameleon.validate()?;
        self.darting.validate()
    }
}

/// One iteration of the combined loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    #[serde(with = "vector_serde")]
    pub state: Vector,
    pub density: f64,
    /// Outcome of the proposal evaluated this iteration.
    pub outcome: Option<OutcomeKind>,
    pub accepted: bool,
    pub jumped: bool,
}

#[derive(Clone, Debug)]
pub struct CombinedRun {
    /// Input history with one entry appended per iteration.
    pub history: ChainHistory,
    pub trace: Vec<TraceStep>,
    /// Jump attempts made from inside a region.
    pub jump_attempts: usize,
}

/// Run `config.total_steps()` iterations from `start`.
///
/// A jump iteration whose state lies outside every region evaluates
/// nothing; the current state and its outcome are recorded again, so every
/// iteration contributes exactly one tallied entry. The gate draws `u₁` come
/// from their own stream, seeded from `rng`, so runs that share a seed share
/// the local/jump schedule.
pub fn run_combined<T, R>(
    target: &T,
    mut history: ChainHistory,
    regions: &[JumpRegion],
    start: Vector,
    config: &LoopConfig,
    rng: &mut R,
) -> Result<CombinedRun>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    if start.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: start.len(),
        });
    }
    let mut gate_rng = SimRng::seed_from_u64(rng.random());
    let mut sampler = KameleonSampler::new(config.kameleon.clone())?;
    let start_eval = target.evaluate(&start);
    let mut current = start;
    let mut current_density = start_eval.density.max(0.0);
    let mut current_outcome = start_eval.outcome;
    let total = config.total_steps();
    let mut trace = Vec::with_capacity(total);
    let mut jump_attempts = 0;

    for iteration in 0..total {
        let u1: f64 = gate_rng.random();
        let local = (u1 < config.darting.p_check) != config.invert_p_check || regions.is_empty();
        let (next, next_density, next_outcome, outcome, accepted, jumped) = if local {
            let step = sampler.step(
                iteration,
                &current,
                current_density,
                target,
                &mut history,
                rng,
            )?;
            let kept = if step.accepted {
                step.evaluation.outcome
            } else {
                current_outcome
            };
            (
                step.next,
                step.next_density,
                kept,
                step.evaluation.outcome,
                step.accepted,
                false,
            )
        } else {
            let step = darting_step(
                &current,
                current_density,
                regions,
                target,
                &config.darting,
                rng,
            )?;
            let (record, outcome) = match step.proposal {
                Some((proposal, evaluation)) => {
                    jump_attempts += 1;
                    (
                        ProposalRecord {
                            state: proposal,
                            density: evaluation.density,
                            outcome: evaluation.outcome,
                            origin: EntryOrigin::Jump,
                        },
                        evaluation.outcome,
                    )
                }
                None => (
                    ProposalRecord {
                        state: current.clone(),
                        density: current_density,
                        outcome: current_outcome,
                        origin: EntryOrigin::Repeat,
                    },
                    current_outcome,
                ),
            };
            history.push(record, step.jumped, step.next.clone(), step.next_density)?;
            let kept = if step.jumped {
                outcome
            } else {
                current_outcome
            };
            (
                step.next,
                step.next_density,
                kept,
                outcome,
                step.jumped,
                step.jumped,
            )
        };
        current = next;
        current_density = next_density;
        current_outcome = next_outcome;
        trace.push(TraceStep {
            iteration,
            state: current.clone(),
            density: current_density,
            outcome,
            accepted,
            jumped,
        });
    }
    Ok(CombinedRun {
        history,
        trace,
        jump_attempts,
    })
}

/// Regions around each mode sharing one covariance.
pub fn build_regions(
    modes: &[Vector],
    covariance: &Matrix,
    config: &DartingConfig,
) -> Result<Vec<JumpRegion>> {
    modes
        .iter()
        .map(|m| build_jump_region(m, covariance, config))
        .collect()
}

/// A learned grasp density: the chain, its modes and jump regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub schema: String,
    pub object: String,
    /// Seeds and sampler moves; sketch and reused entries are dropped.
    pub chain: ChainHistory,
    pub modes: Vec<Grasp>,
    /// Density of each mode on `object`.
    pub mode_densities: Vec<f64>,
    pub regions: Vec<JumpRegion>,
    pub config: LoopConfig,
    pub seed: Option<u64>,
    /// Per-iteration trace of the run that produced the model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceStep>,
}

impl LearnedModel {
    pub fn tally(&self) -> Tally {
        tally_outcomes(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LearnedModel = serde_json::from_str(text)?;
        if model.schema != MODEL_SCHEMA {
            return Err(Error::Schema {
                expected: MODEL_SCHEMA.to_string(),
                found: model.schema,
            });
        }
        model.chain.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Counts over the proposals evaluated by sampler moves (burn-in included).
pub fn tally_outcomes(model: &LearnedModel) -> Tally {
    Tally::of_history(&model.chain, EntryOrigin::is_sampler_move)
}

fn mode_states<T: TargetDensity + ?Sized>(target: &T, modes: &[Grasp]) -> (Vec<Vector>, Vec<f64>) {
    let states: Vec<Vector> = modes.iter().map(Grasp::to_state).collect();
    let densities = states.iter().map(|s| target.density(s).max(0.0)).collect();
    (states, densities)
}

/// Sketch-initialized combined sampling around demonstrated grasps.
pub fn active_learn<T, R>(
    target: &T,
    object: &str,
    sketch: &RoughSketch,
    demonstrations: &[Grasp],
    config: &LoopConfig,
    rng: &mut R,
) -> Result<LearnedModel>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    check_grasp_dim(target)?;
    if demonstrations.is_empty() {
        return Err(Error::InvalidParameter(
            "active learning needs at least one demonstration".into(),
        ));
    }
    if sketch.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let (states, densities) = mode_states(target, demonstrations);
    if let Some(index) = densities.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::InvalidDemonstration { index });
    }
    let covariance = sample_covariance(&sketch.proposal_states());
    let regions = build_regions(&states, &covariance, &config.darting)?;

    let mut history = sketch.history.clone();
    for s in &states {
        history.push_seed(s.clone(), target.evaluate(s))?;
    }
    let start = states[rng.random_range(0..states.len())].clone();
    let run = run_combined(target, history, &regions, start, config, rng)?;

    let mut chain = run.history.filtered(|o| o != EntryOrigin::Sketch);
    chain.set_source(SubsampleSource::States);
    Ok(LearnedModel {
        schema: MODEL_SCHEMA.to_string(),
        object: object.to_string(),
        chain,
        modes: demonstrations.to_vec(),
        mode_densities: densities,
        regions,
        config: config.clone(),
        seed: None,
        trace: run.trace,
    })
}

/// Mode set for transfer learning.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeSource {
    /// Reuse the source model's modes as they are.
    SimilarObjectModes,
    /// Grasps demonstrated on the novel object.
    ActualObjectModes(Vec<Grasp>),
}

/// Combined sampling on a novel object, seeded with a learned chain.
///
/// Only `target` (the novel object) is evaluated. Modes with zero density
/// on it are kept as region centers.
pub fn transfer_learn<T, R>(
    target: &T,
    object: &str,
    source: &LearnedModel,
    modes: ModeSource,
    config: &LoopConfig,
    rng: &mut R,
) -> Result<LearnedModel>
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    check_grasp_dim(target)?;
    if source.chain.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let modes = match modes {
        ModeSource::SimilarObjectModes => source.modes.clone(),
        ModeSource::ActualObjectModes(m) => m,
    };
    if modes.is_empty() {
        return Err(Error::InvalidParameter(
            "transfer needs at least one mode".into(),
        ));
    }
    let (states, densities) = mode_states(target, &modes);

    let mut history = source.chain.clone().relabeled(EntryOrigin::Reused);
    history.set_source(SubsampleSource::States);
    let covariance = sample_covariance(history.states());
    let regions = build_regions(&states, &covariance, &config.darting)?;

    let start = states[rng.random_range(0..states.len())].clone();
    let run = run_combined(target, history, &regions, start, config, rng)?;

    let chain = run.history.filtered(EntryOrigin::is_sampler_move);
    Ok(LearnedModel {
        schema: MODEL_SCHEMA.to_string(),
        object: object.to_string(),
        chain,
        modes,
        mode_densities: densities,
        regions,
        config: config.clone(),
        seed: None,
        trace: run.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::catalog::find_object;
    use crate::grasp::{
        demonstrate_grasps, GraspEvaluator, GraspTarget, GripperModel, QualityParams,
    };
    use crate::sampling::UnitQuaternion;
    use crate::target::GaussianMixture;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn evaluator() -> GraspEvaluator {
        GraspEvaluator::new(GripperModel::default(), QualityParams::default()).unwrap()
    }

    #[test]
    fn jump_iteration_outside_regions_counts_current_state_again() {
        let target = GaussianMixture::standard_normal(2);
        let region = build_jump_region(
            &Vector::from_vec(vec![50.0, 50.0]),
            &Matrix::identity(2, 2),
            &DartingConfig::default(),
        )
        .unwrap();
        let config = LoopConfig {
            darting: DartingConfig {
                p_check: 0.0,
                ..Default::default()
            },
            iterations: 40,
            ..Default::default()
        };
        let start = Vector::from_vec(vec![0.3, -0.2]);
        let mut history = ChainHistory::new(SubsampleSource::States);
        history
            .push_seed(start.clone(), target.evaluate(&start))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = run_combined(
            &target,
            history,
            &[region],
            start.clone(),
            &config,
            &mut rng,
        )
        .unwrap();
        assert_eq!(run.jump_attempts, 0);
        assert_eq!(run.trace.len(), config.total_steps());
        let entries = &run.history.proposals()[1..];
        assert_eq!(entries.len(), config.total_steps());
        assert!(entries
            .iter()
            .all(|p| p.origin == EntryOrigin::Repeat && p.state == start));
        assert!(run.trace.iter().all(|t| t.state == start && !t.accepted));
    }

    #[test]
    fn tally_partition() {
        let mut t = Tally::default();
        for k in OutcomeKind::ALL {
            t.record(k);
        }
        t.record(OutcomeKind::Miss);
        assert_eq!(t.as_array(), [1, 1, 1, 2]);
        assert_eq!(t.total(), 5);
        let empty = ChainHistory::new(SubsampleSource::States);
        assert_eq!(Tally::of_history(&empty, |_| true), Tally::default());
    }

    #[test]
    fn degenerate_sketch_repeats_start() {
        let e = evaluator();
        let plate = find_object("plate").unwrap();
        let target = GraspTarget::new(&plate, &e);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let demo = demonstrate_grasps(&plate, &e, 1, &mut rng).unwrap()[0];
        let params = SketchParams {
            iterations: 50,
            position_sigma: 0.0,
            kappa: f64::INFINITY,
        };
        let sketch = build_rough_sketch(&target, "plate", &demo.grasp, &params, &mut rng).unwrap();
        assert_eq!(sketch.len(), 50);
        assert!(sketch.history.accepted().iter().all(|a| *a));
        for p in sketch.history.proposals() {
            assert!((&p.state - demo.grasp.to_state()).norm() < 1e-12);
        }
    }

    #[test]
    fn sketch_rejects_zero_density_start() {
        let e = evaluator();
        let plate = find_object("plate").unwrap();
        let target = GraspTarget::new(&plate, &e);
        let far = Grasp::new(Vector3::new(3.0, 0.0, 0.0), UnitQuaternion::IDENTITY);
        let params = SketchParams {
            iterations: 5,
            position_sigma: 0.01,
            kappa: 50.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            build_rough_sketch(&target, "plate", &far, &params, &mut rng),
            Err(Error::InvalidDemonstration { index: 0 })
        ));
    }

    #[test]
    fn gate_at_one_never_jumps() {
        let target = GaussianMixture::isotropic(
            vec![
                Vector::from_vec(vec![0.0, 0.0]),
                Vector::from_vec(vec![3.0, 0.0]),
            ],
            0.1,
        );
        let regions = build_regions(
            &target
                .components()
                .iter()
                .map(|c| c.mean.clone())
                .collect::<Vec<_>>(),
            &Matrix::identity(2, 2),
            &DartingConfig::default(),
        )
        .unwrap();
        let mut config = LoopConfig {
            iterations: 300,
            ..Default::default()
        };
        config.darting.p_check = 1.0;
        config.kameleon.gamma = 0.05;
        config.kameleon.subsample_size = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let history = ChainHistory::new(SubsampleSource::States);
        let run = run_combined(
            &target,
            history,
            &regions,
            Vector::zeros(2),
            &config,
            &mut rng,
        )
        .unwrap();
        assert_eq!(run.jump_attempts, 0);
        assert_eq!(run.trace.len(), 400);
        assert!(run
            .history
            .proposals()
            .iter()
            .all(|p| p.origin == EntryOrigin::Local));
    }

    #[test]
    fn far_start_misses_everything() {
        let e = evaluator();
        let plate = find_object("plate").unwrap();
        let target = GraspTarget::new(&plate, &e);
        let mut config = LoopConfig {
            iterations: 50,
            ..Default::default()
        };
        config.kameleon.burn_in = 10;
        let far = Grasp::new(Vector3::new(50.0, 0.0, 0.0), UnitQuaternion::IDENTITY).to_state();
        let regions = build_regions(
            std::slice::from_ref(&far),
            &Matrix::identity(7, 7),
            &config.darting,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let run = run_combined(
            &target,
            ChainHistory::new(SubsampleSource::States),
            &regions,
            far,
            &config,
            &mut rng,
        )
        .unwrap();
        let t = Tally::of_history(&run.history, EntryOrigin::is_sampler_move);
        assert_eq!(t.as_array(), [0, 0, 0, 60]);
    }
}
