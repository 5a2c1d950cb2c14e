//! Seeded experiment presets, result records, tables and exports.
//!
//! Each run derives its random streams from one seed: stream 1 generates
//! demonstrations, stream 2 the sketch, stream 3 the combined loop. Runs of
//! different presets with the same seed therefore share demonstrations and
//! are paired.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::darting::DartingConfig;
use crate::grasp::catalog::Catalog;
use crate::grasp::{
    demonstrate_grasps, Demonstration, Grasp, GraspEvaluator, GraspTarget, GripperModel,
    ObjectModel, QualityParams,
};
use crate::kameleon::{EntryOrigin, GaussianKernel, KameleonConfig};
use crate::learning::{
    active_learn, build_random_sketch, build_rough_sketch, transfer_learn, LearnedModel,
    LoopConfig, ModeSource, RoughSketch, SketchParams, Tally, TraceStep,
};
use crate::{Error, Result, SimRng, LIBRARY_VERSION};

pub const RESULT_SCHEMA: &str = "graspmc.result/1";
pub const SAMPLES_SCHEMA: &str = "graspmc.samples/1";

const DEMO_STREAM: u64 = 1;
const SKETCH_STREAM: u64 = 2;
const LEARN_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RandomWalkBaseline,
    ActiveRandomInit,
    ActiveBiasedInit,
    TransferSimilarModes,
    TransferActualModes,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::RandomWalkBaseline,
        ExperimentKind::ActiveRandomInit,
        ExperimentKind::ActiveBiasedInit,
        ExperimentKind::TransferSimilarModes,
        ExperimentKind::TransferActualModes,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::RandomWalkBaseline => "random_walk_baseline",
            ExperimentKind::ActiveRandomInit => "active_random_init",
            ExperimentKind::ActiveBiasedInit => "active_biased_init",
            ExperimentKind::TransferSimilarModes => "transfer_similar_modes",
            ExperimentKind::TransferActualModes => "transfer_actual_modes",
        }
    }

    pub fn is_transfer(self) -> bool {
        matches!(
            self,
            ExperimentKind::TransferSimilarModes | ExperimentKind::TransferActualModes
        )
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.label() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment '{s}'")))
    }
}

/// Full parameterization of one run. Every field has a default, so a
/// config document only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub object: String,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub gamma: f64,
    pub nu: f64,
    pub subsample_size: usize,
    pub p_check: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub position_sigma: f64,
    pub demonstration_count: usize,
    pub scale_floor: f64,
    pub friction_coefficient: f64,
    pub slip_threshold: f64,
    pub paper_literal_acceptance: bool,
    pub sqrt_scales: bool,
    pub invert_p_check: bool,
    pub record_trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::ActiveBiasedInit,
            object: "plate".to_string(),
            seed: 0,
            iterations: 1000,
            burn_in: 100,
            gamma: 1e-4,
            nu: 2.38 / 6f64.sqrt(),
            subsample_size: 100,
            p_check: 0.6,
            epsilon: 0.7,
            kappa: 50.0,
            position_sigma: DEFAULT_POSITION_SIGMA,
            demonstration_count: 5,
            scale_floor: 1e-6,
            friction_coefficient: 0.5,
            slip_threshold: 0.05,
            paper_literal_acceptance: false,
            sqrt_scales: false,
            invert_p_check: false,
            record_trace: true,
        }
    }
}

/// Position step of the sketch random walk, meters.
pub const DEFAULT_POSITION_SIGMA: f64 = 0.15;

impl ExperimentConfig {
    pub fn total_evaluations(&self) -> usize {
        self.burn_in + self.iterations
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            kameleon: KameleonConfig {
                gamma: self.gamma,
                nu: self.nu,
                subsample_size: self.subsample_size,
                burn_in: self.burn_in,
                kernel: GaussianKernel::new(1.0).expect("unit bandwidth is valid"),
                median_bandwidth: true,
            },
            darting: DartingConfig {
                p_check: self.p_check,
                epsilon: self.epsilon,
                scale_floor: self.scale_floor,
                paper_literal_acceptance: self.paper_literal_acceptance,
                sqrt_scales: self.sqrt_scales,
            },
            iterations: self.iterations,
            invert_p_check: self.invert_p_check,
        }
    }

    pub fn sketch_params(&self) -> SketchParams {
        SketchParams {
            iterations: self.total_evaluations(),
            position_sigma: self.position_sigma,
            kappa: self.kappa,
        }
    }

    pub fn evaluator(&self) -> Result<GraspEvaluator> {
        GraspEvaluator::new(
            GripperModel::default(),
            QualityParams {
                friction_coefficient: self.friction_coefficient,
                slip_threshold: self.slip_threshold,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_config().validate()?;
        if self.demonstration_count == 0 {
            return Err(Error::InvalidParameter(
                "demonstration count must be at least 1".into(),
            ));
        }
        if !(self.position_sigma >= 0.0) || !(self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(
                "sketch step sizes must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    pub config: ExperimentConfig,
    pub tally: Tally,
    /// Evaluations spent building a sketch before the counted run.
    pub sketch_evaluations: usize,
    pub jump_attempts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
    pub wall_clock_seconds: f64,
    pub library_version: String,
}

impl ResultRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ResultRecord = serde_json::from_str(text)?;
        if record.schema != RESULT_SCHEMA {
            return Err(Error::Schema {
                expected: RESULT_SCHEMA.to_string(),
                found: record.schema,
            });
        }
        Ok(record)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub record: ResultRecord,
    /// Learned model, for every preset except the random-walk baseline.
    pub model: Option<LearnedModel>,
}

/// Demonstrated grasps for `object` under `seed`; identical across presets.
pub fn demonstrations(
    config: &ExperimentConfig,
    object: &ObjectModel,
    evaluator: &GraspEvaluator,
) -> Result<Vec<Grasp>> {
    Ok(scored_demonstrations(config, object, evaluator)?
        .into_iter()
        .map(|d| d.grasp)
        .collect())
}

/// [`demonstrations`] with their qualities.
pub fn scored_demonstrations(
    config: &ExperimentConfig,
    object: &ObjectModel,
    evaluator: &GraspEvaluator,
) -> Result<Vec<Demonstration>> {
    let mut rng = rng_for(config.seed, DEMO_STREAM);
    demonstrate_grasps(object, evaluator, config.demonstration_count, &mut rng)
}

/// Random-walk sketch started at the first demonstration.
pub fn rough_sketch(
    config: &ExperimentConfig,
    object: &ObjectModel,
    evaluator: &GraspEvaluator,
    demos: &[Grasp],
) -> Result<RoughSketch> {
    let target = GraspTarget::new(object, evaluator);
    let mut rng = rng_for(config.seed, SKETCH_STREAM);
    build_rough_sketch(
        &target,
        object.name(),
        &demos[0],
        &config.sketch_params(),
        &mut rng,
    )
}

/// Run one preset. Transfer presets require `source`, the model learned on
/// the similar object.
pub fn run_experiment(
    config: &ExperimentConfig,
    catalog: &Catalog,
    source: Option<&LearnedModel>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let started = Instant::now();
    let object = catalog.find(&config.object)?;
    let evaluator = config.evaluator()?;
    let target = GraspTarget::new(object, &evaluator);
    let loop_config = config.loop_config();
    let mut learn_rng = rng_for(config.seed, LEARN_STREAM);

    let (tally, sketch_evaluations, jump_attempts, trace, model) = match config.experiment {
        ExperimentKind::RandomWalkBaseline => {
            let demos = demonstrations(config, object, &evaluator)?;
            let sketch = rough_sketch(config, object, &evaluator, &demos)?;
            let trace = sketch_trace(&sketch);
            (sketch.tally(), 0, 0, trace, None)
        }
        ExperimentKind::ActiveBiasedInit | ExperimentKind::ActiveRandomInit => {
            let demos = demonstrations(config, object, &evaluator)?;
            let sketch = if config.experiment == ExperimentKind::ActiveBiasedInit {
                rough_sketch(config, object, &evaluator, &demos)?
            } else {
                let workspace = object.bounds().inflated(evaluator.gripper().reach());
                let mut rng = rng_for(config.seed, SKETCH_STREAM);
                build_random_sketch(
                    &target,
                    object.name(),
                    &workspace,
                    config.total_evaluations(),
                    &mut rng,
                )?
            };
            let mut model = active_learn(
                &target,
                object.name(),
                &sketch,
                &demos,
                &loop_config,
                &mut learn_rng,
            )?;
            model.seed = Some(config.seed);
            let trace = std::mem::take(&mut model.trace);
            let attempts = jump_count(&model);
            (model.tally(), sketch.len(), attempts, trace, Some(model))
        }
        ExperimentKind::TransferSimilarModes | ExperimentKind::TransferActualModes => {
            let source = source.ok_or(Error::MissingSourceModel)?;
            let modes = if config.experiment == ExperimentKind::TransferActualModes {
                ModeSource::ActualObjectModes(demonstrations(config, object, &evaluator)?)
            } else {
                ModeSource::SimilarObjectModes
            };
            let mut model = transfer_learn(
                &target,
                object.name(),
                source,
                modes,
                &loop_config,
                &mut learn_rng,
            )?;
            model.seed = Some(config.seed);
            let trace = std::mem::take(&mut model.trace);
            let attempts = jump_count(&model);
            (model.tally(), 0, attempts, trace, Some(model))
        }
    };

    let record = ResultRecord {
        schema: RESULT_SCHEMA.to_string(),
        config: config.clone(),
        tally,
        sketch_evaluations,
        jump_attempts,
        trace: config.record_trace.then_some(trace),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        library_version: LIBRARY_VERSION.to_string(),
    };
    Ok(ExperimentOutput { record, model })
}

fn jump_count(model: &LearnedModel) -> usize {
    model
        .chain
        .proposals()
        .iter()
        .filter(|p| p.origin == EntryOrigin::Jump)
        .count()
}

fn sketch_trace(sketch: &RoughSketch) -> Vec<TraceStep> {
    let h = &sketch.history;
    (0..h.len())
        .map(|i| TraceStep {
            iteration: i,
            state: h.states()[i].clone(),
            density: h.densities()[i],
            outcome: h.proposals()[i].outcome,
            accepted: h.accepted()[i],
            jumped: false,
        })
        .collect()
}

/// Run a transfer preset after learning its source model with the same
/// seed (active learning with sketch initialization on `source_object`).
pub fn run_transfer_with_fresh_source(
    config: &ExperimentConfig,
    source_object: &str,
    catalog: &Catalog,
) -> Result<ExperimentOutput> {
    let source_config = ExperimentConfig {
        experiment: ExperimentKind::ActiveBiasedInit,
        object: source_object.to_string(),
        record_trace: false,
        ..config.clone()
    };
    let source = run_experiment(&source_config, catalog, None)?
        .model
        .expect("active learning yields a model");
    run_experiment(config, catalog, Some(&source))
}

/// Run each config independently; parallel when the `parallel` feature is
/// enabled. Output order matches input order.
pub fn run_sweep(
    configs: &[ExperimentConfig],
    catalog: &Catalog,
    source: Option<&LearnedModel>,
) -> Vec<Result<ExperimentOutput>> {
    crate::parallel::map(configs, |c| run_experiment(c, catalog, source))
}

/// Configs for seeds `seeds` (inclusive range), otherwise identical.
pub fn seed_range(
    base: &ExperimentConfig,
    seeds: std::ops::RangeInclusive<u64>,
) -> Vec<ExperimentConfig> {
    seeds
        .map(|seed| ExperimentConfig {
            seed,
            ..base.clone()
        })
        .collect()
}

/// Comma-separated and aligned renderings of the same rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub csv: String,
    pub text: String,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub experiment: ExperimentKind,
    pub object: String,
    pub seed: u64,
    pub tally: Tally,
}

/// Rows grouped by experiment, then object, then seed.
pub fn emit_table(records: &[ResultRecord]) -> Table {
    let mut rows: Vec<TableRow> = records
        .iter()
        .map(|r| TableRow {
            experiment: r.config.experiment,
            object: r.config.object.clone(),
            seed: r.config.seed,
            tally: r.tally,
        })
        .collect();
    rows.sort_by(|a, b| (a.experiment, &a.object, a.seed).cmp(&(b.experiment, &b.object, b.seed)));

    let header = [
        "experiment",
        "object",
        "seed",
        "success",
        "slipped",
        "collision",
        "miss",
    ];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            let [s, sl, c, m] = r.tally.as_array();
            [
                r.experiment.label().to_string(),
                r.object.clone(),
                r.seed.to_string(),
                s.to_string(),
                sl.to_string(),
                c.to_string(),
                m.to_string(),
            ]
        })
        .collect();

    let mut csv = header.join(",");
    csv.push('\n');
    for row in &cells {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let widths: Vec<usize> = (0..7)
        .map(|i| {
            cells
                .iter()
                .map(|r| r[i].len())
                .chain(std::iter::once(header[i].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut text = String::new();
    let line = |text: &mut String, fields: &[&str]| {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                text.push_str("  ");
            }
            if i < 2 {
                let _ = write!(text, "{f:<w$}", w = widths[i]);
            } else {
                let _ = write!(text, "{f:>w$}", w = widths[i]);
            }
        }
        let trimmed = text.trim_end().len();
        text.truncate(trimmed);
        text.push('\n');
    };
    line(&mut text, &header);
    for row in &cells {
        let fields: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut text, &fields);
    }
    Table { csv, text, rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleTag {
    Demonstrated,
    Learned,
}

/// One plottable grasp: the approach segment runs from the palm to the
/// fingertips, the span segment joins the open jaws halfway along them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub approach_segment: [[f64; 3]; 2],
    pub span_segment: [[f64; 3]; 2],
    pub quality: f64,
    pub tag: SampleTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleExport {
    pub schema: String,
    pub object: String,
    pub records: Vec<SampleRecord>,
}

fn sample_record(
    grasp: &Grasp,
    quality: f64,
    tag: SampleTag,
    gripper: &GripperModel,
) -> SampleRecord {
    let p = grasp.position();
    let r = grasp.orientation.to_rotation_matrix();
    let approach = r * GripperModel::approach_axis();
    let closing = r * GripperModel::closing_axis();
    let mid: Vector3<f64> = p + approach * (0.5 * gripper.finger_length);
    let half = closing * (0.5 * gripper.jaw_span);
    SampleRecord {
        position: grasp.position,
        orientation: grasp.orientation.to_array(),
        approach_segment: [p.into(), (p + approach * gripper.finger_length).into()],
        span_segment: [(mid - half).into(), (mid + half).into()],
        quality,
        tag,
    }
}

/// Modes tagged demonstrated, plus every state the sampler moved to, tagged
/// learned. `success_only` drops zero-quality records.
pub fn export_samples(
    model: &LearnedModel,
    gripper: &GripperModel,
    success_only: bool,
) -> SampleExport {
    let mut records = Vec::new();
    for (g, q) in model.modes.iter().zip(&model.mode_densities) {
        records.push(sample_record(g, *q, SampleTag::Demonstrated, gripper));
    }
    let chain = &model.chain;
    for (i, p) in chain.proposals().iter().enumerate() {
        if !p.origin.is_sampler_move() || !chain.accepted()[i] {
            continue;
        }
        if let Ok(g) = Grasp::from_state(&chain.states()[i]) {
            records.push(sample_record(
                &g,
                chain.densities()[i],
                SampleTag::Learned,
                gripper,
            ));
        }
    }
    if success_only {
        records.retain(|r| r.quality > 0.0);
    }
    SampleExport {
        schema: SAMPLES_SCHEMA.to_string(),
        object: model.object.clone(),
        records,
    }
}

/// Median of a nonempty list of counts (mean of the middle pair when even).
pub fn median(values: &[usize]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
    }
}
