//! `graspmc`: run the grasp-learning experiments from the command line.
//!
//! Every run writes `<stem>.result.json`, `<stem>.config.toml` (the effective
//! config after defaults and overrides) and, when a model is learned,
//! `<stem>.model.json`, where `<stem>` is `<experiment>-<object>-seed<seed>`.

use std::error::Error as StdError;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graspmc::grasp::Catalog;
use graspmc::harness::{
    emit_table, export_samples, run_experiment, scored_demonstrations, ExperimentConfig,
    ExperimentKind, ExperimentOutput, ResultRecord,
};
use graspmc::learning::LearnedModel;
use graspmc::parallel;

type AnyResult<T> = std::result::Result<T, Box<dyn StdError + Send + Sync>>;

const DEMOS_SCHEMA: &str = "graspmc.demos/1";

#[derive(Parser)]
#[command(
    name = "graspmc",
    version,
    about = "Learn grasp densities with adaptive, mode-hopping MCMC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print or write the object catalog as TOML.
    Catalog {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate demonstrated grasps for one object.
    Demonstrate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the random-walk rough sketch (the baseline preset).
    Sketch {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run an active-learning preset (or the baseline).
    Learn {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, value_enum)]
        experiment: Option<LearnPreset>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Transfer a learned model to a similar object.
    Transfer {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Source model path; `{seed}` is replaced by each run's seed.
        #[arg(long)]
        source: String,
        #[arg(long, value_enum, default_value = "similar")]
        modes: TransferModes,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Tabulate result records (files, or directories of `*.result.json`).
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the comma-separated table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export a learned model as plot-ready grasp records.
    Export {
        model: PathBuf,
        #[arg(long)]
        success_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnPreset {
    RandomWalkBaseline,
    ActiveRandomInit,
    ActiveBiasedInit,
}

impl From<LearnPreset> for ExperimentKind {
    fn from(p: LearnPreset) -> Self {
        match p {
            LearnPreset::RandomWalkBaseline => ExperimentKind::RandomWalkBaseline,
            LearnPreset::ActiveRandomInit => ExperimentKind::ActiveRandomInit,
            LearnPreset::ActiveBiasedInit => ExperimentKind::ActiveBiasedInit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TransferModes {
    /// Reuse the source object's modes.
    Similar,
    /// Demonstrate fresh modes on the novel object.
    Actual,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SeedArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Seed range, `a..b` (exclusive) or `a..=b` (inclusive).
    #[arg(long, value_parser = parse_seed_range)]
    seeds: Option<SeedList>,
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

impl SeedArgs {
    fn list(&self) -> Vec<u64> {
        match (&self.seed, &self.seeds) {
            (Some(s), _) => vec![*s],
            (None, Some(range)) => range.0.clone(),
            (None, None) => unreachable!("clap requires one of --seed/--seeds"),
        }
    }
}

fn parse_seed_range(text: &str) -> Result<SeedList, String> {
    let (a, b, inclusive) = if let Some((a, b)) = text.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = text.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("expected a..b or a..=b, got '{text}'"));
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    let seeds: Vec<u64> = if inclusive {
        (a..=b).collect()
    } else {
        (a..b).collect()
    };
    if seeds.is_empty() {
        return Err(format!("empty seed range '{text}'"));
    }
    Ok(SeedList(seeds))
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct ConfigArgs {
    /// TOML config document; fields it omits take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Object catalog TOML; the built-in catalog when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    object: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    subsample_size: Option<usize>,
    #[arg(long)]
    p_check: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    position_sigma: Option<f64>,
    #[arg(long)]
    demonstration_count: Option<usize>,
    #[arg(long)]
    scale_floor: Option<f64>,
    #[arg(long)]
    friction_coefficient: Option<f64>,
    #[arg(long)]
    slip_threshold: Option<f64>,
    #[arg(long)]
    paper_literal_acceptance: bool,
    #[arg(long)]
    sqrt_scales: bool,
    #[arg(long)]
    invert_p_check: bool,
    /// Drop the per-iteration trace from result records.
    #[arg(long)]
    no_trace: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> AnyResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_toml(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { c.$field = v.clone(); })*
            };
        }
        set!(
            object,
            iterations,
            burn_in,
            gamma,
            nu,
            subsample_size,
            p_check,
            epsilon,
            kappa,
            position_sigma,
            demonstration_count,
            scale_floor,
            friction_coefficient,
            slip_threshold
        );
        c.paper_literal_acceptance |= self.paper_literal_acceptance;
        c.sqrt_scales |= self.sqrt_scales;
        c.invert_p_check |= self.invert_p_check;
        if self.no_trace {
            c.record_trace = false;
        }
        c.validate()?;
        Ok(c)
    }

    fn catalog(&self) -> AnyResult<Catalog> {
        Ok(match &self.catalog {
            Some(path) => Catalog::load(path)?,
            None => Catalog::default(),
        })
    }
}

fn stem(config: &ExperimentConfig) -> String {
    format!(
        "{}-{}-seed{}",
        config.experiment.label(),
        config.object,
        config.seed
    )
}

fn write_output(dir: &Path, output: &ExperimentOutput) -> AnyResult<()> {
    let stem = stem(&output.record.config);
    fs::write(
        dir.join(format!("{stem}.config.toml")),
        output.record.config.to_toml()?,
    )?;
    fs::write(
        dir.join(format!("{stem}.result.json")),
        output.record.to_json()?,
    )?;
    if let Some(model) = &output.model {
        model.save(&dir.join(format!("{stem}.model.json")))?;
    }
    Ok(())
}

fn configs_for(
    base: &ExperimentConfig,
    kind: ExperimentKind,
    seeds: &SeedArgs,
) -> Vec<ExperimentConfig> {
    seeds
        .list()
        .into_iter()
        .map(|seed| ExperimentConfig {
            experiment: kind,
            seed,
            ..base.clone()
        })
        .collect()
}

/// Run every job, write what succeeded, print the table, fail if any run failed.
fn run_jobs<J: Sync>(
    jobs: &[J],
    out: &Path,
    run: impl Fn(&J) -> AnyResult<ExperimentOutput> + Sync + Send,
) -> AnyResult<()> {
    fs::create_dir_all(out)?;
    let results = parallel::map(jobs, run);
    let mut records = Vec::new();
    let mut failures = 0;
    for result in results {
        match result {
            Ok(output) => {
                write_output(out, &output)?;
                records.push(output.record);
            }
            Err(e) => {
                eprintln!("run failed: {e}");
                failures += 1;
            }
        }
    }
    if !records.is_empty() {
        print_stdout(&emit_table(&records).text)?;
    }
    if failures > 0 {
        return Err(format!("{failures} run(s) failed").into());
    }
    Ok(())
}

fn collect_records(inputs: &[PathBuf]) -> AnyResult<Vec<ResultRecord>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(".result.json"))
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    if paths.is_empty() {
        return Err("no result records found".into());
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            ResultRecord::from_json(&text).map_err(|e| format!("{}: {e}", p.display()).into())
        })
        .collect()
}

fn emit(text: &str, out: Option<&Path>) -> AnyResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print_stdout(text)?,
    }
    Ok(())
}

/// Write to stdout; a closed pipe (e.g. `| head`) ends output quietly.
fn print_stdout(text: &str) -> std::io::Result<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
    {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn run(cli: Cli) -> AnyResult<()> {
    match cli.command {
        Command::Catalog { out } => emit(&Catalog::default().to_toml()?, out.as_deref()),
        Command::Demonstrate { config, seed, out } => {
            let catalog = config.catalog()?;
            let mut c = config.resolve()?;
            if let Some(seed) = seed {
                c.seed = seed;
            }
            let object = catalog.find(&c.object)?;
            let demos = scored_demonstrations(&c, object, &c.evaluator()?)?;
            let doc = serde_json::json!({
                "schema": DEMOS_SCHEMA,
                "object": c.object,
                "seed": c.seed,
                "demonstrations": demos,
            });
            if let Some(path) = &out {
                fs::write(path.with_extension("config.toml"), c.to_toml()?)?;
            }
            emit(&serde_json::to_string_pretty(&doc)?, out.as_deref())
        }
        Command::Sketch { config, seeds, out } => {
            let catalog = config.catalog()?;
            let base = config.resolve()?;
            let jobs = configs_for(&base, ExperimentKind::RandomWalkBaseline, &seeds);
            run_jobs(&jobs, &out, |c| Ok(run_experiment(c, &catalog, None)?))
        }
        Command::Learn {
            config,
            seeds,
            experiment,
            out,
        } => {
            let catalog = config.catalog()?;
            let base = config.resolve()?;
            let kind = match experiment {
                Some(p) => p.into(),
                None if base.experiment.is_transfer() => {
                    return Err("transfer presets run through `graspmc transfer`".into())
                }
                None => base.experiment,
            };
            let jobs = configs_for(&base, kind, &seeds);
            run_jobs(&jobs, &out, |c| Ok(run_experiment(c, &catalog, None)?))
        }
        Command::Transfer {
            config,
            seeds,
            source,
            modes,
            out,
        } => {
            let catalog = config.catalog()?;
            let base = config.resolve()?;
            let kind = match modes {
                TransferModes::Similar => ExperimentKind::TransferSimilarModes,
                TransferModes::Actual => ExperimentKind::TransferActualModes,
            };
            let jobs = configs_for(&base, kind, &seeds);
            run_jobs(&jobs, &out, |c| {
                let path = PathBuf::from(source.replace("{seed}", &c.seed.to_string()));
                let model = LearnedModel::load(&path)
                    .map_err(|e| format!("source model {}: {e}", path.display()))?;
                Ok(run_experiment(c, &catalog, Some(&model))?)
            })
        }
        Command::Report { inputs, csv } => {
            let table = emit_table(&collect_records(&inputs)?);
            print_stdout(&table.text)?;
            if let Some(path) = csv {
                fs::write(path, &table.csv)?;
            }
            Ok(())
        }
        Command::Export {
            model,
            success_only,
            out,
        } => {
            let model = LearnedModel::load(&model)?;
            let gripper = ExperimentConfig::default().evaluator()?.gripper().clone();
            let export = export_samples(&model, &gripper, success_only);
            emit(&serde_json::to_string_pretty(&export)?, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
