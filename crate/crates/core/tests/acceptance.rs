//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the lines reach the terminal; exits non-zero on any failure.

use std::process::ExitCode;
use std::time::Instant;

use graspmc::darting::{build_jump_region, ellipsoid_volume, jump_transform, DartingConfig};
use graspmc::grasp::sdf::{surface_normal, DistanceField, PosedObject};
use graspmc::grasp::{Catalog, Grasp, GraspEvaluator, OutcomeKind};
use graspmc::harness::{
    median, run_experiment, run_sweep, seed_range, ExperimentConfig, ExperimentKind,
    ExperimentOutput,
};
use graspmc::kameleon::{ChainHistory, KameleonConfig, KameleonSampler, SubsampleSource};
use graspmc::learning::{run_combined, LoopConfig};
use graspmc::sampling::{
    standard_normal_vector, uniform_on_sphere, Matrix, UnitQuaternion, Vector, VonMisesFisher,
};
use graspmc::target::{GaussianMixture, TargetDensity};
use graspmc::SimRng;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn criterion_1() -> Verdict {
    let region = build_jump_region(
        &Vector::zeros(3),
        &Matrix::identity(3, 3),
        &DartingConfig {
            epsilon: 1.0,
            ..Default::default()
        },
    )
    .expect("region");
    let err = (region.volume() - 4.0 * std::f64::consts::PI / 3.0).abs();
    let direct = (ellipsoid_volume(1.0, &[1.0; 3]) - 4.0 * std::f64::consts::PI / 3.0).abs();
    verdict(
        err < 1e-12 && direct < 1e-12,
        format!("|V - 4pi/3| = {err:.1e}"),
    )
}

fn random_spd(d: usize, rng: &mut SimRng) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let eig = Matrix::from_diagonal(&Vector::from_fn(d, |_, _| rng.random_range(0.1..10.0)));
    let m = &q * eig * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn criterion_2() -> Verdict {
    let mut rng = SimRng::seed_from_u64(2);
    let cfg = DartingConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = build_jump_region(
            &(standard_normal_vector(5, &mut rng) * 3.0),
            &random_spd(5, &mut rng),
            &cfg,
        )
        .expect("region A");
        let b = build_jump_region(
            &(standard_normal_vector(5, &mut rng) * 3.0),
            &random_spd(5, &mut rng),
            &cfg,
        )
        .expect("region B");
        let x = standard_normal_vector(5, &mut rng);
        let back = jump_transform(&jump_transform(&x, &a, &b), &b, &a);
        worst = worst.max((back - &x).norm());
    }
    verdict(
        worst < 1e-9,
        format!("max round-trip error {worst:.1e} over 1000 triples"),
    )
}

/// Plain random-walk Metropolis with proposal `x + γ z`.
fn plain_rwm(target: &GaussianMixture, gamma: f64, steps: usize, seed: u64) -> Vec<Vector> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut x = v(&[0.5, -0.5]);
    let mut px = target.density(&x);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = &x + standard_normal_vector(2, &mut rng) * gamma;
        let py = target.density(&y);
        let u: f64 = rng.random();
        if py > 0.0 && u < (py.ln() - px.ln()).min(0.0).exp() {
            x = y;
            px = py;
        }
        out.push(x.clone());
    }
    out
}

fn criterion_3() -> Verdict {
    let target = GaussianMixture::standard_normal(2);
    let gamma = 0.5;
    let steps = 10_000;
    let reference = plain_rwm(&target, gamma, steps, 3);

    let mut rng = SimRng::seed_from_u64(3);
    let mut sampler = KameleonSampler::new(KameleonConfig {
        gamma,
        nu: 0.0,
        ..Default::default()
    })
    .expect("sampler");
    let mut history = ChainHistory::new(SubsampleSource::States);
    let mut x = v(&[0.5, -0.5]);
    let mut px = target.density(&x);
    let mut mismatches = 0;
    for (i, expected) in reference.iter().enumerate() {
        let step = sampler
            .step(i, &x, px, &target, &mut history, &mut rng)
            .expect("step");
        x = step.next;
        px = step.next_density;
        let same = x
            .iter()
            .zip(expected.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} of {steps} states differ bitwise (gamma = {gamma})"),
    )
}

fn criterion_4() -> Verdict {
    let target = GaussianMixture::standard_normal(2);
    let burn_in = 1000;
    let kept = 100_000;
    let config = KameleonConfig {
        gamma: 0.1,
        nu: 2.38 / 2f64.sqrt(),
        subsample_size: 50,
        burn_in,
        ..Default::default()
    };
    let mut sampler = KameleonSampler::new(config).expect("sampler");
    let mut rng = SimRng::seed_from_u64(4);
    let mut history = ChainHistory::new(SubsampleSource::States);
    let mut x = Vector::zeros(2);
    let mut px = target.density(&x);
    history
        .push_seed(x.clone(), target.evaluate(&x))
        .expect("seed");
    let mut sum = Vector::zeros(2);
    let mut outer = Matrix::zeros(2, 2);
    for i in 0..burn_in + kept {
        let step = sampler
            .step(i, &x, px, &target, &mut history, &mut rng)
            .expect("step");
        x = step.next;
        px = step.next_density;
        if i >= burn_in {
            sum += &x;
            outer += &x * x.transpose();
        }
    }
    let n = kept as f64;
    let mean = sum / n;
    let cov = outer / n - &mean * mean.transpose();
    let mean_err = mean.norm();
    let cov_err = (cov - Matrix::identity(2, 2)).norm();
    verdict(
        mean.iter().all(|m| m.abs() <= 0.05) && cov_err <= 0.1,
        format!("|mean| = {mean_err:.3}, |cov - I|_F = {cov_err:.3}"),
    )
}

fn criterion_5() -> Verdict {
    let h = 3.0 * 3f64.sqrt() / 2.0;
    let centers = vec![v(&[0.0, 0.0]), v(&[3.0, 0.0]), v(&[1.5, h])];
    let sigma = 0.1;
    let target = GaussianMixture::isotropic(centers.clone(), sigma);
    let darting = DartingConfig::default();
    let regions: Vec<_> = centers
        .iter()
        .map(|c| build_jump_region(c, &Matrix::identity(2, 2), &darting).expect("region"))
        .collect();
    let config = LoopConfig {
        kameleon: KameleonConfig {
            gamma: 0.1,
            nu: 2.38 / 2f64.sqrt(),
            subsample_size: 100,
            burn_in: 100,
            ..Default::default()
        },
        darting,
        iterations: 1900,
        invert_p_check: false,
    };

    let covers = |with_regions: bool, seed: u64| -> bool {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut history = ChainHistory::new(SubsampleSource::States);
        history
            .push_seed(centers[0].clone(), target.evaluate(&centers[0]))
            .expect("seed");
        let used: &[_] = if with_regions { &regions } else { &[] };
        let run = run_combined(
            &target,
            history,
            used,
            centers[0].clone(),
            &config,
            &mut rng,
        )
        .expect("run");
        centers.iter().all(|c| {
            run.trace
                .iter()
                .filter(|s| s.accepted && (&s.state - c).norm() <= 3.0 * sigma)
                .count()
                >= 50
        })
    };
    let combined = (0..20).filter(|&s| covers(true, s)).count();
    let local_only = (0..20).filter(|&s| covers(false, 1000 + s)).count();
    verdict(
        combined >= 19 && local_only <= 5,
        format!("all modes visited: combined {combined}/20, kernel-adaptive only {local_only}/20"),
    )
}

const OBJECTS: [&str; 3] = ["plate", "pan", "pitcher"];
const TRANSFERS: [(&str, &str); 3] = [
    ("plate", "plate_soup"),
    ("pan", "pan_small"),
    ("pitcher", "pitcher_tall"),
];
const SEEDS: u64 = 10;

struct Sweep {
    /// (kind, object, outputs by seed)
    runs: Vec<(
        ExperimentKind,
        String,
        Vec<graspmc::Result<ExperimentOutput>>,
    )>,
}

impl Sweep {
    fn successes(&self, kind: ExperimentKind, object: &str) -> Option<Vec<usize>> {
        let (_, _, outs) = self
            .runs
            .iter()
            .find(|(k, o, _)| *k == kind && o == object)?;
        outs.iter()
            .map(|r| r.as_ref().ok().map(|o| o.record.tally.success))
            .collect()
    }
}

fn run_sweeps(catalog: &Catalog) -> Sweep {
    let mut runs = Vec::new();
    for object in OBJECTS {
        for kind in [
            ExperimentKind::RandomWalkBaseline,
            ExperimentKind::ActiveRandomInit,
            ExperimentKind::ActiveBiasedInit,
        ] {
            let base = ExperimentConfig {
                experiment: kind,
                object: object.into(),
                record_trace: false,
                ..Default::default()
            };
            runs.push((
                kind,
                object.to_string(),
                run_sweep(&seed_range(&base, 0..=SEEDS - 1), catalog, None),
            ));
        }
    }
    let mut transfers = Vec::new();
    for (source, target) in TRANSFERS {
        let (_, _, sources) = runs
            .iter()
            .find(|(k, o, _)| *k == ExperimentKind::ActiveBiasedInit && o == source)
            .expect("source sweep");
        for kind in [
            ExperimentKind::TransferSimilarModes,
            ExperimentKind::TransferActualModes,
        ] {
            let jobs: Vec<_> = (0..SEEDS)
                .map(|seed| {
                    let config = ExperimentConfig {
                        experiment: kind,
                        object: target.into(),
                        seed,
                        record_trace: false,
                        ..Default::default()
                    };
                    let model = sources[seed as usize]
                        .as_ref()
                        .ok()
                        .and_then(|o| o.model.clone());
                    (config, model)
                })
                .collect();
            let outs = graspmc::parallel::map(&jobs, |(config, model)| match model {
                Some(m) => run_experiment(config, catalog, Some(m)),
                None => Err(graspmc::Error::MissingSourceModel),
            });
            transfers.push((kind, target.to_string(), outs));
        }
    }
    runs.extend(transfers);
    Sweep { runs }
}

fn criterion_6(sweep: &Sweep) -> Verdict {
    let mut runs = 0;
    let mut bad = Vec::new();
    for (kind, object, outs) in &sweep.runs {
        for (seed, out) in outs.iter().enumerate() {
            runs += 1;
            match out {
                Ok(o) if o.record.tally.total() == 1100 => {}
                Ok(o) => bad.push(format!(
                    "{} {object} seed {seed}: {}",
                    kind.label(),
                    o.record.tally.total()
                )),
                Err(e) => bad.push(format!("{} {object} seed {seed}: {e}", kind.label())),
            }
        }
    }
    let kinds: std::collections::BTreeSet<_> =
        sweep.runs.iter().map(|(k, _, _)| k.label()).collect();
    verdict(
        bad.is_empty() && kinds.len() == ExperimentKind::ALL.len(),
        if bad.is_empty() {
            format!("{runs} runs over {} presets all tally 1100", kinds.len())
        } else {
            format!("budget violated: {}", bad.join("; "))
        },
    )
}

fn criterion_7(sweep: &Sweep) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for object in OBJECTS {
        let (Some(rw), Some(biased)) = (
            sweep.successes(ExperimentKind::RandomWalkBaseline, object),
            sweep.successes(ExperimentKind::ActiveBiasedInit, object),
        ) else {
            return verdict(false, format!("{object}: a run failed"));
        };
        let (m_rw, m_b) = (median(&rw), median(&biased));
        pass &= m_b > m_rw && m_rw <= 5.0;
        parts.push(format!("{object} biased {m_b} vs random walk {m_rw}"));
    }
    verdict(pass, format!("median successes: {}", parts.join(", ")))
}

fn criterion_8(sweep: &Sweep) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for object in OBJECTS {
        let (Some(random), Some(biased)) = (
            sweep.successes(ExperimentKind::ActiveRandomInit, object),
            sweep.successes(ExperimentKind::ActiveBiasedInit, object),
        ) else {
            return verdict(false, format!("{object}: a run failed"));
        };
        let (m_r, m_b) = (median(&random), median(&biased));
        pass &= m_b >= m_r;
        parts.push(format!("{object} biased {m_b} vs random {m_r}"));
    }
    verdict(pass, format!("median successes: {}", parts.join(", ")))
}

fn criterion_9(sweep: &Sweep) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (_, target) in &TRANSFERS[..2] {
        let (Some(similar), Some(actual)) = (
            sweep.successes(ExperimentKind::TransferSimilarModes, target),
            sweep.successes(ExperimentKind::TransferActualModes, target),
        ) else {
            return verdict(false, format!("{target}: a run failed"));
        };
        let (m_s, m_a) = (median(&similar), median(&actual));
        pass &= m_a >= m_s;
        parts.push(format!("{target} actual {m_a} vs similar {m_s}"));
    }
    let tall = sweep.successes(ExperimentKind::TransferSimilarModes, "pitcher_tall");
    pass &= tall.is_some();
    parts.push(format!(
        "pitcher_tall similar modes {}",
        if tall.is_some() {
            "completed"
        } else {
            "errored"
        }
    ));
    verdict(pass, format!("median successes: {}", parts.join(", ")))
}

/// `I_ν(x)` by its power series.
fn bessel_i(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..500 {
        term *= half * half / (k as f64 * (k + order) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn criterion_10() -> Verdict {
    let mut rng = SimRng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for kappa in [1.0, 5.0, 20.0] {
        let vmf = VonMisesFisher::new(v(&[0.0, 1.0, 0.0, 0.0]), kappa).expect("vmf");
        let n = 100_000;
        let mut sum = Vector::zeros(4);
        for _ in 0..n {
            sum += vmf.sample(&mut rng);
        }
        let r = sum.norm() / n as f64;
        let oracle = bessel_i(2, kappa) / bessel_i(1, kappa);
        worst = worst.max((r - oracle).abs());
        parts.push(format!("kappa {kappa}: {r:.4} vs {oracle:.4}"));
    }
    verdict(worst <= 0.01, parts.join(", "))
}

fn random_rotation(rng: &mut SimRng) -> UnitQuaternion {
    let q = uniform_on_sphere(4, rng);
    UnitQuaternion::canonicalize([q[0], q[1], q[2], q[3]]).expect("unit quaternion")
}

fn criterion_11(catalog: &Catalog) -> Verdict {
    let evaluator = ExperimentConfig::default().evaluator().expect("evaluator");
    let per_object: Vec<(String, Result<[usize; 4], String>)> =
        graspmc::parallel::map(&catalog.objects, |object| {
            (
                object.name().to_string(),
                invariance_cases(object, &evaluator),
            )
        });
    let mut pass = true;
    let mut kinds = [0usize; 4];
    let mut failures = Vec::new();
    for (name, result) in per_object {
        match result {
            Ok(counts) => (0..4).for_each(|i| kinds[i] += counts[i]),
            Err(e) => {
                pass = false;
                failures.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(
        pass,
        if pass {
            format!(
                "1000 cases x {} objects; success/slipped/collision/miss = {kinds:?}",
                catalog.objects.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn invariance_cases<F: DistanceField>(
    object: &F,
    evaluator: &GraspEvaluator,
) -> Result<[usize; 4], String> {
    let mut rng = SimRng::seed_from_u64(11);
    let mut kinds = [0usize; 4];
    for case in 0..1000 {
        let surface = graspmc::grasp::demonstrate::sample_surface_point(object, &mut rng)
            .map_err(|e| e.to_string())?;
        let normal = surface_normal(object, &surface);
        let approach = -normal;
        // Half the cases face the surface, half take an arbitrary orientation.
        let orientation = if case % 2 == 0 {
            let helper = if approach.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let y = approach.cross(&helper).normalize();
            let roll = UnitQuaternion::from_axis_angle(
                &approach,
                rng.random_range(0.0..std::f64::consts::TAU),
            )
            .expect("roll");
            let frame =
                UnitQuaternion::from_frame(&y.cross(&approach), &y, &approach).expect("frame");
            roll.compose(&frame)
        } else {
            random_rotation(&mut rng)
        };
        let offset = rng.random_range(-0.01..0.04);
        let grasp = Grasp::new(surface + normal * offset, orientation);

        let first = evaluator.evaluate(object, &grasp);
        let again = evaluator.evaluate(object, &grasp);
        if first.kind != again.kind || first.quality.to_bits() != again.quality.to_bits() {
            return Err(format!("case {case}: evaluation not deterministic"));
        }
        if first.quality < 0.0 || (first.quality > 0.0) != (first.kind == OutcomeKind::Success) {
            return Err(format!(
                "case {case}: quality {} with {:?}",
                first.quality, first.kind
            ));
        }
        let rotation = random_rotation(&mut rng);
        let translation = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let posed = PosedObject::new(object, rotation, translation);
        let moved = evaluator.evaluate(&posed, &grasp.transformed(&rotation, &translation));
        if moved.kind != first.kind || (moved.quality - first.quality).abs() > 1e-6 {
            return Err(format!(
                "case {case}: {:?}/{} became {:?}/{} under a rigid transform",
                first.kind, first.quality, moved.kind, moved.quality
            ));
        }
        let index = OutcomeKind::ALL
            .iter()
            .position(|k| *k == first.kind)
            .expect("known kind");
        kinds[index] += 1;
    }
    Ok(kinds)
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let catalog = Catalog::default();
    let mut all_pass = true;
    let mut report = |id: u32, name: &str, run: &dyn Fn() -> Verdict| {
        let started = Instant::now();
        let v = run();
        all_pass &= v.pass;
        println!(
            "criterion {id:>2} {}: {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    };
    report(1, "ellipsoid volume identity", &criterion_1);
    report(2, "jump involution", &criterion_2);
    report(
        3,
        "kernel-adaptive reduction to random-walk Metropolis",
        &criterion_3,
    );
    report(4, "stationarity on a standard normal", &criterion_4);
    report(
        5,
        "mode coverage on a three-component mixture",
        &criterion_5,
    );
    let started = Instant::now();
    let sweep = run_sweeps(&catalog);
    println!(
        "experiment sweeps finished in {:.1}s",
        started.elapsed().as_secs_f64()
    );
    report(6, "budget conservation", &|| criterion_6(&sweep));
    report(7, "baseline dominance", &|| criterion_7(&sweep));
    report(8, "initialization ordering", &|| criterion_8(&sweep));
    report(9, "transfer ordering", &|| criterion_9(&sweep));
    report(10, "von Mises-Fisher mean resultant length", &criterion_10);
    report(11, "grasp frame invariance and determinism", &|| {
        criterion_11(&catalog)
    });
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
