//! End-to-end experiment determinism and transfer validity.

use graspmc::grasp::{Catalog, GraspTarget};
use graspmc::harness::{
    emit_table, export_samples, run_experiment, run_transfer_with_fresh_source, ExperimentConfig,
    ExperimentKind, ResultRecord,
};
use graspmc::learning::LearnedModel;
use graspmc::target::TargetDensity;

fn config(kind: ExperimentKind, object: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: kind,
        object: object.into(),
        seed,
        iterations: 300,
        ..Default::default()
    }
}

fn strip_clock(mut record: ResultRecord) -> String {
    record.wall_clock_seconds = 0.0;
    record.to_json().unwrap()
}

#[test]
fn same_seed_gives_identical_records() {
    let catalog = Catalog::default();
    for kind in [
        ExperimentKind::RandomWalkBaseline,
        ExperimentKind::ActiveRandomInit,
        ExperimentKind::ActiveBiasedInit,
    ] {
        let c = config(kind, "pan", 17);
        let a = run_experiment(&c, &catalog, None).unwrap();
        let b = run_experiment(&c, &catalog, None).unwrap();
        assert_eq!(
            strip_clock(a.record),
            strip_clock(b.record),
            "{}",
            kind.label()
        );
        assert_eq!(
            a.model.map(|m| m.to_json().unwrap()),
            b.model.map(|m| m.to_json().unwrap())
        );
    }
}

#[test]
fn transfer_reuses_a_valid_source() {
    let catalog = Catalog::default();
    let c = config(ExperimentKind::TransferSimilarModes, "plate_soup", 3);
    let out = run_transfer_with_fresh_source(&c, "plate", &catalog).unwrap();
    assert_eq!(out.record.tally.total(), c.total_evaluations());
    let model = out.model.unwrap();
    assert_eq!(model.object, "plate_soup");

    let source_cfg = config(ExperimentKind::ActiveBiasedInit, "plate", 3);
    let source = run_experiment(&source_cfg, &catalog, None)
        .unwrap()
        .model
        .unwrap();
    let evaluator = source_cfg.evaluator().unwrap();
    let target = GraspTarget::new(catalog.find("plate").unwrap(), &evaluator);
    for mode in &source.modes {
        assert!(target.density(&mode.to_state()) > 0.0);
    }
    // similar-object modes are carried over unchanged
    assert_eq!(model.modes, source.modes);
}

#[test]
fn transfer_without_source_is_rejected() {
    let catalog = Catalog::default();
    let c = config(ExperimentKind::TransferActualModes, "pan_small", 0);
    assert!(run_experiment(&c, &catalog, None).is_err());
}

#[test]
fn model_and_record_round_trip() {
    let catalog = Catalog::default();
    let out = run_experiment(
        &config(ExperimentKind::ActiveBiasedInit, "plate", 1),
        &catalog,
        None,
    )
    .unwrap();
    let model = out.model.unwrap();
    let back = LearnedModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), model.to_json().unwrap());
    let record = ResultRecord::from_json(&out.record.to_json().unwrap()).unwrap();
    assert_eq!(record.tally, out.record.tally);

    let export = export_samples(
        &model,
        &out.record.config.evaluator().unwrap().gripper().clone(),
        true,
    );
    assert!(export.records.len() >= model.modes.len());

    let table = emit_table(&[record]);
    assert_eq!(table.rows.len(), 1);
    assert!(table.csv.lines().count() == 2);
}

#[test]
fn transfer_accepts_only_supported_states() {
    let catalog = Catalog::default();
    for kind in [
        ExperimentKind::TransferSimilarModes,
        ExperimentKind::TransferActualModes,
    ] {
        let c = config(kind, "pan_small", 5);
        let model = run_transfer_with_fresh_source(&c, "pan", &catalog)
            .unwrap()
            .model
            .unwrap();
        let evaluator = c.evaluator().unwrap();
        let target = GraspTarget::new(catalog.find("pan_small").unwrap(), &evaluator);
        let chain = &model.chain;
        for (i, p) in chain.proposals().iter().enumerate() {
            if p.origin.is_sampler_move() && chain.accepted()[i] {
                assert!(chain.densities()[i] > 0.0);
                assert_eq!(target.density(&chain.states()[i]), chain.densities()[i]);
            }
        }
    }
}
