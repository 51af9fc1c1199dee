//! Grid search, model files and report emission.

mod common;

use std::fs;

use common::*;
use rand::Rng;
use rbml_core::data::{save_features, FileFormat};
use rbml_core::ensemble::Model;
use rbml_core::eval::evaluate;
use rbml_core::experiment::{
    derive_seed, detailed_row, run_grid, run_gridsearch, train_and_report, train_model, GridSpec, LoadedData,
    LoadedPool, ModelGrid, ModelSpec, RunConfig, VariantDefaults,
};
use rbml_core::persist::{decode_model, encode_model, load_model, save_model, ModelPayload, Provenance};
use rbml_core::rebalance::{build_variant, VariantKind, VariantSpec};
use rbml_core::report::{emit_report, ReportFormat, ResultsTable};
use rbml_core::{fit_adaboost, fit_forest, BoostParams, Classifier, Error, ForestParams};

fn data(seed: u64) -> LoadedData {
    let pool = |name: &str, s: u64| LoadedPool {
        name: name.into(),
        val: Some(blobs(&[20, 20, 20], 3, 2.0, 1.0, s)),
        test: Some(blobs(&[20, 20, 20], 3, 2.0, 1.0, s + 1)),
    };
    LoadedData {
        original: blobs(&[50, 20, 8], 3, 2.0, 1.0, seed),
        extras: Some(blobs(&[0, 15, 12], 3, 2.0, 1.0, seed + 1)),
        pools: vec![pool("original", seed + 2), pool("combined", seed + 4)],
    }
}

fn two_by_two() -> GridSpec {
    GridSpec {
        variants: vec![VariantKind::Original, VariantKind::Smote],
        models: ModelGrid::Adaboost {
            n_estimators: vec![10],
            learning_rate: vec![0.2, 1.0],
            max_depth: vec![2],
        },
    }
}

#[test]
fn grid_ranking_matches_independent_retraining() {
    let d = data(1);
    let grid = two_by_two();
    let params = VariantDefaults::default();
    let outcome = run_grid(&d, &grid, &params, "combined", 5).unwrap();
    assert_eq!(outcome.n_cells, 4);

    let mut oracle: Vec<(f64, usize)> = grid
        .cells()
        .into_iter()
        .enumerate()
        .map(|(i, (v, m))| {
            let ds = build_variant(&d.original, d.extras.as_ref(), &params.spec(v, 5)).unwrap();
            let model = train_model(&m.with_seed(derive_seed(5, i as u64)), &ds).unwrap();
            let acc = evaluate(&model, d.pools[1].val.as_ref().unwrap(), "v").unwrap().overall_accuracy;
            (acc, i)
        })
        .collect();
    oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let got: Vec<(f64, usize)> = outcome
        .cells
        .iter()
        .map(|c| (c.primary_val("combined").unwrap(), c.cell))
        .collect();
    assert_eq!(got, oracle);
}

#[test]
fn single_cell_grid_trains_that_cell() {
    let d = data(2);
    let spec = ModelSpec::Tree { max_depth: Some(3) };
    let grid = GridSpec {
        variants: vec![VariantKind::Combined],
        models: ModelGrid::Fixed {
            models: vec![spec.clone()],
        },
    };
    let out = run_grid(&d, &grid, &VariantDefaults::default(), "original", 0).unwrap();
    assert_eq!(out.cells.len(), 1);
    assert_eq!(out.cells[0].model, spec);
    assert_eq!(out.cells[0].label, "combined");
}

#[test]
fn parallel_grid_equals_single_threaded() {
    let d = data(3);
    let grid = two_by_two();
    let params = VariantDefaults::default();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_grid(&d, &grid, &params, "original", 9).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_grid(&d, &grid, &params, "original", 9).unwrap());
    assert_eq!(
        serde_json::to_string(&serial).unwrap(),
        serde_json::to_string(&parallel).unwrap()
    );
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    let mut d = data(4);
    d.extras = None;
    let grid = GridSpec {
        variants: vec![VariantKind::Original, VariantKind::Combined],
        models: ModelGrid::Fixed {
            models: vec![ModelSpec::Tree { max_depth: Some(2) }],
        },
    };
    let out = run_grid(&d, &grid, &VariantDefaults::default(), "original", 0).unwrap();
    assert_eq!(out.n_cells, 2);
    assert_eq!(out.failed_cells, 1);
    assert_eq!(out.cells[0].variant, VariantKind::Original);
    assert!(out.cells[1].error.as_deref().unwrap().contains("extra"));
}

#[test]
fn gridsearch_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = data(5);
    save_features(&d.original, &dir.path().join("train.csv"), FileFormat::Csv).unwrap();
    save_features(d.extras.as_ref().unwrap(), &dir.path().join("extra.bin"), FileFormat::Binary).unwrap();
    save_features(d.pools[0].val.as_ref().unwrap(), &dir.path().join("val.bin"), FileFormat::Binary).unwrap();
    let cfg = r#"{
        "seed": 3,
        "train": {"original": "train.csv", "extras": "extra.bin"},
        "eval_pools": [{"name": "original", "val": "val.bin"}],
        "grid": {"variants": ["original", "smote_combined"], "family": "forest",
                 "n_estimators": [5], "max_samples": [0.5, 1.0]}
    }"#;
    let path = dir.path().join("run.json");
    fs::write(&path, cfg).unwrap();
    let cfg = RunConfig::from_file(&path).unwrap();
    assert!(cfg.train.original.is_absolute());
    let out = run_gridsearch(&cfg).unwrap();
    assert_eq!(out.n_cells, 4);
    assert_eq!(out.failed_cells, 0);
    assert!(out.cells[0].label.starts_with('['));

    let broken = r#"{"train": {"original": "missing.csv"}, "eval_pools": [{"name": "x"}], "grid_preset": "adaboost-exp1"}"#;
    fs::write(&path, broken).unwrap();
    let cfg = RunConfig::from_file(&path).unwrap();
    assert!(matches!(run_gridsearch(&cfg), Err(Error::Config(_))));
}

fn provenance(seed: u64) -> Provenance {
    Provenance {
        variant: Some(VariantSpec::new(VariantKind::Smote, seed)),
        seed,
        dataset_fingerprint: None,
        class_names: names(3),
    }
}

#[test]
fn forest_file_round_trip_predicts_identically() {
    let d = data(6);
    let forest = fit_forest(
        &d.original,
        ForestParams {
            n_estimators: 12,
            max_samples: 0.75,
            max_depth: None,
            seed: 2,
        },
    )
    .unwrap();
    let payload = ModelPayload::new(forest.clone().into(), None, provenance(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.json");
    save_model(&payload, &path).unwrap();
    let back = load_model(&path).unwrap();
    let mut r = rng(6);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-5.0..5.0)).collect();
        let a = forest.predict_proba(&x).unwrap();
        let b = back.model.predict_proba(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn boost_file_round_trip_keeps_alphas_bitwise() {
    let d = data(7);
    let boost = fit_adaboost(
        &d.original,
        BoostParams {
            n_estimators: 20,
            learning_rate: 0.3,
            max_depth: 2,
            seed: 1,
        },
    )
    .unwrap();
    let spec = ModelSpec::Adaboost(*boost.params());
    let payload = ModelPayload::new(boost.clone().into(), Some(spec), provenance(1));
    let back = decode_model(&encode_model(&payload).unwrap()).unwrap();
    let Model::Boost(restored) = back.model else {
        panic!("wrong kind")
    };
    assert_eq!(restored.stages().len(), boost.stages().len());
    for (a, b) in boost.stages().iter().zip(restored.stages()) {
        assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
        assert_eq!(a.tree, b.tree);
    }
}

#[test]
fn six_variant_report_rows_and_formats_agree() {
    let d = data(8);
    let params = VariantDefaults {
        balanced_target: 30,
        ..Default::default()
    };
    let grid = GridSpec {
        variants: VariantKind::ALL.to_vec(),
        models: ModelGrid::Fixed {
            models: vec![ModelSpec::Tree { max_depth: Some(4) }],
        },
    };
    let out = run_grid(&d, &grid, &params, "original", 1).unwrap();
    let mut table = out.table("variants", 6);
    table.rows.sort_by_key(|r| VariantKind::ALL.iter().position(|v| v.name() == r.label));
    let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(
        labels,
        ["original", "combined", "smote", "smote_combined", "smote_partial", "balanced"]
    );

    let md = table.to_markdown();
    let json: ResultsTable = serde_json::from_str(&table.to_json().unwrap()).unwrap();
    for row in &json.rows {
        let line = md.lines().find(|l| l.starts_with(&format!("| {} |", row.label))).unwrap();
        let shown: Vec<f64> = line
            .split('|')
            .skip(2)
            .filter_map(|c| c.trim().parse().ok())
            .collect();
        let stored: Vec<f64> = row.cells.iter().flat_map(|c| [c.val.unwrap(), c.test.unwrap()]).collect();
        assert_eq!(shown.len(), stored.len());
        for (s, v) in shown.iter().zip(&stored) {
            assert!((s - v).abs() <= 5e-5);
        }
    }
}

#[test]
fn voting_report_lists_members_and_writes_sidecars() {
    let d = data(9);
    let spec = ModelSpec::Voting {
        forest: ForestParams {
            n_estimators: 10,
            ..Default::default()
        },
        adaboost: BoostParams {
            n_estimators: 10,
            ..Default::default()
        },
        weights: None,
    };
    let (model, _, table) = train_and_report(&d, &spec, &VariantSpec::new(VariantKind::SmoteCombined, 0)).unwrap();
    assert_eq!(model.kind_name(), "voting");
    assert_eq!(table.rows.len(), 3);
    assert_eq!(table.rows[2].label, "Voting Classifier");
    assert_eq!(table.rows[0].cells.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&table, ReportFormat::Markdown, &dir.path().join("t.md")).unwrap();
    assert_eq!(written.len(), 3);
    let roc = fs::read_to_string(dir.path().join("t.roc.csv")).unwrap();
    assert!(roc.starts_with("model,eval_set,class,point,fpr,tpr"));

    let row = detailed_row("m", &model, &d.pools).unwrap();
    assert_eq!(row.details.len(), 4);
}
