//! End-to-end pipeline: ingest, binarize, fit the surrogate, optimize over
//! every (optimizer, seed) pair, decode by retrieval, score with the oracle,
//! and aggregate into a design report plus a run manifest.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use qubofit::optim::{OptimizationResult, OptimizerSpec};
use qubofit::qubo::regression_metrics;
use qubofit::retrieve::{aggregate_design, RetrievalIndex};
use qubofit::{Error, Result};

use crate::config::ExperimentConfig;
use crate::report::{Assumptions, DesignReport, RunManifest, RunRecord, StageInfo};
use crate::stages;

pub const WORKERS_ENV: &str = "QUBOFIT_WORKERS";

#[derive(Debug)]
pub struct PipelineOutput {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    pub report: DesignReport,
}

/// Worker count: the `QUBOFIT_WORKERS` environment variable, else available
/// parallelism, capped by the job count.
fn worker_count(jobs: usize) -> usize {
    let configured = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1);
    let fallback = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    configured.unwrap_or(fallback).min(jobs).max(1)
}

/// Run `f` over the indexed jobs on a small scoped pool; results come back in
/// job order regardless of scheduling.
fn run_indexed<T: Send, F: Fn(usize) -> T + Sync>(jobs: usize, f: F) -> Vec<T> {
    let workers = worker_count(jobs);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("job completed"))
        .collect()
}

pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineOutput> {
    let warnings = config.validate()?;
    let run_dir = config.run_dir();
    std::fs::create_dir_all(run_dir.join("optimize")).map_err(|source| Error::Io {
        path: run_dir.clone(),
        source,
    })?;
    std::fs::create_dir_all(run_dir.join("decode")).map_err(|source| Error::Io {
        path: run_dir.clone(),
        source,
    })?;
    std::fs::write(run_dir.join("config.json"), config.canonical_json() + "\n").map_err(
        |source| Error::Io {
            path: run_dir.join("config.json"),
            source,
        },
    )?;
    // Stale failure markers from an earlier attempt must not survive a rerun.
    let _ = std::fs::remove_file(run_dir.join("FAILED"));

    match run_stages(config, &run_dir, warnings) {
        Ok(output) => Ok(output),
        Err((stage, err)) => {
            let marker = format!("stage: {stage}\nerror: {err}\n");
            let _ = std::fs::write(run_dir.join("FAILED"), marker);
            Err(err)
        }
    }
}

fn run_stages(
    config: &ExperimentConfig,
    run_dir: &Path,
    warnings: Vec<String>,
) -> std::result::Result<PipelineOutput, (&'static str, Error)> {
    let mut stage_infos: Vec<StageInfo> = Vec::new();
    let mut record_stage = |name: &str, outputs: Vec<String>, started: Instant| {
        stage_infos.push(StageInfo {
            name: name.to_string(),
            outputs,
            wall_clock_s: started.elapsed().as_secs_f64(),
        });
    };

    // ingest: load inputs and split.
    let started = Instant::now();
    let dataset = stages::load_dataset(&config.paths).map_err(|e| ("ingest", e))?;
    let split = stages::stage_split(&dataset, &config.split, &run_dir.join("split.json"))
        .map_err(|e| ("ingest", e))?;
    record_stage("ingest", vec!["split.json".into()], started);

    // binarize: projection + thresholds on train, codes for every row.
    let started = Instant::now();
    let (_projection, codes, _diag) = stages::stage_binarize(
        &dataset,
        &split.train,
        &config.latent,
        &run_dir.join("projection.json"),
        &run_dir.join("codes.txt"),
        Some(&run_dir.join("latent_diagnostics.json")),
    )
    .map_err(|e| ("binarize", e))?;
    record_stage(
        "binarize",
        vec![
            "projection.json".into(),
            "codes.txt".into(),
            "latent_diagnostics.json".into(),
        ],
        started,
    );

    // fit-qubo on the training codes.
    let started = Instant::now();
    let train_codes = codes.select(&split.train);
    let train_fitness = dataset.fitness_rows(&split.train);
    let model = stages::stage_fit_qubo(
        &train_codes,
        &train_fitness,
        config.surrogate.lambda,
        &run_dir.join("qubo.json"),
        Some(&run_dir.join("qubo_coeffs.txt")),
    )
    .map_err(|e| ("fit-qubo", e))?;
    let surrogate_train_metrics = model
        .predict_batch(&train_codes)
        .and_then(|p| regression_metrics(&p, &train_fitness))
        .ok();
    let surrogate_test_metrics = if split.test.is_empty() {
        None
    } else {
        let test_codes = codes.select(&split.test);
        let test_fitness = dataset.fitness_rows(&split.test);
        model
            .predict_batch(&test_codes)
            .and_then(|p| regression_metrics(&p, &test_fitness))
            .ok()
    };
    stages::write_json(
        &run_dir.join("surrogate_metrics.json"),
        &serde_json::json!({
            "train": surrogate_train_metrics,
            "test": surrogate_test_metrics,
        }),
    )
    .map_err(|e| ("fit-qubo", e))?;
    record_stage(
        "fit-qubo",
        vec![
            "qubo.json".into(),
            "qubo_coeffs.txt".into(),
            "surrogate_metrics.json".into(),
        ],
        started,
    );

    // oracle fit + metrics.
    let started = Instant::now();
    let oracle = stages::stage_oracle_fit(&dataset, &split.train, &config.oracle, run_dir, "oracle")
        .map_err(|e| ("oracle", e))?;
    let oracle_val_metrics = if split.val.is_empty() {
        None
    } else {
        Some(stages::oracle_metrics_on(&oracle, &dataset, &split.val).map_err(|e| ("oracle", e))?)
    };
    let oracle_test_metrics = if split.test.is_empty() {
        None
    } else {
        Some(stages::oracle_metrics_on(&oracle, &dataset, &split.test).map_err(|e| ("oracle", e))?)
    };
    stages::write_json(
        &run_dir.join("oracle_metrics.json"),
        &serde_json::json!({
            "val": oracle_val_metrics,
            "test": oracle_test_metrics,
        }),
    )
    .map_err(|e| ("oracle", e))?;
    record_stage(
        "oracle",
        vec!["oracle.json".into(), "oracle_metrics.json".into()],
        started,
    );

    // optimize: every (optimizer, seed) pair, concurrently.
    let started = Instant::now();
    let lbo_values = model
        .predict_batch(&train_codes)
        .map_err(|e| ("optimize", e))?;
    let jobs: Vec<(OptimizerSpec, u64)> = config
        .optimizers
        .list
        .iter()
        .flat_map(|spec| {
            config
                .optimizers
                .seeds
                .iter()
                .map(move |&seed| (spec.clone(), seed))
        })
        .collect();
    let results: Vec<Result<OptimizationResult>> = run_indexed(jobs.len(), |i| {
        let (spec, seed) = &jobs[i];
        stages::stage_optimize(
            &model,
            spec,
            *seed,
            config.decode.candidates,
            Some((&train_codes, lbo_values.as_slice())),
            &run_dir.join("optimize").join(format!("{}_{seed}.json", spec.tag())),
        )
    });
    let mut optimize_outputs = Vec::new();
    let mut optimization_results = Vec::new();
    for (result, (spec, seed)) in results.into_iter().zip(&jobs) {
        optimize_outputs.push(format!("optimize/{}_{seed}.json", spec.tag()));
        optimization_results.push(result.map_err(|e| ("optimize", e))?);
    }
    record_stage("optimize", optimize_outputs, started);

    // decode + oracle scoring per run.
    let started = Instant::now();
    let index = RetrievalIndex::new(
        train_codes.clone(),
        train_fitness.clone(),
        dataset
            .sequences
            .as_ref()
            .map(|s| split.train.iter().map(|&i| s[i].clone()).collect()),
    )
    .map_err(|e| ("decode", e))?;
    let mut records: Vec<RunRecord> = Vec::new();
    let mut decode_outputs = Vec::new();
    for result in &optimization_results {
        let out = run_dir
            .join("decode")
            .join(format!("{}_{}.json", result.optimizer, result.seed));
        let record = stages::stage_decode(
            result,
            &index,
            &split.train,
            &model,
            &oracle,
            &dataset,
            config.decode.k,
            Some(&out),
        )
        .map_err(|e| ("decode", e))?;
        decode_outputs.push(format!("decode/{}_{}.json", result.optimizer, result.seed));
        records.push(record);
    }
    record_stage("decode", decode_outputs, started);

    // report.
    let started = Instant::now();
    let assumptions = Assumptions::new(config.split.mode.as_str(), config.oracle.kind.as_str());
    let pooled = stages::pooled_candidates(&records);
    let aggregates = aggregate_design(&pooled, config.decode.k).map_err(|e| ("report", e))?;
    let report = DesignReport {
        split_mode: config.split.mode.as_str().to_string(),
        latent_kind: config.latent.kind.as_str().to_string(),
        m: config.latent.m,
        lambda: config.surrogate.lambda,
        oracle_kind: config.oracle.kind.as_str().to_string(),
        k: config.decode.k,
        assumptions: assumptions.clone(),
        surrogate_train_metrics,
        surrogate_test_metrics,
        oracle_val_metrics,
        oracle_test_metrics,
        per_optimizer: crate::report::summarize_per_optimizer(&records),
        records,
        aggregates,
    };
    stages::write_json(&run_dir.join("design_report.json"), &report)
        .map_err(|e| ("report", e))?;
    record_stage("report", vec!["design_report.json".into()], started);

    let manifest = RunManifest {
        config_hash: config.hash(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        assumptions,
        warnings,
        stages: stage_infos,
    };
    stages::write_json(&run_dir.join("manifest.json"), &manifest)
        .map_err(|e| ("report", e))?;

    Ok(PipelineOutput {
        run_dir: run_dir.to_path_buf(),
        manifest,
        report,
    })
}
