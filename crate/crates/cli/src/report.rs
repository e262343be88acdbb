//! Report and manifest types written by the pipeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use qubofit::qubo::RegressionMetrics;
use qubofit::retrieve::DesignAggregates;

/// Definitional choices that affect comparability of the numbers; embedded
/// in every report so downstream consumers can audit them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Assumptions {
    pub improvement_definition: String,
    pub lbo_uncertainty_definition: String,
    pub intercept_definition: String,
    pub split_mode_used: String,
    pub oracle_kind: String,
}

impl Assumptions {
    pub fn new(split_mode: &str, oracle_kind: &str) -> Self {
        Self {
            improvement_definition:
                "surrogate value of the optimized code minus the best surrogate value among \
                 training codes (intercept-invariant)"
                    .to_string(),
            lbo_uncertainty_definition:
                "sigma(x) = 1 - max_i k(x, s_i); a bounded novelty heuristic, not a posterior \
                 variance"
                    .to_string(),
            intercept_definition:
                "unregularized intercept via feature and target centering; stored separately \
                 and excluded from optimization"
                    .to_string(),
            split_mode_used: split_mode.to_string(),
            oracle_kind: oracle_kind.to_string(),
        }
    }
}

/// One decoded candidate of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub code: String,
    pub surrogate_value: f64,
    pub nn_index: usize,
    pub nn_distance: u32,
    pub nn_fitness: f64,
    pub oracle_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
}

/// One (optimizer, seed) run after decoding and oracle scoring. The headline
/// fields describe the best code; `candidates` carries the run's decoded
/// top-K (duplicates by decoded sample collapsed).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub optimizer: String,
    pub seed: u64,
    pub best_code: String,
    pub surrogate_value: f64,
    pub evaluations: u64,
    pub nn_index: usize,
    pub nn_distance: u32,
    pub nn_fitness: f64,
    pub improvement: f64,
    pub percentile: f64,
    pub oracle_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    /// Mean oracle score over this run's decoded candidates (at most K).
    pub top_k_oracle_mean: f64,
    pub candidates: Vec<CandidateRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation (N-1); zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Per-optimizer mean and standard deviation over seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub runs: usize,
    pub improvement: MeanStd,
    pub nn_fitness: MeanStd,
    pub percentile: MeanStd,
    pub oracle_score: MeanStd,
    pub top_k_oracle_mean: MeanStd,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignReport {
    pub split_mode: String,
    pub latent_kind: String,
    pub m: usize,
    pub lambda: f64,
    pub oracle_kind: String,
    pub k: usize,
    pub assumptions: Assumptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_train_metrics: Option<RegressionMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_test_metrics: Option<RegressionMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_val_metrics: Option<RegressionMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_test_metrics: Option<RegressionMetrics>,
    pub records: Vec<RunRecord>,
    pub per_optimizer: BTreeMap<String, OptimizerSummary>,
    /// Pooled over every decoded candidate of every run (duplicates by
    /// decoded sample collapsed before ranking).
    pub aggregates: DesignAggregates,
}

/// Summarize records per optimizer.
pub fn summarize_per_optimizer(records: &[RunRecord]) -> BTreeMap<String, OptimizerSummary> {
    let mut grouped: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.optimizer.clone()).or_default().push(r);
    }
    grouped
        .into_iter()
        .map(|(tag, rs)| {
            let pick = |f: fn(&RunRecord) -> f64| -> Vec<f64> { rs.iter().map(|r| f(r)).collect() };
            (
                tag,
                OptimizerSummary {
                    runs: rs.len(),
                    improvement: MeanStd::of(&pick(|r| r.improvement)),
                    nn_fitness: MeanStd::of(&pick(|r| r.nn_fitness)),
                    percentile: MeanStd::of(&pick(|r| r.percentile)),
                    oracle_score: MeanStd::of(&pick(|r| r.oracle_score)),
                    top_k_oracle_mean: MeanStd::of(&pick(|r| r.top_k_oracle_mean)),
                },
            )
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageInfo {
    pub name: String,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
}

/// Run provenance. Wall-clock fields vary between runs; everything else is a
/// pure function of the config and inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub assumptions: Assumptions,
    pub warnings: Vec<String>,
    pub stages: Vec<StageInfo>,
}
