//! Stage implementations shared by the subcommands and the pipeline: each
//! stage computes one artifact and writes it to disk, so composing the
//! subcommands by hand reproduces `run` exactly.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qubofit::data::npy::{read_npy_matrix, read_npy_vector};
use qubofit::data::{make_split, read_csv_column, read_csv_numeric_column, Dataset, SplitAssignment};
use qubofit::latent::{
    binarize, code_to_string, fit_pca, fit_random_projection, latent_diagnostics, BinaryCodeSet,
    LatentDiagnostics, ProjectionKind, ProjectionModel,
};
use qubofit::linalg::Mat;
use qubofit::optim::{OptimizationResult, OptimizerSpec};
use qubofit::oracle::{fit_gp_oracle, fit_ridge_oracle, GpFitOptions, GpOracle, RidgeOracle};
use qubofit::qubo::{fit_ridge, regression_metrics, QuboModel, RegressionMetrics};
use qubofit::retrieve::{retrieval_metrics, RetrievalIndex};
use qubofit::{Error, Result};

use crate::config::{LatentConfig, OracleConfig, OracleKind, PathsConfig, SplitConfig};
use crate::report::{CandidateRecord, RunRecord};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case(ext))
        .unwrap_or(false)
}

/// Fitness values from `.npy` (rank-1) or `.csv` (named column).
pub fn load_fitness(path: &Path, column: &str) -> Result<Vec<f64>> {
    if has_extension(path, "csv") {
        read_csv_numeric_column(path, column)
    } else {
        read_npy_vector(path)
    }
}

/// Sequences from `.csv` (named column) or plain text (one per line).
pub fn load_sequences(path: &Path, column: &str) -> Result<Vec<String>> {
    if has_extension(path, "csv") {
        read_csv_column(path, column)
    } else {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(text.lines().map(|l| l.trim().to_string()).collect())
    }
}

pub fn load_dataset(paths: &PathsConfig) -> Result<Dataset> {
    let embeddings = read_npy_matrix(&paths.embeddings)?;
    let fitness = load_fitness(&paths.fitness, &paths.fitness_column)?;
    let sequences = paths
        .sequences
        .as_ref()
        .map(|p| load_sequences(p, &paths.sequence_column))
        .transpose()?;
    Dataset::new(embeddings, fitness, sequences, None)
}

/// Split the dataset and write `split.json`.
pub fn stage_split(dataset: &Dataset, cfg: &SplitConfig, out: &Path) -> Result<SplitAssignment> {
    let split = make_split(&dataset.fitness, cfg.mode, cfg.ratios, cfg.seed, cfg.n_bins)?;
    write_json(out, &split)?;
    Ok(split)
}

/// Fit the projection and thresholds on the training rows, binarize every
/// row, and write the model, the code text file and the latent diagnostics.
pub fn stage_binarize(
    dataset: &Dataset,
    train_indices: &[usize],
    cfg: &LatentConfig,
    out_model: &Path,
    out_codes: &Path,
    out_diagnostics: Option<&Path>,
) -> Result<(ProjectionModel, BinaryCodeSet, LatentDiagnostics)> {
    let train = dataset.embedding_rows(train_indices);
    let mut model = match cfg.kind {
        ProjectionKind::Pca => fit_pca(&train, cfg.m)?,
        ProjectionKind::RandomGaussian => fit_random_projection(dataset.dim(), cfg.m, cfg.seed)?,
    };
    model.fit_thresholds(&train)?;
    let codes = binarize(&model, &dataset.embeddings)?;
    write_json(out_model, &model)?;
    std::fs::write(out_codes, codes.to_text()).map_err(|source| Error::Io {
        path: out_codes.to_path_buf(),
        source,
    })?;
    let mut diagnostics = latent_diagnostics(&codes, cfg.entropy_floor);
    if cfg.kind == ProjectionKind::Pca {
        diagnostics.reconstruction_mse = Some(model.reconstruction_mse(&dataset.embeddings)?);
    }
    if let Some(path) = out_diagnostics {
        write_json(path, &diagnostics)?;
    }
    Ok((model, codes, diagnostics))
}

/// Fit the QUBO surrogate on the given codes/fitness and write the model
/// JSON plus the plain-text coefficient export.
pub fn stage_fit_qubo(
    codes: &BinaryCodeSet,
    fitness: &[f64],
    lambda: f64,
    out_model: &Path,
    out_coeffs: Option<&Path>,
) -> Result<QuboModel> {
    let model = fit_ridge(codes, fitness, lambda)?;
    write_json(out_model, &model)?;
    if let Some(path) = out_coeffs {
        let mut buf = Vec::new();
        model
            .export_coefficients(&mut buf)
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
        std::fs::write(path, buf).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(model)
}

/// A fitted sequence-level oracle of either kind.
pub enum FittedOracle {
    Ridge(RidgeOracle),
    Gp(Box<GpOracle>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OracleFileHeader {
    Ridge { model: RidgeOracle },
    Gp { gp_json: String },
}

impl FittedOracle {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedOracle::Ridge(_) => "ridge",
            FittedOracle::Gp(_) => "gp",
        }
    }

    pub fn predict(&self, embeddings: &Mat) -> Result<Vec<f64>> {
        match self {
            FittedOracle::Ridge(o) => o.predict(embeddings),
            FittedOracle::Gp(o) => o.predict(embeddings),
        }
    }

    /// Write `<stem>.json`; the GP variant adds `<stem>_gp.json` and its
    /// binary factor files next to it.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let path = dir.join(format!("{stem}.json"));
        match self {
            FittedOracle::Ridge(o) => {
                write_json(&path, &OracleFileHeader::Ridge { model: o.clone() })?
            }
            FittedOracle::Gp(o) => {
                let gp_stem = format!("{stem}_gp");
                o.save(dir, &gp_stem)?;
                write_json(
                    &path,
                    &OracleFileHeader::Gp {
                        gp_json: format!("{gp_stem}.json"),
                    },
                )?;
            }
        }
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<FittedOracle> {
        let header: OracleFileHeader = read_json(path)?;
        Ok(match header {
            OracleFileHeader::Ridge { model } => FittedOracle::Ridge(model),
            OracleFileHeader::Gp { gp_json } => {
                let dir = path.parent().unwrap_or_else(|| Path::new("."));
                FittedOracle::Gp(Box::new(GpOracle::load(&dir.join(gp_json))?))
            }
        })
    }
}

/// Fit the configured oracle on the training rows and write it.
pub fn stage_oracle_fit(
    dataset: &Dataset,
    train_indices: &[usize],
    cfg: &OracleConfig,
    dir: &Path,
    stem: &str,
) -> Result<FittedOracle> {
    let train_x = dataset.embedding_rows(train_indices);
    let train_y = dataset.fitness_rows(train_indices);
    let oracle = match cfg.kind {
        OracleKind::Ridge => FittedOracle::Ridge(fit_ridge_oracle(&train_x, &train_y, cfg.alpha)?),
        OracleKind::Gp => {
            let options = GpFitOptions {
                max_train: cfg.gp_max_train,
                ..GpFitOptions::default()
            };
            FittedOracle::Gp(Box::new(fit_gp_oracle(&train_x, &train_y, &options)?))
        }
    };
    oracle.save(dir, stem)?;
    Ok(oracle)
}

/// Oracle metrics over a row subset.
pub fn oracle_metrics_on(
    oracle: &FittedOracle,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<RegressionMetrics> {
    let x = dataset.embedding_rows(indices);
    let y = dataset.fitness_rows(indices);
    let preds = oracle.predict(&x)?;
    regression_metrics(&preds, &y)
}

/// Run one optimizer and write its result JSON.
pub fn stage_optimize(
    model: &QuboModel,
    spec: &OptimizerSpec,
    seed: u64,
    top_k: usize,
    lbo_seeds: Option<(&BinaryCodeSet, &[f64])>,
    out: &Path,
) -> Result<OptimizationResult> {
    let result = spec.run(model, seed, top_k, lbo_seeds)?;
    write_json(out, &result)?;
    Ok(result)
}

/// Decode one optimizer result against the training index, score candidates
/// with the oracle, and write the run record.
///
/// `train_indices` maps index positions back to dataset rows. The run's
/// candidates are its returned top codes, each decoded and scored as
/// returned; several codes may retrieve the same training sample, and then
/// that sample legitimately counts once per returning code. The run's
/// `top_k_oracle_mean` is the mean of the `k` highest oracle scores among
/// its candidates (all of them when fewer than `k`). Cross-run aggregation
/// collapses duplicates by decoded identity instead; see
/// [`pooled_candidates`].
#[allow(clippy::too_many_arguments)]
pub fn stage_decode(
    result: &OptimizationResult,
    index: &RetrievalIndex,
    train_indices: &[usize],
    model: &QuboModel,
    oracle: &FittedOracle,
    dataset: &Dataset,
    k: usize,
    out: Option<&Path>,
) -> Result<RunRecord> {
    let headline = retrieval_metrics(index, model, result)?;
    let mut candidates: Vec<CandidateRecord> = Vec::new();
    let top = if result.top.is_empty() {
        vec![qubofit::optim::ScoredCode {
            code: result.best_code.clone(),
            value: result.best_value,
        }]
    } else {
        result.top.clone()
    };
    for scored in &top {
        let hit = index.nearest_neighbor(&scored.code)?;
        let row = train_indices[hit.index];
        let sequence = dataset.sequences.as_ref().map(|s| s[row].clone());
        let embedding = dataset.embedding_rows(&[row]);
        let oracle_score = oracle.predict(&embedding)?[0];
        candidates.push(CandidateRecord {
            code: code_to_string(&scored.code),
            surrogate_value: scored.value,
            nn_index: hit.index,
            nn_distance: hit.distance,
            nn_fitness: hit.fitness,
            oracle_score,
            sequence,
        });
    }
    let mut scores: Vec<f64> = candidates.iter().map(|c| c.oracle_score).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let take = k.max(1).min(scores.len());
    let top_k_oracle_mean = scores[..take].iter().sum::<f64>() / take as f64;
    let best_row = train_indices[headline.nn_index];
    let record = RunRecord {
        optimizer: result.optimizer.clone(),
        seed: result.seed,
        best_code: code_to_string(&result.best_code),
        surrogate_value: result.best_value,
        evaluations: result.evaluations,
        nn_index: headline.nn_index,
        nn_distance: headline.nn_distance,
        nn_fitness: headline.nn_fitness,
        improvement: headline.improvement,
        percentile: headline.percentile,
        oracle_score: candidates
            .first()
            .map(|c| c.oracle_score)
            .unwrap_or_default(),
        sequence: dataset.sequences.as_ref().map(|s| s[best_row].clone()),
        top_k_oracle_mean,
        candidates,
        notes: result.notes.clone(),
    };
    if let Some(path) = out {
        write_json(path, &record)?;
    }
    Ok(record)
}

/// Candidate pool for cross-run aggregation.
pub fn pooled_candidates(records: &[RunRecord]) -> Vec<qubofit::retrieve::ScoredCandidate> {
    records
        .iter()
        .flat_map(|r| {
            r.candidates.iter().map(|c| qubofit::retrieve::ScoredCandidate {
                key: c
                    .sequence
                    .clone()
                    .unwrap_or_else(|| format!("nn:{}", c.nn_index)),
                oracle_score: c.oracle_score,
            })
        })
        .collect()
}
