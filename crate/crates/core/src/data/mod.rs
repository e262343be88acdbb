//! Dataset ingestion and deterministic train/validation/test splits.

pub mod npy;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng;

/// An ingested dataset: one embedding row and one fitness value per sample,
/// plus optional sequences and row identifiers. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub embeddings: Mat,
    pub fitness: Vec<f64>,
    pub sequences: Option<Vec<String>>,
    pub ids: Option<Vec<String>>,
}

impl Dataset {
    /// Validates alignment and rejects non-finite values.
    pub fn new(
        embeddings: Mat,
        fitness: Vec<f64>,
        sequences: Option<Vec<String>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = embeddings.rows();
        if fitness.len() != n {
            return Err(Error::Dimension {
                what: "fitness length",
                expected: n,
                found: fitness.len(),
            });
        }
        if let Some(seqs) = &sequences {
            if seqs.len() != n {
                return Err(Error::Dimension {
                    what: "sequences length",
                    expected: n,
                    found: seqs.len(),
                });
            }
        }
        if let Some(ids) = &ids {
            if ids.len() != n {
                return Err(Error::Dimension {
                    what: "ids length",
                    expected: n,
                    found: ids.len(),
                });
            }
        }
        if embeddings.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "embeddings contain non-finite values".to_string(),
            ));
        }
        if fitness.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "fitness contains non-finite values".to_string(),
            ));
        }
        Ok(Self {
            embeddings,
            fitness,
            sequences,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.fitness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fitness.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    /// Rows of the embedding matrix selected by `indices` as a new matrix.
    pub fn embedding_rows(&self, indices: &[usize]) -> Mat {
        let mut out = Mat::zeros(indices.len(), self.dim());
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.embeddings.row(src));
        }
        out
    }

    pub fn fitness_rows(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.fitness[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    StratifiedQuantile,
    TwoStageRandom,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::StratifiedQuantile => "stratified_quantile",
            SplitMode::TwoStageRandom => "two_stage_random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidArgument(
                "split ratios must be non-negative".to_string(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidArgument(
                "split ratios must not all be zero".to_string(),
            ));
        }
        if sum > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios sum to {sum}, must be <= 1"
            )));
        }
        Ok(())
    }
}

/// A deterministic partition of sample indices. Regenerating with the same
/// `(mode, seed, ratios, n_bins)` yields identical index sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub mode: SplitMode,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub n_bins: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    pub fn subset(&self, name: &str) -> Result<&[usize]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::InvalidArgument(format!(
                "unknown split subset '{other}' (expected train, val or test)"
            ))),
        }
    }
}

/// Split `fitness.len()` samples into train/val/test index sets.
///
/// `StratifiedQuantile` bins samples by fitness quantile (`n_bins` bins) and
/// allocates each ratio within every bin by largest remainder, shuffling bin
/// members with the seeded generator. `TwoStageRandom` first splits off the
/// test fraction, then carves validation out of the remainder, both fractions
/// taken relative to the full dataset.
pub fn make_split(
    fitness: &[f64],
    mode: SplitMode,
    ratios: SplitRatios,
    seed: u64,
    n_bins: usize,
) -> Result<SplitAssignment> {
    ratios.validate()?;
    let n = fitness.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty fitness vector".to_string()));
    }
    let (train, val, test) = match mode {
        SplitMode::StratifiedQuantile => {
            if n_bins == 0 {
                return Err(Error::InvalidArgument("n_bins must be >= 1".to_string()));
            }
            if n < n_bins {
                return Err(Error::InvalidArgument(format!(
                    "stratified split needs at least n_bins samples ({n} < {n_bins})"
                )));
            }
            stratified_split(fitness, ratios, seed, n_bins)?
        }
        SplitMode::TwoStageRandom => two_stage_split(n, ratios, seed),
    };
    Ok(SplitAssignment {
        mode,
        seed,
        ratios,
        n_bins,
        train,
        val,
        test,
    })
}

fn stratified_split(
    fitness: &[f64],
    ratios: SplitRatios,
    seed: u64,
    n_bins: usize,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    // Quantile edges over the sorted values (linear interpolation).
    let mut sorted: Vec<f64> = fitness.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let edges: Vec<f64> = (1..n_bins)
        .map(|j| quantile_sorted(&sorted, j as f64 / n_bins as f64))
        .collect();
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &y) in fitness.iter().enumerate() {
        let b = edges.iter().filter(|&&e| y > e).count();
        bins[b].push(i);
    }
    let empty = bins.iter().filter(|b| b.is_empty()).count();
    if empty > 0 {
        return Err(Error::DegenerateStratification { n_bins, empty });
    }
    let mut rng = Rng::from_seed_and_tag(seed, "split.stratified");
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for members in bins.iter_mut() {
        rng.shuffle(members);
        let counts = largest_remainder(
            &[ratios.train, ratios.val, ratios.test],
            members.len(),
        );
        let mut it = members.iter().copied();
        train.extend(it.by_ref().take(counts[0]));
        val.extend(it.by_ref().take(counts[1]));
        test.extend(it.by_ref().take(counts[2]));
        // Any remainder (ratios summing below one) stays unassigned.
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((train, val, test))
}

fn two_stage_split(n: usize, ratios: SplitRatios, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = Rng::from_seed_and_tag(seed, "split.two_stage");
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let n_test = ((ratios.test * n as f64).round() as usize).min(n);
    let mut test: Vec<usize> = perm[..n_test].to_vec();
    let rest = &perm[n_test..];
    let n_val = ((ratios.val * n as f64).round() as usize).min(rest.len());
    let mut val: Vec<usize> = rest[..n_val].to_vec();
    let n_train = ((ratios.train * n as f64).round() as usize).min(rest.len() - n_val);
    let mut train: Vec<usize> = rest[n_val..n_val + n_train].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    (train, val, test)
}

/// Integer allocation of `total` items over buckets by the largest-remainder
/// rule. `ratios` need not sum to one; a sub-one sum leaves items unallocated.
fn largest_remainder(ratios: &[f64], total: usize) -> Vec<usize> {
    let targets: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let ratio_sum: f64 = ratios.iter().sum();
    let budget = if ratio_sum >= 1.0 - 1e-9 {
        total
    } else {
        (ratio_sum * total as f64).round() as usize
    };
    let mut leftover = budget.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = targets[i] - targets[i].floor();
        let fj = targets[j] - targets[j].floor();
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Read a CSV column as strings, preserving file order. The file must have a
/// header row.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: column.to_string(),
        })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        out.push(record.get(col).unwrap_or("").to_string());
    }
    Ok(out)
}

/// Read a CSV column as numbers; a bad cell reports its 1-based data row.
pub fn read_csv_numeric_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let raw = read_csv_column(path, column)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, cell)| {
            cell.trim().parse::<f64>().map_err(|_| Error::NumericCell {
                path: path.to_path_buf(),
                column: column.to_string(),
                row: i + 1,
                value: cell,
            })
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}
