//! Continuous-to-binary latent mapping: linear projection (PCA or Gaussian
//! random projection) followed by per-dimension median thresholding, plus
//! latent-quality diagnostics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, Mat};
use crate::rng::Rng;

/// Entropy floor (in bits) below which a latent dimension counts as inactive.
pub const DEFAULT_ENTROPY_FLOOR: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Pca,
    RandomGaussian,
}

impl ProjectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionKind::Pca => "pca",
            ProjectionKind::RandomGaussian => "random_gaussian",
        }
    }
}

/// A fitted linear projection with binarization thresholds.
///
/// Maps an embedding `e` to `z = W (e - mean)` and then to bits
/// `x_k = 1(z_k > thresholds[k])`; a value equal to its threshold maps to 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub kind: ProjectionKind,
    pub m: usize,
    pub d: usize,
    /// Projection matrix, `m x d`, stored row-major.
    pub w: Vec<f64>,
    /// Centering vector of length `d` (all zeros for random projections).
    pub mean: Vec<f64>,
    /// Per-dimension medians of the projected training data; `None` until
    /// `fit_thresholds` runs (or the caller supplies them).
    pub thresholds: Option<Vec<f64>>,
    /// Eigenvalues of the sample covariance, descending (PCA only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explained_variance: Option<Vec<f64>>,
    /// Seed of the Gaussian draw (random projections only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProjectionModel {
    fn w_row(&self, k: usize) -> &[f64] {
        &self.w[k * self.d..(k + 1) * self.d]
    }

    /// Project one embedding: `z = W (e - mean)`.
    pub fn project_row(&self, embedding: &[f64]) -> Result<Vec<f64>> {
        if embedding.len() != self.d {
            return Err(Error::Dimension {
                what: "embedding dimension",
                expected: self.d,
                found: embedding.len(),
            });
        }
        let centered: Vec<f64> = embedding
            .iter()
            .zip(&self.mean)
            .map(|(e, m)| e - m)
            .collect();
        Ok((0..self.m)
            .map(|k| crate::linalg::dot(self.w_row(k), &centered))
            .collect())
    }

    /// Project every row of an embedding matrix into an `n x m` matrix.
    pub fn project(&self, embeddings: &Mat) -> Result<Mat> {
        let n = embeddings.rows();
        let mut out = Mat::zeros(n, self.m);
        for i in 0..n {
            let z = self.project_row(embeddings.row(i))?;
            out.row_mut(i).copy_from_slice(&z);
        }
        Ok(out)
    }

    /// Fit thresholds as per-dimension medians of the projected training set.
    /// An even count takes the midpoint of the two middle order statistics.
    pub fn fit_thresholds(&mut self, train_embeddings: &Mat) -> Result<()> {
        if train_embeddings.rows() == 0 {
            return Err(Error::InvalidArgument(
                "threshold fitting needs a non-empty training set".to_string(),
            ));
        }
        let z = self.project(train_embeddings)?;
        let n = z.rows();
        let mut thresholds = Vec::with_capacity(self.m);
        let mut col = vec![0.0; n];
        for k in 0..self.m {
            for i in 0..n {
                col[i] = z.get(i, k);
            }
            thresholds.push(median_in_place(&mut col));
        }
        self.thresholds = Some(thresholds);
        Ok(())
    }

    /// PCA reconstruction error: mean over all matrix entries of
    /// `(e - (mean + Wᵀ z))²` with the continuous projection `z`.
    pub fn reconstruction_mse(&self, embeddings: &Mat) -> Result<f64> {
        if self.kind != ProjectionKind::Pca {
            return Err(Error::InvalidArgument(
                "reconstruction error is defined for PCA projections only".to_string(),
            ));
        }
        let n = embeddings.rows();
        if n == 0 {
            return Err(Error::InvalidArgument("empty embedding matrix".to_string()));
        }
        let mut total = 0.0;
        for i in 0..n {
            let row = embeddings.row(i);
            let z = self.project_row(row)?;
            for (j, (&e, &mu)) in row.iter().zip(&self.mean).enumerate() {
                let mut recon = mu;
                for (k, zk) in z.iter().enumerate() {
                    recon += self.w_row(k)[j] * zk;
                }
                let diff = e - recon;
                total += diff * diff;
            }
        }
        Ok(total / (n * self.d) as f64)
    }
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fit PCA: rows of `W` are the top-`m` eigenvectors of the sample covariance
/// (unbiased, `N-1` denominator), ordered by descending eigenvalue, each row
/// signed so its largest-magnitude entry is positive.
pub fn fit_pca(embeddings: &Mat, m: usize) -> Result<ProjectionModel> {
    let n = embeddings.rows();
    let d = embeddings.cols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "PCA needs at least two samples".to_string(),
        ));
    }
    let bound = (n - 1).min(d);
    if m == 0 || m > bound {
        return Err(Error::Dimension {
            what: "latent dimension m",
            expected: bound,
            found: m,
        });
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (mu, &v) in mean.iter_mut().zip(embeddings.row(i)) {
            *mu += v;
        }
    }
    for mu in mean.iter_mut() {
        *mu /= n as f64;
    }
    let mut cov = Mat::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for (c, (&v, &mu)) in centered.iter_mut().zip(embeddings.row(i).iter().zip(&mean)) {
            *c = v - mu;
        }
        for j in 0..d {
            let cj = centered[j];
            if cj == 0.0 {
                continue;
            }
            for k in j..d {
                cov.add_assign_at(j, k, cj * centered[k]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..d {
        for k in j..d {
            let v = cov.get(j, k) / denom;
            cov.set(j, k, v);
            cov.set(k, j, v);
        }
    }
    let eig = jacobi_eigh(&cov)?.sorted_desc_by_value();
    let mut w = Vec::with_capacity(m * d);
    let mut variances = Vec::with_capacity(m);
    for k in 0..m {
        w.extend(eig.vector(k));
        variances.push(eig.values[k].max(0.0));
    }
    Ok(ProjectionModel {
        kind: ProjectionKind::Pca,
        m,
        d,
        w,
        mean,
        thresholds: None,
        explained_variance: Some(variances),
        seed: None,
    })
}

/// Fit a Gaussian random projection: entries i.i.d. normal with variance
/// `1/d`, drawn from the seeded generator; the centering vector is zero.
pub fn fit_random_projection(d: usize, m: usize, seed: u64) -> Result<ProjectionModel> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "projection dimensions must be positive".to_string(),
        ));
    }
    let mut rng = Rng::from_seed_and_tag(seed, "latent.random_projection");
    let mut w = vec![0.0; m * d];
    rng.fill_normal(&mut w);
    let scale = 1.0 / (d as f64).sqrt();
    for v in w.iter_mut() {
        *v *= scale;
    }
    Ok(ProjectionModel {
        kind: ProjectionKind::RandomGaussian,
        m,
        d,
        w,
        mean: vec![0.0; d],
        thresholds: None,
        explained_variance: None,
        seed: Some(seed),
    })
}

/// A set of binary latent codes, one row per sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryCodeSet {
    n: usize,
    m: usize,
    bits: Vec<u8>,
}

impl BinaryCodeSet {
    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(n * m);
        for row in &rows {
            if row.len() != m {
                return Err(Error::Dimension {
                    what: "code length",
                    expected: m,
                    found: row.len(),
                });
            }
            for &b in row {
                if b > 1 {
                    return Err(Error::InvalidArgument(format!(
                        "code entries must be 0 or 1, found {b}"
                    )));
                }
                bits.push(b);
            }
        }
        Ok(Self { n, m, bits })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn code_len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn code(&self, i: usize) -> &[u8] {
        &self.bits[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.n).map(move |i| self.code(i))
    }

    /// Rows selected by `indices` as a new set.
    pub fn select(&self, indices: &[usize]) -> BinaryCodeSet {
        let mut bits = Vec::with_capacity(indices.len() * self.m);
        for &i in indices {
            bits.extend_from_slice(self.code(i));
        }
        BinaryCodeSet {
            n: indices.len(),
            m: self.m,
            bits,
        }
    }

    /// Text form: one line per sample, `m` characters of '0'/'1'.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n * (self.m + 1));
        for i in 0..self.n {
            for &b in self.code(i) {
                out.push(if b == 0 { '0' } else { '1' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(line.len());
            for ch in line.chars() {
                match ch {
                    '0' => row.push(0),
                    '1' => row.push(1),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "invalid code character '{other}' on line {}",
                            lineno + 1
                        )))
                    }
                }
            }
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

/// Render a single code as a '0'/'1' string.
pub fn code_to_string(code: &[u8]) -> String {
    let mut s = String::with_capacity(code.len());
    for &b in code {
        let _ = write!(s, "{}", b.min(1));
    }
    s
}

/// Parse a '0'/'1' string into a code.
pub fn code_from_string(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::InvalidArgument(format!(
                "invalid code character '{other}'"
            ))),
        })
        .collect()
}

/// Binarize embeddings with a fitted projection: bit `k` is 1 iff the
/// projected coordinate strictly exceeds its threshold.
pub fn binarize(model: &ProjectionModel, embeddings: &Mat) -> Result<BinaryCodeSet> {
    let thresholds = model.thresholds.as_ref().ok_or_else(|| {
        Error::InvalidArgument("projection thresholds are not fitted".to_string())
    })?;
    if thresholds.len() != model.m {
        return Err(Error::Dimension {
            what: "threshold length",
            expected: model.m,
            found: thresholds.len(),
        });
    }
    let n = embeddings.rows();
    let mut bits = Vec::with_capacity(n * model.m);
    for i in 0..n {
        let z = model.project_row(embeddings.row(i))?;
        for (zk, &tau) in z.iter().zip(thresholds) {
            bits.push(u8::from(*zk > tau));
        }
    }
    Ok(BinaryCodeSet {
        n,
        m: model.m,
        bits,
    })
}

/// Latent-quality diagnostics over a code set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentDiagnostics {
    pub per_bit_entropy: Vec<f64>,
    pub mean_entropy: f64,
    pub active_dims: usize,
    pub entropy_floor: f64,
    /// PCA reconstruction error; filled by the caller when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_mse: Option<f64>,
}

/// Per-bit binary Shannon entropy (base 2) of the empirical bit frequencies,
/// and the count of dimensions whose entropy exceeds `entropy_floor`.
pub fn latent_diagnostics(codes: &BinaryCodeSet, entropy_floor: f64) -> LatentDiagnostics {
    let n = codes.len().max(1) as f64;
    let mut per_bit = Vec::with_capacity(codes.code_len());
    for k in 0..codes.code_len() {
        let ones: usize = codes.rows().map(|row| row[k] as usize).sum();
        per_bit.push(binary_entropy(ones as f64 / n));
    }
    let mean = if per_bit.is_empty() {
        0.0
    } else {
        per_bit.iter().sum::<f64>() / per_bit.len() as f64
    };
    let active = per_bit.iter().filter(|&&h| h > entropy_floor).count();
    LatentDiagnostics {
        per_bit_entropy: per_bit,
        mean_entropy: mean,
        active_dims: active,
        entropy_floor,
        reconstruction_mse: None,
    }
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    -p * p.log2() - q * q.log2()
}
