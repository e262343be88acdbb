//! QUBO surrogate: linear + pairwise binary features, ridge estimation, and
//! regression metrics.
//!
//! The surrogate predicts `intercept + hᵀx + (1/2) xᵀJx` over codes
//! `x in {0,1}^m`, with `J` symmetric. Fitted models have an exactly zero
//! diagonal; spectral truncation can introduce one, which `predict` folds
//! into the unary terms via `x_k² = x_k`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::BinaryCodeSet;
use crate::linalg::{dot, solve_spd_jitter, Mat};

/// Index layout of the `p = m + m(m-1)/2` features: the `m` linear terms
/// first, then every unordered pair `(k, l)`, `k < l`, in lexicographic
/// order.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl FeatureMap {
    pub fn new(m: usize) -> Self {
        let mut pairs = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
        for k in 0..m {
            for l in k + 1..m {
                pairs.push((k, l));
            }
        }
        Self { m, pairs }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.m + self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Write the feature vector of one code into `out` (length `p`).
    pub fn fill_features(&self, code: &[u8], out: &mut [f64]) {
        debug_assert_eq!(code.len(), self.m);
        debug_assert_eq!(out.len(), self.p());
        for (o, &b) in out.iter_mut().zip(code) {
            *o = f64::from(b);
        }
        for (idx, &(k, l)) in self.pairs.iter().enumerate() {
            out[self.m + idx] = f64::from(code[k] & code[l]);
        }
    }

    pub fn features(&self, code: &[u8]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        self.fill_features(code, &mut out);
        out
    }
}

/// Build the `N x p` design matrix of linear and pairwise features.
pub fn build_features(codes: &BinaryCodeSet) -> (FeatureMap, Mat) {
    let fmap = FeatureMap::new(codes.code_len());
    let mut phi = Mat::zeros(codes.len(), fmap.p());
    for i in 0..codes.len() {
        fmap.fill_features(codes.code(i), phi.row_mut(i));
    }
    (fmap, phi)
}

/// The fitted energy landscape.
#[derive(Clone, Debug)]
pub struct QuboModel {
    pub m: usize,
    /// Unary coefficients, length `m`.
    pub h: Vec<f64>,
    /// Symmetric interaction matrix, `m x m`.
    pub j: Mat,
    /// Constant offset, excluded from optimization.
    pub intercept: f64,
    /// Ridge coefficient used at fit time.
    pub lambda: f64,
}

impl QuboModel {
    /// Construct a model, requiring exact symmetry and a zero diagonal.
    pub fn new(h: Vec<f64>, j: Mat, intercept: f64, lambda: f64) -> Result<Self> {
        let m = h.len();
        Self::check_shape(&h, &j)?;
        for k in 0..m {
            if j.get(k, k) != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "interaction diagonal must be zero, J[{k}][{k}] = {}",
                    j.get(k, k)
                )));
            }
        }
        Ok(Self {
            m,
            h,
            j,
            intercept,
            lambda,
        })
    }

    /// Construct a model whose interaction matrix may carry a diagonal
    /// (spectral truncations do); symmetry is still required.
    pub fn with_general_interactions(
        h: Vec<f64>,
        j: Mat,
        intercept: f64,
        lambda: f64,
    ) -> Result<Self> {
        let m = h.len();
        Self::check_shape(&h, &j)?;
        Ok(Self {
            m,
            h,
            j,
            intercept,
            lambda,
        })
    }

    fn check_shape(h: &[f64], j: &Mat) -> Result<()> {
        let m = h.len();
        if j.rows() != m || j.cols() != m {
            return Err(Error::Dimension {
                what: "interaction matrix size",
                expected: m,
                found: j.rows(),
            });
        }
        for r in 0..m {
            for c in 0..r {
                if j.get(r, c) != j.get(c, r) {
                    return Err(Error::InvalidArgument(format!(
                        "interaction matrix is not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Unary terms with half the diagonal folded in; on binary inputs these
    /// are the coefficients that matter.
    pub fn effective_h(&self) -> Vec<f64> {
        (0..self.m)
            .map(|k| self.h[k] + 0.5 * self.j.get(k, k))
            .collect()
    }

    /// `intercept + hᵀx + (1/2) xᵀJx`.
    pub fn predict(&self, code: &[u8]) -> Result<f64> {
        if code.len() != self.m {
            return Err(Error::Dimension {
                what: "code length",
                expected: self.m,
                found: code.len(),
            });
        }
        Ok(self.intercept + self.value_without_intercept(code))
    }

    /// Surrogate value excluding the intercept; no length check.
    pub fn value_without_intercept(&self, code: &[u8]) -> f64 {
        debug_assert_eq!(code.len(), self.m);
        let mut v = 0.0;
        for k in 0..self.m {
            if code[k] == 0 {
                continue;
            }
            v += self.h[k] + 0.5 * self.j.get(k, k);
            let row = self.j.row(k);
            for l in k + 1..self.m {
                if code[l] != 0 {
                    v += row[l];
                }
            }
        }
        v
    }

    pub fn predict_batch(&self, codes: &BinaryCodeSet) -> Result<Vec<f64>> {
        if codes.code_len() != self.m {
            return Err(Error::Dimension {
                what: "code length",
                expected: self.m,
                found: codes.code_len(),
            });
        }
        Ok(codes
            .rows()
            .map(|c| self.intercept + self.value_without_intercept(c))
            .collect())
    }

    /// Packed weight vector `[h, J_upper]` aligned with [`FeatureMap`].
    pub fn packed_weights(&self) -> Vec<f64> {
        let fmap = FeatureMap::new(self.m);
        let mut w = Vec::with_capacity(fmap.p());
        w.extend_from_slice(&self.h);
        for &(k, l) in fmap.pairs() {
            w.push(self.j.get(k, l));
        }
        w
    }

    /// Export the coefficients in a plain text form for external QUBO/Ising
    /// solvers: one `i j coeff` line per term, 0-based indices, `i = j` lines
    /// carrying the unary coefficient (plus half of any diagonal), `i < j`
    /// lines carrying the pairwise coefficient of `x_i x_j` in the maximized
    /// objective.
    pub fn export_coefficients(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# qubo m={} intercept={}", self.m, self.intercept)?;
        let h_eff = self.effective_h();
        for (k, hk) in h_eff.iter().enumerate() {
            writeln!(out, "{k} {k} {hk}")?;
        }
        for k in 0..self.m {
            for l in k + 1..self.m {
                writeln!(out, "{k} {l} {}", self.j.get(k, l))?;
            }
        }
        Ok(())
    }
}

/// Serialized form: strict upper triangle of `J` row-major; `j_diag` appears
/// only for truncated models with a nonzero diagonal.
#[derive(Serialize, Deserialize)]
struct QuboModelJson {
    m: usize,
    lambda: f64,
    intercept: f64,
    h: Vec<f64>,
    #[serde(rename = "J_upper")]
    j_upper: Vec<f64>,
    #[serde(rename = "J_diag", default, skip_serializing_if = "Option::is_none")]
    j_diag: Option<Vec<f64>>,
}

impl Serialize for QuboModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut j_upper = Vec::with_capacity(self.m * self.m.saturating_sub(1) / 2);
        for k in 0..self.m {
            for l in k + 1..self.m {
                j_upper.push(self.j.get(k, l));
            }
        }
        let diag: Vec<f64> = (0..self.m).map(|k| self.j.get(k, k)).collect();
        let j_diag = if diag.iter().any(|&v| v != 0.0) {
            Some(diag)
        } else {
            None
        };
        QuboModelJson {
            m: self.m,
            lambda: self.lambda,
            intercept: self.intercept,
            h: self.h.clone(),
            j_upper,
            j_diag,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuboModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = QuboModelJson::deserialize(deserializer)?;
        let expected = raw.m * raw.m.saturating_sub(1) / 2;
        if raw.h.len() != raw.m || raw.j_upper.len() != expected {
            return Err(serde::de::Error::custom(format!(
                "inconsistent qubo model: m={}, |h|={}, |J_upper|={}",
                raw.m,
                raw.h.len(),
                raw.j_upper.len()
            )));
        }
        let mut j = Mat::zeros(raw.m, raw.m);
        let mut it = raw.j_upper.iter();
        for k in 0..raw.m {
            for l in k + 1..raw.m {
                let v = *it.next().unwrap();
                j.set(k, l, v);
                j.set(l, k, v);
            }
        }
        if let Some(diag) = raw.j_diag {
            if diag.len() != raw.m {
                return Err(serde::de::Error::custom("J_diag length mismatch"));
            }
            for (k, v) in diag.into_iter().enumerate() {
                j.set(k, k, v);
            }
        }
        Ok(QuboModel {
            m: raw.m,
            h: raw.h,
            j,
            intercept: raw.intercept,
            lambda: raw.lambda,
        })
    }
}

/// Solve the raw ridge normal equations `(ΦᵀΦ + λI) w = Φᵀy`, no intercept,
/// no centering.
pub fn ridge_solve(phi: &Mat, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if y.len() != phi.rows() {
        return Err(Error::Dimension {
            what: "target length",
            expected: phi.rows(),
            found: y.len(),
        });
    }
    let p = phi.cols();
    let mut a = phi.gram();
    for i in 0..p {
        a.add_assign_at(i, i, lambda);
    }
    let b = phi.tr_matvec(y);
    let (w, _) = solve_spd_jitter(&a, &b).map_err(|_| Error::IllConditioned {
        lambda,
        size: p,
    })?;
    Ok(w)
}

/// Fit the QUBO surrogate by ridge regression with an unregularized
/// intercept: features and targets are centered, `w` solves
/// `(Φ_cᵀΦ_c + λI) w = Φ_cᵀ y_c`, and the intercept is
/// `mean(y) - mean(φ)ᵀw`. The weight vector unpacks into `h` and a symmetric
/// zero-diagonal `J`.
pub fn fit_ridge(codes: &BinaryCodeSet, fitness: &[f64], lambda: f64) -> Result<QuboModel> {
    let n = codes.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".to_string()));
    }
    if fitness.len() != n {
        return Err(Error::Dimension {
            what: "fitness length",
            expected: n,
            found: fitness.len(),
        });
    }
    if lambda <= 0.0 || lambda.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "ridge coefficient must be positive, got {lambda}"
        )));
    }
    let m = codes.code_len();
    let (fmap, phi) = build_features(codes);
    let p = fmap.p();

    let mut col_means = vec![0.0; p];
    for i in 0..n {
        for (mu, &v) in col_means.iter_mut().zip(phi.row(i)) {
            *mu += v;
        }
    }
    for mu in col_means.iter_mut() {
        *mu /= n as f64;
    }
    let y_mean = fitness.iter().sum::<f64>() / n as f64;
    let y_centered: Vec<f64> = fitness.iter().map(|y| y - y_mean).collect();

    // Centered normal equations without materializing the centered design:
    // Φ_cᵀΦ_c = ΦᵀΦ - n μμᵀ, and Φ_cᵀy_c = Φᵀy_c because y_c sums to zero.
    let mut a = phi.gram();
    for r in 0..p {
        for c in 0..p {
            a.add_assign_at(r, c, -(n as f64) * col_means[r] * col_means[c]);
        }
    }
    for i in 0..p {
        a.add_assign_at(i, i, lambda);
    }
    let b = phi.tr_matvec(&y_centered);
    let (w, _) = solve_spd_jitter(&a, &b).map_err(|_| Error::IllConditioned {
        lambda,
        size: p,
    })?;

    let h = w[..m].to_vec();
    let mut j = Mat::zeros(m, m);
    for (idx, &(k, l)) in fmap.pairs().iter().enumerate() {
        let v = w[m + idx];
        j.set(k, l, v);
        j.set(l, k, v);
    }
    let intercept = y_mean - dot(&col_means, &w);
    QuboModel::new(h, j, intercept, lambda)
}

/// Standard regression metrics. `degenerate` flags a zero-variance input, in
/// which case the affected correlations (and R²) are reported as 0 rather
/// than NaN.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub spearman: f64,
    pub pearson: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub degenerate: bool,
}

pub fn regression_metrics(predictions: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("empty metric input".to_string()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::Dimension {
            what: "metric input length",
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    let n = predictions.len() as f64;
    let (pearson, mut degenerate) = pearson_flagged(predictions, targets);
    let pred_ranks = average_ranks(predictions);
    let targ_ranks = average_ranks(targets);
    let (spearman, spear_degenerate) = pearson_flagged(&pred_ranks, &targ_ranks);
    degenerate |= spear_degenerate;

    let mut sq = 0.0;
    let mut abs = 0.0;
    for (&p, &t) in predictions.iter().zip(targets) {
        let d = p - t;
        sq += d * d;
        abs += d.abs();
    }
    let rmse = (sq / n).sqrt();
    let mae = abs / n;

    let t_mean = targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|t| (t - t_mean) * (t - t_mean)).sum();
    let r2 = if is_negligible_variance(ss_tot, n, t_mean) {
        degenerate = true;
        0.0
    } else {
        1.0 - sq / ss_tot
    };

    Ok(RegressionMetrics {
        spearman,
        pearson,
        rmse,
        mae,
        r2,
        degenerate,
    })
}

fn pearson_flagged(a: &[f64], b: &[f64]) -> (f64, bool) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if is_negligible_variance(va, n, ma) || is_negligible_variance(vb, n, mb) {
        return (0.0, true);
    }
    ((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0), false)
}

/// A sum of squared deviations indistinguishable from rounding noise on a
/// constant vector counts as zero variance.
fn is_negligible_variance(ss: f64, n: f64, mean: f64) -> bool {
    ss <= n * 1e-24 * (mean * mean + 1.0)
}

/// Ranks 1..n with ties sharing the mean rank of their group.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the mean of ranks i+1..=j+1.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}
