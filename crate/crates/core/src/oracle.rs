//! Sequence-level fitness oracles over dense embeddings: standardized ridge
//! regression and Gaussian-process regression with a constant x RBF + white
//! noise kernel, hyperparameters picked by exact log marginal likelihood
//! over a fixed log-spaced grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::npy::{read_npy_matrix, read_npy_vector, write_npy_matrix, write_npy_vector, NpyDtype};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jitter, cholesky_solve, dot, solve_spd_jitter, Mat};

/// Per-column standardization fitted on training data. Zero-variance columns
/// get a unit scale and are flagged so downstream weights can be pinned to
/// zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl Standardizer {
    /// Population standard deviations (N denominator).
    pub fn fit(x: &Mat) -> Self {
        let n = x.rows().max(1) as f64;
        let d = x.cols();
        let mut means = vec![0.0; d];
        for i in 0..x.rows() {
            for (mu, &v) in means.iter_mut().zip(x.row(i)) {
                *mu += v;
            }
        }
        for mu in means.iter_mut() {
            *mu /= n;
        }
        let mut vars = vec![0.0; d];
        for i in 0..x.rows() {
            for ((var, &v), &mu) in vars.iter_mut().zip(x.row(i)).zip(&means) {
                let c = v - mu;
                *var += c * c;
            }
        }
        let mut stds = Vec::with_capacity(d);
        let mut degenerate = Vec::with_capacity(d);
        for var in vars {
            let sd = (var / n).sqrt();
            if sd > 0.0 {
                stds.push(sd);
                degenerate.push(false);
            } else {
                stds.push(1.0);
                degenerate.push(true);
            }
        }
        Self {
            means,
            stds,
            degenerate,
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.dim() {
            return Err(Error::Dimension {
                what: "feature dimension",
                expected: self.dim(),
                found: x.cols(),
            });
        }
        let mut out = Mat::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let row = x.row(i);
            let orow = out.row_mut(i);
            for j in 0..row.len() {
                orow[j] = (row[j] - self.means[j]) / self.stds[j];
            }
        }
        Ok(out)
    }
}

/// Ridge oracle: standardize, then ridge with an unregularized intercept.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RidgeOracle {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
}

/// Fit the ridge oracle. Standardized columns have zero mean, so centering
/// the targets alone decouples the intercept (`intercept = mean(y)`);
/// degenerate columns keep weight zero.
pub fn fit_ridge_oracle(embeddings: &Mat, fitness: &[f64], alpha: f64) -> Result<RidgeOracle> {
    let n = embeddings.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "ridge oracle needs at least two samples".to_string(),
        ));
    }
    if fitness.len() != n {
        return Err(Error::Dimension {
            what: "fitness length",
            expected: n,
            found: fitness.len(),
        });
    }
    if alpha <= 0.0 || alpha.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "regularization strength must be positive, got {alpha}"
        )));
    }
    let standardizer = Standardizer::fit(embeddings);
    let z = standardizer.transform(embeddings)?;
    let d = z.cols();
    let active: Vec<usize> = (0..d).filter(|&j| !standardizer.degenerate[j]).collect();
    let y_mean = fitness.iter().sum::<f64>() / n as f64;
    let y_c: Vec<f64> = fitness.iter().map(|y| y - y_mean).collect();

    let mut weights = vec![0.0; d];
    if !active.is_empty() {
        // Normal equations over the active columns only.
        let mut za = Mat::zeros(n, active.len());
        for i in 0..n {
            let src = z.row(i);
            let dst = za.row_mut(i);
            for (jj, &j) in active.iter().enumerate() {
                dst[jj] = src[j];
            }
        }
        let mut a = za.gram();
        for i in 0..active.len() {
            a.add_assign_at(i, i, alpha);
        }
        let b = za.tr_matvec(&y_c);
        let (w, _) = solve_spd_jitter(&a, &b).map_err(|_| Error::IllConditioned {
            lambda: alpha,
            size: active.len(),
        })?;
        for (jj, &j) in active.iter().enumerate() {
            weights[j] = w[jj];
        }
    }
    Ok(RidgeOracle {
        standardizer,
        weights,
        intercept: y_mean,
        alpha,
    })
}

impl RidgeOracle {
    pub fn predict(&self, embeddings: &Mat) -> Result<Vec<f64>> {
        let z = self.standardizer.transform(embeddings)?;
        Ok((0..z.rows())
            .map(|i| self.intercept + dot(z.row(i), &self.weights))
            .collect())
    }
}

/// Kernel hyperparameters: `k(x, x') = C exp(-‖x-x'‖²/(2 l²)) + σ_n² 1{x=x'}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise: f64,
}

pub const GP_SIGNAL_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const GP_LENGTH_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const GP_NOISE_BOUNDS: (f64, f64) = (1e-6, 1e1);

/// Candidate values per hyperparameter; the fit scans the full cross
/// product in order (signal, length, noise), keeping the first maximizer of
/// the log marginal likelihood.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpParamGrid {
    pub signal_variance: Vec<f64>,
    pub length_scale: Vec<f64>,
    pub noise: Vec<f64>,
}

fn log_grid(bounds: (f64, f64), count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![bounds.0];
    }
    let ratio = bounds.1 / bounds.0;
    (0..count)
        .map(|i| bounds.0 * ratio.powf(i as f64 / (count - 1) as f64))
        .collect()
}

impl Default for GpParamGrid {
    /// Five log-spaced values per parameter across the declared bounds.
    fn default() -> Self {
        Self {
            signal_variance: log_grid(GP_SIGNAL_BOUNDS, 5),
            length_scale: log_grid(GP_LENGTH_BOUNDS, 5),
            noise: log_grid(GP_NOISE_BOUNDS, 5),
        }
    }
}

impl GpParamGrid {
    fn validate(&self) -> Result<()> {
        let check = |values: &[f64], bounds: (f64, f64), name: &str| -> Result<()> {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("empty grid for {name}")));
            }
            for &v in values {
                if !(v >= bounds.0 * (1.0 - 1e-9) && v <= bounds.1 * (1.0 + 1e-9)) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} value {v} outside bounds [{}, {}]",
                        bounds.0, bounds.1
                    )));
                }
            }
            Ok(())
        };
        check(&self.signal_variance, GP_SIGNAL_BOUNDS, "signal variance")?;
        check(&self.length_scale, GP_LENGTH_BOUNDS, "length scale")?;
        check(&self.noise, GP_NOISE_BOUNDS, "noise")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpFitOptions {
    pub grid: GpParamGrid,
    /// Exact GP training is cubic; fits beyond this many samples are refused.
    pub max_train: usize,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        Self {
            grid: GpParamGrid::default(),
            max_train: 2000,
        }
    }
}

/// Fitted Gaussian-process oracle.
#[derive(Clone, Debug)]
pub struct GpOracle {
    pub standardizer: Standardizer,
    /// Standardized training inputs.
    pub train_z: Mat,
    pub y_mean: f64,
    pub y_std: f64,
    pub degenerate_targets: bool,
    pub params: GpParams,
    /// `(K + σ_n² I)⁻¹ y_normalized`.
    pub alpha_vec: Vec<f64>,
    /// Lower Cholesky factor of `K + σ_n² I` (after any jitter).
    pub chol: Mat,
    pub log_marginal_likelihood: f64,
    pub jitter: f64,
}

/// Fit the GP oracle: standardize inputs, normalize targets, scan the
/// hyperparameter grid and keep the first log-marginal-likelihood maximizer.
/// Grid points whose Cholesky fails even with jitter are skipped; all of
/// them failing is a numeric error.
pub fn fit_gp_oracle(embeddings: &Mat, fitness: &[f64], options: &GpFitOptions) -> Result<GpOracle> {
    let n = embeddings.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "gp oracle needs at least two samples".to_string(),
        ));
    }
    if n > options.max_train {
        return Err(Error::Capacity {
            what: "gp training size",
            limit: options.max_train,
            actual: n,
        });
    }
    if fitness.len() != n {
        return Err(Error::Dimension {
            what: "fitness length",
            expected: n,
            found: fitness.len(),
        });
    }
    options.grid.validate()?;

    let standardizer = Standardizer::fit(embeddings);
    let z = standardizer.transform(embeddings)?;
    let y_mean = fitness.iter().sum::<f64>() / n as f64;
    let var = fitness.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / n as f64;
    let (y_std, degenerate_targets) = if var > 0.0 {
        (var.sqrt(), false)
    } else {
        (1.0, true)
    };
    let y_n: Vec<f64> = fitness.iter().map(|y| (y - y_mean) / y_std).collect();

    // Pairwise squared distances, computed once.
    let mut sqdist = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut s = 0.0;
            for (a, b) in z.row(i).iter().zip(z.row(j)) {
                let d = a - b;
                s += d * d;
            }
            sqdist.set(i, j, s);
            sqdist.set(j, i, s);
        }
    }

    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut best: Option<GpOracle> = None;
    let mut attempted = 0usize;
    for &c in &options.grid.signal_variance {
        for &l in &options.grid.length_scale {
            let inv = 1.0 / (2.0 * l * l);
            let mut rbf = Mat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = c * (-sqdist.get(i, j) * inv).exp();
                    rbf.set(i, j, v);
                    rbf.set(j, i, v);
                }
            }
            for &noise in &options.grid.noise {
                attempted += 1;
                let mut k = rbf.clone();
                for i in 0..n {
                    k.add_assign_at(i, i, noise);
                }
                let Ok((chol, jitter)) = cholesky_jitter(&k) else {
                    continue;
                };
                let alpha = cholesky_solve(&chol, &y_n);
                let fit_term = -0.5 * dot(&y_n, &alpha);
                let log_det: f64 = (0..n).map(|i| chol.get(i, i).ln()).sum();
                let lml = fit_term - log_det - n as f64 * half_log_2pi;
                if !lml.is_finite() {
                    continue;
                }
                let better = best
                    .as_ref()
                    .map_or(true, |b| lml > b.log_marginal_likelihood);
                if better {
                    best = Some(GpOracle {
                        standardizer: standardizer.clone(),
                        train_z: z.clone(),
                        y_mean,
                        y_std,
                        degenerate_targets,
                        params: GpParams {
                            signal_variance: c,
                            length_scale: l,
                            noise,
                        },
                        alpha_vec: alpha,
                        chol,
                        log_marginal_likelihood: lml,
                        jitter,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| {
        Error::Numeric(format!(
            "all {attempted} grid points failed Cholesky factorization"
        ))
    })
}

impl GpOracle {
    /// Predictive mean in original fitness units. The white-noise term
    /// contributes nothing to cross-covariances.
    pub fn predict(&self, embeddings: &Mat) -> Result<Vec<f64>> {
        let z = self.standardizer.transform(embeddings)?;
        let n = self.train_z.rows();
        let inv = 1.0 / (2.0 * self.params.length_scale * self.params.length_scale);
        let mut out = Vec::with_capacity(z.rows());
        for q in 0..z.rows() {
            let qrow = z.row(q);
            let mut mean_n = 0.0;
            for i in 0..n {
                let mut s = 0.0;
                for (a, b) in qrow.iter().zip(self.train_z.row(i)) {
                    let d = a - b;
                    s += d * d;
                }
                mean_n += self.params.signal_variance * (-s * inv).exp() * self.alpha_vec[i];
            }
            out.push(self.y_mean + self.y_std * mean_n);
        }
        Ok(out)
    }

    /// Write the oracle as a JSON summary plus binary factor files
    /// (`<stem>.json`, `<stem>_inputs.npy`, `<stem>_alpha.npy`,
    /// `<stem>_chol.npy`).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let inputs = format!("{stem}_inputs.npy");
        let alpha = format!("{stem}_alpha.npy");
        let chol = format!("{stem}_chol.npy");
        write_npy_matrix(&dir.join(&inputs), &self.train_z, NpyDtype::F8)?;
        write_npy_vector(&dir.join(&alpha), &self.alpha_vec, NpyDtype::F8)?;
        write_npy_matrix(&dir.join(&chol), &self.chol, NpyDtype::F8)?;
        let json = GpOracleJson {
            standardizer: self.standardizer.clone(),
            y_mean: self.y_mean,
            y_std: self.y_std,
            degenerate_targets: self.degenerate_targets,
            params: self.params,
            log_marginal_likelihood: self.log_marginal_likelihood,
            jitter: self.jitter,
            inputs_file: inputs,
            alpha_file: alpha,
            chol_file: chol,
        };
        let path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Numeric(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn load(json_path: &Path) -> Result<GpOracle> {
        let text = std::fs::read_to_string(json_path).map_err(|source| Error::Io {
            path: json_path.to_path_buf(),
            source,
        })?;
        let json: GpOracleJson = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: json_path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let dir = json_path.parent().unwrap_or_else(|| Path::new("."));
        let train_z = read_npy_matrix(&dir.join(&json.inputs_file))?;
        let alpha_vec = read_npy_vector(&dir.join(&json.alpha_file))?;
        let chol = read_npy_matrix(&dir.join(&json.chol_file))?;
        Ok(GpOracle {
            standardizer: json.standardizer,
            train_z,
            y_mean: json.y_mean,
            y_std: json.y_std,
            degenerate_targets: json.degenerate_targets,
            params: json.params,
            alpha_vec,
            chol,
            log_marginal_likelihood: json.log_marginal_likelihood,
            jitter: json.jitter,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GpOracleJson {
    standardizer: Standardizer,
    y_mean: f64,
    y_std: f64,
    degenerate_targets: bool,
    params: GpParams,
    log_marginal_likelihood: f64,
    jitter: f64,
    inputs_file: String,
    alpha_file: String,
    chol_file: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_embeddings(n: usize, d: usize, rng: &mut Rng) -> Mat {
        let mut m = Mat::zeros(n, d);
        for i in 0..n {
            let mut row = vec![0.0; d];
            rng.fill_normal(&mut row);
            m.row_mut(i).copy_from_slice(&row);
        }
        m
    }

    #[test]
    fn ridge_recovers_exact_linear_target() {
        let mut rng = Rng::from_seed(100);
        let x = random_embeddings(40, 3, &mut rng);
        let standardizer = Standardizer::fit(&x);
        let z = standardizer.transform(&x).unwrap();
        let y: Vec<f64> = (0..40).map(|i| 2.0 * z.get(i, 0)).collect();
        let oracle = fit_ridge_oracle(&x, &y, 1e-12).unwrap();
        assert!(approx(oracle.weights[0], 2.0, 1e-6));
        assert!(oracle.weights[1].abs() < 1e-6);
        assert!(oracle.weights[2].abs() < 1e-6);
    }

    #[test]
    fn ridge_constant_targets() {
        let mut rng = Rng::from_seed(101);
        let x = random_embeddings(20, 4, &mut rng);
        let oracle = fit_ridge_oracle(&x, &[1.5; 20], 1.0).unwrap();
        assert!(oracle.weights.iter().all(|w| w.abs() < 1e-9));
        assert!(approx(oracle.intercept, 1.5, 1e-12));
    }

    #[test]
    fn ridge_huge_alpha_shrinks_to_mean() {
        let mut rng = Rng::from_seed(102);
        let x = random_embeddings(30, 3, &mut rng);
        let y: Vec<f64> = (0..30).map(|_| rng.next_f64() * 4.0).collect();
        let mean = y.iter().sum::<f64>() / 30.0;
        let oracle = fit_ridge_oracle(&x, &y, 1e12).unwrap();
        let preds = oracle.predict(&x).unwrap();
        for p in preds {
            assert!(approx(p, mean, 1e-6));
        }
    }

    #[test]
    fn ridge_zero_variance_column_gets_zero_weight() {
        let mut rng = Rng::from_seed(103);
        let mut x = random_embeddings(25, 3, &mut rng);
        for i in 0..25 {
            x.set(i, 1, 7.0);
        }
        let y: Vec<f64> = (0..25).map(|i| x.get(i, 0)).collect();
        let oracle = fit_ridge_oracle(&x, &y, 1e-6).unwrap();
        assert_eq!(oracle.weights[1], 0.0);
        assert!(oracle.standardizer.degenerate[1]);
    }

    #[test]
    fn ridge_alpha_to_zero_matches_least_squares() {
        let mut rng = Rng::from_seed(104);
        let x = random_embeddings(50, 4, &mut rng);
        let y: Vec<f64> = (0..50).map(|_| rng.next_normal_pair().0).collect();
        let oracle = fit_ridge_oracle(&x, &y, 1e-10).unwrap();

        // Independent least-squares route: Gaussian elimination on the
        // unregularized normal equations over standardized features.
        let z = oracle.standardizer.transform(&x).unwrap();
        let a = z.gram();
        let y_mean = y.iter().sum::<f64>() / 50.0;
        let y_c: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let b = z.tr_matvec(&y_c);
        let w = gauss_solve(&a, &b);
        for (have, want) in oracle.weights.iter().zip(&w) {
            assert!(
                (have - want).abs() <= 1e-6 * want.abs().max(1.0),
                "{have} vs {want}"
            );
        }
    }

    fn gauss_solve(a: &Mat, b: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut m = a.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m.get(r, col).abs() > m.get(piv, col).abs() {
                    piv = r;
                }
            }
            if piv != col {
                for c in 0..n {
                    let t = m.get(col, c);
                    m.set(col, c, m.get(piv, c));
                    m.set(piv, c, t);
                }
                rhs.swap(col, piv);
            }
            let p = m.get(col, col);
            for r in col + 1..n {
                let f = m.get(r, col) / p;
                for c in col..n {
                    let v = m.get(r, c) - f * m.get(col, c);
                    m.set(r, c, v);
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let mut s = rhs[r];
            for c in r + 1..n {
                s -= m.get(r, c) * x[c];
            }
            x[r] = s / m.get(r, r);
        }
        x
    }

    #[test]
    fn gp_duplicate_inputs_average_conflicting_targets() {
        let x = Mat::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let oracle = fit_gp_oracle(&x, &[0.0, 1.0], &GpFitOptions::default()).unwrap();
        let pred = oracle.predict(&Mat::from_rows(&[vec![1.0, 2.0]])).unwrap();
        assert!(approx(pred[0], 0.5, 1e-9), "got {}", pred[0]);
    }

    #[test]
    fn gp_interpolates_at_minimum_noise() {
        let mut rng = Rng::from_seed(105);
        let x = random_embeddings(30, 2, &mut rng);
        let y: Vec<f64> = (0..30).map(|i| (x.get(i, 0) * 1.3).sin()).collect();
        let options = GpFitOptions {
            grid: GpParamGrid {
                noise: vec![GP_NOISE_BOUNDS.0],
                ..GpParamGrid::default()
            },
            max_train: 2000,
        };
        let oracle = fit_gp_oracle(&x, &y, &options).unwrap();
        let preds = oracle.predict(&x).unwrap();
        for (p, t) in preds.iter().zip(&y) {
            assert!(approx(*p, *t, 1e-3), "{p} vs {t}");
        }
    }

    #[test]
    fn gp_far_queries_revert_to_target_mean() {
        let mut rng = Rng::from_seed(106);
        let x = random_embeddings(20, 2, &mut rng);
        let y: Vec<f64> = (0..20).map(|_| rng.next_f64() * 2.0 + 1.0).collect();
        let y_mean = y.iter().sum::<f64>() / 20.0;
        let options = GpFitOptions {
            grid: GpParamGrid {
                signal_variance: vec![1.0],
                length_scale: vec![1.0],
                noise: vec![1e-3],
            },
            max_train: 2000,
        };
        let oracle = fit_gp_oracle(&x, &y, &options).unwrap();
        let far = Mat::from_rows(&[vec![1e6, -1e6]]);
        let pred = oracle.predict(&far).unwrap();
        assert!(approx(pred[0], y_mean, 1e-6));
    }

    #[test]
    fn gp_grid_of_one_is_selected() {
        let mut rng = Rng::from_seed(107);
        let x = random_embeddings(10, 2, &mut rng);
        let y: Vec<f64> = (0..10).map(|_| rng.next_f64()).collect();
        let options = GpFitOptions {
            grid: GpParamGrid {
                signal_variance: vec![31.622776601683793],
                length_scale: vec![1.0],
                noise: vec![1e-3],
            },
            max_train: 2000,
        };
        let oracle = fit_gp_oracle(&x, &y, &options).unwrap();
        assert_eq!(oracle.params.signal_variance, 31.622776601683793);
        assert_eq!(oracle.params.length_scale, 1.0);
        assert_eq!(oracle.params.noise, 1e-3);
    }

    #[test]
    fn gp_selected_point_attains_grid_maximum() {
        let mut rng = Rng::from_seed(108);
        let x = random_embeddings(15, 3, &mut rng);
        let y: Vec<f64> = (0..15).map(|i| x.get(i, 0) + 0.1 * rng.next_f64()).collect();
        let oracle = fit_gp_oracle(&x, &y, &GpFitOptions::default()).unwrap();
        assert!(oracle.log_marginal_likelihood.is_finite());
        // Re-scan the grid: nothing may be strictly better.
        let grid = GpParamGrid::default();
        for &c in &grid.signal_variance {
            for &l in &grid.length_scale {
                for &s in &grid.noise {
                    let single = GpFitOptions {
                        grid: GpParamGrid {
                            signal_variance: vec![c],
                            length_scale: vec![l],
                            noise: vec![s],
                        },
                        max_train: 2000,
                    };
                    if let Ok(o) = fit_gp_oracle(&x, &y, &single) {
                        assert!(
                            o.log_marginal_likelihood
                                <= oracle.log_marginal_likelihood + 1e-9
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gp_target_shift_invariance() {
        let mut rng = Rng::from_seed(109);
        let x = random_embeddings(25, 2, &mut rng);
        let y: Vec<f64> = (0..25).map(|_| rng.next_f64() * 3.0 - 1.0).collect();
        let shift = 100.0;
        let y_shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let base = fit_gp_oracle(&x, &y, &GpFitOptions::default()).unwrap();
        let shifted = fit_gp_oracle(&x, &y_shifted, &GpFitOptions::default()).unwrap();
        let queries = random_embeddings(5, 2, &mut rng);
        let p0 = base.predict(&queries).unwrap();
        let p1 = shifted.predict(&queries).unwrap();
        for (a, b) in p0.iter().zip(&p1) {
            assert!(approx(*a, b - shift, 1e-9));
        }
    }

    #[test]
    fn interpolating_oracle_has_perfect_spearman_on_monotone_targets() {
        // Targets strictly monotone along one feature; a near-interpolating
        // GP must preserve the full ranking.
        let n = 20;
        let mut x = Mat::zeros(n, 2);
        for i in 0..n {
            x.set(i, 0, i as f64 / n as f64);
            x.set(i, 1, ((i * 7) % 5) as f64);
        }
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).exp()).collect();
        let options = GpFitOptions {
            grid: GpParamGrid {
                noise: vec![GP_NOISE_BOUNDS.0],
                ..GpParamGrid::default()
            },
            max_train: 2000,
        };
        let oracle = fit_gp_oracle(&x, &y, &options).unwrap();
        let preds = oracle.predict(&x).unwrap();
        let metrics = crate::qubo::regression_metrics(&preds, &y).unwrap();
        assert_eq!(metrics.spearman, 1.0);
    }

    #[test]
    fn gp_capacity_cap() {
        let mut rng = Rng::from_seed(110);
        let x = random_embeddings(11, 2, &mut rng);
        let y: Vec<f64> = (0..11).map(|_| rng.next_f64()).collect();
        let options = GpFitOptions {
            max_train: 10,
            ..GpFitOptions::default()
        };
        assert!(matches!(
            fit_gp_oracle(&x, &y, &options),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn gp_save_load_round_trip() {
        let mut rng = Rng::from_seed(111);
        let x = random_embeddings(12, 3, &mut rng);
        let y: Vec<f64> = (0..12).map(|_| rng.next_f64()).collect();
        let oracle = fit_gp_oracle(&x, &y, &GpFitOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json_path = oracle.save(dir.path(), "gp_oracle").unwrap();
        let loaded = GpOracle::load(&json_path).unwrap();
        let queries = random_embeddings(4, 3, &mut rng);
        let p0 = oracle.predict(&queries).unwrap();
        let p1 = loaded.predict(&queries).unwrap();
        for (a, b) in p0.iter().zip(&p1) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn grid_bounds_are_validated() {
        let mut rng = Rng::from_seed(112);
        let x = random_embeddings(5, 2, &mut rng);
        let y = vec![0.0; 5];
        let options = GpFitOptions {
            grid: GpParamGrid {
                signal_variance: vec![1e4],
                length_scale: vec![1.0],
                noise: vec![1e-3],
            },
            max_train: 2000,
        };
        assert!(matches!(
            fit_gp_oracle(&x, &y, &options),
            Err(Error::InvalidArgument(_))
        ));
    }
}
