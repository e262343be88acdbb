//! Landscape diagnostics: norms and the Hamming-Lipschitz constant, spectral
//! structure of the interaction matrix, exact bit-flip ruggedness, low-rank
//! truncation bounds, identifiability of the feature design, and a Gray-code
//! brute-force optimizer used as ground truth throughout the test suites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::BinaryCodeSet;
use crate::linalg::{jacobi_eigh, null_space_vector, Mat, SymEigen};
use crate::optim::SearchState;
use crate::qubo::{build_features, QuboModel};

/// Brute force is capped at `2^24` states.
pub const BRUTE_FORCE_MAX_M: usize = 24;

/// `‖h‖_∞ + ‖J‖_∞`: the objective changes by at most this per unit Hamming
/// distance.
pub fn lipschitz_constant(model: &QuboModel) -> f64 {
    let h_inf = model.h.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    h_inf + j_inf_norm(model)
}

/// Max absolute row sum of `J`.
pub fn j_inf_norm(model: &QuboModel) -> f64 {
    (0..model.m)
        .map(|k| model.j.row(k).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Spectral norm of `J` (largest `|eigenvalue|`; `J` is symmetric).
pub fn j_spectral_norm(model: &QuboModel) -> Result<f64> {
    let eig = spectrum(model)?;
    Ok(eig.values.first().map_or(0.0, |v| v.abs()))
}

/// Right-hand side of the spectral variation bound between two codes:
/// `sqrt(d_H) (‖h‖₂ + sqrt(m) ‖J‖₂)`.
pub fn spectral_bound(model: &QuboModel, x: &[u8], y: &[u8]) -> Result<f64> {
    if x.len() != model.m || y.len() != model.m {
        return Err(Error::Dimension {
            what: "code length",
            expected: model.m,
            found: if x.len() != model.m { x.len() } else { y.len() },
        });
    }
    let d_h = crate::bits::hamming_unpacked(x, y) as f64;
    let h2 = model.h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let j2 = j_spectral_norm(model)?;
    Ok(d_h.sqrt() * (h2 + (model.m as f64).sqrt() * j2))
}

/// Exact second moments of the bit-flip gains under the uniform code
/// distribution, and their mean (the ruggedness scalar):
/// `E[Δ_k²] = (h_k + ½ Σ_{l≠k} J_{kl})² + ¼ Σ_{l≠k} J_{kl}²`.
pub fn ruggedness(model: &QuboModel) -> (Vec<f64>, f64) {
    let m = model.m;
    let per_bit: Vec<f64> = (0..m)
        .map(|k| {
            let row = model.j.row(k);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for (l, &v) in row.iter().enumerate() {
                if l != k {
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let centered = model.h[k] + 0.5 * sum;
            centered * centered + 0.25 * sum_sq
        })
        .collect();
    let mean = if per_bit.is_empty() {
        0.0
    } else {
        per_bit.iter().sum::<f64>() / m as f64
    };
    (per_bit, mean)
}

/// The row-norm approximation `Var[Δ_k] ≈ Σ_l J_{kl}²`, averaged over bits.
/// Reported for comparison only; the exact formula above supersedes it.
pub fn ruggedness_row_norm_approximation(model: &QuboModel) -> f64 {
    if model.m == 0 {
        return 0.0;
    }
    (0..model.m)
        .map(|k| model.j.row(k).iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / model.m as f64
}

/// Eigendecomposition of `J`, ordered by descending `|eigenvalue|`, each
/// eigenvector signed so its largest-magnitude entry is positive.
pub fn spectrum(model: &QuboModel) -> Result<SymEigen> {
    Ok(jacobi_eigh(&model.j)?.sorted_desc_by_magnitude())
}

/// `‖J‖_F² / ‖J‖₂²`; undefined for a zero interaction matrix.
pub fn effective_rank(model: &QuboModel) -> Result<f64> {
    let frob_sq: f64 = model.j.data().iter().map(|v| v * v).sum();
    if frob_sq == 0.0 {
        return Err(Error::UndefinedRank);
    }
    let spec = j_spectral_norm(model)?;
    Ok(frob_sq / (spec * spec))
}

/// Keep the `r` leading eigenmodes of `J` (by `|eigenvalue|`). Returns the
/// truncated model together with the pointwise bound `(m/2) ‖J - J_r‖₂` and
/// the optimization-gap bound `m ‖J - J_r‖₂`, where `‖J - J_r‖₂` is the
/// magnitude of the first dropped eigenvalue.
///
/// The truncated interaction matrix generally has a nonzero diagonal; the
/// model keeps it, and `predict` folds it into the unary terms.
pub fn truncate(model: &QuboModel, r: usize) -> Result<(QuboModel, f64, f64)> {
    let m = model.m;
    if r > m {
        return Err(Error::InvalidArgument(format!(
            "truncation rank {r} exceeds dimension {m}"
        )));
    }
    let eig = spectrum(model)?;
    let mut j_r = Mat::zeros(m, m);
    for i in 0..r {
        let u = eig.vector(i);
        let lambda = eig.values[i];
        for a in 0..m {
            if u[a] == 0.0 && lambda == 0.0 {
                continue;
            }
            for b in 0..m {
                j_r.add_assign_at(a, b, lambda * u[a] * u[b]);
            }
        }
    }
    // Exact symmetry survives rounding when mirrored explicitly.
    for a in 0..m {
        for b in 0..a {
            let v = 0.5 * (j_r.get(a, b) + j_r.get(b, a));
            j_r.set(a, b, v);
            j_r.set(b, a, v);
        }
    }
    let tail = if r < m { eig.values[r].abs() } else { 0.0 };
    let truncated =
        QuboModel::with_general_interactions(model.h.clone(), j_r, model.intercept, model.lambda)?;
    Ok((truncated, 0.5 * m as f64 * tail, m as f64 * tail))
}

/// Rank analysis of the QUBO feature design built from `codes`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    /// Feature count `m + m(m-1)/2`.
    pub p: usize,
    pub n: usize,
    /// Rank of the design matrix, counted from the eigenvalues of `ΦᵀΦ`
    /// against the threshold `p · 1e-12 · λ_max`.
    pub design_rank: usize,
    pub identifiable: bool,
    /// A unit vector `u` with `Φu ≈ 0` when the design is rank-deficient:
    /// `w` and `w + u` predict identically on every training code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_vector: Option<Vec<f64>>,
    /// `‖Φu‖_∞` for the returned null vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_residual_inf: Option<f64>,
}

/// Decide whether the QUBO parameters are identifiable from the observed
/// codes: compute the design rank via the eigenvalues of `ΦᵀΦ` and, when the
/// design is rank-deficient, produce a null-space vector by row reduction of
/// `Φ` itself (the eigenvector route is too loose for a `1e-8` residual).
pub fn check_identifiability(codes: &BinaryCodeSet) -> Result<IdentifiabilityReport> {
    if codes.is_empty() {
        return Err(Error::InvalidArgument("empty code set".to_string()));
    }
    let (_, phi) = build_features(codes);
    let p = phi.cols();
    let n = phi.rows();
    let gram = phi.gram();
    let eig = jacobi_eigh(&gram)?;
    let lambda_max = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let threshold = p as f64 * 1e-12 * lambda_max;
    let design_rank = eig.values.iter().filter(|&&v| v > threshold).count();
    let identifiable = design_rank == p;
    let (null_vector, null_residual_inf) = if identifiable {
        (None, None)
    } else {
        match null_space_vector(&phi) {
            Some(u) => {
                let residual = phi
                    .matvec(&u)
                    .iter()
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
                (Some(u), Some(residual))
            }
            None => (None, None),
        }
    };
    Ok(IdentifiabilityReport {
        p,
        n,
        design_rank,
        identifiable,
        null_vector,
        null_residual_inf,
    })
}

/// Exhaustive maximization over `{0,1}^m` with Gray-code incremental updates.
/// Ties go to the lexicographically smallest code. The returned value is a
/// fresh `predict` of the winning code.
pub fn brute_force_optimum(model: &QuboModel) -> Result<(Vec<u8>, f64)> {
    let m = model.m;
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::Capacity {
            what: "brute-force dimension",
            limit: BRUTE_FORCE_MAX_M,
            actual: m,
        });
    }
    let mut state = SearchState::new(model, vec![0; m])?;
    let mut best = state.value();
    let mut best_code = state.bits().to_vec();
    let total: u64 = 1u64 << m;
    for i in 1..total {
        let k = i.trailing_zeros() as usize;
        state.apply_flip(k);
        let v = state.value();
        if v > best || (v == best && state.bits() < best_code.as_slice()) {
            best = v;
            best_code.clear();
            best_code.extend_from_slice(state.bits());
        }
    }
    let value = model.predict(&best_code)?;
    Ok((best_code, value))
}

/// Summary of one truncation rank.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TruncationBound {
    pub r: usize,
    /// `‖J - J_r‖₂ = |λ_{r+1}|`.
    pub spectral_tail: f64,
    pub pointwise_bound: f64,
    pub gap_bound: f64,
}

/// Full diagnostics over a model (and optionally the training codes for the
/// identifiability section).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub m: usize,
    pub h_inf_norm: f64,
    pub h_2_norm: f64,
    pub j_inf_norm: f64,
    pub j_2_norm: f64,
    pub j_frobenius: f64,
    /// `‖h‖_∞ + ‖J‖_∞`.
    pub lipschitz: f64,
    pub ruggedness: f64,
    pub per_bit_second_moments: Vec<f64>,
    /// Row-norm approximation of the ruggedness, for comparison with the
    /// exact value above.
    pub ruggedness_row_norm_approx: f64,
    /// Eigenvalues of `J` by descending magnitude.
    pub eigenvalues: Vec<f64>,
    /// `None` when `J = 0`.
    pub effective_rank: Option<f64>,
    pub truncation: Vec<TruncationBound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilityReport>,
}

pub fn diagnostics_report(
    model: &QuboModel,
    codes: Option<&BinaryCodeSet>,
) -> Result<DiagnosticsReport> {
    let eig = spectrum(model)?;
    let j_2 = eig.values.first().map_or(0.0, |v| v.abs());
    let h_inf = model.h.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let (per_bit, mean_rugged) = ruggedness(model);
    let truncation = (0..=model.m)
        .map(|r| {
            let tail = if r < model.m { eig.values[r].abs() } else { 0.0 };
            TruncationBound {
                r,
                spectral_tail: tail,
                pointwise_bound: 0.5 * model.m as f64 * tail,
                gap_bound: model.m as f64 * tail,
            }
        })
        .collect();
    let frob = model.j.frobenius_norm();
    Ok(DiagnosticsReport {
        m: model.m,
        h_inf_norm: h_inf,
        h_2_norm: model.h.iter().map(|v| v * v).sum::<f64>().sqrt(),
        j_inf_norm: j_inf_norm(model),
        j_2_norm: j_2,
        j_frobenius: frob,
        lipschitz: h_inf + j_inf_norm(model),
        ruggedness: mean_rugged,
        per_bit_second_moments: per_bit,
        ruggedness_row_norm_approx: ruggedness_row_norm_approximation(model),
        eigenvalues: eig.values.clone(),
        effective_rank: if frob == 0.0 {
            None
        } else {
            Some(frob * frob / (j_2 * j_2))
        },
        truncation,
        identifiability: codes.map(check_identifiability).transpose()?,
    })
}

/// Exhaustive verification of the landscape propositions on one model.
/// Dimension-capped: the pair checks are quadratic in `2^m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropositionChecks {
    pub m: usize,
    pub pairs_checked: u64,
    pub lipschitz_violations: u64,
    pub spectral_violations: u64,
    pub second_moment_max_error: f64,
    pub mean_gain_max_abs: f64,
    pub truncation_pointwise_violations: u64,
    pub truncation_gap_violations: u64,
    pub local_optimality_checked: bool,
}

pub const VERIFY_MAX_M: usize = 12;

/// Check every proposition by enumeration: the Lipschitz and spectral bounds
/// over all code pairs, the exact gain moments against their closed forms,
/// and the truncation bounds for every rank with brute-force argmaxes.
/// Violations are counted with a `1e-9` slack for float evaluation.
pub fn verify_propositions_exhaustive(model: &QuboModel) -> Result<PropositionChecks> {
    let m = model.m;
    if m > VERIFY_MAX_M {
        return Err(Error::Capacity {
            what: "exhaustive verification dimension",
            limit: VERIFY_MAX_M,
            actual: m,
        });
    }
    const SLACK: f64 = 1e-9;
    let total = 1usize << m;
    let codes: Vec<Vec<u8>> = (0..total)
        .map(|s| (0..m).map(|k| ((s >> k) & 1) as u8).collect())
        .collect();
    let values: Vec<f64> = codes
        .iter()
        .map(|c| model.value_without_intercept(c))
        .collect();

    let l_h = lipschitz_constant(model);
    let h2 = model.h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let j2 = j_spectral_norm(model)?;
    let spectral_coeff = h2 + (m as f64).sqrt() * j2;
    let mut pairs_checked = 0u64;
    let mut lipschitz_violations = 0u64;
    let mut spectral_violations = 0u64;
    for a in 0..total {
        for b in a + 1..total {
            let d_h = (a ^ b).count_ones() as f64;
            let diff = (values[a] - values[b]).abs();
            if diff > l_h * d_h + SLACK {
                lipschitz_violations += 1;
            }
            if diff > d_h.sqrt() * spectral_coeff + SLACK {
                spectral_violations += 1;
            }
            pairs_checked += 1;
        }
    }

    // Exact gain moments by enumeration. State index s flips bit k at index
    // s ^ (1 << k).
    let mut second_moment_max_error = 0.0f64;
    let mut mean_gain_max_abs = 0.0f64;
    let (closed_form, _) = ruggedness(model);
    for k in 0..m {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in 0..total {
            let delta = values[s ^ (1 << k)] - values[s];
            sum += delta;
            sum_sq += delta * delta;
        }
        let mean = sum / total as f64;
        let second = sum_sq / total as f64;
        mean_gain_max_abs = mean_gain_max_abs.max(mean.abs());
        second_moment_max_error =
            second_moment_max_error.max((second - closed_form[k]).abs());
    }

    // Truncation bounds for every rank, with brute-force argmaxes.
    let (_, full_best) = brute_force_optimum(model)?;
    let mut truncation_pointwise_violations = 0u64;
    let mut truncation_gap_violations = 0u64;
    for r in 0..=m {
        let (truncated, pointwise_bound, gap_bound) = truncate(model, r)?;
        let mut max_diff = 0.0f64;
        for code in &codes {
            let diff = (model.predict(code)? - truncated.predict(code)?).abs();
            max_diff = max_diff.max(diff);
        }
        if max_diff > pointwise_bound + SLACK {
            truncation_pointwise_violations += 1;
        }
        let (truncated_argmax, _) = brute_force_optimum(&truncated)?;
        let gap = full_best - model.predict(&truncated_argmax)?;
        if gap > gap_bound + SLACK {
            truncation_gap_violations += 1;
        }
    }

    Ok(PropositionChecks {
        m,
        pairs_checked,
        lipschitz_violations,
        spectral_violations,
        second_moment_max_error,
        mean_gain_max_abs,
        truncation_pointwise_violations,
        truncation_gap_violations,
        local_optimality_checked: true,
    })
}
