//! Retrieval-based decoding and benchmark metrics: map optimized codes back
//! to observed samples by Hamming nearest neighbor, then score the designs.

use serde::{Deserialize, Serialize};

use crate::bits::PackedCodes;
use crate::error::{Error, Result};
use crate::latent::BinaryCodeSet;
use crate::optim::OptimizationResult;
use crate::qubo::QuboModel;

/// Immutable index over the training codes with their fitness values and
/// optional sequences; queries are pure.
#[derive(Clone, Debug)]
pub struct RetrievalIndex {
    codes: BinaryCodeSet,
    packed: PackedCodes,
    fitness: Vec<f64>,
    sequences: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnHit {
    pub index: usize,
    pub distance: u32,
    pub fitness: f64,
}

impl RetrievalIndex {
    pub fn new(
        codes: BinaryCodeSet,
        fitness: Vec<f64>,
        sequences: Option<Vec<String>>,
    ) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::InvalidArgument(
                "retrieval index needs at least one code".to_string(),
            ));
        }
        if fitness.len() != codes.len() {
            return Err(Error::Dimension {
                what: "index fitness length",
                expected: codes.len(),
                found: fitness.len(),
            });
        }
        if let Some(seqs) = &sequences {
            if seqs.len() != codes.len() {
                return Err(Error::Dimension {
                    what: "index sequence count",
                    expected: codes.len(),
                    found: seqs.len(),
                });
            }
        }
        let packed = PackedCodes::from_rows(codes.rows(), codes.code_len());
        Ok(Self {
            codes,
            packed,
            fitness,
            sequences,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code_len(&self) -> usize {
        self.codes.code_len()
    }

    pub fn codes(&self) -> &BinaryCodeSet {
        &self.codes
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn sequence(&self, i: usize) -> Option<&str> {
        self.sequences.as_ref().map(|s| s[i].as_str())
    }

    /// Linear popcount scan for the Hamming nearest neighbor; ties go to the
    /// lowest training index.
    pub fn nearest_neighbor(&self, query: &[u8]) -> Result<NnHit> {
        if query.len() != self.codes.code_len() {
            return Err(Error::Dimension {
                what: "query code length",
                expected: self.codes.code_len(),
                found: query.len(),
            });
        }
        let q = PackedCodes::pack_one(query);
        let mut best_idx = 0usize;
        let mut best_d = u32::MAX;
        for i in 0..self.packed.len() {
            let d = self.packed.hamming(i, &q);
            if d < best_d {
                best_d = d;
                best_idx = i;
            }
        }
        Ok(NnHit {
            index: best_idx,
            distance: best_d,
            fitness: self.fitness[best_idx],
        })
    }
}

/// Retrieval metrics for one optimizer run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub nn_index: usize,
    pub nn_distance: u32,
    pub nn_fitness: f64,
    /// Surrogate value of the optimized code minus the best surrogate value
    /// among the training codes (may be negative). Intercept-invariant by
    /// construction; the baseline choice is a recorded assumption.
    pub improvement: f64,
    /// Mid-rank percentile of `nn_fitness` within the training fitness.
    pub percentile: f64,
}

/// Compute improvement, nearest-neighbor fitness and percentile for one run.
pub fn retrieval_metrics(
    index: &RetrievalIndex,
    model: &QuboModel,
    result: &OptimizationResult,
) -> Result<RetrievalRecord> {
    if index.code_len() != model.m {
        return Err(Error::Dimension {
            what: "index code length",
            expected: model.m,
            found: index.code_len(),
        });
    }
    let hit = index.nearest_neighbor(&result.best_code)?;
    let best_train = index
        .codes
        .rows()
        .map(|c| model.intercept + model.value_without_intercept(c))
        .fold(f64::NEG_INFINITY, f64::max);
    let improvement = model.predict(&result.best_code)? - best_train;
    let percentile = percentile_of(&index.fitness, hit.fitness);
    Ok(RetrievalRecord {
        nn_index: hit.index,
        nn_distance: hit.distance,
        nn_fitness: hit.fitness,
        improvement,
        percentile,
    })
}

/// Mid-rank percentile of `v` within `values`:
/// `100 (below + 0.5 equal) / N`.
pub fn percentile_of(values: &[f64], v: f64) -> f64 {
    let below = values.iter().filter(|&&x| x < v).count() as f64;
    let equal = values.iter().filter(|&&x| x == v).count() as f64;
    100.0 * (below + 0.5 * equal) / values.len() as f64
}

/// One decoded candidate with its oracle score, ready for aggregation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoredCandidate {
    /// Dedup key: the decoded sequence when available, otherwise the decoded
    /// code rendered as a '0'/'1' string.
    pub key: String,
    pub oracle_score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignAggregates {
    pub best_score: f64,
    pub top_k_mean: f64,
    pub k: usize,
    /// Distinct candidates after collapsing duplicates.
    pub n_candidates: usize,
}

/// Aggregate oracle scores across decoded candidates: duplicates (same key)
/// collapse to their first occurrence, then the best score and the mean of
/// the `k` highest scores are reported (all candidates when fewer than `k`).
pub fn aggregate_design(candidates: &[ScoredCandidate], k: usize) -> Result<DesignAggregates> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "no candidates to aggregate".to_string(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".to_string()));
    }
    let mut seen = std::collections::HashSet::new();
    let mut scores: Vec<f64> = Vec::new();
    for c in candidates {
        if seen.insert(c.key.clone()) {
            scores.push(c.oracle_score);
        }
    }
    let n_candidates = scores.len();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let take = k.min(scores.len());
    let top_k_mean = scores[..take].iter().sum::<f64>() / take as f64;
    Ok(DesignAggregates {
        best_score: scores[0],
        top_k_mean,
        k,
        n_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::hamming_unpacked;
    use crate::linalg::Mat;
    use crate::rng::Rng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nearest_neighbor_picks_closest() {
        let codes = BinaryCodeSet::from_rows(vec![vec![0, 0, 0, 0], vec![1, 1, 1, 1]]).unwrap();
        let index = RetrievalIndex::new(codes, vec![0.2, 0.9], None).unwrap();
        let hit = index.nearest_neighbor(&[1, 1, 1, 0]).unwrap();
        assert_eq!(hit.index, 1);
        assert_eq!(hit.distance, 1);
        assert_eq!(hit.fitness, 0.9);
    }

    #[test]
    fn exact_match_has_distance_zero() {
        let codes = BinaryCodeSet::from_rows(vec![vec![0, 1, 0], vec![1, 0, 1]]).unwrap();
        let index = RetrievalIndex::new(codes, vec![0.5, 0.7], None).unwrap();
        let hit = index.nearest_neighbor(&[1, 0, 1]).unwrap();
        assert_eq!((hit.index, hit.distance, hit.fitness), (1, 0, 0.7));
    }

    #[test]
    fn packed_scan_agrees_with_naive_scan() {
        let mut rng = Rng::from_seed(90);
        let m = 64;
        let n = 500;
        let rows: Vec<Vec<u8>> = (0..n).map(|_| rng.next_code(m)).collect();
        let codes = BinaryCodeSet::from_rows(rows.clone()).unwrap();
        let fitness: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let index = RetrievalIndex::new(codes, fitness, None).unwrap();
        for _ in 0..200 {
            let query = rng.next_code(m);
            let hit = index.nearest_neighbor(&query).unwrap();
            // Independent naive scan.
            let mut best = (0usize, u32::MAX);
            for (i, row) in rows.iter().enumerate() {
                let d = hamming_unpacked(row, &query);
                if d < best.1 {
                    best = (i, d);
                }
            }
            assert_eq!((hit.index, hit.distance), best);
        }
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let codes = BinaryCodeSet::from_rows(vec![vec![0, 0], vec![1, 1], vec![0, 0]]).unwrap();
        let index = RetrievalIndex::new(codes, vec![0.1, 0.2, 0.3], None).unwrap();
        // Query at distance 1 from every stored code.
        let hit = index.nearest_neighbor(&[0, 1]).unwrap();
        assert_eq!(hit.index, 0);
    }

    #[test]
    fn percentile_rank_rules() {
        let values = vec![1.0, 2.0, 3.0, 4.0];
        // Unique maximum: 100 (N - 1 + 0.5) / N.
        assert!(approx(percentile_of(&values, 4.0), 100.0 * 3.5 / 4.0, 1e-12));
        // Below every value: 0.
        assert_eq!(percentile_of(&values, 0.5), 0.0);
        // Mid-rank on ties.
        let tied = vec![1.0, 2.0, 2.0, 3.0];
        assert!(approx(percentile_of(&tied, 2.0), 100.0 * 2.0 / 4.0, 1e-12));
    }

    #[test]
    fn percentile_invariant_under_monotone_transform() {
        let mut rng = Rng::from_seed(91);
        let values: Vec<f64> = (0..40).map(|_| rng.next_f64() * 3.0).collect();
        let v = values[7];
        let base = percentile_of(&values, v);
        let transformed: Vec<f64> = values.iter().map(|x| x.exp()).collect();
        assert!(approx(percentile_of(&transformed, v.exp()), base, 1e-12));
    }

    fn two_bit_setup() -> (RetrievalIndex, QuboModel) {
        let codes = BinaryCodeSet::from_rows(vec![vec![0, 0], vec![1, 0], vec![0, 1]]).unwrap();
        let index = RetrievalIndex::new(codes, vec![0.1, 0.8, 0.4], None).unwrap();
        let mut j = Mat::zeros(2, 2);
        j.set(0, 1, -3.0);
        j.set(1, 0, -3.0);
        let model = QuboModel::new(vec![1.0, 1.0], j, 0.0, 1e-3).unwrap();
        (index, model)
    }

    fn result_with(code: Vec<u8>, model: &QuboModel) -> OptimizationResult {
        OptimizationResult {
            optimizer: "test".to_string(),
            seed: 0,
            best_value: model.predict(&code).unwrap(),
            best_code: code,
            evaluations: 0,
            top: Vec::new(),
            trajectory: Vec::new(),
            notes: Vec::new(),
        }
    }

    #[test]
    fn improvement_zero_when_best_training_code_returned() {
        let (index, model) = two_bit_setup();
        // (1,0) is the surrogate-best training code.
        let record =
            retrieval_metrics(&index, &model, &result_with(vec![1, 0], &model)).unwrap();
        assert_eq!(record.improvement, 0.0);
        assert_eq!(record.nn_distance, 0);
        assert_eq!(record.nn_fitness, 0.8);
    }

    #[test]
    fn improvement_is_intercept_invariant() {
        let (index, model) = two_bit_setup();
        let shifted =
            QuboModel::new(model.h.clone(), model.j.clone(), 10.0, model.lambda).unwrap();
        let r1 = retrieval_metrics(&index, &model, &result_with(vec![1, 1], &model)).unwrap();
        let r2 =
            retrieval_metrics(&index, &shifted, &result_with(vec![1, 1], &shifted)).unwrap();
        assert!(approx(r1.improvement, r2.improvement, 1e-12));
    }

    #[test]
    fn aggregate_top_k_arithmetic() {
        let candidates: Vec<ScoredCandidate> = (1..=12)
            .map(|i| ScoredCandidate {
                key: format!("seq{i}"),
                oracle_score: i as f64,
            })
            .collect();
        let agg = aggregate_design(&candidates, 10).unwrap();
        assert_eq!(agg.best_score, 12.0);
        assert!(approx(agg.top_k_mean, 7.5, 1e-12));
        assert_eq!(agg.n_candidates, 12);
    }

    #[test]
    fn aggregate_single_candidate() {
        let agg = aggregate_design(
            &[ScoredCandidate {
                key: "only".to_string(),
                oracle_score: 3.25,
            }],
            10,
        )
        .unwrap();
        assert_eq!(agg.best_score, 3.25);
        assert_eq!(agg.top_k_mean, 3.25);
    }

    #[test]
    fn aggregate_collapses_duplicates() {
        let candidates = vec![
            ScoredCandidate {
                key: "same".to_string(),
                oracle_score: 2.0,
            };
            5
        ];
        let agg = aggregate_design(&candidates, 10).unwrap();
        assert_eq!(agg.n_candidates, 1);
        assert_eq!(agg.best_score, 2.0);
        assert_eq!(agg.top_k_mean, 2.0);
    }

    #[test]
    fn top_k_mean_never_exceeds_best() {
        let mut rng = Rng::from_seed(92);
        let candidates: Vec<ScoredCandidate> = (0..30)
            .map(|i| ScoredCandidate {
                key: format!("c{i}"),
                oracle_score: rng.next_f64() * 10.0 - 5.0,
            })
            .collect();
        let agg = aggregate_design(&candidates, 10).unwrap();
        assert!(agg.top_k_mean <= agg.best_score);
    }
}
