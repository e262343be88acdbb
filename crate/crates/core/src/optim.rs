//! Combinatorial optimizers over the QUBO surrogate: simulated annealing,
//! a genetic algorithm, random search, greedy hill climbing, and a
//! kernel-based latent search. All of them ride on an incremental bit-flip
//! engine that maintains the local fields `g_k = h_k + Σ_{l≠k} J_{kl} x_l`,
//! so a flip gain is O(1) and applying a flip is O(m).
//!
//! Every optimizer is a deterministic function of `(model, seed)`; each one
//! draws from its own tagged stream (see [`crate::rng`]), so different
//! optimizers sharing a run seed stay independent.

use serde::{Deserialize, Serialize};

use crate::bits::PackedCodes;
use crate::error::{Error, Result};
use crate::latent::BinaryCodeSet;
use crate::qubo::QuboModel;
use crate::rng::Rng;

/// Incremental evaluation state: the current code, its surrogate value
/// (excluding the intercept), and the local fields.
#[derive(Clone, Debug)]
pub struct SearchState<'a> {
    model: &'a QuboModel,
    h_eff: Vec<f64>,
    x: Vec<u8>,
    value: f64,
    g: Vec<f64>,
}

impl<'a> SearchState<'a> {
    pub fn new(model: &'a QuboModel, x: Vec<u8>) -> Result<Self> {
        if x.len() != model.m {
            return Err(Error::Dimension {
                what: "code length",
                expected: model.m,
                found: x.len(),
            });
        }
        let h_eff = model.effective_h();
        let mut state = Self {
            model,
            h_eff,
            x,
            value: 0.0,
            g: vec![0.0; model.m],
        };
        state.refresh();
        Ok(state)
    }

    /// Recompute value and local fields from scratch.
    pub fn refresh(&mut self) {
        let m = self.model.m;
        self.value = 0.0;
        for k in 0..m {
            let mut gk = self.h_eff[k];
            let row = self.model.j.row(k);
            for l in 0..m {
                if l != k && self.x[l] != 0 {
                    gk += row[l];
                }
            }
            self.g[k] = gk;
            if self.x[k] != 0 {
                self.value += self.h_eff[k];
                for l in k + 1..m {
                    if self.x[l] != 0 {
                        self.value += row[l];
                    }
                }
            }
        }
    }

    /// Gain of flipping bit `k`: `(1 - 2 x_k) g_k`. O(1); does not modify the
    /// state. Panics if `k` is out of range.
    #[inline]
    pub fn flip_gain(&self, k: usize) -> f64 {
        (1.0 - 2.0 * f64::from(self.x[k])) * self.g[k]
    }

    /// Toggle bit `k`, updating the value and every local field in O(m).
    pub fn apply_flip(&mut self, k: usize) {
        let gain = self.flip_gain(k);
        let turned_on = self.x[k] == 0;
        self.x[k] ^= 1;
        self.value += gain;
        let row = self.model.j.row(k);
        let sign = if turned_on { 1.0 } else { -1.0 };
        for l in 0..self.g.len() {
            if l != k {
                self.g[l] += sign * row[l];
            }
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.x
    }

    /// Surrogate value excluding the intercept.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn local_field(&self, k: usize) -> f64 {
        self.g[k]
    }

    pub fn local_fields(&self) -> &[f64] {
        &self.g
    }
}

/// A code with its surrogate value (including the intercept).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoredCode {
    #[serde(with = "code_string")]
    pub code: Vec<u8>,
    pub value: f64,
}

/// Serialize codes as '0'/'1' strings.
pub mod code_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(code: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::latent::code_to_string(code))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        crate::latent::code_from_string(&text).map_err(serde::de::Error::custom)
    }
}

/// Outcome of one optimizer run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub optimizer: String,
    pub seed: u64,
    #[serde(with = "code_string")]
    pub best_code: Vec<u8>,
    /// Surrogate value of `best_code`, including the intercept.
    pub best_value: f64,
    /// Candidate evaluations performed during the search: proposed flips for
    /// simulated annealing, fitness evaluations for the genetic algorithm,
    /// sampled codes for random search, evaluated flips for hill climbing,
    /// and acquisition-scored candidates for the kernel search.
    pub evaluations: u64,
    /// Best distinct candidates encountered, ranked by the same criterion the
    /// optimizer searches on (surrogate value; acquisition for the kernel
    /// search), each carrying its surrogate value.
    pub top: Vec<ScoredCode>,
    /// `(step, best_so_far)` recorded at every improvement.
    pub trajectory: Vec<(u64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Ranked buffer of the best distinct codes seen so far.
struct TopTracker {
    k: usize,
    entries: Vec<(Vec<u8>, f64)>,
}

impl TopTracker {
    fn new(k: usize) -> Self {
        Self {
            k: k.max(1),
            entries: Vec::new(),
        }
    }

    /// Cheap pre-check so callers can skip materializing a candidate.
    fn would_consider(&self, score: f64) -> bool {
        self.entries.len() < self.k || score > self.entries.last().unwrap().1
    }

    fn offer(&mut self, code: &[u8], score: f64) {
        if !self.would_consider(score) {
            return;
        }
        if self.entries.iter().any(|(c, _)| c == code) {
            return;
        }
        // Insert after existing entries of equal score: earlier finds rank first.
        let pos = self
            .entries
            .iter()
            .position(|(_, s)| *s < score)
            .unwrap_or(self.entries.len());
        self.entries.insert(pos, (code.to_vec(), score));
        self.entries.truncate(self.k);
    }

    fn into_scored(self, value_of: impl Fn(&[u8]) -> f64) -> Vec<ScoredCode> {
        self.entries
            .into_iter()
            .map(|(code, _)| {
                let value = value_of(&code);
                ScoredCode { code, value }
            })
            .collect()
    }
}

fn precondition_m(model: &QuboModel, min_m: usize, what: &str) -> Result<()> {
    if model.m < min_m {
        return Err(Error::InvalidArgument(format!(
            "{what} needs m >= {min_m}, got {}",
            model.m
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SaParams {
    pub steps: u64,
    pub t0: f64,
    pub t_min: f64,
    pub decay: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            steps: 20_000,
            t0: 1.0,
            t_min: 1e-4,
            decay: 0.999,
        }
    }
}

/// Simulated annealing: single-bit flip proposals from a uniformly random
/// start, Metropolis acceptance `exp(Δ/T)` for worsening moves (a zero gain
/// is always accepted), exponential temperature decay clamped at `t_min`.
/// Returns the best code ever visited; the top list ranks every evaluated
/// candidate, proposals included.
pub fn simulated_annealing(
    model: &QuboModel,
    seed: u64,
    params: &SaParams,
    top_k: usize,
) -> Result<OptimizationResult> {
    precondition_m(model, 1, "simulated annealing")?;
    let mut rng = Rng::from_seed_and_tag(seed, "sa");
    let m = model.m;
    let mut state = SearchState::new(model, rng.next_code(m))?;
    let mut tracker = TopTracker::new(top_k);
    tracker.offer(state.bits(), state.value());
    let mut best_code = state.bits().to_vec();
    let mut best = state.value();
    let mut trajectory = vec![(0u64, best + model.intercept)];
    let mut t = params.t0;
    for step in 1..=params.steps {
        let k = rng.next_usize(m);
        let gain = state.flip_gain(k);
        if tracker.would_consider(state.value() + gain) {
            let mut proposed = state.bits().to_vec();
            proposed[k] ^= 1;
            tracker.offer(&proposed, state.value() + gain);
        }
        let accept = gain >= 0.0 || rng.next_f64() < (gain / t).exp();
        if accept {
            state.apply_flip(k);
            if state.value() > best {
                best = state.value();
                best_code.copy_from_slice(state.bits());
                trajectory.push((step, best + model.intercept));
            }
        }
        t = (t * params.decay).max(params.t_min);
    }
    Ok(OptimizationResult {
        optimizer: "sa".to_string(),
        seed,
        best_value: best + model.intercept,
        best_code,
        evaluations: params.steps,
        top: tracker.into_scored(|c| model.intercept + model.value_without_intercept(c)),
        trajectory,
        notes: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub pop: usize,
    pub generations: u64,
    pub elite: usize,
    pub tournament: usize,
    pub crossover_p: f64,
    pub mutation_rate: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            pop: 64,
            generations: 150,
            elite: 4,
            tournament: 3,
            crossover_p: 0.9,
            mutation_rate: 0.02,
        }
    }
}

/// Genetic algorithm: elitism, tournament selection (draws with replacement,
/// ties to the lower population index), single-point crossover with a cut
/// uniform in `1..=m-1` (parent A copied when crossover is skipped),
/// independent per-bit mutation. Returns the best individual across all
/// generations.
pub fn genetic_algorithm(
    model: &QuboModel,
    seed: u64,
    params: &GaParams,
    top_k: usize,
) -> Result<OptimizationResult> {
    precondition_m(model, 2, "genetic algorithm")?;
    if params.pop == 0 || params.elite > params.pop || params.tournament == 0 {
        return Err(Error::InvalidArgument(
            "population, elite and tournament sizes must be consistent".to_string(),
        ));
    }
    let mut rng = Rng::from_seed_and_tag(seed, "ga");
    let m = model.m;
    let mut evaluations = 0u64;
    let mut tracker = TopTracker::new(top_k);
    let mut pop: Vec<Vec<u8>> = (0..params.pop).map(|_| rng.next_code(m)).collect();
    let mut fitness: Vec<f64> = pop
        .iter()
        .map(|c| {
            evaluations += 1;
            model.value_without_intercept(c)
        })
        .collect();
    for (c, &f) in pop.iter().zip(&fitness) {
        tracker.offer(c, f);
    }
    let (best_idx, _) = argmax_tie_low(&fitness);
    let mut best = fitness[best_idx];
    let mut best_code = pop[best_idx].clone();
    let mut trajectory = vec![(0u64, best + model.intercept)];

    for gen in 1..=params.generations {
        let mut order: Vec<usize> = (0..params.pop).collect();
        order.sort_by(|&i, &j| fitness[j].partial_cmp(&fitness[i]).unwrap().then(i.cmp(&j)));
        let mut next_pop: Vec<Vec<u8>> = Vec::with_capacity(params.pop);
        let mut next_fit: Vec<f64> = Vec::with_capacity(params.pop);
        for &idx in order.iter().take(params.elite) {
            next_pop.push(pop[idx].clone());
            next_fit.push(fitness[idx]);
        }
        while next_pop.len() < params.pop {
            let a = tournament(&mut rng, &fitness, params.tournament);
            let b = tournament(&mut rng, &fitness, params.tournament);
            let mut child = if rng.next_f64() < params.crossover_p {
                let cut = 1 + rng.next_usize(m - 1);
                let mut c = pop[a][..cut].to_vec();
                c.extend_from_slice(&pop[b][cut..]);
                c
            } else {
                pop[a].clone()
            };
            for bit in child.iter_mut() {
                if rng.next_f64() < params.mutation_rate {
                    *bit ^= 1;
                }
            }
            let f = model.value_without_intercept(&child);
            evaluations += 1;
            tracker.offer(&child, f);
            if f > best {
                best = f;
                best_code = child.clone();
                trajectory.push((gen, best + model.intercept));
            }
            next_pop.push(child);
            next_fit.push(f);
        }
        pop = next_pop;
        fitness = next_fit;
    }
    Ok(OptimizationResult {
        optimizer: "ga".to_string(),
        seed,
        best_value: best + model.intercept,
        best_code,
        evaluations,
        top: tracker.into_scored(|c| model.intercept + model.value_without_intercept(c)),
        trajectory,
        notes: Vec::new(),
    })
}

/// Three-way (by default) tournament: winner is the highest fitness among the
/// drawn indices, ties to the lower population index.
fn tournament(rng: &mut Rng, fitness: &[f64], size: usize) -> usize {
    let mut winner = rng.next_usize(fitness.len());
    for _ in 1..size {
        let challenger = rng.next_usize(fitness.len());
        if fitness[challenger] > fitness[winner]
            || (fitness[challenger] == fitness[winner] && challenger < winner)
        {
            winner = challenger;
        }
    }
    winner
}

fn argmax_tie_low(values: &[f64]) -> (usize, f64) {
    let mut idx = 0;
    let mut best = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best {
            best = v;
            idx = i;
        }
    }
    (idx, best)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RsParams {
    pub samples: u64,
}

impl Default for RsParams {
    fn default() -> Self {
        Self { samples: 10_000 }
    }
}

/// Random search: uniform codes, keep the best (first on ties).
pub fn random_search(
    model: &QuboModel,
    seed: u64,
    params: &RsParams,
    top_k: usize,
) -> Result<OptimizationResult> {
    precondition_m(model, 1, "random search")?;
    let mut rng = Rng::from_seed_and_tag(seed, "rs");
    let mut tracker = TopTracker::new(top_k);
    let mut best = f64::NEG_INFINITY;
    let mut best_code = Vec::new();
    let mut trajectory = Vec::new();
    for i in 0..params.samples {
        let code = rng.next_code(model.m);
        let v = model.value_without_intercept(&code);
        tracker.offer(&code, v);
        if v > best {
            best = v;
            best_code = code;
            trajectory.push((i + 1, best + model.intercept));
        }
    }
    Ok(OptimizationResult {
        optimizer: "rs".to_string(),
        seed,
        best_value: best + model.intercept,
        best_code,
        evaluations: params.samples,
        top: tracker.into_scored(|c| model.intercept + model.value_without_intercept(c)),
        trajectory,
        notes: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GhcParams {
    pub max_passes: u64,
}

impl Default for GhcParams {
    fn default() -> Self {
        Self { max_passes: 100 }
    }
}

/// Greedy hill climbing: each pass evaluates all single-bit flips and applies
/// the one with the largest strictly positive gain (lowest index on ties),
/// stopping when none improves or after `max_passes`. Before declaring
/// convergence the local fields are recomputed from scratch, so incremental
/// rounding cannot leak into the local-optimality certificate. The top list
/// ranks every evaluated candidate, the scanned neighbors included.
pub fn greedy_hill_climb(
    model: &QuboModel,
    start: Option<Vec<u8>>,
    seed: u64,
    params: &GhcParams,
    top_k: usize,
) -> Result<OptimizationResult> {
    precondition_m(model, 1, "greedy hill climbing")?;
    let mut rng = Rng::from_seed_and_tag(seed, "ghc");
    let init = match start {
        Some(code) => code,
        None => rng.next_code(model.m),
    };
    let mut state = SearchState::new(model, init)?;
    let mut tracker = TopTracker::new(top_k);
    tracker.offer(state.bits(), state.value());
    let mut trajectory = vec![(0u64, state.value() + model.intercept)];
    let mut evaluations = 0u64;
    let mut pass = 0u64;
    let scan = |state: &SearchState, tracker: &mut TopTracker| -> (Option<usize>, f64) {
        let mut choice = None;
        let mut best_gain = 0.0;
        for k in 0..model.m {
            let gain = state.flip_gain(k);
            if tracker.would_consider(state.value() + gain) {
                let mut neighbor = state.bits().to_vec();
                neighbor[k] ^= 1;
                tracker.offer(&neighbor, state.value() + gain);
            }
            if gain > best_gain {
                best_gain = gain;
                choice = Some(k);
            }
        }
        (choice, best_gain)
    };
    while pass < params.max_passes {
        evaluations += model.m as u64;
        let (mut choice, _) = scan(&state, &mut tracker);
        if choice.is_none() {
            state.refresh();
            evaluations += model.m as u64;
            choice = scan(&state, &mut tracker).0;
        }
        match choice {
            Some(k) => {
                state.apply_flip(k);
                pass += 1;
                trajectory.push((pass, state.value() + model.intercept));
            }
            None => break,
        }
    }
    Ok(OptimizationResult {
        optimizer: "ghc".to_string(),
        seed,
        best_value: state.value() + model.intercept,
        best_code: state.bits().to_vec(),
        evaluations,
        top: tracker.into_scored(|c| model.intercept + model.value_without_intercept(c)),
        trajectory,
        notes: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LboParams {
    pub samples: u64,
    pub length_scale: f64,
    pub beta: f64,
}

impl Default for LboParams {
    fn default() -> Self {
        Self {
            samples: 5_000,
            length_scale: 4.0,
            beta: 1.0,
        }
    }
}

/// Kernel-based latent search. Uniform candidates are scored by an upper
/// confidence bound: the predictive mean is a kernel-weighted average of the
/// seed values under `k(x, s) = exp(-d_H(x,s)² / (2 ls²))`, and the
/// uncertainty is `1 - max_i k(x, s_i)`: zero exactly at a seed, growing
/// with Hamming novelty, bounded by one. The kernel never defines a full
/// posterior; this uncertainty is a stated heuristic, recorded in run
/// reports.
pub fn latent_kernel_search(
    model: &QuboModel,
    seed_codes: &BinaryCodeSet,
    seed_values: &[f64],
    seed: u64,
    params: &LboParams,
    top_k: usize,
) -> Result<OptimizationResult> {
    if seed_codes.is_empty() {
        return Err(Error::InvalidArgument(
            "kernel search needs at least one seed code".to_string(),
        ));
    }
    if seed_codes.code_len() != model.m {
        return Err(Error::Dimension {
            what: "seed code length",
            expected: model.m,
            found: seed_codes.code_len(),
        });
    }
    if seed_values.len() != seed_codes.len() {
        return Err(Error::Dimension {
            what: "seed value count",
            expected: seed_codes.len(),
            found: seed_values.len(),
        });
    }
    let mut rng = Rng::from_seed_and_tag(seed, "lbo");
    let packed = PackedCodes::from_rows(seed_codes.rows(), model.m);
    let denom = 2.0 * params.length_scale * params.length_scale;
    let mut tracker = TopTracker::new(top_k);
    let mut best_acq = f64::NEG_INFINITY;
    let mut best_code = Vec::new();
    let mut trajectory = Vec::new();
    let mut underflows = 0u64;
    for i in 0..params.samples {
        let code = rng.next_code(model.m);
        let q = PackedCodes::pack_one(&code);
        let mut weight_sum = 0.0;
        let mut weighted_value = 0.0;
        let mut max_kernel = 0.0f64;
        for s in 0..packed.len() {
            let d = f64::from(packed.hamming(s, &q));
            let k = (-(d * d) / denom).exp();
            weight_sum += k;
            weighted_value += k * seed_values[s];
            max_kernel = max_kernel.max(k);
        }
        let mean = if weight_sum > 0.0 {
            weighted_value / weight_sum
        } else {
            underflows += 1;
            0.0
        };
        let sigma = 1.0 - max_kernel;
        let acq = mean + params.beta * sigma;
        tracker.offer(&code, acq);
        if acq > best_acq {
            best_acq = acq;
            best_code = code;
            trajectory.push((i + 1, acq));
        }
    }
    let mut notes = Vec::new();
    if underflows > 0 {
        notes.push(format!(
            "kernel weights underflowed for {underflows} of {} candidates; their predictive mean was taken as 0",
            params.samples
        ));
    }
    let best_value = model.intercept + model.value_without_intercept(&best_code);
    Ok(OptimizationResult {
        optimizer: "lbo".to_string(),
        seed,
        best_code,
        best_value,
        evaluations: params.samples,
        top: tracker.into_scored(|c| model.intercept + model.value_without_intercept(c)),
        trajectory,
        notes,
    })
}

/// One optimizer plus its hyperparameters; the JSON form is tagged by
/// `name` ("sa", "ga", "rs", "ghc", "lbo") with the parameter fields inline,
/// all defaulting to the reference values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum OptimizerSpec {
    #[serde(rename = "sa")]
    Sa(SaParams),
    #[serde(rename = "ga")]
    Ga(GaParams),
    #[serde(rename = "rs")]
    Rs(RsParams),
    #[serde(rename = "ghc")]
    Ghc(GhcParams),
    #[serde(rename = "lbo")]
    Lbo(LboParams),
}

impl OptimizerSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            OptimizerSpec::Sa(_) => "sa",
            OptimizerSpec::Ga(_) => "ga",
            OptimizerSpec::Rs(_) => "rs",
            OptimizerSpec::Ghc(_) => "ghc",
            OptimizerSpec::Lbo(_) => "lbo",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "sa" => OptimizerSpec::Sa(SaParams::default()),
            "ga" => OptimizerSpec::Ga(GaParams::default()),
            "rs" => OptimizerSpec::Rs(RsParams::default()),
            "ghc" => OptimizerSpec::Ghc(GhcParams::default()),
            "lbo" => OptimizerSpec::Lbo(LboParams::default()),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown optimizer '{other}' (expected sa, ga, rs, ghc or lbo)"
                )))
            }
        })
    }

    /// Run this optimizer. `lbo_seeds` supplies the kernel search's seed
    /// codes and their surrogate values; other optimizers ignore it.
    pub fn run(
        &self,
        model: &QuboModel,
        seed: u64,
        top_k: usize,
        lbo_seeds: Option<(&BinaryCodeSet, &[f64])>,
    ) -> Result<OptimizationResult> {
        match self {
            OptimizerSpec::Sa(p) => simulated_annealing(model, seed, p, top_k),
            OptimizerSpec::Ga(p) => genetic_algorithm(model, seed, p, top_k),
            OptimizerSpec::Rs(p) => random_search(model, seed, p, top_k),
            OptimizerSpec::Ghc(p) => greedy_hill_climb(model, None, seed, p, top_k),
            OptimizerSpec::Lbo(p) => {
                let (codes, values) = lbo_seeds.ok_or_else(|| {
                    Error::InvalidArgument(
                        "the kernel search needs seed codes with surrogate values".to_string(),
                    )
                })?;
                latent_kernel_search(model, codes, values, seed, p, top_k)
            }
        }
    }
}
