//! Process samplers and the staged relabeling adversary.
//!
//! The adversary starts from the Ryabko chain `M` (0 -> 1 -> 2 forced, then
//! from `s >= 2` either back to 0 or on to `s + 1`, each with probability
//! one half) observed through `f^(0)`, which merges states 0 and 1 into the
//! letter 0. Each stage finds a horizon `n_j` at which the target estimator
//! reports a length-one memory word with the required probability, then folds
//! the band of states `(n_j, 2 n_j - N_j]` back onto `[N_j + 1, n_j]`, so that
//! those letters stop being memory words while the estimator has already
//! committed at horizon `n_j`.
//!
//! Only finitely many stages are realized; the delivered process is the
//! stage-`J` process, which still has memory words of length one above `N_J`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{order_estimate, shortest_word_estimate, EstimatorParams};
use crate::oracle::{decode, encode, ExplicitChain};
use crate::seq::{Sequence, Symbol, Word};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("start block {block} has length {got}, chain order is {order}")]
    StartBlock {
        block: Word,
        got: usize,
        order: usize,
    },

    #[error("start block {0} has zero probability")]
    ImpossibleStart(Word),

    #[error("fold needs n > N, got n = {small_n}, N = {big_n}")]
    EmptyFold { big_n: usize, small_n: usize },

    #[error("stopping times must be strictly increasing")]
    StoppingTimes,

    #[error("stopping time {stop} lies beyond the sequence (horizon {horizon:?})")]
    StopBeyondData { stop: usize, horizon: Option<usize> },

    #[error("adversary needs at least one replicate")]
    NoReplicates,

    #[error(
        "stage {stage}: no horizon up to {cap} reached success {target:.4} + margin (best {best:.4})"
    )]
    SearchDiverged {
        stage: usize,
        cap: usize,
        target: f64,
        best: f64,
        partial: Box<StagePlan>,
    },
}

/// SplitMix64 step; used to derive independent replicate seeds.
fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simulates `length` symbols of a stationary explicit chain.
pub fn sample_explicit(chain: &ExplicitChain, length: usize, seed: u64) -> Sequence {
    let mut rng = rng_from_seed(seed);
    let k = chain.order();
    let block = WeightedIndex::new(chain.stationary()).expect("stationary law");
    let start = decode(block.sample(&mut rng), k, chain.alphabet());
    run_chain(chain, start, length, &mut rng)
}

/// Simulates from a fixed initial `K`-block instead of the stationary law.
pub fn sample_explicit_from(
    chain: &ExplicitChain,
    start: &Word,
    length: usize,
    seed: u64,
) -> Result<Sequence, ProcessError> {
    if start.len() != chain.order() {
        return Err(ProcessError::StartBlock {
            block: start.clone(),
            got: start.len(),
            order: chain.order(),
        });
    }
    if start
        .symbols()
        .iter()
        .any(|&s| s as usize >= chain.alphabet())
    {
        return Err(ProcessError::ImpossibleStart(start.clone()));
    }
    let mut rng = rng_from_seed(seed);
    Ok(run_chain(chain, start.symbols().to_vec(), length, &mut rng))
}

fn run_chain(
    chain: &ExplicitChain,
    start: Vec<Symbol>,
    length: usize,
    rng: &mut ChaCha8Rng,
) -> Sequence {
    let k = chain.order();
    let a = chain.alphabet();
    let rows: Vec<Option<WeightedIndex<f64>>> = chain
        .kernel()
        .iter()
        .map(|r| WeightedIndex::new(r).ok())
        .collect();
    let mut out = start;
    out.truncate(length);
    if out.len() < length {
        out.reserve(length - out.len());
        let states = rows.len();
        let mut ctx = encode(&out, a);
        while out.len() < length {
            let x = rows[ctx]
                .as_ref()
                .expect("reachable context has a distribution")
                .sample(rng);
            out.push(x as Symbol);
            if k > 0 {
                ctx = (ctx * a + x) % states;
            }
        }
    }
    Sequence::new(out)
}

/// The countable-state chain used by the adversary.
#[derive(Debug, Clone, Copy, Default)]
pub struct RyabkoChain;

impl RyabkoChain {
    /// `pi(0) = pi(1) = 1/4`, `pi(s) = 2^-s` for `s >= 2`.
    pub fn stationary(state: u32) -> f64 {
        match state {
            0 | 1 => 0.25,
            s => 0.5f64.powi(s as i32),
        }
    }

    /// Inverse-CDF draw from the stationary law.
    pub fn sample_stationary<R: Rng + ?Sized>(rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        if u < 0.25 {
            0
        } else if u < 0.5 {
            1
        } else {
            // P(M >= s) = 2^-(s-1) for s >= 2; v in (0, 1/2]
            let v = 1.0 - u;
            ((-v.log2()).floor() as u32 + 1).max(2)
        }
    }

    pub fn step<R: Rng + ?Sized>(state: u32, rng: &mut R) -> u32 {
        match state {
            0 => 1,
            1 => 2,
            s => {
                if rng.random_bool(0.5) {
                    0
                } else {
                    s + 1
                }
            }
        }
    }
}

/// A stationary Ryabko state path of the given length.
pub fn sample_ryabko(length: usize, seed: u64) -> Sequence {
    let mut rng = rng_from_seed(seed);
    Sequence::new(ryabko_path(length, &mut rng))
}

fn ryabko_path<R: Rng + ?Sized>(length: usize, rng: &mut R) -> Vec<u32> {
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return out;
    }
    let mut s = RyabkoChain::sample_stationary(rng);
    out.push(s);
    while out.len() < length {
        s = RyabkoChain::step(s, rng);
        out.push(s);
    }
    out
}

/// A state-to-letter map: a finite table, identity beyond it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabeling {
    table: Vec<Symbol>,
}

impl Relabeling {
    pub fn identity() -> Self {
        Self { table: Vec::new() }
    }

    /// `f(s) = table[s]` for `s < table.len()`, `f(s) = s` otherwise.
    pub fn from_table(table: Vec<Symbol>) -> Self {
        Self { table }
    }

    /// `f^(0)`: states 0 and 1 both read as letter 0.
    pub fn initial() -> Self {
        Self { table: vec![0, 0] }
    }

    #[inline]
    pub fn apply(&self, state: u32) -> Symbol {
        self.table.get(state as usize).copied().unwrap_or(state)
    }

    /// Largest state with an explicit table entry, if any.
    pub fn cutoff(&self) -> Option<usize> {
        self.table.len().checked_sub(1)
    }
}

pub fn relabel(path: &Sequence, f: &Relabeling) -> Sequence {
    Sequence::new(path.symbols().iter().map(|&s| f.apply(s)).collect())
}

/// Mirrors the band `(n, 2n - N]` onto `[N + 1, n]` and returns the new map
/// with its cutoff `2n - N`.
pub fn fold_stage(
    prev: &Relabeling,
    big_n: usize,
    small_n: usize,
) -> Result<(Relabeling, usize), ProcessError> {
    if small_n <= big_n {
        return Err(ProcessError::EmptyFold { big_n, small_n });
    }
    let next_n = 2 * small_n - big_n;
    let table = (0..=next_n as u32)
        .map(|s| {
            let s_us = s as usize;
            if s_us <= small_n {
                prev.apply(s)
            } else {
                (2 * small_n + 1 - s_us) as Symbol
            }
        })
        .collect();
    Ok((Relabeling::from_table(table), next_n))
}

/// The even process: blocks of `1`s of even length separated by `0`s, a
/// function of a three-state chain that is not Markov of any finite order.
pub fn even_process() -> (ExplicitChain, Relabeling) {
    // states: 0 = emitted 0, 1 = first 1 of a pair, 2 = second 1 of a pair
    let chain = ExplicitChain::new(
        1,
        3,
        vec![
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.0],
        ],
    )
    .expect("valid chain");
    (chain, Relabeling::from_table(vec![0, 1, 1]))
}

pub fn sample_even_process(length: usize, seed: u64) -> Sequence {
    let (chain, f) = even_process();
    relabel(&sample_explicit(&chain, length, seed), &f)
}

/// A sequence estimator under attack.
pub trait SequenceEstimator: Sync {
    fn name(&self) -> String;
    /// Estimate from `X_0..=X_n`, `symbols` nonempty.
    fn estimate(&self, symbols: &[Symbol]) -> usize;
}

/// [`shortest_word_estimate`] as a plug-in.
#[derive(Debug, Clone)]
pub struct ShortestWord(pub EstimatorParams);

impl SequenceEstimator for ShortestWord {
    fn name(&self) -> String {
        "shortest-word".into()
    }

    fn estimate(&self, symbols: &[Symbol]) -> usize {
        shortest_word_estimate(&self.0.index(symbols), &self.0)
    }
}

/// The order estimator as a plug-in.
#[derive(Debug, Clone)]
pub struct OrderChi(pub EstimatorParams);

impl SequenceEstimator for OrderChi {
    fn name(&self) -> String {
        "chi".into()
    }

    fn estimate(&self, symbols: &[Symbol]) -> usize {
        order_estimate(&self.0.index(symbols), &self.0)
    }
}

/// Always answers two; the adversary's search cannot succeed against it.
#[derive(Debug, Clone, Copy)]
pub struct NeverOne;

impl SequenceEstimator for NeverOne {
    fn name(&self) -> String {
        "never-one".into()
    }

    fn estimate(&self, _symbols: &[Symbol]) -> usize {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub n: usize,
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub stage: usize,
    /// `N_j`.
    pub big_n: usize,
    /// `n_j`.
    pub small_n: usize,
    /// `1 - 2^-(j+1)`.
    pub target: f64,
    /// Estimated `P(h = 1 | conditioning event)` at `n_j` for the stage-`j` process.
    pub success: f64,
    /// The same probability re-estimated under the final process.
    pub final_success: Option<f64>,
    /// States `(n_j, 2 n_j - N_j]`, folded onto `[N_j + 1, n_j]`.
    pub fold_band: (usize, usize),
    pub search: Vec<SearchStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub plugin: String,
    pub replicates: usize,
    pub margin: f64,
    pub seed: u64,
    pub stages: Vec<Stage>,
    /// `N_J` of the delivered process.
    pub final_big_n: usize,
}

impl StagePlan {
    /// `f^(0), ..., f^(J)` rebuilt from the recorded horizons.
    pub fn relabelings(&self) -> Vec<Relabeling> {
        let mut out = vec![Relabeling::initial()];
        for s in &self.stages {
            let prev = out.last().expect("nonempty");
            let (f, _) = fold_stage(prev, s.big_n, s.small_n).expect("recorded n_j > N_j");
            out.push(f);
        }
        out
    }

    /// The delivered stage-`J` relabeling.
    pub fn final_relabeling(&self) -> Relabeling {
        self.relabelings().pop().expect("nonempty")
    }

    /// `N_0, ..., N_J`.
    pub fn big_ns(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.stages.iter().map(|s| s.big_n).collect();
        out.push(self.final_big_n);
        out
    }

    /// Checks every structural property of the construction, exactly.
    pub fn check_invariants(&self) -> Result<(), String> {
        let fs = self.relabelings();
        let ns = self.big_ns();
        if ns[0] != 1 {
            return Err(format!("N_0 = {} (expected 1)", ns[0]));
        }
        if fs[0] != Relabeling::initial() {
            return Err("f^(0) is not the initial merge".into());
        }
        for (j, s) in self.stages.iter().enumerate() {
            if s.stage != j || s.big_n != ns[j] {
                return Err(format!("stage {j} is out of sequence"));
            }
            if s.small_n <= s.big_n + j {
                return Err(format!("stage {j}: n_j = {} <= N_j + j", s.small_n));
            }
            if ns[j + 1] != 2 * s.small_n - s.big_n {
                return Err(format!("stage {j}: N_(j+1) != 2 n_j - N_j"));
            }
            if s.fold_band != (s.small_n + 1, ns[j + 1]) {
                return Err(format!("stage {j}: fold band mismatch"));
            }
            for st in 0..=s.small_n as u32 {
                if fs[j + 1].apply(st) != fs[j].apply(st) {
                    return Err(format!("stage {j}: f^(j+1)({st}) differs on [0, n_j]"));
                }
            }
            for st in (ns[j + 1] + 1) as u32..=(ns[j + 1] + 64) as u32 {
                if fs[j + 1].apply(st) != fs[j].apply(st) {
                    return Err(format!("stage {j}: f^(j+1)({st}) differs above 2n_j - N_j"));
                }
            }
        }
        for (j, f) in fs.iter().enumerate() {
            let big_n = ns[j];
            // identity above N_j (the table ends at N_j)
            if f.cutoff().is_some_and(|c| c > big_n) {
                return Err(format!("f^({j}) has table entries above N_{j}"));
            }
            for st in (big_n + 1) as u32..=(big_n + 64) as u32 {
                if f.apply(st) != st {
                    return Err(format!("f^({j})({st}) != {st}"));
                }
            }
            let mut pre: HashMap<Symbol, usize> = HashMap::new();
            for st in 0..=big_n as u32 {
                let a = f.apply(st);
                if a as usize > big_n {
                    return Err(format!(
                        "f^({j}): letter {a} of state {st} <= N_j exceeds N_j"
                    ));
                }
                *pre.entry(a).or_default() += 1;
            }
            if pre.get(&0) != Some(&2) {
                return Err(format!("f^({j}): letter 0 must have two preimages"));
            }
            for s in &self.stages[..j] {
                for a in (s.big_n + 1)..=s.small_n {
                    if pre.get(&(a as Symbol)) != Some(&2) {
                        return Err(format!("f^({j}): folded letter {a} lacks two preimages"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdversaryConfig {
    pub stages: usize,
    pub replicates: usize,
    pub margin: f64,
    pub seed: u64,
    /// Largest horizon tried in any stage search.
    pub horizon_cap: usize,
    /// Re-estimate every stage's success under the final process.
    pub recheck: bool,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            stages: 2,
            replicates: 200,
            margin: crate::bounds::hoeffding_margin(200, 0.05),
            seed: 1,
            horizon_cap: 1 << 22,
            recheck: true,
        }
    }
}

/// Samples `X_{-j}..=X_{n-j}` of the relabeled process conditioned on
/// `X_i = X_{i+1} = 0` for some `-j <= i <= 0`, and returns `X_0..=X_{n-j}`.
pub fn sample_conditioned_window<R: Rng + ?Sized>(
    f: &Relabeling,
    j: usize,
    n: usize,
    rng: &mut R,
) -> Vec<Symbol> {
    debug_assert!(n > j);
    let head = j + 2;
    let mut states = loop {
        let path = ryabko_path(head, rng);
        let hit = (0..=j).any(|i| f.apply(path[i]) == 0 && f.apply(path[i + 1]) == 0);
        if hit {
            break path;
        }
    };
    let total = n + 1;
    states.reserve(total.saturating_sub(head));
    let mut s = *states.last().expect("nonempty");
    while states.len() < total {
        s = RyabkoChain::step(s, rng);
        states.push(s);
    }
    states[j..].iter().map(|&s| f.apply(s)).collect()
}

/// Fraction of conditioned replicates where the clamped estimate is 1.
pub fn fooling_probability(
    h: &dyn SequenceEstimator,
    f: &Relabeling,
    j: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> f64 {
    let hits: usize = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, &[j as u64, n as u64, r as u64]));
            let window = sample_conditioned_window(f, j, n, &mut rng);
            usize::from(h.estimate(&window).clamp(1, 2) == 1)
        })
        .sum();
    hits as f64 / replicates as f64
}

/// Runs the staged construction against `h`.
pub fn build_adversary(
    h: &dyn SequenceEstimator,
    cfg: &AdversaryConfig,
) -> Result<StagePlan, ProcessError> {
    if cfg.replicates == 0 {
        return Err(ProcessError::NoReplicates);
    }
    let mut plan = StagePlan {
        plugin: h.name(),
        replicates: cfg.replicates,
        margin: cfg.margin,
        seed: cfg.seed,
        stages: Vec::new(),
        final_big_n: 1,
    };
    let mut f = Relabeling::initial();
    let mut big_n = 1usize;
    for j in 0..cfg.stages {
        let target = 1.0 - 0.5f64.powi(j as i32 + 1);
        let stage_seed = derive_seed(cfg.seed, &[0x5747, j as u64]);
        let mut search = Vec::new();
        let mut n = big_n + j + 1;
        let accepted = loop {
            if n > cfg.horizon_cap {
                let best = search
                    .iter()
                    .map(|s: &SearchStep| s.success)
                    .fold(0.0, f64::max);
                return Err(ProcessError::SearchDiverged {
                    stage: j,
                    cap: cfg.horizon_cap,
                    target,
                    best,
                    partial: Box::new(plan),
                });
            }
            let success = fooling_probability(h, &f, j, n, cfg.replicates, stage_seed);
            search.push(SearchStep { n, success });
            if success > target + cfg.margin {
                break success;
            }
            n *= 2;
        };
        let (next, next_n) = fold_stage(&f, big_n, n)?;
        plan.stages.push(Stage {
            stage: j,
            big_n,
            small_n: n,
            target,
            success: accepted,
            final_success: None,
            fold_band: (n + 1, next_n),
            search,
        });
        f = next;
        big_n = next_n;
        plan.final_big_n = big_n;
    }
    if cfg.recheck {
        for s in plan.stages.iter_mut() {
            let seed = derive_seed(cfg.seed, &[0x7265, s.stage as u64]);
            s.final_success = Some(fooling_probability(
                h,
                &f,
                s.stage,
                s.small_n,
                cfg.replicates,
                seed,
            ));
        }
    }
    Ok(plan)
}

/// `min { h(X_0^{lambda_k}) : n/2 < lambda_k < n }`, or `None` when no
/// stopping time falls in the window.
pub fn stopping_reduction<F>(
    h: F,
    stops: &[usize],
    seq: &Sequence,
    n: usize,
) -> Result<Option<usize>, ProcessError>
where
    F: Fn(&[Symbol]) -> usize,
{
    if stops.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ProcessError::StoppingTimes);
    }
    let mut best: Option<usize> = None;
    for &stop in stops.iter().filter(|&&s| 2 * s > n && s < n) {
        if stop >= seq.len() {
            return Err(ProcessError::StopBeyondData {
                stop,
                horizon: seq.horizon(),
            });
        }
        let v = h(seq.prefix(stop));
        best = Some(best.map_or(v, |b| b.min(v)));
    }
    Ok(best)
}
