//! Empirical conditionals, discrepancies, and the order estimator.
//!
//! All functions here take a [`ContextIndex`] built at the support threshold
//! `n^(1-gamma)` (see [`EstimatorParams::index`]); its stored levels are then
//! exactly the support sets `S_k^n` (level `k + 1`).

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{ContextIndex, NodeId, Sequence, Symbol, Word};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("gamma must lie in (0, 1), got {0}")]
    Gamma(f64),

    #[error("beta must lie in (0, (1 - gamma)/2) = (0, {limit}), got {beta}")]
    Beta { beta: f64, limit: f64 },

    #[error("checkpoints must be strictly increasing")]
    Checkpoints,

    #[error("checkpoint {checkpoint} exceeds available horizon {horizon:?}")]
    CheckpointBeyondData {
        checkpoint: usize,
        horizon: Option<usize>,
    },
}

/// `(gamma, beta)` plus the horizons at which the estimator is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    gamma: f64,
    beta: f64,
    checkpoints: Vec<usize>,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            beta: DEFAULT_BETA,
            checkpoints: Vec::new(),
        }
    }
}

impl EstimatorParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self, EstimatorError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(EstimatorError::Gamma(gamma));
        }
        let limit = (1.0 - gamma) / 2.0;
        if !(beta > 0.0 && beta < limit) {
            return Err(EstimatorError::Beta { beta, limit });
        }
        Ok(Self {
            gamma,
            beta,
            checkpoints: Vec::new(),
        })
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<usize>) -> Result<Self, EstimatorError> {
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EstimatorError::Checkpoints);
        }
        self.checkpoints = checkpoints;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    /// `n^(1-gamma)`: words must occur strictly more often to enter `S_k^n`.
    pub fn support_threshold(&self, n: usize) -> f64 {
        (n as f64).powf(1.0 - self.gamma)
    }

    /// `n^(-beta)`: the largest discrepancy accepted at horizon `n`.
    pub fn acceptance_threshold(&self, n: usize) -> f64 {
        (n as f64).powf(-self.beta)
    }

    /// Support index of the prefix `X_0..=X_n` (`n = prefix.len() - 1`).
    pub fn index(&self, prefix: &[Symbol]) -> ContextIndex {
        ContextIndex::from_prefix(prefix, self.support_threshold(prefix.len() - 1))
    }
}

/// Horizons `ceil(1.5^t)` below `max_n`, followed by `max_n` itself.
pub fn geometric_checkpoints(max_n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut x = 1.0f64;
    loop {
        let n = x.ceil() as usize;
        if n >= max_n {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= 1.5;
    }
    out.push(max_n);
    out
}

/// `(a - 1)^+ / (b - 1)^+` with `0/0 = 0`.
#[inline]
fn truncated_ratio(num: u64, den: u64) -> f64 {
    let den = den.saturating_sub(1);
    if den == 0 {
        0.0
    } else {
        num.saturating_sub(1) as f64 / den as f64
    }
}

/// `p_n(x | z)`: successor frequency of `x` after `z`, with one occurrence
/// subtracted from numerator and denominator.
pub fn empirical_conditional(index: &ContextIndex, z: &Word, x: Symbol) -> f64 {
    let n = index.horizon();
    let k = z.len();
    let mut zx = z.symbols().to_vec();
    zx.push(x);
    let num = index.count(&Word::new(zx), k..=n);
    let den = if k == 0 {
        // t runs over [-1, n-1]
        (n + 1) as u64
    } else {
        match n.checked_sub(1) {
            Some(hi) => index.count(z, k - 1..=hi),
            None => 0,
        }
    };
    truncated_ratio(num, den)
}

/// `S_k^n`: words of length `k + 1` occurring more than `n^(1-gamma)` times.
pub fn support_set(index: &ContextIndex, k: usize) -> BTreeSet<Word> {
    index.frequent_words(k + 1, index.threshold())
}

/// `Delta_k^n` with its maximizing tuple `(z, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub k: usize,
    pub value: f64,
    pub witness: Option<(Word, Symbol)>,
}

/// Per-level scan shared by the discrepancy and shortest-word estimators.
struct Scan {
    best: f64,
    /// (level, node) of the maximizing long tuple.
    witness: Option<(usize, NodeId)>,
    /// Largest discrepancy per length-`k` context, and whether an `i = 1`
    /// tuple extends it.
    local: Vec<(f64, bool)>,
}

fn scan(index: &ContextIndex, k: usize) -> Scan {
    let contexts = index.level(k).map_or(0, |l| l.len());
    let mut out = Scan {
        best: 0.0,
        witness: None,
        local: vec![(0.0, false); contexts],
    };
    let Some(base) = index.level(k + 1) else {
        return out;
    };
    // anc[u]: the length-(k+1) suffix of node u at the current level.
    let mut anc: Vec<NodeId> = (0..base.len() as NodeId).collect();
    let mut len = k + 2;
    while let Some(level) = index.level(len) {
        let mut next = Vec::with_capacity(level.len());
        for (id, node) in level.nodes.iter().enumerate() {
            let short_x = anc[node.suffix as usize];
            next.push(short_x);
            let long = truncated_ratio(node.count, index.context_total(len - 1, node.prefix));
            let short_ctx = index.node(k + 1, short_x).prefix;
            let short = truncated_ratio(
                index.node(k + 1, short_x).count,
                index.context_total(k, short_ctx),
            );
            let d = (short - long).abs();
            if d > out.best {
                out.best = d;
                out.witness = Some((len, id as NodeId));
            }
            let slot = &mut out.local[short_ctx as usize];
            if d > slot.0 {
                slot.0 = d;
            }
            if len == k + 2 {
                slot.1 = true;
            }
        }
        anc = next;
        len += 1;
    }
    out
}

/// Largest gap between `p_n(x | z_{-k+1}^0)` and `p_n(x | z_{-k-i+1}^0)` over
/// all supported tuples; zero when `S_{k+1}^n` is empty.
pub fn empirical_discrepancy(index: &ContextIndex, k: usize) -> DiscrepancyReport {
    let s = scan(index, k);
    let witness = s.witness.map(|(len, id)| {
        let node = index.node(len, id);
        (index.word_of(len - 1, node.prefix), node.last)
    });
    DiscrepancyReport {
        k,
        value: s.best,
        witness,
    }
}

/// `chi_n`: the smallest `k < n` with `Delta_k^n <= n^(-beta)`, or `n`.
pub fn order_estimate(index: &ContextIndex, params: &EstimatorParams) -> usize {
    order_estimate_with_deltas(index, params).0
}

/// `chi_n` together with `Delta_0^n ..= Delta_{chi_n}^n`.
pub fn order_estimate_with_deltas(
    index: &ContextIndex,
    params: &EstimatorParams,
) -> (usize, Vec<f64>) {
    let n = index.horizon();
    if n == 0 {
        return (0, Vec::new());
    }
    let accept = params.acceptance_threshold(n);
    let mut deltas = Vec::new();
    for k in 0..n {
        let d = scan(index, k).best;
        deltas.push(d);
        if d <= accept {
            return (k, deltas);
        }
    }
    (n, deltas)
}

/// `chi_n` at every checkpoint, each computed on the prefix `X_0^n`.
pub fn order_trajectory(
    seq: &Sequence,
    params: &EstimatorParams,
) -> Result<Vec<(usize, usize)>, EstimatorError> {
    check_checkpoints(seq, params.checkpoints())?;
    Ok(params
        .checkpoints()
        .par_iter()
        .map(|&n| {
            let index = params.index(seq.prefix(n));
            (n, order_estimate(&index, params))
        })
        .collect())
}

pub(crate) fn check_checkpoints(
    seq: &Sequence,
    checkpoints: &[usize],
) -> Result<(), EstimatorError> {
    if let Some(&last) = checkpoints.last() {
        if seq.horizon().is_none_or(|h| last > h) {
            return Err(EstimatorError::CheckpointBeyondData {
                checkpoint: last,
                horizon: seq.horizon(),
            });
        }
    }
    Ok(())
}

/// Plug-in estimate of the shortest memory word length: the smallest `k`
/// for which some supported length-`k` context `w` has every longer
/// supported context ending in `w` agreeing with it within `n^(-beta)`.
///
/// A context qualifies only if at least one `i = 1` tuple extends it. Returns
/// `n` when nothing qualifies. Not consistent in general; it is the target
/// estimator for the adversary harness.
pub fn shortest_word_estimate(index: &ContextIndex, params: &EstimatorParams) -> usize {
    let n = index.horizon();
    if n == 0 {
        return 0;
    }
    let accept = params.acceptance_threshold(n);
    for k in 0..n {
        if index.level(k + 2).is_none() {
            break;
        }
        let s = scan(index, k);
        if s.local.iter().any(|&(d, tested)| tested && d <= accept) {
            return k;
        }
    }
    n
}

/// Per-checkpoint summary used by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub n: usize,
    pub chi: usize,
    pub threshold: f64,
    pub deltas: Vec<f64>,
    /// `|S_k^n|` for `k = 0, 1, ...` until the first empty set.
    pub support_sizes: Vec<usize>,
}

pub fn checkpoint_report(seq: &Sequence, n: usize, params: &EstimatorParams) -> CheckpointReport {
    let index = params.index(seq.prefix(n));
    let (chi, deltas) = order_estimate_with_deltas(&index, params);
    let support_sizes = index.level_sizes().into_iter().skip(1).collect();
    CheckpointReport {
        n,
        chi,
        threshold: params.acceptance_threshold(n),
        deltas,
        support_sizes,
    }
}

pub fn checkpoint_reports(
    seq: &Sequence,
    params: &EstimatorParams,
) -> Result<Vec<CheckpointReport>, EstimatorError> {
    check_checkpoints(seq, params.checkpoints())?;
    Ok(params
        .checkpoints()
        .par_iter()
        .map(|&n| checkpoint_report(seq, n, params))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> Sequence {
        Sequence::new(Word::from_digits(s).symbols().to_vec())
    }

    fn alternating(len: usize) -> Sequence {
        Sequence::new((0..len).map(|i| (i % 2) as Symbol).collect())
    }

    fn defaults() -> EstimatorParams {
        EstimatorParams::new(0.5, 0.2).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(EstimatorParams::new(0.5, 0.25).is_err());
        assert!(EstimatorParams::new(0.5, 0.0).is_err());
        assert!(EstimatorParams::new(1.0, 0.1).is_err());
        assert!(EstimatorParams::new(0.0, 0.1).is_err());
        assert!(EstimatorParams::new(0.5, 0.2499).is_ok());
        assert_eq!(
            defaults().with_checkpoints(vec![3, 3]),
            Err(EstimatorError::Checkpoints)
        );
    }

    #[test]
    fn conditional_examples() {
        let p = defaults();
        let idx = p.index(seq("0101010101").symbols());
        assert_eq!(empirical_conditional(&idx, &Word::from_digits("0"), 1), 1.0);
        assert_eq!(empirical_conditional(&idx, &Word::empty(), 1), 4.0 / 9.0);
        assert_eq!(empirical_conditional(&idx, &Word::from_digits("2"), 1), 0.0);
        let idx = p.index(seq("0010010010").symbols());
        assert_eq!(empirical_conditional(&idx, &Word::from_digits("0"), 0), 0.4);
    }

    #[test]
    fn support_examples() {
        let p = defaults();
        let idx = p.index(seq("0101010101").symbols());
        let s1: Vec<_> = support_set(&idx, 1).into_iter().collect();
        assert_eq!(s1, vec![Word::from_digits("01"), Word::from_digits("10")]);
        assert!(support_set(&idx, 4).is_empty());
        let idx = p.index(seq("1").symbols());
        assert!(support_set(&idx, 1).is_empty());
        assert!(support_set(&idx, 5).is_empty());
    }

    #[test]
    fn discrepancy_examples() {
        let p = defaults();
        let idx = p.index(seq("0101010101").symbols());
        let d0 = empirical_discrepancy(&idx, 0);
        assert_eq!(d0.value, 5.0 / 9.0);
        assert!(d0.witness.is_some());
        let d1 = empirical_discrepancy(&idx, 1);
        assert_eq!(d1.value, 0.0);
        let d9 = empirical_discrepancy(&idx, 9);
        assert_eq!(d9.value, 0.0);
        assert!(d9.witness.is_none());
    }

    #[test]
    fn order_examples() {
        let p = defaults();
        assert_eq!(order_estimate(&p.index(alternating(10).symbols()), &p), 0);
        assert_eq!(order_estimate(&p.index(alternating(100).symbols()), &p), 1);
        assert_eq!(order_estimate(&p.index(&[4]), &p), 0);
        let (_, deltas) = order_estimate_with_deltas(&p.index(alternating(100).symbols()), &p);
        assert!(deltas[0] > p.acceptance_threshold(99));
        assert_eq!(deltas[1], 0.0);
    }

    #[test]
    fn trajectory_examples() {
        let p = defaults().with_checkpoints(vec![9, 99]).unwrap();
        let s = alternating(100);
        assert_eq!(order_trajectory(&s, &p).unwrap(), vec![(9, 0), (99, 1)]);
        let empty = defaults();
        assert!(order_trajectory(&s, &empty).unwrap().is_empty());
        let far = defaults().with_checkpoints(vec![100]).unwrap();
        assert!(matches!(
            order_trajectory(&s, &far),
            Err(EstimatorError::CheckpointBeyondData { .. })
        ));
    }

    #[test]
    fn shortest_word_examples() {
        let p = defaults();
        assert_eq!(
            shortest_word_estimate(&p.index(alternating(100).symbols()), &p),
            1
        );
        assert_eq!(shortest_word_estimate(&p.index(&[0, 0]), &p), 1);
        assert_eq!(shortest_word_estimate(&p.index(&[0, 1]), &p), 1);
    }

    #[test]
    fn geometric_schedule() {
        assert_eq!(geometric_checkpoints(10), vec![1, 2, 3, 4, 6, 8, 10]);
        assert_eq!(geometric_checkpoints(1), vec![1]);
        let s = geometric_checkpoints(1_000_000);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*s.last().unwrap(), 1_000_000);
    }

    #[test]
    fn report_lists_supports() {
        let p = defaults();
        let r = checkpoint_report(&alternating(100), 99, &p);
        assert_eq!(r.chi, 1);
        assert_eq!(r.deltas.len(), 2);
        assert!(r.support_sizes.iter().all(|&s| s > 0));
    }
}
