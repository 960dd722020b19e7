//! Exact ground truth for explicit finite-alphabet order-`K` chains.
//!
//! Conditioning contexts are words, oldest symbol first. A context of length
//! `K` is encoded as the base-`A` number whose most significant digit is the
//! oldest symbol, which is also the row index of the kernel.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{Sequence, Symbol, Word};

/// Two conditionals closer than this are considered equal.
pub const CONDITIONAL_TOLERANCE: f64 = 1e-9;
const ROW_SUM_TOLERANCE: f64 = 1e-12;
const STATIONARY_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("alphabet must be nonempty")]
    EmptyAlphabet,

    #[error("order {order} with alphabet {alphabet} gives too many contexts")]
    TooLarge { order: usize, alphabet: usize },

    #[error("kernel has {got} rows, expected {expected}")]
    RowCount { expected: usize, got: usize },

    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },

    #[error("context {context} listed twice")]
    DuplicateContext { context: Word },

    #[error("chain is reducible: {classes} closed classes, no unique stationary law")]
    Reducible { classes: usize },

    #[error("stationary solve failed (residual {residual:e})")]
    Solve { residual: f64 },

    #[error("conditioning word {0} has zero probability")]
    ZeroProbability(Word),

    #[error("sample path has zero probability at position {0}")]
    ZeroProbabilityPath(usize),

    #[error(
        "sequence of length {len} is shorter than the order {order}; no suffix is a memory word"
    )]
    TooShort { len: usize, order: usize },
}

/// JSON chain description: order, alphabet size, and one row per context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub order: usize,
    pub alphabet: usize,
    pub rows: Vec<ChainRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    /// Context word, oldest symbol first; empty for an iid chain.
    pub context: Vec<Symbol>,
    pub probs: Vec<f64>,
}

/// An order-`K` kernel over `A` symbols with its stationary block law.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitChain {
    order: usize,
    alphabet: usize,
    kernel: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

fn context_count(order: usize, alphabet: usize) -> Result<usize, OracleError> {
    u32::try_from(order)
        .ok()
        .and_then(|k| alphabet.checked_pow(k))
        .filter(|&c| c <= 1 << 16)
        .ok_or(OracleError::TooLarge { order, alphabet })
}

/// Unique stationary law of the `K`-block chain induced by `kernel`.
///
/// Periodic chains are accepted (their stationary law is still unique);
/// chains with more than one closed class are rejected.
pub fn stationary_block_law(
    kernel: &[Vec<f64>],
    order: usize,
    alphabet: usize,
) -> Result<Vec<f64>, OracleError> {
    let states = context_count(order, alphabet)?;
    if order == 0 {
        return Ok(vec![1.0]);
    }
    let next = |c: usize, x: usize| (c * alphabet + x) % states;

    let mut graph = DiGraph::<(), ()>::with_capacity(states, states * alphabet);
    let nodes: Vec<_> = (0..states).map(|_| graph.add_node(())).collect();
    for c in 0..states {
        for x in 0..alphabet {
            if kernel[c][x] > 0.0 {
                graph.add_edge(nodes[c], nodes[next(c, x)], ());
            }
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut class_of = vec![0usize; states];
    for (i, scc) in sccs.iter().enumerate() {
        for v in scc {
            class_of[v.index()] = i;
        }
    }
    let closed: Vec<usize> = (0..sccs.len())
        .filter(|&i| {
            sccs[i].iter().all(|v| {
                let c = v.index();
                (0..alphabet).all(|x| kernel[c][x] <= 0.0 || class_of[next(c, x)] == i)
            })
        })
        .collect();
    if closed.len() != 1 {
        return Err(OracleError::Reducible {
            classes: closed.len(),
        });
    }

    // Solve pi (P - I) = 0, sum pi = 1 on the closed class; transient states
    // carry no mass.
    let mut members: Vec<usize> = sccs[closed[0]].iter().map(|v| v.index()).collect();
    members.sort_unstable();
    let m = members.len();
    let mut local = vec![usize::MAX; states];
    for (i, &c) in members.iter().enumerate() {
        local[c] = i;
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &c) in members.iter().enumerate() {
        for x in 0..alphabet {
            let p = kernel[c][x];
            if p > 0.0 {
                a[(local[next(c, x)], i)] += p;
            }
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or(OracleError::Solve { residual: f64::NAN })?;

    let mut pi = vec![0.0; states];
    for (i, &c) in members.iter().enumerate() {
        pi[c] = sol[i].max(0.0);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);

    let residual = stationarity_residual(&pi, kernel, order, alphabet);
    if residual > STATIONARY_RESIDUAL {
        return Err(OracleError::Solve { residual });
    }
    Ok(pi)
}

/// `max_c |(pi P)(c) - pi(c)|` for the block chain.
pub fn stationarity_residual(
    pi: &[f64],
    kernel: &[Vec<f64>],
    order: usize,
    alphabet: usize,
) -> f64 {
    if order == 0 {
        return (pi[0] - 1.0).abs();
    }
    let states = pi.len();
    let mut out = vec![0.0; states];
    for c in 0..states {
        for x in 0..alphabet {
            out[(c * alphabet + x) % states] += pi[c] * kernel[c][x];
        }
    }
    out.iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

impl ExplicitChain {
    /// Validates the kernel and solves for the stationary block law.
    pub fn new(order: usize, alphabet: usize, kernel: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        if alphabet == 0 {
            return Err(OracleError::EmptyAlphabet);
        }
        let expected = context_count(order, alphabet)?;
        if kernel.len() != expected {
            return Err(OracleError::RowCount {
                expected,
                got: kernel.len(),
            });
        }
        for (row, probs) in kernel.iter().enumerate() {
            if probs.len() != alphabet {
                return Err(OracleError::BadRow {
                    row,
                    reason: format!("{} entries, expected {alphabet}", probs.len()),
                });
            }
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(OracleError::BadRow {
                    row,
                    reason: "negative or non-finite probability".into(),
                });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(OracleError::BadRow {
                    row,
                    reason: format!("sums to {sum}"),
                });
            }
        }
        let stationary = stationary_block_law(&kernel, order, alphabet)?;
        Ok(Self {
            order,
            alphabet,
            kernel,
            stationary,
        })
    }

    pub fn from_spec(spec: &ChainSpec) -> Result<Self, OracleError> {
        if spec.alphabet == 0 {
            return Err(OracleError::EmptyAlphabet);
        }
        let expected = context_count(spec.order, spec.alphabet)?;
        if spec.rows.len() != expected {
            return Err(OracleError::RowCount {
                expected,
                got: spec.rows.len(),
            });
        }
        let mut kernel: Vec<Option<Vec<f64>>> = vec![None; expected];
        for (i, row) in spec.rows.iter().enumerate() {
            if row.context.len() != spec.order
                || row.context.iter().any(|&s| s as usize >= spec.alphabet)
            {
                return Err(OracleError::BadRow {
                    row: i,
                    reason: format!(
                        "context must be {} symbols below {}",
                        spec.order, spec.alphabet
                    ),
                });
            }
            let code = encode(&row.context, spec.alphabet);
            if kernel[code].is_some() {
                return Err(OracleError::DuplicateContext {
                    context: Word::from(row.context.as_slice()),
                });
            }
            kernel[code] = Some(row.probs.clone());
        }
        Self::new(
            spec.order,
            spec.alphabet,
            kernel
                .into_iter()
                .map(|r| r.expect("all rows present"))
                .collect(),
        )
    }

    pub fn to_spec(&self) -> ChainSpec {
        ChainSpec {
            order: self.order,
            alphabet: self.alphabet,
            rows: (0..self.kernel.len())
                .map(|c| ChainRow {
                    context: decode(c, self.order, self.alphabet),
                    probs: self.kernel[c].clone(),
                })
                .collect(),
        }
    }

    /// An iid chain with the given marginal.
    pub fn iid(probs: Vec<f64>) -> Result<Self, OracleError> {
        let a = probs.len();
        Self::new(0, a, vec![probs])
    }

    /// Declared order `K` (an upper bound on the true order).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    /// Law of `X_{-K+1}^0`, indexed by context code.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Next-symbol distribution after a length-`K` context.
    pub fn row(&self, context: &[Symbol]) -> &[f64] {
        &self.kernel[encode(context, self.alphabet)]
    }

    fn in_alphabet(&self, w: &[Symbol]) -> bool {
        w.iter().all(|&s| (s as usize) < self.alphabet)
    }

    /// Stationary probability `p(w)` of the word `w`.
    pub fn word_probability(&self, w: &[Symbol]) -> f64 {
        if !self.in_alphabet(w) {
            return 0.0;
        }
        let k = self.order;
        if w.len() <= k {
            let span = self.alphabet.pow(w.len() as u32);
            let code = encode(w, self.alphabet);
            let prefixes = self.alphabet.pow((k - w.len()) as u32);
            (0..prefixes)
                .map(|p| self.stationary[p * span + code])
                .sum()
        } else {
            let mut p = self.stationary[encode(&w[..k], self.alphabet)];
            for t in k..w.len() {
                if p == 0.0 {
                    break;
                }
                p *= self.kernel[encode(&w[t - k..t], self.alphabet)][w[t] as usize];
            }
            p
        }
    }

    /// Exact `P(X_1 = x | X_{-|w|+1}^0 = w)`.
    pub fn exact_conditional(&self, w: &Word, x: Symbol) -> Result<f64, OracleError> {
        let pw = self.word_probability(w.symbols());
        if pw <= 0.0 {
            return Err(OracleError::ZeroProbability(w.clone()));
        }
        if x as usize >= self.alphabet {
            return Ok(0.0);
        }
        Ok(self.conditional_unchecked(w.symbols(), x, pw))
    }

    fn conditional_unchecked(&self, w: &[Symbol], x: Symbol, pw: f64) -> f64 {
        let k = self.order;
        if w.len() >= k {
            self.kernel[encode(&w[w.len() - k..], self.alphabet)][x as usize]
        } else {
            let mut wx = w.to_vec();
            wx.push(x);
            self.word_probability(&wx) / pw
        }
    }

    /// All words of length `len` with positive stationary probability.
    pub fn positive_words(&self, len: usize) -> Vec<Word> {
        let total = self.alphabet.pow(len as u32);
        (0..total)
            .map(|c| decode(c, len, self.alphabet))
            .filter(|w| self.word_probability(w) > 0.0)
            .map(Word::from)
            .collect()
    }

    /// Whether the next-symbol law after `w` is unchanged by every
    /// positive-probability left extension.
    pub fn is_memory_word(&self, w: &Word) -> Result<bool, OracleError> {
        let pw = self.word_probability(w.symbols());
        if pw <= 0.0 {
            return Err(OracleError::ZeroProbability(w.clone()));
        }
        let k = self.order;
        if w.len() >= k {
            return Ok(true);
        }
        let base: Vec<f64> = (0..self.alphabet as Symbol)
            .map(|y| self.conditional_unchecked(w.symbols(), y, pw))
            .collect();
        // Extending past total length K never changes a conditional.
        for ext in 1..=k - w.len() {
            for code in 0..self.alphabet.pow(ext as u32) {
                let mut zw = decode(code, ext, self.alphabet);
                zw.extend_from_slice(w.symbols());
                let pzw = self.word_probability(&zw);
                if pzw <= 0.0 {
                    continue;
                }
                for y in 0..self.alphabet as Symbol {
                    let c = self.conditional_unchecked(&zw, y, pzw);
                    // p(z w y) > 0 iff the conditional is positive
                    if c > 0.0 && (c - base[y as usize]).abs() > CONDITIONAL_TOLERANCE {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    pub fn memory_word_report(&self) -> MemoryWordReport {
        let mut memory: Vec<Word> = Vec::new();
        for len in 0..=self.order {
            for w in self.positive_words(len) {
                if self.is_memory_word(&w).expect("positive word") {
                    memory.push(w);
                }
            }
        }
        let memory_set: BTreeSet<&Word> = memory.iter().collect();
        let minimal_words: BTreeSet<Word> = memory
            .iter()
            .filter(|w| (1..=w.len()).all(|d| !memory_set.contains(&Word::from(&w.symbols()[d..]))))
            .cloned()
            .collect();
        let longest_minimal_length = minimal_words.iter().map(Word::len).max().unwrap_or(0);
        let shortest_memory_length = memory.iter().map(Word::len).min().unwrap_or(0);
        MemoryWordReport {
            minimal_words,
            longest_minimal_length,
            shortest_memory_length,
        }
    }

    /// Exact `Delta_k`; zero for `k >= K`.
    pub fn delta_exact(&self, k: usize) -> f64 {
        let order = self.order;
        if k >= order {
            return 0.0;
        }
        let mut best = 0.0f64;
        for i in 1..=order - k {
            for z in self.positive_words(k + i) {
                let z = z.symbols();
                let pz = self.word_probability(z);
                let short = &z[i..];
                let ps = self.word_probability(short);
                for x in 0..self.alphabet as Symbol {
                    let long = self.conditional_unchecked(z, x, pz);
                    if long <= 0.0 {
                        continue;
                    }
                    let d = (self.conditional_unchecked(short, x, ps) - long).abs();
                    best = best.max(d);
                }
            }
        }
        best
    }

    /// Length of the shortest suffix of `seq` that is a memory word.
    pub fn suffix_memory_length(&self, seq: &Sequence) -> Result<usize, OracleError> {
        let s = seq.symbols();
        let k = self.order;
        let head = &s[..k.min(s.len())];
        if self.word_probability(head) <= 0.0 {
            return Err(OracleError::ZeroProbabilityPath(0));
        }
        for t in k..s.len() {
            let p = self
                .kernel
                .get(encode(&s[t - k..t], self.alphabet))
                .and_then(|row| row.get(s[t] as usize))
                .copied()
                .unwrap_or(0.0);
            if p <= 0.0 {
                return Err(OracleError::ZeroProbabilityPath(t));
            }
        }
        for len in 0..=k.min(s.len()) {
            let w = Word::from(&s[s.len() - len..]);
            if self.is_memory_word(&w)? {
                return Ok(len);
            }
        }
        Err(OracleError::TooShort {
            len: s.len(),
            order: k,
        })
    }
}

/// Minimal memory words and the two extremal lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryWordReport {
    pub minimal_words: BTreeSet<Word>,
    pub longest_minimal_length: usize,
    pub shortest_memory_length: usize,
}

pub(crate) fn encode(w: &[Symbol], alphabet: usize) -> usize {
    w.iter().fold(0, |acc, &s| acc * alphabet + s as usize)
}

pub(crate) fn decode(mut code: usize, len: usize, alphabet: usize) -> Vec<Symbol> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (code % alphabet) as Symbol;
        code /= alphabet;
    }
    out
}

/// Order-1 chain with rows (0.9, 0.1) and (0.2, 0.8).
pub fn two_state_fixture() -> ExplicitChain {
    ExplicitChain::new(1, 2, vec![vec![0.9, 0.1], vec![0.2, 0.8]]).expect("valid fixture")
}

/// Binary order-2 chain whose most recent `1` is a memory word while `0`
/// needs one more symbol: `p(1|a1) = 0.5`, `p(1|00) = 0.1`, `p(1|10) = 0.9`.
pub fn vlmc_fixture() -> ExplicitChain {
    // rows by context code: 00, 01, 10, 11
    ExplicitChain::new(
        2,
        2,
        vec![
            vec![0.9, 0.1],
            vec![0.5, 0.5],
            vec![0.1, 0.9],
            vec![0.5, 0.5],
        ],
    )
    .expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn w(s: &str) -> Word {
        Word::from_digits(s)
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_block_law(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1, 2).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);
        let pi = stationary_block_law(&[vec![0.9, 0.1], vec![0.2, 0.8]], 1, 2).unwrap();
        assert_abs_diff_eq!(pi[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(
            stationary_block_law(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1, 2),
            Err(OracleError::Reducible { classes: 2 })
        );
        // periodic but irreducible
        let pi = stationary_block_law(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1, 2).unwrap();
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn transient_states_get_no_mass() {
        // state 0 leaks into the absorbing class {1}
        let pi = stationary_block_law(&[vec![0.5, 0.5], vec![0.0, 1.0]], 1, 2).unwrap();
        assert_eq!(pi, vec![0.0, 1.0]);
    }

    #[test]
    fn kernel_validation() {
        assert!(matches!(
            ExplicitChain::new(1, 2, vec![vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(OracleError::BadRow { row: 0, .. })
        ));
        assert!(matches!(
            ExplicitChain::new(1, 2, vec![vec![1.0, 0.0]]),
            Err(OracleError::RowCount { .. })
        ));
        assert_eq!(
            ExplicitChain::new(0, 0, vec![]),
            Err(OracleError::EmptyAlphabet)
        );
    }

    #[test]
    fn conditional_examples() {
        let c = two_state_fixture();
        assert_eq!(c.exact_conditional(&w("0"), 0).unwrap(), 0.9);
        assert_abs_diff_eq!(
            c.exact_conditional(&Word::empty(), 0).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
        let v = ExplicitChain::new(1, 2, vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            v.exact_conditional(&w("00"), 1),
            Err(OracleError::ZeroProbability(_))
        ));
    }

    #[test]
    fn memory_word_examples() {
        let c = two_state_fixture();
        assert!(c.is_memory_word(&w("0")).unwrap());
        assert!(!c.is_memory_word(&Word::empty()).unwrap());
        let v = vlmc_fixture();
        assert!(v.is_memory_word(&w("1")).unwrap());
        assert!(!v.is_memory_word(&w("0")).unwrap());
        let iid = ExplicitChain::iid(vec![0.3, 0.7]).unwrap();
        assert!(iid.is_memory_word(&Word::empty()).unwrap());
    }

    #[test]
    fn report_examples() {
        let r = vlmc_fixture().memory_word_report();
        let expect: BTreeSet<Word> = [w("1"), w("00"), w("10")].into_iter().collect();
        assert_eq!(r.minimal_words, expect);
        assert_eq!(r.longest_minimal_length, 2);
        assert_eq!(r.shortest_memory_length, 1);

        let r = two_state_fixture().memory_word_report();
        assert_eq!(r.minimal_words, [w("0"), w("1")].into_iter().collect());
        assert_eq!((r.longest_minimal_length, r.shortest_memory_length), (1, 1));

        let r = ExplicitChain::iid(vec![0.5, 0.5])
            .unwrap()
            .memory_word_report();
        assert_eq!(r.minimal_words, [Word::empty()].into_iter().collect());
        assert_eq!((r.longest_minimal_length, r.shortest_memory_length), (0, 0));
    }

    #[test]
    fn delta_examples() {
        let c = two_state_fixture();
        assert_abs_diff_eq!(c.delta_exact(0), 7.0 / 15.0, epsilon = 1e-12);
        assert_eq!(c.delta_exact(1), 0.0);
        let v = vlmc_fixture();
        assert!(v.delta_exact(1) > 0.0);
        assert_eq!(v.delta_exact(2), 0.0);
    }

    #[test]
    fn suffix_memory_examples() {
        let v = vlmc_fixture();
        assert_eq!(
            v.suffix_memory_length(&Sequence::new(vec![0, 0, 1]))
                .unwrap(),
            1
        );
        assert_eq!(
            v.suffix_memory_length(&Sequence::new(vec![1, 0, 0]))
                .unwrap(),
            2
        );
        let iid = ExplicitChain::iid(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            iid.suffix_memory_length(&Sequence::new(vec![1, 0]))
                .unwrap(),
            0
        );
        let det = ExplicitChain::new(1, 2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            det.suffix_memory_length(&Sequence::new(vec![0, 0])),
            Err(OracleError::ZeroProbabilityPath(1))
        );
    }

    #[test]
    fn spec_round_trip() {
        let v = vlmc_fixture();
        let json = serde_json::to_string(&v.to_spec()).unwrap();
        let spec: ChainSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(ExplicitChain::from_spec(&spec).unwrap(), v);
    }

    #[test]
    fn spec_rejects_duplicates() {
        let mut spec = two_state_fixture().to_spec();
        spec.rows[1].context = vec![0];
        assert!(matches!(
            ExplicitChain::from_spec(&spec),
            Err(OracleError::DuplicateContext { .. })
        ));
    }

    #[test]
    fn encode_decode() {
        assert_eq!(encode(&[1, 0, 2], 3), 9 + 2);
        assert_eq!(decode(11, 3, 3), vec![1, 0, 2]);
        assert_eq!(decode(0, 0, 3), Vec::<Symbol>::new());
    }
}
