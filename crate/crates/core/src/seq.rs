//! Sample paths and exact word counting.
//!
//! A [`ContextIndex`] counts every word of the prefix `X_0..=X_n` level by
//! level. Level `l` holds the words of length `l` whose count over all end
//! positions `t in [l-1, n]` strictly exceeds the index threshold. A word of
//! length `l + 1` is only considered when its length-`l` suffix survived, which
//! is exact because a left extension never occurs more often than its suffix.
//!
//! Words are stored as nodes linked to their suffix (drop the oldest symbol)
//! and their prefix (drop the newest symbol), which is all the estimator needs
//! to look up the counts of `z`, `z x`, and their shortened contexts.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::RangeInclusive;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A letter of a countable alphabet.
pub type Symbol = u32;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: invalid symbol {token:?} (expected a nonnegative integer)")]
    Parse { line: usize, token: String },

    #[error("horizon {horizon} outside sequence of length {len}")]
    Horizon { horizon: usize, len: usize },

    #[error("word {word} does not end at position {anchor}")]
    NotAnOccurrence { word: Word, anchor: usize },
}

/// A finite sample path `X_0, ..., X_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(Vec<Symbol>);

impl Sequence {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest usable horizon `n` (the index of the last symbol).
    pub fn horizon(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    /// `X_m^n`; empty when `m > n`.
    pub fn window(&self, m: usize, n: usize) -> &[Symbol] {
        if m > n {
            &[]
        } else {
            &self.0[m..=n]
        }
    }

    /// Prefix `X_0^n`.
    pub fn prefix(&self, n: usize) -> &[Symbol] {
        &self.0[..=n]
    }

    pub fn into_inner(self) -> Vec<Symbol> {
        self.0
    }

    /// Reads whitespace separated nonnegative decimal integers.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, SeqError> {
        let mut symbols = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            for token in line.split_whitespace() {
                let s = token.parse::<Symbol>().map_err(|_| SeqError::Parse {
                    line: lineno + 1,
                    token: token.to_string(),
                })?;
                symbols.push(s);
            }
        }
        Ok(Self(symbols))
    }

    /// One symbol per line.
    pub fn write_to<W: Write>(&self, mut writer: W) -> io::Result<()> {
        for s in &self.0 {
            writeln!(writer, "{s}")?;
        }
        writer.flush()
    }
}

impl From<Vec<Symbol>> for Sequence {
    fn from(v: Vec<Symbol>) -> Self {
        Self(v)
    }
}

impl From<&[Symbol]> for Sequence {
    fn from(v: &[Symbol]) -> Self {
        Self(v.to_vec())
    }
}

/// Maps arbitrary tokens to dense symbol ids in order of first appearance.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    ids: FxHashMap<String, Symbol>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, token: &str) -> Symbol {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.names.len() as Symbol;
        self.ids.insert(token.to_string(), id);
        self.names.push(token.to_string());
        id
    }

    pub fn name(&self, id: Symbol) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A finite word, oldest symbol first. The empty word is valid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses a compact digit string such as `"0101"`, one symbol per digit.
    pub fn from_digits(s: &str) -> Self {
        Self(
            s.chars()
                .map(|c| c.to_digit(10).expect("digit word") as Symbol)
                .collect(),
        )
    }
}

impl From<&[Symbol]> for Word {
    fn from(v: &[Symbol]) -> Self {
        Self(v.to_vec())
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Self(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("\"\"");
        }
        if self.0.iter().all(|&s| s < 10) {
            for s in &self.0 {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
            write!(f, "[{}]", parts.join(","))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Index of a node within its level.
pub type NodeId = u32;

/// Id of the empty word at level 0.
pub const ROOT: NodeId = 0;
const NONE: NodeId = NodeId::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    /// Oldest symbol of the word.
    pub first: Symbol,
    /// Newest symbol of the word.
    pub last: Symbol,
    /// Id of the word without its oldest symbol, one level down.
    pub suffix: NodeId,
    /// Id of the word without its newest symbol, one level down.
    pub prefix: NodeId,
    /// Occurrences over every end position `t in [len-1, n]`.
    pub count: u64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Level {
    pub nodes: Vec<Node>,
    lookup: FxHashMap<u64, NodeId>,
    /// Node of the word ending at `n`, if it is stored.
    pub tail: Option<NodeId>,
}

#[inline]
fn key(first: Symbol, suffix: NodeId) -> u64 {
    (u64::from(first) << 32) | u64::from(suffix)
}

impl Level {
    pub fn get(&self, first: Symbol, suffix: NodeId) -> Option<NodeId> {
        self.lookup.get(&key(first, suffix)).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Exact counts of the words of `X_0..=X_n` that occur more than `threshold`
/// times, for every word length until no word qualifies.
///
/// Immutable once built; share freely across threads.
#[derive(Debug, Clone)]
pub struct ContextIndex {
    symbols: Vec<Symbol>,
    threshold: f64,
    levels: Vec<Level>,
}

impl ContextIndex {
    /// Indexes the prefix `X_0^horizon` keeping words with count `> threshold`.
    pub fn build(seq: &Sequence, horizon: usize, threshold: f64) -> Result<Self, SeqError> {
        if horizon >= seq.len() {
            return Err(SeqError::Horizon {
                horizon,
                len: seq.len(),
            });
        }
        Ok(Self::from_prefix(seq.prefix(horizon), threshold))
    }

    /// Indexes a nonempty slice `X_0..=X_n` with `n = symbols.len() - 1`.
    pub fn from_prefix(symbols: &[Symbol], threshold: f64) -> Self {
        assert!(!symbols.is_empty(), "index needs at least one symbol");
        let n = symbols.len() - 1;
        let mut levels = Vec::new();
        // Level 0: the empty word, ending at every t in [0, n]. It has no
        // tail marker since conditioning on it also uses t = -1.
        let root_count = (n + 1) as u64;
        let mut root = Level::default();
        root.nodes.push(Node {
            first: 0,
            last: 0,
            suffix: NONE,
            prefix: NONE,
            count: root_count,
        });
        let root_kept = root_count as f64 > threshold;
        levels.push(root);
        if !root_kept {
            // Nothing longer can qualify either.
            return Self {
                symbols: symbols.to_vec(),
                threshold,
                levels,
            };
        }

        // ids[t] = node at the current level of the word ending at t.
        let mut ids: Vec<NodeId> = vec![ROOT; n + 1];
        // Positions whose current-level word is stored, in increasing order.
        let mut active: Vec<usize> = (0..=n).collect();
        let mut len = 0usize;
        loop {
            len += 1;
            let mut counts: FxHashMap<u64, u64> = FxHashMap::default();
            for &t in &active {
                if t + 1 < len {
                    continue;
                }
                let first = symbols[t + 1 - len];
                *counts.entry(key(first, ids[t])).or_insert(0) += 1;
            }
            let prev = levels.last().expect("root level");
            let mut level = Level::default();
            let mut next_active = Vec::new();
            for &t in &active {
                if t + 1 < len {
                    continue;
                }
                let first = symbols[t + 1 - len];
                let suffix = ids[t];
                let k = key(first, suffix);
                let count = counts[&k];
                if count as f64 <= threshold {
                    ids[t] = NONE;
                    continue;
                }
                let id = match level.lookup.get(&k) {
                    Some(&id) => id,
                    None => {
                        let id = level.nodes.len() as NodeId;
                        let (prefix, last) = if len == 1 {
                            (ROOT, first)
                        } else {
                            let inner = prev.nodes[suffix as usize].prefix;
                            let lower = &levels[len - 1];
                            let prefix = lower
                                .get(first, inner)
                                .expect("prefix of a stored word is stored");
                            (prefix, prev.nodes[suffix as usize].last)
                        };
                        level.nodes.push(Node {
                            first,
                            last,
                            suffix,
                            prefix,
                            count,
                        });
                        level.lookup.insert(k, id);
                        id
                    }
                };
                ids[t] = id;
                next_active.push(t);
            }
            if level.nodes.is_empty() {
                break;
            }
            if next_active.last() == Some(&n) {
                level.tail = Some(ids[n]);
            }
            levels.push(level);
            active = next_active;
        }

        Self {
            symbols: symbols.to_vec(),
            threshold,
            levels,
        }
    }

    /// The horizon `n`.
    pub fn horizon(&self) -> usize {
        self.symbols.len() - 1
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Longest stored word length.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Number of stored words of each length, starting with the empty word.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Level::len).collect()
    }

    pub(crate) fn level(&self, len: usize) -> Option<&Level> {
        self.levels.get(len)
    }

    pub(crate) fn node(&self, len: usize, id: NodeId) -> &Node {
        &self.levels[len].nodes[id as usize]
    }

    /// Node id of a stored word.
    pub(crate) fn lookup(&self, word: &[Symbol]) -> Option<NodeId> {
        let mut id = ROOT;
        for (i, &s) in word.iter().rev().enumerate() {
            id = self.levels.get(i + 1)?.get(s, id)?;
        }
        Some(id)
    }

    /// Reassembles the word of a stored node.
    pub(crate) fn word_of(&self, len: usize, id: NodeId) -> Word {
        let mut out = Vec::with_capacity(len);
        let (mut l, mut cur) = (len, id);
        while l > 0 {
            let node = self.node(l, cur);
            out.push(node.first);
            cur = node.suffix;
            l -= 1;
        }
        Word(out)
    }

    /// Whether the stored word is the suffix `X_{n-len+1}^n`.
    pub(crate) fn is_tail(&self, len: usize, id: NodeId) -> bool {
        self.levels[len].tail == Some(id)
    }

    /// Occurrences of a stored context followed by some symbol, i.e. end
    /// positions `t in [len-1, n-1]`. The empty context also counts `t = -1`.
    pub(crate) fn context_total(&self, len: usize, id: NodeId) -> u64 {
        let count = self.node(len, id).count;
        if len == 0 {
            count
        } else {
            count - u64::from(self.is_tail(len, id))
        }
    }

    /// Number of end positions `t` in `range` with `X_{t-|w|+1}^t = w`.
    pub fn count(&self, word: &Word, range: RangeInclusive<usize>) -> u64 {
        let n = self.horizon();
        let len = word.len();
        let lo = (*range.start()).max(len.saturating_sub(1));
        let hi = (*range.end()).min(n);
        if lo > hi {
            return 0;
        }
        if len == 0 {
            return (hi - lo + 1) as u64;
        }
        if lo + 1 == len && hi == n {
            if let Some(id) = self.lookup(word.symbols()) {
                return self.node(len, id).count;
            }
        }
        let w = word.symbols();
        (lo..=hi)
            .filter(|&t| &self.symbols[t + 1 - len..=t] == w)
            .count() as u64
    }

    /// Successive end positions of `word` after (or before) the occurrence
    /// ending at `anchor`, nearest first.
    pub fn occurrence_times(
        &self,
        word: &Word,
        anchor: usize,
        direction: Direction,
    ) -> Result<Vec<usize>, SeqError> {
        let len = word.len();
        let n = self.horizon();
        let w = word.symbols();
        let ends_at = |t: usize| t + 1 >= len && &self.symbols[t + 1 - len..=t] == w;
        if anchor > n || !ends_at(anchor) {
            return Err(SeqError::NotAnOccurrence {
                word: word.clone(),
                anchor,
            });
        }
        Ok(match direction {
            Direction::Forward => (anchor + 1..=n).filter(|&t| ends_at(t)).collect(),
            Direction::Backward => (0..anchor).rev().filter(|&t| ends_at(t)).collect(),
        })
    }

    /// Words of length `len` occurring more than `threshold` times over
    /// `t in [len-1, n]`.
    pub fn frequent_words(&self, len: usize, threshold: f64) -> BTreeSet<Word> {
        if len > self.symbols.len() {
            return BTreeSet::new();
        }
        if threshold < self.threshold {
            return Self::from_prefix(&self.symbols, threshold).frequent_words(len, threshold);
        }
        let Some(level) = self.levels.get(len) else {
            return BTreeSet::new();
        };
        (0..level.len() as NodeId)
            .filter(|&id| level.nodes[id as usize].count as f64 > threshold)
            .map(|id| self.word_of(len, id))
            .collect()
    }
}
