//! Literal, unpruned evaluation of the empirical quantities. Every count is a
//! direct scan over the stated index range; nothing is shared with the
//! library's level-wise index.

use std::collections::HashMap;

/// `p_n(x | z)` straight from the definition, `t in [k-1, n-1]`.
#[allow(clippy::int_plus_one)]
pub fn conditional(seq: &[u32], z: &[u32], x: u32) -> f64 {
    let n = seq.len() as i64 - 1;
    let k = z.len() as i64;
    let mut zx = z.to_vec();
    zx.push(x);
    let (mut num, mut den) = (0u64, 0u64);
    let mut t = k - 1;
    while t <= n - 1 {
        let start = (t - k + 1) as usize;
        let end = (t + 1) as usize;
        if seq[start..=end] == zx[..] {
            num += 1;
        }
        if seq[start..end] == *z {
            den += 1;
        }
        t += 1;
    }
    let num = num.saturating_sub(1);
    let den = den.saturating_sub(1);
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// All words of length `len` with their counts over end positions `[len-1, n]`.
pub fn window_counts(seq: &[u32], len: usize) -> HashMap<Vec<u32>, u64> {
    let mut out = HashMap::new();
    if len == 0 || len > seq.len() {
        return out;
    }
    for w in seq.windows(len) {
        *out.entry(w.to_vec()).or_insert(0) += 1;
    }
    out
}

/// `S_{len-1}^n` for every word length `len`, computed once per sequence.
pub struct Supports {
    by_len: Vec<Vec<Vec<u32>>>,
}

impl Supports {
    pub fn new(seq: &[u32], gamma: f64) -> Self {
        let n = seq.len() - 1;
        let tau = (n as f64).powf(1.0 - gamma);
        let mut by_len = vec![Vec::new()];
        for len in 1..=seq.len() + 1 {
            let mut words: Vec<Vec<u32>> = window_counts(seq, len)
                .into_iter()
                .filter(|&(_, c)| c as f64 > tau)
                .map(|(w, _)| w)
                .collect();
            words.sort();
            by_len.push(words);
        }
        Self { by_len }
    }

    pub fn support(&self, k: usize) -> &[Vec<u32>] {
        self.by_len.get(k + 1).map_or(&[], |v| v.as_slice())
    }
}

/// `Delta_k^n` with the maximum over every `1 <= i <= n`.
pub fn discrepancy(seq: &[u32], supports: &Supports, k: usize) -> f64 {
    let n = seq.len() - 1;
    let mut best = 0.0f64;
    for i in 1..=n {
        for u in supports.support(k + i) {
            let z = &u[..k + i];
            let x = u[k + i];
            let short = &z[i..];
            let d = (conditional(seq, short, x) - conditional(seq, z, x)).abs();
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// `chi_n` by scanning every `k < n`.
pub fn chi(seq: &[u32], gamma: f64, beta: f64) -> usize {
    let n = seq.len() - 1;
    if n == 0 {
        return 0;
    }
    let supports = Supports::new(seq, gamma);
    let accept = (n as f64).powf(-beta);
    (0..n)
        .find(|&k| discrepancy(seq, &supports, k) <= accept)
        .unwrap_or(n)
}
