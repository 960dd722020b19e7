//! Hoeffding's inequality and the tail bound on `P(chi_n > K)`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),

    #[error("need at least one variable")]
    NoVariables,

    #[error("{got} ranges given for {n} variables")]
    RangeCount { n: usize, got: usize },

    #[error("range ({0}, {1}) has a > b")]
    InvertedRange(f64, f64),

    #[error("every range is degenerate (a = b)")]
    Degenerate,
}

/// Ranges `[a_i, b_i]` of the summands.
#[derive(Debug, Clone, PartialEq)]
pub enum Ranges {
    /// One range for every variable.
    Shared(f64, f64),
    PerVariable(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingInput {
    pub n: usize,
    pub ranges: Ranges,
    pub epsilon: f64,
}

impl HoeffdingInput {
    pub fn shared(n: usize, a: f64, b: f64, epsilon: f64) -> Self {
        Self {
            n,
            ranges: Ranges::Shared(a, b),
            epsilon,
        }
    }
}

/// `2 exp(-2 n eps^2 / ((1/n) sum (b_i - a_i)^2))`, unclamped.
pub fn hoeffding_bound(input: &HoeffdingInput) -> Result<f64, BoundsError> {
    let n = input.n;
    if input.epsilon.is_nan() || input.epsilon <= 0.0 {
        return Err(BoundsError::Epsilon(input.epsilon));
    }
    if n == 0 {
        return Err(BoundsError::NoVariables);
    }
    let check = |a: f64, b: f64| {
        if a > b {
            Err(BoundsError::InvertedRange(a, b))
        } else {
            Ok((b - a) * (b - a))
        }
    };
    let mean_sq = match &input.ranges {
        Ranges::Shared(a, b) => check(*a, *b)?,
        Ranges::PerVariable(r) => {
            if r.len() != n {
                return Err(BoundsError::RangeCount { n, got: r.len() });
            }
            let mut total = 0.0;
            for &(a, b) in r {
                total += check(a, b)?;
            }
            total / n as f64
        }
    };
    if mean_sq == 0.0 {
        return Err(BoundsError::Degenerate);
    }
    let n = n as f64;
    Ok(2.0 * (-2.0 * n * input.epsilon * input.epsilon / mean_sq).exp())
}

/// Half-width `delta` with `2 exp(-2 R delta^2) = alpha` for a mean of `R`
/// indicators.
pub fn hoeffding_margin(replicates: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * replicates as f64)).sqrt()
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `sum_{h >= start} h x^h` for `0 <= x < 1`, in closed form
/// `x^H (H - (H - 1) x) / (1 - x)^2`.
pub fn weighted_geometric_tail(start: u64, x: f64) -> f64 {
    let h = start as f64;
    x.powf(h) * (h - (h - 1.0) * x) / ((1.0 - x) * (1.0 - x))
}

/// `4 n^3 sum_{h >= floor(n^(1-gamma))} h exp(-0.5 n^(-2 beta) h)`, the tail
/// bound on `P(chi_n > K)` for an order-`K` chain. Unclamped.
pub fn chi_error_bound(n: usize, gamma: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let start = nf.powf(1.0 - gamma).floor();
    let a = 0.5 * nf.powf(-2.0 * beta);
    // x = e^-a, 1 - x = -expm1(-a)
    let one_minus_x = -(-a).exp_m1();
    let x = (-a).exp();
    let tail = (-a * start).exp() * (start - (start - 1.0) * x) / (one_minus_x * one_minus_x);
    4.0 * nf.powi(3) * tail
}
