//! Median/range summaries and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Effective sample sizes up to this use the exact null distribution.
pub const EXACT_MAX_N: usize = 12;

/// Largest effective sample size the exact branch accepts when forced.
const EXACT_HARD_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianRange {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl MedianRange {
    /// `"75.7 (52.9-94.1)"`, each value rounded half away from zero.
    pub fn display(&self) -> String {
        format!("{} ({}-{})", fmt_1dp(self.median), fmt_1dp(self.min), fmt_1dp(self.max))
    }
}

/// Rounds half away from zero to one decimal place.
pub fn round_1dp(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn fmt_1dp(x: f64) -> String {
    format!("{:.1}", round_1dp(x))
}

/// Median (mean of the two central order statistics for even lengths) and
/// range.
pub fn median_range(values: &[f64]) -> Result<MedianRange> {
    if values.is_empty() {
        return Err(Error::Degenerate("median of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(MedianRange {
        median,
        min: sorted[0],
        max: sorted[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    /// Exact for `n_eff <= 12`, normal approximation above.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of positive differences `x - y`.
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub n_eff: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Two-sided paired Wilcoxon signed-rank test of `x` against `y`.
///
/// Zero differences are dropped and tied `|d|` get mid-ranks. When every
/// difference is zero the result is `p = 1`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(x, y, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(x: &[f64], y: &[f64], method: WilcoxonMethod) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Degenerate("empty paired sample".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired difference".into()));
    }
    let n = diffs.len();
    if n == 0 {
        let method = if method == WilcoxonMethod::Auto { WilcoxonMethod::Exact } else { method };
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            n_eff: 0,
            p_value: 1.0,
            method,
        });
    }

    let (ranks2, tie_groups) = doubled_midranks(&diffs);
    let w_plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let w_plus = w_plus2 as f64 / 2.0;

    let method = match method {
        WilcoxonMethod::Auto if n <= EXACT_MAX_N => WilcoxonMethod::Exact,
        WilcoxonMethod::Auto => WilcoxonMethod::Normal,
        m => m,
    };
    let p_value = match method {
        WilcoxonMethod::Exact => {
            if n > EXACT_HARD_LIMIT {
                return Err(Error::InvalidConfig(format!(
                    "exact Wilcoxon limited to n <= {EXACT_HARD_LIMIT}, got {n}"
                )));
            }
            exact_p(&ranks2, w_plus2)
        }
        _ => normal_p(n, w_plus, &tie_groups),
    };
    Ok(WilcoxonResult {
        w_plus,
        n_eff: n,
        p_value,
        method,
    })
}

/// Twice the mid-rank of each `|d|` (always an integer) and the sizes of
/// the tie groups.
fn doubled_midranks(diffs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks2 = vec![0u64; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // positions i..=j hold 1-based ranks i+1..=j+1
        let r2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks2[k] = r2;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks2, ties)
}

/// Exact two-sided p from the null distribution of the signed-rank sum,
/// obtained by counting all `2^n` sign assignments with a subset-sum table.
fn exact_p(ranks2: &[u64], w_plus2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0u128; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let all = 1u128 << ranks2.len();
    let w = w_plus2 as usize;
    let upper: u128 = counts[w..].iter().sum();
    let lower: u128 = counts[..=w].iter().sum();
    let tail = upper.min(lower);
    (2.0 * (tail as f64 / all as f64)).min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn normal_p(n: usize, w_plus: f64, tie_groups: &[usize]) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let d = w_plus - mean;
    let d = d - 0.5 * d.signum();
    let z = d.abs() / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
