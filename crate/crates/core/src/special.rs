//! Log-factorials and windowed probability rows for binomial and
//! hypergeometric laws.
//!
//! Rows are produced by anchoring at the mode and walking outwards with
//! exact ratio recurrences until the terms drop below
//! [`ROW_CUTOFF`] times the peak. Both laws are log-concave, so the neglected
//! mass is at most `support * ROW_CUTOFF` and rows are renormalised to sum to
//! one.

use std::sync::OnceLock;

/// Relative cutoff below which row terms are dropped.
pub const ROW_CUTOFF: f64 = 1e-22;

const TABLE_LEN: usize = 4096;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`. Tabulated below 4096, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        return table()[n as usize];
    }
    let x = n as f64 + 1.0;
    // ln Gamma(x) with three correction terms; error < 1e-17 relative for x > 4096
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `i * ln(p)` with the convention `0 * ln(0) = 0`.
#[inline]
pub fn xlogy(i: u64, p: f64) -> f64 {
    if i == 0 {
        0.0
    } else {
        i as f64 * p.ln()
    }
}

/// A contiguous block of probabilities starting at `first`.
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub first: u64,
    pub probs: Vec<f64>,
}

impl Row {
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.first + i as u64, p))
    }

    pub fn point(at: u64) -> Self {
        Row { first: at, probs: vec![1.0] }
    }

    fn fill_from_mode(
        &mut self,
        lo: u64,
        hi: u64,
        mode: u64,
        ratio_up: impl Fn(u64) -> f64,
    ) {
        // ratio_up(j) = P(j + 1) / P(j)
        self.probs.clear();
        let peak = 1.0;
        let mut below = Vec::new();
        let mut v = peak;
        let mut j = mode;
        while j > lo {
            let r = ratio_up(j - 1);
            if r <= 0.0 {
                break;
            }
            v /= r;
            if v < ROW_CUTOFF {
                break;
            }
            below.push(v);
            j -= 1;
        }
        self.first = j;
        self.probs.extend(below.iter().rev());
        self.probs.push(peak);
        let mut v = peak;
        let mut j = mode;
        while j < hi {
            v *= ratio_up(j);
            if v < ROW_CUTOFF {
                break;
            }
            self.probs.push(v);
            j += 1;
        }
        let total: f64 = self.probs.iter().sum();
        let inv = 1.0 / total;
        for p in &mut self.probs {
            *p *= inv;
        }
    }

    /// Binomial(m, p) row.
    pub fn binomial(&mut self, m: u64, p: f64) {
        if p <= 0.0 || m == 0 {
            *self = Row::point(0);
            return;
        }
        if p >= 1.0 {
            *self = Row::point(m);
            return;
        }
        let mode = (((m + 1) as f64) * p).floor().min(m as f64) as u64;
        let odds = p / (1.0 - p);
        self.fill_from_mode(0, m, mode, |j| (m - j) as f64 / (j + 1) as f64 * odds);
    }

    /// Poisson(lambda) row.
    pub fn poisson(&mut self, lambda: f64) {
        if lambda <= 0.0 {
            *self = Row::point(0);
            return;
        }
        let mode = lambda.floor() as u64;
        self.fill_from_mode(0, u64::MAX, mode, |j| lambda / (j + 1) as f64);
    }

    /// Hypergeometric row: `draws` balls from a population of `total`
    /// containing `marked` marked balls; counts marked balls drawn.
    pub fn hypergeometric(&mut self, total: u64, marked: u64, draws: u64) {
        debug_assert!(marked <= total && draws <= total);
        let lo = draws.saturating_sub(total - marked);
        let hi = draws.min(marked);
        if lo == hi {
            *self = Row::point(lo);
            return;
        }
        let mode = (((draws + 1) as f64 * (marked + 1) as f64) / (total + 2) as f64).floor() as u64;
        let mode = mode.clamp(lo, hi);
        let rest = total - marked;
        self.fill_from_mode(lo, hi, mode, |j| {
            ((marked - j) as f64 * (draws - j) as f64)
                / ((j + 1) as f64 * (rest + j + 1 - draws) as f64)
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_and_stirling_meet() {
        // ln(4096!) two ways
        let direct: f64 = (1..=4096u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(4096) - direct).abs() < 1e-8);
        let direct: f64 = (1..=5000u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(5000) - direct).abs() / direct < 1e-13);
    }

    #[test]
    fn binomial_row_matches_closed_form() {
        let mut row = Row::default();
        row.binomial(10, 0.3);
        assert_eq!(row.first, 0);
        for (j, p) in row.iter() {
            let exact = ln_choose(10, j).exp() * 0.3f64.powi(j as i32) * 0.7f64.powi(10 - j as i32);
            assert!((p - exact).abs() < 1e-15, "j={j}");
        }
    }

    #[test]
    fn hypergeometric_row_enumeration() {
        // n=4, 2 marked, draw 2: P(1) = 4/6
        let mut row = Row::default();
        row.hypergeometric(4, 2, 2);
        let probs: Vec<(u64, f64)> = row.iter().collect();
        assert_eq!(probs.len(), 3);
        assert!((probs[1].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((probs[0].1 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_row_mean_and_variance() {
        let mut row = Row::default();
        row.poisson(37.5);
        let mean: f64 = row.iter().map(|(j, p)| j as f64 * p).sum();
        let var: f64 = row.iter().map(|(j, p)| (j as f64 - mean).powi(2) * p).sum();
        assert!((mean - 37.5).abs() < 1e-10 && (var - 37.5).abs() < 1e-9);
        let p3 = row.probs[(3 - row.first) as usize];
        let exact = (-37.5f64 + 3.0 * 37.5f64.ln() - ln_factorial(3)).exp();
        assert!((p3 - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn wide_rows_are_trimmed_and_normalised() {
        let mut row = Row::default();
        row.binomial(100_000, 0.5);
        assert!(row.probs.len() < 3300);
        let s: f64 = row.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-13);
        let mean: f64 = row.iter().map(|(j, p)| j as f64 * p).sum();
        assert!((mean - 50_000.0).abs() < 1e-6);
    }
}
