//! Log-space binomial probabilities.
//!
//! Uses Loader's saddle-point expansion so that `ln Pr[X = k]` keeps full
//! relative precision for trial counts in the hundreds of thousands, where
//! `ln n! - ln k! - ln (n-k)!` would cancel catastrophically.

use std::f64::consts::PI;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`, the Stirling series remainder.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if n <= 15.0 {
        // Small factorials are exact in f64.
        let mut fact = 1.0f64;
        let mut i = 2.0;
        while i <= n {
            fact *= i;
            i += 1.0;
        }
        return fact.ln() - 0.5 * (2.0 * PI * n).ln() - n * n.ln() + n;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation
/// when `x` is close to `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1.0;
        loop {
            ej *= v;
            let s1 = s + ej / (2.0 * j + 1.0);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1.0;
            if j > 1000.0 {
                return s;
            }
        }
    }
    x * (x / np).ln() + np - x
}

/// `ln Pr[Binom(n, p) = k]`; `-inf` outside the support.
pub fn ln_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q <= 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let (kf, nf) = (k as f64, n as f64);
    if k == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if k == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

pub fn pmf(k: u64, n: u64, p: f64) -> f64 {
    ln_pmf(k, n, p).exp()
}

/// Ratio `Pr[k+1] / Pr[k]` for `Binom(n, p)`, valid for `k < n` and `0 < p < 1`.
#[inline]
pub(crate) fn up_ratio(k: u64, n: u64, p: f64) -> f64 {
    (n - k) as f64 / (k + 1) as f64 * (p / (1.0 - p))
}

/// Ratio `Pr[k-1] / Pr[k]` for `Binom(n, p)`, valid for `k >= 1` and `0 < p < 1`.
#[inline]
pub(crate) fn down_ratio(k: u64, n: u64, p: f64) -> f64 {
    k as f64 / (n - k + 1) as f64 * ((1.0 - p) / p)
}

/// Probabilities of `Binom(n, p)` over a contiguous index window.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    /// First index held in `probs`.
    pub start: u64,
    pub probs: Vec<f64>,
    /// Index range whose complement carries at most the requested tail mass.
    /// `probs` may extend past it by the requested padding.
    pub core: (u64, u64),
}

impl Window {
    pub fn get(&self, k: i64) -> f64 {
        if k < self.start as i64 {
            return 0.0;
        }
        let i = (k - self.start as i64) as usize;
        self.probs.get(i).copied().unwrap_or(0.0)
    }

    #[cfg(test)]
    pub fn end(&self) -> u64 {
        self.start + self.probs.len() as u64 - 1
    }
}

/// Grows an index window outward from the mode of `Binom(n, p)` until the
/// mass left outside is provably at most `tail`.
///
/// The bound uses the fact that successive pmf ratios decrease monotonically
/// away from the mode, so each tail is dominated by a geometric series.
/// `pad` extra indices are filled in on both sides (clamped to the support);
/// they are computed exactly but are not counted toward the covered mass.
pub(crate) fn covering_window(n: u64, p: f64, tail: f64, pad: u64) -> Window {
    if p <= 0.0 || p >= 1.0 || n == 0 {
        let k = if p >= 1.0 { n } else { 0 };
        let lo = k.saturating_sub(pad);
        let hi = (k + pad).min(n);
        let probs = (lo..=hi).map(|j| if j == k { 1.0 } else { 0.0 }).collect();
        return Window { start: lo, probs, core: (k, k) };
    }

    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;
    let anchor = pmf(mode, n, p);
    let mut right: Vec<f64> = Vec::new(); // probs at mode+1, mode+2, ...
    let mut left: Vec<f64> = Vec::new(); // probs at mode-1, mode-2, ...
    let (mut hi, mut lo) = (mode, mode);
    let (mut p_hi, mut p_lo) = (anchor, anchor);

    let upper_bound = |hi: u64, p_hi: f64| -> f64 {
        if hi >= n {
            return 0.0;
        }
        let next = p_hi * up_ratio(hi, n, p);
        if hi + 1 >= n {
            return next;
        }
        let r = up_ratio(hi + 1, n, p);
        if r >= 1.0 {
            f64::INFINITY
        } else {
            next / (1.0 - r)
        }
    };
    let lower_bound = |lo: u64, p_lo: f64| -> f64 {
        if lo == 0 {
            return 0.0;
        }
        let next = p_lo * down_ratio(lo, n, p);
        if lo == 1 {
            return next;
        }
        let r = down_ratio(lo - 1, n, p);
        if r >= 1.0 {
            f64::INFINITY
        } else {
            next / (1.0 - r)
        }
    };

    loop {
        let ub = upper_bound(hi, p_hi);
        let lb = lower_bound(lo, p_lo);
        if ub + lb <= tail {
            break;
        }
        if ub >= lb {
            p_hi *= up_ratio(hi, n, p);
            hi += 1;
            right.push(p_hi);
        } else {
            p_lo *= down_ratio(lo, n, p);
            lo -= 1;
            left.push(p_lo);
        }
    }

    // Fair coins: keep the window mirror-symmetric so it also covers the
    // reflected family.
    if p == 0.5 {
        while lo > n - hi {
            p_lo *= down_ratio(lo, n, p);
            lo -= 1;
            left.push(p_lo);
        }
        while hi < n - lo {
            p_hi *= up_ratio(hi, n, p);
            hi += 1;
            right.push(p_hi);
        }
    }

    let core = (lo, hi);
    for _ in 0..pad {
        if hi < n {
            p_hi *= up_ratio(hi, n, p);
            hi += 1;
            right.push(p_hi);
        }
        if lo > 0 {
            p_lo *= down_ratio(lo, n, p);
            lo -= 1;
            left.push(p_lo);
        }
    }

    let mut probs = Vec::with_capacity(left.len() + right.len() + 1);
    probs.extend(left.iter().rev());
    probs.push(anchor);
    probs.extend(right);
    Window { start: lo, probs, core }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_pmf(k: u64, n: u64, p: f64) -> f64 {
        let mut c = 1.0f64;
        for i in 0..k {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn matches_direct_product_small_n() {
        for n in 0..30u64 {
            for &p in &[0.01, 0.2, 0.5, 0.77, 0.999] {
                let mut total = 0.0;
                for k in 0..=n {
                    let a = pmf(k, n, p);
                    let b = naive_pmf(k, n, p);
                    assert!((a - b).abs() <= 1e-14 + 1e-12 * b, "n={n} k={k} p={p}: {a} vs {b}");
                    total += a;
                }
                assert!((total - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn degenerate_rates() {
        assert_eq!(pmf(0, 5, 0.0), 1.0);
        assert_eq!(pmf(1, 5, 0.0), 0.0);
        assert_eq!(pmf(5, 5, 1.0), 1.0);
        assert_eq!(pmf(4, 5, 1.0), 0.0);
        assert_eq!(ln_pmf(6, 5, 0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn large_n_normalizes() {
        let (n, p) = (200_000u64, 2.0 / 17.0);
        let w = covering_window(n, p, 1e-14, 0);
        let s: f64 = w.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-11, "{s}");
        // Symmetric around the mean within a handful of indices.
        let mean = n as f64 * p;
        let mid = (w.start + w.end()) as f64 / 2.0;
        assert!((mid - mean).abs() < 20.0, "{mid} vs {mean}");
    }

    #[test]
    fn window_tail_bound_holds() {
        for &(n, p) in &[(10u64, 0.5), (57, 0.03), (1000, 0.9), (3, 0.999), (40, 1e-4)] {
            for &tail in &[1e-3, 1e-9, 1e-13] {
                let w = covering_window(n, p, tail, 0);
                let outside: f64 = (0..=n)
                    .filter(|&k| k < w.start || k > w.end())
                    .map(|k| naive_pmf(k, n, p))
                    .sum();
                assert!(outside <= tail * (1.0 + 1e-9), "n={n} p={p} tail={tail}: {outside}");
                for (i, &v) in w.probs.iter().enumerate() {
                    let k = w.start + i as u64;
                    let e = naive_pmf(k, n, p);
                    assert!((v - e).abs() <= 1e-13 + 1e-10 * e);
                }
            }
        }
    }

    #[test]
    fn fair_coin_window_is_symmetric() {
        for n in [1u64, 2, 9, 10, 333, 4000] {
            let w = covering_window(n, 0.5, 1e-12, 0);
            assert_eq!(w.core.0 + w.core.1, n, "n={n}");
        }
    }

    #[test]
    fn padding_extends_within_support() {
        let w = covering_window(4, 0.5, 1e-30, 3);
        assert_eq!(w.start, 0);
        assert_eq!(w.end(), 4);
        let w = covering_window(7, 0.0, 1e-12, 2);
        assert_eq!((w.start, w.end()), (0, 2));
        assert_eq!(w.get(0), 1.0);
        assert_eq!(w.get(1), 0.0);
        assert_eq!(w.get(-1), 0.0);
    }
}
