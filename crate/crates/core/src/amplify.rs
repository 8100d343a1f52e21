//! Exact numerical privacy-amplification accountant.
//!
//! A shuffled multi-message protocol is reduced to a pair of two-dimensional
//! count distributions `P` and `Q`:
//!
//! ```text
//! C  ~ Binom(B, rho)          blanket messages that land on the two hot items
//! A  ~ Binom(C, 1/2)          how those split between the two items
//! D1 ~ Bernoulli(beta p / (p - 1))
//! D2 ~ Bernoulli(beta / (p - 1 - beta p)) when D1 = 0, else 0
//! P  = (A + D1, C - A + D2)
//! Q  = (A + D2, C - A + D1)
//! ```
//!
//! with `rho = gamma * 2 beta p / ((p - 1) q)`. The hockey-stick divergence
//! `D_{e^eps}(P || Q)` upper-bounds the divergence between the shuffled outputs
//! on any pair of neighboring inputs, so a configuration is private at
//! `(eps, delta)` once that divergence is at most `delta`.
//!
//! `p = +inf` is a first-class value: then `Pr[D1 = 1] = beta`, `D2 = 0` and
//! `rho = 2 beta gamma / q`.

use serde::{Deserialize, Serialize};

use crate::binom::{self, covering_window, Window};
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Probability mass the accountant may drop from the support of `P`; it is
/// added back to every divergence so reported values stay upper bounds.
pub const TRUNCATION_TAIL: f64 = 1e-12;

/// Relative slack allowed when checking the rate invariants, absorbing the
/// rounding in `(p - 1) / (p + 1)` and `2 beta gamma / q`.
const DOMAIN_SLACK: f64 = 1e-12;

/// Index of a count-pair family `(p, beta, q, B, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifyParams {
    /// Variation ratio, `> 1`, or `f64::INFINITY`.
    pub p: f64,
    /// Total-variation parameter.
    pub beta: f64,
    /// Ratio parameter.
    pub q: f64,
    /// Number of Bernoulli blanket trials feeding `C`.
    pub blanket_trials: u64,
    /// Per-trial blanket emission probability.
    pub gamma: f64,
}

/// Maps a blanket rate `m` to `(B, gamma)` for a population of `n` users,
/// each running `ceil(m)` Bernoulli(`m / ceil(m)`) blanket trials.
///
/// `m = 0` maps to `(0, 1)`.
pub fn blanket_mapping(population: u64, m: f64) -> (u64, f64) {
    if m <= 0.0 {
        return (0, 1.0);
    }
    let trials = m.ceil();
    (population * trials as u64, m / trials)
}

impl AmplifyParams {
    /// Family for a Poisson randomizer with rate `lambda` against uniform
    /// blanket messages over `domain_size` items: `p = inf`, `beta = lambda`,
    /// `q = d lambda`.
    pub fn poisson(lambda: f64, domain_size: usize, blanket_trials: u64, gamma: f64) -> Self {
        AmplifyParams {
            p: f64::INFINITY,
            beta: lambda,
            q: domain_size as f64 * lambda,
            blanket_trials,
            gamma,
        }
    }

    /// Poisson-randomizer family for `population` users at blanket rate `m`.
    pub fn for_protocol(lambda: f64, domain_size: usize, population: u64, m: f64) -> Self {
        let (trials, gamma) = blanket_mapping(population, m);
        Self::poisson(lambda, domain_size, trials, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let AmplifyParams { p, beta, q, gamma, .. } = *self;
        if p.is_nan() || p <= 1.0 {
            return Err(Error::domain(format!("p must exceed 1, got {p}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
        }
        if p.is_finite() {
            let cap = (p - 1.0) / (p + 1.0);
            if beta > cap * (1.0 + DOMAIN_SLACK) {
                return Err(Error::domain(format!("beta = {beta} exceeds (p-1)/(p+1) = {cap} for p = {p}")));
            }
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if beta > 0.0 && !(q > 0.0 && q.is_finite()) {
            return Err(Error::domain(format!("q must be positive and finite, got {q}")));
        }
        // The rate is irrelevant when there are no blanket trials.
        let rho = self.raw_rate();
        if self.blanket_trials > 0 && !(0.0..=1.0 + DOMAIN_SLACK).contains(&rho) {
            return Err(Error::domain(format!("blanket binomial rate {rho} is outside [0, 1]")));
        }
        Ok(())
    }

    fn raw_rate(&self) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        if self.p.is_infinite() {
            2.0 * self.beta * self.gamma / self.q
        } else {
            self.gamma * 2.0 * self.beta * self.p / ((self.p - 1.0) * self.q)
        }
    }

    /// Success probability of `C`, clamped to `[0, 1]`.
    pub fn binomial_rate(&self) -> f64 {
        self.raw_rate().clamp(0.0, 1.0)
    }

    fn increments(&self) -> Increments {
        let (first, second) = if self.p.is_infinite() {
            (self.beta, 0.0)
        } else {
            (self.beta * self.p / (self.p - 1.0), self.beta / (self.p - 1.0))
        };
        Increments { first, second, neither: (1.0 - first - second).max(0.0) }
    }
}

/// Marginal probabilities of `(D1, D2) = (1, 0)`, `(0, 1)` and `(0, 0)`.
///
/// `Pr[D2 = 1] = (1 - beta p/(p-1)) * beta/(p-1-beta p) = beta/(p-1)`.
#[derive(Debug, Clone, Copy)]
struct Increments {
    first: f64,
    second: f64,
    neither: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    P,
    Q,
}

impl Family {
    pub fn other(self) -> Family {
        match self {
            Family::P => Family::Q,
            Family::Q => Family::P,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountPair {
    pub left: u64,
    pub right: u64,
}

impl CountPair {
    pub fn new(left: u64, right: u64) -> Self {
        CountPair { left, right }
    }
}

/// `Pr[(A + D1, C - A + D2) = point]` under `P`, or the role-swapped
/// `Q`, computed exactly (no truncation) from log-space binomial terms.
pub fn count_pair_pmf(params: &AmplifyParams, point: CountPair, which: Family) -> Result<f64> {
    params.validate()?;
    let (u, v) = match which {
        Family::P => (point.left, point.right),
        // Q(u, v) = P(v, u): A and C - A are exchangeable given C.
        Family::Q => (point.right, point.left),
    };
    Ok(p_family_pmf(params, u, v))
}

fn p_family_pmf(params: &AmplifyParams, u: u64, v: u64) -> f64 {
    let inc = params.increments();
    let rho = params.binomial_rate();
    let b = params.blanket_trials;
    let t = u + v;
    let half = |k: i64, n: u64| if k < 0 { 0.0 } else { binom::pmf(k as u64, n, 0.5) };

    let mut total = binom::pmf(t, b, rho) * inc.neither * half(u as i64, t);
    if t >= 1 {
        let w = binom::pmf(t - 1, b, rho);
        total += w * (inc.first * half(u as i64 - 1, t - 1) + inc.second * half(u as i64, t - 1));
    }
    total
}

/// `D_{e^eps}(P || Q)`, upper-bounded within [`TRUNCATION_TAIL`].
pub fn hockey_stick(params: &AmplifyParams, epsilon: f64) -> Result<f64> {
    hockey_stick_with_tail(params, epsilon, TRUNCATION_TAIL)
}

/// `D_{e^eps}(P || Q)` enumerated over a support carrying at least `1 - tail`
/// of the mass of `P`, plus `tail`. The result lies in `[D, D + tail]`.
pub fn hockey_stick_with_tail(params: &AmplifyParams, epsilon: f64, tail: f64) -> Result<f64> {
    hockey_stick_between(params, epsilon, tail, Family::P)
}

/// `D_{e^eps}(from || other)`. Both directions are computed on the same
/// support; by symmetry they agree.
pub fn hockey_stick_between(params: &AmplifyParams, epsilon: f64, tail: f64, from: Family) -> Result<f64> {
    params.validate()?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::domain(format!("truncation tail must lie in (0, 1), got {tail}")));
    }
    let value = truncated_divergence(params, epsilon.exp(), tail, from) + tail;
    Ok(value.min(1.0))
}

/// Totals `t = u + v` are processed in fixed-size chunks so the summation
/// order, and hence the result, does not depend on scheduling.
const TOTALS_PER_CHUNK: u64 = 64;

fn truncated_divergence(params: &AmplifyParams, scale: f64, tail: f64, from: Family) -> f64 {
    let inc = params.increments();
    let blanket = covering_window(params.blanket_trials, params.binomial_rate(), tail / 2.0, 1);
    let (c_lo, c_hi) = blanket.core;
    let t_end = c_hi + 1;

    let chunk_sum = |first: u64| -> CompensatedSum {
        let mut acc = CompensatedSum::new();
        for t in first..(first + TOTALS_PER_CHUNK).min(t_end + 1) {
            accumulate_total(&mut acc, t, &blanket, inc, scale, tail, from);
        }
        acc
    };

    let starts: Vec<u64> = (c_lo..=t_end).step_by(TOTALS_PER_CHUNK as usize).collect();
    let partials = crate::par_map(&starts, |&s| chunk_sum(s));
    let mut total = CompensatedSum::new();
    for p in partials {
        total.merge(p);
    }
    total.value()
}

/// Adds `max(0, from(u, t-u) - scale * other(u, t-u))` over the `u` window of
/// one total `t`.
///
/// Points with total `t` come from `C = t` (no increment) or `C = t - 1` (one
/// increment). With `h` the `Binom(t-1, 1/2)` pmf and `Binom(t, 1/2)` equal to
/// `(h(u) + h(u-1)) / 2`:
///
/// ```text
/// P(u) = w(t) n0 (h(u) + h(u-1))/2 + w(t-1) (f h(u-1) + s h(u))
/// Q(u) = w(t) n0 (h(u) + h(u-1))/2 + w(t-1) (f h(u)   + s h(u-1))
/// ```
fn accumulate_total(
    acc: &mut CompensatedSum,
    t: u64,
    blanket: &Window,
    inc: Increments,
    scale: f64,
    tail: f64,
    from: Family,
) {
    let w_t = blanket.get(t as i64);
    if t == 0 {
        let p = w_t * inc.neither;
        acc.add((p - scale * p).max(0.0));
        return;
    }
    let w_prev = blanket.get(t as i64 - 1);
    let half = covering_window(t - 1, 0.5, tail / 2.0, 1);
    let (a, b) = half.core;
    for u in a..=b + 1 {
        let h = half.get(u as i64);
        let h_prev = half.get(u as i64 - 1);
        let shared = w_t * inc.neither * 0.5 * (h + h_prev);
        let p = shared + w_prev * (inc.first * h_prev + inc.second * h);
        let q = shared + w_prev * (inc.first * h + inc.second * h_prev);
        let term = match from {
            Family::P => p - scale * q,
            Family::Q => q - scale * p,
        };
        if term > 0.0 {
            acc.add(term);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyCheckRequest {
    /// Level budget `E_k`.
    pub level_epsilon: f64,
    pub delta: f64,
    /// Items per user `s`; the single-item guarantee is composed over them.
    pub set_size: usize,
    pub params: AmplifyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyCheck {
    pub holds: bool,
    /// Divergence at `E_k / s`.
    pub achieved_delta: f64,
    /// `delta / (s e^{E_k})`.
    pub threshold: f64,
}

/// Per-item divergence target for a user-level `(E_k, delta)` goal over
/// `s` items: `(E_k / s, delta / (s e^{E_k}))`.
pub fn per_item_target(level_epsilon: f64, delta: f64, set_size: usize) -> (f64, f64) {
    let s = set_size as f64;
    (level_epsilon / s, delta / (s * level_epsilon.exp()))
}

/// Whether a user holding `s` items at budget `E_k` is `(E_k, delta)`-private.
///
/// Group composition turns a per-item `(eps', delta')` guarantee into
/// `(s eps', s e^{s eps'} delta')`, so the check evaluates the divergence at
/// `E_k / s` against `delta / (s e^{E_k})`.
pub fn check_privacy(req: &PrivacyCheckRequest) -> Result<PrivacyCheck> {
    if req.set_size == 0 {
        return Err(Error::domain("set size must be at least 1"));
    }
    if !(req.level_epsilon >= 0.0 && req.level_epsilon.is_finite()) {
        return Err(Error::domain(format!("level epsilon must be non-negative, got {}", req.level_epsilon)));
    }
    if !(req.delta > 0.0 && req.delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {}", req.delta)));
    }
    let (eps, threshold) = per_item_target(req.level_epsilon, req.delta, req.set_size);
    // Keep the truncation slack well below the target so it cannot decide the check.
    let tail = TRUNCATION_TAIL.min(threshold * 1e-3);
    let achieved = hockey_stick_with_tail(&req.params, eps, tail)?;
    Ok(PrivacyCheck { holds: achieved <= threshold, achieved_delta: achieved, threshold })
}

/// Asymptotic amplified epsilon `sqrt(beta (p-1) q ln(1/delta) / (p B gamma))`,
/// with `(p-1)/p = 1` at `p = inf`. A search-range heuristic only.
pub fn asymptotic_epsilon(params: &AmplifyParams, delta: f64) -> Result<f64> {
    params.validate()?;
    if params.blanket_trials == 0 {
        return Err(Error::domain("asymptotic epsilon needs at least one blanket trial"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let shrink = if params.p.is_infinite() { 1.0 } else { (params.p - 1.0) / params.p };
    let blankets = params.blanket_trials as f64 * params.gamma;
    Ok((params.beta * shrink * params.q * (1.0 / delta).ln() / blankets).sqrt())
}
