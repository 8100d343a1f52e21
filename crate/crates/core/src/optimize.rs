//! Protocol parameter selection.
//!
//! For a fixed blanket rate `m` the MSE bound
//! `(n m + s sum_k n_k lambda_k) / (sum_k n_k lambda_k)^2` decreases in every
//! `lambda_k`, so each level takes the largest rate its privacy constraint
//! admits. The blanket rate itself is picked by a log-spaced grid search
//! between the rates at which the loosest and the strictest level first
//! reach `lambda = 1`.

use serde::{Deserialize, Serialize};

use crate::amplify::{check_privacy, AmplifyParams, PrivacyCheck, PrivacyCheckRequest};
use crate::error::{Error, Result};

/// Additive resolution of the per-level rate bisection.
pub const RATE_RESOLUTION: f64 = 1.0 / (1u64 << 40) as f64;
pub const DEFAULT_GRID_POINTS: usize = 32;
/// Largest blanket rate `min_blanket_rate` will try.
pub const BLANKET_RATE_CAP: f64 = 64.0;
/// Lower end of the blanket-rate grid when the loosest level needs almost
/// no blankets.
pub const BLANKET_RATE_FLOOR: f64 = 1e-3;
/// Relative tolerance of `min_blanket_rate`.
pub const BLANKET_RATE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedConfig {
    /// Level budgets `E_1 <= ... <= E_K`.
    pub levels: Vec<f64>,
    /// Observed users per level; may be noisy, hence real-valued.
    pub level_counts: Vec<f64>,
    pub delta: f64,
    pub domain_size: usize,
    pub set_size: usize,
    pub population: u64,
}

impl SegmentedConfig {
    /// Single-level configuration with every user at budget `epsilon`.
    pub fn uniform(epsilon: f64, population: u64, delta: f64, domain_size: usize, set_size: usize) -> Self {
        SegmentedConfig {
            levels: vec![epsilon],
            level_counts: vec![population as f64],
            delta,
            domain_size,
            set_size,
            population,
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::domain("at least one privacy level is required"));
        }
        if self.levels.len() != self.level_counts.len() {
            return Err(Error::domain(format!(
                "{} levels but {} level counts",
                self.levels.len(),
                self.level_counts.len()
            )));
        }
        if self.levels.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::domain("level budgets must be positive and finite"));
        }
        if self.levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("level budgets must be non-decreasing"));
        }
        if self.level_counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::domain("level counts must be non-negative"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.domain_size < 2 {
            return Err(Error::domain("domain size must be at least 2"));
        }
        if self.set_size == 0 || self.set_size > self.domain_size {
            return Err(Error::SetSizeExceedsDomain { set_size: self.set_size, domain_size: self.domain_size });
        }
        if self.population == 0 {
            return Err(Error::domain("population must be positive"));
        }
        Ok(())
    }

    /// Privacy check for a level-`level` user at rate `lambda` and blanket rate `m`.
    pub fn level_request(&self, level: usize, lambda: f64, m: f64) -> PrivacyCheckRequest {
        PrivacyCheckRequest {
            level_epsilon: self.levels[level],
            delta: self.delta,
            set_size: self.set_size,
            params: AmplifyParams::for_protocol(lambda, self.domain_size, self.population, m),
        }
    }

    fn holds(&self, level: usize, lambda: f64, m: f64) -> Result<bool> {
        if lambda <= 0.0 {
            return Ok(true);
        }
        Ok(check_privacy(&self.level_request(level, lambda, m))?.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub blanket_rate: f64,
    pub poisson_rates: Vec<f64>,
    pub mse_bound: f64,
}

impl ProtocolParams {
    /// Re-runs the accountant for every level.
    pub fn audit(&self, config: &SegmentedConfig) -> Result<Vec<PrivacyCheck>> {
        (0..config.num_levels())
            .map(|k| {
                let lambda = self.poisson_rates[k];
                if lambda <= 0.0 {
                    let (_, threshold) =
                        crate::amplify::per_item_target(config.levels[k], config.delta, config.set_size);
                    return Ok(PrivacyCheck { holds: true, achieved_delta: 0.0, threshold });
                }
                check_privacy(&config.level_request(k, lambda, self.blanket_rate))
            })
            .collect()
    }
}

/// `(n m + s sum n_k lambda_k) / (sum n_k lambda_k)^2`.
pub fn mse_bound(config: &SegmentedConfig, m: f64, rates: &[f64]) -> Result<f64> {
    if rates.len() != config.level_counts.len() {
        return Err(Error::domain(format!("{} rates for {} levels", rates.len(), config.level_counts.len())));
    }
    let signal: f64 = config.level_counts.iter().zip(rates).map(|(n, l)| n * l).sum();
    if signal <= 0.0 {
        return Err(Error::UndefinedObjective);
    }
    let n = config.population as f64;
    let s = config.set_size as f64;
    Ok((n * m + s * signal) / (signal * signal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSearch {
    pub rate: f64,
    /// False when even the smallest searched rate violates the constraint;
    /// `rate` is then 0.
    pub feasible: bool,
}

/// Largest `lambda` in `[0, 1]` (to within [`RATE_RESOLUTION`]) at which a
/// level-`level` user stays private with blanket rate `m`.
pub fn max_feasible_rate(config: &SegmentedConfig, level: usize, m: f64) -> Result<RateSearch> {
    config.validate()?;
    if level >= config.num_levels() {
        return Err(Error::domain(format!("level {level} out of range")));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("blanket rate must be non-negative, got {m}")));
    }
    if config.holds(level, 1.0, m)? {
        return Ok(RateSearch { rate: 1.0, feasible: true });
    }
    let (mut lo, mut hi) = (RATE_RESOLUTION, 1.0);
    if !config.holds(level, lo, m)? {
        return Ok(RateSearch { rate: 0.0, feasible: false });
    }
    while hi - lo > RATE_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if config.holds(level, mid, m)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RateSearch { rate: lo, feasible: true })
}

/// Smallest blanket rate at which level `level` can use `lambda = 1`.
pub fn min_blanket_rate(config: &SegmentedConfig, level: usize) -> Result<f64> {
    min_blanket_rate_capped(config, level, BLANKET_RATE_CAP)
}

pub fn min_blanket_rate_capped(config: &SegmentedConfig, level: usize, cap: f64) -> Result<f64> {
    config.validate()?;
    if level >= config.num_levels() {
        return Err(Error::domain(format!("level {level} out of range")));
    }
    // Doubling search for a feasible upper end.
    let mut lo = 0.0;
    let mut hi = 1.0 / 64.0;
    while !config.holds(level, 1.0, hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            if config.holds(level, 1.0, cap)? {
                hi = cap;
                break;
            }
            return Err(Error::InfeasibleLevel { level, cap });
        }
    }
    if lo == 0.0 && config.holds(level, 1.0, 0.0)? {
        return Ok(0.0);
    }
    while hi - lo > BLANKET_RATE_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if config.holds(level, 1.0, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub m: f64,
    pub rates: Vec<f64>,
    /// `None` when every level is infeasible at this `m`.
    pub mse_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    pub params: ProtocolParams,
    /// Blanket rate at which the loosest level reaches `lambda = 1`.
    pub loosest_saturation: f64,
    /// Blanket rate at which the strictest level reaches `lambda = 1`.
    pub strictest_saturation: f64,
    pub grid: Vec<GridPoint>,
}

impl Optimization {
    /// Whether the chosen `m` sits on the lower or upper end of the grid.
    pub fn at_boundary(&self) -> Option<&'static str> {
        let m = self.params.blanket_rate;
        match (self.grid.first(), self.grid.last()) {
            (Some(first), _) if first.m == m => Some("lower"),
            (_, Some(last)) if last.m == m && self.grid.len() > 1 => Some("upper"),
            _ => None,
        }
    }
}

/// Per-level maximal rates and the resulting bound at a fixed `m`.
pub fn rates_at(config: &SegmentedConfig, m: f64) -> Result<GridPoint> {
    let levels: Vec<usize> = (0..config.num_levels()).collect();
    let searches = crate::par_map(&levels, |&k| max_feasible_rate(config, k, m));
    let rates = searches.into_iter().map(|r| r.map(|r| r.rate)).collect::<Result<Vec<_>>>()?;
    let mse_bound = match mse_bound(config, m, &rates) {
        Ok(v) => Some(v),
        Err(Error::UndefinedObjective) => None,
        Err(e) => return Err(e),
    };
    Ok(GridPoint { m, rates, mse_bound })
}

pub fn optimize_parameters(config: &SegmentedConfig, grid_points: usize, m_override: Option<f64>) -> Result<ProtocolParams> {
    if let Some(m) = m_override {
        config.validate()?;
        let point = rates_at(config, m)?;
        let mse_bound = point.mse_bound.ok_or(Error::UndefinedObjective)?;
        return Ok(ProtocolParams { blanket_rate: m, poisson_rates: point.rates, mse_bound });
    }
    Ok(optimize_with_trace(config, grid_points)?.params)
}

/// Grid search over `m` in `[max(m_K, floor), m_1]`, returning every point tried.
pub fn optimize_with_trace(config: &SegmentedConfig, grid_points: usize) -> Result<Optimization> {
    config.validate()?;
    if grid_points < 2 {
        return Err(Error::domain("grid search needs at least 2 points"));
    }
    let strictest = min_blanket_rate(config, 0)?;
    let loosest = min_blanket_rate(config, config.num_levels() - 1)?;
    let hi = strictest.max(loosest).max(BLANKET_RATE_FLOOR);
    let lo = strictest.min(loosest).max(BLANKET_RATE_FLOOR).min(hi);

    let ms = log_grid(lo, hi, grid_points);
    let grid = crate::par_map(&ms, |&m| rates_at(config, m)).into_iter().collect::<Result<Vec<_>>>()?;

    let best = grid
        .iter()
        .filter_map(|g| g.mse_bound.map(|b| (g, b)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::UndefinedObjective)?;
    let params = ProtocolParams { blanket_rate: best.0.m, poisson_rates: best.0.rates.clone(), mse_bound: best.1 };
    Ok(Optimization { params, loosest_saturation: loosest, strictest_saturation: strictest, grid })
}

/// `points` log-spaced values from `lo` to `hi` inclusive (deduplicated when
/// `lo == hi`).
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if lo >= hi || points < 2 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msnbc_like(n: u64) -> SegmentedConfig {
        let n_f = n as f64;
        SegmentedConfig {
            levels: vec![0.5, 1.0, 2.0],
            level_counts: vec![0.25 * n_f, 0.5 * n_f, 0.25 * n_f],
            delta: 0.01 / n_f,
            domain_size: 17,
            set_size: 4,
            population: n,
        }
    }

    #[test]
    fn bound_examples() {
        let cfg = SegmentedConfig::uniform(1.0, 100, 1e-6, 10, 1);
        assert!((mse_bound(&cfg, 1.0, &[0.5]).unwrap() - 0.06).abs() < 1e-15);
        assert!((mse_bound(&cfg, 0.0, &[1.0]).unwrap() - 0.01).abs() < 1e-15);
        assert!(mse_bound(&cfg, 1.0, &[0.25]).unwrap() > mse_bound(&cfg, 1.0, &[0.5]).unwrap());
        assert!(matches!(mse_bound(&cfg, 1.0, &[0.0]), Err(Error::UndefinedObjective)));
    }

    #[test]
    fn rates_increase_with_budget() {
        let cfg = msnbc_like(2000);
        let rates: Vec<f64> = (0..3).map(|k| max_feasible_rate(&cfg, k, 1.0).unwrap().rate).collect();
        assert!(rates[0] <= rates[1] && rates[1] <= rates[2], "{rates:?}");
        assert!(rates[0] > 0.0);
    }

    #[test]
    fn bisection_brackets_the_boundary() {
        let cfg = msnbc_like(2000);
        for k in 0..3 {
            let r = max_feasible_rate(&cfg, k, 0.7).unwrap();
            assert!(r.feasible);
            assert!(cfg.holds(k, r.rate, 0.7).unwrap());
            if r.rate < 1.0 {
                assert!(!cfg.holds(k, r.rate + 2.0 * RATE_RESOLUTION, 0.7).unwrap());
            }
        }
    }

    #[test]
    fn saturated_level_returns_one() {
        let cfg = SegmentedConfig::uniform(2.0, 2000, 1e-5, 17, 1);
        assert_eq!(max_feasible_rate(&cfg, 0, 5.0).unwrap().rate, 1.0);
    }

    #[test]
    fn saturation_rates_order_and_scale() {
        let cfg = msnbc_like(2000);
        let m1 = min_blanket_rate(&cfg, 0).unwrap();
        let m3 = min_blanket_rate(&cfg, 2).unwrap();
        assert!(m3 <= m1, "{m3} > {m1}");
        assert!(cfg.holds(0, 1.0, m1).unwrap());
        assert!(!cfg.holds(0, 1.0, m1 * (1.0 - 2.0 * BLANKET_RATE_TOLERANCE)).unwrap());
    }

    #[test]
    fn infeasible_cap_is_reported() {
        let cfg = SegmentedConfig::uniform(0.05, 50, 1e-9, 17, 8);
        assert!(matches!(min_blanket_rate_capped(&cfg, 0, 2.0), Err(Error::InfeasibleLevel { level: 0, .. })));
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = log_grid(0.1, 10.0, 3);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert_eq!(g[2], 10.0);
        assert_eq!(log_grid(2.0, 2.0, 5), vec![2.0]);
    }

    #[test]
    fn override_fixes_m() {
        let cfg = msnbc_like(1000);
        let p = optimize_parameters(&cfg, 8, Some(1.5)).unwrap();
        assert_eq!(p.blanket_rate, 1.5);
        assert_eq!(p.poisson_rates.len(), 3);
        assert!(p.audit(&cfg).unwrap().iter().all(|c| c.holds));
    }
}
