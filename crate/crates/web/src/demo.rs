//! Plain-Rust bodies of the exported functions, so they run natively too.

use serde::Serialize;

use segdp::amplify::{hockey_stick, per_item_target, AmplifyParams};
use segdp::data::{assign_levels, quotas, synth_uniform};
use segdp::optimize::{log_grid, optimize_parameters, rates_at, SegmentedConfig, DEFAULT_GRID_POINTS};
use segdp::protocol::run_protocol;

const MAX_POINTS: usize = 200;

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

fn check_points(points: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must be in 2..={MAX_POINTS}"))
    }
}

#[derive(Serialize)]
struct Curve {
    eps: Vec<f64>,
    delta: Vec<f64>,
}

pub fn divergence_curve(lambda: f64, d: usize, n: u64, m: f64, eps_max: f64, points: usize) -> Result<String, String> {
    check_points(points)?;
    if eps_max.is_nan() || eps_max <= 0.0 {
        return Err("eps_max must be positive".into());
    }
    let params = AmplifyParams::for_protocol(lambda, d, n, m);
    let eps: Vec<f64> = (0..points).map(|i| eps_max * i as f64 / (points - 1) as f64).collect();
    let delta = eps.iter().map(|&e| hockey_stick(&params, e)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&Curve { eps, delta }).unwrap())
}

fn config(n: u64, d: usize, s: usize, levels: &str, fractions: &str) -> Result<SegmentedConfig, String> {
    let levels = parse_list(levels)?;
    let fractions = parse_list(fractions)?;
    if levels.len() != fractions.len() {
        return Err("one fraction per level".into());
    }
    let counts = quotas(n as usize, &fractions).map_err(|e| e.to_string())?;
    let config = SegmentedConfig {
        levels,
        level_counts: counts.into_iter().map(|c| c as f64).collect(),
        delta: 0.01 / n as f64,
        domain_size: d,
        set_size: s,
        population: n,
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

#[derive(Serialize)]
struct ProfilePoint {
    m: f64,
    rates: Vec<f64>,
    bound: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn rate_profile(
    n: u64,
    d: usize,
    s: usize,
    levels: &str,
    fractions: &str,
    m_min: f64,
    m_max: f64,
    points: usize,
) -> Result<String, String> {
    check_points(points)?;
    if !(m_min > 0.0 && m_max > m_min) {
        return Err("need 0 < m_min < m_max".into());
    }
    let cfg = config(n, d, s, levels, fractions)?;
    let profile = log_grid(m_min, m_max, points)
        .into_iter()
        .map(|m| {
            rates_at(&cfg, m)
                .map(|p| ProfilePoint { m, rates: p.rates, bound: p.mse_bound })
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(serde_json::to_string(&profile).unwrap())
}

#[derive(Serialize)]
struct Simulation {
    m: f64,
    rates: Vec<f64>,
    /// Per-item threshold on the divergence implied by each level.
    thresholds: Vec<f64>,
    estimates: Vec<f64>,
    truth: Vec<f64>,
    mse: f64,
    bound: f64,
}

/// `m <= 0` lets the optimizer choose.
pub fn simulate(n: usize, d: usize, s: usize, levels: &str, fractions: &str, m: f64, seed: u64) -> Result<String, String> {
    let err = |e: segdp::Error| e.to_string();
    let cfg = config(n as u64, d, s, levels, fractions)?;
    let fr = parse_list(fractions)?;
    let ds = assign_levels(synth_uniform(d, s, n, seed).map_err(err)?, &fr, seed).map_err(err)?;
    let m_override = (m > 0.0).then_some(m);
    let params = optimize_parameters(&cfg, DEFAULT_GRID_POINTS, m_override).map_err(err)?;
    let result = run_protocol(&ds.records, &cfg, &params, seed).map_err(err)?;
    let thresholds = cfg.levels.iter().map(|&e| per_item_target(e, cfg.delta, s).1).collect();
    let sim = Simulation {
        m: params.blanket_rate,
        rates: params.poisson_rates.clone(),
        thresholds,
        mse: result.squared_error(&ds.true_w),
        estimates: result.estimates,
        truth: ds.true_w,
        bound: params.mse_bound,
    };
    Ok(serde_json::to_string(&sim).unwrap())
}
