use wasm_bindgen::prelude::*;

pub mod demo;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// JSON `{eps, delta}` for the shuffled Poisson randomizer.
#[wasm_bindgen(js_name = divergenceCurve)]
pub fn divergence_curve(lambda: f64, d: usize, n: u64, m: f64, eps_max: f64, points: usize) -> Result<String, JsError> {
    js(demo::divergence_curve(lambda, d, n, m, eps_max, points))
}

/// JSON `[{m, rates, bound}]` over a log grid of blanket rates.
#[wasm_bindgen(js_name = rateProfile)]
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
) -> Result<String, JsError> {
    js(demo::rate_profile(n, d, s, levels, fractions, m_min, m_max, points))
}

/// JSON `{m, rates, estimates, truth, mse, bound}` for one run on synthetic data.
#[wasm_bindgen]
pub fn simulate(n: usize, d: usize, s: usize, levels: &str, fractions: &str, m: f64, seed: u64) -> Result<String, JsError> {
    js(demo::simulate(n, d, s, levels, fractions, m, seed))
}
