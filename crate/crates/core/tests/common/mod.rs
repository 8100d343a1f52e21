//! Test oracles shared across integration targets. Nothing here calls into
//! the crate's divergence code: pmfs come from brute-force enumeration and
//! sampling.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use segdp::amplify::AmplifyParams;

pub type Table = BTreeMap<(u64, u64), f64>;

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(Pr[D1 = 1], Pr[D2 = 1], rho)` derived from the family parameters.
pub fn family_rates(params: &AmplifyParams) -> (f64, f64, f64) {
    let AmplifyParams { p, beta, q, gamma, .. } = *params;
    if beta == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if p.is_infinite() {
        (beta, 0.0, 2.0 * beta * gamma / q)
    } else {
        (beta * p / (p - 1.0), beta / (p - 1.0), gamma * 2.0 * beta * p / ((p - 1.0) * q))
    }
}

/// Full support of `P` and `Q` by summing over every `(c, a, increment)`.
pub fn enumerate(params: &AmplifyParams) -> (Table, Table) {
    let (first, second, rho) = family_rates(params);
    let neither = 1.0 - first - second;
    let b = params.blanket_trials;
    let (mut p, mut q) = (Table::new(), Table::new());
    for c in 0..=b {
        let pc = choose(b, c) * rho.powi(c as i32) * (1.0 - rho).powi((b - c) as i32);
        for a in 0..=c {
            let pa = pc * choose(c, a) / 2f64.powi(c as i32);
            for (d1, d2, w) in [(1, 0, first), (0, 1, second), (0, 0, neither)] {
                if w == 0.0 || pa == 0.0 {
                    continue;
                }
                *p.entry((a + d1, c - a + d2)).or_default() += pa * w;
                *q.entry((a + d2, c - a + d1)).or_default() += pa * w;
            }
        }
    }
    (p, q)
}

/// `sum_x max(0, P(x) - e^eps Q(x))` over the enumerated support.
pub fn enumerated_divergence(params: &AmplifyParams, epsilon: f64) -> f64 {
    let (p, q) = enumerate(params);
    let scale = epsilon.exp();
    p.iter()
        .map(|(x, &px)| (px - scale * q.get(x).copied().unwrap_or(0.0)).max(0.0))
        .sum()
}

/// One draw of `(A + D1, C - A + D2)` by explicit Bernoulli trials.
pub fn sample_p(params: &AmplifyParams, rng: &mut impl Rng) -> (u64, u64) {
    let (first, second, rho) = family_rates(params);
    let c = (0..params.blanket_trials).filter(|_| rng.random::<f64>() < rho).count() as u64;
    let a = (0..c).filter(|_| rng.random::<bool>()).count() as u64;
    let r: f64 = rng.random();
    let (d1, d2) = if r < first {
        (1, 0)
    } else if r < first + second {
        (0, 1)
    } else {
        (0, 0)
    };
    (a + d1, c - a + d2)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Writes an MSNBC-format session file with `sessions` lines: about two
/// distinct categories per session, skewed towards low category numbers.
pub fn write_msnbc_like(path: &Path, sessions: usize, seed: u64) {
    let mut rng = segdp::rng::stream(seed, 0);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    writeln!(f, "% Different categories found in input file:").unwrap();
    writeln!(f).unwrap();
    writeln!(f, "frontpage news tech local opinion on-air misc weather msn-news health living business msn-sports sports summary bbs travel").unwrap();
    writeln!(f).unwrap();
    writeln!(f, "% Sequences:").unwrap();
    writeln!(f).unwrap();
    for _ in 0..sessions {
        let len = 1 + (rng.random::<f64>().ln() / 0.5f64.ln()).floor() as usize;
        let items: Vec<String> = (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                (1 + ((17.0 * u * u) as usize).min(16)).to_string()
            })
            .collect();
        writeln!(f, "{}", items.join(" ")).unwrap();
    }
}

/// MSNBC session file: `$SEGDP_MSNBC` when set, else a generated surrogate
/// in `dir`.
pub fn msnbc_path(dir: &Path, sessions: usize) -> std::path::PathBuf {
    if let Ok(p) = std::env::var("SEGDP_MSNBC") {
        return p.into();
    }
    let path = dir.join("msnbc_like.seq");
    write_msnbc_like(&path, sessions, 0x5e55);
    path
}

/// Chi-square goodness of fit of observed counts against `expected`
/// probabilities, pooling cells whose expected count is below 5 into one.
/// Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square(observed: &BTreeMap<(u64, u64), u64>, expected: &Table, runs: u64) -> (f64, usize) {
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    let mut keys: Vec<&(u64, u64)> = expected.keys().chain(observed.keys()).collect();
    keys.sort();
    keys.dedup();
    for key in keys {
        let e = expected.get(key).copied().unwrap_or(0.0) * runs as f64;
        let o = observed.get(key).copied().unwrap_or(0) as f64;
        if e < 5.0 {
            pooled_obs += o;
            pooled_exp += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    (stat, cells - 1)
}

pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}

fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if k > n {
        return f64::NEG_INFINITY;
    }
    let ln_choose = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
    let a = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    let b = if n == k { 0.0 } else { (n - k) as f64 * (1.0 - p).ln() };
    ln_choose + a + b
}

/// Closed form of `P(u, v)` for `p = inf`, `0 < rho < 1`:
/// `(1 - beta) Bin(u+v; B, rho) Bin(u; u+v, 1/2) + beta Bin(u+v-1; B, rho) Bin(u-1; u+v-1, 1/2)`.
pub fn poisson_p_pmf(params: &AmplifyParams, u: u64, v: u64) -> f64 {
    let (beta, _, rho) = family_rates(params);
    let b = params.blanket_trials;
    let t = u + v;
    let mut out = (1.0 - beta) * (ln_binom_pmf(t, b, rho) + ln_binom_pmf(u, t, 0.5)).exp();
    if u >= 1 {
        out += beta * (ln_binom_pmf(t - 1, b, rho) + ln_binom_pmf(u - 1, t - 1, 0.5)).exp();
    }
    out
}

/// Sampler for `P` at `p = inf` and large `B`: `C` by inverse CDF over a
/// precomputed table, `A` by counting random bits.
pub struct LargePoissonSampler {
    cdf: Vec<f64>,
    beta: f64,
}

impl LargePoissonSampler {
    pub fn new(params: &AmplifyParams) -> Self {
        let (beta, _, rho) = family_rates(params);
        let mut acc = 0.0;
        let cdf = (0..=params.blanket_trials)
            .map(|c| {
                acc += ln_binom_pmf(c, params.blanket_trials, rho).exp();
                acc
            })
            .collect();
        LargePoissonSampler { cdf, beta }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (u64, u64) {
        let r: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let c = self.cdf.partition_point(|&x| x < r) as u64;
        let mut a = 0u64;
        let mut left = c;
        while left > 0 {
            let take = left.min(64);
            let bits: u64 = rng.random();
            let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
            a += (bits & mask).count_ones() as u64;
            left -= take;
        }
        let d1 = u64::from(rng.random::<f64>() < self.beta);
        (a + d1, c - a)
    }
}
