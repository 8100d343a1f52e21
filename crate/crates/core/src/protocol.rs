//! In-process simulation of the segmented multi-message shuffle protocol.
//!
//! 1. Users' level choices are shuffled and tallied into a level histogram.
//! 2. The server picks `m` and `lambda_1..lambda_K` (see [`crate::optimize`]).
//! 3. Each user reports each of their items with probability `lambda_k` and
//!    runs `ceil(m)` blanket trials, each emitting a uniform item with
//!    probability `m / ceil(m)`.
//! 4. All messages are shuffled together and counted per item; the server
//!    debiases the counts.
//!
//! Items are 0-based indices into a domain of size `d`; levels are 0-based.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::amplify::CountPair;
use crate::error::{Error, Result};
use crate::optimize::{ProtocolParams, SegmentedConfig};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    /// Distinct items held by the user.
    pub items: Vec<u32>,
    pub level: usize,
}

impl UserRecord {
    pub fn new(mut items: Vec<u32>, level: usize) -> Result<Self> {
        items.sort_unstable();
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain(format!("duplicate items in user record {items:?}")));
        }
        Ok(UserRecord { items, level })
    }
}

/// Order-free view of the shuffled message bag: occurrences per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageMultiset {
    pub counts: Vec<u64>,
}

impl MessageMultiset {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimates: Vec<f64>,
    pub raw_counts: Vec<u64>,
    /// `sum_k n_k lambda_k`.
    pub denominator: f64,
    /// Expected blanket occurrences per item, `n m / d`.
    pub blanket_expectation: f64,
}

impl EstimateResult {
    /// Squared error `sum_j (w_hat_j - w_j)^2`.
    pub fn squared_error(&self, truth: &[f64]) -> f64 {
        squared_error(&self.estimates, truth)
    }
}

pub fn squared_error(estimates: &[f64], truth: &[f64]) -> f64 {
    estimates.iter().zip(truth).map(|(e, w)| (e - w) * (e - w)).sum()
}

/// Level histogram from a shuffled bag of level indices.
pub fn aggregate_levels(records: &[UserRecord], num_levels: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::domain("cannot aggregate levels of an empty population"));
    }
    let mut bag: Vec<usize> = records.iter().map(|r| r.level).collect();
    if let Some(bad) = bag.iter().find(|&&l| l >= num_levels) {
        return Err(Error::domain(format!("level index {bad} out of range for {num_levels} levels")));
    }
    bag.shuffle(rng);
    let mut hist = vec![0.0; num_levels];
    for level in bag {
        hist[level] += 1.0;
    }
    Ok(hist)
}

/// One user's messages: Poisson-sampled items followed by blanket items.
pub fn randomize_user(record: &UserRecord, params: &ProtocolParams, domain_size: usize, rng: &mut impl Rng) -> Vec<u32> {
    let lambda = params.poisson_rates[record.level];
    let m = params.blanket_rate;
    let mut out = Vec::with_capacity(record.items.len() + m.ceil() as usize);
    for &item in &record.items {
        // Strict comparison: lambda = 0 never reports, lambda = 1 always does.
        if rng.random::<f64>() < lambda {
            out.push(item);
        }
    }
    if m > 0.0 {
        let trials = m.ceil();
        let gamma = m / trials;
        for _ in 0..trials as u64 {
            if rng.random::<f64>() < gamma {
                out.push(rng.random_range(0..domain_size as u32));
            }
        }
    }
    out
}

/// Uniformly shuffles the union of all bags and tallies it per item.
pub fn shuffle_and_count(bags: &[Vec<u32>], domain_size: usize, rng: &mut impl Rng) -> MessageMultiset {
    let mut all: Vec<u32> = bags.iter().flatten().copied().collect();
    all.shuffle(rng);
    let mut counts = vec![0u64; domain_size];
    for item in all {
        counts[item as usize] += 1;
    }
    MessageMultiset { counts }
}

/// Debiased frequencies `(C_j - n m / d) / sum_k n_k lambda_k`, unclipped.
pub fn estimate(
    msgs: &MessageMultiset,
    histogram: &[f64],
    params: &ProtocolParams,
    config: &SegmentedConfig,
) -> Result<EstimateResult> {
    if histogram.len() != params.poisson_rates.len() {
        return Err(Error::domain("histogram and rate vector lengths differ"));
    }
    let denominator: f64 = histogram.iter().zip(&params.poisson_rates).map(|(n, l)| n * l).sum();
    if denominator <= 0.0 {
        return Err(Error::UndefinedEstimator);
    }
    let blanket_expectation = config.population as f64 * params.blanket_rate / config.domain_size as f64;
    let estimates = msgs.counts.iter().map(|&c| (c as f64 - blanket_expectation) / denominator).collect();
    Ok(EstimateResult { estimates, raw_counts: msgs.counts.clone(), denominator, blanket_expectation })
}

/// Message tally of one protocol run; deterministic given `seed`.
pub fn collect_messages(records: &[UserRecord], params: &ProtocolParams, domain_size: usize, seed: u64) -> MessageMultiset {
    let indexed: Vec<(usize, &UserRecord)> = records.iter().enumerate().collect();
    let bags = crate::par_map(&indexed, |&(i, r)| {
        let mut user_rng: StreamRng = rng::stream(seed, i as u64);
        randomize_user(r, params, domain_size, &mut user_rng)
    });
    shuffle_and_count(&bags, domain_size, &mut rng::stream(seed, rng::MESSAGE_SHUFFLE_STREAM))
}

/// Level aggregation, randomization, shuffling and estimation end to end.
pub fn run_protocol(
    records: &[UserRecord],
    config: &SegmentedConfig,
    params: &ProtocolParams,
    seed: u64,
) -> Result<EstimateResult> {
    check_dimensions(records, config, params)?;
    let histogram = aggregate_levels(records, config.num_levels(), &mut rng::stream(seed, rng::LEVEL_SHUFFLE_STREAM))?;
    let msgs = collect_messages(records, params, config.domain_size, seed);
    estimate(&msgs, &histogram, params, config)
}

fn check_dimensions(records: &[UserRecord], config: &SegmentedConfig, params: &ProtocolParams) -> Result<()> {
    if records.len() as u64 != config.population {
        return Err(Error::domain(format!(
            "config population {} but {} records",
            config.population,
            records.len()
        )));
    }
    if params.poisson_rates.len() != config.num_levels() {
        return Err(Error::domain("one Poisson rate per level is required"));
    }
    for r in records {
        if r.level >= config.num_levels() {
            return Err(Error::domain(format!("user level {} out of range", r.level)));
        }
        if let Some(&bad) = r.items.iter().find(|&&i| i as usize >= config.domain_size) {
            return Err(Error::domain(format!("item {bad} outside domain of size {}", config.domain_size)));
        }
    }
    Ok(())
}

/// Neighboring datasets on which the projected counts of the two hot items
/// follow the accountant's `P` (for `x`) and `Q` (for `x_prime`) exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorstCasePair {
    pub x: Vec<UserRecord>,
    pub x_prime: Vec<UserRecord>,
    pub victim: usize,
    /// The victim holds the first item in `x` and the second in `x_prime`.
    pub hot_items: (u32, u32),
    /// Non-victim holders of each hot item. Zero whenever `d >= 3`; with
    /// `d = 2` every other user must hold a hot item, and the projection is
    /// exact only when their reports are deterministic (`lambda = 1`).
    pub baseline: (u64, u64),
}

impl WorstCasePair {
    /// `(C_{j0}, C_{j1})` with the non-victim baseline removed.
    pub fn project(&self, msgs: &MessageMultiset) -> CountPair {
        let (j0, j1) = self.hot_items;
        CountPair::new(
            msgs.counts[j0 as usize].saturating_sub(self.baseline.0),
            msgs.counts[j1 as usize].saturating_sub(self.baseline.1),
        )
    }
}

/// Builds the single-item worst case: the victim switches between two items
/// that no other user holds. Everyone is placed at level 0.
pub fn build_worstcase_pair(domain_size: usize, population: usize, set_size: usize, victim: usize) -> Result<WorstCasePair> {
    if domain_size < 2 {
        return Err(Error::UnsupportedWitness(format!("domain size {domain_size} < 2")));
    }
    if set_size != 1 {
        return Err(Error::UnsupportedWitness(format!("set size {set_size} != 1")));
    }
    if victim >= population {
        return Err(Error::UnsupportedWitness(format!("victim {victim} outside population {population}")));
    }
    let (j0, j1) = (0u32, 1u32);
    let cold = (domain_size - 2) as u32;
    let mut x = Vec::with_capacity(population);
    let mut baseline = (0, 0);
    for i in 0..population {
        let item = if i == victim {
            j0
        } else if cold > 0 {
            2 + (i as u32 % cold)
        } else {
            baseline.0 += 1;
            j0
        };
        x.push(UserRecord { items: vec![item], level: 0 });
    }
    let mut x_prime = x.clone();
    x_prime[victim].items = vec![j1];
    Ok(WorstCasePair { x, x_prime, victim, hot_items: (j0, j1), baseline })
}
