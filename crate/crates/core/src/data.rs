//! Set-valued datasets: MSNBC session loading, synthetic uniform sets,
//! fixed set-size fitting and privacy-level assignment.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::UserRecord;
use crate::rng;

/// Page categories in the MSNBC session log.
pub const MSNBC_DOMAIN_SIZE: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<UserRecord>,
    pub domain_size: usize,
    pub set_size: usize,
    /// `w_j`: fraction of users holding item `j`.
    pub true_w: Vec<f64>,
}

impl Dataset {
    pub fn from_records(records: Vec<UserRecord>, domain_size: usize, set_size: usize) -> Self {
        let true_w = item_frequencies(&records, domain_size);
        Dataset { records, domain_size, set_size, true_w }
    }

    pub fn population(&self) -> usize {
        self.records.len()
    }

    /// Exact users per level.
    pub fn level_counts(&self, num_levels: usize) -> Vec<f64> {
        let mut counts = vec![0.0; num_levels];
        for r in &self.records {
            counts[r.level] += 1.0;
        }
        counts
    }
}

pub fn item_frequencies(records: &[UserRecord], domain_size: usize) -> Vec<f64> {
    let mut w = vec![0.0; domain_size];
    for r in records {
        for &t in &r.items {
            w[t as usize] += 1.0;
        }
    }
    let n = records.len().max(1) as f64;
    w.iter_mut().for_each(|x| *x /= n);
    w
}

/// Parses MSNBC-format sessions into deduplicated 0-based item sets.
///
/// Lines starting with `%`, blank lines, and lines with no numeric token
/// (the category-name header) are skipped. Every other line must consist
/// of integers in `1..=17`.
pub fn parse_msnbc(reader: impl BufRead, path: &Path) -> Result<Vec<Vec<u32>>> {
    let mut sessions = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if !tokens.iter().any(|t| t.parse::<i64>().is_ok()) {
            continue;
        }
        let mut items = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let malformed = |reason: String| Error::MalformedLine { path: path.to_path_buf(), line: lineno + 1, reason };
            let v: i64 = tok.parse().map_err(|_| malformed(format!("non-numeric token {tok:?}")))?;
            if !(1..=MSNBC_DOMAIN_SIZE as i64).contains(&v) {
                return Err(malformed(format!("item {v} outside 1..={MSNBC_DOMAIN_SIZE}")));
            }
            items.push((v - 1) as u32);
        }
        items.sort_unstable();
        items.dedup();
        sessions.push(items);
    }
    Ok(sessions)
}

/// Reduces a set to `set_size` items by sampling without replacement, or
/// pads it with distinct uniform items from the rest of the domain.
pub fn fit_to_set_size(items: &[u32], set_size: usize, domain_size: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut out: Vec<u32> = if items.len() > set_size {
        index::sample(rng, items.len(), set_size).into_iter().map(|i| items[i]).collect()
    } else {
        let mut complement: Vec<u32> = (0..domain_size as u32).filter(|t| !items.contains(t)).collect();
        let (picked, _) = complement.partial_shuffle(rng, set_size - items.len());
        items.iter().chain(picked.iter()).copied().collect()
    };
    out.sort_unstable();
    out
}

/// Loads `n_target` uniformly sampled MSNBC sessions, each fitted to
/// exactly `set_size` items. Ground truth is computed after fitting.
pub fn load_msnbc(path: impl AsRef<Path>, set_size: usize, n_target: usize, seed: u64) -> Result<Dataset> {
    let path = path.as_ref();
    if set_size == 0 || set_size > MSNBC_DOMAIN_SIZE {
        return Err(Error::SetSizeExceedsDomain { set_size, domain_size: MSNBC_DOMAIN_SIZE });
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let sessions = parse_msnbc(BufReader::new(file), path)?;
    if sessions.len() < n_target {
        return Err(Error::InsufficientUsers { requested: n_target, available: sessions.len() });
    }
    let mut rng = rng::stream(seed, 0);
    let mut picked = index::sample(&mut rng, sessions.len(), n_target).into_vec();
    picked.sort_unstable();
    let records = picked
        .into_iter()
        .map(|i| UserRecord {
            items: fit_to_set_size(&sessions[i], set_size, MSNBC_DOMAIN_SIZE, &mut rng),
            level: 0,
        })
        .collect();
    Ok(Dataset::from_records(records, MSNBC_DOMAIN_SIZE, set_size))
}

/// `n` users, each holding `s` distinct items drawn uniformly from `d`.
pub fn synth_uniform(domain_size: usize, set_size: usize, population: usize, seed: u64) -> Result<Dataset> {
    if set_size == 0 || set_size > domain_size {
        return Err(Error::SetSizeExceedsDomain { set_size, domain_size });
    }
    let mut rng = rng::stream(seed, 0);
    let records = (0..population)
        .map(|_| {
            let mut items: Vec<u32> = index::sample(&mut rng, domain_size, set_size).into_iter().map(|i| i as u32).collect();
            items.sort_unstable();
            UserRecord { items, level: 0 }
        })
        .collect();
    Ok(Dataset::from_records(records, domain_size, set_size))
}

/// Largest-remainder rounding of `fractions * n` to integers summing to `n`.
pub fn quotas(population: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    if fractions.is_empty() {
        return Err(Error::BadFractions("no fractions given".into()));
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::BadFractions(format!("{fractions:?} contains a negative or non-finite value")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions(format!("{fractions:?} sums to {total}, not 1")));
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f * population as f64).collect();
    let mut q: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = q.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().take(population.saturating_sub(assigned)) {
        q[k] += 1;
    }
    Ok(q)
}

/// Assigns level `k` to exactly `quota_k` users, in a seeded random order.
pub fn assign_levels(mut dataset: Dataset, fractions: &[f64], seed: u64) -> Result<Dataset> {
    let q = quotas(dataset.population(), fractions)?;
    let mut levels: Vec<usize> = q.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect();
    levels.shuffle(&mut rng::stream(seed, 1));
    for (r, l) in dataset.records.iter_mut().zip(levels) {
        r.level = l;
    }
    Ok(dataset)
}
