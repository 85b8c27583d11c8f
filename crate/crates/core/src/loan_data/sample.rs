use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::record::LoanRecord;
use super::DataError;
use crate::rng::rng_from_seed;

/// Customer-level view of a vintage: `(customer, defaulted)` in first-seen order.
pub fn customer_status(records: &[LoanRecord]) -> Vec<(u32, bool)> {
    let mut status: BTreeMap<u32, (usize, bool)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let entry = status.entry(r.customer).or_insert((i, false));
        entry.1 |= r.defaulted;
    }
    let mut out: Vec<(usize, u32, bool)> = status.into_iter().map(|(c, (first, d))| (first, c, d)).collect();
    out.sort_unstable();
    out.into_iter().map(|(_, c, d)| (c, d)).collect()
}

/// Stratified sample of `customer_count` customers, keeping all rows of each sampled customer.
///
/// Customers are stratified on whether any of their rows defaulted. The number
/// of defaulters drawn is the population share of defaulters times the sample
/// size, rounded to the nearest customer.
pub fn stratified_sample(records: &[LoanRecord], customer_count: usize, seed: u64) -> Result<Vec<LoanRecord>, DataError> {
    let customers = customer_status(records);
    if customer_count > customers.len() {
        return Err(DataError::SampleTooLarge { requested: customer_count, available: customers.len() });
    }
    if customer_count == 0 {
        return Ok(Vec::new());
    }
    let (mut defaulters, mut others): (Vec<u32>, Vec<u32>) = {
        let (d, o): (Vec<_>, Vec<_>) = customers.iter().partition(|(_, d)| *d);
        (d.into_iter().map(|(c, _)| c).collect(), o.into_iter().map(|(c, _)| c).collect())
    };
    let share = defaulters.len() as f64 / customers.len() as f64;
    let take_defaulters = ((customer_count as f64 * share).round() as usize)
        .min(defaulters.len())
        .max(customer_count.saturating_sub(others.len()));
    let take_others = customer_count - take_defaulters;

    let mut rng = rng_from_seed(seed);
    defaulters.shuffle(&mut rng);
    others.shuffle(&mut rng);
    let mut chosen = vec![false; customers.iter().map(|(c, _)| *c as usize + 1).max().unwrap_or(0)];
    for &c in defaulters[..take_defaulters].iter().chain(&others[..take_others]) {
        chosen[c as usize] = true;
    }
    Ok(records.iter().filter(|r| chosen[r.customer as usize]).cloned().collect())
}
