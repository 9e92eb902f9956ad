//! Pack building: greedy random fill of a token budget from one
//! domain pool. Sampling is without replacement inside a pack and with
//! replacement across packs.

use rand::Rng;

use crate::error::{FloraError, Result};
use crate::types::{Domain, ShortSample};

const FIRST_DRAW_RETRIES: usize = 100;
const FILL_FAILURE_LIMIT: usize = 50;

#[derive(Debug, Clone)]
pub struct Pack {
    pub domain: Domain,
    /// Ordered pack members, cloned out of the pool.
    pub samples: Vec<ShortSample>,
    pub budget: usize,
    pub assembled_estimate: usize,
}

/// Draws members uniformly at random without intra-pack replacement,
/// accumulating cached token counts, and stops before exceeding
/// budget - overhead. `min_samples` keeps drawing past the usual stop
/// condition only in the sense that infeasibility is reported if the
/// pack ends up smaller.
pub fn build_pack(
    pool: &[ShortSample],
    domain: Domain,
    budget: usize,
    overhead: usize,
    rng: &mut impl Rng,
) -> Result<Pack> {
    if pool.is_empty() {
        return Err(FloraError::Infeasible(format!(
            "empty pool for domain {domain}"
        )));
    }
    if budget <= overhead {
        return Err(FloraError::Infeasible(format!(
            "budget {budget} does not exceed overhead {overhead}"
        )));
    }
    let cap = budget - overhead;

    // first member: bounded retries in case a draw alone busts the budget
    let mut chosen: Vec<usize> = Vec::new();
    let mut used = 0usize;
    let mut first = None;
    for _ in 0..FIRST_DRAW_RETRIES {
        let i = rng.gen_range(0..pool.len());
        if pool[i].token_count <= cap {
            first = Some(i);
            break;
        }
    }
    let Some(first) = first else {
        return Err(FloraError::Infeasible(format!(
            "no pool sample fits budget {budget} after {FIRST_DRAW_RETRIES} retries"
        )));
    };
    chosen.push(first);
    used += pool[first].token_count;

    let mut failures = 0;
    while failures < FILL_FAILURE_LIMIT && chosen.len() < pool.len() {
        let i = rng.gen_range(0..pool.len());
        if chosen.contains(&i) {
            failures += 1;
            continue;
        }
        if used + pool[i].token_count > cap {
            failures += 1;
            continue;
        }
        used += pool[i].token_count;
        chosen.push(i);
        failures = 0;
    }

    Ok(Pack {
        domain,
        samples: chosen.iter().map(|&i| pool[i].clone()).collect(),
        budget,
        assembled_estimate: used + overhead,
    })
}

/// Extends an existing pack with up to `add` further distinct members,
/// drawn uniformly from the pool. Used when the assembled text of a
/// strategy runs far below its budget (strategies whose instruction
/// carries questions but not answers render much less text than the
/// member token sum). Returns how many members were actually added.
pub fn grow_pack(pool: &[ShortSample], pack: &mut Pack, add: usize, rng: &mut impl Rng) -> usize {
    if add == 0 || pack.samples.len() >= pool.len() {
        return 0;
    }
    let mut have: std::collections::HashSet<String> =
        pack.samples.iter().map(|s| s.id.clone()).collect();
    let mut added = 0;
    let mut failures = 0;
    while added < add && failures < FILL_FAILURE_LIMIT && have.len() < pool.len() {
        let i = rng.gen_range(0..pool.len());
        if !have.insert(pool[i].id.clone()) {
            failures += 1;
            continue;
        }
        pack.samples.push(pool[i].clone());
        added += 1;
        failures = 0;
    }
    added
}
