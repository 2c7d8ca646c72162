//! Maximin share for chores: the minimum, over all partitions of the chores
//! into `k` bundles, of the costliest bundle.
//!
//! [`mms_exact`] is the solver used by the harness, [`mms_bruteforce`] is a
//! naive reference kept for cross-checking, and [`lpt_partition`] produces
//! cheap witness partitions whose max bundle upper-bounds the share.

use rug::Integer;
use thiserror::Error;

use crate::model::{assigned_cost, ModelError, Partition, Transcript, Verdict};
use crate::rat::Rat;

/// Largest instance [`mms_exact`] accepts by default.
pub const DEFAULT_EXACT_CAP: usize = 20;

/// Largest number of assignments `k^m` that [`mms_bruteforce`] will enumerate.
pub const BRUTEFORCE_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MmsError {
    #[error("number of bundles must be at least 1")]
    NoBundles,
    #[error("instance too large: {m} chores exceeds the cap of {cap}")]
    TooLarge { m: usize, cap: usize },
    #[error("brute force over {k}^{m} assignments exceeds the enumeration limit")]
    EnumerationLimit { m: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmsResult {
    pub value: Rat,
    pub optimal_partition: Partition,
}

pub fn mms_exact(item_costs: &[Rat], k: usize) -> Result<MmsResult, MmsError> {
    mms_exact_with_cap(item_costs, k, DEFAULT_EXACT_CAP)
}

/// Depth-first branch and bound over items in descending cost order.
///
/// Costs are scaled by the common denominator so the search runs on integers.
/// A fresh bundle is only opened at the lowest empty position, and bundles
/// with equal load are tried once.
pub fn mms_exact_with_cap(item_costs: &[Rat], k: usize, cap: usize) -> Result<MmsResult, MmsError> {
    if k == 0 {
        return Err(MmsError::NoBundles);
    }
    let m = item_costs.len();
    if m > cap {
        return Err(MmsError::TooLarge { m, cap });
    }

    let common = item_costs.iter().fold(Integer::from(1), |acc, c| acc.lcm(c.denom()));
    let scaled: Vec<Integer> = item_costs
        .iter()
        .map(|c| c.numer() * Integer::from(&common / c.denom()))
        .collect();

    let order = descending_order(item_costs);
    let total: Integer = scaled.iter().sum();
    let largest = order.first().map(|&i| scaled[i].clone()).unwrap_or_default();
    let lower_bound = largest.max(total.div_rem_ceil(Integer::from(k)).0);

    // LPT gives the starting incumbent.
    let lpt = lpt_partition(item_costs, k);
    let mut best_assign = vec![0usize; m];
    for (b, bundle) in lpt.bundles.iter().enumerate() {
        for &i in bundle {
            best_assign[i] = b;
        }
    }
    let mut best = lpt
        .bundles
        .iter()
        .map(|b| b.iter().map(|&i| &scaled[i]).sum::<Integer>())
        .max()
        .unwrap_or_default();

    if best > lower_bound {
        let mut search = Search {
            scaled: &scaled,
            order: &order,
            lower_bound: &lower_bound,
            loads: vec![Integer::new(); k],
            assign: vec![0; m],
            best,
            best_assign,
        };
        search.dfs(0, Integer::new());
        best = search.best;
        best_assign = search.best_assign;
    }

    let mut bundles = vec![Vec::new(); k];
    for (i, &b) in best_assign.iter().enumerate() {
        bundles[b].push(i);
    }
    let value = Rat::from_parts(best, common).expect("common denominator is nonzero");
    Ok(MmsResult {
        value,
        optimal_partition: Partition::new(bundles),
    })
}

struct Search<'a> {
    scaled: &'a [Integer],
    order: &'a [usize],
    lower_bound: &'a Integer,
    loads: Vec<Integer>,
    assign: Vec<usize>,
    best: Integer,
    best_assign: Vec<usize>,
}

impl Search<'_> {
    /// Returns true once the incumbent provably cannot be improved.
    fn dfs(&mut self, depth: usize, current_max: Integer) -> bool {
        if depth == self.order.len() {
            if current_max < self.best {
                self.best = current_max;
                self.best_assign.clone_from(&self.assign);
            }
            return self.best <= *self.lower_bound;
        }
        let item = self.order[depth];
        let mut tried: Vec<Integer> = Vec::new();
        for b in 0..self.loads.len() {
            if tried.contains(&self.loads[b]) {
                continue;
            }
            tried.push(self.loads[b].clone());
            let new_load = Integer::from(&self.loads[b] + &self.scaled[item]);
            if new_load >= self.best {
                continue;
            }
            let next_max = if new_load > current_max {
                new_load.clone()
            } else {
                current_max.clone()
            };
            let previous = std::mem::replace(&mut self.loads[b], new_load);
            self.assign[item] = b;
            let done = self.dfs(depth + 1, next_max);
            self.loads[b] = previous;
            if done {
                return true;
            }
        }
        false
    }
}

/// Indices sorted by descending cost, ties broken by lower index.
fn descending_order(item_costs: &[Rat]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..item_costs.len()).collect();
    order.sort_by(|&a, &b| item_costs[b].cmp(&item_costs[a]).then(a.cmp(&b)));
    order
}

/// Minimum over all `k^m` assignments of the costliest bundle. Test oracle only.
pub fn mms_bruteforce(item_costs: &[Rat], k: usize) -> Result<Rat, MmsError> {
    if k == 0 {
        return Err(MmsError::NoBundles);
    }
    let m = item_costs.len();
    let limit_exceeded = (k as u64)
        .checked_pow(m as u32)
        .is_none_or(|count| count > BRUTEFORCE_LIMIT);
    if limit_exceeded {
        return Err(MmsError::EnumerationLimit { m, k });
    }

    let mut digits = vec![0usize; m];
    let mut best: Option<Rat> = None;
    loop {
        let mut loads = vec![Rat::zero(); k];
        for (item, &bundle) in digits.iter().enumerate() {
            loads[bundle] += &item_costs[item];
        }
        let worst = loads.into_iter().max().unwrap_or_default();
        if best.as_ref().is_none_or(|b| worst < *b) {
            best = Some(worst);
        }

        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == m {
                return Ok(best.unwrap_or_default());
            }
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Longest-processing-time greedy: items in descending cost order (lower
/// index first on ties), each into the currently lightest bundle (lowest
/// index on ties). The max bundle is at most `total / k + max item`.
///
/// Panics if `k == 0`.
pub fn lpt_partition(item_costs: &[Rat], k: usize) -> Partition {
    assert!(k >= 1, "lpt_partition needs at least one bundle");
    let mut loads = vec![Rat::zero(); k];
    let mut bundles = vec![Vec::new(); k];
    for item in descending_order(item_costs) {
        let lightest = (0..k)
            .min_by(|&a, &b| loads[a].cmp(&loads[b]).then(a.cmp(&b)))
            .unwrap_or(0);
        loads[lightest] += &item_costs[item];
        bundles[lightest].push(item);
    }
    for bundle in &mut bundles {
        bundle.sort_unstable();
    }
    Partition::new(bundles)
}

/// Cost of the costliest bundle. Any exact cover gives an upper bound on the share.
pub fn partition_max_bundle(item_costs: &[Rat], partition: &Partition) -> Result<Rat, ModelError> {
    partition.validate_cover(item_costs.len())?;
    Ok(partition
        .bundles
        .iter()
        .map(|bundle| bundle.iter().map(|&i| &item_costs[i]).sum::<Rat>())
        .max()
        .unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("transcript carries no violation certificate")]
    NoViolation,
    #[error("malformed certificate: {0}")]
    Structural(#[from] ModelError),
}

/// Recomputes a violation certificate from scratch.
///
/// `Ok(false)` means the arithmetic does not hold up; `Err` means the
/// certificate is not even well-formed.
pub fn verify_violation(transcript: &Transcript) -> Result<bool, VerifyError> {
    let Some(Verdict::Violation {
        agent,
        assigned_cost: claimed_cost,
        witness,
        mms_upper,
        ratio,
    }) = &transcript.verdict
    else {
        return Err(VerifyError::NoViolation);
    };
    let agent = transcript.agent(agent.index())?;
    if witness.bundles.len() != transcript.n {
        return Err(ModelError::BundleCount {
            got: witness.bundles.len(),
            expected: transcript.n,
        }
        .into());
    }
    let costs = transcript.costs_for(agent);
    let upper = partition_max_bundle(&costs, witness)?;
    if upper != *mms_upper {
        return Ok(false);
    }
    let actual_cost = assigned_cost(transcript, agent);
    if actual_cost != *claimed_cost {
        return Ok(false);
    }
    match actual_cost.checked_div(&upper) {
        Some(recomputed) if recomputed == *ratio => {}
        _ => return Ok(false),
    }
    Ok(actual_cost >= &transcript.threshold() * &upper)
}
