//! Initialization-time balanced sampling: hand out the budget one slot at a
//! time, cycling over predicates in descending frequency order and skipping
//! predicates whose availability is exhausted; then draw that many pool
//! instances per predicate at random.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DatasetPartition;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetAllocation {
    pub per_predicate: BTreeMap<String, usize>,
    pub total_budget: usize,
}

impl BudgetAllocation {
    pub fn allocated(&self) -> usize {
        self.per_predicate.values().sum()
    }
}

/// Visit order: descending availability, ties broken by name.
pub fn visit_order(availability: &BTreeMap<String, usize>) -> Vec<&str> {
    let mut order: Vec<(&str, usize)> = availability.iter().map(|(p, n)| (p.as_str(), *n)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order.into_iter().map(|(p, _)| p).collect()
}

/// Closed form of the cyclic allocation. After `level` full cycles every
/// predicate holds `min(N_p, level)`; the partial cycle that follows grants
/// one extra slot to the first predicates (in visit order) that still have
/// availability.
pub fn allocate_round_robin(availability: &BTreeMap<String, usize>, budget: usize) -> BudgetAllocation {
    let order = visit_order(availability);
    let total: usize = availability.values().sum();
    let mut per_predicate: BTreeMap<String, usize> =
        availability.keys().map(|p| (p.clone(), 0)).collect();

    if budget >= total {
        per_predicate.clone_from(availability);
        return BudgetAllocation {
            per_predicate,
            total_budget: budget,
        };
    }

    let filled = |level: usize| -> usize { availability.values().map(|n| (*n).min(level)).sum() };
    // Largest level whose full cycles fit in the budget.
    let (mut lo, mut hi) = (0usize, availability.values().copied().max().unwrap_or(0));
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if filled(mid) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let level = lo;
    let mut remaining = budget - filled(level);
    for p in order {
        let n = availability[p];
        let mut grant = n.min(level);
        if remaining > 0 && n > level {
            grant += 1;
            remaining -= 1;
        }
        per_predicate.insert(p.to_string(), grant);
    }
    BudgetAllocation {
        per_predicate,
        total_budget: budget,
    }
}

/// Draws the allocated number of pool ids per predicate and moves them to
/// train. Each predicate gets its own random stream, so one predicate's
/// allocation never perturbs another's draw.
pub fn draw(
    partition: &DatasetPartition,
    allocation: &BudgetAllocation,
    seed: u64,
) -> Result<(Vec<String>, DatasetPartition)> {
    let mut selected = Vec::new();
    for (predicate, &count) in &allocation.per_predicate {
        if count == 0 {
            continue;
        }
        let mut ids: Vec<&String> = partition.pool_ids_for(predicate).collect();
        if count > ids.len() {
            return Err(Error::OverAllocation {
                predicate: predicate.clone(),
                requested: count,
                available: ids.len(),
            });
        }
        let mut rng = seed::rng(seed, &format!("{}/{predicate}", seed::BALANCED));
        let (picked, _) = ids.partial_shuffle(&mut rng, count);
        let mut picked: Vec<String> = picked.iter().map(|s| (*s).clone()).collect();
        picked.sort();
        selected.extend(picked);
    }
    let next = partition.with_moved_to_train(&selected)?;
    Ok((selected, next))
}
