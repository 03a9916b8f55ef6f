//! Exact welfare maximisation for small markets.
//!
//! The adjustment variables `y` only appear in the per-band constraint, where
//! a larger `y` only loosens it. Fixing `y = ΔD` is therefore optimal and the
//! problem reduces to choosing a subset W of buyers with
//!
//! ```text
//! Σ_W (D^k - ΔD^k) <= L^k   for every band k
//! Σ_W Σ_k D^k ρ^k  <= Σ_k L^k ρ^k
//! ```
//!
//! maximising `Σ_W (b - r Σ_k D^k ρ^k)`. The search is a depth-first
//! branch-and-bound over buyers in descending equivalent price, bounded by the
//! fractional relaxation of the aggregate equivalent-spectrum constraint.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmwd::equivalent_fits;
use crate::market::{rank_buyers, BuyerId, Instance};

pub const DEFAULT_MAX_BUYERS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub optimal_welfare: f64,
    /// Winners sorted by id.
    pub optimal_winner_set: Vec<BuyerId>,
    pub feasible: bool,
    /// Search nodes visited.
    pub nodes: u64,
}

struct Item {
    id: BuyerId,
    fixed: Vec<i64>,
    weight: f64,
    value: f64,
    gain: f64,
}

struct Search<'a> {
    items: &'a [Item],
    supply: &'a [i64],
    total: f64,
    band_used: Vec<i64>,
    equiv_used: f64,
    chosen: Vec<usize>,
    best_gain: f64,
    best: Vec<usize>,
    nodes: u64,
}

fn tie_tol(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

impl Search<'_> {
    fn bound(&self, from: usize, gain: f64) -> f64 {
        let mut cap = self.total - self.equiv_used;
        let mut bound = gain;
        for item in &self.items[from..] {
            if cap <= 0.0 {
                break;
            }
            if item.weight <= cap {
                bound += item.gain;
                cap -= item.weight;
            } else {
                bound += item.gain * cap / item.weight;
                cap = 0.0;
            }
        }
        bound
    }

    fn sorted_ids(&self, set: &[usize]) -> Vec<&BuyerId> {
        let mut ids: Vec<&BuyerId> = set.iter().map(|&i| &self.items[i].id).collect();
        ids.sort();
        ids
    }

    fn offer(&mut self, gain: f64) {
        let tol = tie_tol(self.best_gain);
        let better = gain > self.best_gain + tol
            || (gain >= self.best_gain - tol
                && self.sorted_ids(&self.chosen) < self.sorted_ids(&self.best));
        if better {
            self.best_gain = gain;
            self.best = self.chosen.clone();
        }
    }

    fn descend(&mut self, idx: usize, gain: f64) {
        self.nodes += 1;
        if idx == self.items.len() {
            self.offer(gain);
            return;
        }
        if self.bound(idx, gain) < self.best_gain - tie_tol(self.best_gain) {
            return;
        }

        let item = &self.items[idx];
        let band_ok = self
            .band_used
            .iter()
            .zip(&item.fixed)
            .zip(self.supply)
            .all(|((used, f), l)| used + f <= *l);
        let equiv_ok = equivalent_fits(self.total - self.equiv_used - item.weight, self.total);
        if band_ok && equiv_ok {
            for (u, f) in self.band_used.iter_mut().zip(&item.fixed) {
                *u += f;
            }
            self.equiv_used += item.weight;
            self.chosen.push(idx);
            let item_gain = item.gain;
            self.descend(idx + 1, gain + item_gain);
            self.chosen.pop();
            let item = &self.items[idx];
            self.equiv_used -= item.weight;
            for (u, f) in self.band_used.iter_mut().zip(&item.fixed) {
                *u -= f;
            }
        }
        self.descend(idx + 1, gain);
    }
}

/// Welfare-maximising winner set; ties go to the lexicographically smallest id set.
pub fn solve_exact(instance: &Instance, max_buyers: usize) -> Result<OracleResult> {
    let m = instance.bids().len();
    if m > max_buyers {
        return Err(Error::SizeLimit {
            max: max_buyers,
            found: m,
        });
    }
    let reserve = instance.reserve();
    // buyers below reserve only lower welfare; dropping them keeps any set feasible
    let items: Vec<Item> = rank_buyers(instance)?
        .into_iter()
        .filter(|r| r.equivalent_price >= reserve)
        .map(|r| {
            let bid = &instance.bids()[r.index];
            let cost = reserve * r.equivalent_demand;
            Item {
                id: r.buyer_id,
                fixed: bid.fixed_demand().map(i64::from).collect(),
                weight: r.equivalent_demand,
                value: bid.price(),
                gain: (bid.price() - cost).max(0.0),
            }
        })
        .collect();
    let supply: Vec<i64> = instance
        .ask()
        .supply()
        .iter()
        .map(|&l| i64::from(l))
        .collect();

    let mut search = Search {
        items: &items,
        supply: &supply,
        total: instance.equivalent_supply(),
        band_used: vec![0; supply.len()],
        equiv_used: 0.0,
        chosen: Vec::new(),
        best_gain: 0.0,
        best: Vec::new(),
        nodes: 0,
    };
    search.descend(0, 0.0);

    // Recompute welfare in rank order, the same way clearing does, so that
    // equal winner sets give bit-identical welfare.
    let mut value_total = 0.0;
    let mut units_total = 0.0;
    for &i in &search.best {
        value_total += items[i].value;
        units_total += items[i].weight;
    }
    let optimal_welfare = if search.best.is_empty() {
        0.0
    } else {
        value_total - reserve * units_total
    };
    let mut optimal_winner_set: Vec<BuyerId> =
        search.best.iter().map(|&i| items[i].id.clone()).collect();
    optimal_winner_set.sort();

    Ok(OracleResult {
        optimal_welfare,
        optimal_winner_set,
        feasible: true,
        nodes: search.nodes,
    })
}

/// Whether `winners` satisfies the per-band and aggregate constraints with `y = ΔD`.
pub fn is_feasible(instance: &Instance, winners: &[BuyerId]) -> Result<bool> {
    let sem = instance.sem();
    let mut bands = vec![0i64; instance.bands()];
    let mut equiv = 0.0;
    for id in winners {
        let bid = instance
            .bid(id)
            .ok_or_else(|| Error::UnknownBuyer(id.clone()))?;
        for (u, f) in bands.iter_mut().zip(bid.fixed_demand()) {
            *u += i64::from(f);
        }
        equiv += sem.equivalent(bid.base_demand());
    }
    let total = instance.equivalent_supply();
    Ok(bands
        .iter()
        .zip(instance.ask().supply())
        .all(|(u, &l)| *u <= i64::from(l))
        && equivalent_fits(total - equiv, total))
}
