//! Greedy matching winner determination.
//!
//! Buyers are visited in descending equivalent price. Each candidate is
//! charged its fixed part `D - ΔD` against the per-band residual and its full
//! equivalent demand against the aggregate equivalent residual. The adjustable
//! part `ΔD` is pre-set to its maximum for every buyer, so it is served from
//! whatever equivalent spectrum is left after all fixed parts are placed.
//!
//! Winners pay a uniform per-unit price times their equivalent demand: the
//! equivalent price of the first buyer ranked after the last winner, or the
//! reserve when that buyer is below reserve or does not exist.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::benchmark::MechanismId;
use crate::error::{Error, Result};
use crate::market::{rank_buyers, BuyerId, Instance, RankedBuyer, SemCoefficients, REL_TOL};

/// Residual allocations smaller than this (in equivalent units) count as placed.
pub const ALLOCATION_TOL: f64 = 1e-6;

/// What to do when a candidate does not fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopPolicy {
    /// Stop at the first candidate that does not fit.
    #[default]
    Break,
    /// Reject the candidate and keep scanning.
    Skip,
}

impl std::str::FromStr for StopPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "break" => Ok(StopPolicy::Break),
            "skip" => Ok(StopPolicy::Skip),
            other => Err(Error::Config(format!("unknown stop policy '{other}'"))),
        }
    }
}

/// Bookkeeping after a greedy run.
#[derive(Clone, Debug, PartialEq)]
pub struct GmwdState {
    /// Equivalent spectrum left after committed winners.
    pub equivalent_remaining: f64,
    /// Per-band channels left after the fixed parts of committed winners.
    pub actual_remaining: Vec<f64>,
    /// Winners in rank order.
    pub winners: Vec<BuyerId>,
    /// Winner flag per entry of `Instance::bids`.
    pub won: Vec<bool>,
    /// Adjustment used per winner; always the full adjustable range.
    pub adjustment: BTreeMap<BuyerId, Vec<u32>>,
    /// The full descending order over all buyers.
    pub ranking: Vec<RankedBuyer>,
    /// Number of leading ranked buyers at or above the reserve.
    pub candidates: usize,
    pub policy: StopPolicy,
}

impl GmwdState {
    /// Ranking entries of the winners, in rank order.
    pub fn winner_entries(&self) -> impl Iterator<Item = &RankedBuyer> {
        self.ranking.iter().filter(|r| self.won[r.index])
    }

    /// The buyer whose equivalent price sets the clearing price: the first
    /// buyer ranked below the last winner. Under `Break` this is rank N+1.
    pub fn price_setter(&self) -> Option<&RankedBuyer> {
        let last_winner_pos = self.ranking.iter().rposition(|r| self.won[r.index])?;
        self.ranking.get(last_winner_pos + 1)
    }
}

pub(crate) fn equivalent_fits(remaining: f64, total: f64) -> bool {
    remaining >= -REL_TOL * total.abs().max(1.0)
}

/// Runs the greedy winner determination.
pub fn run_gmwd(instance: &Instance, policy: StopPolicy) -> Result<GmwdState> {
    let ranking = rank_buyers(instance)?;
    let reserve = instance.reserve();
    let total_equivalent = instance.equivalent_supply();

    let mut equivalent_remaining = total_equivalent;
    let mut actual_remaining: Vec<f64> = instance
        .ask()
        .supply()
        .iter()
        .map(|&l| f64::from(l))
        .collect();
    let mut won = vec![false; instance.bids().len()];
    let mut winners = Vec::new();
    let mut adjustment = BTreeMap::new();

    // ranking is sorted, so the reserve filter keeps a prefix
    let candidates = ranking
        .iter()
        .take_while(|r| r.equivalent_price >= reserve)
        .count();

    for entry in &ranking[..candidates] {
        let bid = &instance.bids()[entry.index];
        let tentative_bands: Vec<f64> = actual_remaining
            .iter()
            .zip(bid.fixed_demand())
            .map(|(rem, fixed)| rem - f64::from(fixed))
            .collect();
        let tentative_equivalent = equivalent_remaining - entry.equivalent_demand;

        let fits = tentative_bands.iter().all(|&r| r >= 0.0)
            && equivalent_fits(tentative_equivalent, total_equivalent);
        if !fits {
            match policy {
                StopPolicy::Break => break,
                StopPolicy::Skip => continue,
            }
        }
        actual_remaining = tentative_bands;
        equivalent_remaining = tentative_equivalent;
        won[entry.index] = true;
        winners.push(entry.buyer_id.clone());
        adjustment.insert(entry.buyer_id.clone(), bid.adjust_range().to_vec());
    }

    Ok(GmwdState {
        equivalent_remaining,
        actual_remaining,
        winners,
        won,
        adjustment,
        ranking,
        candidates,
        policy,
    })
}

fn check_state(instance: &Instance, state: &GmwdState) -> Result<()> {
    if state.won.len() != instance.bids().len() || state.ranking.len() != instance.bids().len() {
        return Err(Error::OutcomeMismatch(format!(
            "state covers {} buyers, instance has {}",
            state.won.len(),
            instance.bids().len()
        )));
    }
    for entry in &state.ranking {
        let bid = &instance.bids()[entry.index];
        if bid.buyer_id() != &entry.buyer_id {
            return Err(Error::OutcomeMismatch(format!(
                "ranked buyer {} does not match bid {}",
                entry.buyer_id,
                bid.buyer_id()
            )));
        }
    }
    Ok(())
}

/// Per-unit clearing price for the winners of `state`.
pub fn clearing_unit_price(instance: &Instance, state: &GmwdState) -> f64 {
    let reserve = instance.reserve();
    match state.price_setter() {
        Some(next) if next.equivalent_price >= reserve => next.equivalent_price,
        _ => reserve,
    }
}

/// Critical-value payments for the winners of `state`.
pub fn determine_payments(
    instance: &Instance,
    state: &GmwdState,
) -> Result<BTreeMap<BuyerId, f64>> {
    check_state(instance, state)?;
    let unit_price = clearing_unit_price(instance, state);
    Ok(state
        .winner_entries()
        .map(|w| (w.buyer_id.clone(), unit_price * w.equivalent_demand))
        .collect())
}

/// Serves up to `need` equivalent units from `residual`, richest band first.
/// Returns the per-band channels granted and the equivalent units left unplaced.
pub(crate) fn fill_descending(
    residual: &mut [f64],
    sem: &SemCoefficients,
    order: &[usize],
    mut need: f64,
) -> (Vec<f64>, f64) {
    let rho = sem.as_slice();
    let mut granted = vec![0.0; residual.len()];
    for &k in order {
        if need <= ALLOCATION_TOL {
            break;
        }
        if residual[k] <= 0.0 {
            continue;
        }
        let take = residual[k].min(need / rho[k]);
        residual[k] -= take;
        granted[k] += take;
        need -= take * rho[k];
    }
    (granted, need.max(0.0))
}

/// Turns the aggregate accounting of a run into concrete per-band grants.
///
/// Every winner first receives its fixed part `D - ΔD` in each band. The
/// adjustable part, `Σ ΔD ρ` equivalent units per winner, is then drawn in
/// rank order from the remaining supply, highest-coefficient band first.
pub fn realize_allocation(
    instance: &Instance,
    state: &GmwdState,
) -> Result<BTreeMap<BuyerId, Vec<f64>>> {
    check_state(instance, state)?;
    let sem = instance.sem();
    let mut residual: Vec<f64> = instance
        .ask()
        .supply()
        .iter()
        .map(|&l| f64::from(l))
        .collect();
    let mut allocation = BTreeMap::new();

    for w in state.winner_entries() {
        let bid = &instance.bids()[w.index];
        let floor: Vec<f64> = bid.fixed_demand().map(f64::from).collect();
        for (r, f) in residual.iter_mut().zip(&floor) {
            *r -= f;
        }
        allocation.insert(w.buyer_id.clone(), floor);
    }
    if let Some(k) = residual.iter().position(|&r| r < 0.0) {
        return Err(Error::AllocationInfeasible {
            buyer: state
                .winners
                .last()
                .cloned()
                .unwrap_or_else(|| BuyerId::new("?")),
            missing: -residual[k] * sem.as_slice()[k],
        });
    }

    let order = sem.descending_order();
    for w in state.winner_entries() {
        let bid = &instance.bids()[w.index];
        let need = sem.equivalent(bid.adjust_range());
        if need == 0.0 {
            continue;
        }
        let (granted, missing) = fill_descending(&mut residual, sem, &order, need);
        if missing > ALLOCATION_TOL {
            return Err(Error::AllocationInfeasible {
                buyer: w.buyer_id.clone(),
                missing,
            });
        }
        let slot = allocation
            .get_mut(&w.buyer_id)
            .expect("floor inserted above");
        for (a, g) in slot.iter_mut().zip(granted) {
            *a += g;
        }
    }
    Ok(allocation)
}

/// Result of clearing one market.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub mechanism: MechanismId,
    /// Winners in the order they were admitted.
    pub winners: Vec<BuyerId>,
    pub payments: BTreeMap<BuyerId, f64>,
    /// Value of what each winner received, at its reported price. Equals the
    /// full bid price unless the mechanism serves partial packages.
    pub awarded_value: BTreeMap<BuyerId, f64>,
    /// Equivalent units sold to each winner.
    pub equivalent_units: BTreeMap<BuyerId, f64>,
    /// Channels granted per band to each winner.
    pub allocation: BTreeMap<BuyerId, Vec<f64>>,
    /// Per-unit price charged to winners, if any won.
    pub clearing_unit_price: Option<f64>,
    /// What the seller receives: reserve times equivalent units sold.
    pub seller_revenue: f64,
    /// Awarded value minus the reserve-priced cost of the spectrum sold.
    pub social_welfare: f64,
}

impl AuctionOutcome {
    pub fn empty(mechanism: MechanismId) -> Self {
        AuctionOutcome {
            mechanism,
            winners: Vec::new(),
            payments: BTreeMap::new(),
            awarded_value: BTreeMap::new(),
            equivalent_units: BTreeMap::new(),
            allocation: BTreeMap::new(),
            clearing_unit_price: None,
            seller_revenue: 0.0,
            social_welfare: 0.0,
        }
    }

    pub fn is_winner(&self, id: &BuyerId) -> bool {
        self.payments.contains_key(id)
    }

    pub fn total_payments(&self) -> f64 {
        self.winners.iter().map(|w| self.payments[w]).sum()
    }

    /// Utility of `id` at the given true package value (0 for losers).
    pub fn utility(&self, id: &BuyerId, true_price: f64, reported_price: f64) -> f64 {
        match (self.payments.get(id), self.awarded_value.get(id)) {
            (Some(pay), Some(value)) => {
                let share = if reported_price > 0.0 {
                    value / reported_price
                } else {
                    1.0
                };
                true_price * share - pay
            }
            _ => 0.0,
        }
    }
}

/// Full pipeline: winners, payments, band-level allocation, welfare.
pub fn clear(instance: &Instance, policy: StopPolicy) -> Result<AuctionOutcome> {
    clear_as(instance, policy, MechanismId::Gmwd)
}

pub(crate) fn clear_as(
    instance: &Instance,
    policy: StopPolicy,
    mechanism: MechanismId,
) -> Result<AuctionOutcome> {
    let state = run_gmwd(instance, policy)?;
    if state.winners.is_empty() {
        return Ok(AuctionOutcome::empty(mechanism));
    }
    let payments = determine_payments(instance, &state)?;
    let allocation = realize_allocation(instance, &state)?;
    let reserve = instance.reserve();

    let mut awarded_value = BTreeMap::new();
    let mut equivalent_units = BTreeMap::new();
    let mut value_total = 0.0;
    let mut units_total = 0.0;
    for w in state.winner_entries() {
        let price = instance.bids()[w.index].price();
        value_total += price;
        units_total += w.equivalent_demand;
        awarded_value.insert(w.buyer_id.clone(), price);
        equivalent_units.insert(w.buyer_id.clone(), w.equivalent_demand);
    }
    let seller_revenue = reserve * units_total;

    Ok(AuctionOutcome {
        mechanism,
        clearing_unit_price: Some(clearing_unit_price(instance, &state)),
        winners: state.winners,
        payments,
        awarded_value,
        equivalent_units,
        allocation,
        seller_revenue,
        social_welfare: value_total - seller_revenue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{Ask, Bid};

    fn single_band(supply: u32, reserve: f64, bids: &[(&str, u32, u32, f64)]) -> Instance {
        let sem = SemCoefficients::new(vec![1.0]).unwrap();
        let bids = bids
            .iter()
            .map(|&(id, d, a, p)| Bid::new(id, vec![d], vec![a], p).unwrap())
            .collect();
        Instance::new(sem, Ask::new(vec![supply], reserve).unwrap(), bids).unwrap()
    }

    fn two_band(supply: [u32; 2]) -> Instance {
        let sem = SemCoefficients::new(vec![2.0, 1.0]).unwrap();
        let bids = vec![
            Bid::new("A", vec![3, 0], vec![2, 0], 12.0).unwrap(),
            Bid::fixed("B", vec![0, 4], 4.0).unwrap(),
        ];
        Instance::new(sem, Ask::new(supply.to_vec(), 0.0).unwrap(), bids).unwrap()
    }

    fn ids(v: &[BuyerId]) -> Vec<&str> {
        v.iter().map(|b| b.as_str()).collect()
    }

    #[test]
    fn band_constraint_breaks_scan() {
        let inst = single_band(10, 0.0, &[("A", 6, 0, 60.0), ("B", 5, 0, 45.0)]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        assert_eq!(ids(&state.winners), ["A"]);
        assert_eq!(state.actual_remaining, [4.0]);
        assert_eq!(state.equivalent_remaining, 4.0);
    }

    #[test]
    fn equivalent_constraint_binds_when_band_does_not() {
        let inst = single_band(10, 0.0, &[("A", 6, 0, 60.0), ("B", 5, 2, 45.0)]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        assert_eq!(ids(&state.winners), ["A"]);
        // rejected deduction leaves no trace
        assert_eq!(state.actual_remaining, [4.0]);
        assert_eq!(state.equivalent_remaining, 4.0);
    }

    #[test]
    fn adjustment_lets_package_fit() {
        let inst = two_band([4, 4]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        assert_eq!(ids(&state.winners), ["A", "B"]);
        assert_eq!(state.actual_remaining, [3.0, 0.0]);
        assert_eq!(state.equivalent_remaining, 2.0);
        assert_eq!(state.adjustment[&BuyerId::from("A")], [2, 0]);
    }

    #[test]
    fn reserve_filters_everyone() {
        let inst = single_band(10, 20.0, &[("A", 6, 0, 60.0), ("B", 5, 0, 45.0)]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        assert!(state.winners.is_empty());
        assert_eq!(state.candidates, 0);
    }

    #[test]
    fn skip_continues_past_misfit() {
        let inst = single_band(
            10,
            0.0,
            &[("A", 6, 0, 60.0), ("B", 5, 0, 45.0), ("C", 4, 0, 32.0)],
        );
        let brk = run_gmwd(&inst, StopPolicy::Break).unwrap();
        assert_eq!(ids(&brk.winners), ["A"]);
        let skip = run_gmwd(&inst, StopPolicy::Skip).unwrap();
        assert_eq!(ids(&skip.winners), ["A", "C"]);
    }

    #[test]
    fn payment_uses_next_ranked_price() {
        // equivalent prices 10, 9, 8 with reserve 5; capacity for two winners
        let inst = single_band(
            12,
            5.0,
            &[("A", 6, 0, 60.0), ("B", 6, 0, 54.0), ("C", 6, 0, 48.0)],
        );
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let pay = determine_payments(&inst, &state).unwrap();
        assert_eq!(pay[&BuyerId::from("A")], 48.0);
        assert_eq!(pay[&BuyerId::from("B")], 48.0);
    }

    #[test]
    fn payment_falls_back_to_reserve_below_reserve() {
        let inst = single_band(
            12,
            5.0,
            &[("A", 6, 0, 60.0), ("B", 6, 0, 54.0), ("C", 6, 0, 18.0)],
        );
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let pay = determine_payments(&inst, &state).unwrap();
        assert_eq!(pay[&BuyerId::from("A")], 30.0);
        assert_eq!(pay[&BuyerId::from("B")], 30.0);
    }

    #[test]
    fn payment_reserve_when_everyone_wins() {
        let inst = single_band(100, 2.0, &[("A", 6, 0, 60.0), ("B", 5, 0, 45.0)]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let pay = determine_payments(&inst, &state).unwrap();
        assert_eq!(pay[&BuyerId::from("A")], 12.0);
        assert_eq!(pay[&BuyerId::from("B")], 10.0);
    }

    #[test]
    fn payment_rejects_foreign_state() {
        let a = single_band(10, 0.0, &[("A", 6, 0, 60.0), ("B", 5, 0, 45.0)]);
        let b = single_band(10, 0.0, &[("A", 6, 0, 60.0)]);
        let state = run_gmwd(&a, StopPolicy::Break).unwrap();
        assert!(matches!(
            determine_payments(&b, &state),
            Err(Error::OutcomeMismatch(_))
        ));
    }

    #[test]
    fn allocation_substitutes_from_richest_band() {
        let inst = two_band([4, 4]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let alloc = realize_allocation(&inst, &state).unwrap();
        assert_eq!(alloc[&BuyerId::from("A")], [3.0, 0.0]);
        assert_eq!(alloc[&BuyerId::from("B")], [0.0, 4.0]);
    }

    #[test]
    fn allocation_moves_adjustable_part_across_bands() {
        // band 1 too small for A's whole request; substitution spills into band 2
        let sem = SemCoefficients::new(vec![2.0, 1.0]).unwrap();
        let bids = vec![Bid::new("A", vec![3, 0], vec![2, 0], 12.0).unwrap()];
        let inst = Instance::new(sem, Ask::new(vec![2, 4], 0.0).unwrap(), bids).unwrap();
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let alloc = realize_allocation(&inst, &state).unwrap();
        assert_eq!(alloc[&BuyerId::from("A")], [2.0, 2.0]);
    }

    #[test]
    fn allocation_without_adjustment_is_demand() {
        let sem = SemCoefficients::new(vec![3.0, 1.0]).unwrap();
        let bids = vec![Bid::fixed("A", vec![2, 5], 30.0).unwrap()];
        let inst = Instance::new(sem, Ask::new(vec![4, 8], 1.0).unwrap(), bids).unwrap();
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let alloc = realize_allocation(&inst, &state).unwrap();
        assert_eq!(alloc[&BuyerId::from("A")], [2.0, 5.0]);
    }

    #[test]
    fn allocation_single_band_is_demand() {
        let inst = single_band(10, 0.0, &[("A", 6, 3, 60.0)]);
        let state = run_gmwd(&inst, StopPolicy::Break).unwrap();
        let alloc = realize_allocation(&inst, &state).unwrap();
        assert_eq!(alloc[&BuyerId::from("A")], [6.0]);
    }

    #[test]
    fn clear_empty_market() {
        let inst = single_band(10, 1.0, &[]);
        let out = clear(&inst, StopPolicy::Break).unwrap();
        assert!(out.winners.is_empty());
        assert_eq!(out.social_welfare, 0.0);
        assert_eq!(out.seller_revenue, 0.0);
    }

    #[test]
    fn clear_composes_pipeline() {
        let inst = single_band(10, 0.0, &[("A", 6, 0, 60.0), ("B", 5, 0, 45.0)]);
        let out = clear(&inst, StopPolicy::Break).unwrap();
        assert_eq!(ids(&out.winners), ["A"]);
        assert_eq!(out.social_welfare, 60.0);
        assert_eq!(out.seller_revenue, 0.0);
        assert_eq!(out.payments[&BuyerId::from("A")], 54.0);
        assert_eq!(out.clearing_unit_price, Some(9.0));
        let surplus = out.total_payments() - out.seller_revenue;
        assert!(out.social_welfare >= surplus && surplus >= 0.0);
    }

    #[test]
    fn policy_parses() {
        assert_eq!("break".parse::<StopPolicy>().unwrap(), StopPolicy::Break);
        assert_eq!("SKIP".parse::<StopPolicy>().unwrap(), StopPolicy::Skip);
        assert!("stop".parse::<StopPolicy>().is_err());
    }
}
