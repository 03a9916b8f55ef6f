//! Executable checks of the economic properties of an outcome.
//!
//! Individual rationality and budget balance are hard checks. Truthfulness is
//! only probed empirically: a finite grid of misreports per buyer, reporting
//! the largest utility gain found.

use serde::{Deserialize, Serialize};

use crate::benchmark::MechanismConfig;
use crate::error::{Error, Result};
use crate::gmwd::AuctionOutcome;
use crate::market::{approx_ge, BuyerId, Instance};

const AUDIT_TOL: f64 = 1e-9;

fn ensure_matches(instance: &Instance, outcome: &AuctionOutcome) -> Result<()> {
    for id in outcome
        .winners
        .iter()
        .chain(outcome.payments.keys())
        .chain(outcome.awarded_value.keys())
    {
        if instance.bid(id).is_none() {
            return Err(Error::OutcomeMismatch(format!(
                "buyer {id} is not in the instance"
            )));
        }
    }
    Ok(())
}

/// Every winner's awarded value covers its payment; losers pay nothing.
pub fn check_individual_rationality(instance: &Instance, outcome: &AuctionOutcome) -> Result<bool> {
    ensure_matches(instance, outcome)?;
    for (id, &payment) in &outcome.payments {
        let is_winner = outcome.winners.contains(id);
        if !is_winner {
            if payment != 0.0 {
                return Ok(false);
            }
            continue;
        }
        let bid_price = instance.bid(id).expect("checked above").price();
        let value = outcome.awarded_value.get(id).copied().unwrap_or(bid_price);
        if value > bid_price * (1.0 + AUDIT_TOL) {
            return Ok(false);
        }
        if value - payment < -AUDIT_TOL * bid_price.max(1.0) {
            return Ok(false);
        }
    }
    Ok(outcome
        .winners
        .iter()
        .all(|w| outcome.payments.contains_key(w)))
}

/// Collected payments cover what is owed to the seller.
pub fn check_budget_balance(instance: &Instance, outcome: &AuctionOutcome) -> Result<bool> {
    ensure_matches(instance, outcome)?;
    let surplus = outcome.total_payments() - outcome.seller_revenue;
    Ok(surplus >= -AUDIT_TOL * outcome.seller_revenue.max(1.0))
}

/// No single bid exceeds realised welfare. Diagnostic only: a lone buyer that
/// is the whole market violates it legitimately.
pub fn strong_consumer_sovereignty_holds(instance: &Instance, outcome: &AuctionOutcome) -> bool {
    instance
        .bids()
        .iter()
        .all(|b| approx_ge(outcome.social_welfare, b.price()))
}

/// Misreports tried by [`manipulation_gain_search`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipulationGrid {
    pub price_multipliers: Vec<f64>,
    /// Also try adjustable ranges `0`, `ΔD/2` and `ΔD` per band.
    pub vary_adjustment: bool,
}

impl Default for ManipulationGrid {
    fn default() -> Self {
        ManipulationGrid {
            price_multipliers: vec![0.5, 0.8, 0.9, 1.1, 1.25, 2.0],
            vary_adjustment: true,
        }
    }
}

/// Largest utility gain over the grid from misreporting, evaluated at the
/// buyer's true package value. May be negative when every misreport hurts.
pub fn manipulation_gain_search(
    instance: &Instance,
    buyer: &BuyerId,
    mechanism: &MechanismConfig,
    grid: &ManipulationGrid,
) -> Result<f64> {
    let truth = instance
        .bid(buyer)
        .ok_or_else(|| Error::UnknownBuyer(buyer.clone()))?;
    if let Some(m) = grid
        .price_multipliers
        .iter()
        .find(|m| !(m.is_finite() && **m > 0.0))
    {
        return Err(Error::Config(format!(
            "price multiplier must be positive, got {m}"
        )));
    }
    let true_price = truth.price();
    let truthful = mechanism
        .clear(instance)?
        .utility(buyer, true_price, true_price);

    let adjust_variants: Vec<Vec<u32>> = if grid.vary_adjustment {
        let full = truth.adjust_range().to_vec();
        let half = full.iter().map(|a| a / 2).collect();
        let zero = vec![0; full.len()];
        let mut v = vec![zero, half, full];
        v.dedup();
        v
    } else {
        vec![truth.adjust_range().to_vec()]
    };

    let mut best = f64::NEG_INFINITY;
    for adjust in &adjust_variants {
        let base = truth.with_adjust_range(adjust.clone())?;
        let mut multipliers = grid.price_multipliers.clone();
        if adjust.as_slice() != truth.adjust_range() {
            multipliers.push(1.0);
        }
        for m in multipliers {
            let reported = base.with_price(true_price * m)?;
            let reported_price = reported.price();
            let outcome = mechanism.clear(&instance.with_bid(reported)?)?;
            let gain = outcome.utility(buyer, true_price, reported_price) - truthful;
            best = best.max(gain);
        }
    }
    Ok(best)
}

/// Histogram bucket: gains in `(previous upper, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainBucket {
    pub upper: f64,
    pub count: u64,
}

const GAIN_EDGES: [f64; 6] = [0.0, 1.0, 10.0, 100.0, 1000.0, f64::INFINITY];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub instances_checked: u64,
    pub ir_violations: u64,
    pub bb_violations: u64,
    /// Outcomes where a single bid exceeded realised welfare (diagnostic).
    pub scs_exceptions: u64,
    pub max_manipulation_gain: f64,
    pub manipulation_samples: u64,
    pub mean_manipulation_gain: f64,
    pub gain_histogram: Vec<GainBucket>,
}

impl Default for PropertyReport {
    fn default() -> Self {
        PropertyReport {
            instances_checked: 0,
            ir_violations: 0,
            bb_violations: 0,
            scs_exceptions: 0,
            max_manipulation_gain: 0.0,
            manipulation_samples: 0,
            mean_manipulation_gain: 0.0,
            gain_histogram: GAIN_EDGES
                .iter()
                .map(|&upper| GainBucket { upper, count: 0 })
                .collect(),
        }
    }
}

impl PropertyReport {
    pub fn has_violations(&self) -> bool {
        self.ir_violations > 0 || self.bb_violations > 0
    }

    pub fn record_outcome(&mut self, instance: &Instance, outcome: &AuctionOutcome) -> Result<()> {
        self.instances_checked += 1;
        if !check_individual_rationality(instance, outcome)? {
            self.ir_violations += 1;
        }
        if !check_budget_balance(instance, outcome)? {
            self.bb_violations += 1;
        }
        if !strong_consumer_sovereignty_holds(instance, outcome) {
            self.scs_exceptions += 1;
        }
        Ok(())
    }

    pub fn record_gain(&mut self, gain: f64) {
        let n = self.manipulation_samples as f64;
        self.mean_manipulation_gain = (self.mean_manipulation_gain * n + gain) / (n + 1.0);
        if self.manipulation_samples == 0 || gain > self.max_manipulation_gain {
            self.max_manipulation_gain = gain;
        }
        self.manipulation_samples += 1;
        let slot = GAIN_EDGES
            .iter()
            .position(|&edge| gain <= edge)
            .unwrap_or(GAIN_EDGES.len() - 1);
        self.gain_histogram[slot].count += 1;
    }

    /// Combines two reports; `other` is treated as coming after `self`.
    pub fn merge(&mut self, other: &PropertyReport) {
        self.instances_checked += other.instances_checked;
        self.ir_violations += other.ir_violations;
        self.bb_violations += other.bb_violations;
        self.scs_exceptions += other.scs_exceptions;
        if other.manipulation_samples > 0 {
            let (a, b) = (
                self.manipulation_samples as f64,
                other.manipulation_samples as f64,
            );
            self.mean_manipulation_gain =
                (self.mean_manipulation_gain * a + other.mean_manipulation_gain * b) / (a + b);
            if self.manipulation_samples == 0
                || other.max_manipulation_gain > self.max_manipulation_gain
            {
                self.max_manipulation_gain = other.max_manipulation_gain;
            }
            self.manipulation_samples += other.manipulation_samples;
        }
        for (mine, theirs) in self.gain_histogram.iter_mut().zip(&other.gain_histogram) {
            mine.count += theirs.count;
        }
    }
}

/// Audits a batch of already-cleared outcomes.
pub fn audit_outcomes<'a, I>(pairs: I) -> Result<PropertyReport>
where
    I: IntoIterator<Item = (&'a Instance, &'a AuctionOutcome)>,
{
    let mut report = PropertyReport::default();
    for (instance, outcome) in pairs {
        report.record_outcome(instance, outcome)?;
    }
    Ok(report)
}
