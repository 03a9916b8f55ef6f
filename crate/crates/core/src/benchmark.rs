//! Baseline mechanisms used for welfare comparisons.
//!
//! * TCDA-style: all-or-nothing packages, i.e. the greedy with every
//!   adjustable range forced to zero.
//! * THIMBLE-style (approximate model): bands are pooled into one homogeneous
//!   equivalent band and each buyer may be served one of several
//!   proportional virtual bids. Per-band constraints are not enforced.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmwd::{
    self, equivalent_fits, fill_descending, AuctionOutcome, StopPolicy, ALLOCATION_TOL,
};
use crate::market::{rank_buyers, Instance};

pub const DEFAULT_NUM_VIRTUAL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MechanismId {
    #[serde(rename = "GMWD", alias = "gmwd")]
    Gmwd,
    #[serde(rename = "TCDA", alias = "tcda")]
    Tcda,
    #[serde(rename = "THIMBLE", alias = "thimble", alias = "THIMBLE-approx")]
    Thimble,
}

impl MechanismId {
    pub const ALL: [MechanismId; 3] = [MechanismId::Gmwd, MechanismId::Tcda, MechanismId::Thimble];

    /// Name used in reports. The THIMBLE model is an approximation and is labelled so.
    pub fn label(self) -> &'static str {
        match self {
            MechanismId::Gmwd => "GMWD",
            MechanismId::Tcda => "TCDA",
            MechanismId::Thimble => "THIMBLE-approx",
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gmwd" => Ok(MechanismId::Gmwd),
            "tcda" => Ok(MechanismId::Tcda),
            "thimble" | "thimble-approx" => Ok(MechanismId::Thimble),
            other => Err(Error::Config(format!("unknown mechanism '{other}'"))),
        }
    }
}

/// A mechanism with its tuning knobs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub id: MechanismId,
    #[serde(default)]
    pub policy: StopPolicy,
    #[serde(default = "default_num_virtual")]
    pub num_virtual: usize,
}

fn default_num_virtual() -> usize {
    DEFAULT_NUM_VIRTUAL
}

impl MechanismConfig {
    pub fn new(id: MechanismId) -> Self {
        MechanismConfig {
            id,
            policy: StopPolicy::Break,
            num_virtual: DEFAULT_NUM_VIRTUAL,
        }
    }

    pub fn with_policy(self, policy: StopPolicy) -> Self {
        MechanismConfig { policy, ..self }
    }

    pub fn clear(&self, instance: &Instance) -> Result<AuctionOutcome> {
        match self.id {
            MechanismId::Gmwd => gmwd::clear(instance, self.policy),
            MechanismId::Tcda => clear_tcda_with(instance, self.policy),
            MechanismId::Thimble => clear_thimble_with(instance, self.num_virtual, self.policy),
        }
    }
}

impl From<MechanismId> for MechanismConfig {
    fn from(id: MechanismId) -> Self {
        MechanismConfig::new(id)
    }
}

/// All-or-nothing greedy: the GMWD pipeline on the instance with ΔD = 0.
pub fn clear_tcda(instance: &Instance) -> Result<AuctionOutcome> {
    clear_tcda_with(instance, StopPolicy::Break)
}

pub fn clear_tcda_with(instance: &Instance, policy: StopPolicy) -> Result<AuctionOutcome> {
    gmwd::clear_as(&instance.without_adjustment(), policy, MechanismId::Tcda)
}

/// One alternative request of a buyer in the pooled equivalent band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VirtualBid {
    /// Fraction index `j` out of `num_virtual`.
    pub share: usize,
    pub units: f64,
    pub price: f64,
}

impl VirtualBid {
    pub fn unit_price(&self) -> f64 {
        self.price / self.units
    }
}

fn ceil_units(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

/// Virtual bids `j = 1..=n`: `ceil(eq_demand * j / n)` units at `price * j / n`,
/// returned largest first.
pub fn virtual_bids(price: f64, equivalent_demand: f64, num_virtual: usize) -> Vec<VirtualBid> {
    let n = num_virtual as f64;
    (1..=num_virtual)
        .rev()
        .map(|j| {
            let frac = j as f64 / n;
            VirtualBid {
                share: j,
                units: ceil_units(equivalent_demand * j as f64 / n),
                price: price * frac,
            }
        })
        .collect()
}

pub fn clear_thimble(instance: &Instance, num_virtual: usize) -> Result<AuctionOutcome> {
    clear_thimble_with(instance, num_virtual, StopPolicy::Break)
}

/// Virtual-bid greedy over the pooled equivalent supply.
///
/// Buyers are visited in descending equivalent price. Each is served the
/// largest of its virtual bids that fits the remaining equivalent supply and
/// whose own unit price is at least the reserve. A buyer with no fitting
/// virtual bid stops the scan under `Break`.
///
/// Winners pay `q * units`, where `q` is the clearing unit price of the GMWD
/// rule capped at the winner's own virtual unit price (rounding units up can
/// push that slightly below the buyer's equivalent price).
pub fn clear_thimble_with(
    instance: &Instance,
    num_virtual: usize,
    policy: StopPolicy,
) -> Result<AuctionOutcome> {
    if num_virtual == 0 {
        return Err(Error::Config("num_virtual must be at least 1".into()));
    }
    let ranking = rank_buyers(instance)?;
    let reserve = instance.reserve();
    let total = instance.equivalent_supply();
    let mut remaining = total;
    let mut served: Vec<(usize, VirtualBid)> = Vec::new();

    for (pos, entry) in ranking.iter().enumerate() {
        if entry.equivalent_price < reserve {
            break;
        }
        let price = instance.bids()[entry.index].price();
        let chosen = virtual_bids(price, entry.equivalent_demand, num_virtual)
            .into_iter()
            .filter(|vb| vb.unit_price() >= reserve)
            .find(|vb| equivalent_fits(remaining - vb.units, total));
        match chosen {
            Some(vb) => {
                remaining -= vb.units;
                served.push((pos, vb));
            }
            None => match policy {
                StopPolicy::Break => break,
                StopPolicy::Skip => continue,
            },
        }
    }

    if served.is_empty() {
        return Ok(AuctionOutcome::empty(MechanismId::Thimble));
    }

    let last_pos = served.last().map(|(p, _)| *p).expect("nonempty");
    let unit_price = match ranking.get(last_pos + 1) {
        Some(next) if next.equivalent_price >= reserve => next.equivalent_price,
        _ => reserve,
    };

    let sem = instance.sem();
    let order = sem.descending_order();
    let mut residual: Vec<f64> = instance
        .ask()
        .supply()
        .iter()
        .map(|&l| f64::from(l))
        .collect();

    let mut out = AuctionOutcome::empty(MechanismId::Thimble);
    let mut value_total = 0.0;
    let mut units_total = 0.0;
    for (pos, vb) in &served {
        let id = ranking[*pos].buyer_id.clone();
        let (granted, missing) = fill_descending(&mut residual, sem, &order, vb.units);
        if missing > ALLOCATION_TOL {
            return Err(Error::AllocationInfeasible { buyer: id, missing });
        }
        let charge = unit_price.min(vb.unit_price()) * vb.units;
        value_total += vb.price;
        units_total += vb.units;
        out.winners.push(id.clone());
        out.payments.insert(id.clone(), charge);
        out.awarded_value.insert(id.clone(), vb.price);
        out.equivalent_units.insert(id.clone(), vb.units);
        out.allocation.insert(id, granted);
    }
    out.clearing_unit_price = Some(unit_price);
    out.seller_revenue = reserve * units_total;
    out.social_welfare = value_total - out.seller_revenue;
    Ok(out)
}

/// Per-winner count of served virtual bids; always 0 or 1 by construction.
pub fn virtual_bids_per_buyer(
    outcome: &AuctionOutcome,
) -> BTreeMap<&crate::market::BuyerId, usize> {
    let mut counts = BTreeMap::new();
    for w in &outcome.winners {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}
