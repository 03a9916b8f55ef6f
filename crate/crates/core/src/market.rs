//! Market primitives shared by every mechanism: SEM coefficients, bids, the
//! seller's ask, validated instances, and the equivalent-price ordering.
//!
//! Quantities are integer channel counts per band. The SEM coefficient of a
//! band converts its channels into units of a common equivalent band, so a
//! buyer's package can be priced per equivalent unit and compared across
//! heterogeneous bands.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing reals derived from prices.
pub const REL_TOL: f64 = 1e-9;

/// Opaque buyer identifier. Ordering is lexicographic and only used to
/// break ties between equal equivalent prices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BuyerId(String);

impl BuyerId {
    pub fn new(id: impl Into<String>) -> Self {
        BuyerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BuyerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl From<&str> for BuyerId {
    fn from(s: &str) -> Self {
        BuyerId(s.to_owned())
    }
}

impl From<String> for BuyerId {
    fn from(s: String) -> Self {
        BuyerId(s)
    }
}

/// Per-band conversion ratios into the equivalent public band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SemCoefficients(Vec<f64>);

impl SemCoefficients {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::InvalidCoefficients(
                "at least one band is required".into(),
            ));
        }
        if let Some((k, v)) = rho
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidCoefficients(format!(
                "coefficient for band {k} must be positive and finite, got {v}"
            )));
        }
        Ok(SemCoefficients(rho))
    }

    pub fn bands(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Converts a per-band channel vector into equivalent units.
    pub fn equivalent(&self, quantities: &[u32]) -> f64 {
        quantities
            .iter()
            .zip(&self.0)
            .map(|(&q, &rho)| f64::from(q) * rho)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        SemCoefficients::new(self.0.iter().map(|rho| rho * factor).collect())
    }

    /// Band indices ordered by descending coefficient, lower index first on ties.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order
    }
}

impl TryFrom<Vec<f64>> for SemCoefficients {
    type Error = Error;

    fn try_from(rho: Vec<f64>) -> Result<Self> {
        SemCoefficients::new(rho)
    }
}

impl From<SemCoefficients> for Vec<f64> {
    fn from(sem: SemCoefficients) -> Self {
        sem.0
    }
}

/// One buyer's combinatorial request.
///
/// `adjust_range[k]` is the part of `base_demand[k]` the buyer lets the
/// auctioneer replace with equivalent spectrum from other bands, so it never
/// exceeds the base demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBid")]
pub struct Bid {
    buyer_id: BuyerId,
    base_demand: Vec<u32>,
    adjust_range: Vec<u32>,
    price: f64,
}

#[derive(Deserialize)]
struct RawBid {
    buyer_id: BuyerId,
    base_demand: Vec<u32>,
    #[serde(default)]
    adjust_range: Option<Vec<u32>>,
    price: f64,
}

impl TryFrom<RawBid> for Bid {
    type Error = Error;

    fn try_from(raw: RawBid) -> Result<Self> {
        let adjust = raw
            .adjust_range
            .unwrap_or_else(|| vec![0; raw.base_demand.len()]);
        Bid::new(raw.buyer_id, raw.base_demand, adjust, raw.price)
    }
}

impl Bid {
    pub fn new(
        buyer_id: impl Into<BuyerId>,
        base_demand: Vec<u32>,
        adjust_range: Vec<u32>,
        price: f64,
    ) -> Result<Self> {
        let buyer_id = buyer_id.into();
        if base_demand.len() != adjust_range.len() {
            return Err(Error::DimensionMismatch {
                what: format!("adjustable range of buyer {buyer_id}"),
                expected: base_demand.len(),
                found: adjust_range.len(),
            });
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::InvalidBid {
                buyer: buyer_id,
                reason: format!("price must be finite and non-negative, got {price}"),
            });
        }
        if let Some(k) = (0..base_demand.len()).find(|&k| adjust_range[k] > base_demand[k]) {
            return Err(Error::InvalidBid {
                buyer: buyer_id,
                reason: format!(
                    "adjustable range {} exceeds base demand {} in band {k}",
                    adjust_range[k], base_demand[k]
                ),
            });
        }
        if base_demand.iter().all(|&d| d == 0) {
            return Err(Error::UndefinedPrice { buyer: buyer_id });
        }
        Ok(Bid {
            buyer_id,
            base_demand,
            adjust_range,
            price,
        })
    }

    /// A bid with no adjustable portion.
    pub fn fixed(buyer_id: impl Into<BuyerId>, base_demand: Vec<u32>, price: f64) -> Result<Self> {
        let zeros = vec![0; base_demand.len()];
        Bid::new(buyer_id, base_demand, zeros, price)
    }

    pub fn buyer_id(&self) -> &BuyerId {
        &self.buyer_id
    }

    pub fn base_demand(&self) -> &[u32] {
        &self.base_demand
    }

    pub fn adjust_range(&self) -> &[u32] {
        &self.adjust_range
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn bands(&self) -> usize {
        self.base_demand.len()
    }

    /// Per-band quantity that must be served from the band itself.
    pub fn fixed_demand(&self) -> impl Iterator<Item = u32> + '_ {
        self.base_demand
            .iter()
            .zip(&self.adjust_range)
            .map(|(d, a)| d - a)
    }

    pub fn with_price(&self, price: f64) -> Result<Self> {
        Bid::new(
            self.buyer_id.clone(),
            self.base_demand.clone(),
            self.adjust_range.clone(),
            price,
        )
    }

    pub fn with_adjust_range(&self, adjust_range: Vec<u32>) -> Result<Self> {
        Bid::new(
            self.buyer_id.clone(),
            self.base_demand.clone(),
            adjust_range,
            self.price,
        )
    }

    /// Sets every adjustable range to `min(delta, base demand)`.
    pub fn with_adjust_cap(&self, delta: u32) -> Self {
        Bid {
            adjust_range: self.base_demand.iter().map(|&d| d.min(delta)).collect(),
            ..self.clone()
        }
    }
}

/// The seller's offer: per-band supply and the reserve price per equivalent unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAsk")]
pub struct Ask {
    supply: Vec<u32>,
    reserve: f64,
}

#[derive(Deserialize)]
struct RawAsk {
    supply: Vec<u32>,
    reserve: f64,
}

impl TryFrom<RawAsk> for Ask {
    type Error = Error;

    fn try_from(raw: RawAsk) -> Result<Self> {
        Ask::new(raw.supply, raw.reserve)
    }
}

impl Ask {
    pub fn new(supply: Vec<u32>, reserve: f64) -> Result<Self> {
        if !(reserve.is_finite() && reserve >= 0.0) {
            return Err(Error::InvalidAsk(format!(
                "reserve price must be finite and non-negative, got {reserve}"
            )));
        }
        Ok(Ask { supply, reserve })
    }

    pub fn supply(&self) -> &[u32] {
        &self.supply
    }

    pub fn reserve(&self) -> f64 {
        self.reserve
    }
}

/// A validated market: coefficients, one ask, and bids of matching dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct Instance {
    sem: SemCoefficients,
    ask: Ask,
    bids: Vec<Bid>,
}

#[derive(Deserialize)]
struct RawInstance {
    sem: SemCoefficients,
    ask: Ask,
    #[serde(default)]
    bids: Vec<Bid>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.sem, raw.ask, raw.bids)
    }
}

impl Instance {
    pub fn new(sem: SemCoefficients, ask: Ask, bids: Vec<Bid>) -> Result<Self> {
        let k = sem.bands();
        if ask.supply.len() != k {
            return Err(Error::DimensionMismatch {
                what: "seller supply".into(),
                expected: k,
                found: ask.supply.len(),
            });
        }
        let mut seen = HashSet::with_capacity(bids.len());
        for bid in &bids {
            if bid.bands() != k {
                return Err(Error::DimensionMismatch {
                    what: format!("bid of buyer {}", bid.buyer_id),
                    expected: k,
                    found: bid.bands(),
                });
            }
            if !seen.insert(&bid.buyer_id) {
                return Err(Error::DuplicateBuyer(bid.buyer_id.clone()));
            }
        }
        Ok(Instance { sem, ask, bids })
    }

    pub fn sem(&self) -> &SemCoefficients {
        &self.sem
    }

    pub fn ask(&self) -> &Ask {
        &self.ask
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn bands(&self) -> usize {
        self.sem.bands()
    }

    pub fn reserve(&self) -> f64 {
        self.ask.reserve
    }

    pub fn bid(&self, id: &BuyerId) -> Option<&Bid> {
        self.bids.iter().find(|b| &b.buyer_id == id)
    }

    pub fn equivalent_supply(&self) -> f64 {
        self.sem.equivalent(&self.ask.supply)
    }

    /// Same market with every adjustable range set to `min(delta, D)`.
    pub fn with_adjust_cap(&self, delta: u32) -> Self {
        Instance {
            bids: self.bids.iter().map(|b| b.with_adjust_cap(delta)).collect(),
            ..self.clone()
        }
    }

    /// Same market with all adjustable ranges removed (all-or-nothing packages).
    pub fn without_adjustment(&self) -> Self {
        self.with_adjust_cap(0)
    }

    /// Replaces the bid of `replacement.buyer_id()`.
    pub fn with_bid(&self, replacement: Bid) -> Result<Self> {
        let pos = self
            .bids
            .iter()
            .position(|b| b.buyer_id == replacement.buyer_id)
            .ok_or_else(|| Error::UnknownBuyer(replacement.buyer_id.clone()))?;
        let mut bids = self.bids.clone();
        bids[pos] = replacement;
        Instance::new(self.sem.clone(), self.ask.clone(), bids)
    }

    pub fn without_buyer(&self, id: &BuyerId) -> Self {
        Instance {
            bids: self
                .bids
                .iter()
                .filter(|b| &b.buyer_id != id)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn with_sem_and_reserve(&self, sem: SemCoefficients, reserve: f64) -> Result<Self> {
        Instance::new(
            sem,
            Ask::new(self.ask.supply.clone(), reserve)?,
            self.bids.clone(),
        )
    }
}

/// Σ_k D^k ρ^k, the package size in equivalent units.
pub fn equivalent_demand(bid: &Bid, sem: &SemCoefficients) -> Result<f64> {
    if bid.bands() != sem.bands() {
        return Err(Error::DimensionMismatch {
            what: format!("bid of buyer {}", bid.buyer_id),
            expected: sem.bands(),
            found: bid.bands(),
        });
    }
    let eq = sem.equivalent(&bid.base_demand);
    if eq > 0.0 {
        Ok(eq)
    } else {
        Err(Error::UndefinedPrice {
            buyer: bid.buyer_id.clone(),
        })
    }
}

/// Package price per equivalent unit.
pub fn equivalent_price(bid: &Bid, sem: &SemCoefficients) -> Result<f64> {
    Ok(bid.price / equivalent_demand(bid, sem)?)
}

/// A buyer's position in the descending equivalent-price order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedBuyer {
    pub buyer_id: BuyerId,
    /// Index of the bid in `Instance::bids`.
    pub index: usize,
    pub equivalent_price: f64,
    pub equivalent_demand: f64,
    /// 1-based position.
    pub rank: usize,
}

/// Orders buyers by equivalent price, highest first; equal prices are broken
/// by ascending buyer id so the order is fully deterministic.
pub fn rank_buyers(instance: &Instance) -> Result<Vec<RankedBuyer>> {
    let mut ranked = instance
        .bids
        .iter()
        .enumerate()
        .map(|(index, bid)| {
            let eq = equivalent_demand(bid, &instance.sem)?;
            Ok(RankedBuyer {
                buyer_id: bid.buyer_id.clone(),
                index,
                equivalent_price: bid.price / eq,
                equivalent_demand: eq,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(compare_ranked);
    for (pos, r) in ranked.iter_mut().enumerate() {
        r.rank = pos + 1;
    }
    Ok(ranked)
}

fn compare_ranked(a: &RankedBuyer, b: &RankedBuyer) -> Ordering {
    b.equivalent_price
        .total_cmp(&a.equivalent_price)
        .then_with(|| a.buyer_id.cmp(&b.buyer_id))
}

/// `a >= b` up to relative tolerance.
pub(crate) fn approx_ge(a: f64, b: f64) -> bool {
    a >= b - REL_TOL * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rho5() -> SemCoefficients {
        SemCoefficients::new(vec![10.0, 8.0, 6.0, 4.0, 2.0]).unwrap()
    }

    fn instance_with_prices(ids: &[&str], prices: &[f64]) -> Instance {
        let sem = SemCoefficients::new(vec![1.0]).unwrap();
        let bids = ids
            .iter()
            .zip(prices)
            .map(|(id, &p)| Bid::fixed(*id, vec![1], p).unwrap())
            .collect();
        Instance::new(sem, Ask::new(vec![10], 0.0).unwrap(), bids).unwrap()
    }

    fn order(instance: &Instance) -> Vec<String> {
        rank_buyers(instance)
            .unwrap()
            .into_iter()
            .map(|r| r.buyer_id.to_string())
            .collect()
    }

    #[test]
    fn equivalent_demand_sums_weighted_channels() {
        let bid = Bid::fixed("a", vec![2, 1, 0, 0, 0], 100.0).unwrap();
        assert_eq!(equivalent_demand(&bid, &rho5()).unwrap(), 28.0);

        let sem = SemCoefficients::new(vec![1.0, 1.0]).unwrap();
        let bid = Bid::fixed("a", vec![1, 0], 1.0).unwrap();
        assert_eq!(equivalent_demand(&bid, &sem).unwrap(), 1.0);
    }

    #[test]
    fn zero_demand_is_undefined_price() {
        let err = Bid::fixed("z", vec![0; 5], 10.0).unwrap_err();
        assert!(matches!(err, Error::UndefinedPrice { .. }));
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let bid = Bid::fixed("a", vec![1, 2], 3.0).unwrap();
        let err = equivalent_demand(&bid, &rho5()).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 5,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn equivalent_price_examples() {
        let bid = Bid::fixed("a", vec![2, 1, 0, 0, 0], 100.0).unwrap();
        let p = equivalent_price(&bid, &rho5()).unwrap();
        assert!((p - 100.0 / 28.0).abs() < 1e-12);
        assert!((p - 3.5714).abs() < 1e-4);

        let sem = SemCoefficients::new(vec![5.0]).unwrap();
        let zero = Bid::fixed("b", vec![1], 0.0).unwrap();
        assert_eq!(equivalent_price(&zero, &sem).unwrap(), 0.0);

        let unit = Bid::fixed("c", vec![2, 1, 0, 0, 0], 28.0).unwrap();
        assert_eq!(equivalent_price(&unit, &rho5()).unwrap(), 1.0);
    }

    #[test]
    fn rank_sorts_descending() {
        let inst = instance_with_prices(&["1", "2", "3"], &[3.0, 5.0, 4.0]);
        assert_eq!(order(&inst), ["2", "3", "1"]);
        let ranks: Vec<usize> = rank_buyers(&inst).unwrap().iter().map(|r| r.rank).collect();
        assert_eq!(ranks, [1, 2, 3]);
    }

    #[test]
    fn rank_ties_break_by_id() {
        let inst = instance_with_prices(&["7", "3"], &[2.0, 2.0]);
        assert_eq!(order(&inst), ["3", "7"]);
    }

    #[test]
    fn rank_single_buyer() {
        let inst = instance_with_prices(&["only"], &[1.0]);
        let ranked = rank_buyers(&inst).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].rank, 1);
    }

    #[test]
    fn adjustable_range_cannot_exceed_demand() {
        let err = Bid::new("a", vec![3, 1], vec![2, 2], 5.0).unwrap_err();
        assert!(matches!(err, Error::InvalidBid { .. }));
    }

    #[test]
    fn duplicate_buyers_rejected() {
        let sem = SemCoefficients::new(vec![1.0]).unwrap();
        let bids = vec![
            Bid::fixed("a", vec![1], 1.0).unwrap(),
            Bid::fixed("a", vec![2], 1.0).unwrap(),
        ];
        let err = Instance::new(sem, Ask::new(vec![5], 0.0).unwrap(), bids).unwrap_err();
        assert!(matches!(err, Error::DuplicateBuyer(_)));
    }

    #[test]
    fn supply_dimension_checked() {
        let err = Instance::new(rho5(), Ask::new(vec![1, 2], 0.0).unwrap(), vec![]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn nonpositive_coefficients_rejected() {
        assert!(SemCoefficients::new(vec![]).is_err());
        assert!(SemCoefficients::new(vec![1.0, 0.0]).is_err());
        assert!(SemCoefficients::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn adjust_cap_clips_at_demand() {
        let bid = Bid::fixed("a", vec![3, 12, 0], 1.0).unwrap();
        assert_eq!(bid.with_adjust_cap(10).adjust_range(), &[3, 10, 0]);
    }

    #[test]
    fn parses_from_json() {
        let text = r#"{
            "sem": [2, 1],
            "ask": {"supply": [4, 4], "reserve": 0},
            "bids": [
                {"buyer_id": "A", "base_demand": [3, 0], "adjust_range": [2, 0], "price": 12},
                {"buyer_id": "B", "base_demand": [0, 4], "price": 4}
            ]
        }"#;
        let inst: Instance = serde_json::from_str(text).unwrap();
        assert_eq!(inst.bids().len(), 2);
        assert_eq!(inst.bids()[1].adjust_range(), &[0, 0]);
    }

    #[test]
    fn json_rejects_bad_vector_length() {
        let text = r#"{
            "sem": [2, 1],
            "ask": {"supply": [4, 4], "reserve": 0},
            "bids": [{"buyer_id": "A", "base_demand": [3, 0, 1], "price": 12}]
        }"#;
        let err = serde_json::from_str::<Instance>(text).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"), "{err}");
    }
}
