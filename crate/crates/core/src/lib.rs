//! Flexible-bidding combinatorial spectrum forward auctions.
//!
//! Buyers bid on bundles of heterogeneous frequency bands. Each bid carries a
//! base demand per band, an adjustable part per band that the auctioneer may
//! replace with equivalent spectrum from other bands, and a package price.
//! Per-band SEM coefficients convert channels into a common equivalent unit.
//!
//! * [`market`] holds the domain types and the equivalent-price ordering.
//! * [`gmwd`] clears a market greedily and prices winners at the critical value.
//! * [`oracle`] solves the welfare maximisation exactly for small markets.
//! * [`benchmark`] provides the all-or-nothing and virtual-bid baselines.
//! * [`audit`] checks individual rationality and budget balance, and probes
//!   for profitable misreports.
//! * [`sim`] generates seeded markets and runs paired Monte Carlo sweeps.
//! * [`experiment`] wires it together for the `flexauction` binary.
//!
//! ```
//! use flexauction::{clear, Ask, Bid, Instance, SemCoefficients, StopPolicy};
//!
//! let sem = SemCoefficients::new(vec![2.0, 1.0])?;
//! let bids = vec![
//!     Bid::new("A", vec![3, 0], vec![2, 0], 12.0)?,
//!     Bid::fixed("B", vec![0, 4], 4.0)?,
//! ];
//! let market = Instance::new(sem, Ask::new(vec![2, 4], 0.0)?, bids)?;
//! let outcome = clear(&market, StopPolicy::Break)?;
//! // A's adjustable channels move to band 2; B no longer fits the pooled supply
//! assert_eq!(outcome.winners.len(), 1);
//! assert_eq!(outcome.allocation[&"A".into()], vec![2.0, 2.0]);
//! assert_eq!(outcome.social_welfare, 12.0);
//! # Ok::<(), flexauction::Error>(())
//! ```

pub mod audit;
pub mod benchmark;
pub mod error;
pub mod experiment;
pub mod gmwd;
pub mod market;
pub mod oracle;
pub mod sim;

pub use audit::{
    check_budget_balance, check_individual_rationality, manipulation_gain_search, ManipulationGrid,
    PropertyReport,
};
pub use benchmark::{clear_tcda, clear_thimble, MechanismConfig, MechanismId};
pub use error::{Error, Result};
pub use gmwd::{
    clear, determine_payments, realize_allocation, run_gmwd, AuctionOutcome, GmwdState, StopPolicy,
};
pub use market::{
    equivalent_demand, equivalent_price, rank_buyers, Ask, Bid, BuyerId, Instance, RankedBuyer,
    SemCoefficients,
};
pub use oracle::{solve_exact, OracleResult};
pub use sim::{generate_instance, run_sweep, GeneratorConfig, MetricsSummary};
