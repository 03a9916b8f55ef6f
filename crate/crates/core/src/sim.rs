//! Seeded market generation and Monte Carlo aggregation.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(seed, replication, lane)`: lane 0 holds the seller's supply and lane
//! `1 + m` holds buyer `m`. Replications are therefore independent of each
//! other and of execution order, and the first `M` buyers of a market are the
//! same whatever the total number of buyers is. The adjustable range only
//! enters after all draws (`ΔD = min(delta, D)`), so markets that differ only
//! in `delta` share every draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{MechanismConfig, MechanismId};
use crate::error::{Error, Result};
use crate::gmwd::AuctionOutcome;
use crate::market::{Ask, Bid, Instance, SemCoefficients};

/// Stream id reserved for supply means when they are frozen across replications.
const FROZEN_STREAM: u64 = u64::MAX;
const LANE_SHIFT: u32 = 36;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationModel {
    /// `b = v * Σ D ρ` with `v` uniform on `unit_value_range`.
    #[default]
    UniformUnitPrice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub num_bands: usize,
    pub supply_mean_range: (f64, f64),
    pub demand_mean_range: (f64, f64),
    pub rho: Vec<f64>,
    pub delta: u32,
    pub num_buyers: usize,
    pub reserve: f64,
    pub valuation_model: ValuationModel,
    pub unit_value_range: (f64, f64),
    pub seed: u64,
    /// Draw the per-band supply means once per seed instead of per replication.
    pub freeze_supply_means: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_bands: 5,
            supply_mean_range: (50.0, 100.0),
            demand_mean_range: (8.0, 16.0),
            rho: vec![10.0, 8.0, 6.0, 4.0, 2.0],
            delta: 0,
            num_buyers: 15,
            reserve: 1.0,
            valuation_model: ValuationModel::UniformUnitPrice,
            unit_value_range: (1.0, 3.0),
            seed: 2025,
            freeze_supply_means: false,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), strictly_positive: bool) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Config(format!(
            "{name} [{lo}, {hi}] is not a valid range"
        )));
    }
    if strictly_positive && lo <= 0.0 {
        return Err(Error::Config(format!(
            "{name} must be strictly positive, got [{lo}, {hi}]"
        )));
    }
    if lo < 0.0 {
        return Err(Error::Config(format!(
            "{name} must be non-negative, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bands == 0 {
            return Err(Error::Config("num_bands must be at least 1".into()));
        }
        if self.rho.len() != self.num_bands {
            return Err(Error::Config(format!(
                "rho has {} entries but num_bands is {}",
                self.rho.len(),
                self.num_bands
            )));
        }
        SemCoefficients::new(self.rho.clone())?;
        check_range("supply_mean_range", self.supply_mean_range, true)?;
        check_range("demand_mean_range", self.demand_mean_range, true)?;
        check_range("unit_value_range", self.unit_value_range, false)?;
        if !(self.reserve.is_finite() && self.reserve >= 0.0) {
            return Err(Error::Config(format!(
                "reserve must be non-negative, got {}",
                self.reserve
            )));
        }
        Ok(())
    }

    /// Demand means spread over `[centre - width/2, centre + width/2]`.
    pub fn with_demand_width(&self, centre: f64, width: f64) -> Self {
        GeneratorConfig {
            demand_mean_range: (centre - width / 2.0, centre + width / 2.0),
            ..self.clone()
        }
    }
}

fn lane_rng(seed: u64, stream: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(lane) << LANE_SHIFT);
    rng
}

fn lerp((lo, hi): (f64, f64), u: f64) -> f64 {
    lo + u * (hi - lo)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    let dist = Poisson::new(mean).expect("validated positive mean");
    dist.sample(rng) as u32
}

pub fn buyer_id(index: usize) -> String {
    format!("bu{:03}", index + 1)
}

/// Draws one market for `replication`.
pub fn generate_instance(config: &GeneratorConfig, replication: u64) -> Result<Instance> {
    config.validate()?;
    let sem = SemCoefficients::new(config.rho.clone())?;
    let k = config.num_bands;

    let mut supply_rng = lane_rng(config.seed, replication, 0);
    let supply_means: Vec<f64> = if config.freeze_supply_means {
        let mut frozen = lane_rng(config.seed, FROZEN_STREAM, 0);
        (0..k)
            .map(|_| lerp(config.supply_mean_range, frozen.random()))
            .collect()
    } else {
        (0..k)
            .map(|_| lerp(config.supply_mean_range, supply_rng.random()))
            .collect()
    };
    let supply: Vec<u32> = supply_means
        .iter()
        .map(|&mean| poisson(&mut supply_rng, mean))
        .collect();

    let bids = (0..config.num_buyers)
        .map(|m| {
            let mut rng = lane_rng(config.seed, replication, 1 + m as u64);
            let demand_mean = lerp(config.demand_mean_range, rng.random());
            let unit_value = match config.valuation_model {
                ValuationModel::UniformUnitPrice => lerp(config.unit_value_range, rng.random()),
            };
            let demand = loop {
                let d: Vec<u32> = (0..k).map(|_| poisson(&mut rng, demand_mean)).collect();
                if d.iter().any(|&x| x > 0) {
                    break d;
                }
            };
            let adjust = demand.iter().map(|&d| d.min(config.delta)).collect();
            let price = unit_value * sem.equivalent(&demand);
            Bid::new(buyer_id(m), demand, adjust, price)
        })
        .collect::<Result<Vec<_>>>()?;

    Instance::new(sem, Ask::new(supply, config.reserve)?, bids)
}

/// One mechanism run on one generator configuration within a grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRun {
    pub label: String,
    pub generator: GeneratorConfig,
    pub mechanism: MechanismConfig,
}

/// Runs sharing a seed; replication `i` of every run uses the same streams.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub sweep_value: f64,
    pub runs: Vec<GridRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub label: String,
    pub mechanism: MechanismId,
    pub sweep_value: f64,
    pub delta: u32,
    pub num_buyers: usize,
    pub seed: u64,
    pub mean_welfare: f64,
    pub welfare_std: f64,
    pub mean_winner_count: f64,
    pub mean_revenue: f64,
    pub replications: u64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Clears replication `rep` of every run in `point`, reusing the generated
/// market when consecutive runs share a generator configuration.
pub fn clear_replication(
    point: &GridPoint,
    replication: u64,
) -> Result<Vec<(Instance, AuctionOutcome)>> {
    let mut out: Vec<(Instance, AuctionOutcome)> = Vec::with_capacity(point.runs.len());
    let mut prev: Option<(&GeneratorConfig, Instance)> = None;
    for run in &point.runs {
        let instance = match &prev {
            Some((cfg, inst)) if *cfg == &run.generator => inst.clone(),
            _ => generate_instance(&run.generator, replication)?,
        };
        let outcome = run
            .mechanism
            .clear(&instance)
            .map_err(|e| Error::Replication {
                seed: run.generator.seed,
                replication,
                source: Box::new(e),
            })?;
        prev = Some((&run.generator, instance.clone()));
        out.push((instance, outcome));
    }
    Ok(out)
}

/// Paired Monte Carlo over one grid point.
pub fn run_point(point: &GridPoint, replications: u64) -> Result<Vec<MetricsSummary>> {
    if point.runs.is_empty() {
        return Err(Error::Config("grid point has no runs".into()));
    }
    for run in &point.runs {
        run.generator.validate()?;
    }
    // (welfare, winners, revenue) per replication per run, in replication order
    let records: Vec<Vec<(f64, f64, f64)>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            clear_replication(point, rep).map(|cleared| {
                cleared
                    .iter()
                    .map(|(_, o)| (o.social_welfare, o.winners.len() as f64, o.seller_revenue))
                    .collect()
            })
        })
        .collect::<Result<_>>()?;

    Ok(point
        .runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let welfare: Vec<f64> = records.iter().map(|r| r[i].0).collect();
            let winners: Vec<f64> = records.iter().map(|r| r[i].1).collect();
            let revenue: Vec<f64> = records.iter().map(|r| r[i].2).collect();
            let (mean_welfare, welfare_std) = mean_std(&welfare);
            MetricsSummary {
                label: run.label.clone(),
                mechanism: run.mechanism.id,
                sweep_value: point.sweep_value,
                delta: run.generator.delta,
                num_buyers: run.generator.num_buyers,
                seed: run.generator.seed,
                mean_welfare,
                welfare_std,
                mean_winner_count: mean_std(&winners).0,
                mean_revenue: mean_std(&revenue).0,
                replications,
            }
        })
        .collect())
}

/// Runs every grid point; summaries come back in (point, run) order.
pub fn run_sweep(points: &[GridPoint], replications: u64) -> Result<Vec<MetricsSummary>> {
    if points.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut all = Vec::new();
    for point in points {
        all.extend(run_point(point, replications)?);
    }
    Ok(all)
}
