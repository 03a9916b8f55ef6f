use flexauction::experiment::{preset, SeriesSpec};
use flexauction::sim::{clear_replication, run_point, GridPoint, GridRun};
use flexauction::{
    clear, clear_tcda, generate_instance, GeneratorConfig, MechanismConfig, MechanismId, StopPolicy,
};
use statrs::distribution::{DiscreteCDF, Poisson};

/// P(D < delta) for D ~ Poisson(mu), mu ~ U[lo, hi], by the midpoint rule.
fn clipping_mass(delta: u32, (lo, hi): (f64, f64)) -> f64 {
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    (0..steps)
        .map(|i| {
            let mu = lo + (i as f64 + 0.5) * h;
            Poisson::new(mu).unwrap().cdf(u64::from(delta) - 1)
        })
        .sum::<f64>()
        / steps as f64
}

#[test]
fn clipping_rate_matches_poisson_tail() {
    let cfg = GeneratorConfig {
        delta: 10,
        ..GeneratorConfig::default()
    };
    let (mut clipped, mut total) = (0u64, 0u64);
    for rep in 0..2000 {
        for bid in generate_instance(&cfg, rep).unwrap().bids() {
            for (&d, &a) in bid.base_demand().iter().zip(bid.adjust_range()) {
                assert_eq!(a, d.min(10));
                clipped += u64::from(a < 10);
                total += 1;
            }
        }
    }
    let observed = clipped as f64 / total as f64;
    let expected = clipping_mass(10, cfg.demand_mean_range);
    assert!(
        (observed - expected).abs() < 0.01,
        "observed {observed}, expected {expected}"
    );
}

#[test]
fn generation_is_reproducible_and_paired() {
    let base = GeneratorConfig::default();
    let a = generate_instance(&base, 7).unwrap();
    assert_eq!(a, generate_instance(&base, 7).unwrap());
    assert_ne!(a, generate_instance(&base, 8).unwrap());

    // delta only changes the adjustable ranges
    let wide = generate_instance(
        &GeneratorConfig {
            delta: 6,
            ..base.clone()
        },
        7,
    )
    .unwrap();
    assert_eq!(wide.without_adjustment(), a);

    // the first buyers are shared across market sizes
    let big = generate_instance(
        &GeneratorConfig {
            num_buyers: 30,
            ..base.clone()
        },
        7,
    )
    .unwrap();
    assert_eq!(&big.bids()[..15], a.bids());
    assert_eq!(big.ask(), a.ask());
}

fn supply_variance(cfg: &GeneratorConfig, reps: u64) -> f64 {
    let draws: Vec<f64> = (0..reps)
        .map(|r| f64::from(generate_instance(cfg, r).unwrap().ask().supply()[0]))
        .collect();
    let mean = draws.iter().sum::<f64>() / reps as f64;
    draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64
}

#[test]
fn frozen_supply_means_remove_mixture_variance() {
    let cfg = GeneratorConfig {
        supply_mean_range: (10.0, 1000.0),
        ..GeneratorConfig::default()
    };
    // Poisson variance is at most 1000; the uniform mixture adds about 990^2 / 12
    let free = supply_variance(&cfg, 600);
    let frozen = supply_variance(
        &GeneratorConfig {
            freeze_supply_means: true,
            ..cfg
        },
        600,
    );
    assert!(frozen < 2000.0, "{frozen}");
    assert!(free > 40_000.0, "{free}");
}

#[test]
fn invalid_generator_configs_are_rejected() {
    let bad = [
        GeneratorConfig {
            num_bands: 0,
            rho: vec![],
            ..Default::default()
        },
        GeneratorConfig {
            rho: vec![1.0; 4],
            ..Default::default()
        },
        GeneratorConfig {
            demand_mean_range: (0.0, 4.0),
            ..Default::default()
        },
        GeneratorConfig {
            supply_mean_range: (9.0, 2.0),
            ..Default::default()
        },
        GeneratorConfig {
            reserve: -1.0,
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(generate_instance(&cfg, 0).is_err(), "{cfg:?}");
    }
}

#[test]
fn sweep_pairs_tcda_with_undelta_gmwd() {
    let gen = GeneratorConfig {
        delta: 4,
        ..GeneratorConfig::default()
    };
    let point = GridPoint {
        sweep_value: 4.0,
        runs: vec![
            GridRun {
                label: "TCDA".into(),
                generator: gen.clone(),
                mechanism: MechanismConfig::new(MechanismId::Tcda),
            },
            GridRun {
                label: "GMWD".into(),
                generator: GeneratorConfig {
                    delta: 0,
                    ..gen.clone()
                },
                mechanism: MechanismConfig::new(MechanismId::Gmwd),
            },
        ],
    };
    let rows = run_point(&point, 300).unwrap();
    assert_eq!(
        rows[0].mean_welfare.to_bits(),
        rows[1].mean_welfare.to_bits()
    );
    for rep in 0..20 {
        let cleared = clear_replication(&point, rep).unwrap();
        let inst = &cleared[0].0;
        assert_eq!(clear_tcda(inst).unwrap(), {
            let mut g = clear(&inst.without_adjustment(), StopPolicy::Break).unwrap();
            g.mechanism = MechanismId::Tcda;
            g
        });
    }
}

#[test]
fn summaries_report_sample_statistics() {
    let spec = preset("fig3").unwrap();
    let point = &spec.grid().unwrap()[1];
    let reps = 50;
    let rows = run_point(point, reps).unwrap();
    for (i, row) in rows.iter().enumerate() {
        let welfare: Vec<f64> = (0..reps)
            .map(|r| clear_replication(point, r).unwrap()[i].1.social_welfare)
            .collect();
        let mean = welfare.iter().sum::<f64>() / reps as f64;
        let var = welfare.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((row.mean_welfare - mean).abs() < 1e-9 * mean.max(1.0));
        assert!((row.welfare_std - var.sqrt()).abs() < 1e-9 * var.sqrt().max(1.0));
        assert_eq!(row.replications, reps);
    }
}

#[test]
fn series_labels_name_overrides() {
    assert_eq!(
        SeriesSpec::new(MechanismId::Gmwd).buyers(5).label(),
        "GMWD[M=5]"
    );
    assert_eq!(
        SeriesSpec::new(MechanismId::Gmwd).demand_width(8.0).label(),
        "GMWD[w=8]"
    );
    assert_eq!(
        SeriesSpec::new(MechanismId::Thimble).label(),
        "THIMBLE-approx"
    );
}
