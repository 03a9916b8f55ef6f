use std::path::PathBuf;

use flexauction::audit::{
    manipulation_gain_search, strong_consumer_sovereignty_holds, ManipulationGrid,
};
use flexauction::experiment::{
    audit_exit_status, audit_point_with, cmd_audit, cmd_experiment, preset, AuditOptions,
    ExitStatus, PRESET_NAMES,
};
use flexauction::{generate_instance, GeneratorConfig, MechanismConfig, MechanismId};

#[test]
fn inflated_payments_are_flagged() {
    let spec = preset("fig1").unwrap();
    let point = &spec.grid().unwrap()[0];
    let honest = audit_point_with(point, 20, |m, inst| m.clear(inst)).unwrap();
    assert_eq!(audit_exit_status(&honest), ExitStatus::Success);

    let report = audit_point_with(point, 20, |m, inst| {
        let mut out = m.clear(inst)?;
        for (id, p) in out.payments.iter_mut() {
            *p = 1.5 * inst.bid(id).unwrap().price();
        }
        Ok(out)
    })
    .unwrap();
    assert!(report.ir_violations > 0);
    assert_eq!(audit_exit_status(&report), ExitStatus::Violation);
}

#[test]
fn understated_revenue_is_flagged() {
    let spec = preset("fig3").unwrap();
    let point = &spec.grid().unwrap()[2];
    let report = audit_point_with(point, 10, |m, inst| {
        let mut out = m.clear(inst)?;
        if !out.winners.is_empty() {
            out.seller_revenue = out.total_payments() + 1.0;
        }
        Ok(out)
    })
    .unwrap();
    assert!(report.bb_violations > 0);
    assert_eq!(audit_exit_status(&report), ExitStatus::Violation);
}

#[test]
fn manipulation_probe_on_small_markets() {
    let grid = ManipulationGrid::default();
    let mut gains = Vec::new();
    let mut scs_exceptions = 0;
    for rep in 0..100 {
        let cfg = GeneratorConfig {
            num_buyers: 8,
            delta: (rep % 11) as u32,
            seed: 31,
            ..GeneratorConfig::default()
        };
        let inst = generate_instance(&cfg, rep).unwrap();
        let mech = MechanismConfig::new(MechanismId::Gmwd);
        let out = mech.clear(&inst).unwrap();
        if !strong_consumer_sovereignty_holds(&inst, &out) {
            scs_exceptions += 1;
        }
        for bid in inst.bids() {
            let g = manipulation_gain_search(&inst, bid.buyer_id(), &mech, &grid).unwrap();
            assert!(g.is_finite() && g >= 0.0);
            gains.push(g);
        }
    }
    let max = gains.iter().cloned().fold(0.0, f64::max);
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    println!(
        "800 buyer probes: max gain {max:.3}, mean gain {mean:.4}, profitable {}, scs exceptions {scs_exceptions}",
        gains.iter().filter(|&&g| g > 1e-9).count()
    );
}

#[test]
fn audit_report_counts_and_merges() {
    let mut spec = preset("fig1").unwrap();
    spec.replications = 6;
    let opts = AuditOptions {
        manipulation_instances: 2,
        ..AuditOptions::default()
    };
    let report = cmd_audit(&spec, &opts).unwrap();
    assert_eq!(report.instances_checked, 6 * 24);
    assert!(!report.has_violations());
    assert!(report.manipulation_samples > 0);
    let bucketed: u64 = report.gain_histogram.iter().map(|b| b.count).sum();
    assert_eq!(bucketed, report.manipulation_samples);
    assert!(report.max_manipulation_gain >= report.mean_manipulation_gain);
}

#[test]
fn presets_match_golden_csv() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in PRESET_NAMES {
        let mut spec = preset(name).unwrap();
        spec.replications = 25;
        let csv = cmd_experiment(&spec).unwrap();
        let path = dir.join(format!("{name}_r25.csv"));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &csv).unwrap();
        }
        assert_eq!(csv, std::fs::read_to_string(&path).unwrap(), "{name}");
    }
}
