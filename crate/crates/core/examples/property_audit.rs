//! Audits individual rationality and budget balance over a preset sweep and
//! probes every buyer of the first markets for profitable misreports.

use flexauction::experiment::{audit_exit_status, cmd_audit, preset, AuditOptions};

fn main() {
    let mut spec = preset("fig1").expect("built-in preset");
    spec.replications = 200;
    let opts = AuditOptions {
        manipulation_instances: 3,
        ..AuditOptions::default()
    };
    let report = cmd_audit(&spec, &opts).expect("audit runs");

    println!("outcomes checked     {}", report.instances_checked);
    println!("IR violations        {}", report.ir_violations);
    println!("BB violations        {}", report.bb_violations);
    println!("SCS exceptions       {}", report.scs_exceptions);
    println!("manipulation probes  {}", report.manipulation_samples);
    println!(
        "max / mean gain      {:.4} / {:.6}",
        report.max_manipulation_gain, report.mean_manipulation_gain
    );
    for bucket in &report.gain_histogram {
        println!("  gain <= {:<6} {}", bucket.upper, bucket.count);
    }
    println!("exit status          {:?}", audit_exit_status(&report));
}
