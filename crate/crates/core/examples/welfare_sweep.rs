//! Runs a paired Monte Carlo sweep over the adjustable range and prints the
//! CSV. Pass a preset name (fig1..fig4) to run that instead.

use flexauction::experiment::{cmd_experiment, preset, ExperimentSpec, SeriesSpec, SweepVariable};
use flexauction::{GeneratorConfig, MechanismId};

fn main() {
    let spec = match std::env::args().nth(1) {
        Some(name) => {
            let mut spec = preset(&name).expect("fig1, fig2, fig3 or fig4");
            spec.replications = 1000;
            spec
        }
        None => ExperimentSpec {
            name: "delta-sweep".into(),
            generator: GeneratorConfig {
                num_buyers: 12,
                ..GeneratorConfig::default()
            },
            mechanisms: vec![
                SeriesSpec::new(MechanismId::Gmwd),
                SeriesSpec::new(MechanismId::Tcda),
                SeriesSpec::new(MechanismId::Thimble),
            ],
            sweep_variable: SweepVariable::Delta,
            sweep_values: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            replications: 1000,
            output_path: None,
        },
    };
    print!("{}", cmd_experiment(&spec).expect("sweep runs"));
}
