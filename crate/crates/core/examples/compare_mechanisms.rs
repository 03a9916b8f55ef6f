//! Clears the same generated markets with GMWD, TCDA and THIMBLE-approx and
//! compares mean welfare, winners and revenue.

use flexauction::{generate_instance, GeneratorConfig, MechanismConfig, MechanismId};

fn main() -> flexauction::Result<()> {
    let cfg = GeneratorConfig {
        num_buyers: 20,
        delta: 4,
        ..GeneratorConfig::default()
    };
    let reps = 500;
    println!(
        "{} markets, M={}, delta={}",
        reps, cfg.num_buyers, cfg.delta
    );
    println!(
        "{:<16} {:>10} {:>9} {:>10}",
        "mechanism", "welfare", "winners", "revenue"
    );
    for id in MechanismId::ALL {
        let mech = MechanismConfig::new(id);
        let (mut welfare, mut winners, mut revenue) = (0.0, 0.0, 0.0);
        for rep in 0..reps {
            let out = mech.clear(&generate_instance(&cfg, rep)?)?;
            welfare += out.social_welfare;
            winners += out.winners.len() as f64;
            revenue += out.seller_revenue;
        }
        let n = reps as f64;
        println!(
            "{:<16} {:>10.1} {:>9.2} {:>10.1}",
            id.label(),
            welfare / n,
            winners / n,
            revenue / n
        );
    }
    Ok(())
}
