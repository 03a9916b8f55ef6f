//! Measures how far greedy clearing falls short of the exact optimum on
//! small generated markets.

use flexauction::oracle::DEFAULT_MAX_BUYERS;
use flexauction::{clear, generate_instance, solve_exact, GeneratorConfig, StopPolicy};

fn main() -> flexauction::Result<()> {
    println!(
        "{:>3} {:>6} {:>10} {:>10} {:>8}",
        "M", "delta", "greedy", "optimum", "ratio"
    );
    for m in [6, 9, 12] {
        for delta in [0, 4, 8] {
            let cfg = GeneratorConfig {
                num_buyers: m,
                delta,
                seed: 7,
                ..GeneratorConfig::default()
            };
            let (mut g, mut o) = (0.0, 0.0);
            for rep in 0..200 {
                let inst = generate_instance(&cfg, rep)?;
                g += clear(&inst, StopPolicy::Break)?.social_welfare;
                o += solve_exact(&inst, DEFAULT_MAX_BUYERS)?.optimal_welfare;
            }
            println!(
                "{m:>3} {delta:>6} {:>10.1} {:>10.1} {:>8.4}",
                g / 200.0,
                o / 200.0,
                g / o
            );
        }
    }
    Ok(())
}
