//! Shows that a winner's payment does not move when it raises its own bid,
//! and what happens to its utility when it shades below the critical value.

use flexauction::{clear, Ask, Bid, Instance, SemCoefficients, StopPolicy};

fn main() -> flexauction::Result<()> {
    let sem = SemCoefficients::new(vec![2.0, 1.0])?;
    let ask = Ask::new(vec![6, 6], 0.5)?;
    let bids = vec![
        Bid::new("a", vec![3, 2], vec![1, 0], 40.0)?,
        Bid::fixed("b", vec![2, 2], 24.0)?,
        Bid::new("c", vec![2, 4], vec![0, 2], 20.0)?,
    ];
    let market = Instance::new(sem, ask, bids)?;
    let truth = market.bid(&"a".into()).unwrap().price();

    println!(
        "{:>8} {:>6} {:>8} {:>8}",
        "report", "wins", "payment", "utility"
    );
    for report in [12.0, 16.0, 20.0, 30.0, truth, 60.0, 120.0] {
        let bid = market.bid(&"a".into()).unwrap().with_price(report)?;
        let out = clear(&market.with_bid(bid)?, StopPolicy::Break)?;
        let id = "a".into();
        println!(
            "{report:>8.1} {:>6} {:>8.2} {:>8.2}",
            out.is_winner(&id),
            out.payments.get(&id).copied().unwrap_or(0.0),
            out.utility(&id, truth, report)
        );
    }
    Ok(())
}
