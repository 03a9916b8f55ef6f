//! Clears a hand-built three-band market with GMWD and prints who won,
//! what they pay and where their channels came from.

use flexauction::{clear, rank_buyers, Ask, Bid, Instance, SemCoefficients, StopPolicy};

fn main() -> flexauction::Result<()> {
    let sem = SemCoefficients::new(vec![4.0, 2.0, 1.0])?;
    let ask = Ask::new(vec![6, 8, 10], 1.0)?;
    let bids = vec![
        Bid::new("alpha", vec![4, 2, 0], vec![2, 0, 0], 70.0)?,
        Bid::new("bravo", vec![3, 3, 2], vec![1, 2, 0], 66.0)?,
        Bid::fixed("charlie", vec![0, 4, 6], 30.0)?,
        Bid::new("delta", vec![2, 0, 8], vec![0, 0, 4], 28.0)?,
        Bid::fixed("echo", vec![1, 1, 1], 10.0)?,
    ];
    let market = Instance::new(sem, ask, bids)?;

    println!("equivalent supply {}", market.equivalent_supply());
    println!("{:<8} {:>10} {:>10}", "buyer", "eq demand", "eq price");
    for r in rank_buyers(&market)? {
        println!(
            "{:<8} {:>10.1} {:>10.3}",
            r.buyer_id, r.equivalent_demand, r.equivalent_price
        );
    }

    for policy in [StopPolicy::Break, StopPolicy::Skip] {
        let out = clear(&market, policy)?;
        println!("\n{policy:?}: unit price {:?}", out.clearing_unit_price);
        for w in &out.winners {
            let alloc: Vec<String> = out.allocation[w]
                .iter()
                .map(|x| format!("{x:.2}"))
                .collect();
            println!(
                "  {w:<8} pays {:>7.2}  channels [{}]",
                out.payments[w],
                alloc.join(", ")
            );
        }
        println!(
            "  welfare {:.2}, seller revenue {:.2}",
            out.social_welfare, out.seller_revenue
        );
    }
    Ok(())
}
