//! One addition, three orders: `(0, 0, 1.4, 1.2, 0, 0)` stabilizes to three
//! different configurations depending on which unstable site topples first.
//!
//! ```text
//! cargo run --example three_orders
//! ```

use zhang_sandpile::{rng, ChainConfig, TopplingPolicy};

fn main() -> zhang_sandpile::Result<()> {
    let start = [0.0, 0.0, 1.4, 1.2, 0.0, 0.0];
    let mut unused = rng::stream(0, rng::FINITE_CHAIN);
    for policy in [
        TopplingPolicy::LeftmostFirst,
        TopplingPolicy::RightmostFirst,
        TopplingPolicy::ParallelRounds,
    ] {
        let mut chain = ChainConfig::new(start.to_vec())?;
        let log = chain.stabilize(policy, &mut unused)?;
        let heights: Vec<String> = chain
            .heights()
            .iter()
            .map(|h| format!("{:.4}", h))
            .collect();
        println!("{policy:?}");
        println!("  heights    {}", heights.join("  "));
        println!("  topplings  {:?}", log.counts);
        println!("  dissipated {:.4}", log.dissipated);
    }
    Ok(())
}
