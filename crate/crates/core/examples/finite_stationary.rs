//! Stationary marginals of the `(N, [a, b])` chain.
//!
//! With `[a, b] = [0.6, 0.8]` the one-site marginals of a long chain
//! concentrate near `(a + b) / 2 = 0.7`. Two runs from opposite corners of
//! the state space produce nearly the same histograms.

use zhang_sandpile::{empirical_tv_distance, ChainConfig, ChainParams, ChainProcess};

fn main() -> zhang_sandpile::Result<()> {
    let params = ChainParams::new(30, 0.6, 0.8)?;
    let stats = ChainProcess::new(params, ChainConfig::zeros(30)?, 1)?
        .run_stationary(20_000, 100_000, 256)?;
    println!("N = 30, [a, b] = [0.6, 0.8]");
    for site in [0, 1, 2, 14, 15, 27, 28, 29] {
        println!(
            "  site {:>2}: mean {:.4}  variance {:.5}",
            site + 1,
            stats.mean(site),
            stats.variance(site)
        );
    }

    let params = ChainParams::new(5, 0.3, 0.9)?;
    let low = ChainProcess::new(params, ChainConfig::zeros(5)?, 2)?
        .run_stationary(10_000, 100_000, 64)?;
    let high = ChainProcess::new(params, ChainConfig::new(vec![0.99; 5])?, 3)?
        .run_stationary(10_000, 100_000, 64)?;
    println!("N = 5, [a, b] = [0.3, 0.9], starts all-zero and all-0.99");
    for site in 0..5 {
        println!(
            "  site {}: TV distance {:.4}",
            site + 1,
            empirical_tv_distance(&low, &high, site)?
        );
    }
    Ok(())
}
