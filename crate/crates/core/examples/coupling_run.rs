//! Couple two `(3, [0.2, 0.9])` chains until they coincide.
//!
//! The coupling alternates between independent evolution, a contraction
//! phase driven by shared heavy additions at the boundary, and a merging
//! phase that cancels the remaining difference one avalanche at a time.

use rand::Rng;
use zhang_sandpile::coupling::{run_coupling, CouplingConstants};
use zhang_sandpile::{rng, ChainConfig, ChainParams};

fn main() -> zhang_sandpile::Result<()> {
    let (n, a, b) = (3, 0.2, 0.9);
    let params = ChainParams::new(n, a, b)?;
    let k = CouplingConstants::new(a, b, n)?;
    println!(
        "epsilon {:.6}  k_eps {}  t_eps {}  contraction rate {:.6}",
        k.eps1, k.k_eps, k.t_eps, k.rate
    );
    println!(
        "{:>4} {:>8} {:>9} {:>8} {:>22}",
        "seed", "merged", "time", "restarts", "phase steps (I/C/M)"
    );
    for seed in 0..10 {
        let mut r = rng::stream(seed, rng::INITIAL_CONFIG);
        let mut random = || ChainConfig::new((0..n).map(|_| r.random::<f64>()).collect());
        let (x, y) = (random()?, random()?);
        let res = run_coupling(params, &x, &y, seed, 1_000_000)?;
        let t = res.merge_time.map_or("-".to_string(), |t| t.to_string());
        println!(
            "{seed:>4} {:>8} {t:>9} {:>8} {:>22}",
            res.merged,
            res.restarts,
            format!("{:?}", res.phase_times)
        );
    }
    Ok(())
}
