//! Under synchronous rounds a checkerboard with `ρ ≥ 1/2` swaps parity
//! classes forever. Under the Poisson clocks the same start behaves
//! differently depending on `ρ`.

use zhang_sandpile::lattice::{
    markov_run, parallel_round, Boundary, Geometry, LatticeConfig, MarkovOptions, MassLedger,
};
use zhang_sandpile::rng;

fn checkerboard(g: &Geometry, rho: f64) -> zhang_sandpile::Result<LatticeConfig> {
    let h = (0..g.n_sites())
        .map(|x| if g.parity(x) == 0 { 2.0 * rho } else { 0.0 })
        .collect();
    LatticeConfig::new(g.clone(), h)
}

fn main() -> zhang_sandpile::Result<()> {
    let g = Geometry::cube(2, 16, Boundary::Torus)?;
    for rho in [0.5, 0.6, 0.9] {
        let start = checkerboard(&g, rho)?;
        let mut c = start.clone();
        let mut period_two = true;
        for round in 1..=1000 {
            let (next, toppled) = parallel_round(&c);
            c = next;
            period_two &= toppled == g.n_sites() / 2 && (round % 2 == 1 || c == start);
        }
        let mut m = start.clone();
        let mut ledger = MassLedger::for_config(&m);
        let options = MarkovOptions {
            t_max: 50.0,
            ..MarkovOptions::default()
        };
        let v = markov_run(
            &mut m,
            &mut ledger,
            &options,
            &mut rng::stream(1, rng::REPLICA_BASE),
        )?;
        println!(
            "rho {rho}: 1000 parallel rounds with period 2: {period_two}; Poisson clocks: {} (min M {})",
            v.outcome.label(),
            v.min_topplings
        );
    }
    Ok(())
}
