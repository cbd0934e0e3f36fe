//! Mass bookkeeping during a Markov toppling run.
//!
//! On a torus the total mass never changes and every height satisfies
//! `η(t) = η(0) - L + (1/2d) Σ_neighbours L`. In a box the boundary
//! topplings lose mass, and the loss is accounted for exactly. Boxes in
//! which every site has toppled carry at least `β/(2d)` mass.

use zhang_sandpile::lattice::{
    bond_bound_check, box_region, generate, markov_run, snapshot, Boundary, DensitySpec, Geometry,
    MarkovOptions, MassLedger,
};
use zhang_sandpile::rng;

fn main() -> zhang_sandpile::Result<()> {
    for boundary in [Boundary::Torus, Boundary::DissipativeBox] {
        let geometry = Geometry::cube(2, 24, boundary)?;
        let mut r = rng::stream(5, rng::REPLICA_BASE);
        let mut config = generate(&DensitySpec::Constant { rho: 1.05 }, &geometry, &mut r)?;
        let mut ledger = MassLedger::for_config(&config);
        let options = MarkovOptions {
            t_max: 20.0,
            check_identity: true,
            ..MarkovOptions::default()
        };
        let verdict = markov_run(&mut config, &mut ledger, &options, &mut r)?;
        let worst =
            verdict
                .trace
                .iter()
                .filter_map(|s| s.identity)
                .fold((0.0f64, 0.0f64), |acc, id| {
                    (
                        acc.0.max(id.max_site_residual),
                        acc.1.max(id.global_residual),
                    )
                });
        println!(
            "{boundary}: {} after {} events, dissipated {:.3}, worst residuals site {:.1e} global {:.1e}",
            verdict.outcome.label(),
            verdict.events,
            verdict.dissipated,
            worst.0,
            worst.1
        );

        let region = box_region(&geometry, &[4, 4], &[6, 6])?;
        match bond_bound_check(&config, &region, &ledger)? {
            zhang_sandpile::lattice::BondCheck::Checked { mass, bound, bonds } => {
                println!("  6x6 box: mass {mass:.3} >= {bonds} bonds / 4 = {bound:.3}");
            }
            other => println!("  6x6 box not eligible: {other:?}"),
        }

        let path = std::env::temp_dir().join(format!("zhang-{boundary}.csv"));
        snapshot::write_csv(
            std::fs::File::create(&path)?,
            &config,
            verdict.final_time,
            5,
        )?;
        println!("  final heights written to {}", path.display());
    }
    Ok(())
}
