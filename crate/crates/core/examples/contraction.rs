//! The contraction phase is linear: after `k` sweeps the configuration is
//! `A S + B η(0)` and every entry of `B` is at most `(1 - 2^{-⌈3N/2⌉})^k`.
//! The tracker replays the sweeps on the coefficients and checks the bound.

use zhang_sandpile::coupling::verify_contraction;
use zhang_sandpile::ChainParams;

fn main() -> zhang_sandpile::Result<()> {
    for n in [2, 3, 4, 6] {
        let report = verify_contraction(ChainParams::new(n, 0.2, 0.9)?, 20, 7)?;
        println!(
            "N = {n}: {} steps, longest window {}",
            report.steps, report.max_window
        );
        for row in report.rows.iter().step_by(5) {
            println!(
                "  k {:>2}  max B {:.3e} <= {:.3e}  |diff| {:.3e}  residual {:.1e}",
                row.k, row.max_b, row.b_bound, row.max_diff, row.residual
            );
        }
    }
    Ok(())
}
