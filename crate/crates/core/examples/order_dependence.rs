//! A configuration on a long line whose fate depends on the toppling order.
//!
//! In `(.., 0.9, 0.9, 0, 1.4, 1.2, 0, 0.9, 0.9, ..)` toppling the left
//! unstable site first reaches a stable configuration after two topplings.
//! Toppling the right one first instead leaves two unstable sites that
//! restart the cascade.

use zhang_sandpile::lattice::{topple_lattice, Boundary, Geometry, LatticeConfig, MassLedger};

fn line() -> zhang_sandpile::Result<LatticeConfig> {
    let core = [0.0, 1.4, 1.2, 0.0];
    let mut h = vec![0.9; 40];
    h[18..22].copy_from_slice(&core);
    LatticeConfig::new(Geometry::cube(1, 40, Boundary::Torus)?, h)
}

fn show(label: &str, c: &LatticeConfig) {
    let window: Vec<String> = c.heights()[16..24]
        .iter()
        .map(|h| format!("{h:.2}"))
        .collect();
    println!(
        "{label:<12} .. {} ..  stable: {}",
        window.join(" "),
        c.is_stable()
    );
}

fn main() -> zhang_sandpile::Result<()> {
    let start = line()?;
    show("start", &start);

    let mut left = start.clone();
    let mut ledger = MassLedger::for_config(&left);
    topple_lattice(&mut left, 19, &mut ledger)?;
    topple_lattice(&mut left, 20, &mut ledger)?;
    show("left first", &left);

    let mut right = start.clone();
    let mut ledger = MassLedger::for_config(&right);
    topple_lattice(&mut right, 20, &mut ledger)?;
    topple_lattice(&mut right, 19, &mut ledger)?;
    show("right first", &right);
    Ok(())
}
