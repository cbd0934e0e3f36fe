//! Density thresholds on a 32 x 32 torus.
//!
//! Low-density iid configurations settle; constant density above 1, the
//! checkerboard at 0.55 and near-full configurations at 0.8 keep toppling
//! until the cutoff.

use zhang_sandpile::lattice::{
    stabilizability_experiment, Boundary, DensitySpec, Geometry, LatticeExperiment,
};

fn main() -> zhang_sandpile::Result<()> {
    let geometry = Geometry::cube(2, 32, Boundary::Torus)?;
    let specs = [
        DensitySpec::IidUniform { rho: 0.4 },
        DensitySpec::Constant { rho: 0.45 },
        DensitySpec::Checkerboard { rho: 0.55 },
        DensitySpec::NearFull { rho: 0.8 },
        DensitySpec::Constant { rho: 1.1 },
    ];
    for density in specs {
        let exp = LatticeExperiment::new(geometry.clone(), density, 50.0, 4, 11);
        let s = stabilizability_experiment(&exp)?;
        let min_m: Vec<u64> = s.replicas.iter().map(|r| r.min_topplings).collect();
        println!(
            "{:<13} rho {:.2}: stabilized {:.2}  min M {:?}  slope {}",
            density.kind(),
            density.rho(),
            s.fraction_stabilized,
            min_m,
            s.median_active_slope
                .map_or("-".into(), |x| format!("{x:.3}"))
        );
    }
    Ok(())
}
