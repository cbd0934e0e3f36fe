//! Lower bound on the mass of a region in which every site has toppled.
//!
//! Once both endpoints of a bond have toppled, the endpoint whose latest
//! toppling came first has since received at least `1/(2d)` from the other
//! and kept it.
//! Hence `Σ_Λ η ≥ β_Λ / (2d)` once every site of `Λ` has toppled.

use serde::Serialize;

use crate::error::{Result, SandpileError};
use crate::lattice::config::LatticeConfig;
use crate::lattice::engine::MassLedger;
use crate::lattice::geometry::Geometry;

/// Absolute slack allowed for rounding in [`BondCheck::holds`].
pub const BOND_TOLERANCE: f64 = 1e-12;

/// Number of lattice bonds with both endpoints in `region`. Torus
/// adjacency counts; on a side of length 2 the two parallel bonds both count.
pub fn count_internal_bonds(geometry: &Geometry, region: &[usize]) -> Result<usize> {
    let mut inside = vec![false; geometry.n_sites()];
    for &x in region {
        if x >= inside.len() {
            return Err(SandpileError::SiteOutOfRange {
                site: x,
                len: inside.len(),
            });
        }
        inside[x] = true;
    }
    let mut bonds = 0;
    for x in (0..inside.len()).filter(|&x| inside[x]) {
        for j in 0..geometry.dim() {
            if geometry.neighbor(x, 2 * j + 1).is_some_and(|y| inside[y]) {
                bonds += 1;
            }
        }
    }
    Ok(bonds)
}

/// Sites of the axis-aligned box with lower corner `corner` and side lengths
/// `extent`. Wraps on a torus; must fit inside a dissipative box.
pub fn box_region(geometry: &Geometry, corner: &[usize], extent: &[usize]) -> Result<Vec<usize>> {
    let d = geometry.dim();
    if corner.len() != d || extent.len() != d {
        return Err(SandpileError::GeometryMismatch(format!(
            "box needs {d} coordinates"
        )));
    }
    let torus = geometry.boundary() == crate::lattice::geometry::Boundary::Torus;
    for j in 0..d {
        let side = geometry.sides()[j];
        let fits = if torus {
            corner[j] < side && extent[j] <= side
        } else {
            corner[j] + extent[j] <= side
        };
        if extent[j] == 0 || !fits {
            return Err(SandpileError::GeometryMismatch(format!(
                "box at {corner:?} of extent {extent:?} does not fit {:?}",
                geometry.sides()
            )));
        }
    }
    let count: usize = extent.iter().product();
    let mut sites = Vec::with_capacity(count);
    let mut offset = vec![0; d];
    for _ in 0..count {
        let coords: Vec<usize> = (0..d)
            .map(|j| (corner[j] + offset[j]) % geometry.sides()[j])
            .collect();
        sites.push(geometry.index(&coords)?);
        for j in (0..d).rev() {
            offset[j] += 1;
            if offset[j] < extent[j] {
                break;
            }
            offset[j] = 0;
        }
    }
    Ok(sites)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BondCheck {
    Checked {
        mass: f64,
        bound: f64,
        bonds: usize,
    },
    /// Some site of the region never toppled; the bound does not apply.
    Untoppled {
        sites: usize,
    },
}

impl BondCheck {
    /// `Some(true)` if the bound holds, `None` if the region was not eligible.
    pub fn holds(&self) -> Option<bool> {
        match *self {
            BondCheck::Checked { mass, bound, .. } => Some(mass + BOND_TOLERANCE >= bound),
            BondCheck::Untoppled { .. } => None,
        }
    }
}

pub fn bond_bound_check(
    config: &LatticeConfig,
    region: &[usize],
    ledger: &MassLedger,
) -> Result<BondCheck> {
    if ledger.topplings.len() != config.len() {
        return Err(SandpileError::GeometryMismatch(
            "ledger size differs from lattice".into(),
        ));
    }
    let bonds = count_internal_bonds(config.geometry(), region)?;
    let untoppled = region.iter().filter(|&&x| ledger.topplings[x] == 0).count();
    if untoppled > 0 {
        return Ok(BondCheck::Untoppled { sites: untoppled });
    }
    let mass = region.iter().map(|&x| config.heights()[x]).sum();
    let bound = bonds as f64 / config.geometry().degree() as f64;
    Ok(BondCheck::Checked { mass, bound, bonds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::geometry::Boundary;

    #[test]
    fn bond_counts() {
        let line = Geometry::cube(1, 10, Boundary::DissipativeBox).unwrap();
        let seg: Vec<usize> = (2..7).collect();
        assert_eq!(count_internal_bonds(&line, &seg).unwrap(), 4);

        let g = Geometry::cube(2, 8, Boundary::Torus).unwrap();
        let sq2 = box_region(&g, &[3, 3], &[2, 2]).unwrap();
        assert_eq!(count_internal_bonds(&g, &sq2).unwrap(), 4);
        let sq3 = box_region(&g, &[6, 7], &[3, 3]).unwrap();
        assert_eq!(sq3.len(), 9);
        assert_eq!(count_internal_bonds(&g, &sq3).unwrap(), 12);
        let all: Vec<usize> = (0..64).collect();
        assert_eq!(count_internal_bonds(&g, &all).unwrap(), 128);
    }

    #[test]
    fn box_must_fit_in_box() {
        let g = Geometry::cube(2, 4, Boundary::DissipativeBox).unwrap();
        assert!(box_region(&g, &[3, 0], &[2, 2]).is_err());
        assert_eq!(
            box_region(&g, &[2, 2], &[2, 2]).unwrap(),
            vec![10, 11, 14, 15]
        );
    }

    #[test]
    fn untoppled_region_is_reported() {
        let g = Geometry::cube(1, 4, Boundary::Torus).unwrap();
        let c = LatticeConfig::constant(g, 0.0).unwrap();
        let ledger = MassLedger::for_config(&c);
        let r = bond_bound_check(&c, &[0, 1], &ledger).unwrap();
        assert_eq!(r, BondCheck::Untoppled { sites: 2 });
        assert_eq!(r.holds(), None);
    }
}
