use crate::chain::THRESHOLD;
use crate::error::{Result, SandpileError};
use crate::lattice::geometry::Geometry;

/// Heights on a finite lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    geometry: Geometry,
    heights: Vec<f64>,
}

impl LatticeConfig {
    pub fn new(geometry: Geometry, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != geometry.n_sites() {
            return Err(SandpileError::GeometryMismatch(format!(
                "{} heights for {} sites",
                heights.len(),
                geometry.n_sites()
            )));
        }
        if let Some(&h) = heights.iter().find(|h| **h < 0.0 || !h.is_finite()) {
            return Err(SandpileError::InvalidHeight(h));
        }
        Ok(LatticeConfig { geometry, heights })
    }

    pub fn constant(geometry: Geometry, h: f64) -> Result<Self> {
        let n = geometry.n_sites();
        Self::new(geometry, vec![h; n])
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub(crate) fn heights_mut(&mut self) -> &mut [f64] {
        &mut self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.heights.iter().sum()
    }

    pub fn mean_height(&self) -> f64 {
        self.total_mass() / self.len() as f64
    }

    pub fn is_unstable_at(&self, x: usize) -> bool {
        self.heights[x] >= THRESHOLD
    }

    pub fn unstable_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&x| self.is_unstable_at(x))
    }

    pub fn is_stable(&self) -> bool {
        self.heights.iter().all(|&h| h < THRESHOLD)
    }

    pub(crate) fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.len() {
            Err(SandpileError::SiteOutOfRange {
                site: x,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }
}
