//! Random initial configurations with prescribed density.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SandpileError};
use crate::lattice::config::LatticeConfig;
use crate::lattice::geometry::{Boundary, Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    /// Heights iid uniform on `[0, 2ρ]`.
    IidUniform { rho: f64 },
    /// Every height equal to `ρ`.
    Constant { rho: f64 },
    /// `2ρ` on one parity class, `0` on the other; the class is chosen by a fair coin.
    Checkerboard { rho: f64 },
    /// Every height at least `ℓ = 1 - 1/(2d)` with mean `ρ`, for `ℓ < ρ < 1`.
    ///
    /// Heights are iid: with probability `p = (ρ-ℓ)/(3-2ℓ-ρ)` uniform on the
    /// unstable band `[1, 2-ℓ]`, otherwise uniform on `[ℓ, ρ]`.
    NearFull { rho: f64 },
}

impl DensitySpec {
    pub fn rho(&self) -> f64 {
        match *self {
            DensitySpec::IidUniform { rho }
            | DensitySpec::Constant { rho }
            | DensitySpec::Checkerboard { rho }
            | DensitySpec::NearFull { rho } => rho,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DensitySpec::IidUniform { .. } => "iid-uniform",
            DensitySpec::Constant { .. } => "constant",
            DensitySpec::Checkerboard { .. } => "checkerboard",
            DensitySpec::NearFull { .. } => "near-full",
        }
    }

    /// Build from a generator name (`iid`, `iid-uniform`, `constant`,
    /// `checkerboard`, `near-full`) and a density.
    pub fn from_name(name: &str, rho: f64) -> Result<Self> {
        match name {
            "iid" | "iid-uniform" => Ok(DensitySpec::IidUniform { rho }),
            "constant" => Ok(DensitySpec::Constant { rho }),
            "checkerboard" => Ok(DensitySpec::Checkerboard { rho }),
            "near-full" => Ok(DensitySpec::NearFull { rho }),
            other => Err(SandpileError::Parse(format!("unknown generator `{other}`"))),
        }
    }

    /// Human-readable law of a single height on `geometry`.
    pub fn law(&self, geometry: &Geometry) -> String {
        match *self {
            DensitySpec::IidUniform { rho } => format!("iid U[0, {}]", 2.0 * rho),
            DensitySpec::Constant { rho } => format!("constant {rho}"),
            DensitySpec::Checkerboard { rho } => {
                format!("{} on a random parity class, 0 elsewhere", 2.0 * rho)
            }
            DensitySpec::NearFull { rho } => {
                let l = near_full_floor(geometry.dim());
                let p = near_full_mix(l, rho);
                format!("iid mixture: p={p} U[1, {}], 1-p U[{l}, {rho}]", 2.0 - l)
            }
        }
    }

    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        let rho = self.rho();
        if rho < 0.0 || !rho.is_finite() {
            return Err(SandpileError::InvalidParameter(format!(
                "density must be finite and nonnegative, got {rho}"
            )));
        }
        match *self {
            DensitySpec::Checkerboard { .. } => {
                if geometry.boundary() == Boundary::Torus
                    && geometry.sides().iter().any(|s| s % 2 != 0)
                {
                    return Err(SandpileError::GeometryMismatch(format!(
                        "checkerboard on a torus needs even sides, got {:?}",
                        geometry.sides()
                    )));
                }
            }
            DensitySpec::NearFull { rho } => {
                let l = near_full_floor(geometry.dim());
                if !(rho > l && rho < 1.0) {
                    return Err(SandpileError::InvalidParameter(format!(
                        "near-full needs {l} < rho < 1 in dimension {}, got {rho}",
                        geometry.dim()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn near_full_floor(dim: usize) -> f64 {
    1.0 - 1.0 / (2 * dim) as f64
}

fn near_full_mix(l: f64, rho: f64) -> f64 {
    (rho - l) / (3.0 - 2.0 * l - rho)
}

pub fn generate<R: Rng + ?Sized>(
    spec: &DensitySpec,
    geometry: &Geometry,
    rng: &mut R,
) -> Result<LatticeConfig> {
    spec.validate(geometry)?;
    let n = geometry.n_sites();
    let heights = match *spec {
        DensitySpec::IidUniform { rho } => {
            (0..n).map(|_| 2.0 * rho * rng.random::<f64>()).collect()
        }
        DensitySpec::Constant { rho } => vec![rho; n],
        DensitySpec::Checkerboard { rho } => {
            let class = usize::from(rng.random::<bool>());
            (0..n)
                .map(|x| {
                    if geometry.parity(x) == class {
                        2.0 * rho
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        DensitySpec::NearFull { rho } => {
            let l = near_full_floor(geometry.dim());
            let p = near_full_mix(l, rho);
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    if rng.random::<f64>() < p {
                        1.0 + (1.0 - l) * u
                    } else {
                        l + (rho - l) * u
                    }
                })
                .collect()
        }
    };
    LatticeConfig::new(geometry.clone(), heights)
}
