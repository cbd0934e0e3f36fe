use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::config::LatticeConfig;
use crate::lattice::density::{generate, DensitySpec};
use crate::lattice::engine::{markov_run, mass_identity_check, MarkovOptions, MassLedger, Outcome};
use crate::lattice::geometry::Geometry;
use crate::rng;

/// Everything needed to reproduce a batch of stabilizability runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeExperiment {
    pub geometry: Geometry,
    pub density: DensitySpec,
    pub t_max: f64,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub active_min_topplings: u64,
}

fn default_threshold() -> u64 {
    MarkovOptions::default().active_min_topplings
}

impl LatticeExperiment {
    pub fn new(
        geometry: Geometry,
        density: DensitySpec,
        t_max: f64,
        replicas: usize,
        seed: u64,
    ) -> Self {
        LatticeExperiment {
            geometry,
            density,
            t_max,
            replicas,
            seed,
            active_min_topplings: default_threshold(),
        }
    }

    pub fn options(&self) -> MarkovOptions {
        MarkovOptions {
            t_max: self.t_max,
            active_min_topplings: self.active_min_topplings,
            ..MarkovOptions::default()
        }
    }
}

/// One replica of a stabilizability experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaResult {
    pub replica: usize,
    pub outcome: Outcome,
    pub min_topplings: u64,
    pub max_topplings: u64,
    pub events: u64,
    pub final_time: f64,
    pub dissipated: f64,
    pub min_topplings_slope: Option<f64>,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Largest per-site residual of the mass identity at the end of the run.
    pub identity_residual: f64,
    /// `|total(t) - total(0) + dissipated|` at the end of the run.
    pub balance_residual: f64,
}

impl ReplicaResult {
    pub fn stabilization_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Stabilized { t } => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub replicas: Vec<ReplicaResult>,
    pub fraction_stabilized: f64,
    pub median_stabilization_time: Option<f64>,
    /// Median min-M slope over runs that did not stabilize.
    pub median_active_slope: Option<f64>,
    pub max_identity_residual: f64,
    pub max_balance_residual: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Run one replica on stream `REPLICA_BASE + replica`; the same stream
/// generates the initial configuration and drives the clocks.
pub fn run_replica(exp: &LatticeExperiment, replica: usize) -> Result<ReplicaResult> {
    run_replica_with_final(exp, replica).map(|(r, _)| r)
}

/// [`run_replica`], also returning the configuration at the end of the run.
pub fn run_replica_with_final(
    exp: &LatticeExperiment,
    replica: usize,
) -> Result<(ReplicaResult, LatticeConfig)> {
    let mut rng = rng::stream(exp.seed, rng::REPLICA_BASE + replica as u64);
    let initial = generate(&exp.density, &exp.geometry, &mut rng)?;
    let mut config = initial.clone();
    let mut ledger = MassLedger::for_config(&config);
    let verdict = markov_run(&mut config, &mut ledger, &exp.options(), &mut rng)?;
    let identity = mass_identity_check(&initial, &config, &ledger)?;
    let result = ReplicaResult {
        replica,
        outcome: verdict.outcome,
        min_topplings: verdict.min_topplings,
        max_topplings: verdict.max_topplings,
        events: verdict.events,
        final_time: verdict.final_time,
        dissipated: verdict.dissipated,
        min_topplings_slope: verdict.min_topplings_slope,
        initial_mass: initial.total_mass(),
        final_mass: config.total_mass(),
        identity_residual: identity.max_site_residual,
        balance_residual: identity.global_residual,
    };
    Ok((result, config))
}

/// Run all replicas in parallel and summarize. Results are in replica order.
pub fn stabilizability_experiment(exp: &LatticeExperiment) -> Result<ExperimentSummary> {
    if exp.replicas == 0 {
        return Err(crate::SandpileError::InvalidParameter(
            "need at least one replica".into(),
        ));
    }
    exp.density.validate(&exp.geometry)?;
    let replicas = (0..exp.replicas)
        .into_par_iter()
        .map(|r| run_replica(exp, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(replicas))
}

pub fn summarize(replicas: Vec<ReplicaResult>) -> ExperimentSummary {
    let stabilized = replicas
        .iter()
        .filter(|r| r.outcome.is_stabilized())
        .count();
    let times = replicas
        .iter()
        .filter_map(ReplicaResult::stabilization_time)
        .collect();
    let slopes = replicas
        .iter()
        .filter(|r| !r.outcome.is_stabilized())
        .filter_map(|r| r.min_topplings_slope)
        .collect();
    ExperimentSummary {
        fraction_stabilized: stabilized as f64 / replicas.len().max(1) as f64,
        median_stabilization_time: median(times),
        median_active_slope: median(slopes),
        max_identity_residual: replicas
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max),
        max_balance_residual: replicas
            .iter()
            .map(|r| r.balance_residual)
            .fold(0.0, f64::max),
        replicas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::geometry::Boundary;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn replicas_are_reproducible() {
        let g = Geometry::cube(1, 32, Boundary::Torus).unwrap();
        let exp = LatticeExperiment::new(g, DensitySpec::IidUniform { rho: 0.3 }, 50.0, 3, 9);
        let a = stabilizability_experiment(&exp).unwrap();
        let b = stabilizability_experiment(&exp).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.replicas.iter().map(|r| r.replica).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_ne!(a.replicas[0].initial_mass, a.replicas[1].initial_mass);
    }

    #[test]
    fn zero_replicas_rejected() {
        let g = Geometry::cube(1, 8, Boundary::Torus).unwrap();
        let exp = LatticeExperiment::new(g, DensitySpec::Constant { rho: 0.1 }, 1.0, 0, 0);
        assert!(stabilizability_experiment(&exp).is_err());
    }
}
