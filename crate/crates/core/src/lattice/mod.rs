//! Finite `d`-dimensional lattices standing in for `Z^d`: tori conserve mass,
//! dissipative boxes lose it at the edge.

pub mod bonds;
pub mod config;
pub mod density;
pub mod engine;
pub mod experiment;
pub mod geometry;
pub mod snapshot;

pub use bonds::{bond_bound_check, box_region, count_internal_bonds, BondCheck};
pub use config::LatticeConfig;
pub use density::{generate, DensitySpec};
pub use engine::{
    markov_run, mass_identity_check, parallel_round, topple_lattice, IdentityReport, MarkovOptions,
    MassLedger, Outcome, PoissonSchedule, Snapshot, StabilizabilityVerdict,
};
pub use experiment::{
    run_replica, run_replica_with_final, stabilizability_experiment, summarize, ExperimentSummary,
    LatticeExperiment, ReplicaResult,
};
pub use geometry::{Boundary, Geometry};
