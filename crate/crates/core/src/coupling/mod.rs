//! Successful coupling of two `(N, [a, b])` chains.

pub mod constants;
pub mod state;
pub mod tracker;

pub use constants::{
    contraction_rate, correction_d, coupled_amount, epsilon_abn, k_epsilon, t_epsilon,
    CouplingConstants,
};
pub use state::{run_coupling, CoupledStep, CouplingRecord, CouplingResult, CouplingState, Phase};
pub use tracker::{verify_contraction, CoefficientTracker, ContractionReport, ContractionRow};
