//! Zhang's continuous-height sandpile.
//!
//! * [`chain`]: heights, site labels, Zhang topplings and stabilization orders on a finite chain.
//! * [`finite`]: the `(N, [a, b])` addition/toppling Markov chain and its marginal statistics.
//! * [`coupling`]: a three-phase successful coupling of two `(N, [a, b])` chains and its constants.
//! * [`lattice`]: the Poisson-clock toppling process on finite d-dimensional tori and boxes.
//! * [`cli`]: experiment specifications, output formats and the drivers behind the `zhang` binary.

pub mod chain;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod finite;
pub mod lattice;
pub mod rng;

pub use chain::{classify_site, BoundarySide, ChainConfig, SiteLabel, TopplingLog, TopplingPolicy};
pub use error::{Result, SandpileError};
pub use finite::{empirical_tv_distance, AdditionEvent, ChainParams, ChainProcess, MarginalStats};
