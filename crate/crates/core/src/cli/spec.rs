//! Serializable experiment descriptions and the header line that echoes them.

use serde::{Deserialize, Serialize};

use crate::chain::TopplingPolicy;
use crate::error::{Result, SandpileError};
use crate::lattice::{Boundary, LatticeExperiment};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const CSV_ECHO_PREFIX: &str = "# zhang-sandpile ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

/// A complete, reproducible description of one CLI invocation. Output paths
/// are not part of it: the same spec written to two files gives identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Stabilize(StabilizeSpec),
    FiniteRun(FiniteRunSpec),
    Couple(CoupleSpec),
    Infinite(InfiniteSpec),
    Sweep(SweepSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizeSpec {
    pub chain: Vec<f64>,
    pub policy: TopplingPolicy,
    /// Only consulted by the random policy.
    pub seed: u64,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteRunSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
    pub burn_in: u64,
    pub samples: u64,
    pub bins: usize,
    /// Initial heights; empty means all zeros.
    pub start: Vec<f64>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub seeds: Vec<u64>,
    pub max_steps: u64,
    /// Fixed starting heights; when absent each seed draws iid `U[0, 1)` heights.
    pub start_a: Option<Vec<f64>>,
    pub start_b: Option<Vec<f64>>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteSpec {
    pub lattice: LatticeExperiment,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dim: usize,
    pub sides: Vec<usize>,
    pub boundary: Boundary,
    pub generator: String,
    pub rhos: Vec<f64>,
    pub t_max: f64,
    pub replicas: usize,
    pub seed: u64,
    pub active_min_topplings: u64,
    pub format: OutputFormat,
}

impl ExperimentSpec {
    pub fn format(&self) -> OutputFormat {
        match self {
            ExperimentSpec::Stabilize(s) => s.format,
            ExperimentSpec::FiniteRun(s) => s.format,
            ExperimentSpec::Couple(s) => s.format,
            ExperimentSpec::Infinite(s) => s.format,
            ExperimentSpec::Sweep(s) => s.format,
        }
    }

    /// First line of every output file.
    ///
    /// CSV: `# zhang-sandpile <version> spec=<json>`.
    /// JSON lines: `{"zhang_sandpile":"<version>","spec":<json>}`.
    pub fn echo(&self) -> Result<String> {
        Ok(match self.format() {
            OutputFormat::Csv => format!(
                "{CSV_ECHO_PREFIX}{VERSION} spec={}",
                serde_json::to_string(self)?
            ),
            OutputFormat::Jsonl => serde_json::to_string(&SpecEcho {
                zhang_sandpile: VERSION.into(),
                spec: self.clone(),
            })?,
        })
    }

    /// Recover the version and spec from an echo line of either format.
    pub fn parse_echo(line: &str) -> Result<(String, ExperimentSpec)> {
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix(CSV_ECHO_PREFIX) {
            let (version, json) = rest
                .split_once(" spec=")
                .ok_or_else(|| SandpileError::Parse("echo line lacks ` spec=`".into()))?;
            return Ok((version.to_string(), serde_json::from_str(json)?));
        }
        let echo: SpecEcho = serde_json::from_str(line)
            .map_err(|e| SandpileError::Parse(format!("not a spec echo line: {e}")))?;
        Ok((echo.zhang_sandpile, echo.spec))
    }
}

#[derive(Serialize, Deserialize)]
struct SpecEcho {
    zhang_sandpile: String,
    spec: ExperimentSpec,
}
