//! Command-line parsing: flags, the optional `key = value` config file, and
//! the mapping from flags to an [`ExperimentSpec`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::chain::TopplingPolicy;
use crate::cli::spec::{
    CoupleSpec, ExperimentSpec, FiniteRunSpec, InfiniteSpec, OutputFormat, StabilizeSpec, SweepSpec,
};
use crate::error::{Result, SandpileError};
use crate::finite::DEFAULT_BINS;
use crate::lattice::{Boundary, DensitySpec, Geometry, LatticeExperiment, MarkovOptions};

#[derive(Debug, Parser)]
#[command(
    name = "zhang",
    version,
    about = "Simulations of Zhang's continuous-height sandpile"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stabilize one chain configuration under a toppling order.
    Stabilize {
        /// Comma-separated heights, e.g. `0,0,1.4,1.2,0,0`.
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            conflicts_with = "file"
        )]
        chain: Option<Vec<f64>>,
        /// File holding the comma- or whitespace-separated heights.
        #[arg(long)]
        file: Option<PathBuf>,
        /// left, right, parallel or random.
        #[arg(long, value_parser = parse_policy, default_value = "left")]
        policy: TopplingPolicy,
        #[command(flatten)]
        common: Common,
    },
    /// Stationary one-site marginals of the (N, [a, b]) chain.
    FiniteRun {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 10_000)]
        burn_in: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Initial heights; all zeros when absent.
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the three-phase coupling for a range of seeds.
    Couple {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// Seeds: `7`, `0..200` (end exclusive), `0..=199` or `1,5,9`.
        #[arg(long = "seeds", alias = "seed", value_parser = parse_seeds, default_value = "0")]
        seeds: SeedList,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        #[arg(long, value_delimiter = ',')]
        start_a: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        start_b: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Jsonl)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Markov toppling process on a finite torus or box.
    Infinite {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Single density.
        #[arg(long)]
        rho: f64,
        /// Side length, repeated for every dimension; or `--sides 32,16`.
        #[arg(long, default_value_t = 64, conflicts_with = "sides")]
        side: usize,
        #[arg(long, value_delimiter = ',')]
        sides: Option<Vec<usize>>,
        /// Directory for the final height snapshot of every replica.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Density and size grid of stabilizability runs, one row per replica.
    Sweep {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Densities, e.g. `0.1,0.2,0.3`.
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        /// Side lengths, e.g. `16,32`.
        #[arg(long, value_delimiter = ',', default_value = "64")]
        side: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// Dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// torus or box.
    #[arg(long, default_value = "torus")]
    pub boundary: Boundary,
    /// iid, constant, checkerboard or near-full.
    #[arg(long = "gen", default_value = "iid")]
    pub generator: String,
    #[arg(long, default_value_t = 100.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Minimum per-site toppling count for an active-at-cutoff verdict.
    #[arg(long, default_value_t = MarkovOptions::default().active_min_topplings)]
    pub threshold: u64,
}

fn parse_policy(s: &str) -> std::result::Result<TopplingPolicy, String> {
    s.parse().map_err(|e: SandpileError| e.to_string())
}

/// Comma- or whitespace-separated reals.
pub fn parse_reals(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// Parsed `--seeds` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

/// `7`, `a..b` (end exclusive), `a..=b`, or a comma list.
pub fn parse_seeds(s: &str) -> std::result::Result<SeedList, String> {
    parse_seed_values(s).map(SeedList)
}

fn parse_seed_values(s: &str) -> std::result::Result<Vec<u64>, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
    if let Some((lo, hi)) = s.split_once("..=") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        return if lo <= hi {
            Ok((lo..=hi).collect())
        } else {
            Err(format!("empty seed range `{s}`"))
        };
    }
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        return if lo < hi {
            Ok((lo..hi).collect())
        } else {
            Err(format!("empty seed range `{s}`"))
        };
    }
    s.split(',').map(num).collect()
}

/// Arguments from a `key = value` file as flags. `#` starts a comment;
/// `true` turns a key into a bare switch and `false` drops it.
pub fn config_file_args(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SandpileError::Parse(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        match value.trim() {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            v => {
                args.push(format!("--{key}"));
                args.push(v.to_string());
            }
        }
    }
    Ok(args)
}

/// Splice `--config FILE` into the argument list: the file's flags go right
/// after the subcommand so that later command-line flags override them.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(
                it.next()
                    .ok_or_else(|| SandpileError::Parse("--config needs a path".into()))?,
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    if let Some(path) = config {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| SandpileError::Parse(format!("cannot read config `{path}`: {e}")))?;
        let extra = config_file_args(&text)?;
        let at = out
            .iter()
            .skip(1)
            .position(|a| !a.starts_with('-'))
            .map_or(out.len(), |p| p + 2);
        out.splice(at..at, extra);
    }
    Ok(out)
}

fn lattice_experiment(
    l: &LatticeArgs,
    sides: Vec<usize>,
    rho: f64,
    seed: u64,
) -> Result<LatticeExperiment> {
    let geometry = Geometry::new(sides, l.boundary)?;
    let density = DensitySpec::from_name(&l.generator, rho)?;
    if l.tmax.is_nan() || l.tmax <= 0.0 {
        return Err(SandpileError::InvalidParameter(
            "tmax must be positive".into(),
        ));
    }
    let mut exp = LatticeExperiment::new(geometry, density, l.tmax, l.replicas, seed);
    exp.active_min_topplings = l.threshold;
    Ok(exp)
}

impl Command {
    /// The spec and output path this command describes.
    pub fn into_spec(self) -> Result<(ExperimentSpec, Option<PathBuf>, Option<PathBuf>)> {
        Ok(match self {
            Command::Stabilize {
                chain,
                file,
                policy,
                common,
            } => {
                let chain = match (chain, file) {
                    (Some(c), _) => c,
                    (None, Some(path)) => parse_reals(&std::fs::read_to_string(path)?)
                        .map_err(SandpileError::Parse)?,
                    (None, None) => {
                        return Err(SandpileError::InvalidParameter(
                            "give --chain or --file".into(),
                        ))
                    }
                };
                let spec = StabilizeSpec {
                    chain,
                    policy,
                    seed: common.seed,
                    format: common.format,
                };
                (ExperimentSpec::Stabilize(spec), common.out, None)
            }
            Command::FiniteRun {
                n,
                a,
                b,
                burn_in,
                samples,
                bins,
                start,
                common,
            } => {
                let spec = FiniteRunSpec {
                    n,
                    a,
                    b,
                    seed: common.seed,
                    burn_in,
                    samples,
                    bins,
                    start: start.unwrap_or_default(),
                    format: common.format,
                };
                (ExperimentSpec::FiniteRun(spec), common.out, None)
            }
            Command::Couple {
                n,
                a,
                b,
                seeds,
                max_steps,
                start_a,
                start_b,
                format,
                out,
            } => {
                let spec = CoupleSpec {
                    n,
                    a,
                    b,
                    seeds: seeds.0,
                    max_steps,
                    start_a,
                    start_b,
                    format,
                };
                (ExperimentSpec::Couple(spec), out, None)
            }
            Command::Infinite {
                lattice,
                rho,
                side,
                sides,
                snapshots,
                common,
            } => {
                let sides = sides.unwrap_or_else(|| vec![side; lattice.d]);
                if sides.len() != lattice.d {
                    return Err(SandpileError::InvalidParameter(format!(
                        "{} sides for d = {}",
                        sides.len(),
                        lattice.d
                    )));
                }
                let exp = lattice_experiment(&lattice, sides, rho, common.seed)?;
                (
                    ExperimentSpec::Infinite(InfiniteSpec {
                        lattice: exp,
                        format: common.format,
                    }),
                    common.out,
                    snapshots,
                )
            }
            Command::Sweep {
                lattice,
                rho,
                side,
                common,
            } => {
                // Validate the shared lattice flags once.
                lattice_experiment(
                    &lattice,
                    vec![side.first().copied().unwrap_or(2).max(2); lattice.d],
                    0.0,
                    0,
                )?;
                let spec = SweepSpec {
                    dim: lattice.d,
                    sides: side,
                    boundary: lattice.boundary,
                    generator: lattice.generator,
                    rhos: rho,
                    t_max: lattice.tmax,
                    replicas: lattice.replicas,
                    seed: common.seed,
                    active_min_topplings: lattice.threshold,
                    format: common.format,
                };
                (ExperimentSpec::Sweep(spec), common.out, None)
            }
        })
    }
}
