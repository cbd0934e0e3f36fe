//! Drivers behind the subcommands. Each `cmd_*` computes a typed result;
//! [`execute`] renders it after the spec echo.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::ChainConfig;
use crate::cli::spec::{
    CoupleSpec, ExperimentSpec, FiniteRunSpec, InfiniteSpec, OutputFormat, StabilizeSpec, SweepSpec,
};
use crate::coupling::{run_coupling, CouplingRecord, CouplingResult};
use crate::error::{Result, SandpileError};
use crate::finite::{ChainParams, ChainProcess, MarginalStats};
use crate::lattice::{
    run_replica_with_final, snapshot, summarize, DensitySpec, ExperimentSummary, Geometry,
    LatticeConfig, LatticeExperiment, ReplicaResult,
};
use crate::rng;

/// Largest conservation residual tolerated before a lattice run is rejected.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// Reals in CSV: 17 significant digits, `.` decimal point.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Short form used by `stabilize`: rounded to 12 decimals, trailing zeros dropped.
pub fn fmt_rounded(x: f64) -> String {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn join<T, F: Fn(&T) -> String>(v: &[T], f: F) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizeReport {
    pub heights: Vec<f64>,
    pub topplings: Vec<u64>,
    pub dissipated: f64,
}

impl StabilizeReport {
    /// `heights / counts`, each rounded for display.
    pub fn summary_line(&self) -> String {
        format!(
            "{} / {}",
            join(&self.heights, |h| fmt_rounded(*h)),
            join(&self.topplings, u64::to_string)
        )
    }
}

pub fn cmd_stabilize(spec: &StabilizeSpec) -> Result<StabilizeReport> {
    let mut config = ChainConfig::new(spec.chain.clone())?;
    let mut rng = rng::stream(spec.seed, rng::FINITE_CHAIN);
    let log = config.stabilize(spec.policy, &mut rng)?;
    Ok(StabilizeReport {
        heights: config.into_heights(),
        topplings: log.counts,
        dissipated: log.dissipated,
    })
}

pub fn cmd_finite_run(spec: &FiniteRunSpec) -> Result<MarginalStats> {
    let params = ChainParams::new(spec.n, spec.a, spec.b)?;
    let start = if spec.start.is_empty() {
        ChainConfig::zeros(spec.n)?
    } else {
        ChainConfig::new(spec.start.clone())?
    };
    if start.len() != spec.n {
        return Err(SandpileError::InvalidParameter(format!(
            "start has {} sites, N = {}",
            start.len(),
            spec.n
        )));
    }
    ChainProcess::new(params, start, spec.seed)?.run_stationary(
        spec.burn_in,
        spec.samples,
        spec.bins,
    )
}

/// Starting pair for one coupling seed: the fixed starts if given, otherwise
/// iid `U[0, 1)` heights from the seed's `INITIAL_CONFIG` stream (A first).
pub fn coupling_starts(spec: &CoupleSpec, seed: u64) -> Result<(ChainConfig, ChainConfig)> {
    use rand::Rng;
    let mut r = rng::stream(seed, rng::INITIAL_CONFIG);
    let mut draw = |fixed: &Option<Vec<f64>>| -> Result<ChainConfig> {
        let h = match fixed {
            Some(h) => h.clone(),
            None => (0..spec.n).map(|_| r.random::<f64>()).collect(),
        };
        let c = ChainConfig::new(h)?;
        if c.len() != spec.n || !c.is_stable() {
            return Err(SandpileError::InvalidParameter(format!(
                "coupling starts must be stable with {} sites",
                spec.n
            )));
        }
        Ok(c)
    };
    let a = draw(&spec.start_a)?;
    let b = draw(&spec.start_b)?;
    Ok((a, b))
}

pub fn cmd_couple(spec: &CoupleSpec) -> Result<Vec<CouplingResult>> {
    let params = ChainParams::new(spec.n, spec.a, spec.b)?;
    if spec.n < 2 {
        return Err(SandpileError::InvalidParameter(
            "coupling needs N >= 2".into(),
        ));
    }
    spec.seeds
        .par_iter()
        .map(|&seed| {
            let (a, b) = coupling_starts(spec, seed)?;
            run_coupling(params, &a, &b, seed, spec.max_steps)
        })
        .collect()
}

fn check_conservation(summary: &ExperimentSummary) -> Result<()> {
    let worst = summary
        .max_identity_residual
        .max(summary.max_balance_residual);
    if worst > CONSERVATION_TOLERANCE {
        return Err(SandpileError::InvariantViolation(format!(
            "mass conservation residual {worst:e} exceeds {CONSERVATION_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// Run the replicas and check conservation. Final configurations are
/// returned in replica order.
pub fn cmd_infinite(spec: &InfiniteSpec) -> Result<(ExperimentSummary, Vec<LatticeConfig>)> {
    let exp = &spec.lattice;
    if exp.replicas == 0 {
        return Err(SandpileError::InvalidParameter(
            "need at least one replica".into(),
        ));
    }
    exp.density.validate(&exp.geometry)?;
    let runs = (0..exp.replicas)
        .into_par_iter()
        .map(|r| run_replica_with_final(exp, r))
        .collect::<Result<Vec<_>>>()?;
    let (results, finals): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let summary = summarize(results);
    check_conservation(&summary)?;
    Ok((summary, finals))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub side: usize,
    pub rho: f64,
    /// Seed of the grid point; `infinite --seed <seed>` reproduces its replicas.
    pub seed: u64,
    pub result: ReplicaResult,
}

/// Grid points in `sides`-major order; point `i` uses `derive_seed(seed, i)`.
pub fn sweep_points(spec: &SweepSpec) -> Result<Vec<LatticeExperiment>> {
    if spec.sides.is_empty() || spec.rhos.is_empty() {
        return Err(SandpileError::InvalidParameter(
            "sweep grid is empty".into(),
        ));
    }
    if spec.replicas == 0 {
        return Err(SandpileError::InvalidParameter(
            "need at least one replica".into(),
        ));
    }
    let mut points = Vec::new();
    for &side in &spec.sides {
        for &rho in &spec.rhos {
            let geometry = Geometry::cube(spec.dim, side, spec.boundary)?;
            let density = DensitySpec::from_name(&spec.generator, rho)?;
            density.validate(&geometry)?;
            let seed = rng::derive_seed(spec.seed, points.len() as u64);
            let mut exp =
                LatticeExperiment::new(geometry, density, spec.t_max, spec.replicas, seed);
            exp.active_min_topplings = spec.active_min_topplings;
            points.push(exp);
        }
    }
    Ok(points)
}

pub fn cmd_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let points = sweep_points(spec)?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.replicas).map(move |r| (p, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(p, r)| {
            let exp = &points[p];
            let (result, _) = run_replica_with_final(exp, r)?;
            Ok(SweepRow {
                side: exp.geometry.sides()[0],
                rho: exp.density.rho(),
                seed: exp.seed,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for row in &rows {
        if row
            .result
            .identity_residual
            .max(row.result.balance_residual)
            > CONSERVATION_TOLERANCE
        {
            return Err(SandpileError::InvariantViolation(format!(
                "mass conservation residual exceeded at side {} rho {} replica {}",
                row.side, row.rho, row.result.replica
            )));
        }
    }
    Ok(rows)
}

const VERDICT_COLUMNS: &str =
    "outcome,t_stab,min_M,max_M,dissipated,events,final_time,min_M_slope,identity_residual,balance_residual";

fn verdict_cells(r: &ReplicaResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.outcome.label(),
        fmt_opt(r.stabilization_time()),
        r.min_topplings,
        r.max_topplings,
        fmt_real(r.dissipated),
        r.events,
        fmt_real(r.final_time),
        fmt_opt(r.min_topplings_slope),
        fmt_real(r.identity_residual),
        fmt_real(r.balance_residual),
    )
}

fn jsonl<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct SiteRow<'a> {
    site: usize,
    samples: u64,
    mean: f64,
    variance: f64,
    histogram: &'a [u64],
}

/// Run `spec` and write the echo line followed by its results. Final lattice
/// configurations of `infinite` go to `snapshot_dir` when given.
pub fn execute<W: Write>(
    spec: &ExperimentSpec,
    w: &mut W,
    snapshot_dir: Option<&Path>,
) -> Result<()> {
    // Compute before writing anything so that failures leave no partial output.
    match spec {
        ExperimentSpec::Stabilize(s) => {
            let report = cmd_stabilize(s)?;
            writeln!(w, "{}", spec.echo()?)?;
            match s.format {
                OutputFormat::Csv => writeln!(w, "{}", report.summary_line())?,
                OutputFormat::Jsonl => jsonl(w, &report)?,
            }
        }
        ExperimentSpec::FiniteRun(s) => {
            let stats = cmd_finite_run(s)?;
            writeln!(w, "{}", spec.echo()?)?;
            if s.format == OutputFormat::Csv {
                writeln!(w, "site,samples,mean,variance")?;
            }
            if stats.count() > 0 {
                for x in 0..stats.sites() {
                    match s.format {
                        OutputFormat::Csv => writeln!(
                            w,
                            "{},{},{},{}",
                            x + 1,
                            stats.count(),
                            fmt_real(stats.mean(x)),
                            fmt_real(stats.variance(x))
                        )?,
                        OutputFormat::Jsonl => jsonl(
                            w,
                            &SiteRow {
                                site: x + 1,
                                samples: stats.count(),
                                mean: stats.mean(x),
                                variance: stats.variance(x),
                                histogram: stats.histogram(x),
                            },
                        )?,
                    }
                }
            }
        }
        ExperimentSpec::Couple(s) => {
            let results = cmd_couple(s)?;
            writeln!(w, "{}", spec.echo()?)?;
            if s.format == OutputFormat::Csv {
                writeln!(
                    w,
                    "seed,merged,merge_time,restarts,t_independent,t_contraction,t_merging"
                )?;
            }
            for r in &results {
                match s.format {
                    OutputFormat::Csv => writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        r.seed,
                        r.merged,
                        r.merge_time.map(|t| t.to_string()).unwrap_or_default(),
                        r.restarts,
                        r.phase_times[0],
                        r.phase_times[1],
                        r.phase_times[2]
                    )?,
                    OutputFormat::Jsonl => jsonl(w, &CouplingRecord::from(r))?,
                }
            }
        }
        ExperimentSpec::Infinite(s) => {
            let (summary, finals) = cmd_infinite(s)?;
            let exp = &s.lattice;
            write_infinite(w, spec, s, &summary)?;
            if let Some(dir) = snapshot_dir {
                std::fs::create_dir_all(dir)?;
                for (r, config) in finals.iter().enumerate() {
                    let path = dir.join(format!("replica-{r:04}.csv"));
                    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
                    snapshot::write_csv(file, config, summary.replicas[r].final_time, exp.seed)?;
                }
            }
        }
        ExperimentSpec::Sweep(s) => {
            let rows = cmd_sweep(s)?;
            writeln!(w, "{}", spec.echo()?)?;
            match s.format {
                OutputFormat::Csv => {
                    let kind = DensitySpec::from_name(&s.generator, 0.0)?.kind();
                    writeln!(
                        w,
                        "generator,rho,dim,side,boundary,seed,replica,{VERDICT_COLUMNS}"
                    )?;
                    for row in &rows {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{},{}",
                            kind,
                            fmt_real(row.rho),
                            s.dim,
                            row.side,
                            s.boundary,
                            row.seed,
                            row.result.replica,
                            verdict_cells(&row.result)
                        )?;
                    }
                }
                OutputFormat::Jsonl => {
                    for row in &rows {
                        jsonl(w, row)?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_infinite<W: Write>(
    w: &mut W,
    spec: &ExperimentSpec,
    s: &InfiniteSpec,
    summary: &ExperimentSummary,
) -> Result<()> {
    let exp = &s.lattice;
    writeln!(w, "{}", spec.echo()?)?;
    let law = exp.density.law(&exp.geometry);
    match s.format {
        OutputFormat::Csv => {
            writeln!(w, "# generator law: {law}")?;
            writeln!(
                w,
                "generator,rho,dim,sides,boundary,seed,replica,{VERDICT_COLUMNS}"
            )?;
            let sides = join(exp.geometry.sides(), usize::to_string).replace(',', "x");
            for r in &summary.replicas {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    exp.density.kind(),
                    fmt_real(exp.density.rho()),
                    exp.geometry.dim(),
                    sides,
                    exp.geometry.boundary(),
                    exp.seed,
                    r.replica,
                    verdict_cells(r)
                )?;
            }
        }
        OutputFormat::Jsonl => {
            jsonl(w, &serde_json::json!({ "generator_law": law }))?;
            for r in &summary.replicas {
                jsonl(w, r)?;
            }
        }
    }
    Ok(())
}
