//! Toppling dynamics on a finite lattice: single Zhang topplings with mass
//! bookkeeping, synchronous rounds, and the Poisson-clock (Markov) process.

use rand::Rng;
use serde::Serialize;

use crate::chain::IndexSet;
use crate::error::{Result, SandpileError};
use crate::lattice::config::LatticeConfig;

/// Per-site toppling counts `M(x, t)` and emitted mass `L(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassLedger {
    pub topplings: Vec<u64>,
    pub emitted: Vec<f64>,
    /// Mass that left a dissipative box.
    pub dissipated: f64,
    /// Continuous time of the last processed clock ring.
    pub time: f64,
    /// Clock rings processed, including rings at stable sites.
    pub events: u64,
}

impl MassLedger {
    pub fn new(sites: usize) -> Self {
        MassLedger {
            topplings: vec![0; sites],
            emitted: vec![0.0; sites],
            dissipated: 0.0,
            time: 0.0,
            events: 0,
        }
    }

    pub fn for_config(config: &LatticeConfig) -> Self {
        Self::new(config.len())
    }

    pub fn min_topplings(&self) -> u64 {
        self.topplings.iter().copied().min().unwrap_or(0)
    }

    pub fn max_topplings(&self) -> u64 {
        self.topplings.iter().copied().max().unwrap_or(0)
    }

    pub fn total_topplings(&self) -> u64 {
        self.topplings.iter().sum()
    }
}

/// Zhang toppling at `x`: each of the `2d` neighbours receives `h/(2d)`,
/// shares past a box edge are dissipated, `x` is emptied. Stable sites are
/// left alone. Returns whether `x` toppled.
pub fn topple_lattice(
    config: &mut LatticeConfig,
    x: usize,
    ledger: &mut MassLedger,
) -> Result<bool> {
    config.check_site(x)?;
    if ledger.topplings.len() != config.len() {
        return Err(SandpileError::GeometryMismatch(
            "ledger size differs from lattice".into(),
        ));
    }
    Ok(topple_unchecked(config, x, ledger))
}

#[inline]
fn topple_unchecked(config: &mut LatticeConfig, x: usize, ledger: &mut MassLedger) -> bool {
    if !config.is_unstable_at(x) {
        return false;
    }
    let h = config.heights()[x];
    let geometry = config.geometry().clone();
    let share = h / geometry.degree() as f64;
    let heights = config.heights_mut();
    heights[x] = 0.0;
    for dir in 0..geometry.degree() {
        match geometry.neighbor(x, dir) {
            Some(y) => heights[y] += share,
            None => ledger.dissipated += share,
        }
    }
    ledger.topplings[x] += 1;
    ledger.emitted[x] += h;
    true
}

/// Sum of equal-sized shares; pairwise so that `2^k` equal shares add exactly.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// One synchronous round: every site unstable at the start topples using its
/// round-start height. Returns the new configuration and the number of
/// sites that toppled.
pub fn parallel_round(config: &LatticeConfig) -> (LatticeConfig, usize) {
    let geometry = config.geometry();
    let start = config.heights();
    let degree = geometry.degree();
    let mut toppled = 0;
    let mut shares = Vec::with_capacity(degree);
    let heights: Vec<f64> = (0..config.len())
        .map(|x| {
            shares.clear();
            for dir in 0..degree {
                // A neighbour in direction dir sends to x from direction dir^1.
                if let Some(y) = geometry.neighbor(x, dir) {
                    if start[y] >= crate::chain::THRESHOLD {
                        shares.push(start[y] / degree as f64);
                    }
                }
            }
            let own = if config.is_unstable_at(x) {
                toppled += 1;
                0.0
            } else {
                start[x]
            };
            own + pairwise_sum(&shares)
        })
        .collect();
    let next =
        LatticeConfig::new(geometry.clone(), heights).expect("round preserves geometry and signs");
    (next, toppled)
}

/// Superposition of independent rate-1 clocks, one per site: a single clock
/// of rate `sites` whose rings land on a uniformly chosen site.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSchedule {
    sites: usize,
    events: u64,
}

impl PoissonSchedule {
    pub fn new(sites: usize) -> Result<Self> {
        if sites == 0 {
            return Err(SandpileError::InvalidParameter(
                "schedule needs at least one site".into(),
            ));
        }
        Ok(PoissonSchedule { sites, events: 0 })
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Waiting time to the next ring and the site it lands on.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, usize) {
        self.events += 1;
        let dt = -(1.0 - rng.random::<f64>()).ln() / self.sites as f64;
        (dt, rng.random_range(0..self.sites))
    }
}

/// Residuals of `η(t) = η(0) − L + (1/2d) Σ_{|y−x|=1} L(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    /// Largest per-site residual.
    pub max_site_residual: f64,
    /// `|total(t) − (total(0) − dissipated)|`.
    pub global_residual: f64,
}

pub fn mass_identity_check(
    initial: &LatticeConfig,
    current: &LatticeConfig,
    ledger: &MassLedger,
) -> Result<IdentityReport> {
    if initial.geometry() != current.geometry() {
        return Err(SandpileError::GeometryMismatch(
            "initial and current lattices differ".into(),
        ));
    }
    if ledger.emitted.len() != current.len() {
        return Err(SandpileError::GeometryMismatch(
            "ledger size differs from lattice".into(),
        ));
    }
    let geometry = current.geometry();
    let inv_degree = 1.0 / geometry.degree() as f64;
    let mut max_site_residual: f64 = 0.0;
    for x in 0..current.len() {
        let inflow: f64 = geometry
            .neighbors(x)
            .flatten()
            .map(|y| ledger.emitted[y])
            .sum();
        let predicted = initial.heights()[x] - ledger.emitted[x] + inflow * inv_degree;
        max_site_residual = max_site_residual.max((current.heights()[x] - predicted).abs());
    }
    let global_residual = (current.total_mass() - (initial.total_mass() - ledger.dissipated)).abs();
    Ok(IdentityReport {
        max_site_residual,
        global_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovOptions {
    /// Continuous-time cutoff.
    pub t_max: f64,
    /// Interval between snapshots.
    pub snapshot_every: f64,
    /// Minimum per-site toppling count required to call a run active.
    pub active_min_topplings: u64,
    /// Optional cutoff on clock rings.
    pub max_events: Option<u64>,
    /// Evaluate the mass identity at every snapshot.
    pub check_identity: bool,
    /// Keep a copy of the heights at every snapshot.
    pub keep_heights: bool,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        MarkovOptions {
            t_max: 100.0,
            snapshot_every: 1.0,
            active_min_topplings: 10,
            max_events: None,
            check_identity: false,
            keep_heights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub events: u64,
    pub total_mass: f64,
    pub unstable_fraction: f64,
    pub min_topplings: u64,
    pub max_topplings: u64,
    pub identity: Option<IdentityReport>,
    #[serde(skip)]
    pub heights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    /// No unstable site remains; `t` is the time of the last toppling.
    Stabilized { t: f64 },
    /// Unstable sites remain at the cutoff and every site toppled at least
    /// the configured number of times.
    ActiveAtCutoff,
    /// Unstable sites remain but some site toppled too rarely to count as evidence.
    Inconclusive,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Stabilized { .. } => "stabilized",
            Outcome::ActiveAtCutoff => "active-at-cutoff",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    pub fn is_stabilized(&self) -> bool {
        matches!(self, Outcome::Stabilized { .. })
    }
}

/// Result of a Markov toppling run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizabilityVerdict {
    pub outcome: Outcome,
    pub min_topplings: u64,
    pub max_topplings: u64,
    pub events: u64,
    pub final_time: f64,
    pub dissipated: f64,
    pub unstable_at_end: usize,
    /// Least-squares slope of the minimum toppling count against time.
    pub min_topplings_slope: Option<f64>,
    pub trace: Vec<Snapshot>,
}

fn snapshot(
    config: &LatticeConfig,
    ledger: &MassLedger,
    t: f64,
    unstable: usize,
    initial: Option<&LatticeConfig>,
    keep_heights: bool,
) -> Result<Snapshot> {
    Ok(Snapshot {
        t,
        events: ledger.events,
        total_mass: config.total_mass(),
        unstable_fraction: unstable as f64 / config.len() as f64,
        min_topplings: ledger.min_topplings(),
        max_topplings: ledger.max_topplings(),
        identity: initial
            .map(|i| mass_identity_check(i, config, ledger))
            .transpose()?,
        heights: keep_heights.then(|| config.heights().to_vec()),
    })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Run the Markov toppling process for `options.t_max` time units from
/// `ledger.time`.
///
/// Clock rings come from a [`PoissonSchedule`]; a ring at an unstable site
/// topples it. Rings past the cutoff are discarded, which by memorylessness
/// lets a run be continued by calling this again with the same ledger. The
/// set of unstable sites is maintained exactly, so the run stops as soon as
/// the configuration is stable.
pub fn markov_run<R: Rng + ?Sized>(
    config: &mut LatticeConfig,
    ledger: &mut MassLedger,
    options: &MarkovOptions,
    rng: &mut R,
) -> Result<StabilizabilityVerdict> {
    if options.t_max.is_nan() || options.t_max <= 0.0 {
        return Err(SandpileError::InvalidParameter(
            "t_max must be positive".into(),
        ));
    }
    if options.snapshot_every.is_nan() || options.snapshot_every <= 0.0 {
        return Err(SandpileError::InvalidParameter(
            "snapshot interval must be positive".into(),
        ));
    }
    if ledger.topplings.len() != config.len() {
        return Err(SandpileError::GeometryMismatch(
            "ledger size differs from lattice".into(),
        ));
    }
    let n = config.len();
    let mut schedule = PoissonSchedule::new(n)?;
    let initial = options.check_identity.then(|| config.clone());
    let mut unstable = IndexSet::new(n);
    for x in config.unstable_sites().collect::<Vec<_>>() {
        unstable.insert(x);
    }
    let start_time = ledger.time;
    let t_end = start_time + options.t_max;
    let mut trace = vec![snapshot(
        config,
        ledger,
        ledger.time,
        unstable.len(),
        initial.as_ref(),
        options.keep_heights,
    )?];
    let mut next_snap = start_time + options.snapshot_every;
    let mut stabilized = unstable.is_empty();

    while !stabilized {
        if options.max_events.is_some_and(|m| ledger.events >= m) {
            break;
        }
        let (dt, x) = schedule.next(rng);
        let t_next = ledger.time + dt;
        while next_snap <= t_next.min(t_end) {
            trace.push(snapshot(
                config,
                ledger,
                next_snap,
                unstable.len(),
                initial.as_ref(),
                options.keep_heights,
            )?);
            next_snap += options.snapshot_every;
        }
        if t_next > t_end {
            ledger.time = t_end;
            break;
        }
        ledger.time = t_next;
        ledger.events += 1;
        if unstable.contains(x) {
            topple_unchecked(config, x, ledger);
            unstable.remove(x);
            let geometry = config.geometry();
            for dir in 0..geometry.degree() {
                if let Some(y) = geometry.neighbor(x, dir) {
                    if config.is_unstable_at(y) {
                        unstable.insert(y);
                    }
                }
            }
            stabilized = unstable.is_empty();
        }
    }

    let last = trace.last().map(|s| s.t);
    if last != Some(ledger.time) {
        trace.push(snapshot(
            config,
            ledger,
            ledger.time,
            unstable.len(),
            initial.as_ref(),
            options.keep_heights,
        )?);
    }
    let outcome = if stabilized {
        Outcome::Stabilized { t: ledger.time }
    } else if ledger.min_topplings() >= options.active_min_topplings {
        Outcome::ActiveAtCutoff
    } else {
        Outcome::Inconclusive
    };
    let points: Vec<(f64, f64)> = trace
        .iter()
        .map(|s| (s.t, s.min_topplings as f64))
        .collect();
    Ok(StabilizabilityVerdict {
        outcome,
        min_topplings: ledger.min_topplings(),
        max_topplings: ledger.max_topplings(),
        events: ledger.events,
        final_time: ledger.time,
        dissipated: ledger.dissipated,
        unstable_at_end: unstable.len(),
        min_topplings_slope: if stabilized { None } else { slope(&points) },
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::geometry::{Boundary, Geometry};
    use crate::rng;

    #[test]
    fn single_topple_on_2d_torus() {
        let g = Geometry::cube(2, 4, Boundary::Torus).unwrap();
        let mut h = vec![0.0; 16];
        h[5] = 1.2;
        let mut c = LatticeConfig::new(g.clone(), h).unwrap();
        let mut ledger = MassLedger::for_config(&c);
        assert!(topple_lattice(&mut c, 5, &mut ledger).unwrap());
        for y in g.neighbors(5).flatten() {
            assert!((c.heights()[y] - 0.3).abs() < 1e-15);
        }
        assert_eq!(c.heights()[5], 0.0);
        assert_eq!(ledger.topplings[5], 1);
        assert_eq!(ledger.emitted[5], 1.2);
        assert!(!topple_lattice(&mut c, 5, &mut ledger).unwrap());
        assert_eq!(ledger.topplings[5], 1);
        assert!(topple_lattice(&mut c, 99, &mut ledger).is_err());
    }

    #[test]
    fn box_corner_dissipates() {
        let g = Geometry::cube(2, 3, Boundary::DissipativeBox).unwrap();
        let mut h = vec![0.0; 9];
        h[0] = 2.0;
        let mut c = LatticeConfig::new(g, h).unwrap();
        let mut ledger = MassLedger::for_config(&c);
        topple_lattice(&mut c, 0, &mut ledger).unwrap();
        assert_eq!(ledger.dissipated, 1.0);
        assert_eq!(c.total_mass(), 1.0);
    }

    #[test]
    fn parallel_round_shifts_alternating_pattern() {
        let g = Geometry::cube(1, 6, Boundary::Torus).unwrap();
        let c = LatticeConfig::new(g, vec![1.2, 0.0, 1.2, 0.0, 1.2, 0.0]).unwrap();
        let (next, toppled) = parallel_round(&c);
        assert_eq!(toppled, 3);
        assert_eq!(next.heights(), &[0.0, 1.2, 0.0, 1.2, 0.0, 1.2]);
        let stable = LatticeConfig::new(c.geometry().clone(), vec![0.3; 6]).unwrap();
        assert_eq!(parallel_round(&stable).0, stable);
    }

    #[test]
    fn stable_start_is_stabilized_at_zero() {
        let g = Geometry::cube(2, 5, Boundary::Torus).unwrap();
        let mut c = LatticeConfig::constant(g, 0.5).unwrap();
        let mut ledger = MassLedger::for_config(&c);
        let v = markov_run(
            &mut c,
            &mut ledger,
            &MarkovOptions::default(),
            &mut rng::stream(0, 0),
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::Stabilized { t: 0.0 });
        assert_eq!(ledger.total_topplings(), 0);
    }

    #[test]
    fn identity_holds_without_events() {
        let g = Geometry::cube(1, 5, Boundary::DissipativeBox).unwrap();
        let c = LatticeConfig::new(g, vec![0.1, 1.5, 0.2, 0.0, 0.3]).unwrap();
        let r = mass_identity_check(&c, &c, &MassLedger::for_config(&c)).unwrap();
        assert_eq!(r.max_site_residual, 0.0);
        assert_eq!(r.global_residual, 0.0);
        let other =
            LatticeConfig::constant(Geometry::cube(1, 6, Boundary::DissipativeBox).unwrap(), 0.0)
                .unwrap();
        assert!(mass_identity_check(&c, &other, &MassLedger::for_config(&c)).is_err());
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        assert!((slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(slope(&pts[..1]), None);
    }
}
