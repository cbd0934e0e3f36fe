//! The `(N, [a, b])` process: at every tick a uniform amount from `[a, b]` is
//! added to a uniformly chosen site and the chain is stabilized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, SiteLabel, TopplingLog, TopplingPolicy, DEFAULT_TOPPLE_CAP};
use crate::error::{Result, SandpileError};
use crate::rng::{self, SimRng};

/// Default number of histogram bins over `[0, 1)`.
pub const DEFAULT_BINS: usize = 256;

/// Model parameters `(N, [a, b])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl ChainParams {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 1 {
            return Err(SandpileError::InvalidParameter(
                "N must be at least 1".into(),
            ));
        }
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(SandpileError::InvalidParameter(format!(
                "need 0 <= a < b <= 1, got a={a}, b={b}"
            )));
        }
        Ok(ChainParams { n, a, b })
    }

    /// `(a + b) / 2`, the smallest heavy addition.
    pub fn heavy_threshold(&self) -> f64 {
        (self.a + self.b) / 2.0
    }

    pub fn is_heavy(&self, amount: f64) -> bool {
        amount >= self.heavy_threshold()
    }

    pub fn contains_amount(&self, amount: f64) -> bool {
        (self.a..=self.b).contains(&amount)
    }

    /// Draw a site uniformly from `0..n` and an amount uniformly from `[a, b)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let site = rng.random_range(0..self.n);
        let amount = self.a + (self.b - self.a) * rng.random::<f64>();
        (site, amount)
    }
}

/// One addition `U(t)` at site `X(t)`. `site` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditionEvent {
    pub t: u64,
    pub site: usize,
    pub amount: f64,
}

/// JSON-lines form of an addition, with a one-based site index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: u64,
    pub site: usize,
    pub amount: f64,
    pub avalanche_size: u64,
}

impl EventRecord {
    pub fn new(event: &AdditionEvent, log: &TopplingLog) -> Self {
        EventRecord {
            t: event.t,
            site: event.site + 1,
            amount: event.amount,
            avalanche_size: log.total(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub event: AdditionEvent,
    pub log: TopplingLog,
}

/// Stable configurations visited by a scripted run, starting with the initial one.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub configs: Vec<ChainConfig>,
    pub logs: Vec<TopplingLog>,
}

/// A running `(N, [a, b])` process.
#[derive(Debug, Clone)]
pub struct ChainProcess {
    params: ChainParams,
    config: ChainConfig,
    t: u64,
    rng: SimRng,
    cap: u64,
}

impl ChainProcess {
    /// Process started from `config` drawing from stream `FINITE_CHAIN` of `seed`.
    pub fn new(params: ChainParams, config: ChainConfig, seed: u64) -> Result<Self> {
        Self::with_rng(params, config, rng::stream(seed, rng::FINITE_CHAIN))
    }

    pub fn with_rng(params: ChainParams, config: ChainConfig, rng: SimRng) -> Result<Self> {
        if config.len() != params.n {
            return Err(SandpileError::InvalidParameter(format!(
                "configuration has {} sites, parameters say N={}",
                config.len(),
                params.n
            )));
        }
        if !config.is_stable() {
            return Err(SandpileError::InvalidParameter(
                "initial configuration must be stable".into(),
            ));
        }
        Ok(ChainProcess {
            params,
            config,
            t: 0,
            rng,
            cap: DEFAULT_TOPPLE_CAP,
        })
    }

    pub fn with_topple_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    /// One tick with a fresh random addition.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let (site, amount) = self.params.draw(&mut self.rng);
        self.apply(site, amount)
    }

    /// One tick with a prescribed addition.
    pub fn apply(&mut self, site: usize, amount: f64) -> Result<StepOutcome> {
        if !self.params.contains_amount(amount) {
            return Err(SandpileError::InvalidParameter(format!(
                "amount {amount} outside [{}, {}]",
                self.params.a, self.params.b
            )));
        }
        let log = add_and_stabilize(&mut self.config, &self.params, site, amount, self.cap)?;
        self.t += 1;
        Ok(StepOutcome {
            event: AdditionEvent {
                t: self.t,
                site,
                amount,
            },
            log,
        })
    }

    /// Replay `script` in order; the trajectory holds the start plus every
    /// post-addition configuration.
    pub fn scripted_run(&mut self, script: &[AdditionEvent]) -> Result<Trajectory> {
        if let Some(bad) = script
            .iter()
            .find(|e| !self.params.contains_amount(e.amount))
        {
            return Err(SandpileError::InvalidParameter(format!(
                "scripted amount {} outside [a, b]",
                bad.amount
            )));
        }
        let mut traj = Trajectory {
            configs: vec![self.config.clone()],
            logs: Vec::new(),
        };
        for e in script {
            let out = self.apply(e.site, e.amount)?;
            traj.configs.push(self.config.clone());
            traj.logs.push(out.log);
        }
        Ok(traj)
    }

    /// Advance `burn_in` ticks, then record the configuration after each of
    /// the next `samples` ticks.
    pub fn run_stationary(
        &mut self,
        burn_in: u64,
        samples: u64,
        bins: usize,
    ) -> Result<MarginalStats> {
        for _ in 0..burn_in {
            self.step()?;
        }
        let mut stats = MarginalStats::new(self.params.n, bins)?;
        for _ in 0..samples {
            self.step()?;
            stats.record(self.config.heights());
        }
        Ok(stats)
    }
}

/// Add `amount` at `site` and stabilize leftmost-first. A single addition to a
/// stable chain stabilizes identically under every sequential order.
pub(crate) fn add_and_stabilize(
    config: &mut ChainConfig,
    params: &ChainParams,
    site: usize,
    amount: f64,
    cap: u64,
) -> Result<TopplingLog> {
    let was_full = config.label(site)? == SiteLabel::Full;
    config.add(site, amount)?;
    // Leftmost-first never consults the generator.
    let mut unused = NoRng;
    let log = config.stabilize_with_cap(TopplingPolicy::LeftmostFirst, &mut unused, cap)?;
    if params.a >= 0.5 && was_full && log.is_empty() {
        return Err(SandpileError::InvariantViolation(format!(
            "heavy addition {amount} to full site {site} caused no toppling"
        )));
    }
    debug_assert!(config.is_stable());
    Ok(log)
}

struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("deterministic policy drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("deterministic policy drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("deterministic policy drew a random number")
    }
}

/// Per-site running moments and fixed-width histograms over `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStats {
    bins: usize,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    hist: Vec<Vec<u64>>,
}

impl MarginalStats {
    pub fn new(sites: usize, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(SandpileError::InvalidParameter(
                "histogram needs at least one bin".into(),
            ));
        }
        Ok(MarginalStats {
            bins,
            count: 0,
            mean: vec![0.0; sites],
            m2: vec![0.0; sites],
            hist: vec![vec![0; bins]; sites],
        })
    }

    pub fn sites(&self) -> usize {
        self.mean.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn bin_of(&self, h: f64) -> usize {
        ((h * self.bins as f64) as usize).min(self.bins - 1)
    }

    /// Record one stable configuration.
    pub fn record(&mut self, heights: &[f64]) {
        debug_assert_eq!(heights.len(), self.sites());
        self.count += 1;
        let n = self.count as f64;
        for (i, &h) in heights.iter().enumerate() {
            let delta = h - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (h - self.mean[i]);
            let bin = self.bin_of(h);
            self.hist[i][bin] += 1;
        }
    }

    pub fn mean(&self, site: usize) -> f64 {
        self.mean[site]
    }

    /// Population variance of the recorded heights at `site`.
    pub fn variance(&self, site: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2[site] / self.count as f64
        }
    }

    pub fn histogram(&self, site: usize) -> &[u64] {
        &self.hist[site]
    }

    /// Merge another set of statistics with identical binning.
    pub fn merge(&mut self, other: &MarginalStats) -> Result<()> {
        if self.bins != other.bins || self.sites() != other.sites() {
            return Err(SandpileError::BinningMismatch(format!(
                "{}x{} vs {}x{}",
                self.sites(),
                self.bins,
                other.sites(),
                other.bins
            )));
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        if nb == 0.0 {
            return Ok(());
        }
        for i in 0..self.sites() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
            for (x, y) in self.hist[i].iter_mut().zip(&other.hist[i]) {
                *x += y;
            }
        }
        self.count += other.count;
        Ok(())
    }
}

/// Half the L1 distance between the normalized histograms of `site`.
pub fn empirical_tv_distance(s1: &MarginalStats, s2: &MarginalStats, site: usize) -> Result<f64> {
    if s1.bins != s2.bins {
        return Err(SandpileError::BinningMismatch(format!(
            "{} vs {} bins",
            s1.bins, s2.bins
        )));
    }
    if site >= s1.sites() || site >= s2.sites() {
        return Err(SandpileError::SiteOutOfRange {
            site,
            len: s1.sites().min(s2.sites()),
        });
    }
    if s1.count == 0 || s2.count == 0 {
        return Err(SandpileError::InvalidParameter(
            "total variation of an empty histogram".into(),
        ));
    }
    let (n1, n2) = (s1.count as f64, s2.count as f64);
    let l1: f64 = s1.hist[site]
        .iter()
        .zip(&s2.hist[site])
        .map(|(&x, &y)| (x as f64 / n1 - y as f64 / n2).abs())
        .sum();
    Ok((l1 / 2.0).min(1.0))
}

/// Law of the configuration at each of `checkpoints`, estimated from
/// `replicas` independent runs started at `init`. Replica `r` draws from
/// stream `REPLICA_BASE + r` of `seed`.
pub fn transient_marginals(
    params: ChainParams,
    init: &ChainConfig,
    checkpoints: &[u64],
    replicas: u64,
    seed: u64,
    bins: usize,
) -> Result<Vec<MarginalStats>> {
    use rayon::prelude::*;

    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SandpileError::InvalidParameter(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    let per_replica: Vec<Vec<MarginalStats>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut p = ChainProcess::with_rng(
                params,
                init.clone(),
                rng::stream(seed, rng::REPLICA_BASE + r),
            )?;
            let mut out = Vec::with_capacity(checkpoints.len());
            for &c in checkpoints {
                while p.time() < c {
                    p.step()?;
                }
                let mut s = MarginalStats::new(params.n, bins)?;
                s.record(p.config().heights());
                out.push(s);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut merged: Vec<MarginalStats> = checkpoints
        .iter()
        .map(|_| MarginalStats::new(params.n, bins))
        .collect::<Result<_>>()?;
    for rep in per_replica {
        for (m, s) in merged.iter_mut().zip(&rep) {
            m.merge(s)?;
        }
    }
    Ok(merged)
}
