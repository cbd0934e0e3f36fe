//! Linear shadow of the contraction phase.
//!
//! Between avalanches every addition of the contraction phase goes to the same
//! empty boundary site, and an avalanche is a fixed sequence of topplings. The
//! configuration after `k` avalanches is therefore linear in the window sums
//! `S_1..S_k` and the initial heights:
//!
//! `h_y(τ_k) = Σ_l A_{ly}(k) S_l + Σ_m B_{my}(k) h_m(0)`.
//!
//! [`CoefficientTracker`] replays the same topplings on the coefficients.

use serde::Serialize;

use crate::chain::{ChainConfig, TopplingLog};
use crate::coupling::constants::contraction_rate;
use crate::error::{Result, SandpileError};
use crate::finite::ChainParams;
use crate::rng::{self, SimRng};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct CoefficientTracker {
    initial: Vec<f64>,
    /// `a_coef[y][l] = A_{ly}`.
    a_coef: Vec<Vec<f64>>,
    /// `b_coef[y][m] = B_{my}`.
    b_coef: Vec<Vec<f64>>,
    sums: Vec<f64>,
    window_site: Option<usize>,
}

impl CoefficientTracker {
    pub fn new(initial: &ChainConfig) -> Self {
        let n = initial.len();
        let b_coef = (0..n)
            .map(|y| (0..n).map(|m| if m == y { 1.0 } else { 0.0 }).collect())
            .collect();
        CoefficientTracker {
            initial: initial.heights().to_vec(),
            a_coef: vec![Vec::new(); n],
            b_coef,
            sums: Vec::new(),
            window_site: None,
        }
    }

    pub fn windows(&self) -> usize {
        self.sums.len()
    }

    /// Register an addition. All additions of a window must hit one site and
    /// precede the window's topplings.
    pub fn add(&mut self, site: usize, amount: f64) -> Result<()> {
        match self.window_site {
            None => {
                for row in &mut self.a_coef {
                    row.push(0.0);
                }
                self.a_coef[site][self.sums.len()] = 1.0;
                self.sums.push(amount);
                self.window_site = Some(site);
            }
            Some(s) if s == site => *self.sums.last_mut().unwrap() += amount,
            Some(s) => {
                return Err(SandpileError::InvariantViolation(format!(
                    "window mixes additions to sites {s} and {site}"
                )))
            }
        }
        Ok(())
    }

    /// Replay the topplings of `log` and close the current window.
    pub fn apply(&mut self, log: &TopplingLog) {
        if log.sequence.is_empty() {
            return;
        }
        let n = self.initial.len();
        for &x in &log.sequence {
            for rows in [&mut self.a_coef, &mut self.b_coef] {
                let row = std::mem::take(&mut rows[x]);
                for (j, &c) in row.iter().enumerate() {
                    if x > 0 {
                        rows[x - 1][j] += c / 2.0;
                    }
                    if x + 1 < n {
                        rows[x + 1][j] += c / 2.0;
                    }
                }
                rows[x] = vec![0.0; row.len()];
            }
        }
        self.window_site = None;
    }

    /// `A·S + B·h(0)` per site.
    pub fn predicted(&self) -> Vec<f64> {
        (0..self.initial.len())
            .map(|y| {
                let a: f64 = self.a_coef[y]
                    .iter()
                    .zip(&self.sums)
                    .map(|(c, s)| c * s)
                    .sum();
                let b: f64 = self.b_coef[y]
                    .iter()
                    .zip(&self.initial)
                    .map(|(c, h)| c * h)
                    .sum();
                a + b
            })
            .collect()
    }

    pub fn residual(&self, config: &ChainConfig) -> f64 {
        self.predicted()
            .iter()
            .zip(config.heights())
            .map(|(p, h)| (p - h).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{m,y} B_{my}`.
    pub fn max_b(&self) -> f64 {
        self.b_coef.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn b_entry(&self, m: usize, y: usize) -> f64 {
        self.b_coef[y][m]
    }

    pub fn a_entry(&self, l: usize, y: usize) -> f64 {
        self.a_coef[y][l]
    }
}

/// One row of a contraction verification: state after `k` avalanches.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionRow {
    pub k: u64,
    pub max_b: f64,
    pub b_bound: f64,
    pub residual: f64,
    pub max_diff: f64,
    pub diff_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub n: usize,
    pub rows: Vec<ContractionRow>,
    /// Steps taken by the forced dynamics.
    pub steps: u64,
    pub max_window: u64,
}

impl ContractionReport {
    pub fn final_diff(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.max_diff)
    }
}

/// Random configuration in `E_N`: full sites uniform on `[1/2, 1)`, last site empty.
pub fn random_e_n<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ChainConfig {
    let mut h: Vec<f64> = (0..n).map(|_| 0.5 + 0.5 * rng.random::<f64>()).collect();
    h[n - 1] = 0.0;
    ChainConfig::new(h).expect("heights in [0, 1)")
}

/// Drive two random `E_N` configurations with the forced contraction event
/// (heavy additions, alternating boundary targets) for `k_max` avalanches,
/// checking at every avalanche that
///
/// * the tracker reproduces both chains to `1e-9`,
/// * `max B ≤ (1 - 2^{-⌈3N/2⌉})^k`,
/// * `max |η - ξ| ≤ (N/2)(1 - 2^{-⌈3N/2⌉})^k`.
pub fn verify_contraction(params: ChainParams, k_max: u64, seed: u64) -> Result<ContractionReport> {
    let mut rng = rng::stream(seed, rng::INITIAL_CONFIG);
    let start_a = random_e_n(params.n, &mut rng);
    let start_b = random_e_n(params.n, &mut rng);
    verify_contraction_from(params, &start_a, &start_b, k_max, &mut rng)
}

pub fn verify_contraction_from(
    params: ChainParams,
    start_a: &ChainConfig,
    start_b: &ChainConfig,
    k_max: u64,
    rng: &mut SimRng,
) -> Result<ContractionReport> {
    let n = params.n;
    if n < 2 {
        return Err(SandpileError::InvalidParameter(
            "contraction needs N >= 2".into(),
        ));
    }
    for c in [start_a, start_b] {
        if c.len() != n || !c.in_class_e(n - 1)? {
            return Err(SandpileError::InvalidParameter(
                "contraction starts must lie in E_N".into(),
            ));
        }
    }
    let rate = contraction_rate(n);
    let window_cap = super::constants::max_heavy_window(params.a, params.b);
    let mut a = start_a.clone();
    let mut b = start_b.clone();
    let mut ta = CoefficientTracker::new(&a);
    let mut tb = CoefficientTracker::new(&b);
    let mut report = ContractionReport {
        n,
        rows: Vec::new(),
        steps: 0,
        max_window: 0,
    };
    let mut push_row = |k: u64,
                        ta: &CoefficientTracker,
                        tb: &CoefficientTracker,
                        a: &ChainConfig,
                        b: &ChainConfig| {
        let row = ContractionRow {
            k,
            max_b: ta.max_b(),
            b_bound: rate.powi(k as i32),
            residual: ta.residual(a).max(tb.residual(b)),
            max_diff: a.max_abs_diff(b),
            diff_bound: n as f64 / 2.0 * rate.powi(k as i32),
        };
        if row.max_b > row.b_bound + 1e-12 {
            return Err(SandpileError::InvariantViolation(format!(
                "max B {} exceeds {} after {k} avalanches",
                row.max_b, row.b_bound
            )));
        }
        if row.residual > 1e-9 {
            return Err(SandpileError::InvariantViolation(format!(
                "linear shadow residual {}",
                row.residual
            )));
        }
        if row.max_diff > row.diff_bound + 1e-12 {
            return Err(SandpileError::InvariantViolation(format!(
                "difference {} exceeds {} after {k} avalanches",
                row.max_diff, row.diff_bound
            )));
        }
        report.rows.push(row);
        Ok(())
    };
    push_row(0, &ta, &tb, &a, &b)?;

    let heavy = params.heavy_threshold();
    let mut target = n - 1;
    let mut k = 0;
    let mut window = 0;
    let mut steps = 0;
    let mut max_window = 0;
    while k < k_max {
        let amount = heavy + (params.b - heavy) * rng.random::<f64>();
        let la = crate::finite::add_and_stabilize(&mut a, &params, target, amount, u64::MAX)?;
        let lb = crate::finite::add_and_stabilize(&mut b, &params, target, amount, u64::MAX)?;
        ta.add(target, amount)?;
        tb.add(target, amount)?;
        ta.apply(&la);
        tb.apply(&lb);
        steps += 1;
        window += 1;
        if la.is_empty() != lb.is_empty() {
            return Err(SandpileError::InvariantViolation(
                "avalanche in only one chain".into(),
            ));
        }
        if la.is_empty() {
            continue;
        }
        if la.counts.iter().chain(&lb.counts).any(|&c| c != 1) {
            return Err(SandpileError::InvariantViolation(
                "contraction avalanche is not a single sweep".into(),
            ));
        }
        if window > window_cap {
            return Err(SandpileError::InvariantViolation(format!(
                "window of {window} steps exceeds {window_cap}"
            )));
        }
        max_window = max_window.max(window);
        window = 0;
        k += 1;
        target = n - 1 - target;
        if !a.in_class_e(target)? || !b.in_class_e(target)? {
            return Err(SandpileError::InvariantViolation(
                "sweep did not empty the opposite boundary".into(),
            ));
        }
        push_row(k, &ta, &tb, &a, &b)?;
    }
    report.steps = steps;
    report.max_window = max_window;
    Ok(report)
}
