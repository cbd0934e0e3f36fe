//! The coupled pair and its three phases.
//!
//! 1. **Independent**: each chain draws from its own stream until both sit in
//!    `E_b` with the same empty end. If that end is the first site, both chains
//!    are handled in mirrored coordinates so that the empty site is "site N".
//! 2. **Contraction**: both chains receive the same draw. The draw must be a
//!    heavy addition to the boundary site currently being driven (site N until
//!    it topples, then site 1, and so on). Every avalanche is a full sweep, and
//!    the two configurations contract towards each other. Once both are in
//!    `E_N` and closer than `ε_{a,b,N}`, merging starts.
//! 3. **Merging**: all additions go to site 1, with amounts drawn from narrow
//!    intervals. At the `k`-th avalanche chain B receives chain A's amount
//!    shifted by `D_k` modulo `b - a`, which equalizes one more site. After
//!    `N - 1` avalanches the chains coincide.
//!
//! A draw that does not meet the current phase's requirement is still applied
//! to both chains, and the pair then falls back to phase 1. Chain B's amount is
//! always a measure-preserving function of a fresh uniform draw, so each chain
//! on its own is an exact `(N, [a, b])` process.

use serde::{Deserialize, Serialize};

use crate::chain::{BoundarySide, ChainConfig, TopplingLog, DEFAULT_TOPPLE_CAP};
use crate::coupling::constants::{
    correction_d, coupled_amount, max_heavy_window, merge_window, CouplingConstants,
};
use crate::error::{Result, SandpileError};
use crate::finite::{add_and_stabilize, ChainParams};
use crate::rng::{self, SimRng};

/// Sites that are equal after a merging avalanche must agree to this tolerance.
pub const MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Independent,
    Contraction,
    Merging,
    Merged,
}

impl Phase {
    fn index(self) -> usize {
        match self {
            Phase::Independent => 0,
            Phase::Contraction => 1,
            Phase::Merging => 2,
            Phase::Merged => 3,
        }
    }
}

/// What happened in one coupled step. Sites are physical and zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStep {
    /// Phase in which the step was taken.
    pub phase: Phase,
    pub site_a: usize,
    pub amount_a: f64,
    pub site_b: usize,
    pub amount_b: f64,
    pub topplings_a: u64,
    pub topplings_b: u64,
    /// The draw violated the phase requirement and the pair fell back to phase 1.
    pub restarted: bool,
}

/// Summary of a coupling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub seed: u64,
    pub merged: bool,
    pub merge_time: Option<u64>,
    pub restarts: u64,
    /// Steps spent in the independent, contraction and merging phases.
    pub phase_times: [u64; 3],
    pub steps: u64,
    pub contraction_entries: u64,
    pub merging_entries: u64,
    /// Steps of the successful merging phase.
    pub merging_steps: Option<u64>,
    /// Avalanches of the successful merging phase.
    pub merging_avalanches: Option<u64>,
}

/// JSON-lines form of [`CouplingResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub seed: u64,
    pub merged: bool,
    pub merge_time: Option<u64>,
    pub restarts: u64,
    pub phase_times: Vec<u64>,
}

impl From<&CouplingResult> for CouplingRecord {
    fn from(r: &CouplingResult) -> Self {
        CouplingRecord {
            seed: r.seed,
            merged: r.merged,
            merge_time: r.merge_time,
            restarts: r.restarts,
            phase_times: r.phase_times.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CouplingState {
    params: ChainParams,
    consts: CouplingConstants,
    seed: u64,
    a: ChainConfig,
    b: ChainConfig,
    rng_a: SimRng,
    rng_b: SimRng,
    t: u64,
    phase: Phase,
    /// Work in reversed site order (both chains empty at the first site).
    mirrored: bool,
    /// Logical site driven during contraction.
    target: usize,
    avalanches: u64,
    window: u64,
    /// Merging avalanche currently being prepared (1-based).
    merge_k: usize,
    correction: f64,
    merge_start: u64,
    restarts: u64,
    phase_steps: [u64; 4],
    contraction_entries: u64,
    merging_entries: u64,
    merge_time: Option<u64>,
    merging_steps: Option<u64>,
    merging_avalanches: Option<u64>,
    cap: u64,
}

impl CouplingState {
    /// Coupled pair started at `(eta_a, eta_b)`. Chain A (and every shared
    /// draw) uses stream `COUPLING_A` of `seed`, chain B's independent draws
    /// use `COUPLING_B`.
    pub fn new(
        params: ChainParams,
        eta_a: ChainConfig,
        eta_b: ChainConfig,
        seed: u64,
    ) -> Result<Self> {
        let consts = CouplingConstants::new(params.a, params.b, params.n)?;
        for c in [&eta_a, &eta_b] {
            if c.len() != params.n || !c.is_stable() {
                return Err(SandpileError::InvalidParameter(format!(
                    "coupling starts must be stable with {} sites",
                    params.n
                )));
            }
        }
        let mut state = CouplingState {
            params,
            consts,
            seed,
            a: eta_a,
            b: eta_b,
            rng_a: rng::stream(seed, rng::COUPLING_A),
            rng_b: rng::stream(seed, rng::COUPLING_B),
            t: 0,
            phase: Phase::Independent,
            mirrored: false,
            target: 0,
            avalanches: 0,
            window: 0,
            merge_k: 0,
            correction: 0.0,
            merge_start: 0,
            restarts: 0,
            phase_steps: [0; 4],
            contraction_entries: 0,
            merging_entries: 0,
            merge_time: None,
            merging_steps: None,
            merging_avalanches: None,
            cap: DEFAULT_TOPPLE_CAP,
        };
        if state.a == state.b {
            state.phase = Phase::Merged;
            state.merge_time = Some(0);
        } else {
            state.try_enter_contraction()?;
        }
        Ok(state)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn chain_a(&self) -> &ChainConfig {
        &self.a
    }

    pub fn chain_b(&self) -> &ChainConfig {
        &self.b
    }

    pub fn constants(&self) -> &CouplingConstants {
        &self.consts
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    fn n(&self) -> usize {
        self.params.n
    }

    /// Physical index of a logical site.
    fn phys(&self, logical: usize) -> usize {
        if self.mirrored {
            self.n() - 1 - logical
        } else {
            logical
        }
    }

    fn logical_heights(&self, c: &ChainConfig) -> Vec<f64> {
        let mut h = c.heights().to_vec();
        if self.mirrored {
            h.reverse();
        }
        h
    }

    fn logical_diff(&self) -> Vec<f64> {
        let a = self.logical_heights(&self.a);
        let b = self.logical_heights(&self.b);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    fn violation(&self, what: impl std::fmt::Display) -> SandpileError {
        SandpileError::InvariantViolation(format!(
            "coupling seed {} at t={}: {what}",
            self.seed, self.t
        ))
    }

    fn try_enter_contraction(&mut self) -> Result<()> {
        let side = match (self.a.e_b_side(), self.b.e_b_side()) {
            (Some(x), Some(y)) if x == y => x,
            _ => return Ok(()),
        };
        self.mirrored = side == BoundarySide::Left;
        self.phase = Phase::Contraction;
        self.target = self.n() - 1;
        self.avalanches = 0;
        self.window = 0;
        self.contraction_entries += 1;
        self.try_enter_merging();
        Ok(())
    }

    /// Both chains in logical `E_N` and closer than `ε_{a,b,N}`.
    fn try_enter_merging(&mut self) {
        let empty = self.phys(self.n() - 1);
        let in_e_n = |c: &ChainConfig| c.in_class_e(empty).unwrap_or(false);
        if in_e_n(&self.a) && in_e_n(&self.b) && self.a.max_abs_diff(&self.b) < self.consts.eps1 {
            self.phase = Phase::Merging;
            self.merge_k = 1;
            self.correction = correction_d(&self.logical_diff(), 1, self.n()).expect("N >= 2");
            self.merge_start = self.t;
            self.merging_entries += 1;
        }
    }

    fn restart(&mut self) -> Result<()> {
        self.phase = Phase::Independent;
        self.restarts += 1;
        self.try_enter_contraction()
    }

    fn apply_pair(
        &mut self,
        xa: usize,
        ua: f64,
        xb: usize,
        ub: f64,
    ) -> Result<(TopplingLog, TopplingLog)> {
        let la = add_and_stabilize(&mut self.a, &self.params, xa, ua, self.cap)?;
        let lb = add_and_stabilize(&mut self.b, &self.params, xb, ub, self.cap)?;
        self.t += 1;
        Ok((la, lb))
    }

    /// Advance the pair by one tick.
    pub fn step(&mut self) -> Result<CoupledStep> {
        let phase = self.phase;
        self.phase_steps[phase.index()] += 1;
        match phase {
            Phase::Independent => self.independent_step(),
            Phase::Contraction => self.contraction_step(),
            Phase::Merging => self.merging_step(),
            Phase::Merged => self.merged_step(),
        }
    }

    fn independent_step(&mut self) -> Result<CoupledStep> {
        let (xa, ua) = self.params.draw(&mut self.rng_a);
        let (xb, ub) = self.params.draw(&mut self.rng_b);
        let (la, lb) = self.apply_pair(xa, ua, xb, ub)?;
        self.try_enter_contraction()?;
        Ok(step_record(
            Phase::Independent,
            xa,
            ua,
            xb,
            ub,
            &la,
            &lb,
            false,
        ))
    }

    fn contraction_step(&mut self) -> Result<CoupledStep> {
        let n = self.n();
        let (x, u) = self.params.draw(&mut self.rng_a);
        let ok = x == self.phys(self.target) && self.params.is_heavy(u);
        let (la, lb) = self.apply_pair(x, u, x, u)?;
        let rec = |restarted| step_record(Phase::Contraction, x, u, x, u, &la, &lb, restarted);
        if !ok {
            self.restart()?;
            return Ok(rec(true));
        }
        self.window += 1;
        if la.is_empty() != lb.is_empty() {
            return Err(self.violation("contraction avalanche in only one chain"));
        }
        if la.is_empty() {
            return Ok(rec(false));
        }
        if la.counts.iter().chain(&lb.counts).any(|&c| c != 1) {
            return Err(self.violation("contraction avalanche is not a single sweep"));
        }
        if self.window > max_heavy_window(self.params.a, self.params.b) {
            return Err(self.violation(format!("contraction window of {} steps", self.window)));
        }
        self.window = 0;
        self.avalanches += 1;
        self.target = n - 1 - self.target;
        let empty = self.phys(self.target);
        if !self.a.in_class_e(empty)? || !self.b.in_class_e(empty)? {
            return Err(self.violation("sweep did not empty the opposite boundary"));
        }
        if self.avalanches.is_multiple_of(2) {
            self.try_enter_merging();
            if self.phase == Phase::Contraction && self.avalanches >= self.consts.k_eps {
                return Err(self.violation(format!(
                    "difference {} not below ε after {} avalanches",
                    self.a.max_abs_diff(&self.b),
                    self.avalanches
                )));
            }
        }
        Ok(rec(false))
    }

    fn merging_step(&mut self) -> Result<CoupledStep> {
        let n = self.n();
        let k = self.merge_k;
        let (a, b) = (self.params.a, self.params.b);
        let first = self.phys(0);
        let eps_k = self.consts.eps(k);
        let a2 = self.params.heavy_threshold();
        let hmax = self.a.heights()[first].max(self.b.heights()[first]);
        let avalanche_step = hmax > 1.0 - a2 - 2.0 * eps_k;

        let (x, u) = self.params.draw(&mut self.rng_a);
        let ub = if avalanche_step {
            coupled_amount(u, self.correction, a, b)
        } else {
            u
        };
        let (lo, hi) = if avalanche_step {
            self.consts.avalanche_interval(k)
        } else {
            self.consts.quiet_interval(k)
        };
        let ok = x == first && (lo..=hi).contains(&u);
        let (la, lb) = self.apply_pair(x, u, x, ub)?;
        let rec = |restarted| step_record(Phase::Merging, x, u, x, ub, &la, &lb, restarted);
        if !ok {
            self.restart()?;
            return Ok(rec(true));
        }
        if !avalanche_step {
            if !la.is_empty() || !lb.is_empty() {
                return Err(self.violation("toppling before the scheduled merging avalanche"));
            }
            return Ok(rec(false));
        }

        // Avalanche k topples logical sites 1..=N-k once each.
        for (log, name) in [(&la, "A"), (&lb, "B")] {
            let expected = |logical: usize| u64::from(logical < n - k);
            if (0..n).any(|l| log.counts[self.phys(l)] != expected(l)) {
                return Err(self.violation(format!(
                    "merging avalanche {k} in chain {name} has counts {:?}",
                    log.counts
                )));
            }
        }
        let ha = self.logical_heights(&self.a);
        let hb = self.logical_heights(&self.b);
        if ha[n - k - 1] != 0.0 || hb[n - k - 1] != 0.0 {
            return Err(self.violation(format!(
                "site {} not emptied by merging avalanche {k}",
                n - k
            )));
        }
        let tail = (n - k..n)
            .map(|y| (ha[y] - hb[y]).abs())
            .fold(0.0, f64::max);
        if tail > MERGE_TOLERANCE {
            return Err(self.violation(format!(
                "sites {}..={n} differ by {tail} after avalanche {k}",
                n - k + 1
            )));
        }
        let diff = self.a.max_abs_diff(&self.b);
        if diff > self.consts.eps(k + 1) + MERGE_TOLERANCE {
            return Err(self.violation(format!("difference {diff} exceeds ε_{}", k + 1)));
        }

        if k + 1 == n {
            let steps = self.t - self.merge_start;
            if steps > (n as u64 - 1) * merge_window(a, b) {
                return Err(self.violation(format!("merging took {steps} steps")));
            }
            // Remaining differences are rounding noise below MERGE_TOLERANCE.
            self.b = self.a.clone();
            self.phase = Phase::Merged;
            self.merge_time = Some(self.t);
            self.merging_steps = Some(steps);
            self.merging_avalanches = Some(k as u64);
        } else {
            self.merge_k = k + 1;
            self.correction = correction_d(&self.logical_diff(), k + 1, n)?;
        }
        Ok(rec(false))
    }

    fn merged_step(&mut self) -> Result<CoupledStep> {
        let (x, u) = self.params.draw(&mut self.rng_a);
        let (la, lb) = self.apply_pair(x, u, x, u)?;
        if self.a != self.b {
            return Err(self.violation("merged chains diverged"));
        }
        Ok(step_record(Phase::Merged, x, u, x, u, &la, &lb, false))
    }

    /// Step until merged or `max_steps` ticks have elapsed in total.
    pub fn run(&mut self, max_steps: u64) -> Result<()> {
        while self.phase != Phase::Merged && self.t < max_steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn result(&self) -> CouplingResult {
        CouplingResult {
            seed: self.seed,
            merged: self.phase == Phase::Merged,
            merge_time: self.merge_time,
            restarts: self.restarts,
            phase_times: [
                self.phase_steps[0],
                self.phase_steps[1],
                self.phase_steps[2],
            ],
            steps: self.t,
            contraction_entries: self.contraction_entries,
            merging_entries: self.merging_entries,
            merging_steps: self.merging_steps,
            merging_avalanches: self.merging_avalanches,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_record(
    phase: Phase,
    site_a: usize,
    amount_a: f64,
    site_b: usize,
    amount_b: f64,
    la: &TopplingLog,
    lb: &TopplingLog,
    restarted: bool,
) -> CoupledStep {
    CoupledStep {
        phase,
        site_a,
        amount_a,
        site_b,
        amount_b,
        topplings_a: la.total(),
        topplings_b: lb.total(),
        restarted,
    }
}

/// Couple the chains started at `eta_a` and `eta_b` for at most `max_steps` ticks.
pub fn run_coupling(
    params: ChainParams,
    eta_a: &ChainConfig,
    eta_b: &ChainConfig,
    seed: u64,
    max_steps: u64,
) -> Result<CouplingResult> {
    let mut state = CouplingState::new(params, eta_a.clone(), eta_b.clone(), seed)?;
    state.run(max_steps)?;
    Ok(state.result())
}
