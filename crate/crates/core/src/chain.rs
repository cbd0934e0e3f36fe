//! Heights, site labels and Zhang topplings on a finite chain.
//!
//! Sites are indexed `0..n` in the API. A chain's two end sites have only one
//! neighbour; the share of a toppling that would go past the end leaves the
//! system.

use rand::Rng;

use crate::error::{Result, SandpileError};

/// A site with height at or above this value is unstable.
pub const THRESHOLD: f64 = 1.0;
/// Lower edge of the "full" band `[1/2, 1)`.
pub const FULL_LEVEL: f64 = 0.5;
/// Default hard cap on topplings inside one stabilization call.
pub const DEFAULT_TOPPLE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteLabel {
    Empty,
    Anomalous,
    Full,
    Unstable,
}

/// Label of a single height: empty `0`, anomalous `(0,1/2)`, full `[1/2,1)`,
/// unstable `[1,∞)`.
pub fn classify_site(h: f64) -> Result<SiteLabel> {
    if h < 0.0 || !h.is_finite() {
        return Err(SandpileError::InvalidHeight(h));
    }
    Ok(if h == 0.0 {
        SiteLabel::Empty
    } else if h < FULL_LEVEL {
        SiteLabel::Anomalous
    } else if h < THRESHOLD {
        SiteLabel::Full
    } else {
        SiteLabel::Unstable
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopplingPolicy {
    LeftmostFirst,
    RightmostFirst,
    /// All sites unstable at the start of a round topple together using the
    /// round-start heights; sites made unstable by the round wait for the next.
    ParallelRounds,
    UniformRandom,
}

impl std::str::FromStr for TopplingPolicy {
    type Err = SandpileError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" | "leftmost" | "leftmost-first" => Ok(TopplingPolicy::LeftmostFirst),
            "right" | "rightmost" | "rightmost-first" => Ok(TopplingPolicy::RightmostFirst),
            "parallel" | "parallel-rounds" => Ok(TopplingPolicy::ParallelRounds),
            "random" | "uniform-random" => Ok(TopplingPolicy::UniformRandom),
            other => Err(SandpileError::Parse(format!(
                "unknown toppling policy `{other}`"
            ))),
        }
    }
}

/// Which end of the chain an `E_b` configuration has emptied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundarySide {
    /// Empty at the first site (`E_1`).
    Left,
    /// Empty at the last site (`E_N`).
    Right,
}

/// Record of a stabilization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopplingLog {
    /// Topplings per site.
    pub counts: Vec<u64>,
    /// Sites in toppling order. Empty for parallel rounds.
    pub sequence: Vec<usize>,
    /// Sites toppled in each parallel round. Empty for sequential policies.
    pub rounds: Vec<Vec<usize>>,
    /// Mass that left through the chain ends.
    pub dissipated: f64,
}

impl TopplingLog {
    fn new(n: usize) -> Self {
        TopplingLog {
            counts: vec![0; n],
            ..Default::default()
        }
    }

    /// Number of topplings, i.e. the avalanche size.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

/// Outcome of a single toppling attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topple {
    pub toppled: bool,
    /// Height of the site just before toppling (0 when nothing happened).
    pub height: f64,
    pub dissipated: f64,
}

/// Height vector of the finite chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    heights: Vec<f64>,
}

impl ChainConfig {
    pub fn new(heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() {
            return Err(SandpileError::InvalidParameter(
                "chain needs at least one site".into(),
            ));
        }
        if let Some(&h) = heights.iter().find(|h| **h < 0.0 || !h.is_finite()) {
            return Err(SandpileError::InvalidHeight(h));
        }
        Ok(ChainConfig { heights })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<f64> {
        self.heights
    }

    pub fn height(&self, x: usize) -> Result<f64> {
        self.check_site(x)?;
        Ok(self.heights[x])
    }

    pub fn label(&self, x: usize) -> Result<SiteLabel> {
        classify_site(self.height(x)?)
    }

    pub fn total_mass(&self) -> f64 {
        self.heights.iter().sum()
    }

    /// Every height is below 1.
    pub fn is_stable(&self) -> bool {
        self.heights.iter().all(|&h| h < THRESHOLD)
    }

    pub fn max_abs_diff(&self, other: &ChainConfig) -> f64 {
        self.heights
            .iter()
            .zip(&other.heights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Site order reversed.
    pub fn mirrored(&self) -> ChainConfig {
        let mut heights = self.heights.clone();
        heights.reverse();
        ChainConfig { heights }
    }

    fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.heights.len() {
            Err(SandpileError::SiteOutOfRange {
                site: x,
                len: self.heights.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn add(&mut self, x: usize, amount: f64) -> Result<()> {
        self.check_site(x)?;
        if amount < 0.0 || !amount.is_finite() {
            return Err(SandpileError::InvalidParameter(format!(
                "addition amount {amount}"
            )));
        }
        self.heights[x] += amount;
        Ok(())
    }

    /// Zhang toppling at `x`. A stable site is left unchanged.
    pub fn topple(&mut self, x: usize) -> Result<Topple> {
        self.check_site(x)?;
        Ok(self.topple_unchecked(x))
    }

    fn topple_unchecked(&mut self, x: usize) -> Topple {
        let h = self.heights[x];
        if h < THRESHOLD {
            return Topple {
                toppled: false,
                height: 0.0,
                dissipated: 0.0,
            };
        }
        let share = h / 2.0;
        let mut dissipated = 0.0;
        self.heights[x] = 0.0;
        if x > 0 {
            self.heights[x - 1] += share;
        } else {
            dissipated += share;
        }
        if x + 1 < self.heights.len() {
            self.heights[x + 1] += share;
        } else {
            dissipated += share;
        }
        Topple {
            toppled: true,
            height: h,
            dissipated,
        }
    }

    fn is_unstable_at(&self, x: usize) -> bool {
        self.heights[x] >= THRESHOLD
    }

    /// Topple until stable, in the order given by `policy`.
    ///
    /// `rng` is only consulted by [`TopplingPolicy::UniformRandom`].
    pub fn stabilize<R: Rng + ?Sized>(
        &mut self,
        policy: TopplingPolicy,
        rng: &mut R,
    ) -> Result<TopplingLog> {
        self.stabilize_with_cap(policy, rng, DEFAULT_TOPPLE_CAP)
    }

    pub fn stabilize_with_cap<R: Rng + ?Sized>(
        &mut self,
        policy: TopplingPolicy,
        rng: &mut R,
        cap: u64,
    ) -> Result<TopplingLog> {
        match policy {
            TopplingPolicy::LeftmostFirst => self.stabilize_leftmost(cap),
            TopplingPolicy::RightmostFirst => {
                // Rightmost-first is leftmost-first on the reversed chain.
                self.heights.reverse();
                let out = self.stabilize_leftmost(cap);
                self.heights.reverse();
                let mut log = out?;
                let n = self.len();
                log.counts.reverse();
                for s in &mut log.sequence {
                    *s = n - 1 - *s;
                }
                Ok(log)
            }
            TopplingPolicy::ParallelRounds => self.stabilize_parallel(cap),
            TopplingPolicy::UniformRandom => self.stabilize_random(rng, cap),
        }
    }

    fn record(&mut self, log: &mut TopplingLog, x: usize, cap: u64) -> Result<()> {
        if log.sequence.len() as u64 >= cap {
            return Err(SandpileError::ToppleCapExceeded { cap });
        }
        let t = self.topple_unchecked(x);
        debug_assert!(t.toppled);
        log.counts[x] += 1;
        log.sequence.push(x);
        log.dissipated += t.dissipated;
        Ok(())
    }

    fn stabilize_leftmost(&mut self, cap: u64) -> Result<TopplingLog> {
        let n = self.len();
        let mut log = TopplingLog::new(n);
        // Sites left of `pos` are stable; toppling `pos` can only destabilize
        // its two neighbours.
        let mut pos = (0..n).find(|&i| self.is_unstable_at(i));
        while let Some(i) = pos {
            self.record(&mut log, i, cap)?;
            pos = if i > 0 && self.is_unstable_at(i - 1) {
                Some(i - 1)
            } else {
                (i + 1..n).find(|&j| self.is_unstable_at(j))
            };
        }
        Ok(log)
    }

    fn stabilize_random<R: Rng + ?Sized>(&mut self, rng: &mut R, cap: u64) -> Result<TopplingLog> {
        let n = self.len();
        let mut log = TopplingLog::new(n);
        let mut unstable = IndexSet::new(n);
        for i in 0..n {
            if self.is_unstable_at(i) {
                unstable.insert(i);
            }
        }
        while !unstable.is_empty() {
            let x = unstable.get(rng.random_range(0..unstable.len()));
            self.record(&mut log, x, cap)?;
            for y in [x.wrapping_sub(1), x, x + 1] {
                if y < n {
                    if self.is_unstable_at(y) {
                        unstable.insert(y);
                    } else {
                        unstable.remove(y);
                    }
                }
            }
        }
        Ok(log)
    }

    fn stabilize_parallel(&mut self, cap: u64) -> Result<TopplingLog> {
        let n = self.len();
        let mut log = TopplingLog::new(n);
        let mut done = 0u64;
        loop {
            let round: Vec<usize> = (0..n).filter(|&i| self.is_unstable_at(i)).collect();
            if round.is_empty() {
                return Ok(log);
            }
            done += round.len() as u64;
            if done > cap {
                return Err(SandpileError::ToppleCapExceeded { cap });
            }
            let start = self.heights.clone();
            let unstable = |i: usize| start[i] >= THRESHOLD;
            for (i, h) in self.heights.iter_mut().enumerate() {
                let own = if unstable(i) { 0.0 } else { start[i] };
                let left = if i > 0 && unstable(i - 1) {
                    start[i - 1] / 2.0
                } else {
                    0.0
                };
                let right = if i + 1 < n && unstable(i + 1) {
                    start[i + 1] / 2.0
                } else {
                    0.0
                };
                *h = own + (left + right);
            }
            for &i in &round {
                log.counts[i] += 1;
                if i == 0 {
                    log.dissipated += start[i] / 2.0;
                }
                if i + 1 == n {
                    log.dissipated += start[i] / 2.0;
                }
            }
            log.rounds.push(round);
        }
    }

    /// Empty at `x` and full everywhere else (the class `E_x`).
    pub fn in_class_e(&self, x: usize) -> Result<bool> {
        self.check_site(x)?;
        Ok(self.heights[x] == 0.0
            && self
                .heights
                .iter()
                .enumerate()
                .all(|(y, &h)| y == x || (FULL_LEVEL..THRESHOLD).contains(&h)))
    }

    /// Membership in `E_b = E_1 ∪ E_N`, reporting which end is empty.
    pub fn e_b_side(&self) -> Option<BoundarySide> {
        let last = self.len() - 1;
        if self.in_class_e(last).unwrap_or(false) {
            Some(BoundarySide::Right)
        } else if self.in_class_e(0).unwrap_or(false) {
            Some(BoundarySide::Left)
        } else {
            None
        }
    }

    pub fn in_e_b(&self) -> bool {
        self.e_b_side().is_some()
    }
}

/// Set of site indices with O(1) insert, remove and uniform pick.
#[derive(Debug, Clone)]
pub(crate) struct IndexSet {
    members: Vec<usize>,
    slot: Vec<usize>,
}

impl IndexSet {
    const ABSENT: usize = usize::MAX;

    pub(crate) fn new(capacity: usize) -> Self {
        IndexSet {
            members: Vec::new(),
            slot: vec![Self::ABSENT; capacity],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.members.len()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub(crate) fn get(&self, i: usize) -> usize {
        self.members[i]
    }

    pub(crate) fn contains(&self, x: usize) -> bool {
        self.slot[x] != Self::ABSENT
    }

    pub(crate) fn insert(&mut self, x: usize) {
        if self.slot[x] == Self::ABSENT {
            self.slot[x] = self.members.len();
            self.members.push(x);
        }
    }

    pub(crate) fn remove(&mut self, x: usize) {
        let i = self.slot[x];
        if i == Self::ABSENT {
            return;
        }
        let last = *self.members.last().unwrap();
        self.members.swap_remove(i);
        if last != x {
            self.slot[last] = i;
        }
        self.slot[x] = Self::ABSENT;
    }
}
