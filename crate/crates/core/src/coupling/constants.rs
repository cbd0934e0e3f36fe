//! Closed-form constants of the coupling construction.

use serde::Serialize;

use crate::error::{Result, SandpileError};

/// `1 - 2^{-⌈3N/2⌉}`: per-avalanche contraction factor of the coefficient matrix.
pub fn contraction_rate(n: usize) -> f64 {
    let exponent = (3 * n).div_ceil(2) as i32;
    1.0 - 2f64.powi(-exponent)
}

fn check_ab_n(a: f64, b: f64, n: usize) -> Result<()> {
    if n < 2 {
        return Err(SandpileError::InvalidParameter(format!(
            "coupling needs N >= 2, got {n}"
        )));
    }
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(SandpileError::InvalidParameter(format!(
            "need 0 <= a < b <= 1, got a={a}, b={b}"
        )));
    }
    Ok(())
}

/// `Π_{l=1}^{N-1} (1 + 2^{N-2-l})`.
fn growth_product(n: usize) -> f64 {
    (1..n)
        .map(|l| 1.0 + 2f64.powi(n as i32 - 2 - l as i32))
        .product()
}

/// `ε_{a,b,N} = (b - a) / (6 + 16 Π_{l=1}^{N-1} (1 + 2^{N-2-l}))`, the
/// closeness at which the merging phase can start.
pub fn epsilon_abn(a: f64, b: f64, n: usize) -> Result<f64> {
    check_ab_n(a, b, n)?;
    Ok((b - a) / (6.0 + 16.0 * growth_product(n)))
}

/// Ceiling that absorbs floating-point noise just above an integer.
fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `⌈log_{rate}(2ε/N)⌉` with `rate = 1 - 2^{-⌈3N/2⌉}`.
fn log_rate_steps(n: usize, eps: f64) -> Result<u64> {
    let x = 2.0 * eps / n as f64;
    if !(x > 0.0 && x < 1.0) {
        return Err(SandpileError::InvalidParameter(format!(
            "need 0 < 2ε/N < 1, got {x}"
        )));
    }
    Ok(ceil_tolerant(x.ln() / contraction_rate(n).ln()) as u64)
}

/// Number of contraction avalanches `k_ε = 2⌈log_{rate}(2ε/N)⌉` after which
/// two `E_N` starts are guaranteed to differ by less than `ε`.
pub fn k_epsilon(n: usize, eps: f64) -> Result<u64> {
    Ok(2 * log_rate_steps(n, eps)?)
}

/// `t_ε = 2⌈2/(a+b)⌉ · ⌈log_{rate}(2ε/N)⌉`: the step budget of the contraction phase.
pub fn t_epsilon(a: f64, b: f64, n: usize, eps: f64) -> Result<u64> {
    check_ab_n(a, b, n)?;
    Ok(2 * max_heavy_window(a, b) * log_rate_steps(n, eps)?)
}

/// `⌈2/(a+b)⌉`: heavy additions needed to push an empty site over 1.
pub fn max_heavy_window(a: f64, b: f64) -> u64 {
    ceil_tolerant(2.0 / (a + b)) as u64
}

/// `⌈1/(a+b)⌉`: heavy additions needed to push a full site over 1.
pub fn merge_window(a: f64, b: f64) -> u64 {
    ceil_tolerant(1.0 / (a + b)) as u64
}

/// Merging correction
/// `D_k = Σ_{y=1}^{N-k} 2^{y-1} (η_y - ξ_y)` for `diff[y-1] = η_y - ξ_y`.
pub fn correction_d(diff: &[f64], k: usize, n: usize) -> Result<f64> {
    if k < 1 || k >= n || diff.len() != n {
        return Err(SandpileError::InvalidParameter(format!(
            "correction needs 1 <= k <= N-1 and N differences (k={k}, N={n}, got {})",
            diff.len()
        )));
    }
    Ok(diff[..n - k]
        .iter()
        .enumerate()
        .map(|(i, d)| 2f64.powi(i as i32) * d)
        .sum())
}

/// `a + (u + d - a) mod (b - a)`: a shift of `[a, b)` onto itself, so a
/// uniform `u` gives a uniform result.
pub fn coupled_amount(u: f64, d: f64, a: f64, b: f64) -> f64 {
    let out = a + (u + d - a).rem_euclid(b - a);
    // rem_euclid may round up to exactly b - a
    if out >= b {
        a
    } else {
        out
    }
}

/// All constants for one `(a, b, N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingConstants {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    /// `ε_{a,b,N}`.
    pub eps1: f64,
    /// `ε_1, ..., ε_N` with `ε_{k+1} = (1 + 2^{N-k-2}) ε_k`.
    pub eps_schedule: Vec<f64>,
    pub k_eps: u64,
    pub t_eps: u64,
    /// `d_1, ..., d_{N-1}`, bounds on `|D_k|`.
    pub d_bounds: Vec<f64>,
    pub rate: f64,
}

impl CouplingConstants {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        let eps1 = epsilon_abn(a, b, n)?;
        let mut eps_schedule = vec![eps1];
        for k in 1..n {
            let next = (1.0 + 2f64.powi(n as i32 - k as i32 - 2)) * eps_schedule[k - 1];
            eps_schedule.push(next);
        }
        let d_bounds = (1..n)
            .map(|k| {
                let prod: f64 = (1..k)
                    .map(|l| 1.0 + 2f64.powi(n as i32 - l as i32 - 2))
                    .product();
                2f64.powi((n - k) as i32) * prod * eps1
            })
            .collect();
        Ok(CouplingConstants {
            a,
            b,
            n,
            eps1,
            eps_schedule,
            k_eps: k_epsilon(n, eps1)?,
            t_eps: t_epsilon(a, b, n, eps1)?,
            d_bounds,
            rate: contraction_rate(n),
        })
    }

    /// `ε_k` for `1 <= k <= N`.
    pub fn eps(&self, k: usize) -> f64 {
        self.eps_schedule[k - 1]
    }

    /// Start of the avalanche-time interval `a' = (a+b)/2 + 3ε_k`.
    pub fn a_prime(&self, k: usize) -> f64 {
        (self.a + self.b) / 2.0 + 3.0 * self.eps(k)
    }

    /// Middle half of `[a', b]`.
    pub fn avalanche_interval(&self, k: usize) -> (f64, f64) {
        let ap = self.a_prime(k);
        ((3.0 * ap + self.b) / 4.0, (ap + 3.0 * self.b) / 4.0)
    }

    /// `[a'', a'' + 2ε_k]` with `a'' = (a+b)/2`.
    pub fn quiet_interval(&self, k: usize) -> (f64, f64) {
        let a2 = (self.a + self.b) / 2.0;
        (a2, a2 + 2.0 * self.eps(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_values() {
        assert!((epsilon_abn(0.0, 1.0, 2).unwrap() - 1.0 / 30.0).abs() < 1e-15);
        assert!((epsilon_abn(0.2, 0.9, 3).unwrap() - 0.7 / 54.0).abs() < 1e-15);
        assert!(epsilon_abn(0.5, 0.5, 3).is_err());
        assert!(epsilon_abn(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn epsilon_scales_with_width() {
        for n in 2..10 {
            let unit = epsilon_abn(0.0, 1.0, n).unwrap();
            let e = epsilon_abn(0.15, 0.85, n).unwrap();
            assert!((e - 0.7 * unit).abs() < 1e-15);
        }
    }

    #[test]
    fn t_epsilon_values() {
        assert_eq!(t_epsilon(0.2, 0.9, 3, 0.7 / 54.0).unwrap(), 600);
        for n in 2..8 {
            let eps = n as f64 / 2.0 * contraction_rate(n);
            assert_eq!(
                t_epsilon(0.2, 0.9, n, eps).unwrap(),
                2 * max_heavy_window(0.2, 0.9)
            );
        }
        assert!(t_epsilon(0.2, 0.9, 3, 0.0).is_err());
        assert!(t_epsilon(0.2, 0.9, 3, 1.5).is_err());
        let mut last = 0;
        for i in 1..50 {
            let t = t_epsilon(0.2, 0.9, 4, 1.0 / i as f64).unwrap();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn correction_values() {
        assert_eq!(correction_d(&[0.0; 3], 1, 3).unwrap(), 0.0);
        assert!((correction_d(&[0.01, -0.01, 0.0], 1, 3).unwrap() + 0.01).abs() < 1e-15);
        let d = 0.003;
        assert!((correction_d(&[d, d, 7.0, 9.0], 2, 4).unwrap() - 3.0 * d).abs() < 1e-15);
        assert!(correction_d(&[0.0; 3], 3, 3).is_err());
        assert!(correction_d(&[0.0; 3], 0, 3).is_err());
    }

    #[test]
    fn coupled_amount_wraps() {
        assert_eq!(coupled_amount(0.4, 0.0, 0.2, 0.9), 0.4);
        assert!((coupled_amount(0.9, 0.3, 0.0, 1.0) - 0.2).abs() < 1e-12);
        assert!((coupled_amount(0.25, -0.1, 0.2, 0.9) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn schedule_and_bounds() {
        let c = CouplingConstants::new(0.2, 0.9, 3).unwrap();
        assert_eq!(c.eps_schedule.len(), 3);
        assert!((c.eps(2) - 2.0 * c.eps1).abs() < 1e-15);
        assert!((c.eps(3) - 3.0 * c.eps1).abs() < 1e-15);
        assert!(c.eps_schedule.windows(2).all(|w| w[1] > w[0]));
        // d_{N-1} must leave room for the shifted avalanche amount.
        let k = c.n - 1;
        assert!(c.d_bounds[k - 1] <= (c.b - c.a_prime(k)) / 4.0);
        assert_eq!(c.k_eps, 300);
        assert_eq!(c.t_eps, 600);
    }
}
