//! Sample check of `E h(F) - E h(N) = (1/p) E[φ'_h(F)(p - Γ(F))]`.

use rayon::prelude::*;

use super::DiagnosticsError;
use crate::ou::stein_solve;
use crate::sim::SampleBatch;
use crate::stats::{det_sum, Estimate};

const STEP: f64 = 0.005;
const MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinCheck {
    /// `mean h(F) - E h(N)`.
    pub lhs: Estimate,
    /// `(1/p) mean φ'_h(F)(p - Γ)`.
    pub rhs: Estimate,
    /// Per-sample difference of the two sides.
    pub difference: Estimate,
}

impl SteinCheck {
    pub fn holds(&self, k: f64) -> bool {
        self.difference.within(0.0, k)
    }
}

/// Five bounded test functions.
pub fn stein_panel() -> Vec<(&'static str, fn(f64) -> f64)> {
    vec![
        ("cos", f64::cos),
        ("sin", f64::sin),
        ("tanh", f64::tanh),
        ("gauss_bump", |x| (-x * x / 2.0).exp()),
        ("indicator_smooth", |x| 1.0 / (1.0 + (-4.0 * x).exp())),
    ]
}

fn estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = det_sum(xs, |v| v) / n;
    let var = det_sum(xs, |v| (v - m) * (v - m)) / (n - 1.0);
    Estimate {
        value: m,
        se: (var / n).sqrt(),
    }
}

/// Solves the Stein equation on a grid covering the samples and
/// interpolates `φ'_h` linearly.
pub fn stein_discrepancy_check(
    batch: &SampleBatch,
    h: impl Fn(f64) -> f64 + Sync,
) -> Result<SteinCheck, DiagnosticsError> {
    let gamma = batch.gamma.as_ref().ok_or(DiagnosticsError::GammaUnavailable)?;
    if batch.len() < 2 {
        return Err(DiagnosticsError::EmptyBatch);
    }
    let (lo, hi) = batch
        .f
        .iter()
        .fold((-MARGIN, MARGIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (lo, hi) = ((lo / STEP).floor() * STEP - STEP, (hi / STEP).ceil() * STEP + STEP);
    let points = ((hi - lo) / STEP).round() as usize + 1;
    let grid: Vec<f64> = (0..points).map(|i| lo + STEP * i as f64).collect();
    let sol = stein_solve(&h, &grid)?;
    let phi_prime = |x: f64| {
        let t = (x - lo) / STEP;
        let i = (t.floor() as usize).min(points - 2);
        let w = t - i as f64;
        (1.0 - w) * sol.phi_prime[i] + w * sol.phi_prime[i + 1]
    };
    let p = batch.chaos_order as f64;
    let (left, right): (Vec<f64>, Vec<f64>) = batch
        .f
        .par_iter()
        .zip(gamma)
        .map(|(&f, &g)| (h(f) - sol.mean_h, phi_prime(f) * (p - g) / p))
        .unzip();
    let diff: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a - b).collect();
    Ok(SteinCheck {
        lhs: estimate(&left),
        rhs: estimate(&right),
        difference: estimate(&diff),
    })
}
