//! Total variation between a sample law and the signed Edgeworth measure.

use std::fmt;

use log::warn;

use super::{check_increasing, kde_all, trapezoid, Bandwidth, DiagnosticsError, GridSpec};
use crate::edgeworth::EdgeworthMeasure;
use crate::quadrature::adaptive_integrate;

pub const MIN_GRID_POINTS: usize = 501;
const MIN_COVERAGE: f64 = 0.999;
const TAIL_SPAN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySource {
    /// KDE compared with the Edgeworth density. With `matched`, the
    /// Edgeworth side is convolved with the same Gaussian kernel, which
    /// removes the smoothing bias and targets `d_TV(P_F * K_h, γ * K_h)`.
    Kde { bandwidth: Bandwidth, matched: bool },
    /// Bin frequencies against exact bin masses, with the grid as edges.
    Histogram,
}

impl fmt::Display for DensitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySource::Kde { matched: false, .. } => write!(f, "kde"),
            DensitySource::Kde { matched: true, .. } => write!(f, "kde-matched"),
            DensitySource::Histogram => write!(f, "histogram"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvEstimate {
    /// `½ ∫_a^b |p̂ - q|`.
    pub value: f64,
    /// `max(P̂(F ∉ [a, b]), |γ|(ℝ \ [a, b]))`, reported beside the estimate.
    pub tail_band: f64,
    /// Fraction of samples inside `[a, b]`.
    pub coverage: f64,
    pub bandwidth: Option<f64>,
}

pub fn tv_signed(
    samples: &[f64],
    meas: &EdgeworthMeasure,
    grid: GridSpec,
    source: DensitySource,
) -> Result<TvEstimate, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptyBatch);
    }
    if grid.points < MIN_GRID_POINTS {
        return Err(DiagnosticsError::InvalidGrid(format!(
            "need at least {MIN_GRID_POINTS} points, got {}",
            grid.points
        )));
    }
    let x = grid.values();
    check_increasing(&x)?;
    let n = samples.len() as f64;
    let inside = samples.iter().filter(|&&v| v >= grid.a && v <= grid.b).count();
    let coverage = inside as f64 / n;
    if coverage < MIN_COVERAGE {
        warn!(
            "grid [{}, {}] covers only {:.4}% of the samples",
            grid.a,
            grid.b,
            100.0 * coverage
        );
    }
    let (value, bandwidth, smoothing) = match source {
        DensitySource::Kde { bandwidth, matched } => {
            let k = kde_all(samples, &x, bandwidth)?;
            let h = k.bandwidth;
            let s = if matched { h } else { 0.0 };
            let diff: Vec<f64> = x
                .iter()
                .zip(&k.d0)
                .map(|(&xi, &p)| (p - meas.smoothed_density(xi, s, 0)).abs())
                .collect();
            (0.5 * trapezoid(&x, &diff), Some(h), s)
        }
        DensitySource::Histogram => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(f64::total_cmp);
            let below = |e: f64| sorted.partition_point(|&v| v <= e);
            let total: f64 = x
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let lo = if i == 0 { sorted.partition_point(|&v| v < w[0]) } else { below(w[0]) };
                    let freq = (below(w[1]) - lo) as f64 / n;
                    (freq - meas.bin_mass(w[0], w[1])).abs()
                })
                .sum();
            (0.5 * total, None, 0.0)
        }
    };
    let abs_density = |v: f64| meas.smoothed_density(v, smoothing, 0).abs();
    let tol = 1e-12;
    let left = adaptive_integrate(&mut |v| abs_density(v), grid.a - TAIL_SPAN, grid.a, tol);
    let right = adaptive_integrate(&mut |v| abs_density(v), grid.b, grid.b + TAIL_SPAN, tol);
    let measure_tail = match (left, right) {
        (Ok(l), Ok(r)) => l + r,
        _ => f64::INFINITY,
    };
    Ok(TvEstimate {
        value,
        tail_band: (1.0 - coverage).max(measure_tail),
        coverage,
        bandwidth,
    })
}
