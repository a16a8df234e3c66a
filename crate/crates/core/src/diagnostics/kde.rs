//! Gaussian kernel density estimates with analytic derivatives.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{check_increasing, DiagnosticsError};
use crate::stats::{variance, CHUNK};

/// Kernel support is cut at this many bandwidths.
const WINDOW: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule `1.06 σ̂ N^{-1/5}`.
    Auto,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, samples: &[f64]) -> Result<f64, DiagnosticsError> {
        let h = match self {
            Bandwidth::Auto => silverman_bandwidth(samples),
            Bandwidth::Fixed(h) => *h,
        };
        if h.is_finite() && h > 0.0 {
            Ok(h)
        } else {
            Err(DiagnosticsError::InvalidBandwidth(h.to_string()))
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Auto => write!(f, "auto"),
            Bandwidth::Fixed(h) => write!(f, "{h}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = DiagnosticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h.is_finite() && h > 0.0 => Ok(Bandwidth::Fixed(h)),
            _ => Err(DiagnosticsError::InvalidBandwidth(s.to_string())),
        }
    }
}

pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return f64::NAN;
    }
    1.06 * variance(samples).sqrt() * (samples.len() as f64).powf(-0.2)
}

/// Estimate and its first two derivatives on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeColumns {
    pub bandwidth: f64,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

/// All three columns in one pass. Each sample block accumulates its own
/// grid arrays and blocks are added in order.
pub fn kde_all(
    samples: &[f64],
    grid: &[f64],
    bandwidth: Bandwidth,
) -> Result<KdeColumns, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptyBatch);
    }
    check_increasing(grid)?;
    let h = bandwidth.resolve(samples)?;
    let m = grid.len();
    let partials: Vec<Vec<f64>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; 3 * m];
            for &y in chunk {
                let lo = grid.partition_point(|&x| x < y - WINDOW * h);
                let hi = grid.partition_point(|&x| x <= y + WINDOW * h);
                for i in lo..hi {
                    let u = (grid[i] - y) / h;
                    let k = (-0.5 * u * u).exp();
                    acc[i] += k;
                    acc[m + i] -= u * k;
                    acc[2 * m + i] += (u * u - 1.0) * k;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; 3 * m];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let norm = 1.0 / (samples.len() as f64 * h * std::f64::consts::TAU.sqrt());
    let col = |j: usize, scale: f64| total[j * m..(j + 1) * m].iter().map(|v| v * scale).collect();
    Ok(KdeColumns {
        bandwidth: h,
        d0: col(0, norm),
        d1: col(1, norm / h),
        d2: col(2, norm / (h * h)),
    })
}

/// Gaussian kernel estimate or one of its first two derivatives, obtained
/// by differentiating the kernel.
pub fn kde(
    samples: &[f64],
    grid: &[f64],
    bandwidth: Bandwidth,
    derivative: usize,
) -> Result<Vec<f64>, DiagnosticsError> {
    if derivative > 2 {
        return Err(DiagnosticsError::InvalidDerivative(derivative));
    }
    let cols = kde_all(samples, grid, bandwidth)?;
    Ok(match derivative {
        0 => cols.d0,
        1 => cols.d1,
        _ => cols.d2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{sample_homogeneous, HomogeneousSum, Law};
    use crate::stats::normal_pdf;

    #[test]
    fn single_sample() {
        let phi0 = 1.0 / std::f64::consts::TAU.sqrt();
        assert!((kde(&[0.0], &[0.0], Bandwidth::Fixed(1.0), 0).unwrap()[0] - phi0).abs() < 1e-16);
        assert_eq!(kde(&[0.0], &[0.0], Bandwidth::Fixed(1.0), 1).unwrap()[0], 0.0);
        let x = [-1.0, 0.5, 2.0];
        let d2 = kde(&[0.0], &x, Bandwidth::Fixed(1.0), 2).unwrap();
        for (xi, v) in x.iter().zip(d2) {
            assert!((v - (xi * xi - 1.0) * normal_pdf(*xi)).abs() < 1e-15);
        }
        assert!(kde(&[], &x, Bandwidth::Auto, 0).is_err());
        assert!(kde(&[0.0], &x, Bandwidth::Fixed(1.0), 3).is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        let samples = [-0.7, 0.1, 0.2, 1.5, 2.2];
        let x: Vec<f64> = (0..401).map(|i| -4.0 + 0.02 * i as f64).collect();
        let c = kde_all(&samples, &x, Bandwidth::Fixed(0.4)).unwrap();
        for i in 1..400 {
            let d1 = (c.d0[i + 1] - c.d0[i - 1]) / 0.04;
            let d2 = (c.d1[i + 1] - c.d1[i - 1]) / 0.04;
            assert!((d1 - c.d1[i]).abs() < 2e-3, "{i}");
            assert!((d2 - c.d2[i]).abs() < 1e-2, "{i}");
        }
    }

    #[test]
    fn bandwidth_parsing() {
        assert_eq!("auto".parse::<Bandwidth>().unwrap(), Bandwidth::Auto);
        assert_eq!("0.25".parse::<Bandwidth>().unwrap(), Bandwidth::Fixed(0.25));
        for bad in ["0", "-1", "nan", "wide"] {
            assert!(bad.parse::<Bandwidth>().is_err());
        }
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let expected = 1.06 * variance(&xs).sqrt() * 1000f64.powf(-0.2);
        assert_eq!(Bandwidth::Auto.resolve(&xs).unwrap(), expected);
    }

    #[test]
    fn consistent_for_normal_samples() {
        let q = HomogeneousSum::new(1, 1, vec![(vec![0], 1.0)], Law::Gaussian).unwrap();
        let b = sample_homogeneous(&q, 1_000_000, 9).unwrap();
        let x: Vec<f64> = (0..121).map(|i| -3.0 + 0.05 * i as f64).collect();
        let d0 = kde(&b.f, &x, Bandwidth::Auto, 0).unwrap();
        for (xi, v) in x.iter().zip(d0) {
            assert!((v - normal_pdf(*xi)).abs() <= 0.01);
        }
    }
}
