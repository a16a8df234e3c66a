//! Log-log regression of `d_TV` on `Var Γ`.

use super::DiagnosticsError;
use crate::stats::{ols, LinearFit};

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub var_gamma: f64,
    pub d_tv: f64,
    pub n: usize,
    pub descriptor: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub fit: LinearFit,
    /// `(m + 1) / 2`.
    pub target: f64,
    /// Accepted slope interval.
    pub band: (f64, f64),
}

impl RateReport {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }

    pub fn passed(&self) -> bool {
        self.fit.slope >= self.band.0 && self.fit.slope <= self.band.1
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# slope={}\n# slope_se={}\n# ci_low={}\n# ci_high={}\n# target={}\n# band={}:{}\n# passed={}\n",
            self.fit.slope,
            self.fit.slope_se,
            self.fit.ci_low,
            self.fit.ci_high,
            self.target,
            self.band.0,
            self.band.1,
            self.passed()
        );
        out.push_str("n,var_gamma,d_tv,model\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.n, p.var_gamma, p.d_tv, p.descriptor));
        }
        out
    }
}

/// Ordinary least squares of `log d_TV` on `log Var Γ`. Needs three points
/// spanning a factor 4 in `Var Γ`.
pub fn rate_regression(
    points: Vec<RatePoint>,
    m: usize,
    band: (f64, f64),
) -> Result<RateReport, DiagnosticsError> {
    if points.len() < 3 {
        return Err(DiagnosticsError::Regression(format!(
            "at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.var_gamma > 0.0 && p.d_tv > 0.0 && p.var_gamma.is_finite() && p.d_tv.is_finite()))
    {
        return Err(DiagnosticsError::Regression(format!(
            "positive finite values, got Var Γ = {}, d_TV = {} at n = {}",
            p.var_gamma, p.d_tv, p.n
        )));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
        (lo.min(p.var_gamma), hi.max(p.var_gamma))
    });
    if hi < 4.0 * lo {
        return Err(DiagnosticsError::Regression(format!(
            "Var Γ to span a factor 4, got {lo:e} to {hi:e}"
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.var_gamma.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.d_tv.ln()).collect();
    let fit = ols(&x, &y).ok_or_else(|| DiagnosticsError::Regression("a non-degenerate fit".into()))?;
    Ok(RateReport {
        points,
        fit,
        target: (m as f64 + 1.0) / 2.0,
        band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(f: impl Fn(f64) -> f64) -> Vec<RatePoint> {
        [32usize, 64, 128, 256]
            .iter()
            .map(|&n| {
                let v = 8.0 / n as f64;
                RatePoint {
                    var_gamma: v,
                    d_tv: f(v),
                    n,
                    descriptor: "synthetic".into(),
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let r = rate_regression(points(|v| 0.4 * v), 1, (0.75, 1.25)).unwrap();
        assert!((r.slope() - 1.0).abs() < 1e-12);
        assert!((r.fit.ci_high - r.fit.ci_low).abs() < 1e-9);
        assert!(r.passed());
        assert_eq!(r.target, 1.0);
        assert!(r.to_csv().contains("n,var_gamma,d_tv,model\n32,0.25,"));
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let noise: Vec<f64> = (0..4).map(|_| 1.0 + 0.1 * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let mut pts = points(|v| v.powf(1.5));
            for (p, e) in pts.iter_mut().zip(&noise) {
                p.d_tv *= e;
            }
            let r = rate_regression(pts, 2, (1.2, f64::INFINITY)).unwrap();
            worst = worst.max((r.slope() - 1.5).abs());
        }
        assert!(worst <= 0.1, "{worst}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut pts = points(|v| v);
        assert!(rate_regression(pts[..2].to_vec(), 1, (0.0, 2.0)).is_err());
        let narrow: Vec<RatePoint> = pts.iter().take(3).cloned().map(|mut p| {
            p.var_gamma = 1.0 + p.n as f64 / 1000.0;
            p
        }).collect();
        assert!(rate_regression(narrow, 1, (0.0, 2.0)).is_err());
        pts[1].d_tv = 0.0;
        assert!(rate_regression(pts, 1, (0.0, 2.0)).is_err());
    }
}
