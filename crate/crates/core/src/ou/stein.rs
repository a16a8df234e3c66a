//! Solution of the Stein equation `φ' - xφ = h - E h(N)`.

use rayon::prelude::*;

use crate::quadrature::{QuadratureRule, DEFAULT_ORDER};

use super::OuError;

/// `φ_h` and `φ'_h` on a grid, with an independent residual check.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinSolution {
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    /// `D φ(x) - xφ(x) - (h(x) - E h(N))` with `D` a five-point finite
    /// difference of the computed `φ`.
    pub residual: Vec<f64>,
    pub mean_h: f64,
    /// `sup |h - E h(N)|` over the grid.
    pub sup_centered: f64,
}

impl SteinSolution {
    /// Largest residual away from the two outermost points at each end.
    pub fn max_interior_residual(&self) -> f64 {
        let n = self.residual.len();
        self.residual[2.min(n)..n.saturating_sub(2)]
            .iter()
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn sup_phi(&self) -> f64 {
        self.phi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_phi_prime(&self) -> f64 {
        self.phi_prime.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup|φ| ≤ sqrt(π/2) sup|g|` and `sup|φ'| ≤ 2 sup|g|`, each up to `tol`.
    pub fn bounds_hold(&self, tol: f64) -> bool {
        let g = self.sup_centered;
        self.sup_phi() <= (std::f64::consts::PI / 2.0).sqrt() * g + tol
            && self.sup_phi_prime() <= 2.0 * g + tol
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,phi,phi_prime,residual\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.grid[i], self.phi[i], self.phi_prime[i], self.residual[i]
            ));
        }
        out
    }
}

const PANEL: f64 = 0.25;
const HORIZON: f64 = 12.0;

/// Solves the Stein equation for bounded `h` on a strictly increasing grid.
///
/// With `g = h - E h(N)`, the particular solution is evaluated through the
/// left tail for `x ≤ 0` and the right tail for `x > 0`:
///
/// `φ(x) = ∫_0^∞ g(x - s) e^{xs - s²/2} ds` and
/// `φ(x) = -∫_0^∞ g(x + s) e^{-xs - s²/2} ds`,
///
/// both of which have bounded kernels.
pub fn stein_solve(
    h: impl Fn(f64) -> f64 + Sync,
    grid: &[f64],
) -> Result<SteinSolution, OuError> {
    if grid.len() < 5 {
        return Err(OuError::InvalidParameter(format!(
            "grid needs at least 5 points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(OuError::InvalidParameter(
            "grid must be finite and strictly increasing".into(),
        ));
    }
    let checked = |x: f64| {
        let v = h(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OuError::NonFinite(x))
        }
    };
    let gh = QuadratureRule::<f64>::gauss_hermite(DEFAULT_ORDER)
        .map_err(|e| OuError::Integration(e.to_string()))?;
    let mut mean_h = 0.0;
    for (&y, &w) in gh.nodes().iter().zip(gh.weights()) {
        mean_h += w * checked(y)?;
    }
    let centered: Vec<f64> = grid
        .iter()
        .map(|&x| checked(x).map(|v| v - mean_h))
        .collect::<Result<_, _>>()?;

    let gl = QuadratureRule::<f64>::gauss_legendre(20)
        .map_err(|e| OuError::Integration(e.to_string()))?;
    let panels = (HORIZON / PANEL) as usize;
    let phi: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for p in 0..panels {
                let a = p as f64 * PANEL;
                acc += gl.integrate(a, a + PANEL, |s| {
                    if x <= 0.0 {
                        (h(x - s) - mean_h) * (x * s - 0.5 * s * s).exp()
                    } else {
                        -(h(x + s) - mean_h) * (-x * s - 0.5 * s * s).exp()
                    }
                });
            }
            acc
        })
        .collect();
    if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
        return Err(OuError::NonFinite(grid[i]));
    }
    let phi_prime: Vec<f64> = grid
        .iter()
        .zip(&phi)
        .zip(&centered)
        .map(|((&x, &f), &g)| x * f + g)
        .collect();
    let residual = (0..grid.len())
        .map(|i| five_point_derivative(grid, &phi, i) - grid[i] * phi[i] - centered[i])
        .collect();
    let sup_centered = centered.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
    Ok(SteinSolution {
        grid: grid.to_vec(),
        phi,
        phi_prime,
        residual,
        mean_h,
        sup_centered,
    })
}

/// Derivative at `xs[i]` of the interpolating polynomial through the five
/// nearest grid points.
fn five_point_derivative(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    let start = i.saturating_sub(2).min(xs.len() - 5);
    let idx: Vec<usize> = (start..start + 5).collect();
    let x0 = xs[i];
    let mut d = 0.0;
    for &j in &idx {
        let weight = if j == i {
            idx.iter().filter(|&&m| m != i).map(|&m| 1.0 / (x0 - xs[m])).sum()
        } else {
            let mut w = 1.0 / (xs[j] - x0);
            for &m in idx.iter().filter(|&&m| m != i && m != j) {
                w *= (x0 - xs[m]) / (xs[j] - xs[m]);
            }
            w
        };
        d += weight * ys[j];
    }
    d
}
