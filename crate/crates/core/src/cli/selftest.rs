//! Fast invariant panel behind the `selftest` command.

use std::fmt;

use num_traits::One;

use crate::diagnostics::{stein_panel, DensityGrid, DENSITY_GRID_HEADER};
use crate::edgeworth::{estimate_moments, inequality_suite, EdgeworthMeasure, MomentVector};
use crate::hermite::{coefficients_of, hermite_eval_all, HermiteSeries};
use crate::ou::{
    generator_shift_apply, resolvent_apply, s_operator, semigroup_apply_mehler,
    semigroup_apply_spectral, stein_solve, t_operator, t_operator_via_s,
};
use crate::quadrature::QuadratureRule;
use crate::scalar::ratio;
use crate::sim::{goe_chaos3_projection_coeffs, sample_fbm_hermite, FbmHermiteModel, Sampler};
use crate::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SelftestLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

fn line(name: &'static str, outcome: Result<(bool, String), String>) -> SelftestLine {
    match outcome {
        Ok((passed, detail)) => SelftestLine { name, passed, detail },
        Err(detail) => SelftestLine { name, passed: false, detail },
    }
}

fn orthogonality() -> Result<(bool, String), String> {
    let rule = QuadratureRule::<f64>::gauss_hermite(64).map_err(|e| e.to_string())?;
    let fact: Vec<f64> = (0..=12).scan(1.0, |f, k| {
        *f *= if k == 0 { 1.0 } else { k as f64 };
        Some(*f)
    }).collect();
    let mut worst: f64 = 0.0;
    for k in 0..=12usize {
        for j in 0..=12usize {
            let v = rule.apply(|x| {
                let h = hermite_eval_all(12, x);
                h[j] * h[k]
            });
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((v / (fact[j] * fact[k]).sqrt() - target).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |E[H_j H_k]/sqrt(j!k!) - δ| = {worst:e}")))
}

fn bump_projection() -> Result<(bool, String), String> {
    let rule = QuadratureRule::<f64>::gauss_hermite(128).map_err(|e| e.to_string())?;
    let h = |x: f64| 0.4 * (x * x + 2.5) * (-x * x / 2.0).exp();
    let c = coefficients_of(h, 7, &rule).map_err(|e| e.to_string())?;
    let mut fact = 1.0;
    let mut worst: f64 = 0.0;
    let mut h4 = 0.0;
    for k in 1..=7usize {
        fact *= k as f64;
        let inner = c.coeff(k) * fact;
        if k == 4 {
            h4 = inner;
            worst = worst.max((inner - 3.0 / (10.0 * 2f64.sqrt())).abs());
        } else if k >= 3 {
            worst = worst.max(inner.abs());
        }
    }
    Ok((worst <= 1e-8, format!("<h, H_4> = {h4:.10}, max error {worst:e}")))
}

fn sample_series() -> HermiteSeries<Rational> {
    HermiteSeries::new(
        [(1, 3), (-2, 5), (7, 2), (0, 1), (-1, 4), (5, 6), (3, 7), (-4, 9)]
            .iter()
            .map(|&(n, d)| ratio(n, d))
            .collect(),
    )
}

fn spectral_laws() -> Result<(bool, String), String> {
    let s = sample_series();
    let sphi = s_operator(&s);
    let s_law = (0..sphi.coeffs().len())
        .all(|k| sphi.coeff(k) == -ratio(k as i64 + 1, 1) * s.coeff(k + 2));
    let projected = s.project_at_least(1).map_err(|e| e.to_string())?;
    let alpha = ratio(1, 2);
    let r = resolvent_apply(&projected, &alpha).map_err(|e| e.to_string())?;
    let round_trip = generator_shift_apply(&r, &alpha) == projected;
    let commute = resolvent_apply(&projected.derivative(), &(alpha.clone() + Rational::one()))
        .map_err(|e| e.to_string())?
        == r.derivative();
    let high = s.project_at_least(2).map_err(|e| e.to_string())?;
    let mut t_routes = true;
    for p in 2..=4usize {
        for j in 0..2 * p - 1 {
            let a = t_operator(&high, p, j).map_err(|e| e.to_string())?;
            let b = t_operator_via_s(&high, p, j).map_err(|e| e.to_string())?;
            t_routes &= a == b;
        }
    }
    let passed = s_law && round_trip && commute && t_routes;
    Ok((
        passed,
        format!("S law {s_law}, resolvent round trip {round_trip}, commutation {commute}, T_j routes {t_routes}"),
    ))
}

fn semigroup() -> Result<(bool, String), String> {
    let rule = QuadratureRule::<f64>::gauss_hermite(64).map_err(|e| e.to_string())?;
    let s = HermiteSeries::new(vec![0.3, -1.0, 0.5, 0.25, -0.125, 0.0625]);
    let mut worst: f64 = 0.0;
    for t in [0.1, 0.7, 2.0] {
        let pt = semigroup_apply_spectral(&s, t).map_err(|e| e.to_string())?;
        for x in [-1.5, 0.0, 0.8, 2.2] {
            let m = semigroup_apply_mehler(|y| s.eval(y), t, x, &rule).map_err(|e| e.to_string())?;
            worst = worst.max((m - pt.eval(x)).abs());
        }
    }
    Ok((worst <= 1e-10, format!("spectral vs Mehler max difference {worst:e}")))
}

fn stein() -> Result<(bool, String), String> {
    let grid: Vec<f64> = (0..4001).map(|i| -8.0 + 16.0 * i as f64 / 4000.0).collect();
    let mut worst: f64 = 0.0;
    for (_, h) in stein_panel() {
        let sol = stein_solve(h, &grid).map_err(|e| e.to_string())?;
        worst = worst.max(sol.max_interior_residual());
    }
    Ok((worst <= 1e-6, format!("max interior residual {worst:e}")))
}

fn expansion_identities() -> Result<(bool, String), String> {
    let rule = QuadratureRule::<f64>::gauss_hermite(128).map_err(|e| e.to_string())?;
    let mv = MomentVector::exact(2, vec![0.35, 0.19, 0.4, 0.5, 0.6]).map_err(|e| e.to_string())?;
    let meas = EdgeworthMeasure::new(2, &mv).map_err(|e| e.to_string())?;
    let mass = meas.measure_expectation(|_| 1.0, &rule).map_err(|e| e.to_string())?;
    let mut worst = (mass - 1.0).abs();
    for k in 3..=7usize {
        let got = meas
            .measure_expectation(|x| hermite_eval_all(k, x)[k], &rule)
            .map_err(|e| e.to_string())?;
        worst = worst.max((got - mv.value(k).unwrap_or(f64::NAN)).abs());
    }
    Ok((worst <= 1e-9, format!("mass and moment reproduction error {worst:e}")))
}

fn goe_oracle() -> Result<(bool, String), String> {
    let proj = goe_chaos3_projection_coeffs(1).map_err(|e| e.to_string())?;
    let passed = proj.var_trace == 120.0 && proj.var_j3 == 48.0 && proj.trace_coeff == 6.0;
    Ok((
        passed,
        format!("n=1: Var Tr A^3 = {}, Var J_3 = {}", proj.var_trace, proj.var_j3),
    ))
}

fn monte_carlo() -> Result<(bool, String), String> {
    let model = FbmHermiteModel::new(0.5, 2, 16, Sampler::Cholesky).map_err(|e| e.to_string())?;
    let batch = sample_fbm_hermite(&model, 40_000, 7).map_err(|e| e.to_string())?;
    let again = sample_fbm_hermite(&model, 40_000, 7).map_err(|e| e.to_string())?;
    let report = inequality_suite(&batch).map_err(|e| e.to_string())?;
    let mv = estimate_moments(&batch, 3).map_err(|e| e.to_string())?;
    let meas = EdgeworthMeasure::new(1, &mv).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..201).map(|i| -6.0 + 0.06 * i as f64).collect();
    let grid = DensityGrid::build(&batch.f, &meas, &x, crate::diagnostics::Bandwidth::Auto)
        .map_err(|e| e.to_string())?;
    let header_ok = grid.to_csv().lines().next() == Some(DENSITY_GRID_HEADER);
    let repeatable = batch == again;
    let passed = report.cumulant_holds(5.0) && report.normalized_holds(5.0) && repeatable && header_ok;
    Ok((
        passed,
        format!(
            "fbm H=0.5 p=2 n=16: normalized gap {:.3e} ± {:.1e}, repeatable {repeatable}, header {header_ok}",
            report.normalized_gap.value, report.normalized_gap.se
        ),
    ))
}

/// Runs every check and returns one line per check.
pub fn selftest_report() -> Vec<SelftestLine> {
    vec![
        line("hermite orthogonality", orthogonality()),
        line("bump projection", bump_projection()),
        line("spectral operator laws", spectral_laws()),
        line("semigroup Mehler form", semigroup()),
        line("stein residual", stein()),
        line("edgeworth identities", expansion_identities()),
        line("goe n=1 oracle", goe_oracle()),
        line("monte carlo panel", monte_carlo()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for l in selftest_report() {
            assert!(l.passed, "{l}");
        }
    }
}
