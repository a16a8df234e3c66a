//! Hermite moment estimation and the signed Edgeworth measure
//! `γ_{F,m}(dx) = φ(x)(1 + Σ_{k=3}^{4m-1} E[H_k(F)]/k! · H_k(x)) dx`.

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::hermite::{hermite_eval_all, HermiteSeries};
use crate::quadrature::QuadratureRule;
use crate::sim::SampleBatch;
use crate::stats::{
    jackknife_se, mean_jackknife_replicates, normal_cdf, normal_pdf, variance_estimate,
    variance_jackknife_replicates, Estimate, CHUNK,
};

pub const MIN_SAMPLES: usize = 1000;
/// Default limit on `SE / |E[H_k(F)]|` before a measure is refused.
pub const DEFAULT_MAX_RELATIVE_SE: f64 = 0.5;
pub const MIN_RULE_ORDER: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeworthError {
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { got: usize, required: usize },
    #[error("highest moment order must be at least 3, got {0}")]
    OrderTooLow(usize),
    #[error("expansion order m must be at least 1")]
    ZeroOrder,
    #[error("order m = {m} needs moments up to k = {needed}, have up to {have}")]
    MissingMoments { m: usize, needed: usize, have: usize },
    #[error(
        "E[H_{k}(F)] = {value:e} has standard error {se:e} (relative {relative:.3}, limit {limit}); \
         increase the sample size or lower m"
    )]
    NoisyMoment {
        k: usize,
        value: f64,
        se: f64,
        relative: f64,
        limit: f64,
    },
    #[error("Γ samples are not available for this batch")]
    GammaUnavailable,
    #[error("integrand is not finite at node {0}")]
    NonFinite(f64),
    #[error("quadrature order {got} is below {required}")]
    RuleTooSmall { got: usize, required: usize },
    #[error("invalid moment vector: {0}")]
    Invalid(String),
}

/// Estimates of `E[H_k(F)]` for `k = 3..=K`. There is no `k = 2` entry since
/// `E[H_2(F)] = E[F²] - 1 = 0` for normalized `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    p: usize,
    values: Vec<f64>,
    std_errors: Vec<f64>,
    n_samples: usize,
}

impl MomentVector {
    /// `values[i]` and `std_errors[i]` refer to `k = i + 3`.
    pub fn new(
        p: usize,
        values: Vec<f64>,
        std_errors: Vec<f64>,
        n_samples: usize,
    ) -> Result<Self, EdgeworthError> {
        if values.is_empty() {
            return Err(EdgeworthError::OrderTooLow(2));
        }
        if values.len() != std_errors.len() {
            return Err(EdgeworthError::Invalid(format!(
                "{} values but {} standard errors",
                values.len(),
                std_errors.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EdgeworthError::Invalid("non-finite moment".into()));
        }
        if std_errors.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(EdgeworthError::Invalid("standard errors must be finite and >= 0".into()));
        }
        Ok(Self {
            p,
            values,
            std_errors,
            n_samples,
        })
    }

    /// Known moments, carried with zero standard error.
    pub fn exact(p: usize, values: Vec<f64>) -> Result<Self, EdgeworthError> {
        let se = vec![0.0; values.len()];
        Self::new(p, values, se, 0)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Highest order `K`.
    pub fn max_order(&self) -> usize {
        self.values.len() + 2
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn std_errors(&self) -> &[f64] {
        &self.std_errors
    }

    pub fn value(&self, k: usize) -> Option<f64> {
        k.checked_sub(3).and_then(|i| self.values.get(i)).copied()
    }

    pub fn std_error(&self, k: usize) -> Option<f64> {
        k.checked_sub(3).and_then(|i| self.std_errors.get(i)).copied()
    }

    /// `SE / |value|`; zero for exact entries.
    pub fn relative_se(&self, k: usize) -> Option<f64> {
        let (v, se) = (self.value(k)?, self.std_error(k)?);
        Some(if se == 0.0 { 0.0 } else { se / v.abs() })
    }

    /// Keeps orders `3..=k_max`.
    pub fn truncate(&self, k_max: usize) -> Result<Self, EdgeworthError> {
        if k_max < 3 {
            return Err(EdgeworthError::OrderTooLow(k_max));
        }
        if k_max > self.max_order() {
            return Err(EdgeworthError::Invalid(format!(
                "cannot truncate order {} to {k_max}",
                self.max_order()
            )));
        }
        Ok(Self {
            values: self.values[..k_max - 2].to_vec(),
            std_errors: self.std_errors[..k_max - 2].to_vec(),
            ..self.clone()
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# p={}\n# n_samples={}\nk,value,std_error\n", self.p, self.n_samples);
        for (i, (v, se)) in self.values.iter().zip(&self.std_errors).enumerate() {
            out.push_str(&format!("{},{v},{se}\n", i + 3));
        }
        out
    }
}

/// Sample means of `H_k(F_i)` for `k = 3..=k_max` with `SE = sd / sqrt(N)`.
pub fn estimate_moments(batch: &SampleBatch, k_max: usize) -> Result<MomentVector, EdgeworthError> {
    if k_max < 3 {
        return Err(EdgeworthError::OrderTooLow(k_max));
    }
    let n = batch.len();
    if n < MIN_SAMPLES {
        return Err(EdgeworthError::TooFewSamples {
            got: n,
            required: MIN_SAMPLES,
        });
    }
    let width = k_max - 2;
    let partials: Vec<Vec<f64>> = batch
        .f
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; 2 * width];
            for &x in chunk {
                let h = hermite_eval_all(k_max, x);
                for (i, hk) in h[3..].iter().enumerate() {
                    acc[i] += hk;
                    acc[width + i] += hk * hk;
                }
            }
            acc
        })
        .collect();
    let mut totals = vec![0.0; 2 * width];
    for part in &partials {
        for (t, v) in totals.iter_mut().zip(part) {
            *t += v;
        }
    }
    let nf = n as f64;
    let values: Vec<f64> = totals[..width].iter().map(|s| s / nf).collect();
    let std_errors: Vec<f64> = (0..width)
        .map(|i| {
            let var = (totals[width + i] - nf * values[i] * values[i]) / (nf - 1.0);
            (var.max(0.0) / nf).sqrt()
        })
        .collect();
    for (i, (v, se)) in values.iter().zip(&std_errors).enumerate() {
        if *se > v.abs() {
            warn!(
                "E[H_{}(F)] = {v:e} is within one standard error ({se:e}) of zero",
                i + 3
            );
        }
    }
    MomentVector::new(batch.chaos_order, values, std_errors, n)
}

/// The signed measure `γ_{F,m}` built from `E[H_k(F)]`, `k = 3..=4m-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeworthMeasure {
    m: usize,
    moments: MomentVector,
    /// `E[H_k(F)] / k!` indexed by `k`, zero below 3.
    coeffs: Vec<f64>,
}

impl EdgeworthMeasure {
    /// Builds the measure with the default standard-error gate.
    pub fn new(m: usize, moments: &MomentVector) -> Result<Self, EdgeworthError> {
        Self::with_gate(m, moments, Some(DEFAULT_MAX_RELATIVE_SE))
    }

    /// `max_relative_se = None` disables the gate.
    pub fn with_gate(
        m: usize,
        moments: &MomentVector,
        max_relative_se: Option<f64>,
    ) -> Result<Self, EdgeworthError> {
        if m == 0 {
            return Err(EdgeworthError::ZeroOrder);
        }
        let needed = 4 * m - 1;
        if moments.max_order() < needed {
            return Err(EdgeworthError::MissingMoments {
                m,
                needed,
                have: moments.max_order(),
            });
        }
        let moments = moments.truncate(needed)?;
        if let Some(limit) = max_relative_se {
            for k in 3..=needed {
                let relative = moments.relative_se(k).unwrap_or(0.0);
                if relative > limit {
                    return Err(EdgeworthError::NoisyMoment {
                        k,
                        value: moments.value(k).unwrap_or(0.0),
                        se: moments.std_error(k).unwrap_or(0.0),
                        relative,
                        limit,
                    });
                }
            }
        }
        let mut coeffs = vec![0.0; needed + 1];
        let mut fact = 2.0;
        for (k, c) in coeffs.iter_mut().enumerate().skip(3) {
            fact *= k as f64;
            *c = moments.value(k).unwrap_or(0.0) / fact;
        }
        Ok(Self { m, moments, coeffs })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.moments.p
    }

    pub fn moments(&self) -> &MomentVector {
        &self.moments
    }

    /// The polynomial factor `g = 1 + Σ c_k H_k` as a Hermite series.
    pub fn density_factor(&self) -> HermiteSeries<f64> {
        let mut c = self.coeffs.clone();
        c[0] = 1.0;
        HermiteSeries::new(c)
    }

    /// `j`-th derivative of the density, assembled from
    /// `d/dx[φ H_k] = -φ H_{k+1}`. Values may be negative.
    pub fn density(&self, x: f64, derivative: usize) -> f64 {
        self.eval_scaled(x, 1.0, derivative)
    }

    /// Density of `γ_{F,m} * N(0, h²)` and its derivatives, using
    /// `φ H_k * N(0, h²) = s^{-k} φ_s H_k(·/s)` with `s² = 1 + h²`.
    pub fn smoothed_density(&self, x: f64, bandwidth: f64, derivative: usize) -> f64 {
        self.eval_scaled(x, (1.0 + bandwidth * bandwidth).sqrt(), derivative)
    }

    fn eval_scaled(&self, x: f64, s: f64, j: usize) -> f64 {
        let u = x / s;
        let k_max = self.coeffs.len() - 1;
        let h = hermite_eval_all(k_max + j, u);
        let mut acc = h[j];
        let mut s_pow = s.powi(-2);
        for k in 3..=k_max {
            s_pow /= s;
            acc += self.coeffs[k] * s_pow * h[k + j];
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let pdf = normal_pdf(u);
        if pdf == 0.0 {
            return 0.0;
        }
        sign * s.powi(-(j as i32) - 1) * pdf * acc
    }

    /// `γ_{F,m}((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let k_max = self.coeffs.len() - 1;
        let h = hermite_eval_all(k_max, x);
        let tail: f64 = (3..=k_max).map(|k| self.coeffs[k] * h[k - 1]).sum();
        let pdf = normal_pdf(x);
        normal_cdf(x) - if pdf == 0.0 { 0.0 } else { pdf * tail }
    }

    /// `γ_{F,m}((a, b])`.
    pub fn bin_mass(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    /// `∫ h dγ_{F,m}` by Gauss-Hermite quadrature.
    pub fn measure_expectation(
        &self,
        h: impl Fn(f64) -> f64,
        rule: &QuadratureRule<f64>,
    ) -> Result<f64, EdgeworthError> {
        if rule.order() < MIN_RULE_ORDER {
            return Err(EdgeworthError::RuleTooSmall {
                got: rule.order(),
                required: MIN_RULE_ORDER,
            });
        }
        let g = self.density_factor();
        let mut total = 0.0;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let v = h(x);
            if !v.is_finite() {
                return Err(EdgeworthError::NonFinite(x));
            }
            total += w * v * g.eval(x);
        }
        Ok(total)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# m={}\n# p={}\n# n_samples={}\nk,value,std_error,coefficient\n",
            self.m, self.moments.p, self.moments.n_samples
        );
        for k in 3..self.coeffs.len() {
            out.push_str(&format!(
                "{k},{},{},{}\n",
                self.moments.value(k).unwrap_or(0.0),
                self.moments.std_error(k).unwrap_or(0.0),
                self.coeffs[k]
            ));
        }
        out
    }
}

fn gamma_samples(batch: &SampleBatch) -> Result<&[f64], EdgeworthError> {
    match &batch.gamma {
        Some(g) if g.len() >= 3 => Ok(g),
        Some(_) => Err(EdgeworthError::TooFewSamples { got: batch.len(), required: 3 }),
        None => Err(EdgeworthError::GammaUnavailable),
    }
}

/// Unbiased sample variance of `Γ` with jackknife standard error.
pub fn var_gamma(batch: &SampleBatch) -> Result<Estimate, EdgeworthError> {
    Ok(variance_estimate(gamma_samples(batch)?))
}

fn h4(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 - 6.0 * x2 + 3.0
}

/// Both sides of the variance/cumulant inequalities, with `κ₄ = E[H_4(F)]`.
/// Each gap carries a jackknife standard error that accounts for the
/// correlation between `Var Γ` and `κ₄` on the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub p: usize,
    pub var_gamma: Estimate,
    pub kappa4: Estimate,
    /// `κ₄ - (3/p²) Var Γ`, nonnegative in theory.
    pub cumulant_gap: Estimate,
    /// `(p-1)/(3p) κ₄ - Var(Γ/p)`, nonnegative in theory.
    pub normalized_gap: Estimate,
    /// `κ₄/3 - Var Γ`, reported without a verdict.
    pub unnormalized_gap: Estimate,
}

impl InequalityReport {
    pub fn cumulant_holds(&self, k: f64) -> bool {
        self.cumulant_gap.value >= -k * self.cumulant_gap.se
    }

    pub fn normalized_holds(&self, k: f64) -> bool {
        self.normalized_gap.value >= -k * self.normalized_gap.se
    }

    /// Both sides of the normalized inequality agree within `k` standard errors.
    pub fn is_tight(&self, k: f64) -> bool {
        self.normalized_gap.within(0.0, k)
    }
}

pub fn inequality_suite(batch: &SampleBatch) -> Result<InequalityReport, EdgeworthError> {
    let gamma = gamma_samples(batch)?;
    if batch.chaos_order == 0 {
        return Err(EdgeworthError::Invalid("chaos order must be positive".into()));
    }
    let p = batch.chaos_order as f64;
    let (var, var_reps) = variance_jackknife_replicates(gamma);
    let (k4, k4_reps) = mean_jackknife_replicates(&batch.f, h4);
    let combine = |a: f64, b: f64| {
        let reps: Vec<f64> = k4_reps
            .par_iter()
            .zip(&var_reps)
            .map(|(k, v)| a * k - b * v)
            .collect();
        Estimate {
            value: a * k4 - b * var,
            se: jackknife_se(&reps),
        }
    };
    Ok(InequalityReport {
        p: batch.chaos_order,
        var_gamma: combine(0.0, -1.0),
        kappa4: combine(1.0, 0.0),
        cumulant_gap: combine(1.0, 3.0 / (p * p)),
        normalized_gap: combine((p - 1.0) / (3.0 * p), 1.0 / (p * p)),
        unnormalized_gap: combine(1.0 / 3.0, 1.0),
    })
}
