//! Hermite variations of fractional Gaussian noise.
//!
//! `V_n = n^{-1/2} Σ_{k<n} H_p(X_k)` with `X` a unit-variance fGn vector and
//! `F = V_n / sqrt(Var V_n)`. Writing `X = Sξ` for i.i.d. standard `ξ`, the
//! carré-du-champ is `Γ(F) = |Sᵀ v|²` with `v_k = p H_{p-1}(X_k) / sqrt(n Var V_n)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{draw_indexed, kv, SampleBatch, SimError};

/// Largest `n` accepted by the Cholesky sampler.
pub const MAX_CHOLESKY_N: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Cholesky,
    Circulant,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Cholesky => "cholesky",
            Sampler::Circulant => "circulant",
        })
    }
}

impl FromStr for Sampler {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cholesky" => Ok(Sampler::Cholesky),
            "circulant" => Ok(Sampler::Circulant),
            other => Err(format!("unknown sampler '{other}'")),
        }
    }
}

/// Breuer–Major classification of `(H, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Clt,
    Critical,
    NonCentral,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Clt => "CLT regime",
            Regime::Critical => "critical regime",
            Regime::NonCentral => "non-central regime",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmHermiteModel {
    pub hurst: f64,
    pub p: usize,
    pub n: usize,
    pub sampler: Sampler,
}

fn check_hurst(hurst: f64) -> Result<(), SimError> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(SimError::Domain(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    Ok(())
}

/// fGn autocovariance `½(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})`.
pub fn fgn_covariance(hurst: f64, k: i64) -> Result<f64, SimError> {
    check_hurst(hurst)?;
    Ok(fgn_cov_unchecked(hurst, k))
}

fn fgn_cov_unchecked(hurst: f64, k: i64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k.unsigned_abs() as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

impl FbmHermiteModel {
    pub fn new(hurst: f64, p: usize, n: usize, sampler: Sampler) -> Result<Self, SimError> {
        check_hurst(hurst)?;
        if p < 2 {
            return Err(SimError::Domain(format!("Hermite order p must be at least 2, got {p}")));
        }
        if n < 1 {
            return Err(SimError::Domain("n must be at least 1".into()));
        }
        if sampler == Sampler::Cholesky && n > MAX_CHOLESKY_N {
            return Err(SimError::Domain(format!(
                "cholesky sampler supports n <= {MAX_CHOLESKY_N}, got {n}"
            )));
        }
        Ok(Self {
            hurst,
            p,
            n,
            sampler,
        })
    }

    /// `Var V_n = p! Σ_{|k|<n} (1 - |k|/n) r(k)^p`.
    pub fn variance_vn(&self) -> f64 {
        let fact: f64 = (1..=self.p).map(|i| i as f64).product();
        let n = self.n as f64;
        let tail: f64 = (1..self.n)
            .map(|k| (1.0 - k as f64 / n) * fgn_cov_unchecked(self.hurst, k as i64).powi(self.p as i32))
            .sum();
        fact * (1.0 + 2.0 * tail)
    }

    /// `Var Γ` in closed form for independent increments (`H = 1/2`):
    /// `p⁴ / (n (p!)²) · Var(H_{p-1}(ξ)²)`, using
    /// `E[H_q⁴] = Σ_r (r! C(q,r)²)² (2q-2r)!`.
    pub fn var_gamma_closed_form(&self) -> Option<f64> {
        if self.hurst != 0.5 {
            return None;
        }
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let choose = |q: usize, r: usize| fact(q) / (fact(r) * fact(q - r));
        let q = self.p - 1;
        let fourth: f64 = (0..=q)
            .map(|r| (fact(r) * choose(q, r).powi(2)).powi(2) * fact(2 * q - 2 * r))
            .sum();
        let p = self.p as f64;
        Some(p.powi(4) / (self.n as f64 * fact(self.p).powi(2)) * (fourth - fact(q).powi(2)))
    }

    pub fn regime(&self) -> Regime {
        let critical = 1.0 - 1.0 / (2.0 * self.p as f64);
        if (self.hurst - critical).abs() <= 1e-12 {
            Regime::Critical
        } else if self.hurst < critical {
            Regime::Clt
        } else {
            Regime::NonCentral
        }
    }

    fn autocovariance(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| fgn_cov_unchecked(self.hurst, k as i64))
            .collect()
    }
}

/// Linear map `ξ ↦ X` with covariance `Toeplitz(r)`.
enum Factor {
    Identity,
    /// Lower Cholesky factor, rows packed: row `i` holds `L[i][0..=i]`.
    Cholesky(Vec<f64>),
    Circulant(CirculantRoot),
}

struct CirculantRoot {
    /// Square roots of the embedding eigenvalues, already divided by `M`.
    sqrt_eigs: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CirculantRoot {
    fn len(&self) -> usize {
        self.sqrt_eigs.len()
    }

    /// `buf ← S buf` for the symmetric circulant root `S`.
    fn apply(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
        for (b, s) in buf.iter_mut().zip(&self.sqrt_eigs) {
            *b *= *s;
        }
        self.inverse.process_with_scratch(buf, scratch);
    }
}

/// Cholesky factor of a symmetric positive definite Toeplitz matrix by the
/// Schur algorithm, `O(n²)`.
pub(crate) fn toeplitz_cholesky(r: &[f64]) -> Result<Vec<f64>, SimError> {
    let n = r.len();
    if r[0] <= 0.0 {
        return Err(SimError::Factorization { row: 0, pivot: r[0] });
    }
    let scale = r[0].sqrt();
    let mut u: Vec<f64> = r.iter().map(|x| x / scale).collect();
    let mut v = u.clone();
    v[0] = 0.0;
    let mut packed = vec![0.0; n * (n + 1) / 2];
    for k in 0..n {
        if !(u[k] > 0.0) || !u[k].is_finite() {
            return Err(SimError::Factorization { row: k, pivot: u[k] * u[k] });
        }
        for i in k..n {
            packed[i * (i + 1) / 2 + k] = u[i];
        }
        if k + 1 == n {
            break;
        }
        // shift the first generator down by one
        for i in (k + 1..n).rev() {
            u[i] = u[i - 1];
        }
        let rho = v[k + 1] / u[k + 1];
        if !(rho.abs() < 1.0) {
            return Err(SimError::Factorization {
                row: k + 1,
                pivot: u[k + 1] * u[k + 1] * (1.0 - rho * rho),
            });
        }
        let c = (1.0 - rho * rho).sqrt();
        for i in k + 1..n {
            let (a, b) = (u[i], v[i]);
            u[i] = (a - rho * b) / c;
            v[i] = (b - rho * a) / c;
        }
    }
    Ok(packed)
}

fn build_factor(model: &FbmHermiteModel) -> Result<(Factor, Sampler), SimError> {
    let r = model.autocovariance();
    if r[1..].iter().all(|&x| x == 0.0) {
        return Ok((Factor::Identity, model.sampler));
    }
    if model.sampler == Sampler::Circulant && model.n >= 2 {
        let m = 2 * (model.n - 1);
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut row: Vec<Complex64> = (0..m)
            .map(|k| Complex64::new(r[if k < model.n { k } else { m - k }], 0.0))
            .collect();
        forward.process(&mut row);
        let max = row.iter().fold(0.0f64, |a, z| a.max(z.re));
        let min = row.iter().fold(f64::INFINITY, |a, z| a.min(z.re));
        if min >= -1e-10 * max {
            let sqrt_eigs = row.iter().map(|z| z.re.max(0.0).sqrt() / m as f64).collect();
            return Ok((
                Factor::Circulant(CirculantRoot {
                    sqrt_eigs,
                    forward,
                    inverse,
                }),
                Sampler::Circulant,
            ));
        }
        log::warn!("circulant embedding has eigenvalue {min:e}; falling back to cholesky");
        if model.n > MAX_CHOLESKY_N {
            return Err(SimError::Factorization { row: 0, pivot: min });
        }
    }
    Ok((Factor::Cholesky(toeplitz_cholesky(&r)?), Sampler::Cholesky))
}

struct Scratch {
    xi: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    grad: Vec<f64>,
    buf: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

/// `(H_p(x), H_{p-1}(x))`.
fn hermite_pair(p: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..p {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Draws `(F, Γ(F))` pairs; deterministic in `(seed, n_samples, sampler)`.
pub fn sample_fbm_hermite(
    model: &FbmHermiteModel,
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch, SimError> {
    if n_samples == 0 {
        return Err(SimError::NoSamples);
    }
    let n = model.n;
    let p = model.p;
    let var = model.variance_vn();
    let f_scale = 1.0 / (n as f64 * var).sqrt();
    let (factor, used) = build_factor(model)?;
    let m = match &factor {
        Factor::Circulant(c) => c.len(),
        _ => n,
    };
    let fft_len = match &factor {
        Factor::Circulant(c) => c
            .forward
            .get_inplace_scratch_len()
            .max(c.inverse.get_inplace_scratch_len()),
        _ => 0,
    };
    let init = || Scratch {
        xi: vec![0.0; m],
        x: vec![0.0; n],
        v: vec![0.0; n],
        grad: vec![0.0; m],
        buf: vec![Complex64::new(0.0, 0.0); if fft_len > 0 { m } else { 0 }],
        fft_scratch: vec![Complex64::new(0.0, 0.0); fft_len],
    };
    let draw = |s: &mut Scratch, rng: &mut ChaCha8Rng| {
        for z in s.xi.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        match &factor {
            Factor::Identity => s.x.copy_from_slice(&s.xi),
            Factor::Cholesky(l) => {
                for i in 0..n {
                    let row = &l[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                    s.x[i] = row.iter().zip(&s.xi).map(|(a, b)| a * b).sum();
                }
            }
            Factor::Circulant(c) => {
                for (b, z) in s.buf.iter_mut().zip(&s.xi) {
                    *b = Complex64::new(*z, 0.0);
                }
                c.apply(&mut s.buf, &mut s.fft_scratch);
                for (x, b) in s.x.iter_mut().zip(&s.buf) {
                    *x = b.re;
                }
            }
        }
        let mut sum = 0.0;
        for (xk, vk) in s.x.iter().zip(s.v.iter_mut()) {
            let (hp, hp1) = hermite_pair(p, *xk);
            sum += hp;
            *vk = p as f64 * hp1 * f_scale;
        }
        let f = sum * f_scale;
        let gamma = match &factor {
            Factor::Identity => s.v.iter().map(|v| v * v).sum(),
            Factor::Cholesky(l) => {
                s.grad.iter_mut().for_each(|g| *g = 0.0);
                for i in 0..n {
                    let row = &l[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                    let vi = s.v[i];
                    for (g, a) in s.grad.iter_mut().zip(row) {
                        *g += a * vi;
                    }
                }
                s.grad.iter().map(|g| g * g).sum()
            }
            Factor::Circulant(c) => {
                for (k, b) in s.buf.iter_mut().enumerate() {
                    *b = Complex64::new(if k < n { s.v[k] } else { 0.0 }, 0.0);
                }
                c.apply(&mut s.buf, &mut s.fft_scratch);
                s.buf.iter().map(|b| b.re * b.re).sum()
            }
        };
        (f, gamma)
    };
    let pairs = draw_indexed(n_samples, seed, init, draw);
    let descriptor = vec![
        kv("model", "fbm"),
        kv("hurst", model.hurst),
        kv("p", p),
        kv("n", n),
        kv("sampler", model.sampler),
        kv("sampler_used", used),
        kv("var_vn", var),
        kv("regime", model.regime()),
    ];
    Ok(SampleBatch::from_pairs(descriptor, seed, p, pairs))
}
