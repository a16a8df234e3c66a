//! Cubic trace of a GOE matrix and its third-chaos projection.
//!
//! `A` is symmetric with `A_ij = g_ij ~ N(0,1)` for `i < j` and
//! `A_ii = sqrt(2) z_i`; `A_n = A / sqrt(n)`. Entries satisfy
//! `E[A_ab A_cd] = δ_ac δ_bd + δ_ad δ_bc`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{draw_indexed, kv, SampleBatch, SimError};

/// Matrix entry `(a, b)` with `a ≤ b`.
pub type Entry = (usize, usize);

fn entry(a: usize, b: usize) -> Entry {
    (a.min(b), a.max(b))
}

fn entry_cov(x: Entry, y: Entry) -> f64 {
    // δ_ac δ_bd + δ_ad δ_bc for the ordered pairs, symmetric in each entry
    let (a, b) = x;
    let (c, d) = y;
    let direct = (a == c && b == d) as u8 as f64;
    let crossed = (a == d && b == c) as u8 as f64;
    direct + crossed
}

/// Chaos-3 projection of one monomial `A_ij A_jk A_ki`:
/// `UVW - E[UV]W - E[UW]V - E[VW]U`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialProjection {
    pub cubic: [Entry; 3],
    pub linear: Vec<(Entry, f64)>,
}

pub fn wick_project_monomial(i: usize, j: usize, k: usize) -> MonomialProjection {
    let u = entry(i, j);
    let v = entry(j, k);
    let w = entry(k, i);
    let mut linear = Vec::new();
    for (a, b, rest) in [(u, v, w), (u, w, v), (v, w, u)] {
        let c = entry_cov(a, b);
        if c != 0.0 {
            linear.push((rest, -c));
        }
    }
    MonomialProjection {
        cubic: [u, v, w],
        linear,
    }
}

/// `J_3 = Tr A³ - c Tr A` with exact variances.
#[derive(Debug, Clone, PartialEq)]
pub struct Chaos3Projection {
    pub n: usize,
    /// The linear correction collapses to `c · Tr A` with `c = 3(n+1)`.
    pub trace_coeff: f64,
    /// `Var Tr A³ = 24n³ + 54n² + 42n`.
    pub var_trace: f64,
    /// `Var J_3 = 6n³ + 18n² + 24n`.
    pub var_j3: f64,
}

/// Sums the per-monomial Wick corrections over all `(i, j, k)` and collapses
/// them to a multiple of `Tr A`.
pub fn goe_chaos3_projection_coeffs(n: usize) -> Result<Chaos3Projection, SimError> {
    if n < 1 {
        return Err(SimError::Domain("matrix size n must be at least 1".into()));
    }
    let mut linear: BTreeMap<Entry, f64> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for (e, c) in wick_project_monomial(i, j, k).linear {
                    *linear.entry(e).or_insert(0.0) += c;
                }
            }
        }
    }
    let diag = -linear.get(&(0, 0)).copied().unwrap_or(0.0);
    let collapses = linear
        .iter()
        .all(|(&(a, b), &c)| if a == b { c == -diag } else { c == 0.0 })
        && (0..n).all(|i| linear.contains_key(&(i, i)));
    if !collapses {
        return Err(SimError::Degenerate(
            "Wick correction is not proportional to Tr A".into(),
        ));
    }
    let nf = n as f64;
    Ok(Chaos3Projection {
        n,
        trace_coeff: diag,
        var_trace: 24.0 * nf.powi(3) + 54.0 * nf * nf + 42.0 * nf,
        var_j3: 6.0 * nf.powi(3) + 18.0 * nf * nf + 24.0 * nf,
    })
}

/// Which statistic of `A_n` a batch records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoeStatistic {
    /// `J_3(Tr A_n³)`, the third-chaos projection.
    Projection,
    /// `Tr A_n³` itself (chaos 1 plus chaos 3).
    Trace,
}

impl fmt::Display for GoeStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoeStatistic::Projection => "projection",
            GoeStatistic::Trace => "trace",
        })
    }
}

impl FromStr for GoeStatistic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projection" => Ok(GoeStatistic::Projection),
            "trace" => Ok(GoeStatistic::Trace),
            other => Err(format!("unknown GOE statistic '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoeTraceModel {
    pub n: usize,
    pub statistic: GoeStatistic,
    pub projection: Chaos3Projection,
}

impl GoeTraceModel {
    pub fn new(n: usize, statistic: GoeStatistic) -> Result<Self, SimError> {
        Ok(Self {
            n,
            statistic,
            projection: goe_chaos3_projection_coeffs(n)?,
        })
    }
}

struct Scratch {
    a: Vec<f64>,
}

/// Samples the chosen statistic of `A_n`. With `normalize` the statistic is
/// divided by its exact standard deviation; otherwise the raw `A_n` scaling
/// is kept. `Γ` comes from the analytic gradient in `(g_ij, z_i)`.
pub fn sample_goe_trace(
    model: &GoeTraceModel,
    n_samples: usize,
    seed: u64,
    normalize: bool,
) -> Result<SampleBatch, SimError> {
    if n_samples == 0 {
        return Err(SimError::NoSamples);
    }
    let n = model.n;
    let proj = &model.projection;
    let c = match model.statistic {
        GoeStatistic::Projection => proj.trace_coeff,
        GoeStatistic::Trace => 0.0,
    };
    let scale = if normalize {
        let var = match model.statistic {
            GoeStatistic::Projection => proj.var_j3,
            GoeStatistic::Trace => proj.var_trace,
        };
        1.0 / var.sqrt()
    } else {
        (n as f64).powf(-1.5)
    };
    let sqrt2 = std::f64::consts::SQRT_2;
    let init = || Scratch { a: vec![0.0; n * n] };
    let draw = |s: &mut Scratch, rng: &mut ChaCha8Rng| {
        let a = &mut s.a;
        for i in 0..n {
            let z: f64 = StandardNormal.sample(rng);
            a[i * n + i] = sqrt2 * z;
            for j in i + 1..n {
                let g: f64 = StandardNormal.sample(rng);
                a[i * n + j] = g;
                a[j * n + i] = g;
            }
        }
        let mut trace3 = 0.0;
        let mut trace1 = 0.0;
        let mut gamma = 0.0;
        for i in 0..n {
            let ri = &a[i * n..(i + 1) * n];
            for j in i..n {
                let rj = &a[j * n..(j + 1) * n];
                let b: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                if i == j {
                    trace3 += b * ri[i];
                    trace1 += ri[i];
                    let d = 3.0 * b - c;
                    gamma += 2.0 * d * d;
                } else {
                    trace3 += 2.0 * b * ri[j];
                    gamma += 36.0 * b * b;
                }
            }
        }
        ((trace3 - c * trace1) * scale, gamma * scale * scale)
    };
    let pairs = draw_indexed(n_samples, seed, init, draw);
    let descriptor = vec![
        kv("model", "goe"),
        kv("n", n),
        kv("statistic", model.statistic),
        kv("normalize", normalize),
        kv("trace_coeff", proj.trace_coeff),
        kv("var_trace", proj.var_trace),
        kv("var_j3", proj.var_j3),
    ];
    Ok(SampleBatch::from_pairs(descriptor, seed, 3, pairs))
}
