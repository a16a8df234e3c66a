//! Multilinear homogeneous sums `Q(x) = Σ a(i_1,…,i_d) x_{i_1}···x_{i_d}`
//! over strictly increasing index tuples.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{draw_indexed, kv, SampleBatch, SimError};
use crate::stats::{det_sum, normal_cdf, Estimate};

/// Law of the i.i.d. inputs; all laws are centered with unit variance.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Gaussian,
    Rademacher,
    /// Finite law given by `(value, probability)` atoms.
    Custom(Vec<(f64, f64)>),
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Gaussian => f.write_str("gaussian"),
            Law::Rademacher => f.write_str("rademacher"),
            Law::Custom(atoms) => {
                f.write_str("custom:")?;
                let parts: Vec<String> = atoms.iter().map(|(v, p)| format!("{v}@{p}")).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

impl FromStr for Law {
    type Err = String;
    /// `gaussian`, `rademacher` or `custom:v1@p1;v2@p2;…`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Law::Gaussian),
            "rademacher" => Ok(Law::Rademacher),
            other => {
                let body = other
                    .strip_prefix("custom:")
                    .ok_or_else(|| format!("unknown law '{other}'"))?;
                let atoms = body
                    .split(';')
                    .map(|atom| {
                        let (v, p) = atom
                            .split_once('@')
                            .ok_or_else(|| format!("malformed atom '{atom}'"))?;
                        let v: f64 = v.trim().parse().map_err(|_| format!("bad value '{v}'"))?;
                        let p: f64 = p.trim().parse().map_err(|_| format!("bad probability '{p}'"))?;
                        Ok((v, p))
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                let law = Law::Custom(atoms);
                law.validate().map_err(|e| e.to_string())?;
                Ok(law)
            }
        }
    }
}

impl Law {
    fn validate(&self) -> Result<(), SimError> {
        if let Law::Custom(atoms) = self {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let mean: f64 = atoms.iter().map(|(v, p)| v * p).sum();
            let second: f64 = atoms.iter().map(|(v, p)| v * v * p).sum();
            if atoms.is_empty()
                || atoms.iter().any(|(v, p)| !v.is_finite() || !(*p >= 0.0))
                || (total - 1.0).abs() > 1e-12
                || mean.abs() > 1e-12
                || (second - 1.0).abs() > 1e-12
            {
                return Err(SimError::Domain(
                    "custom law must be a probability vector with mean 0 and variance 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// `X = F_X^{-1}(Φ(g))`: the quantile coupling with a standard Gaussian.
    pub fn couple(&self, g: f64) -> f64 {
        match self {
            Law::Gaussian => g,
            Law::Rademacher => {
                if g < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            Law::Custom(atoms) => {
                let u = normal_cdf(g);
                let mut acc = 0.0;
                for (v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousSum {
    degree: usize,
    m: usize,
    terms: Vec<(Vec<usize>, f64)>,
    law: Law,
    /// Common coefficient when the terms are all pairs `i < j`.
    uniform_pairs: Option<f64>,
}

impl HomogeneousSum {
    /// Index tuples are 0-based and strictly increasing.
    pub fn new(
        degree: usize,
        m: usize,
        terms: Vec<(Vec<usize>, f64)>,
        law: Law,
    ) -> Result<Self, SimError> {
        if degree < 1 || m < degree {
            return Err(SimError::Domain(format!(
                "need 1 <= degree <= M, got degree {degree}, M {m}"
            )));
        }
        law.validate()?;
        for (tuple, a) in &terms {
            let increasing = tuple.windows(2).all(|w| w[0] < w[1]);
            if tuple.len() != degree || !increasing || tuple.iter().any(|&i| i >= m) || !a.is_finite() {
                return Err(SimError::Domain(format!("invalid term {tuple:?}")));
            }
        }
        Ok(Self {
            degree,
            m,
            terms,
            law,
            uniform_pairs: None,
        })
    }

    /// All increasing `d`-tuples of `0..M` with the common coefficient
    /// `1 / sqrt(C(M, d))`.
    pub fn elementary(degree: usize, m: usize, law: Law) -> Result<Self, SimError> {
        if degree == 2 {
            return Self::pairwise(m, law);
        }
        if degree < 1 || m < degree {
            return Err(SimError::Domain(format!(
                "need 1 <= degree <= M, got degree {degree}, M {m}"
            )));
        }
        let mut terms = Vec::new();
        let mut tuple: Vec<usize> = (0..degree).collect();
        loop {
            terms.push((tuple.clone(), 1.0));
            let Some(pos) = (0..degree).rev().find(|&i| tuple[i] < m - degree + i) else {
                break;
            };
            tuple[pos] += 1;
            for i in pos + 1..degree {
                tuple[i] = tuple[i - 1] + 1;
            }
        }
        Self::new(degree, m, terms, law)?.normalized()
    }

    /// `Σ_{i<j<M} x_i x_j / sqrt(C(M, 2))`.
    pub fn pairwise(m: usize, law: Law) -> Result<Self, SimError> {
        let pairs = m * m.saturating_sub(1) / 2;
        let a = 1.0 / (pairs as f64).sqrt();
        let terms = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (vec![i, j], a)))
            .collect();
        let mut q = Self::new(2, m, terms, law)?;
        q.uniform_pairs = Some(a);
        Ok(q)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_vars(&self) -> usize {
        self.m
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn with_law(&self, law: Law) -> Result<Self, SimError> {
        law.validate()?;
        Ok(Self { law, ..self.clone() })
    }

    /// `E[Q²] = Σ a²` for any centered unit-variance law.
    pub fn second_moment(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a * a).sum()
    }

    /// Rescales the coefficients to `E[Q²] = 1`.
    pub fn normalized(mut self) -> Result<Self, SimError> {
        let s = self.second_moment().sqrt();
        if s == 0.0 {
            return Err(SimError::Degenerate("all coefficients vanish".into()));
        }
        for (_, a) in self.terms.iter_mut() {
            *a /= s;
        }
        if let Some(a) = self.uniform_pairs.as_mut() {
            *a /= s;
        }
        Ok(self)
    }

    /// `τ_r = Σ a² over tuples containing r` (0-based `r`).
    pub fn influence(&self, r: usize) -> Result<f64, SimError> {
        if r >= self.m {
            return Err(SimError::Domain(format!("index {r} out of range 0..{}", self.m)));
        }
        Ok(self
            .terms
            .iter()
            .filter(|(t, _)| t.contains(&r))
            .map(|(_, a)| a * a)
            .sum())
    }

    /// `τ(Q) = max_r τ_r`.
    pub fn total_influence(&self) -> f64 {
        let mut tau = vec![0.0; self.m];
        for (t, a) in &self.terms {
            for &i in t {
                tau[i] += a * a;
            }
        }
        tau.into_iter().fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some(a) = self.uniform_pairs {
            let (s, s2) = x.iter().fold((0.0, 0.0), |(s, s2), v| (s + v, s2 + v * v));
            return 0.5 * a * (s * s - s2);
        }
        self.terms
            .iter()
            .map(|(t, a)| a * t.iter().map(|&i| x[i]).product::<f64>())
            .sum()
    }

    /// `|∇Q(x)|²`.
    fn gradient_sq(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        if let Some(a) = self.uniform_pairs {
            let s: f64 = x.iter().sum();
            return x.iter().map(|v| (a * (s - v)).powi(2)).sum();
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (t, a) in &self.terms {
            for (pos, &r) in t.iter().enumerate() {
                let others: f64 = t
                    .iter()
                    .enumerate()
                    .filter(|(q, _)| *q != pos)
                    .map(|(_, &i)| x[i])
                    .product();
                grad[r] += a * others;
            }
        }
        grad.iter().map(|g| g * g).sum()
    }

    fn check_sampling(&self) -> Result<(), SimError> {
        if self.terms.is_empty() {
            return Err(SimError::Degenerate("coefficient map is empty".into()));
        }
        let s = self.second_moment();
        if (s - 1.0).abs() > 1e-10 {
            return Err(SimError::Domain(format!(
                "E[Q^2] = {s}, expected 1; normalize the coefficients first"
            )));
        }
        Ok(())
    }

    fn descriptor(&self) -> Vec<(String, String)> {
        vec![
            kv("model", "hsum"),
            kv("degree", self.degree),
            kv("vars", self.m),
            kv("terms", self.terms.len()),
            kv("law", &self.law),
            kv("total_influence", self.total_influence()),
        ]
    }
}

/// Evaluates `Q` on i.i.d. draws of its law. `Γ = |∇Q|²` is recorded only
/// for the Gaussian law.
pub fn sample_homogeneous(
    q: &HomogeneousSum,
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch, SimError> {
    if n_samples == 0 {
        return Err(SimError::NoSamples);
    }
    q.check_sampling()?;
    let m = q.m;
    let gaussian = q.law == Law::Gaussian;
    let init = || (vec![0.0; m], vec![0.0; m]);
    let draw = |(x, grad): &mut (Vec<f64>, Vec<f64>), rng: &mut ChaCha8Rng| {
        for v in x.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = q.law.couple(g);
        }
        let f = q.eval(x);
        let gamma = if gaussian { q.gradient_sq(x, grad) } else { f64::NAN };
        (f, gamma)
    };
    let pairs = draw_indexed(n_samples, seed, init, draw);
    let mut batch = SampleBatch::from_pairs(q.descriptor(), seed, q.degree, pairs);
    if !gaussian {
        batch.gamma = None;
    }
    Ok(batch)
}

/// Coupled estimate of `E h(Q(X)) - E h(Q(G))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindebergEstimate {
    pub difference: Estimate,
    /// `|difference|`.
    pub discrepancy: f64,
    pub total_influence: f64,
}

/// Each sample draws `G`, sets `X = F_X^{-1}(Φ(G))`, and averages the paired
/// difference over `G` and the antithetic `-G`. For even degree under a
/// symmetric law both draws give the same `Q`, so only `G` is evaluated.
pub fn lindeberg_discrepancy(
    q: &HomogeneousSum,
    h: impl Fn(f64) -> f64 + Sync,
    n_samples: usize,
    seed: u64,
) -> Result<LindebergEstimate, SimError> {
    if n_samples < 2 {
        return Err(SimError::NoSamples);
    }
    q.check_sampling()?;
    let m = q.m;
    let mirrored = q.degree % 2 == 0 && matches!(q.law, Law::Gaussian | Law::Rademacher);
    let signs: &[f64] = if mirrored { &[1.0] } else { &[1.0, -1.0] };
    let init = || (vec![0.0; m], vec![0.0; m]);
    let draw = |(g, x): &mut (Vec<f64>, Vec<f64>), rng: &mut ChaCha8Rng| {
        for gi in g.iter_mut() {
            *gi = StandardNormal.sample(rng);
        }
        let mut diff = 0.0;
        for &sign in signs {
            for (xi, gi) in x.iter_mut().zip(g.iter_mut()) {
                *gi *= sign;
                *xi = q.law.couple(*gi);
            }
            diff += h(q.eval(x)) - h(q.eval(g));
        }
        diff / signs.len() as f64
    };
    let diffs = draw_indexed(n_samples, seed, init, draw);
    let n = diffs.len() as f64;
    let mean = det_sum(&diffs, |d| d) / n;
    let var = det_sum(&diffs, |d| (d - mean) * (d - mean)) / (n - 1.0);
    Ok(LindebergEstimate {
        difference: Estimate {
            value: mean,
            se: (var / n).sqrt(),
        },
        discrepancy: mean.abs(),
        total_influence: q.total_influence(),
    })
}
