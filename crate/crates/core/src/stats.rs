//! Summary statistics with reductions that do not depend on the worker count.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Fixed reduction block: partial sums are formed per block and then added in
/// block order, so results are identical for any thread pool size.
pub const CHUNK: usize = 1 << 14;

/// `Σ f(x_i)` with a deterministic blocked reduction.
pub fn det_sum(xs: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = xs
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&x| f(x)).sum())
        .collect();
    partials.iter().sum()
}

/// `Σ f(i)` over `0..n`, blocked like [`det_sum`].
pub fn det_sum_indexed(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let blocks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| (b * CHUNK..((b + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    partials.iter().sum()
}

/// Standard Gaussian density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / std::f64::consts::TAU.sqrt()
}

/// Standard Gaussian distribution function, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn mean(xs: &[f64]) -> f64 {
    det_sum(xs, |x| x) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    det_sum(xs, |x| (x - m) * (x - m)) / (xs.len() as f64 - 1.0)
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value - target| ≤ k · se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Sample mean of `f(x_i)` with standard error `sd / sqrt(N)`.
pub fn mean_estimate(xs: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Estimate {
    let n = xs.len() as f64;
    let m = det_sum(xs, &f) / n;
    let v = det_sum(xs, |x| {
        let d = f(x) - m;
        d * d
    }) / (n - 1.0);
    Estimate {
        value: m,
        se: (v / n).sqrt(),
    }
}

/// Leave-one-out replicates of the unbiased variance, in closed form:
/// `s²_(i) = ((N-1)s² - N/(N-1)·(x_i - x̄)²) / (N-2)`.
pub fn variance_jackknife_replicates(xs: &[f64]) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let s2 = variance(xs);
    let reps = xs
        .par_iter()
        .map(|&x| ((n - 1.0) * s2 - n / (n - 1.0) * (x - m) * (x - m)) / (n - 2.0))
        .collect();
    (s2, reps)
}

/// Leave-one-out replicates of a sample mean of `f`.
pub fn mean_jackknife_replicates(xs: &[f64], f: impl Fn(f64) -> f64 + Sync) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let total = det_sum(xs, &f);
    let reps = xs.par_iter().map(|&x| (total - f(x)) / (n - 1.0)).collect();
    (total / n, reps)
}

/// Jackknife standard error from leave-one-out replicates.
pub fn jackknife_se(replicates: &[f64]) -> f64 {
    let n = replicates.len() as f64;
    let m = mean(replicates);
    (det_sum(replicates, |r| (r - m) * (r - m)) * (n - 1.0) / n).sqrt()
}

/// Unbiased variance with delete-one jackknife standard error.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let (value, reps) = variance_jackknife_replicates(xs);
    Estimate {
        value,
        se: jackknife_se(&reps),
    }
}

/// Ordinary least squares `y = a + b x` with a two-sided 95% interval on `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_se, half) = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        (se, t * se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Some(LinearFit {
        intercept,
        slope,
        slope_se,
        ci_low: slope - half,
        ci_high: slope + half,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.628 * ((na + nb) / (na * nb)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        let e = mean_estimate(&xs, |x| x);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_jackknife_matches_brute_force() {
        let xs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let (_, reps) = variance_jackknife_replicates(&xs);
        for (i, r) in reps.iter().enumerate() {
            let mut rest = xs.clone();
            rest.remove(i);
            assert!((r - variance(&rest)).abs() < 1e-12);
        }
        // jackknife of the mean reproduces the classical standard error
        let (_, reps) = mean_jackknife_replicates(&xs, |x| x);
        let classical = mean_estimate(&xs, |x| x).se;
        assert!((jackknife_se(&reps) - classical).abs() < 1e-12);
    }

    #[test]
    fn ols_exact_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.ci_high - fit.ci_low).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_none());
    }

    #[test]
    fn ks_statistic() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn det_sum_is_pool_invariant() {
        let xs: Vec<f64> = (0..100_000).map(|i| (i as f64).sin() * 1e3).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| det_sum(&xs, |x| x * x));
        let b = four.install(|| det_sum(&xs, |x| x * x));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
