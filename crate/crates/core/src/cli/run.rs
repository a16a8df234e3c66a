//! Command implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};

use super::config::{Command, GoeScale, ModelKind, RunConfig, TvSource};
use super::selftest::selftest_report;
use super::CliError;
use crate::diagnostics::{
    rate_regression, tv_signed, DensityGrid, DensitySource, RatePoint, TvEstimate, MIN_GRID_POINTS,
};
use crate::edgeworth::{estimate_moments, inequality_suite, var_gamma, EdgeworthMeasure, MomentVector};
use crate::sim::{
    lindeberg_discrepancy, read_batch, sample_fbm_hermite, sample_goe_trace, sample_homogeneous,
    write_batch, FbmHermiteModel, GoeTraceModel, HomogeneousSum, SampleBatch,
};
use crate::stats::ols;

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        Command::Simulate => simulate(cfg),
        Command::Moments => moments(cfg),
        Command::Expand => expand(cfg),
        Command::Compare => compare(cfg),
        Command::Ratecheck => ratecheck(cfg),
        Command::Lindeberg => lindeberg(cfg),
        Command::Selftest => selftest(),
    }
}

fn model_of(cfg: &RunConfig) -> Result<ModelKind, CliError> {
    cfg.model
        .ok_or_else(|| CliError::Usage("this command requires --model {fbm,goe,hsum}".into()))
}

fn draw(cfg: &RunConfig, n: usize, seed: u64) -> Result<SampleBatch, CliError> {
    let batch = match model_of(cfg)? {
        ModelKind::Fbm => {
            let model = FbmHermiteModel::new(cfg.hurst, cfg.p, n, cfg.sampler)?;
            sample_fbm_hermite(&model, cfg.samples, seed)?
        }
        ModelKind::Goe => {
            let model = GoeTraceModel::new(n, cfg.statistic)?;
            sample_goe_trace(&model, cfg.samples, seed, cfg.goe_scale == GoeScale::Normalized)?
        }
        ModelKind::Hsum => {
            let q = HomogeneousSum::elementary(cfg.p, n, cfg.law.clone())?;
            sample_homogeneous(&q, cfg.samples, seed)?
        }
    };
    Ok(batch)
}

fn load(cfg: &RunConfig) -> Result<SampleBatch, CliError> {
    match &cfg.input {
        Some(path) => Ok(read_batch(path)?),
        None => draw(cfg, cfg.n, cfg.seed),
    }
}

/// Settings as `# key=value` comment lines. The output path is left out so
/// that runs differing only in destination produce identical bytes.
fn config_header(cfg: &RunConfig) -> String {
    cfg.to_pairs()
        .iter()
        .filter(|(k, _)| k != "out")
        .fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "# {k}={v}");
            s
        })
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Domain(format!("cannot write '{}': {e}", path.display())))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn moment_order(m: usize) -> usize {
    4 * m - 1
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let batch = draw(cfg, cfg.n, cfg.seed)?;
    write_batch(&batch, &cfg.out)?;
    info!("wrote {} samples to {}", batch.len(), cfg.out.display());
    Ok(())
}

fn moments(cfg: &RunConfig) -> Result<(), CliError> {
    let batch = load(cfg)?;
    let mv = estimate_moments(&batch, moment_order(cfg.m))?;
    write_out(&cfg.out, &(config_header(cfg) + &mv.to_csv()))
}

fn measure(cfg: &RunConfig, mv: &MomentVector) -> Result<EdgeworthMeasure, CliError> {
    Ok(EdgeworthMeasure::with_gate(cfg.m, mv, cfg.max_rel_se.0)?)
}

fn expand(cfg: &RunConfig) -> Result<(), CliError> {
    let batch = load(cfg)?;
    let mv = estimate_moments(&batch, moment_order(cfg.m))?;
    let meas = measure(cfg, &mv)?;
    write_out(&cfg.out, &(config_header(cfg) + &meas.to_csv()))
}

fn tv_source(cfg: &RunConfig) -> DensitySource {
    match cfg.tv_source {
        TvSource::Kde => DensitySource::Kde { bandwidth: cfg.tv_bandwidth, matched: false },
        TvSource::KdeMatched => DensitySource::Kde { bandwidth: cfg.tv_bandwidth, matched: true },
        TvSource::Histogram => DensitySource::Histogram,
    }
}

fn total_variation(
    cfg: &RunConfig,
    samples: &[f64],
    meas: &EdgeworthMeasure,
) -> Result<TvEstimate, CliError> {
    Ok(tv_signed(samples, meas, cfg.grid, tv_source(cfg))?)
}

/// `<out>.meta` next to the output file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let started = unix_now();
    let batch = load(cfg)?;
    let k_max = moment_order(cfg.m).max(4);
    let mv = estimate_moments(&batch, k_max)?;
    let meas = measure(cfg, &mv)?;
    let grid = DensityGrid::build(&batch.f, &meas, &cfg.grid.values(), cfg.bandwidth)?;
    write_out(&cfg.out, &grid.to_csv())?;

    let mut meta = String::new();
    for (k, v) in cfg.to_pairs() {
        let _ = writeln!(meta, "{k}={v}");
    }
    let mut put = |k: &str, v: String| {
        let _ = writeln!(meta, "meta.{k}={v}");
    };
    put("generator", batch.generator.clone());
    put("batch_seed", batch.seed.to_string());
    put("n_samples", batch.len().to_string());
    put("chaos_order", batch.chaos_order.to_string());
    for (key, value) in &batch.descriptor {
        put(&format!("model.{key}"), value.clone());
    }
    put("bandwidth", grid.bandwidth.to_string());
    for k in 3..=k_max {
        put(&format!("moment.{k}"), mv.value(k).unwrap_or(f64::NAN).to_string());
        put(&format!("moment_se.{k}"), mv.std_error(k).unwrap_or(f64::NAN).to_string());
    }
    match inequality_suite(&batch) {
        Ok(r) => {
            put("var_gamma", r.var_gamma.value.to_string());
            put("var_gamma_se", r.var_gamma.se.to_string());
            put("kappa4", r.kappa4.value.to_string());
            put("kappa4_se", r.kappa4.se.to_string());
        }
        Err(_) => {
            put("var_gamma", "na".into());
            put("kappa4", mv.value(4).unwrap_or(f64::NAN).to_string());
            put("kappa4_se", mv.std_error(4).unwrap_or(f64::NAN).to_string());
        }
    }
    if cfg.grid.points >= MIN_GRID_POINTS {
        let tv = total_variation(cfg, &batch.f, &meas)?;
        put("tv", tv.value.to_string());
        put("tv_tail_band", tv.tail_band.to_string());
        put("tv_coverage", tv.coverage.to_string());
    } else {
        put("tv", "na".into());
    }
    put("started_unix", started.to_string());
    put("finished_unix", unix_now().to_string());
    write_out(&sidecar_path(&cfg.out), &meta)
}

fn descriptor(cfg: &RunConfig, n: usize) -> String {
    match cfg.model {
        Some(ModelKind::Fbm) => format!("fbm:H={}:p={}:n={n}:{}", cfg.hurst, cfg.p, cfg.sampler),
        Some(ModelKind::Goe) => format!("goe:n={n}:{}", cfg.statistic),
        Some(ModelKind::Hsum) => format!("hsum:d={}:M={n}", cfg.p),
        None => "none".into(),
    }
}

fn ratecheck(cfg: &RunConfig) -> Result<(), CliError> {
    let model = model_of(cfg)?;
    let mut points = Vec::with_capacity(cfg.ns.0.len());
    for (i, &n) in cfg.ns.0.iter().enumerate() {
        let batch = draw(cfg, n, cfg.seed.wrapping_add(i as u64))?;
        let closed = match model {
            ModelKind::Fbm => FbmHermiteModel::new(cfg.hurst, cfg.p, n, cfg.sampler)?.var_gamma_closed_form(),
            _ => None,
        };
        let vg = match closed {
            Some(v) => v,
            None => var_gamma(&batch)?.value,
        };
        let mv = estimate_moments(&batch, moment_order(cfg.m))?;
        let meas = measure(cfg, &mv)?;
        let tv = total_variation(cfg, &batch.f, &meas)?;
        info!("n={n} var_gamma={vg} d_tv={} tail_band={}", tv.value, tv.tail_band);
        points.push(RatePoint {
            var_gamma: vg,
            d_tv: tv.value,
            n,
            descriptor: descriptor(cfg, n),
        });
    }
    let report = rate_regression(points, cfg.m, (cfg.band.0, cfg.band.1))?;
    if !report.passed() {
        warn!(
            "slope {} outside the accepted band {}:{}",
            report.slope(),
            cfg.band.0,
            cfg.band.1
        );
    }
    println!("slope={} passed={}", report.slope(), report.passed());
    write_out(&cfg.out, &(config_header(cfg) + &report.to_csv()))
}

fn lindeberg(cfg: &RunConfig) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(cfg.ms.0.len());
    for (i, &m) in cfg.ms.0.iter().enumerate() {
        let q = HomogeneousSum::elementary(cfg.p, m, cfg.law.clone())?;
        let tau = (0..m)
            .map(|r| q.influence(r))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let est = lindeberg_discrepancy(&q, f64::cos, cfg.samples, cfg.seed.wrapping_add(i as u64))?;
        rows.push((m, tau, est));
    }
    if let Some((m, _, _)) = rows.iter().find(|(_, _, e)| !(e.discrepancy > 0.0)) {
        return Err(CliError::Refused(format!(
            "zero Lindeberg discrepancy at M = {m}; the law matches the Gaussian"
        )));
    }
    let x: Vec<f64> = rows.iter().map(|(_, t, _)| t.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|(_, _, e)| e.discrepancy.ln()).collect();
    let fit = ols(&x, &y)
        .ok_or_else(|| CliError::Refused("at least 3 distinct M values are needed for a fit".into()))?;
    let decreasing = rows.windows(2).all(|w| w[1].2.discrepancy < w[0].2.discrepancy);
    println!("slope={} decreasing={decreasing}", fit.slope);
    let mut out = config_header(cfg);
    let _ = writeln!(
        out,
        "# slope={}\n# slope_se={}\n# decreasing={decreasing}\nM,tau,difference,se,discrepancy",
        fit.slope, fit.slope_se
    );
    for (m, tau, e) in &rows {
        let _ = writeln!(
            out,
            "{m},{tau},{},{},{}",
            e.difference.value, e.difference.se, e.discrepancy
        );
    }
    write_out(&cfg.out, &out)
}

fn selftest() -> Result<(), CliError> {
    let lines = selftest_report();
    let mut failed = 0;
    for line in &lines {
        println!("{line}");
        failed += usize::from(!line.passed);
    }
    if failed > 0 {
        return Err(CliError::Internal(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
