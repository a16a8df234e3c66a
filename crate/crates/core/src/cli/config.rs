//! Run configuration from flags and plain `key=value` files.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};

use super::CliError;
use crate::diagnostics::{Bandwidth, GridSpec};
use crate::edgeworth::DEFAULT_MAX_RELATIVE_SE;
use crate::sim::{GoeStatistic, Law, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Moments,
    Expand,
    Compare,
    Ratecheck,
    Lindeberg,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Fbm,
    Goe,
    Hsum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GoeScale {
    /// Divide by the exact standard deviation.
    Normalized,
    /// Keep `A_n` with `N(0,1)` off-diagonal and `N(0,2)` diagonal entries.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TvSource {
    Kde,
    KdeMatched,
    Histogram,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

/// Relative standard-error limit for the moment gate, or `off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeGate(pub Option<f64>);

impl FromStr for SeGate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "off" {
            return Ok(SeGate(None));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 => Ok(SeGate(Some(v))),
            _ => Err(format!("expected a positive number or 'off', got '{s}'")),
        }
    }
}

impl fmt::Display for SeGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "off"),
        }
    }
}

/// Accepted slope interval `lo:hi`; `hi` may be `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeBand(pub f64, pub f64);

impl FromStr for SlopeBand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected lo:hi, got '{s}'");
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(bad());
        }
        Ok(SlopeBand(lo, hi))
    }
}

impl fmt::Display for SlopeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

/// Comma-separated sizes, each at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("expected comma-separated integers, got '{s}'"))?;
        if v.is_empty() || v.contains(&0) {
            return Err(format!("sizes must be at least 1, got '{s}'"));
        }
        Ok(SizeList(v))
    }
}

impl fmt::Display for SizeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "chaos-edgeworth",
    version,
    about = "Edgeworth expansions for Wiener chaos elements",
    args_override_self = true
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Plain-text key=value file; flags on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Hurst index of the fractional Gaussian noise.
    #[arg(long)]
    hurst: Option<f64>,
    /// Chaos index (Hermite rank for fbm, degree for hsum).
    #[arg(long)]
    p: Option<usize>,
    /// Number of increments (fbm), matrix size (goe) or variables (hsum).
    #[arg(long)]
    n: Option<usize>,
    /// Expansion order.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read samples from a batch file instead of simulating.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Evaluation grid a:b:points.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<GridSpec>,
    /// KDE bandwidth for density columns: auto or a positive number.
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
    #[arg(long)]
    sampler: Option<Sampler>,
    /// GOE statistic: projection or trace.
    #[arg(long)]
    statistic: Option<GoeStatistic>,
    #[arg(long, value_enum)]
    goe_scale: Option<GoeScale>,
    /// Input law for hsum: gaussian, rademacher or custom:v@p;...
    #[arg(long)]
    law: Option<Law>,
    /// Largest accepted relative standard error of a moment, or off.
    #[arg(long)]
    max_rel_se: Option<SeGate>,
    /// Density estimate used for total variation.
    #[arg(long, value_enum)]
    tv_source: Option<TvSource>,
    /// Bandwidth of the total-variation KDE.
    #[arg(long)]
    tv_bandwidth: Option<Bandwidth>,
    /// Sizes n for ratecheck.
    #[arg(long)]
    ns: Option<SizeList>,
    /// Variable counts M for lindeberg.
    #[arg(long)]
    ms: Option<SizeList>,
    /// Accepted slope interval lo:hi for ratecheck.
    #[arg(long, allow_hyphen_values = true)]
    band: Option<SlopeBand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<ModelKind>,
    pub hurst: f64,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub grid: GridSpec,
    pub bandwidth: Bandwidth,
    pub sampler: Sampler,
    pub statistic: GoeStatistic,
    pub goe_scale: GoeScale,
    pub law: Law,
    pub max_rel_se: SeGate,
    pub tv_source: TvSource,
    pub tv_bandwidth: Bandwidth,
    pub ns: SizeList,
    pub ms: SizeList,
    pub band: SlopeBand,
}

impl RunConfig {
    /// Default slope band: `[0.75, 1.25]` for `m = 1`, otherwise at least
    /// `(m + 1)/2 - 0.3`.
    pub fn default_band(m: usize) -> SlopeBand {
        if m == 1 {
            SlopeBand(0.75, 1.25)
        } else {
            SlopeBand((m as f64 + 1.0) / 2.0 - 0.3, f64::INFINITY)
        }
    }

    fn from_args(a: Args) -> Result<Self, CliError> {
        let m = a.m.unwrap_or(1) as usize;
        let command = a.command;
        let seed = a.seed.unwrap_or_else(auto_seed);
        let out = a.out.unwrap_or_else(|| PathBuf::from(default_out(command)));
        let cfg = Self {
            command,
            model: a.model,
            hurst: a.hurst.unwrap_or(0.5),
            p: a.p.unwrap_or(2),
            n: a.n.unwrap_or(64),
            m,
            samples: a.samples.unwrap_or(100_000) as usize,
            seed,
            out,
            input: a.input,
            grid: a.grid.unwrap_or(GridSpec { a: -8.0, b: 12.0, points: 2001 }),
            bandwidth: a.bandwidth.unwrap_or(Bandwidth::Auto),
            sampler: a.sampler.unwrap_or(Sampler::Cholesky),
            statistic: a.statistic.unwrap_or(GoeStatistic::Projection),
            goe_scale: a.goe_scale.unwrap_or(GoeScale::Normalized),
            law: a.law.unwrap_or(match a.model {
                Some(ModelKind::Hsum) | None if command == Command::Lindeberg => Law::Rademacher,
                _ => Law::Gaussian,
            }),
            max_rel_se: a.max_rel_se.unwrap_or(SeGate(Some(DEFAULT_MAX_RELATIVE_SE))),
            tv_source: a.tv_source.unwrap_or(TvSource::KdeMatched),
            tv_bandwidth: a.tv_bandwidth.unwrap_or(Bandwidth::Fixed(0.3)),
            ns: a.ns.unwrap_or(SizeList(vec![32, 64, 128, 256])),
            ms: a.ms.unwrap_or(SizeList(vec![8, 16, 32, 64])),
            band: a.band.unwrap_or_else(|| Self::default_band(m)),
        };
        cfg.check_model()?;
        Ok(cfg)
    }

    fn check_model(&self) -> Result<(), CliError> {
        let needs_model = match self.command {
            Command::Simulate | Command::Ratecheck => true,
            Command::Moments | Command::Expand | Command::Compare => self.input.is_none(),
            Command::Lindeberg | Command::Selftest => false,
        };
        if needs_model && self.model.is_none() {
            return Err(CliError::Usage(format!(
                "'{}' requires --model {{fbm,goe,hsum}}",
                value_name(&self.command)
            )));
        }
        Ok(())
    }

    /// Every setting under its flag name, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let model = self.model.map(|m| value_name(&m)).unwrap_or_else(|| "none".into());
        let input = self
            .input
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "none".into());
        [
            ("command", value_name(&self.command)),
            ("model", model),
            ("hurst", self.hurst.to_string()),
            ("p", self.p.to_string()),
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("samples", self.samples.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("input", input),
            ("grid", self.grid.to_string()),
            ("bandwidth", self.bandwidth.to_string()),
            ("sampler", self.sampler.to_string()),
            ("statistic", self.statistic.to_string()),
            ("goe-scale", value_name(&self.goe_scale)),
            ("law", self.law.to_string()),
            ("max-rel-se", self.max_rel_se.to_string()),
            ("tv-source", value_name(&self.tv_source)),
            ("tv-bandwidth", self.tv_bandwidth.to_string()),
            ("ns", self.ns.to_string()),
            ("ms", self.ms.to_string()),
            ("band", self.band.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

fn default_out(command: Command) -> &'static str {
    match command {
        Command::Simulate => "batch.bin",
        Command::Moments => "moments.csv",
        Command::Expand => "expansion.csv",
        Command::Compare => "compare.csv",
        Command::Ratecheck => "ratecheck.csv",
        Command::Lindeberg => "lindeberg.csv",
        Command::Selftest => "selftest.txt",
    }
}

fn auto_seed() -> u64 {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    (nanos as u64) ^ ((nanos >> 64) as u64) ^ u64::from(std::process::id())
}

/// Turns `key=value` lines into `--key=value` tokens. Blank lines and lines
/// starting with `#` are skipped, as are `command`, `config` and `meta.*`
/// keys, so a metadata sidecar can be fed back in.
fn config_tokens(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut tokens = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line '{line}' is not key=value")))?;
        let key = key.trim();
        if key == "command" || key == "config" || key.starts_with("meta.") {
            continue;
        }
        let value = value.trim();
        if (key == "input" || key == "model") && value == "none" {
            continue;
        }
        tokens.push(OsString::from(format!("--{key}={value}")));
    }
    Ok(tokens)
}

/// Parses `argv` (program name first). A `--config` file is read and its
/// settings are placed ahead of the command-line flags, which then win.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Args::try_parse_from(&argv).map_err(CliError::Clap)?;
    let Some(path) = first.config.clone() else {
        return RunConfig::from_args(first);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config '{}': {e}", path.display())))?;
    let mut merged = argv[..1].to_vec();
    merged.extend(config_tokens(&text)?);
    merged.extend(argv[1..].iter().cloned());
    RunConfig::from_args(Args::try_parse_from(&merged).map_err(CliError::Clap)?)
}
