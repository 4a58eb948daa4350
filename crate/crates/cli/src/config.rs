//! Run configuration: command-line flags over an optional `key=value` file
//! over defaults.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use masterop::regions::DEFAULT_SEED;
use masterop::{Horizon, KernelParams, Normalization, QuadSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Normalized,
    Raw,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Mode as ValueEnum>::from_str(s, true)
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Spatial dimension (1 to 3).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Fractional order in (0, 1).
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub normalization: Option<Mode>,
    /// Relative tolerance of the quadrature, or of a convergence verdict where
    /// a command has one.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "gh-order", global = true)]
    pub gh_order: Option<usize>,
    /// `auto` or a positive duration.
    #[arg(long, global = true)]
    pub horizon: Option<String>,
    #[arg(long, global = true, env = "MASTEROP_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for experiment grids.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// File of `key=value` lines with the same keys as the long flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub s: f64,
    pub normalization: Normalization,
    pub quad: QuadSpec,
    /// Set only when given explicitly; commands with their own verdict
    /// tolerance fall back to that.
    pub tol: Option<f64>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn params(&self) -> Result<KernelParams, CliError> {
        Ok(KernelParams::new(self.n, self.s, self.normalization)?)
    }
}

fn read_config(path: &PathBuf) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{}:{}: expected key=value", path.display(), k + 1)));
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("{}:{}: unknown key '{key}'", path.display(), k + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

const KEYS: &[&str] = &["n", "s", "normalization", "tol", "gh-order", "horizon", "seed", "jobs", "format", "out"];

fn pick<T: FromStr>(flag: Option<T>, file: &HashMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config key {key}: {e}"))),
        None => Ok(None),
    }
}

pub fn parse_horizon(text: &str) -> Result<Horizon, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(Horizon::Auto);
    }
    match text.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(Horizon::Finite(h)),
        _ => Err(CliError::Usage(format!("horizon must be 'auto' or a positive number, got '{text}'"))),
    }
}

pub fn resolve(g: &GlobalArgs, default_format: Format) -> Result<RunConfig, CliError> {
    let file = match &g.config {
        Some(p) => read_config(p)?,
        None => HashMap::new(),
    };
    let n = pick(g.n, &file, "n")?.unwrap_or(1);
    let s = pick(g.s, &file, "s")?.unwrap_or(0.5);
    let mode = pick(g.normalization, &file, "normalization")?.unwrap_or(Mode::Normalized);
    let tol = pick(g.tol, &file, "tol")?;
    let mut quad = QuadSpec::default();
    if let Some(o) = pick(g.gh_order, &file, "gh-order")? {
        quad.gh_order = o;
    }
    if let Some(h) = pick(g.horizon.clone(), &file, "horizon")? {
        quad.horizon = parse_horizon(&h)?;
    }
    quad.validate()?;
    let seed = pick(g.seed, &file, "seed")?.unwrap_or(DEFAULT_SEED);
    let jobs = pick(g.jobs, &file, "jobs")?;
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let format = pick(g.format, &file, "format")?.unwrap_or(default_format);
    let out = pick(g.out.as_ref().map(|p| p.display().to_string()), &file, "out")?.map(PathBuf::from);
    let normalization = match mode {
        Mode::Normalized => Normalization::Normalized,
        Mode::Raw => Normalization::Raw,
    };
    // catches n and s outside their ranges before any work starts
    KernelParams::new(n, s, normalization)?;
    Ok(RunConfig { n, s, normalization, quad, tol, seed, jobs, format, out })
}
