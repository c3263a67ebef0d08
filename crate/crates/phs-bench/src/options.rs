//! Command line and key-value config handling.
//!
//! Flags win over config-file entries; unset values fall back to
//! per-experiment defaults.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Parser;

#[derive(Parser, Debug)]
#[command(
    name = "phs-bench",
    about = "Benchmark runs of passivity-consistent integrators on bundled systems",
    disable_help_flag = false
)]
pub struct Cli {
    /// Experiment: pendulum | rigid-body | microphone | custom
    #[arg(long)]
    pub experiment: Option<String>,

    /// Method: avfphs | disgrad-secant | collocation | splitting |
    /// implicit-midpoint | plain-avf | improved-euler
    #[arg(long)]
    pub method: Option<String>,

    /// Step size
    #[arg(long = "h")]
    pub step_size: Option<f64>,

    /// Number of steps
    #[arg(long)]
    pub steps: Option<usize>,

    /// Collocation stage count
    #[arg(long)]
    pub stages: Option<usize>,

    /// Implicit solver tolerance (scaled sup-norm)
    #[arg(long)]
    pub tol: Option<f64>,

    /// Implicit solver iteration budget
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,

    /// Output path prefix (files get .trajectory.csv / .ledger.csv suffixes)
    #[arg(long)]
    pub out: Option<String>,

    /// Comma-separated method list; runs a comparison instead of one method
    #[arg(long, value_delimiter = ',')]
    pub compare: Option<Vec<String>>,

    /// Reference step size for comparison error columns
    #[arg(long = "oracle-h")]
    pub oracle_h: Option<f64>,

    /// Key-value config file (flags override its entries)
    #[arg(long)]
    pub config: Option<String>,
}

/// Fully resolved run options.
#[derive(Debug, Clone)]
pub struct Options {
    pub experiment: String,
    pub method: String,
    pub step_size: f64,
    pub steps: usize,
    pub stages: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub out: String,
    pub compare: Option<Vec<String>>,
    pub oracle_h: f64,
    pub overrides: Overrides,
}

/// Experiment parameter overrides (config file only).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub x0: Option<Vec<f64>>,
    pub resistance: Option<f64>,
    pub damping: Option<f64>,
    pub mass: Option<f64>,
    pub rest_position: Option<f64>,
    pub inertia: Option<[f64; 3]>,
    pub kd: Option<[f64; 3]>,
    pub seed: Option<u64>,
    pub state_dim: Option<usize>,
    pub port_dim: Option<usize>,
}

fn default_steps(experiment: &str) -> usize {
    match experiment {
        "rigid-body" => 120,
        "pendulum" | "microphone" => 200,
        _ => 100,
    }
}

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {} is not `key = value`: {raw}", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_as<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| format!("config key {key}: {e}")),
    }
}

fn parse_list(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<f64>>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|e| format!("config key {key}: {e}")),
    }
}

fn parse_triple(map: &BTreeMap<String, String>, key: &str) -> Result<Option<[f64; 3]>, String> {
    match parse_list(map, key)? {
        None => Ok(None),
        Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
        Some(v) => Err(format!(
            "config key {key}: expected 3 values, got {}",
            v.len()
        )),
    }
}

/// Merge CLI flags over config entries and defaults.
pub fn resolve(cli: Cli) -> Result<Options, String> {
    let file = match &cli.config {
        Some(path) => parse_config_file(Path::new(path))?,
        None => BTreeMap::new(),
    };

    let experiment = cli
        .experiment
        .or_else(|| file.get("experiment").cloned())
        .ok_or("missing --experiment (or `experiment =` in the config file)")?;
    let known = ["pendulum", "rigid-body", "microphone", "custom"];
    if !known.contains(&experiment.as_str()) {
        return Err(format!(
            "unknown experiment `{experiment}` (expected one of {})",
            known.join(", ")
        ));
    }

    let method = cli
        .method
        .or_else(|| file.get("method").cloned())
        .unwrap_or_else(|| "avfphs".to_string());

    let compare = cli.compare.or_else(|| {
        file.get("compare")
            .map(|raw| raw.split(',').map(|s| s.trim().to_string()).collect())
    });

    let step_size = match cli.step_size {
        Some(h) => h,
        None => parse_as::<f64>(&file, "h")?.unwrap_or(0.5),
    };
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(format!("step size must be positive, got {step_size}"));
    }
    let steps = match cli.steps {
        Some(n) => n,
        None => parse_as::<usize>(&file, "steps")?.unwrap_or_else(|| default_steps(&experiment)),
    };
    if steps == 0 {
        return Err("steps must be at least 1".to_string());
    }
    let stages = match cli.stages {
        Some(s) => s,
        None => parse_as::<usize>(&file, "stages")?.unwrap_or(2),
    };
    let tol = match cli.tol {
        Some(t) => t,
        None => parse_as::<f64>(&file, "tol")?.unwrap_or(1e-14),
    };
    let max_iter = match cli.max_iter {
        Some(n) => n,
        None => parse_as::<usize>(&file, "max-iter")?.unwrap_or(300),
    };
    let out = match cli.out {
        Some(o) => o,
        None => file
            .get("out")
            .cloned()
            .unwrap_or_else(|| experiment.clone()),
    };
    let oracle_h = match cli.oracle_h {
        Some(o) => o,
        None => parse_as::<f64>(&file, "oracle-h")?.unwrap_or(step_size / 100.0),
    };
    if !(oracle_h > 0.0 && oracle_h <= step_size) {
        return Err(format!("oracle step {oracle_h} must be in (0, h]"));
    }

    let overrides = Overrides {
        x0: parse_list(&file, "x0")?,
        resistance: parse_as(&file, "resistance")?,
        damping: parse_as(&file, "damping")?,
        mass: parse_as(&file, "mass")?,
        rest_position: parse_as(&file, "rest-position")?,
        inertia: parse_triple(&file, "inertia")?,
        kd: parse_triple(&file, "kd")?,
        seed: parse_as(&file, "seed")?,
        state_dim: parse_as(&file, "state-dim")?,
        port_dim: parse_as(&file, "port-dim")?,
    };

    Ok(Options {
        experiment,
        method,
        step_size,
        steps,
        stages,
        tol,
        max_iter,
        out,
        compare,
        oracle_h,
        overrides,
    })
}
