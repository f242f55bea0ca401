//! Run configuration: flat `dotted.key = value` pairs read from a file and
//! overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("run.threads", "worker pool width (default: REGCLOCK_THREADS, then all cores)"),
    ("run.seed", "random seed for simulation"),
    ("output.format", "what goes to stdout: csv or json"),
    ("output.csv", "write the CSV table to this path"),
    ("output.json", "write the JSON document to this path"),
    ("model.family", "jd (Poisson jump-diffusion) or ts (Gaussian-mixed tempered stable)"),
    ("model.target", "mixture or clock"),
    ("model.t", "horizon in years for density, lt and simulate"),
    ("model.c", "tempered stable index c in [0, 1)"),
    ("model.a", "tempered stable scale a"),
    ("model.b", "tempered stable rate b, or jump rate b for jd"),
    ("model.theta", "Gaussian mixture drift on the clock"),
    ("model.mu", "drift per year"),
    ("model.lambda", "Poisson intensity for jd"),
    ("model.sigma", "diffusion volatility for jd"),
    ("model.direction", "jd jump direction: down or up"),
    ("reg.type", "regulation type I, II, III, a comma list, or all"),
    ("reg.degree", "single regulation degree"),
    ("reg.degrees", "degree grid: start:stop:step or a comma list"),
    ("data.returns", "CSV of returns (log_return column or date,close columns)"),
    ("data.quotes", "CSV of option quotes (strike,maturity_days,mid_price[,kind])"),
    ("data.delta", "observation spacing in years, e.g. 1/252"),
    ("data.moments_only", "estimate from moments.* instead of a returns file"),
    ("moments.mean", "sample mean"),
    ("moments.variance", "sample variance"),
    ("moments.skew", "sample skewness"),
    ("moments.ekurt", "sample excess kurtosis"),
    ("estimate.likelihood", "jd likelihood: bernoulli or exact"),
    ("market.spot", "spot price"),
    ("market.rate", "continuously compounded interest rate"),
    ("market.dividend", "continuous dividend yield"),
    ("price.strikes", "strike list or range"),
    ("price.maturities", "maturity list in years or range"),
    ("calibrate.starts", "Nelder-Mead starts per degree"),
    ("calibrate.max_iters", "iteration cap per start"),
    ("calibrate.sd_tolerance", "simplex standard-deviation tolerance"),
    ("calibrate.init", "extra start a,b,theta"),
    ("calibrate.hold_a", "hold a fixed at this value"),
    ("calibrate.hold_b", "hold b fixed at this value"),
    ("calibrate.hold_theta", "hold theta fixed at this value"),
    ("calibrate.timeout", "wall-clock budget per degree in seconds"),
    ("density.method", "mixture density route: auto, marginalization or fourier"),
    ("grid.x", "evaluation points: start:stop:step or a comma list"),
    ("grid.points", "number of points of the automatic grid"),
    ("lt.u", "Laplace arguments: start:stop:step or a comma list"),
    ("lt.method", "auto, quadrature or closed_form"),
    ("sim.paths", "number of paths or draws"),
    ("sim.steps", "time steps per path"),
    ("sim.output", "draws (terminal values) or paths"),
    ("sim.allow_approx", "allow tabulated increments for c > 0 paths"),
    ("kernels.figure", "kernels, enlargement or jumps"),
];

/// Validated key-value configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = key.trim();
            if !known(key) {
                return Err(CliError::Usage(format!("config line {}: unknown key '{key}'", i + 1)));
            }
            if cfg.values.contains_key(key) {
                return Err(CliError::Usage(format!("config line {}: duplicate key '{key}'", i + 1)));
            }
            let value = value.trim().trim_matches('"');
            cfg.values.insert(key.to_string(), value.to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets a key, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        if !known(key) {
            return Err(CliError::Usage(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn set_assignment(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{assignment}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(known(key), "unregistered key {key}");
        self.values.get(key).map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key).map(|s| parse_number(s).map_err(|e| key_error(key, e))).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> CliResult<f64> {
        self.f64(key)?.ok_or_else(|| CliError::Usage(format!("missing required setting {key}")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        self.get(key)
            .map(|s| s.trim().parse::<usize>().map_err(|_| key_error(key, format!("'{s}' is not a nonnegative integer"))))
            .transpose()
            .map(|v| v.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> CliResult<u64> {
        self.get(key)
            .map(|s| s.trim().parse::<u64>().map_err(|_| key_error(key, format!("'{s}' is not a nonnegative integer"))))
            .transpose()
            .map(|v| v.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> CliResult<bool> {
        match self.get(key).map(|s| s.trim().to_ascii_lowercase()) {
            None => Ok(default),
            Some(s) => match s.as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(key_error(key, format!("'{s}' is not a boolean"))),
            },
        }
    }

    /// A grid given as `start:stop:step` or a comma list.
    pub fn grid(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.get(key).map(|s| parse_grid(s).map_err(|e| key_error(key, e))).transpose()
    }

    /// One of the listed words.
    pub fn choice<'a>(&self, key: &str, options: &[&'a str], default: &'a str) -> CliResult<&'a str> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => {
                let s = s.trim().to_ascii_lowercase();
                options
                    .iter()
                    .find(|o| **o == s)
                    .copied()
                    .ok_or_else(|| key_error(key, format!("'{s}' is not one of {}", options.join(", "))))
            }
        }
    }
}

fn key_error(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{key}: {msg}"))
}

/// A decimal number or a fraction `p/q`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
            if q == 0.0 {
                return Err(format!("'{s}' divides by zero"));
            }
            p / q
        }
        None => s.parse().map_err(|_| format!("'{s}' is not a number"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// Grid cap guarding against typos such as a step of 1e-9.
const MAX_GRID: usize = 1_000_000;

/// `start:stop:step` (stop included when hit up to rounding) or `v1,v2,...`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').filter(|p| !p.trim().is_empty()).map(parse_number).collect::<Result<Vec<_>, _>>().and_then(
            |v| if v.is_empty() { Err("empty list".to_string()) } else { Ok(v) },
        ),
        3 => {
            let (start, stop, step) = (parse_number(parts[0])?, parse_number(parts[1])?, parse_number(parts[2])?);
            if !(step > 0.0) || stop < start {
                return Err(format!("range '{s}' needs step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > MAX_GRID {
                return Err(format!("range '{s}' has more than {MAX_GRID} points"));
            }
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(format!("'{s}' is neither start:stop:step nor a comma list")),
    }
}
