//! Argument parsing, configuration merging and output emission.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::{self, Output};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::format::round_json;

/// Environment variable giving the worker pool width.
pub const THREADS_ENV: &str = "REGCLOCK_THREADS";

/// Declares a flag group whose options map one-to-one onto config keys.
macro_rules! flag_group {
    ($name:ident { $($field:ident => $key:literal : $help:literal,)* }) => {
        #[derive(Args, Debug, Default, Clone)]
        pub struct $name {
            $(
                #[arg(long, help = $help, allow_hyphen_values = true, value_name = "VALUE")]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
                $(
                    if let Some(v) = &self.$field {
                        cfg.set($key, v.clone())?;
                    }
                )*
                Ok(())
            }
        }
    };
}

flag_group!(ModelFlags {
    model => "model.family": "model family: jd or ts",
    target => "model.target": "mixture or clock",
    t => "model.t": "horizon in years",
    c => "model.c": "tempered stable index c",
    a => "model.a": "tempered stable scale a",
    b => "model.b": "tempered stable rate b, or jd jump rate",
    theta => "model.theta": "Gaussian mixture drift on the clock",
    mu => "model.mu": "drift per year",
    lambda => "model.lambda": "Poisson intensity (jd)",
    sigma => "model.sigma": "diffusion volatility (jd)",
    direction => "model.direction": "jd jump direction: down or up",
});

flag_group!(RegFlags {
    reg_type => "reg.type": "regulation type: I, II, III, a comma list, or all",
    degree => "reg.degree": "regulation degree",
    degrees => "reg.degrees": "degree grid start:stop:step or a comma list",
});

flag_group!(MarketFlags {
    spot => "market.spot": "spot price",
    rate => "market.rate": "interest rate",
    dividend => "market.dividend": "dividend yield",
});

flag_group!(EstimateFlags {
    returns => "data.returns": "returns CSV (log_return or date,close)",
    delta => "data.delta": "observation spacing in years, e.g. 1/252",
    mean => "moments.mean": "sample mean (with --moments-only)",
    variance => "moments.variance": "sample variance",
    skew => "moments.skew": "sample skewness",
    ekurt => "moments.ekurt": "sample excess kurtosis",
    likelihood => "estimate.likelihood": "jd likelihood: bernoulli or exact",
});

flag_group!(CalibrateFlags {
    quotes => "data.quotes": "quotes CSV (strike,maturity_days,mid_price[,kind])",
    starts => "calibrate.starts": "Nelder-Mead starts per degree",
    max_iters => "calibrate.max_iters": "iteration cap per start",
    sd_tolerance => "calibrate.sd_tolerance": "simplex standard-deviation tolerance",
    init => "calibrate.init": "extra start a,b,theta",
    hold_a => "calibrate.hold_a": "hold a fixed",
    hold_b => "calibrate.hold_b": "hold b fixed",
    hold_theta => "calibrate.hold_theta": "hold theta fixed",
    timeout => "calibrate.timeout": "budget per degree in seconds",
});

flag_group!(PriceFlags {
    quotes => "data.quotes": "quotes CSV to price and compare",
    strikes => "price.strikes": "strike list or range",
    maturities => "price.maturities": "maturities in years, list or range",
});

flag_group!(SimulateFlags {
    paths => "sim.paths": "number of paths or draws",
    steps => "sim.steps": "time steps per path",
    emit => "sim.output": "draws or paths",
});

flag_group!(DensityFlags {
    x => "grid.x": "evaluation points: start:stop:step or a comma list",
    points => "grid.points": "points of the automatic grid",
    method => "density.method": "auto, marginalization or fourier",
});

flag_group!(LtFlags {
    u => "lt.u": "arguments: start:stop:step or a comma list",
    method => "lt.method": "auto, quadrature or closed_form",
});

flag_group!(KernelsFlags {
    figure => "kernels.figure": "kernels, enlargement or jumps",
    x => "grid.x": "z grid in (0,1) for the kernels figure",
    points => "grid.points": "points per curve for the jumps figure",
});

/// Options shared by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonFlags {
    /// Config file of `dotted.key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Any config key as key=value; applied after the named flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker pool width.
    #[arg(long, value_name = "N")]
    pub threads: Option<String>,
    /// Random seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<String>,
    /// What goes to stdout: csv or json.
    #[arg(long, value_name = "FORMAT")]
    pub format: Option<String>,
    /// Write the CSV table to this path.
    #[arg(long = "csv", value_name = "PATH")]
    pub csv: Option<String>,
    /// Write the JSON document to this path.
    #[arg(long = "json", value_name = "PATH")]
    pub json: Option<String>,
}

impl CommonFlags {
    fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        for (key, v) in [
            ("run.threads", &self.threads),
            ("run.seed", &self.seed),
            ("output.format", &self.format),
            ("output.csv", &self.csv),
            ("output.json", &self.json),
        ] {
            if let Some(v) = v {
                cfg.set(key, v.clone())?;
            }
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(name = "regclock", version, about = "Regulated stochastic clocks: estimation, pricing, simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Moment estimates and profile likelihoods over a degree grid.
    Estimate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        data: EstimateFlags,
        /// Use --mean/--variance/--skew/--ekurt instead of a returns file.
        #[arg(long)]
        moments_only: bool,
    },
    /// Calibrates (a, b, theta) to option quotes for each degree.
    Calibrate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        market: MarketFlags,
        #[command(flatten)]
        cal: CalibrateFlags,
    },
    /// Fourier prices of European options.
    Price {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        market: MarketFlags,
        #[command(flatten)]
        price: PriceFlags,
    },
    /// Draws of the clock or mixture, or clock paths.
    Simulate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        sim: SimulateFlags,
        /// Allow tabulated increments for c > 0 paths.
        #[arg(long)]
        allow_approx: bool,
    },
    /// Density of the clock or mixture on a grid.
    Density {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        grid: DensityFlags,
    },
    /// Log Laplace transform of the clock or mixture.
    Lt {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        lt: LtFlags,
    },
    /// Regulating kernels, moment enlargement factors and jump densities.
    Kernels {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        reg: RegFlags,
        #[command(flatten)]
        kernels: KernelsFlags,
    },
}

type Runner = fn(&RunConfig) -> CliResult<Output>;

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate { .. } => "estimate",
            Command::Calibrate { .. } => "calibrate",
            Command::Price { .. } => "price",
            Command::Simulate { .. } => "simulate",
            Command::Density { .. } => "density",
            Command::Lt { .. } => "lt",
            Command::Kernels { .. } => "kernels",
        }
    }

    /// Builds the run configuration: file first, then named flags, then --set.
    pub fn config(&self) -> CliResult<RunConfig> {
        let common = match self {
            Command::Estimate { common, .. }
            | Command::Calibrate { common, .. }
            | Command::Price { common, .. }
            | Command::Simulate { common, .. }
            | Command::Density { common, .. }
            | Command::Lt { common, .. }
            | Command::Kernels { common, .. } => common,
        };
        let mut cfg = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        common.apply(&mut cfg)?;
        match self {
            Command::Estimate { model, reg, data, moments_only, .. } => {
                model.apply(&mut cfg)?;
                reg.apply(&mut cfg)?;
                data.apply(&mut cfg)?;
                if *moments_only {
                    cfg.set("data.moments_only", "true")?;
                }
            }
            Command::Calibrate { model, reg, market, cal, .. } => {
                model.apply(&mut cfg)?;
                reg.apply(&mut cfg)?;
                market.apply(&mut cfg)?;
                cal.apply(&mut cfg)?;
            }
            Command::Price { model, reg, market, price, .. } => {
                model.apply(&mut cfg)?;
                reg.apply(&mut cfg)?;
                market.apply(&mut cfg)?;
                price.apply(&mut cfg)?;
            }
            Command::Simulate { model, reg, sim, allow_approx, .. } => {
                model.apply(&mut cfg)?;
                reg.apply(&mut cfg)?;
                sim.apply(&mut cfg)?;
                if *allow_approx {
                    cfg.set("sim.allow_approx", "true")?;
                }
            }
            Command::Density { model, reg, grid, .. } => {
                model.apply(&mut cfg)?;
                reg.apply(&mut cfg)?;
                grid.apply(&mut cfg)?;
            }
            Command::Lt { model, reg, lt, .. } => {
                model.apply(&mut cfg)?;
                reg.apply(&mut cfg)?;
                lt.apply(&mut cfg)?;
            }
            Command::Kernels { reg, kernels, .. } => {
                reg.apply(&mut cfg)?;
                kernels.apply(&mut cfg)?;
            }
        }
        for s in &common.set {
            cfg.set_assignment(s)?;
        }
        Ok(cfg)
    }

    fn runner(&self) -> Runner {
        match self {
            Command::Estimate { .. } => commands::estimate,
            Command::Calibrate { .. } => commands::calibrate,
            Command::Price { .. } => commands::price,
            Command::Simulate { .. } => commands::simulate,
            Command::Density { .. } => commands::density,
            Command::Lt { .. } => commands::lt,
            Command::Kernels { .. } => commands::kernels,
        }
    }
}

/// Pool width from run.threads, then REGCLOCK_THREADS; None leaves rayon's default.
fn threads(cfg: &RunConfig) -> CliResult<Option<usize>> {
    let raw = match cfg.get("run.threads") {
        Some(v) => Some(("run.threads", v.to_string())),
        None => std::env::var(THREADS_ENV).ok().map(|v| (THREADS_ENV, v)),
    };
    match raw {
        None => Ok(None),
        Some((src, v)) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{src}: '{v}' is not a positive integer"))),
        },
    }
}

fn write_target(path: &str, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {path}: {e}")))
}

fn emit(cfg: &RunConfig, command: &str, out: &Output, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let json_stdout = cfg.choice("output.format", &["csv", "json"], "csv")? == "json";
    let doc = round_json(json!({ "command": command, "warnings": out.warnings, "result": out.result }));
    let doc_text = serde_json::to_string_pretty(&doc).expect("JSON value serializes") + "\n";
    let csv_text = out.table.to_csv();
    let io = |e: std::io::Error| CliError::Data(format!("cannot write output: {e}"));
    for w in &out.warnings {
        writeln!(stderr, "{}", json!({ "warning": w })).map_err(io)?;
    }
    match cfg.get("output.csv") {
        Some(p) => write_target(p, &csv_text)?,
        None if !json_stdout => stdout.write_all(csv_text.as_bytes()).map_err(io)?,
        None => {}
    }
    match cfg.get("output.json") {
        Some(p) => write_target(p, &doc_text)?,
        None if json_stdout => stdout.write_all(doc_text.as_bytes()).map_err(io)?,
        None => {}
    }
    Ok(())
}

fn execute(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let cfg = cmd.config()?;
    let run = cmd.runner();
    let out = match threads(&cfg)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(|| run(&cfg))?,
        None => run(&cfg)?,
    };
    emit(&cfg, cmd.name(), &out, stdout, stderr)
}

/// Runs the CLI on `argv` and returns the process exit code. Failures are
/// reported on stderr as a JSON error document.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stdout, "{}", e.render());
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
