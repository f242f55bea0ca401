//! Subcommand implementations. Each returns a CSV table and a JSON document.

use std::path::Path;
use std::time::Duration;

use regclock::infer::{
    degree_sweep, sample_moments, JdLikelihood, JdParams, JumpDirection, ModelKind, SampleMoments, SweepConfig, TsParams,
    FitParams,
};
use regclock::invert::{clock_density_grid, mixture_density_grid, DensityGrid, DensityMethod};
use regclock::mix::MixedModel;
use num_complex::Complex64;
use regclock::price::{
    calibrate as run_calibration, price_quotes, CalibrationOptions, CalibrationResult, MarketEnv, MaturitySlice,
    OptionKind, OptionQuote, PriceDetail, PricingModel,
};
use regclock::regulate::{hold_moments_reparam, jump_law, rho, LtMethod, LtOptions, RegType, Regulation};
use regclock::simulate::{
    sim_clock_marginal, sim_mixture, sim_regulated_poisson, sim_regulated_ts_path, Approximation, SimConfig,
};
use regclock::clocks::Subordinator;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::format::{Cell, Table};
use crate::ingest::{ingest_quotes, ingest_returns};
use crate::row;

/// Result of a subcommand.
#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    pub result: Value,
    pub warnings: Vec<String>,
}

impl Output {
    fn new(table: Table, result: Value) -> Self {
        Output { table, result, warnings: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Jd,
    Ts,
}

pub fn family(cfg: &RunConfig) -> CliResult<Family> {
    Ok(match cfg.choice("model.family", &["jd", "ts"], "ts")? {
        "jd" => Family::Jd,
        _ => Family::Ts,
    })
}

/// Regulation types; `all` or a comma list.
pub fn reg_types(cfg: &RunConfig, default: &str) -> CliResult<Vec<RegType>> {
    let spec = cfg.str_or("reg.type", default);
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(RegType::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let t: RegType = part.parse().map_err(|e: regclock::error::Error| CliError::Usage(format!("reg.type: {e}")))?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// The single regulation of `reg.type` and `reg.degree`.
pub fn regulation(cfg: &RunConfig) -> CliResult<Regulation> {
    let types = reg_types(cfg, "I")?;
    if types.len() != 1 {
        return Err(CliError::Usage("this subcommand takes a single reg.type".into()));
    }
    Ok(Regulation::new(types[0], cfg.f64_or("reg.degree", 0.0)?)?)
}

fn degrees(cfg: &RunConfig, default: &str) -> CliResult<Vec<f64>> {
    Ok(cfg.grid("reg.degrees")?.unwrap_or_else(|| crate::config::parse_grid(default).expect("valid default grid")))
}

fn jd_params(cfg: &RunConfig) -> CliResult<JdParams> {
    let sigma = cfg.f64_or("model.sigma", 0.0)?;
    Ok(JdParams {
        lambda: cfg.f64_or("model.lambda", 1.0)?,
        b: cfg.f64_or("model.b", 1.0)?,
        mu: cfg.f64_or("model.mu", 0.0)?,
        sigma_sq: sigma * sigma,
        direction: match cfg.choice("model.direction", &["down", "up"], "down")? {
            "up" => JumpDirection::Up,
            _ => JumpDirection::Down,
        },
    })
}

fn ts_params(cfg: &RunConfig) -> CliResult<TsParams> {
    Ok(TsParams {
        a: cfg.f64_or("model.a", 1.0)?,
        b: cfg.f64_or("model.b", 1.0)?,
        mu: cfg.f64_or("model.mu", 0.0)?,
        theta: cfg.f64_or("model.theta", 0.0)?,
    })
}

/// The mixed model described by `model.*` and the single regulation.
pub fn mixed_model(cfg: &RunConfig) -> CliResult<MixedModel> {
    let reg = regulation(cfg)?;
    Ok(match family(cfg)? {
        Family::Jd => jd_params(cfg)?.model(reg)?,
        Family::Ts => ts_params(cfg)?.model(cfg.f64_or("model.c", 0.0)?, reg)?,
    })
}

fn horizon(cfg: &RunConfig) -> CliResult<f64> {
    let t = cfg.f64_or("model.t", 1.0)?;
    if !(t > 0.0) {
        return Err(CliError::Usage(format!("model.t must be positive, got {t}")));
    }
    Ok(t)
}

fn clock_target(cfg: &RunConfig) -> CliResult<bool> {
    Ok(cfg.choice("model.target", &["mixture", "clock"], "mixture")? == "clock")
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

pub fn estimate(cfg: &RunConfig) -> CliResult<Output> {
    let fam = family(cfg)?;
    let delta = cfg.require_f64("data.delta")?;
    let types = reg_types(cfg, "all")?;
    let degrees = degrees(cfg, "0:10:1")?;
    let (moments, sample) = if cfg.bool_or("data.moments_only", false)? {
        let m = SampleMoments::new(
            cfg.require_f64("moments.mean")?,
            cfg.require_f64("moments.variance")?,
            cfg.require_f64("moments.skew")?,
            cfg.require_f64("moments.ekurt")?,
        )?;
        (m, None)
    } else {
        let path = cfg
            .get("data.returns")
            .ok_or_else(|| CliError::Usage("estimate needs data.returns or data.moments_only = true".into()))?;
        let sample = ingest_returns(Path::new(path), delta)?;
        let m = sample_moments(&sample.values).map_err(|e| CliError::Data(e.to_string()))?;
        (m, Some(sample.values))
    };
    let model = match fam {
        Family::Jd => ModelKind::Jd,
        Family::Ts => ModelKind::Ts { c: cfg.f64_or("model.c", 0.0)? },
    };
    let jd_likelihood = match cfg.choice("estimate.likelihood", &["bernoulli", "exact"], "bernoulli")? {
        "exact" => JdLikelihood::Exact,
        _ => JdLikelihood::Bernoulli,
    };
    let sweep = SweepConfig { model, types, degrees, jd_likelihood };
    let report = degree_sweep(&moments, delta, sample.as_deref(), &sweep)?;

    let names: &[&str] = match fam {
        Family::Jd => &["lambda", "b", "mu", "sigma"],
        Family::Ts => &["a", "b", "mu", "theta"],
    };
    let mut header = vec!["type", "n"];
    header.extend_from_slice(names);
    header.extend_from_slice(&["pll", "star_type", "star_overall", "error"]);
    let mut table = Table::new(&header);
    let mut warnings = Vec::new();
    for r in &report.rows {
        let params: [Option<f64>; 4] = match r.params {
            Some(FitParams::Jd(p)) => [Some(p.lambda), Some(p.b), Some(p.mu), Some(p.sigma())],
            Some(FitParams::Ts(p)) => [Some(p.a), Some(p.b), Some(p.mu), Some(p.theta)],
            None => [None; 4],
        };
        let mut cells = row![r.rtype.label(), r.n];
        cells.extend(params.iter().map(|&p| Cell::from(p)));
        cells.extend(row![r.pll, r.best_in_type, r.best_overall, r.error.clone().unwrap_or_default()]);
        table.push(cells);
        warnings.extend(r.warnings.iter().map(|w| format!("type {} n={}: {w}", r.rtype.label(), r.n)));
    }
    let mut out = Output::new(table, to_json(&report));
    out.warnings = warnings;
    Ok(out)
}

fn market(cfg: &RunConfig) -> CliResult<MarketEnv> {
    Ok(MarketEnv::new(
        cfg.require_f64("market.spot")?,
        cfg.f64_or("market.rate", 0.0)?,
        cfg.f64_or("market.dividend", 0.0)?,
    )?)
}

fn quotes(cfg: &RunConfig, env: &MarketEnv) -> CliResult<(Vec<OptionQuote>, Vec<String>)> {
    let path = cfg.get("data.quotes").ok_or_else(|| CliError::Usage("missing required setting data.quotes".into()))?;
    let (quotes, mut warnings) = ingest_quotes(Path::new(path))?;
    for q in &quotes {
        if q.mid_price >= env.spot {
            warnings.push(format!(
                "quote K={} T={} has price {} at or above spot {}",
                q.strike, q.maturity, q.mid_price, env.spot
            ));
        }
    }
    Ok((quotes, warnings))
}

pub fn calibrate(cfg: &RunConfig) -> CliResult<Output> {
    let env = market(cfg)?;
    let (quotes, warnings) = quotes(cfg, &env)?;
    let c = cfg.f64_or("model.c", 0.0)?;
    let types = reg_types(cfg, "all")?;
    let degrees = degrees(cfg, "0:10:1")?;
    let init = match cfg.grid("calibrate.init")? {
        None => None,
        Some(v) if v.len() == 3 => Some([v[0], v[1], v[2]]),
        Some(_) => return Err(CliError::Usage("calibrate.init needs three values a,b,theta".into())),
    };
    let defaults = CalibrationOptions::default();
    let opts = CalibrationOptions {
        starts: cfg.usize_or("calibrate.starts", defaults.starts)?,
        max_iters: cfg.u64_or("calibrate.max_iters", defaults.max_iters)?,
        sd_tolerance: cfg.f64_or("calibrate.sd_tolerance", defaults.sd_tolerance)?,
        init,
        hold: [cfg.f64("calibrate.hold_a")?, cfg.f64("calibrate.hold_b")?, cfg.f64("calibrate.hold_theta")?],
        budget: cfg.f64("calibrate.timeout")?.map(Duration::from_secs_f64),
    };
    let mut results: Vec<CalibrationResult> = Vec::new();
    let mut per_type = Vec::new();
    for rtype in types {
        let report = run_calibration(&quotes, &env, c, rtype, &degrees, &opts)?;
        per_type.push(json!({ "type": rtype, "best": report.best }));
        results.extend(report.results);
    }
    let best_overall = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.params.is_some() && r.mape.is_finite())
        .min_by(|a, b| a.1.mape.total_cmp(&b.1.mape))
        .map(|(i, _)| i);
    let mut table = Table::new(&[
        "type", "n", "a", "b", "theta", "mape", "iterations", "converged", "wall_seconds", "budget_exceeded", "star_type",
        "star_overall", "error",
    ]);
    for (i, r) in results.iter().enumerate() {
        let p = r.params;
        table.push(row![
            r.rtype.label(),
            r.n,
            p.map(|p| p.a),
            p.map(|p| p.b),
            p.map(|p| p.theta),
            Some(r.mape).filter(|m| m.is_finite()),
            r.iterations,
            r.converged,
            r.wall_seconds,
            r.budget_exceeded,
            r.best,
            Some(i) == best_overall,
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let best = best_overall.map(|i| json!({ "type": results[i].rtype, "n": results[i].n }));
    let result = json!({ "c": c, "quotes": quotes.len(), "results": to_json(&results), "best_per_type": per_type, "best_overall": best });
    let mut out = Output::new(table, result);
    out.warnings = warnings;
    Ok(out)
}

fn pricing_model(cfg: &RunConfig) -> CliResult<PricingModel> {
    if family(cfg)? != Family::Ts {
        return Err(CliError::Usage("pricing uses model.family = ts".into()));
    }
    let p = ts_params(cfg)?;
    Ok(PricingModel::new(p.a, p.b, cfg.f64_or("model.c", 0.0)?, p.theta, regulation(cfg)?)?)
}

fn kind_label(k: OptionKind) -> &'static str {
    match k {
        OptionKind::Call => "call",
        OptionKind::Put => "put",
    }
}

pub fn price(cfg: &RunConfig) -> CliResult<Output> {
    let env = market(cfg)?;
    let model = pricing_model(cfg)?;
    let mut warnings = Vec::new();
    let (quotes, details, observed): (Vec<OptionQuote>, Vec<PriceDetail>, bool) = if cfg.has("data.quotes") {
        let (q, w) = quotes(cfg, &env)?;
        warnings.extend(w);
        let d = price_quotes(&model, &env, &q)?;
        (q, d, true)
    } else {
        let strikes = cfg.grid("price.strikes")?.ok_or_else(|| CliError::Usage("price needs data.quotes or price.strikes".into()))?;
        let maturities =
            cfg.grid("price.maturities")?.ok_or_else(|| CliError::Usage("price needs price.maturities with price.strikes".into()))?;
        let mut q = Vec::new();
        let mut d = Vec::new();
        for &t in &maturities {
            let slice = MaturitySlice::new(&model, &env, t, &strikes)?;
            for &k in &strikes {
                q.push(OptionQuote { strike: k, maturity: t, mid_price: f64::NAN, kind: OptionKind::Call });
                d.push(slice.price(k));
            }
        }
        (q, d, false)
    };
    let mut table = Table::new(&["strike", "maturity", "kind", "price", "call", "put", "bound_violation", "mid_price", "abs_pct_error"]);
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (q, d) in quotes.iter().zip(&details) {
        let price = match q.kind {
            OptionKind::Call => d.call,
            OptionKind::Put => d.put,
        };
        if d.bound_violation > 0.0 {
            warnings.push(format!("K={} T={}: Fourier price left the no-arbitrage bounds by {:e}", q.strike, q.maturity, d.bound_violation));
        }
        let err = observed.then(|| (price - q.mid_price).abs() / q.mid_price);
        errors.extend(err);
        table.push(row![
            q.strike,
            q.maturity,
            kind_label(q.kind),
            price,
            d.call,
            d.put,
            d.bound_violation,
            observed.then_some(q.mid_price),
            err,
        ]);
        rows.push(json!({
            "strike": q.strike, "maturity": q.maturity, "kind": kind_label(q.kind), "price": price,
            "call": d.call, "put": d.put, "bound_violation": d.bound_violation,
            "mid_price": if observed { json!(q.mid_price) } else { Value::Null },
        }));
    }
    let mape = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    let mut out = Output::new(table, json!({ "rows": rows, "mape": mape }));
    out.warnings = warnings;
    Ok(out)
}

pub fn simulate(cfg: &RunConfig) -> CliResult<Output> {
    let model = mixed_model(cfg)?;
    let t = horizon(cfg)?;
    let sim = SimConfig::new(
        cfg.u64_or("run.seed", 0)?,
        cfg.usize_or("sim.paths", 10_000)?,
        cfg.usize_or("sim.steps", 100)?,
        t,
    )?;
    let on_clock = clock_target(cfg)?;
    match cfg.choice("sim.output", &["draws", "paths"], "draws")? {
        "draws" => {
            let (draws, theory) = if on_clock {
                (sim_clock_marginal(&model.clock, t, &sim)?, model.clock.cumulants(t)?)
            } else {
                (sim_mixture(&model, &sim)?, model.cumulants(t)?)
            };
            let mut table = Table::new(&["path", "value"]);
            for (i, v) in draws.iter().enumerate() {
                table.push(row![i, *v]);
            }
            let n = draws.len() as f64;
            let mean = draws.iter().sum::<f64>() / n;
            let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let result = json!({
                "target": if on_clock { "clock" } else { "mixture" }, "horizon": t, "seed": sim.seed, "draws": draws.len(),
                "sample_mean": mean, "sample_variance": var, "mean": theory.mean(), "variance": theory.variance(),
            });
            Ok(Output::new(table, result))
        }
        _ => {
            if !on_clock {
                return Err(CliError::Usage("paths are emitted for the clock; set model.target = clock".into()));
            }
            let reg = model.clock.reg;
            let (times, values) = match model.clock.base {
                Subordinator::Poisson { lambda } => {
                    let times = sim.grid();
                    let paths = sim_regulated_poisson(lambda, &reg, &sim)?;
                    let values = paths.iter().map(|p| p.values_at(&reg, &times)).collect::<Result<Vec<_>, _>>()?;
                    (times, values)
                }
                base => {
                    let approx = if cfg.bool_or("sim.allow_approx", false)? { Approximation::Allow } else { Approximation::Refuse };
                    let p = sim_regulated_ts_path(&base, &reg, &sim, approx)?;
                    (p.times, p.values)
                }
            };
            let mut table = Table::new(&["path", "time", "value"]);
            for (i, path) in values.iter().enumerate() {
                for (s, v) in times.iter().zip(path) {
                    table.push(row![i, *s, *v]);
                }
            }
            let terminal_mean = values.iter().filter_map(|p| p.last()).sum::<f64>() / values.len().max(1) as f64;
            let result = json!({
                "target": "clock", "horizon": t, "seed": sim.seed, "paths": values.len(), "steps": sim.grid_steps,
                "terminal_mean": terminal_mean, "mean": model.clock.cumulants(t)?.mean(),
            });
            Ok(Output::new(table, result))
        }
    }
}

/// Default evaluation grid: mean ± 10 standard deviations, clipped at 0 for clocks.
fn auto_grid(mean: f64, sd: f64, points: usize, positive: bool) -> Vec<f64> {
    let points = points.max(2);
    let (lo, hi) = (mean - 10.0 * sd, mean + 10.0 * sd);
    if positive && lo <= 0.0 {
        // cell midpoints keep x = 0 out of the grid
        return (0..points).map(|i| hi * (i as f64 + 0.5) / points as f64).collect();
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

pub fn density(cfg: &RunConfig) -> CliResult<Output> {
    let model = mixed_model(cfg)?;
    let t = horizon(cfg)?;
    let on_clock = clock_target(cfg)?;
    let points = cfg.usize_or("grid.points", 801)?;
    let grid: DensityGrid = if on_clock {
        let c = model.clock.cumulants(t)?;
        let x = cfg.grid("grid.x")?.unwrap_or_else(|| auto_grid(c.mean(), c.variance().sqrt(), points, true));
        clock_density_grid(&model.clock, t, x)?
    } else {
        let c = model.cumulants(t)?;
        let x = cfg.grid("grid.x")?.unwrap_or_else(|| auto_grid(c.mean(), c.variance().sqrt(), points, false));
        let method = match cfg.choice("density.method", &["auto", "marginalization", "fourier"], "auto")? {
            "marginalization" => DensityMethod::Marginalization,
            "fourier" => DensityMethod::Fourier,
            _ => DensityMethod::Auto,
        };
        mixture_density_grid(&model, t, x, method)?
    };
    let mut warnings = Vec::new();
    if grid.noise_warning() {
        warnings.push(format!("negative density values down to {:e} were clipped to 0", grid.clipped));
    }
    if (grid.mass_check - 1.0).abs() > 1e-3 && !cfg.has("grid.x") {
        warnings.push(format!("trapezoid mass {} differs from 1; the grid may miss part of the support", grid.mass_check));
    }
    let mut table = Table::new(&["x", "density"]);
    for (x, v) in grid.points.iter().zip(&grid.values) {
        table.push(row![*x, *v]);
    }
    let result = json!({
        "target": if on_clock { "clock" } else { "mixture" }, "horizon": t, "points": grid.points.len(),
        "mass_check": grid.mass_check, "clipped": grid.clipped,
    });
    let mut out = Output::new(table, result);
    out.warnings = warnings;
    Ok(out)
}

pub fn lt(cfg: &RunConfig) -> CliResult<Output> {
    let model = mixed_model(cfg)?;
    let t = horizon(cfg)?;
    let on_clock = clock_target(cfg)?;
    let us = cfg.grid("lt.u")?.unwrap_or_else(|| vec![0.0]);
    let method = match cfg.choice("lt.method", &["auto", "quadrature", "closed_form"], "auto")? {
        "quadrature" => LtMethod::Quadrature,
        "closed_form" => LtMethod::ClosedForm,
        _ => LtMethod::Auto,
    };
    let opts = LtOptions { method, ..LtOptions::default() };
    let mut table = Table::new(&["u", "log_lt"]);
    let mut values = Vec::new();
    for &u in &us {
        let z = Complex64::new(u, 0.0);
        let v = if on_clock { model.clock.laplace_exponent_with(t, z, opts)? } else { model.log_lt_with(t, z, opts)? };
        table.push(row![u, v.re]);
        values.push(json!({ "u": u, "log_lt": v.re }));
    }
    Ok(Output::new(table, json!({ "target": if on_clock { "clock" } else { "mixture" }, "horizon": t, "values": values })))
}

pub fn kernels(cfg: &RunConfig) -> CliResult<Output> {
    let types = reg_types(cfg, "all")?;
    match cfg.choice("kernels.figure", &["kernels", "enlargement", "jumps"], "kernels")? {
        "enlargement" => {
            let mut table = Table::new(&["type", "n", "skew_factor", "ekurt_factor"]);
            for &rtype in &types {
                for n in degrees(cfg, "0.05:5:0.05")? {
                    let h = hold_moments_reparam(1.0, 1.0, 0.0, &Regulation::new(rtype, n)?)?;
                    table.push(row![rtype.label(), n, h.skew_factor, h.ekurt_factor]);
                }
            }
            Ok(Output::new(table, json!({ "figure": "enlargement" })))
        }
        "jumps" => {
            // jump magnitudes J/b_n with b_n = √E[J²], so the jump variance is 1 for every n
            let points = cfg.usize_or("grid.points", 200)?.max(1);
            let mut table = Table::new(&["type", "n", "x", "density"]);
            for &rtype in &types {
                for n in positive_degrees(cfg)? {
                    let reg = Regulation::new(rtype, n)?;
                    let bn = rho(rtype, 2, n)?.sqrt();
                    let x_max = reg.max_jump() / bn;
                    for i in 0..points {
                        let x = x_max * (i as f64 + 0.5) / points as f64;
                        table.push(row![rtype.label(), n, x, bn * jump_law(&reg, bn * x)?.density]);
                    }
                }
            }
            Ok(Output::new(table, json!({ "figure": "jumps" })))
        }
        _ => {
            // kernels on z ∈ (0,1) with the jump support rescaled to (0,1)
            let zs = cfg.grid("grid.x")?.unwrap_or_else(|| crate::config::parse_grid("0.01:0.99:0.01").expect("valid default grid"));
            if zs.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
                return Err(CliError::Usage("kernel grid points must lie in (0, 1)".into()));
            }
            let mut table = Table::new(&["type", "n", "z", "kernel", "integrated"]);
            for &rtype in &types {
                for n in positive_degrees(cfg)? {
                    let reg = Regulation::new(rtype, n)?;
                    let scale = reg.max_jump();
                    for &z in &zs {
                        let law = jump_law(&reg, z * scale)?;
                        table.push(row![rtype.label(), n, z, scale * law.density, law.survival]);
                    }
                }
            }
            Ok(Output::new(table, json!({ "figure": "kernels" })))
        }
    }
}

fn positive_degrees(cfg: &RunConfig) -> CliResult<Vec<f64>> {
    let d = degrees(cfg, "1:5:1")?;
    if d.iter().any(|&n| !(n > 0.0)) {
        return Err(CliError::Usage("kernel and jump figures need degrees n > 0".into()));
    }
    Ok(d)
}
