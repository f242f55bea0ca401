//! European option pricing under the mean-corrected Gaussian-mixed tempered
//! stable model with a type-II or type-III regulated clock, and calibration of
//! (a, b, θ) to option quotes by minimizing the mean absolute percentage
//! error.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clocks::Subordinator;
use crate::error::{Error, Result};
use crate::invert::FourierTable;
use crate::mix::{MixedModel, MixtureSpec};
use crate::regulate::{RegType, RegulatedClock, Regulation};

/// Spot, continuously compounded rate and dividend yield.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketEnv {
    pub spot: f64,
    pub rate: f64,
    pub dividend: f64,
}

impl MarketEnv {
    pub fn new(spot: f64, rate: f64, dividend: f64) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(Error::domain(format!("spot must be positive, got {spot}")));
        }
        if !(rate >= 0.0 && dividend >= 0.0) {
            return Err(Error::domain("rate and dividend yield must be nonnegative"));
        }
        Ok(MarketEnv { spot, rate, dividend })
    }

    pub fn ln_forward(&self, maturity: f64) -> f64 {
        self.spot.ln() + (self.rate - self.dividend) * maturity
    }

    fn discounted_spot(&self, maturity: f64) -> f64 {
        self.spot * (-self.dividend * maturity).exp()
    }

    fn discount(&self, maturity: f64) -> f64 {
        (-self.rate * maturity).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    #[default]
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    /// Years.
    pub maturity: f64,
    pub mid_price: f64,
    pub kind: OptionKind,
}

/// The risk-neutral model: Gaussian mixture with drift θ on a regulated
/// tempered stable clock TS{a, b, c}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub theta: f64,
    pub reg: Regulation,
}

impl PricingModel {
    pub fn new(a: f64, b: f64, c: f64, theta: f64, reg: Regulation) -> Result<Self> {
        if reg.rtype == RegType::TypeI && !reg.is_identity() {
            return Err(Error::Unsupported(
                "type-I regulated clocks are not supported for pricing (types II and III only)".into(),
            ));
        }
        if !theta.is_finite() {
            return Err(Error::domain("theta must be finite"));
        }
        Subordinator::tempered_stable(a, b, c)?;
        Ok(PricingModel { a, b, c, theta, reg })
    }

    pub fn mixed(&self) -> Result<MixedModel> {
        let clock = RegulatedClock::new(Subordinator::tempered_stable(self.a, self.b, self.c)?, self.reg)?;
        MixedModel::new(MixtureSpec::Gaussian { mu: 0.0, theta: self.theta }, clock)
    }

    /// Log of E[e^{−X_t}] for the drift-free mixture; fails when the
    /// exponential moment is infinite.
    fn ln_exp_moment(mixed: &MixedModel, t: f64) -> Result<f64> {
        mixed.log_lt(t, Complex64::new(-1.0, 0.0)).map(|v| v.re).map_err(|e| match e {
            Error::BranchCut { .. } => Error::Domain(format!(
                "exponential moment does not exist: clock argument -theta - 1/2 = {} lies on the cut",
                -mixed_theta(mixed) - 0.5
            )),
            other => other,
        })
    }
}

fn mixed_theta(m: &MixedModel) -> f64 {
    match m.mix {
        MixtureSpec::Gaussian { theta, .. } => theta,
        MixtureSpec::Constant { .. } => f64::NAN,
    }
}

/// log E[e^{−u log S_T}] under the mean-correcting measure:
/// −u·log(S₀e^{(r−q)T}/φ(−1)) + log φ(u), with φ the drift-free mixture LT.
pub fn risk_neutral_log_lt(model: &PricingModel, env: &MarketEnv, maturity: f64, u: Complex64) -> Result<Complex64> {
    let mixed = model.mixed()?;
    let shift = env.ln_forward(maturity) - PricingModel::ln_exp_moment(&mixed, maturity)?;
    Ok(-u * shift + mixed.log_lt(maturity, u)?)
}

/// In-the-money probabilities and the resulting prices at one strike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceDetail {
    pub call: f64,
    pub put: f64,
    /// Share-measure probability of finishing in the money.
    pub q1: f64,
    /// Risk-neutral probability of finishing in the money.
    pub q2: f64,
    /// Distance by which the raw call value left the no-arbitrage bounds.
    pub bound_violation: f64,
}

/// Characteristic functions of log S_T under the pricing and share measures,
/// tabulated for one maturity and a range of strikes.
#[derive(Debug, Clone)]
pub struct MaturitySlice {
    pub maturity: f64,
    env: MarketEnv,
    risk_neutral: FourierTable,
    share: FourierTable,
}

impl MaturitySlice {
    /// `strikes` fixes the log-moneyness span the tables must resolve.
    pub fn new(model: &PricingModel, env: &MarketEnv, maturity: f64, strikes: &[f64]) -> Result<Self> {
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::domain(format!("maturity must be positive, got {maturity}")));
        }
        if let Some(k) = strikes.iter().find(|k| !(**k > 0.0)) {
            return Err(Error::domain(format!("strike must be positive, got {k}")));
        }
        let mixed = model.mixed()?;
        let ln_fwd = env.ln_forward(maturity);
        let shift = ln_fwd - PricingModel::ln_exp_moment(&mixed, maturity)?;
        let sd = mixed.cumulants(maturity)?.variance().sqrt();
        let span = strikes.iter().map(|k| (k.ln() - ln_fwd).abs()).fold(sd, f64::max);
        // the Gil-Pelaez integrand is Im(e^{−iωd}φ)/ω
        let negligible = |omega: f64, modulus: f64| modulus < 1e-12 * omega.max(1.0);
        let risk_neutral = FourierTable::build_until(
            |w| Ok(Complex64::new(0.0, w) * shift + mixed.log_lt(maturity, Complex64::new(0.0, -w))?),
            ln_fwd,
            sd,
            span,
            negligible,
        )?;
        let share = FourierTable::build_until(
            |w| {
                let u = Complex64::new(-1.0, -w);
                Ok(-u * shift + mixed.log_lt(maturity, u)? - ln_fwd)
            },
            ln_fwd,
            sd,
            span,
            negligible,
        )?;
        Ok(MaturitySlice { maturity, env: *env, risk_neutral, share })
    }

    pub fn price(&self, strike: f64) -> PriceDetail {
        let t = self.maturity;
        let x = strike.ln();
        let q1 = 1.0 - self.share.cdf(x);
        let q2 = 1.0 - self.risk_neutral.cdf(x);
        let spot = self.env.discounted_spot(t);
        let cash = strike * self.env.discount(t);
        let raw = spot * q1 - cash * q2;
        let lower = (spot - cash).max(0.0);
        let call = raw.clamp(lower, spot);
        PriceDetail { call, put: call - spot + cash, q1, q2, bound_violation: (raw - call).abs() }
    }
}

pub fn price_detail(model: &PricingModel, env: &MarketEnv, strike: f64, maturity: f64) -> Result<PriceDetail> {
    Ok(MaturitySlice::new(model, env, maturity, &[strike])?.price(strike))
}

pub fn call_price(model: &PricingModel, env: &MarketEnv, strike: f64, maturity: f64) -> Result<f64> {
    Ok(price_detail(model, env, strike, maturity)?.call)
}

pub fn put_price(model: &PricingModel, env: &MarketEnv, strike: f64, maturity: f64) -> Result<f64> {
    Ok(price_detail(model, env, strike, maturity)?.put)
}

/// Model prices for a set of quotes, one table pair per maturity.
pub fn price_quotes(model: &PricingModel, env: &MarketEnv, quotes: &[OptionQuote]) -> Result<Vec<PriceDetail>> {
    let mut by_maturity: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, q) in quotes.iter().enumerate() {
        by_maturity.entry(q.maturity.to_bits()).or_default().push(i);
    }
    let mut out = vec![None; quotes.len()];
    for (bits, idx) in by_maturity {
        let strikes: Vec<f64> = idx.iter().map(|&i| quotes[i].strike).collect();
        let slice = MaturitySlice::new(model, env, f64::from_bits(bits), &strikes)?;
        for &i in &idx {
            out[i] = Some(slice.price(quotes[i].strike));
        }
    }
    Ok(out.into_iter().map(|d| d.expect("every quote priced")).collect())
}

/// Mean absolute percentage error of the model against the quotes.
pub fn mape(model: &PricingModel, env: &MarketEnv, quotes: &[OptionQuote]) -> Result<f64> {
    let details = price_quotes(model, env, quotes)?;
    let total: f64 = quotes
        .iter()
        .zip(&details)
        .map(|(q, d)| {
            let model_price = match q.kind {
                OptionKind::Call => d.call,
                OptionKind::Put => d.put,
            };
            (model_price - q.mid_price).abs() / q.mid_price
        })
        .sum();
    Ok(total / quotes.len() as f64)
}

/// Optimizer bounds on (a, b, θ).
pub const A_BOUNDS: (f64, f64) = (1e-4, 1e5);
pub const B_BOUNDS: (f64, f64) = (1e-4, 1e4);
pub const THETA_BOUNDS: (f64, f64) = (-1e3, 1e3);

/// Cost assigned to infeasible or unpriceable parameter points.
const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub starts: usize,
    pub max_iters: u64,
    pub sd_tolerance: f64,
    /// Extra starting point (a, b, θ) tried before the heuristic ones.
    pub init: Option<[f64; 3]>,
    /// Parameters held fixed at the given value.
    pub hold: [Option<f64>; 3],
    /// Wall-clock budget per degree.
    pub budget: Option<Duration>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { starts: 5, max_iters: 800, sd_tolerance: 1e-10, init: None, hold: [None; 3], budget: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedParams {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub rtype: RegType,
    pub n: f64,
    pub params: Option<CalibratedParams>,
    /// Fraction, not percent.
    pub mape: f64,
    pub iterations: u64,
    pub converged: bool,
    pub wall_seconds: f64,
    pub budget_exceeded: bool,
    pub best: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub c: f64,
    pub results: Vec<CalibrationResult>,
    pub best: Option<(RegType, f64)>,
}

struct Objective<'a> {
    quotes: &'a [OptionQuote],
    env: MarketEnv,
    c: f64,
    reg: Regulation,
    hold: [Option<f64>; 3],
}

impl Objective<'_> {
    /// Maps the free coordinates (log a, log b, θ minus held ones) to (a, b, θ).
    fn unpack(&self, free: &[f64]) -> [f64; 3] {
        let mut it = free.iter();
        let mut out = [0.0; 3];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = match self.hold[i] {
                Some(v) => v,
                None => {
                    let v = *it.next().expect("one coordinate per free parameter");
                    if i < 2 { v.exp() } else { v }
                }
            };
        }
        out
    }

    fn pack(&self, p: [f64; 3]) -> Vec<f64> {
        (0..3).filter(|&i| self.hold[i].is_none()).map(|i| if i < 2 { p[i].ln() } else { p[i] }).collect()
    }

    fn evaluate(&self, p: [f64; 3]) -> f64 {
        let [a, b, theta] = p;
        let inside = (A_BOUNDS.0..=A_BOUNDS.1).contains(&a)
            && (B_BOUNDS.0..=B_BOUNDS.1).contains(&b)
            && (THETA_BOUNDS.0..=THETA_BOUNDS.1).contains(&theta);
        if !inside {
            return PENALTY;
        }
        PricingModel::new(a, b, self.c, theta, self.reg)
            .and_then(|m| mape(&m, &self.env, self.quotes))
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(PENALTY)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, free: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.evaluate(self.unpack(free)))
    }
}

/// Starting points: the clock variance per year is matched to an at-the-money
/// implied variance (Brenner–Subrahmanyam) for a spread of (b, θ).
fn heuristic_starts(quotes: &[OptionQuote], env: &MarketEnv, c: f64, reg: &Regulation, count: usize) -> Vec<[f64; 3]> {
    let atm = quotes
        .iter()
        .min_by(|x, y| {
            let dx = (x.strike / env.spot).ln().abs();
            let dy = (y.strike / env.spot).ln().abs();
            dx.total_cmp(&dy)
        })
        .expect("nonempty quotes");
    let vol = (atm.mid_price / (0.4 * env.spot * atm.maturity.sqrt())).clamp(0.05, 3.0);
    let variance = vol * vol;
    let shapes = [(10.0, -0.5), (2.0, -1.0), (50.0, 0.0), (10.0, 0.5), (200.0, -2.0), (5.0, -0.2), (100.0, 1.0)];
    shapes
        .iter()
        .cycle()
        .take(count)
        .map(|&(b, theta): &(f64, f64)| {
            // Var per year = ρ₁K₁ + θ²ρ₂K₂ with K₁ = Γ(1−c)a b^{c−1}, K₂ = (1−c)K₁/b
            let r1 = crate::regulate::rho(reg.rtype, 1, reg.degree).unwrap_or(1.0);
            let r2 = crate::regulate::rho(reg.rtype, 2, reg.degree).unwrap_or(1.0);
            let per_a = crate::specfun::gamma(1.0 - c) * b.powf(c - 1.0) * (r1 + theta * theta * r2 * (1.0 - c) / b);
            let a = (variance / per_a).clamp(A_BOUNDS.0 * 10.0, A_BOUNDS.1 / 10.0);
            [a, b, theta]
        })
        .collect()
}

fn initial_simplex(center: &[f64]) -> Vec<Vec<f64>> {
    let mut simplex = vec![center.to_vec()];
    for i in 0..center.len() {
        let mut p = center.to_vec();
        p[i] += if p[i].abs() > 1.0 { 0.2 * p[i].abs() } else { 0.2 };
        simplex.push(p);
    }
    simplex
}

fn calibrate_degree(
    quotes: &[OptionQuote],
    env: &MarketEnv,
    c: f64,
    reg: Regulation,
    opts: &CalibrationOptions,
) -> CalibrationResult {
    let clock = Instant::now();
    let objective = Objective { quotes, env: *env, c, reg, hold: opts.hold };
    let mut starts: Vec<[f64; 3]> = opts.init.into_iter().collect();
    starts.extend(heuristic_starts(quotes, env, c, &reg, opts.starts));
    let mut best: Option<(Vec<f64>, f64, u64, bool)> = None;
    let mut iterations = 0;
    let mut budget_exceeded = false;
    let mut last_error = None;
    for start in starts {
        let remaining = opts.budget.map(|b| b.saturating_sub(clock.elapsed()));
        if remaining == Some(Duration::ZERO) {
            budget_exceeded = true;
            break;
        }
        let free = objective.pack(start);
        if free.is_empty() {
            let cost = objective.evaluate(start);
            best = Some((free, cost, 0, true));
            break;
        }
        let solver = match NelderMead::new(initial_simplex(&free)).with_sd_tolerance(opts.sd_tolerance) {
            Ok(s) => s,
            Err(e) => {
                last_error = Some(e.to_string());
                continue;
            }
        };
        let mut exec = Executor::new(
            Objective { quotes, env: *env, c, reg, hold: opts.hold },
            solver,
        )
        .configure(|s| s.max_iters(opts.max_iters));
        if let Some(r) = remaining {
            exec = exec.timeout(r);
        }
        match exec.run() {
            Ok(res) => {
                let state = res.state();
                iterations += state.get_iter();
                let status = state.get_termination_status();
                let converged = matches!(status, TerminationStatus::Terminated(TerminationReason::SolverConverged));
                budget_exceeded |= matches!(status, TerminationStatus::Terminated(TerminationReason::Timeout));
                let cost = state.get_best_cost();
                if let Some(p) = state.get_best_param().cloned() {
                    if cost < PENALTY && best.as_ref().is_none_or(|b| cost < b.1) {
                        best = Some((p, cost, state.get_iter(), converged));
                    }
                }
            }
            Err(e) => last_error = Some(e.to_string()),
        }
    }
    let wall_seconds = clock.elapsed().as_secs_f64();
    match best {
        Some((free, cost, _, converged)) => {
            let [a, b, theta] = objective.unpack(&free);
            CalibrationResult {
                rtype: reg.rtype,
                n: reg.degree,
                params: Some(CalibratedParams { a, b, theta }),
                mape: cost,
                iterations,
                converged,
                wall_seconds,
                budget_exceeded,
                best: false,
                error: None,
            }
        }
        None => CalibrationResult {
            rtype: reg.rtype,
            n: reg.degree,
            params: None,
            mape: f64::NAN,
            iterations,
            converged: false,
            wall_seconds,
            budget_exceeded,
            best: false,
            error: Some(last_error.unwrap_or_else(|| "every start failed to price the quotes".into())),
        },
    }
}

/// Calibrates (a, b, θ) for each degree in the grid and flags the degree with
/// the lowest MAPE.
pub fn calibrate(
    quotes: &[OptionQuote],
    env: &MarketEnv,
    c: f64,
    rtype: RegType,
    degrees: &[f64],
    opts: &CalibrationOptions,
) -> Result<CalibrationReport> {
    if quotes.is_empty() {
        return Err(Error::domain("calibration needs at least one quote"));
    }
    if degrees.is_empty() {
        return Err(Error::domain("calibration needs at least one degree"));
    }
    for q in quotes {
        if !(q.strike > 0.0 && q.maturity > 0.0 && q.mid_price > 0.0) {
            return Err(Error::domain(format!("quote fields must be positive: {q:?}")));
        }
    }
    let regs: Vec<Regulation> = degrees.iter().map(|&n| Regulation::new(rtype, n)).collect::<Result<_>>()?;
    if rtype == RegType::TypeI && regs.iter().any(|r| !r.is_identity()) {
        return Err(Error::Unsupported("type-I regulated clocks are not supported for pricing (types II and III only)".into()));
    }
    let mut results: Vec<CalibrationResult> =
        regs.par_iter().map(|&reg| calibrate_degree(quotes, env, c, reg, opts)).collect();
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.params.is_some())
        .min_by(|x, y| x.1.mape.total_cmp(&y.1.mape))
        .map(|(i, _)| i);
    let best = best.map(|i| {
        results[i].best = true;
        (results[i].rtype, results[i].n)
    });
    Ok(CalibrationReport { c, results, best })
}
