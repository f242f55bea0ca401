//! Samplers for regulated clocks and their mixtures.
//!
//! Every path draws from its own ChaCha8 stream: the generator is seeded
//! with `SimConfig::seed` and switched to stream `i` for path `i`, so output
//! does not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Open01, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clocks::Subordinator;
use crate::error::{Error, Result};
use crate::invert::ClockDensity;
use crate::mix::{MixedModel, MixtureSpec};
use crate::regulate::{jump_transform, RegType, RegulatedClock, Regulation};
use crate::specfun::{gamma, p_reg};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub grid_steps: usize,
    pub horizon: f64,
}

impl SimConfig {
    pub fn new(seed: u64, n_paths: usize, grid_steps: usize, horizon: f64) -> Result<Self> {
        if n_paths == 0 || grid_steps == 0 {
            return Err(Error::domain("n_paths and grid_steps must be positive"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(SimConfig { seed, n_paths, grid_steps, horizon })
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.grid_steps).map(|j| self.horizon * j as f64 / self.grid_steps as f64).collect()
    }
}

/// The generator for path `index`.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn per_path<T: Send>(cfg: &SimConfig, f: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    (0..cfg.n_paths).into_par_iter().map(|i| f(&mut path_rng(cfg.seed, i))).collect()
}

fn uniform(rng: &mut impl Rng) -> f64 {
    Open01.sample(rng)
}

/// Jumps of a regulated Poisson clock on [0, horizon]; amplitudes are the
/// jump contributions at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonPath {
    pub jump_times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl PoissonPath {
    pub fn terminal(&self) -> f64 {
        self.amplitudes.iter().sum()
    }

    /// Clock values at `times` for the pathwise types I and III.
    pub fn values_at(&self, reg: &Regulation, times: &[f64]) -> Result<Vec<f64>> {
        if reg.rtype == RegType::TypeII && !reg.is_identity() {
            return Err(Error::Unsupported("type-II regulation has no pathwise representation".into()));
        }
        times
            .iter()
            .map(|&t| {
                self.jump_times
                    .iter()
                    .filter(|&&s| s < t)
                    .map(|&s| if reg.is_identity() { Ok(1.0) } else { jump_transform(reg, s / t) })
                    .sum()
            })
            .collect()
    }
}

/// Exact sampler for the Poisson(λ) clock regulated by `reg`. A jump at time
/// s contributes J(s/T) at the horizon T for types I and III; type-II
/// amplitudes use an independent uniform.
pub fn sim_regulated_poisson(lambda: f64, reg: &Regulation, cfg: &SimConfig) -> Result<Vec<PoissonPath>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("Poisson intensity must be >= 0, got {lambda}")));
    }
    let mean = lambda * cfg.horizon;
    let count = if mean > 0.0 { Some(Poisson::new(mean).map_err(|e| Error::domain(e.to_string()))?) } else { None };
    per_path(cfg, |rng| {
        let n = count.as_ref().map_or(0, |d| d.sample(rng) as usize);
        let mut jump_times = Vec::with_capacity(n);
        let mut amplitudes = Vec::with_capacity(n);
        for _ in 0..n {
            let u = uniform(rng);
            jump_times.push(u * cfg.horizon);
            let v = if reg.rtype == RegType::TypeII { uniform(rng) } else { u };
            amplitudes.push(jump_transform(reg, v).expect("uniform lies in (0,1)"));
        }
        PoissonPath { jump_times, amplitudes }
    })
    .into_iter()
    .map(Ok)
    .collect()
}

/// Grid paths of a regulated clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Opt-in for samplers whose error is controlled only by tabulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Approximation {
    #[default]
    Refuse,
    Allow,
}

/// Mean of the regulating kernel over the cell [s0, s1] at time t.
fn cell_weight(reg: &Regulation, t: f64, s0: f64, s1: f64) -> f64 {
    let n = reg.degree;
    if n == 0.0 {
        return 1.0;
    }
    let width = s1 - s0;
    match reg.rtype {
        RegType::TypeI => {
            // ∫ e^{−y}P(n,y)dy = −e^{−y}P(n,y) + 2^{−n}P(n,2y) with s = t·e^{−y}
            let primitive = |y: f64| {
                if y.is_infinite() {
                    2f64.powf(-n)
                } else {
                    -(-y).exp() * p_reg(n, y) + 2f64.powf(-n) * p_reg(n, 2.0 * y)
                }
            };
            let y_near = (t / s1).ln();
            let y_far = if s0 > 0.0 { (t / s0).ln() } else { f64::INFINITY };
            t * (primitive(y_far) - primitive(y_near)) / width
        }
        RegType::TypeIII => {
            let tail = |s: f64| (1.0 - s / t).max(0.0).powf(n + 1.0);
            t * (tail(s0) - tail(s1)) / ((n + 1.0) * gamma(n + 1.0) * width)
        }
        RegType::TypeII => unreachable!("type II has no kernel"),
    }
}

/// Draws one increment of the unregulated clock over a grid step.
enum IncrementSampler {
    Gamma(Gamma<f64>),
    Tabulated(CdfTable),
}

impl IncrementSampler {
    fn new(spec: &Subordinator, step: f64, approx: Approximation) -> Result<Self> {
        let Subordinator::TemperedStable { a, b, c } = *spec else {
            return Err(Error::domain("grid paths need a tempered stable clock; use sim_regulated_poisson"));
        };
        if c == 0.0 {
            return Gamma::new(a * step, 1.0 / b)
                .map(IncrementSampler::Gamma)
                .map_err(|e| Error::domain(e.to_string()));
        }
        if approx == Approximation::Refuse {
            return Err(Error::Unsupported(format!(
                "tempered stable increments with c = {c} are sampled approximately; opt in to the approximation"
            )));
        }
        let clock = RegulatedClock::new(*spec, Regulation::none())?;
        CdfTable::for_clock(&clock, step, CDF_TOLERANCE).map(IncrementSampler::Tabulated)
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            IncrementSampler::Gamma(g) => g.sample(rng),
            IncrementSampler::Tabulated(table) => table.quantile(uniform(rng)),
        }
    }
}

fn check_pathwise(reg: &Regulation) -> Result<()> {
    if reg.rtype == RegType::TypeII && !reg.is_identity() {
        return Err(Error::Unsupported(
            "type-II regulation has no pathwise representation; use sim_type2_marginal".into(),
        ));
    }
    Ok(())
}

/// Regulated tempered stable paths on the grid of `cfg`: base increments are
/// weighted by the cell-averaged regulating kernel.
pub fn sim_regulated_ts_path(spec: &Subordinator, reg: &Regulation, cfg: &SimConfig, approx: Approximation) -> Result<Paths> {
    check_pathwise(reg)?;
    let times = cfg.grid();
    let step = cfg.horizon / cfg.grid_steps as f64;
    let sampler = IncrementSampler::new(spec, step, approx)?;
    // weights[j][k]: cell k+1 seen from time t_{j+1}
    let weights: Vec<Vec<f64>> = (1..=cfg.grid_steps)
        .map(|j| (0..j).map(|k| cell_weight(reg, times[j], times[k], times[k + 1])).collect())
        .collect();
    let values = per_path(cfg, |rng| {
        let increments: Vec<f64> = (0..cfg.grid_steps).map(|_| sampler.sample(rng)).collect();
        let mut path = Vec::with_capacity(cfg.grid_steps + 1);
        path.push(0.0);
        path.extend(weights.iter().map(|w| w.iter().zip(&increments).map(|(w, x)| w * x).sum::<f64>()));
        path
    });
    Ok(Paths { times, values })
}

/// Cell-averaged kernel weights at the horizon for `steps` equal cells:
/// the terminal value of a regulated path is Σ w_k ΔX_k.
pub fn kernel_weights(reg: &Regulation, horizon: f64, steps: usize) -> Result<Vec<f64>> {
    check_pathwise(reg)?;
    let h = horizon / steps as f64;
    Ok((0..steps).map(|k| cell_weight(reg, horizon, k as f64 * h, (k + 1) as f64 * h)).collect())
}

/// Terminal values of the paths of `sim_regulated_ts_path` without the
/// intermediate grid.
pub fn sim_regulated_ts_terminal(
    spec: &Subordinator,
    reg: &Regulation,
    cfg: &SimConfig,
    approx: Approximation,
) -> Result<Vec<f64>> {
    let weights = kernel_weights(reg, cfg.horizon, cfg.grid_steps)?;
    let sampler = IncrementSampler::new(spec, cfg.horizon / cfg.grid_steps as f64, approx)?;
    Ok(per_path(cfg, |rng| weights.iter().map(|w| w * sampler.sample(rng)).sum()))
}

/// Maximum error of the tabulated CDF used for inverse-CDF sampling.
pub const CDF_TOLERANCE: f64 = 1e-6;

const MAX_TABLE_POINTS: usize = 200_000;

/// A monotone CDF on a log-spaced grid, linear in log x between nodes and
/// extended below the first node by a power law.
#[derive(Debug, Clone)]
pub struct CdfTable {
    ln_x: Vec<f64>,
    cdf: Vec<f64>,
    lower_exponent: f64,
}

impl CdfTable {
    /// Tabulates the clock's marginal CDF at time t to within `tol`.
    pub fn for_clock(clock: &RegulatedClock, t: f64, tol: f64) -> Result<Self> {
        let cum = clock.cumulants(t)?;
        let (mean, sd) = (cum.mean(), cum.variance().sqrt());
        let mut hi = mean + 10.0 * sd;
        let lo = mean * 1e-8;
        let mut density = ClockDensity::new(clock, t, lo, hi)?;
        while 1.0 - density.cdf(hi) > tol * 1e-2 {
            hi += 10.0 * sd;
            if hi > mean + 1e3 * sd {
                return Err(Error::numerical("cdf tabulation", format!("upper tail above {tol} at {hi}")));
            }
            density = ClockDensity::new(clock, t, lo, hi)?;
        }
        Self::tabulate(|x| density.cdf(x), lo, hi, tol)
    }

    /// Adaptive tabulation of `cdf` on [lo, hi] until the interpolant meets
    /// `tol` at every interval midpoint.
    pub fn tabulate(cdf: impl Fn(f64) -> f64 + Sync, lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::domain(format!("cdf table needs 0 < lo < hi, got [{lo}, {hi}]")));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let mut nodes: Vec<(f64, f64)> =
            (0..=64).map(|i| a + (b - a) * i as f64 / 64.0).map(|y| (y, cdf(y.exp()))).collect();
        loop {
            let mids: Vec<(usize, f64, f64)> = nodes
                .par_windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    let y = 0.5 * (w[0].0 + w[1].0);
                    let f = cdf(y.exp());
                    ((f - 0.5 * (w[0].1 + w[1].1)).abs() > tol).then_some((i, y, f))
                })
                .collect();
            if mids.is_empty() {
                break;
            }
            if nodes.len() + mids.len() > MAX_TABLE_POINTS {
                return Err(Error::numerical("cdf tabulation", format!("more than {MAX_TABLE_POINTS} nodes needed")));
            }
            let mut next = Vec::with_capacity(nodes.len() + mids.len());
            let mut m = mids.iter().peekable();
            for (i, node) in nodes.iter().enumerate() {
                next.push(*node);
                if let Some(&(_, y, f)) = m.next_if(|(k, _, _)| *k == i) {
                    next.push((y, f));
                }
            }
            nodes = next;
        }
        let mut running = 0.0f64;
        let (ln_x, cdf): (Vec<f64>, Vec<f64>) = nodes
            .into_iter()
            .map(|(y, f)| {
                running = running.max(f.clamp(0.0, 1.0));
                (y, running)
            })
            .unzip();
        let lower_exponent = match (cdf[0] > 0.0, cdf[1] > cdf[0]) {
            (true, true) => (cdf[1] / cdf[0]).ln() / (ln_x[1] - ln_x[0]),
            _ => 1.0,
        };
        Ok(CdfTable { ln_x, cdf, lower_exponent })
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let first = self.cdf[0];
        if u <= first {
            if first <= 0.0 {
                return self.ln_x[0].exp();
            }
            return (self.ln_x[0] + (u / first).ln() / self.lower_exponent).exp();
        }
        let last = self.cdf.len() - 1;
        if u >= self.cdf[last] {
            return self.ln_x[last].exp();
        }
        let k = self.cdf.partition_point(|&f| f < u);
        let (f0, f1) = (self.cdf[k - 1], self.cdf[k]);
        let (y0, y1) = (self.ln_x[k - 1], self.ln_x[k]);
        let w = if f1 > f0 { (u - f0) / (f1 - f0) } else { 0.0 };
        (y0 + w * (y1 - y0)).exp()
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }
}

/// Draws the marginal of any regulated clock at one time.
#[derive(Debug, Clone)]
pub enum ClockSampler {
    Compound { count: Option<Poisson<f64>>, reg: Regulation },
    Gamma(Gamma<f64>),
    Tabulated(CdfTable),
}

impl ClockSampler {
    /// Poisson clocks and unregulated gamma clocks are sampled exactly;
    /// tempered stable clocks otherwise by inverse CDF.
    pub fn new(clock: &RegulatedClock, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("time must be positive, got {t}")));
        }
        match clock.base {
            Subordinator::Poisson { lambda } => Ok(ClockSampler::Compound {
                count: Some(Poisson::new(lambda * t).map_err(|e| Error::domain(e.to_string()))?),
                reg: clock.reg,
            }),
            Subordinator::TemperedStable { a, b, c } if c == 0.0 && clock.reg.is_identity() => {
                Gamma::new(a * t, 1.0 / b).map(ClockSampler::Gamma).map_err(|e| Error::domain(e.to_string()))
            }
            Subordinator::TemperedStable { .. } => CdfTable::for_clock(clock, t, CDF_TOLERANCE).map(ClockSampler::Tabulated),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ClockSampler::Compound { count, reg } => {
                let n = count.as_ref().map_or(0, |d| d.sample(rng) as usize);
                (0..n).map(|_| jump_transform(reg, uniform(rng)).expect("uniform lies in (0,1)")).sum()
            }
            ClockSampler::Gamma(g) => g.sample(rng),
            ClockSampler::Tabulated(table) => table.quantile(uniform(rng)),
        }
    }
}

/// Draws of the type-II regulated clock of degree n at time t.
pub fn sim_type2_marginal(spec: &Subordinator, n: f64, t: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    let clock = RegulatedClock::new(*spec, Regulation::new(RegType::TypeII, n)?)?;
    sim_clock_marginal(&clock, t, cfg)
}

pub fn sim_clock_marginal(clock: &RegulatedClock, t: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    let sampler = ClockSampler::new(clock, t)?;
    Ok(per_path(cfg, |rng| sampler.sample(rng)))
}

/// Draws of the mixture at the horizon of `cfg`: μt + θτ + √τZ for the
/// Gaussian mixture and μt + κ₁τ₁ − κ₂τ₂ + σW_t for the constant mixture.
pub fn sim_mixture(model: &MixedModel, cfg: &SimConfig) -> Result<Vec<f64>> {
    let t = cfg.horizon;
    let sampler = ClockSampler::new(&model.clock, t)?;
    Ok(match model.mix {
        MixtureSpec::Gaussian { mu, theta } => per_path(cfg, |rng| {
            let tau = sampler.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            mu * t + theta * tau + tau.sqrt() * z
        }),
        MixtureSpec::Constant { mu, kappa1, kappa2, sigma } => per_path(cfg, |rng| {
            let up = if kappa1 > 0.0 { kappa1 * sampler.sample(rng) } else { 0.0 };
            let down = if kappa2 > 0.0 { kappa2 * sampler.sample(rng) } else { 0.0 };
            let z: f64 = StandardNormal.sample(rng);
            mu * t + up - down + sigma * t.sqrt() * z
        }),
    })
}

pub fn sim_gaussian_mixture(mu: f64, theta: f64, clock: &RegulatedClock, cfg: &SimConfig) -> Result<Vec<f64>> {
    sim_mixture(&MixedModel::new(MixtureSpec::Gaussian { mu, theta }, *clock)?, cfg)
}
