//! Moment-based estimation of the jump–diffusion and Gaussian-mixed tempered
//! stable models, profile log-likelihoods, the degree sweep used for model
//! selection, and a Gaussian kernel density estimate.

use std::f64::consts::PI;

use rayon::prelude::*;
use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::clocks::Subordinator;
use crate::error::{Error, Result};
use crate::invert::{DensityMethod, MixtureDensity};
use crate::mix::{MixedModel, MixtureSpec};
use crate::quad::QuadOptions;
use crate::regulate::{jump_expectation, rho, RegType, RegulatedClock, Regulation};
use crate::specfun::gamma;

/// Densities below this are floored before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Log-returns observed at a fixed spacing `delta` (in years).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub values: Vec<f64>,
    pub delta: f64,
}

impl ReturnSample {
    pub fn new(values: Vec<f64>, delta: f64) -> Result<Self> {
        if values.len() < 8 {
            return Err(Error::domain(format!("need at least 8 returns, got {}", values.len())));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("observation spacing must be positive, got {delta}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("return {i} is not finite")));
        }
        Ok(ReturnSample { values, delta })
    }
}

/// Mean, variance, skewness and excess kurtosis with 1/N normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub ekurt: f64,
}

impl SampleMoments {
    pub fn new(mean: f64, variance: f64, skewness: f64, ekurt: f64) -> Result<Self> {
        if !(variance > 0.0) || ![mean, variance, skewness, ekurt].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("moments must be finite with positive variance"));
        }
        if ekurt < skewness * skewness - 2.0 - 1e-12 {
            return Err(Error::domain(format!(
                "excess kurtosis {ekurt} below skewness^2 - 2 = {}: no distribution has these moments",
                skewness * skewness - 2.0
            )));
        }
        Ok(SampleMoments { mean, variance, skewness, ekurt })
    }
}

pub fn sample_moments(values: &[f64]) -> Result<SampleMoments> {
    if values.len() < 2 {
        return Err(Error::domain("sample moments need at least two values"));
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / count, m3 / count, m4 / count);
    if !(m2 > 0.0) {
        return Err(Error::domain("degenerate sample: variance is zero"));
    }
    SampleMoments::new(mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Direction of the jump component; jumps follow the sign of the skewness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpDirection {
    Down,
    Up,
}

impl JumpDirection {
    fn sign(self) -> f64 {
        match self {
            JumpDirection::Down => -1.0,
            JumpDirection::Up => 1.0,
        }
    }
}

/// Jump–diffusion parameters: Poisson intensity λ, jump rate b (jumps have
/// size J/b), drift μ and diffusion variance σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JdParams {
    pub lambda: f64,
    pub b: f64,
    pub mu: f64,
    pub sigma_sq: f64,
    pub direction: JumpDirection,
}

impl JdParams {
    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn model(&self, reg: Regulation) -> Result<MixedModel> {
        let clock = RegulatedClock::new(Subordinator::poisson(self.lambda)?, reg)?;
        let (kappa1, kappa2) = match self.direction {
            JumpDirection::Down => (0.0, 1.0 / self.b),
            JumpDirection::Up => (1.0 / self.b, 0.0),
        };
        MixedModel::new(MixtureSpec::Constant { mu: self.mu, kappa1, kappa2, sigma: self.sigma() }, clock)
    }
}

/// Gaussian-mixed tempered stable parameters for a fixed family index c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsParams {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub theta: f64,
}

impl TsParams {
    pub fn model(&self, c: f64, reg: Regulation) -> Result<MixedModel> {
        let clock = RegulatedClock::new(Subordinator::tempered_stable(self.a, self.b, c)?, reg)?;
        MixedModel::new(MixtureSpec::Gaussian { mu: self.mu, theta: self.theta }, clock)
    }
}

fn rhos(reg: &Regulation) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (m, slot) in out.iter_mut().enumerate() {
        *slot = rho(reg.rtype, m as u32 + 1, reg.degree)?;
    }
    Ok(out)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("observation spacing must be positive, got {delta}")))
    }
}

/// Closed-form moment estimators for the jump–diffusion with jumps in the
/// direction of the sample skewness.
pub fn jd_moment_estimates(mom: &SampleMoments, delta: f64, reg: &Regulation) -> Result<JdParams> {
    check_delta(delta)?;
    if mom.skewness == 0.0 {
        return Err(Error::Infeasible("zero skewness leaves the jump rate unidentified".into()));
    }
    if !(mom.ekurt > 0.0) {
        return Err(Error::Infeasible(format!("jump-diffusion needs positive excess kurtosis, got {}", mom.ekurt)));
    }
    let [r1, r2, r3, r4] = rhos(reg)?;
    let skew = mom.skewness.abs();
    let b = skew / (mom.ekurt * mom.variance.sqrt()) * r4 / r3;
    let lambda = skew * mom.variance.powf(1.5) * b.powi(3) / (delta * r3);
    let sigma_sq = mom.variance / delta - r2 * lambda / (b * b);
    if !(sigma_sq > 0.0) {
        return Err(Error::Infeasible(format!(
            "jump variance exceeds the total: sigma^2 = {sigma_sq:.6e} at {} n = {}",
            reg.rtype.label(),
            reg.degree
        )));
    }
    let direction = if mom.skewness < 0.0 { JumpDirection::Down } else { JumpDirection::Up };
    let mu = mom.mean / delta - direction.sign() * r1 * lambda / b;
    Ok(JdParams { lambda, b, mu, sigma_sq, direction })
}

/// Tempered stable moment fit together with root-finding diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsFit {
    pub params: TsParams,
    /// Number of positive roots of the |θ| equation found on the scan of
    /// |θ|·√V over [1e-4, 1e4].
    pub roots: usize,
}

/// The |θ| equation in the standardized unknown |θ|·√V, with the
/// coefficients that do not depend on θ.
struct ThetaEquation {
    skew: f64,
    ekurt: f64,
    quad_coef: f64,
    d_coef: f64,
}

impl ThetaEquation {
    fn p(&self, theta: f64) -> f64 {
        let lin = self.skew * theta - 3.0;
        let d = lin * lin + self.d_coef * self.skew * theta;
        if lin < 0.0 {
            // lin + √D with lin < 0 cancels; rationalize
            self.d_coef * self.skew * theta / (d.sqrt() - lin)
        } else {
            lin + d.sqrt()
        }
    }

    fn residual(&self, theta: f64) -> f64 {
        let p = self.p(theta);
        let ratio = self.ekurt * theta / self.skew;
        self.quad_coef * p * p + (3.0 - 0.5 * ratio) * p + 3.0 * (1.0 - ratio)
    }
}

/// Moment estimators for the Gaussian-mixed tempered stable model with
/// family index `c`.
pub fn ts_moment_estimates(mom: &SampleMoments, delta: f64, c: f64, reg: &Regulation) -> Result<TsFit> {
    check_delta(delta)?;
    if !(0.0..1.0).contains(&c) {
        return Err(Error::domain(format!("tempered stable needs 0 <= c < 1, got {c}")));
    }
    if mom.skewness == 0.0 {
        return Err(Error::Infeasible("zero skewness leaves theta unidentified".into()));
    }
    let [r1, r2, r3, r4] = rhos(reg)?;
    let eq = ThetaEquation {
        skew: mom.skewness.abs(),
        ekurt: mom.ekurt,
        quad_coef: (3.0 - c) * r2 * r4 / (4.0 * (2.0 - c) * r3 * r3),
        d_coef: 4.0 * (2.0 - c) * r1 * r3 / ((1.0 - c) * r2 * r2),
    };
    let bound = (3.0 - c) / (2.0 - c) * r4 * r2 / (r3 * r3);
    let observed = mom.ekurt / (mom.skewness * mom.skewness);
    let infeasible = || {
        Error::Infeasible(format!(
            "regulation degree infeasible for these moments: no real root for |theta| at {} n = {}; \
             existence needs (3-c)/(2-c) rho4 rho2/rho3^2 = {bound:.6} < EK/SK^2 = {observed:.6}",
            reg.rtype.label(),
            reg.degree
        ))
    };

    let grid: Vec<f64> = (0..=800).map(|i| 1e-4 * 10f64.powf(8.0 * i as f64 / 800.0)).collect();
    let values: Vec<f64> = grid.iter().map(|&x| eq.residual(x)).collect();
    let mut candidates = Vec::new();
    for i in 0..grid.len() - 1 {
        let (f0, f1) = (values[i], values[i + 1]);
        if f0 == 0.0 {
            candidates.push(grid[i]);
        } else if f0 * f1 < 0.0 {
            let mut conv = SimpleConvergency { eps: 1e-12 * grid[i], max_iter: 200 };
            let root = find_root_brent(grid[i], grid[i + 1], |x| eq.residual(x), &mut conv)
                .map_err(|e| Error::numerical("theta root", format!("{e:?}")))?;
            candidates.push(root);
        }
    }
    if candidates.is_empty() {
        return Err(infeasible());
    }

    let sign = mom.skewness.signum();
    let sd = mom.variance.sqrt();
    let fits: Vec<(TsParams, f64)> = candidates
        .iter()
        .filter_map(|&scaled| {
            let theta = sign * scaled / sd;
            let b = 2.0 * (2.0 - c) * r3 * theta * theta / (r2 * eq.p(scaled));
            let denom = r1 + (1.0 - c) * r2 * theta * theta / b;
            let a = mom.variance * b.powf(1.0 - c) / (delta * gamma(1.0 - c) * denom);
            let mu = mom.mean / delta - r1 * theta * mom.variance / (delta * denom);
            let params = TsParams { a, b, mu, theta };
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return None;
            }
            // third-moment condition picks among multiple roots
            let k3 = params.model(c, *reg).and_then(|m| m.cumulants(delta)).ok()?.k[2];
            let target = mom.skewness * mom.variance.powf(1.5);
            Some((params, (k3 / target - 1.0).abs()))
        })
        .collect();
    let best = fits.iter().min_by(|x, y| x.1.total_cmp(&y.1)).ok_or_else(infeasible)?;
    Ok(TsFit { params: best.0, roots: candidates.len() })
}

/// Jump–diffusion likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JdLikelihood {
    /// At most one jump per interval (valid when λΔ is small).
    #[default]
    Bernoulli,
    /// The exact compound-Poisson density by Fourier inversion.
    Exact,
}

/// A profile log-likelihood with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileLoglik {
    pub value: f64,
    /// Observations whose density was floored at 1e-300 or was not positive.
    pub floored: usize,
    pub warnings: Vec<String>,
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt())
}

/// Σ log of the one-jump approximation: a Gaussian with weight 1 − λΔ plus
/// a Gaussian convolved with the jump law with weight λΔ.
pub fn jd_profile_loglik(values: &[f64], delta: f64, params: &JdParams, reg: &Regulation) -> Result<ProfileLoglik> {
    jd_profile_loglik_with(values, delta, params, reg, JdLikelihood::Bernoulli)
}

pub fn jd_profile_loglik_with(
    values: &[f64],
    delta: f64,
    params: &JdParams,
    reg: &Regulation,
    mode: JdLikelihood,
) -> Result<ProfileLoglik> {
    check_delta(delta)?;
    if mode == JdLikelihood::Exact {
        let model = params.model(*reg)?;
        return mixture_loglik(&model, values, delta);
    }
    let mut warnings = Vec::new();
    let jump_prob = params.lambda * delta;
    if jump_prob >= 1.0 {
        warnings.push(format!("lambda*delta = {jump_prob:.4} >= 1: the one-jump approximation is not a density"));
    }
    let sd = (params.sigma_sq * delta).sqrt();
    let center = params.mu * delta;
    let step = params.direction.sign() / params.b;
    let mut value = 0.0;
    let mut floored = 0;
    for &x in values {
        let diffusion = (1.0 - jump_prob) * normal_pdf(x - center, sd);
        let jump_term = if reg.is_identity() {
            normal_pdf(x - center - step, sd)
        } else {
            // accuracy is only needed relative to the whole mixture value
            let abs_tol = (1e-10 * diffusion / jump_prob).max(1e-300);
            let peak = (x - center) / step;
            jump_expectation(reg, |j: f64| normal_pdf(x - center - step * j, sd), &[peak], QuadOptions::rel(1e-10).with_abs(abs_tol))
                .value
        };
        let f = jump_prob * jump_term + diffusion;
        if f > 0.0 {
            value += f.max(DENSITY_FLOOR).ln();
            floored += usize::from(f < DENSITY_FLOOR);
        } else {
            floored += 1;
            value = f64::NEG_INFINITY;
        }
    }
    if value == f64::NEG_INFINITY {
        warnings.push(format!("mixture value not positive at {floored} observation(s)"));
    }
    Ok(ProfileLoglik { value, floored, warnings })
}

fn mixture_loglik(model: &MixedModel, values: &[f64], delta: f64) -> Result<ProfileLoglik> {
    let cum = model.cumulants(delta)?;
    let span = values.iter().map(|x| (x - cum.mean()).abs()).fold(0.0, f64::max);
    let density = MixtureDensity::new(model, delta, DensityMethod::Auto, span)?;
    let mut value = 0.0;
    let mut floored = 0;
    for &x in values {
        let f = density.pdf(x);
        if !(f >= DENSITY_FLOOR) {
            floored += 1;
        }
        value += f.max(DENSITY_FLOOR).ln();
    }
    let warnings = if floored > 0 { vec![format!("{floored} density value(s) floored at 1e-300")] } else { vec![] };
    Ok(ProfileLoglik { value, floored, warnings })
}

/// Σ log of the Gaussian-mixed tempered stable density at horizon Δ.
pub fn ts_profile_loglik(values: &[f64], delta: f64, params: &TsParams, c: f64, reg: &Regulation) -> Result<ProfileLoglik> {
    check_delta(delta)?;
    mixture_loglik(&params.model(c, *reg)?, values, delta)
}

/// Which model a sweep fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    Jd,
    Ts { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitParams {
    Jd(JdParams),
    Ts(TsParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rtype: RegType,
    pub n: f64,
    pub params: Option<FitParams>,
    pub pll: Option<f64>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    /// Highest PLL within this regulation type.
    pub best_in_type: bool,
    /// Highest PLL across all types.
    pub best_overall: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub model: ModelKind,
    pub delta: f64,
    pub moments: SampleMoments,
    pub rows: Vec<SweepRow>,
    pub best_per_type: Vec<(RegType, f64)>,
    pub best_overall: Option<(RegType, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub types: Vec<RegType>,
    pub degrees: Vec<f64>,
    pub jd_likelihood: JdLikelihood,
}

/// Fits every (type, degree) pair and scores it by profile log-likelihood
/// when raw returns are supplied. Infeasible pairs are kept with their error.
pub fn degree_sweep(
    moments: &SampleMoments,
    delta: f64,
    sample: Option<&[f64]>,
    cfg: &SweepConfig,
) -> Result<EstimationReport> {
    check_delta(delta)?;
    if cfg.degrees.is_empty() || !cfg.degrees.contains(&0.0) {
        return Err(Error::domain("degree grid must be nonempty and contain 0"));
    }
    if cfg.types.is_empty() {
        return Err(Error::domain("at least one regulation type is required"));
    }
    let mut degrees = cfg.degrees.clone();
    degrees.sort_by(f64::total_cmp);
    degrees.dedup();
    let jobs: Vec<(RegType, f64)> = cfg.types.iter().flat_map(|&t| degrees.iter().map(move |&n| (t, n))).collect();
    let mut rows: Vec<SweepRow> = jobs.par_iter().map(|&(rtype, n)| sweep_row(moments, delta, sample, cfg, rtype, n)).collect();

    if rows.iter().all(|r| r.params.is_none()) {
        let first = rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Infeasible(format!("every degree is infeasible; first error: {first}")));
    }
    let mut best_per_type = Vec::new();
    let mut best_overall: Option<(usize, f64)> = None;
    for &rtype in &cfg.types {
        let best = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rtype == rtype)
            .filter_map(|(i, r)| r.pll.filter(|p| !p.is_nan()).map(|p| (i, p)))
            .fold(None, |acc: Option<(usize, f64)>, (i, p)| match acc {
                Some((_, q)) if q >= p => acc,
                _ => Some((i, p)),
            });
        if let Some((i, p)) = best {
            rows[i].best_in_type = true;
            best_per_type.push((rtype, rows[i].n));
            if best_overall.is_none_or(|(_, q)| p > q) {
                best_overall = Some((i, p));
            }
        }
    }
    let best_overall = best_overall.map(|(i, _)| {
        rows[i].best_overall = true;
        (rows[i].rtype, rows[i].n)
    });
    Ok(EstimationReport { model: cfg.model, delta, moments: *moments, rows, best_per_type, best_overall })
}

fn sweep_row(
    moments: &SampleMoments,
    delta: f64,
    sample: Option<&[f64]>,
    cfg: &SweepConfig,
    rtype: RegType,
    n: f64,
) -> SweepRow {
    let mut row = SweepRow {
        rtype,
        n,
        params: None,
        pll: None,
        error: None,
        warnings: Vec::new(),
        best_in_type: false,
        best_overall: false,
    };
    let outcome = Regulation::new(rtype, n).and_then(|reg| {
        let (params, pll) = match cfg.model {
            ModelKind::Jd => {
                let p = jd_moment_estimates(moments, delta, &reg)?;
                let pll = sample.map(|s| jd_profile_loglik_with(s, delta, &p, &reg, cfg.jd_likelihood)).transpose()?;
                (FitParams::Jd(p), pll)
            }
            ModelKind::Ts { c } => {
                let fit = ts_moment_estimates(moments, delta, c, &reg)?;
                if fit.roots > 1 {
                    row.warnings.push(format!("{} roots for |theta|; kept the best third-moment match", fit.roots));
                }
                let pll = sample.map(|s| ts_profile_loglik(s, delta, &fit.params, c, &reg)).transpose()?;
                (FitParams::Ts(fit.params), pll)
            }
        };
        Ok((params, pll))
    });
    match outcome {
        Ok((params, pll)) => {
            row.params = Some(params);
            if let Some(p) = pll {
                row.pll = Some(p.value);
                row.warnings.extend(p.warnings);
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Linear-interpolation quantile of sorted data (the type-7 rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule 0.9·N^{−1/5}·min(sd, IQR/1.349).
pub fn silverman_bandwidth(count: usize, sd: f64, iqr: f64) -> f64 {
    0.9 / (count as f64).powf(0.2) * sd.min(iqr / 1.349)
}

/// Gaussian kernel density estimate with Silverman bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    points: Vec<f64>,
    pub bandwidth: f64,
}

impl Kde {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("kernel density needs at least two observations"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / count;
        let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count).sqrt();
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let bandwidth = silverman_bandwidth(sorted.len(), sd, iqr);
        if !(bandwidth > 0.0) {
            return Err(Error::domain("kernel bandwidth is zero (interquartile range or spread vanishes)"));
        }
        Ok(Kde { points: sorted, bandwidth })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.points.iter().map(|p| normal_pdf(x - p, h)).sum::<f64>() / self.points.len() as f64
    }
}

pub fn kde(values: &[f64], x: f64) -> Result<f64> {
    Ok(Kde::new(values)?.pdf(x))
}
