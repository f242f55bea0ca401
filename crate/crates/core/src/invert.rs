//! Density recovery for regulated tempered stable clocks and their mixtures.
//!
//! Clock densities come from the keyhole integral along the upper edge of the
//! cut (−∞, −B] of the regulated Laplace exponent Λ:
//!
//!   f(x) = (1/π) ∫_B^∞ exp(Re Λ(−u) − ux) sin(−Im Λ(−u)) du,
//!
//! integrated in y = log(u − B), which resolves the onset at the branch point
//! and the long tail alike. Gaussian mixtures on clocks with c < 1/2 reuse the
//! same edge values with the kernel exp(θd − |d|√(2u+θ²))/√(2u+θ²); the
//! general route is Fourier inversion of the characteristic function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::clocks::{Edge, Subordinator};
use crate::error::{Error, Result};
use crate::mix::{MixedModel, MixtureSpec};
use crate::quad::{integrate, integrate_panels, kronrod_nodes, QuadOptions};
use crate::regulate::{LtMethod, LtOptions, RegulatedClock};
use crate::specfun::{ln_gamma, p_reg};

/// Closest approach to the branch point, in e-folds of B; closer nodes would
/// put the kink of the edge integrand within rounding of the endpoint.
const Y_BELOW: f64 = 25.0;
/// Upper reach of the cut table relative to the branch point.
const U_REACH: f64 = 1e30;
const PANEL_WIDTH: f64 = 0.25;
/// Keyhole sums smaller than this fraction of their largest term are noise.
/// Absolute density level treated as quadrature noise.
const NOISE_FLOOR: f64 = 1e-6;
const CANCELLATION_LIMIT: f64 = 1e-12;

/// Regulated Laplace exponent on the upper edge of the cut at −u.
fn edge_exponent(clock: &RegulatedClock, t: f64, u: f64) -> Result<Complex64> {
    let opts = LtOptions { method: LtMethod::Auto, edge: Edge::Upper, rel_tol: 1e-10 };
    clock.laplace_exponent_with(t, Complex64::new(-u, 0.0), opts)
}

fn branch_point(clock: &RegulatedClock) -> Result<f64> {
    match clock.cut_start() {
        Some(c) => Ok(-c),
        None => Err(Error::Unsupported("keyhole inversion needs a tempered stable clock".into())),
    }
}

/// The unregulated gamma clock: its keyhole integrand is not integrable at
/// the branch point when at ≥ 1, so its explicit density is used throughout.
fn gamma_clock(clock: &RegulatedClock, t: f64) -> Option<(f64, f64)> {
    match clock.base {
        Subordinator::TemperedStable { a, b, c } if c == 0.0 && clock.reg.is_identity() => Some((a * t, b)),
        _ => None,
    }
}

fn gamma_ln_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

#[derive(Debug, Clone, Copy)]
struct CutNode {
    u: f64,
    /// log of (Gauss–Kronrod weight × du/dy)
    ln_weight: f64,
    re: f64,
    sin: f64,
}

/// Upper-edge values of a regulated exponent at quadrature nodes in
/// y = log(u − B), reusable for any kernel in u.
#[derive(Debug, Clone)]
pub struct CutTable {
    pub branch: f64,
    nodes: Vec<CutNode>,
}

impl CutTable {
    /// Tabulates until `ln_envelope(u) + Re Λ(−u) + log(u − B)` has dropped 50
    /// e-folds below its running maximum, or u reaches B·1e30.
    pub fn build(clock: &RegulatedClock, t: f64, ln_envelope: impl Fn(f64) -> f64) -> Result<Self> {
        let branch = branch_point(clock)?;
        let y_start = branch.ln() - Y_BELOW;
        let y_end = (branch * U_REACH).ln();
        let mut nodes = Vec::new();
        let mut peak = f64::NEG_INFINITY;
        let mut quiet = 0;
        let mut lo = y_start;
        let mut prev_panel_max = f64::INFINITY;
        while lo < y_end {
            let hi = lo + PANEL_WIDTH;
            let start = nodes.len();
            Self::fill_panel(clock, t, branch, lo, hi, 0, &mut nodes)?;
            let panel_max = nodes[start..]
                .iter()
                .map(|n| n.re + (n.u - branch).ln() + ln_envelope(n.u))
                .fold(f64::NEG_INFINITY, f64::max);
            peak = peak.max(panel_max);
            if panel_max < peak - 50.0 && panel_max <= prev_panel_max {
                quiet += 1;
                if quiet >= 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
            prev_panel_max = panel_max;
            lo = hi;
        }
        Ok(CutTable { branch, nodes })
    }

    fn fill_panel(
        clock: &RegulatedClock,
        t: f64,
        branch: f64,
        lo: f64,
        hi: f64,
        depth: u32,
        out: &mut Vec<CutNode>,
    ) -> Result<()> {
        let mut panel = Vec::with_capacity(21);
        for (y, w) in kronrod_nodes(lo, hi) {
            let u = branch + y.exp();
            let lt = edge_exponent(clock, t, u)?;
            panel.push(CutNode { u, ln_weight: w.ln() + y, re: lt.re, sin: (-lt.im).sin() });
        }
        // split where the phase or the amplitude moves too fast for one panel
        let spread = |f: &dyn Fn(&CutNode) -> f64| {
            let vals: Vec<f64> = panel.iter().map(f).collect();
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let phase = spread(&|n: &CutNode| n.sin.asin());
        let amplitude = spread(&|n: &CutNode| n.re.max(-700.0));
        if depth < 8 && (phase > 1.0 || amplitude > 8.0) {
            let mid = 0.5 * (lo + hi);
            Self::fill_panel(clock, t, branch, lo, mid, depth + 1, out)?;
            return Self::fill_panel(clock, t, branch, mid, hi, depth + 1, out);
        }
        out.extend(panel);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// log|(1/π) Σ w·exp(Re Λ + k(u))·sin(−Im Λ)| and its sign, for a kernel
    /// given through its logarithm k. A sum lost to cancellation is reported
    /// as zero when the round-off floor is below `NOISE_FLOOR`, else as NaN.
    fn ln_sum(&self, ln_kernel: impl Fn(f64) -> f64) -> (f64, f64) {
        let exps: Vec<f64> = self.nodes.iter().map(|n| n.ln_weight + n.re + ln_kernel(n.u)).collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return (f64::NEG_INFINITY, 0.0);
        }
        let s: f64 = self.nodes.iter().zip(&exps).map(|(n, e)| (e - top).exp() * n.sin).sum();
        if s.abs() < CANCELLATION_LIMIT {
            // the terms cancel below round-off of the largest one
            let floor = top + CANCELLATION_LIMIT.ln() - PI.ln();
            return if floor < NOISE_FLOOR.ln() { (f64::NEG_INFINITY, 0.0) } else { (f64::NAN, 0.0) };
        }
        (top + s.abs().ln() - PI.ln(), s.signum())
    }
}

/// A prepared clock density for repeated evaluation.
#[derive(Debug, Clone)]
pub enum ClockDensity {
    Gamma { shape: f64, rate: f64 },
    Keyhole(CutTable),
    /// Clocks with c ≥ 1/2, whose keyhole integrand grows like e^{u^c}.
    Fourier(FourierTable),
}

impl ClockDensity {
    /// Prepares evaluation on [x_lo, x_hi] (x_lo > 0).
    pub fn new(clock: &RegulatedClock, t: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        check_horizon(t)?;
        branch_point(clock)?;
        if let Some((shape, rate)) = gamma_clock(clock, t) {
            return Ok(ClockDensity::Gamma { shape, rate });
        }
        if clock.bg_index() >= 0.5 {
            let cum = clock.cumulants(t)?;
            let span = (x_hi - cum.mean()).abs().max((cum.mean() - x_lo).abs());
            return Ok(ClockDensity::Fourier(FourierTable::for_clock(clock, t, span)?));
        }
        let x_lo = x_lo.max(1e-300);
        Ok(ClockDensity::Keyhole(CutTable::build(clock, t, |u| -u * x_lo)?))
    }

    /// Natural log of the density; −∞ where it vanishes, NaN where the keyhole
    /// sum is lost to cancellation.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            ClockDensity::Gamma { shape, rate } => gamma_ln_pdf(*shape, *rate, x),
            ClockDensity::Keyhole(table) => {
                let (l, sign) = table.ln_sum(|u| -u * x);
                if sign > 0.0 || l.is_nan() { l } else { f64::NEG_INFINITY }
            }
            ClockDensity::Fourier(ft) => {
                let v = ft.pdf(x);
                if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// P(X_t ≤ x); the keyhole form is 1 − (1/π)∫ exp(Re Λ(−u) − ux) sin(−Im Λ(−u)) du/u.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            ClockDensity::Gamma { shape, rate } => p_reg(*shape, rate * x),
            ClockDensity::Keyhole(table) => {
                let (l, sign) = table.ln_sum(|u| -u * x - u.ln());
                if l.is_nan() {
                    return 0.0;
                }
                (1.0 - sign * l.exp()).clamp(0.0, 1.0)
            }
            ClockDensity::Fourier(ft) => ft.cdf(x),
        }
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("horizon must be positive, got {t}")))
    }
}

/// Single-point clock density: the keyhole integral for c < 1/2, Fourier
/// inversion for c ≥ 1/2, the explicit law for the unregulated gamma clock.
pub fn clock_density(clock: &RegulatedClock, t: f64, x: f64) -> Result<f64> {
    check_horizon(t)?;
    branch_point(clock)?;
    if !(x > 0.0) {
        return Err(Error::domain(format!("clock density needs x > 0, got {x}")));
    }
    if let Some((shape, rate)) = gamma_clock(clock, t) {
        return Ok(gamma_ln_pdf(shape, rate, x).exp());
    }
    if clock.bg_index() >= 0.5 {
        let cum = clock.cumulants(t)?;
        return fourier_point(|w| clock.laplace_exponent(t, Complex64::new(0.0, -w)), cum.mean(), cum.variance().sqrt(), x);
    }
    keyhole_density(clock, t, x)
}

/// The keyhole integral at one point by adaptive quadrature (relative
/// tolerance 1e-7). Fails when the integrand cancels below round-off, which
/// happens for c > 1/2 at small x.
pub fn keyhole_density(clock: &RegulatedClock, t: f64, x: f64) -> Result<f64> {
    check_horizon(t)?;
    let branch = branch_point(clock)?;
    if !(x > 0.0) {
        return Err(Error::domain(format!("clock density needs x > 0, got {x}")));
    }
    let y_lo = branch.ln() - Y_BELOW;
    let margin = if clock.bg_index() > 0.5 { 200.0 } else { 80.0 };
    let y_hi = (branch * U_REACH).ln().min((margin / x).ln());
    let y_hi = y_hi.max(branch.ln() + 1.0);
    let mut points: Vec<f64> = Vec::new();
    let mut y = y_lo;
    while y < y_hi {
        points.push(y);
        y += 1.0;
    }
    points.push(y_hi);
    let mut failure = None;
    let mut largest = f64::NEG_INFINITY;
    let out = integrate(
        |y: f64| {
            let e = y.exp();
            let u = branch + e;
            match edge_exponent(clock, t, u) {
                Ok(lt) => {
                    let ln_mag = lt.re - branch * x - e * x + y;
                    largest = largest.max(ln_mag);
                    ln_mag.exp() * (-lt.im).sin()
                }
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            }
        },
        &points,
        QuadOptions { abs_tol: 1e-300, rel_tol: 1e-7, max_intervals: 4000 },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if largest > 700.0 || out.value.abs() < CANCELLATION_LIMIT * largest.exp() {
        return Err(Error::numerical(
            "keyhole density",
            format!("x = {x}: integrand reaches e^{largest:.1}, the result cancels below round-off"),
        ));
    }
    if !out.converged {
        return Err(Error::numerical(
            "keyhole density",
            format!("x = {x}: error estimate {:e} over y in [{y_lo}, {y_hi}]", out.abs_err),
        ));
    }
    Ok((out.value / PI).max(0.0))
}

/// P(X_t ≤ x) for a tempered stable clock.
pub fn clock_cdf(clock: &RegulatedClock, t: f64, x: f64) -> Result<f64> {
    Ok(ClockDensity::new(clock, t, x.max(1e-300), x.max(1e-300))?.cdf(x))
}

/// Route for mixture densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    /// Marginalization for Gaussian mixtures of clocks with c < 1/2, Fourier otherwise.
    #[default]
    Auto,
    Marginalization,
    Fourier,
}

/// Characteristic function, centred at `center`, tabulated at quadrature
/// nodes on [0, ω*] where ω* is the first point past which |φ| < 1e-12.
#[derive(Debug, Clone)]
pub struct FourierTable {
    center: f64,
    nodes: Vec<(f64, f64, Complex64)>,
    pub cutoff: f64,
}

impl FourierTable {
    /// `x_span` bounds |x − center| over the points to be evaluated; it fixes
    /// the panel width so that e^{−iωx} is resolved.
    pub fn build(
        log_cf: impl Fn(f64) -> Result<Complex64>,
        center: f64,
        sd: f64,
        x_span: f64,
    ) -> Result<Self> {
        Self::build_until(log_cf, center, sd, x_span, |_, modulus| modulus < 1e-12)
    }

    /// As `build`, stopping after two consecutive panels on which
    /// `negligible(ω, |φ(ω)|)` holds at every node.
    pub fn build_until(
        log_cf: impl Fn(f64) -> Result<Complex64>,
        center: f64,
        sd: f64,
        x_span: f64,
        negligible: impl Fn(f64, f64) -> bool,
    ) -> Result<Self> {
        let width = (2.0 / x_span.max(sd)).min(0.25 / sd);
        let mut nodes = Vec::new();
        let mut lo = 0.0;
        let mut quiet = 0;
        for _ in 0..20_000 {
            let hi = lo + width;
            let mut small = true;
            for (omega, weight) in kronrod_nodes(lo, hi) {
                let cf = (log_cf(omega)? + Complex64::new(0.0, -omega * center)).exp();
                small &= negligible(omega, cf.norm());
                nodes.push((omega, weight, cf));
            }
            lo = hi;
            if small {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(FourierTable { center, nodes, cutoff: lo });
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::numerical(
            "Fourier inversion",
            format!("characteristic function not negligible by omega = {lo} (20000 panels)"),
        ))
    }

    pub fn for_mixture(model: &MixedModel, t: f64, x_span: f64) -> Result<Self> {
        let cum = model.cumulants(t)?;
        Self::build(|w| model.log_cf(t, w), cum.mean(), cum.variance().sqrt(), x_span)
    }

    pub fn for_clock(clock: &RegulatedClock, t: f64, x_span: f64) -> Result<Self> {
        let cum = clock.cumulants(t)?;
        Self::build(
            |w| clock.laplace_exponent(t, Complex64::new(0.0, -w)),
            cum.mean(),
            cum.variance().sqrt(),
            x_span,
        )
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.center;
        let s: f64 = self.nodes.iter().map(|(w, weight, cf)| weight * (cf * Complex64::from_polar(1.0, -w * d)).re).sum();
        s / PI
    }

    /// Gil-Pelaez: F(x) = 1/2 − (1/π)∫ Im(e^{−iωx}φ(ω))/ω dω.
    pub fn cdf(&self, x: f64) -> f64 {
        let d = x - self.center;
        let s: f64 =
            self.nodes.iter().map(|(w, weight, cf)| weight * (cf * Complex64::from_polar(1.0, -w * d)).im / w).sum();
        (0.5 - s / PI).clamp(0.0, 1.0)
    }
}

/// A prepared mixture density for repeated evaluation.
#[derive(Debug, Clone)]
pub enum MixtureDensity {
    /// Gaussian mixture marginalized over the keyhole representation.
    Marginal { table: CutTable, theta: f64, center: f64 },
    /// Gaussian mixture over an unregulated gamma clock.
    GammaMix { shape: f64, rate: f64, theta: f64, center: f64 },
    Fourier(FourierTable),
}

impl MixtureDensity {
    /// Prepares evaluation for points within `x_span` of the drift location μt.
    pub fn new(model: &MixedModel, t: f64, method: DensityMethod, x_span: f64) -> Result<Self> {
        check_horizon(t)?;
        let marginal_ok = match (model.mix, model.clock.base) {
            (MixtureSpec::Gaussian { .. }, Subordinator::TemperedStable { c, .. }) => c < 0.5,
            _ => false,
        };
        let use_marginal = match method {
            DensityMethod::Auto => marginal_ok,
            DensityMethod::Marginalization if marginal_ok => true,
            DensityMethod::Marginalization => {
                return Err(Error::Unsupported(
                    "marginalization needs a Gaussian mixture of a tempered stable clock with c < 1/2".into(),
                ))
            }
            DensityMethod::Fourier => false,
        };
        if !use_marginal {
            return Ok(MixtureDensity::Fourier(FourierTable::for_mixture(model, t, x_span)?));
        }
        let MixtureSpec::Gaussian { mu, theta } = model.mix else { unreachable!("checked above") };
        let center = mu * t;
        if let Some((shape, rate)) = gamma_clock(&model.clock, t) {
            return Ok(MixtureDensity::GammaMix { shape, rate, theta, center });
        }
        let th2 = theta * theta;
        let table = CutTable::build(&model.clock, t, |u| -0.5 * (2.0 * u + th2).ln())?;
        Ok(MixtureDensity::Marginal { table, theta, center })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            MixtureDensity::Fourier(ft) => ft.pdf(x).max(0.0),
            _ => self.ln_pdf(x).exp(),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            MixtureDensity::Marginal { table, theta, center } => {
                let d = x - center;
                let th2 = theta * theta;
                let (l, sign) = table.ln_sum(|u| {
                    let r = (2.0 * u + th2).sqrt();
                    theta * d - d.abs() * r - r.ln()
                });
                if sign > 0.0 { l } else { f64::NEG_INFINITY }
            }
            MixtureDensity::GammaMix { shape, rate, theta, center } => {
                gamma_mix_density(*shape, *rate, *theta, x - center).ln()
            }
            MixtureDensity::Fourier(ft) => {
                let v = ft.pdf(x);
                if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }
            }
        }
    }
}

/// ∫ N(d; θw, w) Gamma(w; shape, rate) dw by quadrature in log w.
fn gamma_mix_density(shape: f64, rate: f64, theta: f64, d: f64) -> f64 {
    let y_lo = (-40.0 / shape - 5.0).max(-700.0);
    let y_hi = ((shape + 10.0 * shape.sqrt() + 60.0) / rate).ln();
    let mut points = Vec::new();
    let mut y = y_lo;
    while y < y_hi {
        points.push(y);
        y += 2.0;
    }
    points.push(y_hi);
    let ln_norm = shape * rate.ln() - ln_gamma(shape) - 0.5 * (2.0 * PI).ln();
    let out = integrate(
        |y: f64| {
            let w = y.exp();
            let z = d - theta * w;
            (ln_norm + shape * y - rate * w - 0.5 * y - z * z / (2.0 * w)).exp()
        },
        &points,
        QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 4000 },
    );
    out.value
}

/// Single-point mixture density by the automatic route.
pub fn mixture_density(model: &MixedModel, t: f64, x: f64) -> Result<f64> {
    mixture_density_with(model, t, x, DensityMethod::Auto)
}

pub fn mixture_density_with(model: &MixedModel, t: f64, x: f64, method: DensityMethod) -> Result<f64> {
    check_horizon(t)?;
    match MixtureDensity::new(model, t, DensityMethod::Marginalization, 0.0) {
        Ok(prepared) if method != DensityMethod::Fourier => return Ok(prepared.pdf(x)),
        Err(e) if method == DensityMethod::Marginalization => return Err(e),
        _ => {}
    }
    fourier_density(model, t, x)
}

/// Single-point mixture density by Fourier inversion.
pub fn fourier_density(model: &MixedModel, t: f64, x: f64) -> Result<f64> {
    let cum = model.cumulants(t)?;
    fourier_point(|w| model.log_cf(t, w), cum.mean(), cum.variance().sqrt(), x)
}

/// (1/π)∫₀^∞ Re(e^{−iωx} φ(ω)) dω by panel doubling, stopping once |φ| < 1e-12.
fn fourier_point(log_cf: impl Fn(f64) -> Result<Complex64>, center: f64, sd: f64, x: f64) -> Result<f64> {
    let d = x - center;
    let mut failure = None;
    let tail_cf = std::cell::Cell::new(0.0_f64);
    let tail_from = std::cell::Cell::new(0.0_f64);
    let out = integrate_panels(
        |w: f64| {
            let cf = match log_cf(w) {
                Ok(l) => (l + Complex64::new(0.0, -w * center)).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            if w >= tail_from.get() {
                tail_cf.set(cf.norm());
                tail_from.set(w);
            }
            (cf * Complex64::from_polar(1.0, -w * d)).re
        },
        0.0,
        0.5 / sd,
        1e8 / sd,
        QuadOptions { abs_tol: 1e-13 / sd, rel_tol: 1e-9, max_intervals: 2000 },
        |_| tail_cf.get() < 1e-12,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !out.converged {
        return Err(Error::numerical(
            "Fourier inversion",
            format!(
                "truncated at omega = {:.6e}, last panel {:.3e}, |cf| there {:.3e}",
                out.truncation, out.last_panel, tail_cf.get()
            ),
        ));
    }
    Ok((out.value / PI).max(0.0))
}

/// Density values on a grid with a trapezoid mass check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub mass_check: f64,
    /// Most negative raw value before clipping (0 if none).
    pub clipped: f64,
}

impl DensityGrid {
    pub fn from_values(points: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("density grid points must be strictly increasing"));
        }
        let clipped = raw.iter().cloned().fold(0.0, f64::min);
        let values: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();
        let mass_check = points.windows(2).zip(values.windows(2)).map(|(p, v)| 0.5 * (p[1] - p[0]) * (v[0] + v[1])).sum();
        Ok(DensityGrid { points, values, mass_check, clipped })
    }

    /// Raw values below the noise floor indicate quadrature trouble rather than noise.
    pub fn noise_warning(&self) -> bool {
        self.clipped < -NOISE_FLOOR
    }
}

pub fn clock_density_grid(clock: &RegulatedClock, t: f64, points: Vec<f64>) -> Result<DensityGrid> {
    let x_lo = points.iter().cloned().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().cloned().fold(0.0, f64::max);
    let prepared = ClockDensity::new(clock, t, x_lo.min(x_hi), x_hi)?;
    let raw = points.iter().map(|&x| prepared.pdf(x)).collect();
    DensityGrid::from_values(points, raw)
}

pub fn mixture_density_grid(model: &MixedModel, t: f64, points: Vec<f64>, method: DensityMethod) -> Result<DensityGrid> {
    let center = model.mix.drift() * t;
    let span = points.iter().map(|x| (x - center).abs()).fold(0.0, f64::max);
    let prepared = MixtureDensity::new(model, t, method, span)?;
    let raw = points.iter().map(|&x| prepared.pdf(x)).collect();
    DensityGrid::from_values(points, raw)
}
