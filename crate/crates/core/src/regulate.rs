//! Clock regulation of degree n (types I, II, III): regulated Laplace
//! exponents, Lévy densities, cumulant-reduction coefficients and the
//! hold-moments reparametrization.
//!
//! Each recipe multiplies the jumps of the base clock by an independent
//! factor J ∈ (0, Jmax]. The regulated Laplace exponent is
//! t·E[log φ_X(J·u)], the regulated Lévy density is E[ℓ(z/J)/J] and the
//! m-th cumulant shrinks by ρ(m,n) = E[Jᵐ]. All three are computed from the
//! same expectation routine; closed forms are validated fast paths.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::clocks::{cexpm1, clog1p, CumulantSet, Edge, Subordinator};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions, QuadOutput, QuadValue};
use crate::specfun::{
    as_integer, gamma, gauss_2f1, hyp_series_minus_one, inv_reg_lower_gamma, ln_gamma, log_power_laplace, p_reg, polylog,
    upper_gamma_unchecked, HypKind,
};

/// Regulation recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegType {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
    #[serde(rename = "III")]
    TypeIII,
}

impl RegType {
    pub const ALL: [RegType; 3] = [RegType::TypeI, RegType::TypeII, RegType::TypeIII];

    pub fn label(&self) -> &'static str {
        match self {
            RegType::TypeI => "I",
            RegType::TypeII => "II",
            RegType::TypeIII => "III",
        }
    }
}

impl std::str::FromStr for RegType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(RegType::TypeI),
            "II" | "2" => Ok(RegType::TypeII),
            "III" | "3" => Ok(RegType::TypeIII),
            other => Err(Error::domain(format!("unknown regulation type '{other}'"))),
        }
    }
}

/// Regulation type and real degree n ≥ 0; n = 0 leaves the clock unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regulation {
    pub rtype: RegType,
    pub degree: f64,
}

impl Regulation {
    pub fn new(rtype: RegType, degree: f64) -> Result<Self> {
        if !(degree >= 0.0 && degree.is_finite()) {
            return Err(Error::domain(format!("regulation degree must be >= 0, got {degree}")));
        }
        Ok(Regulation { rtype, degree })
    }

    pub fn none() -> Self {
        Regulation { rtype: RegType::TypeI, degree: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.degree == 0.0
    }

    /// Upper end of the support of the jump factor J.
    pub fn max_jump(&self) -> f64 {
        match self.rtype {
            RegType::TypeIII if self.degree > 0.0 => 1.0 / gamma(self.degree + 1.0),
            _ => 1.0,
        }
    }
}

/// Maps a uniform variate to the regulating jump factor.
pub fn jump_transform(reg: &Regulation, u01: f64) -> Result<f64> {
    if !(u01 > 0.0 && u01 < 1.0) {
        return Err(Error::domain(format!("jump transform needs u in (0,1), got {u01}")));
    }
    let n = reg.degree;
    if n == 0.0 {
        return Ok(1.0);
    }
    Ok(match reg.rtype {
        RegType::TypeI => p_reg(n, -u01.ln()),
        RegType::TypeII => (-inv_reg_lower_gamma(n, u01)).exp(),
        RegType::TypeIII => (n * (-u01).ln_1p() - ln_gamma(n + 1.0)).exp(),
    })
}

/// Density and survival function P(J > z) of the jump factor at z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLaw {
    pub density: f64,
    pub survival: f64,
}

/// Law of the jump factor J at z ∈ (0, Jmax); J is degenerate at 1 when n = 0.
pub fn jump_law(reg: &Regulation, z: f64) -> Result<JumpLaw> {
    let n = reg.degree;
    if n == 0.0 {
        return Err(Error::domain("the jump factor is the constant 1 at degree 0"));
    }
    let jmax = reg.max_jump();
    if !(z > 0.0 && z < jmax) {
        return Err(Error::domain(format!("jump law needs z in (0, {jmax}), got {z}")));
    }
    Ok(match reg.rtype {
        RegType::TypeI => {
            // J = P(n, −log U): P(J > z) = e^{−y}, y = P⁻¹(n, z)
            let y = inv_reg_lower_gamma(n, z);
            JumpLaw { density: ((1.0 - n) * y.ln() + ln_gamma(n)).exp(), survival: (-y).exp() }
        }
        RegType::TypeII => {
            let w = -z.ln();
            JumpLaw { density: ((n - 1.0) * w.ln() - ln_gamma(n)).exp(), survival: p_reg(n, w) }
        }
        RegType::TypeIII => {
            // J = Uⁿ/Γ(n+1)
            let s = (z / jmax).powf(1.0 / n);
            JumpLaw { density: s / (n * z), survival: 1.0 - s }
        }
    })
}

/// E[h(J)] for the jump factor of `reg`. `kinks` are values of J at which
/// `h` is not smooth; they become quadrature breakpoints.
pub(crate) fn jump_expectation<T: QuadValue>(
    reg: &Regulation,
    mut h: impl FnMut(f64) -> T,
    kinks: &[f64],
    opts: QuadOptions,
) -> QuadOutput<T> {
    let n = reg.degree;
    if n == 0.0 {
        let v = h(1.0);
        return QuadOutput { value: v, abs_err: 0.0, intervals: 0, converged: true };
    }
    match reg.rtype {
        RegType::TypeI => {
            // s ∈ (0,1), J = P(n, −log s), decreasing in s
            let mut pts = vec![0.0, 1.0];
            for &j in kinks {
                if j > 0.0 && j < 1.0 {
                    pts.push((-inv_reg_lower_gamma(n, j)).exp());
                }
            }
            sort_points(&mut pts);
            integrate(|s: f64| h(p_reg(n, -s.ln())), &pts, opts)
        }
        RegType::TypeIII => {
            // s ∈ (0,1), J = sⁿ/Γ(n+1)
            let lg = ln_gamma(n + 1.0);
            let jmax = (-lg).exp();
            let mut pts = vec![0.0, 1.0];
            for &j in kinks {
                if j > 0.0 && j < jmax {
                    pts.push(((j.ln() + lg) / n).exp());
                }
            }
            sort_points(&mut pts);
            integrate(|s: f64| h((n * s.ln() - lg).exp()), &pts, opts)
        }
        RegType::TypeII => {
            // J = e^{−W}, W ~ Gamma(n, 1), truncated where the upper tail is < 1e-18
            let w_max = 2.0 * n + 45.0;
            let lg = ln_gamma(n);
            let kink_w: Vec<f64> = kinks.iter().filter(|&&j| j > 0.0 && j < 1.0).map(|j| -j.ln()).collect();
            if n >= 1.0 {
                let mut pts = vec![0.0, w_max];
                pts.extend(kink_w.iter().filter(|&&w| w < w_max));
                sort_points(&mut pts);
                integrate(
                    |w: f64| {
                        let weight = if w == 0.0 {
                            if n == 1.0 { 1.0 } else { 0.0 }
                        } else {
                            ((n - 1.0) * w.ln() - w - lg).exp()
                        };
                        let mut v = h((-w).exp());
                        scale_in_place(&mut v, weight);
                        v
                    },
                    &pts,
                    opts,
                )
            } else {
                // r = wⁿ removes the w^{n−1} endpoint singularity
                let lg1 = ln_gamma(n + 1.0);
                let r_max = w_max.powf(n);
                let mut pts = vec![0.0, r_max];
                pts.extend(kink_w.iter().filter(|&&w| w < w_max).map(|w| w.powf(n)));
                sort_points(&mut pts);
                integrate(
                    |r: f64| {
                        let w = r.powf(1.0 / n);
                        let mut v = h((-w).exp());
                        scale_in_place(&mut v, (-w - lg1).exp());
                        v
                    },
                    &pts,
                    opts,
                )
            }
        }
    }
}

fn scale_in_place<T: QuadValue>(v: &mut T, w: f64) {
    let orig = std::mem::replace(v, v.zero_like());
    v.add_scaled(w, &orig);
}

fn sort_points(pts: &mut Vec<f64>) {
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
}

/// How to evaluate a regulated Laplace exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LtMethod {
    /// Closed form where one applies and converges, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtOptions {
    pub method: LtMethod,
    pub edge: Edge,
    pub rel_tol: f64,
}

impl Default for LtOptions {
    fn default() -> Self {
        LtOptions { method: LtMethod::Auto, edge: Edge::Principal, rel_tol: 1e-10 }
    }
}

/// A base subordinator together with a regulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulatedClock {
    pub base: Subordinator,
    pub reg: Regulation,
}

impl RegulatedClock {
    pub fn new(base: Subordinator, reg: Regulation) -> Result<Self> {
        base.validate()?;
        Regulation::new(reg.rtype, reg.degree)?;
        Ok(RegulatedClock { base, reg })
    }

    /// Left end −B of the branch cut of the regulated Laplace exponent.
    pub fn cut_start(&self) -> Option<f64> {
        self.base.cut_start().map(|c| c / self.reg.max_jump())
    }

    fn on_cut(&self, u: Complex64) -> bool {
        self.cut_start().is_some_and(|c| u.im == 0.0 && u.re <= c)
    }

    pub fn laplace_exponent(&self, t: f64, u: Complex64) -> Result<Complex64> {
        self.laplace_exponent_with(t, u, LtOptions::default())
    }

    pub fn laplace_exponent_with(&self, t: f64, u: Complex64, opts: LtOptions) -> Result<Complex64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {t}")));
        }
        if !(u.re.is_finite() && u.im.is_finite()) {
            return Err(Error::domain("Laplace exponent needs a finite argument"));
        }
        if self.on_cut(u) && opts.edge == Edge::Principal {
            return Err(Error::BranchCut {
                arg: format!("{u}"),
                cut_start: self.cut_start().unwrap_or(f64::NEG_INFINITY),
            });
        }
        if u == Complex64::new(0.0, 0.0) {
            return Ok(u);
        }
        if self.reg.is_identity() {
            return Ok(self.base.laplace_exponent_edge(u, opts.edge)? * t);
        }
        match opts.method {
            LtMethod::Quadrature => self.quadrature_exponent(t, u, opts.edge, opts.rel_tol),
            LtMethod::ClosedForm => self.closed_form_exponent(t, u),
            LtMethod::Auto => {
                if self.on_cut(u) || !self.has_fast_closed_form() {
                    return self.quadrature_exponent(t, u, opts.edge, opts.rel_tol);
                }
                match self.closed_form_exponent(t, u) {
                    Ok(v) => Ok(v),
                    Err(Error::OutsideDisk { .. }) | Err(Error::PrecisionLoss { .. }) | Err(Error::Unsupported(_)) => {
                        self.quadrature_exponent(t, u, opts.edge, opts.rel_tol)
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Closed forms that are cheaper than the quadrature; the type-I Poisson
    /// form itself needs a quadrature with an inverse gamma per node.
    fn has_fast_closed_form(&self) -> bool {
        let n = self.reg.degree;
        match (self.base, self.reg.rtype) {
            (_, _) if n == 1.0 => true,
            (Subordinator::Poisson { .. }, RegType::TypeI) => false,
            (Subordinator::Poisson { .. }, _) => true,
            (Subordinator::TemperedStable { .. }, RegType::TypeI) => false,
            (Subordinator::TemperedStable { c, .. }, RegType::TypeII) => {
                as_integer(n).is_some() || (c == 0.5 && n == 2.0)
            }
            (Subordinator::TemperedStable { .. }, RegType::TypeIII) => true,
        }
    }

    /// t·E[log φ_X(J·u)] by adaptive quadrature.
    pub fn quadrature_exponent(&self, t: f64, u: Complex64, edge: Edge, rel_tol: f64) -> Result<Complex64> {
        let base = self.base;
        let mut kinks = Vec::new();
        if let Some(cut) = base.cut_start() {
            if u.im == 0.0 && u.re < 0.0 {
                kinks.push(cut / u.re);
            }
        }
        let mut failure = None;
        let out = jump_expectation(
            &self.reg,
            |j: f64| {
                if j == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                match base.laplace_exponent_edge(u * j, edge) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            &kinks,
            QuadOptions { abs_tol: 1e-300, rel_tol, max_intervals: 4000 },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if !out.converged {
            return Err(Error::numerical(
                "regulated Laplace exponent",
                format!("u = {u}: error estimate {:e} after {} intervals", out.abs_err, out.intervals),
            ));
        }
        Ok(out.value * t)
    }

    /// Closed-form Laplace exponent, or a refusal when none applies here.
    pub fn closed_form_exponent(&self, t: f64, u: Complex64) -> Result<Complex64> {
        let n = self.reg.degree;
        if u == Complex64::new(0.0, 0.0) {
            return Ok(u);
        }
        if n == 0.0 {
            return Ok(self.base.laplace_exponent(u)? * t);
        }
        if self.on_cut(u) {
            return Err(Error::BranchCut { arg: format!("{u}"), cut_start: self.cut_start().unwrap_or(0.0) });
        }
        let rtype = if n == 1.0 { RegType::TypeII } else { self.reg.rtype };
        match (self.base, rtype) {
            (Subordinator::Poisson { lambda }, _) if n == 1.0 && u.norm() > 0.5 => {
                // uniform jumps on (0,1)
                Ok((-cexpm1(-u) / u - 1.0) * (lambda * t))
            }
            (Subordinator::Poisson { lambda }, RegType::TypeI) => poisson_type1(lambda, n, u).map(|v| v * t),
            (Subordinator::Poisson { lambda }, RegType::TypeII) => {
                let tail = match hyp_series_minus_one(HypKind::NfnUnit { n }, -u) {
                    Err(Error::PrecisionLoss { .. }) if u.re > 0.0 && as_integer(n).is_some() => {
                        log_power_laplace(n as u32 - 1, u)? - 1.0
                    }
                    other => other?,
                };
                Ok(tail * (lambda * t))
            }
            (Subordinator::Poisson { lambda }, RegType::TypeIII) => poisson_type3(lambda, n, u).map(|v| v * t),
            (Subordinator::TemperedStable { a, b, c }, RegType::TypeII) => ts_type2(a, b, c, n, u).map(|v| v * t),
            (Subordinator::TemperedStable { a, b, c }, RegType::TypeIII) => ts_type3(a, b, c, n, u).map(|v| v * t),
            (Subordinator::TemperedStable { .. }, RegType::TypeI) => {
                Err(Error::Unsupported("no closed form for type-I tempered stable clocks".into()))
            }
        }
    }

    /// Cumulants ρ(m,n)·K_t(m).
    pub fn cumulants(&self, t: f64) -> Result<CumulantSet> {
        let base = self.base.cumulants(t);
        let mut k = base.k;
        for (m, km) in k.iter_mut().enumerate() {
            *km *= rho(self.reg.rtype, m as u32 + 1, self.reg.degree)?;
        }
        Ok(CumulantSet::new(k, t))
    }

    pub fn levy_density(&self, z: f64) -> Result<f64> {
        regulated_levy_density(&self.base, &self.reg, z)
    }

    pub fn bg_index(&self) -> f64 {
        self.base.bg_index()
    }
}

/// λ∫₀¹(e^{−uz} − 1)Γ(n)/Q(n,1−z)^{n−1} dz
fn poisson_type1(lambda: f64, n: f64, u: Complex64) -> Result<Complex64> {
    let lg = ln_gamma(n);
    let out = integrate(
        |z: f64| {
            let x = inv_reg_lower_gamma(n, z);
            let dens = if n == 1.0 { 1.0 } else { (lg - (n - 1.0) * x.ln()).exp() };
            cexpm1(-u * z) * dens
        },
        &[0.0, 1.0],
        QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 4000 },
    );
    if !out.converged {
        return Err(Error::numerical("type-I Poisson closed form", format!("error estimate {:e}", out.abs_err)));
    }
    Ok(out.value * lambda)
}

/// λ(γ(1/n, w)/(n·w^{1/n}) − 1) with w = u/Γ(n+1), via the incomplete gamma
/// for real w and the entire series Σ(−w)ᵏ/(k!(1+nk)) otherwise.
fn poisson_type3(lambda: f64, n: f64, u: Complex64) -> Result<Complex64> {
    let w = u / gamma(n + 1.0);
    if w.im == 0.0 && w.re >= 0.5 {
        let s = 1.0 / n;
        let x = w.re;
        let lower = gamma(s) * p_reg(s, x);
        let v = lower / (n * x.powf(s)) - 1.0;
        return Ok(Complex64::new(lambda * v, 0.0));
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut largest = 0.0_f64;
    for k in 1..100_000 {
        term *= -w / k as f64;
        let t = term / (1.0 + n * k as f64);
        sum += t;
        largest = largest.max(t.norm());
        if k as f64 > 2.0 * w.norm() && t.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    if largest * 1e-16 > 1e-12 * sum.norm() {
        return Err(Error::PrecisionLoss { largest_term: largest, sum: sum.norm() });
    }
    Ok(sum * lambda)
}

fn ts_type2(a: f64, b: f64, c: f64, n: f64, u: Complex64) -> Result<Complex64> {
    let z = u / b;
    if n == 1.0 && z.norm() > 0.25 {
        // elementary n = 1 forms
        let l = clog1p(z, false);
        if c == 0.0 {
            return Ok(a - a * (1.0 / z + 1.0) * l);
        }
        let one = Complex64::new(1.0, 0.0);
        let num = ((l * (c + 1.0)).exp() - one - z * (c + 1.0)) * b.powf(c);
        return Ok(num * (a * gamma(-c)) / ((c + 1.0) * z));
    }
    if c == 0.5 && n == 2.0 && z.norm() > 0.25 {
        let sq = (z + 1.0).sqrt();
        let pi = std::f64::consts::PI;
        let first = (8.0 * a * (b.powi(3) * pi).sqrt() / 3.0) / u * ((sq + 1.0) * 0.5).ln();
        let inner = (Complex64::new(4.0, 0.0) - (z + 4.0) * sq) * (4.0 * b / 9.0) / u + 1.0;
        return Ok(first + inner * (2.0 * a * (b * pi).sqrt()));
    }
    let Some(k) = as_integer(n) else {
        return Err(Error::Unsupported("type-II tempered stable closed form needs integer degree".into()));
    };
    if c > 0.0 {
        let s = hyp_series_minus_one(HypKind::Np1Fn { n, c }, -z)?;
        return Ok(s * (a * b.powf(c) * gamma(-c)));
    }
    if z.norm() < 0.05 {
        // −a Σ_{k≥1} (−1)^{k+1} zᵏ/(k (k+1)ⁿ), free of the 1/z cancellation below
        let mut pow = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 1..200 {
            pow *= -z;
            let t = pow / (i as f64 * ((i + 1) as f64).powf(n));
            sum += t;
            if t.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return Ok(sum * a);
    }
    let mut li = Complex64::new(0.0, 0.0);
    for j in 2..=k as u32 {
        li += polylog(j, -z)?;
    }
    Ok(a * n - a * (1.0 / z + 1.0) * clog1p(z, false) + li * a / z)
}

fn ts_type3(a: f64, b: f64, c: f64, n: f64, u: Complex64) -> Result<Complex64> {
    let w = u / (b * gamma(n + 1.0));
    let small = w.norm() <= 0.5;
    if c > 0.0 {
        let s = if small {
            hyp_series_minus_one(HypKind::regulated_2f1(n, c), -w)?
        } else {
            gauss_2f1(-c, 1.0 / n, 1.0 / n + 1.0, -w)? - 1.0
        };
        return Ok(s * (a * b.powf(c) * gamma(-c)));
    }
    let beta = 1.0 / n + 1.0;
    let f = if small {
        hyp_series_minus_one(HypKind::Gauss2F1 { a: 1.0, b: beta, c: beta + 1.0 }, -w)? + 1.0
    } else {
        gauss_2f1(1.0, beta, beta + 1.0, -w)?
    };
    Ok(-a * clog1p(w, false) + f * w * (a * n / (n + 1.0)))
}

/// Regulated Laplace exponent log φ(u) at horizon t (automatic method).
pub fn regulated_laplace_exponent(
    spec: &Subordinator,
    reg: &Regulation,
    t: f64,
    u: Complex64,
) -> Result<Complex64> {
    RegulatedClock::new(*spec, *reg)?.laplace_exponent(t, u)
}

/// Density of the regulated Lévy measure at z > 0. For n = 0 this is the
/// base density (zero for the Poisson atom).
pub fn regulated_levy_density(spec: &Subordinator, reg: &Regulation, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("Lévy density needs z > 0, got {z}")));
    }
    let n = reg.degree;
    if n == 0.0 {
        return Ok(spec.levy_measure().density_at(z));
    }
    match *spec {
        Subordinator::Poisson { lambda } => {
            let jmax = reg.max_jump();
            if z > jmax {
                return Ok(0.0);
            }
            Ok(match reg.rtype {
                RegType::TypeI => {
                    if z >= 1.0 {
                        return Ok(0.0);
                    }
                    let x = inv_reg_lower_gamma(n, z);
                    lambda * (ln_gamma(n) - (n - 1.0) * x.ln()).exp()
                }
                RegType::TypeII => lambda * ((n - 1.0) * (-z.ln()).ln() - ln_gamma(n)).exp(),
                RegType::TypeIII => {
                    let g = gamma(n + 1.0);
                    lambda * (g * z).powf(1.0 / n) / (n * z)
                }
            })
        }
        Subordinator::TemperedStable { a, b, c } => match reg.rtype {
            RegType::TypeIII => {
                let x = b * gamma(n + 1.0) * z;
                Ok(a * b.powf(c) * x.powf(1.0 / n) * upper_gamma_unchecked(-c - 1.0 / n, x) / (n * z))
            }
            _ => {
                let out = jump_expectation(
                    reg,
                    |j: f64| {
                        if j <= 0.0 {
                            return 0.0;
                        }
                        let y = z / j;
                        a * (-b * y).exp() / y.powf(c + 1.0) / j
                    },
                    &[],
                    QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 4000 },
                );
                if !out.converged {
                    return Err(Error::numerical("regulated Lévy density", format!("z = {z}: error {:e}", out.abs_err)));
                }
                Ok(out.value)
            }
        },
    }
}

static TYPE1_RATIONAL: OnceLock<Mutex<HashMap<(u32, u32), f64>>> = OnceLock::new();

/// Cumulant-reduction coefficient ρ(m,n) = E[Jᵐ].
pub fn rho(rtype: RegType, m: u32, n: f64) -> Result<f64> {
    if !(1..=4).contains(&m) {
        return Err(Error::Unsupported(format!("cumulant order {m} (supported: 1..4)")));
    }
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("regulation degree must be >= 0, got {n}")));
    }
    if n == 0.0 {
        return Ok(1.0);
    }
    let mf = m as f64;
    match rtype {
        RegType::TypeII => Ok((-n * (mf + 1.0).ln()).exp()),
        RegType::TypeIII => Ok((-(mf * n + 1.0).ln() - mf * ln_gamma(n + 1.0)).exp()),
        RegType::TypeI => {
            if m == 1 {
                return Ok((-n * std::f64::consts::LN_2).exp());
            }
            if let Some(k) = as_integer(n).filter(|&k| (1..=60).contains(&k)) {
                let k = k as u32;
                let cache = TYPE1_RATIONAL.get_or_init(|| Mutex::new(HashMap::new()));
                if let Some(v) = cache.lock().expect("cache lock").get(&(m, k)) {
                    return Ok(*v);
                }
                let v = type1_rational(m, k).to_f64().unwrap_or(f64::NAN);
                cache.lock().expect("cache lock").insert((m, k), v);
                return Ok(v);
            }
            let reg = Regulation { rtype, degree: n };
            let out = jump_expectation(&reg, |j: f64| j.powi(m as i32), &[], QuadOptions::rel(1e-14));
            if !out.converged && out.abs_err > 1e-12 * out.value {
                return Err(Error::numerical("rho", format!("m = {m}, n = {n}: error {:e}", out.abs_err)));
            }
            Ok(out.value)
        }
    }
}

/// C_{m,n} = ∫₀¹ (1 − Γ(n,−log s)/Γ(n))ᵐ ds exactly, for integer n ≥ 1.
///
/// With L = −log s, 1 − Γ(n,L)/Γ(n) = 1 − s·p(L), p(L) = Σ_{k<n} Lᵏ/k!, and
/// ∫₀¹ sʲ Lᵈ ds = d!/(j+1)^{d+1}.
pub fn type1_rational(m: u32, n: u32) -> BigRational {
    let mut fact = vec![BigInt::one()];
    for i in 1..=(m * n) as u64 + 1 {
        let last = fact.last().expect("nonempty").clone();
        fact.push(last * BigInt::from(i));
    }
    let p: Vec<BigRational> = (0..n as usize).map(|k| BigRational::new(BigInt::one(), fact[k].clone())).collect();
    let mut power: Vec<BigRational> = vec![BigRational::one()]; // p(L)^j coefficients
    let mut binom = BigInt::one();
    let mut total = BigRational::zero();
    for j in 0..=m {
        if j > 0 {
            let mut next = vec![BigRational::zero(); power.len() + p.len() - 1];
            for (i, a) in power.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (k, b) in p.iter().enumerate() {
                    next[i + k] += a * b;
                }
            }
            power = next;
            binom = binom * BigInt::from(m - j + 1) / BigInt::from(j);
        }
        let base = BigInt::from(j + 1);
        let mut integral = BigRational::zero();
        let mut denom = base.clone();
        for (d, coef) in power.iter().enumerate() {
            integral += coef * BigRational::new(fact[d].clone(), denom.clone());
            denom *= &base;
        }
        let term = integral * BigRational::from_integer(binom.clone());
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Mean, variance, skewness and excess kurtosis of a random variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl From<CumulantSet> for MomentSummary {
    fn from(c: CumulantSet) -> Self {
        MomentSummary {
            mean: c.mean(),
            variance: c.variance(),
            skewness: c.skewness(),
            excess_kurtosis: c.excess_kurtosis(),
        }
    }
}

/// Moments of the regulated clock at horizon t.
pub fn regulated_moments(spec: &Subordinator, reg: &Regulation, t: f64) -> Result<MomentSummary> {
    Ok(RegulatedClock::new(*spec, *reg)?.cumulants(t)?.into())
}

/// Tempered stable parameters (a_n, b_n) under which the regulated clock keeps
/// the unregulated mean and variance, with the resulting skewness and excess
/// kurtosis enlargement factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldMoments {
    pub a: f64,
    pub b: f64,
    pub skew_factor: f64,
    pub ekurt_factor: f64,
}

pub fn hold_moments_reparam(a: f64, b: f64, c: f64, reg: &Regulation) -> Result<HoldMoments> {
    let n = reg.degree;
    let r = |m| rho(reg.rtype, m, n);
    let (r1, r2, r3, r4) = (r(1)?, r(2)?, r(3)?, r(4)?);
    Ok(HoldMoments {
        a: r2.powf(1.0 - c) / r1.powf(2.0 - c) * a,
        b: r2 / r1 * b,
        skew_factor: r1 * r3 / (r2 * r2),
        ekurt_factor: r1 * r1 * r4 / (r2 * r2 * r2),
    })
}
