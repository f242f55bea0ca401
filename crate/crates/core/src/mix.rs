//! Real-valued processes built from a regulated clock: constant mixtures
//! μt + κ₁X − κ₂X′ (+ σW) with independent copies X, X′, and Gaussian
//! mixtures μt + θτ + W(τ) with τ the clock.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clocks::CumulantSet;
use crate::error::{Error, Result};
use crate::regulate::{rho, LtOptions, RegulatedClock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixtureSpec {
    /// Difference of two scaled independent clocks plus optional diffusion.
    Constant { mu: f64, kappa1: f64, kappa2: f64, sigma: f64 },
    /// Brownian motion with drift θ run on the clock.
    Gaussian { mu: f64, theta: f64 },
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MixtureSpec::Constant { mu, kappa1, kappa2, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::domain("drift must be finite"));
                }
                for (name, v) in [("kappa1", kappa1), ("kappa2", kappa2), ("sigma", sigma)] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
                    }
                }
            }
            MixtureSpec::Gaussian { mu, theta } => {
                if !(mu.is_finite() && theta.is_finite()) {
                    return Err(Error::domain("Gaussian mixture needs finite mu and theta"));
                }
            }
        }
        Ok(())
    }

    pub fn drift(&self) -> f64 {
        match *self {
            MixtureSpec::Constant { mu, .. } | MixtureSpec::Gaussian { mu, .. } => mu,
        }
    }

    pub fn with_drift(self, drift: f64) -> Self {
        match self {
            MixtureSpec::Constant { kappa1, kappa2, sigma, .. } => {
                MixtureSpec::Constant { mu: drift, kappa1, kappa2, sigma }
            }
            MixtureSpec::Gaussian { theta, .. } => MixtureSpec::Gaussian { mu: drift, theta },
        }
    }
}

/// A mixture together with its regulated clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedModel {
    pub mix: MixtureSpec,
    pub clock: RegulatedClock,
}

impl MixedModel {
    pub fn new(mix: MixtureSpec, clock: RegulatedClock) -> Result<Self> {
        mix.validate()?;
        Ok(MixedModel { mix, clock })
    }

    /// log E e^{−uξ_t}.
    pub fn log_lt(&self, t: f64, u: Complex64) -> Result<Complex64> {
        self.log_lt_with(t, u, LtOptions::default())
    }

    pub fn log_lt_with(&self, t: f64, u: Complex64, opts: LtOptions) -> Result<Complex64> {
        match self.mix {
            MixtureSpec::Constant { mu, kappa1, kappa2, sigma } => {
                two_leg_log_lt(mu, (kappa1, &self.clock), (kappa2, &self.clock), sigma, t, u, opts)
            }
            MixtureSpec::Gaussian { mu, theta } => {
                let arg = u * theta - u * u * 0.5;
                let clock = self.clock.laplace_exponent_with(t, arg, opts).map_err(|e| label_leg(e, "clock"))?;
                Ok(clock - u * (mu * t))
            }
        }
    }

    /// Characteristic function log E e^{iωξ_t}.
    pub fn log_cf(&self, t: f64, omega: f64) -> Result<Complex64> {
        self.log_lt(t, Complex64::new(0.0, -omega))
    }

    pub fn cumulants(&self, t: f64) -> Result<CumulantSet> {
        let base = self.clock.base.cumulants(t).k;
        let (rtype, n) = (self.clock.reg.rtype, self.clock.reg.degree);
        let mut reduced = [0.0; 4];
        for (m, r) in reduced.iter_mut().enumerate() {
            *r = rho(rtype, m as u32 + 1, n)? * base[m];
        }
        let k = match self.mix {
            MixtureSpec::Constant { mu, kappa1, kappa2, sigma } => {
                let mut k = [0.0; 4];
                for (m, km) in k.iter_mut().enumerate() {
                    let p = m as i32 + 1;
                    *km = (kappa1.powi(p) + (-kappa2).powi(p)) * reduced[m];
                }
                k[0] += mu * t;
                k[1] += sigma * sigma * t;
                k
            }
            MixtureSpec::Gaussian { mu, theta } => {
                let [k1, k2, k3, k4] = reduced;
                let th2 = theta * theta;
                [
                    mu * t + theta * k1,
                    k1 + th2 * k2,
                    3.0 * theta * k2 + th2 * theta * k3,
                    3.0 * k2 + 6.0 * th2 * k3 + th2 * th2 * k4,
                ]
            }
        };
        Ok(CumulantSet::new(k, t))
    }

    pub fn bg_index(&self) -> f64 {
        mixture_bg_index(&self.mix, &self.clock)
    }
}

/// log-LT of μt + κ₁X − κ₂X′ + σW_t for independent regulated clocks X, X′.
pub fn two_leg_log_lt(
    mu: f64,
    up: (f64, &RegulatedClock),
    down: (f64, &RegulatedClock),
    sigma: f64,
    t: f64,
    u: Complex64,
    opts: LtOptions,
) -> Result<Complex64> {
    let mut total = -u * (mu * t) + u * u * (0.5 * sigma * sigma * t);
    if up.0 > 0.0 {
        total += up.1.laplace_exponent_with(t, u * up.0, opts).map_err(|e| label_leg(e, "upward leg"))?;
    }
    if down.0 > 0.0 {
        total += down.1.laplace_exponent_with(t, -u * down.0, opts).map_err(|e| label_leg(e, "downward leg"))?;
    }
    Ok(total)
}

fn label_leg(e: Error, leg: &str) -> Error {
    match e {
        Error::BranchCut { arg, cut_start } => Error::BranchCut { arg: format!("{arg} ({leg})"), cut_start },
        other => other,
    }
}

/// Free-function form of [`MixedModel::log_lt`].
pub fn mixture_log_lt(mix: &MixtureSpec, clock: &RegulatedClock, t: f64, u: Complex64) -> Result<Complex64> {
    MixedModel::new(*mix, *clock)?.log_lt(t, u)
}

/// Free-function form of [`MixedModel::cumulants`].
pub fn mixture_cumulants(mix: &MixtureSpec, clock: &RegulatedClock, t: f64) -> Result<CumulantSet> {
    MixedModel::new(*mix, *clock)?.cumulants(t)
}

/// Blumenthal–Getoor index: the clock's for constant mixtures, twice it for
/// Gaussian mixtures.
pub fn mixture_bg_index(mix: &MixtureSpec, clock: &RegulatedClock) -> f64 {
    match mix {
        MixtureSpec::Constant { .. } => clock.bg_index(),
        MixtureSpec::Gaussian { .. } => 2.0 * clock.bg_index(),
    }
}
