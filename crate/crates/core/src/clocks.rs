//! Base (unregulated) subordinators: the Poisson process and the tempered
//! stable family with Lévy density a·e^{−bz}/z^{c+1}.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::gamma;

/// A base subordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Subordinator {
    Poisson { lambda: f64 },
    TemperedStable { a: f64, b: f64, c: f64 },
}

/// Which side of a branch cut to evaluate on when the argument lies on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Edge {
    /// Principal branch; arguments on the cut are rejected.
    #[default]
    Principal,
    /// Limit from the upper half plane (argument e^{iπ}r for r on the cut).
    Upper,
}

impl Subordinator {
    pub fn poisson(lambda: f64) -> Result<Self> {
        let s = Subordinator::Poisson { lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn tempered_stable(a: f64, b: f64, c: f64) -> Result<Self> {
        let s = Subordinator::TemperedStable { a, b, c };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Subordinator::Poisson { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::domain(format!("Poisson intensity must be positive, got {lambda}")));
                }
            }
            Subordinator::TemperedStable { a, b, c } => {
                if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
                    return Err(Error::domain(format!("tempered stable needs a, b > 0, got a={a}, b={b}")));
                }
                if !(0.0..1.0).contains(&c) {
                    return Err(Error::domain(format!("tempered stable needs 0 <= c < 1, got {c}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_tempered_stable(&self) -> bool {
        matches!(self, Subordinator::TemperedStable { .. })
    }

    /// Start of the branch cut (−∞, −b] of the Laplace exponent, if any.
    pub fn cut_start(&self) -> Option<f64> {
        match *self {
            Subordinator::Poisson { .. } => None,
            Subordinator::TemperedStable { b, .. } => Some(-b),
        }
    }

    /// log φ(u) = log E e^{−uX₁} on the principal branch.
    pub fn laplace_exponent(&self, u: Complex64) -> Result<Complex64> {
        self.laplace_exponent_edge(u, Edge::Principal)
    }

    /// Laplace exponent with explicit treatment of arguments on the cut.
    pub fn laplace_exponent_edge(&self, u: Complex64, edge: Edge) -> Result<Complex64> {
        match *self {
            Subordinator::Poisson { lambda } => Ok(cexpm1(-u) * lambda),
            Subordinator::TemperedStable { a, b, c } => {
                let z = u / b;
                let on_cut = z.im == 0.0 && z.re <= -1.0;
                if on_cut && edge == Edge::Principal {
                    return Err(Error::BranchCut { arg: format!("{u}"), cut_start: -b });
                }
                let l = clog1p(z, on_cut);
                if c == 0.0 {
                    Ok(-a * l)
                } else {
                    Ok(cexpm1(l * c) * (a * gamma(-c) * b.powf(c)))
                }
            }
        }
    }

    /// Laplace exponent at a real argument in the domain, as a real number.
    pub fn laplace_exponent_real(&self, u: f64) -> Result<f64> {
        Ok(self.laplace_exponent(Complex64::new(u, 0.0))?.re)
    }

    /// First four cumulants of X_t.
    pub fn cumulants(&self, t: f64) -> CumulantSet {
        match *self {
            Subordinator::Poisson { lambda } => CumulantSet::new([lambda * t; 4], t),
            Subordinator::TemperedStable { a, b, c } => {
                let k1 = gamma(1.0 - c) * a * t / b.powf(1.0 - c);
                let k2 = (1.0 - c) * k1 / b;
                let k3 = (2.0 - c) * k2 / b;
                let k4 = (3.0 - c) * k3 / b;
                CumulantSet::new([k1, k2, k3, k4], t)
            }
        }
    }

    pub fn levy_measure(&self) -> LevyMeasure {
        match *self {
            Subordinator::Poisson { lambda } => LevyMeasure { atoms: vec![(1.0, lambda)], density: None },
            Subordinator::TemperedStable { a, b, c } => {
                LevyMeasure { atoms: Vec::new(), density: Some(TsDensity { a, b, c }) }
            }
        }
    }

    /// Blumenthal–Getoor index: 0 for the finite-activity Poisson clock, c otherwise.
    pub fn bg_index(&self) -> f64 {
        match *self {
            Subordinator::Poisson { .. } => 0.0,
            Subordinator::TemperedStable { c, .. } => c,
        }
    }
}

/// Free-function form of [`Subordinator::laplace_exponent`].
pub fn laplace_exponent(spec: &Subordinator, u: Complex64) -> Result<Complex64> {
    spec.laplace_exponent(u)
}

/// Free-function form of [`Subordinator::cumulants`].
pub fn base_cumulants(spec: &Subordinator, t: f64) -> Result<CumulantSet> {
    spec.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {t}")));
    }
    Ok(spec.cumulants(t))
}

/// Free-function form of [`Subordinator::levy_measure`].
pub fn base_levy_measure(spec: &Subordinator) -> LevyMeasure {
    spec.levy_measure()
}

/// Free-function form of [`Subordinator::bg_index`].
pub fn bg_index(spec: &Subordinator) -> f64 {
    spec.bg_index()
}

/// log(1+z) computed without cancellation for small |z|. When `upper` is set
/// and 1+z is a nonpositive real, the upper edge of the cut (arg = π) is used.
pub(crate) fn clog1p(z: Complex64, upper: bool) -> Complex64 {
    let (x, y) = (z.re, z.im);
    if upper && y == 0.0 && x <= -1.0 {
        return Complex64::new((-1.0 - x).ln(), std::f64::consts::PI);
    }
    if x * x + y * y > 0.25 {
        // 1 + x is exact near the branch point, where the series form cancels
        return Complex64::new(1.0 + x, y).ln();
    }
    let re = 0.5 * (x * (2.0 + x) + y * y).ln_1p();
    let im = y.atan2(1.0 + x);
    Complex64::new(re, im)
}

/// e^z − 1 without cancellation for small |z|.
pub(crate) fn cexpm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * half * half;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// First four cumulants of a random variable at horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub k: [f64; 4],
    pub t: f64,
}

impl CumulantSet {
    pub fn new(k: [f64; 4], t: f64) -> Self {
        CumulantSet { k, t }
    }

    pub fn mean(&self) -> f64 {
        self.k[0]
    }

    pub fn variance(&self) -> f64 {
        self.k[1]
    }

    pub fn skewness(&self) -> f64 {
        self.k[2] / self.k[1].powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        self.k[3] / (self.k[1] * self.k[1])
    }
}

/// Tempered stable Lévy density a·e^{−bz}/z^{c+1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsDensity {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TsDensity {
    pub fn at(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        self.a * (-self.b * z).exp() / z.powf(self.c + 1.0)
    }
}

/// A Lévy measure split into point masses and an absolutely continuous part.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyMeasure {
    /// (location, mass) pairs.
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<TsDensity>,
}

impl LevyMeasure {
    pub fn density_at(&self, z: f64) -> f64 {
        self.density.map_or(0.0, |d| d.at(z))
    }
}
