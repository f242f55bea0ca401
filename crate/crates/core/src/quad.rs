//! Adaptive Gauss–Kronrod (10/21-point) quadrature for real, complex and
//! vector-valued integrands, plus semi-infinite helpers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

/// Values that can be integrated: closed under addition and real scaling,
/// with a norm used for error control.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// self += w * other
    fn add_scaled(&mut self, w: f64, other: &Self);
    fn norm(&self) -> f64;
    fn diff_norm(&self, other: &Self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += w * other;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn diff_norm(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        self.re += w * other.re;
        self.im += w * other.im;
    }
    fn norm(&self) -> f64 {
        self.re.abs().max(self.im.abs())
    }
    fn diff_norm(&self, other: &Self) -> f64 {
        (self.re - other.re).abs().max((self.im - other.im).abs())
    }
}

impl QuadValue for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += w * b;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    fn diff_norm(&self, other: &Self) -> f64 {
        self.iter().zip(other).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_394,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// The 21 Kronrod abscissae mapped to [a, b] with their weights; used by
/// callers that tabulate an integrand once and reuse the nodes.
pub fn kronrod_nodes(a: f64, b: f64) -> [(f64, f64); 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 21];
    out[0] = (c, WGK[10] * h);
    for j in 0..10 {
        out[1 + 2 * j] = (c - h * XGK[j], WGK[j] * h);
        out[2 + 2 * j] = (c + h * XGK[j], WGK[j] * h);
    }
    out
}

/// One 21-point Kronrod estimate with its QUADPACK-style error estimate.
pub fn gk21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let centr = 0.5 * (a + b);
    let hlgth = 0.5 * (b - a);
    let fc = f(centr);
    let mut resg = fc.zero_like();
    let mut resk = fc.zero_like();
    resk.add_scaled(WGK[10], &fc);
    let mut resabs = WGK[10] * fc.norm();
    let mut f1s: [Option<T>; 10] = Default::default();
    let mut f2s: [Option<T>; 10] = Default::default();
    for j in 0..10 {
        let dx = hlgth * XGK[j];
        let f1 = f(centr - dx);
        let f2 = f(centr + dx);
        if j % 2 == 1 {
            resg.add_scaled(WG[j / 2], &f1);
            resg.add_scaled(WG[j / 2], &f2);
        }
        resk.add_scaled(WGK[j], &f1);
        resk.add_scaled(WGK[j], &f2);
        resabs += WGK[j] * (f1.norm() + f2.norm());
        f1s[j] = Some(f1);
        f2s[j] = Some(f2);
    }
    let mut reskh = resk.clone();
    reskh.add_scaled(-0.5, &resk);
    let mut resasc = WGK[10] * fc.diff_norm(&reskh);
    for j in 0..10 {
        let f1 = f1s[j].as_ref().expect("filled above");
        let f2 = f2s[j].as_ref().expect("filled above");
        resasc += WGK[j] * (f1.diff_norm(&reskh) + f2.diff_norm(&reskh));
    }
    let h = hlgth.abs();
    resabs *= h;
    resasc *= h;
    let mut abserr = resk.diff_norm(&resg) * h;
    let mut result = resk.zero_like();
    result.add_scaled(hlgth, &resk);
    if resasc != 0.0 && abserr != 0.0 {
        abserr = resasc * (200.0 * abserr / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        abserr = abserr.max(50.0 * f64::EPSILON * resabs);
    }
    if !abserr.is_finite() {
        abserr = f64::INFINITY;
    }
    (result, abserr)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 0.0, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions { rel_tol, ..Default::default() }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct QuadOutput<T> {
    pub value: T,
    pub abs_err: f64,
    pub intervals: usize,
    pub converged: bool,
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration over the consecutive intervals defined by the sorted
/// `points` (at least two). Intervals are bisected in order of decreasing
/// error estimate until the summed error meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    points: &[f64],
    opts: QuadOptions,
) -> QuadOutput<T> {
    assert!(points.len() >= 2, "integrate needs at least one interval");
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Piece<T>> = Vec::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, err) = gk21(&mut f, w[0], w[1]);
            heap.push(Piece { a: w[0], b: w[1], value, err });
        }
    }
    let sum_of = |heap: &BinaryHeap<Piece<T>>, frozen: &Vec<Piece<T>>| -> (Option<T>, f64) {
        let mut total: Option<T> = None;
        let mut err = 0.0;
        for p in heap.iter().chain(frozen.iter()) {
            match total.as_mut() {
                None => total = Some(p.value.clone()),
                Some(t) => t.add_scaled(1.0, &p.value),
            }
            err += p.err;
        }
        (total, err)
    };
    let (mut total, mut err) = sum_of(&heap, &frozen);
    if total.is_none() {
        // empty range: one evaluation supplies the shape of the zero value
        let z = f(points[0]).zero_like();
        return QuadOutput { value: z, abs_err: 0.0, intervals: 0, converged: true };
    }
    let mut pieces = heap.len();
    let mut converged = false;
    loop {
        let tot = total.as_ref().expect("nonempty");
        let tol = opts.abs_tol.max(opts.rel_tol * tot.norm());
        if err <= tol {
            converged = true;
            break;
        }
        if pieces >= opts.max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let width = worst.b - worst.a;
        if width <= 8.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE) {
            frozen.push(worst);
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        let t = total.as_mut().expect("nonempty");
        t.add_scaled(-1.0, &worst.value);
        t.add_scaled(1.0, &v1);
        t.add_scaled(1.0, &v2);
        err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
        pieces += 1;
        // refresh the running sums now and then to keep round-off from drifting
        if pieces % 64 == 0 {
            let (t, e) = sum_of(&heap, &frozen);
            total = t;
            err = e;
        }
    }
    let (t, e) = sum_of(&heap, &frozen);
    QuadOutput { value: t.expect("nonempty"), abs_err: e, intervals: pieces, converged: converged || e <= opts.abs_tol }
}

/// Integral over [a, ∞) through the map x = a + t/(1−t).
pub fn integrate_to_infinity<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    opts: QuadOptions,
) -> QuadOutput<T> {
    integrate(
        |t: f64| {
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let mut v = f(x);
            let jac = 1.0 / (one_minus * one_minus);
            let z = v.zero_like();
            let orig = std::mem::replace(&mut v, z);
            v.add_scaled(jac, &orig);
            v
        },
        &[0.0, 1.0],
        opts,
    )
}

/// Outcome of a panel-doubling integration over a half line.
#[derive(Debug, Clone)]
pub struct PanelOutput<T> {
    pub value: T,
    pub abs_err: f64,
    /// Right end of the last panel that was integrated.
    pub truncation: f64,
    /// Contribution of the last panel, the stopping statistic.
    pub last_panel: f64,
    pub converged: bool,
}

/// Integrates over [a, ∞) panel by panel, doubling the panel width each time,
/// and stops once two consecutive panels contribute less than the tolerance
/// and `tail_small(x)` reports a negligible integrand at the panel end.
pub fn integrate_panels<T: QuadValue, F: FnMut(f64) -> T, G: FnMut(f64) -> bool>(
    mut f: F,
    a: f64,
    first_width: f64,
    max_end: f64,
    opts: QuadOptions,
    mut tail_small: G,
) -> PanelOutput<T> {
    let mut lo = a;
    let mut width = first_width;
    let mut total: Option<T> = None;
    let mut err = 0.0;
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    let mut converged = false;
    while lo < max_end {
        let hi = (lo + width).min(max_end);
        let scale = total.as_ref().map_or(0.0, |t| t.norm());
        let panel_opts = QuadOptions { abs_tol: opts.abs_tol.max(0.1 * opts.rel_tol * scale), ..opts };
        let out = integrate(&mut f, &[lo, hi], panel_opts);
        last = out.value.norm();
        err += out.abs_err;
        match total.as_mut() {
            None => total = Some(out.value),
            Some(t) => t.add_scaled(1.0, &out.value),
        }
        let tot = total.as_ref().expect("set above").norm();
        if last <= opts.abs_tol.max(opts.rel_tol * tot) && tail_small(hi) {
            quiet += 1;
            if quiet >= 2 {
                converged = true;
                lo = hi;
                break;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    PanelOutput {
        value: total.expect("at least one panel"),
        abs_err: err,
        truncation: lo,
        last_panel: last,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let out = integrate(|x: f64| x.powi(7) - 3.0 * x * x, &[0.0, 2.0], QuadOptions::default());
        assert!((out.value - (2f64.powi(8) / 8.0 - 8.0)).abs() < 1e-13);
        assert!(out.converged);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} log x dx = −4
        let out = integrate(|x: f64| x.ln() / x.sqrt(), &[0.0, 1.0], QuadOptions::rel(1e-11));
        assert!((out.value + 4.0).abs() < 1e-9, "{}", out.value);
    }

    #[test]
    fn complex_and_vector_values() {
        let out = integrate(|x: f64| Complex64::new(0.0, x).exp(), &[0.0, std::f64::consts::PI], QuadOptions::default());
        assert!((out.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        let out = integrate(|x: f64| vec![x, x * x], &[0.0, 3.0], QuadOptions::default());
        assert!((out.value[0] - 4.5).abs() < 1e-13 && (out.value[1] - 9.0).abs() < 1e-13);
    }

    #[test]
    fn half_line() {
        let out = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, QuadOptions::rel(1e-12));
        assert!((out.value - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let out = integrate_panels(|x: f64| (-x).exp() * x.cos(), 0.0, 1.0, 1e6, QuadOptions::rel(1e-12), |x| (-x).exp() < 1e-16);
        assert!((out.value - 0.5).abs() < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn kronrod_nodes_integrate_cubic() {
        let s: f64 = kronrod_nodes(1.0, 4.0).iter().map(|(x, w)| w * x.powi(3)).sum();
        assert!((s - (256.0 - 1.0) / 4.0).abs() < 1e-12);
    }
}
