//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
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
    0.123_491_976_262_065_851_077_208_245_924_890,
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

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e} after {intervals} intervals")]
    NonConvergence { achieved: f64, requested: f64, intervals: usize },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, max_intervals: 4000 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Kronrod evaluation on [a, b] with the QUADPACK error estimate.
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (f1, f2) = (eval(center - dx)?, eval(center + dx)?);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

/// Integrate `f` over consecutive panels `[points[i], points[i + 1]]`, bisecting
/// the panel with the largest error estimate until the total error meets `tol`.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<Integral, QuadError> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk21(&mut f, w[0], w[1])?;
            evaluations += 21;
            heap.push(Panel { a: w[0], b: w[1], value, error });
        }
    }
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let target = tol.target(value);
        if error <= target {
            return Ok(Integral { value, abs_error: error, evaluations });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => return Ok(Integral { value: 0.0, abs_error: 0.0, evaluations }),
        };
        let mid = 0.5 * (worst.a + worst.b);
        let splittable = mid > worst.a && mid < worst.b;
        if heap.len() + 2 > tol.max_intervals || !splittable {
            return Err(QuadError::NonConvergence {
                achieved: error,
                requested: target,
                intervals: heap.len() + 1,
            });
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral, QuadError> {
    integrate_panels(f, &[a, b], tol)
}

/// Breakpoints 0, s/16, s/8, …, s, 2s, 4s, … up to `b`, for integrands on
/// [0, b] whose structure lives at scale `s` but whose tails may be long.
pub fn geometric_breakpoints(b: f64, scale: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if !(b > 0.0) {
        return pts;
    }
    let mut x = scale / 16.0;
    while x < b {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::new(1e-14, 1e-12)
    }

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, tol()).unwrap();
        assert!((r.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let pts = geometric_breakpoints(1e6, 1.0);
        let r = integrate_panels(|x| (-x).exp(), &pts, tol()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn algebraic_endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::new(1e-12, 1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn heavy_tail() {
        // ∫_0^L (1 + t)^{-1.3} dt = (1 - (1+L)^{-0.3}) / 0.3
        let l: f64 = 3.5e5;
        let exact = (1.0 - (1.0 + l).powf(-0.3)) / 0.3;
        let r = integrate_panels(|t: f64| (1.0 + t).powf(-1.3), &geometric_breakpoints(l, 50.0), tol()).unwrap();
        assert!(((r.value - exact) / exact).abs() < 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let t = Tolerance { abs: 0.0, rel: 1e-15, max_intervals: 4 };
        let err = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, t).unwrap_err();
        assert!(matches!(err, QuadError::NonConvergence { .. }));
        assert!(integrate(|_| f64::NAN, 0.0, 1.0, tol()).is_err());
    }

    #[test]
    fn empty_range() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, tol()).unwrap().value, 0.0);
    }
}
