//! One-dimensional quadrature and series machinery.
//!
//! Adaptive Gauss-Kronrod (10/21 point) with a max-error heap, fixed
//! Gauss-Legendre rules, a precise `ln Γ(x+a) − ln Γ(x)` and an
//! Euler-Maclaurin completion for slowly varying positive series.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Single 21-point Kronrod panel on `[a, b]`: returns (value, error estimate).
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Tolerances for [`adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-300,
            rel: 1e-13,
            max_intervals: 4000,
        }
    }
}

/// Adaptive bisection of the panel with the largest error estimate.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (value, error) = gk21(f, a, b);
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut intervals = 1;
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if intervals >= tol.max_intervals {
            // round-off floor: accept when the remaining error is at machine level
            if total_err <= 1e-12 * total.abs().max(tol.abs) {
                break;
            }
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{a}, {b}] did not converge: value {total:e}, error {total_err:e}"
            )));
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in floating point
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        intervals += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Integral {
        value,
        error,
        intervals,
    })
}

/// Integrates over consecutive pieces `[breaks[i], breaks[i+1]]`.
pub fn adaptive_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<Integral> {
    let mut out = Integral {
        value: 0.0,
        error: 0.0,
        intervals: 0,
    };
    for w in breaks.windows(2) {
        let piece = adaptive(f, w[0], w[1], tol)?;
        out.value += piece.value;
        out.error += piece.error;
        out.intervals += piece.intervals;
    }
    Ok(out)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    let nf = order as f64;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if order == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// `ln Γ(x + a) − ln Γ(x)` for `x > 0`, `x + a > 0`, accurate for very large `x`.
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    debug_assert!(x > 0.0 && x + a > 0.0);
    const SHIFT: f64 = 20.0;
    let mut acc = 0.0;
    let mut x = x;
    while x < SHIFT || x + a < SHIFT {
        acc -= ((x + a) / x).ln();
        x += 1.0;
    }
    let y = x + a;
    let mut d = (x - 0.5) * (a / x).ln_1p() + a * y.ln() - a;
    const B: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
    ];
    let (ix, iy) = (1.0 / x, 1.0 / y);
    let (ix2, iy2) = (ix * ix, iy * iy);
    let (mut px, mut py) = (ix, iy);
    for b in B {
        d += b * (py - px);
        px *= ix2;
        py *= iy2;
    }
    d + acc
}

/// `ln Γ(y)` for `y > 0`.
pub fn ln_gamma(y: f64) -> f64 {
    ln_gamma_ratio(1.0, y - 1.0)
}

/// Generalized binomial coefficient `C(g + x − 1, x) = Γ(g + x) / (Γ(g) Γ(x + 1))`
/// for real `x ≥ 0` and `g > 0`.
pub fn rising_binomial(g: f64, x: f64) -> f64 {
    (ln_gamma_ratio(x + 1.0, g - 1.0) - ln_gamma(g)).exp()
}

const EM_START: u64 = 100;

/// `f'(x0)/24 − 7 f'''(x0)/5760`, derivatives from fourth-order differences.
fn midpoint_correction<F: Fn(f64) -> f64>(f: &F, x0: f64) -> f64 {
    let h = 0.25;
    let (p1, m1, p2, m2) = (f(x0 + h), f(x0 - h), f(x0 + 2.0 * h), f(x0 - 2.0 * h));
    let d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
    let d3 = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h);
    d1 / 24.0 - 7.0 * d3 / 5760.0
}

/// Sum of an infinite positive tail `Σ_{d ≥ first} f(d)` where `f` extends
/// smoothly to real arguments and varies slowly on unit scale.
///
/// Midpoint Euler-Maclaurin: `∫_{first−½}^∞ f + f'/24 − 7f'''/5760` at `first − ½`, the integral
/// taken over doubling pieces until contributions are negligible.
pub fn euler_maclaurin_tail<F: Fn(f64) -> f64>(f: &F, first: u64) -> Result<f64> {
    // the expansion is asymptotic: terms below EM_START are summed exactly
    let start = first.max(EM_START);
    let head: f64 = (first..start).map(|d| f(d as f64)).sum();
    let x0 = start as f64 - 0.5;
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-12,
        max_intervals: 2000,
    };
    let mut total = 0.0;
    let mut lo = x0;
    let mut small_run = 0;
    for _ in 0..1000 {
        let hi = lo * 2.0;
        let piece = adaptive(f, lo, hi, tol)?.value;
        total += piece;
        let f_end = f(hi);
        if piece <= 1e-17 * total.abs() && f_end <= f(lo) {
            small_run += 1;
            if small_run >= 2 {
                return Ok(head + total + midpoint_correction(f, x0));
            }
        } else {
            small_run = 0;
        }
        if !hi.is_finite() || hi > 1e300 {
            break;
        }
        lo = hi;
    }
    Err(Error::Numerical(format!(
        "series tail from degree {first} does not converge (partial integral {total:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        for deg in 0..24 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
        let (_, w1) = gauss_legendre(1);
        assert_eq!(w1, vec![2.0]);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫_0^1 (1−x) x^{-1/2} dx = 4/3
        let f = |x: f64| (1.0 - x) / x.sqrt();
        let r = adaptive(&f, 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.value - 4.0 / 3.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn ln_gamma_matches_factorials_and_half_integers() {
        let mut fact = 1.0f64;
        for k in 1..30u32 {
            fact *= k as f64;
            let lg = ln_gamma(k as f64 + 1.0);
            assert!((lg - fact.ln()).abs() < 1e-13 * fact.ln().max(1.0));
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((ln_gamma(0.5) - sqrt_pi.ln()).abs() < 1e-14);
        assert!((ln_gamma(2.5) - (0.75 * sqrt_pi).ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_ratio_large_argument_asymptotics() {
        // Γ(x+1)/Γ(x) = x exactly
        for x in [0.3, 5.0, 1e3, 1e9] {
            assert!((ln_gamma_ratio(x, 1.0) - x.ln()).abs() < 1e-14 * x.ln().abs().max(1.0));
        }
        // Γ(x + 1/2)/Γ(x) ≈ √x (1 − 1/(8x))
        let x = 1e8;
        let r = ln_gamma_ratio(x, 0.5).exp();
        let approx = x.sqrt() * (1.0 - 1.0 / (8.0 * x));
        assert!((r / approx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn euler_maclaurin_geometric_tail() {
        let c: f64 = 1e-3;
        let f = |x: f64| (-c * x).exp();
        let first = 50u64;
        let exact = (-c * first as f64).exp() / (1.0 - (-c).exp());
        let tail = euler_maclaurin_tail(&f, first).unwrap();
        assert!((tail / exact - 1.0).abs() < 1e-10, "{tail} vs {exact}");
    }

    #[test]
    fn euler_maclaurin_power_tail_and_divergence() {
        // Σ_{d ≥ 10} d^{-3}: compare with direct summation plus integral remainder
        let f = |x: f64| x.powi(-3);
        let tail = euler_maclaurin_tail(&f, 10).unwrap();
        let direct: f64 = (10..200_000u64).map(|d| (d as f64).powi(-3)).sum::<f64>()
            + 0.5 / (200_000f64 - 0.5).powi(2);
        assert!((tail - direct).abs() < 1e-9 * direct, "{tail} vs {direct}");
        assert!(euler_maclaurin_tail(&|x: f64| 1.0 / x, 10).is_err());
    }
}
