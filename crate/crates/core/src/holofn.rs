//! Holomorphic polynomials in the monomial basis, Bergman norms, the
//! reproducing kernel series and the test functions `f_a`, `h_a`.
//!
//! Under a radial weight the monomials are orthogonal with
//! `‖z^m‖²_ρ = σ_m m_{|m|}`, so every norm of a polynomial is a finite sum.
//! Infinite series with nonnegative terms (diagonal kernels, test-function
//! norms) are completed past the stored degree by an Euler-Maclaurin tail
//! over the continuous-degree moments.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{self, BallPoint, BallSampling};
use crate::quad::{self, ln_gamma, rising_binomial};
use crate::weights::{DyadicGrid, Weight};

/// Default truncation degree per dimension.
pub fn default_degree(n: usize) -> usize {
    match n {
        1 => 60,
        2 => 30,
        3 => 18,
        _ => 12,
    }
}

/// Relative tolerance on the truncated part of a kernel or norm series.
pub const SERIES_TOL: f64 = 1e-9;

/// Default bound on `|z||w|` accepted by off-diagonal kernel evaluation.
pub const TRUSTED_MODULUS: f64 = 0.995;

/// `ln(m!)` for a multi-index entry.
fn ln_fact(k: u32) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// All multi-indices of total degree at most `D`, grouped by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexBasis {
    n: usize,
    degree: usize,
    indices: Vec<Vec<u32>>,
    sigma: Vec<f64>,
    /// `offsets[d]..offsets[d+1]` are the indices of degree `d`.
    offsets: Vec<usize>,
}

fn push_compositions(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == n - 1 {
        let used: u32 = prefix.iter().sum();
        let mut m = prefix.clone();
        m.push(d - used);
        out.push(m);
        return;
    }
    let used: u32 = prefix.iter().sum();
    for k in (0..=d - used).rev() {
        prefix.push(k);
        push_compositions(n, d, prefix, out);
        prefix.pop();
    }
}

/// `σ_m = (n−1)! m! / (n−1+|m|)!`.
pub fn sphere_constant(m: &[u32]) -> f64 {
    // Π_i m_i! / (n (n+1) ⋯ (n−1+|m|)), one factor per unit of degree
    let n = m.len() as f64;
    let mut s = 1.0;
    let mut count = 0.0;
    for &k in m {
        for t in 1..=k {
            s *= t as f64 / (n + count);
            count += 1.0;
        }
    }
    s
}

impl MultiIndexBasis {
    pub fn new(n: usize, degree: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("basis dimension must be positive".into()));
        }
        let mut indices = Vec::new();
        let mut offsets = vec![0];
        for d in 0..=degree as u32 {
            push_compositions(n, d, &mut Vec::new(), &mut indices);
            offsets.push(indices.len());
        }
        let sigma = indices.iter().map(|m| sphere_constant(m)).collect();
        Ok(MultiIndexBasis {
            n,
            degree,
            indices,
            sigma,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn index(&self, i: usize) -> &[u32] {
        &self.indices[i]
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma[i]
    }

    pub fn total_degree(&self, i: usize) -> usize {
        self.indices[i].iter().sum::<u32>() as usize
    }

    /// Range of basis positions with total degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.offsets[d]..self.offsets[d + 1]
    }

    pub fn position(&self, m: &[u32]) -> Option<usize> {
        if m.len() != self.n {
            return None;
        }
        let d: usize = m.iter().sum::<u32>() as usize;
        if d > self.degree {
            return None;
        }
        self.degree_range(d).find(|&i| self.indices[i] == m)
    }

    /// `z^m` for every basis element.
    pub fn monomials(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.n, "point dimension differs from basis");
        let powers: Vec<Vec<Complex64>> = z
            .iter()
            .map(|&c| {
                let mut p = Vec::with_capacity(self.degree + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                for _ in 0..=self.degree {
                    p.push(acc);
                    acc *= c;
                }
                p
            })
            .collect();
        self.indices
            .iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .fold(Complex64::new(1.0, 0.0), |acc, (j, &k)| acc * powers[j][k as usize])
            })
            .collect()
    }
}

/// A polynomial `Σ c_m z^m` on a shared basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloFunction {
    basis: Arc<MultiIndexBasis>,
    coeffs: Vec<Complex64>,
}

/// JSON entry `[multi-index, re, im]`.
pub type CoefficientEntry = (Vec<u32>, f64, f64);

impl HoloFunction {
    pub fn zero(basis: Arc<MultiIndexBasis>) -> Self {
        let len = basis.len();
        HoloFunction {
            basis,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_coeffs(basis: Arc<MultiIndexBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Domain(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(HoloFunction { basis, coeffs })
    }

    /// The monomial `z^m`.
    pub fn monomial(basis: Arc<MultiIndexBasis>, m: &[u32]) -> Result<Self> {
        let i = basis
            .position(m)
            .ok_or_else(|| Error::Domain(format!("multi-index {m:?} is not in the basis")))?;
        let mut f = Self::zero(basis);
        f.coeffs[i] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    pub fn constant(basis: Arc<MultiIndexBasis>, c: Complex64) -> Self {
        let mut f = Self::zero(basis);
        f.coeffs[0] = c;
        f
    }

    pub fn basis(&self) -> &Arc<MultiIndexBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn scale(&self, s: Complex64) -> Self {
        HoloFunction {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.basis
            .monomials(z)
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| m * c)
            .sum()
    }

    pub fn to_entries(&self) -> Vec<CoefficientEntry> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, c)| (self.basis.index(i).to_vec(), c.re, c.im))
            .collect()
    }

    pub fn from_entries(basis: Arc<MultiIndexBasis>, entries: &[CoefficientEntry]) -> Result<Self> {
        let mut f = Self::zero(basis);
        for (m, re, im) in entries {
            let i = f.basis.position(m).ok_or_else(|| {
                Error::Domain(format!("multi-index {m:?} is outside the basis"))
            })?;
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Domain(format!("coefficient of {m:?} is not finite")));
            }
            f.coeffs[i] += Complex64::new(*re, *im);
        }
        Ok(f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_entries())?)
    }

    pub fn from_json(basis: Arc<MultiIndexBasis>, s: &str) -> Result<Self> {
        let entries: Vec<CoefficientEntry> = serde_json::from_str(s)?;
        Self::from_entries(basis, &entries)
    }
}

fn check_dim(f: &HoloFunction, w: &Weight) -> Result<()> {
    if f.basis.dim() != w.dimension() {
        return Err(Error::Domain(format!(
            "function on C^{} paired with a weight on C^{}",
            f.basis.dim(),
            w.dimension()
        )));
    }
    Ok(())
}

/// `‖f‖²_ρ = Σ |c_m|² σ_m m_{|m|}`.
pub fn bergman_norm_sq(f: &HoloFunction, w: &Weight) -> Result<f64> {
    check_dim(f, w)?;
    let b = &f.basis;
    let mut total = 0.0;
    for d in 0..=b.degree() {
        let md = w.moment(d)?;
        let s: f64 = b
            .degree_range(d)
            .map(|i| f.coeffs[i].norm_sqr() * b.sigma(i))
            .sum();
        total += s * md;
    }
    Ok(total)
}

/// `⟨f, g⟩_ρ` in coefficient space.
pub fn bergman_inner(f: &HoloFunction, g: &HoloFunction, w: &Weight) -> Result<Complex64> {
    check_dim(f, w)?;
    if f.basis != g.basis {
        return Err(Error::Domain("inner product of functions on different bases".into()));
    }
    let b = &f.basis;
    let mut total = Complex64::new(0.0, 0.0);
    for d in 0..=b.degree() {
        let md = w.moment(d)?;
        let s: Complex64 = b
            .degree_range(d)
            .map(|i| f.coeffs[i] * g.coeffs[i].conj() * b.sigma(i))
            .sum();
        total += s * md;
    }
    Ok(total)
}

/// Truncated dyadic norm and a bound for the omitted levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicNorm {
    pub value: f64,
    pub tail_bound: f64,
}

/// `Σ_{k=1}^{K} 2^{−k} Σ_m |c_m|² σ_m r_k^{2|m|}`; the levels `k > K` add at most `2^{−K} Σ |c_m|² σ_m`.
pub fn dyadic_norm_sq(f: &HoloFunction, grid: &DyadicGrid) -> DyadicNorm {
    let b = &f.basis;
    let per_degree: Vec<f64> = (0..=b.degree())
        .map(|d| {
            b.degree_range(d)
                .map(|i| f.coeffs[i].norm_sqr() * b.sigma(i))
                .sum()
        })
        .collect();
    let hardy: f64 = per_degree.iter().sum();
    let mut value = 0.0;
    for k in 1..=grid.k_max {
        let r2 = grid.radius(k) * grid.radius(k);
        let mut p = 1.0;
        let mut s = 0.0;
        for &c in &per_degree {
            s += c * p;
            p *= r2;
        }
        value += (-(k as f64)).exp2() * s;
    }
    DyadicNorm {
        value,
        tail_bound: (-(grid.k_max as f64)).exp2() * hardy,
    }
}

/// Result of summing a nonnegative power series at a real argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Contribution past the stored coefficients (estimated or completed).
    pub tail: f64,
    /// Whether the Euler-Maclaurin completion was used.
    pub completed: bool,
}

/// `Σ_d c_d t^d` with `t = 1 − eps ∈ [0, 1)`, exact `head` coefficients
/// followed by the continuous extension `coef(x)` for `x ≥ head.len()`.
pub fn real_series<F: Fn(f64) -> f64>(head: &[f64], coef: F, eps: f64, tol: f64) -> Result<SeriesValue> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("series argument gap must lie in (0, 1], got {eps}")));
    }
    let lt = (-eps).ln_1p();
    let mut value = 0.0;
    for (d, c) in head.iter().enumerate() {
        value += c * (d as f64 * lt).exp();
    }
    let len = head.len();
    if eps == 1.0 {
        return Ok(SeriesValue {
            value: head.first().copied().unwrap_or(0.0),
            tail: 0.0,
            completed: false,
        });
    }
    if len >= 2 {
        let last = head[len - 1];
        let q = lt.exp() * last / head[len - 2];
        let next = last * (len as f64 * lt).exp();
        if q < 0.9 {
            let bound = next / (1.0 - q);
            if bound <= tol * value.abs() {
                return Ok(SeriesValue {
                    value,
                    tail: bound,
                    completed: false,
                });
            }
        }
    }
    let tail = quad::euler_maclaurin_tail(&|x: f64| coef(x) * (x * lt).exp(), len as u64)?;
    Ok(SeriesValue {
        value: value + tail,
        tail,
        completed: true,
    })
}

/// Truncated kernel `K_D(z,w) = Σ_{d≤D} a_d ⟨z,w⟩^d`, `a_d = C(n−1+d, d)/m_d`.
#[derive(Clone, Debug)]
pub struct KernelSeries {
    n: usize,
    degree: usize,
    coeffs: Vec<f64>,
    weight: Weight,
    trusted_modulus: f64,
    tol: f64,
}

impl KernelSeries {
    pub fn new(w: &Weight, degree: usize) -> Result<Self> {
        let n = w.dimension();
        let coeffs = (0..=degree)
            .map(|d| Ok(rising_binomial(n as f64, d as f64) / w.moment(d)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelSeries {
            n,
            degree,
            coeffs,
            weight: w.clone(),
            trusted_modulus: TRUSTED_MODULUS,
            tol: SERIES_TOL,
        })
    }

    pub fn with_trusted_modulus(mut self, m: f64) -> Self {
        self.trusted_modulus = m;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    /// `a(x)` at real degree, used past the stored coefficients.
    pub fn coeff_continuous(&self, x: f64) -> f64 {
        match self.weight.radial_moment(0.0, x) {
            Ok(m) => rising_binomial(self.n as f64, x) / m,
            Err(_) => f64::NAN,
        }
    }

    /// Smallest degree whose geometric tail bound at `|t|` meets the tolerance.
    ///
    /// The bound is measured against `a_0`, the floor [`Self::eval`] accepts for
    /// any `t` of that modulus, so the returned degree never gets refused.
    pub fn required_degree(&self, t_abs: f64) -> Option<usize> {
        let scale = self.coeffs[0];
        let mut d = self.degree.max(1) as f64;
        while d < 1e8 {
            let a1 = self.coeff_continuous(d);
            let a0 = self.coeff_continuous(d - 1.0);
            let q = t_abs * a1 / a0;
            if q < 1.0 {
                let bound = a1 * (d * t_abs.ln()).exp() * t_abs / (1.0 - q);
                if bound <= self.tol * scale {
                    return Some(d.ceil() as usize);
                }
            }
            d = (d * 1.1).ceil();
        }
        None
    }

    /// Geometric envelope for `Σ_{d>D} a_d |t|^d`, infinite if it does not apply.
    fn truncation_bound(&self, t_abs: f64) -> f64 {
        let d = self.degree;
        if d == 0 {
            return f64::INFINITY;
        }
        let q = t_abs * self.coeffs[d] / self.coeffs[d - 1];
        if q >= 1.0 {
            return f64::INFINITY;
        }
        self.coeffs[d] * t_abs.powi(d as i32 + 1) / (1.0 - q)
    }

    /// `K_D(z, w)`, rejected when the truncation error may exceed the tolerance.
    pub fn eval(&self, z: &BallPoint, w: &BallPoint) -> Result<Complex64> {
        let zw = z.norm() * w.norm();
        if zw > self.trusted_modulus {
            return Err(Error::precision(
                format!(
                    "|z||w| = {zw} exceeds the trusted modulus {}",
                    self.trusted_modulus
                ),
                self.required_degree(zw).map(|d| d as u64),
            ));
        }
        let t = z.inner(w);
        let bound = self.truncation_bound(t.norm());
        let value = self.eval_truncated_t(t);
        if !(bound <= self.tol * value.norm().max(self.coeffs[0])) {
            let need = self.required_degree(t.norm());
            return Err(Error::precision(
                format!(
                    "kernel truncation at degree {} leaves a tail bound {bound:e} at |⟨z,w⟩| = {}",
                    self.degree,
                    t.norm()
                ),
                need.map(|d| d as u64),
            ));
        }
        Ok(value)
    }

    /// `Σ_{d≤D} a_d t^d` with no truncation check.
    pub fn eval_truncated_t(&self, t: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * t + a)
    }

    /// `K_D(z, z)`, the truncated diagonal (the compression's reproducing kernel).
    pub fn diag_truncated(&self, z: &BallPoint) -> f64 {
        self.eval_truncated_t(Complex64::new(z.norm_sqr(), 0.0)).re
    }

    /// `K(z, z)` with the tail past degree `D` completed.
    pub fn diag(&self, z: &BallPoint) -> Result<f64> {
        self.diag_gap(1.0 - z.norm())
    }

    /// `K(z, z)` at `|z| = 1 − u`.
    pub fn diag_gap(&self, u: f64) -> Result<f64> {
        let eps = u * (2.0 - u);
        Ok(real_series(&self.coeffs, |x| self.coeff_continuous(x), eps, self.tol)?.value)
    }
}

/// Band of `K(z,z)(1−|z|)^n 2^{−k}` over a sample of the annuli.
#[derive(Clone, Debug, PartialEq)]
pub struct BandReport {
    pub min: f64,
    pub max: f64,
    pub rows: Vec<BandRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandRow {
    pub k: usize,
    pub gap: f64,
    pub value: f64,
}

impl BandReport {
    pub fn from_rows(rows: Vec<BandRow>) -> Self {
        let min = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let max = rows.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        BandReport { min, max, rows }
    }

    pub fn ratio(&self) -> f64 {
        self.max / self.min
    }
}

/// `per_annulus` gaps in `[1−r_{k+1}, 1−r_k)` spaced geometrically, starting at `r_k`, for each `k ≤ K`.
pub fn annulus_gaps(grid: &DyadicGrid, per_annulus: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for k in 0..=grid.k_max {
        let (u0, u1) = (grid.gap(k), grid.gap(k + 1));
        for j in 0..per_annulus {
            out.push((k, u0 * (u1 / u0).powf(j as f64 / per_annulus as f64)));
        }
    }
    out
}

/// Evaluates the diagonal band on `per_annulus` radii per annulus `Ω_0 … Ω_K`.
pub fn kernel_diag_band(ks: &KernelSeries, grid: &DyadicGrid, per_annulus: usize) -> Result<BandReport> {
    let n = ks.dim() as i32;
    let rows = annulus_gaps(grid, per_annulus)
        .into_iter()
        .map(|(k, u)| {
            let v = ks.diag_gap(u)? * u.powi(n) * (-(k as f64)).exp2();
            Ok(BandRow { k, gap: u, value: v })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandReport::from_rows(rows))
}

/// Minimum of `|K(z,w)|²/(K(z,z)K(w,w))` over `w ∈ E(z, α)` sampled through `φ_z`.
pub fn kernel_comparability(ks: &KernelSeries, z: &BallPoint, alpha: f64, samples: u64, seed: u64) -> Result<f64> {
    let n = z.dim();
    let radius = geometry::bergman_ball_radius0(alpha)?;
    let seq = crate::qmc::ShiftedHalton::new(2 * n + 1, seed, 0);
    let mut u = vec![0.0; 2 * n + 1];
    let kzz = ks.eval(z, z)?.re;
    let mut min: f64 = 1.0;
    for i in 0..samples {
        seq.point(i, &mut u);
        let mut eta = vec![Complex64::new(0.0, 0.0); n];
        crate::qmc::ball_point(&u, radius, &mut eta);
        let w = geometry::mobius(z, &BallPoint::new(eta)?);
        let kzw = ks.eval(z, &w)?;
        let kww = ks.eval(&w, &w)?.re;
        min = min.min(kzw.norm_sqr() / (kzz * kww));
    }
    Ok(min)
}

/// `f_a(z) = (1 − ⟨z, a⟩)^{−γ}`, holomorphic in `z`.
pub fn test_function_eval(a: &BallPoint, gamma: f64, z: &BallPoint) -> Complex64 {
    (Complex64::new(1.0, 0.0) - z.inner(a)).powf(-gamma)
}

/// `2^{−k/2} (1−|a|)^{−γ+n/2}`, the normalizer of `h_a`.
pub fn h_normalizer(grid: &DyadicGrid, a: &BallPoint, gamma: f64) -> Result<f64> {
    let u = 1.0 - a.norm();
    let k = geometry::annulus_index_gap(grid, u)?;
    let n = a.dim() as f64;
    Ok((-(k as f64) / 2.0).exp2() * u.powf(-gamma + n / 2.0))
}

/// `h_a(z) = f_a(z) / (2^{−k/2}(1−|a|)^{−γ+n/2})`, `k` the annulus of `a`.
pub fn h_eval(a: &BallPoint, gamma: f64, grid: &DyadicGrid, z: &BallPoint) -> Result<Complex64> {
    Ok(test_function_eval(a, gamma, z) / h_normalizer(grid, a, gamma)?)
}

/// `‖f_a‖²_ρ = Σ_d C(γ+d−1, d)² m_d |a|^{2d} / C(n−1+d, d)`, tail completed.
pub fn test_function_norm_sq(w: &Weight, a: &BallPoint, gamma: f64, degree: usize) -> Result<f64> {
    if a.dim() != w.dimension() {
        return Err(Error::Domain("test function and weight dimensions differ".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
    }
    let n = w.dimension() as f64;
    let coef = |x: f64| -> f64 {
        let b = rising_binomial(gamma, x);
        match w.radial_moment(0.0, x) {
            Ok(m) => b * b * m / rising_binomial(n, x),
            Err(_) => f64::NAN,
        }
    };
    let head = (0..=degree)
        .map(|d| {
            let b = rising_binomial(gamma, d as f64);
            Ok(b * b * w.moment(d)? / rising_binomial(n, d as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let eps = {
        let u = 1.0 - a.norm();
        u * (2.0 - u)
    };
    Ok(real_series(&head, coef, eps, SERIES_TOL)?.value)
}

/// `‖h_a‖²_ρ`.
pub fn h_norm_sq(w: &Weight, grid: &DyadicGrid, a: &BallPoint, gamma: f64, degree: usize) -> Result<f64> {
    let s = h_normalizer(grid, a, gamma)?;
    Ok(test_function_norm_sq(w, a, gamma, degree)? / (s * s))
}

/// Maximum of `|f(z)|²(1−|z|)^n 2^{−k} / ‖f‖²_ρ` over the sample.
pub fn pointwise_bound_check(f: &HoloFunction, w: &Weight, grid: &DyadicGrid, sample: &[BallPoint]) -> Result<f64> {
    let norm = bergman_norm_sq(f, w)?;
    if !(norm > 0.0) {
        return Err(Error::Domain("pointwise bound needs ‖f‖ > 0".into()));
    }
    let n = w.dimension() as i32;
    let mut max: f64 = 0.0;
    for z in sample {
        let u = 1.0 - z.norm();
        let k = geometry::annulus_index_gap(grid, u)?;
        let v = f.eval(z.coords()).norm_sqr() * u.powi(n) * (-(k as f64)).exp2() / norm;
        max = max.max(v);
    }
    Ok(max)
}

/// Maximum over the sample of `|f(z)|² (1−|z|)^n 2^{−k} / ∫_{E(z,α)} |f|² ρ dv`,
/// the constant needed in the local subharmonic estimate.
pub fn subharmonic_constant(
    f: &HoloFunction,
    w: &Weight,
    grid: &DyadicGrid,
    sample: &[BallPoint],
    alpha: f64,
    sampling: BallSampling,
) -> Result<f64> {
    check_dim(f, w)?;
    let n = w.dimension() as i32;
    let mut max: f64 = 0.0;
    for z in sample {
        let u = 1.0 - z.norm();
        let k = geometry::annulus_index_gap(grid, u)?;
        let local = geometry::bergman_ball_integral(z, alpha, sampling, |p, gap2| {
            let r = (1.0 - gap2).max(0.0).sqrt();
            f.eval(p).norm_sqr() * w.density_gap(gap2 / (1.0 + r))
        })?;
        let v = f.eval(z.coords()).norm_sqr() * u.powi(n) * (-(k as f64)).exp2() / local.value;
        max = max.max(v);
    }
    Ok(max)
}

/// The truncated kernel function `K_z` as a polynomial: coefficient of `w^m` is `a_{|m|} (|m|!/m!) z̄^m`.
pub fn kernel_function(ks: &KernelSeries, basis: Arc<MultiIndexBasis>, z: &BallPoint) -> Result<HoloFunction> {
    if basis.degree() > ks.degree() || basis.dim() != ks.dim() {
        return Err(Error::Domain("basis exceeds the kernel series".into()));
    }
    let zc: Vec<Complex64> = z.coords().iter().map(|c| c.conj()).collect();
    let mono = basis.monomials(&zc);
    let coeffs = (0..basis.len())
        .map(|i| {
            let m = basis.index(i);
            let d = basis.total_degree(i);
            let multinom = (ln_fact(d as u32) - m.iter().map(|&k| ln_fact(k)).sum::<f64>()).exp();
            mono[i] * ks.coeffs()[d] * multinom
        })
        .collect();
    HoloFunction::from_coeffs(basis, coeffs)
}
