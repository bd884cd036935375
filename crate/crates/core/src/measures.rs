//! Finite positive measures on the ball and integration against them.
//!
//! Three models: finitely many atoms, radial densities relative to the
//! weight (`dμ = c (1−|z|)^s ρ dv`, optionally cut to a gap window), and
//! finite sums of indicator functions of small Euclidean balls. Atoms are
//! integrated exactly, radial densities in coefficient space or by 1-D
//! quadrature, ball sums by randomized quasi-Monte-Carlo on each ball.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, BallPoint, BallSampling, CarlesonBox};
use crate::holofn::HoloFunction;
use crate::qmc::{self, Estimate, ShiftedHalton};
use crate::quad::{self, ln_gamma, Tolerance};
use crate::weights::{DyadicGrid, Weight};

/// `dμ = scale · (1−|z|)^{gap_power} ρ(|z|) dv` on `1 − |z| ∈ (gap_lo, gap_hi]`.
#[derive(Clone, Debug)]
pub struct RadialDensity {
    pub weight: Weight,
    pub scale: f64,
    pub gap_power: f64,
    pub gap_lo: f64,
    pub gap_hi: f64,
}

impl RadialDensity {
    pub fn new(weight: &Weight, scale: f64, gap_power: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("density scale must be nonnegative, got {scale}")));
        }
        if !gap_power.is_finite() || gap_power < 0.0 {
            return Err(Error::Domain(format!("gap power must be ≥ 0, got {gap_power}")));
        }
        Ok(RadialDensity {
            weight: weight.clone(),
            scale,
            gap_power,
            gap_lo: 0.0,
            gap_hi: 1.0,
        })
    }

    /// Density at gap `u` (zero outside the window).
    pub fn density_gap(&self, u: f64) -> f64 {
        if u <= self.gap_lo || u > self.gap_hi {
            return 0.0;
        }
        self.scale * u.powf(self.gap_power) * self.weight.density_gap(u)
    }

    /// `2n ∫ r^{2x+2n−1} w_μ(r) dr`, the radial moment of the profile at real degree `x`.
    pub fn moment(&self, x: f64) -> Result<f64> {
        if self.scale == 0.0 {
            return Ok(0.0);
        }
        Ok(self.scale * self.weight.window_moment(self.gap_power, x, self.gap_lo, self.gap_hi)?)
    }

    fn window(&self, lo: f64, hi: f64) -> Self {
        RadialDensity {
            gap_lo: self.gap_lo.max(lo),
            gap_hi: self.gap_hi.min(hi),
            ..self.clone()
        }
    }
}

/// Weighted nodes `(w, weight)` of one quadrature rotation.
pub type NodeRule = Vec<(Vec<Complex64>, f64)>;

/// `dμ = Σ c_j χ_{B(z_j, ε(1−|z_j|))} dv`, optionally cut to a gap window.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSum {
    pub centers: Vec<BallPoint>,
    pub coefficients: Vec<f64>,
    pub eps: f64,
    pub radii: Vec<f64>,
    pub gap_lo: f64,
    pub gap_hi: f64,
}

impl BallSum {
    pub fn new(centers: Vec<BallPoint>, coefficients: Vec<f64>, eps: f64) -> Result<Self> {
        if centers.len() != coefficients.len() {
            return Err(Error::Construction(format!(
                "{} centers but {} coefficients",
                centers.len(),
                coefficients.len()
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("relative radius ε must lie in (0, 1), got {eps}")));
        }
        check_positive(&coefficients, "coefficient")?;
        check_same_dim(&centers)?;
        let radii = centers.iter().map(|z| eps * (1.0 - z.norm())).collect();
        Ok(BallSum {
            centers,
            coefficients,
            eps,
            radii,
            gap_lo: 0.0,
            gap_hi: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map(|c| c.dim()).unwrap_or(1)
    }

    fn in_window(&self, w: &[Complex64]) -> bool {
        let u = 1.0 - geometry::norm_sqr(w).sqrt();
        u > self.gap_lo && u <= self.gap_hi
    }

    /// Per-rotation node sets: points and weights reproducing `∫ · dμ`.
    pub fn rules(&self, sampling: BallSampling) -> Vec<NodeRule> {
        let n = self.dim();
        (0..sampling.rotations)
            .map(|rot| {
                let mut nodes = Vec::new();
                let mut u = vec![0.0; 2 * n + 1];
                for (j, (c, (&coef, &rad))) in self
                    .centers
                    .iter()
                    .zip(self.coefficients.iter().zip(&self.radii))
                    .enumerate()
                {
                    let seq = ShiftedHalton::new(2 * n + 1, sampling.seed, ((j as u64) << 20) + rot);
                    let wt = coef * rad.powi(2 * n as i32) / sampling.per_rotation as f64;
                    for i in 0..sampling.per_rotation {
                        seq.point(i, &mut u);
                        let mut p = vec![Complex64::new(0.0, 0.0); n];
                        qmc::ball_point(&u, rad, &mut p);
                        for (pi, ci) in p.iter_mut().zip(c.coords()) {
                            *pi += ci;
                        }
                        if self.in_window(&p) {
                            nodes.push((p, wt));
                        }
                    }
                }
                nodes
            })
            .collect()
    }

    /// `Σ_j c_j v(B_j)` before any window cut.
    pub fn nominal_mass(&self) -> f64 {
        let n = self.dim() as i32;
        self.coefficients
            .iter()
            .zip(&self.radii)
            .map(|(c, r)| c * r.powi(2 * n))
            .sum()
    }
}

/// A finite positive measure on the ball.
#[derive(Clone, Debug)]
pub enum Measure {
    Atomic {
        points: Vec<BallPoint>,
        masses: Vec<f64>,
    },
    RadialDensity(RadialDensity),
    EuclideanBallSum(BallSum),
}

fn check_positive(v: &[f64], what: &str) -> Result<()> {
    for &m in v {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("{what} must be positive and finite, got {m}")));
        }
    }
    Ok(())
}

fn check_same_dim(points: &[BallPoint]) -> Result<()> {
    if let Some(p) = points.first() {
        if points.iter().any(|q| q.dim() != p.dim()) {
            return Err(Error::Domain("points of different dimensions".into()));
        }
    }
    Ok(())
}

/// Value with a reported standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEstimate {
    pub value: Complex64,
    pub std_error: f64,
}

/// Mass estimate with standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mass {
    pub value: f64,
    pub std_error: f64,
}

impl Mass {
    pub fn exact(value: f64) -> Self {
        Mass {
            value,
            std_error: 0.0,
        }
    }

    fn from_estimate(e: Estimate) -> Self {
        Mass {
            value: e.value,
            std_error: e.std_error,
        }
    }

    fn scaled(self, s: f64) -> Self {
        Mass {
            value: self.value * s,
            std_error: self.std_error * s,
        }
    }
}

fn mean_and_error(per_rotation: &[f64]) -> (f64, f64) {
    let m = per_rotation.len() as f64;
    let mean = per_rotation.iter().sum::<f64>() / m;
    if per_rotation.len() < 2 {
        return (mean, 0.0);
    }
    let var = per_rotation.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

impl Measure {
    pub fn atomic(points: Vec<BallPoint>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::Construction(format!(
                "{} atoms but {} masses",
                points.len(),
                masses.len()
            )));
        }
        check_positive(&masses, "atom mass")?;
        check_same_dim(&points)?;
        Ok(Measure::Atomic { points, masses })
    }

    pub fn single_atom(point: BallPoint, mass: f64) -> Result<Self> {
        Self::atomic(vec![point], vec![mass])
    }

    /// `c (1−|z|)^s ρ dv`.
    pub fn radial(weight: &Weight, scale: f64, gap_power: f64) -> Result<Self> {
        Ok(Measure::RadialDensity(RadialDensity::new(weight, scale, gap_power)?))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Measure::Atomic { points, .. } => points.is_empty(),
            Measure::RadialDensity(r) => r.scale == 0.0 || r.gap_hi <= r.gap_lo,
            Measure::EuclideanBallSum(b) => b.centers.is_empty() || b.gap_hi <= b.gap_lo,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Measure::Atomic { .. } => "atomic",
            Measure::RadialDensity(_) => "radial",
            Measure::EuclideanBallSum(_) => "ball-sum",
        }
    }

    /// Multiplies the measure by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        Ok(match self {
            Measure::Atomic { points, masses } => Measure::Atomic {
                points: points.clone(),
                masses: masses.iter().map(|m| m * c).collect(),
            },
            Measure::RadialDensity(r) => Measure::RadialDensity(RadialDensity {
                scale: r.scale * c,
                ..r.clone()
            }),
            Measure::EuclideanBallSum(b) => Measure::EuclideanBallSum(BallSum {
                coefficients: b.coefficients.iter().map(|m| m * c).collect(),
                ..b.clone()
            }),
        })
    }

    /// Restricts to gaps `1 − |z| ∈ (lo, hi]`.
    pub fn restrict_to_gaps(&self, lo: f64, hi: f64) -> Measure {
        match self {
            Measure::Atomic { points, masses } => {
                let (p, m): (Vec<_>, Vec<_>) = points
                    .iter()
                    .zip(masses)
                    // compared as radii, like `annulus_index_radius`: an atom placed at
                    // `r_k = 1 − u_k` must land in Ω_k even when `1 − r_k ≠ u_k` in floating point
                    .filter(|(z, _)| {
                        let r = z.norm();
                        r >= 1.0 - hi && r < 1.0 - lo
                    })
                    .map(|(z, &m)| (z.clone(), m))
                    .unzip();
                Measure::Atomic {
                    points: p,
                    masses: m,
                }
            }
            Measure::RadialDensity(r) => Measure::RadialDensity(r.window(lo, hi)),
            Measure::EuclideanBallSum(b) => Measure::EuclideanBallSum(BallSum {
                gap_lo: b.gap_lo.max(lo),
                gap_hi: b.gap_hi.min(hi),
                ..b.clone()
            }),
        }
    }

    /// Contribution of μ at a point for pointwise integrands: exact atoms,
    /// or the nodes of a quadrature rule. Radial densities have none.
    fn nodes(&self, sampling: BallSampling) -> Option<Vec<NodeRule>> {
        match self {
            Measure::Atomic { points, masses } => Some(vec![points
                .iter()
                .zip(masses)
                .map(|(p, &m)| (p.coords().to_vec(), m))
                .collect()]),
            Measure::EuclideanBallSum(b) => Some(b.rules(sampling)),
            Measure::RadialDensity(_) => None,
        }
    }

    /// `∫ F dμ` for a pointwise integrand; radial densities go through Bergman-ball-free
    /// polar quadrature only where a 1-D reduction exists, so they are rejected here.
    pub fn integrate_nodes<F: Fn(&[Complex64]) -> f64>(&self, sampling: BallSampling, f: F) -> Result<Mass> {
        let Some(rules) = self.nodes(sampling) else {
            return Err(Error::Domain(
                "pointwise integration of a radial density needs a reduction; use the module routines".into(),
            ));
        };
        let per: Vec<f64> = rules
            .iter()
            .map(|nodes| nodes.iter().map(|(p, w)| w * f(p)).sum())
            .collect();
        let (value, std_error) = mean_and_error(&per);
        Ok(Mass { value, std_error })
    }

    /// `sup |w|` over the support; `1` for radial densities.
    pub fn outer_radius(&self) -> f64 {
        match self {
            Measure::Atomic { points, .. } => points.iter().map(|p| p.norm()).fold(0.0, f64::max),
            Measure::EuclideanBallSum(b) => b
                .centers
                .iter()
                .zip(&b.radii)
                .map(|(c, r)| (c.norm() + r).min(1.0))
                .fold(0.0, f64::max),
            Measure::RadialDensity(_) => 1.0,
        }
    }

    /// Total mass of the measure.
    pub fn total_mass(&self, sampling: BallSampling) -> Result<Mass> {
        match self {
            Measure::Atomic { masses, .. } => Ok(Mass::exact(masses.iter().sum())),
            Measure::RadialDensity(r) => Ok(Mass::exact(r.moment(0.0)?)),
            Measure::EuclideanBallSum(b) => {
                if b.gap_lo == 0.0 && b.gap_hi == 1.0 {
                    Ok(Mass::exact(b.nominal_mass()))
                } else {
                    self.integrate_nodes(sampling, |_| 1.0)
                }
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Measure::Atomic { points, .. } => points.first().map(|p| p.dim()),
            Measure::RadialDensity(r) => Some(r.weight.dimension()),
            Measure::EuclideanBallSum(b) => b.centers.first().map(|p| p.dim()),
        }
    }
}

/// `∫ f ḡ dμ`.
pub fn pair_integral(f: &HoloFunction, g: &HoloFunction, mu: &Measure, sampling: BallSampling) -> Result<PairEstimate> {
    if !std::sync::Arc::ptr_eq(f.basis(), g.basis()) && f.basis() != g.basis() {
        return Err(Error::Domain("pair integral of functions on different bases".into()));
    }
    match mu {
        Measure::Atomic { points, masses } => {
            let value = points
                .iter()
                .zip(masses)
                .map(|(p, &m)| f.eval(p.coords()) * g.eval(p.coords()).conj() * m)
                .sum();
            Ok(PairEstimate {
                value,
                std_error: 0.0,
            })
        }
        Measure::RadialDensity(r) => {
            if r.weight.dimension() != f.basis().dim() {
                return Err(Error::Domain("measure and function dimensions differ".into()));
            }
            let b = f.basis();
            let mut value = Complex64::new(0.0, 0.0);
            for d in 0..=b.degree() {
                let s: Complex64 = b
                    .degree_range(d)
                    .map(|i| f.coeffs()[i] * g.coeffs()[i].conj() * b.sigma(i))
                    .sum();
                if s != Complex64::new(0.0, 0.0) {
                    value += s * r.moment(d as f64)?;
                }
            }
            Ok(PairEstimate {
                value,
                std_error: 0.0,
            })
        }
        Measure::EuclideanBallSum(bs) => {
            let rules = bs.rules(sampling);
            let mut re = Vec::with_capacity(rules.len());
            let mut im = Vec::with_capacity(rules.len());
            for nodes in &rules {
                let s: Complex64 = nodes
                    .iter()
                    .map(|(p, w)| f.eval(p) * g.eval(p).conj() * *w)
                    .sum();
                re.push(s.re);
                im.push(s.im);
            }
            let (vr, er) = mean_and_error(&re);
            let (vi, ei) = mean_and_error(&im);
            Ok(PairEstimate {
                value: Complex64::new(vr, vi),
                std_error: er.hypot(ei),
            })
        }
    }
}

/// [`pair_integral`] with a relative standard-error budget; the error names a sample size that should meet it.
pub fn pair_integral_checked(
    f: &HoloFunction,
    g: &HoloFunction,
    mu: &Measure,
    sampling: BallSampling,
    rel_tol: f64,
) -> Result<PairEstimate> {
    let est = pair_integral(f, g, mu, sampling)?;
    let scale = est.value.norm();
    if est.std_error > rel_tol * scale {
        let factor = (est.std_error / (rel_tol * scale.max(f64::MIN_POSITIVE))).powi(2);
        let hint = (sampling.per_rotation as f64 * factor).ceil().min(u64::MAX as f64) as u64;
        return Err(Error::precision(
            format!(
                "quasi-Monte-Carlo standard error {:e} exceeds {rel_tol:e} × |value|",
                est.std_error
            ),
            Some(hint),
        ));
    }
    Ok(est)
}

/// `μ_k = χ_{Ω_k} μ` with `Ω_k = {r_k ≤ |z| < r_{k+1}}`.
pub fn restrict_to_annulus(mu: &Measure, grid: &DyadicGrid, k: usize) -> Result<Measure> {
    if k > grid.k_max {
        return Err(Error::Range(format!("annulus {k} exceeds K_max = {}", grid.k_max)));
    }
    Ok(mu.restrict_to_gaps(grid.gap(k + 1), grid.gap(k)))
}

/// Fraction of the unit sphere `ξ` with `|1 − r⟨ξ, ζ⟩| < d`, given the gap `u = 1 − r`.
pub fn sphere_box_fraction(n: usize, u: f64, d: f64) -> Result<f64> {
    let r = 1.0 - u;
    if r <= 0.0 {
        return Ok(if d > 1.0 { 1.0 } else { 0.0 });
    }
    // with ω = q e^{iθ}: 4rq sin²(θ/2) < d² − (1 − rq)², and 1 − rq = u + r(1 − q) stays exact
    let angle = |q: f64| {
        if q <= 0.0 {
            return if d > 1.0 { 1.0 } else { 0.0 };
        }
        let g = u + r * (1.0 - q);
        let num = (d - g) * (d + g);
        if num <= 0.0 {
            return 0.0;
        }
        let s = (num / (4.0 * r * q)).sqrt();
        if s >= 1.0 {
            1.0
        } else {
            2.0 * s.asin() / std::f64::consts::PI
        }
    };
    if n == 1 {
        return Ok(angle(1.0));
    }
    // ω = ⟨ξ, ζ⟩ has radial density 2(n−1) q (1−q²)^{n−2} on [0, 1]
    let nm = (n - 2) as i32;
    let f = |q: f64| 2.0 * (n - 1) as f64 * q * ((1.0 - q) * (1.0 + q)).powi(nm) * angle(q);
    let mut breaks = vec![0.0, 1.0];
    for k in [(1.0 - d) / r, (d - 1.0) / r] {
        if k > 0.0 && k < 1.0 {
            breaks.push(k);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // the fraction lies in [0, 1], so an absolute floor is safe
    let tol = Tolerance {
        abs: 1e-16,
        rel: 1e-13,
        ..Tolerance::default()
    };
    Ok(quad::adaptive_pieces(&f, &breaks, tol)?.value)
}

/// `μ(Q_a)`.
pub fn box_mass(mu: &Measure, a: &BallPoint, sampling: BallSampling) -> Result<Mass> {
    let bx = CarlesonBox::new(a)?;
    box_mass_in(mu, &bx, sampling)
}

pub fn box_mass_in(mu: &Measure, bx: &CarlesonBox, sampling: BallSampling) -> Result<Mass> {
    let thr = bx.radius() * bx.radius();
    match mu {
        Measure::Atomic { points, masses } => Ok(Mass::exact(
            points
                .iter()
                .zip(masses)
                .filter(|(p, _)| bx.contains(p))
                .map(|(_, m)| m)
                .sum(),
        )),
        Measure::RadialDensity(r) => {
            let n = r.weight.dimension();
            // only |z| > 1 − thr can satisfy |1 − ⟨ζ, z⟩| < thr
            let lo = r.gap_lo;
            let hi = r.gap_hi.min(thr);
            if hi <= lo || r.scale == 0.0 {
                return Ok(Mass::exact(0.0));
            }
            let h = |u: f64| {
                let rr = 1.0 - u;
                2.0 * n as f64 * rr.powi(2 * n as i32 - 1) * sphere_box_fraction(n, u, thr).unwrap_or(f64::NAN)
            };
            let mut breaks = vec![0.5 * hi];
            if 2.0 - thr > lo && 2.0 - thr < hi {
                breaks.push(2.0 - thr);
            }
            let v = r.scale * r.weight.gap_integral(r.gap_power, lo, hi, &h, &breaks)?;
            Ok(Mass::exact(v))
        }
        Measure::EuclideanBallSum(_) => mu.integrate_nodes(sampling, |p| {
            if bx.distance(p) < thr {
                1.0
            } else {
                0.0
            }
        }),
    }
}

/// `μ(E(z, α))`.
pub fn ball_mass(mu: &Measure, z: &BallPoint, alpha: f64, sampling: BallSampling) -> Result<Mass> {
    let radius = geometry::bergman_ball_radius0(alpha)?;
    let r2 = radius * radius;
    match mu {
        Measure::Atomic { points, masses } => Ok(Mass::exact(
            points
                .iter()
                .zip(masses)
                .filter(|(p, _)| geometry::pseudo_hyperbolic_sqr(z, p) < r2)
                .map(|(_, m)| m)
                .sum(),
        )),
        Measure::RadialDensity(r) => {
            let est = geometry::bergman_ball_integral(z, alpha, sampling, |w, gap2| {
                let rr = geometry::norm_sqr(w).sqrt();
                r.density_gap(gap2 / (1.0 + rr))
            })?;
            Ok(Mass::from_estimate(est))
        }
        Measure::EuclideanBallSum(b) => {
            // only balls that can meet E(z, α) are sampled
            let zb = z.clone();
            let reach = alpha + 0.5;
            let near: Vec<usize> = (0..b.centers.len())
                .filter(|&j| geometry::bergman_dist(&zb, &b.centers[j]) < reach + ball_bergman_radius(&b.centers[j], b.radii[j]))
                .collect();
            if near.is_empty() {
                return Ok(Mass::exact(0.0));
            }
            let sub = BallSum {
                centers: near.iter().map(|&j| b.centers[j].clone()).collect(),
                coefficients: near.iter().map(|&j| b.coefficients[j]).collect(),
                radii: near.iter().map(|&j| b.radii[j]).collect(),
                ..b.clone()
            };
            Measure::EuclideanBallSum(sub).integrate_nodes(sampling, |p| {
                let q = BallPoint::new(p.to_vec());
                match q {
                    Ok(q) if geometry::pseudo_hyperbolic_sqr(z, &q) < r2 => 1.0,
                    _ => 0.0,
                }
            })
        }
    }
}

/// Upper bound for the Bergman radius of the Euclidean ball `B(c, ρ)` seen from `c`.
pub fn ball_bergman_radius(c: &BallPoint, rho: f64) -> f64 {
    let r = c.norm();
    let g = 1.0 - r * r;
    let outer = 1.0 - (r + rho).powi(2);
    if outer <= 0.0 {
        return f64::INFINITY;
    }
    // 1 − |φ_c(w)|² ≥ (1−|c|²)(1−(|c|+ρ)²)/(1−|c|²+|c|ρ)²
    let low = g * outer / (g + r * rho).powi(2);
    (1.0 - low).max(0.0).sqrt().atanh()
}

/// `μ̂_α(z) = 2^k μ(E(z, α)) / (1−|z|)^n`, `k` the annulus of `z`.
pub fn mu_hat(mu: &Measure, grid: &DyadicGrid, z: &BallPoint, alpha: f64, sampling: BallSampling) -> Result<Mass> {
    let u = 1.0 - z.norm();
    let k = geometry::annulus_index_gap(grid, u)?;
    let m = ball_mass(mu, z, alpha, sampling)?;
    Ok(m.scaled((k as f64).exp2() / u.powi(z.dim() as i32)))
}

/// `2^k ρ(|z|)/(1−|z|)^n`.
pub fn lambda_density(w: &Weight, grid: &DyadicGrid, z: &BallPoint) -> Result<f64> {
    lambda_density_gap(w, grid, 1.0 - z.norm())
}

pub fn lambda_density_gap(w: &Weight, grid: &DyadicGrid, u: f64) -> Result<f64> {
    let k = geometry::annulus_index_gap(grid, u)?;
    Ok((k as f64).exp2() * w.density_gap(u) / u.powi(w.dimension() as i32))
}

/// Normalized volume of the cap `{x ∈ B(0, R) : x_1 > a}` in `R^m`, `|a| ≤ R`.
fn cap_volume(m: usize, radius: f64, a: f64) -> Result<f64> {
    let h = (a / radius).clamp(-1.0, 1.0);
    // V_{m−1}/V_m ∫_h^1 (1−x²)^{(m−1)/2} dx = V_{m−1}/V_m ∫_0^{acos h} sin^m θ dθ
    let mf = m as f64;
    let ratio = (ln_gamma(mf / 2.0 + 1.0) - ln_gamma(mf / 2.0 + 0.5)).exp() / std::f64::consts::PI.sqrt();
    let theta = h.acos();
    if theta == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| t.sin().powi(m as i32);
    let tol = Tolerance {
        rel: 1e-13,
        ..Tolerance::default()
    };
    Ok(radius.powi(m as i32) * ratio * quad::adaptive(&f, 0.0, theta, tol)?.value)
}

/// Normalized volume of `B(c₁, r₁) ∩ B(c₂, r₂)` in `C^n` for centers at distance `d`.
pub fn ball_intersection_volume(n: usize, r1: f64, r2: f64, d: f64) -> Result<f64> {
    let m = 2 * n;
    if d >= r1 + r2 {
        return Ok(0.0);
    }
    if d <= (r1 - r2).abs() {
        return Ok(r1.min(r2).powi(m as i32));
    }
    let a1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let a2 = d - a1;
    Ok(cap_volume(m, r1, a1)? + cap_volume(m, r2, a2)?)
}

/// `μ̃_ε(z) = μ(B(z, ε(1−|z|))) / (1−|z|)^{2n}`.
pub fn mu_tilde(mu: &Measure, z: &BallPoint, eps: f64, sampling: BallSampling) -> Result<Mass> {
    let n = z.dim();
    let u = 1.0 - z.norm();
    let rad = eps * u;
    let norm = u.powi(2 * n as i32);
    let dist = |p: &[Complex64]| {
        p.iter()
            .zip(z.coords())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let m = match mu {
        Measure::Atomic { points, masses } => Mass::exact(
            points
                .iter()
                .zip(masses)
                .filter(|(p, _)| dist(p.coords()) < rad)
                .map(|(_, m)| m)
                .sum(),
        ),
        Measure::EuclideanBallSum(b) if b.gap_lo == 0.0 && b.gap_hi == 1.0 => {
            let mut v = 0.0;
            for ((c, &coef), &r) in b.centers.iter().zip(&b.coefficients).zip(&b.radii) {
                v += coef * ball_intersection_volume(n, rad, r, dist(c.coords()))?;
            }
            Mass::exact(v)
        }
        Measure::EuclideanBallSum(_) => mu.integrate_nodes(sampling, |p| if dist(p) < rad { 1.0 } else { 0.0 })?,
        Measure::RadialDensity(r) => {
            let est = qmc::rqmc_mean(2 * n + 1, sampling.seed, sampling.rotations, sampling.per_rotation, |s| {
                let mut p = vec![Complex64::new(0.0, 0.0); n];
                qmc::ball_point(s, rad, &mut p);
                for (pi, ci) in p.iter_mut().zip(z.coords()) {
                    *pi += ci;
                }
                r.density_gap(1.0 - geometry::norm_sqr(&p).sqrt())
            });
            Mass::from_estimate(est).scaled(rad.powi(2 * n as i32))
        }
    };
    Ok(m.scaled(1.0 / norm))
}

/// Centers `z_j = (1 − q^j) e_1`, `j = 1 … levels`.
pub fn remark_centers(n: usize, levels: usize, gap_ratio: f64) -> Result<Vec<BallPoint>> {
    if !(gap_ratio > 0.0 && gap_ratio < 1.0) {
        return Err(Error::Config(format!("gap ratio must lie in (0, 1), got {gap_ratio}")));
    }
    (1..=levels)
        .map(|j| BallPoint::on_axis(n, 1.0 - gap_ratio.powi(j as i32)))
        .collect()
}

/// `Σ c_j χ_{B(z_j, ε(1−|z_j|))}` with pairwise disjoint balls.
pub fn remark_measure(centers: Vec<BallPoint>, coefficients: Vec<f64>, eps: f64) -> Result<Measure> {
    let b = BallSum::new(centers, coefficients, eps)?;
    for i in 0..b.centers.len() {
        for j in i + 1..b.centers.len() {
            let d: f64 = b.centers[i]
                .coords()
                .iter()
                .zip(b.centers[j].coords())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if d < b.radii[i] + b.radii[j] {
                return Err(Error::Construction(format!(
                    "balls {i} and {j} overlap (distance {d}, radii {} and {})",
                    b.radii[i], b.radii[j]
                )));
            }
        }
    }
    Ok(Measure::EuclideanBallSum(b))
}

/// Atoms `m_k e_1 r_k`-placed on the dyadic radii `r_0 … r_K` with masses `mass(k, 1 − r_k)`.
pub fn dyadic_atoms<F: Fn(usize, f64) -> f64>(n: usize, grid: &DyadicGrid, mass: F) -> Result<Measure> {
    let points = (0..=grid.k_max)
        .map(|k| BallPoint::on_axis(n, grid.radius(k)))
        .collect::<Result<Vec<_>>>()?;
    let masses = (0..=grid.k_max).map(|k| mass(k, grid.gap(k))).collect();
    Measure::atomic(points, masses)
}

/// Mass of `μ_k` for every annulus.
pub fn annulus_masses(mu: &Measure, grid: &DyadicGrid, sampling: BallSampling) -> Result<Vec<Mass>> {
    (0..=grid.k_max)
        .map(|k| restrict_to_annulus(mu, grid, k)?.total_mass(sampling))
        .collect()
}

/// CSV `k, r_k, mass, std_error`.
pub fn write_annulus_masses_csv<W: std::io::Write>(grid: &DyadicGrid, masses: &[Mass], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "r_k", "mass", "std_error"])?;
    for (k, m) in masses.iter().enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:.17}", grid.radius(k)),
            format!("{:.15e}", m.value),
            format!("{:.3e}", m.std_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON description of a measure; radial densities refer to the experiment weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Points as flat `[re, im, re, im, …]` lists.
    Atomic { points: Vec<Vec<f64>>, masses: Vec<f64> },
    Radial {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        gap_power: f64,
    },
    BallSum {
        centers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        eps: f64,
    },
    /// One ball per level at `1 − |z_j| = gap_ratio^j`.
    Remark {
        levels: usize,
        #[serde(default = "quarter")]
        gap_ratio: f64,
        #[serde(default = "tenth")]
        eps: f64,
    },
    /// Atoms at `r_k e_1` with mass `factor_k (1 − r_k)^n`.
    DyadicAtoms { rule: AtomRule },
}

/// Mass factor of [`MeasureSpec::DyadicAtoms`] at level `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomRule {
    /// `4^{−k}`.
    Decaying,
    /// `2^{−k}`.
    Critical,
    /// `k 2^{−k}`.
    Growing,
}

impl AtomRule {
    pub fn factor(self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            AtomRule::Decaying => (-2.0 * kf).exp2(),
            AtomRule::Critical => (-kf).exp2(),
            AtomRule::Growing => kf.max(1.0) * (-kf).exp2(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn quarter() -> f64 {
    0.25
}
fn tenth() -> f64 {
    0.1
}

fn point_from_flat(v: &[f64]) -> Result<BallPoint> {
    if !v.len().is_multiple_of(2) || v.is_empty() {
        return Err(Error::Config(format!(
            "point must be a flat [re, im, …] list of even length, got {} numbers",
            v.len()
        )));
    }
    BallPoint::new(v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

impl MeasureSpec {
    pub fn build(&self, weight: &Weight, grid: &DyadicGrid) -> Result<Measure> {
        let n = weight.dimension();
        let check = |p: &BallPoint| {
            if p.dim() != n {
                Err(Error::Config(format!("point in C^{} for a weight on C^{n}", p.dim())))
            } else {
                Ok(())
            }
        };
        match self {
            MeasureSpec::Atomic { points, masses } => {
                let pts = points.iter().map(|v| point_from_flat(v)).collect::<Result<Vec<_>>>()?;
                pts.iter().try_for_each(check)?;
                Measure::atomic(pts, masses.clone())
            }
            MeasureSpec::Radial { scale, gap_power } => Measure::radial(weight, *scale, *gap_power),
            MeasureSpec::BallSum {
                centers,
                coefficients,
                eps,
            } => {
                let pts = centers.iter().map(|v| point_from_flat(v)).collect::<Result<Vec<_>>>()?;
                pts.iter().try_for_each(check)?;
                remark_measure(pts, coefficients.clone(), *eps)
            }
            MeasureSpec::Remark {
                levels,
                gap_ratio,
                eps,
            } => {
                let c = remark_centers(n, *levels, *gap_ratio)?;
                let coef = vec![1.0; c.len()];
                remark_measure(c, coef, *eps)
            }
            MeasureSpec::DyadicAtoms { rule } => {
                dyadic_atoms(n, grid, |k, u| rule.factor(k) * u.powi(n as i32))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holofn::MultiIndexBasis;
    use crate::weights::Family;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sampling() -> BallSampling {
        BallSampling {
            rotations: 8,
            per_rotation: 2048,
            seed: 3,
        }
    }

    #[test]
    fn single_atom_pairing() {
        let b = Arc::new(MultiIndexBasis::new(2, 4).unwrap());
        let f = HoloFunction::monomial(b.clone(), &[1, 2]).unwrap();
        let g = HoloFunction::monomial(b.clone(), &[0, 1]).unwrap().scale(c(0.0, 2.0));
        let z0 = BallPoint::new(vec![c(0.3, 0.1), c(-0.2, 0.5)]).unwrap();
        let mu = Measure::single_atom(z0.clone(), 1.5).unwrap();
        let p = pair_integral(&f, &g, &mu, sampling()).unwrap();
        let direct = f.eval(z0.coords()) * g.eval(z0.coords()).conj() * 1.5;
        assert_eq!(p.value, direct);
        assert_eq!(p.std_error, 0.0);
    }

    #[test]
    fn radial_weight_pairing_is_orthonormal_after_normalization() {
        let w = Weight::normalize(Family::Power { beta: 0.5 }, 2).unwrap();
        let mu = Measure::radial(&w, 1.0, 0.0).unwrap();
        let b = Arc::new(MultiIndexBasis::new(2, 5).unwrap());
        for i in 0..b.len() {
            for j in 0..b.len() {
                let (mi, mj) = (b.index(i), b.index(j));
                let ni = (b.sigma(i) * w.moment(b.total_degree(i)).unwrap()).sqrt();
                let nj = (b.sigma(j) * w.moment(b.total_degree(j)).unwrap()).sqrt();
                let ei = HoloFunction::monomial(b.clone(), mi).unwrap().scale(c(1.0 / ni, 0.0));
                let ej = HoloFunction::monomial(b.clone(), mj).unwrap().scale(c(1.0 / nj, 0.0));
                let v = pair_integral(&ei, &ej, &mu, sampling()).unwrap().value;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_measure_pairs_to_zero() {
        let b = Arc::new(MultiIndexBasis::new(1, 3).unwrap());
        let f = HoloFunction::constant(b.clone(), c(1.0, 0.0));
        let mu = Measure::atomic(vec![], vec![]).unwrap();
        assert_eq!(pair_integral(&f, &f, &mu, sampling()).unwrap().value, c(0.0, 0.0));
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let z = Measure::radial(&w, 0.0, 0.0).unwrap();
        assert!(z.is_zero());
        assert_eq!(pair_integral(&f, &f, &z, sampling()).unwrap().value, c(0.0, 0.0));
    }

    #[test]
    fn ball_sum_pairing_against_exact_ball_moments() {
        // ∫_{B(0.5, ρ)} dv in C^1 equals ρ²; ∫ z dv = 0.5 ρ²
        let z0 = BallPoint::from_real(&[0.5]).unwrap();
        let mu = remark_measure(vec![z0], vec![1.0], 0.2).unwrap();
        let rho = 0.2 * 0.5;
        let b = Arc::new(MultiIndexBasis::new(1, 2).unwrap());
        let one = HoloFunction::constant(b.clone(), c(1.0, 0.0));
        let z = HoloFunction::monomial(b.clone(), &[1]).unwrap();
        let m0 = pair_integral(&one, &one, &mu, sampling()).unwrap();
        let m1 = pair_integral(&z, &one, &mu, sampling()).unwrap();
        assert!((m0.value.re - rho * rho).abs() < 1e-12);
        let err = (m1.value - c(0.5 * rho * rho, 0.0)).norm();
        assert!(err < 4.0 * m1.std_error + 1e-9, "{err} vs {}", m1.std_error);
        assert!(m1.std_error < 1e-3 * rho * rho);
        assert!(pair_integral_checked(&z, &one, &mu, sampling(), 1e-16).is_err());
    }

    #[test]
    fn standard_error_shrinks_under_sample_doubling() {
        let z0 = BallPoint::from_real(&[0.5, 0.2]).unwrap();
        let mu = remark_measure(vec![z0], vec![1.0], 0.3).unwrap();
        let b = Arc::new(MultiIndexBasis::new(2, 3).unwrap());
        let f = HoloFunction::monomial(b.clone(), &[3, 0]).unwrap();
        let g = HoloFunction::monomial(b.clone(), &[0, 2]).unwrap();
        let mk = |per| BallSampling {
            rotations: 16,
            per_rotation: per,
            seed: 1,
        };
        let e1 = pair_integral(&f, &g, &mu, mk(512)).unwrap().std_error;
        let e2 = pair_integral(&f, &g, &mu, mk(2048)).unwrap().std_error;
        assert!(e2 < e1 / 1.5, "{e1} → {e2}");
    }

    #[test]
    fn restriction_examples() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let g = w.dyadic_radii(5).unwrap();
        let mu = Measure::single_atom(BallPoint::from_real(&[0.8]).unwrap(), 1.0).unwrap();
        for k in 0..=5 {
            let mk = restrict_to_annulus(&mu, &g, k).unwrap();
            let t = mk.total_mass(sampling()).unwrap().value;
            assert_eq!(t, if k == 1 { 1.0 } else { 0.0 });
        }
        // radial partition: Σ_k μ_k = μ({r_0 ≤ |z| < r_{K+1}})
        let rho = Measure::radial(&w, 1.0, 0.0).unwrap();
        let parts: f64 = annulus_masses(&rho, &g, sampling()).unwrap().iter().map(|m| m.value).sum();
        let expect = 2.0 * (g.radius(6).powi(2) - g.radius(0).powi(2));
        assert!((parts - expect).abs() < 1e-13);
    }

    #[test]
    fn atomic_partition_is_exact() {
        let w = Weight::normalize(Family::Power { beta: 0.5 }, 2).unwrap();
        let g = w.dyadic_radii(8).unwrap();
        let pts: Vec<BallPoint> = (0..40)
            .map(|j| BallPoint::on_axis(2, 1.0 - 0.9f64.powi(j + 1)).unwrap())
            .collect();
        let masses: Vec<f64> = (0..40).map(|j| 1.0 + j as f64).collect();
        let mu = Measure::atomic(pts.clone(), masses.clone()).unwrap();
        let parts: f64 = annulus_masses(&mu, &g, sampling()).unwrap().iter().map(|m| m.value).sum();
        let expect: f64 = pts
            .iter()
            .zip(&masses)
            .filter(|(p, _)| p.norm() >= g.radius(0) && 1.0 - p.norm() > g.gap(g.k_max + 1))
            .map(|(_, m)| m)
            .sum();
        assert_eq!(parts, expect);
    }

    #[test]
    fn box_and_ball_mass_for_atoms() {
        let a = BallPoint::from_real(&[0.7, 0.1]).unwrap();
        let mu = Measure::single_atom(a.clone(), 2.5).unwrap();
        assert_eq!(box_mass(&mu, &a, sampling()).unwrap().value, 2.5);
        let far = BallPoint::from_real(&[-0.7, 0.0]).unwrap();
        assert_eq!(box_mass(&mu, &far, sampling()).unwrap().value, 0.0);
        assert_eq!(ball_mass(&mu, &a, 0.2, sampling()).unwrap().value, 2.5);
        assert_eq!(ball_mass(&mu, &far, 0.2, sampling()).unwrap().value, 0.0);
    }

    #[test]
    fn radial_box_mass_against_monte_carlo() {
        let w = Weight::normalize(Family::Power { beta: 0.5 }, 2).unwrap();
        let mu = Measure::radial(&w, 1.0, 0.0).unwrap();
        let a = BallPoint::new(vec![c(0.6, 0.3), c(0.2, 0.0)]).unwrap();
        let exact = box_mass(&mu, &a, sampling()).unwrap().value;
        let bx = CarlesonBox::new(&a).unwrap();
        // independent estimate: uniform points in the ball, weighted by the density
        let est = qmc::rqmc_mean(5, 21, 16, 1 << 14, |s| {
            let mut p = [c(0.0, 0.0); 2];
            qmc::ball_point(s, 1.0, &mut p);
            if bx.distance(&p) < bx.radius().powi(2) {
                w.density_gap(1.0 - geometry::norm_sqr(&p).sqrt())
            } else {
                0.0
            }
        });
        assert!((exact - est.value).abs() < 4.0 * est.std_error + 1e-3 * exact, "{exact} vs {est:?}");
    }

    #[test]
    fn sphere_box_fraction_n1_and_limits() {
        // n = 1: arc of the circle |1 − r e^{iθ}| < d
        let (r, d) = (0.9f64, 0.3f64);
        let c0 = (1.0 + r * r - d * d) / (2.0 * r);
        assert!((sphere_box_fraction(1, 1.0 - r, d).unwrap() - c0.acos() / std::f64::consts::PI).abs() < 1e-14);
        assert_eq!(sphere_box_fraction(2, 0.5, 0.4).unwrap(), 0.0);
        assert!((sphere_box_fraction(3, 0.8, 1.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_ball_mass_against_volume_for_constant_weight() {
        let w = Weight::normalize(Family::Constant, 2).unwrap();
        let mu = Measure::radial(&w, 1.0, 0.0).unwrap();
        let z = BallPoint::from_real(&[0.8, 0.1]).unwrap();
        let m = ball_mass(&mu, &z, 0.3, sampling()).unwrap();
        let exact = 4.0 * geometry::bergman_ball_volume(&z, 0.3).unwrap();
        assert!((m.value / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mu_hat_examples_and_monotonicity() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let g = w.dyadic_radii(8).unwrap();
        let z0 = BallPoint::from_real(&[0.8]).unwrap();
        let mu = Measure::single_atom(z0.clone(), 3.0).unwrap();
        let z = BallPoint::from_real(&[0.81]).unwrap();
        let k = geometry::annulus_index(&g, &z).unwrap();
        let v = mu_hat(&mu, &g, &z, 0.2, sampling()).unwrap().value;
        assert!((v - 3.0 * (k as f64).exp2() / 0.19).abs() < 1e-12);
        let small = mu_hat(&mu, &g, &z, 0.01, sampling()).unwrap().value;
        assert!(small <= v);
        let empty = Measure::atomic(vec![], vec![]).unwrap();
        assert_eq!(mu_hat(&empty, &g, &z, 0.2, sampling()).unwrap().value, 0.0);
    }

    #[test]
    fn lambda_density_examples() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let g = w.dyadic_radii(8).unwrap();
        let z = BallPoint::from_real(&[0.5]).unwrap();
        assert!((lambda_density(&w, &g, &z).unwrap() - 4.0).abs() < 1e-14);
        // jump across r_k: left and right limits differ by a bounded factor
        for k in 1..8 {
            let left = lambda_density_gap(&w, &g, g.gap(k) * (1.0 + 1e-12)).unwrap();
            let right = lambda_density_gap(&w, &g, g.gap(k)).unwrap();
            assert!(right / left <= 2.0 * g.ratios[k - 1] + 1e-9);
        }
    }

    #[test]
    fn lens_volume_limits() {
        // disjoint, nested, and the half-overlap in R² against the circle-lens formula
        assert_eq!(ball_intersection_volume(1, 0.1, 0.1, 0.3).unwrap(), 0.0);
        assert!((ball_intersection_volume(2, 0.3, 0.1, 0.05).unwrap() - 0.1f64.powi(4)).abs() < 1e-18);
        let (r, d) = (1.0f64, 1.0f64);
        let lens_area = 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt();
        let v = ball_intersection_volume(1, r, r, d).unwrap();
        assert!((v - lens_area / std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn remark_measure_validation_and_mass() {
        let z1 = BallPoint::from_real(&[0.75, 0.0]).unwrap();
        let mu = remark_measure(vec![z1], vec![1.0], 0.1).unwrap();
        let m = mu.total_mass(sampling()).unwrap().value;
        assert!((m - (0.1f64 * 0.25).powi(4)).abs() < 1e-20);
        let a = BallPoint::from_real(&[0.5]).unwrap();
        let b = BallPoint::from_real(&[0.52]).unwrap();
        assert!(matches!(
            remark_measure(vec![a, b], vec![1.0, 1.0], 0.1),
            Err(Error::Construction(_))
        ));
        let centers = remark_centers(2, 6, 0.25).unwrap();
        assert!(remark_measure(centers, vec![1.0; 6], 0.1).is_ok());
    }

    #[test]
    fn mu_tilde_of_a_ball_at_its_center() {
        let z = BallPoint::from_real(&[0.9, 0.0]).unwrap();
        let mu = remark_measure(vec![z.clone()], vec![1.0], 0.1).unwrap();
        let v = mu_tilde(&mu, &z, 0.1, sampling()).unwrap().value;
        // B(z, ε(1−|z|)) is the ball itself
        assert!((v - 0.1f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn measure_spec_json() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let g = w.dyadic_radii(4).unwrap();
        let s: MeasureSpec = serde_json::from_str(r#"{"type":"atomic","points":[[0.5,0.0]],"masses":[2.0]}"#).unwrap();
        let m = s.build(&w, &g).unwrap();
        assert_eq!(m.total_mass(sampling()).unwrap().value, 2.0);
        let s: MeasureSpec = serde_json::from_str(r#"{"type":"radial","gap_power":1.0}"#).unwrap();
        assert!(matches!(s.build(&w, &g).unwrap(), Measure::RadialDensity(_)));
        let s: MeasureSpec = serde_json::from_str(r#"{"type":"dyadic-atoms","rule":"growing"}"#).unwrap();
        assert!(matches!(s.build(&w, &g).unwrap(), Measure::Atomic { .. }));
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"type":"atomic","points":[[0.5]],"masses":[1.0],"x":1}"#).is_err());
        let s: MeasureSpec = serde_json::from_str(r#"{"type":"atomic","points":[[0.5]],"masses":[1.0]}"#).unwrap();
        assert!(matches!(s.build(&w, &g), Err(Error::Config(_))));
    }

    #[test]
    fn annulus_csv() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let g = w.dyadic_radii(3).unwrap();
        let mu = Measure::radial(&w, 1.0, 1.0).unwrap();
        let m = annulus_masses(&mu, &g, sampling()).unwrap();
        let mut buf = Vec::new();
        write_annulus_masses_csv(&g, &m, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("k,r_k,mass,std_error\n0,0.5"));
        assert_eq!(s.lines().count(), 5);
    }
}
