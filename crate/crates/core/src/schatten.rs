//! Schatten norms of compressions, `L^p(dλ_ρ)` integrals of `T̃_μ` and
//! `μ̂_α`, and the dimension-dependent comparison with `μ̃_ε`.
//!
//! `dλ_ρ = 2^k ρ dv / (1−|z|)^n` on `Ω_k`. Integrals run over `Ω_0 … Ω_K`
//! with Gauss-Legendre nodes in `ln(1−|z|)` on every annulus and a sphere
//! point set; the last annulus's share is reported as the tail estimate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::carleson::ls_slope;
use crate::error::{Error, Result};
use crate::geometry::{self, BallPoint, BallSampling};
use crate::holofn::KernelSeries;
use crate::measures::{self, Measure, RadialDensity};
use crate::qmc::{self, ShiftedHalton};
use crate::quad;
use crate::toeplitz::{self, radial_eigenvalues, ToeplitzMatrix};
use crate::weights::{DyadicGrid, Family, Weight};

/// Eigenvalues below this are treated as a failure of positivity.
pub const PSD_FLOOR: f64 = -1e-10;

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "Schatten exponent p = {p} is outside the characterized range 1 < p < ∞"
        )));
    }
    Ok(())
}

fn power_sum(eigs: impl IntoIterator<Item = (f64, f64)>, p: f64) -> Result<f64> {
    let mut s = 0.0;
    for (ev, mult) in eigs {
        if ev < PSD_FLOOR {
            return Err(Error::Numerical(format!("eigenvalue {ev:e} violates positivity")));
        }
        s += mult * ev.max(0.0).powf(p);
    }
    Ok(s)
}

/// `Σ_j s_j^p` of a positive compression.
pub fn schatten_sum(t: &ToeplitzMatrix, p: f64) -> Result<f64> {
    check_p(p)?;
    power_sum(t.eigenvalues().into_iter().map(|e| (e, 1.0)), p)
}

/// `(Σ_j s_j^p)^{1/p}`.
pub fn schatten_norm(t: &ToeplitzMatrix, p: f64) -> Result<f64> {
    Ok(schatten_sum(t, p)?.powf(1.0 / p))
}

/// `Σ_{d≤D} C(n−1+d, d) λ_d^p` for a radial density.
pub fn radial_schatten_sum(mu: &RadialDensity, degree: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    power_sum(
        radial_eigenvalues(mu, degree)?.into_iter().map(|(_, l, m)| (l, m as f64)),
        p,
    )
}

/// Degree-`D` Schatten sum of `T_μ`, diagonal for radial densities.
pub fn compression_schatten_sum(mu: &Measure, w: &Weight, degree: usize, sampling: BallSampling, p: f64) -> Result<f64> {
    match mu {
        Measure::RadialDensity(r) => radial_schatten_sum(r, degree, p),
        _ => schatten_sum(&toeplitz::assemble(mu, w, degree, sampling)?, p),
    }
}

/// Node layout for [`lp_lambda_integral`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaQuadrature {
    /// Gauss-Legendre nodes per annulus in `ln(1−|z|)`.
    pub radial_nodes: usize,
    /// Sphere points per radius (equispaced angles for `n = 1`, shifted Halton for `n ≥ 2`).
    pub sphere_points: usize,
    /// The integrand depends on `|z|` only; the sphere average is skipped.
    pub radial: bool,
    pub seed: u64,
    /// Relative budget for the halved-node comparison; `None` skips the check.
    pub tolerance: Option<f64>,
}

impl Default for LambdaQuadrature {
    fn default() -> Self {
        LambdaQuadrature {
            radial_nodes: 16,
            sphere_points: 32,
            radial: false,
            seed: 0,
            tolerance: None,
        }
    }
}

impl LambdaQuadrature {
    pub fn radial(radial_nodes: usize) -> Self {
        LambdaQuadrature {
            radial_nodes,
            radial: true,
            ..Self::default()
        }
    }
}

/// `∫ F^p dλ_ρ` with its per-annulus parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaIntegral {
    pub value: f64,
    pub per_annulus: Vec<f64>,
    /// Contribution of `Ω_K`, the tail estimate of the truncation.
    pub tail_estimate: f64,
}

fn sphere_set(n: usize, q: &LambdaQuadrature) -> Vec<Vec<Complex64>> {
    if q.radial {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[0] = Complex64::new(1.0, 0.0);
        return vec![e];
    }
    let m = q.sphere_points.max(1);
    if n == 1 {
        // trapezoid in θ integrates trigonometric polynomials of degree < m exactly
        return (0..m)
            .map(|j| vec![Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64)])
            .collect();
    }
    let seq = ShiftedHalton::new(2 * n, q.seed, 0);
    let mut u = vec![0.0; 2 * n];
    (0..m as u64)
        .map(|i| {
            seq.point(i, &mut u);
            let mut p = vec![Complex64::new(0.0, 0.0); n];
            qmc::sphere_point(&u, &mut p);
            p
        })
        .collect()
}

fn annulus_part<F>(f: &F, w: &Weight, grid: &DyadicGrid, k: usize, p: f64, nodes: usize, sphere: &[Vec<Complex64>]) -> Result<f64>
where
    F: Fn(&BallPoint, f64) -> Result<f64> + Sync,
{
    let n = w.dimension();
    let (lo, hi) = (grid.gap(k + 1).ln(), grid.gap(k).ln());
    let (x, wt) = quad::gauss_legendre(nodes);
    let half = 0.5 * (hi - lo);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(&wt) {
        let v = lo + half * (xi + 1.0);
        let u = v.exp();
        let r = 1.0 - u;
        let mut avg = 0.0;
        for dir in sphere {
            let z = BallPoint::new(dir.iter().map(|c| c * r).collect())?;
            let val = f(&z, u)?;
            if val < 0.0 || !val.is_finite() {
                return Err(Error::Numerical(format!("integrand value {val} at gap {u}")));
            }
            avg += val.powf(p);
        }
        avg /= sphere.len() as f64;
        // dv = 2n r^{2n−1} dr dσ, du = u d(ln u)
        s += wi * half * avg * w.density_gap(u) * u.powi(1 - n as i32) * 2.0 * n as f64 * r.powi(2 * n as i32 - 1);
    }
    Ok((k as f64).exp2() * s)
}

/// `∫_{Ω_0 ∪ … ∪ Ω_K} F(z)^p dλ_ρ(z)`; `F` receives the point and its gap.
pub fn lp_lambda_integral<F>(f: F, w: &Weight, grid: &DyadicGrid, p: f64, q: &LambdaQuadrature) -> Result<LambdaIntegral>
where
    F: Fn(&BallPoint, f64) -> Result<f64> + Sync,
{
    if !(p > 0.0) {
        return Err(Error::Domain(format!("integral exponent must be positive, got {p}")));
    }
    let sphere = sphere_set(w.dimension(), q);
    let parts = (0..=grid.k_max)
        .into_par_iter()
        .map(|k| annulus_part(&f, w, grid, k, p, q.radial_nodes, &sphere))
        .collect::<Result<Vec<f64>>>()?;
    let value: f64 = parts.iter().sum();
    if let Some(tol) = q.tolerance {
        let coarse: f64 = (0..=grid.k_max)
            .into_par_iter()
            .map(|k| annulus_part(&f, w, grid, k, p, (q.radial_nodes / 2).max(1), &sphere))
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum();
        if (value - coarse).abs() > tol * value.abs() {
            return Err(Error::precision(
                format!(
                    "λ-integral changes by {:e} between {} and {} radial nodes",
                    (value - coarse).abs(),
                    q.radial_nodes / 2,
                    q.radial_nodes
                ),
                Some(2 * q.radial_nodes as u64),
            ));
        }
    }
    Ok(LambdaIntegral {
        value,
        tail_estimate: *parts.last().unwrap(),
        per_annulus: parts,
    })
}

/// `T̃_μ` on the λ-nodes; for radial measures the transform is radial.
pub fn berezin_integral(mu: &Measure, ks: &KernelSeries, grid: &DyadicGrid, p: f64, q: &LambdaQuadrature, sampling: BallSampling) -> Result<LambdaIntegral> {
    let mut q = *q;
    q.radial |= matches!(mu, Measure::RadialDensity(_));
    lp_lambda_integral(
        |z, _| Ok(toeplitz::berezin(mu, ks, z, sampling)?.value),
        ks.weight(),
        grid,
        p,
        &q,
    )
}

/// `μ̂_α` on the λ-nodes.
pub fn muhat_integral(mu: &Measure, w: &Weight, grid: &DyadicGrid, alpha: f64, p: f64, q: &LambdaQuadrature, sampling: BallSampling) -> Result<LambdaIntegral> {
    let mut q = *q;
    q.radial |= matches!(mu, Measure::RadialDensity(_));
    lp_lambda_integral(
        |z, u| {
            let m = measures::ball_mass(mu, z, alpha, sampling)?.value;
            let k = geometry::annulus_index_gap(grid, u)?;
            Ok((k as f64).exp2() * m / u.powi(z.dim() as i32))
        },
        w,
        grid,
        p,
        &q,
    )
}

/// Settings of [`theorem3_report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchattenOptions {
    pub degree: usize,
    pub alpha: f64,
    /// Extra `α` values for the sensitivity table.
    pub alpha_sensitivity: Vec<f64>,
    /// Kernel degree for the Berezin transform of non-radial measures.
    pub kernel_degree: usize,
    #[serde(skip)]
    pub sampling: BallSampling,
    pub quadrature: LambdaQuadrature,
}

impl Default for SchattenOptions {
    fn default() -> Self {
        SchattenOptions {
            degree: 60,
            alpha: 0.2,
            alpha_sensitivity: vec![0.1, 0.2, 0.3],
            kernel_degree: 60,
            sampling: BallSampling::default(),
            quadrature: LambdaQuadrature::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub integral_muhat: f64,
    pub r1: f64,
}

/// The three quantities of the Schatten-class characterization for one `(μ, p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchattenReport {
    pub p: f64,
    pub alpha: f64,
    pub degree: usize,
    pub k_max: usize,
    /// `Σ s_j^p` of the degree-`D` compression.
    pub schatten_p: f64,
    pub schatten_norm: f64,
    pub integral_berezin: f64,
    pub integral_muhat: f64,
    /// `schatten^p / ∫ μ̂_α^p dλ_ρ`.
    pub r1: f64,
    /// `schatten^p / ∫ T̃^p dλ_ρ`.
    pub r2: f64,
    pub berezin_tail: f64,
    pub muhat_tail: f64,
    pub alpha_rows: Vec<AlphaRow>,
    pub s_star_ratio: f64,
    pub s_star_warning: Option<String>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

/// `ρ*/ρ` above this, or growing by more than [`S_STAR_GROWTH`] between `K/2` and `K`, is flagged.
pub const S_STAR_LIMIT: f64 = 100.0;
pub const S_STAR_GROWTH: f64 = 1.25;

/// Empirical class-S* check: the sup of `ρ*/ρ` and its growth with the cutoff.
pub fn s_star_check(w: &Weight, grid: &DyadicGrid) -> Result<(f64, Option<String>)> {
    let full = w.s_star_ratio(grid)?;
    let half = DyadicGrid::from_gaps(grid.gaps[..=grid.k_max / 2 + 1].to_vec())?;
    let part = w.s_star_ratio(&half)?;
    let warning = (full > S_STAR_LIMIT || full > S_STAR_GROWTH * part).then(|| {
        format!(
            "ρ*/ρ reaches {full:.3} (it was {part:.3} at K = {}); the weight may not belong to S*, where the characterization is not claimed",
            half.k_max
        )
    });
    Ok((full, warning))
}

/// Kernel degrees above this are refused by [`berezin_kernel`].
pub const MAX_KERNEL_DEGREE: usize = 20_000;

/// Kernel series certified on `|⟨z, w⟩| ≤ r_{K+1} · sup |w|` for `w` in the support of `μ`.
///
/// Radial measures never evaluate the kernel off the diagonal, so `degree` is kept.
pub fn berezin_kernel(mu: &Measure, w: &Weight, grid: &DyadicGrid, degree: usize) -> Result<KernelSeries> {
    let ks = KernelSeries::new(w, degree)?;
    if matches!(mu, Measure::RadialDensity(_)) {
        return Ok(ks);
    }
    let t = grid.radius(grid.k_max + 1) * mu.outer_radius();
    match ks.required_degree(t) {
        Some(d) if d <= degree => Ok(ks),
        Some(d) if d <= MAX_KERNEL_DEGREE => KernelSeries::new(w, d),
        hint => Err(Error::precision(
            format!("the Berezin transform needs the kernel at |⟨z,w⟩| = {t}, beyond degree {MAX_KERNEL_DEGREE}"),
            hint.map(|d| d as u64),
        )),
    }
}

/// Schatten sum, `∫ T̃^p dλ_ρ` and `∫ μ̂_α^p dλ_ρ` with the comparability ratios.
pub fn theorem3_report(mu: &Measure, w: &Weight, grid: &DyadicGrid, p: f64, opts: &SchattenOptions) -> Result<SchattenReport> {
    check_p(p)?;
    let (s_star_ratio, s_star_warning) = s_star_check(w, grid)?;
    let schatten_p = compression_schatten_sum(mu, w, opts.degree, opts.sampling, p)?;
    let ks = berezin_kernel(mu, w, grid, opts.kernel_degree)?;
    let ib = berezin_integral(mu, &ks, grid, p, &opts.quadrature, opts.sampling)?;
    let mut alphas = opts.alpha_sensitivity.clone();
    if !alphas.contains(&opts.alpha) {
        alphas.push(opts.alpha);
    }
    let mut rows = Vec::new();
    let mut main = None;
    for &a in &alphas {
        let im = muhat_integral(mu, w, grid, a, p, &opts.quadrature, opts.sampling)?;
        if a == opts.alpha {
            main = Some(im.clone());
        }
        rows.push(AlphaRow {
            alpha: a,
            integral_muhat: im.value,
            r1: ratio(schatten_p, im.value),
        });
    }
    let im = main.expect("main α is in the list");
    Ok(SchattenReport {
        p,
        alpha: opts.alpha,
        degree: opts.degree,
        k_max: grid.k_max,
        schatten_p,
        schatten_norm: schatten_p.powf(1.0 / p),
        integral_berezin: ib.value,
        integral_muhat: im.value,
        r1: ratio(schatten_p, im.value),
        r2: ratio(schatten_p, ib.value),
        berezin_tail: ib.tail_estimate,
        muhat_tail: im.tail_estimate,
        alpha_rows: rows,
        s_star_ratio,
        s_star_warning,
    })
}

/// One point of the `(s, p)` sweep over `μ_s = (1−|z|)^s ρ dv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub p: f64,
    pub report: SchattenReport,
}

pub fn schatten_sweep(w: &Weight, grid: &DyadicGrid, s_values: &[f64], p_values: &[f64], opts: &SchattenOptions) -> Result<Vec<SweepRow>> {
    let pts: Vec<(f64, f64)> = s_values.iter().flat_map(|&s| p_values.iter().map(move |&p| (s, p))).collect();
    pts.par_iter()
        .map(|&(s, p)| {
            let mu = Measure::radial(w, 1.0, s)?;
            Ok(SweepRow {
                s,
                p,
                report: theorem3_report(&mu, w, grid, p, opts)?,
            })
        })
        .collect()
}

/// CSV `s, p, schatten_p, integral_muhat, integral_berezin, r1, r2`.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "p", "schatten_p", "integral_muhat", "integral_berezin", "r1", "r2"])?;
    for r in rows {
        let t = &r.report;
        w.write_record([
            r.s.to_string(),
            r.p.to_string(),
            format!("{:.15e}", t.schatten_p),
            format!("{:.15e}", t.integral_muhat),
            format!("{:.15e}", t.integral_berezin),
            format!("{:.15e}", t.r1),
            format!("{:.15e}", t.r2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample budgets of [`remark_experiment`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RemarkOptions {
    #[serde(skip)]
    pub outer: BallSampling,
    /// Points of the fixed QMC set inside each ball for `v(E(w, ε) ∩ B)`.
    pub inner_points: u64,
    pub k_max: usize,
}

impl Default for RemarkOptions {
    fn default() -> Self {
        RemarkOptions {
            outer: BallSampling {
                rotations: 8,
                per_rotation: 2048,
                seed: 0,
            },
            inner_points: 2048,
            k_max: 24,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RemarkRow {
    pub level: usize,
    pub gap: f64,
    pub integral_muhat: f64,
    pub integral_mutilde: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemarkReport {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    pub gap_ratio: f64,
    pub rows: Vec<RemarkRow>,
    /// Least-squares slope of `ln ratio` against `ln(1−|z_j|)`.
    pub slope: f64,
    pub expected_slope: f64,
}

/// `2^k ρ / (1−|w|)^n` at gap `u`.
fn lambda_at(w: &Weight, grid: &DyadicGrid, u: f64) -> Result<f64> {
    measures::lambda_density_gap(w, grid, u)
}

/// `1 − |c + x|²` without cancellation when `c` is near the sphere.
fn gap2_shifted(c: &BallPoint, x: &[Complex64]) -> f64 {
    let gc = 1.0 - c.norm_sqr();
    gc - 2.0 * geometry::inner(c.coords(), x).re - geometry::norm_sqr(x)
}

/// Both integrals for one ball `B(z, ε(1−|z|))` and several `p`.
fn remark_level(w: &Weight, grid: &DyadicGrid, z: &BallPoint, eps: f64, ps: &[f64], opts: &RemarkOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = z.dim();
    let delta = 1.0 - z.norm();
    let rho_b = eps * delta;
    let vol_b = rho_b.powi(2 * n as i32);
    let th2 = eps.tanh().powi(2);

    // fixed QMC set inside B with 1 − |b|² kept exact
    let seq = ShiftedHalton::new(2 * n + 1, opts.outer.seed ^ 0x5eed, 1 << 40);
    let mut uu = vec![0.0; 2 * n + 1];
    let inner: Vec<(Vec<Complex64>, f64)> = (0..opts.inner_points)
        .map(|i| {
            seq.point(i, &mut uu);
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            qmc::ball_point(&uu, rho_b, &mut x);
            let g = gap2_shifted(z, &x);
            let b: Vec<Complex64> = x.iter().zip(z.coords()).map(|(a, c)| a + c).collect();
            (b, g)
        })
        .collect();

    // μ̂_ε(w) = 2^k v(E(w, ε) ∩ B) / (1−|w|)^n, supported in E(z, ε + radius of B)
    let alpha_out = eps + measures::ball_bergman_radius(z, rho_b);
    let rules = geometry::bergman_ball_rules(z, alpha_out, opts.outer)?;
    let mut hat = vec![0.0; ps.len()];
    for nodes in &rules {
        let parts: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|(wp, gw, weight)| {
                let hits = inner
                    .iter()
                    .filter(|(b, gb)| {
                        let d = (Complex64::new(1.0, 0.0) - geometry::inner(b, wp)).norm_sqr();
                        // |φ_w(b)|² < tanh²ε ⇔ (1−|w|²)(1−|b|²) > (1 − tanh²ε)|1 − ⟨b, w⟩|²
                        gw * gb > (1.0 - th2) * d
                    })
                    .count();
                if hits == 0 {
                    return Ok(vec![0.0; ps.len()]);
                }
                let uw = gw / (1.0 + geometry::norm_sqr(wp).sqrt());
                let k = geometry::annulus_index_gap(grid, uw)?;
                let m = (k as f64).exp2() * vol_b * hits as f64 / opts.inner_points as f64 / uw.powi(n as i32);
                let lam = lambda_at(w, grid, uw)?;
                Ok(ps.iter().map(|&p| weight * m.powf(p) * lam).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        for v in parts {
            for (h, x) in hat.iter_mut().zip(v) {
                *h += x;
            }
        }
    }
    for h in hat.iter_mut() {
        *h /= rules.len() as f64;
    }

    // μ̃_ε(w) = v(B(w, ε(1−|w|)) ∩ B)/(1−|w|)^{2n}, supported in |w − z| < 2εδ/(1−ε)
    let outer_r = 2.0 * eps * delta / (1.0 - eps);
    let mut tilde = vec![0.0; ps.len()];
    for rot in 0..opts.outer.rotations {
        let seq = ShiftedHalton::new(2 * n + 1, opts.outer.seed, (1 << 32) + rot);
        let pts: Vec<Vec<f64>> = (0..opts.outer.per_rotation)
            .map(|i| {
                let mut v = vec![0.0; 2 * n + 1];
                seq.point(i, &mut v);
                v
            })
            .collect();
        let parts: Vec<Vec<f64>> = pts
            .par_iter()
            .map(|v| {
                let mut x = vec![Complex64::new(0.0, 0.0); n];
                qmc::ball_point(v, outer_r, &mut x);
                let dist = geometry::norm_sqr(&x).sqrt();
                let g = gap2_shifted(z, &x);
                let wp: Vec<Complex64> = x.iter().zip(z.coords()).map(|(a, c)| a + c).collect();
                let uw = g / (1.0 + geometry::norm_sqr(&wp).sqrt());
                let lens = measures::ball_intersection_volume(n, eps * uw, rho_b, dist)?;
                if lens == 0.0 {
                    return Ok(vec![0.0; ps.len()]);
                }
                let m = lens / uw.powi(2 * n as i32);
                let lam = lambda_at(w, grid, uw)?;
                Ok(ps.iter().map(|&p| m.powf(p) * lam).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        for v in parts {
            for (t, x) in tilde.iter_mut().zip(v) {
                *t += x;
            }
        }
    }
    let scale = outer_r.powi(2 * n as i32) / (opts.outer.rotations * opts.outer.per_rotation) as f64;
    for t in tilde.iter_mut() {
        *t *= scale;
    }
    Ok((hat, tilde))
}

/// Per-level `∫ μ̂_ε^p dλ_ρ / ∫ μ̃_ε^p dλ_ρ` for single balls at `1 − |z_j| = q^j`, and its log-log slope.
pub fn remark_experiment(n: usize, ps: &[f64], eps: f64, gap_ratio: f64, levels: usize, opts: &RemarkOptions) -> Result<Vec<RemarkReport>> {
    for &p in ps {
        check_p(p)?;
    }
    if levels < 4 {
        return Err(Error::Config(format!("the slope needs at least 4 levels, got {levels}")));
    }
    let w = Weight::normalize(Family::Constant, n)?;
    let grid = w.dyadic_radii(opts.k_max)?;
    let centers = measures::remark_centers(n, levels, gap_ratio)?;
    // the construction requires disjoint balls
    measures::remark_measure(centers.clone(), vec![1.0; levels], eps)?;
    let last = centers.last().unwrap();
    let reach = 1.0 - last.norm();
    if reach * 0.25 <= grid.gap(grid.k_max + 1) {
        return Err(Error::Range(format!(
            "level gap {reach:e} is too close to the last grid gap; raise K_max"
        )));
    }
    let per_level = centers
        .iter()
        .map(|z| remark_level(&w, &grid, z, eps, ps, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ps
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let rows: Vec<RemarkRow> = centers
                .iter()
                .zip(&per_level)
                .enumerate()
                .map(|(j, (z, (h, t)))| RemarkRow {
                    level: j + 1,
                    gap: 1.0 - z.norm(),
                    integral_muhat: h[i],
                    integral_mutilde: t[i],
                    ratio: h[i] / t[i],
                })
                .collect();
            let xs: Vec<f64> = rows.iter().map(|r| r.gap.ln()).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
            RemarkReport {
                n,
                p,
                eps,
                gap_ratio,
                slope: ls_slope(&xs, &ys),
                expected_slope: (n as f64 - 1.0) * (p - 1.0),
                rows,
            }
        })
        .collect())
}

/// CSV `level, gap, integral_muhat, integral_mutilde, ratio`.
pub fn write_remark_csv<W: std::io::Write>(report: &RemarkReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "gap", "integral_muhat", "integral_mutilde", "ratio"])?;
    for r in &report.rows {
        w.write_record([
            r.level.to_string(),
            format!("{:.15e}", r.gap),
            format!("{:.15e}", r.integral_muhat),
            format!("{:.15e}", r.integral_mutilde),
            format!("{:.15e}", r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
