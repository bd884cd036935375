//! Hardy-space Carleson constants of the annular pieces `μ_k` and the
//! bounded/vanishing verdicts built from the profile `2^k C_k`.
//!
//! `C_k = sup_{a ∈ Ω_k} μ_k(Q_a) (1−|a|)^{−n}`. Every returned value is a
//! supremum over genuine candidates or one-sided limits of them, so it is a
//! lower bound for the true `C_k`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, BallPoint, BallSampling, CarlesonBox};
use crate::measures::{self, Measure};
use crate::weights::{DyadicGrid, Weight};

/// Candidate budget for the supremum over `Ω_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateRule {
    /// Grid points per ray through an atom or ball center.
    pub ray_points: usize,
    /// Radial levels per annulus for densities.
    pub radial_points: usize,
    pub sampling: BallSampling,
}

impl Default for CandidateRule {
    fn default() -> Self {
        CandidateRule {
            ray_points: 64,
            radial_points: 32,
            sampling: BallSampling::default(),
        }
    }
}

/// Thresholds of the finite-profile verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// "bounded" needs the last-half maximum of `2^k C_k` within `factor · median`.
    pub bounded_median_factor: f64,
    /// "bounded" needs the slope of `log₂(2^k C_k)` to stay below this margin.
    pub growth_margin: f64,
    /// "vanishing" needs the last-half slope below this value.
    pub vanishing_slope: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            bounded_median_factor: 3.0,
            growth_margin: 0.1,
            vanishing_slope: -0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarlesonRow {
    pub k: usize,
    pub c_k: f64,
    pub scaled: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub carleson: bool,
    pub vanishing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarlesonReport {
    pub rows: Vec<CarlesonRow>,
    pub sup_scaled: f64,
    pub median_scaled: f64,
    /// Least-squares slope of `log₂(2^k C_k)` over all rows with `C_k > 0`.
    pub slope: f64,
    /// The same slope over the last half of the rows.
    pub tail_slope: f64,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

/// Membership breakpoint of `z` along the ray `tζ`: `z ∈ Q_{tζ}` iff `t < τ`.
fn breakpoint(zeta: &[Complex64], z: &[Complex64]) -> f64 {
    let d = (Complex64::new(1.0, 0.0) - geometry::inner(zeta, z)).norm();
    1.0 - 0.5 * d
}

fn unit(z: &BallPoint) -> Option<Vec<Complex64>> {
    let r = z.norm();
    (r > 0.0).then(|| z.coords().iter().map(|c| c / r).collect())
}

fn ray_grid(lo: f64, hi: f64, m: usize) -> impl Iterator<Item = f64> {
    let m = m.max(1);
    (0..m).map(move |i| lo + (hi - lo) * i as f64 / m as f64)
}

/// Exact supremum over `t ∈ [lo, hi)` on the ray `tζ` for atoms.
///
/// The mass in `Q_{tζ}` is a nonincreasing step function of `t` and
/// `(1−t)^{−n}` increases, so the supremum is a left limit at a breakpoint
/// or at `hi`; grid points are evaluated as well.
fn atomic_ray_sup(zeta: &[Complex64], points: &[BallPoint], masses: &[f64], n: usize, lo: f64, hi: f64, grid: usize) -> f64 {
    let taus: Vec<f64> = points.iter().map(|p| breakpoint(zeta, p.coords())).collect();
    let value = |t: f64, left: bool| {
        let m: f64 = taus
            .iter()
            .zip(masses)
            .filter(|(&tau, _)| if left { tau >= t } else { tau > t })
            .map(|(_, &m)| m)
            .sum();
        m / (1.0 - t).powi(n as i32)
    };
    let mut best = value(hi, true);
    for &tau in &taus {
        if tau > lo && tau < hi {
            best = best.max(value(tau, true));
        }
    }
    for t in ray_grid(lo, hi, grid) {
        best = best.max(value(t, false));
    }
    best
}

/// `C_k` estimated by the candidate rule; `0` when `μ_k = 0`.
pub fn hardy_constant(mu: &Measure, grid: &DyadicGrid, k: usize, rule: &CandidateRule) -> Result<f64> {
    let mu_k = measures::restrict_to_annulus(mu, grid, k)?;
    if mu_k.is_zero() {
        return Ok(0.0);
    }
    let (lo, hi) = (grid.radius(k), grid.radius(k + 1));
    match &mu_k {
        Measure::Atomic { points, masses } => {
            let n = points[0].dim();
            // directions through every atom of μ inside |z| < r_{k+1}
            let mut dirs = Vec::new();
            if let Measure::Atomic { points: all, .. } = mu {
                for p in all {
                    if p.norm() < hi {
                        if let Some(u) = unit(p) {
                            dirs.push(u);
                        }
                    }
                }
            }
            if dirs.is_empty() {
                dirs.push(BallPoint::on_axis(n, 1.0)?.coords().to_vec());
            }
            Ok(dirs
                .par_iter()
                .map(|z| atomic_ray_sup(z, points, masses, n, lo, hi, rule.ray_points))
                .reduce(|| 0.0, f64::max))
        }
        Measure::RadialDensity(r) => {
            // box mass of a radial measure depends only on |a|; the mass is continuous in |a|,
            // so the right endpoint enters as a limit
            let n = r.weight.dimension();
            let m = rule.radial_points.max(1);
            (0..=m)
                .into_par_iter()
                .map(|i| {
                    let t = lo + (hi - lo) * i as f64 / m as f64;
                    let a = BallPoint::on_axis(n, t)?;
                    let bx = CarlesonBox::new(&a)?;
                    let mass = measures::box_mass_in(&mu_k, &bx, rule.sampling)?.value;
                    Ok(mass / (1.0 - t).powi(n as i32))
                })
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
        }
        Measure::EuclideanBallSum(b) => {
            let n = b.dim();
            let dirs: Vec<Vec<Complex64>> = b.centers.iter().filter(|c| c.norm() < hi).filter_map(unit).collect();
            let cands: Vec<(usize, f64)> = (0..dirs.len())
                .flat_map(|d| ray_grid(lo, hi, rule.ray_points).chain(std::iter::once(hi)).map(move |t| (d, t)))
                .collect();
            cands
                .par_iter()
                .map(|&(d, t)| {
                    let a = BallPoint::new(dirs[d].iter().map(|c| c * t).collect())?;
                    let bx = CarlesonBox::new(&a)?;
                    let mass = measures::box_mass_in(&mu_k, &bx, rule.sampling)?.value;
                    Ok(mass / (1.0 - t).powi(n as i32))
                })
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
        }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len();
    if m == 0 {
        0.0
    } else if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

fn log_slope(rows: &[CarlesonRow]) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.scaled > 0.0)
        .map(|r| (r.k as f64, r.scaled.log2()))
        .unzip();
    ls_slope(&xs, &ys)
}

/// Builds the report and verdicts from per-annulus constants.
pub fn report_from_constants(c: &[f64], thresholds: Thresholds) -> Result<CarlesonReport> {
    if c.is_empty() {
        return Err(Error::Domain("empty Carleson profile".into()));
    }
    let rows: Vec<CarlesonRow> = c
        .iter()
        .enumerate()
        .map(|(k, &c_k)| CarlesonRow {
            k,
            c_k,
            scaled: (k as f64).exp2() * c_k,
        })
        .collect();
    let scaled: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
    let sup_scaled = scaled.iter().cloned().fold(0.0, f64::max);
    let median_scaled = median(&scaled);
    let slope = log_slope(&rows);
    let half = rows.len() / 2;
    let tail = &rows[half..];
    let tail_slope = log_slope(tail);
    let carleson = if sup_scaled == 0.0 {
        true
    } else {
        // the median test is applied to the last half so a decaying head does not count as growth
        let tail_max = tail.iter().map(|r| r.scaled).fold(0.0, f64::max);
        sup_scaled.is_finite()
            && tail_max <= thresholds.bounded_median_factor * median_scaled
            && slope <= thresholds.growth_margin
    };
    let first = scaled[..half.max(1)].iter().sum::<f64>() / half.max(1) as f64;
    let last = tail.iter().map(|r| r.scaled).sum::<f64>() / tail.len() as f64;
    let vanishing = if sup_scaled == 0.0 {
        true
    } else {
        tail_slope < thresholds.vanishing_slope && last < first
    };
    Ok(CarlesonReport {
        rows,
        sup_scaled,
        median_scaled,
        slope,
        tail_slope,
        verdict: Verdict { carleson, vanishing },
        thresholds,
    })
}

/// `C_k` for `k = 0 … K_max` and the finite-profile verdicts.
pub fn carleson_profile(mu: &Measure, grid: &DyadicGrid, w: &Weight, rule: &CandidateRule) -> Result<CarlesonReport> {
    if let Some(n) = mu.dim() {
        if n != w.dimension() {
            return Err(Error::Domain(format!(
                "measure on C^{n} but weight on C^{}",
                w.dimension()
            )));
        }
    }
    let c = (0..=grid.k_max)
        .into_par_iter()
        .map(|k| hardy_constant(mu, grid, k, rule))
        .collect::<Result<Vec<f64>>>()?;
    report_from_constants(&c, Thresholds::default())
}

impl CarlesonReport {
    /// CSV `k, C_k, 2^k C_k`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "C_k", "scaled"])?;
        for r in &self.rows {
            w.write_record([r.k.to_string(), format!("{:.15e}", r.c_k), format!("{:.15e}", r.scaled)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Verdict block with thresholds and summary statistics.
    pub fn verdict_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Block<'a> {
            verdict: &'a Verdict,
            thresholds: &'a Thresholds,
            sup_scaled: f64,
            median_scaled: f64,
            slope: f64,
            tail_slope: f64,
        }
        Ok(serde_json::to_string_pretty(&Block {
            verdict: &self.verdict,
            thresholds: &self.thresholds,
            sup_scaled: self.sup_scaled,
            median_scaled: self.median_scaled,
            slope: self.slope,
            tail_slope: self.tail_slope,
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomRule;
    use crate::weights::Family;

    fn grid(n: usize, k: usize) -> (Weight, DyadicGrid) {
        let w = Weight::normalize(Family::Constant, n).unwrap();
        let g = w.dyadic_radii(k).unwrap();
        (w, g)
    }

    #[test]
    fn atom_in_its_own_box() {
        let (_, g) = grid(2, 6);
        let a0 = BallPoint::from_real(&[0.8, 0.1]).unwrap();
        let k = geometry::annulus_index(&g, &a0).unwrap();
        let mu = Measure::single_atom(a0.clone(), 0.5).unwrap();
        let c = hardy_constant(&mu, &g, k, &CandidateRule::default()).unwrap();
        assert!(c >= 0.5 / (1.0 - a0.norm()).powi(2));
    }

    #[test]
    fn zero_measure_and_empty_annulus() {
        let (_, g) = grid(1, 4);
        let mu = Measure::atomic(vec![], vec![]).unwrap();
        assert_eq!(hardy_constant(&mu, &g, 2, &CandidateRule::default()).unwrap(), 0.0);
        let a = Measure::single_atom(BallPoint::from_real(&[0.3]).unwrap(), 1.0).unwrap();
        assert_eq!(hardy_constant(&a, &g, 3, &CandidateRule::default()).unwrap(), 0.0);
    }

    #[test]
    fn single_atom_sup_is_the_exit_limit() {
        // constant weight, n = 1: the atom stays in Q_{tζ} for all t < r_{k+1}
        let (_, g) = grid(1, 6);
        let r0 = 0.5 * (g.radius(3) + g.radius(4));
        let mu = Measure::single_atom(BallPoint::from_real(&[r0]).unwrap(), 2.0).unwrap();
        let c = hardy_constant(&mu, &g, 3, &CandidateRule::default()).unwrap();
        assert!((c - 2.0 / g.gap(4)).abs() < 1e-12 * c);
    }

    #[test]
    fn scaling_by_powers_of_two_is_exact() {
        let (_, g) = grid(2, 5);
        let pts: Vec<BallPoint> = [[0.8, 0.05], [0.81, -0.1], [0.6, 0.5]]
            .iter()
            .map(|p| BallPoint::from_real(p).unwrap())
            .collect();
        let mu = Measure::atomic(pts, vec![1.0, 0.3, 2.0]).unwrap();
        let mu4 = mu.scale(4.0).unwrap();
        for k in 0..=5 {
            let a = hardy_constant(&mu, &g, k, &CandidateRule::default()).unwrap();
            let b = hardy_constant(&mu4, &g, k, &CandidateRule::default()).unwrap();
            assert_eq!(4.0 * a, b);
        }
    }

    #[test]
    fn profiles_of_reference_measures() {
        let (w, g) = grid(1, 12);
        let rule = CandidateRule::default();
        let rho = Measure::radial(&w, 1.0, 0.0).unwrap();
        let r = carleson_profile(&rho, &g, &w, &rule).unwrap();
        assert!(r.verdict.carleson, "{:?}", r.rows);
        assert!(!r.verdict.vanishing);
        let dec = measures::dyadic_atoms(1, &g, |k, u| AtomRule::Decaying.factor(k) * u).unwrap();
        let r = carleson_profile(&dec, &g, &w, &rule).unwrap();
        assert!(r.verdict.vanishing && r.verdict.carleson);
        let grow = measures::dyadic_atoms(1, &g, |k, u| AtomRule::Growing.factor(k) * u).unwrap();
        let r = carleson_profile(&grow, &g, &w, &rule).unwrap();
        assert!(!r.verdict.carleson, "slope {}", r.slope);
    }

    #[test]
    fn csv_and_json_outputs() {
        let r = report_from_constants(&[1.0, 0.5, 0.25], Thresholds::default()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("k,C_k,scaled\n0,"));
        let j: serde_json::Value = serde_json::from_str(&r.verdict_json().unwrap()).unwrap();
        assert_eq!(j["thresholds"]["bounded_median_factor"], 3.0);
        assert_eq!(j["verdict"]["carleson"], true);
    }
}
