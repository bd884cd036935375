//! Möbius maps, Bergman metric balls, Carleson boxes and annulus indexing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::DyadicGrid;

/// A point of the open unit ball of `C^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct BallPoint {
    coords: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for BallPoint {
    type Error = Error;
    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        BallPoint::new(v)
    }
}

impl From<BallPoint> for Vec<Complex64> {
    fn from(p: BallPoint) -> Self {
        p.coords
    }
}

/// `⟨z, w⟩ = Σ z_i w̄_i`.
pub fn inner(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

impl BallPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("a ball point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("ball point coordinates must be finite".into()));
        }
        let r2 = norm_sqr(&coords);
        if r2 >= 1.0 {
            return Err(Error::Domain(format!("|z|² = {r2} is not inside the unit ball")));
        }
        Ok(BallPoint { coords })
    }

    pub fn from_real(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn origin(n: usize) -> Self {
        BallPoint {
            coords: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// `r·e_1`, for `0 ≤ r < 1`.
    pub fn on_axis(n: usize, r: f64) -> Result<Self> {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        c[0] = Complex64::new(r, 0.0);
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.coords)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &BallPoint) -> Complex64 {
        inner(&self.coords, &other.coords)
    }
}

fn same_dim(a: &BallPoint, z: &BallPoint) {
    assert_eq!(a.dim(), z.dim(), "points from different dimensions");
}

/// `φ_a(z) = (a − P_a z − s_a Q_a z)/(1 − ⟨z, a⟩)` with `s_a = √(1−|a|²)`.
pub fn mobius_raw(a: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
    let a2 = norm_sqr(a);
    let za = inner(z, a);
    let denom = Complex64::new(1.0, 0.0) - za;
    if a2 == 0.0 {
        return z.iter().map(|c| -c).collect();
    }
    let s = (1.0 - a2).sqrt();
    let t = za / a2;
    a.iter()
        .zip(z)
        .map(|(ai, zi)| {
            let p = t * ai;
            let q = zi - p;
            (ai - p - s * q) / denom
        })
        .collect()
}

/// The ball automorphism exchanging `0` and `a`.
pub fn mobius(a: &BallPoint, z: &BallPoint) -> BallPoint {
    same_dim(a, z);
    let coords = mobius_raw(&a.coords, &z.coords);
    // |φ_a(z)| < 1 analytically; clamp rounding at the edge
    let r2 = norm_sqr(&coords);
    if r2 >= 1.0 {
        let scale = (1.0 - f64::EPSILON) / r2.sqrt();
        return BallPoint {
            coords: coords.into_iter().map(|c| c * scale).collect(),
        };
    }
    BallPoint { coords }
}

/// `|φ_z(w)|²`, via `1 − (1−|z|²)(1−|w|²)/|1−⟨z,w⟩|²`.
pub fn pseudo_hyperbolic_sqr(z: &BallPoint, w: &BallPoint) -> f64 {
    same_dim(z, w);
    let gz = 1.0 - z.norm_sqr();
    let gw = 1.0 - w.norm_sqr();
    let d = (Complex64::new(1.0, 0.0) - z.inner(w)).norm_sqr();
    (1.0 - gz * gw / d).clamp(0.0, 1.0)
}

/// `β(z, w) = atanh |φ_z(w)|`.
pub fn bergman_dist(z: &BallPoint, w: &BallPoint) -> f64 {
    let rho = pseudo_hyperbolic_sqr(z, w).sqrt();
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    rho.atanh()
}

/// Euclidean radius `tanh α` of `E(0, α)`.
pub fn bergman_ball_radius0(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("Bergman ball radius needs α > 0, got {alpha}")));
    }
    Ok(alpha.tanh())
}

/// `β(z, w) < α`.
pub fn in_bergman_ball(w: &BallPoint, z: &BallPoint, alpha: f64) -> Result<bool> {
    let r = bergman_ball_radius0(alpha)?;
    Ok(pseudo_hyperbolic_sqr(z, w) < r * r)
}

/// Exact normalized volume `v(E(z, α)) = R^{2n} ((1−|z|²)/(1−R²|z|²))^{n+1}`, `R = tanh α`.
pub fn bergman_ball_volume(z: &BallPoint, alpha: f64) -> Result<f64> {
    let r = bergman_ball_radius0(alpha)?;
    let n = z.dim() as i32;
    let z2 = z.norm_sqr();
    Ok(r.powi(2 * n) * ((1.0 - z2) / (1.0 - r * r * z2)).powi(n + 1))
}

/// `δ(a) = √(2(1 − |a|))`.
pub fn delta(a: &BallPoint) -> f64 {
    (2.0 * (1.0 - a.norm())).sqrt()
}

/// `Q(a, r) = { z : √|1 − ⟨a/|a|, z⟩| < r }`.
#[derive(Clone, Debug, PartialEq)]
pub struct CarlesonBox {
    center: BallPoint,
    radius: f64,
    zeta: Vec<Complex64>,
}

impl CarlesonBox {
    /// The box `Q_a = Q(a, δ(a))`.
    pub fn new(a: &BallPoint) -> Result<Self> {
        let r = delta(a);
        Self::with_radius(a, r)
    }

    pub fn with_radius(a: &BallPoint, radius: f64) -> Result<Self> {
        let na = a.norm();
        if na == 0.0 {
            return Err(Error::Domain("Carleson box Q_a is undefined for a = 0".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("box radius must be positive, got {radius}")));
        }
        Ok(CarlesonBox {
            center: a.clone(),
            radius,
            zeta: a.coords.iter().map(|c| c / na).collect(),
        })
    }

    pub fn center(&self) -> &BallPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The boundary point `a/|a|`.
    pub fn zeta(&self) -> &[Complex64] {
        &self.zeta
    }

    /// `|1 − ⟨ζ, z⟩|`, the quantity compared against `radius²`.
    pub fn distance(&self, z: &[Complex64]) -> f64 {
        (Complex64::new(1.0, 0.0) - inner(&self.zeta, z)).norm()
    }

    pub fn contains(&self, z: &BallPoint) -> bool {
        same_dim(&self.center, z);
        self.distance(&z.coords) < self.radius * self.radius
    }
}

/// Membership in `Q_a`, which is `|1 − ⟨a/|a|, z⟩| < 2(1 − |a|)`.
pub fn in_carleson_box(z: &BallPoint, a: &BallPoint) -> Result<bool> {
    Ok(CarlesonBox::new(a)?.contains(z))
}

/// `k` with `r_k ≤ |z| < r_{k+1}`; the central ball `|z| < r_0` is merged into `k = 0`.
pub fn annulus_index(grid: &DyadicGrid, z: &BallPoint) -> Result<usize> {
    annulus_index_radius(grid, z.norm())
}

pub fn annulus_index_radius(grid: &DyadicGrid, r: f64) -> Result<usize> {
    let last = *grid.radii.last().unwrap();
    if r >= last {
        return Err(Error::Range(format!(
            "|z| = {r} is beyond r_{} = {last}; increase K_max",
            grid.radii.len() - 1
        )));
    }
    let j = grid.radii.partition_point(|&t| t <= r);
    Ok(j.saturating_sub(1))
}

/// Same as [`annulus_index_radius`] but from the gap `1 − |z|`, for points very close to the sphere.
pub fn annulus_index_gap(grid: &DyadicGrid, u: f64) -> Result<usize> {
    let last = *grid.gaps.last().unwrap();
    if u <= last {
        return Err(Error::Range(format!(
            "gap {u} is beyond the last grid gap {last}; increase K_max"
        )));
    }
    let j = grid.gaps.partition_point(|&t| t >= u);
    Ok(j.saturating_sub(1))
}

/// Monte-Carlo estimate of `v(E(z, α))`, sampling the Euclidean ball that contains it.
pub fn bergman_ball_volume_mc(z: &BallPoint, alpha: f64, samples: u64, seed: u64) -> Result<crate::qmc::Estimate> {
    let n = z.dim();
    let r = bergman_ball_radius0(alpha)?;
    let z2 = z.norm_sqr();
    // E(z,α) is the Euclidean ellipsoid with center c and radii ≤ R(1−|z|²)/(1−R²|z|²) … bounded by
    // the ball of that radius around c = z(1−R²)/(1−R²|z|²)
    let den = 1.0 - r * r * z2;
    let center: Vec<Complex64> = z.coords.iter().map(|c| c * ((1.0 - r * r) / den)).collect();
    let big = r * (1.0 - z2).sqrt() / den.sqrt();
    let enclose_vol = big.powi(2 * n as i32);
    let rot = 16u64;
    let per = (samples / rot).max(1);
    let est = crate::qmc::rqmc_mean(2 * n + 1, seed, rot, per, |u| {
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        crate::qmc::ball_point(u, big, &mut w);
        for (wi, ci) in w.iter_mut().zip(&center) {
            *wi += ci;
        }
        if norm_sqr(&w) >= 1.0 {
            return 0.0;
        }
        let p = BallPoint { coords: w };
        if pseudo_hyperbolic_sqr(z, &p) < r * r {
            1.0
        } else {
            0.0
        }
    });
    Ok(crate::qmc::Estimate {
        value: est.value * enclose_vol,
        std_error: est.std_error * enclose_vol,
        samples: est.samples,
    })
}

/// Sample budget for integrals over Bergman balls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallSampling {
    pub rotations: u64,
    pub per_rotation: u64,
    pub seed: u64,
}

impl Default for BallSampling {
    fn default() -> Self {
        BallSampling {
            rotations: 8,
            per_rotation: 1024,
            seed: 0,
        }
    }
}

/// `∫_{E(z,α)} g dv` by pulling back through `φ_z` onto `|η| < tanh α`.
///
/// `g` receives the image point `w` and its gap `1 − |w|²`, computed as
/// `(1−|z|²)(1−|η|²)/|1−⟨η,z⟩|²` so it stays accurate near the sphere.
pub fn bergman_ball_integral<G>(z: &BallPoint, alpha: f64, sampling: BallSampling, g: G) -> Result<crate::qmc::Estimate>
where
    G: Fn(&[Complex64], f64) -> f64,
{
    let n = z.dim();
    let radius = bergman_ball_radius0(alpha)?;
    let gz = 1.0 - z.norm_sqr();
    let vol = radius.powi(2 * n as i32);
    let est = crate::qmc::rqmc_mean(2 * n + 1, sampling.seed, sampling.rotations, sampling.per_rotation, |u| {
        let mut eta = vec![Complex64::new(0.0, 0.0); n];
        crate::qmc::ball_point(u, radius, &mut eta);
        let d = (Complex64::new(1.0, 0.0) - inner(&eta, &z.coords)).norm_sqr();
        let ratio = gz / d;
        let jac = ratio.powi(n as i32 + 1);
        let w = mobius_raw(&z.coords, &eta);
        let gap2 = ratio * (1.0 - norm_sqr(&eta));
        g(&w, gap2) * jac
    });
    Ok(crate::qmc::Estimate {
        value: est.value * vol,
        std_error: est.std_error * vol,
        samples: est.samples,
    })
}

/// Node `w`, its gap `1 − |w|²`, and its weight in a pullback rule for `∫_{E(z,α)} · dv`.
pub type PullbackNode = (Vec<Complex64>, f64, f64);

/// Per-rotation node sets of [`bergman_ball_integral`], for reuse across integrands.
pub fn bergman_ball_rules(z: &BallPoint, alpha: f64, sampling: BallSampling) -> Result<Vec<Vec<PullbackNode>>> {
    let n = z.dim();
    let radius = bergman_ball_radius0(alpha)?;
    let gz = 1.0 - z.norm_sqr();
    let scale = radius.powi(2 * n as i32) / sampling.per_rotation as f64;
    let mut u = vec![0.0; 2 * n + 1];
    Ok((0..sampling.rotations)
        .map(|s| {
            let seq = crate::qmc::ShiftedHalton::new(2 * n + 1, sampling.seed, s);
            (0..sampling.per_rotation)
                .map(|i| {
                    seq.point(i, &mut u);
                    let mut eta = vec![Complex64::new(0.0, 0.0); n];
                    crate::qmc::ball_point(&u, radius, &mut eta);
                    let d = (Complex64::new(1.0, 0.0) - inner(&eta, &z.coords)).norm_sqr();
                    let ratio = gz / d;
                    let w = mobius_raw(&z.coords, &eta);
                    (w, ratio * (1.0 - norm_sqr(&eta)), scale * ratio.powi(n as i32 + 1))
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{Family, Weight};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mobius_disc_example() {
        let a = BallPoint::from_real(&[0.5]).unwrap();
        let z = BallPoint::from_real(&[0.25]).unwrap();
        let w = mobius(&a, &z);
        // (a − z)/(1 − z ā) = 0.25/0.875
        assert!((w.coords()[0] - c(2.0 / 7.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mobius_fixes_defining_points() {
        let a = BallPoint::new(vec![c(0.3, -0.2), c(0.1, 0.5)]).unwrap();
        let o = BallPoint::origin(2);
        let img0 = mobius(&a, &o);
        for (x, y) in img0.coords().iter().zip(a.coords()) {
            assert!((x - y).norm() < 1e-15);
        }
        assert!(mobius(&a, &a).norm() < 1e-15);
    }

    #[test]
    fn bergman_distance_examples() {
        let z = BallPoint::origin(1);
        let w = BallPoint::from_real(&[0.5]).unwrap();
        assert!((bergman_dist(&z, &w) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(bergman_dist(&w, &w), 0.0);
    }

    #[test]
    fn bergman_ball_examples() {
        let z = BallPoint::origin(1);
        let w = BallPoint::from_real(&[0.47]).unwrap();
        assert!(!in_bergman_ball(&w, &z, 0.5).unwrap());
        let w = BallPoint::from_real(&[0.46]).unwrap();
        assert!(in_bergman_ball(&w, &z, 0.5).unwrap());
        assert!(in_bergman_ball(&z, &z, 0.1).unwrap());
        assert!(bergman_ball_radius0(0.0).is_err());
    }

    #[test]
    fn carleson_box_examples() {
        let a = BallPoint::from_real(&[0.5, 0.0]).unwrap();
        assert!(in_carleson_box(&a, &a).unwrap());
        assert!(!in_carleson_box(&BallPoint::origin(2), &a).unwrap());
        assert!(matches!(
            in_carleson_box(&a, &BallPoint::origin(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn annulus_index_examples() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let g = w.dyadic_radii(5).unwrap();
        let at = |r: f64| annulus_index(&g, &BallPoint::from_real(&[r]).unwrap()).unwrap();
        assert_eq!(at(0.8), 1);
        assert_eq!(at(0.2), 0);
        assert_eq!(at(g.radius(2)), 2);
        assert!(matches!(
            annulus_index(&g, &BallPoint::from_real(&[0.999]).unwrap()),
            Err(Error::Range(_))
        ));
        assert_eq!(annulus_index_gap(&g, 0.2).unwrap(), 1);
        assert_eq!(annulus_index_gap(&g, g.gap(3)).unwrap(), 3);
    }

    #[test]
    fn ball_volume_monte_carlo_matches_closed_form() {
        let z = BallPoint::from_real(&[0.9, 0.0]).unwrap();
        let est = bergman_ball_volume_mc(&z, 0.7, 1 << 16, 5).unwrap();
        let exact = bergman_ball_volume(&z, 0.7).unwrap();
        assert!((est.value - exact).abs() < 5.0 * est.std_error + 1e-3 * exact, "{est:?} vs {exact}");
    }

    #[test]
    fn pulled_back_volume_matches_closed_form() {
        let z = BallPoint::new(vec![Complex64::new(0.6, 0.3), Complex64::new(0.0, -0.5)]).unwrap();
        let s = BallSampling {
            rotations: 16,
            per_rotation: 4096,
            seed: 9,
        };
        let est = bergman_ball_integral(&z, 0.5, s, |_, _| 1.0).unwrap();
        let exact = bergman_ball_volume(&z, 0.5).unwrap();
        assert!((est.value / exact - 1.0).abs() < 1e-3, "{est:?} vs {exact}");
        // image gap agrees with the direct one
        bergman_ball_integral(&z, 0.5, s, |w, gap2| {
            assert!((1.0 - norm_sqr(w) - gap2).abs() < 1e-13);
            0.0
        })
        .unwrap();
    }

    #[test]
    fn ball_point_rejects_outside() {
        assert!(BallPoint::from_real(&[1.0]).is_err());
        assert!(BallPoint::from_real(&[0.8, 0.6]).is_err());
        assert!(BallPoint::new(vec![c(f64::NAN, 0.0)]).is_err());
        let p: BallPoint = serde_json::from_str("[[0.5, 0.0]]").unwrap();
        assert_eq!(p.dim(), 1);
        assert!(serde_json::from_str::<BallPoint>("[[1.5, 0.0]]").is_err());
    }
}
