//! Randomized quasi-Monte-Carlo point sets.
//!
//! Halton sequences with Cranley-Patterson rotations. Each randomization
//! draws its shift from a ChaCha stream keyed by `(seed, stream)`, so every
//! estimate is reproducible and the spread across rotations gives a
//! standard error.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// A randomly shifted Halton sequence in `[0,1)^dim`.
#[derive(Clone, Debug)]
pub struct ShiftedHalton {
    shift: Vec<f64>,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64, stream: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        ShiftedHalton { shift }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// The `i`-th point (index 0 is skipped to avoid the origin).
    pub fn point(&self, i: u64, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            let v = radical_inverse(i + 1, PRIMES[d]) + self.shift[d];
            *o = v - v.floor();
        }
    }
}

/// Mean and standard error of an estimate built from independent rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Maps `2n` uniforms to a point uniformly distributed on the unit sphere of `C^n`.
pub fn sphere_point(u: &[f64], out: &mut [Complex64]) {
    let n = out.len();
    debug_assert!(u.len() >= 2 * n);
    let mut norm2 = 0.0;
    for j in 0..n {
        // Box-Muller on each coordinate pair
        let r = (-2.0 * (1.0 - u[2 * j]).ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u[2 * j + 1];
        out[j] = Complex64::from_polar(r, th);
        norm2 += r * r;
    }
    let inv = 1.0 / norm2.sqrt();
    for c in out.iter_mut() {
        *c *= inv;
    }
}

/// Maps `2n + 1` uniforms to a point uniformly distributed in the Euclidean ball of radius `radius`.
pub fn ball_point(u: &[f64], radius: f64, out: &mut [Complex64]) {
    let n = out.len();
    sphere_point(u, out);
    let r = radius * u[2 * n].powf(1.0 / (2 * n) as f64);
    for c in out.iter_mut() {
        *c *= r;
    }
}

/// Randomized-QMC mean of `f` over `rotations` shifted Halton sets of `per_rotation` points each.
pub fn rqmc_mean<F>(dim: usize, seed: u64, rotations: u64, per_rotation: u64, f: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let mut means = Vec::with_capacity(rotations as usize);
    let mut u = vec![0.0; dim];
    for s in 0..rotations {
        let seq = ShiftedHalton::new(dim, seed, s);
        let mut acc = 0.0;
        for i in 0..per_rotation {
            seq.point(i, &mut u);
            acc += f(&u);
        }
        means.push(acc / per_rotation as f64);
    }
    let m = rotations as f64;
    let value = means.iter().sum::<f64>() / m;
    let var = if rotations > 1 {
        means.iter().map(|x| (x - value).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Estimate {
        value,
        std_error: (var / m).sqrt(),
        samples: rotations * per_rotation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn same_seed_same_points() {
        let a = ShiftedHalton::new(4, 7, 0);
        let b = ShiftedHalton::new(4, 7, 0);
        let c = ShiftedHalton::new(4, 7, 1);
        let (mut pa, mut pb, mut pc) = ([0.0; 4], [0.0; 4], [0.0; 4]);
        a.point(10, &mut pa);
        b.point(10, &mut pb);
        c.point(10, &mut pc);
        assert_eq!(pa, pb);
        assert_ne!(pa, pc);
    }

    #[test]
    fn ball_volume_fraction() {
        // fraction of the unit ball of C^2 inside radius 1/2 is (1/2)^4
        let est = rqmc_mean(5, 3, 8, 4096, |u| {
            let mut z = [Complex64::new(0.0, 0.0); 2];
            ball_point(u, 1.0, &mut z);
            let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            if r2 < 0.25 {
                1.0
            } else {
                0.0
            }
        });
        assert!((est.value - 0.0625).abs() < 5.0 * est.std_error.max(1e-3));
    }

    #[test]
    fn standard_error_shrinks_with_samples() {
        let f = |u: &[f64]| if u[0] * u[0] + u[1] * u[1] < 1.0 { 1.0 } else { 0.0 };
        let small = rqmc_mean(2, 11, 16, 256, f);
        let large = rqmc_mean(2, 11, 16, 1024, f);
        assert!(large.std_error < small.std_error);
    }
}
