use bergman::carleson::{self, CandidateRule};
use bergman::geometry::{self, BallPoint, BallSampling};
use bergman::holofn::KernelSeries;
use bergman::measures::Measure;
use bergman::schatten;
use bergman::toeplitz;
use bergman::weights::{Family, Weight};
use num_complex::Complex64;
use proptest::prelude::*;

/// Points of `C^n` with `|z| ≤ radius`, from raw coordinates in `[-1, 1]`.
fn point(n: usize, radius: f64) -> impl Strategy<Value = BallPoint> {
    (prop::collection::vec(-1.0f64..1.0, 2 * n), 0.05f64..1.0).prop_map(move |(v, s)| {
        let c: Vec<Complex64> = v.chunks(2).map(|x| Complex64::new(x[0], x[1])).collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
        BallPoint::new(c.into_iter().map(|z| z * (radius * s / norm)).collect()).unwrap()
    })
}

fn atoms(n: usize, count: usize, radius: f64) -> impl Strategy<Value = Measure> {
    prop::collection::vec((point(n, radius), 0.01f64..2.0), 1..=count).prop_map(|v| {
        let (p, m) = v.into_iter().unzip();
        Measure::atomic(p, m).unwrap()
    })
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Constant),
        (0.05f64..0.9).prop_map(|beta| Family::Power { beta }),
        (-0.9f64..2.0).prop_map(|alpha| Family::Standard { alpha }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mobius_is_an_involution(a in point(2, 0.95), z in point(2, 0.99)) {
        let back = geometry::mobius(&a, &geometry::mobius(&a, &z));
        for (x, y) in back.coords().iter().zip(z.coords()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn hardy_constant_scales_and_is_monotone(mu in atoms(1, 6, 0.97), c in 0.1f64..10.0, extra in point(1, 0.97)) {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let grid = w.dyadic_radii(6).unwrap();
        let rule = CandidateRule::default();
        let Measure::Atomic { points, masses } = &mu else { unreachable!() };
        let mut p2 = points.clone();
        let mut m2 = masses.clone();
        p2.push(extra);
        m2.push(0.3);
        let bigger = Measure::atomic(p2, m2).unwrap();
        let scaled = mu.scale(c).unwrap();
        for k in 0..=grid.k_max {
            let base = carleson::hardy_constant(&mu, &grid, k, &rule).unwrap();
            let s = carleson::hardy_constant(&scaled, &grid, k, &rule).unwrap();
            prop_assert!((s - c * base).abs() <= 1e-12 * (c * base).max(1e-300));
            prop_assert!(carleson::hardy_constant(&bigger, &grid, k, &rule).unwrap() >= base);
            prop_assert!(base >= 0.0);
        }
    }

    #[test]
    fn compression_is_hermitian_psd(fam in family(), mu in atoms(2, 8, 0.9)) {
        let w = Weight::normalize(fam, 2).unwrap();
        let t = toeplitz::assemble(&mu, &w, 6, BallSampling::default()).unwrap();
        prop_assert!(t.hermitian_defect() < 1e-12);
        let eig = t.eigenvalues();
        prop_assert!(*eig.last().unwrap() >= -1e-10 * eig[0].max(1.0));
        prop_assert!(eig.windows(2).all(|e| e[0] >= e[1]));
    }

    #[test]
    fn schatten_norm_decreases_in_p(mu in atoms(1, 10, 0.9), p in 1.1f64..4.0, dp in 0.1f64..3.0) {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let t = toeplitz::assemble(&mu, &w, 12, BallSampling::default()).unwrap();
        let a = schatten::schatten_norm(&t, p).unwrap();
        let b = schatten::schatten_norm(&t, p + dp).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
        prop_assert!(b >= t.operator_norm() * (1.0 - 1e-12));
    }

    #[test]
    fn kernel_is_hermitian_and_positive(fam in family(), z in point(2, 0.8), v in point(2, 0.8)) {
        let w = Weight::normalize(fam, 2).unwrap();
        let probe = KernelSeries::new(&w, 10).unwrap();
        let ks = KernelSeries::new(&w, probe.required_degree(0.64).unwrap()).unwrap();
        let kzv = ks.eval(&z, &v).unwrap();
        let kvz = ks.eval(&v, &z).unwrap();
        prop_assert!((kzv - kvz.conj()).norm() <= 1e-12 * kzv.norm().max(1.0));
        let (kzz, kvv) = (ks.diag_truncated(&z), ks.diag_truncated(&v));
        prop_assert!(kzv.norm_sqr() <= kzz * kvv * (1.0 + 1e-9));
    }

    #[test]
    fn dyadic_gaps_decrease(fam in family(), n in 1usize..4) {
        let w = Weight::normalize(fam, n).unwrap();
        let grid = w.dyadic_radii(10).unwrap();
        prop_assert!(grid.gaps.windows(2).all(|g| g[1] < g[0]));
        prop_assert!(grid.inf_ratio > 1.0);
        for k in 0..=grid.k_max {
            let ratio = w.tail_gap(grid.gap(k + 1)).unwrap() / w.tail_gap(grid.gap(k)).unwrap();
            prop_assert!((ratio - 0.5).abs() < 1e-8);
        }
    }
}
