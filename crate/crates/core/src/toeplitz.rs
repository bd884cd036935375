//! Degree-`D` compressions of Toeplitz operators and Berezin transforms.
//!
//! Entries are `⟨T_μ e_j, e_i⟩ = ∫ e_j ē_i dμ` in the orthonormal monomial
//! basis `e_m = z^m / √(σ_m m_{|m|})`. Radial measures are diagonal in this
//! basis; atoms and ball sums are assembled as `AᴴA` with one row per atom
//! or quadrature node, so the result is Hermitian positive semidefinite by
//! construction and independent of thread scheduling.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::carleson::ls_slope;
use crate::error::{Error, Result};
use crate::geometry::{BallPoint, BallSampling};
use crate::holofn::{self, real_series, KernelSeries, MultiIndexBasis, SERIES_TOL};
use crate::measures::{Mass, Measure, RadialDensity};
use crate::quad::rising_binomial;
use crate::weights::{DyadicGrid, Weight};

/// Provenance of an assembled matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssemblyMeta {
    pub measure: String,
    pub degree: usize,
    pub seed: u64,
    /// Largest per-entry standard error (zero for exact assembly).
    pub max_std_error: f64,
}

#[derive(Clone, Debug)]
pub struct ToeplitzMatrix {
    basis: Arc<MultiIndexBasis>,
    matrix: DMatrix<Complex64>,
    pub meta: AssemblyMeta,
}

/// One eigenvalue with the degree block carrying most of its eigenvector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub degree_block: usize,
}

/// `‖e_m‖⁻¹` for every basis element.
fn inverse_norms(basis: &MultiIndexBasis, w: &Weight) -> Result<Vec<f64>> {
    let moments = (0..=basis.degree()).map(|d| w.moment(d)).collect::<Result<Vec<_>>>()?;
    Ok((0..basis.len())
        .map(|i| 1.0 / (basis.sigma(i) * moments[basis.total_degree(i)]).sqrt())
        .collect())
}

/// `AᴴA` for rows `√c · (e_i(z))_i`.
fn gram(basis: &MultiIndexBasis, inv: &[f64], nodes: &[(Vec<Complex64>, f64)]) -> DMatrix<Complex64> {
    let dim = basis.len();
    let rows: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .map(|(z, c)| {
            let s = c.sqrt();
            basis
                .monomials(z)
                .into_iter()
                .zip(inv)
                .map(|(m, k)| m * (k * s))
                .collect()
        })
        .collect();
    let a = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    // entry (i, j) = Σ c ē_i e_j
    a.adjoint() * a
}

fn symmetrize(m: &mut DMatrix<Complex64>) {
    let h = (&*m + m.adjoint()) * Complex64::new(0.5, 0.0);
    *m = h;
}

/// `λ_d = 2n ∫ r^{2d+2n−1} w_μ(r) dr / m_d` with multiplicity `C(n−1+d, d)`.
pub fn radial_eigenvalues(mu: &RadialDensity, degree: usize) -> Result<Vec<(usize, f64, usize)>> {
    let n = mu.weight.dimension();
    (0..=degree)
        .map(|d| {
            let lam = mu.moment(d as f64)? / mu.weight.moment(d)?;
            let mult = rising_binomial(n as f64, d as f64).round() as usize;
            Ok((d, lam, mult))
        })
        .collect()
}

/// `λ(x)` at real degree, for series completion.
fn radial_eigenvalue_continuous(mu: &RadialDensity, x: f64) -> f64 {
    match (mu.moment(x), mu.weight.radial_moment(0.0, x)) {
        (Ok(a), Ok(b)) => a / b,
        _ => f64::NAN,
    }
}

/// Degree-`D` compression of `T_μ`.
pub fn assemble(mu: &Measure, w: &Weight, degree: usize, sampling: BallSampling) -> Result<ToeplitzMatrix> {
    let n = w.dimension();
    if let Some(m) = mu.dim() {
        if m != n {
            return Err(Error::Domain(format!("measure on C^{m} but weight on C^{n}")));
        }
    }
    let basis = Arc::new(MultiIndexBasis::new(n, degree)?);
    let inv = inverse_norms(&basis, w)?;
    let dim = basis.len();
    let mut max_std_error = 0.0;
    let mut matrix = match mu {
        Measure::RadialDensity(r) => {
            let lam = radial_eigenvalues(r, degree)?;
            let mut m = DMatrix::zeros(dim, dim);
            // the pairing of basis elements is σ_m λ-moment / (σ_m m_d)
            for i in 0..dim {
                m[(i, i)] = Complex64::new(lam[basis.total_degree(i)].1, 0.0);
            }
            m
        }
        Measure::Atomic { points, masses } => {
            let nodes: Vec<(Vec<Complex64>, f64)> = points
                .iter()
                .zip(masses)
                .map(|(p, &c)| (p.coords().to_vec(), c))
                .collect();
            gram(&basis, &inv, &nodes)
        }
        Measure::EuclideanBallSum(b) => {
            let rules = b.rules(sampling);
            let mats: Vec<DMatrix<Complex64>> = rules.iter().map(|nodes| gram(&basis, &inv, nodes)).collect();
            let k = mats.len() as f64;
            let mean = mats.iter().fold(DMatrix::zeros(dim, dim), |acc, m| acc + m) / Complex64::new(k, 0.0);
            if mats.len() > 1 {
                for i in 0..dim {
                    for j in 0..dim {
                        let var: f64 = mats.iter().map(|m| (m[(i, j)] - mean[(i, j)]).norm_sqr()).sum::<f64>() / (k - 1.0);
                        max_std_error = f64::max(max_std_error, (var / k).sqrt());
                    }
                }
            }
            mean
        }
    };
    symmetrize(&mut matrix);
    Ok(ToeplitzMatrix {
        basis,
        matrix,
        meta: AssemblyMeta {
            measure: mu.kind().to_string(),
            degree,
            seed: sampling.seed,
            max_std_error,
        },
    })
}

/// Per-degree maxima of the diagonal blocks and their decay in `ln(d+1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub blocks: Vec<(usize, f64)>,
    /// `−slope` of `ln λ` against `ln(d+1)` over the last half of the blocks.
    pub exponent: f64,
    pub decaying: bool,
}

/// Decay exponents above this count as compactness evidence.
pub const DECAY_THRESHOLD: f64 = 0.1;

impl ToeplitzMatrix {
    pub fn basis(&self) -> &Arc<MultiIndexBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|c| c.re).sum()
    }

    /// `max |M − Mᴴ|` before symmetrization is zero by construction; this reports it after.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn eigen(&self) -> SymmetricEigen<Complex64, nalgebra::Dyn> {
        SymmetricEigen::new(self.matrix.clone())
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0).max(0.0)
    }

    /// Eigenvalues in decreasing order with the dominant degree block of each eigenvector.
    pub fn spectrum(&self) -> Vec<SpectrumRow> {
        let e = self.eigen();
        let mut rows: Vec<SpectrumRow> = (0..e.eigenvalues.len())
            .map(|c| {
                let v = e.eigenvectors.column(c);
                let mut best = (0, -1.0);
                for d in 0..=self.basis.degree() {
                    let wgt: f64 = self.basis.degree_range(d).map(|i| v[i].norm_sqr()).sum();
                    if wgt > best.1 {
                        best = (d, wgt);
                    }
                }
                SpectrumRow {
                    index: 0,
                    eigenvalue: e.eigenvalues[c],
                    degree_block: best.0,
                }
            })
            .collect();
        rows.sort_by(|a, b| b.eigenvalue.total_cmp(&a.eigenvalue).then(a.degree_block.cmp(&b.degree_block)));
        for (i, r) in rows.iter_mut().enumerate() {
            r.index = i;
        }
        rows
    }

    /// Largest eigenvalue of each diagonal degree block and its decay trend.
    pub fn compactness_probe(&self) -> DecayReport {
        let blocks: Vec<(usize, f64)> = (0..=self.basis.degree())
            .map(|d| {
                let r = self.basis.degree_range(d);
                let sub = self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned();
                let top = sub.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (d, top)
            })
            .collect();
        let half = blocks.len() / 2;
        let (xs, ys): (Vec<f64>, Vec<f64>) = blocks[half..]
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|&(d, v)| (((d + 1) as f64).ln(), v.ln()))
            .unzip();
        let exponent = -ls_slope(&xs, &ys);
        DecayReport {
            blocks,
            exponent,
            decaying: exponent > DECAY_THRESHOLD,
        }
    }

    /// CSV `index, eigenvalue, degree_block`.
    pub fn write_spectrum_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue", "degree_block"])?;
        for r in self.spectrum() {
            w.write_record([r.index.to_string(), format!("{:.15e}", r.eigenvalue), r.degree_block.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV triplets `row, col, re, im` of the nonzero entries.
    pub fn write_triplets_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "re", "im"])?;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let c = self.matrix[(i, j)];
                if c != Complex64::new(0.0, 0.0) {
                    w.write_record([i.to_string(), j.to_string(), format!("{:.17e}", c.re), format!("{:.17e}", c.im)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `T̃_μ(z) = ∫ |K(z, w)|² dμ(w) / K(z, z)`; the diagonal is the completed series.
pub fn berezin(mu: &Measure, ks: &KernelSeries, z: &BallPoint, sampling: BallSampling) -> Result<Mass> {
    match mu {
        Measure::RadialDensity(r) => {
            // Σ λ_d a_d t^d / Σ a_d t^d with t = |z|²
            let u = 1.0 - z.norm();
            let eps = u * (2.0 - u);
            let a = ks.coeffs();
            let head = (0..a.len())
                .map(|d| Ok(a[d] * r.moment(d as f64)? / r.weight.moment(d)?))
                .collect::<Result<Vec<_>>>()?;
            let num = real_series(
                &head,
                |x| ks.coeff_continuous(x) * radial_eigenvalue_continuous(r, x),
                eps,
                SERIES_TOL,
            )?;
            Ok(Mass::exact(num.value / ks.diag_gap(u)?))
        }
        Measure::Atomic { points, masses } => {
            let kzz = ks.diag(z)?;
            let mut s = 0.0;
            for (p, &c) in points.iter().zip(masses) {
                s += c * ks.eval(z, p)?.norm_sqr();
            }
            Ok(Mass::exact(s / kzz))
        }
        Measure::EuclideanBallSum(b) => {
            let kzz = ks.diag(z)?;
            let mut per = Vec::new();
            for nodes in b.rules(sampling) {
                let mut s = 0.0;
                for (p, wt) in &nodes {
                    s += wt * ks.eval(z, &BallPoint::new(p.clone())?)?.norm_sqr();
                }
                per.push(s / kzz);
            }
            let (value, std_error) = mean_error(&per);
            Ok(Mass { value, std_error })
        }
    }
}

fn mean_error(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `∫ |h_a|² dμ`, the transform built from the normalized test functions.
pub fn h_transform(mu: &Measure, grid: &DyadicGrid, a: &BallPoint, gamma: f64, sampling: BallSampling) -> Result<Mass> {
    let s = holofn::h_normalizer(grid, a, gamma)?;
    match mu {
        Measure::RadialDensity(r) => {
            let n = r.weight.dimension() as f64;
            let coef = |x: f64| {
                let b = rising_binomial(gamma, x);
                match r.moment(x) {
                    Ok(m) => b * b * m / rising_binomial(n, x),
                    Err(_) => f64::NAN,
                }
            };
            let head = (0..=holofn::default_degree(r.weight.dimension()))
                .map(|d| {
                    let b = rising_binomial(gamma, d as f64);
                    Ok(b * b * r.moment(d as f64)? / rising_binomial(n, d as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            let u = 1.0 - a.norm();
            let v = real_series(&head, coef, u * (2.0 - u), SERIES_TOL)?.value;
            Ok(Mass::exact(v / (s * s)))
        }
        _ => {
            let m = mu.integrate_nodes(sampling, |p| {
                let q = BallPoint::new(p.to_vec()).expect("quadrature nodes lie in the ball");
                holofn::test_function_eval(a, gamma, &q).norm_sqr()
            })?;
            Ok(Mass {
                value: m.value / (s * s),
                std_error: m.std_error / (s * s),
            })
        }
    }
}

/// Norm, trace and decay of a compression, with the drift against degree `D − 5`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToeplitzReport {
    pub meta: AssemblyMeta,
    pub dimension: usize,
    pub operator_norm: f64,
    pub coarse_degree: usize,
    pub coarse_norm: f64,
    /// `(‖T_D‖ − ‖T_{D−5}‖) / ‖T_D‖`.
    pub refinement_delta: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub hermitian_defect: f64,
    pub decay: DecayReport,
}

pub fn toeplitz_report(mu: &Measure, w: &Weight, degree: usize, sampling: BallSampling) -> Result<(ToeplitzMatrix, ToeplitzReport)> {
    let t = assemble(mu, w, degree, sampling)?;
    let coarse_degree = degree.saturating_sub(5);
    let coarse = assemble(mu, w, coarse_degree, sampling)?;
    let eig = t.eigenvalues();
    let norm = eig.first().copied().unwrap_or(0.0).max(0.0);
    let coarse_norm = coarse.operator_norm();
    let report = ToeplitzReport {
        meta: t.meta.clone(),
        dimension: t.basis.len(),
        operator_norm: norm,
        coarse_degree,
        coarse_norm,
        refinement_delta: if norm > 0.0 { (norm - coarse_norm) / norm } else { 0.0 },
        trace: t.trace(),
        min_eigenvalue: eig.last().copied().unwrap_or(0.0),
        hermitian_defect: t.hermitian_defect(),
        decay: t.compactness_probe(),
    };
    Ok((t, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Family;

    fn s() -> BallSampling {
        BallSampling::default()
    }

    #[test]
    fn weight_measure_gives_identity() {
        for fam in [Family::Constant, Family::Power { beta: 0.5 }] {
            let w = Weight::normalize(fam, 2).unwrap();
            let mu = Measure::radial(&w, 1.0, 0.0).unwrap();
            let t = assemble(&mu, &w, 8, s()).unwrap();
            let id = DMatrix::<Complex64>::identity(t.basis.len(), t.basis.len());
            let err = (t.matrix() - id).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn radial_scaling_and_decay() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let two = match Measure::radial(&w, 2.0, 0.0).unwrap() {
            Measure::RadialDensity(r) => r,
            _ => unreachable!(),
        };
        for (_, l, m) in radial_eigenvalues(&two, 6).unwrap() {
            assert!((l - 2.0).abs() < 1e-12);
            assert_eq!(m, 1);
        }
        let mu = Measure::radial(&w, 1.0, 1.0).unwrap();
        let t = assemble(&mu, &w, 30, s()).unwrap();
        let p = t.compactness_probe();
        assert!(p.blocks.windows(2).all(|b| b[1].1 < b[0].1));
        assert!(p.decaying, "{}", p.exponent);
        let id = assemble(&Measure::radial(&w, 1.0, 0.0).unwrap(), &w, 30, s()).unwrap();
        assert!(!id.compactness_probe().decaying);
        assert!((id.operator_norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_atom_is_rank_one() {
        let w = Weight::normalize(Family::Power { beta: 0.5 }, 2).unwrap();
        let z0 = BallPoint::new(vec![Complex64::new(0.4, 0.2), Complex64::new(-0.1, 0.3)]).unwrap();
        let mu = Measure::single_atom(z0.clone(), 0.7).unwrap();
        let t = assemble(&mu, &w, 10, s()).unwrap();
        let ks = KernelSeries::new(&w, 10).unwrap();
        let top = 0.7 * ks.diag_truncated(&z0);
        let e = t.eigenvalues();
        assert!((e[0] - top).abs() < 1e-10 * top);
        assert!(e[1..].iter().all(|v| v.abs() < 1e-12));
        assert!((t.trace() - top).abs() < 1e-10 * top);
    }

    #[test]
    fn trace_identity_for_atoms() {
        let w = Weight::normalize(Family::Constant, 2).unwrap();
        let ks = KernelSeries::new(&w, 8).unwrap();
        let pts: Vec<BallPoint> = (0..20)
            .map(|j| {
                let t = j as f64 * 0.37;
                BallPoint::new(vec![Complex64::from_polar(0.6, t), Complex64::from_polar(0.3, 2.0 * t)]).unwrap()
            })
            .collect();
        let masses: Vec<f64> = (0..20).map(|j| 0.1 + 0.05 * j as f64).collect();
        let expect: f64 = pts.iter().zip(&masses).map(|(p, m)| m * ks.diag_truncated(p)).sum();
        let t = assemble(&Measure::atomic(pts, masses).unwrap(), &w, 8, s()).unwrap();
        assert!((t.trace() - expect).abs() < 1e-10 * expect);
        assert!(t.eigenvalues().iter().all(|&v| v > -1e-10));
        assert!(t.hermitian_defect() < 1e-12);
    }

    #[test]
    fn berezin_examples() {
        let w = Weight::normalize(Family::Power { beta: 0.5 }, 1).unwrap();
        let ks = KernelSeries::new(&w, 60).unwrap();
        let rho = Measure::radial(&w, 1.0, 0.0).unwrap();
        for r in [0.0, 0.5, 0.9, 0.99] {
            let z = BallPoint::from_real(&[r]).unwrap();
            let v = berezin(&rho, &ks, &z, s()).unwrap().value;
            assert!((v - 1.0).abs() < 1e-8, "{r}: {v}");
        }
        let z0 = BallPoint::from_real(&[0.3]).unwrap();
        let z = BallPoint::new(vec![Complex64::new(0.1, 0.4)]).unwrap();
        let atom = Measure::single_atom(z0.clone(), 2.0).unwrap();
        let v = berezin(&atom, &ks, &z, s()).unwrap().value;
        let expect = 2.0 * ks.eval(&z, &z0).unwrap().norm_sqr() / ks.diag(&z).unwrap();
        assert!((v - expect).abs() < 1e-14 * expect);
        // bounded by the operator norm of the compression
        let t = assemble(&atom, &w, 60, s()).unwrap();
        assert!(v <= t.operator_norm() * (1.0 + 1e-9));
    }

    #[test]
    fn spectrum_and_triplet_csv() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let mu = Measure::radial(&w, 1.0, 1.0).unwrap();
        let t = assemble(&mu, &w, 4, s()).unwrap();
        let mut buf = Vec::new();
        t.write_spectrum_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,eigenvalue,degree_block\n0,"));
        assert!(text.lines().nth(1).unwrap().ends_with(",0"));
        let mut buf = Vec::new();
        t.write_triplets_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }

    #[test]
    fn report_carries_refinement_delta() {
        let w = Weight::normalize(Family::Constant, 1).unwrap();
        let z0 = BallPoint::from_real(&[0.9]).unwrap();
        let (_, r) = toeplitz_report(&Measure::single_atom(z0, 1.0).unwrap(), &w, 20, s()).unwrap();
        assert_eq!(r.coarse_degree, 15);
        assert!(r.refinement_delta > 0.0 && r.coarse_norm < r.operator_norm);
    }
}
