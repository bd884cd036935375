//! Normalized radial weights, their tails and moments, and the dyadic radii.
//!
//! Everything that happens close to the boundary is computed in the gap
//! variable `u = 1 − r`, so radii such as `1 − 10⁻¹²` keep full relative
//! precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, ln_gamma, ln_gamma_ratio, Tolerance};

/// Default number of moments cached at construction.
pub const DEFAULT_MOMENT_CACHE: usize = 128;

/// Built-in weight families, written in terms of the gap `u = 1 − r`.
///
/// * `Constant`: `ρ ≡ c`.
/// * `Power`: `ρ = c u^{−β}`, `0 < β < 1`.
/// * `LogPower`: `ρ = c u^{−β} L(u)^α` with `L(u) = log(e/u) ≥ 1`;
///   `0 ≤ β < 1` with any `α`, or `β = 1` with `α < −1`.
/// * `Standard`: `ρ = c (1 − r²)^α`, `α > −1`.
/// * `Tabulated`: samples `(r, ρ)`; `log ρ` interpolated linearly in `log u`,
///   continued as a power law past the last sample. Approximate by nature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Constant,
    Power { beta: f64 },
    LogPower { beta: f64, alpha: f64 },
    Standard { alpha: f64 },
    Tabulated { samples: Vec<(f64, f64)> },
}

/// JSON form of a weight, e.g. `{"n":2,"family":"power","beta":0.5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub n: usize,
    #[serde(flatten)]
    pub family: Family,
}

impl WeightSpec {
    pub fn build(&self) -> Result<Weight> {
        Weight::normalize(self.family.clone(), self.n)
    }
}

#[derive(Clone, Debug)]
struct Table {
    log_gaps: Vec<f64>,
    log_values: Vec<f64>,
}

impl Table {
    fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain("tabulated weight needs at least 2 samples".into()));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Domain("tabulated radii must be strictly increasing".into()));
            }
        }
        for &(r, v) in samples {
            if !(0.0..1.0).contains(&r) || v <= 0.0 || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "tabulated sample ({r}, {v}) must have 0 ≤ r < 1 and ρ > 0"
                )));
            }
        }
        // stored with increasing log-gap
        let mut log_gaps: Vec<f64> = samples.iter().rev().map(|&(r, _)| (1.0 - r).ln()).collect();
        let mut log_values: Vec<f64> = samples.iter().rev().map(|&(_, v)| v.ln()).collect();
        log_gaps.shrink_to_fit();
        log_values.shrink_to_fit();
        Ok(Table {
            log_gaps,
            log_values,
        })
    }

    /// Power-law exponent of the continuation toward the boundary (`ρ ~ u^slope`).
    fn end_slope(&self) -> f64 {
        (self.log_values[1] - self.log_values[0]) / (self.log_gaps[1] - self.log_gaps[0])
    }

    fn eval(&self, u: f64) -> f64 {
        let x = u.ln();
        let g = &self.log_gaps;
        let v = &self.log_values;
        let last = g.len() - 1;
        if x <= g[0] {
            return (v[0] + self.end_slope() * (x - g[0])).exp();
        }
        if x >= g[last] {
            return v[last].exp();
        }
        let i = g.partition_point(|&t| t <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        (v[i] + t * (v[i + 1] - v[i])).exp()
    }

    fn gap_breaks(&self) -> Vec<f64> {
        self.log_gaps.iter().map(|l| l.exp()).collect()
    }
}

/// A normalized radial weight on the unit ball of `C^n`.
#[derive(Clone, Debug)]
pub struct Weight {
    n: usize,
    family: Family,
    norm_const: f64,
    table: Option<Table>,
    moments: Vec<f64>,
}

#[inline]
fn log_gap(u: f64) -> f64 {
    1.0 - u.ln()
}

/// `(1 − u)^N`, accurate for huge `N` and tiny `u`.
#[inline]
fn damping(big_n: f64, u: f64) -> f64 {
    if big_n == 0.0 {
        1.0
    } else {
        (big_n * (-u).ln_1p()).exp()
    }
}

/// Geometric breakpoints `2^j/(8N)` inside `(lo, hi)`, where `(1−u)^N` decays.
fn damping_breaks(big_n: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if big_n > 0.0 {
        let mut b = 0.125 / big_n;
        while b < hi {
            if b > lo {
                out.push(b);
            }
            b *= 2.0;
        }
    }
    out
}

impl Weight {
    /// Builds the weight and fixes `c` so that `∫₀¹ x^{2n−1} ρ(x) dx = 1`.
    pub fn normalize(family: Family, n: usize) -> Result<Self> {
        Self::with_moment_cache(family, n, DEFAULT_MOMENT_CACHE)
    }

    pub fn with_moment_cache(family: Family, n: usize, cache: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension n must be positive".into()));
        }
        let table = match &family {
            Family::Constant => None,
            Family::Power { beta } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::Domain(format!(
                        "power weight needs 0 < β < 1 for integrability, got β = {beta}"
                    )));
                }
                None
            }
            Family::LogPower { beta, alpha } => {
                let ok = (*beta >= 0.0 && *beta < 1.0 && alpha.is_finite())
                    || (*beta == 1.0 && *alpha < -1.0);
                if !ok {
                    return Err(Error::Domain(format!(
                        "log-power weight is not integrable for β = {beta}, α = {alpha} \
                         (need 0 ≤ β < 1, or β = 1 with α < −1)"
                    )));
                }
                None
            }
            Family::Standard { alpha } => {
                if !(*alpha > -1.0) {
                    return Err(Error::Domain(format!(
                        "standard weight needs α > −1, got α = {alpha}"
                    )));
                }
                None
            }
            Family::Tabulated { samples } => {
                let t = Table::new(samples)?;
                if t.end_slope() <= -1.0 {
                    return Err(Error::Domain(format!(
                        "tabulated weight continuation u^{} is not integrable at the boundary",
                        t.end_slope()
                    )));
                }
                Some(t)
            }
        };
        let mut w = Weight {
            n,
            family,
            norm_const: 1.0,
            table,
            moments: Vec::new(),
        };
        let unnormalized = w.shape_moment(0.0, 2.0 * n as f64 - 1.0, 1.0)?;
        w.norm_const = 1.0 / unnormalized;
        let moments = (0..cache)
            .map(|d| w.radial_moment(0.0, d as f64))
            .collect::<Result<Vec<_>>>()?;
        w.moments = moments;
        Ok(w)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn spec(&self) -> WeightSpec {
        WeightSpec {
            n: self.n,
            family: self.family.clone(),
        }
    }

    /// Exponent `γ` of the boundary singularity `u^{−γ}` and the regular factor `g(u)`.
    fn singular_exponent(&self) -> f64 {
        match &self.family {
            Family::Constant => 0.0,
            Family::Power { beta } => *beta,
            Family::LogPower { beta, .. } => *beta,
            Family::Standard { alpha } => -*alpha,
            Family::Tabulated { .. } => -self.table.as_ref().unwrap().end_slope(),
        }
    }

    fn regular_part(&self, u: f64) -> f64 {
        match &self.family {
            Family::Constant | Family::Power { .. } => 1.0,
            Family::LogPower { alpha, .. } => log_gap(u).powf(*alpha),
            Family::Standard { alpha } => (2.0 - u).powf(*alpha),
            Family::Tabulated { .. } => {
                let g = self.singular_exponent();
                self.table.as_ref().unwrap().eval(u) * u.powf(g)
            }
        }
    }

    fn is_log_critical(&self) -> bool {
        matches!(self.family, Family::LogPower { beta, .. } if beta == 1.0)
    }

    /// Unnormalized shape `ρ/c` at gap `u`.
    fn shape_gap(&self, u: f64) -> f64 {
        match &self.family {
            Family::Constant => 1.0,
            Family::Power { beta } => u.powf(-beta),
            Family::LogPower { beta, alpha } => u.powf(-beta) * log_gap(u).powf(*alpha),
            Family::Standard { alpha } => (u * (2.0 - u)).powf(*alpha),
            Family::Tabulated { .. } => self.table.as_ref().unwrap().eval(u),
        }
    }

    /// `ρ(r)` for `0 ≤ r < 1`.
    pub fn density(&self, r: f64) -> f64 {
        self.density_gap(1.0 - r)
    }

    /// `ρ(1 − u)` for `0 < u ≤ 1`.
    pub fn density_gap(&self, u: f64) -> f64 {
        self.norm_const * self.shape_gap(u)
    }

    /// `∫_0^U (1−u)^N u^s · shape(u) du` (unnormalized).
    fn shape_moment(&self, s: f64, big_n: f64, upper: f64) -> Result<f64> {
        let gamma = self.singular_exponent();
        let e = gamma - s;
        // closed forms for pure power shapes
        if matches!(self.family, Family::Constant | Family::Power { .. }) {
            if e >= 1.0 {
                return Err(Error::Domain(format!(
                    "radial moment diverges: boundary exponent u^{{-{e}}}"
                )));
            }
            let b = 1.0 - e;
            if upper == 1.0 {
                // B(N+1, b)
                return Ok((ln_gamma(b) - ln_gamma_ratio(big_n + 1.0, b)).exp());
            }
            if big_n == 0.0 {
                return Ok(upper.powf(b) / b);
            }
        }
        if let Family::Standard { alpha } = self.family {
            if s == 0.0 && upper == 1.0 {
                // ∫ x^{2m−1}(1−x²)^α dx = ½ B(m, α+1) with 2m − 1 = N
                let m = 0.5 * (big_n + 1.0);
                let b = alpha + 1.0;
                return Ok(0.5 * (ln_gamma(b) - ln_gamma_ratio(m, b)).exp());
            }
        }
        if self.is_log_critical() && s == 0.0 && big_n == 0.0 {
            let Family::LogPower { alpha, .. } = self.family else {
                unreachable!()
            };
            return Ok(log_gap(upper).powf(alpha + 1.0) / (-alpha - 1.0));
        }
        let breaks = damping_breaks(big_n, 0.0, upper);
        self.shape_integral(s, 0.0, upper, &|u| damping(big_n, u), &breaks)
    }

    /// `∫_{lo}^{hi} u^s shape(u) h(u) du` (unnormalized) for a bounded `h`
    /// that is continuous at `u = 0`; `breaks` mark where `h` changes scale.
    fn shape_integral<H: Fn(f64) -> f64>(&self, s: f64, lo: f64, hi: f64, h: &H, breaks: &[f64]) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let mut ub = vec![lo, hi];
        ub.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        if let Some(t) = &self.table {
            ub.extend(t.gap_breaks().into_iter().filter(|&b| b > lo && b < hi));
        }
        ub.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ub.dedup();
        if self.is_log_critical() && s == 0.0 {
            return self.log_critical_integral(lo, hi, h, &ub);
        }
        let e = self.singular_exponent() - s;
        if e >= 1.0 {
            if lo == 0.0 {
                return Err(Error::Domain(format!(
                    "radial integral diverges: boundary exponent u^{{-{e}}}"
                )));
            }
            // away from the boundary: v = ln u
            let f = |v: f64| {
                let u = v.exp();
                u.powf(s + 1.0) * self.shape_gap(u) * h(u)
            };
            let vb: Vec<f64> = ub.iter().map(|u| u.ln()).collect();
            return Ok(quad::adaptive_pieces(&f, &vb, Tolerance::default())?.value);
        }
        // t = u^{1−e} removes the power singularity: u^{-e} du = q dt
        let q = 1.0 / (1.0 - e);
        let plain = matches!(self.family, Family::Constant | Family::Power { .. });
        let f = |t: f64| {
            if t <= 0.0 {
                return q * h(0.0) * if plain { 1.0 } else { self.regular_part(f64::MIN_POSITIVE) };
            }
            let u = t.powf(q);
            let g = if plain { 1.0 } else { self.regular_part(u) };
            q * g * h(u)
        };
        let tb: Vec<f64> = ub.iter().map(|&u| u.powf(1.0 - e)).collect();
        Ok(quad::adaptive_pieces(&f, &tb, Tolerance::default())?.value)
    }

    /// Critical log weight `u^{−1} L(u)^α`, `α < −1`, via `t = L(u)`.
    fn log_critical_integral<H: Fn(f64) -> f64>(&self, lo: f64, hi: f64, h: &H, ub: &[f64]) -> Result<f64> {
        let Family::LogPower { alpha, .. } = self.family else {
            unreachable!()
        };
        let t_hi = log_gap(hi);
        let integrand = |t: f64| h((1.0 - t).exp()) * t.powf(alpha);
        if lo > 0.0 {
            let mut tb: Vec<f64> = ub.iter().rev().map(|&u| log_gap(u)).collect();
            tb.dedup();
            return Ok(quad::adaptive_pieces(&integrand, &tb, Tolerance::default())?.value);
        }
        // ∫_{T}^∞ h t^α = h(0) T^{α+1}/(−α−1) − ∫_T^∞ (h(0) − h) t^α, the defect decays exponentially
        let h0 = h(0.0);
        let head = h0 * t_hi.powf(alpha + 1.0) / (-alpha - 1.0);
        let finest = ub.iter().copied().filter(|&u| u > 0.0).fold(hi, f64::min);
        let end = log_gap(finest).max(t_hi) + 50.0;
        let mut tb: Vec<f64> = ub.iter().rev().filter(|&&u| u > 0.0).map(|&u| log_gap(u)).collect();
        tb.push(end);
        tb.dedup();
        let defect = |t: f64| (h0 - h((1.0 - t).exp())) * t.powf(alpha);
        let d = quad::adaptive_pieces(&defect, &tb, Tolerance::default())?.value;
        Ok(head - d)
    }

    /// `∫_{lo}^{hi} u^s ρ(1−u) h(u) du` over gaps `0 ≤ lo < hi ≤ 1`.
    pub fn gap_integral<H: Fn(f64) -> f64>(&self, s: f64, lo: f64, hi: f64, h: &H, breaks: &[f64]) -> Result<f64> {
        Ok(self.norm_const * self.shape_integral(s, lo, hi, h, breaks)?)
    }

    /// `2n ∫ r^{2x+2n−1} (1−r)^s ρ(r) dr` restricted to gaps `1 − r ∈ [lo, hi]`.
    pub fn window_moment(&self, s: f64, x: f64, lo: f64, hi: f64) -> Result<f64> {
        if lo == 0.0 && hi == 1.0 {
            return self.radial_moment(s, x);
        }
        let big_n = 2.0 * x + 2.0 * self.n as f64 - 1.0;
        let breaks = damping_breaks(big_n, lo, hi);
        Ok(2.0 * self.n as f64 * self.gap_integral(s, lo, hi, &|u| damping(big_n, u), &breaks)?)
    }

    /// `2n ∫₀¹ r^{2x+2n−1} (1−r)^s ρ(r) dr` for real degree `x ≥ 0`.
    pub fn radial_moment(&self, s: f64, x: f64) -> Result<f64> {
        let big_n = 2.0 * x + 2.0 * self.n as f64 - 1.0;
        Ok(2.0 * self.n as f64 * self.norm_const * self.shape_moment(s, big_n, 1.0)?)
    }

    /// `m_d = 2n ∫₀¹ r^{2d+2n−1} ρ(r) dr = ‖z^m‖²_ρ / σ_m` for `|m| = d`.
    pub fn moment(&self, d: usize) -> Result<f64> {
        match self.moments.get(d) {
            Some(&m) => Ok(m),
            None => self.radial_moment(0.0, d as f64),
        }
    }

    /// `∫₀¹ x^{2n−1} ρ(x) dx`, which equals 1 after normalization.
    pub fn normalization_integral(&self) -> Result<f64> {
        Ok(self.norm_const * self.shape_moment(0.0, 2.0 * self.n as f64 - 1.0, 1.0)?)
    }

    /// `∫_r^1 ρ(x) dx`.
    pub fn tail(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!("tail needs 0 ≤ r < 1, got {r}")));
        }
        self.tail_gap(1.0 - r)
    }

    /// `∫_{1−u}^1 ρ(x) dx` for `0 < u ≤ 1`.
    pub fn tail_gap(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            if u == 0.0 {
                return Ok(0.0);
            }
            return Err(Error::Domain(format!("gap must lie in (0, 1], got {u}")));
        }
        Ok(self.norm_const * self.shape_moment(0.0, 0.0, u)?)
    }

    /// `ρ*(r) = (1−r)^{-1} ∫_r^1 ρ`.
    pub fn rho_star(&self, r: f64) -> Result<f64> {
        Ok(self.tail(r)? / (1.0 - r))
    }

    pub fn rho_star_gap(&self, u: f64) -> Result<f64> {
        Ok(self.tail_gap(u)? / u)
    }

    /// Radii `r_0 < … < r_{K+1}` with `tail(r_k) = 2^{−k}`; annuli `Ω_0 … Ω_K` are covered.
    pub fn dyadic_radii(&self, k_max: usize) -> Result<DyadicGrid> {
        let mut gaps = Vec::with_capacity(k_max + 2);
        let mut hi = 1.0;
        for k in 0..=k_max + 1 {
            let target = (-(k as f64)).exp2();
            let u = self.solve_tail(target, hi).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("r_{k}: {m}")),
                Error::Range(m) => Error::Range(format!("r_{k}: {m}")),
                other => other,
            })?;
            gaps.push(u);
            hi = u;
        }
        DyadicGrid::from_gaps(gaps)
    }

    /// Solves `tail_gap(u) = target` with `u ∈ (0, hi]`: bracket by halving, then
    /// safeguarded secant on `(log u, log tail)`.
    fn solve_tail(&self, target: f64, hi: f64) -> Result<f64> {
        let f = |u: f64| -> Result<f64> { Ok(self.tail_gap(u)?.ln() - target.ln()) };
        let b = hi;
        let mut fb = f(b)?;
        if fb.abs() < 1e-15 {
            return Ok(b);
        }
        if fb < 0.0 {
            return Err(Error::Numerical(format!(
                "tail at gap {hi} is below target {target}: bracket failed"
            )));
        }
        let mut a = b;
        let mut fa = fb;
        let mut tries = 0;
        while fa > 0.0 {
            a *= 0.5;
            tries += 1;
            if tries > 2000 || a < f64::MIN_POSITIVE {
                return Err(Error::Range(format!(
                    "tail = {target} is reached closer to the sphere than double precision resolves"
                )));
            }
            fa = f(a)?;
        }
        if fa == 0.0 {
            return Ok(a);
        }
        // bracket [a, b] in log u with f(a) < 0 < f(b)
        let (mut la, mut lb) = (a.ln(), b.ln());
        let mut side = 0i8;
        for _ in 0..300 {
            let mut lc = (la * fb - lb * fa) / (fb - fa);
            if !(lc > la.min(lb) && lc < la.max(lb)) {
                lc = 0.5 * (la + lb);
            }
            let uc = lc.exp();
            let fc = f(uc)?;
            // fc is the relative residual of the tail
            if fc.abs() < 1e-15 || (lb - la).abs() < 1e-15 * lc.abs().max(1.0) {
                return Ok(uc);
            }
            if fc < 0.0 {
                la = lc;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                lb = lc;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        Err(Error::Numerical(format!(
            "tail root for target {target} did not converge"
        )))
    }

    /// Sup over a sample of `[0, r_{K+1})` of `ρ*(r)/ρ(r)`.
    pub fn s_star_ratio(&self, grid: &DyadicGrid) -> Result<f64> {
        let mut sup: f64 = self.rho_star_gap(1.0)? / self.density_gap(1.0);
        for k in 0..grid.gaps.len() - 1 {
            let (u0, u1) = (grid.gaps[k], grid.gaps[k + 1]);
            for j in 0..=8 {
                let u = u0 * (u1 / u0).powf(j as f64 / 8.0);
                sup = sup.max(self.rho_star_gap(u)? / self.density_gap(u));
            }
        }
        Ok(sup)
    }
}

/// The dyadic radii of a weight together with the class-S ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicGrid {
    /// `r_0, …, r_{K+1}`.
    pub radii: Vec<f64>,
    /// `1 − r_k`, kept separately for precision.
    pub gaps: Vec<f64>,
    pub k_max: usize,
    /// `(1 − r_k)/(1 − r_{k+1})` for `k = 0 … K`.
    pub ratios: Vec<f64>,
    pub inf_ratio: f64,
}

/// Margin above 1 for reporting a weight as empirically in class S.
pub const CLASS_S_MARGIN: f64 = 0.05;

impl DyadicGrid {
    pub fn from_gaps(gaps: Vec<f64>) -> Result<Self> {
        if gaps.len() < 2 {
            return Err(Error::Domain("dyadic grid needs at least two radii".into()));
        }
        if gaps.windows(2).any(|w| w[1] >= w[0]) || gaps.iter().any(|&u| !(u > 0.0 && u <= 1.0)) {
            return Err(Error::Numerical("dyadic radii are not strictly increasing in [0,1)".into()));
        }
        let radii = gaps.iter().map(|u| 1.0 - u).collect();
        let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
        let inf_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(DyadicGrid {
            radii,
            k_max: gaps.len() - 2,
            gaps,
            ratios,
            inf_ratio,
        })
    }

    /// `r_k`.
    pub fn radius(&self, k: usize) -> f64 {
        self.radii[k]
    }

    pub fn gap(&self, k: usize) -> f64 {
        self.gaps[k]
    }

    /// Whether the ratio diagnostic clears `1 + CLASS_S_MARGIN`.
    pub fn in_class_s(&self) -> bool {
        self.inf_ratio > 1.0 + CLASS_S_MARGIN
    }

    /// CSV with columns `k, r_k, gap, ratio` (ratio empty on the last row).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "r_k", "gap", "ratio"])?;
        for k in 0..self.radii.len() {
            let ratio = self.ratios.get(k).map(|r| format!("{r:.15e}")).unwrap_or_default();
            w.write_record([
                k.to_string(),
                format!("{:.17}", self.radii[k]),
                format!("{:.15e}", self.gaps[k]),
                ratio,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `inf_k (1 − r_k)/(1 − r_{k+1})` over the computed range.
pub fn class_s_ratio(grid: &DyadicGrid) -> f64 {
    grid.inf_ratio
}
