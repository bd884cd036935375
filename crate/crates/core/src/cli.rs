//! Batch front end: one experiment config in, CSV/JSON artifacts and a run
//! manifest out.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config (nothing written),
//! 3 numerical or precision failure (manifest written with `status: failed`).

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::carleson::{self, CandidateRule, Thresholds};
use crate::error::{Error, Result};
use crate::geometry::{BallPoint, BallSampling};
use crate::holofn::{self, KernelSeries, SERIES_TOL, TRUSTED_MODULUS};
use crate::measures::{Measure, MeasureSpec};
use crate::schatten::{self, LambdaQuadrature, RemarkOptions, SchattenOptions};
use crate::toeplitz;
use crate::weights::{DyadicGrid, Weight, WeightSpec, CLASS_S_MARGIN};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bergman", version, about = "Experiments on weighted Bergman spaces of the unit ball")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true, env = "BERGMAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true, env = "BERGMAN_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "BERGMAN_SEED")]
    pub seed: Option<u64>,
    /// Basis or kernel degree `D`.
    #[arg(long, global = true, env = "BERGMAN_DEGREE")]
    pub degree: Option<usize>,
    /// Last annulus index `K_max`.
    #[arg(long, global = true, env = "BERGMAN_KMAX")]
    pub kmax: Option<usize>,
    /// Bergman-ball radius `α`.
    #[arg(long, global = true, env = "BERGMAN_ALPHA")]
    pub alpha: Option<f64>,
    /// Exponents, comma separated.
    #[arg(long, global = true, env = "BERGMAN_P", value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Dyadic radii and class diagnostics.
    Weights,
    /// Diagonal kernel band `K(z,z)(1−|z|)^n 2^{−k}`.
    Kernel,
    /// Hardy-type Carleson profile `2^k C_k` and verdict.
    Carleson,
    /// Compression spectrum and Berezin samples.
    Toeplitz,
    /// Schatten sums against the λ-integrals, for one measure or an `s` sweep.
    Schatten,
    /// Slope of `∫μ̂_ε^p / ∫μ̃_ε^p` across single-ball levels.
    Remark,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Weights => "weights",
            Command::Kernel => "kernel",
            Command::Carleson => "carleson",
            Command::Toeplitz => "toeplitz",
            Command::Schatten => "schatten",
            Command::Remark => "remark",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_rotations")]
    pub rotations: u64,
    #[serde(default = "default_per_rotation")]
    pub per_rotation: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            rotations: default_rotations(),
            per_rotation: default_per_rotation(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemarkSpec {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gap_ratio")]
    pub gap_ratio: f64,
}

impl Default for RemarkSpec {
    fn default() -> Self {
        RemarkSpec {
            levels: default_levels(),
            eps: default_eps(),
            gap_ratio: default_gap_ratio(),
        }
    }
}

/// An experiment; `measure` defaults to `ρ dv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weight: WeightSpec,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: SamplingSpec,
    /// `s` values of the sweep `μ_s = (1−|z|)^s ρ dv` for `schatten`.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub remark: RemarkSpec,
    /// Berezin sample points per annulus for `toeplitz`.
    #[serde(default = "default_berezin_points")]
    pub berezin_points: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_rotations() -> u64 {
    8
}
fn default_per_rotation() -> u64 {
    1024
}
fn default_levels() -> usize {
    6
}
fn default_eps() -> f64 {
    0.1
}
fn default_gap_ratio() -> f64 {
    0.25
}
fn default_k_max() -> usize {
    12
}
fn default_degree() -> usize {
    40
}
fn default_alpha() -> f64 {
    0.2
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_berezin_points() -> usize {
    2
}

impl ExperimentConfig {
    /// Parses and validates; every failure is a config error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, cli: &Cli) {
        if let Some(s) = cli.seed {
            self.seed = s;
        }
        if let Some(d) = cli.degree {
            self.degree = d;
        }
        if let Some(k) = cli.kmax {
            self.k_max = k;
        }
        if let Some(a) = cli.alpha {
            self.alpha = a;
        }
        if let Some(p) = &cli.p {
            self.p = p.clone();
        }
        if let Some(o) = &cli.out {
            self.out = Some(o.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.weight.n == 0 {
            return bad("weight.n must be at least 1".into());
        }
        if self.k_max == 0 || self.k_max > 200 {
            return bad(format!("k_max must lie in 1..=200, got {}", self.k_max));
        }
        if self.degree == 0 {
            return bad("degree must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.p.is_empty() {
            return bad("p needs at least one exponent".into());
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            return bad(format!("every p must satisfy 1 < p < ∞, got {p}"));
        }
        if self.sampling.rotations < 2 || self.sampling.per_rotation == 0 {
            return bad("sampling needs at least 2 rotations and 1 point per rotation".into());
        }
        if let Some(s) = &self.sweep {
            if s.is_empty() || s.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return bad("sweep needs nonnegative finite s values".into());
            }
        }
        let r = &self.remark;
        if r.levels < 4 {
            return bad(format!("remark.levels must be at least 4, got {}", r.levels));
        }
        if !(r.eps > 0.0 && r.eps < 1.0) || !(r.gap_ratio > 0.0 && r.gap_ratio < 1.0) {
            return bad("remark.eps and remark.gap_ratio must lie in (0, 1)".into());
        }
        if self.berezin_points == 0 {
            return bad("berezin_points must be at least 1".into());
        }
        Ok(())
    }

    pub fn ball_sampling(&self) -> BallSampling {
        BallSampling {
            rotations: self.sampling.rotations,
            per_rotation: self.sampling.per_rotation,
            seed: self.seed,
        }
    }
}

/// Weight, grid and measure built from a validated config.
pub struct Setup {
    pub weight: Weight,
    pub grid: DyadicGrid,
    pub measure: Measure,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    let as_config = |e: Error| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    };
    let weight = cfg.weight.build().map_err(as_config)?;
    let grid = weight.dyadic_radii(cfg.k_max).map_err(as_config)?;
    let measure = match &cfg.measure {
        Some(spec) => spec.build(&weight, &grid).map_err(as_config)?,
        None => Measure::radial(&weight, 1.0, 0.0)?,
    };
    Ok(Setup { weight, grid, measure })
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Domain(_) | Error::Construction(_) | Error::Range(_) => EXIT_CONFIG,
        Error::Numerical(_) | Error::Precision { .. } => EXIT_NUMERICAL,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
    }
}

/// Collects artifact names in write order.
struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> Result<BufWriter<fs::File>> {
        self.names.push(name.to_string());
        Ok(BufWriter::new(fs::File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        std::io::Write::write_all(&mut f, b"\n")?;
        Ok(())
    }
}

fn run_weights(cfg: &ExperimentConfig, s: &Setup, a: &mut Artifacts) -> Result<()> {
    s.grid.write_csv(a.create("grid.csv")?)?;
    let (s_star, warning) = schatten::s_star_check(&s.weight, &s.grid)?;
    a.json(
        "weights.json",
        &json!({
            "n": cfg.weight.n,
            "k_max": cfg.k_max,
            "norm_const": s.weight.norm_const(),
            "class_s_ratio": crate::weights::class_s_ratio(&s.grid),
            "in_class_s": s.grid.in_class_s(),
            "s_star_ratio": s_star,
            "s_star_warning": warning,
        }),
    )
}

fn write_band_csv<W: std::io::Write>(rows: &[(usize, &holofn::BandReport)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["degree", "k", "gap", "value"])?;
    for (d, band) in rows {
        for r in &band.rows {
            w.write_record([d.to_string(), r.k.to_string(), format!("{:.15e}", r.gap), format!("{:.15e}", r.value)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_kernel(cfg: &ExperimentConfig, s: &Setup, a: &mut Artifacts) -> Result<()> {
    let ks = KernelSeries::new(&s.weight, cfg.degree)?;
    let refined = KernelSeries::new(&s.weight, cfg.degree + 10)?;
    let band = holofn::kernel_diag_band(&ks, &s.grid, 4)?;
    let fine = holofn::kernel_diag_band(&refined, &s.grid, 4)?;
    write_band_csv(&[(cfg.degree, &band), (cfg.degree + 10, &fine)], a.create("kernel_band.csv")?)?;
    let drift = band
        .rows
        .iter()
        .zip(&fine.rows)
        .map(|(x, y)| ((x.value - y.value) / y.value).abs())
        .fold(0.0, f64::max);
    a.json(
        "kernel.json",
        &json!({
            "degree": cfg.degree,
            "band_min": band.min,
            "band_max": band.max,
            "band_ratio": band.ratio(),
            "refined_degree": cfg.degree + 10,
            "refined_ratio": fine.ratio(),
            "max_refinement_drift": drift,
        }),
    )
}

fn run_carleson(cfg: &ExperimentConfig, s: &Setup, a: &mut Artifacts) -> Result<()> {
    let rule = CandidateRule {
        sampling: cfg.ball_sampling(),
        ..CandidateRule::default()
    };
    let report = carleson::carleson_profile(&s.measure, &s.grid, &s.weight, &rule)?;
    report.write_csv(a.create("carleson.csv")?)?;
    let mut f = a.create("verdict.json")?;
    std::io::Write::write_all(&mut f, report.verdict_json()?.as_bytes())?;
    std::io::Write::write_all(&mut f, b"\n")?;
    Ok(())
}

/// Points on the first axis, `per_annulus` per annulus, geometric in the gap.
fn berezin_points(n: usize, grid: &DyadicGrid, per_annulus: usize) -> Result<Vec<(usize, BallPoint)>> {
    holofn::annulus_gaps(grid, per_annulus)
        .into_iter()
        .map(|(k, u)| {
            let mut c = vec![Complex64::new(0.0, 0.0); n];
            c[0] = Complex64::new(1.0 - u, 0.0);
            Ok((k, BallPoint::new(c)?))
        })
        .collect()
}

/// Raises the kernel degree to the precision hint until the Berezin transform is certified.
fn berezin_adaptive(mu: &Measure, ks: &mut KernelSeries, z: &BallPoint, sampling: BallSampling) -> Result<crate::measures::Mass> {
    loop {
        match toeplitz::berezin(mu, ks, z, sampling) {
            Err(Error::Precision { hint: Some(d), .. }) if (d as usize) > ks.degree() && d as usize <= schatten::MAX_KERNEL_DEGREE => {
                *ks = KernelSeries::new(ks.weight(), d as usize)?;
            }
            other => return other,
        }
    }
}

fn run_toeplitz(cfg: &ExperimentConfig, s: &Setup, a: &mut Artifacts) -> Result<()> {
    let sampling = cfg.ball_sampling();
    let (t, report) = toeplitz::toeplitz_report(&s.measure, &s.weight, cfg.degree, sampling)?;
    t.write_spectrum_csv(a.create("spectrum.csv")?)?;
    a.json("toeplitz.json", &report)?;
    let mut ks = KernelSeries::new(&s.weight, cfg.degree)?;
    let mut w = csv::Writer::from_writer(a.create("berezin.csv")?);
    w.write_record(["k", "gap", "berezin", "std_error"])?;
    for (k, z) in berezin_points(cfg.weight.n, &s.grid, cfg.berezin_points)? {
        let m = berezin_adaptive(&s.measure, &mut ks, &z, sampling)?;
        w.write_record([
            k.to_string(),
            format!("{:.15e}", 1.0 - z.norm()),
            format!("{:.15e}", m.value),
            format!("{:.15e}", m.std_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn schatten_options(cfg: &ExperimentConfig, radial: bool) -> SchattenOptions {
    let mut quadrature = if radial {
        LambdaQuadrature::radial(12)
    } else {
        LambdaQuadrature::default()
    };
    quadrature.seed = cfg.seed;
    SchattenOptions {
        degree: cfg.degree,
        alpha: cfg.alpha,
        kernel_degree: cfg.degree,
        sampling: cfg.ball_sampling(),
        quadrature,
        ..SchattenOptions::default()
    }
}

fn run_schatten(cfg: &ExperimentConfig, s: &Setup, a: &mut Artifacts) -> Result<()> {
    if let Some(sv) = &cfg.sweep {
        let rows = schatten::schatten_sweep(&s.weight, &s.grid, sv, &cfg.p, &schatten_options(cfg, true))?;
        schatten::write_sweep_csv(&rows, a.create("sweep.csv")?)?;
        return a.json("sweep.json", &rows);
    }
    let opts = schatten_options(cfg, matches!(s.measure, Measure::RadialDensity(_)));
    let reports = cfg
        .p
        .iter()
        .map(|&p| schatten::theorem3_report(&s.measure, &s.weight, &s.grid, p, &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(a.create("schatten.csv")?);
    w.write_record(["p", "quantity", "value"])?;
    for r in &reports {
        for (q, v) in [
            ("schatten_p", r.schatten_p),
            ("schatten_norm", r.schatten_norm),
            ("integral_muhat", r.integral_muhat),
            ("integral_berezin", r.integral_berezin),
            ("r1", r.r1),
            ("r2", r.r2),
        ] {
            w.write_record([r.p.to_string(), q.to_string(), format!("{v:.15e}")])?;
        }
    }
    w.flush()?;
    drop(w);
    a.json("schatten.json", &reports)
}

fn run_remark(cfg: &ExperimentConfig, a: &mut Artifacts) -> Result<()> {
    let r = &cfg.remark;
    let opts = RemarkOptions {
        outer: BallSampling {
            seed: cfg.seed,
            ..RemarkOptions::default().outer
        },
        ..RemarkOptions::default()
    };
    let reports = schatten::remark_experiment(cfg.weight.n, &cfg.p, r.eps, r.gap_ratio, r.levels, &opts)?;
    for rep in &reports {
        schatten::write_remark_csv(rep, a.create(&format!("remark_p{}.csv", rep.p))?)?;
    }
    a.json("remark.json", &reports)
}

fn tolerances(cfg: &ExperimentConfig) -> serde_json::Value {
    json!({
        "series_tolerance": SERIES_TOL,
        "trusted_modulus": TRUSTED_MODULUS,
        "class_s_margin": CLASS_S_MARGIN,
        "carleson_thresholds": Thresholds::default(),
        "psd_floor": schatten::PSD_FLOOR,
        "decay_threshold": toeplitz::DECAY_THRESHOLD,
        "sampling": cfg.sampling,
    })
}

fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required (or set BERGMAN_CONFIG)".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    cfg.apply_overrides(cli);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let setup = match prepare(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_IO;
    }
    let mut artifacts = Artifacts { dir: dir.clone(), names: Vec::new() };
    let outcome = match cli.command {
        Command::Weights => run_weights(&cfg, &setup, &mut artifacts),
        Command::Kernel => run_kernel(&cfg, &setup, &mut artifacts),
        Command::Carleson => run_carleson(&cfg, &setup, &mut artifacts),
        Command::Toeplitz => run_toeplitz(&cfg, &setup, &mut artifacts),
        Command::Schatten => run_schatten(&cfg, &setup, &mut artifacts),
        Command::Remark => run_remark(&cfg, &mut artifacts),
    };
    let code = match &outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Csv(_) => EXIT_IO,
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            }
        }
    };
    if let Err(e) = write_manifest(&dir, cli.command, &cfg, &artifacts.names, outcome.as_ref().err(), code) {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_IO;
    }
    code
}

fn write_manifest(dir: &Path, cmd: Command, cfg: &ExperimentConfig, names: &[String], err: Option<&Error>, code: i32) -> Result<()> {
    let manifest = json!({
        "subcommand": cmd.name(),
        "status": if err.is_none() { "ok" } else { "failed" },
        "exit_code": code,
        "error": err.map(|e| e.to_string()),
        "precision_hint": match err {
            Some(Error::Precision { hint, .. }) => *hint,
            _ => None,
        },
        "seed": cfg.seed,
        "config": cfg,
        "versions": {
            "bergman": env!("CARGO_PKG_VERSION"),
            "manifest_format": 1,
        },
        "tolerances": tolerances(cfg),
        "artifacts": names,
        "created_unix": unix_time(),
    });
    let f = BufWriter::new(fs::File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(())
}
