//! Experiment drivers: each composes samplers, dynamics and estimators into
//! one check and returns an [`ExperimentReport`].
//!
//! Replicas run on the current rayon pool; results are gathered in replica
//! order so reports do not depend on the number of workers.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::{Display, Write as _};
use std::time::Instant;

use rayon::prelude::*;

use crate::drift::{limit_isde_drift_2d, OnePointModel, TruncationMode, GINIBRE_DENSITY};
use crate::error::{Error, Result};
use crate::estimators::{
    bin_average, estimate_rho2_gap, ks_statistic, ks_two_sample, mean_density, reflected_bm_max_cdf, semicircle_cdf,
    sine_rho2, tightness_diagnostic, uniform_bins,
};
use crate::integrator::{max_of_path, reconstruct_brownian, simulate, IntegratorSettings};
use crate::model::{
    parse_key_values, parse_spec, print_spec, Dimension, GinibreParams, LabelOrder, LabeledState, ModelSpec, Point2,
    RunContext, Scaling, Window,
};
use crate::potentials::{drift_constant_for_beta, semicircle_density};
use crate::samplers::{
    bulk_rescale, mcmc_sample, poisson_init, tridiagonal_gaussian_beta_sample, tridiagonal_gaussian_beta_window,
    GinibreTarget, LogGasTarget, McmcSettings, StrongNonHermitianTarget,
};

/// Outcome of one experiment. `passed` holds iff every statistic that has a
/// threshold is at most that threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub spec: ModelSpec,
    pub parameters: BTreeMap<String, String>,
    pub statistics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub passed: bool,
    pub runtime_seconds: f64,
    pub ctx: RunContext,
}

impl ExperimentReport {
    fn new(name: &str, spec: ModelSpec, ctx: &RunContext) -> Self {
        Self {
            name: name.to_string(),
            spec,
            parameters: BTreeMap::new(),
            statistics: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            passed: false,
            runtime_seconds: 0.0,
            ctx: *ctx,
        }
    }

    fn param(&mut self, key: &str, value: impl Display) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    fn stat(&mut self, key: &str, value: f64) {
        self.statistics.insert(key.to_string(), value);
    }

    fn bound(&mut self, key: &str, value: f64, threshold: f64) {
        self.stat(key, value);
        self.thresholds.insert(key.to_string(), threshold);
    }

    fn finish(mut self, start: Instant) -> Self {
        self.passed = self.evaluate();
        self.runtime_seconds = start.elapsed().as_secs_f64();
        self
    }

    /// Recomputes the pass flag from statistics and thresholds.
    pub fn evaluate(&self) -> bool {
        self.thresholds.iter().all(|(k, t)| matches!(self.statistics.get(k), Some(v) if *v <= *t))
    }

    /// `<name>-<seed>.txt`.
    pub fn file_name(&self) -> String {
        format!("{}-{}.txt", self.name, self.ctx.seed)
    }

    /// Flat `key = value` text. Metadata (runtime, creation time) is only
    /// written when `include_metadata` is set, so reports of identical runs
    /// compare byte for byte without it.
    pub fn to_text(&self, include_metadata: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "seed = {}", self.ctx.seed);
        let _ = writeln!(out, "replica_id = {}", self.ctx.replica_id);
        let _ = writeln!(out, "passed = {}", self.passed);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "param.{k} = {v}");
        }
        for line in print_spec(&self.spec).lines() {
            let _ = writeln!(out, "spec.{line}");
        }
        for (k, v) in &self.statistics {
            let _ = writeln!(out, "stat.{k} = {v}");
        }
        for (k, v) in &self.thresholds {
            let _ = writeln!(out, "threshold.{k} = {v}");
        }
        if include_metadata {
            let _ = writeln!(out, "meta.runtime_seconds = {}", self.runtime_seconds);
            if let Some(created) = self.ctx.created {
                let _ = writeln!(out, "meta.created = {created}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut name = None;
        let mut ctx = RunContext::fixed(0);
        let mut passed = None;
        let mut spec_text = String::new();
        let mut report = Self::new("", ModelSpec::gaussian_raw(1, 2.0), &ctx);
        for (line, key, value) in parse_key_values(text)? {
            let bad = |msg: String| Error::Parse { line, msg };
            let real = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("`{key}` expects a number")));
            if let Some(k) = key.strip_prefix("spec.") {
                let _ = writeln!(spec_text, "{k} = {value}");
            } else if let Some(k) = key.strip_prefix("param.") {
                report.parameters.insert(k.to_string(), value);
            } else if let Some(k) = key.strip_prefix("stat.") {
                report.statistics.insert(k.to_string(), real(&value)?);
            } else if let Some(k) = key.strip_prefix("threshold.") {
                report.thresholds.insert(k.to_string(), real(&value)?);
            } else {
                match key.as_str() {
                    "name" => name = Some(value),
                    "seed" => ctx.seed = value.parse().map_err(|_| bad("seed must be an integer".into()))?,
                    "replica_id" => ctx.replica_id = value.parse().map_err(|_| bad("replica_id must be an integer".into()))?,
                    "passed" => passed = Some(value == "true"),
                    "meta.runtime_seconds" => report.runtime_seconds = real(&value)?,
                    "meta.created" => ctx.created = Some(value.parse().map_err(|_| bad("created must be an integer".into()))?),
                    _ => return Err(bad(format!("unknown report key `{key}`"))),
                }
            }
        }
        report.name = name.ok_or_else(|| Error::MissingData("report name".into()))?;
        report.spec = parse_spec(&spec_text)?;
        report.ctx = ctx;
        report.passed = passed.ok_or_else(|| Error::MissingData("pass flag".into()))?;
        Ok(report)
    }

    /// One line: name, PASS/FAIL and every thresholded statistic.
    pub fn summary_line(&self) -> String {
        let mut line = format!("{:<24} {}", self.name, if self.passed { "PASS" } else { "FAIL" });
        for (k, t) in &self.thresholds {
            let v = self.statistics.get(k).copied().unwrap_or(f64::NAN);
            let _ = write!(line, "  {k}={v:.6} (<= {t})");
        }
        line
    }
}

/// Independent context for a second use of the same replica index.
pub fn substream(ctx: &RunContext, tag: u64) -> RunContext {
    RunContext {
        seed: ctx.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ..*ctx
    }
}

fn par_replicas<T, F>(replicas: usize, ctx: &RunContext, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RunContext) -> Result<T> + Sync,
{
    (0..replicas as u64).into_par_iter().map(|k| f(ctx.replica(k))).collect()
}

fn need_replicas(replicas: usize) -> Result<()> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("at least one replica is required".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Semicircle law.

/// Pooled tridiagonal spectra against the semicircle CDF.
pub fn run_semicircle(n: usize, beta: f64, replicas: usize, ctx: &RunContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    need_replicas(replicas)?;
    let spec = ModelSpec::gaussian_raw(n, beta);
    let samples = par_replicas(replicas, ctx, |c| tridiagonal_gaussian_beta_sample(n, beta, &c))?;
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.as_1d().unwrap_or(&[]).iter().copied()).collect();
    let ks = ks_statistic(&pooled, semicircle_cdf)?;
    let mut report = ExperimentReport::new("semicircle", spec, ctx);
    report.param("replicas", replicas);
    report.bound("ks", ks, if beta == 1.0 { 0.03 } else { 0.02 });
    Ok(report.finish(start))
}

// ---------------------------------------------------------------------------
// Bulk sine universality.

/// Largest gap entering the comparison and the comparison range.
const SINE_GAP_MAX: f64 = 3.0;
const SINE_GAP_MIN: f64 = 0.2;
const SINE_BIN_WIDTH: f64 = 0.1;

/// β = 2 Gaussian spectra, bulk-rescaled at θ = 0, against the sine-kernel
/// two-point function `1 − (sin πs/πs)²`. Only eigenvalues within
/// `window_halfwidth + 3` of the origin (scaled units) are computed.
pub fn run_bulk_universality(n: usize, replicas: usize, window_halfwidth: f64, ctx: &RunContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    need_replicas(replicas)?;
    if !(window_halfwidth > 0.0) {
        return Err(Error::InvalidArgument("window half-width must be positive".into()));
    }
    let rho = semicircle_density(0.0);
    let scale = n as f64 * rho;
    let reach = (window_halfwidth + SINE_GAP_MAX) / scale;
    let samples = par_replicas(replicas, ctx, |c| {
        let raw = tridiagonal_gaussian_beta_window(n, 2.0, -reach, reach, &c)?;
        bulk_rescale(&raw, n, rho, 0.0)
    })?;
    let nbins = (SINE_GAP_MAX / SINE_BIN_WIDTH).round() as usize;
    let bins = uniform_bins(0.0, SINE_GAP_MAX, nbins);
    let est = estimate_rho2_gap(&samples, &bins, window_halfwidth)?;
    let mut max_dev: f64 = 0.0;
    let mut first_signed = f64::NAN;
    let mut far = Vec::new();
    for (b, w) in bins.windows(2).enumerate() {
        if w[0] < SINE_GAP_MIN - 1e-9 {
            continue;
        }
        let reference = bin_average(sine_rho2, w[0], w[1], 16);
        let dev = est.values[b] - reference;
        if first_signed.is_nan() {
            first_signed = dev;
        }
        max_dev = max_dev.max(dev.abs());
        if w[0] >= 2.0 - 1e-9 {
            far.push(est.values[b]);
        }
    }
    let mut report = ExperimentReport::new("bulk", ModelSpec::gaussian_bulk(n, 2.0, 0.0, Window::Finite(window_halfwidth)), ctx);
    report.param("replicas", replicas);
    report.param("window_halfwidth", window_halfwidth);
    report.param("bin_width", SINE_BIN_WIDTH);
    report.bound("max_deviation", max_dev, 0.1);
    report.bound("n_below_minimum", if n < 200 { 1.0 } else { 0.0 }, 0.0);
    report.stat("deviation_first_bin", first_signed);
    report.stat("large_gap_mean", far.iter().sum::<f64>() / far.len().max(1) as f64);
    report.stat("mean_density", mean_density(&samples, window_halfwidth)?);
    Ok(report.finish(start))
}

// ---------------------------------------------------------------------------
// Invariance principle for the windowed log-gas.

/// One-point function used for the particles outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutsideDensity {
    /// `ρ¹ ≡ 1`, the bulk-scaling limit.
    ConstantOne,
    /// Exact semicircle profile `ϱ(s/(Nρ) + θ)/ϱ(θ)` (quadratic `V` only).
    Semicircle,
    /// 200-bin histogram of the equilibrium starting configurations.
    Histogram,
}

impl OutsideDensity {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutsideDensity::ConstantOne => "constant",
            OutsideDensity::Semicircle => "semicircle",
            OutsideDensity::Histogram => "histogram",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(OutsideDensity::ConstantOne),
            "semicircle" => Ok(OutsideDensity::Semicircle),
            "histogram" => Ok(OutsideDensity::Histogram),
            other => Err(Error::InvalidArgument(format!("unknown outside density `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceSetup {
    /// 1D bulk-scaled model with a finite window.
    pub spec: ModelSpec,
    pub t: f64,
    pub dt: f64,
    pub replicas: usize,
    pub outside: OutsideDensity,
    /// Add `C(β) t` to the functional. Dropping it is a negative control
    /// whenever `V'(θ) ≠ 0`.
    pub include_constant: bool,
}

impl InvarianceSetup {
    pub fn new(spec: ModelSpec, t: f64, dt: f64, replicas: usize) -> Self {
        Self {
            spec,
            t,
            dt,
            replicas,
            outside: OutsideDensity::ConstantOne,
            include_constant: true,
        }
    }
}

/// Semicircle profile in scaled units, tabulated on 400 cells.
pub fn semicircle_outside_density(n: usize, theta: f64) -> Result<OnePointModel> {
    let rho = semicircle_density(theta);
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument("theta outside the semicircle support".into()));
    }
    let scale = n as f64 * rho;
    let lo = scale * (-SQRT_2 - theta);
    let hi = scale * (SQRT_2 - theta);
    let grid = uniform_bins(lo, hi, 400);
    let values = grid.iter().map(|&s| semicircle_density(s / scale + theta) / rho).collect();
    OnePointModel::tabulated(grid, values)
}

/// Equilibrium configuration in the bulk frame: tridiagonal sampler for
/// `V = x²` and β ∈ {1, 2, 4}, Metropolis otherwise.
fn bulk_equilibrium(spec: &ModelSpec, ctx: &RunContext) -> Result<LabeledState> {
    let rho = spec.rho_at_theta().ok_or_else(|| Error::InvalidSpec("missing rho_theta".into()))?;
    let classical = spec.beta == 1.0 || spec.beta == 2.0 || spec.beta == 4.0;
    if spec.potential.is_quadratic() && classical {
        let raw = tridiagonal_gaussian_beta_sample(spec.n_particles, spec.beta, ctx)?;
        bulk_rescale(&raw, spec.n_particles, rho, spec.theta)
    } else {
        let target = LogGasTarget::new(&ModelSpec {
            window: Window::Infinite,
            ..spec.clone()
        })?;
        let settings = McmcSettings {
            n_sweeps: 2000,
            burn_in: 1999,
            proposal_scale: 0.5,
            thinning: 1,
            adapt: true,
        };
        let run = mcmc_sample(&target, &settings, ctx)?;
        run.samples.into_iter().next().ok_or(Error::Empty("Metropolis output"))
    }
}

struct InvarianceReplica {
    maxima: Vec<f64>,
    residual: f64,
    pushed: bool,
}

/// Windowed bulk dynamics from equilibrium; for every particle starting in
/// the inner half-window, the running maximum over `[0, T]` of
/// `X(t) − X(0) − ∫ interaction + C(β) t − ∫ tail` is compared with the law
/// of the maximum of Brownian motion.
pub fn run_invariance_principle(setup: &InvarianceSetup, ctx: &RunContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    let spec = &setup.spec;
    crate::model::ensure_valid(spec)?;
    need_replicas(setup.replicas)?;
    if spec.dimension != Dimension::OneD || spec.scaling != Scaling::Bulk {
        return Err(Error::InvalidSpec("invariance experiment needs a 1D bulk-scaled spec".into()));
    }
    let r = spec
        .window
        .radius()
        .ok_or_else(|| Error::InvalidSpec("invariance experiment needs a finite window".into()))?;
    if !(setup.t > 0.0 && setup.t <= 1.0) {
        return Err(Error::InvalidArgument("T must lie in (0, 1]".into()));
    }
    let rho = spec.rho_at_theta().expect("validated");
    let c_beta = drift_constant_for_beta(&spec.potential, spec.theta, rho, spec.beta)?;

    let starts = par_replicas(setup.replicas, &substream(ctx, 1), |c| bulk_equilibrium(spec, &c))?;
    let rho1 = match setup.outside {
        OutsideDensity::ConstantOne => OnePointModel::ConstantOutside(1.0),
        OutsideDensity::Semicircle => {
            if !spec.potential.is_quadratic() {
                return Err(Error::InvalidSpec("semicircle outside density needs V = x²".into()));
            }
            semicircle_outside_density(spec.n_particles, spec.theta)?
        }
        OutsideDensity::Histogram => {
            let lo = starts.iter().filter_map(|s| s.as_1d().and_then(|p| p.first().copied())).fold(f64::INFINITY, f64::min);
            let hi = starts.iter().filter_map(|s| s.as_1d().and_then(|p| p.last().copied())).fold(f64::NEG_INFINITY, f64::max);
            OnePointModel::from_histogram(&starts, lo, hi + 1e-9, 200)?
        }
    };
    let settings = IntegratorSettings::new(setup.dt, setup.t);
    let mode = TruncationMode::Full;
    let c_used = if setup.include_constant { c_beta } else { 0.0 };

    let results = par_replicas(setup.replicas, &substream(ctx, 2), |c| {
        let eq = &starts[c.replica_id as usize];
        let inside: Vec<f64> = eq.require_1d()?.iter().copied().filter(|s| s.abs() < r).collect();
        if inside.is_empty() {
            return Ok(InvarianceReplica {
                maxima: Vec::new(),
                residual: 0.0,
                pushed: false,
            });
        }
        let init = LabeledState::one_d(inside)?;
        let traj = simulate(spec, &settings, mode, &rho1, &init, &c)?;
        let recon = reconstruct_brownian(&traj, spec, mode, &rho1)?;
        let mut maxima = Vec::new();
        for (i, &s0) in init.as_1d().unwrap_or(&[]).iter().enumerate() {
            if s0.abs() < 0.5 * r {
                let f = recon.invariance_functional(i, c_used)?;
                maxima.push(max_of_path(&recon.times, &f, setup.t)?);
            }
        }
        Ok(InvarianceReplica {
            maxima,
            residual: recon.residual,
            pushed: traj.boundary_pushes.iter().flatten().any(|p| *p != 0.0),
        })
    })?;

    let maxima: Vec<f64> = results.iter().flat_map(|r| r.maxima.iter().copied()).collect();
    let residual = results.iter().map(|r| r.residual).fold(0.0, f64::max);
    let ks = ks_statistic(&maxima, |a| reflected_bm_max_cdf(a, setup.t))?;

    let mut report = ExperimentReport::new("invariance", spec.clone(), ctx);
    report.param("replicas", setup.replicas);
    report.param("T", setup.t);
    report.param("dt", setup.dt);
    report.param("outside_density", setup.outside.as_str());
    report.param("include_constant", setup.include_constant);
    report.bound("ks", ks, 0.05);
    report.bound("reconstruction_residual", residual, 1e-8);
    report.stat("c_beta", c_beta);
    report.stat("tagged_particles", maxima.len() as f64);
    report.stat("mean_max", maxima.iter().sum::<f64>() / maxima.len().max(1) as f64);
    report.stat("replicas_with_boundary_contact", results.iter().filter(|r| r.pushed).count() as f64);
    Ok(report.finish(start))
}

// ---------------------------------------------------------------------------
// Ginibre statics.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GinibreMode {
    Plain,
    /// Strongly non-Hermitian normal-matrix model, mapped to the microscopic
    /// frame `x = √(cN)(z − ζ)`.
    StrongNonHermitian(GinibreParams),
    /// Poisson points of intensity `1/π`: matches `ρ¹` but not `ρ²`
    /// (negative control).
    PoissonControl,
}

impl GinibreMode {
    fn as_str(&self) -> &'static str {
        match self {
            GinibreMode::Plain => "plain",
            GinibreMode::StrongNonHermitian(_) => "strong_nonhermitian",
            GinibreMode::PoissonControl => "poisson_control",
        }
    }
}

/// Metropolis settings for `samples_per_chain` draws of an `n`-point
/// planar gas.
fn planar_mcmc_settings(samples_per_chain: usize) -> McmcSettings {
    let thinning = 20;
    McmcSettings {
        n_sweeps: 500 + thinning * samples_per_chain,
        burn_in: 500,
        proposal_scale: 0.3,
        thinning,
        adapt: true,
    }
}

/// `chains × samples_per_chain` Ginibre configurations (ascending modulus).
pub fn ginibre_equilibrium_samples(n: usize, chains: usize, samples_per_chain: usize, ctx: &RunContext) -> Result<Vec<LabeledState>> {
    let target = GinibreTarget::new(n);
    let settings = planar_mcmc_settings(samples_per_chain);
    let runs = par_replicas(chains, ctx, |c| mcmc_sample(&target, &settings, &c))?;
    Ok(runs.into_iter().flat_map(|r| r.samples).collect())
}

const GINIBRE_WINDOW: f64 = 2.0;
const GINIBRE_SAMPLES_PER_CHAIN: usize = 20;

/// Density and two-point ratio of planar samples in a central disc, against
/// `1/π` and `1 − e^{−s²}`.
pub fn run_ginibre_static(n: usize, replicas: usize, mode: GinibreMode, ctx: &RunContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    need_replicas(replicas)?;
    let per_chain = GINIBRE_SAMPLES_PER_CHAIN;
    let samples: Vec<LabeledState> = match mode {
        GinibreMode::Plain => ginibre_equilibrium_samples(n, replicas, per_chain, ctx)?,
        GinibreMode::StrongNonHermitian(params) => {
            let target = StrongNonHermitianTarget::new(params, n)?;
            let settings = planar_mcmc_settings(per_chain);
            let root = (params.c_scale * n as f64).sqrt();
            let runs = par_replicas(replicas, ctx, |c| mcmc_sample(&target, &settings, &c))?;
            runs.into_iter()
                .flat_map(|r| r.samples)
                .map(|s| {
                    let pts: Vec<Point2> = s
                        .as_2d()
                        .unwrap_or(&[])
                        .iter()
                        .map(|z| [root * (z[0] - params.zeta[0]), root * (z[1] - params.zeta[1])])
                        .collect();
                    LabeledState::sorted_by_modulus_2d(pts)
                })
                .collect()
        }
        GinibreMode::PoissonControl => {
            let radius = GINIBRE_WINDOW + 3.0;
            par_replicas(replicas * per_chain, ctx, |c| {
                poisson_init(Window::Finite(radius), GINIBRE_DENSITY, Dimension::TwoD, &c)
            })?
        }
    };
    let rho1 = mean_density(&samples, GINIBRE_WINDOW)?;
    let bins = uniform_bins(0.3, 2.5, 22);
    let est = estimate_rho2_gap(&samples, &bins, GINIBRE_WINDOW)?;
    let mut max_dev: f64 = 0.0;
    for (b, w) in bins.windows(2).enumerate() {
        let ratio = est.values[b] / (rho1 * rho1);
        // Area average of 1 − e^{−s²} over the annulus s0 ≤ |z| < s1.
        let (a, c) = (w[0] * w[0], w[1] * w[1]);
        let reference = 1.0 - ((-a).exp() - (-c).exp()) / (c - a);
        max_dev = max_dev.max((ratio - reference).abs());
    }
    let spec = match mode {
        GinibreMode::StrongNonHermitian(params) => ModelSpec {
            ginibre: Some(params),
            ..ModelSpec::ginibre(n, Window::Finite(GINIBRE_WINDOW))
        },
        _ => ModelSpec::ginibre(n, Window::Finite(GINIBRE_WINDOW)),
    };
    let mut report = ExperimentReport::new("ginibre-static", spec, ctx);
    report.param("replicas", replicas);
    report.param("samples_per_replica", per_chain);
    report.param("mode", mode.as_str());
    report.bound("rho1_relative_error", (PI * rho1 - 1.0).abs(), 0.1);
    report.bound("rho2_ratio_max_deviation", max_dev, 0.15);
    report.stat("rho1", rho1);
    Ok(report.finish(start))
}

// ---------------------------------------------------------------------------
// Ginibre dynamics.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GinibreDynamicsSetup {
    pub n: usize,
    pub r: f64,
    pub t: f64,
    pub dt: f64,
    pub replicas: usize,
    /// Start from equilibrium; otherwise the window particles start
    /// uniformly in the disc of radius `r/2` (negative control).
    pub equilibrium_start: bool,
}

/// Radii at which the two truncated limit drifts are compared.
pub const LIMIT_DRIFT_RADII: [f64; 3] = [2.0, 4.0, 8.0];

/// Mean over particles with `|x| < 1` of
/// `|b_abs(r) − b_rel(r)|²`, the squared difference between the
/// absolute-position and relative-distance truncations of the limit drift.
pub fn limit_drift_discrepancy(samples: &[LabeledState], r: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in samples {
        let tracked = s.clone().into_tracked();
        for (i, z) in s.require_2d()?.iter().enumerate() {
            if z[0].hypot(z[1]) >= 1.0 {
                continue;
            }
            let a = limit_isde_drift_2d(i, &tracked, TruncationMode::AbsolutePosition(r))?;
            let b = limit_isde_drift_2d(i, &tracked, TruncationMode::RelativeDistance(r))?;
            total += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("central particles"));
    }
    Ok(total / count as f64)
}

/// Windowed Ginibre dynamics: radial distribution at time `T` against the
/// equilibrium one, plus the truncated-drift comparison on the equilibrium
/// samples (reported without a threshold).
pub fn run_ginibre_dynamics(setup: &GinibreDynamicsSetup, ctx: &RunContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    need_replicas(setup.replicas)?;
    let spec = ModelSpec::ginibre(setup.n, Window::Finite(setup.r));
    crate::model::ensure_valid(&spec)?;
    let eq = ginibre_equilibrium_samples(setup.n, setup.replicas, 1, &substream(ctx, 1))?;
    let mut settings = IntegratorSettings::new(setup.dt, setup.t);
    settings.record_stride = settings.n_steps().max(1);
    let rho1 = OnePointModel::ConstantOutside(GINIBRE_DENSITY);
    let r = setup.r;

    let finals = par_replicas(setup.replicas, &substream(ctx, 2), |c| {
        let inside: Vec<Point2> = eq[c.replica_id as usize]
            .require_2d()?
            .iter()
            .copied()
            .filter(|z| z[0].hypot(z[1]) < r)
            .collect();
        let init_pts = if setup.equilibrium_start {
            inside
        } else {
            let mut rng = substream(&c, 3).rng();
            (0..inside.len())
                .map(|_| {
                    use rand::Rng;
                    let rad = 0.5 * r * rng.random::<f64>().sqrt();
                    let phi = 2.0 * PI * rng.random::<f64>();
                    [rad * phi.cos(), rad * phi.sin()]
                })
                .collect()
        };
        let init = LabeledState::two_d(init_pts, LabelOrder::Tracked)?;
        let traj = simulate(&spec, &settings, TruncationMode::Full, &rho1, &init, &c)?;
        Ok(traj.states.last().map(|s| s.moduli()).unwrap_or_default())
    })?;
    let reference: Vec<f64> = eq
        .iter()
        .flat_map(|s| s.moduli().into_iter().filter(|m| *m < r))
        .collect();
    let at_t: Vec<f64> = finals.into_iter().flatten().collect();
    let ks = ks_two_sample(&at_t, &reference)?;

    let mut report = ExperimentReport::new("ginibre-dynamics", spec, ctx);
    report.param("replicas", setup.replicas);
    report.param("T", setup.t);
    report.param("dt", setup.dt);
    report.param("equilibrium_start", setup.equilibrium_start);
    report.bound("stationarity_ks", ks, 0.07);
    for radius in LIMIT_DRIFT_RADII {
        report.stat(&format!("limit_drift_msd_r{radius}"), limit_drift_discrepancy(&eq, radius)?);
    }
    Ok(report.finish(start))
}

// ---------------------------------------------------------------------------
// Tightness diagnostic.

/// Tabulates `tightness_diagnostic` over `l_grid`; passes when the value at
/// the largest `l` is below 0.01 and the table is nonincreasing in `l`.
pub fn run_tightness(samples: &[LabeledState], r: f64, t: f64, l_grid: &[usize], ctx: &RunContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    if l_grid.is_empty() {
        return Err(Error::Empty("l grid"));
    }
    let mut grid = l_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let values: Vec<f64> = grid
        .iter()
        .map(|&l| tightness_diagnostic(samples, l, r, t))
        .collect::<Result<_>>()?;
    let dimension = samples.first().map(|s| s.dimension()).unwrap_or(Dimension::TwoD);
    let n = samples.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
    let spec = match dimension {
        Dimension::TwoD => ModelSpec::ginibre(n, Window::Finite(r)),
        Dimension::OneD => ModelSpec {
            window: Window::Finite(r),
            ..ModelSpec::gaussian_raw(n, 2.0)
        },
    };
    let mut report = ExperimentReport::new("tightness", spec, ctx);
    report.param("T", t);
    report.param("samples", samples.len());
    for (l, v) in grid.iter().zip(&values) {
        report.stat(&format!("diagnostic_l{l}"), *v);
    }
    let increases = values.windows(2).filter(|w| w[1] > w[0]).count();
    report.bound("monotonicity_violations", increases as f64, 0.0);
    report.bound("diagnostic_at_largest_l", *values.last().expect("nonempty"), 0.01);
    Ok(report.finish(start))
}
