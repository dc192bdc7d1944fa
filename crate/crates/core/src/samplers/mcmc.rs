//! Single-site Gaussian random-walk Metropolis for log-gas and Ginibre-type
//! densities.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Dimension, GinibreParams, LabeledState, ModelSpec, Point2, RunContext, Scaling};
use crate::potentials::{beta_multiplier_extended, horner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcSettings {
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub thinning: usize,
    /// Tune `proposal_scale` toward 30% acceptance during burn-in.
    pub adapt: bool,
}

impl McmcSettings {
    pub fn check(&self) -> Result<()> {
        if self.n_sweeps == 0 || self.burn_in == 0 || self.thinning == 0 || !(self.proposal_scale > 0.0) {
            return Err(Error::InvalidArgument("MCMC settings must all be positive".into()));
        }
        if self.burn_in >= self.n_sweeps {
            return Err(Error::InvalidArgument("burn_in must be below n_sweeps".into()));
        }
        Ok(())
    }

    /// Number of states [`mcmc_sample`] returns.
    pub fn n_samples(&self) -> usize {
        (self.n_sweeps - self.burn_in) / self.thinning
    }
}

#[derive(Debug, Clone)]
pub struct McmcRun {
    pub samples: Vec<LabeledState>,
    /// Acceptance rate over the post-burn-in sweeps.
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
}

/// Unnormalized log-density on flattened coordinates, with the single-site
/// difference used by the sampler.
pub trait LogTarget: Sync {
    fn dimension(&self) -> Dimension;
    fn n(&self) -> usize;
    fn log_density(&self, coords: &[f64]) -> f64;
    /// `log ρ(coords with site i moved to proposal) − log ρ(coords)`.
    fn site_delta(&self, coords: &[f64], i: usize, proposal: &[f64]) -> f64;
    /// Starting configuration.
    fn initial(&self, rng: &mut dyn rand::RngCore) -> Vec<f64>;

    fn to_state(&self, coords: &[f64]) -> Result<LabeledState> {
        match self.dimension() {
            Dimension::OneD => LabeledState::sorted_1d(coords.to_vec()),
            Dimension::TwoD => Ok(LabeledState::sorted_by_modulus_2d(
                coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            )),
        }
    }
}

/// `log α(from → to) = min(0, ℓ_to − ℓ_from)`; `−∞` for an impossible target.
pub fn log_acceptance(log_from: f64, log_to: f64) -> f64 {
    if log_to.is_nan() || log_to == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (log_to - log_from).min(0.0)
}

/// `log[ρ(from) α(from → to)] = min(ℓ_from, ℓ_to)`, symmetric in its arguments.
pub fn log_flow(log_from: f64, log_to: f64) -> f64 {
    if log_to.is_nan() || log_from.is_nan() {
        return f64::NEG_INFINITY;
    }
    log_from.min(log_to)
}

/// `Σ_j log(|y − x_j| / |x − x_j|)` over `j ≠ i`, chunked through products.
fn log_distance_ratio_1d(points: &[f64], i: usize, old: f64, new: f64) -> f64 {
    let mut acc = 0.0;
    let mut prod = 1.0;
    let mut k = 0;
    for (j, &x) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        prod *= (new - x) / (old - x);
        k += 1;
        if k == 16 {
            acc += prod.abs().ln();
            prod = 1.0;
            k = 0;
        }
    }
    acc + prod.abs().ln()
}

/// `Σ_j log(|y − x_j|² / |x − x_j|²)` over `j ≠ i`.
fn log_sq_distance_ratio_2d(coords: &[f64], i: usize, old: Point2, new: Point2) -> f64 {
    let mut acc = 0.0;
    let mut prod = 1.0;
    let mut k = 0;
    for (j, c) in coords.chunks_exact(2).enumerate() {
        if j == i {
            continue;
        }
        let dn = (new[0] - c[0]).powi(2) + (new[1] - c[1]).powi(2);
        let d0 = (old[0] - c[0]).powi(2) + (old[1] - c[1]).powi(2);
        prod *= dn / d0;
        k += 1;
        if k == 8 {
            acc += prod.ln();
            prod = 1.0;
            k = 0;
        }
    }
    acc + prod.ln()
}

fn pair_log_sum_1d(points: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            acc += (points[i] - points[j]).abs().ln();
        }
    }
    acc
}

fn pair_log_sq_sum_2d(points: &[Point2]) -> f64 {
    let mut acc = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            acc += ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).ln();
        }
    }
    acc
}

/// 1D log-gas `β Σ_{i<j} log|s_i − s_j| − N Σ_k V_β(x(s_k))`, where
/// `x(s) = s` in the raw frame and `x(s) = s/(Nρ) + θ` in the bulk frame.
#[derive(Debug, Clone)]
pub struct LogGasTarget {
    beta: f64,
    n: usize,
    v_beta: Vec<f64>,
    frame: Option<(f64, f64)>,
}

impl LogGasTarget {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        crate::model::ensure_valid(spec)?;
        if spec.dimension != Dimension::OneD {
            return Err(Error::DimensionMismatch { expected: "1D", got: "2D" });
        }
        let k = beta_multiplier_extended(spec.beta);
        let v_beta = spec.potential.coefficients().iter().map(|c| c * k).collect();
        let frame = match spec.scaling {
            Scaling::Raw => None,
            Scaling::Bulk => {
                let rho = spec.rho_at_theta().expect("validated");
                Some((spec.n_particles as f64 * rho, spec.theta))
            }
        };
        Ok(Self {
            beta: spec.beta,
            n: spec.n_particles,
            v_beta,
            frame,
        })
    }

    fn macroscopic(&self, s: f64) -> f64 {
        match self.frame {
            Some((scale, theta)) => s / scale + theta,
            None => s,
        }
    }

    fn one_body(&self, s: f64) -> f64 {
        self.n as f64 * horner(&self.v_beta, self.macroscopic(s))
    }
}

impl LogTarget for LogGasTarget {
    fn dimension(&self) -> Dimension {
        Dimension::OneD
    }

    fn n(&self) -> usize {
        self.n
    }

    fn log_density(&self, coords: &[f64]) -> f64 {
        let v = self.beta * pair_log_sum_1d(coords) - coords.iter().map(|&s| self.one_body(s)).sum::<f64>();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn site_delta(&self, coords: &[f64], i: usize, proposal: &[f64]) -> f64 {
        let (old, new) = (coords[i], proposal[0]);
        let d = self.beta * log_distance_ratio_1d(coords, i, old, new) - (self.one_body(new) - self.one_body(old));
        if d.is_nan() {
            f64::NEG_INFINITY
        } else {
            d
        }
    }

    fn initial(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        // Semicircle quantiles in the macroscopic frame, lightly jittered.
        let n = self.n;
        (0..n)
            .map(|k| {
                let u = (k as f64 + 0.5) / n as f64;
                let x = semicircle_quantile(u) + 1e-3 * (rng.random::<f64>() - 0.5) / n as f64;
                match self.frame {
                    Some((scale, theta)) => scale * (x - theta),
                    None => x,
                }
            })
            .collect()
    }
}

fn semicircle_quantile(u: f64) -> f64 {
    let (mut lo, mut hi) = (-2f64.sqrt(), 2f64.sqrt());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if crate::estimators::semicircle_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ginibre density `Σ_{i<j} 2 log|x_i − x_j| − Σ_k |x_k|²`.
#[derive(Debug, Clone)]
pub struct GinibreTarget {
    n: usize,
}

impl GinibreTarget {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LogTarget for GinibreTarget {
    fn dimension(&self) -> Dimension {
        Dimension::TwoD
    }

    fn n(&self) -> usize {
        self.n
    }

    fn log_density(&self, coords: &[f64]) -> f64 {
        let pts: Vec<Point2> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let v = pair_log_sq_sum_2d(&pts) - pts.iter().map(|z| z[0] * z[0] + z[1] * z[1]).sum::<f64>();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn site_delta(&self, coords: &[f64], i: usize, proposal: &[f64]) -> f64 {
        let old = [coords[2 * i], coords[2 * i + 1]];
        let new = [proposal[0], proposal[1]];
        let d = log_sq_distance_ratio_2d(coords, i, old, new) - (new[0] * new[0] + new[1] * new[1])
            + (old[0] * old[0] + old[1] * old[1]);
        if d.is_nan() {
            f64::NEG_INFINITY
        } else {
            d
        }
    }

    fn initial(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        uniform_disk(self.n, (self.n as f64).sqrt(), [0.0, 0.0], rng)
    }
}

fn uniform_disk(n: usize, radius: f64, center: Point2, rng: &mut dyn rand::RngCore) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let r = radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        out.push(center[0] + r * phi.cos());
        out.push(center[1] + r * phi.sin());
    }
    out
}

/// Eigenvalue density of the normal-matrix model with strong
/// non-Hermiticity:
/// `Σ 2log|z_i − z_j| − (N/(1−ω²))(Σ|z|² − (ω/2)Σ(z² + z̄²)) − γ(Σ|z|² − N K_p)²`.
#[derive(Debug, Clone)]
pub struct StrongNonHermitianTarget {
    params: GinibreParams,
    n: usize,
}

impl StrongNonHermitianTarget {
    pub fn new(params: GinibreParams, n: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&params.omega) || !(params.gamma >= 0.0) {
            return Err(Error::InvalidArgument("need omega in [0, 1) and gamma >= 0".into()));
        }
        Ok(Self { params, n })
    }

    fn anisotropic(&self, z: Point2) -> f64 {
        // |z|² − (ω/2)(z² + z̄²) with z² + z̄² = 2(Re z)² − 2(Im z)².
        let a = self.n as f64 / (1.0 - self.params.omega * self.params.omega);
        a * (z[0] * z[0] + z[1] * z[1] - self.params.omega * (z[0] * z[0] - z[1] * z[1]))
    }

    fn collective(&self, sum_sq: f64) -> f64 {
        let d = sum_sq - self.n as f64 * self.params.k_p;
        self.params.gamma * d * d
    }
}

impl LogTarget for StrongNonHermitianTarget {
    fn dimension(&self) -> Dimension {
        Dimension::TwoD
    }

    fn n(&self) -> usize {
        self.n
    }

    fn log_density(&self, coords: &[f64]) -> f64 {
        let pts: Vec<Point2> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let sum_sq: f64 = pts.iter().map(|z| z[0] * z[0] + z[1] * z[1]).sum();
        let v = pair_log_sq_sum_2d(&pts) - pts.iter().map(|&z| self.anisotropic(z)).sum::<f64>() - self.collective(sum_sq);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn site_delta(&self, coords: &[f64], i: usize, proposal: &[f64]) -> f64 {
        let old = [coords[2 * i], coords[2 * i + 1]];
        let new = [proposal[0], proposal[1]];
        let sum_sq: f64 = coords.chunks_exact(2).map(|c| c[0] * c[0] + c[1] * c[1]).sum();
        let sum_new = sum_sq - (old[0] * old[0] + old[1] * old[1]) + new[0] * new[0] + new[1] * new[1];
        let d = log_sq_distance_ratio_2d(coords, i, old, new) - (self.anisotropic(new) - self.anisotropic(old))
            - (self.collective(sum_new) - self.collective(sum_sq));
        if d.is_nan() {
            f64::NEG_INFINITY
        } else {
            d
        }
    }

    fn initial(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        uniform_disk(self.n, 1.0, [0.0, 0.0], rng)
    }
}

/// Target matching the spec: 1D log-gas, plain Ginibre, or the
/// strong-non-Hermiticity model when Ginibre parameters are present.
pub fn target_for_spec(spec: &ModelSpec) -> Result<Box<dyn LogTarget>> {
    match (spec.dimension, &spec.ginibre) {
        (Dimension::OneD, _) => Ok(Box::new(LogGasTarget::new(spec)?)),
        (Dimension::TwoD, None) => Ok(Box::new(GinibreTarget::new(spec.n_particles))),
        (Dimension::TwoD, Some(p)) => Ok(Box::new(StrongNonHermitianTarget::new(*p, spec.n_particles)?)),
    }
}

pub fn log_density_log_gas(spec: &ModelSpec, state: &LabeledState) -> Result<f64> {
    let pts = state.require_1d()?;
    let target = LogGasTarget::new(spec)?;
    Ok(target.log_density(pts))
}

pub fn log_density_ginibre(state: &LabeledState, n: usize) -> Result<f64> {
    let pts = state.require_2d()?;
    check_len(pts.len(), n)?;
    Ok(GinibreTarget::new(n).log_density(&flatten(pts)))
}

pub fn log_density_strong_nonhermitian(state: &LabeledState, params: &GinibreParams, n: usize) -> Result<f64> {
    let pts = state.require_2d()?;
    check_len(pts.len(), n)?;
    Ok(StrongNonHermitianTarget::new(*params, n)?.log_density(&flatten(pts)))
}

fn check_len(got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::InvalidArgument(format!("state has {got} points, expected {n}")));
    }
    Ok(())
}

fn flatten(pts: &[Point2]) -> Vec<f64> {
    pts.iter().flat_map(|z| z.iter().copied()).collect()
}

const MAX_INIT_ATTEMPTS: usize = 20;
const ADAPT_WINDOW: usize = 20;
const TARGET_ACCEPTANCE: f64 = 0.3;

/// Runs one Metropolis chain. States are recorded every `thinning` sweeps
/// after burn-in; the proposal scale is frozen after burn-in so the recorded
/// part of the chain is reversible with respect to `exp(log_density)`.
pub fn mcmc_sample(target: &dyn LogTarget, settings: &McmcSettings, ctx: &RunContext) -> Result<McmcRun> {
    settings.check()?;
    let mut rng = ctx.rng();
    let dim = match target.dimension() {
        Dimension::OneD => 1,
        Dimension::TwoD => 2,
    };
    let n = target.n();

    let mut coords = Vec::new();
    let mut ok = false;
    for _ in 0..MAX_INIT_ATTEMPTS {
        coords = target.initial(&mut rng);
        if target.log_density(&coords).is_finite() {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::NonFiniteInit(MAX_INIT_ATTEMPTS));
    }

    let mut scale = settings.proposal_scale;
    let mut samples = Vec::with_capacity(settings.n_samples());
    let mut window_accepts = 0usize;
    let mut post_accepts = 0usize;
    let mut post_moves = 0usize;
    let mut proposal = [0.0; 2];

    for sweep in 0..settings.n_sweeps {
        let mut accepts = 0usize;
        for i in 0..n {
            for d in 0..dim {
                proposal[d] = coords[dim * i + d] + scale * rng.sample::<f64, _>(StandardNormal);
            }
            let delta = target.site_delta(&coords, i, &proposal[..dim]);
            let log_alpha = log_acceptance(0.0, delta);
            if log_alpha == 0.0 || rng.random::<f64>().ln() < log_alpha {
                coords[dim * i..dim * i + dim].copy_from_slice(&proposal[..dim]);
                accepts += 1;
            }
        }
        if sweep < settings.burn_in {
            if settings.adapt {
                window_accepts += accepts;
                if (sweep + 1) % ADAPT_WINDOW == 0 {
                    let rate = window_accepts as f64 / (ADAPT_WINDOW * n.max(1)) as f64;
                    scale *= (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
                    window_accepts = 0;
                }
            }
        } else {
            post_accepts += accepts;
            post_moves += n;
            if (sweep - settings.burn_in + 1).is_multiple_of(settings.thinning) {
                samples.push(target.to_state(&coords)?);
            }
        }
    }

    Ok(McmcRun {
        samples,
        acceptance_rate: if post_moves > 0 { post_accepts as f64 / post_moves as f64 } else { 0.0 },
        proposal_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Window;
    use crate::potentials::PolynomialPotential;
    use crate::samplers::tridiagonal_gaussian_beta_sample;
    use proptest::prelude::*;

    fn free_gas(n: usize) -> ModelSpec {
        ModelSpec {
            potential: PolynomialPotential::zero(),
            ..ModelSpec::gaussian_raw(n, 2.0)
        }
    }

    #[test]
    fn log_gas_examples() {
        let spec = free_gas(2);
        let v = log_density_log_gas(&spec, &LabeledState::one_d(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(v, 0.0);
        let v = log_density_log_gas(&spec, &LabeledState::one_d(vec![0.0, 2.0]).unwrap()).unwrap();
        assert!((v - 1.386_294_361_119_890_6).abs() < 1e-12);
        let target = LogGasTarget::new(&spec).unwrap();
        assert_eq!(target.log_density(&[0.0, 0.0]), f64::NEG_INFINITY);
        let planar = LabeledState::sorted_by_modulus_2d(vec![[0.0, 0.0]]);
        assert!(log_density_log_gas(&spec, &planar).is_err());
    }

    #[test]
    fn ginibre_examples() {
        let origin = LabeledState::sorted_by_modulus_2d(vec![[0.0, 0.0]]);
        assert_eq!(log_density_ginibre(&origin, 1).unwrap(), 0.0);
        let unit = LabeledState::sorted_by_modulus_2d(vec![[1.0, 0.0]]);
        assert_eq!(log_density_ginibre(&unit, 1).unwrap(), -1.0);
        let pair = LabeledState::sorted_by_modulus_2d(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(log_density_ginibre(&pair, 2).unwrap(), -1.0);
        assert!(log_density_ginibre(&pair, 3).is_err());
    }

    #[test]
    fn strong_nonhermitian_examples() {
        let origin = LabeledState::sorted_by_modulus_2d(vec![[0.0, 0.0]]);
        let p = GinibreParams::default();
        assert_eq!(log_density_strong_nonhermitian(&origin, &p, 1).unwrap(), 0.0);
        let unit = LabeledState::sorted_by_modulus_2d(vec![[1.0, 0.0]]);
        assert_eq!(log_density_strong_nonhermitian(&unit, &p, 1).unwrap(), -1.0);
        let half = GinibreParams { omega: 0.5, ..p };
        // (N/(1−ω²))(|z|² − ω(Re z)² + ω(Im z)²) = (4/3)(1/2)
        assert!((log_density_strong_nonhermitian(&unit, &half, 1).unwrap() + 2.0 / 3.0).abs() < 1e-15);
        let bad = GinibreParams { omega: 1.0, ..p };
        assert!(log_density_strong_nonhermitian(&unit, &bad, 1).is_err());
    }

    #[test]
    fn site_delta_matches_full_difference() {
        let ctx = RunContext::fixed(4);
        let mut rng = ctx.rng();
        let spec = ModelSpec::gaussian_bulk(7, 2.0, 0.4, Window::Infinite);
        let params = GinibreParams {
            gamma: 0.7,
            omega: 0.3,
            k_p: 1.1,
            ..Default::default()
        };
        let targets: Vec<Box<dyn LogTarget>> = vec![
            Box::new(LogGasTarget::new(&spec).unwrap()),
            Box::new(GinibreTarget::new(7)),
            Box::new(StrongNonHermitianTarget::new(params, 7).unwrap()),
        ];
        for t in &targets {
            let coords = t.initial(&mut rng);
            let dim = coords.len() / t.n();
            for i in 0..t.n() {
                let prop: Vec<f64> = (0..dim).map(|d| coords[dim * i + d] + 0.37).collect();
                let mut moved = coords.clone();
                moved[dim * i..dim * i + dim].copy_from_slice(&prop);
                let want = t.log_density(&moved) - t.log_density(&coords);
                let got = t.site_delta(&coords, i, &prop);
                assert!((want - got).abs() < 1e-9 * (1.0 + want.abs()), "{want} vs {got}");
            }
        }
    }

    #[test]
    fn tiny_proposals_are_almost_always_accepted() {
        let spec = ModelSpec::gaussian_raw(5, 2.0);
        let target = LogGasTarget::new(&spec).unwrap();
        let settings = McmcSettings {
            n_sweeps: 200,
            burn_in: 10,
            proposal_scale: 1e-9,
            thinning: 10,
            adapt: false,
        };
        let run = mcmc_sample(&target, &settings, &RunContext::fixed(1)).unwrap();
        assert!(run.acceptance_rate > 0.999);
        assert_eq!(run.samples.len(), settings.n_samples());
    }

    #[test]
    fn settings_validation() {
        let bad = McmcSettings {
            n_sweeps: 10,
            burn_in: 10,
            proposal_scale: 0.1,
            thinning: 1,
            adapt: true,
        };
        assert!(bad.check().is_err());
        assert!(McmcSettings { burn_in: 0, ..bad }.check().is_err());
    }

    #[test]
    fn symmetric_two_particle_gas_has_centered_sum() {
        let spec = ModelSpec::gaussian_raw(2, 2.0);
        let target = LogGasTarget::new(&spec).unwrap();
        let settings = McmcSettings {
            n_sweeps: 20_000,
            burn_in: 500,
            proposal_scale: 0.5,
            thinning: 5,
            adapt: true,
        };
        // Independent chains give independent chain means.
        let means: Vec<f64> = (0..40)
            .map(|k| {
                let run = mcmc_sample(&target, &settings, &RunContext::fixed(17).replica(k)).unwrap();
                run.samples.iter().map(|s| s.as_1d().unwrap().iter().sum::<f64>()).sum::<f64>()
                    / run.samples.len() as f64
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let sd = (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
        assert!(m.abs() <= 3.0 * sd / (means.len() as f64).sqrt());
    }

    #[test]
    fn gaussian_second_moment_matches_semicircle() {
        // Quadrature oracle: ∫ x² (1/π)√(2 − x²) dx = 1/2.
        let m = 20_000;
        let h = 2.0 * 2f64.sqrt() / m as f64;
        let oracle: f64 = (0..m)
            .map(|k| {
                let x = -2f64.sqrt() + (k as f64 + 0.5) * h;
                x * x * (2.0 - x * x).sqrt() / PI * h
            })
            .sum();
        assert!((oracle - 0.5).abs() < 1e-6);

        let spec = ModelSpec::gaussian_raw(50, 2.0);
        let target = LogGasTarget::new(&spec).unwrap();
        let settings = McmcSettings {
            n_sweeps: 3000,
            burn_in: 500,
            proposal_scale: 0.05,
            thinning: 25,
            adapt: true,
        };
        let run = mcmc_sample(&target, &settings, &RunContext::fixed(23)).unwrap();
        let second: f64 = run
            .samples
            .iter()
            .map(|s| s.as_1d().unwrap().iter().map(|x| x * x).sum::<f64>() / 50.0)
            .sum::<f64>()
            / run.samples.len() as f64;
        // Finite-N exact value is 1/2 as well for the Gaussian ensemble.
        assert!((second - oracle).abs() < 0.02, "{second}");
        assert!((run.acceptance_rate - 0.3).abs() < 0.1, "{}", run.acceptance_rate);

        // And it agrees with the tridiagonal sampler.
        let tri: f64 = (0..100)
            .map(|k| {
                let s = tridiagonal_gaussian_beta_sample(50, 2.0, &RunContext::fixed(5).replica(k)).unwrap();
                s.as_1d().unwrap().iter().map(|x| x * x).sum::<f64>() / 50.0
            })
            .sum::<f64>()
            / 100.0;
        assert!((second - tri).abs() < 0.02);
    }

    #[test]
    fn chain_is_deterministic() {
        let spec = ModelSpec::ginibre(8, Window::Infinite);
        let target = target_for_spec(&spec).unwrap();
        let settings = McmcSettings {
            n_sweeps: 50,
            burn_in: 10,
            proposal_scale: 0.3,
            thinning: 10,
            adapt: true,
        };
        let a = mcmc_sample(target.as_ref(), &settings, &RunContext::fixed(3).replica(2)).unwrap();
        let b = mcmc_sample(target.as_ref(), &settings, &RunContext::fixed(3).replica(2)).unwrap();
        assert_eq!(a.samples, b.samples);
        for s in &a.samples {
            assert!(s.check().is_ok());
        }
    }

    proptest! {
        #[test]
        fn detailed_balance_in_log_space(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            // ρ(s)α(s→s′) and ρ(s′)α(s′→s) coincide exactly.
            prop_assert_eq!(log_flow(a, b).to_bits(), log_flow(b, a).to_bits());
            let lhs = a + log_acceptance(a, b);
            let rhs = b + log_acceptance(b, a);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())));
            prop_assert!(log_acceptance(a, b) <= 0.0);
            prop_assert_eq!(log_acceptance(a, f64::NEG_INFINITY), f64::NEG_INFINITY);
        }

        #[test]
        fn log_gas_density_is_permutation_invariant(
            pts in proptest::collection::vec(-3.0f64..3.0, 2..8),
            seed in 0u64..1000,
        ) {
            let spec = ModelSpec::gaussian_bulk(pts.len(), 2.0, 0.3, Window::Infinite);
            let target = LogGasTarget::new(&spec).unwrap();
            let base = target.log_density(&pts);
            let mut shuffled = pts.clone();
            let k = (seed as usize) % pts.len();
            shuffled.rotate_left(k);
            shuffled.swap(0, pts.len() - 1);
            let v = target.log_density(&shuffled);
            if base.is_finite() {
                prop_assert!((v - base).abs() <= 1e-10 * (1.0 + base.abs()));
            } else {
                prop_assert_eq!(v, base);
            }
        }
    }
}
