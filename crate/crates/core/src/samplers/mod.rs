//! Initial configurations: Metropolis sampling of the finite-N log-gas and
//! Ginibre-type densities, the tridiagonal Gaussian β-ensemble, bulk
//! rescaling and Poisson initializers.

mod mcmc;
pub mod tridiagonal;

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{Dimension, LabeledState, Points, RunContext, Window};

pub use mcmc::{
    log_acceptance, log_density_ginibre, log_density_log_gas, log_density_strong_nonhermitian,
    log_flow, mcmc_sample, target_for_spec, GinibreTarget, LogGasTarget, LogTarget, McmcRun,
    McmcSettings, StrongNonHermitianTarget,
};
pub use tridiagonal::{
    tridiagonal_gaussian_beta_sample, tridiagonal_gaussian_beta_window, SymTridiagonal,
};

/// `s = Nρ(x − θ)`, re-sorted.
pub fn bulk_rescale(state: &LabeledState, n: usize, rho_theta: f64, theta: f64) -> Result<LabeledState> {
    let scale = n as f64 * rho_theta;
    let pts = state.require_1d()?;
    LabeledState::sorted_1d(pts.iter().map(|&x| scale * (x - theta)).collect())
}

/// Inverse of [`bulk_rescale`]: `x = s/(Nρ) + θ`.
pub fn bulk_unscale(state: &LabeledState, n: usize, rho_theta: f64, theta: f64) -> Result<LabeledState> {
    let scale = n as f64 * rho_theta;
    let pts = state.require_1d()?;
    LabeledState::sorted_1d(pts.iter().map(|&s| s / scale + theta).collect())
}

/// Poisson point process of the given intensity, uniform in a finite window.
/// 1D output is in ascending order, 2D output in ascending modulus.
pub fn poisson_init(window: Window, intensity: f64, dimension: Dimension, ctx: &RunContext) -> Result<LabeledState> {
    let r = window
        .radius()
        .ok_or_else(|| Error::InvalidArgument("Poisson initializer needs a finite window".into()))?;
    if !(intensity >= 0.0) {
        return Err(Error::InvalidArgument("intensity must be nonnegative".into()));
    }
    let measure = match dimension {
        Dimension::OneD => 2.0 * r,
        Dimension::TwoD => PI * r * r,
    };
    let mean = intensity * measure;
    let mut rng = ctx.rng();
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    match dimension {
        Dimension::OneD => {
            let pts: Vec<f64> = (0..count).map(|_| rng.random_range(-r..r)).collect();
            LabeledState::sorted_1d(pts)
        }
        Dimension::TwoD => {
            let pts = (0..count)
                .map(|_| {
                    let rad = r * rng.random::<f64>().sqrt();
                    let phi = 2.0 * PI * rng.random::<f64>();
                    [rad * phi.cos(), rad * phi.sin()]
                })
                .collect();
            Ok(LabeledState::sorted_by_modulus_2d(pts))
        }
    }
}

/// Rows `replica_id,point_index,x[,y]`; `replica_id` is the index of the
/// configuration in `samples`.
pub fn write_samples_csv<W: Write>(samples: &[LabeledState], mut out: W) -> Result<()> {
    let two_d = samples.first().map(|s| s.dimension() == Dimension::TwoD).unwrap_or(false);
    if two_d {
        writeln!(out, "replica_id,point_index,coord_1,coord_2")?;
    } else {
        writeln!(out, "replica_id,point_index,coord_1")?;
    }
    for (rep, s) in samples.iter().enumerate() {
        match s.points() {
            Points::OneD(p) => {
                for (i, x) in p.iter().enumerate() {
                    writeln!(out, "{rep},{i},{x}")?;
                }
            }
            Points::TwoD(p) => {
                for (i, z) in p.iter().enumerate() {
                    writeln!(out, "{rep},{i},{},{}", z[0], z[1])?;
                }
            }
        }
    }
    Ok(())
}

/// Reads the CSV written by [`write_samples_csv`]. 1D configurations come back
/// in ascending order, 2D ones in ascending modulus.
pub fn read_samples_csv(text: &str) -> Result<Vec<LabeledState>> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or("");
    let two_d = header.split(',').count() == 4;
    let mut groups: Vec<(u64, Vec<[f64; 2]>)> = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse {
            line: idx + 1,
            msg: format!("malformed sample row `{line}`"),
        };
        if fields.len() != if two_d { 4 } else { 3 } {
            return Err(bad());
        }
        let rep: u64 = fields[0].parse().map_err(|_| bad())?;
        let x: f64 = fields[2].parse().map_err(|_| bad())?;
        let y: f64 = if two_d { fields[3].parse().map_err(|_| bad())? } else { 0.0 };
        match groups.last_mut() {
            Some((r, pts)) if *r == rep => pts.push([x, y]),
            _ => groups.push((rep, vec![[x, y]])),
        }
    }
    groups
        .into_iter()
        .map(|(_, pts)| {
            if two_d {
                Ok(LabeledState::sorted_by_modulus_2d(pts))
            } else {
                LabeledState::sorted_1d(pts.into_iter().map(|p| p[0]).collect())
            }
        })
        .collect()
}
