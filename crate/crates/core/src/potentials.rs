//! Polynomial confining potentials, the β-adjusted potential and the drift
//! terms they induce in the bulk-scaled particle dynamics.
//!
//! Conventions: a scaled coordinate `s` maps to the macroscopic frame through
//! `x = s / (N ρ(θ)) + θ`, and the potential part of the drift of particle `s`
//! is `-(1/2) (1/ρ(θ)) V_β'(x)`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Real polynomial `V(t) = Σ v_n tⁿ` of even degree with positive leading
/// coefficient. The zero polynomial is accepted as the free (no confinement)
/// case.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    coefficients: Vec<f64>,
}

impl PolynomialPotential {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec(
                "potential coefficients must be finite".into(),
            ));
        }
        let mut coefficients = coefficients;
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if let Some(&lead) = coefficients.last() {
            let degree = coefficients.len() - 1;
            if !degree.is_multiple_of(2) {
                return Err(Error::InvalidSpec(format!(
                    "potential degree {degree} is odd"
                )));
            }
            if lead <= 0.0 {
                return Err(Error::InvalidSpec(
                    "potential leading coefficient must be positive".into(),
                ));
            }
        }
        Ok(Self { coefficients })
    }

    pub fn zero() -> Self {
        Self {
            coefficients: Vec::new(),
        }
    }

    /// `V(x) = x²`, the Gaussian case.
    pub fn quadratic() -> Self {
        Self {
            coefficients: vec![0.0, 0.0, 1.0],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_quadratic(&self) -> bool {
        self.coefficients == [0.0, 0.0, 1.0]
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn derivative(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| n as f64 * c)
            .collect()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }
}

pub(crate) fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_v(potential: &PolynomialPotential, x: f64) -> f64 {
    horner(&potential.coefficients, x)
}

pub fn eval_v_prime(potential: &PolynomialPotential, x: f64) -> f64 {
    let coefficients = &potential.coefficients;
    let mut acc = 0.0;
    for n in (1..coefficients.len()).rev() {
        acc = acc * x + n as f64 * coefficients[n];
    }
    acc
}

/// Multiplier `k` with `V_β = k V`: 1 for β ∈ {1, 2}, 2 for β = 4.
pub fn beta_multiplier(beta: f64) -> Result<f64> {
    if beta == 1.0 || beta == 2.0 {
        Ok(1.0)
    } else if beta == 4.0 {
        Ok(2.0)
    } else {
        Err(Error::UnsupportedBeta(beta))
    }
}

/// Same as [`beta_multiplier`] but extended to arbitrary positive β (used by
/// the Metropolis sampler) with `V_β = V` off the classical values.
pub fn beta_multiplier_extended(beta: f64) -> f64 {
    beta_multiplier(beta).unwrap_or(1.0)
}

pub fn v_beta(potential: &PolynomialPotential, beta: f64) -> Result<PolynomialPotential> {
    Ok(potential.scaled(beta_multiplier(beta)?))
}

/// Semicircle density `(1/π)√(2 − θ²)` on `|θ| < √2`, zero outside.
pub fn semicircle_density(theta: f64) -> f64 {
    if theta.abs() < SQRT_2 {
        (2.0 - theta * theta).sqrt() / PI
    } else {
        0.0
    }
}

/// Equilibrium density at the scaling point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquilibriumDensity {
    SemicircleQuadratic,
    UserSupplied(f64),
}

impl EquilibriumDensity {
    pub fn value_at(&self, theta: f64) -> f64 {
        match *self {
            EquilibriumDensity::SemicircleQuadratic => semicircle_density(theta),
            EquilibriumDensity::UserSupplied(value) => value,
        }
    }
}

/// `-(1/2)(1/ρ) V_β'(x/(Nρ) + θ)`.
pub fn scaled_potential_drift(
    potential: &PolynomialPotential,
    beta: f64,
    n: usize,
    theta: f64,
    rho_theta: f64,
    x: f64,
) -> Result<f64> {
    let k = beta_multiplier(beta)?;
    Ok(scaled_drift_with_multiplier(potential, k, n, theta, rho_theta, x))
}

pub(crate) fn scaled_drift_with_multiplier(
    potential: &PolynomialPotential,
    multiplier: f64,
    n: usize,
    theta: f64,
    rho_theta: f64,
    x: f64,
) -> f64 {
    let macroscopic = x / (n as f64 * rho_theta) + theta;
    -0.5 * multiplier * eval_v_prime(potential, macroscopic) / rho_theta
}

/// `c = (1/2) V'(θ) / ρ(θ)`.
pub fn drift_constant_c(potential: &PolynomialPotential, theta: f64, rho_theta: f64) -> f64 {
    0.5 * eval_v_prime(potential, theta) / rho_theta
}

/// `C(β)`: `c` for β ∈ {1, 2}, `2c` for β = 4.
pub fn drift_constant_for_beta(
    potential: &PolynomialPotential,
    theta: f64,
    rho_theta: f64,
    beta: f64,
) -> Result<f64> {
    Ok(beta_multiplier(beta)? * drift_constant_c(potential, theta, rho_theta))
}
