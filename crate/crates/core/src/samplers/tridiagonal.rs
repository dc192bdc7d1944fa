//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection, and the
//! tridiagonal model of the Gaussian β-ensembles.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{LabeledState, RunContext};

/// Absolute accuracy of bisected eigenvalues (unscaled matrix units).
pub const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off_sq: Vec<f64>,
    off_abs: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if !diag.is_empty() && off.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal with {} diagonal entries needs {} off-diagonal entries",
                diag.len(),
                diag.len() - 1
            )));
        }
        let off_sq = off.iter().map(|e| e * e).collect();
        let off_abs = off.iter().map(|e| e.abs()).collect();
        Ok(Self { diag, off_sq, off_abs })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x` (negative LDLᵀ pivots).
    pub fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            let coupling = if i == 0 { 0.0 } else { self.off_sq[i - 1] / q };
            q = d - x - coupling;
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + x.abs() + f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off_abs[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.off_abs[i] } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        (lo - pad, hi + pad)
    }

    /// `k`-th smallest eigenvalue (0-based), bracketed in `[lo, hi]`.
    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues in ascending order, each to absolute accuracy `tol`.
    pub fn eigenvalues(&self, tol: f64) -> Vec<f64> {
        if self.is_empty() {
            return Vec::new();
        }
        let (lo, hi) = self.gershgorin();
        self.eigenvalues_by_index(0, self.len(), lo, hi, tol)
    }

    /// Eigenvalues lying in `[a, b)`, ascending.
    pub fn eigenvalues_in(&self, a: f64, b: f64, tol: f64) -> Vec<f64> {
        if self.is_empty() || !(a < b) {
            return Vec::new();
        }
        let (glo, ghi) = self.gershgorin();
        let lo = a.max(glo);
        let hi = b.min(ghi);
        if !(lo < hi) {
            return Vec::new();
        }
        let first = self.sturm_count(lo);
        let last = self.sturm_count(hi);
        self.eigenvalues_by_index(first, last, lo, hi, tol)
    }

    fn eigenvalues_by_index(&self, first: usize, last: usize, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(last.saturating_sub(first));
        let mut floor = lo;
        for k in first..last {
            // Upper bracket: shrink from hi using the count at the previous estimate.
            let v = self.bisect(k, floor, hi, tol);
            out.push(v);
            floor = (v - tol).max(lo);
        }
        out
    }
}

/// Random tridiagonal matrix whose spectrum has joint density
/// `∝ Π|λ_i − λ_j|^β exp(−Σλ²/2)`: diagonal `N(0, 1)`, off-diagonal
/// `χ_{β(n−i)} / √2`.
pub fn gaussian_beta_tridiagonal<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<SymTridiagonal> {
    if !(beta > 0.0) {
        return Err(Error::UnsupportedBeta(beta));
    }
    let diag: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let dof = beta * (n - i) as f64;
        let chi2 = ChiSquared::new(dof).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        off.push((chi2.sample(rng) / 2.0).sqrt());
    }
    SymTridiagonal::new(diag, off)
}

/// Divisor mapping the raw tridiagonal spectrum onto `[−√2, √2]`.
pub fn spectrum_scale(n: usize, beta: f64) -> f64 {
    (beta * n as f64).sqrt()
}

/// Sorted eigenvalues of one tridiagonal Gaussian β-ensemble draw, scaled so
/// the limiting density is `(1/π)√(2 − x²)`.
pub fn tridiagonal_gaussian_beta_sample(n: usize, beta: f64, ctx: &RunContext) -> Result<LabeledState> {
    check_beta(beta)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut rng = ctx.rng();
    let t = gaussian_beta_tridiagonal(n, beta, &mut rng)?;
    let scale = spectrum_scale(n, beta);
    let eig: Vec<f64> = t.eigenvalues(EIGEN_TOLERANCE).into_iter().map(|l| l / scale).collect();
    LabeledState::sorted_1d(eig)
}

/// Like [`tridiagonal_gaussian_beta_sample`], keeping only the scaled
/// eigenvalues in `[a, b)`.
pub fn tridiagonal_gaussian_beta_window(n: usize, beta: f64, a: f64, b: f64, ctx: &RunContext) -> Result<LabeledState> {
    check_beta(beta)?;
    let mut rng = ctx.rng();
    let t = gaussian_beta_tridiagonal(n, beta, &mut rng)?;
    let scale = spectrum_scale(n, beta);
    let eig: Vec<f64> = t
        .eigenvalues_in(a * scale, b * scale, EIGEN_TOLERANCE)
        .into_iter()
        .map(|l| l / scale)
        .collect();
    LabeledState::sorted_1d(eig)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta == 1.0 || beta == 2.0 || beta == 4.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedBeta(beta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ks_statistic, semicircle_cdf};

    /// Dense Jacobi eigenvalue iteration, independent of Sturm counts.
    fn jacobi_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = diag[i];
            if i + 1 < n {
                a[i * n + i + 1] = off[i];
                a[(i + 1) * n + i] = off[i];
            }
        }
        for _ in 0..100 {
            let mut off_norm = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off_norm += a[p * n + q] * a[p * n + q];
                }
            }
            if off_norm < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn bisection_matches_jacobi() {
        let ctx = RunContext::fixed(11);
        let mut rng = ctx.rng();
        for &n in &[1usize, 2, 5, 17, 40] {
            let t = gaussian_beta_tridiagonal(n, 2.0, &mut rng).unwrap();
            let diag = t.diag.clone();
            let off: Vec<f64> = t.off_sq.iter().map(|v| v.sqrt()).collect();
            let want = jacobi_eigenvalues(&diag, &off);
            let got = t.eigenvalues(EIGEN_TOLERANCE);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "n={n}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn known_spectrum() {
        // Path-graph Laplacian-like matrix: eigenvalues 2 − 2cos(kπ/(n+1)).
        let n = 12;
        let t = SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap();
        let ev = t.eigenvalues(1e-12);
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-11);
        }
        let inner = t.eigenvalues_in(1.0, 3.0, 1e-12);
        assert_eq!(inner.len(), ev.iter().filter(|&&v| (1.0..3.0).contains(&v)).count());
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
    }

    #[test]
    fn single_point_has_zero_mean() {
        let ctx = RunContext::fixed(2);
        let draws: Vec<f64> = (0..4000)
            .map(|k| tridiagonal_gaussian_beta_sample(1, 2.0, &ctx.replica(k)).unwrap().as_1d().unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 3.0 * (var / draws.len() as f64).sqrt());
    }

    #[test]
    fn large_n_follows_semicircle() {
        let ctx = RunContext::fixed(8);
        let s = tridiagonal_gaussian_beta_sample(500, 2.0, &ctx).unwrap();
        let x = s.as_1d().unwrap();
        assert!(ks_statistic(x, semicircle_cdf).unwrap() <= 0.05);
        let m2 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((m2 - 0.5).abs() <= 0.02, "second moment {m2}");
    }

    #[test]
    fn window_restriction_matches_full_spectrum() {
        let ctx = RunContext::fixed(21);
        let full = tridiagonal_gaussian_beta_sample(300, 2.0, &ctx).unwrap();
        let part = tridiagonal_gaussian_beta_window(300, 2.0, -0.2, 0.3, &ctx).unwrap();
        let want: Vec<f64> = full.as_1d().unwrap().iter().copied().filter(|v| (-0.2..0.3).contains(v)).collect();
        assert_eq!(want.len(), part.len());
        for (a, b) in want.iter().zip(part.as_1d().unwrap()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_unsupported_beta() {
        assert!(matches!(
            tridiagonal_gaussian_beta_sample(5, 3.0, &RunContext::fixed(0)),
            Err(Error::UnsupportedBeta(_))
        ));
    }
}
