//! Empirical statistics and the analytic reference laws they are compared to.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{modulus, Dimension, LabelOrder, LabeledState, Point2, Points};

/// Binned estimate of a k-point correlation function.
///
/// For `k = 1` in 1D the cells are the bins; for `k > 1` in 1D the cells are
/// the k-fold product of the bins, flattened row-major. Gap estimates from
/// [`estimate_rho2_gap`] have one cell per gap bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub k: usize,
    pub bin_edges: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
}

impl CorrelationEstimate {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `bin_center,value,count` rows (1D cells only).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_center,value,count")?;
        if self.values.len() != self.bin_edges.len() - 1 {
            // Product cells: emit the flat index instead of a center.
            for (idx, (v, c)) in self.values.iter().zip(&self.counts).enumerate() {
                writeln!(out, "{idx},{v},{c}")?;
            }
            return Ok(());
        }
        for ((center, v), c) in self.bin_centers().iter().zip(&self.values).zip(&self.counts) {
            writeln!(out, "{center},{v},{c}")?;
        }
        Ok(())
    }
}

/// `n` equal bins on `[lo, hi]`.
pub fn uniform_bins(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

fn check_bins(bins: &[f64]) -> Result<()> {
    if bins.len() < 2 || bins.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "bin edges must be strictly increasing with at least one bin".into(),
        ));
    }
    Ok(())
}

/// Index of the half-open bin `[e_i, e_{i+1})` containing `x`.
pub(crate) fn bin_index(bins: &[f64], x: f64) -> Option<usize> {
    let n = bins.len() - 1;
    if !(x >= bins[0]) || !(x < bins[n]) {
        return None;
    }
    // Largest i with bins[i] <= x.
    let idx = bins.partition_point(|&e| e <= x) - 1;
    Some(idx.min(n - 1))
}

/// Histogram estimator of `ρ^k`: ordered k-tuples of distinct points per
/// cell, divided by the sample count and cell volume.
///
/// 1D supports any `k`; cells are products of `bins`. 2D supports `k = 1`
/// with `bins` read as radii of concentric annuli.
pub fn estimate_rho_k(
    samples: &[LabeledState],
    k: usize,
    bins: &[f64],
) -> Result<CorrelationEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    check_bins(bins)?;
    let nbins = bins.len() - 1;
    let dimension = samples[0].dimension();

    match dimension {
        Dimension::OneD => {
            let cells = nbins
                .checked_pow(k as u32)
                .filter(|c| *c <= 50_000_000)
                .ok_or_else(|| Error::InvalidArgument("too many product cells".into()))?;
            let mut counts = vec![0u64; cells];
            for s in samples {
                let pts = s.require_1d()?;
                let located: Vec<usize> = pts.iter().filter_map(|&x| bin_index(bins, x)).collect();
                count_tuples(&located, k, &mut Vec::with_capacity(k), &mut vec![false; located.len()], nbins, &mut counts);
            }
            let widths: Vec<f64> = bins.windows(2).map(|w| w[1] - w[0]).collect();
            let values = counts
                .iter()
                .enumerate()
                .map(|(cell, &c)| {
                    let mut volume = 1.0;
                    let mut rest = cell;
                    for _ in 0..k {
                        volume *= widths[rest % nbins];
                        rest /= nbins;
                    }
                    c as f64 / (samples.len() as f64 * volume)
                })
                .collect();
            Ok(CorrelationEstimate {
                k,
                bin_edges: bins.to_vec(),
                values,
                counts,
                n_samples: samples.len(),
            })
        }
        Dimension::TwoD => {
            if k != 1 {
                return Err(Error::InvalidArgument(
                    "2D histogram estimates support k = 1 only; use estimate_rho2_gap".into(),
                ));
            }
            if bins[0] < 0.0 {
                return Err(Error::InvalidArgument("radial bins must be nonnegative".into()));
            }
            let mut counts = vec![0u64; nbins];
            for s in samples {
                for &z in s.require_2d()? {
                    if let Some(b) = bin_index(bins, modulus(z)) {
                        counts[b] += 1;
                    }
                }
            }
            let values = counts
                .iter()
                .zip(bins.windows(2))
                .map(|(&c, w)| c as f64 / (samples.len() as f64 * PI * (w[1] * w[1] - w[0] * w[0])))
                .collect();
            Ok(CorrelationEstimate {
                k,
                bin_edges: bins.to_vec(),
                values,
                counts,
                n_samples: samples.len(),
            })
        }
    }
}

fn count_tuples(
    located: &[usize],
    k: usize,
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    nbins: usize,
    counts: &mut [u64],
) {
    if prefix.len() == k {
        let cell = prefix.iter().rev().fold(0usize, |acc, &b| acc * nbins + b);
        counts[cell] += 1;
        return;
    }
    for idx in 0..located.len() {
        if used[idx] {
            continue;
        }
        used[idx] = true;
        prefix.push(located[idx]);
        count_tuples(located, k, prefix, used, nbins, counts);
        prefix.pop();
        used[idx] = false;
    }
}

/// Translation-averaged estimate of `ρ²(0, s)` as a function of the gap `s`.
///
/// Reference points are those within distance `window_halfwidth` of the
/// origin; every other point of the same configuration contributes its
/// distance to the reference. The count in gap bin `[s0, s1)` is divided by
/// the sample count, the reference-window measure and the gap-cell measure
/// (`2(s1 − s0)` in 1D, `π(s1² − s0²)` in 2D).
pub fn estimate_rho2_gap(
    samples: &[LabeledState],
    gap_bins: &[f64],
    window_halfwidth: f64,
) -> Result<CorrelationEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    check_bins(gap_bins)?;
    if gap_bins[0] < 0.0 {
        return Err(Error::InvalidArgument("gap bins must be nonnegative".into()));
    }
    let nbins = gap_bins.len() - 1;
    let s_max = gap_bins[nbins];
    let mut counts = vec![0u64; nbins];
    let dimension = samples[0].dimension();
    for s in samples {
        match s.points() {
            Points::OneD(p) => {
                let mut sorted = p.clone();
                sorted.sort_by(f64::total_cmp);
                for (i, &x) in sorted.iter().enumerate() {
                    if x.abs() > window_halfwidth {
                        continue;
                    }
                    for &y in sorted[i + 1..].iter() {
                        let d = y - x;
                        if d >= s_max {
                            break;
                        }
                        if let Some(b) = bin_index(gap_bins, d) {
                            counts[b] += 1;
                        }
                    }
                    for &y in sorted[..i].iter().rev() {
                        let d = x - y;
                        if d >= s_max {
                            break;
                        }
                        if let Some(b) = bin_index(gap_bins, d) {
                            counts[b] += 1;
                        }
                    }
                }
            }
            Points::TwoD(p) => {
                for (i, &z) in p.iter().enumerate() {
                    if modulus(z) > window_halfwidth {
                        continue;
                    }
                    for (j, &w) in p.iter().enumerate() {
                        if i == j {
                            continue;
                        }
                        let d = (z[0] - w[0]).hypot(z[1] - w[1]);
                        if let Some(b) = bin_index(gap_bins, d) {
                            counts[b] += 1;
                        }
                    }
                }
            }
        }
    }
    let window_measure = match dimension {
        Dimension::OneD => 2.0 * window_halfwidth,
        Dimension::TwoD => PI * window_halfwidth * window_halfwidth,
    };
    let values = counts
        .iter()
        .zip(gap_bins.windows(2))
        .map(|(&c, w)| {
            let cell = match dimension {
                Dimension::OneD => 2.0 * (w[1] - w[0]),
                Dimension::TwoD => PI * (w[1] * w[1] - w[0] * w[0]),
            };
            c as f64 / (samples.len() as f64 * window_measure * cell)
        })
        .collect();
    Ok(CorrelationEstimate {
        k: 2,
        bin_edges: gap_bins.to_vec(),
        values,
        counts,
        n_samples: samples.len(),
    })
}

/// Mean number of points per unit measure within distance `halfwidth` of
/// the origin.
pub fn mean_density(samples: &[LabeledState], halfwidth: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    let dimension = samples[0].dimension();
    let count: usize = samples
        .iter()
        .map(|s| s.moduli().into_iter().filter(|&m| m <= halfwidth).count())
        .sum();
    let measure = match dimension {
        Dimension::OneD => 2.0 * halfwidth,
        Dimension::TwoD => PI * halfwidth * halfwidth,
    };
    Ok(count as f64 / (samples.len() as f64 * measure))
}

// ---------------------------------------------------------------------------
// Reference kernels.

pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = PI * (x - y);
    if d.abs() < 1e-8 {
        1.0 - d * d / 6.0
    } else {
        d.sin() / d
    }
}

/// `det[K_sin(x_i, x_j)]`.
pub fn sine_rho_k(points: &[f64]) -> f64 {
    let m = points.len();
    let matrix: Vec<f64> = (0..m * m)
        .map(|idx| sine_kernel(points[idx / m], points[idx % m]))
        .collect();
    det_real(&matrix, m)
}

/// `1 − (sin πs / πs)²`.
pub fn sine_rho2(s: f64) -> f64 {
    let k = sine_kernel(0.0, s);
    1.0 - k * k
}

/// Determinant of a row-major `m × m` matrix: cofactor expansion up to
/// `m = 3`, partial-pivoting LU beyond.
pub fn det_real(matrix: &[f64], m: usize) -> f64 {
    assert_eq!(matrix.len(), m * m);
    let a = |i: usize, j: usize| matrix[i * m + j];
    match m {
        0 => 1.0,
        1 => a(0, 0),
        2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
        3 => {
            a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
        }
        _ => {
            let mut lu = matrix.to_vec();
            let mut det = 1.0;
            for col in 0..m {
                let pivot = (col..m)
                    .max_by(|&i, &j| lu[i * m + col].abs().total_cmp(&lu[j * m + col].abs()))
                    .unwrap();
                if lu[pivot * m + col] == 0.0 {
                    return 0.0;
                }
                if pivot != col {
                    for j in 0..m {
                        lu.swap(pivot * m + j, col * m + j);
                    }
                    det = -det;
                }
                let p = lu[col * m + col];
                det *= p;
                for i in col + 1..m {
                    let f = lu[i * m + col] / p;
                    for j in col..m {
                        lu[i * m + j] -= f * lu[col * m + j];
                    }
                }
            }
            det
        }
    }
}

fn det_complex(matrix: &[Complex64], m: usize) -> Complex64 {
    let mut lu = matrix.to_vec();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| lu[i * m + col].norm().total_cmp(&lu[j * m + col].norm()))
            .unwrap();
        if lu[pivot * m + col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..m {
                lu.swap(pivot * m + j, col * m + j);
            }
            det = -det;
        }
        let p = lu[col * m + col];
        det *= p;
        for i in col + 1..m {
            let f = lu[i * m + col] / p;
            for j in col..m {
                let sub = f * lu[col * m + j];
                lu[i * m + j] -= sub;
            }
        }
    }
    det
}

/// `K(x, y) = (1/π) exp(−(|x|² + |y|²)/2 + x ȳ)` as `[re, im]`.
pub fn ginibre_kernel(x: Point2, y: Point2) -> Point2 {
    let k = ginibre_kernel_c(x, y);
    [k.re, k.im]
}

fn ginibre_kernel_c(x: Point2, y: Point2) -> Complex64 {
    let zx = Complex64::new(x[0], x[1]);
    let zy = Complex64::new(y[0], y[1]);
    let exponent = -(zx.norm_sqr() + zy.norm_sqr()) / 2.0 + zx * zy.conj();
    exponent.exp() / PI
}

/// `det[K_gin(x_i, x_j)]`; errors if the determinant is not real to 1e-10.
pub fn ginibre_rho_k(points: &[Point2]) -> Result<f64> {
    let m = points.len();
    let matrix: Vec<Complex64> = (0..m * m)
        .map(|idx| ginibre_kernel_c(points[idx / m], points[idx % m]))
        .collect();
    let det = det_complex(&matrix, m);
    if det.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "kernel determinant has imaginary part {}",
            det.im
        )));
    }
    Ok(det.re)
}

/// `ρ²(0, z) / ρ¹(0)ρ¹(z) = 1 − exp(−|z|²)`.
pub fn ginibre_rho2_ratio(s: f64) -> f64 {
    -(-s * s).exp_m1()
}

// ---------------------------------------------------------------------------
// Reference laws.

/// CDF of the semicircle density `(1/π)√(2 − x²)` on `[−√2, √2]`.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -SQRT_2 {
        return 0.0;
    }
    if x >= SQRT_2 {
        return 1.0;
    }
    let v = 0.5 + x * (2.0 - x * x).sqrt() / (2.0 * PI) + (x / SQRT_2).asin() / PI;
    v.clamp(0.0, 1.0)
}

/// Gaussian upper tail `ℛ(t) = ∫_t^∞ (2π)^{-1/2} e^{−x²/2} dx`.
pub fn scaled_erfc_r(t: f64) -> f64 {
    0.5 * libm::erfc(t / SQRT_2)
}

/// `P(max_{[0,T]} B ≤ a) = 1 − 2ℛ(a/√T)` for `a ≥ 0`, zero below.
pub fn reflected_bm_max_cdf(a: f64, t: f64) -> f64 {
    assert!(t > 0.0, "horizon must be positive");
    if a <= 0.0 {
        return 0.0;
    }
    1.0 - 2.0 * scaled_erfc_r(a / t.sqrt())
}

/// Mean over configurations of `Σ_{i ≥ l} ℛ((|s_i| − r)/T)` with 1-based
/// labels in ascending modulus.
pub fn tightness_diagnostic(samples: &[LabeledState], l: usize, r: f64, t: f64) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in samples {
        if s.order() != LabelOrder::AscendingModulus {
            return Err(Error::InvalidArgument(
                "tightness diagnostic needs ascending-modulus labels".into(),
            ));
        }
        let m = s.moduli();
        let start = l.max(1) - 1;
        if start < m.len() {
            total += m[start..].iter().map(|&d| scaled_erfc_r((d - r) / t)).sum::<f64>();
        }
    }
    Ok(total / samples.len() as f64)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// `cdf`, evaluated exactly at the order statistics.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("KS samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(d)
}

/// Mean of `f` over `[lo, hi]` by composite Simpson with `2m` panels.
pub fn bin_average<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, m: usize) -> f64 {
    let n = 2 * m.max(1);
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0 / (hi - lo)
}
