//! Drift fields of the windowed particle systems.
//!
//! Factor convention: the total drift of particle `i` is half the gradient of
//! the log-density, i.e. `(β/2) Σ_j 1/(x_i − x_j)` for the interaction and
//! `−(1/2) ∇(N V_β)` for the confinement. Particles outside a finite window
//! are replaced by their mean field (the tail compensation).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{Dimension, GinibreParams, LabeledState, ModelSpec, Point2, Scaling};
use crate::potentials::{beta_multiplier_extended, horner};

/// Pairs closer than this are reported as collisions.
pub const MIN_GAP: f64 = 1e-12;

/// Which neighbours enter the interaction sum of particle `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationMode {
    Full,
    /// Only `j` with `|x_i − x_j| < r`.
    RelativeDistance(f64),
    /// Only `j` with `|x_j| < r`.
    AbsolutePosition(f64),
}

impl TruncationMode {
    pub fn check(&self) -> Result<()> {
        match *self {
            TruncationMode::Full => Ok(()),
            TruncationMode::RelativeDistance(r) | TruncationMode::AbsolutePosition(r) => {
                if r > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("truncation radius {r} must be positive")))
                }
            }
        }
    }

    #[inline]
    fn admits(&self, distance: f64, neighbour_modulus: f64) -> bool {
        match *self {
            TruncationMode::Full => true,
            TruncationMode::RelativeDistance(r) => distance < r,
            TruncationMode::AbsolutePosition(r) => neighbour_modulus < r,
        }
    }
}

/// One-point function of the particles outside the window.
///
/// In 1D a tabulated model is a density over the line, linearly interpolated
/// between grid nodes and zero beyond the grid. In 2D it is a radial profile
/// indexed by `|y|`.
#[derive(Debug, Clone, PartialEq)]
pub enum OnePointModel {
    ConstantOutside(f64),
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl OnePointModel {
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let model = OnePointModel::Tabulated { grid, values };
        model.check()?;
        Ok(model)
    }

    /// Histogram of pooled 1D samples (counts per unit length per
    /// configuration), tabulated at bin centers.
    pub fn from_histogram(samples: &[LabeledState], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("samples"));
        }
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidArgument("histogram needs lo < hi and bins > 0".into()));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0.0; bins];
        for s in samples {
            for &x in s.require_1d()? {
                if x >= lo && x < hi {
                    counts[(((x - lo) / width) as usize).min(bins - 1)] += 1.0;
                }
            }
        }
        let norm = samples.len() as f64 * width;
        let grid = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
        Self::tabulated(grid, counts.into_iter().map(|c| c / norm).collect())
    }

    pub fn check(&self) -> Result<()> {
        match self {
            OnePointModel::ConstantOutside(c) => {
                if *c >= 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("outside density must be nonnegative".into()))
                }
            }
            OnePointModel::Tabulated { grid, values } => {
                if grid.len() != values.len() || grid.len() < 2 {
                    return Err(Error::InvalidArgument("table needs matching grid and values, length ≥ 2".into()));
                }
                if grid.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidArgument("table grid must increase".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidArgument("table values must be nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    /// Density at `y` (1D) or at radius `y` (2D).
    pub fn value_at(&self, y: f64) -> f64 {
        match self {
            OnePointModel::ConstantOutside(c) => *c,
            OnePointModel::Tabulated { grid, values } => {
                let n = grid.len();
                if y < grid[0] || y > grid[n - 1] {
                    return 0.0;
                }
                let k = grid.partition_point(|&g| g <= y).clamp(1, n - 1);
                let (x0, x1) = (grid[k - 1], grid[k]);
                let w = (y - x0) / (x1 - x0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }
}

fn check_index(i: usize, len: usize) -> Result<()> {
    if i >= len {
        return Err(Error::InvalidArgument(format!("particle index {i} out of range for {len} particles")));
    }
    Ok(())
}

/// `(β/2) Σ_{j≠i} 1/(x_i − x_j)` over the neighbours admitted by `mode`.
pub fn interaction_drift_1d(i: usize, state: &LabeledState, beta: f64, mode: TruncationMode) -> Result<f64> {
    let pts = state.require_1d()?;
    check_index(i, pts.len())?;
    mode.check()?;
    let xi = pts[i];
    let mut acc = 0.0;
    for (j, &xj) in pts.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = xi - xj;
        if d.abs() < MIN_GAP {
            return Err(Error::Collision { i, j, gap: d.abs() });
        }
        if mode.admits(d.abs(), xj.abs()) {
            acc += 1.0 / d;
        }
    }
    Ok(0.5 * beta * acc)
}

fn interaction_2d(i: usize, pts: &[Point2], mode: TruncationMode) -> Result<Point2> {
    let xi = pts[i];
    let mut acc = [0.0, 0.0];
    for (j, xj) in pts.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = [xi[0] - xj[0], xi[1] - xj[1]];
        let sq = d[0] * d[0] + d[1] * d[1];
        let dist = sq.sqrt();
        if dist < MIN_GAP {
            return Err(Error::Collision { i, j, gap: dist });
        }
        if mode.admits(dist, xj[0].hypot(xj[1])) {
            acc[0] += d[0] / sq;
            acc[1] += d[1] / sq;
        }
    }
    Ok(acc)
}

/// `Σ_{j≠i} (x_i − x_j)/|x_i − x_j|²` over the neighbours admitted by `mode`.
pub fn interaction_drift_2d(i: usize, state: &LabeledState, mode: TruncationMode) -> Result<Point2> {
    let pts = state.require_2d()?;
    check_index(i, pts.len())?;
    mode.check()?;
    interaction_2d(i, pts, mode)
}

/// Drift of the truncated infinite-dimensional Ginibre equations:
/// `−x_i + Σ_{|x_j|<r}` for `AbsolutePosition(r)` and `Σ_{|x_i−x_j|<r}` for
/// `RelativeDistance(r)`.
pub fn limit_isde_drift_2d(i: usize, state: &LabeledState, mode: TruncationMode) -> Result<Point2> {
    let pts = state.require_2d()?;
    check_index(i, pts.len())?;
    mode.check()?;
    let sum = interaction_2d(i, pts, mode)?;
    match mode {
        TruncationMode::AbsolutePosition(_) => Ok([sum[0] - pts[i][0], sum[1] - pts[i][1]]),
        TruncationMode::RelativeDistance(_) => Ok(sum),
        TruncationMode::Full => Err(Error::InvalidArgument("limit drift needs a truncation radius".into())),
    }
}

/// Confinement, anisotropy and collective terms of the strongly
/// non-Hermitian model at particle `i`, with `u = ζ + x/√(c N)`:
///
/// `−(N/(1−ω²)) u/√(cN) + (N/(1−ω²)) ω u†/√(cN) − (2γ/√(cN)) u (Σ_j|u_j|² − N K_p)`,
///
/// where `(a, b)† = (a, −b)`. This is half the gradient of the log-density
/// in the microscopic coordinates.
pub fn strong_nonhermitian_extra_drift(i: usize, state: &LabeledState, params: &GinibreParams, n: usize) -> Result<Point2> {
    let pts = state.require_2d()?;
    check_index(i, pts.len())?;
    let flat: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
    let mut out = vec![0.0; flat.len()];
    strong_nonhermitian_into(&flat, params, n, &mut out);
    Ok([out[2 * i], out[2 * i + 1]])
}

fn strong_nonhermitian_into(coords: &[f64], p: &GinibreParams, n: usize, out: &mut [f64]) {
    let n_f = n as f64;
    let root = (p.c_scale * n_f).sqrt();
    let u = |k: usize| [p.zeta[0] + coords[2 * k] / root, p.zeta[1] + coords[2 * k + 1] / root];
    let m = coords.len() / 2;
    let sum_sq: f64 = (0..m).map(|k| {
        let v = u(k);
        v[0] * v[0] + v[1] * v[1]
    }).sum();
    let a = n_f / (1.0 - p.omega * p.omega) / root;
    let g = 2.0 * p.gamma / root * (sum_sq - n_f * p.k_p);
    for k in 0..m {
        let v = u(k);
        out[2 * k] = -a * v[0] + a * p.omega * v[0] - g * v[0];
        out[2 * k + 1] = -a * v[1] - a * p.omega * v[1] - g * v[1];
    }
}

/// Mean-field drift `(β/2) ∫_{|y|>r} ρ(y)/(x − y) dy` of the particles outside
/// the window `[−r, r]`.
///
/// Constant density gives `(β/2) c log((r − x)/(r + x))`. A tabulated density
/// is integrated exactly against its linear interpolant, cell by cell.
pub fn tail_compensation_1d(x: f64, r: f64, beta: f64, rho1: &OnePointModel) -> Result<f64> {
    check_inside(x.abs(), r)?;
    match rho1 {
        OnePointModel::ConstantOutside(c) => Ok(0.5 * beta * c * ((r - x) / (r + x)).ln()),
        OnePointModel::Tabulated { grid, values } => Ok(0.5 * beta * tabulated_tail(x, r, grid, values)),
    }
}

fn check_inside(distance: f64, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("window radius must be positive".into()));
    }
    if !(distance < r) {
        return Err(Error::OutsideWindow { distance, radius: r });
    }
    Ok(())
}

/// `∫_{y0}^{y1} (a + b y)/(x − y) dy` for `x` outside `[y0, y1]`.
fn linear_cell(x: f64, y0: f64, y1: f64, f0: f64, f1: f64) -> f64 {
    let b = (f1 - f0) / (y1 - y0);
    let at_x = f0 + b * (x - y0);
    at_x * ((x - y0) / (x - y1)).abs().ln() - b * (y1 - y0)
}

fn tabulated_tail(x: f64, r: f64, grid: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    let interp = |y: f64, k: usize| {
        let w = (y - grid[k]) / (grid[k + 1] - grid[k]);
        values[k] * (1.0 - w) + values[k + 1] * w
    };
    for k in 0..grid.len() - 1 {
        let (y0, y1) = (grid[k], grid[k + 1]);
        // Right part [max(y0, r), y1].
        if y1 > r {
            let lo = y0.max(r);
            acc += linear_cell(x, lo, y1, interp(lo, k), values[k + 1]);
        }
        // Left part [y0, min(y1, −r)].
        if y0 < -r {
            let hi = y1.min(-r);
            acc += linear_cell(x, y0, hi, values[k], interp(hi, k));
        }
    }
    acc
}

/// Mean-field drift `∫_{|y|>r} (x − y)/|x − y|² ρ(|y|) dy` of the particles
/// outside the disc of radius `r`. For every radial profile (constant or
/// tabulated in `|y|`) the field inside the disc vanishes identically, so the
/// result is exactly `(0, 0)`.
pub fn tail_compensation_2d(x: Point2, r: f64, rho1: &OnePointModel) -> Result<Point2> {
    check_inside(x[0].hypot(x[1]), r)?;
    rho1.check()?;
    Ok([0.0, 0.0])
}

const TAIL_TABLE_NODES: usize = 4097;

/// Precomputed 1D tail drift on `(−r, r)`.
///
/// For tabulated densities the log singularities at `±r` are split off and
/// the smooth remainder is interpolated from a fine grid.
#[derive(Debug, Clone)]
enum TailEvaluator {
    Constant { half_beta_c: f64, r: f64 },
    Table { r: f64, half_beta: f64, edge_right: f64, edge_left: f64, smooth: Vec<f64>, step: f64 },
}

impl TailEvaluator {
    fn new(r: f64, beta: f64, rho1: &OnePointModel) -> Result<Self> {
        rho1.check()?;
        match rho1 {
            OnePointModel::ConstantOutside(c) => Ok(TailEvaluator::Constant { half_beta_c: 0.5 * beta * c, r }),
            OnePointModel::Tabulated { grid, values } => {
                let edge_right = rho1.value_at(r);
                let edge_left = rho1.value_at(-r);
                let step = 2.0 * r / (TAIL_TABLE_NODES - 1) as f64;
                let mut smooth = Vec::with_capacity(TAIL_TABLE_NODES);
                for k in 0..TAIL_TABLE_NODES {
                    // Nudge the end nodes inside; the remainder is continuous there.
                    let x = (-r + k as f64 * step).clamp(-r * (1.0 - 1e-12), r * (1.0 - 1e-12));
                    let singular = edge_right * (r - x).ln() - edge_left * (r + x).ln();
                    smooth.push(tabulated_tail(x, r, grid, values) - singular);
                }
                Ok(TailEvaluator::Table {
                    r,
                    half_beta: 0.5 * beta,
                    edge_right,
                    edge_left,
                    smooth,
                    step,
                })
            }
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self {
            TailEvaluator::Constant { half_beta_c, r } => half_beta_c * ((r - x) / (r + x)).ln(),
            TailEvaluator::Table {
                r,
                half_beta,
                edge_right,
                edge_left,
                smooth,
                step,
            } => {
                let pos = ((x + r) / step).clamp(0.0, (smooth.len() - 1) as f64);
                let k = (pos as usize).min(smooth.len() - 2);
                let w = pos - k as f64;
                let g = smooth[k] * (1.0 - w) + smooth[k + 1] * w;
                half_beta * (g + edge_right * (r - x).ln() - edge_left * (r + x).ln())
            }
        }
    }
}

#[derive(Debug, Clone)]
enum External {
    /// Coefficients of `V_β'`, the bulk scale `Nρ`, `θ` and `ρ(θ)`.
    Bulk { dv: Vec<f64>, scale: f64, theta: f64, rho: f64 },
    Raw { dv: Vec<f64>, n: f64 },
    /// Plain Ginibre: `−x`.
    Ginibre,
    StrongNonHermitian { params: GinibreParams, n: usize },
}

/// Drift split into its three summands, each flattened like the coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriftParts {
    pub interaction: Vec<f64>,
    /// Confinement (1D) or the Ginibre-type one-body terms (2D).
    pub external: Vec<f64>,
    pub tail: Vec<f64>,
}

impl DriftParts {
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.interaction.len()];
        self.total_into(&mut out);
        out
    }

    pub fn total_into(&self, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.interaction[k] + self.external[k] + self.tail[k];
        }
    }

    fn resize(&mut self, len: usize) {
        for v in [&mut self.interaction, &mut self.external, &mut self.tail] {
            v.clear();
            v.resize(len, 0.0);
        }
    }
}

/// Drift evaluator for one model, truncation mode and outside density.
///
/// [`DriftField::parts_into`] computes every pair once; the per-particle
/// reference sum [`DriftField::reference`] is checked against it on every
/// call in debug builds.
#[derive(Debug, Clone)]
pub struct DriftField {
    dimension: Dimension,
    half_beta: f64,
    mode: TruncationMode,
    external: External,
    window: Option<f64>,
    tail: Option<TailEvaluator>,
}

impl DriftField {
    pub fn new(spec: &ModelSpec, mode: TruncationMode, rho1: &OnePointModel) -> Result<Self> {
        crate::model::ensure_valid(spec)?;
        mode.check()?;
        rho1.check()?;
        let window = spec.window.radius();
        let k = beta_multiplier_extended(spec.beta);
        let dv: Vec<f64> = spec.potential.derivative().into_iter().map(|c| c * k).collect();
        let (external, tail) = match spec.dimension {
            Dimension::OneD => {
                let external = match spec.scaling {
                    Scaling::Bulk => {
                        let rho = spec.rho_at_theta().expect("validated");
                        External::Bulk {
                            dv,
                            scale: spec.n_particles as f64 * rho,
                            theta: spec.theta,
                            rho,
                        }
                    }
                    Scaling::Raw => External::Raw {
                        dv,
                        n: spec.n_particles as f64,
                    },
                };
                let tail = window.map(|r| TailEvaluator::new(r, spec.beta, rho1)).transpose()?;
                (external, tail)
            }
            Dimension::TwoD => {
                let external = match spec.ginibre {
                    None => External::Ginibre,
                    Some(params) => External::StrongNonHermitian {
                        params,
                        n: spec.n_particles,
                    },
                };
                (external, None)
            }
        };
        Ok(Self {
            dimension: spec.dimension,
            half_beta: 0.5 * spec.beta,
            mode,
            external,
            window,
            tail,
        })
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn mode(&self) -> TruncationMode {
        self.mode
    }

    fn stride(&self) -> usize {
        match self.dimension {
            Dimension::OneD => 1,
            Dimension::TwoD => 2,
        }
    }

    fn check_coords(&self, coords: &[f64]) -> Result<()> {
        if !coords.len().is_multiple_of(self.stride()) {
            return Err(Error::InvalidArgument("coordinate vector length does not match dimension".into()));
        }
        if let Some(r) = self.window {
            for p in coords.chunks_exact(self.stride()) {
                let d = if p.len() == 1 { p[0].abs() } else { p[0].hypot(p[1]) };
                if !(d <= r) {
                    return Err(Error::OutsideWindow { distance: d, radius: r });
                }
            }
        }
        Ok(())
    }

    fn external_into(&self, coords: &[f64], out: &mut [f64]) {
        match &self.external {
            External::Bulk { dv, scale, theta, rho } => {
                for (o, &s) in out.iter_mut().zip(coords) {
                    *o = -0.5 * horner(dv, s / scale + theta) / rho;
                }
            }
            External::Raw { dv, n } => {
                for (o, &x) in out.iter_mut().zip(coords) {
                    *o = -0.5 * n * horner(dv, x);
                }
            }
            External::Ginibre => {
                for (o, &x) in out.iter_mut().zip(coords) {
                    *o = -x;
                }
            }
            External::StrongNonHermitian { params, n } => strong_nonhermitian_into(coords, params, *n, out),
        }
    }

    fn tail_into(&self, coords: &[f64], out: &mut [f64]) {
        match &self.tail {
            Some(t) => {
                // On the boundary itself the log singularity is cut off by
                // evaluating just inside.
                let r = self.window.expect("tail implies window");
                let lim = r * (1.0 - 1e-12);
                for (o, &x) in out.iter_mut().zip(coords) {
                    *o = t.eval(x.clamp(-lim, lim));
                }
            }
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// Pairwise pass: every pair is visited once.
    pub fn parts_into(&self, coords: &[f64], parts: &mut DriftParts) -> Result<()> {
        self.check_coords(coords)?;
        parts.resize(coords.len());
        let inter = &mut parts.interaction;
        match self.dimension {
            Dimension::OneD => {
                let n = coords.len();
                for i in 0..n {
                    let xi = coords[i];
                    for j in i + 1..n {
                        let xj = coords[j];
                        let d = xi - xj;
                        let dist = d.abs();
                        if dist < MIN_GAP {
                            return Err(Error::Collision { i, j, gap: dist });
                        }
                        let inv = 1.0 / d;
                        if self.mode.admits(dist, xj.abs()) {
                            inter[i] += inv;
                        }
                        if self.mode.admits(dist, xi.abs()) {
                            inter[j] -= inv;
                        }
                    }
                }
                inter.iter_mut().for_each(|v| *v *= self.half_beta);
            }
            Dimension::TwoD => {
                let n = coords.len() / 2;
                for i in 0..n {
                    let (xi, yi) = (coords[2 * i], coords[2 * i + 1]);
                    for j in i + 1..n {
                        let (xj, yj) = (coords[2 * j], coords[2 * j + 1]);
                        let (dx, dy) = (xi - xj, yi - yj);
                        let sq = dx * dx + dy * dy;
                        let dist = sq.sqrt();
                        if dist < MIN_GAP {
                            return Err(Error::Collision { i, j, gap: dist });
                        }
                        let (fx, fy) = (dx / sq, dy / sq);
                        if self.mode.admits(dist, xj.hypot(yj)) {
                            inter[2 * i] += fx;
                            inter[2 * i + 1] += fy;
                        }
                        if self.mode.admits(dist, xi.hypot(yi)) {
                            inter[2 * j] -= fx;
                            inter[2 * j + 1] -= fy;
                        }
                    }
                }
                let scale = self.half_beta;
                if scale != 1.0 {
                    inter.iter_mut().for_each(|v| *v *= scale);
                }
            }
        }
        self.external_into(coords, &mut parts.external);
        self.tail_into(coords, &mut parts.tail);
        if cfg!(debug_assertions) {
            let reference = self.reference(coords)?;
            for (a, b) in parts.interaction.iter().zip(&reference.interaction) {
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + b.abs()) * (coords.len() as f64).max(1.0),
                    "pairwise drift {a} disagrees with reference {b}"
                );
            }
        }
        Ok(())
    }

    pub fn parts(&self, coords: &[f64]) -> Result<DriftParts> {
        let mut parts = DriftParts::default();
        self.parts_into(coords, &mut parts)?;
        Ok(parts)
    }

    /// Per-particle O(N²) evaluation.
    pub fn reference(&self, coords: &[f64]) -> Result<DriftParts> {
        self.check_coords(coords)?;
        let mut parts = DriftParts::default();
        parts.resize(coords.len());
        match self.dimension {
            Dimension::OneD => {
                for i in 0..coords.len() {
                    let mut acc = 0.0;
                    for (j, &xj) in coords.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        let d = coords[i] - xj;
                        if d.abs() < MIN_GAP {
                            return Err(Error::Collision { i, j, gap: d.abs() });
                        }
                        if self.mode.admits(d.abs(), xj.abs()) {
                            acc += 1.0 / d;
                        }
                    }
                    parts.interaction[i] = self.half_beta * acc;
                }
            }
            Dimension::TwoD => {
                let pts: Vec<Point2> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                for i in 0..pts.len() {
                    let v = interaction_2d(i, &pts, self.mode)?;
                    parts.interaction[2 * i] = self.half_beta * v[0];
                    parts.interaction[2 * i + 1] = self.half_beta * v[1];
                }
            }
        }
        self.external_into(coords, &mut parts.external);
        self.tail_into(coords, &mut parts.tail);
        Ok(parts)
    }
}

/// Total per-particle drift (interaction + one-body + tail), flattened like
/// [`LabeledState::flat_coordinates`]. Uses the reference evaluation.
pub fn full_drift(state: &LabeledState, spec: &ModelSpec, mode: TruncationMode, rho1: &OnePointModel) -> Result<Vec<f64>> {
    if state.dimension() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension.as_str(),
            got: state.dimension().as_str(),
        });
    }
    let field = DriftField::new(spec, mode, rho1)?;
    Ok(field.reference(&state.flat_coordinates())?.total())
}

/// Equilibrium density of the plain Ginibre field in the microscopic frame.
pub const GINIBRE_DENSITY: f64 = 1.0 / PI;
