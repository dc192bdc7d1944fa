//! Euler–Maruyama integration of the windowed particle SDEs with reflecting
//! boundary, collision-safe substepping, and reconstruction of the driving
//! Brownian motions from recorded paths.
//!
//! A proposed step that would reorder 1D particles (or bring two planar
//! particles closer than `min_gap`) is split in two halves, the midpoint of
//! the Brownian increment being drawn from its bridge law. With
//! `record_stride = 1` every accepted substep becomes a frame, so replaying
//! the left-endpoint drift over the frames recovers the stored noise exactly.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::drift::{DriftField, DriftParts, OnePointModel, TruncationMode};
use crate::error::{Error, Result};
use crate::model::{Dimension, LabelOrder, LabeledState, ModelSpec, Point2, RunContext, Trajectory};

/// Retries with fresh noise after substepping bottoms out.
pub const MAX_RETRIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub t_end: f64,
    pub max_substep_depth: u32,
    pub min_gap: f64,
    pub record_stride: usize,
}

impl IntegratorSettings {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            max_substep_depth: 20,
            min_gap: 1e-9,
            record_stride: 1,
        }
    }

    /// `t_end = 0` is accepted and yields the initial frame only.
    pub fn check(&self) -> Result<()> {
        let positive = self.dt > 0.0 && self.max_substep_depth > 0 && self.min_gap > 0.0 && self.record_stride > 0;
        if !positive || !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument("integrator settings must be positive".into()));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(Error::InvalidArgument("dt exceeds t_end".into()));
        }
        Ok(())
    }

    /// Number of nominal steps; the last one is shortened to end at `t_end`.
    pub fn n_steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// One accepted Euler–Maruyama substep.
#[derive(Debug, Clone, PartialEq)]
pub struct Substep {
    pub dt: f64,
    /// Coordinates after the substep (flattened).
    pub coords: Vec<f64>,
    pub noise: Vec<f64>,
    /// Post-reflection minus pre-reflection position.
    pub push: Vec<f64>,
}

/// Fold-back reflection into `[−r, r]`; returns the reflected value.
pub fn reflect_1d(y: f64, r: f64) -> f64 {
    let mut y = y;
    while y.abs() > r {
        y = if y > r { 2.0 * r - y } else { -2.0 * r - y };
    }
    y
}

/// Radial mirror `y (2r − |y|)/|y|` into the closed disc of radius `r`.
pub fn reflect_2d(y: Point2, r: f64) -> Point2 {
    let mut y = y;
    let mut m = y[0].hypot(y[1]);
    let mut guard = 0;
    while m > r && guard < 64 {
        let f = (2.0 * r - m) / m;
        y = [y[0] * f, y[1] * f];
        m = y[0].hypot(y[1]);
        guard += 1;
    }
    y
}

/// Drift field plus window and substepping parameters.
#[derive(Debug, Clone)]
pub struct Stepper {
    field: DriftField,
    window: Option<f64>,
    dim: usize,
    max_depth: u32,
    min_gap: f64,
}

impl Stepper {
    pub fn new(spec: &ModelSpec, mode: TruncationMode, rho1: &OnePointModel, settings: &IntegratorSettings) -> Result<Self> {
        settings.check()?;
        Ok(Self {
            field: DriftField::new(spec, mode, rho1)?,
            window: spec.window.radius(),
            dim: match spec.dimension {
                Dimension::OneD => 1,
                Dimension::TwoD => 2,
            },
            max_depth: settings.max_substep_depth,
            min_gap: settings.min_gap,
        })
    }

    pub fn field(&self) -> &DriftField {
        &self.field
    }

    fn admissible(&self, y: &[f64]) -> bool {
        if y.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if self.dim == 1 {
            if let Some(r) = self.window {
                if y.iter().any(|v| v.abs() >= r) {
                    return false;
                }
            }
            y.windows(2).all(|w| w[1] - w[0] >= self.min_gap)
        } else {
            let n = y.len() / 2;
            let gap_sq = self.min_gap * self.min_gap;
            for i in 0..n {
                if let Some(r) = self.window {
                    if y[2 * i].hypot(y[2 * i + 1]) >= r {
                        return false;
                    }
                }
                for j in i + 1..n {
                    let dx = y[2 * i] - y[2 * j];
                    let dy = y[2 * i + 1] - y[2 * j + 1];
                    if dx * dx + dy * dy < gap_sq {
                        return false;
                    }
                }
            }
            true
        }
    }

    /// Proposal `x + b(x) h + dW`, reflected into the window.
    fn propose(&self, x: &[f64], drift: &[f64], h: f64, dw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut y: Vec<f64> = (0..x.len()).map(|k| x[k] + drift[k] * h + dw[k]).collect();
        let mut push = vec![0.0; x.len()];
        if let Some(r) = self.window {
            if self.dim == 1 {
                for k in 0..y.len() {
                    let z = reflect_1d(y[k], r);
                    push[k] = z - y[k];
                    y[k] = z;
                }
            } else {
                for k in 0..y.len() / 2 {
                    let z = reflect_2d([y[2 * k], y[2 * k + 1]], r);
                    push[2 * k] = z[0] - y[2 * k];
                    push[2 * k + 1] = z[1] - y[2 * k + 1];
                    y[2 * k] = z[0];
                    y[2 * k + 1] = z[1];
                }
            }
        }
        (y, push)
    }

    fn drift(&self, x: &[f64], parts: &mut DriftParts) -> Result<Vec<f64>> {
        self.field.parts_into(x, parts)?;
        Ok(parts.total())
    }

    /// Advances by `h` with increment `dw`; returns `false` if the recursion
    /// bottoms out.
    #[allow(clippy::too_many_arguments)]
    fn advance<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        drift_x: &[f64],
        h: f64,
        dw: &[f64],
        depth: u32,
        rng: &mut R,
        parts: &mut DriftParts,
        out: &mut Vec<Substep>,
    ) -> Result<bool> {
        let (y, push) = self.propose(x, drift_x, h, dw);
        if self.admissible(&y) {
            out.push(Substep {
                dt: h,
                coords: y,
                noise: dw.to_vec(),
                push,
            });
            return Ok(true);
        }
        if depth >= self.max_depth {
            return Ok(false);
        }
        let half = 0.5 * h;
        let sd = 0.5 * h.sqrt();
        let dw1: Vec<f64> = dw.iter().map(|w| 0.5 * w + sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let dw2: Vec<f64> = dw.iter().zip(&dw1).map(|(w, a)| w - a).collect();
        if !self.advance(x, drift_x, half, &dw1, depth + 1, rng, parts, out)? {
            return Ok(false);
        }
        let mid = out.last().expect("just pushed").coords.clone();
        let drift_mid = self.drift(&mid, parts)?;
        self.advance(&mid, &drift_mid, half, &dw2, depth + 1, rng, parts, out)
    }

    /// One nominal step of length `h` from `x`, possibly made of several
    /// substeps. Retries with fresh noise up to [`MAX_RETRIES`] times.
    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], h: f64, time: f64, rng: &mut R) -> Result<Vec<Substep>> {
        let mut parts = DriftParts::default();
        let drift_x = self.drift(x, &mut parts)?;
        let sq = h.sqrt();
        for _ in 0..=MAX_RETRIES {
            let dw: Vec<f64> = (0..x.len()).map(|_| sq * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut out = Vec::with_capacity(1);
            if self.advance(x, &drift_x, h, &dw, 0, rng, &mut parts, &mut out)? {
                return Ok(out);
            }
        }
        Err(Error::SubstepExhausted {
            time,
            retries: MAX_RETRIES,
        })
    }
}

fn state_from_coords(dim: Dimension, coords: Vec<f64>) -> Result<LabeledState> {
    match dim {
        Dimension::OneD => LabeledState::one_d(coords),
        Dimension::TwoD => Ok(LabeledState::from_parts_unchecked(
            crate::model::Points::TwoD(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect()),
            LabelOrder::Tracked,
        )),
    }
}

/// Result of [`em_step`]: the new state with the summed Gaussian increment
/// and reflection displacement over all substeps.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: LabeledState,
    pub noise: Vec<f64>,
    pub boundary_push: Vec<f64>,
    pub substeps: usize,
}

/// Single Euler–Maruyama step of length `dt` from `state`.
pub fn em_step(
    state: &LabeledState,
    dt: f64,
    spec: &ModelSpec,
    mode: TruncationMode,
    rho1: &OnePointModel,
    rng: &mut ChaCha8Rng,
) -> Result<StepResult> {
    let settings = IntegratorSettings::new(dt, dt);
    let stepper = Stepper::new(spec, mode, rho1, &settings)?;
    let x = prepare_initial(state, spec)?.flat_coordinates();
    let subs = stepper.step(&x, dt, 0.0, rng)?;
    let mut noise = vec![0.0; x.len()];
    let mut push = vec![0.0; x.len()];
    for s in &subs {
        for k in 0..x.len() {
            noise[k] += s.noise[k];
            push[k] += s.push[k];
        }
    }
    let last = subs.last().expect("at least one substep").coords.clone();
    Ok(StepResult {
        state: state_from_coords(spec.dimension, last)?,
        noise,
        boundary_push: push,
        substeps: subs.len(),
    })
}

fn prepare_initial(initial: &LabeledState, spec: &ModelSpec) -> Result<LabeledState> {
    if initial.dimension() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension.as_str(),
            got: initial.dimension().as_str(),
        });
    }
    let state = match spec.dimension {
        Dimension::OneD => initial.to_ascending_value()?,
        Dimension::TwoD => initial.clone().into_tracked(),
    };
    if let Some(r) = spec.window.radius() {
        for m in state.moduli() {
            if !(m < r) {
                return Err(Error::OutsideWindow { distance: m, radius: r });
            }
        }
    }
    if state.flat_coordinates().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state has non-finite coordinates".into()));
    }
    Ok(state)
}

/// Integrates from `initial` up to `settings.t_end`.
///
/// 1D states keep ascending labels (crossings are prevented, so labels
/// follow particles); 2D states use tracked labels. Noise and reflection
/// displacements are summed per frame interval.
pub fn simulate(
    spec: &ModelSpec,
    settings: &IntegratorSettings,
    mode: TruncationMode,
    rho1: &OnePointModel,
    initial: &LabeledState,
    ctx: &RunContext,
) -> Result<Trajectory> {
    let stepper = Stepper::new(spec, mode, rho1, settings)?;
    let start = prepare_initial(initial, spec)?;
    let mut rng = ctx.rng();
    let mut x = start.flat_coordinates();
    let width = x.len();

    let mut times = vec![0.0];
    let mut states = vec![start];
    let mut noise = Vec::new();
    let mut pushes = Vec::new();

    let n_steps = settings.n_steps();
    let mut acc_noise = vec![0.0; width];
    let mut acc_push = vec![0.0; width];
    let mut t = 0.0;
    for step in 0..n_steps {
        let t0 = step as f64 * settings.dt;
        let h = if step + 1 == n_steps { settings.t_end - t0 } else { settings.dt };
        let subs = stepper.step(&x, h, t0, &mut rng)?;
        for s in subs {
            t += s.dt;
            if settings.record_stride == 1 {
                times.push(t);
                states.push(state_from_coords(spec.dimension, s.coords.clone())?);
                noise.push(s.noise);
                pushes.push(s.push);
            } else {
                for k in 0..width {
                    acc_noise[k] += s.noise[k];
                    acc_push[k] += s.push[k];
                }
            }
            x = s.coords;
        }
        if settings.record_stride > 1 && ((step + 1) % settings.record_stride == 0 || step + 1 == n_steps) {
            times.push(t);
            states.push(state_from_coords(spec.dimension, x.clone())?);
            noise.push(std::mem::replace(&mut acc_noise, vec![0.0; width]));
            pushes.push(std::mem::replace(&mut acc_push, vec![0.0; width]));
        }
    }
    if n_steps > 0 {
        // Drop the rounding accumulated in `t` so the horizon is exact.
        *times.last_mut().expect("nonempty") = settings.t_end;
    }
    Ok(Trajectory {
        spec: spec.clone(),
        times,
        states,
        noise,
        boundary_pushes: pushes,
    })
}

/// Cumulative integrals of each drift summand, per coordinate and frame.
#[derive(Debug, Clone, Default)]
pub struct ResidualTerms {
    pub interaction: Vec<Vec<f64>>,
    /// Confinement (1D) or Ginibre one-body terms (2D).
    pub external: Vec<Vec<f64>>,
    pub tail: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
}

/// Reconstructed Brownian paths `B̂(t) = X(t) − X(0) − ∫ drift − pushes`
/// with left-endpoint quadrature over the recorded frames. `paths[c][k]` is
/// coordinate `c` (particle `c` in 1D; `c = 2i, 2i + 1` in 2D) at frame `k`.
#[derive(Debug, Clone)]
pub struct BrownianReconstruction {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub residual_terms: ResidualTerms,
    /// Partial sums of the stored noise, same layout as `paths`.
    pub noise_sums: Vec<Vec<f64>>,
    /// `max |B̂ − Σ noise|` over coordinates and frames.
    pub residual: f64,
}

impl BrownianReconstruction {
    pub fn n_coords(&self) -> usize {
        self.paths.len()
    }

    /// Drift-corrected functional of the invariance principle for
    /// coordinate `c`:
    /// `X(t) − X(0) − ∫ interaction + C t − ∫ tail`, which equals
    /// `B̂(t) + ∫ one-body drift + C t + pushes`.
    pub fn invariance_functional(&self, c: usize, c_beta: f64) -> Result<Vec<f64>> {
        self.check_coord(c)?;
        let rt = &self.residual_terms;
        Ok((0..self.times.len())
            .map(|k| self.paths[c][k] + rt.external[c][k] + c_beta * self.times[k] + rt.boundary[c][k])
            .collect())
    }

    fn check_coord(&self, c: usize) -> Result<()> {
        if c >= self.paths.len() {
            return Err(Error::InvalidArgument(format!("coordinate {c} out of range for {}", self.paths.len())));
        }
        Ok(())
    }
}

/// Rebuilds the driving noise from a trajectory. Exact (up to rounding)
/// when every substep was recorded (`record_stride = 1`).
pub fn reconstruct_brownian(
    traj: &Trajectory,
    spec: &ModelSpec,
    mode: TruncationMode,
    rho1: &OnePointModel,
) -> Result<BrownianReconstruction> {
    traj.check()?;
    let field = DriftField::new(spec, mode, rho1)?;
    let frames = traj.states.len();
    let coords: Vec<Vec<f64>> = traj.states.iter().map(|s| s.flat_coordinates()).collect();
    let width = coords[0].len();
    if coords.iter().any(|c| c.len() != width) {
        return Err(Error::MissingData("particle count changes between frames".into()));
    }
    let zeros = || vec![vec![0.0; frames]; width];
    let (mut inter, mut ext, mut tail, mut bound, mut paths, mut sums) = (zeros(), zeros(), zeros(), zeros(), zeros(), zeros());
    let mut parts = DriftParts::default();
    let mut residual: f64 = 0.0;
    for k in 0..frames - 1 {
        let h = traj.times[k + 1] - traj.times[k];
        field.parts_into(&coords[k], &mut parts)?;
        for c in 0..width {
            inter[c][k + 1] = inter[c][k] + parts.interaction[c] * h;
            ext[c][k + 1] = ext[c][k] + parts.external[c] * h;
            tail[c][k + 1] = tail[c][k] + parts.tail[c] * h;
            bound[c][k + 1] = bound[c][k] + traj.boundary_pushes[k][c];
            sums[c][k + 1] = sums[c][k] + traj.noise[k][c];
            paths[c][k + 1] =
                coords[k + 1][c] - coords[0][c] - inter[c][k + 1] - ext[c][k + 1] - tail[c][k + 1] - bound[c][k + 1];
            residual = residual.max((paths[c][k + 1] - sums[c][k + 1]).abs());
        }
    }
    Ok(BrownianReconstruction {
        times: traj.times.clone(),
        paths,
        residual_terms: ResidualTerms {
            interaction: inter,
            external: ext,
            tail,
            boundary: bound,
        },
        noise_sums: sums,
        residual,
    })
}

/// `max_{t_k ≤ T} values[k]` over recorded frames.
pub fn max_of_path(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::InvalidArgument("path and time grid differ in length".into()));
    }
    if t > times[times.len() - 1] * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InvalidArgument(format!("T = {t} exceeds the recorded horizon")));
    }
    Ok(times
        .iter()
        .zip(values)
        .take_while(|(&s, _)| s <= t * (1.0 + 1e-12) + 1e-12)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Running maximum of the reconstructed path of coordinate `i` over `[0, T]`.
pub fn max_functional(recon: &BrownianReconstruction, i: usize, t: f64) -> Result<f64> {
    recon.check_coord(i)?;
    max_of_path(&recon.times, &recon.paths[i], t)
}

/// Writes one JSON object per frame: `{"t", "points", "pushes"}`, where
/// `pushes` is the reflection displacement accumulated since the previous
/// frame (zeros at frame 0).
pub fn write_trajectory_jsonl<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let width = traj.states.first().map(|s| s.flat_coordinates().len()).unwrap_or(0);
    let zeros = vec![0.0; width];
    for (k, state) in traj.states.iter().enumerate() {
        let points = match state.points() {
            crate::model::Points::OneD(p) => json!(p),
            crate::model::Points::TwoD(p) => json!(p),
        };
        let pushes = if k == 0 { &zeros } else { &traj.boundary_pushes[k - 1] };
        let record = json!({ "t": traj.times[k], "points": points, "pushes": pushes });
        writeln!(out, "{record}")?;
    }
    Ok(())
}

/// Noise sidecar: `frame,coord_0,coord_1,...`; row `k` holds the increment
/// between frames `k` and `k + 1`.
pub fn write_noise_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let width = traj.noise.first().map(Vec::len).unwrap_or(0);
    let header: Vec<String> = (0..width).map(|c| format!("coord_{c}")).collect();
    writeln!(out, "frame,{}", header.join(","))?;
    for (k, row) in traj.noise.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{k},{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads back the pair written by [`write_trajectory_jsonl`] and
/// [`write_noise_csv`].
pub fn read_trajectory<R1: BufRead, R2: BufRead>(spec: &ModelSpec, jsonl: R1, noise_csv: R2) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut pushes = Vec::new();
    for (idx, line) in jsonl.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| bad(&e.to_string()))?;
        let t = v["t"].as_f64().ok_or_else(|| bad("missing t"))?;
        let coords: Vec<f64> = match spec.dimension {
            Dimension::OneD => serde_json::from_value::<Vec<f64>>(v["points"].clone()).map_err(|e| bad(&e.to_string()))?,
            Dimension::TwoD => serde_json::from_value::<Vec<Point2>>(v["points"].clone())
                .map_err(|e| bad(&e.to_string()))?
                .into_iter()
                .flat_map(|p| p.into_iter())
                .collect(),
        };
        let push: Vec<f64> = serde_json::from_value(v["pushes"].clone()).map_err(|e| bad(&e.to_string()))?;
        if !states.is_empty() {
            pushes.push(push);
        }
        times.push(t);
        states.push(state_from_coords(spec.dimension, coords)?);
    }
    let mut noise = Vec::new();
    for (idx, line) in noise_csv.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').skip(1).map(|c| c.trim().parse::<f64>()).collect();
        noise.push(row.map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?);
    }
    let traj = Trajectory {
        spec: spec.clone(),
        times,
        states,
        noise,
        boundary_pushes: pushes,
    };
    traj.check()?;
    Ok(traj)
}
