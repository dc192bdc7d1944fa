//! Domain types shared by every other module: model specifications, labeled
//! particle configurations, trajectories and run provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::potentials::{EquilibriumDensity, PolynomialPotential};

/// A point of the plane, identified with `x + iy`.
pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    OneD,
    TwoD,
}

impl Dimension {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::OneD => "1D",
            Dimension::TwoD => "2D",
        }
    }
}

/// Radius of the simulation window `{|x| < r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Finite(f64),
    Infinite,
}

impl Window {
    pub fn radius(&self) -> Option<f64> {
        match *self {
            Window::Finite(r) => Some(r),
            Window::Infinite => None,
        }
    }

    pub fn contains(&self, distance: f64) -> bool {
        match *self {
            Window::Finite(r) => distance < r,
            Window::Infinite => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Macroscopic coordinates `x`.
    Raw,
    /// Microscopic coordinates `s = Nρ(θ)(x − θ)`.
    Bulk,
}

/// Parameters of the normal-matrix ensemble with the strong non-Hermiticity
/// deformation, plus the zoom point `zeta` and scale `c_scale` of the
/// microscopic frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GinibreParams {
    pub gamma: f64,
    pub omega: f64,
    pub k_p: f64,
    pub c_scale: f64,
    pub zeta: Point2,
}

impl Default for GinibreParams {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            omega: 0.0,
            k_p: 0.0,
            c_scale: 1.0,
            zeta: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub dimension: Dimension,
    pub beta: f64,
    pub potential: PolynomialPotential,
    pub theta: f64,
    pub n_particles: usize,
    pub window: Window,
    pub scaling: Scaling,
    /// Equilibrium density at `theta`; required for bulk scaling unless the
    /// potential is `x²`.
    pub rho_theta: Option<f64>,
    pub ginibre: Option<GinibreParams>,
}

impl ModelSpec {
    /// β-ensemble with `V(x) = x²` in the bulk frame at `theta`.
    pub fn gaussian_bulk(n: usize, beta: f64, theta: f64, window: Window) -> Self {
        Self {
            dimension: Dimension::OneD,
            beta,
            potential: PolynomialPotential::quadratic(),
            theta,
            n_particles: n,
            window,
            scaling: Scaling::Bulk,
            rho_theta: None,
            ginibre: None,
        }
    }

    /// β-ensemble with `V(x) = x²` in macroscopic coordinates.
    pub fn gaussian_raw(n: usize, beta: f64) -> Self {
        Self {
            scaling: Scaling::Raw,
            ..Self::gaussian_bulk(n, beta, 0.0, Window::Infinite)
        }
    }

    /// Plain Ginibre ensemble, density `Π|x_i − x_j|² exp(−Σ|x_k|²)`.
    pub fn ginibre(n: usize, window: Window) -> Self {
        Self {
            dimension: Dimension::TwoD,
            beta: 2.0,
            potential: PolynomialPotential::zero(),
            theta: 0.0,
            n_particles: n,
            window,
            scaling: Scaling::Raw,
            rho_theta: None,
            ginibre: None,
        }
    }

    pub fn equilibrium(&self) -> Option<EquilibriumDensity> {
        match self.rho_theta {
            Some(value) => Some(EquilibriumDensity::UserSupplied(value)),
            None if self.potential.is_quadratic() => Some(EquilibriumDensity::SemicircleQuadratic),
            None => None,
        }
    }

    /// `ρ(θ)` if known.
    pub fn rho_at_theta(&self) -> Option<f64> {
        self.equilibrium().map(|e| e.value_at(self.theta))
    }

    pub fn validate(&self) -> ValidationResult {
        validate_spec(self)
    }
}

/// `Ok` or the list of violated constraints.
pub type ValidationResult = std::result::Result<(), Vec<String>>;

pub fn validate_spec(spec: &ModelSpec) -> ValidationResult {
    let mut violations = Vec::new();
    if !(spec.beta > 0.0) || !spec.beta.is_finite() {
        violations.push("beta must be positive".to_string());
    }
    if spec.n_particles == 0 {
        violations.push("n_particles must be at least 1".to_string());
    }
    if !spec.theta.is_finite() {
        violations.push("theta must be finite".to_string());
    }
    if let Window::Finite(r) = spec.window {
        if !(r > 0.0) || !r.is_finite() {
            violations.push("window radius must be positive".to_string());
        }
    }
    if spec.scaling == Scaling::Bulk {
        if spec.dimension != Dimension::OneD {
            violations.push("bulk scaling requires dimension 1".to_string());
        }
        match spec.rho_at_theta() {
            Some(rho) if rho > 0.0 && rho.is_finite() => {}
            Some(_) => violations.push("equilibrium density nonpositive at theta".to_string()),
            None => violations
                .push("equilibrium density unavailable at theta: supply rho_theta".to_string()),
        }
    }
    if let Some(g) = &spec.ginibre {
        if spec.dimension != Dimension::TwoD {
            violations.push("ginibre parameters require dimension 2".to_string());
        }
        if !(0.0..1.0).contains(&g.omega) {
            violations.push("omega must lie in [0, 1)".to_string());
        }
        if !(g.gamma >= 0.0) {
            violations.push("gamma must be nonnegative".to_string());
        }
        if !(g.c_scale > 0.0) {
            violations.push("c_scale must be positive".to_string());
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Raises the validation failures as a single error.
pub fn ensure_valid(spec: &ModelSpec) -> Result<()> {
    validate_spec(spec).map_err(|v| Error::InvalidSpec(v.join("; ")))
}

// ---------------------------------------------------------------------------
// Flat `key = value` spec format.

const SPEC_KEYS: &[&str] = &[
    "dimension",
    "beta",
    "V",
    "theta",
    "N",
    "r",
    "scaling",
    "rho_theta",
    "ginibre.gamma",
    "ginibre.omega",
    "ginibre.k_p",
    "ginibre.c_scale",
    "ginibre.zeta",
];

pub fn is_spec_key(key: &str) -> bool {
    SPEC_KEYS.contains(&key)
}

/// Splits `key = value` lines, dropping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: idx + 1,
            msg: format!("expected `key = value`, found `{line}`"),
        })?;
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    let v = match value {
        "inf" | "infinite" | "Infinite" => f64::INFINITY,
        _ => value.parse::<f64>().map_err(|_| Error::Parse {
            line,
            msg: format!("`{key}` expects a real number, found `{value}`"),
        })?,
    };
    Ok(v)
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("`{key}` expects a list like [0, 0, 1]"),
        })?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(line, key, s))
        .collect()
}

/// Parses a spec document, then applies `overrides` (later entries win).
/// Override keys that are not spec keys are returned untouched.
pub fn parse_spec_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<(ModelSpec, Vec<(String, String)>)> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (line, key, value) in parse_key_values(text)? {
        if !is_spec_key(&key) {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        entries.insert(key, (line, value));
    }
    let mut leftover = Vec::new();
    for (key, value) in overrides {
        if is_spec_key(key) {
            entries.insert(key.clone(), (0, value.clone()));
        } else {
            leftover.push((key.clone(), value.clone()));
        }
    }

    let get = |key: &str| entries.get(key).map(|(l, v)| (*l, v.as_str()));
    let required = |key: &'static str| {
        get(key).ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing required key `{key}`"),
        })
    };

    let (line, dim) = required("dimension")?;
    let dimension = match dim {
        "1" | "1D" | "1d" => Dimension::OneD,
        "2" | "2D" | "2d" => Dimension::TwoD,
        other => {
            return Err(Error::Parse {
                line,
                msg: format!("dimension must be 1 or 2, found `{other}`"),
            })
        }
    };
    let (line, beta) = required("beta")?;
    let beta = parse_f64(line, "beta", beta)?;
    let (line, n) = required("N")?;
    let n_particles = n.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("`N` expects a nonnegative integer, found `{n}`"),
    })?;
    let potential = match get("V") {
        Some((line, v)) => PolynomialPotential::new(parse_list(line, "V", v)?)?,
        None => PolynomialPotential::zero(),
    };
    let theta = match get("theta") {
        Some((line, v)) => parse_f64(line, "theta", v)?,
        None => 0.0,
    };
    let window = match get("r") {
        Some((line, v)) => {
            let r = parse_f64(line, "r", v)?;
            if r.is_infinite() && r > 0.0 {
                Window::Infinite
            } else {
                Window::Finite(r)
            }
        }
        None => Window::Infinite,
    };
    let scaling = match get("scaling") {
        Some((_, "bulk")) | Some((_, "Bulk")) => Scaling::Bulk,
        Some((_, "raw")) | Some((_, "Raw")) | None => Scaling::Raw,
        Some((line, other)) => {
            return Err(Error::Parse {
                line,
                msg: format!("scaling must be `raw` or `bulk`, found `{other}`"),
            })
        }
    };
    let rho_theta = get("rho_theta")
        .map(|(line, v)| parse_f64(line, "rho_theta", v))
        .transpose()?;

    let ginibre_keys = [
        "ginibre.gamma",
        "ginibre.omega",
        "ginibre.k_p",
        "ginibre.c_scale",
        "ginibre.zeta",
    ];
    let ginibre = if ginibre_keys.iter().any(|k| entries.contains_key(*k)) {
        let mut g = GinibreParams::default();
        if let Some((line, v)) = get("ginibre.gamma") {
            g.gamma = parse_f64(line, "ginibre.gamma", v)?;
        }
        if let Some((line, v)) = get("ginibre.omega") {
            g.omega = parse_f64(line, "ginibre.omega", v)?;
        }
        if let Some((line, v)) = get("ginibre.k_p") {
            g.k_p = parse_f64(line, "ginibre.k_p", v)?;
        }
        if let Some((line, v)) = get("ginibre.c_scale") {
            g.c_scale = parse_f64(line, "ginibre.c_scale", v)?;
        }
        if let Some((line, v)) = get("ginibre.zeta") {
            let z = parse_list(line, "ginibre.zeta", v)?;
            if z.len() != 2 {
                return Err(Error::Parse {
                    line,
                    msg: "ginibre.zeta expects two components".into(),
                });
            }
            g.zeta = [z[0], z[1]];
        }
        Some(g)
    } else {
        None
    };

    Ok((
        ModelSpec {
            dimension,
            beta,
            potential,
            theta,
            n_particles,
            window,
            scaling,
            rho_theta,
            ginibre,
        },
        leftover,
    ))
}

pub fn parse_spec(text: &str) -> Result<ModelSpec> {
    parse_spec_with_overrides(text, &[]).map(|(spec, _)| spec)
}

fn fmt_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", items.join(", "))
}

/// Canonical text form; `parse_spec(&print_spec(s)) == s`.
pub fn print_spec(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let dim = match spec.dimension {
        Dimension::OneD => 1,
        Dimension::TwoD => 2,
    };
    let _ = writeln!(out, "dimension = {dim}");
    let _ = writeln!(out, "beta = {}", spec.beta);
    let _ = writeln!(out, "V = {}", fmt_list(spec.potential.coefficients()));
    let _ = writeln!(out, "theta = {}", spec.theta);
    let _ = writeln!(out, "N = {}", spec.n_particles);
    match spec.window {
        Window::Finite(r) => {
            let _ = writeln!(out, "r = {r}");
        }
        Window::Infinite => {
            let _ = writeln!(out, "r = inf");
        }
    }
    let scaling = match spec.scaling {
        Scaling::Raw => "raw",
        Scaling::Bulk => "bulk",
    };
    let _ = writeln!(out, "scaling = {scaling}");
    if let Some(rho) = spec.rho_theta {
        let _ = writeln!(out, "rho_theta = {rho}");
    }
    if let Some(g) = &spec.ginibre {
        let _ = writeln!(out, "ginibre.gamma = {}", g.gamma);
        let _ = writeln!(out, "ginibre.omega = {}", g.omega);
        let _ = writeln!(out, "ginibre.k_p = {}", g.k_p);
        let _ = writeln!(out, "ginibre.c_scale = {}", g.c_scale);
        let _ = writeln!(out, "ginibre.zeta = {}", fmt_list(&g.zeta));
    }
    out
}

// ---------------------------------------------------------------------------
// Configurations.

#[derive(Debug, Clone, PartialEq)]
pub enum Points {
    OneD(Vec<f64>),
    TwoD(Vec<Point2>),
}

/// Labeling convention of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOrder {
    /// Strictly increasing coordinates (1D only).
    AscendingValue,
    /// Nondecreasing distance to the origin.
    AscendingModulus,
    /// Labels inherited from an earlier configuration; no ordering constraint.
    Tracked,
}

pub fn modulus(p: Point2) -> f64 {
    p[0].hypot(p[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    points: Points,
    order: LabelOrder,
}

impl LabeledState {
    /// 1D state in ascending order; fails if not strictly increasing.
    pub fn one_d(points: Vec<f64>) -> Result<Self> {
        let s = Self {
            points: Points::OneD(points),
            order: LabelOrder::AscendingValue,
        };
        s.check()?;
        Ok(s)
    }

    /// Sorts then builds an ascending 1D state. Coincident points are an error.
    pub fn sorted_1d(mut points: Vec<f64>) -> Result<Self> {
        points.sort_by(f64::total_cmp);
        Self::one_d(points)
    }

    pub fn two_d(points: Vec<Point2>, order: LabelOrder) -> Result<Self> {
        if order == LabelOrder::AscendingValue {
            return Err(Error::InvalidArgument(
                "ascending-value labels are only defined in 1D".into(),
            ));
        }
        let s = Self {
            points: Points::TwoD(points),
            order,
        };
        s.check()?;
        Ok(s)
    }

    /// Sorts by modulus (stable) and labels accordingly.
    pub fn sorted_by_modulus_2d(mut points: Vec<Point2>) -> Self {
        points.sort_by(|a, b| modulus(*a).total_cmp(&modulus(*b)));
        Self {
            points: Points::TwoD(points),
            order: LabelOrder::AscendingModulus,
        }
    }

    pub fn empty(dimension: Dimension) -> Self {
        match dimension {
            Dimension::OneD => Self {
                points: Points::OneD(Vec::new()),
                order: LabelOrder::AscendingValue,
            },
            Dimension::TwoD => Self {
                points: Points::TwoD(Vec::new()),
                order: LabelOrder::AscendingModulus,
            },
        }
    }

    /// Relabels by ascending modulus. Works in both dimensions.
    pub fn to_ascending_modulus(&self) -> Self {
        match &self.points {
            Points::OneD(p) => {
                let mut p = p.clone();
                p.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
                Self {
                    points: Points::OneD(p),
                    order: LabelOrder::AscendingModulus,
                }
            }
            Points::TwoD(p) => Self::sorted_by_modulus_2d(p.clone()),
        }
    }

    /// Relabels a 1D state by ascending value.
    pub fn to_ascending_value(&self) -> Result<Self> {
        match &self.points {
            Points::OneD(p) => Self::sorted_1d(p.clone()),
            Points::TwoD(_) => Err(Error::DimensionMismatch {
                expected: "1D",
                got: "2D",
            }),
        }
    }

    /// Drops the ordering constraint, keeping the current labels.
    pub fn into_tracked(self) -> Self {
        Self {
            order: LabelOrder::Tracked,
            ..self
        }
    }

    pub fn check(&self) -> Result<()> {
        match (&self.points, self.order) {
            (Points::OneD(p), LabelOrder::AscendingValue) => {
                for (i, w) in p.windows(2).enumerate() {
                    if !(w[0] < w[1]) {
                        return Err(Error::Ordering(i));
                    }
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite coordinate".into()));
                }
            }
            (Points::OneD(p), LabelOrder::AscendingModulus) => {
                for (i, w) in p.windows(2).enumerate() {
                    if !(w[0].abs() <= w[1].abs()) {
                        return Err(Error::Ordering(i));
                    }
                }
            }
            (Points::TwoD(p), LabelOrder::AscendingModulus) => {
                for (i, w) in p.windows(2).enumerate() {
                    if !(modulus(w[0]) <= modulus(w[1])) {
                        return Err(Error::Ordering(i));
                    }
                }
            }
            (Points::TwoD(_), LabelOrder::AscendingValue) => {
                return Err(Error::InvalidArgument(
                    "ascending-value labels are only defined in 1D".into(),
                ))
            }
            (_, LabelOrder::Tracked) => {}
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(points: Points, order: LabelOrder) -> Self {
        Self { points, order }
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn order(&self) -> LabelOrder {
        self.order
    }

    pub fn dimension(&self) -> Dimension {
        match self.points {
            Points::OneD(_) => Dimension::OneD,
            Points::TwoD(_) => Dimension::TwoD,
        }
    }

    pub fn len(&self) -> usize {
        match &self.points {
            Points::OneD(p) => p.len(),
            Points::TwoD(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_1d(&self) -> Option<&[f64]> {
        match &self.points {
            Points::OneD(p) => Some(p),
            Points::TwoD(_) => None,
        }
    }

    pub fn as_2d(&self) -> Option<&[Point2]> {
        match &self.points {
            Points::TwoD(p) => Some(p),
            Points::OneD(_) => None,
        }
    }

    pub fn require_1d(&self) -> Result<&[f64]> {
        self.as_1d().ok_or(Error::DimensionMismatch {
            expected: "1D",
            got: "2D",
        })
    }

    pub fn require_2d(&self) -> Result<&[Point2]> {
        self.as_2d().ok_or(Error::DimensionMismatch {
            expected: "2D",
            got: "1D",
        })
    }

    /// Distance of each point to the origin, in label order.
    pub fn moduli(&self) -> Vec<f64> {
        match &self.points {
            Points::OneD(p) => p.iter().map(|x| x.abs()).collect(),
            Points::TwoD(p) => p.iter().map(|&z| modulus(z)).collect(),
        }
    }

    /// Coordinates flattened in label order (`x` in 1D, `x, y` pairs in 2D).
    pub fn flat_coordinates(&self) -> Vec<f64> {
        match &self.points {
            Points::OneD(p) => p.clone(),
            Points::TwoD(p) => p.iter().flat_map(|z| z.iter().copied()).collect(),
        }
    }
}

/// Recorded path of a windowed particle system.
///
/// `noise[k]` and `boundary_pushes[k]` hold, per flattened coordinate, the
/// summed Gaussian increments and reflection displacements applied between
/// frames `k` and `k + 1`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub times: Vec<f64>,
    pub states: Vec<LabeledState>,
    pub noise: Vec<Vec<f64>>,
    pub boundary_pushes: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn check(&self) -> Result<()> {
        if self.times.len() != self.states.len() || self.noise.len() + 1 != self.states.len() {
            return Err(Error::MissingData(format!(
                "{} times, {} states, {} noise records",
                self.times.len(),
                self.states.len(),
                self.noise.len()
            )));
        }
        if self.boundary_pushes.len() != self.noise.len() {
            return Err(Error::MissingData("boundary push records".into()));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("frame times must increase".into()));
        }
        for state in &self.states {
            state.check()?;
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.states.len()
    }
}

/// Seed and replica index from which all randomness of one run derives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunContext {
    pub seed: u64,
    pub replica_id: u64,
    /// Seconds since the Unix epoch; metadata only, never feeds computations.
    pub created: Option<u64>,
}

impl RunContext {
    pub fn new(seed: u64) -> Self {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        Self {
            seed,
            replica_id: 0,
            created,
        }
    }

    /// Context without a timestamp.
    pub fn fixed(seed: u64) -> Self {
        Self {
            seed,
            replica_id: 0,
            created: None,
        }
    }

    pub fn replica(&self, replica_id: u64) -> Self {
        Self {
            replica_id,
            ..*self
        }
    }

    /// ChaCha8 keyed by `seed`, on stream `seed XOR replica_id`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.seed ^ self.replica_id);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn gue_bulk() -> ModelSpec {
        ModelSpec::gaussian_bulk(100, 2.0, 0.0, Window::Finite(10.0))
    }

    #[test]
    fn valid_spec_passes() {
        assert_eq!(validate_spec(&gue_bulk()), Ok(()));
    }

    #[test]
    fn zero_beta_rejected() {
        let spec = ModelSpec {
            beta: 0.0,
            ..gue_bulk()
        };
        let err = validate_spec(&spec).unwrap_err();
        assert!(err.contains(&"beta must be positive".to_string()));
    }

    #[test]
    fn theta_outside_support_rejected() {
        // 2 − 1.5² < 0
        let spec = ModelSpec {
            theta: 1.5,
            ..gue_bulk()
        };
        let err = validate_spec(&spec).unwrap_err();
        assert_eq!(err, vec!["equilibrium density nonpositive at theta".to_string()]);
    }

    #[test]
    fn bulk_needs_density_for_general_potential() {
        let spec = ModelSpec {
            potential: PolynomialPotential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            ..gue_bulk()
        };
        assert!(validate_spec(&spec).is_err());
        let spec = ModelSpec {
            rho_theta: Some(0.3),
            ..spec
        };
        assert_eq!(validate_spec(&spec), Ok(()));
    }

    #[test]
    fn ginibre_params_checked() {
        let mut spec = ModelSpec::ginibre(10, Window::Infinite);
        spec.ginibre = Some(GinibreParams {
            omega: 1.0,
            gamma: -1.0,
            ..Default::default()
        });
        assert_eq!(validate_spec(&spec).unwrap_err().len(), 2);
    }

    #[test]
    fn validation_does_not_mutate() {
        let spec = gue_bulk();
        let copy = spec.clone();
        let _ = validate_spec(&spec);
        assert_eq!(spec, copy);
    }

    #[test]
    fn spec_text_parses() {
        let text = "# gue\ndimension = 1\nbeta = 2\nV = [0, 0, 1]  # x^2\ntheta = 0\nN = 100\nr = 10\nscaling = bulk\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec, gue_bulk());
        assert_eq!(parse_spec(&print_spec(&spec)).unwrap(), spec);
    }

    #[test]
    fn spec_overrides_apply_before_validation() {
        let text = print_spec(&gue_bulk());
        let overrides = vec![
            ("beta".to_string(), "0".to_string()),
            ("T".to_string(), "0.5".to_string()),
        ];
        let (spec, rest) = parse_spec_with_overrides(&text, &overrides).unwrap();
        assert_eq!(spec.beta, 0.0);
        assert_eq!(rest, vec![("T".to_string(), "0.5".to_string())]);
        assert!(validate_spec(&spec).is_err());
    }

    #[test]
    fn spec_parse_errors() {
        assert!(matches!(parse_spec("dimension = 1\nbeta = 2\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_spec("dimension = 1\nbeta = 2\nN = 3\ncolour = red\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(parse_spec("dimension = 1\nbeta = two\nN = 3\n").is_err());
    }

    #[test]
    fn labeled_state_invariants() {
        assert!(LabeledState::one_d(vec![0.0, 1.0, 2.0]).is_ok());
        assert!(matches!(LabeledState::one_d(vec![0.0, 0.0]), Err(Error::Ordering(0))));
        assert!(LabeledState::sorted_1d(vec![2.0, -1.0, 0.5]).is_ok());
        let s = LabeledState::sorted_by_modulus_2d(vec![[2.0, 0.0], [0.0, 1.0], [0.1, 0.1]]);
        assert!(s.check().is_ok());
        assert_eq!(s.as_2d().unwrap()[0], [0.1, 0.1]);
        assert!(LabeledState::two_d(vec![[2.0, 0.0], [0.0, 1.0]], LabelOrder::AscendingModulus).is_err());
        assert!(LabeledState::two_d(vec![[2.0, 0.0], [0.0, 1.0]], LabelOrder::Tracked).is_ok());
        let m = LabeledState::one_d(vec![-3.0, 0.5, 1.0]).unwrap().to_ascending_modulus();
        assert_eq!(m.as_1d().unwrap(), &[0.5, 1.0, -3.0]);
    }

    #[test]
    fn replica_streams_are_reproducible_and_distinct() {
        let ctx = RunContext::fixed(42);
        let a: Vec<u64> = (0..4).map(|_| ctx.replica(3).rng().random()).collect();
        let b: Vec<u64> = (0..4).map(|_| ctx.replica(3).rng().random()).collect();
        assert_eq!(a, b);
        let x: u64 = ctx.replica(1).rng().random();
        let y: u64 = ctx.replica(2).rng().random();
        assert_ne!(x, y);
    }

    fn arb_spec() -> impl Strategy<Value = ModelSpec> {
        (
            prop_oneof![Just(Dimension::OneD), Just(Dimension::TwoD)],
            0.1f64..8.0,
            proptest::collection::vec(-3.0f64..3.0, 0..3),
            -1.0f64..1.0,
            1usize..2000,
            prop_oneof![Just(Window::Infinite), (0.5f64..50.0).prop_map(Window::Finite)],
            proptest::option::of(0.01f64..1.0),
            proptest::option::of((0.0f64..3.0, 0.0f64..0.99, -2.0f64..2.0, 0.1f64..3.0)),
        )
            .prop_map(|(dimension, beta, mut v, theta, n, window, rho, g)| {
                if !v.is_empty() {
                    if v.len() % 2 == 0 {
                        v.push(0.25);
                    }
                    let last = v.len() - 1;
                    v[last] = v[last].abs() + 0.1;
                }
                ModelSpec {
                    dimension,
                    beta,
                    potential: PolynomialPotential::new(v).unwrap(),
                    theta,
                    n_particles: n,
                    window,
                    scaling: if rho.is_some() { Scaling::Bulk } else { Scaling::Raw },
                    rho_theta: rho,
                    ginibre: g.map(|(gamma, omega, k_p, c_scale)| GinibreParams {
                        gamma,
                        omega,
                        k_p,
                        c_scale,
                        zeta: [0.5 * k_p, -0.25],
                    }),
                }
            })
    }

    proptest! {
        #[test]
        fn spec_print_parse_round_trip(spec in arb_spec()) {
            let text = print_spec(&spec);
            let back = parse_spec(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(print_spec(&back), text);
        }
    }
}
