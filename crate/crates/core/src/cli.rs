//! Command-line surface: argument parsing and dispatch to samplers,
//! dynamics, estimators and experiments.
//!
//! Exit codes: 0 on success, 1 when an experiment (or a listed report) did
//! not pass, 2 on usage, I/O or specification errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use crate::drift::{OnePointModel, TruncationMode, GINIBRE_DENSITY};
use crate::error::{Error, Result};
use crate::estimators::{estimate_rho2_gap, estimate_rho_k, uniform_bins};
use crate::harness::{
    ginibre_equilibrium_samples, run_bulk_universality, run_ginibre_dynamics, run_ginibre_static, run_invariance_principle,
    run_semicircle, run_tightness, substream, ExperimentReport, GinibreDynamicsSetup, GinibreMode, InvarianceSetup, OutsideDensity,
};
use crate::integrator::{simulate, write_noise_csv, write_trajectory_jsonl, IntegratorSettings};
use crate::model::{parse_spec_with_overrides, Dimension, ModelSpec, RunContext};
use crate::samplers::{
    mcmc_sample, poisson_init, read_samples_csv, target_for_spec, tridiagonal_gaussian_beta_sample, write_samples_csv,
    McmcSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Sample,
    Simulate,
    Estimate,
    Experiment,
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "loggas", version, about = "Log-gas and Ginibre simulation toolkit")]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// Flat key = value model file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// `key=value`; spec keys replace file values, others are run parameters.
    #[arg(long = "override", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Omit runtime and creation time from reports.
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Draw equilibrium configurations into `samples.csv`.
    Sample(Common),
    /// Integrate the windowed dynamics into `trajectory.jsonl` and `noise.csv`.
    Simulate(Common),
    /// Estimate correlation functions of a sample file into `estimates.csv`.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a named experiment and write `reports/<name>-<seed>.txt`.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        name: String,
    },
    /// Print the summary table of existing report files or directories.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
}

fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected key=value, got `{s}`")),
    }
}

/// Validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliCommand {
    pub subcommand: Command,
    pub spec_path: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub overrides: Vec<(String, String)>,
    pub jobs: Option<usize>,
    pub no_timestamps: bool,
    pub name: Option<String>,
    pub inputs: Vec<PathBuf>,
}

/// Parses the argument vector (including the program name).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliCommand, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    let (subcommand, common, name, inputs) = match args.command {
        Sub::Sample(c) => (Command::Sample, Some(c), None, Vec::new()),
        Sub::Simulate(c) => (Command::Simulate, Some(c), None, Vec::new()),
        Sub::Estimate { common, input } => (Command::Estimate, Some(common), None, vec![input]),
        Sub::Experiment { common, name } => (Command::Experiment, Some(common), Some(name), Vec::new()),
        Sub::Report { input } => (Command::Report, None, None, input),
    };
    let common = common.unwrap_or(Common {
        spec: PathBuf::new(),
        seed: 0,
        out: PathBuf::from("."),
        overrides: Vec::new(),
        jobs: None,
        no_timestamps: false,
    });
    Ok(CliCommand {
        subcommand,
        spec_path: (subcommand != Command::Report).then_some(common.spec),
        seed: common.seed,
        out_dir: common.out,
        overrides: common.overrides,
        jobs: common.jobs,
        no_timestamps: common.no_timestamps,
        name,
        inputs,
    })
}

/// Runs the command and maps the outcome to an exit code. Diagnostics go to
/// standard error.
pub fn dispatch(cmd: &CliCommand) -> i32 {
    let threads = cmd.jobs.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run(cmd)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Run parameters left over after the spec keys were applied.
struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    fn new(rest: Vec<(String, String)>) -> Self {
        Self {
            map: rest.into_iter().collect(),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse `{key}` = `{v}`"))),
        }
    }

    fn text(&mut self, key: &str, default: &str) -> String {
        self.map.remove(key).unwrap_or_else(|| default.to_string())
    }

    fn list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.map.remove(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::InvalidArgument(format!("cannot parse `{key}` = `{v}`"))))
                .collect(),
        }
    }

    /// Unused parameters are errors, so typos do not pass silently.
    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::InvalidArgument(format!("unknown parameter `{k}`"))),
        }
    }
}

fn load_spec(cmd: &CliCommand) -> Result<(ModelSpec, Params)> {
    let path = cmd.spec_path.as_ref().ok_or(Error::InvalidArgument("--spec is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let (spec, rest) = parse_spec_with_overrides(&text, &cmd.overrides)?;
    Ok((spec, Params::new(rest)))
}

fn context(cmd: &CliCommand) -> RunContext {
    if cmd.no_timestamps {
        RunContext::fixed(cmd.seed)
    } else {
        RunContext::new(cmd.seed)
    }
}

fn file_error(path: &Path, source: std::io::Error) -> Error {
    Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn create_file(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir).map_err(|e| file_error(dir, e))?;
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| file_error(&path, e))
}

fn run(cmd: &CliCommand) -> Result<bool> {
    match cmd.subcommand {
        Command::Sample => sample(cmd).map(|_| true),
        Command::Simulate => simulate_cmd(cmd).map(|_| true),
        Command::Estimate => estimate(cmd).map(|_| true),
        Command::Experiment => experiment(cmd),
        Command::Report => report(cmd),
    }
}

fn equilibrium_samples(spec: &ModelSpec, params: &mut Params, ctx: &RunContext) -> Result<Vec<crate::model::LabeledState>> {
    let replicas: usize = params.get("replicas", 1)?;
    let classical = spec.beta == 1.0 || spec.beta == 2.0 || spec.beta == 4.0;
    let default = if spec.dimension == Dimension::OneD && spec.potential.is_quadratic() && classical {
        "tridiagonal"
    } else {
        "mcmc"
    };
    let sampler = params.text("sampler", default);
    let sweeps: usize = params.get("sweeps", 2000)?;
    let burn_in: usize = params.get("burn_in", 1000)?;
    let thinning: usize = params.get("thinning", 100)?;
    let mut out = Vec::new();
    for k in 0..replicas as u64 {
        let c = ctx.replica(k);
        match sampler.as_str() {
            "tridiagonal" => {
                if spec.dimension != Dimension::OneD {
                    return Err(Error::InvalidArgument("tridiagonal sampler is one-dimensional".into()));
                }
                let raw = tridiagonal_gaussian_beta_sample(spec.n_particles, spec.beta, &c)?;
                out.push(match spec.rho_at_theta() {
                    Some(rho) if spec.scaling == crate::model::Scaling::Bulk => {
                        crate::samplers::bulk_rescale(&raw, spec.n_particles, rho, spec.theta)?
                    }
                    _ => raw,
                });
            }
            "mcmc" => {
                let target = target_for_spec(spec)?;
                let settings = McmcSettings {
                    n_sweeps: sweeps,
                    burn_in,
                    proposal_scale: 0.3,
                    thinning,
                    adapt: true,
                };
                out.extend(mcmc_sample(target.as_ref(), &settings, &c)?.samples);
            }
            other => return Err(Error::InvalidArgument(format!("unknown sampler `{other}`"))),
        }
    }
    Ok(out)
}

fn sample(cmd: &CliCommand) -> Result<()> {
    let (spec, mut params) = load_spec(cmd)?;
    crate::model::ensure_valid(&spec)?;
    let ctx = context(cmd);
    let samples = equilibrium_samples(&spec, &mut params, &ctx)?;
    params.finish()?;
    write_samples_csv(&samples, create_file(&cmd.out_dir, "samples.csv")?)?;
    println!("wrote {} configurations to {}", samples.len(), cmd.out_dir.join("samples.csv").display());
    Ok(())
}

fn simulate_cmd(cmd: &CliCommand) -> Result<()> {
    let (spec, mut params) = load_spec(cmd)?;
    crate::model::ensure_valid(&spec)?;
    let r = spec
        .window
        .radius()
        .ok_or_else(|| Error::InvalidSpec("simulation needs a finite window `r`".into()))?;
    let ctx = context(cmd);
    let t: f64 = params.get("T", 1.0)?;
    let dt: f64 = params.get("dt", 1e-3)?;
    let stride: usize = params.get("record_stride", 1)?;
    let init = params.text("init", "equilibrium");
    let truncation = params.text("truncation", "full");
    let mode = match truncation.as_str() {
        "full" => TruncationMode::Full,
        "relative" => TruncationMode::RelativeDistance(params.get("cutoff", r)?),
        "absolute" => TruncationMode::AbsolutePosition(params.get("cutoff", r)?),
        other => return Err(Error::InvalidArgument(format!("unknown truncation `{other}`"))),
    };
    let rho1 = match spec.dimension {
        Dimension::TwoD => OnePointModel::ConstantOutside(params.get("outside_density", GINIBRE_DENSITY)?),
        Dimension::OneD => OnePointModel::ConstantOutside(params.get("outside_density", 1.0)?),
    };
    let initial = match init.as_str() {
        "equilibrium" => {
            let mut p = Params::new(vec![("replicas".into(), "1".into())]);
            let eq = equilibrium_samples(&spec, &mut p, &substream(&ctx, 1))?;
            let state = eq.into_iter().last().ok_or(Error::Empty("equilibrium sample"))?;
            restrict_to_window(&state, r)?
        }
        "poisson" => poisson_init(spec.window, params.get("intensity", 1.0)?, spec.dimension, &substream(&ctx, 1))?,
        other => return Err(Error::InvalidArgument(format!("unknown init `{other}`"))),
    };
    params.finish()?;
    let mut settings = IntegratorSettings::new(dt, t);
    settings.record_stride = stride;
    let traj = simulate(&spec, &settings, mode, &rho1, &initial, &ctx)?;
    write_trajectory_jsonl(&traj, std::io::BufWriter::new(create_file(&cmd.out_dir, "trajectory.jsonl")?))?;
    write_noise_csv(&traj, std::io::BufWriter::new(create_file(&cmd.out_dir, "noise.csv")?))?;
    println!("wrote {} frames of {} particles to {}", traj.frames(), initial.len(), cmd.out_dir.display());
    Ok(())
}

fn restrict_to_window(state: &crate::model::LabeledState, r: f64) -> Result<crate::model::LabeledState> {
    use crate::model::{LabelOrder, LabeledState};
    match state.dimension() {
        Dimension::OneD => LabeledState::one_d(state.require_1d()?.iter().copied().filter(|x| x.abs() < r).collect()),
        Dimension::TwoD => LabeledState::two_d(
            state.require_2d()?.iter().copied().filter(|z| z[0].hypot(z[1]) < r).collect(),
            LabelOrder::Tracked,
        ),
    }
}

fn estimate(cmd: &CliCommand) -> Result<()> {
    let (spec, mut params) = load_spec(cmd)?;
    let input = &cmd.inputs[0];
    let text = fs::read_to_string(input).map_err(|e| file_error(input, e))?;
    let samples = read_samples_csv(&text)?;
    let kind = params.text("estimator", "rho2_gap");
    let n_bins: usize = params.get("bins", 30)?;
    let default_half = spec.window.radius().unwrap_or(1.0);
    let estimate = match kind.as_str() {
        "rho2_gap" => {
            let lo: f64 = params.get("lo", 0.0)?;
            let hi: f64 = params.get("hi", 3.0)?;
            let half: f64 = params.get("window_halfwidth", default_half)?;
            estimate_rho2_gap(&samples, &uniform_bins(lo, hi, n_bins), half)?
        }
        "rho_k" => {
            let k: usize = params.get("k", 1)?;
            let lo: f64 = params.get("lo", -default_half)?;
            let hi: f64 = params.get("hi", default_half)?;
            estimate_rho_k(&samples, k, &uniform_bins(lo, hi, n_bins))?
        }
        other => return Err(Error::InvalidArgument(format!("unknown estimator `{other}`"))),
    };
    params.finish()?;
    estimate.write_csv(create_file(&cmd.out_dir, "estimates.csv")?)?;
    println!("wrote {} bins to {}", estimate.values.len(), cmd.out_dir.join("estimates.csv").display());
    Ok(())
}

fn experiment(cmd: &CliCommand) -> Result<bool> {
    let (spec, mut params) = load_spec(cmd)?;
    crate::model::ensure_valid(&spec)?;
    let ctx = context(cmd);
    let name = cmd.name.as_deref().unwrap_or("");
    let report = match name {
        "semicircle" => {
            let replicas = params.get("replicas", 50)?;
            params.finish()?;
            run_semicircle(spec.n_particles, spec.beta, replicas, &ctx)?
        }
        "bulk" => {
            let replicas = params.get("replicas", 200)?;
            let half = params.get("window_halfwidth", spec.window.radius().unwrap_or(40.0))?;
            params.finish()?;
            run_bulk_universality(spec.n_particles, replicas, half, &ctx)?
        }
        "invariance" => {
            let mut setup = InvarianceSetup::new(spec, params.get("T", 1.0)?, params.get("dt", 1e-4)?, params.get("replicas", 500)?);
            setup.outside = OutsideDensity::parse(&params.text("outside_density", "constant"))?;
            setup.include_constant = params.get("include_constant", true)?;
            params.finish()?;
            run_invariance_principle(&setup, &ctx)?
        }
        "ginibre-static" => {
            let replicas = params.get("replicas", 100)?;
            let mode = match (params.text("mode", "auto").as_str(), spec.ginibre) {
                ("poisson", _) => GinibreMode::PoissonControl,
                ("auto", Some(p)) | ("strong_nonhermitian", Some(p)) => GinibreMode::StrongNonHermitian(p),
                ("auto", None) | ("plain", _) => GinibreMode::Plain,
                (other, _) => return Err(Error::InvalidArgument(format!("unknown or incomplete ginibre mode `{other}`"))),
            };
            params.finish()?;
            run_ginibre_static(spec.n_particles, replicas, mode, &ctx)?
        }
        "ginibre-dynamics" => {
            let setup = GinibreDynamicsSetup {
                n: spec.n_particles,
                r: spec.window.radius().unwrap_or(4.0),
                t: params.get("T", 0.5)?,
                dt: params.get("dt", 1e-3)?,
                replicas: params.get("replicas", 200)?,
                equilibrium_start: params.text("start", "equilibrium") == "equilibrium",
            };
            params.finish()?;
            run_ginibre_dynamics(&setup, &ctx)?
        }
        "tightness" => {
            let r = spec.window.radius().unwrap_or(3.0);
            let t = params.get("T", 1.0)?;
            let replicas = params.get("replicas", 10)?;
            let l_grid = params.list("l", &[1, 10, 50, spec.n_particles])?;
            params.finish()?;
            let samples = ginibre_equilibrium_samples(spec.n_particles, replicas, 5, &ctx)?;
            run_tightness(&samples, r, t, &l_grid, &ctx)?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown experiment `{other}` (semicircle, bulk, invariance, ginibre-static, ginibre-dynamics, tightness)"
            )))
        }
    };
    let dir = cmd.out_dir.join("reports");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(report.file_name()), report.to_text(!cmd.no_timestamps))?;
    println!("{}", report.summary_line());
    Ok(report.passed)
}

fn report(cmd: &CliCommand) -> Result<bool> {
    let mut files = Vec::new();
    for input in &cmd.inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| file_error(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Empty("report files"));
    }
    let mut all = true;
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| file_error(&f, e))?;
        let r = ExperimentReport::from_text(&text)?;
        all &= r.passed;
        println!("{}", r.summary_line());
    }
    Ok(all)
}
