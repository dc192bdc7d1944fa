//! Acceptance suite. Runs as a plain binary (`harness = false`) so that the
//! one-line verdict of every criterion is always printed; exits nonzero if
//! any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use loggas::drift::{interaction_drift_1d, interaction_drift_2d, tail_compensation_1d, tail_compensation_2d, OnePointModel, TruncationMode};
use loggas::estimators::reflected_bm_max_cdf;
use loggas::harness::{
    run_bulk_universality, run_ginibre_static, run_invariance_principle, run_semicircle, ExperimentReport, GinibreMode, InvarianceSetup,
    OutsideDensity,
};
use loggas::integrator::em_step;
use loggas::model::{LabelOrder, LabeledState, ModelSpec, RunContext, Window};
use loggas::potentials::{scaled_potential_drift, semicircle_density, v_beta, PolynomialPotential};
use loggas::samplers::{log_acceptance, log_flow, mcmc_sample, tridiagonal_gaussian_beta_sample, LogGasTarget, LogTarget, McmcSettings};
use loggas::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Verdict = Result<(bool, String)>;

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

fn stat(r: &ExperimentReport, key: &str) -> f64 {
    r.statistics.get(key).copied().unwrap_or(f64::NAN)
}

// -- criteria 1-4: statistical reproduction -------------------------------

const SEED_SEMICIRCLE: u64 = 101;
const SEED_BULK: u64 = 202;
const SEED_INVARIANCE: u64 = 303;
const SEED_GINIBRE: u64 = 404;

fn semicircle_reports() -> Result<Vec<ExperimentReport>> {
    let single = pool(1);
    single.install(|| {
        Ok(vec![
            run_semicircle(500, 2.0, 50, &RunContext::fixed(SEED_SEMICIRCLE))?,
            run_semicircle(500, 1.0, 50, &RunContext::fixed(SEED_SEMICIRCLE))?,
        ])
    })
}

fn criterion_1(reports: &[ExperimentReport]) -> Verdict {
    let (b2, b1) = (&reports[0], &reports[1]);
    let control = run_semicircle(1, 2.0, 50, &RunContext::fixed(SEED_SEMICIRCLE))?;
    let ok = b2.passed && stat(b2, "ks") <= 0.02 && b2.runtime_seconds < 60.0 && b1.passed && stat(b1, "ks") <= 0.03 && !control.passed;
    Ok((
        ok,
        format!(
            "KS(β=2)={:.5} ≤ 0.02 in {:.2}s single-threaded (< 60s); KS(β=1)={:.5} ≤ 0.03; N=1 control KS={:.4} rejected={}",
            stat(b2, "ks"),
            b2.runtime_seconds,
            stat(b1, "ks"),
            stat(&control, "ks"),
            !control.passed
        ),
    ))
}

fn bulk_report() -> Result<ExperimentReport> {
    pool(4).install(|| run_bulk_universality(1000, 200, 40.0, &RunContext::fixed(SEED_BULK)))
}

fn criterion_2(report: &ExperimentReport) -> Verdict {
    let control = run_bulk_universality(50, 200, 5.0, &RunContext::fixed(SEED_BULK))?;
    let dev = stat(report, "max_deviation");
    let ok = report.passed && dev <= 0.1 && report.runtime_seconds < 600.0 && !control.passed;
    Ok((
        ok,
        format!(
            "max|ρ̂²−sine|={dev:.4} ≤ 0.1 over s∈[0.2,3], bin 0.1, in {:.1}s with 4 workers (< 600s); large-gap mean {:.3}; N=50 control rejected={}",
            report.runtime_seconds,
            stat(report, "large_gap_mean"),
            !control.passed
        ),
    ))
}

fn invariance_setup(theta: f64) -> InvarianceSetup {
    let spec = ModelSpec::gaussian_bulk(50, 2.0, theta, Window::Finite(6.0));
    let mut setup = InvarianceSetup::new(spec, 1.0, 1e-4, 500);
    setup.outside = OutsideDensity::Semicircle;
    setup
}

fn invariance_reports() -> Result<Vec<ExperimentReport>> {
    [0.0, 1.0]
        .iter()
        .map(|&theta| run_invariance_principle(&invariance_setup(theta), &RunContext::fixed(SEED_INVARIANCE)))
        .collect()
}

fn criterion_3(reports: &[ExperimentReport]) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (theta, r) in [0.0f64, 1.0].iter().zip(reports) {
        let ks = stat(r, "ks");
        let residual = stat(r, "reconstruction_residual");
        let c_expected = PI * theta / (2.0 - theta * theta).sqrt();
        let c_err = (stat(r, "c_beta") - c_expected).abs();
        ok &= r.passed && ks <= 0.05 && residual <= 1e-8 && c_err <= 1e-12;
        detail.push(format!("θ={theta}: KS={ks:.4} ≤ 0.05, residual={residual:.1e} ≤ 1e-8, |C−πθ/√(2−θ²)|={c_err:.0e}"));
    }
    // Dropping C(β)t at θ = 1 must be detected.
    let mut control = invariance_setup(1.0);
    control.include_constant = false;
    control.replicas = 100;
    let control = run_invariance_principle(&control, &RunContext::fixed(SEED_INVARIANCE))?;
    ok &= !control.passed;
    detail.push(format!("no-C control KS={:.3} rejected={}", stat(&control, "ks"), !control.passed));
    Ok((ok, detail.join("; ")))
}

fn ginibre_report() -> Result<ExperimentReport> {
    run_ginibre_static(100, 100, GinibreMode::Plain, &RunContext::fixed(SEED_GINIBRE))
}

fn criterion_4(report: &ExperimentReport) -> Verdict {
    let control = run_ginibre_static(100, 100, GinibreMode::PoissonControl, &RunContext::fixed(SEED_GINIBRE))?;
    let e1 = stat(report, "rho1_relative_error");
    let e2 = stat(report, "rho2_ratio_max_deviation");
    let ok = report.passed && e1 <= 0.1 && e2 <= 0.15 && !control.passed;
    Ok((
        ok,
        format!(
            "|πρ̂¹−1|={e1:.4} ≤ 0.1; max|ρ̂²/ρ̂¹²−(1−e^(−s²))|={e2:.4} ≤ 0.15 on s∈[0.3,2.5]; Poisson control deviation {:.3} rejected={}",
            stat(&control, "rho2_ratio_max_deviation"),
            !control.passed
        ),
    ))
}

// -- criterion 5: exact properties ----------------------------------------

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn antisymmetry(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let state = LabeledState::sorted_1d(pts)?;
        let beta = [1.0, 2.0, 4.0][rng.random_range(0..3)];
        let sum: f64 = (0..n)
            .map(|i| interaction_drift_1d(i, &state, beta, TruncationMode::Full))
            .sum::<Result<f64>>()?;
        worst = worst.max(sum.abs());

        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
        let state = LabeledState::two_d(pts, LabelOrder::Tracked)?;
        let mut total = [0.0, 0.0];
        for i in 0..n {
            let d = interaction_drift_2d(i, &state, TruncationMode::Full)?;
            total[0] += d[0];
            total[1] += d[1];
        }
        worst = worst.max(total[0].hypot(total[1]));
    }
    Ok(worst)
}

/// Outside particles at constant density `c`: `(β/2) c ∫_{|y|>r} dy/(x − y)`,
/// folded onto `y > r` and mapped to `(0, 1]` by `y = r/u`.
fn tail_1d_error(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.random_range(1.0..20.0);
        let x = r * rng.random_range(-0.95..0.95);
        let beta = [1.0, 2.0, 4.0][rng.random_range(0..3)];
        let c = rng.random_range(0.1..2.0);
        let integrand = |u: f64| 2.0 * x * r / (x * x * u * u - r * r);
        let oracle = 0.5 * beta * c * simpson(&integrand, 0.0, 1.0, 1e-12);
        let got = tail_compensation_1d(x, r, beta, &OnePointModel::ConstantOutside(c))?;
        worst = worst.max((got - oracle).abs());
    }
    Ok(worst)
}

/// Planar field of a uniform annulus `r < |y| < 3r` at a point inside the
/// hole: trapezoid rule in angle, Simpson in radius.
fn tail_2d_error(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let r = rng.random_range(1.0..8.0);
        let rad = r * rng.random_range(0.0..0.9);
        let phi = rng.random_range(0.0..2.0 * PI);
        let x = [rad * phi.cos(), rad * phi.sin()];
        let c = 1.0 / PI;
        let (m, k) = (512usize, 200usize);
        let ring = |s: f64| {
            let mut acc = [0.0, 0.0];
            for j in 0..m {
                let a = 2.0 * PI * j as f64 / m as f64;
                let (dx, dy) = (x[0] - s * a.cos(), x[1] - s * a.sin());
                let d2 = dx * dx + dy * dy;
                acc[0] += dx / d2;
                acc[1] += dy / d2;
            }
            let w = 2.0 * PI / m as f64 * s * c;
            [acc[0] * w, acc[1] * w]
        };
        let h = 2.0 * r / k as f64;
        let mut field = [0.0, 0.0];
        for i in 0..=k {
            let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let v = ring(r + i as f64 * h);
            field[0] += w * h / 3.0 * v[0];
            field[1] += w * h / 3.0 * v[1];
        }
        let got = tail_compensation_2d(x, r, &OnePointModel::ConstantOutside(c))?;
        worst = worst.max((got[0] - field[0]).hypot(got[1] - field[1]));
        if got != [0.0, 0.0] {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

fn potential_drift_error(rng: &mut ChaCha8Rng) -> Result<f64> {
    let v = PolynomialPotential::quadratic();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(10..10_000usize);
        let theta = rng.random_range(-1.3..1.3);
        let x = rng.random_range(-20.0..20.0);
        let rho = semicircle_density(theta);
        let closed = -PI * PI * x / (n as f64 * (2.0 - theta * theta)) - PI * theta / (2.0 - theta * theta).sqrt();
        let got = scaled_potential_drift(&v, 2.0, n, theta, rho, x)?;
        worst = worst.max((got - closed).abs());
    }
    Ok(worst)
}

fn v_beta_table() -> Result<bool> {
    let v = PolynomialPotential::quadratic();
    Ok(v_beta(&v, 1.0)?.coefficients() == [0.0, 0.0, 1.0]
        && v_beta(&v, 2.0)?.coefficients() == [0.0, 0.0, 1.0]
        && v_beta(&v, 4.0)?.coefficients() == [0.0, 0.0, 2.0]
        && v_beta(&v, 3.0).is_err())
}

/// Ten bulk particles in a window of radius 6 for 10⁶ steps of 1e-4.
fn ordering_violations() -> Result<(usize, u64)> {
    let spec = ModelSpec::gaussian_bulk(10, 2.0, 0.0, Window::Finite(6.0));
    let rho1 = OnePointModel::ConstantOutside(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut state = LabeledState::one_d((0..10).map(|k| -4.5 + k as f64).collect())?;
    let mut violations = 0;
    let mut substeps = 0u64;
    for _ in 0..1_000_000 {
        let step = em_step(&state, 1e-4, &spec, TruncationMode::Full, &rho1, &mut rng)?;
        let x = step.state.require_1d()?;
        violations += x.windows(2).filter(|w| !(w[0] < w[1])).count();
        violations += x.iter().filter(|v| v.abs() >= 6.0).count();
        substeps += step.substeps as u64;
        state = step.state;
    }
    Ok((violations, substeps))
}

fn detailed_balance(rng: &mut ChaCha8Rng) -> Result<bool> {
    let target = LogGasTarget::new(&ModelSpec::gaussian_raw(12, 2.0))?;
    let mut ok = true;
    for _ in 0..100_000 {
        let a: Vec<f64> = (0..12).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut b = a.clone();
        b[rng.random_range(0..12)] += rng.random_range(-0.3..0.3);
        let (la, lb) = (target.log_density(&a), target.log_density(&b));
        ok &= log_flow(la, lb).to_bits() == log_flow(lb, la).to_bits();
        ok &= log_acceptance(la, lb) <= 0.0 && log_acceptance(lb, la) <= 0.0;
        ok &= (la + log_acceptance(la, lb) - log_flow(la, lb)).abs() <= 1e-12 * (1.0 + la.abs());
    }
    Ok(ok)
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let anti = antisymmetry(&mut rng)?;
    let t1 = tail_1d_error(&mut rng)?;
    let t2 = tail_2d_error(&mut rng)?;
    let pd = potential_drift_error(&mut rng)?;
    let table = v_beta_table()?;
    let (violations, substeps) = ordering_violations()?;
    let balance = detailed_balance(&mut rng)?;
    let ok = anti <= 1e-9 && t1 <= 1e-6 && t2 <= 1e-5 && pd <= 1e-12 && table && violations == 0 && balance;
    Ok((
        ok,
        format!(
            "antisymmetry {anti:.1e} ≤ 1e-9; 1D tail {t1:.1e} ≤ 1e-6; 2D tail {t2:.1e} ≤ 1e-5; potential drift {pd:.1e} ≤ 1e-12; \
             v_beta table {table}; ordering violations {violations} over 10^6 steps ({substeps} substeps); detailed balance {balance}"
        ),
    ))
}

// -- criterion 6: oracle cross-checks -------------------------------------

/// Mean and standard error of per-unit values.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn moments(state: &LabeledState) -> [f64; 4] {
    let x = state.as_1d().expect("1D");
    let n = x.len() as f64;
    let mut m = [0.0; 4];
    for v in x {
        let mut p = 1.0;
        for mk in m.iter_mut() {
            p *= v;
            *mk += p / n;
        }
    }
    m
}

fn moment_agreement() -> Result<Vec<(f64, f64)>> {
    let n = 50;
    let tri: Vec<[f64; 4]> = (0..2000)
        .map(|k| tridiagonal_gaussian_beta_sample(n, 2.0, &RunContext::fixed(61).replica(k)).map(|s| moments(&s)))
        .collect::<Result<_>>()?;
    let target = LogGasTarget::new(&ModelSpec::gaussian_raw(n, 2.0))?;
    let settings = McmcSettings {
        n_sweeps: 500 + 25 * 50,
        burn_in: 500,
        proposal_scale: 0.05,
        thinning: 25,
        adapt: true,
    };
    // Chains are the independent units for the Metropolis standard error.
    let chains: Vec<[f64; 4]> = (0..40)
        .map(|k| {
            let run = mcmc_sample(&target, &settings, &RunContext::fixed(62).replica(k))?;
            let mut m = [0.0; 4];
            for s in &run.samples {
                for (acc, v) in m.iter_mut().zip(moments(s)) {
                    *acc += v / run.samples.len() as f64;
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    Ok((0..4)
        .map(|k| {
            let (a, sa) = mean_se(&tri.iter().map(|m| m[k]).collect::<Vec<_>>());
            let (b, sb) = mean_se(&chains.iter().map(|m| m[k]).collect::<Vec<_>>());
            ((a - b).abs(), sa.hypot(sb))
        })
        .collect())
}

/// Running maximum of 10⁶ Brownian paths on a 10-step grid, each step's
/// maximum drawn exactly from the Brownian-bridge law.
fn brownian_max_errors() -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let (paths, steps, t) = (1_000_000, 10, 1.0);
    let h = t / steps as f64;
    let levels = [0.5, 1.0, 2.0];
    let mut below = [0usize; 3];
    for _ in 0..paths {
        let (mut b, mut max) = (0.0f64, 0.0f64);
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            let next = b + h.sqrt() * z;
            let u: f64 = 1.0 - rng.random::<f64>();
            let bridge = 0.5 * (b + next + ((next - b).powi(2) - 2.0 * h * u.ln()).sqrt());
            max = max.max(bridge);
            b = next;
        }
        for (k, a) in levels.iter().enumerate() {
            below[k] += (max <= *a) as usize;
        }
    }
    levels
        .iter()
        .zip(below)
        .map(|(&a, c)| (a, (c as f64 / paths as f64 - reflected_bm_max_cdf(a, t)).abs()))
        .collect()
}

fn criterion_6() -> Verdict {
    let moments = moment_agreement()?;
    let bm = brownian_max_errors();
    let ok = moments.iter().all(|(d, se)| *d <= 4.0 * se) && bm.iter().all(|(_, e)| *e <= 0.005);
    let m: Vec<String> = moments.iter().enumerate().map(|(k, (d, se))| format!("m{}: {:.2}σ", k + 1, d / se)).collect();
    let b: Vec<String> = bm.iter().map(|(a, e)| format!("a={a}: {e:.4}")).collect();
    Ok((
        ok,
        format!("Metropolis vs tridiagonal moments [{}] ≤ 4σ; max-of-BM CDF error [{}] ≤ 0.005", m.join(", "), b.join(", ")),
    ))
}

// -- criterion 7: determinism ----------------------------------------------

fn criterion_7(first: &[ExperimentReport]) -> Verdict {
    let mut second = semicircle_reports()?;
    second.push(bulk_report()?);
    second.extend(invariance_reports()?);
    second.push(ginibre_report()?);
    let same = first.len() == second.len() && first.iter().zip(&second).all(|(a, b)| a.to_text(false) == b.to_text(false));
    Ok((same, format!("{} reports from criteria 1-4 byte-identical on rerun: {same}", first.len())))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut verdicts: Vec<(usize, Verdict)> = Vec::new();
    let mut reports = Vec::new();

    let mut record = |k: usize, v: Verdict| {
        let (mark, detail) = match &v {
            Ok((true, d)) => ("PASS", d.clone()),
            Ok((false, d)) => ("FAIL", d.clone()),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        println!("criterion {k}: {mark} — {detail}");
        verdicts.push((k, v));
    };

    match semicircle_reports() {
        Ok(r) => {
            record(1, criterion_1(&r));
            reports.extend(r);
        }
        Err(e) => record(1, Err(e)),
    }
    match bulk_report() {
        Ok(r) => {
            record(2, criterion_2(&r));
            reports.push(r);
        }
        Err(e) => record(2, Err(e)),
    }
    match invariance_reports() {
        Ok(r) => {
            record(3, criterion_3(&r));
            reports.extend(r);
        }
        Err(e) => record(3, Err(e)),
    }
    match ginibre_report() {
        Ok(r) => {
            record(4, criterion_4(&r));
            reports.push(r);
        }
        Err(e) => record(4, Err(e)),
    }
    record(5, criterion_5());
    record(6, criterion_6());
    record(7, criterion_7(&reports));

    let failed = verdicts.iter().filter(|(_, v)| !matches!(v, Ok((true, _)))).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

