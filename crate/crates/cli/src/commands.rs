//! The pipelines behind each subcommand. Each writes its data files into the
//! output directory and returns a one-line summary plus the derived
//! parameters recorded in the manifest.

use std::path::Path;

use mscale::connectivity::PercolationCriterion;
use mscale::dynamics::{simulate_khop_replications, simulate_percolation_replications};
use mscale::estimators::{
    estimate_lambda_c, estimate_stretch_factor, estimate_theta_m, phase_intensity_profile, Estimate,
};
use mscale::limits::{
    dense_limit_constant, sample_critical_profile, sample_sparse_limits, SinkLimitParams, Theorem2Sampler,
};
use mscale::measure::{MeasureSample, TestFunction, TimeGrid};
use mscale::selfcheck::run_connectivity_suites;
use mscale::stats::{ks_distance, wasserstein1, EmpiricalDistribution};
use mscale::RngStream;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::output::{num, read_pairings, OutputDir, DISTANCES_HEADER};
use crate::CliError;

pub struct Outcome {
    pub summary: String,
    pub derived: Map<String, Value>,
}

impl Outcome {
    fn new(summary: String) -> Self {
        Self {
            summary,
            derived: Map::new(),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.derived.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LimitKind {
    Theorem2,
    Dense,
    Sparse,
    Critical,
}

fn fmt_estimate(e: &Estimate) -> String {
    format!("{:.4} ± {:.4} (n = {})", e.value, e.std_error, e.n_samples)
}

pub fn estimate_theta(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let params = cfg.percolation()?;
    let est = estimate_theta_m(&params, cfg.mc.n, root)?;
    out.estimates(&[("theta_m".into(), est)])?;
    Ok(Outcome::new(format!("theta_m = {}", fmt_estimate(&est)))
        .with("window_side", json!(params.criterion().window_side())))
}

pub fn estimate_lambda_c_cmd(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let opts = cfg.lambda_c();
    let b = estimate_lambda_c(cfg.model.r, &cfg.geometry.m_schedule, cfg.mc.lambda_c_tol, &opts, root)?;
    let n = opts.n;
    let mut rows = vec![
        ("lambda_c_lower".to_string(), Estimate::new(b.lower, 0.0, n)),
        ("lambda_c_upper".to_string(), Estimate::new(b.upper, 0.0, n)),
    ];
    for &(m, lo, hi) in &b.per_m {
        rows.push((format!("lambda_c_lower_m{m}"), Estimate::new(lo, 0.0, n)));
        rows.push((format!("lambda_c_upper_m{m}"), Estimate::new(hi, 0.0, n)));
    }
    out.estimates(&rows)?;
    let trace = b.trace.iter().map(|s| {
        vec![
            num(s.m),
            num(s.lambda),
            num(s.estimate.value),
            num(s.estimate.std_error),
            s.positive.to_string(),
        ]
    });
    out.csv("lambda_c_trace.csv", &["m", "lambda", "theta", "std_error", "positive"], trace)?;
    Ok(Outcome::new(format!("lambda_c in [{:.4}, {:.4}]", b.lower, b.upper))
        .with("m_schedule", json!(cfg.geometry.m_schedule))
        .with("bisection_steps", json!(b.trace.len())))
}

pub fn estimate_mu(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let s = estimate_stretch_factor(&cfg.stretch(), root)?;
    out.estimates(&[
        ("mu".into(), s.estimate),
        ("giant_fraction".into(), Estimate::new(s.giant_fraction, 0.0, 1)),
    ])?;
    let rows = (0..s.ratios.len()).map(|i| vec![i.to_string(), num(s.distances[i]), s.hops[i].to_string(), num(s.ratios[i])]);
    out.csv("stretch.csv", &["pair_id", "distance", "hops", "ratio"], rows)?;
    Ok(Outcome::new(format!("mu = {}", fmt_estimate(&s.estimate)))
        .with("band", json!(cfg.geometry.band))
        .with("window", json!(cfg.geometry.window)))
}

pub fn estimate_phase(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let times: Vec<f64> = grid.times().collect();
    let profile = phase_intensity_profile(&times, cfg.model.lambda, &cfg.displacement()?, cfg.mc.n, root)?;
    for p in &profile {
        if (p.slow.value + p.fast.value - cfg.model.lambda).abs() > 1e-12 * cfg.model.lambda.max(1.0) {
            return Err(CliError::Runtime(format!("phase intensities at t = {} do not sum to lambda", p.t)));
        }
    }
    let rows = profile.iter().enumerate().map(|(i, p)| {
        vec![
            i.to_string(),
            num(p.t),
            num(p.slow.value),
            num(p.fast.value),
            num(p.slow.std_error),
            p.slow.n_samples.to_string(),
        ]
    });
    out.csv("phase.csv", &["t_index", "t", "lambda_slow", "lambda_fast", "std_error", "n"], rows)?;
    let mid = &profile[profile.len() / 2];
    Ok(Outcome::new(format!("lambda_slow({:.3}) = {}", mid.t, fmt_estimate(&mid.slow))))
}

fn pair_all(tests: &[TestFunction], samples: &[MeasureSample]) -> Vec<Vec<f64>> {
    samples.iter().map(|m| tests.iter().map(|g| m.pair(g)).collect()).collect()
}

fn mean_of(values: &[Vec<f64>]) -> Result<Estimate, CliError> {
    let first: Vec<f64> = values.iter().map(|v| v[0]).collect();
    Ok(Estimate::from_samples(&first)?)
}

pub fn simulate_two_scale(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let model = cfg.two_scale()?;
    let samples = simulate_percolation_replications(&model, cfg.mc.replications, root)?;
    let tests = TestFunction::basis();
    let paired = pair_all(&tests, &samples);
    out.measures(&samples)?;
    out.pairings(&tests, &paired)?;
    let mean = mean_of(&paired)?;
    out.estimates(&[("tau_p_one".into(), mean)])?;
    Ok(Outcome::new(format!("mean tau_p(1) = {}", fmt_estimate(&mean)))
        .with("window_side", json!(model.window_side()))
        .with("target_side", json!(model.target().side())))
}

fn mu_hat(cfg: &Config, root: RngStream, derived: &mut Map<String, Value>) -> Result<f64, CliError> {
    if let Some(mu) = cfg.scaling.mu_hat {
        return Ok(mu);
    }
    let s = estimate_stretch_factor(&cfg.stretch(), root.child("mu-hat", 0))?;
    derived.insert("mu_hat_std_error".into(), json!(s.estimate.std_error));
    Ok(s.estimate.value)
}

fn theta_hat(cfg: &Config, root: RngStream, derived: &mut Map<String, Value>) -> Result<f64, CliError> {
    if let Some(theta) = cfg.scaling.theta {
        return Ok(theta);
    }
    let e = estimate_theta_m(&cfg.percolation()?, cfg.mc.n, root.child("theta-hat", 0))?;
    derived.insert("theta_hat_std_error".into(), json!(e.std_error));
    Ok(e.value)
}

pub fn simulate_khop(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let mut derived = Map::new();
    let mu = mu_hat(cfg, root, &mut derived)?;
    let model = cfg.infra(mu)?;
    let d = model.derived()?;
    let samples = simulate_khop_replications(&model, cfg.mc.replications, root)?;
    let tests = TestFunction::basis();
    let paired = pair_all(&tests, &samples);
    out.measures(&samples)?;
    out.pairings(&tests, &paired)?;
    let mean = mean_of(&paired)?;
    out.estimates(&[("tau_c_one".into(), mean)])?;
    let mut outcome = Outcome::new(format!("mean tau_c(1) = {} with k = {}", fmt_estimate(&mean), d.k));
    outcome.derived = derived;
    Ok(outcome
        .with("mu_hat", json!(mu))
        .with("k", json!(d.k))
        .with("lambda_s", json!(d.lambda_s))
        .with("lambda_s_nominal", json!(d.lambda_s_nominal))
        .with("realized_c0", json!(d.realized_c0))
        .with("q_t", json!(d.q_t))
        .with("window_side", json!(d.window_side))
        .with("truncation_budget", json!(d.truncation_budget)))
}

/// Pairings of a measure `value·dt`, constant in time, on the grid.
fn constant_pairings(grid: TimeGrid, tests: &[TestFunction], value: f64) -> Vec<f64> {
    let flat = vec![value; grid.len()];
    tests.iter().map(|g| grid.pair(&flat, g)).collect()
}

pub fn sample_limit(kind: LimitKind, cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let tests = TestFunction::basis();
    let draws = cfg.mc.replications;
    if kind == LimitKind::Theorem2 {
        let sampler = Theorem2Sampler::new(
            cfg.percolation()?,
            cfg.displacement()?,
            grid,
            cfg.mc.n_inner,
            cfg.mc.n_auxiliary,
            root.child("auxiliary", 0),
        )?;
        let paired = (0..draws as u64)
            .into_par_iter()
            .map(|i| {
                let m = sampler.sample(root.child("draw", i))?;
                Ok(tests.iter().map(|g| m.pair(g)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>, CliError>>()?;
        out.pairings(&tests, &paired)?;
        let mean = mean_of(&paired)?;
        return Ok(Outcome::new(format!("theorem2: mean pairing with 1 = {}", fmt_estimate(&mean)))
            .with("nu_mass", json!(sampler.nu.mass.value))
            .with("birth_region_side", json!(sampler.region.side())));
    }

    let mut derived = Map::new();
    let theta = theta_hat(cfg, root, &mut derived)?;
    let mu = mu_hat(cfg, root, &mut derived)?;
    let p = SinkLimitParams::new(theta, cfg.model.c0, mu, cfg.model.dim)?;
    let summary = match kind {
        LimitKind::Dense => {
            let value = dense_limit_constant(&p);
            out.estimates(&[("dense_limit".into(), Estimate::new(value, 0.0, 1))])?;
            format!("dense limit = {value:.6}")
        }
        LimitKind::Sparse => {
            let paired: Vec<Vec<f64>> = sample_sparse_limits(&p, draws, root)
                .into_iter()
                .map(|v| constant_pairings(grid, &tests, v))
                .collect();
            out.pairings(&tests, &paired)?;
            format!("sparse limit: mean = {}", fmt_estimate(&mean_of(&paired)?))
        }
        LimitKind::Critical => {
            let paired = (0..draws as u64)
                .into_par_iter()
                .map(|i| {
                    let values = sample_critical_profile(&p, grid, root.child("critical", i))?;
                    Ok(tests.iter().map(|g| grid.pair(&values, g)).collect())
                })
                .collect::<Result<Vec<Vec<f64>>, CliError>>()?;
            out.pairings(&tests, &paired)?;
            format!("critical limit: mean = {}", fmt_estimate(&mean_of(&paired)?))
        }
        LimitKind::Theorem2 => unreachable!("handled above"),
    };
    let mut outcome = Outcome::new(summary);
    outcome.derived = derived;
    Ok(outcome
        .with("theta", json!(theta))
        .with("mu_hat", json!(mu))
        .with("sink_mean", json!(p.sink_mean())))
}

pub fn compare(a: &Path, b: &Path, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (left, right) = (read_pairings(a)?, read_pairings(b)?);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (g, xs) in &left {
        let Some((_, ys)) = right.iter().find(|(h, _)| h == g) else {
            continue;
        };
        let (ea, eb) = (EmpiricalDistribution::new(xs)?, EmpiricalDistribution::new(ys)?);
        let (ks, w1) = (ks_distance(&ea, &eb), wasserstein1(&ea, &eb));
        worst = worst.max(ks);
        rows.push(vec![g.clone(), xs.len().to_string(), ys.len().to_string(), num(ks), num(w1)]);
    }
    if rows.is_empty() {
        return Err(CliError::Schema("compare: the two pairings files share no test function".into()));
    }
    let n = rows.len();
    out.csv("distances.csv", &DISTANCES_HEADER, rows)?;
    Ok(Outcome::new(format!("compared {n} test functions, largest KS {worst:.4}")))
}

pub fn selfcheck(cfg: &Config, root: RngStream, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let reports = run_connectivity_suites(cfg.mc.instances, root)?;
    let rows = reports
        .iter()
        .map(|r| vec![r.name.to_string(), r.instances.to_string(), r.mismatches.to_string()]);
    out.csv("selfcheck.csv", &["suite", "instances", "mismatches"], rows)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if !failed.is_empty() {
        return Err(CliError::Runtime(format!("self-check failed: {}", failed.join(", "))));
    }
    // the criterion window is reported so runs with different r stay distinguishable
    let window = PercolationCriterion::new(cfg.model.r, cfg.geometry.m)?.window_side();
    Ok(Outcome::new(format!("{} suites passed, {} instances each", reports.len(), cfg.mc.instances))
        .with("criterion_window_side", json!(window)))
}
