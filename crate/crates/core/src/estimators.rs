//! Monte Carlo estimators: the box-escape percolation probability θ^M, its
//! conditional version given a slow configuration, a bracket for λ_c, the
//! stretch factor μ and the slow/fast phase intensities.

use rand::Rng;
use rayon::prelude::*;

use crate::connectivity::{build_graph, BfsScratch, PercolationCriterion};
use crate::error::{Error, Result};
use crate::geometry::{distance, poisson_count, sample_homogeneous_poisson, BoxRegion, PointSet};
use crate::mobility::{DisplacementDistribution, Phase, PhaseSchedule};
use crate::rng::RngStream;
use crate::stats::mean_and_sd;

/// A Monte Carlo estimate with a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub ci95: (f64, f64),
}

impl Estimate {
    pub fn new(value: f64, std_error: f64, n_samples: usize) -> Self {
        Self {
            value,
            std_error,
            n_samples,
            ci95: (value - 1.96 * std_error, value + 1.96 * std_error),
        }
    }

    /// Mean and `sd / √n` of the samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let (mean, sd) = mean_and_sd(samples);
        Ok(Self::new(mean, sd / (samples.len() as f64).sqrt(), samples.len()))
    }

    pub fn from_indicators(hits: &[bool]) -> Result<Self> {
        let v: Vec<f64> = hits.iter().map(|&b| b as u8 as f64).collect();
        Self::from_samples(&v)
    }

    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// `|a − b| ≤ k·√(se_a² + se_b²)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_se(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolationParams {
    pub lambda: f64,
    pub r: f64,
    pub m: f64,
    pub dim: usize,
}

impl PercolationParams {
    pub fn new(lambda: f64, r: f64, m: f64, dim: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be non-negative, got {lambda}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        PercolationCriterion::new(r, m)?;
        Ok(Self { lambda, r, m, dim })
    }

    pub fn criterion(&self) -> PercolationCriterion {
        PercolationCriterion {
            r: self.r,
            m: self.m,
            band: 1.0,
        }
    }

    /// `Q_{M+2r}`.
    pub fn window(&self) -> BoxRegion {
        BoxRegion::centered(self.dim, self.criterion().window_side()).expect("validated parameters")
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one replication"));
    }
    Ok(())
}

/// One draw of π^M on a fresh Poisson configuration with the origin appended.
pub fn theta_indicator(params: &PercolationParams, stream: RngStream, scratch: &mut BfsScratch) -> bool {
    let mut rng = stream.rng();
    let nodes = sample_homogeneous_poisson(params.lambda, &params.window(), &mut rng).expect("validated intensity");
    params.criterion().check_coords(nodes.coords(), params.dim, scratch)
}

/// Mean of `n` independent π^M indicators; replication `i` uses `stream.child("theta", i)`.
pub fn estimate_theta_m(params: &PercolationParams, n: usize, stream: RngStream) -> Result<Estimate> {
    check_n(n)?;
    let hits: Vec<bool> = (0..n as u64)
        .into_par_iter()
        .map_init(BfsScratch::default, |scratch, i| {
            theta_indicator(params, stream.child("theta", i), scratch)
        })
        .collect();
    Estimate::from_indicators(&hits)
}

/// θ̂^M for several box sides on common configurations: each replication is
/// sampled once on the largest window and every `M` is evaluated on it, so the
/// estimates are non-increasing in `M` sample by sample.
pub fn estimate_theta_m_nested(
    lambda: f64,
    r: f64,
    ms: &[f64],
    dim: usize,
    n: usize,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    check_n(n)?;
    let m_max = ms.iter().copied().fold(f64::NAN, f64::max);
    let outer = PercolationParams::new(lambda, r, m_max, dim)?;
    let criteria: Vec<PercolationCriterion> = ms
        .iter()
        .map(|&m| PercolationParams::new(lambda, r, m, dim).map(|p| p.criterion()))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<bool>> = (0..n as u64)
        .into_par_iter()
        .map_init(BfsScratch::default, |scratch, i| {
            let mut rng = stream.child("theta", i).rng();
            let nodes = sample_homogeneous_poisson(lambda, &outer.window(), &mut rng).expect("validated");
            criteria.iter().map(|c| c.check_coords(nodes.coords(), dim, scratch)).collect()
        })
        .collect();
    (0..ms.len())
        .map(|j| Estimate::from_indicators(&rows.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect()
}

/// Configuration `i` of a thinning-coupled family: points drawn at
/// `lambda_max` with uniform marks, kept when `mark · lambda_max < lambda`.
/// Configurations are nested in `lambda` for a fixed `i`.
pub fn coupled_configuration(
    lambda: f64,
    lambda_max: f64,
    window: &BoxRegion,
    stream: RngStream,
    out: &mut Vec<f64>,
) {
    out.clear();
    let mut rng = stream.rng();
    let n = poisson_count(lambda_max * window.volume(), &mut rng);
    let mut p = Vec::with_capacity(window.dim());
    for _ in 0..n {
        p.clear();
        window.sample_uniform(&mut rng, &mut p);
        let mark: f64 = rng.random();
        if mark * lambda_max < lambda {
            out.extend_from_slice(&p);
        }
    }
}

fn coupled_theta(params: &PercolationParams, lambda_max: f64, n: usize, stream: RngStream) -> Vec<bool> {
    let window = params.window();
    let criterion = params.criterion();
    (0..n as u64)
        .into_par_iter()
        .map_init(
            || (BfsScratch::default(), Vec::new()),
            |(scratch, coords), i| {
                coupled_configuration(params.lambda, lambda_max, &window, stream.child("coupled", i), coords);
                criterion.check_coords(coords, params.dim, scratch)
            },
        )
        .collect()
}

/// θ̂^M at several intensities under thinning coupling: for `λ1 < λ2` a
/// replication never percolates at `λ1` without percolating at `λ2`.
pub fn estimate_theta_curve(
    lambdas: &[f64],
    r: f64,
    m: f64,
    dim: usize,
    n: usize,
    stream: RngStream,
) -> Result<Vec<(Estimate, Vec<bool>)>> {
    check_n(n)?;
    let lambda_max = lambdas.iter().copied().fold(0.0, f64::max);
    lambdas
        .iter()
        .map(|&lambda| {
            let params = PercolationParams::new(lambda, r, m, dim)?;
            let hits = coupled_theta(&params, lambda_max, n, stream);
            Ok((Estimate::from_indicators(&hits)?, hits))
        })
        .collect()
}

/// θ^M(φ; λ′): π^M on `slow_config ∪ X′ ∪ {o}` averaged over fresh
/// Poisson(`lambda_fast`) configurations X′ on `Q_{M+2r}`.
///
/// With `lambda_fast = 0` the indicator is deterministic; it is evaluated
/// once and reported with zero standard error.
pub fn estimate_conditional_theta(
    slow_config: &PointSet,
    lambda_fast: f64,
    params: &PercolationParams,
    n_inner: usize,
    stream: RngStream,
) -> Result<Estimate> {
    check_n(n_inner)?;
    if !(lambda_fast >= 0.0 && lambda_fast.is_finite()) {
        return Err(Error::invalid("lambda_fast", format!("must be non-negative, got {lambda_fast}")));
    }
    if slow_config.dim() != params.dim {
        return Err(Error::invalid("slow_config", "dimension differs from the parameters"));
    }
    let window = params.window();
    let mut base = Vec::with_capacity(slow_config.coords().len());
    for p in slow_config.iter() {
        if window.contains(p) {
            base.extend_from_slice(p);
        }
    }
    let criterion = params.criterion();
    if lambda_fast == 0.0 {
        let hit = criterion.check_coords(&base, params.dim, &mut BfsScratch::default());
        return Ok(Estimate::new(hit as u8 as f64, 0.0, n_inner));
    }
    let hits: Vec<bool> = (0..n_inner as u64)
        .into_par_iter()
        .map_init(
            || (BfsScratch::default(), Vec::new()),
            |(scratch, coords), i| {
                let mut rng = stream.child("inner", i).rng();
                let extra = poisson_count(lambda_fast * window.volume(), &mut rng);
                coords.clear();
                coords.extend_from_slice(&base);
                for _ in 0..extra {
                    window.sample_uniform(&mut rng, coords);
                }
                criterion.check_coords(coords, params.dim, scratch)
            },
        )
        .collect();
    Estimate::from_indicators(&hits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaCOptions {
    pub dim: usize,
    /// Replications per θ̂^M evaluation.
    pub n: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// θ̂^M counts as positive when its lower 95% bound exceeds this.
    pub threshold: f64,
}

impl Default for LambdaCOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 1000,
            lambda_lo: 0.25,
            lambda_hi: 4.0,
            threshold: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub m: f64,
    pub lambda: f64,
    pub estimate: Estimate,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaCBracket {
    /// Bracket at the largest box side.
    pub lower: f64,
    pub upper: f64,
    /// `(M, lower, upper)` for every box side of the schedule.
    pub per_m: Vec<(f64, f64, f64)>,
    pub trace: Vec<BisectionStep>,
}

impl LambdaCBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lower <= lambda && lambda <= self.upper
    }
}

fn format_trace(trace: &[BisectionStep]) -> String {
    trace
        .iter()
        .map(|s| {
            format!(
                "M={} lambda={:.6} theta={:.4} se={:.4} positive={}",
                s.m, s.lambda, s.estimate.value, s.estimate.std_error, s.positive
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Bisection for the finite-`M` pseudo-critical intensity: the smallest λ
/// at which the lower 95% bound of θ̂^M exceeds the threshold. Runs for every
/// `M` of the schedule so the drift with `M` is visible in `per_m`.
///
/// All evaluations at one `M` share thinning-coupled configurations, so θ̂^M
/// is monotone in λ up to floating point; a violation beyond three combined
/// standard errors aborts with the trace.
pub fn estimate_lambda_c(
    r: f64,
    m_schedule: &[f64],
    tol: f64,
    opts: &LambdaCOptions,
    stream: RngStream,
) -> Result<LambdaCBracket> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if m_schedule.is_empty() || m_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("m_schedule", "must be a non-empty increasing sequence"));
    }
    if !(0.0 <= opts.lambda_lo && opts.lambda_lo < opts.lambda_hi) {
        return Err(Error::invalid("lambda_lo", "need 0 ≤ lambda_lo < lambda_hi"));
    }
    check_n(opts.n)?;
    let mut trace = Vec::new();
    let mut per_m = Vec::with_capacity(m_schedule.len());
    for (mi, &m) in m_schedule.iter().enumerate() {
        let family = stream.child("lambda-c", mi as u64);
        let eval = |lambda: f64, trace: &mut Vec<BisectionStep>| -> Result<bool> {
            let params = PercolationParams::new(lambda, r, m, opts.dim)?;
            let estimate = Estimate::from_indicators(&coupled_theta(&params, opts.lambda_hi, opts.n, family))?;
            let positive = estimate.ci95.0 > opts.threshold;
            let step = BisectionStep {
                m,
                lambda,
                estimate,
                positive,
            };
            let conflict = trace.iter().any(|s: &BisectionStep| {
                s.m == m
                    && ((s.lambda < lambda && s.estimate.value > estimate.value + 3.0 * s.estimate.combined_se(&estimate))
                        || (s.lambda > lambda
                            && estimate.value > s.estimate.value + 3.0 * s.estimate.combined_se(&estimate)))
            });
            trace.push(step);
            if conflict {
                return Err(Error::Bisection {
                    reason: format!("θ̂^M not monotone in λ at M={m}"),
                    trace: format_trace(trace),
                });
            }
            Ok(positive)
        };
        let (mut lo, mut hi) = (opts.lambda_lo, opts.lambda_hi);
        if eval(lo, &mut trace)? {
            return Err(Error::Bisection {
                reason: format!("already positive at the lower end λ={lo}, M={m}"),
                trace: format_trace(&trace),
            });
        }
        if !eval(hi, &mut trace)? {
            return Err(Error::Bisection {
                reason: format!("not positive at the upper end λ={hi}, M={m}"),
                trace: format_trace(&trace),
            });
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if eval(mid, &mut trace)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        per_m.push((m, lo, hi));
    }
    let &(_, lower, upper) = per_m.last().expect("non-empty schedule");
    Ok(LambdaCBracket {
        lower,
        upper,
        per_m,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchOptions {
    pub lambda: f64,
    pub r: f64,
    pub dim: usize,
    /// Side `L` of the sampling window.
    pub window: f64,
    /// Euclidean distance band `[lo, hi]` of the sampled pairs.
    pub band: (f64, f64),
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StretchEstimate {
    pub estimate: Estimate,
    pub ratios: Vec<f64>,
    pub hops: Vec<usize>,
    pub distances: Vec<f64>,
    pub giant_fraction: f64,
}

/// Gate used before estimating μ: θ̂^M at `M = 20` must have its lower 95%
/// bound above 0.02.
pub fn supercritical_gate(lambda: f64, r: f64, dim: usize, stream: RngStream) -> Result<Estimate> {
    let params = PercolationParams::new(lambda, r, 20.0 * r, dim)?;
    let est = estimate_theta_m(&params, 200, stream)?;
    if est.ci95.0 <= 0.02 {
        return Err(Error::Supercriticality(format!(
            "θ̂^M({lambda}) = {:.4} ± {:.4} is not bounded away from 0",
            est.value, est.std_error
        )));
    }
    Ok(est)
}

/// Stretch factor μ: mean of hop count over Euclidean distance for pairs of
/// giant-component nodes at distance in the band.
///
/// The giant component of one Poisson sample on the window stands in for the
/// infinite cluster. First endpoints are drawn from the central box of side
/// `L/2 − 2·hi`, so every pair sits at least `L/4` from the window boundary.
pub fn estimate_stretch_factor(opts: &StretchOptions, stream: RngStream) -> Result<StretchEstimate> {
    let StretchOptions {
        lambda,
        r,
        dim,
        window,
        band: (lo, hi),
        n_pairs,
    } = *opts;
    check_n(n_pairs)?;
    if !(lo >= 20.0 * r) {
        return Err(Error::invalid("band", format!("lower end {lo} must be at least 20r")));
    }
    if !(hi > lo) {
        return Err(Error::invalid("band", "upper end must exceed lower end"));
    }
    if !(window >= 8.0 * lo) {
        return Err(Error::invalid("window", format!("side {window} must be at least 8× the band start {lo}")));
    }
    let inner_side = 0.5 * window - 2.0 * hi;
    if !(inner_side > 0.0) {
        return Err(Error::invalid("window", format!("side {window} leaves no room for pairs at distance {hi}")));
    }
    supercritical_gate(lambda, r, dim, stream.child("gate", 0))?;

    let region = BoxRegion::centered(dim, window)?;
    let mut rng = stream.child("points", 0).rng();
    let points = sample_homogeneous_poisson(lambda, &region, &mut rng)?;
    let graph = build_graph(points, r)?;
    let giant = graph
        .largest_component()
        .ok_or_else(|| Error::Supercriticality("no points in the window".into()))?;
    let giant_fraction = graph.component_sizes()[giant as usize] as f64 / graph.len() as f64;
    if giant_fraction < 0.1 {
        return Err(Error::Supercriticality(format!(
            "largest component holds {:.1}% of the points",
            100.0 * giant_fraction
        )));
    }
    let members: Vec<usize> = (0..graph.len()).filter(|&i| graph.component_label(i) == giant).collect();
    let inner = BoxRegion::centered(dim, inner_side)?;
    let sources: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| inner.contains(graph.points().point(i)))
        .collect();
    if sources.is_empty() {
        return Err(Error::Supercriticality("giant component misses the central box".into()));
    }

    let mut pick = stream.child("pairs", 0).rng();
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut attempts = 0usize;
    while pairs.len() < n_pairs {
        attempts += 1;
        if attempts > 100 * n_pairs {
            return Err(Error::InsufficientData {
                needed: n_pairs,
                got: pairs.len(),
            });
        }
        let a = sources[pick.random_range(0..sources.len())];
        let pa = graph.points().point(a);
        let partners: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&b| {
                let dd = distance(pa, graph.points().point(b));
                lo <= dd && dd <= hi
            })
            .collect();
        if partners.is_empty() {
            continue;
        }
        pairs.push((a, partners[pick.random_range(0..partners.len())]));
    }

    let measured: Vec<(usize, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let hops = graph.graph_distance(a, b).expect("pair lies in one component");
            (hops, distance(graph.points().point(a), graph.points().point(b)))
        })
        .collect();
    let mut ratios = Vec::with_capacity(n_pairs);
    let mut hops = Vec::with_capacity(n_pairs);
    let mut distances = Vec::with_capacity(n_pairs);
    for (h, dd) in measured {
        assert!(
            h as f64 >= (dd / r - 1e-9).ceil(),
            "hop count {h} below ⌈{dd}/{r}⌉"
        );
        ratios.push(h as f64 / dd);
        hops.push(h);
        distances.push(dd);
    }
    Ok(StretchEstimate {
        estimate: Estimate::from_samples(&ratios)?,
        ratios,
        hops,
        distances,
        giant_fraction,
    })
}

/// λ̂^s(t), λ̂^f(t) from one classification per renewal schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseIntensity {
    pub t: f64,
    pub slow: Estimate,
    pub fast: Estimate,
    pub slow_count: usize,
    pub fast_count: usize,
}

fn phase_estimates(t: f64, lambda: f64, slow_count: usize, n: usize) -> PhaseIntensity {
    let p = slow_count as f64 / n as f64;
    let sd = if n > 1 {
        (p * (1.0 - p) * n as f64 / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let se = lambda * sd / (n as f64).sqrt();
    let slow = lambda * p;
    PhaseIntensity {
        t,
        slow: Estimate::new(slow, se, n),
        fast: Estimate::new(lambda - slow, se, n),
        slow_count,
        fast_count: n - slow_count,
    }
}

/// `λ^s(t) = λ P(t ∈ I^s)` and `λ^f(t) = λ P(t ∈ I^f)` from `n` simulated
/// phase schedules; schedule `i` uses `stream.child("phase", i)`.
pub fn estimate_phase_intensity(
    t: f64,
    lambda: f64,
    dist: &DisplacementDistribution,
    n: usize,
    stream: RngStream,
) -> Result<PhaseIntensity> {
    Ok(phase_intensity_profile(&[t], lambda, dist, n, stream)?.remove(0))
}

/// Phase intensities at several times on common schedules.
pub fn phase_intensity_profile(
    times: &[f64],
    lambda: f64,
    dist: &DisplacementDistribution,
    n: usize,
    stream: RngStream,
) -> Result<Vec<PhaseIntensity>> {
    check_n(n)?;
    if let Some(&t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Domain {
            value: t,
            domain: "[0, 1]".into(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be non-negative, got {lambda}")));
    }
    let counts = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let schedule = PhaseSchedule::sample(dist, &mut stream.child("phase", i).rng());
            times
                .iter()
                .map(|&t| (schedule.phase_at(t) == Phase::Slow) as usize)
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![0usize; times.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(times
        .iter()
        .zip(counts)
        .map(|(&t, c)| phase_estimates(t, lambda, c, n))
        .collect())
}
