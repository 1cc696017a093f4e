//! Samplers for the long-horizon limits: the birth–death process of slow
//! nodes and the resulting limit of the percolation time measure, and the
//! dense, sparse and critical limits of the k-hop connection time.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_conditional_theta, phase_intensity_profile, Estimate, PercolationParams};
use crate::geometry::{ball_volume, distance_sq, norm, poisson_count, sample_homogeneous_poisson, BoxRegion, Point, PointSet};
use crate::measure::{LimitMeasure, TestFunction, TimeGrid};
use crate::mobility::DisplacementDistribution;
use crate::rng::RngStream;

/// Pooled epochs `≤ 1` of renewal sequences with inter-arrival `|V′| + |V″|`,
/// each starting with the epoch at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalMeasure {
    /// `ν̂([0, 1])`: mean number of epochs in `[0, 1]` per sequence.
    pub mass: Estimate,
    epochs: Vec<f64>,
}

impl RenewalMeasure {
    pub fn epochs(&self) -> &[f64] {
        &self.epochs
    }

    /// A draw from `ν` restricted to `[0, 1]` and normalized.
    pub fn sample_epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        *self.epochs.choose(rng).expect("at least the epoch at 0")
    }
}

pub fn sample_renewal_measure_nu(dist: &DisplacementDistribution, n: usize, stream: RngStream) -> Result<RenewalMeasure> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one renewal sequence"));
    }
    let sequences: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child("nu", i).rng();
            let mut v = vec![0.0; dist.dim()];
            let mut out = vec![0.0];
            let mut t = 0.0;
            loop {
                dist.sample_into(&mut rng, &mut v);
                t += norm(&v);
                dist.sample_into(&mut rng, &mut v);
                t += norm(&v);
                if t > 1.0 {
                    return out;
                }
                out.push(t);
            }
        })
        .collect();
    let counts: Vec<f64> = sequences.iter().map(|s| s.len() as f64).collect();
    Ok(RenewalMeasure {
        mass: Estimate::from_samples(&counts)?,
        epochs: sequences.into_iter().flatten().collect(),
    })
}

/// Total particle mass of the birth–death process per unit volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BirthDeathNormalization {
    /// Intensity `ν([0,1])^{-1} λ dx ⊗ ν(dt) ⊗ κ(dv)`: `λ` particles per unit
    /// volume in total.
    #[default]
    UnitMass,
    /// Intensity `λ dx ⊗ ν(dt) ⊗ κ(dv)`: the alive density at `t` is then
    /// `λ P(t ∈ I^s)` for every κ.
    Renewal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathPoint {
    pub x: Vec<f64>,
    pub sigma: f64,
    pub v: Vec<f64>,
    pub lifetime: f64,
}

impl BirthDeathPoint {
    pub fn alive_at(&self, t: f64) -> bool {
        self.sigma <= t && t <= self.sigma + self.lifetime
    }

    /// `x + (t − σ) V / |V|`.
    pub fn position_at(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.sigma) / self.lifetime;
        for (o, (x, v)) in out.iter_mut().zip(self.x.iter().zip(&self.v)) {
            *o = x + s * v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathProcess {
    pub particles: Vec<BirthDeathPoint>,
    pub region: BoxRegion,
    pub nu_mass: f64,
}

/// Birth region for observing `Q_{M+2r}`: `Q_M` padded by `r_max + 2r`, so a
/// particle born outside cannot enter the observation box during its life.
pub fn birth_death_region(dist: &DisplacementDistribution, m: f64, r: f64) -> Result<BoxRegion> {
    BoxRegion::centered(dist.dim(), m + 2.0 * (dist.r_max() + 2.0 * r))
}

pub fn sample_birth_death(
    lambda: f64,
    dist: &DisplacementDistribution,
    region: &BoxRegion,
    nu: &RenewalMeasure,
    normalization: BirthDeathNormalization,
    stream: RngStream,
) -> Result<BirthDeathProcess> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be non-negative, got {lambda}")));
    }
    if region.dim() != dist.dim() {
        return Err(Error::invalid("region", "dimension differs from the displacement law"));
    }
    let mass = match normalization {
        BirthDeathNormalization::UnitMass => 1.0,
        BirthDeathNormalization::Renewal => nu.mass.value,
    };
    let mut rng = stream.rng();
    let n = poisson_count(lambda * mass * region.volume(), &mut rng);
    let mut particles = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut x = Vec::with_capacity(region.dim());
        region.sample_uniform(&mut rng, &mut x);
        let sigma = nu.sample_epoch(&mut rng);
        let v = dist.sample(&mut rng);
        let lifetime = norm(&v);
        particles.push(BirthDeathPoint { x, sigma, v, lifetime });
    }
    Ok(BirthDeathProcess {
        particles,
        region: region.clone(),
        nu_mass: nu.mass.value,
    })
}

/// `X^s(t)`: positions of the particles alive at `t`.
pub fn slow_config_at(process: &BirthDeathProcess, t: f64) -> Result<PointSet> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain {
            value: t,
            domain: "[0, 1]".into(),
        });
    }
    let dim = process.region.dim();
    let mut coords = Vec::new();
    let mut p = vec![0.0; dim];
    for particle in process.particles.iter().filter(|q| q.alive_at(t)) {
        particle.position_at(t, &mut p);
        coords.extend_from_slice(&p);
    }
    // alive particles drift at most r_max beyond the birth region
    let reach = process
        .particles
        .iter()
        .map(|q| q.lifetime)
        .fold(0.0, f64::max);
    let region = BoxRegion::new(process.region.center().clone(), process.region.side() + 2.0 * reach)?;
    PointSet::from_coords(region, coords)
}

/// Draws of the limit `θ(X^s(t); λ^f(t)) dt` on a grid.
///
/// The renewal measure and the fast intensities `λ̂^f(t_i)` are estimated
/// once at construction and shared by all draws.
#[derive(Debug, Clone)]
pub struct Theorem2Sampler {
    pub params: PercolationParams,
    pub dist: DisplacementDistribution,
    pub grid: TimeGrid,
    pub n_inner: usize,
    pub nu: RenewalMeasure,
    pub lambda_fast: Vec<f64>,
    pub region: BoxRegion,
    pub normalization: BirthDeathNormalization,
}

impl Theorem2Sampler {
    pub fn new(
        params: PercolationParams,
        dist: DisplacementDistribution,
        grid: TimeGrid,
        n_inner: usize,
        n_auxiliary: usize,
        stream: RngStream,
    ) -> Result<Self> {
        if n_inner == 0 {
            return Err(Error::invalid("n_inner", "need at least one inner replication"));
        }
        if dist.dim() != params.dim {
            return Err(Error::invalid("dim", "displacement law has a different dimension"));
        }
        let nu = sample_renewal_measure_nu(&dist, n_auxiliary, stream.child("nu", 0))?;
        let times: Vec<f64> = grid.times().collect();
        let lambda_fast = phase_intensity_profile(&times, params.lambda, &dist, n_auxiliary, stream.child("phase", 0))?
            .iter()
            .map(|p| p.fast.value)
            .collect();
        let region = birth_death_region(&dist, params.m, params.r)?;
        Ok(Self {
            params,
            dist,
            grid,
            n_inner,
            nu,
            lambda_fast,
            region,
            normalization: BirthDeathNormalization::default(),
        })
    }

    pub fn sample(&self, stream: RngStream) -> Result<LimitMeasure> {
        let process = sample_birth_death(
            self.params.lambda,
            &self.dist,
            &self.region,
            &self.nu,
            self.normalization,
            stream.child("birth-death", 0),
        )?;
        let values = (0..self.grid.len())
            .map(|i| {
                let slow = slow_config_at(&process, self.grid.time(i))?;
                let e = estimate_conditional_theta(
                    &slow,
                    self.lambda_fast[i],
                    &self.params,
                    self.n_inner,
                    stream.child("inner", i as u64),
                )?;
                Ok(e.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(LimitMeasure { grid: self.grid, values })
    }
}

/// One draw of the limit measure of the percolation time measure.
pub fn sample_limit_percolation_measure(
    params: PercolationParams,
    dist: &DisplacementDistribution,
    grid: TimeGrid,
    n_inner: usize,
    stream: RngStream,
) -> Result<LimitMeasure> {
    Theorem2Sampler::new(params, *dist, grid, n_inner, 10_000, stream.child("auxiliary", 0))?.sample(stream)
}

/// Inputs of the k-hop limits: `θ`, `c_0`, `μ`, `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkLimitParams {
    pub theta: f64,
    pub c0: f64,
    pub mu: f64,
    pub dim: usize,
}

impl SinkLimitParams {
    pub fn new(theta: f64, c0: f64, mu: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid("theta", format!("must lie in [0, 1], got {theta}")));
        }
        if !(c0 >= 0.0 && c0.is_finite()) {
            return Err(Error::invalid("c0", format!("must be non-negative, got {c0}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("must be positive, got {mu}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(Self { theta, c0, mu, dim })
    }

    /// `c_0 |B_{1/μ}|`.
    pub fn sink_mean(&self) -> f64 {
        self.c0 * ball_volume(self.dim, 1.0 / self.mu)
    }

    /// `θ (1 − (1 − θ)^n)`.
    pub fn connected_fraction(&self, n: u64) -> f64 {
        self.theta * (1.0 - (1.0 - self.theta).powf(n as f64))
    }
}

/// `θ (1 − exp(−c_0 θ |B_{1/μ}|))`.
pub fn dense_limit_constant(p: &SinkLimitParams) -> f64 {
    p.theta * (1.0 - (-p.c0 * p.theta * ball_volume(p.dim, 1.0 / p.mu)).exp())
}

/// `θ (1 − (1 − θ)^N)` with `N ~ Poisson(c_0 |B_{1/μ}|)`.
pub fn sample_sparse_limit(p: &SinkLimitParams, stream: RngStream) -> f64 {
    let n = poisson_count(p.sink_mean(), &mut stream.rng());
    p.connected_fraction(n)
}

/// `n` sparse-limit draws; draw `i` uses `stream.child("sparse", i)`.
pub fn sample_sparse_limits(p: &SinkLimitParams, n: usize, stream: RngStream) -> Vec<f64> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_sparse_limit(p, stream.child("sparse", i)))
        .collect()
}

/// Brownian motion observed at the grid times, started at the origin at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub grid: TimeGrid,
    pub dim: usize,
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn sample_brownian_path(grid: TimeGrid, dim: usize, stream: RngStream) -> BrownianPath {
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.len() * dim);
    let mut w = vec![0.0; dim];
    let mut prev = 0.0;
    for t in grid.times() {
        let sd = (t - prev).sqrt();
        prev = t;
        for c in w.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *c += sd * z;
        }
        values.extend_from_slice(&w);
    }
    BrownianPath { grid, dim, values }
}

/// Per-grid-time values `θ (1 − (1 − θ)^{Y′(B_{1/μ}(W_{t_i}))})` of one
/// critical-limit draw.
pub fn sample_critical_profile(p: &SinkLimitParams, grid: TimeGrid, stream: RngStream) -> Result<Vec<f64>> {
    let path = sample_brownian_path(grid, p.dim, stream.child("path", 0));
    let radius = 1.0 / p.mu;
    let mut lo = vec![f64::INFINITY; p.dim];
    let mut hi = vec![f64::NEG_INFINITY; p.dim];
    for i in 0..grid.len() {
        for (a, &x) in path.at(i).iter().enumerate() {
            lo[a] = lo[a].min(x);
            hi[a] = hi[a].max(x);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let window = BoxRegion::new(Point::new(center)?, extent + 2.0 * radius)?;
    let sinks = sample_homogeneous_poisson(p.c0, &window, &mut stream.child("sinks", 0).rng())?;
    let r2 = radius * radius;
    Ok((0..grid.len())
        .map(|i| {
            let w = path.at(i);
            let count = sinks.iter().filter(|s| distance_sq(s, w) <= r2).count();
            p.connected_fraction(count as u64)
        })
        .collect())
}

/// One draw of `∫ g(t) θ (1 − (1 − θ)^{Y′(B_{1/μ}(W_t))}) dt` by midpoint quadrature.
pub fn sample_critical_limit(p: &SinkLimitParams, grid: TimeGrid, g: &TestFunction, stream: RngStream) -> Result<f64> {
    if let TestFunction::Tabulated { values, .. } = g {
        if values.len() != grid.len() {
            return Err(Error::invalid("g", "tabulated values must match the grid"));
        }
    }
    let values = sample_critical_profile(p, grid, stream)?;
    Ok(grid.pair(&values, g))
}
