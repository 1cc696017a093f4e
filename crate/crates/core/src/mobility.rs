//! Displacement laws, two-scale waypoint trajectories and continuous-time
//! random walks.
//!
//! Trajectories are relative paths starting at the origin; a node at `x`
//! occupies `x + Γ(t)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{norm, BoxRegion, Point};

/// Radial part of an isotropic displacement law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialLaw {
    /// `|v|` uniform on `[r_min, r_max]`.
    Uniform,
    /// `v` uniform on the annulus `r_min ≤ |v| ≤ r_max` (radial density ∝ ρ^{d-1}).
    Annulus,
}

impl RadialLaw {
    pub fn name(&self) -> &'static str {
        match self {
            RadialLaw::Uniform => "uniform",
            RadialLaw::Annulus => "annulus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(RadialLaw::Uniform),
            "annulus" => Some(RadialLaw::Annulus),
            _ => None,
        }
    }
}

/// Isotropic, bounded, absolutely continuous displacement law κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementDistribution {
    dim: usize,
    r_min: f64,
    r_max: f64,
    law: RadialLaw,
}

impl DisplacementDistribution {
    pub fn new(dim: usize, r_min: f64, r_max: f64, law: RadialLaw) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(r_min >= 0.0 && r_min.is_finite()) {
            return Err(Error::invalid("r_min", format!("must be finite and non-negative, got {r_min}")));
        }
        if !(r_max.is_finite() && r_max > r_min) {
            return Err(Error::invalid(
                "r_max",
                format!("must be finite and exceed r_min = {r_min} (absolute continuity), got {r_max}"),
            ));
        }
        Ok(Self {
            dim,
            r_min,
            r_max,
            law,
        })
    }

    /// Radius uniform on `[0.5, 1.5]`.
    pub fn default_two_scale(dim: usize) -> Self {
        Self::new(dim, 0.5, 1.5, RadialLaw::Uniform).expect("valid default")
    }

    /// The two-scale default rescaled so that `E|V|² = d`.
    pub fn default_crw(dim: usize) -> Self {
        Self::default_two_scale(dim).crw_normalized()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn law(&self) -> RadialLaw {
        self.law
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.r_min * factor, self.r_max * factor, self.law)
    }

    /// Rescales so the trace of the coordinate covariance, `E|V|²`, equals `d`.
    pub fn crw_normalized(&self) -> Self {
        let s = (self.dim as f64 / self.radial_moment(2)).sqrt();
        self.scaled(s).expect("positive scale keeps the law valid")
    }

    /// `E|V|^k`.
    pub fn radial_moment(&self, k: u32) -> f64 {
        let (a, b) = (self.r_min, self.r_max);
        let k = k as i32;
        match self.law {
            RadialLaw::Uniform => (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * (b - a)),
            RadialLaw::Annulus => {
                let d = self.dim as i32;
                d as f64 / (b.powi(d) - a.powi(d)) * (b.powi(d + k) - a.powi(d + k)) / (d + k) as f64
            }
        }
    }

    pub fn mean_norm(&self) -> f64 {
        self.radial_moment(1)
    }

    pub fn radial_cdf(&self, rho: f64) -> f64 {
        let (a, b) = (self.r_min, self.r_max);
        if rho <= a {
            return 0.0;
        }
        if rho >= b {
            return 1.0;
        }
        match self.law {
            RadialLaw::Uniform => (rho - a) / (b - a),
            RadialLaw::Annulus => {
                let d = self.dim as i32;
                (rho.powi(d) - a.powi(d)) / (b.powi(d) - a.powi(d))
            }
        }
    }

    pub fn radial_density(&self, rho: f64) -> f64 {
        let (a, b) = (self.r_min, self.r_max);
        if rho < a || rho > b {
            return 0.0;
        }
        match self.law {
            RadialLaw::Uniform => 1.0 / (b - a),
            RadialLaw::Annulus => {
                let d = self.dim as i32;
                d as f64 * rho.powi(d - 1) / (b.powi(d) - a.powi(d))
            }
        }
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.radius_at(rng.random())
    }

    /// Radius quantile at `u ∈ [0, 1)`.
    fn radius_at(&self, u: f64) -> f64 {
        let (a, b) = (self.r_min, self.r_max);
        match self.law {
            RadialLaw::Uniform => a + (b - a) * u,
            RadialLaw::Annulus => {
                let d = self.dim as i32;
                (a.powi(d) + u * (b.powi(d) - a.powi(d))).powf(1.0 / self.dim as f64)
            }
        }
    }

    /// Writes a uniformly distributed unit vector into `out`.
    pub fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.dim {
            1 => out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 },
            2 => loop {
                let x = 2.0 * rng.random::<f64>() - 1.0;
                let y = 2.0 * rng.random::<f64>() - 1.0;
                let s = x * x + y * y;
                if s > 1e-12 && s <= 1.0 {
                    let inv = 1.0 / s.sqrt();
                    out[0] = x * inv;
                    out[1] = y * inv;
                    return;
                }
            },
            _ => loop {
                for c in out.iter_mut() {
                    *c = rng.sample(StandardNormal);
                }
                let n = norm(out);
                if n > 1e-12 {
                    out.iter_mut().for_each(|c| *c /= n);
                    return;
                }
            },
        }
    }

    /// Draws `v ~ κ` into `out`; returns `|v|`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        self.sample_direction(rng, out);
        let rho = self.sample_radius(rng);
        out.iter_mut().for_each(|c| *c *= rho);
        rho
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.sample_into(rng, &mut v);
        v
    }

    /// `E exp(θ ⟨V, u⟩)` for a fixed unit vector `u` (isotropy makes `u` irrelevant).
    pub fn projection_mgf(&self, theta: f64) -> f64 {
        ProjectionQuadrature::new(self).mgf(theta)
    }

    /// Upper bound `q` with `P(sup_{t ≤ horizon} |S(t)| ≥ q) ≤ eps` for the
    /// compound-Poisson walk with this jump law and the given rate.
    ///
    /// Uses Doob's inequality for `exp(θ⟨S(t), u⟩)` over a finite net of
    /// directions `u`; every vector of length `q` has projection at least
    /// `q·c` on some net direction.
    pub fn crw_displacement_quantile(&self, rate: f64, horizon: f64, eps: f64) -> f64 {
        let (directions, c) = match self.dim {
            1 => (2.0, 1.0),
            2 => (16.0, (std::f64::consts::PI / 16.0).cos()),
            d => (2.0 * d as f64, 1.0 / (d as f64).sqrt()),
        };
        let quad = ProjectionQuadrature::new(self);
        let mass = rate * horizon;
        let log_tail = |q: f64| -> f64 {
            let g = |theta: f64| -theta * q * c + mass * (quad.mgf(theta) - 1.0);
            let (mut lo, mut hi) = (0.0, 40.0 / self.r_max);
            for _ in 0..60 {
                let m1 = lo + (hi - lo) * 0.382;
                let m2 = lo + (hi - lo) * 0.618;
                if g(m1) < g(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            directions.ln() + g(0.5 * (lo + hi))
        };
        let target = eps.ln();
        let mut hi = self.r_max.max(1.0);
        while log_tail(hi) > target {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if log_tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Product Simpson rule over the radius and the angle to a fixed axis.
struct ProjectionQuadrature {
    nodes: Vec<(f64, f64)>,
}

impl ProjectionQuadrature {
    fn new(dist: &DisplacementDistribution) -> Self {
        let radial = simpson_nodes(dist.r_min, dist.r_max, 32);
        let angular: Vec<(f64, f64)> = match dist.dim {
            1 => vec![(1.0, 0.5), (-1.0, 0.5)],
            d => {
                let raw = simpson_nodes(0.0, std::f64::consts::PI, 128);
                let weights: Vec<f64> = raw.iter().map(|&(psi, w)| w * psi.sin().powi(d as i32 - 2)).collect();
                let total: f64 = weights.iter().sum();
                raw.iter().zip(weights).map(|(&(psi, _), w)| (psi.cos(), w / total)).collect()
            }
        };
        let mut nodes = Vec::with_capacity(radial.len() * angular.len());
        for &(rho, wr) in &radial {
            let wr = wr * dist.radial_density(rho);
            for &(c, wa) in &angular {
                nodes.push((rho * c, wr * wa));
            }
        }
        Self { nodes }
    }

    fn mgf(&self, theta: f64) -> f64 {
        self.nodes.iter().map(|&(x, w)| w * (theta * x).exp()).sum()
    }
}

fn simpson_nodes(a: f64, b: f64, intervals: usize) -> Vec<(f64, f64)> {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Slow,
    Fast,
}

/// Alternating slow/fast phases in rescaled time, starting slow.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    arrivals: Vec<f64>,
}

impl PhaseSchedule {
    /// Renewal sequence `T⁰_{j+1} = T⁰_j + |V_j|` up to the first arrival beyond 1.
    pub fn sample<R: Rng + ?Sized>(dist: &DisplacementDistribution, rng: &mut R) -> Self {
        let mut arrivals = vec![0.0];
        let mut t = 0.0;
        while t <= 1.0 {
            t += dist.sample_radius(rng);
            arrivals.push(t);
        }
        Self { arrivals }
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    /// `[T⁰_{2j}, T⁰_{2j+1}]`.
    pub fn slow_intervals(&self) -> Vec<(f64, f64)> {
        self.arrivals.windows(2).step_by(2).map(|w| (w[0], w[1])).collect()
    }

    /// `[T⁰_{2j+1}, T⁰_{2j+2}]`.
    pub fn fast_intervals(&self) -> Vec<(f64, f64)> {
        self.arrivals.windows(2).skip(1).step_by(2).map(|w| (w[0], w[1])).collect()
    }

    /// Intervals are right-open: an arrival epoch belongs to the leg it opens.
    pub fn phase_at(&self, s: f64) -> Phase {
        phase_of_leg(leg_index(&self.arrivals, s))
    }
}

fn phase_of_leg(leg: usize) -> Phase {
    if leg.is_multiple_of(2) {
        Phase::Slow
    } else {
        Phase::Fast
    }
}

/// Largest `j` with `arrivals[j] ≤ s`, capped at the last leg.
fn leg_index(arrivals: &[f64], s: f64) -> usize {
    let legs = arrivals.len() - 1;
    let j = arrivals.partition_point(|&a| a <= s);
    j.saturating_sub(1).min(legs.saturating_sub(1))
}

/// Piecewise-linear two-scale waypoint path on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleTrajectory {
    dim: usize,
    horizon: f64,
    displacements: Vec<f64>,
    waypoints: Vec<f64>,
    arrivals: Vec<f64>,
}

impl TwoScaleTrajectory {
    /// Draws displacements until the first rescaled arrival exceeds 1.
    pub fn build<R: Rng + ?Sized>(horizon: f64, dist: &DisplacementDistribution, rng: &mut R) -> Result<Self> {
        check_horizon(horizon)?;
        let dim = dist.dim();
        let mut displacements = Vec::with_capacity(3 * dim);
        let mut v = vec![0.0; dim];
        let mut t = 0.0;
        while t <= 1.0 {
            dist.sample_into(rng, &mut v);
            t += norm(&v);
            displacements.extend_from_slice(&v);
        }
        Self::assemble(horizon, dim, displacements)
    }

    /// Builds the path from explicit displacement vectors (flat, `dim` per leg).
    /// The rescaled arrivals must reach beyond 1.
    pub fn from_displacements(horizon: f64, dim: usize, displacements: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if dim == 0 || displacements.is_empty() || !displacements.len().is_multiple_of(dim) {
            return Err(Error::invalid("displacements", "need a positive number of legs of length dim"));
        }
        let traj = Self::assemble(horizon, dim, displacements)?;
        if *traj.arrivals.last().unwrap() <= 1.0 {
            return Err(Error::invalid("displacements", "rescaled arrivals must exceed 1"));
        }
        Ok(traj)
    }

    fn assemble(horizon: f64, dim: usize, displacements: Vec<f64>) -> Result<Self> {
        let legs = displacements.len() / dim;
        let mut waypoints = vec![0.0; (legs + 1) * dim];
        let mut arrivals = vec![0.0; legs + 1];
        for j in 0..legs {
            let v = &displacements[j * dim..(j + 1) * dim];
            let scale = if j % 2 == 0 { 1.0 } else { horizon };
            arrivals[j + 1] = arrivals[j] + norm(v);
            for a in 0..dim {
                waypoints[(j + 1) * dim + a] = waypoints[j * dim + a] + scale * v[a];
            }
        }
        Ok(Self {
            dim,
            horizon,
            displacements,
            waypoints,
            arrivals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn legs(&self) -> usize {
        self.arrivals.len() - 1
    }

    pub fn rescaled_arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn waypoint(&self, j: usize) -> &[f64] {
        &self.waypoints[j * self.dim..(j + 1) * self.dim]
    }

    pub fn displacement(&self, j: usize) -> &[f64] {
        &self.displacements[j * self.dim..(j + 1) * self.dim]
    }

    pub fn phase_schedule(&self) -> PhaseSchedule {
        PhaseSchedule {
            arrivals: self.arrivals.clone(),
        }
    }

    pub fn position_at(&self, t: f64) -> Result<Point> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain {
                value: t,
                domain: format!("[0, {}]", self.horizon),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.position_at_rescaled_into(t / self.horizon, &mut out);
        Point::new(out)
    }

    /// Position at rescaled time `s = t / T`, written to `out`.
    pub fn position_at_rescaled_into(&self, s: f64, out: &mut [f64]) {
        let j = leg_index(&self.arrivals, s);
        self.position_on_leg(j, s, out);
    }

    pub(crate) fn position_on_leg(&self, j: usize, s: f64, out: &mut [f64]) {
        let (a0, a1) = (self.arrivals[j], self.arrivals[j + 1]);
        let frac = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        let p0 = self.waypoint(j);
        let p1 = self.waypoint(j + 1);
        for a in 0..self.dim {
            out[a] = p0[a] + frac * (p1[a] - p0[a]);
        }
    }

    pub fn phase_at(&self, s: f64) -> Result<Phase> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain {
                value: s,
                domain: "[0, 1]".into(),
            });
        }
        Ok(phase_of_leg(leg_index(&self.arrivals, s)))
    }

    /// True iff no fast segment `[P_{2j'-1}, P_{2j'}]` (with `j' ∉ {j, j+1}`)
    /// meets the box of side `4M` around a slow-phase start `P_{2j}`, over
    /// all arrivals within the horizon.
    pub fn is_self_avoiding(&self, m: f64) -> bool {
        let within = |idx: usize| idx < self.arrivals.len() && self.arrivals[idx] <= 1.0;
        let mut j = 0;
        while within(2 * j) {
            let center = Point::new(self.waypoint(2 * j).to_vec()).expect("finite waypoint");
            let guard = BoxRegion::new(center, 4.0 * m).expect("positive side");
            let mut jp = 1;
            while within(2 * jp - 1) && 2 * jp < self.arrivals.len() {
                if jp != j
                    && jp != j + 1
                    && guard
                        .clip_segment(self.waypoint(2 * jp - 1), self.waypoint(2 * jp))
                        .is_some()
                {
                    return false;
                }
                jp += 1;
            }
            j += 1;
        }
        true
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
    }
    Ok(())
}

/// Pure-jump random walk: Poisson jump times, κ-distributed increments.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    dim: usize,
    horizon: f64,
    jump_rate: f64,
    jump_times: Vec<f64>,
    positions: Vec<f64>,
}

impl JumpTrajectory {
    pub fn build<R: Rng + ?Sized>(
        rate: f64,
        horizon: f64,
        dist: &DisplacementDistribution,
        rng: &mut R,
    ) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid("rate", format!("must be positive, got {rate}")));
        }
        check_horizon(horizon)?;
        check_crw_normalization(dist)?;
        let dim = dist.dim();
        let gaps = Exp::new(rate).expect("positive rate");
        let mut jump_times = Vec::new();
        let mut positions = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut t = gaps.sample(rng);
        while t <= horizon {
            jump_times.push(t);
            dist.sample_into(rng, &mut v);
            let last = positions.len() - dim;
            for a in 0..dim {
                let next = positions[last + a] + v[a];
                positions.push(next);
            }
            t += gaps.sample(rng);
        }
        Ok(Self {
            dim,
            horizon,
            jump_rate: rate,
            jump_times,
            positions,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Right-continuous position after `n` jumps.
    pub fn position_after(&self, n: usize) -> &[f64] {
        &self.positions[n * self.dim..(n + 1) * self.dim]
    }

    pub fn position_at(&self, t: f64) -> Result<Point> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain {
                value: t,
                domain: format!("[0, {}]", self.horizon),
            });
        }
        Point::new(self.position_at_slice(t).to_vec())
    }

    pub fn position_at_slice(&self, t: f64) -> &[f64] {
        let n = self.jump_times.partition_point(|&s| s <= t);
        self.position_after(n)
    }
}

/// The CRW requires `E|V|² = d` to within 1%.
pub fn check_crw_normalization(dist: &DisplacementDistribution) -> Result<()> {
    let d = dist.dim() as f64;
    let trace = dist.radial_moment(2);
    if ((trace - d) / d).abs() > 0.01 {
        return Err(Error::invalid(
            "displacement",
            format!("covariance trace E|V|^2 = {trace:.6} must equal the dimension {d} (use crw_normalized)"),
        ));
    }
    Ok(())
}

/// Advances many independent compound-Poisson walks with jump law κ over a
/// common time step. Jump counts come from an inverse-CDF table on raw
/// 64-bit draws; in two dimensions each direction proposal uses one draw
/// split into two 32-bit coordinates.
#[derive(Debug, Clone)]
pub struct CrwStepper {
    dist: DisplacementDistribution,
    rate: f64,
    tables: Vec<(f64, Vec<u64>)>,
    scratch: Vec<f64>,
}

impl CrwStepper {
    pub fn new(dist: DisplacementDistribution, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid("jump_rate", format!("must be positive, got {rate}")));
        }
        Ok(Self {
            scratch: vec![0.0; dist.dim()],
            dist,
            rate,
            tables: Vec::new(),
        })
    }

    /// `thresholds[j] = ⌊P(N ≤ j)·2⁶⁴⌋` for `N ~ Poisson(mean)`, up to the last
    /// value below one.
    fn thresholds(mean: f64) -> Vec<u64> {
        let scale = 2f64.powi(64);
        let mut out = Vec::new();
        let mut p = (-mean).exp();
        let mut acc = 0.0;
        let mut j = 0.0;
        while out.len() < 100_000 {
            acc += p;
            let t = acc * scale;
            if t >= scale {
                break;
            }
            out.push(t as u64);
            j += 1.0;
            p *= mean / j;
            if p * scale < 0.5 && j > mean {
                break;
            }
        }
        out
    }

    fn table(&mut self, dt: f64) -> usize {
        let mean = self.rate * dt;
        match self.tables.iter().position(|(m, _)| *m == mean) {
            Some(i) => i,
            None => {
                self.tables.push((mean, Self::thresholds(mean)));
                self.tables.len() - 1
            }
        }
    }

    /// Moves every point of `positions` (flat, `dim` coordinates each) by an
    /// independent walk increment over `dt`.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, positions: &mut [f64], dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let slot = self.table(dt);
        let table = &self.tables[slot].1;
        let dim = self.dist.dim();
        const UNIT32: f64 = 1.0 / (1u64 << 32) as f64;
        for p in positions.chunks_exact_mut(dim) {
            let u = rng.next_u64();
            let mut jumps = 0;
            while jumps < table.len() && table[jumps] <= u {
                jumps += 1;
            }
            for _ in 0..jumps {
                if dim == 2 {
                    let (x, y, s) = loop {
                        let bits = rng.next_u64();
                        let x = ((bits >> 32) as f64 + 0.5) * (2.0 * UNIT32) - 1.0;
                        let y = ((bits & 0xffff_ffff) as f64 + 0.5) * (2.0 * UNIT32) - 1.0;
                        let s = x * x + y * y;
                        if s <= 1.0 {
                            break (x, y, s);
                        }
                    };
                    let rho = self.dist.radius_at((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64));
                    let f = rho / s.sqrt();
                    p[0] += x * f;
                    p[1] += y * f;
                } else {
                    self.dist.sample_into(rng, &mut self.scratch);
                    p.iter_mut().zip(&self.scratch).for_each(|(c, v)| *c += v);
                }
            }
        }
    }
}
