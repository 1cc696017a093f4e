//! Dynamic simulations of the two models on a time grid: the percolation
//! time measure of the two-scale waypoint model and the k-hop connection
//! time measure of the infrastructure model.

use rand::Rng;
use rayon::prelude::*;

use crate::connectivity::{BfsScratch, KHopSearch, PercolationCriterion, RelayTiles};
use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::geometry::{norm, poisson_count, sample_homogeneous_poisson, BoxRegion, Point};
use crate::measure::{MeasureSample, ModelKind, ReplicationMeta, TimeGrid};
use crate::mobility::{CrwStepper, DisplacementDistribution, JumpTrajectory, TwoScaleTrajectory};
use crate::rng::{digest_u64, RngStream};

/// Side of the lattice blocks used to sample initial two-scale nodes. Each
/// block draws from its own stream, so enlarging the window adds blocks
/// without touching the existing ones.
const BLOCK_SIDE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleConfig {
    pub lambda: f64,
    pub r: f64,
    pub m: f64,
    pub dim: usize,
    pub horizon: f64,
    pub dist: DisplacementDistribution,
    pub grid: TimeGrid,
}

impl TwoScaleConfig {
    pub fn new(
        lambda: f64,
        r: f64,
        m: f64,
        horizon: f64,
        dist: DisplacementDistribution,
        grid: TimeGrid,
    ) -> Result<Self> {
        let cfg = Self {
            lambda,
            r,
            m,
            dim: dist.dim(),
            horizon,
            dist,
            grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be non-negative, got {}", self.lambda)));
        }
        PercolationCriterion::new(self.r, self.m)?;
        if !(self.horizon.is_finite() && self.horizon >= self.m) {
            return Err(Error::invalid(
                "horizon",
                format!("must be finite and at least M = {}, got {}", self.m, self.horizon),
            ));
        }
        if self.dist.dim() != self.dim {
            return Err(Error::invalid("dim", "displacement law has a different dimension"));
        }
        Ok(())
    }

    pub fn criterion(&self) -> PercolationCriterion {
        PercolationCriterion::new(self.r, self.m).expect("validated")
    }

    /// `Q_{M+2r}`: only nodes inside it can influence π^M.
    pub fn target(&self) -> BoxRegion {
        BoxRegion::centered(self.dim, self.criterion().window_side()).expect("validated")
    }

    /// `Q_{M+2T+2r}`: nodes are at most `T` away from their start, so nodes
    /// starting outside never enter the target box.
    pub fn window_side(&self) -> f64 {
        self.m + 2.0 * self.horizon + 2.0 * self.r
    }
}

/// A node of the two-scale model: its start and its waypoint path.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleNode {
    pub start: Point,
    pub path: TwoScaleTrajectory,
}

fn for_each_block(dim: usize, half: f64, mut f: impl FnMut(&[i64])) {
    let lo = (-half / BLOCK_SIDE).floor() as i64;
    let hi = (half / BLOCK_SIDE).ceil() as i64 - 1;
    let mut idx = vec![lo; dim];
    loop {
        f(&idx);
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            if idx[axis] < hi {
                idx[axis] += 1;
                break;
            }
            idx[axis] = lo;
            axis += 1;
        }
    }
}

fn block_stream(stream: RngStream, idx: &[i64]) -> RngStream {
    let bytes: Vec<u8> = idx.iter().flat_map(|c| c.to_le_bytes()).collect();
    stream.child("block", digest_u64(&[&bytes]))
}

/// Walks all nodes that can reach the target box, passing the start and the
/// flat displacement list. Nodes are sampled block by block on a lattice
/// covering the window enlarged by `extra_pad` on every side.
fn for_each_reachable_node(
    cfg: &TwoScaleConfig,
    extra_pad: f64,
    stream: RngStream,
    mut f: impl FnMut(&[f64], &[f64]),
) {
    let dim = cfg.dim;
    let half = 0.5 * cfg.window_side() + extra_pad;
    let reach = 0.5 * cfg.target().side() + cfg.horizon;
    let block_mean = cfg.lambda * BLOCK_SIDE.powi(dim as i32);
    let mut start = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut disp = Vec::new();
    for_each_block(dim, half, |idx| {
        let mut rng = block_stream(stream, idx).rng();
        let count = poisson_count(block_mean, &mut rng);
        for _ in 0..count {
            for (a, s) in start.iter_mut().enumerate() {
                *s = (idx[a] as f64 + rng.random::<f64>()) * BLOCK_SIDE;
            }
            if start.iter().any(|x| x.abs() > reach) {
                continue;
            }
            disp.clear();
            let mut t = 0.0;
            while t <= 1.0 {
                cfg.dist.sample_into(&mut rng, &mut v);
                t += norm(&v);
                disp.extend_from_slice(&v);
            }
            f(&start, &disp);
        }
    });
}

/// The nodes that can reach the target box, as explicit trajectories.
pub fn two_scale_nodes(cfg: &TwoScaleConfig, stream: RngStream) -> Result<Vec<TwoScaleNode>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for_each_reachable_node(cfg, 0.0, stream, |start, disp| {
        out.push(TwoScaleNode {
            start: Point::new(start.to_vec()).expect("finite start"),
            path: TwoScaleTrajectory::from_displacements(cfg.horizon, cfg.dim, disp.to_vec())
                .expect("arrivals pass 1"),
        });
    });
    Ok(out)
}

/// Smallest grid index with `t_i ≥ x`.
fn first_index_at_or_after(grid: &TimeGrid, x: f64) -> usize {
    let n = grid.len();
    let mut i = ((x * n as f64 - 0.5).ceil().max(0.0) as usize).min(n);
    while i > 0 && grid.time(i - 1) >= x {
        i -= 1;
    }
    while i < n && grid.time(i) < x {
        i += 1;
    }
    i
}

/// Positions of nodes inside the target box, bucketed per grid time.
fn bucket_positions(cfg: &TwoScaleConfig, extra_pad: f64, stream: RngStream) -> Vec<Vec<f64>> {
    let dim = cfg.dim;
    let grid = cfg.grid;
    let target = cfg.target();
    let mut buckets = vec![Vec::new(); grid.len()];
    let mut w0 = vec![0.0; dim];
    let mut w1 = vec![0.0; dim];
    let mut a_abs = vec![0.0; dim];
    let mut b_abs = vec![0.0; dim];
    let mut pos = vec![0.0; dim];
    for_each_reachable_node(cfg, extra_pad, stream, |start, disp| {
        w0.iter_mut().for_each(|x| *x = 0.0);
        let mut a0 = 0.0;
        for (j, v) in disp.chunks_exact(dim).enumerate() {
            if a0 > 1.0 {
                break;
            }
            let scale = if j % 2 == 0 { 1.0 } else { cfg.horizon };
            let a1 = a0 + norm(v);
            for a in 0..dim {
                w1[a] = w0[a] + scale * v[a];
                a_abs[a] = start[a] + w0[a];
                b_abs[a] = start[a] + w1[a];
            }
            if let Some((s0, s1)) = target.clip_segment(&a_abs, &b_abs) {
                let dur = a1 - a0;
                let lo = first_index_at_or_after(&grid, a0).max(first_index_at_or_after(&grid, a0 + s0 * dur - 1e-9));
                let hi = first_index_at_or_after(&grid, a1).min(first_index_at_or_after(&grid, a0 + s1 * dur + 1e-9));
                for (i, bucket) in buckets.iter_mut().enumerate().take(hi).skip(lo) {
                    let frac = if a1 > a0 { (grid.time(i) - a0) / (a1 - a0) } else { 0.0 };
                    for a in 0..dim {
                        pos[a] = start[a] + (w0[a] + frac * (w1[a] - w0[a]));
                    }
                    if target.contains(&pos) {
                        bucket.extend_from_slice(&pos);
                    }
                }
            }
            std::mem::swap(&mut w0, &mut w1);
            a0 = a1;
        }
    });
    buckets
}

/// One replication of the empirical percolation time measure: π^M with the
/// static origin appended, at every grid time `t_i · T`.
pub fn simulate_percolation_measure(cfg: &TwoScaleConfig, stream: RngStream) -> Result<MeasureSample> {
    simulate_percolation_measure_padded(cfg, 0.0, stream)
}

/// As [`simulate_percolation_measure`] on a window enlarged by `extra_pad`
/// on every side; the indicators do not depend on the padding.
pub fn simulate_percolation_measure_padded(
    cfg: &TwoScaleConfig,
    extra_pad: f64,
    stream: RngStream,
) -> Result<MeasureSample> {
    cfg.validate()?;
    let criterion = cfg.criterion();
    let buckets = bucket_positions(cfg, extra_pad, stream);
    let mut scratch = BfsScratch::default();
    let indicators = buckets
        .iter()
        .map(|b| criterion.check_coords(b, cfg.dim, &mut scratch) as u8)
        .collect();
    Ok(MeasureSample {
        grid: cfg.grid,
        indicators,
        model: ModelKind::Percolation,
        meta: ReplicationMeta {
            master_seed: stream.master_seed(),
            stream_id: stream.stream_id(),
        },
    })
}

/// `n` replications; replication `i` uses `stream.child("replication", i)`.
pub fn simulate_percolation_replications(
    cfg: &TwoScaleConfig,
    n: usize,
    stream: RngStream,
) -> Result<Vec<MeasureSample>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_percolation_measure(cfg, stream.child("replication", i)))
        .collect()
}

/// How the sink intensity follows from `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkDensity {
    /// `λ_S = c_0 / k^d`, so `λ_S k^d = c_0` holds exactly after rounding `k`.
    MatchC0,
    /// `λ_S = T^{−α}` as given; `λ_S k^d` then deviates from `c_0`.
    Nominal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfraConfig {
    pub lambda: f64,
    pub r: f64,
    pub m: f64,
    pub dim: usize,
    pub c0: f64,
    pub alpha: f64,
    pub horizon: f64,
    /// Stretch factor estimate used to size the window.
    pub mu_hat: f64,
    /// CRW increment law, normalized to `E|V|² = d`.
    pub dist: DisplacementDistribution,
    pub jump_rate: f64,
    pub grid: TimeGrid,
    pub sink_density: SinkDensity,
    /// Upper bound on the expected number of relays in the window.
    pub max_points: f64,
    /// Probability budget for a node leaving the margin `q_T`.
    pub truncation_budget: f64,
}

/// Parameters derived from an [`InfraConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfraDerived {
    pub k: usize,
    pub lambda_s: f64,
    /// `T^{−α}`.
    pub lambda_s_nominal: f64,
    /// `λ_S k^d`.
    pub realized_c0: f64,
    /// Displacement quantile of a CRW path over `[0, T]`.
    pub q_t: f64,
    pub window_side: f64,
    pub truncation_budget: f64,
}

impl InfraConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be non-negative, got {}", self.lambda)));
        }
        positive("r", self.r)?;
        positive("m", self.m)?;
        positive("c0", self.c0)?;
        positive("alpha", self.alpha)?;
        positive("horizon", self.horizon)?;
        positive("mu_hat", self.mu_hat)?;
        positive("jump_rate", self.jump_rate)?;
        positive("max_points", self.max_points)?;
        if !(self.truncation_budget > 0.0 && self.truncation_budget < 1.0) {
            return Err(Error::invalid("truncation_budget", "must lie in (0, 1)"));
        }
        if self.dist.dim() != self.dim {
            return Err(Error::invalid("dim", "displacement law has a different dimension"));
        }
        crate::mobility::check_crw_normalization(&self.dist)
    }

    pub fn derived(&self) -> Result<InfraDerived> {
        self.validate()?;
        let d = self.dim as f64;
        let nominal = self.horizon.powf(-self.alpha);
        let k = ((self.c0 / nominal).powf(1.0 / d).round() as usize).max(1);
        let lambda_s = match self.sink_density {
            SinkDensity::MatchC0 => self.c0 / (k as f64).powi(self.dim as i32),
            SinkDensity::Nominal => nominal,
        };
        let q_t = self
            .dist
            .crw_displacement_quantile(self.jump_rate, self.horizon, self.truncation_budget);
        let half = k as f64 / self.mu_hat + q_t + self.r + self.m;
        Ok(InfraDerived {
            k,
            lambda_s,
            lambda_s_nominal: nominal,
            realized_c0: lambda_s * (k as f64).powi(self.dim as i32),
            q_t,
            window_side: 2.0 * half,
            truncation_budget: self.truncation_budget,
        })
    }

    fn checked_window(&self) -> Result<(InfraDerived, BoxRegion)> {
        let derived = self.derived()?;
        let expected = self.lambda * derived.window_side.powi(self.dim as i32);
        if expected > self.max_points {
            let terms = [
                ("horizon", derived.q_t),
                ("alpha", derived.k as f64 / self.mu_hat),
                ("m", self.m),
            ];
            let parameter = terms
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|t| t.0)
                .expect("non-empty");
            return Err(Error::Resource {
                parameter,
                detail: format!(
                    "window side {:.1} holds {:.3e} relays in expectation, cap is {:.3e}",
                    derived.window_side, expected, self.max_points
                ),
            });
        }
        let window = BoxRegion::centered(self.dim, derived.window_side)?;
        Ok((derived, window))
    }
}

/// Side of the relay tiles, in units of `r`.
const RELAY_TILE_SIDE: f64 = 16.0;

/// One replication of the empirical k-hop connection time measure.
///
/// Sinks (intensity `λ_S`) and relays (intensity `λ`) are sampled on the
/// window of side `2(k/μ̂ + q_T + r + M)`; relays and the typical node,
/// started at the origin, perform independent CRWs. Relay jump counts between
/// grid times are Poisson, drawn from one sequential stream.
pub fn simulate_khop_measure(cfg: &InfraConfig, stream: RngStream) -> Result<MeasureSample> {
    let (derived, window) = cfg.checked_window()?;
    let grid = cfg.grid;
    let meta = ReplicationMeta {
        master_seed: stream.master_seed(),
        stream_id: stream.stream_id(),
    };
    let sinks = sample_homogeneous_poisson(derived.lambda_s, &window, &mut stream.child("sinks", 0).rng())?;
    if sinks.is_empty() {
        return Ok(MeasureSample {
            grid,
            indicators: vec![0; grid.len()],
            model: ModelKind::KHop,
            meta,
        });
    }
    let relays = sample_homogeneous_poisson(cfg.lambda, &window, &mut stream.child("relays", 0).rng())?;
    let typical = JumpTrajectory::build(
        cfg.jump_rate,
        cfg.horizon,
        &cfg.dist,
        &mut stream.child("typical", 0).rng(),
    )?;
    // Relays are moved in tile order, which changes from step to step. They
    // are exchangeable and their increments independent of the past, so the
    // reordering leaves the law of the configuration unchanged.
    let mut jump_rng = stream.child("relay-jumps", 0).fast_rng();
    let mut stepper = CrwStepper::new(cfg.dist, cfg.jump_rate)?;
    let mut tiles = RelayTiles::new(&window, RELAY_TILE_SIDE * cfg.r)?;
    tiles.load(relays.coords());
    let mut search = KHopSearch::default();
    let mut now = 0.0;
    let mut indicators = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let t = grid.time(i) * cfg.horizon;
        stepper.advance(&mut jump_rng, tiles.coords_mut(), t - now);
        tiles.rebucket();
        now = t;
        let source = typical.position_at_slice(t);
        let hit = search.connected_tiled(source, sinks.coords(), &mut tiles, derived.k, cfg.r);
        indicators.push(hit as u8);
    }
    Ok(MeasureSample {
        grid,
        indicators,
        model: ModelKind::KHop,
        meta,
    })
}

pub fn simulate_khop_replications(cfg: &InfraConfig, n: usize, stream: RngStream) -> Result<Vec<MeasureSample>> {
    cfg.checked_window()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_khop_measure(cfg, stream.child("replication", i)))
        .collect()
}

/// Direct estimate of `P(o ∈ Ξ^k(0))` from static snapshots: sinks and
/// relays on the same window, typical node at the origin.
pub fn estimate_static_khop(cfg: &InfraConfig, n: usize, stream: RngStream) -> Result<Estimate> {
    let (derived, window) = cfg.checked_window()?;
    let origin = vec![0.0; cfg.dim];
    let hits: Vec<bool> = (0..n as u64)
        .into_par_iter()
        .map_init(KHopSearch::default, |search, i| {
            let rep = stream.child("static", i);
            let sinks = sample_homogeneous_poisson(derived.lambda_s, &window, &mut rep.child("sinks", 0).rng())
                .expect("validated");
            if sinks.is_empty() {
                return false;
            }
            let relays = sample_homogeneous_poisson(cfg.lambda, &window, &mut rep.child("relays", 0).rng())
                .expect("validated");
            search.connected(&origin, sinks.coords(), relays.coords(), cfg.dim, derived.k, cfg.r)
        })
        .collect();
    Estimate::from_indicators(&hits)
}

#[derive(Debug, Clone, Copy)]
pub enum CovarianceModel<'a> {
    TwoScale(&'a TwoScaleConfig),
    Infra(&'a InfraConfig),
}

/// Sample covariance of the indicators at grid indices `s` and `t` over `n`
/// replications. The standard error is that of the mean of the centred
/// products.
pub fn estimate_covariance_decay(
    model: CovarianceModel<'_>,
    s: usize,
    t: usize,
    n: usize,
    stream: RngStream,
) -> Result<Estimate> {
    if s == t {
        return Err(Error::invalid("t", "grid indices must differ; s = t is a variance"));
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let grid = match model {
        CovarianceModel::TwoScale(c) => c.grid,
        CovarianceModel::Infra(c) => c.grid,
    };
    if s >= grid.len() || t >= grid.len() {
        return Err(Error::invalid("s", format!("grid indices must be below {}", grid.len())));
    }
    let samples = match model {
        CovarianceModel::TwoScale(c) => simulate_percolation_replications(c, n, stream)?,
        CovarianceModel::Infra(c) => simulate_khop_replications(c, n, stream)?,
    };
    Ok(covariance_estimate(
        &samples.iter().map(|m| m.indicators[s] as f64).collect::<Vec<_>>(),
        &samples.iter().map(|m| m.indicators[t] as f64).collect::<Vec<_>>(),
    ))
}

/// Unbiased sample covariance with the standard error of the centred products.
pub fn covariance_estimate(x: &[f64], y: &[f64]) -> Estimate {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let (_, sd) = crate::stats::mean_and_sd(&prods);
    Estimate::new(cov, sd / n.sqrt(), x.len())
}
