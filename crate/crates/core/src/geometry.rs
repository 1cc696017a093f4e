//! Euclidean primitives and homogeneous Poisson sampling.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// A point of `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("coords", "dimension must be at least 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coords", "coordinates must be finite"));
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.coords, &other.coords)
    }
}

impl From<[f64; 2]> for Point {
    fn from(c: [f64; 2]) -> Self {
        Self { coords: c.to_vec() }
    }
}

#[inline]
pub fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance_sq(a, b).sqrt()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Closed axis-aligned cube `center + [-side/2, side/2]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    center: Point,
    side: f64,
}

impl BoxRegion {
    pub fn new(center: Point, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::invalid("side", format!("must be positive, got {side}")));
        }
        Ok(Self { center, side })
    }

    /// The box `Q_side` centered at the origin.
    pub fn centered(dim: usize, side: f64) -> Result<Self> {
        Self::new(Point::origin(dim), side)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center.coords[axis] - self.half_side()
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center.coords[axis] + self.half_side()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let h = self.half_side();
        p.iter()
            .zip(&self.center.coords)
            .all(|(x, c)| (x - c).abs() <= h)
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        let slack = self.half_side() - other.half_side();
        slack >= 0.0
            && other
                .center
                .coords
                .iter()
                .zip(&self.center.coords)
                .all(|(o, c)| (o - c).abs() <= slack + 1e-12 * self.side)
    }

    /// Euclidean distance from `p` to the boundary surface of the box.
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        let h = self.half_side();
        let mut inside_gap = f64::INFINITY;
        let mut outside_sq = 0.0;
        let mut outside = false;
        for (x, c) in p.iter().zip(&self.center.coords) {
            let excess = (x - c).abs() - h;
            if excess > 0.0 {
                outside = true;
                outside_sq += excess * excess;
            } else {
                inside_gap = inside_gap.min(-excess);
            }
        }
        if outside {
            outside_sq.sqrt()
        } else {
            inside_gap
        }
    }

    /// Parameter range `[s0, s1] ⊆ [0, 1]` for which `a + s (b - a)` lies in
    /// the box, or `None` if the segment misses it.
    pub fn clip_segment(&self, a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
        let h = self.half_side();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for axis in 0..a.len() {
            let c = self.center.coords[axis];
            let (min, max) = (c - h, c + h);
            let delta = b[axis] - a[axis];
            if delta == 0.0 {
                if a[axis] < min || a[axis] > max {
                    return None;
                }
                continue;
            }
            let mut s0 = (min - a[axis]) / delta;
            let mut s1 = (max - a[axis]) / delta;
            if s0 > s1 {
                std::mem::swap(&mut s0, &mut s1);
            }
            lo = lo.max(s0);
            hi = hi.min(s1);
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        for axis in 0..self.dim() {
            out.push(self.lower(axis) + self.side * rng.random::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        distance_sq(p, self.center.coords()) <= self.radius * self.radius
    }
}

/// Finite point configuration stored as a flat coordinate array.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    region: BoxRegion,
}

impl PointSet {
    pub fn empty(region: BoxRegion) -> Self {
        Self {
            dim: region.dim(),
            coords: Vec::new(),
            region,
        }
    }

    pub fn from_coords(region: BoxRegion, coords: Vec<f64>) -> Result<Self> {
        let dim = region.dim();
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid("coords", "length is not a multiple of the dimension"));
        }
        if let Some(p) = coords.chunks_exact(dim).find(|p| !region.contains(p)) {
            return Err(Error::invalid("coords", format!("point {p:?} lies outside the region")));
        }
        Ok(Self {
            dim,
            coords,
            region,
        })
    }

    pub fn from_points(region: BoxRegion, points: &[Point]) -> Result<Self> {
        let coords = points.iter().flat_map(|p| p.coords().iter().copied()).collect();
        Self::from_coords(region, coords)
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim || !self.region.contains(p) {
            return Err(Error::invalid("point", format!("{p:?} does not fit the region")));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Keeps the points satisfying `keep`.
    pub fn retain(&self, mut keep: impl FnMut(&[f64]) -> bool) -> PointSet {
        let coords = self.iter().filter(|p| keep(p)).flatten().copied().collect();
        PointSet {
            dim: self.dim,
            coords,
            region: self.region.clone(),
        }
    }
}

/// Draws a Poisson(`mean`) count; `mean` must be finite and non-negative.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Homogeneous Poisson process on `region`: Poisson count, then i.i.d. uniform placement.
pub fn sample_homogeneous_poisson<R: Rng + ?Sized>(
    intensity: f64,
    region: &BoxRegion,
    rng: &mut R,
) -> Result<PointSet> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::invalid("intensity", format!("must be non-negative, got {intensity}")));
    }
    let n = poisson_count(intensity * region.volume(), rng) as usize;
    let mut coords = Vec::with_capacity(n * region.dim());
    for _ in 0..n {
        region.sample_uniform(rng, &mut coords);
    }
    Ok(PointSet {
        dim: region.dim(),
        coords,
        region: region.clone(),
    })
}

/// Volume of the `d`-dimensional Euclidean ball of the given radius.
pub fn ball_volume(d: usize, radius: f64) -> f64 {
    assert!(d >= 1, "dimension must be at least 1");
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}
    let mut unit = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        unit *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    unit * radius.powi(d as i32)
}

pub fn count_in_ball(points: &PointSet, ball: &Ball) -> usize {
    points.iter().filter(|p| ball.contains(p)).count()
}
