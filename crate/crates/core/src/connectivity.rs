//! Gilbert graphs over a uniform cell index, union-find components, the
//! box-escape percolation indicator and depth-limited sink reachability.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{distance, distance_sq, BoxRegion, PointSet};

const MAX_DIM: usize = 8;

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = x;
        while self.parent[cur] as usize != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Uniform grid over the bounding box of a point cloud, cells of side ≥ r,
/// filled by counting sort. Points within distance r lie in the same or in
/// adjacent cells.
#[derive(Debug, Clone, Default)]
pub struct CellIndex {
    dim: usize,
    side: f64,
    inv_side: f64,
    lower: Vec<f64>,
    shape: Vec<usize>,
    starts: Vec<u32>,
    entries: Vec<u32>,
    cell_of: Vec<u32>,
}

impl CellIndex {
    pub fn build(coords: &[f64], dim: usize, r: f64) -> Self {
        let mut index = Self::default();
        index.rebuild(coords, dim, r);
        index
    }

    /// Rebuilds in place, reusing allocations.
    pub fn rebuild(&mut self, coords: &[f64], dim: usize, r: f64) {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported by the cell index");
        let n = coords.len() / dim;
        self.dim = dim;
        self.lower.clear();
        self.shape.clear();
        let mut upper = vec![f64::NEG_INFINITY; dim];
        self.lower.resize(dim, f64::INFINITY);
        for p in coords.chunks_exact(dim) {
            for a in 0..dim {
                self.lower[a] = self.lower[a].min(p[a]);
                upper[a] = upper[a].max(p[a]);
            }
        }
        if n == 0 {
            self.lower.iter_mut().for_each(|l| *l = 0.0);
            upper.iter_mut().for_each(|u| *u = 0.0);
        }
        // slightly inflated so rounding never separates an r-close pair by two cells
        let mut side = r * (1.0 + 1e-9);
        let cap = (4 * n).max(1 << 16);
        loop {
            let cells: f64 = (0..dim)
                .map(|a| ((upper[a] - self.lower[a]) / side).floor() + 1.0)
                .product();
            if cells <= cap as f64 {
                break;
            }
            side *= 1.5;
        }
        self.side = side;
        self.inv_side = 1.0 / side;
        let mut total = 1usize;
        for a in 0..dim {
            let s = ((upper[a] - self.lower[a]) / side).floor() as usize + 1;
            self.shape.push(s);
            total *= s;
        }
        self.starts.clear();
        self.starts.resize(total + 1, 0);
        self.cell_of.clear();
        for p in coords.chunks_exact(dim) {
            let c = self.linear_cell(p) as u32;
            self.cell_of.push(c);
            self.starts[c as usize + 1] += 1;
        }
        for c in 0..total {
            self.starts[c + 1] += self.starts[c];
        }
        self.entries.clear();
        self.entries.resize(n, 0);
        let mut fill = self.starts.clone();
        for (i, &c) in self.cell_of.iter().enumerate() {
            self.entries[fill[c as usize] as usize] = i as u32;
            fill[c as usize] += 1;
        }
    }

    fn axis_cell(&self, a: usize, x: f64) -> isize {
        // truncation equals floor once clamped at zero, and avoids a libm call
        (((x - self.lower[a]) * self.inv_side) as isize).clamp(0, self.shape[a] as isize - 1)
    }

    fn linear_cell(&self, p: &[f64]) -> usize {
        let mut id = 0usize;
        for a in 0..self.dim {
            id = id * self.shape[a] + self.axis_cell(a, p[a]) as usize;
        }
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Calls `f(j)` for every indexed point `j` in the 3^d cells around `q`.
    /// Callers filter by distance.
    #[inline]
    pub fn for_each_candidate(&self, q: &[f64], mut f: impl FnMut(usize)) {
        if self.entries.is_empty() {
            return;
        }
        if self.dim == 2 {
            let cx = self.axis_cell(0, q[0]);
            let cy = self.axis_cell(1, q[1]);
            let (sx, sy) = (self.shape[0] as isize, self.shape[1] as isize);
            for x in (cx - 1).max(0)..=(cx + 1).min(sx - 1) {
                let row = x * sy;
                let y0 = (cy - 1).max(0);
                let y1 = (cy + 1).min(sy - 1);
                let lo = self.starts[(row + y0) as usize] as usize;
                let hi = self.starts[(row + y1) as usize + 1] as usize;
                for &j in &self.entries[lo..hi] {
                    f(j as usize);
                }
            }
            return;
        }
        let mut base = [0isize; MAX_DIM];
        for a in 0..self.dim {
            base[a] = self.axis_cell(a, q[a]);
        }
        let mut offset = [-1isize; MAX_DIM];
        'cells: loop {
            let mut id = 0usize;
            let mut valid = true;
            for a in 0..self.dim {
                let c = base[a] + offset[a];
                if c < 0 || c >= self.shape[a] as isize {
                    valid = false;
                    break;
                }
                id = id * self.shape[a] + c as usize;
            }
            if valid {
                let (lo, hi) = (self.starts[id] as usize, self.starts[id + 1] as usize);
                for &j in &self.entries[lo..hi] {
                    f(j as usize);
                }
            }
            for a in 0..self.dim {
                offset[a] += 1;
                if offset[a] <= 1 {
                    continue 'cells;
                }
                offset[a] = -1;
            }
            break;
        }
    }
}

/// Component labelling of a point set's Gilbert graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
    pub origin_label: Option<u32>,
}

/// Gilbert graph: edge between distinct points at distance ≤ r. Edges are
/// enumerated from the cell index on demand, never stored.
#[derive(Debug, Clone)]
pub struct GilbertGraph {
    points: PointSet,
    radius: f64,
    index: CellIndex,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

pub fn build_graph(points: PointSet, r: f64) -> Result<GilbertGraph> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", format!("connection radius must be positive, got {r}")));
    }
    let dim = points.dim();
    let index = CellIndex::build(points.coords(), dim, r);
    let n = points.len();
    let r2 = r * r;
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        let p = points.point(i);
        index.for_each_candidate(p, |j| {
            if j > i && distance_sq(p, points.point(j)) <= r2 {
                uf.union(i, j);
            }
        });
    }
    let mut root_label = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut sizes = Vec::new();
    for i in 0..n {
        let root = uf.find(i);
        if root_label[root] == u32::MAX {
            root_label[root] = sizes.len() as u32;
            sizes.push(0);
        }
        let l = root_label[root];
        sizes[l as usize] += 1;
        labels.push(l);
    }
    Ok(GilbertGraph {
        points,
        radius: r,
        index,
        labels,
        sizes,
    })
}

impl GilbertGraph {
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && distance_sq(self.points.point(i), self.points.point(j)) <= self.radius * self.radius
    }

    pub fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        let p = self.points.point(i);
        let r2 = self.radius * self.radius;
        self.index.for_each_candidate(p, |j| {
            if j != i && distance_sq(p, self.points.point(j)) <= r2 {
                f(j);
            }
        });
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_neighbor(i, |j| out.push(j));
        out.sort_unstable();
        out
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn component_label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Label of the largest component (lowest label on ties).
    pub fn largest_component(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (l, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, l as u32));
            }
        }
        best.map(|(_, l)| l)
    }

    pub fn summary(&self, origin: Option<usize>) -> ComponentSummary {
        ComponentSummary {
            labels: self.labels.clone(),
            sizes: self.sizes.clone(),
            origin_label: origin.map(|o| self.labels[o]),
        }
    }

    /// Hop count of a shortest path, `None` if `i` and `j` are disconnected.
    pub fn graph_distance(&self, i: usize, j: usize) -> Option<usize> {
        if i == j {
            return Some(0);
        }
        if self.labels[i] != self.labels[j] {
            return None;
        }
        let mut depth = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        depth[i] = 0;
        queue.push_back(i);
        while let Some(v) = queue.pop_front() {
            let dv = depth[v];
            let mut found = false;
            self.for_each_neighbor(v, |w| {
                if depth[w] == u32::MAX {
                    depth[w] = dv + 1;
                    if w == j {
                        found = true;
                    }
                    queue.push_back(w);
                }
            });
            if found {
                return Some(dv as usize + 1);
            }
        }
        None
    }

    /// BFS hop counts from `i` to every vertex.
    pub fn hops_from(&self, i: usize) -> Vec<Option<usize>> {
        let mut depth = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        depth[i] = 0;
        queue.push_back(i);
        while let Some(v) = queue.pop_front() {
            let dv = depth[v];
            self.for_each_neighbor(v, |w| {
                if depth[w] == u32::MAX {
                    depth[w] = dv + 1;
                    queue.push_back(w);
                }
            });
        }
        depth
            .into_iter()
            .map(|d| (d != u32::MAX).then_some(d as usize))
            .collect()
    }
}

/// The box-escape indicator π^M: does the component of the origin contain a
/// node within `band` of the boundary of `Q_M` (side `m`, centered at the
/// origin)?
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolationCriterion {
    pub r: f64,
    pub m: f64,
    pub band: f64,
}

impl PercolationCriterion {
    pub fn new(r: f64, m: f64) -> Result<Self> {
        Self::with_band(r, m, 1.0)
    }

    pub fn with_band(r: f64, m: f64, band: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("r", format!("must be positive, got {r}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("m", format!("must be positive, got {m}")));
        }
        if !(band >= 0.0 && band.is_finite()) {
            return Err(Error::invalid("band", format!("must be non-negative, got {band}")));
        }
        Ok(Self { r, m, band })
    }

    /// Side of the sampling window `Q_{M+2r}` that makes the check exact.
    pub fn window_side(&self) -> f64 {
        self.m + 2.0 * self.r
    }

    #[inline]
    fn reaches_band(&self, p: &[f64]) -> bool {
        let h = 0.5 * self.m;
        let mut inside_gap = f64::INFINITY;
        let mut outside_sq = 0.0;
        let mut outside = false;
        for &x in p {
            let excess = x.abs() - h;
            if excess > 0.0 {
                outside = true;
                outside_sq += excess * excess;
            } else {
                inside_gap = inside_gap.min(-excess);
            }
        }
        if outside {
            outside_sq <= self.band * self.band
        } else {
            inside_gap <= self.band
        }
    }

    /// π^M on `nodes`. With `append_origin`, the static origin is added as an
    /// extra vertex; otherwise a node located exactly at the origin is the source.
    pub fn check(&self, nodes: &PointSet, append_origin: bool) -> Result<bool> {
        let needed = BoxRegion::centered(nodes.dim(), self.window_side())?;
        if !nodes.region().contains_box(&needed) {
            return Err(Error::invalid(
                "region",
                format!(
                    "sampling window (side {}) must contain Q_(M+2r) of side {}",
                    nodes.region().side(),
                    needed.side()
                ),
            ));
        }
        let mut scratch = BfsScratch::default();
        if append_origin {
            return Ok(self.check_coords(nodes.coords(), nodes.dim(), &mut scratch));
        }
        let source = nodes
            .iter()
            .position(|p| p.iter().all(|&x| x == 0.0))
            .ok_or_else(|| Error::invalid("nodes", "no node at the origin and origin_included is false"))?;
        Ok(self.bfs_escape(nodes.coords(), nodes.dim(), source, &mut scratch))
    }

    /// π^M with the origin appended to `coords` (flat, `dim` per point).
    pub fn check_coords(&self, coords: &[f64], dim: usize, scratch: &mut BfsScratch) -> bool {
        scratch.buffer.clear();
        scratch.buffer.extend_from_slice(coords);
        scratch.buffer.extend(std::iter::repeat_n(0.0, dim));
        let source = scratch.buffer.len() / dim - 1;
        let buffer = std::mem::take(&mut scratch.buffer);
        let hit = self.bfs_escape(&buffer, dim, source, scratch);
        scratch.buffer = buffer;
        hit
    }

    fn bfs_escape(&self, coords: &[f64], dim: usize, source: usize, scratch: &mut BfsScratch) -> bool {
        let point = |i: usize| &coords[i * dim..(i + 1) * dim];
        if self.reaches_band(point(source)) {
            return true;
        }
        let n = coords.len() / dim;
        scratch.index.rebuild(coords, dim, self.r);
        scratch.visited.clear();
        scratch.visited.resize(n, false);
        scratch.queue.clear();
        scratch.visited[source] = true;
        scratch.queue.push(source as u32);
        let r2 = self.r * self.r;
        let mut head = 0;
        while head < scratch.queue.len() {
            let v = scratch.queue[head] as usize;
            head += 1;
            let pv = point(v);
            let mut hit = false;
            let (index, visited, queue) = (&scratch.index, &mut scratch.visited, &mut scratch.queue);
            index.for_each_candidate(pv, |w| {
                if !visited[w] && distance_sq(pv, point(w)) <= r2 {
                    visited[w] = true;
                    if self.reaches_band(point(w)) {
                        hit = true;
                    }
                    queue.push(w as u32);
                }
            });
            if hit {
                return true;
            }
        }
        false
    }
}

/// Reusable buffers for repeated BFS queries.
#[derive(Debug, Default)]
pub struct BfsScratch {
    index: CellIndex,
    visited: Vec<bool>,
    queue: Vec<u32>,
    buffer: Vec<f64>,
}

/// π^M with the default band of 1.
pub fn percolates_m(nodes: &PointSet, origin_included: bool, r: f64, m: f64) -> Result<bool> {
    PercolationCriterion::new(r, m)?.check(nodes, origin_included)
}

/// Is some sink within graph distance `k` of `source` in the Gilbert graph
/// on `{source, sink} ∪ relays`?
pub fn k_hop_connected(source: &[f64], sinks: &PointSet, relays: &PointSet, k: usize, r: f64) -> Result<bool> {
    if k == 0 {
        return Err(Error::invalid("k", "hop limit must be at least 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", format!("must be positive, got {r}")));
    }
    let mut search = KHopSearch::default();
    Ok(search.connected(source, sinks.coords(), relays.coords(), relays.dim(), k, r))
}

/// Depth-limited BFS from a source through relays towards a sink set.
///
/// A relay at depth `h` is expanded only if `h + ⌈|v − s| / r⌉ ≤ k` for some
/// sink `s`; every vertex on a shortest useful path satisfies the same bound,
/// so the pruning never changes the answer.
#[derive(Debug, Default)]
pub struct KHopSearch {
    relay_coords: Vec<f64>,
    sink_coords: Vec<f64>,
    relay_index: CellIndex,
    sink_index: CellIndex,
    depth: Vec<u32>,
    heuristic: Vec<u32>,
    buckets: Vec<Vec<u32>>,
    found: Vec<u32>,
    pub expanded: u64,
}

const PRUNE_MAX_SINKS: usize = 64;

/// Outcome of the checks that need no relays.
enum Trivial {
    Decided(bool),
    NeedRelays,
}

impl KHopSearch {
    fn prepare_sinks(&mut self, source: &[f64], sinks: &[f64], dim: usize, k: usize, r: f64) -> Trivial {
        let reach = k as f64 * r;
        let reach2 = reach * reach;
        self.sink_coords.clear();
        for s in sinks.chunks_exact(dim) {
            if distance_sq(s, source) <= reach2 {
                self.sink_coords.extend_from_slice(s);
            }
        }
        if self.sink_coords.is_empty() {
            return Trivial::Decided(false);
        }
        if self.sink_coords.chunks_exact(dim).any(|s| distance_sq(s, source) <= r * r) {
            return Trivial::Decided(true);
        }
        if k == 1 {
            return Trivial::Decided(false);
        }
        if self.sink_coords.len() / dim > PRUNE_MAX_SINKS {
            self.sink_index.rebuild(&self.sink_coords, dim, r);
        }
        Trivial::NeedRelays
    }

    pub fn connected(&mut self, source: &[f64], sinks: &[f64], relays: &[f64], dim: usize, k: usize, r: f64) -> bool {
        if let Trivial::Decided(answer) = self.prepare_sinks(source, sinks, dim, k, r) {
            return answer;
        }
        // relays further than (k-1)·r from the source cannot be at depth ≤ k-1
        let relay_reach = (k - 1) as f64 * r;
        let mut coords = std::mem::take(&mut self.relay_coords);
        coords.clear();
        for p in relays.chunks_exact(dim) {
            if p.iter().zip(source).all(|(x, s)| (x - s).abs() <= relay_reach) {
                coords.extend_from_slice(p);
            }
        }
        let mut index = std::mem::take(&mut self.relay_index);
        index.rebuild(&coords, dim, r);
        let r2 = r * r;
        let hit = self.bfs(source, dim, k, r, coords.len() / dim, |q, out| {
            index.for_each_candidate(q, |j| {
                if distance_sq(q, &coords[j * dim..(j + 1) * dim]) <= r2 {
                    out.push(j as u32);
                }
            });
        }, |j, p| p.copy_from_slice(&coords[j * dim..(j + 1) * dim]));
        self.relay_coords = coords;
        self.relay_index = index;
        hit
    }

    /// Same answer as [`KHopSearch::connected`], with relays held in a
    /// [`RelayTiles`] store that indexes only the tiles the search touches.
    pub fn connected_tiled(&mut self, source: &[f64], sinks: &[f64], tiles: &mut RelayTiles, k: usize, r: f64) -> bool {
        let dim = tiles.dim;
        if let Trivial::Decided(answer) = self.prepare_sinks(source, sinks, dim, k, r) {
            return answer;
        }
        tiles.set_radius(r);
        let n = tiles.len();
        let cell = std::cell::RefCell::new(tiles);
        self.bfs(source, dim, k, r, n, |q, out| cell.borrow_mut().neighbors(q, out), |j, p| {
            p.copy_from_slice(cell.borrow().point(j))
        })
    }

    /// Best-first search in order of `g + h`, where `g` is the hop count
    /// from the source and `h = max(1, ⌈|v − s| / r⌉)` over the nearest sink
    /// (or `h = 1` when sinks are too many to scan). `h` never exceeds the
    /// true number of remaining hops, so the first relay popped next to a
    /// sink proves a path of at most `k` hops, and exhausting all entries
    /// with `g + h ≤ k` proves there is none.
    #[allow(clippy::too_many_arguments)]
    fn bfs(
        &mut self,
        source: &[f64],
        dim: usize,
        k: usize,
        r: f64,
        n: usize,
        mut neighbors: impl FnMut(&[f64], &mut Vec<u32>),
        point: impl Fn(usize, &mut [f64]),
    ) -> bool {
        if n == 0 {
            return false;
        }
        let r2 = r * r;
        let prune = self.sink_coords.len() / dim <= PRUNE_MAX_SINKS;
        self.depth.clear();
        self.depth.resize(n, u32::MAX);
        self.heuristic.clear();
        self.heuristic.resize(n, 0);
        if self.buckets.len() < k + 1 {
            self.buckets.resize_with(k + 1, Vec::new);
        }
        self.buckets.iter_mut().for_each(Vec::clear);
        let sink_coords = &self.sink_coords;
        let estimate = |p: &[f64]| -> u32 {
            if !prune {
                return 1;
            }
            let lb = sink_coords
                .chunks_exact(dim)
                .map(|s| (distance(p, s) / r - 1e-9).ceil().max(1.0))
                .fold(f64::INFINITY, f64::min);
            lb.min(u32::MAX as f64) as u32
        };

        let mut buf = [0.0; MAX_DIM];
        let pw = &mut buf[..dim];
        let mut pv_buf = [0.0; MAX_DIM];
        let pv = &mut pv_buf[..dim];
        let mut found = std::mem::take(&mut self.found);
        let (depth, heuristic, buckets) = (&mut self.depth, &mut self.heuristic, &mut self.buckets);
        let relax = |depth: &mut [u32], heuristic: &mut [u32], buckets: &mut [Vec<u32>], w: usize, g: u32, pw: &mut [f64]| {
            if g >= depth[w] {
                return;
            }
            if depth[w] == u32::MAX {
                point(w, pw);
                heuristic[w] = estimate(pw);
            }
            depth[w] = g;
            let f = g as usize + heuristic[w] as usize;
            if f <= k {
                buckets[f].push(w as u32);
            }
        };
        found.clear();
        neighbors(source, &mut found);
        for &w in &found {
            relax(depth, heuristic, buckets, w as usize, 1, pw);
        }
        let mut hit = false;
        'search: for f in 1..=k {
            while let Some(v) = buckets[f].pop() {
                let v = v as usize;
                if depth[v] as usize + heuristic[v] as usize != f {
                    continue;
                }
                self.expanded += 1;
                point(v, pv);
                let adjacent_sink = if prune {
                    sink_coords.chunks_exact(dim).any(|s| distance_sq(s, pv) <= r2)
                } else {
                    let mut adjacent = false;
                    self.sink_index.for_each_candidate(pv, |s| {
                        adjacent |= distance_sq(&sink_coords[s * dim..(s + 1) * dim], pv) <= r2;
                    });
                    adjacent
                };
                if adjacent_sink {
                    hit = true;
                    break 'search;
                }
                let g = depth[v] + 1;
                if g as usize > k - 1 {
                    continue;
                }
                found.clear();
                neighbors(pv, &mut found);
                for &w in &found {
                    relax(depth, heuristic, buckets, w as usize, g, pw);
                }
            }
        }
        self.found = found;
        hit
    }
}

/// Relays bucketed into square tiles over a fixed frame, with a cell index
/// per tile built on first use after each [`RelayTiles::load`]. Points
/// outside the frame fall into the nearest edge tile.
#[derive(Debug, Clone)]
pub struct RelayTiles {
    dim: usize,
    lower: Vec<f64>,
    inv_side: f64,
    shape: Vec<usize>,
    starts: Vec<u32>,
    coords: Vec<f64>,
    spare: Vec<f64>,
    fill: Vec<u32>,
    tile_of: Vec<u32>,
    indexes: Vec<CellIndex>,
    built: Vec<u32>,
    epoch: u32,
    r: f64,
}

impl RelayTiles {
    pub fn new(frame: &BoxRegion, tile_side: f64) -> Result<Self> {
        if !(tile_side > 0.0 && tile_side.is_finite()) {
            return Err(Error::invalid("tile_side", format!("must be positive, got {tile_side}")));
        }
        let dim = frame.dim();
        if dim > MAX_DIM {
            return Err(Error::invalid("dim", format!("at most {MAX_DIM} supported")));
        }
        let lower: Vec<f64> = frame.center().coords().iter().map(|c| c - frame.side() / 2.0).collect();
        let per_axis = ((frame.side() / tile_side).ceil() as usize).max(1);
        let shape = vec![per_axis; dim];
        let total = per_axis.pow(dim as u32);
        Ok(Self {
            dim,
            lower,
            inv_side: 1.0 / tile_side,
            shape,
            starts: vec![0; total + 1],
            coords: Vec::new(),
            spare: Vec::new(),
            fill: Vec::new(),
            tile_of: Vec::new(),
            indexes: vec![CellIndex::default(); total],
            built: vec![0; total],
            epoch: 1,
            r: 0.0,
        })
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

    fn axis_tile(&self, a: usize, x: f64) -> usize {
        // truncation equals floor once clamped at zero, and avoids a libm call
        (((x - self.lower[a]) * self.inv_side) as isize).clamp(0, self.shape[a] as isize - 1) as usize
    }

    fn tile(&self, p: &[f64]) -> usize {
        (0..self.dim).fold(0, |id, a| id * self.shape[a] + self.axis_tile(a, p[a]))
    }

    /// Replaces the stored relays; ids are positions in tile order.
    pub fn load(&mut self, relays: &[f64]) {
        self.coords.clear();
        self.coords.extend_from_slice(relays);
        self.rebucket();
    }

    /// Stored relays in tile order, for moving them in place. Call
    /// [`RelayTiles::rebucket`] afterwards.
    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    /// Re-sorts the stored relays into tiles after they moved. Since most
    /// relays stay in their tile the scatter is nearly sequential.
    pub fn rebucket(&mut self) {
        std::mem::swap(&mut self.coords, &mut self.spare);
        let dim = self.dim;
        self.tile_of.clear();
        self.starts.iter_mut().for_each(|s| *s = 0);
        for p in self.spare.chunks_exact(dim) {
            let t = self.tile(p) as u32;
            self.tile_of.push(t);
            self.starts[t as usize + 1] += 1;
        }
        for t in 0..self.indexes.len() {
            self.starts[t + 1] += self.starts[t];
        }
        self.coords.resize(self.spare.len(), 0.0);
        let mut fill = std::mem::take(&mut self.fill);
        fill.clear();
        fill.extend_from_slice(&self.starts);
        for (p, &t) in self.spare.chunks_exact(dim).zip(&self.tile_of) {
            let slot = fill[t as usize] as usize;
            self.coords[slot * dim..(slot + 1) * dim].copy_from_slice(p);
            fill[t as usize] += 1;
        }
        self.fill = fill;
        self.epoch = self.epoch.wrapping_add(1).max(1);
    }

    fn set_radius(&mut self, r: f64) {
        if r != self.r {
            self.r = r;
            self.epoch = self.epoch.wrapping_add(1).max(1);
        }
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    /// Pushes the ids of all relays within `r` of `q`.
    fn neighbors(&mut self, q: &[f64], out: &mut Vec<u32>) {
        let dim = self.dim;
        let r = self.r;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for a in 0..dim {
            lo[a] = self.axis_tile(a, q[a] - r);
            hi[a] = self.axis_tile(a, q[a] + r);
        }
        let mut at = lo;
        loop {
            let t = (0..dim).fold(0, |id, a| id * self.shape[a] + at[a]);
            let (s, e) = (self.starts[t] as usize, self.starts[t + 1] as usize);
            if e > s {
                let members = &self.coords[s * dim..e * dim];
                if self.built[t] != self.epoch {
                    self.indexes[t].rebuild(members, dim, r);
                    self.built[t] = self.epoch;
                }
                self.indexes[t].for_each_candidate(q, |j| {
                    if distance_sq(q, &members[j * dim..(j + 1) * dim]) <= r * r {
                        out.push((s + j) as u32);
                    }
                });
            }
            let mut a = dim;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                if at[a] < hi[a] {
                    at[a] += 1;
                    break;
                }
                at[a] = lo[a];
            }
        }
    }
}
