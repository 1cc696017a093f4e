//! Brute-force oracles for the connectivity routines, and a runner that
//! compares them on random small instances.

use rand::Rng;

use crate::connectivity::{build_graph, k_hop_connected, KHopSearch, RelayTiles};
use crate::error::Result;
use crate::geometry::{distance_sq, BoxRegion, PointSet};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    pub mismatches: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Adjacency matrix by exhaustive pairwise scan.
pub fn adjacency_matrix(coords: &[f64], dim: usize, r: f64) -> Vec<Vec<bool>> {
    let n = coords.len() / dim;
    let p = |i: usize| &coords[i * dim..(i + 1) * dim];
    (0..n)
        .map(|i| (0..n).map(|j| i != j && distance_sq(p(i), p(j)) <= r * r).collect())
        .collect()
}

/// Hop distances from `source` by BFS over an explicit adjacency matrix.
pub fn matrix_bfs(adj: &[Vec<bool>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut frontier = vec![source];
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &v in &frontier {
            for (w, &e) in adj[v].iter().enumerate() {
                if e && dist[w].is_none() {
                    dist[w] = Some(d);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    dist
}

/// Is some target reachable from `source` in at most `k` steps? Computed as
/// the boolean vector-matrix powers `e_source (I + A)^k`.
pub fn reachable_within(adj: &[Vec<bool>], source: usize, targets: &[usize], k: usize) -> bool {
    let n = adj.len();
    let mut reach = vec![false; n];
    reach[source] = true;
    for _ in 0..k {
        let mut next = reach.clone();
        for v in 0..n {
            if reach[v] {
                for w in 0..n {
                    next[w] |= adj[v][w];
                }
            }
        }
        reach = next;
    }
    targets.iter().any(|&t| reach[t])
}

fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> (BoxRegion, Vec<f64>) {
    let side = rng.random_range(2.0..8.0);
    let region = BoxRegion::centered(2, side).expect("positive side");
    let n = rng.random_range(0..=max_n);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        region.sample_uniform(rng, &mut coords);
    }
    (region, coords)
}

/// Union-find component labels against BFS labels, up to relabeling.
pub fn components_suite(instances: usize, stream: RngStream) -> Result<SuiteReport> {
    let mut mismatches = 0;
    for i in 0..instances as u64 {
        let mut rng = stream.child("components", i).rng();
        let (region, coords) = random_instance(&mut rng, 30);
        let r = rng.random_range(0.5..1.5);
        let adj = adjacency_matrix(&coords, 2, r);
        let graph = build_graph(PointSet::from_coords(region, coords)?, r)?;
        let n = adj.len();
        let reach: Vec<Vec<Option<usize>>> = (0..n).map(|s| matrix_bfs(&adj, s)).collect();
        let ok = (0..n).all(|a| {
            (0..n).all(|b| (graph.component_label(a) == graph.component_label(b)) == reach[a][b].is_some())
                && (0..n).all(|b| graph.is_edge(a, b) == adj[a][b])
        });
        mismatches += !ok as usize;
    }
    Ok(SuiteReport {
        name: "components",
        instances,
        mismatches,
    })
}

pub fn graph_distance_suite(instances: usize, stream: RngStream) -> Result<SuiteReport> {
    let mut mismatches = 0;
    for i in 0..instances as u64 {
        let mut rng = stream.child("graph-distance", i).rng();
        let (region, coords) = random_instance(&mut rng, 30);
        let r = rng.random_range(0.5..1.5);
        let adj = adjacency_matrix(&coords, 2, r);
        let graph = build_graph(PointSet::from_coords(region, coords)?, r)?;
        let n = adj.len();
        let ok = (0..n).all(|a| {
            let d = matrix_bfs(&adj, a);
            (0..n).all(|b| graph.graph_distance(a, b) == d[b])
        });
        mismatches += !ok as usize;
    }
    Ok(SuiteReport {
        name: "graph_distance",
        instances,
        mismatches,
    })
}

/// k-hop connectivity, both the plain and the tiled search, against matrix powers.
pub fn k_hop_suite(instances: usize, stream: RngStream) -> Result<SuiteReport> {
    let mut mismatches = 0;
    let mut tiled = KHopSearch::default();
    for i in 0..instances as u64 {
        let mut rng = stream.child("k-hop", i).rng();
        let (region, relays) = random_instance(&mut rng, 15);
        let n_sinks = rng.random_range(0..=4);
        let mut sinks = Vec::new();
        for _ in 0..n_sinks {
            region.sample_uniform(&mut rng, &mut sinks);
        }
        let mut source = Vec::new();
        region.sample_uniform(&mut rng, &mut source);
        let k = rng.random_range(1..=8);
        let r = rng.random_range(0.5..1.5);

        // vertex 0 is the source, then relays, then sinks
        let mut all = source.clone();
        all.extend_from_slice(&relays);
        let n_relays = relays.len() / 2;
        // sinks never forward, so drop edges out of sinks and between sinks
        let mut adj = {
            let mut c = all.clone();
            c.extend_from_slice(&sinks);
            adjacency_matrix(&c, 2, r)
        };
        for s in 1 + n_relays..adj.len() {
            adj[s].iter_mut().for_each(|e| *e = false);
        }
        let targets: Vec<usize> = (1 + n_relays..1 + n_relays + n_sinks).collect();
        let expected = reachable_within(&adj, 0, &targets, k);

        let relay_set = PointSet::from_coords(region.clone(), relays.clone())?;
        let sink_set = PointSet::from_coords(region.clone(), sinks.clone())?;
        let plain = k_hop_connected(&source, &sink_set, &relay_set, k, r)?;
        let mut tiles = RelayTiles::new(&region, 1.5)?;
        tiles.load(&relays);
        let via_tiles = tiled.connected_tiled(&source, &sinks, &mut tiles, k, r);
        mismatches += (plain != expected || via_tiles != expected) as usize;
    }
    Ok(SuiteReport {
        name: "k_hop_connected",
        instances,
        mismatches,
    })
}

/// All suites, `instances` random instances each.
pub fn run_connectivity_suites(instances: usize, stream: RngStream) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        components_suite(instances, stream)?,
        graph_distance_suite(instances, stream)?,
        k_hop_suite(instances, stream)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_oracles_on_a_path() {
        let coords = [0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 5.0, 0.0];
        let adj = adjacency_matrix(&coords, 2, 1.0);
        assert_eq!(matrix_bfs(&adj, 0), vec![Some(0), Some(1), Some(2), None]);
        assert!(reachable_within(&adj, 0, &[2], 2));
        assert!(!reachable_within(&adj, 0, &[2], 1));
        assert!(!reachable_within(&adj, 0, &[3], 10));
    }

    #[test]
    fn suites_pass() {
        for report in run_connectivity_suites(100, RngStream::new(1, 1)).unwrap() {
            assert!(report.passed(), "{report:?}");
        }
    }
}
