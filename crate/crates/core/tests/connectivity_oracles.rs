//! Connectivity routines against Floyd–Warshall on explicit distance
//! matrices, plus property checks on random point sets.

#![allow(clippy::needless_range_loop)]

use mscale::connectivity::{build_graph, k_hop_connected, percolates_m, KHopSearch, RelayTiles};
use mscale::geometry::{BoxRegion, PointSet};
use mscale::RngStream;
use proptest::prelude::*;
use rand::Rng;

const INF: usize = usize::MAX / 4;

/// All-pairs hop counts; `blocked[v]` forbids paths through `v`.
fn floyd(coords: &[[f64; 2]], r: f64, blocked: &[bool]) -> Vec<Vec<usize>> {
    let n = coords.len();
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            let (dx, dy) = (coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
            if i != j && (dx * dx + dy * dy).sqrt() <= r {
                d[i][j] = 1;
            }
        }
    }
    for via in 0..n {
        if blocked[via] {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let through = d[i][via] + d[via][j];
                if through < d[i][j] {
                    d[i][j] = through;
                }
            }
        }
    }
    d
}

fn instance(rng: &mut impl Rng, max_n: usize) -> (BoxRegion, Vec<[f64; 2]>) {
    let side = rng.random_range(2.0..8.0);
    let n = rng.random_range(0..=max_n);
    let pts = (0..n)
        .map(|_| [rng.random_range(-side / 2.0..side / 2.0), rng.random_range(-side / 2.0..side / 2.0)])
        .collect();
    (BoxRegion::centered(2, side).unwrap(), pts)
}

fn flat(pts: &[[f64; 2]]) -> Vec<f64> {
    pts.iter().flatten().copied().collect()
}

#[test]
fn components_and_distances_match_floyd() {
    let stream = RngStream::new(20, 1);
    for i in 0..1000 {
        let mut rng = stream.child("instance", i).rng();
        let (region, pts) = instance(&mut rng, 30);
        let r = rng.random_range(0.4..1.6);
        let d = floyd(&pts, r, &vec![false; pts.len()]);
        let g = build_graph(PointSet::from_coords(region, flat(&pts)).unwrap(), r).unwrap();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                let expect = (d[a][b] < INF).then_some(d[a][b]);
                assert_eq!(g.graph_distance(a, b), expect, "instance {i}, pair ({a}, {b})");
                assert_eq!(g.component_label(a) == g.component_label(b), expect.is_some());
            }
        }
        let sizes: usize = g.component_sizes().iter().sum();
        assert_eq!(sizes, pts.len());
    }
}

#[test]
fn k_hop_matches_floyd() {
    let stream = RngStream::new(20, 2);
    let mut search = KHopSearch::default();
    let mut hits = 0;
    for i in 0..1000 {
        let mut rng = stream.child("instance", i).rng();
        let (region, relays) = instance(&mut rng, 15);
        let (_, sinks) = instance(&mut rng, 4);
        let sinks: Vec<[f64; 2]> = sinks.into_iter().filter(|s| region.contains(s)).collect();
        let source = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let k = rng.random_range(1..=8);
        let r = rng.random_range(0.5..1.5);

        let mut all = vec![source];
        all.extend_from_slice(&relays);
        all.extend_from_slice(&sinks);
        let mut blocked = vec![false; all.len()];
        blocked[1 + relays.len()..].iter_mut().for_each(|b| *b = true);
        let d = floyd(&all, r, &blocked);
        let expect = (1 + relays.len()..all.len()).any(|s| d[0][s] <= k);
        hits += expect as usize;

        let relay_set = PointSet::from_coords(region.clone(), flat(&relays)).unwrap();
        let sink_set = PointSet::from_coords(region.clone(), flat(&sinks)).unwrap();
        assert_eq!(k_hop_connected(&source, &sink_set, &relay_set, k, r).unwrap(), expect, "instance {i}");
        let mut tiles = RelayTiles::new(&region, 2.0).unwrap();
        tiles.load(&flat(&relays));
        assert_eq!(search.connected_tiled(&source, &flat(&sinks), &mut tiles, k, r), expect, "instance {i}");
    }
    assert!(hits > 100 && hits < 900, "instances should mix both outcomes, got {hits}");
}

#[test]
fn k_equal_one_with_sink_beyond_r() {
    let region = BoxRegion::centered(2, 10.0).unwrap();
    let sinks = PointSet::from_coords(region.clone(), vec![1.5, 0.0]).unwrap();
    let relays = PointSet::empty(region);
    assert!(!k_hop_connected(&[0.0, 0.0], &sinks, &relays, 1, 1.0).unwrap());
}

#[test]
fn straight_chain_escapes() {
    let region = BoxRegion::centered(2, 24.0).unwrap();
    let chain: Vec<f64> = (1..=10).flat_map(|i| [i as f64, 0.0]).collect();
    let nodes = PointSet::from_coords(region.clone(), chain).unwrap();
    assert!(percolates_m(&nodes, true, 1.0, 20.0).unwrap());
    // a single missing link breaks it
    let gap: Vec<f64> = (1..=10).filter(|&i| i != 5).flat_map(|i| [i as f64, 0.0]).collect();
    let nodes = PointSet::from_coords(region, gap).unwrap();
    assert!(!percolates_m(&nodes, true, 1.0, 20.0).unwrap());
}

fn points_strategy(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-4.0..4.0f64, -4.0..4.0f64), 0..max)
}

fn set(pts: &[(f64, f64)]) -> PointSet {
    let coords = pts.iter().flat_map(|&(x, y)| [x, y]).collect();
    PointSet::from_coords(BoxRegion::centered(2, 8.0).unwrap(), coords).unwrap()
}

proptest! {
    #[test]
    fn hops_bound_euclidean_distance(pts in points_strategy(40), r in 0.5..2.0f64) {
        let g = build_graph(set(&pts), r).unwrap();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                if let Some(h) = g.graph_distance(a, b) {
                    let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
                    prop_assert!(h as f64 * r >= (dx * dx + dy * dy).sqrt() - 1e-9);
                }
            }
        }
    }

    #[test]
    fn larger_radius_never_hurts(pts in points_strategy(40), r in 0.3..1.5f64, extra in 0.0..1.0f64) {
        let small = build_graph(set(&pts), r).unwrap();
        let large = build_graph(set(&pts), r + extra).unwrap();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                if let Some(h) = small.graph_distance(a, b) {
                    let h2 = large.graph_distance(a, b);
                    prop_assert!(h2.is_some() && h2.unwrap() <= h);
                }
            }
        }
    }

    #[test]
    fn adding_points_never_disconnects(pts in points_strategy(30), more in points_strategy(10), r in 0.5..1.5f64) {
        let g = build_graph(set(&pts), r).unwrap();
        let mut all = pts.clone();
        all.extend_from_slice(&more);
        let bigger = build_graph(set(&all), r).unwrap();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                if g.graph_distance(a, b).is_some() {
                    prop_assert!(bigger.graph_distance(a, b).is_some());
                }
            }
        }
    }

    #[test]
    fn cell_index_adjacency_is_complete(pts in points_strategy(60), r in 0.2..3.0f64) {
        let g = build_graph(set(&pts), r).unwrap();
        for a in 0..pts.len() {
            let mut via_index = g.neighbors(a);
            via_index.sort_unstable();
            let exhaustive: Vec<usize> = (0..pts.len())
                .filter(|&b| {
                    let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
                    b != a && dx * dx + dy * dy <= r * r
                })
                .collect();
            prop_assert_eq!(via_index, exhaustive);
        }
    }
}
