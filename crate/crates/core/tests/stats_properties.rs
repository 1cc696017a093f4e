//! Distribution distances and confidence intervals: metric properties,
//! closed-form values and coverage.

use mscale::stats::{ks_distance, mean_ci, wasserstein1, EmpiricalDistribution};
use mscale::RngStream;
use proptest::prelude::*;
use rand::Rng;

fn emp(x: &[f64]) -> EmpiricalDistribution {
    EmpiricalDistribution::new(x).unwrap()
}

fn uniforms(stream: RngStream, n: usize, shift: f64) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| shift + rng.random::<f64>()).collect()
}

/// Brute-force KS: the supremum is attained at a pooled sample point.
fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |x: &[f64], t: f64| x.iter().filter(|&&v| v <= t).count() as f64 / x.len() as f64;
    a.iter().chain(b).map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
}

/// Brute-force W1 for equal sizes: sorted matching.
fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..max)
}

proptest! {
    #[test]
    fn ks_matches_brute_force(a in sample(40), b in sample(40)) {
        let d = ks_distance(&emp(&a), &emp(&b));
        prop_assert!((d - ks_brute(&a, &b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_distance(&emp(&b), &emp(&a)));
    }

    #[test]
    fn ks_triangle_inequality(a in sample(30), b in sample(30), c in sample(30)) {
        let (a, b, c) = (emp(&a), emp(&b), emp(&c));
        prop_assert!(ks_distance(&a, &c) <= ks_distance(&a, &b) + ks_distance(&b, &c) + 1e-12);
    }

    #[test]
    fn w1_matches_sorted_matching(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..50)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let w = wasserstein1(&emp(&a), &emp(&b));
        prop_assert!((w - w1_sorted(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn w1_translation(a in sample(40), b in sample(40), c in -5.0..5.0f64) {
        let shift = |x: &[f64]| x.iter().map(|v| v + c).collect::<Vec<_>>();
        let w = wasserstein1(&emp(&a), &emp(&b));
        prop_assert!((wasserstein1(&emp(&shift(&a)), &emp(&shift(&b))) - w).abs() < 1e-9);
        prop_assert!((wasserstein1(&emp(&a), &emp(&shift(&a))) - c.abs()).abs() < 1e-9);
    }

    #[test]
    fn distances_ignore_sample_order(a in sample(40), b in sample(40)) {
        let mut rev = a.clone();
        rev.reverse();
        prop_assert_eq!(ks_distance(&emp(&a), &emp(&b)), ks_distance(&emp(&rev), &emp(&b)));
        prop_assert!((wasserstein1(&emp(&a), &emp(&b)) - wasserstein1(&emp(&rev), &emp(&b))).abs() < 1e-12);
    }
}

#[test]
fn uniform_samples_are_ks_close() {
    // the 0.99 quantile of √(n/2)·D is 1.628, i.e. D ≈ 0.023 at n = 10⁴
    let close = (0..100)
        .filter(|&i| {
            let a = uniforms(RngStream::new(70, 2 * i), 10_000, 0.0);
            let b = uniforms(RngStream::new(70, 2 * i + 1), 10_000, 0.0);
            ks_distance(&emp(&a), &emp(&b)) < 0.03
        })
        .count();
    assert!(close >= 99, "{close} of 100");
}

#[test]
fn shifted_uniforms_are_a_tenth_apart() {
    let a = uniforms(RngStream::new(71, 0), 10_000, 0.0);
    let b = uniforms(RngStream::new(71, 1), 10_000, 0.1);
    let w = wasserstein1(&emp(&a), &emp(&b));
    assert!((w - 0.1).abs() < 0.01, "W1 {w}");
}

#[test]
fn bernoulli_interval_coverage() {
    let covered = (0..100)
        .filter(|&i| {
            let mut rng = RngStream::new(72, i).rng();
            let x: Vec<f64> = (0..10_000).map(|_| (rng.random::<f64>() < 0.3) as u8 as f64).collect();
            let (lo, hi) = mean_ci(&x, 0.95).unwrap();
            lo <= 0.3 && 0.3 <= hi
        })
        .count();
    assert!(covered >= 93, "{covered} of 100");
}

#[test]
fn degenerate_intervals() {
    assert_eq!(mean_ci(&[2.5; 10], 0.95).unwrap(), (2.5, 2.5));
    let x: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
    let (lo, hi) = mean_ci(&x, 0.95).unwrap();
    assert!((0.5 * (lo + hi) - 0.5).abs() < 1e-12);
}
