//! Point-process sampling and mobility laws against closed forms and
//! independent simulations.

use mscale::estimators::Estimate;
use mscale::geometry::{count_in_ball, sample_homogeneous_poisson, Ball, BoxRegion, Point};
use mscale::mobility::{DisplacementDistribution, JumpTrajectory, RadialLaw, TwoScaleTrajectory};
use mscale::stats::{chi_square_independence, discrete_ks_distance, ks_distance_to_cdf, EmpiricalDistribution};
use mscale::RngStream;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// One-sample KS critical value at level 0.01.
fn ks_crit(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn poisson_cdf(mean: f64) -> impl Fn(u64) -> f64 {
    move |k| {
        let mut term = (-mean).exp();
        let mut acc = term;
        for j in 1..=k {
            term *= mean / j as f64;
            acc += term;
        }
        acc
    }
}

#[test]
fn poisson_count_has_mean_intensity_times_volume() {
    let region = BoxRegion::centered(2, 10.0).unwrap();
    let counts: Vec<f64> = (0..10_000)
        .map(|i| {
            let mut rng = RngStream::new(60, i).rng();
            sample_homogeneous_poisson(2.0, &region, &mut rng).unwrap().len() as f64
        })
        .collect();
    let e = Estimate::from_samples(&counts).unwrap();
    assert!((e.value - 200.0).abs() <= 3.0 * e.std_error, "{e:?}");
}

#[test]
fn quadrant_counts_are_independent() {
    let region = BoxRegion::centered(2, 10.0).unwrap();
    // quadrant means are 50; four bins around it
    let bin = |c: usize| match c {
        0..=44 => 0,
        45..=49 => 1,
        50..=54 => 2,
        _ => 3,
    };
    let mut ne_sw = vec![vec![0.0; 4]; 4];
    let mut nw_se = vec![vec![0.0; 4]; 4];
    for i in 0..10_000 {
        let pts = sample_homogeneous_poisson(2.0, &region, &mut RngStream::new(61, i).rng()).unwrap();
        let mut q = [0usize; 4];
        for p in pts.iter() {
            q[(p[0] >= 0.0) as usize + 2 * (p[1] >= 0.0) as usize] += 1;
        }
        ne_sw[bin(q[3])][bin(q[0])] += 1.0;
        nw_se[bin(q[2])][bin(q[1])] += 1.0;
    }
    for table in [ne_sw, nw_se] {
        let test = chi_square_independence(&table).unwrap();
        assert!(!test.rejects(0.01), "{test:?}");
    }
}

#[test]
fn ball_counts_are_poisson() {
    let c0 = 2.0;
    let region = BoxRegion::centered(2, 4.0).unwrap();
    let ball = Ball::new(Point::origin(2), 1.0).unwrap();
    let counts: Vec<u64> = (0..10_000)
        .map(|i| {
            let pts = sample_homogeneous_poisson(c0, &region, &mut RngStream::new(62, i).rng()).unwrap();
            count_in_ball(&pts, &ball) as u64
        })
        .collect();
    let d = discrete_ks_distance(&counts, poisson_cdf(c0 * std::f64::consts::PI));
    assert!(d < ks_crit(counts.len()), "KS {d}");
}

/// Coordinate means of `v` over 20 independent runs of `10⁵` draws: the sum
/// of the 40 squared z-scores is χ²(40) under isotropy. Radii of the first
/// run are KS-tested against the uniform law.
#[test]
fn isotropic_displacements_have_zero_mean_and_uniform_radius() {
    let dist = DisplacementDistribution::new(2, 0.5, 1.5, RadialLaw::Uniform).unwrap();
    let n = 100_000;
    let mut z2 = 0.0;
    for run in 0..20 {
        let mut rng = RngStream::new(63, run).rng();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut radii = Vec::with_capacity(n);
        for _ in 0..n {
            let v = dist.sample(&mut rng);
            radii.push(v[0].hypot(v[1]));
            xs.push(v[0]);
            ys.push(v[1]);
        }
        for c in [xs, ys] {
            let e = Estimate::from_samples(&c).unwrap();
            z2 += (e.value / e.std_error).powi(2);
        }
        if run == 0 {
            let emp = EmpiricalDistribution::new(&radii).unwrap();
            let d = ks_distance_to_cdf(&emp, |x| (x - 0.5).clamp(0.0, 1.0));
            assert!(d < ks_crit(n), "KS {d}");
        }
    }
    let p = 1.0 - ChiSquared::new(40.0).unwrap().cdf(z2);
    assert!(p > 0.001, "sum of squared z-scores {z2}, p = {p}");
}

#[test]
fn annulus_radius_follows_area_law() {
    let dist = DisplacementDistribution::new(2, 0.5, 1.5, RadialLaw::Annulus).unwrap();
    let mut rng = RngStream::new(64, 0).rng();
    let radii: Vec<f64> = (0..20_000)
        .map(|_| {
            let v = dist.sample(&mut rng);
            v[0].hypot(v[1])
        })
        .collect();
    let emp = EmpiricalDistribution::new(&radii).unwrap();
    let d = ks_distance_to_cdf(&emp, |x| ((x * x - 0.25) / 2.0).clamp(0.0, 1.0));
    assert!(d < ks_crit(radii.len()), "KS {d}");
}

/// Number of arrivals `T⁰_j ≤ 1` (counting `j = 0`), against a direct
/// simulation of `T⁰_{j+1} = T⁰_j + |V_j|`.
#[test]
fn expected_legs_match_renewal_simulation() {
    for (a, b) in [(0.5, 1.5), (0.05, 0.25)] {
        let dist = DisplacementDistribution::new(2, a, b, RadialLaw::Uniform).unwrap();
        let mut rng = RngStream::new(65, 0).rng();
        let ours: Vec<f64> = (0..10_000)
            .map(|_| {
                let traj = TwoScaleTrajectory::build(20.0, &dist, &mut rng).unwrap();
                traj.rescaled_arrivals().iter().filter(|&&s| s <= 1.0).count() as f64
            })
            .collect();
        let mut direct = StdRng::seed_from_u64(65);
        let theirs: Vec<f64> = (0..10_000)
            .map(|_| {
                let (mut t, mut count) = (0.0, 0.0);
                while t <= 1.0 {
                    count += 1.0;
                    t += direct.random_range(a..b);
                }
                count
            })
            .collect();
        let (ours, theirs) = (Estimate::from_samples(&ours).unwrap(), Estimate::from_samples(&theirs).unwrap());
        assert!((ours.value - theirs.value).abs() < 0.1 * theirs.value, "{ours:?} vs {theirs:?}");
        assert!(ours.agrees_with(&theirs, 3.0), "{ours:?} vs {theirs:?}");
    }
}

#[test]
fn fast_legs_move_at_unit_speed() {
    let dist = DisplacementDistribution::default_two_scale(2);
    let horizon = 30.0;
    let mut rng = RngStream::new(66, 0).rng();
    for _ in 0..200 {
        let traj = TwoScaleTrajectory::build(horizon, &dist, &mut rng).unwrap();
        let arrivals = traj.rescaled_arrivals();
        if arrivals.len() < 3 || arrivals[2] > 1.0 {
            continue;
        }
        // leg 1 is fast
        let (s0, s1) = (arrivals[1] * horizon, arrivals[2] * horizon);
        let (t1, t2) = (s0 + 0.25 * (s1 - s0), s0 + 0.75 * (s1 - s0));
        let d = traj.position_at(t1).unwrap().distance(&traj.position_at(t2).unwrap());
        assert!((d - (t2 - t1)).abs() < 1e-9 * horizon);
    }
}

#[test]
fn crw_jump_count_and_covariance() {
    let dist = DisplacementDistribution::default_crw(2);
    let (rate, horizon) = (1.0, 50.0);
    let mut rng = RngStream::new(67, 0).rng();
    let mut jumps = Vec::with_capacity(10_000);
    let mut sq = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let traj = JumpTrajectory::build(rate, horizon, &dist, &mut rng).unwrap();
        jumps.push(traj.jumps() as f64);
        let p = traj.position_at_slice(horizon);
        sq.push(p[0] * p[0] + p[1] * p[1]);
    }
    let j = Estimate::from_samples(&jumps).unwrap();
    assert!((j.value - rate * horizon).abs() <= 3.0 * j.std_error, "{j:?}");
    // mean is zero by symmetry, so E|X_T|² is the covariance trace
    let trace = Estimate::from_samples(&sq).unwrap().value / horizon;
    assert!((trace - 2.0).abs() < 0.05 * 2.0, "trace / T = {trace}");
}

#[test]
fn crw_endpoint_is_asymptotically_gaussian() {
    let dist = DisplacementDistribution::default_crw(2);
    let horizon = 1000.0;
    let mut rng = RngStream::new(68, 0).rng();
    let n = 2000;
    let mut coords = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let traj = JumpTrajectory::build(1.0, horizon, &dist, &mut rng).unwrap();
        let p = traj.position_at_slice(horizon);
        coords[0].push(p[0] / horizon.sqrt());
        coords[1].push(p[1] / horizon.sqrt());
    }
    let normal = Normal::standard();
    for c in coords {
        let d = ks_distance_to_cdf(&EmpiricalDistribution::new(&c).unwrap(), |x| normal.cdf(x));
        assert!(d < ks_crit(n), "KS {d}");
    }
}

fn self_avoiding_fractions(dist: &DisplacementDistribution, seed: u64) -> Vec<f64> {
    [10.0, 50.0, 250.0]
        .iter()
        .map(|&horizon| {
            let mut rng = RngStream::new(seed, horizon as u64).rng();
            let ok = (0..4000)
                .filter(|_| TwoScaleTrajectory::build(horizon, dist, &mut rng).unwrap().is_self_avoiding(5.0))
                .count();
            ok as f64 / 4000.0
        })
        .collect()
}

/// Under the default κ at most two legs start in `[0, 1]`, so there is no
/// pair of legs to test and every path is self-avoiding. Short legs give
/// many returns near the start and a visible trend.
#[test]
fn self_avoidance_becomes_typical() {
    let default = self_avoiding_fractions(&DisplacementDistribution::default_two_scale(2), 69);
    assert!(default.windows(2).all(|w| w[0] <= w[1]), "{default:?}");
    assert!(default[2] > 0.95, "{default:?}");
    let short = DisplacementDistribution::new(2, 0.05, 0.25, RadialLaw::Uniform).unwrap();
    let fractions = self_avoiding_fractions(&short, 70);
    assert!(fractions.windows(2).all(|w| w[0] < w[1]), "{fractions:?}");
    assert!(fractions[0] < 0.9, "{fractions:?}");
}
