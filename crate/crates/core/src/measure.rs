//! Time grids, test functions and empirical time measures.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Midpoint grid `t_i = (i + 1/2) / n` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid_points", "need at least one grid point"));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.time(i))
    }

    /// Midpoint quadrature `(1/n) Σ g(t_i) v_i`.
    pub fn pair(&self, values: &[f64], g: &TestFunction) -> f64 {
        assert_eq!(values.len(), self.n, "one value per grid point");
        values
            .iter()
            .enumerate()
            .map(|(i, v)| g.eval_at(i, self.time(i)) * v)
            .sum::<f64>()
            / self.n as f64
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { n: 200 }
    }
}

/// Test functions `g` on `[0, 1]` used to probe time measures.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    One,
    Identity,
    OneMinus,
    Square,
    CosPi,
    /// Values tabulated on the grid, one per grid point.
    Tabulated { name: String, values: Vec<f64> },
}

impl TestFunction {
    /// `{1, t, 1−t, t², cos(πt)}`.
    pub fn basis() -> Vec<TestFunction> {
        vec![
            TestFunction::One,
            TestFunction::Identity,
            TestFunction::OneMinus,
            TestFunction::Square,
            TestFunction::CosPi,
        ]
    }

    pub fn name(&self) -> &str {
        match self {
            TestFunction::One => "one",
            TestFunction::Identity => "t",
            TestFunction::OneMinus => "one_minus_t",
            TestFunction::Square => "t_squared",
            TestFunction::CosPi => "cos_pi_t",
            TestFunction::Tabulated { name, .. } => name,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::basis().into_iter().find(|g| g.name() == name)
    }

    fn eval_at(&self, index: usize, t: f64) -> f64 {
        match self {
            TestFunction::Tabulated { values, .. } => values[index],
            g => g.eval(t),
        }
    }

    /// Value at `t`. Panics for tabulated functions, which only exist on the grid.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => t,
            TestFunction::OneMinus => 1.0 - t,
            TestFunction::Square => t * t,
            TestFunction::CosPi => (PI * t).cos(),
            TestFunction::Tabulated { .. } => panic!("tabulated test function evaluated off the grid"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Percolation,
    KHop,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Percolation => "percolation",
            ModelKind::KHop => "k-hop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplicationMeta {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// One replication of an empirical time measure on a grid:
/// `τ(g) ≈ (1/n) Σ g(t_i)·1_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSample {
    pub grid: TimeGrid,
    pub indicators: Vec<u8>,
    pub model: ModelKind,
    pub meta: ReplicationMeta,
}

impl MeasureSample {
    pub fn pair(&self, g: &TestFunction) -> f64 {
        let values: Vec<f64> = self.indicators.iter().map(|&b| b as f64).collect();
        self.grid.pair(&values, g)
    }

    /// Total mass `τ([0, 1])`.
    pub fn total(&self) -> f64 {
        self.pair(&TestFunction::One)
    }
}

/// A limit measure `f(t) dt` observed on a grid, `f(t_i) ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitMeasure {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl LimitMeasure {
    pub fn pair(&self, g: &TestFunction) -> f64 {
        self.grid.pair(&self.values, g)
    }

    pub fn total(&self) -> f64 {
        self.pair(&TestFunction::One)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_grid() {
        let g = TimeGrid::new(4).unwrap();
        let t: Vec<f64> = g.times().collect();
        assert_eq!(t, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(TimeGrid::new(0).is_err());
    }

    #[test]
    fn pairing_is_linear_and_bounded() {
        let grid = TimeGrid::new(10).unwrap();
        let m = MeasureSample {
            grid,
            indicators: vec![1, 0, 1, 1, 0, 0, 1, 1, 1, 0],
            model: ModelKind::Percolation,
            meta: ReplicationMeta::default(),
        };
        assert!((m.total() - 0.6).abs() < 1e-12);
        let a = m.pair(&TestFunction::Identity);
        let b = m.pair(&TestFunction::OneMinus);
        assert!((a + b - m.total()).abs() < 1e-12);
        for g in TestFunction::basis() {
            let v = m.pair(&g);
            assert!((-1.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn midpoint_rule_integrates_basis() {
        let grid = TimeGrid::new(200).unwrap();
        let ones = vec![1.0; 200];
        assert!((grid.pair(&ones, &TestFunction::Identity) - 0.5).abs() < 1e-12);
        assert!((grid.pair(&ones, &TestFunction::Square) - 1.0 / 3.0).abs() < 1e-5);
        assert!(grid.pair(&ones, &TestFunction::CosPi).abs() < 1e-12);
    }
}
