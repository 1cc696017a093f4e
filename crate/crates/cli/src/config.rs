//! Experiment configuration: one JSON document, every section optional,
//! unknown keys rejected.

use std::path::Path;

use mscale::dynamics::{InfraConfig, SinkDensity, TwoScaleConfig};
use mscale::estimators::{LambdaCOptions, PercolationParams, StretchOptions};
use mscale::measure::TimeGrid;
use mscale::mobility::{DisplacementDistribution, RadialLaw};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: Model,
    pub geometry: Geometry,
    pub mobility: Mobility,
    pub scaling: Scaling,
    pub grid: Grid,
    pub mc: MonteCarlo,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Model {
    /// Node intensity λ.
    pub lambda: f64,
    /// Connection radius.
    pub r: f64,
    pub dim: usize,
    /// Sink scaling constant, `λ_S k^d = c_0`.
    pub c0: f64,
    /// Sink intensity exponent, `λ_S = T^{−α}`.
    pub alpha: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            r: 1.0,
            dim: 2,
            c0: 2.0,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Box side `M` of the escape criterion.
    pub m: f64,
    /// Box sides for the λ_c bisection, increasing.
    pub m_schedule: Vec<f64>,
    /// Window side `L` for the stretch factor.
    pub window: f64,
    /// Distance band of stretch-factor pairs.
    pub band: [f64; 2],
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            m: 20.0,
            m_schedule: vec![20.0, 40.0, 80.0],
            window: 400.0,
            band: [20.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mobility {
    pub r_min: f64,
    pub r_max: f64,
    /// `uniform` (|v| uniform) or `annulus` (v uniform on the annulus).
    pub radial_law: String,
    pub jump_rate: f64,
}

impl Default for Mobility {
    fn default() -> Self {
        Self {
            r_min: 0.5,
            r_max: 1.5,
            radial_law: "uniform".into(),
            jump_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scaling {
    /// Time horizon `T`.
    pub horizon: f64,
    /// Stretch factor; estimated when absent.
    pub mu_hat: Option<f64>,
    /// Percolation probability used by the k-hop limits; estimated when absent.
    pub theta: Option<f64>,
    /// `match_c0` or `nominal`.
    pub sink_density: String,
    pub truncation_budget: f64,
    /// Cap on the expected number of relays in the k-hop window.
    pub max_points: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            mu_hat: None,
            theta: None,
            sink_density: "match_c0".into(),
            truncation_budget: 1e-6,
            max_points: 1e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self { points: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarlo {
    /// Replications of the time measures, draws of the limit samplers.
    pub replications: usize,
    /// Samples per static estimate.
    pub n: usize,
    pub n_inner: usize,
    /// Renewal sequences and phase schedules behind the limit samplers.
    pub n_auxiliary: usize,
    pub n_pairs: usize,
    /// Random instances per self-check suite.
    pub instances: usize,
    /// Samples per θ̂^M evaluation inside the λ_c bisection.
    pub lambda_c_n: usize,
    pub lambda_c_tol: f64,
    pub lambda_c_threshold: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        let lc = LambdaCOptions::default();
        Self {
            replications: 400,
            n: 10_000,
            n_inner: 200,
            n_auxiliary: 10_000,
            n_pairs: 2000,
            instances: 1000,
            lambda_c_n: lc.n,
            lambda_c_tol: 0.02,
            lambda_c_threshold: lc.threshold,
            lambda_lo: lc.lambda_lo,
            lambda_hi: lc.lambda_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { master: 1 }
    }
}

fn schema(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{field}: {reason}"))
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }

    /// Pretty JSON with fields in declaration order; the digest of this text
    /// identifies the configuration.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.grid.points).map_err(|e| schema("grid.points", e))
    }

    pub fn displacement(&self) -> Result<DisplacementDistribution, CliError> {
        let law = RadialLaw::from_name(&self.mobility.radial_law)
            .ok_or_else(|| schema("mobility.radial_law", format!("unknown law `{}`", self.mobility.radial_law)))?;
        DisplacementDistribution::new(self.model.dim, self.mobility.r_min, self.mobility.r_max, law)
            .map_err(|e| schema("mobility", e))
    }

    pub fn percolation(&self) -> Result<PercolationParams, CliError> {
        PercolationParams::new(self.model.lambda, self.model.r, self.geometry.m, self.model.dim)
            .map_err(|e| schema("model", e))
    }

    pub fn two_scale(&self) -> Result<TwoScaleConfig, CliError> {
        TwoScaleConfig::new(
            self.model.lambda,
            self.model.r,
            self.geometry.m,
            self.scaling.horizon,
            self.displacement()?,
            self.grid()?,
        )
        .map_err(|e| schema("scaling", e))
    }

    pub fn sink_density(&self) -> Result<SinkDensity, CliError> {
        match self.scaling.sink_density.as_str() {
            "match_c0" => Ok(SinkDensity::MatchC0),
            "nominal" => Ok(SinkDensity::Nominal),
            other => Err(schema("scaling.sink_density", format!("unknown value `{other}`"))),
        }
    }

    /// The k-hop model; the displacement law is rescaled to `E|V|² = d`.
    pub fn infra(&self, mu_hat: f64) -> Result<InfraConfig, CliError> {
        let cfg = InfraConfig {
            lambda: self.model.lambda,
            r: self.model.r,
            m: self.geometry.m,
            dim: self.model.dim,
            c0: self.model.c0,
            alpha: self.model.alpha,
            horizon: self.scaling.horizon,
            mu_hat,
            dist: self.displacement()?.crw_normalized(),
            jump_rate: self.mobility.jump_rate,
            grid: self.grid()?,
            sink_density: self.sink_density()?,
            max_points: self.scaling.max_points,
            truncation_budget: self.scaling.truncation_budget,
        };
        cfg.validate().map_err(|e| schema("model", e))?;
        Ok(cfg)
    }

    pub fn stretch(&self) -> StretchOptions {
        StretchOptions {
            lambda: self.model.lambda,
            r: self.model.r,
            dim: self.model.dim,
            window: self.geometry.window,
            band: (self.geometry.band[0], self.geometry.band[1]),
            n_pairs: self.mc.n_pairs,
        }
    }

    pub fn lambda_c(&self) -> LambdaCOptions {
        LambdaCOptions {
            dim: self.model.dim,
            n: self.mc.lambda_c_n,
            lambda_lo: self.mc.lambda_lo,
            lambda_hi: self.mc.lambda_hi,
            threshold: self.mc.lambda_c_threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<Config>(r#"{"model": {"lambda": 1.0, "lamda": 2.0}}"#).unwrap_err();
        assert!(err.to_string().contains("lamda"));
        assert!(serde_json::from_str::<Config>(r#"{"modle": {}}"#).is_err());
    }

    #[test]
    fn partial_sections_take_defaults() {
        let cfg: Config = serde_json::from_str(r#"{"model": {"lambda": 0.0}, "seeds": {"master": 7}}"#).unwrap();
        assert_eq!(cfg.model.lambda, 0.0);
        assert_eq!(cfg.model.r, 1.0);
        assert_eq!(cfg.seeds.master, 7);
        assert_eq!(cfg.grid.points, 200);
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = Config::default();
        let back: Config = serde_json::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.sha256(), cfg.sha256());
        assert_eq!(cfg.sha256().len(), 64);
    }

    #[test]
    fn bad_values_name_their_section() {
        let mut cfg = Config::default();
        cfg.mobility.radial_law = "gaussian".into();
        match cfg.displacement() {
            Err(CliError::Schema(msg)) => assert!(msg.starts_with("mobility.radial_law")),
            other => panic!("{other:?}"),
        }
    }
}
