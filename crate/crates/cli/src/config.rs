//! Run configuration: a JSON document validated before anything runs.

use serde::{Deserialize, Serialize};

use crpred_core::expectation::{default_half_width, default_rel_tol, default_tail_mass};
use crpred_core::l2diff::ContinuityNorm;
use crpred_core::{IntegrationMode, IntegrationSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog identifier with parameters, e.g. `gaussian_location:n=10,sigma=1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<String>,
    /// Catalog grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<ThetaGrid>,
    /// Catalog default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationConfig>,
    /// Seeds every Monte Carlo expectation and random construction.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Either explicit points or one `{from, to, count}` range per axis
/// (tensor product, first axis slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaGrid {
    Points(Vec<Point>),
    Axis(AxisRange),
    Axes(Vec<AxisRange>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl AxisRange {
    fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.count == 0 {
            return Err(CliError::Config("theta_grid axis has count 0".into()));
        }
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(CliError::Config("theta_grid axis bounds must be finite".into()));
        }
        if self.count == 1 {
            return Ok(vec![self.from]);
        }
        let h = (self.to - self.from) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| if i + 1 == self.count { self.to } else { self.from + h * i as f64 })
            .collect())
    }
}

impl ThetaGrid {
    pub fn points(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let pts = match self {
            ThetaGrid::Points(p) => p
                .iter()
                .map(|p| match p {
                    Point::Scalar(v) => vec![*v],
                    Point::Vector(v) => v.clone(),
                })
                .collect(),
            ThetaGrid::Axis(a) => a.values()?.into_iter().map(|v| vec![v]).collect(),
            ThetaGrid::Axes(axes) => {
                let mut pts: Vec<Vec<f64>> = vec![vec![]];
                for a in axes {
                    let vals = a.values()?;
                    pts = pts
                        .into_iter()
                        .flat_map(|p| {
                            vals.iter().map(move |v| {
                                let mut q = p.clone();
                                q.push(*v);
                                q
                            })
                        })
                        .collect();
                }
                pts
            }
        };
        if pts.is_empty() || pts.iter().any(|p: &Vec<f64>| p.is_empty()) {
            return Err(CliError::Config("theta_grid is empty".into()));
        }
        if pts.iter().any(|p| p.len() != pts[0].len()) {
            return Err(CliError::Config("theta_grid points differ in dimension".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    ExactDiscrete,
    Quadrature,
    MonteCarlo,
}

/// Flat form of an integration spec. The Monte Carlo seed is the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_mass: Option<f64>,
}

impl IntegrationConfig {
    pub fn to_spec(&self, seed: u64) -> Result<IntegrationSpec, CliError> {
        let misplaced = |field: &str| CliError::Config(format!("integration field {field} does not apply to {:?}", self.mode));
        let mode = match self.mode {
            ModeName::ExactDiscrete => {
                if self.nodes_per_axis.is_some() || self.bounds.is_some() {
                    return Err(misplaced("nodes_per_axis/bounds"));
                }
                if self.n.is_some() {
                    return Err(misplaced("n"));
                }
                IntegrationMode::ExactDiscrete
            }
            ModeName::Quadrature => {
                if self.n.is_some() {
                    return Err(misplaced("n"));
                }
                IntegrationMode::Quadrature {
                    nodes_per_axis: self
                        .nodes_per_axis
                        .ok_or_else(|| CliError::Config("quadrature needs nodes_per_axis".into()))?,
                    bounds: self.bounds.clone(),
                }
            }
            ModeName::MonteCarlo => {
                if self.nodes_per_axis.is_some() || self.bounds.is_some() {
                    return Err(misplaced("nodes_per_axis/bounds"));
                }
                IntegrationMode::MonteCarlo {
                    n: self.n.ok_or_else(|| CliError::Config("monte_carlo needs n".into()))?,
                    seed,
                }
            }
        };
        let spec = IntegrationSpec {
            mode,
            target_rel_tol: self.target_rel_tol.unwrap_or_else(default_rel_tol),
            box_half_width: self.box_half_width.unwrap_or_else(default_half_width),
            tail_mass: self.tail_mass.unwrap_or_else(default_tail_mass),
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// Command-specific knobs; each command reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Step magnitudes for the L²-differentiability diagnostics and the
    /// continuity sequence, strictly decreasing. Default `2^-3, …, 2^-8`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<Vec<f64>>,
    /// Coordinate along which steps are taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity_norm: Option<ContinuityNorm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity_tolerance: Option<f64>,
    /// Start of every reconstruction path; the grid supplies the ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    /// Interior corners of the reconstruction path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<Vec<f64>>>,
    /// Interior corners of a second path compared against the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_waypoints: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    /// Observations at which `B` and the log-ratio are checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_points: Option<Vec<Vec<f64>>>,
    /// Separate integration for the Fisher information in `bound`,
    /// `biased-bound` and `efficiency`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_integration: Option<IntegrationConfig>,
    /// Joint-model target for `msep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Half-width of the neighbourhood grid for `check-assumptions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Points per side and axis of that grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighborhood_count: Option<usize>,
    /// Random joint laws drawn by `lemma1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<usize>,
    /// `(k, d)` of those laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &str) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let c = RunConfig::parse(r#"{"theta_grid": [0, 0.5, 1]}"#).unwrap();
        assert_eq!(c.theta_grid.unwrap().points().unwrap(), vec![vec![0.0], vec![0.5], vec![1.0]]);
        let c = RunConfig::parse(r#"{"theta_grid": {"from": 0, "to": 1, "count": 3}}"#).unwrap();
        assert_eq!(c.theta_grid.unwrap().points().unwrap(), vec![vec![0.0], vec![0.5], vec![1.0]]);
        let c = RunConfig::parse(r#"{"theta_grid": [{"from": 0, "to": 1, "count": 2}, {"from": 5, "to": 5, "count": 1}]}"#)
            .unwrap();
        assert_eq!(c.theta_grid.unwrap().points().unwrap(), vec![vec![0.0, 5.0], vec![1.0, 5.0]]);
        let c = RunConfig::parse(r#"{"theta_grid": [[0, 1], [2, 3]]}"#).unwrap();
        assert_eq!(c.theta_grid.unwrap().points().unwrap().len(), 2);
    }

    #[test]
    fn zero_count_is_a_config_error() {
        let c = RunConfig::parse(r#"{"theta_grid": {"from": 0, "to": 1, "count": 0}}"#).unwrap();
        assert!(matches!(c.theta_grid.unwrap().points(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse(r#"{"model": "bernoulli", "colour": 1}"#).is_err());
        assert!(RunConfig::parse(r#"{"options": {"u_grid": [0.1], "typo": 1}}"#).is_err());
        assert!(RunConfig::parse(r#"{"integration": {"mode": "exact_discrete", "seed": 3}}"#).is_err());
        assert!(RunConfig::parse(r#"{"theta_grid": {"from": 0, "to": 1, "count": 2, "step": 1}}"#).is_err());
    }

    #[test]
    fn integration_fields_are_checked_against_the_mode() {
        let q = IntegrationConfig {
            mode: ModeName::Quadrature,
            nodes_per_axis: None,
            bounds: None,
            n: None,
            target_rel_tol: None,
            box_half_width: None,
            tail_mass: None,
        };
        assert!(q.to_spec(0).is_err());
        let mc = IntegrationConfig {
            mode: ModeName::MonteCarlo,
            n: Some(1000),
            ..q.clone()
        };
        assert_eq!(mc.to_spec(9).unwrap().seed(), Some(9));
        let bad = IntegrationConfig {
            mode: ModeName::ExactDiscrete,
            n: Some(10),
            ..q
        };
        assert!(bad.to_spec(0).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = r#"{"model": "bernoulli:n=2", "predictor": "mean", "theta_grid": [0.2, [0.5]],
            "integration": {"mode": "exact_discrete"}, "seed": 4, "options": {"axis": 0}}"#;
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
