//! Parametric models dominated by Lebesgue or counting measure.
//!
//! A model supplies a log-density, the open parameter domain, a description
//! of its sample space used by the expectation engine, and optionally a
//! sampler and a closed-form score. Everything else (densities, likelihood
//! ratios, seeded batches) is derived here.
//!
//! Likelihood ratios follow the usual convention for dominated families:
//!
//! ```text
//! L(θ0, θ)(x) = f_θ(x) / f_θ0(x)   if f_θ0(x) > 0
//!             = +∞                  if f_θ0(x) = 0 and f_θ(x) > 0
//!             = 1                   if both vanish
//! ```

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the sample space. Discrete models store integer counts as
/// exact `f64` values.
pub type Observation = Vec<f64>;

/// A point of the parameter space.
pub type ParameterPoint = DVector<f64>;

/// Open box `(lower, upper)` in ℝᵈ; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("domain bounds must be nonempty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("domain lower bounds must be below upper bounds"));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn interval(lower: f64, upper: f64) -> Self {
        Self::new(vec![lower], vec![upper]).expect("valid interval")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Strict membership; NaN coordinates are never inside.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *l < *t && *t < *u)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

/// Dominating measure of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Lebesgue { dim: usize },
    Counting { dim: usize },
}

/// Where the mass of one coordinate of the observation lives at a given θ.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisSupport {
    /// Continuous coordinate centred at `loc` with spread `scale`, restricted
    /// to `[lower, upper]` (possibly infinite).
    Continuous {
        loc: f64,
        scale: f64,
        lower: f64,
        upper: f64,
    },
    /// Finite list of atoms carrying all but a negligible tail of the mass.
    Discrete(Vec<f64>),
}

impl AxisSupport {
    pub fn real_line(loc: f64, scale: f64) -> Self {
        AxisSupport::Continuous {
            loc,
            scale,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }
}

/// A family of distributions `P_θ` with densities `f_θ` against a fixed
/// dominating measure.
///
/// Implementations must be immutable after construction; every method is
/// called concurrently from worker threads.
pub trait DominatedModel: Send + Sync + fmt::Debug {
    /// Identifier, e.g. `gaussian_location:n=10,sigma=1`.
    fn id(&self) -> String;

    fn domain(&self) -> &ParameterDomain;

    fn measure(&self) -> MeasureKind;

    /// `log f_θ(x)`, `-∞` off the support. Called only with θ in the domain.
    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64;

    /// Per-coordinate support description at θ; discrete axes are truncated
    /// so that the neglected tail mass of the whole observation is below
    /// `tail_mass`.
    fn axis_support(&self, theta: &[f64], tail_mass: f64) -> Result<Vec<AxisSupport>>;

    /// Draw one observation. Must consume `rng` deterministically.
    fn sample_one(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> Result<Observation> {
        Err(Error::Capability {
            model: self.id(),
            capability: "sampling".into(),
        })
    }

    /// Closed-form score `∂_θ log f_θ(x)`, when the model knows it.
    fn analytic_score(&self, _x: &[f64], _theta: &[f64]) -> Option<DVector<f64>> {
        None
    }

    /// `Some((component, n))` when the observation is `n` iid copies of
    /// `component` sharing the parameter. Fisher information is then
    /// additive.
    fn iid_components(&self) -> Option<(Arc<dyn DominatedModel>, usize)> {
        None
    }

    fn param_dim(&self) -> usize {
        self.domain().dim()
    }

    fn obs_dim(&self) -> usize {
        match self.measure() {
            MeasureKind::Lebesgue { dim } | MeasureKind::Counting { dim } => dim,
        }
    }
}

impl dyn DominatedModel + '_ {
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if self.domain().contains(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                model: self.id(),
                theta: theta.to_vec(),
            })
        }
    }

    /// `log f_θ(x)` after checking θ; `NaN` and `+∞` are evaluation errors.
    pub fn log_density(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let v = self.log_density_unchecked(x, theta);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Evaluation(format!(
                "log-density of {} is {v} at x={x:?}, theta={theta:?}",
                self.id()
            )));
        }
        Ok(v)
    }

    /// `f_θ(x)`, computed as `exp(log f)` with underflow clamped to 0.
    pub fn density(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        let d = self.log_density(x, theta)?.exp();
        if !d.is_finite() {
            return Err(Error::Evaluation(format!(
                "density of {} overflows at x={x:?}, theta={theta:?}",
                self.id()
            )));
        }
        Ok(d)
    }

    /// `log L(θ0, θ)(x)` with the conventions of the module docs
    /// (`+∞` off the reference support, `0` when both densities vanish).
    pub fn log_likelihood_ratio(&self, theta0: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
        let l0 = self.log_density(x, theta0)?;
        let l1 = self.log_density(x, theta)?;
        Ok(match (l0 == f64::NEG_INFINITY, l1 == f64::NEG_INFINITY) {
            (true, true) => 0.0,
            (true, false) => f64::INFINITY,
            _ => l1 - l0,
        })
    }

    /// `L(θ0, θ)(x) ∈ [0, +∞]`.
    pub fn likelihood_ratio(&self, theta0: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
        Ok(self.log_likelihood_ratio(theta0, theta, x)?.exp())
    }

    /// `n` observations from `P_θ`; observation `i` is drawn from the
    /// substream `(seed, i)`, so the batch does not depend on how the work
    /// is split across threads.
    pub fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<SampleBatch> {
        self.check_theta(theta)?;
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let observations = (0..n as u64)
            .map(|i| self.sample_one(theta, &mut substream(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleBatch {
            observations,
            theta: DVector::from_column_slice(theta),
            seed,
        })
    }
}

/// Counter-based generator for draw `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A reproducible batch of draws from `P_θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub observations: Vec<Observation>,
    pub theta: ParameterPoint,
    pub seed: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Bernoulli, GaussianLocation, Poisson};

    #[test]
    fn domain_is_open() {
        let d = ParameterDomain::interval(0.0, 1.0);
        assert!(d.contains(&[0.5]));
        assert!(!d.contains(&[0.0]));
        assert!(!d.contains(&[1.0]));
        assert!(!d.contains(&[f64::NAN]));
        assert!(!d.contains(&[0.5, 0.5]));
        assert!(ParameterDomain::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn density_examples() {
        let g: Arc<dyn DominatedModel> = Arc::new(GaussianLocation::new(1, 1.0).unwrap());
        let v = g.density(&[0.0], &[0.0]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);

        let b: Arc<dyn DominatedModel> = Arc::new(Bernoulli::new(1).unwrap());
        assert_eq!(b.density(&[1.0], &[0.5]).unwrap(), 0.5);

        let p: Arc<dyn DominatedModel> = Arc::new(Poisson::new(1).unwrap());
        assert!((p.density(&[0.0], &[1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn density_outside_domain_is_rejected() {
        let b: Arc<dyn DominatedModel> = Arc::new(Bernoulli::new(1).unwrap());
        assert!(matches!(b.density(&[1.0], &[1.0]), Err(Error::Domain { .. })));
        assert!(matches!(b.sample(&[1.0], 3, 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn likelihood_ratio_examples() {
        let g: Arc<dyn DominatedModel> = Arc::new(GaussianLocation::new(1, 1.0).unwrap());
        let l = g.likelihood_ratio(&[0.0], &[1.0], &[0.0]).unwrap();
        assert!((l - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g.likelihood_ratio(&[0.3], &[0.3], &[2.0]).unwrap(), 1.0);

        let b: Arc<dyn DominatedModel> = Arc::new(Bernoulli::new(1).unwrap());
        assert_eq!(b.likelihood_ratio(&[0.5], &[0.25], &[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g: Arc<dyn DominatedModel> = Arc::new(GaussianLocation::new(1, 1.0).unwrap());
        let a = g.sample(&[0.0], 3, 7).unwrap();
        let b = g.sample(&[0.0], 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, g.sample(&[0.0], 3, 8).unwrap());
        assert!(g.sample(&[0.0], 0, 7).is_err());
    }

    #[test]
    fn poisson_sample_mean() {
        let p: Arc<dyn DominatedModel> = Arc::new(Poisson::new(1).unwrap());
        let n = 100_000;
        let batch = p.sample(&[2.0], n, 1).unwrap();
        let mean = batch.observations.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "mean {mean}");
    }
}
