//! Families of the form `dP_θ/dP_base = exp(A(θ)'p(x) − B(x, θ))`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bounds::{ParamVectorFn, Predictand, Predictor};
use crate::error::{Error, Result};
use crate::expectation::{expect_scalar, IntegrationSpec};
use crate::linalg::inverse_general;
use crate::model::{AxisSupport, DominatedModel, MeasureKind, ParameterDomain};

use super::models::{Bernoulli, GaussianLocation};

/// `B(x, θ)`.
pub type LogNormalizer = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Relative step of the differences that recover `g` from `A` and `B`.
pub const DERIVED_G_STEP: f64 = 1e-4;

/// Ingredients of an exponential-type family.
#[derive(Clone)]
pub struct ExpFamilySpec {
    pub name: String,
    pub base: Arc<dyn DominatedModel>,
    /// Parameter at which `base` is evaluated.
    pub base_theta: Vec<f64>,
    pub domain: ParameterDomain,
    pub p: Predictor,
    pub a: ParamVectorFn,
    pub b: LogNormalizer,
}

impl fmt::Debug for ExpFamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpFamilySpec")
            .field("name", &self.name)
            .field("base", &self.base.id())
            .field("base_theta", &self.base_theta)
            .field("p", &self.p.name)
            .finish()
    }
}

impl ExpFamilySpec {
    /// `A(θ) = θ`, `B = θ²/2` over `N(0, 1)` with `p(x) = x`: the `N(θ, 1)`
    /// location family.
    pub fn normal_location() -> Self {
        Self {
            name: "exp_family_normal".into(),
            base: Arc::new(GaussianLocation::new(1, 1.0).expect("valid")),
            base_theta: vec![0.0],
            domain: ParameterDomain::interval(-3.0, 3.0),
            p: Predictor::new("x", 1, |x| DVector::from_element(1, x[0])),
            a: Arc::new(|t| DVector::from_element(1, t[0])),
            b: Arc::new(|_, t| 0.5 * t[0] * t[0]),
        }
    }

    /// `A ≡ 0`, `B ≡ 0` over `N(0, 1)`: every member equals the base.
    pub fn normal_base_constant() -> Self {
        Self {
            name: "exp_family_constant".into(),
            a: Arc::new(|_| DVector::zeros(1)),
            b: Arc::new(|_, _| 0.0),
            ..Self::normal_location()
        }
    }

    /// Bernoulli in its natural parameter `η`: `A = η`,
    /// `B = log(1 + e^η) − log 2` over Bernoulli(1/2).
    pub fn bernoulli_natural() -> Self {
        Self {
            name: "exp_family_bernoulli".into(),
            base: Arc::new(Bernoulli::new(1).expect("valid")),
            base_theta: vec![0.5],
            domain: ParameterDomain::interval(-10.0, 10.0),
            p: Predictor::new("x", 1, |x| DVector::from_element(1, x[0])),
            a: Arc::new(|t| DVector::from_element(1, t[0])),
            b: Arc::new(|_, t| softplus(t[0]) - std::f64::consts::LN_2),
        }
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Model with `log f_θ = log f_base + A(θ)'p(x) − B(x, θ)`.
#[derive(Clone)]
pub struct ExpFamilyModel {
    spec: ExpFamilySpec,
}

impl fmt::Debug for ExpFamilyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ExpFamilyModel").field(&self.spec).finish()
    }
}

impl ExpFamilyModel {
    pub fn spec(&self) -> &ExpFamilySpec {
        &self.spec
    }

    fn exponent(&self, x: &[f64], theta: &[f64]) -> f64 {
        let p = match self.spec.p.eval(x) {
            Ok(p) => p,
            Err(_) => return f64::NAN,
        };
        (self.spec.a)(theta).dot(&p) - (self.spec.b)(x, theta)
    }

    /// `g(x, θ)` solving `∇_θB = (J_θA)'g`, from central differences with
    /// step `1e-4·(1 + |θ_i|)`.
    pub fn derived_g(&self, x: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
        let d = theta.len();
        let k = self.spec.p.k;
        if k != d {
            return Err(Error::invalid("derived predictand needs dim A = dim theta"));
        }
        let mut ja = DMatrix::zeros(k, d);
        let mut grad_b = DVector::zeros(d);
        let mut t = theta.to_vec();
        for i in 0..d {
            let h = DERIVED_G_STEP * (1.0 + theta[i].abs());
            t[i] = theta[i] + h;
            let (a_up, b_up) = ((self.spec.a)(&t), (self.spec.b)(x, &t));
            t[i] = theta[i] - h;
            let (a_dn, b_dn) = ((self.spec.a)(&t), (self.spec.b)(x, &t));
            t[i] = theta[i];
            ja.set_column(i, &((a_up - a_dn) / (2.0 * h)));
            grad_b[i] = (b_up - b_dn) / (2.0 * h);
        }
        Ok(inverse_general(&ja.transpose(), "jacobian of A")? * grad_b)
    }
}

impl DominatedModel for ExpFamilyModel {
    fn id(&self) -> String {
        self.spec.name.clone()
    }

    fn domain(&self) -> &ParameterDomain {
        &self.spec.domain
    }

    fn measure(&self) -> MeasureKind {
        self.spec.base.measure()
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let base = self.spec.base.log_density_unchecked(x, &self.spec.base_theta);
        if base == f64::NEG_INFINITY {
            return base;
        }
        base + self.exponent(x, theta)
    }

    fn axis_support(&self, _theta: &[f64], tail_mass: f64) -> Result<Vec<AxisSupport>> {
        self.spec.base.axis_support(&self.spec.base_theta, tail_mass)
    }
}

/// Build the family and check `E_base exp(A'p − B) = 1` at every grid θ
/// (within `1e-6` in deterministic modes, `max(1e-3, 3σ)` otherwise).
pub fn build(spec: ExpFamilySpec, grid: &[Vec<f64>], integration: &IntegrationSpec) -> Result<ExpFamilyModel> {
    if spec.base_theta.len() != spec.base.param_dim() {
        return Err(Error::invalid("base_theta has the wrong dimension"));
    }
    spec.base.check_theta(&spec.base_theta)?;
    let model = ExpFamilyModel { spec };
    for theta in grid {
        model.spec.domain.contains(theta).then_some(()).ok_or_else(|| Error::Domain {
            model: model.id(),
            theta: theta.clone(),
        })?;
        let base: &dyn DominatedModel = model.spec.base.as_ref();
        let (mass, se) = expect_scalar(
            base,
            &model.spec.base_theta,
            |x| Ok(model.exponent(x, theta).exp()),
            integration,
        )?;
        let tol = if integration.is_deterministic() { 1e-6 } else { 1e-3f64.max(3.0 * se) };
        if !((mass - 1.0).abs() <= tol) {
            return Err(Error::invalid(format!(
                "{}: exp(A'p - B) integrates to {mass} at theta {theta:?}, not 1",
                model.id()
            )));
        }
    }
    Ok(model)
}

/// Predictand backed by [`ExpFamilyModel::derived_g`]; evaluation failures
/// surface as NaN and are caught by the integrand checks.
pub fn derived_predictand(model: &ExpFamilyModel) -> Predictand {
    let m = model.clone();
    Predictand::new("derived", model.spec.p.k, move |x, t| {
        m.derived_g(x, t).unwrap_or_else(|_| DVector::from_element(t.len(), f64::NAN))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_location_recovers_shifted_gaussian() {
        let m = build(ExpFamilySpec::normal_location(), &[vec![0.5], vec![1.0]], &IntegrationSpec::quadrature(200)).unwrap();
        let g = GaussianLocation::new(1, 1.0).unwrap();
        for x in [-1.0, 0.3, 2.0] {
            let a = m.log_density_unchecked(&[x], &[0.7]);
            let b = g.log_density_unchecked(&[x], &[0.7]);
            assert!((a - b).abs() < 1e-12);
        }
        let gx = m.derived_g(&[0.2], &[0.7]).unwrap()[0];
        assert!((gx - 0.7).abs() < 1e-8);
    }

    #[test]
    fn bad_normalizer_is_rejected() {
        let mut spec = ExpFamilySpec::normal_location();
        spec.b = Arc::new(|_, t| t[0] * t[0]);
        let r = build(spec, &[vec![1.0]], &IntegrationSpec::quadrature(200));
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn bernoulli_natural_matches_bernoulli() {
        let m = build(ExpFamilySpec::bernoulli_natural(), &[vec![-1.0], vec![2.0]], &IntegrationSpec::exact()).unwrap();
        let eta = 0.8f64;
        let theta = 1.0 / (1.0 + (-eta).exp());
        let b = Bernoulli::new(1).unwrap();
        for x in [0.0, 1.0] {
            let a = m.log_density_unchecked(&[x], &[eta]);
            assert!((a - b.log_density_unchecked(&[x], &[theta])).abs() < 1e-14);
        }
        // ∇B = σ(η), J A = 1.
        assert!((m.derived_g(&[1.0], &[eta]).unwrap()[0] - theta).abs() < 1e-8);
    }
}
