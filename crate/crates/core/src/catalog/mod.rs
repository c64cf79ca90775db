//! Built-in families with named predictands, predictors and closed forms.
//!
//! Entries are addressable by identifiers of the form
//! `name:key=value,key=value`, e.g. `gaussian_location:n=10,sigma=1`.

mod builder;
mod models;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bounds::{Bias, BiasedPredictand, JointTarget, ParamMatrixFn, Predictand, Predictor};
use crate::error::{Error, Result};
use crate::expectation::IntegrationSpec;
use crate::model::DominatedModel;

pub use builder::{derived_predictand, ExpFamilyModel, ExpFamilySpec, LogNormalizer, DERIVED_G_STEP};
pub use models::{Ar1, Bernoulli, GaussianLocation, GaussianMean, Poisson, UniformScale};

/// `(θ0, θ) ↦ value` closed form anchored at a reference parameter.
pub type AnchoredVector = Arc<dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync>;
pub type AnchoredScalar = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Joint model of `(X, Y)` for prediction of a future or hidden part.
#[derive(Clone)]
pub struct JointSpec {
    pub model: Arc<dyn DominatedModel>,
    /// Number of leading coordinates that form `X`.
    pub x_dim: usize,
    pub targets: BTreeMap<String, JointTarget>,
}

impl fmt::Debug for JointSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JointSpec")
            .field("model", &self.model.id())
            .field("x_dim", &self.x_dim)
            .field("targets", &self.targets.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Closed forms the numeric pipeline is checked against.
#[derive(Clone, Default)]
pub struct ClosedForms {
    pub fisher: Option<ParamMatrixFn>,
    /// `A(θ) = η(θ) − η(θ0)` for `g = θ` and the efficient predictor.
    pub reconstruction_a: Option<AnchoredVector>,
    /// `B(θ) = ψ(θ) − ψ(θ0)` for `g = θ`.
    pub reconstruction_b: Option<AnchoredScalar>,
    /// Predictor that attains the bound for `g = θ`.
    pub efficient_predictor: Option<String>,
    pub scalars: BTreeMap<String, f64>,
}

impl fmt::Debug for ClosedForms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedForms")
            .field("fisher", &self.fisher.is_some())
            .field("reconstruction", &self.reconstruction_a.is_some())
            .field("efficient_predictor", &self.efficient_predictor)
            .field("scalars", &self.scalars)
            .finish()
    }
}

/// Analytic bias of a named predictor against a named predictand.
#[derive(Debug, Clone)]
struct BiasEntry {
    predictand: String,
    predictor: String,
    bias: Bias,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub id: String,
    pub model: Arc<dyn DominatedModel>,
    pub joint: Option<JointSpec>,
    pub predictands: BTreeMap<String, Predictand>,
    pub predictors: BTreeMap<String, Predictor>,
    pub closed_forms: ClosedForms,
    /// Parameter points the entry is routinely checked on.
    pub theta_grid: Vec<Vec<f64>>,
    /// Integration mode that suits the model.
    pub default_integration: IntegrationSpec,
    biases: Vec<BiasEntry>,
}

impl CatalogEntry {
    fn new(model: Arc<dyn DominatedModel>, theta_grid: Vec<Vec<f64>>, default_integration: IntegrationSpec) -> Self {
        Self {
            id: model.id(),
            model,
            joint: None,
            predictands: BTreeMap::new(),
            predictors: BTreeMap::new(),
            closed_forms: ClosedForms::default(),
            theta_grid,
            default_integration,
            biases: Vec::new(),
        }
    }

    fn add_predictand(&mut self, g: Predictand) {
        self.predictands.insert(g.name.clone(), g);
    }

    fn add_predictor(&mut self, p: Predictor) {
        self.predictors.insert(p.name.clone(), p);
    }

    pub fn predictand(&self, name: &str) -> Result<&Predictand> {
        self.predictands.get(name).ok_or_else(|| {
            Error::invalid(format!(
                "{} has no predictand {name:?} (known: {})",
                self.id,
                self.predictands.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn predictor(&self, name: &str) -> Result<&Predictor> {
        self.predictors.get(name).ok_or_else(|| {
            Error::invalid(format!(
                "{} has no predictor {name:?} (known: {})",
                self.id,
                self.predictors.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    /// Predictand `r` with the bias of predictor `p`: analytic when the
    /// entry knows it, estimated on the fly otherwise.
    pub fn biased_predictand(&self, r: &str, p: &str) -> Result<BiasedPredictand> {
        let r_fn = self.predictand(r)?.clone();
        let p_fn = self.predictor(p)?.clone();
        let bias = self
            .biases
            .iter()
            .find(|b| b.predictand == r && b.predictor == p)
            .map(|b| b.bias.clone())
            .unwrap_or(Bias::Estimated(p_fn));
        Ok(BiasedPredictand { r: r_fn, bias })
    }

    fn add_linear_bias(&mut self, r: &str, p: &str, slope: f64, offset: f64) {
        self.biases.push(BiasEntry {
            predictand: r.into(),
            predictor: p.into(),
            bias: Bias::Analytic {
                b: Arc::new(move |t| DVector::from_element(1, slope * t[0] + offset)),
                jacobian: Some(Arc::new(move |_| DMatrix::from_element(1, 1, slope))),
            },
        });
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

/// Predictands and predictors shared by the scalar iid families.
fn add_scalar_iid_items(e: &mut CatalogEntry) {
    e.add_predictand(
        Predictand::parametric("theta", 1, |t| scalar(t[0])).with_jacobian(|_, _| DMatrix::from_element(1, 1, 1.0)),
    );
    // E[X_{n+1} | X] = θ for an independent future draw.
    e.add_predictand(
        Predictand::new("future_observation", 1, |_, t| scalar(t[0]))
            .with_jacobian(|_, _| DMatrix::from_element(1, 1, 1.0)),
    );
    e.add_predictand(
        Predictand::new("theta_times_mean", 1, |x, t| scalar(t[0] * mean(x)))
            .with_jacobian(|x, _| DMatrix::from_element(1, 1, mean(x))),
    );
    e.add_predictand(
        Predictand::parametric("constant", 1, |_| scalar(1.0)).with_jacobian(|_, _| DMatrix::zeros(1, 1)),
    );
    e.add_predictor(Predictor::new("mean", 1, |x| scalar(mean(x))));
    e.add_predictor(Predictor::new("median", 1, |x| scalar(median(x))));
    e.add_predictor(Predictor::new("shrunk_mean", 1, |x| scalar(0.9 * mean(x))));
    e.add_predictor(Predictor::new("mean_plus_half", 1, |x| scalar(mean(x) + 0.5)));
    e.add_predictor(Predictor::new("zero", 1, |_| scalar(0.0)));
    e.add_predictor(Predictor::new("one", 1, |_| scalar(1.0)));
    e.add_linear_bias("theta", "mean", 0.0, 0.0);
    e.add_linear_bias("theta", "shrunk_mean", -0.1, 0.0);
    e.add_linear_bias("theta", "mean_plus_half", 0.0, 0.5);
    e.add_linear_bias("theta", "zero", -1.0, 0.0);
    e.closed_forms.efficient_predictor = Some("mean".into());
}

/// Joint model of `n` observed and one future iid draw.
fn iid_joint(model: Arc<dyn DominatedModel>, n: usize) -> JointSpec {
    let mut targets: BTreeMap<String, JointTarget> = BTreeMap::new();
    targets.insert("y".into(), Arc::new(|_, y, _| DVector::from_element(1, y[0])));
    JointSpec {
        model,
        x_dim: n,
        targets,
    }
}

/// iid `N(θ, σ²)ⁿ`. Closed forms: `I = n/σ²`, QEP of the mean `σ²/n`,
/// `A = n(θ − θ0)/σ²`, `B = n(θ² − θ0²)/(2σ²)`.
pub fn gaussian_location(n: usize, sigma: f64) -> Result<CatalogEntry> {
    let model = Arc::new(GaussianLocation::new(n, sigma)?);
    let mut e = CatalogEntry::new(
        model,
        vec![vec![-1.0], vec![0.0], vec![0.5], vec![1.0]],
        IntegrationSpec::quadrature(200),
    );
    add_scalar_iid_items(&mut e);
    let (nf, s2) = (n as f64, sigma * sigma);
    e.add_predictor(Predictor::new("square_minus_variance", 1, move |x| {
        let m = mean(x);
        scalar(m * m - s2 / nf)
    }));
    e.add_predictor(Predictor::new("exp_quarter_square", 1, |x| scalar((x[0] * x[0] / 4.0).exp())));
    e.joint = Some(iid_joint(Arc::new(GaussianLocation::new(n + 1, sigma)?), n));
    e.closed_forms.fisher = Some(Arc::new(move |_| DMatrix::from_element(1, 1, nf / s2)));
    e.closed_forms.reconstruction_a = Some(Arc::new(move |t0, t| scalar(nf * (t[0] - t0[0]) / s2)));
    e.closed_forms.reconstruction_b = Some(Arc::new(move |t0, t| nf * (t[0] * t[0] - t0[0] * t0[0]) / (2.0 * s2)));
    e.closed_forms.scalars.insert("mean_qep".into(), s2 / nf);
    Ok(e)
}

/// One draw of `N(θ, I_d)`. Closed forms: `I = I_d`, `A = θ − θ0`,
/// `B = (‖θ‖² − ‖θ0‖²)/2`.
pub fn gaussian_mean(dim: usize) -> Result<CatalogEntry> {
    let model = Arc::new(GaussianMean::new(dim)?);
    let grid = vec![vec![0.0; dim], (0..dim).map(|i| 0.5 - i as f64).collect()];
    let mut e = CatalogEntry::new(model, grid, IntegrationSpec::quadrature(64));
    e.add_predictand(
        Predictand::parametric("theta", dim, DVector::from_column_slice)
            .with_jacobian(move |_, _| DMatrix::identity(dim, dim)),
    );
    e.add_predictor(Predictor::new("mean", dim, DVector::from_column_slice));
    e.add_predictor(Predictor::new("zero", dim, move |_| DVector::zeros(dim)));
    e.closed_forms.fisher = Some(Arc::new(move |_| DMatrix::identity(dim, dim)));
    e.closed_forms.reconstruction_a =
        Some(Arc::new(|t0, t| DVector::from_iterator(t.len(), t.iter().zip(t0).map(|(a, b)| a - b))));
    e.closed_forms.reconstruction_b = Some(Arc::new(|t0, t| {
        0.5 * (t.iter().map(|v| v * v).sum::<f64>() - t0.iter().map(|v| v * v).sum::<f64>())
    }));
    e.closed_forms.efficient_predictor = Some("mean".into());
    Ok(e)
}

fn logit(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

/// iid Bernoulli(θ)ⁿ. Closed forms: `I = n/(θ(1 − θ))`,
/// `A = n(logit θ − logit θ0)`, `B = −n log((1 − θ)/(1 − θ0))`.
pub fn bernoulli(n: usize) -> Result<CatalogEntry> {
    let model = Arc::new(Bernoulli::new(n)?);
    let mut e = CatalogEntry::new(model, vec![vec![0.2], vec![0.5], vec![0.7]], IntegrationSpec::exact());
    add_scalar_iid_items(&mut e);
    let nf = n as f64;
    e.joint = Some(iid_joint(Arc::new(Bernoulli::new(n + 1)?), n));
    e.closed_forms.fisher = Some(Arc::new(move |t| DMatrix::from_element(1, 1, nf / (t[0] * (1.0 - t[0])))));
    e.closed_forms.reconstruction_a = Some(Arc::new(move |t0, t| scalar(nf * (logit(t[0]) - logit(t0[0])))));
    e.closed_forms.reconstruction_b =
        Some(Arc::new(move |t0, t| -nf * ((1.0 - t[0]) / (1.0 - t0[0])).ln()));
    Ok(e)
}

/// iid Poisson(θ)ⁿ. Closed forms: `I = n/θ`, `A = n log(θ/θ0)`,
/// `B = n(θ − θ0)`.
pub fn poisson(n: usize) -> Result<CatalogEntry> {
    let model = Arc::new(Poisson::new(n)?);
    let mut e = CatalogEntry::new(model, vec![vec![0.5], vec![2.0], vec![5.0]], IntegrationSpec::exact());
    add_scalar_iid_items(&mut e);
    let nf = n as f64;
    if n < 4 {
        e.joint = Some(iid_joint(Arc::new(Poisson::new(n + 1)?), n));
    }
    e.closed_forms.fisher = Some(Arc::new(move |t| DMatrix::from_element(1, 1, nf / t[0])));
    e.closed_forms.reconstruction_a = Some(Arc::new(move |t0, t| scalar(nf * (t[0] / t0[0]).ln())));
    e.closed_forms.reconstruction_b = Some(Arc::new(move |t0, t| nf * (t[0] - t0[0])));
    Ok(e)
}

/// Least-squares AR coefficient `Σ x_t x_{t−1} / Σ x_{t−1}²`.
fn ar_coefficient(x: &[f64]) -> f64 {
    let (num, den) = x
        .windows(2)
        .fold((0.0, 0.0), |(n, d), w| (n + w[1] * w[0], d + w[0] * w[0]));
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Stationary AR(1) path of length `n` observed, `Y = X_{n+1}` to be
/// predicted. Closed forms: stationary variance `1/(1 − θ²)`,
/// incompressible term 1, and `G = E X_n = 0` for `r = θ·x_n`.
pub fn ar1_prediction(n: usize) -> Result<CatalogEntry> {
    let model = Arc::new(Ar1::new(n)?);
    let mut e = CatalogEntry::new(
        model,
        vec![vec![-0.5], vec![0.0], vec![0.5]],
        IntegrationSpec::monte_carlo(100_000, 0),
    );
    e.add_predictand(
        Predictand::new("theta_times_last", 1, |x, t| scalar(t[0] * x[x.len() - 1]))
            .with_jacobian(|x, _| DMatrix::from_element(1, 1, x[x.len() - 1])),
    );
    e.add_predictand(
        Predictand::parametric("theta", 1, |t| scalar(t[0])).with_jacobian(|_, _| DMatrix::from_element(1, 1, 1.0)),
    );
    e.add_predictor(Predictor::new("plugin", 1, |x| scalar(ar_coefficient(x) * x[x.len() - 1])));
    e.add_predictor(Predictor::new("least_squares", 1, |x| scalar(ar_coefficient(x))));
    e.add_predictor(Predictor::new("zero", 1, |_| scalar(0.0)));
    let mut targets: BTreeMap<String, JointTarget> = BTreeMap::new();
    targets.insert("y".into(), Arc::new(|_, y, _| DVector::from_element(1, y[0])));
    e.joint = Some(JointSpec {
        model: Arc::new(Ar1::new(n + 1)?),
        x_dim: n,
        targets,
    });
    e.closed_forms.scalars.insert("incompressible".into(), 1.0);
    e.closed_forms.scalars.insert("g_theta_times_last".into(), 0.0);
    Ok(e)
}

/// iid Uniform(0, θ)ⁿ; not L²-differentiable.
pub fn uniform_scale(n: usize) -> Result<CatalogEntry> {
    let model = Arc::new(UniformScale::new(n)?);
    let mut e = CatalogEntry::new(model, vec![vec![0.5], vec![1.0], vec![2.0]], IntegrationSpec::quadrature(64));
    e.add_predictand(
        Predictand::parametric("theta", 1, |t| scalar(t[0])).with_jacobian(|_, _| DMatrix::from_element(1, 1, 1.0)),
    );
    let nf = n as f64;
    e.add_predictor(Predictor::new("scaled_max", 1, move |x| {
        scalar((nf + 1.0) / nf * x.iter().copied().fold(0.0, f64::max))
    }));
    e.add_predictor(Predictor::new("twice_mean", 1, |x| scalar(2.0 * mean(x))));
    Ok(e)
}

/// Entry for a family built from `(p, A, B, base)`. The normalization of
/// `exp(A'p − B)` under the base is checked on `grid`.
pub fn exponential_family_builder(
    spec: ExpFamilySpec,
    grid: &[Vec<f64>],
    integration: &IntegrationSpec,
) -> Result<CatalogEntry> {
    let model = builder::build(spec, grid, integration)?;
    let derived = derived_predictand(&model);
    let p = model.spec().p.clone();
    let d = model.param_dim();
    let mut e = CatalogEntry::new(Arc::new(model), grid.to_vec(), integration.clone());
    e.add_predictand(derived);
    e.add_predictand(
        Predictand::parametric("theta", d, DVector::from_column_slice)
            .with_jacobian(move |_, _| DMatrix::identity(d, d)),
    );
    e.closed_forms.efficient_predictor = Some(p.name.clone());
    e.add_predictor(p.renamed("efficient"));
    Ok(e)
}

fn parse_params(spec: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = BTreeMap::new();
    for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("malformed model parameter {kv:?} in {spec:?}")))?;
        if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("duplicate model parameter {k:?}")));
        }
    }
    Ok((name.trim().to_string(), params))
}

struct Params {
    id: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn take<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T> {
        match self.map.remove(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::invalid(format!("{}: cannot parse {key}={v}", self.id))),
            None => default.ok_or_else(|| Error::invalid(format!("{}: missing parameter {key}", self.id))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(Error::invalid(format!("{}: unknown parameter {k}", self.id))),
            None => Ok(()),
        }
    }
}

/// Catalog entry by identifier. Known names: `gaussian_location` (n,
/// sigma), `gaussian_mean` (dim), `bernoulli` (n), `poisson` (n),
/// `ar1_prediction` (n), `uniform_scale` (n), and the builder presets
/// `exp_family_normal`, `exp_family_bernoulli`, `exp_family_constant`.
pub fn lookup(id: &str) -> Result<CatalogEntry> {
    let (name, map) = parse_params(id)?;
    let mut p = Params { id: id.to_string(), map };
    let entry = match name.as_str() {
        "gaussian_location" => {
            let n = p.take("n", Some(1usize))?;
            let sigma = p.take("sigma", Some(1.0))?;
            gaussian_location(n, sigma)?
        }
        "gaussian_mean" => gaussian_mean(p.take("dim", Some(2usize))?)?,
        "bernoulli" => bernoulli(p.take("n", Some(1usize))?)?,
        "poisson" => poisson(p.take("n", Some(1usize))?)?,
        "ar1_prediction" => ar1_prediction(p.take("n", Some(20usize))?)?,
        "uniform_scale" => uniform_scale(p.take("n", Some(1usize))?)?,
        "exp_family_normal" => exponential_family_builder(
            ExpFamilySpec::normal_location(),
            &[vec![-1.0], vec![0.0], vec![0.25], vec![0.5], vec![1.0]],
            &IntegrationSpec::quadrature(200),
        )?,
        "exp_family_bernoulli" => exponential_family_builder(
            ExpFamilySpec::bernoulli_natural(),
            &[vec![-1.0], vec![0.0], vec![1.0]],
            &IntegrationSpec::exact(),
        )?,
        "exp_family_constant" => exponential_family_builder(
            ExpFamilySpec::normal_base_constant(),
            &[vec![0.0], vec![0.5]],
            &IntegrationSpec::quadrature(200),
        )?,
        _ => return Err(Error::invalid(format!("unknown catalog model {name:?}"))),
    };
    p.finish()?;
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l2diff::{fisher_information, score};

    #[test]
    fn lookup_parses_identifiers() {
        let e = lookup("gaussian_location:n=10,sigma=1").unwrap();
        assert_eq!(e.id, "gaussian_location:n=10,sigma=1");
        assert_eq!(e.model.obs_dim(), 10);
        assert!(lookup("gaussian_location:n=10,sigma=1,extra=2").is_err());
        assert!(lookup("gaussian_location:n=ten").is_err());
        assert!(lookup("nope").is_err());
        assert!(lookup("bernoulli:n").is_err());
        assert_eq!(lookup("poisson").unwrap().id, "poisson:n=1");
    }

    #[test]
    fn gaussian_closed_forms() {
        let e = gaussian_location(10, 1.0).unwrap();
        let i = fisher_information(e.model.as_ref(), &[0.3], &e.default_integration).unwrap();
        let want = (e.closed_forms.fisher.as_ref().unwrap())(&[0.3]);
        assert!((i.value[(0, 0)] - want[(0, 0)]).abs() < 1e-6);
        assert_eq!(want[(0, 0)], 10.0);
        let one = gaussian_location(1, 1.0).unwrap();
        assert_eq!(score(one.model.as_ref(), &[0.5], &[1.5], None).unwrap()[0], 1.0);
    }

    #[test]
    fn discrete_closed_forms() {
        for (e, theta) in [(bernoulli(1).unwrap(), 0.5), (poisson(1).unwrap(), 2.0), (bernoulli(3).unwrap(), 0.3)] {
            let i = fisher_information(e.model.as_ref(), &[theta], &IntegrationSpec::exact()).unwrap();
            let want = (e.closed_forms.fisher.as_ref().unwrap())(&[theta])[(0, 0)];
            assert!((i.value[(0, 0)] - want).abs() < 1e-9 * want, "{}: {} vs {want}", e.id, i.value[(0, 0)]);
        }
    }

    #[test]
    fn closed_form_reconstruction_is_the_log_ratio() {
        for e in [gaussian_location(3, 2.0).unwrap(), bernoulli(2).unwrap(), poisson(2).unwrap()] {
            let (t0, t) = (e.theta_grid[1].clone(), e.theta_grid[2].clone());
            let a = (e.closed_forms.reconstruction_a.as_ref().unwrap())(&t0, &t);
            let b = (e.closed_forms.reconstruction_b.as_ref().unwrap())(&t0, &t);
            let p = e.predictor("mean").unwrap();
            for x in [vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]] {
                let x = &x[..e.model.obs_dim()];
                let lr = e.model.log_likelihood_ratio(&t0, &t, x).unwrap();
                let rep = a.dot(&p.eval(x).unwrap()) - b;
                assert!((lr - rep).abs() < 1e-12, "{}: {lr} vs {rep}", e.id);
            }
        }
    }

    #[test]
    fn median_handles_even_lengths() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn biases_fall_back_to_estimation() {
        let e = gaussian_location(10, 1.0).unwrap();
        assert!(matches!(e.biased_predictand("theta", "shrunk_mean").unwrap().bias, Bias::Analytic { .. }));
        assert!(matches!(e.biased_predictand("theta", "median").unwrap().bias, Bias::Estimated(_)));
    }

    #[test]
    fn builder_flags_bad_normalization_and_degenerate_fisher() {
        let e = lookup("exp_family_constant").unwrap();
        let i = fisher_information(e.model.as_ref(), &[0.5], &e.default_integration).unwrap();
        assert!(i.is_singular());
    }
}
