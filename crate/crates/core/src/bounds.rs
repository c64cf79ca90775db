//! Quadratic error of prediction and its Cramér-Rao lower bounds.
//!
//! For a predictor `p(X)` of `g(X, θ) ∈ ℝᵏ` the QEP is
//! `R(θ) = E_θ(p − g)(p − g)'`. With score `L̇` and Fisher information `I`,
//!
//! ```text
//! R(θ) ≥ G I⁻¹ G'               G = J_θψ − E_θ[g L̇']     (general)
//!                               G = E_θ[J_θ g]           (unbiased p)
//! R(θ) ≥ b b' + G I⁻¹ G'        G = E_θ[J_θ r] + J_θ b   (p biased for r)
//! ```
//!
//! with `ψ(θ) = E_θ p`, and equality iff `p = g + G I⁻¹ L̇` almost surely.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expectation::{expect, probe_moment, ExpectationResult, IntegrationSpec};
use crate::l2diff::{check_l2_diff, dyadic_steps, fd_step, fisher_information, score, FisherMatrix};
use crate::linalg::{condition_number_sym, min_eigenvalue, symmetrize, MAX_CONDITION};
use crate::model::{DominatedModel, ParameterPoint};

pub type VectorFn = Arc<dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ParamVectorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type ParamMatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Quantity `g(x, θ) ∈ ℝᵏ` to be predicted.
#[derive(Clone)]
pub struct Predictand {
    pub name: String,
    pub k: usize,
    g: VectorFn,
    jacobian: Option<MatrixFn>,
    observation_free: bool,
    differentiable: bool,
}

impl fmt::Debug for Predictand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Predictand")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("observation_free", &self.observation_free)
            .finish()
    }
}

impl Predictand {
    pub fn new<F>(name: impl Into<String>, k: usize, g: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            k,
            g: Arc::new(g),
            jacobian: None,
            observation_free: false,
            differentiable: true,
        }
    }

    /// Estimand `g(θ)` that ignores the observation.
    pub fn parametric<F>(name: impl Into<String>, k: usize, g: F) -> Self
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        let mut out = Self::new(name, k, move |_x, t| g(t));
        out.observation_free = true;
        out
    }

    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// Mark `θ ↦ g(x, θ)` as not differentiable; bounds then need a
    /// predictor and use the general form of `G`.
    pub fn non_differentiable(mut self) -> Self {
        self.differentiable = false;
        self
    }

    pub fn is_observation_free(&self) -> bool {
        self.observation_free
    }

    pub fn is_differentiable(&self) -> bool {
        self.differentiable
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, x: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
        let v = (self.g)(x, theta);
        if v.len() != self.k {
            return Err(Error::Evaluation(format!(
                "predictand {} returned {} values, expected {}",
                self.name,
                v.len(),
                self.k
            )));
        }
        Ok(v)
    }

    /// `J_θ g(x, θ)` (k×d): analytic when supplied, else central differences
    /// with step `1e-5·(1 + |θ_i|)`.
    pub fn jacobian(&self, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        if !self.differentiable {
            return Err(Error::Capability {
                model: self.name.clone(),
                capability: "differentiation in theta".into(),
            });
        }
        if let Some(j) = &self.jacobian {
            let m = j(x, theta);
            if m.shape() != (self.k, theta.len()) {
                return Err(Error::Evaluation(format!(
                    "jacobian of {} has shape {:?}, expected ({}, {})",
                    self.name,
                    m.shape(),
                    self.k,
                    theta.len()
                )));
            }
            return Ok(m);
        }
        let mut out = DMatrix::zeros(self.k, theta.len());
        let mut t = theta.to_vec();
        for i in 0..theta.len() {
            let h = fd_step(theta[i]);
            t[i] = theta[i] + h;
            let up = self.eval(x, &t)?;
            t[i] = theta[i] - h;
            let down = self.eval(x, &t)?;
            t[i] = theta[i];
            out.set_column(i, &((up - down) / (2.0 * h)));
        }
        Ok(out)
    }
}

/// Measurable map `p(x) ∈ ℝᵏ` of the observation.
#[derive(Clone)]
pub struct Predictor {
    pub name: String,
    pub k: usize,
    p: ParamVectorFn,
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Predictor")
            .field("name", &self.name)
            .field("k", &self.k)
            .finish()
    }
}

impl Predictor {
    pub fn new<F>(name: impl Into<String>, k: usize, p: F) -> Self
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            k,
            p: Arc::new(p),
        }
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        let v = (self.p)(x);
        if v.len() != self.k {
            return Err(Error::Evaluation(format!(
                "predictor {} returned {} values, expected {}",
                self.name,
                v.len(),
                self.k
            )));
        }
        Ok(v)
    }
}

/// Bias `b(θ) = E_θ p − E_θ r` of a predictor of `r`.
#[derive(Clone)]
pub enum Bias {
    Analytic {
        b: ParamVectorFn,
        jacobian: Option<ParamMatrixFn>,
    },
    /// Estimated on the fly from the predictor; the Jacobian comes from
    /// central differences of the estimate.
    Estimated(Predictor),
}

impl fmt::Debug for Bias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bias::Analytic { jacobian, .. } => f
                .debug_struct("Analytic")
                .field("analytic_jacobian", &jacobian.is_some())
                .finish(),
            Bias::Estimated(p) => f.debug_tuple("Estimated").field(&p.name).finish(),
        }
    }
}

impl Bias {
    pub fn zero(k: usize, d: usize) -> Self {
        Bias::Analytic {
            b: Arc::new(move |_| DVector::zeros(k)),
            jacobian: Some(Arc::new(move |_| DMatrix::zeros(k, d))),
        }
    }
}

/// Conditional predictand `r(x, θ)` together with the bias of the
/// predictor used against it.
#[derive(Debug, Clone)]
pub struct BiasedPredictand {
    pub r: Predictand,
    pub bias: Bias,
}

/// Value and entrywise standard error of an estimated matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
}

impl Estimate {
    pub fn exact(value: DMatrix<f64>) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            std_error: DMatrix::zeros(r, c),
        }
    }

    pub fn max_std_error(&self) -> f64 {
        self.std_error.iter().fold(0.0, |a, v| a.max(*v))
    }
}

impl From<ExpectationResult> for Estimate {
    fn from(r: ExpectationResult) -> Self {
        Self {
            value: r.value,
            std_error: r.std_error,
        }
    }
}

fn check_k(p: &Predictor, g: &Predictand) -> Result<()> {
    if p.k != g.k {
        return Err(Error::invalid(format!(
            "predictor {} has dimension {} but predictand {} has {}",
            p.name, p.k, g.name, g.k
        )));
    }
    Ok(())
}

/// `E_θ(p − g)(p − g)'`.
pub fn qep(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    check_k(p, g)?;
    let r = expect(
        model,
        theta,
        &|x: &[f64]| {
            let e = p.eval(x)? - g.eval(x, theta)?;
            Ok(&e * e.transpose())
        },
        spec,
    )?;
    Ok(Estimate {
        value: symmetrize(&r.value),
        std_error: symmetrize(&r.std_error),
    })
}

/// Target `g(x, y, θ)` of a joint model whose observation is `(x, y)`.
pub type JointTarget = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> DVector<f64> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsepDecomposition {
    pub total: Estimate,
    pub qep_term: Estimate,
    pub incompressible: Estimate,
    /// `E[(p − r)(r − g)' + (r − g)(p − r)']`, zero when `r = E[g | X]`.
    pub cross_term: Estimate,
    /// Entrywise `sqrt(se_total² + se_qep² + se_incompressible²)`.
    pub combined_std_error: DMatrix<f64>,
    /// `|total − qep − incompressible| ≤ 3·combined` in every entry
    /// (with a `1e-10` floor for deterministic modes).
    pub consistent: bool,
}

/// Split `E(p − g)^{×2}` into QEP against `r` plus the incompressible
/// `E(r − g)^{×2}`. `joint` draws `(x, y)` with `x` in the first `x_dim`
/// coordinates; `r` must be supplied as `E_θ[g | X]`.
pub fn msep_decompose(
    joint: &dyn DominatedModel,
    x_dim: usize,
    theta: &[f64],
    p: &Predictor,
    g_xy: &JointTarget,
    r: &Predictand,
    spec: &IntegrationSpec,
) -> Result<MsepDecomposition> {
    check_k(p, r)?;
    if x_dim == 0 || x_dim >= joint.obs_dim() {
        return Err(Error::invalid("x_dim must split the joint observation into nonempty parts"));
    }
    let k = p.k;
    let res = expect(
        joint,
        theta,
        &|xy: &[f64]| {
            let (x, y) = xy.split_at(x_dim);
            let pv = p.eval(x)?;
            let gv = g_xy(x, y, theta);
            let rv = r.eval(x, theta)?;
            if gv.len() != k {
                return Err(Error::Evaluation("joint target has the wrong dimension".into()));
            }
            let a = &pv - &gv;
            let b = &pv - &rv;
            let c = &rv - &gv;
            let cross = &b * c.transpose();
            let mut out = DMatrix::zeros(4 * k, k);
            out.view_mut((0, 0), (k, k)).copy_from(&(&a * a.transpose()));
            out.view_mut((k, 0), (k, k)).copy_from(&(&b * b.transpose()));
            out.view_mut((2 * k, 0), (k, k)).copy_from(&(&c * c.transpose()));
            out.view_mut((3 * k, 0), (k, k)).copy_from(&(&cross + cross.transpose()));
            Ok(out)
        },
        spec,
    )?;
    let block = |i: usize| Estimate {
        value: symmetrize(&res.value.view((i * k, 0), (k, k)).into_owned()),
        std_error: symmetrize(&res.std_error.view((i * k, 0), (k, k)).into_owned()),
    };
    let (total, qep_term, incompressible, cross_term) = (block(0), block(1), block(2), block(3));
    let combined = total.std_error.zip_zip_map(&qep_term.std_error, &incompressible.std_error, |a, b, c| {
        (a * a + b * b + c * c).sqrt()
    });
    let gap = &total.value - &qep_term.value - &incompressible.value;
    let consistent = gap
        .iter()
        .zip(combined.iter())
        .all(|(g, s)| g.abs() <= (3.0 * s).max(1e-10));
    Ok(MsepDecomposition {
        total,
        qep_term,
        incompressible,
        cross_term,
        combined_std_error: combined,
        consistent,
    })
}

fn score_column(model: &dyn DominatedModel, theta: &[f64], x: &[f64]) -> Result<DVector<f64>> {
    score(model, theta, x, None)
}

/// `J_θψ(θ) = E_θ[δ L̇']` for `ψ(θ) = E_θ δ`.
pub fn psi_jacobian(
    model: &dyn DominatedModel,
    theta: &[f64],
    delta: &Predictor,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    Ok(expect(
        model,
        theta,
        &|x: &[f64]| Ok(delta.eval(x)? * score_column(model, theta, x)?.transpose()),
        spec,
    )?
    .into())
}

/// General sensitivity `G = J_θψ − E_θ[g L̇']`, estimated in one pass as
/// `E_θ[(p − g) L̇']`.
pub fn g_general(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    check_k(p, g)?;
    Ok(expect(
        model,
        theta,
        &|x: &[f64]| Ok((p.eval(x)? - g.eval(x, theta)?) * score_column(model, theta, x)?.transpose()),
        spec,
    )?
    .into())
}

/// `G = E_θ[J_θ g(X, θ)]`; exact when `g` ignores the observation.
pub fn g_simplified(
    model: &dyn DominatedModel,
    theta: &[f64],
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    model.check_theta(theta)?;
    if g.is_observation_free() {
        return Ok(Estimate::exact(g.jacobian(&[], theta)?));
    }
    Ok(expect(model, theta, &|x: &[f64]| g.jacobian(x, theta), spec)?.into())
}

/// A bound `b b' + G I⁻¹ G'` with the ingredients it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub bound: DMatrix<f64>,
    pub g_used: Estimate,
    pub fisher: DMatrix<f64>,
    pub fisher_std_error: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
}

fn sandwich(g: &DMatrix<f64>, fisher: &FisherMatrix) -> Result<DMatrix<f64>> {
    let inv = fisher.inverse()?;
    Ok(symmetrize(&(g * inv * g.transpose())))
}

/// `G I⁻¹ G'` with `G = E_θ J_θ g`, for unbiased predictors of `g`.
pub fn cr_bound_unbiased(
    model: &dyn DominatedModel,
    theta: &[f64],
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<Bound> {
    cr_bound_unbiased_with(model, theta, g, spec, spec)
}

/// As [`cr_bound_unbiased`] with the Fisher information integrated under
/// `fisher_spec`.
pub fn cr_bound_unbiased_with(
    model: &dyn DominatedModel,
    theta: &[f64],
    g: &Predictand,
    spec: &IntegrationSpec,
    fisher_spec: &IntegrationSpec,
) -> Result<Bound> {
    let fisher = fisher_information(model, theta, fisher_spec)?;
    let g_used = g_simplified(model, theta, g, spec)?;
    Ok(Bound {
        bound: sandwich(&g_used.value, &fisher)?,
        g_used,
        fisher: fisher.value,
        fisher_std_error: fisher.std_error,
        bias: None,
    })
}

/// Bias vector and its Jacobian at θ.
fn bias_and_jacobian(
    model: &dyn DominatedModel,
    theta: &[f64],
    r: &Predictand,
    bias: &Bias,
    spec: &IntegrationSpec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = theta.len();
    match bias {
        Bias::Analytic { b, jacobian } => {
            let value = b(theta);
            let jac = match jacobian {
                Some(j) => j(theta),
                None => {
                    let mut out = DMatrix::zeros(value.len(), d);
                    let mut t = theta.to_vec();
                    for i in 0..d {
                        let h = fd_step(theta[i]);
                        t[i] = theta[i] + h;
                        let up = b(&t);
                        t[i] = theta[i] - h;
                        let down = b(&t);
                        t[i] = theta[i];
                        out.set_column(i, &((up - down) / (2.0 * h)));
                    }
                    out
                }
            };
            if value.len() != r.k || jac.shape() != (r.k, d) {
                return Err(Error::Evaluation("bias has the wrong dimension".into()));
            }
            Ok((value, jac))
        }
        Bias::Estimated(p) => {
            check_k(p, r)?;
            let estimate = |t: &[f64]| -> Result<DVector<f64>> {
                let e = expect(
                    model,
                    t,
                    &|x: &[f64]| Ok(DMatrix::from_column_slice(r.k, 1, (p.eval(x)? - r.eval(x, t)?).as_slice())),
                    spec,
                )?;
                Ok(e.value.column(0).into_owned())
            };
            let value = estimate(theta)?;
            let mut jac = DMatrix::zeros(r.k, d);
            let mut t = theta.to_vec();
            for i in 0..d {
                // Common random numbers across the two evaluations in MC mode.
                let h = fd_step(theta[i]);
                t[i] = theta[i] + h;
                let up = estimate(&t)?;
                t[i] = theta[i] - h;
                let down = estimate(&t)?;
                t[i] = theta[i];
                jac.set_column(i, &((up - down) / (2.0 * h)));
            }
            Ok((value, jac))
        }
    }
}

/// `b(θ) b(θ)' + G I⁻¹ G'` with `G = E_θ J_θ r + J_θ b`.
pub fn cr_bound_biased(
    model: &dyn DominatedModel,
    theta: &[f64],
    rb: &BiasedPredictand,
    spec: &IntegrationSpec,
) -> Result<Bound> {
    cr_bound_biased_with(model, theta, rb, spec, spec)
}

/// As [`cr_bound_biased`] with the Fisher information integrated under
/// `fisher_spec`.
pub fn cr_bound_biased_with(
    model: &dyn DominatedModel,
    theta: &[f64],
    rb: &BiasedPredictand,
    spec: &IntegrationSpec,
    fisher_spec: &IntegrationSpec,
) -> Result<Bound> {
    let fisher = fisher_information(model, theta, fisher_spec)?;
    let (b, jb) = bias_and_jacobian(model, theta, &rb.r, &rb.bias, spec)?;
    let mut g_used = g_simplified(model, theta, &rb.r, spec)?;
    g_used.value += jb;
    let bound = &b * b.transpose() + sandwich(&g_used.value, &fisher)?;
    Ok(Bound {
        bound,
        g_used,
        fisher: fisher.value,
        fisher_std_error: fisher.std_error,
        bias: Some(b),
    })
}

/// Scalar estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `E_θ‖p − offset − g − G I⁻¹ L̇‖²` for a given `G`; zero iff the
/// predictor attains the bound.
///
/// The standard error also carries the plug-in uncertainty of the gain
/// `K = G I⁻¹`: with entrywise bound `|δK| ≤ |δG||I⁻¹| + |K||δI||I⁻¹|` the
/// residual moves by about `trace(|δK| I |δK|')`, which is added in
/// quadrature. The term vanishes when `G` and `I` are exact.
#[allow(clippy::too_many_arguments)]
pub fn equality_residual(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    offset: Option<&DVector<f64>>,
    g_matrix: &Estimate,
    fisher: &Estimate,
    spec: &IntegrationSpec,
) -> Result<ScalarEstimate> {
    check_k(p, g)?;
    let inv = crate::linalg::inverse_spd(&fisher.value, "Fisher information")?;
    let gain = &g_matrix.value * &inv;
    let r = expect(
        model,
        theta,
        &|x: &[f64]| {
            let mut e = p.eval(x)? - g.eval(x, theta)? - &gain * score_column(model, theta, x)?;
            if let Some(o) = offset {
                e -= o;
            }
            Ok(DMatrix::from_element(1, 1, e.norm_squared()))
        },
        spec,
    )?;
    let abs = |m: &DMatrix<f64>| m.map(f64::abs);
    let dk = &g_matrix.std_error * abs(&inv) + abs(&gain) * &fisher.std_error * abs(&inv);
    let plugin = (&dk * &fisher.value * dk.transpose()).trace().max(0.0);
    Ok(ScalarEstimate {
        value: r.scalar(),
        std_error: r.scalar_se().hypot(plugin),
    })
}

/// Equality residual for an unbiased predictor, with `G = E_θ J_θ g`.
pub fn efficiency_residual(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<ScalarEstimate> {
    efficiency_residual_with(model, theta, p, g, spec, spec)
}

/// As [`efficiency_residual`] with a separate Fisher integration.
pub fn efficiency_residual_with(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
    fisher_spec: &IntegrationSpec,
) -> Result<ScalarEstimate> {
    let bound = cr_bound_unbiased_with(model, theta, g, spec, fisher_spec)?;
    let fisher = Estimate {
        value: bound.fisher,
        std_error: bound.fisher_std_error,
    };
    equality_residual(model, theta, p, g, None, &bound.g_used, &fisher, spec)
}

/// `QEP − bound` and its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyGap {
    pub gap: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
}

impl EfficiencyGap {
    /// Every eigenvalue of the gap within `tol` of zero.
    pub fn is_efficient(&self, tol: f64) -> bool {
        self.max_abs_eigenvalue <= tol
    }
}

pub fn efficiency_gap(qep: &Estimate, bound: &DMatrix<f64>) -> Result<EfficiencyGap> {
    if qep.value.shape() != bound.shape() {
        return Err(Error::invalid("QEP and bound have different shapes"));
    }
    let gap = symmetrize(&(&qep.value - bound));
    let ev = crate::linalg::eigenvalues_sym(&gap);
    Ok(EfficiencyGap {
        min_eigenvalue: min_eigenvalue(&gap),
        max_abs_eigenvalue: ev.iter().fold(0.0, |a, v| a.max(v.abs())),
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    General,
    Simplified,
    Biased,
}

/// Threshold for unbiasedness: `‖E_θ(p − g)‖_∞ ≤ max(1e-3, 3σ)`.
pub const UNBIASED_ABS_TOL: f64 = 1e-3;

/// Everything known about one predictor at one θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub qep: Estimate,
    pub bound: DMatrix<f64>,
    pub gap: DMatrix<f64>,
    pub gap_min_eigenvalue: f64,
    pub equality_residual: ScalarEstimate,
    pub g_used: Estimate,
    pub i_used: DMatrix<f64>,
    pub form: BoundForm,
    /// `E_θ(p − g)` (or `E_θ(p − r)` in the biased form).
    pub mean_error: Estimate,
    pub bias: Option<DVector<f64>>,
    /// `G = 0`: the bound is the trivial zero matrix.
    pub degenerate: bool,
}

fn mean_error(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<Estimate> {
    check_k(p, g)?;
    Ok(expect(
        model,
        theta,
        &|x: &[f64]| Ok(DMatrix::from_column_slice(p.k, 1, (p.eval(x)? - g.eval(x, theta)?).as_slice())),
        spec,
    )?
    .into())
}

/// Full report for predictor `p` of `g` at θ. Unbiasedness is tested first;
/// the simplified `G = E J g` is used only when it holds and `g` is
/// differentiable, otherwise the general form.
pub fn prediction_bound(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<BoundReport> {
    prediction_bound_with(model, theta, p, g, spec, spec)
}

/// As [`prediction_bound`] with the Fisher information integrated under
/// `fisher_spec`, e.g. quadrature on the components of an iid model whose
/// joint expectations need Monte Carlo.
pub fn prediction_bound_with(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
    fisher_spec: &IntegrationSpec,
) -> Result<BoundReport> {
    let mean_err = mean_error(model, theta, p, g, spec)?;
    let unbiased = mean_err
        .value
        .iter()
        .zip(mean_err.std_error.iter())
        .all(|(m, s)| m.abs() <= UNBIASED_ABS_TOL.max(3.0 * s));
    let q = qep(model, theta, p, g, spec)?;
    let fisher = fisher_information(model, theta, fisher_spec)?;
    // Zero bias at a single point does not make p unbiased nearby, so the
    // simplified matrix is used only when it also agrees with the general one.
    let general = g_general(model, theta, p, g, spec)?;
    let (form, g_used) = if unbiased && g.is_differentiable() {
        let simple = g_simplified(model, theta, g, spec)?;
        let agree = simple
            .value
            .iter()
            .zip(general.value.iter())
            .zip(simple.std_error.iter().zip(general.std_error.iter()))
            .all(|((a, b), (sa, sb))| (a - b).abs() <= UNBIASED_ABS_TOL.max(3.0 * sa.hypot(*sb)));
        if agree {
            (BoundForm::Simplified, simple)
        } else {
            (BoundForm::General, general)
        }
    } else {
        (BoundForm::General, general)
    };
    let bound = sandwich(&g_used.value, &fisher)?;
    let gap = efficiency_gap(&q, &bound)?;
    let fisher = Estimate {
        value: fisher.value,
        std_error: fisher.std_error,
    };
    let eq = equality_residual(model, theta, p, g, None, &g_used, &fisher, spec)?;
    Ok(BoundReport {
        degenerate: g_used.value.iter().all(|v| *v == 0.0),
        qep: q,
        bound,
        gap: gap.gap,
        gap_min_eigenvalue: gap.min_eigenvalue,
        equality_residual: eq,
        g_used,
        i_used: fisher.value,
        form,
        mean_error: mean_err,
        bias: None,
    })
}

/// Report for `p` predicting `r` with bias `b`.
pub fn biased_prediction_bound(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    rb: &BiasedPredictand,
    spec: &IntegrationSpec,
) -> Result<BoundReport> {
    biased_prediction_bound_with(model, theta, p, rb, spec, spec)
}

/// As [`biased_prediction_bound`] with a separate Fisher integration.
pub fn biased_prediction_bound_with(
    model: &dyn DominatedModel,
    theta: &[f64],
    p: &Predictor,
    rb: &BiasedPredictand,
    spec: &IntegrationSpec,
    fisher_spec: &IntegrationSpec,
) -> Result<BoundReport> {
    let q = qep(model, theta, p, &rb.r, spec)?;
    let bound = cr_bound_biased_with(model, theta, rb, spec, fisher_spec)?;
    let gap = efficiency_gap(&q, &bound.bound)?;
    let b = bound.bias.clone().expect("biased bound carries its bias");
    let fisher = Estimate {
        value: bound.fisher.clone(),
        std_error: bound.fisher_std_error.clone(),
    };
    let eq = equality_residual(model, theta, p, &rb.r, Some(&b), &bound.g_used, &fisher, spec)?;
    Ok(BoundReport {
        degenerate: bound.g_used.value.iter().all(|v| *v == 0.0),
        mean_error: mean_error(model, theta, p, &rb.r, spec)?,
        qep: q,
        bound: bound.bound,
        gap: gap.gap,
        gap_min_eigenvalue: gap.min_eigenvalue,
        equality_residual: eq,
        g_used: bound.g_used,
        i_used: bound.fisher,
        form: BoundForm::Biased,
        bias: Some(b),
    })
}

/// One sampled condition of the regularity assumptions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionItem {
    pub item: u8,
    pub name: String,
    /// Sampled supremum (or the relevant statistic).
    pub value: f64,
    pub argmax: Option<Vec<Vec<f64>>>,
    pub passes: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub theta0: Vec<f64>,
    pub grid: Vec<Vec<f64>>,
    pub items: Vec<AssumptionItem>,
    pub all_pass: bool,
    pub caveat: String,
}

/// Grid evidence for the regularity conditions behind the bound at θ0:
/// L²-differentiability, invertible Fisher information, and finite sampled
/// suprema of `E_θ‖J_θ g(X, θ')‖²`, `E_θ L²(θ, θ')` and `E_θ‖p‖²` over the
/// neighbourhood grid.
pub fn check_assumptions(
    model: &dyn DominatedModel,
    theta0: &[f64],
    neighborhood: &[ParameterPoint],
    p: &Predictor,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<AssumptionReport> {
    if neighborhood.is_empty() {
        return Err(Error::invalid("neighbourhood grid is empty"));
    }
    check_k(p, g)?;
    model.check_theta(theta0)?;
    for t in neighborhood {
        model.check_theta(t.as_slice())?;
    }
    let d = theta0.len();
    let mut items = Vec::new();

    // 1. L²-differentiability along each coordinate.
    let mut l2_ok = true;
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    for axis in 0..d {
        let steps = dyadic_steps(d, axis);
        match check_l2_diff(model, theta0, &steps, spec) {
            Ok(diag) => {
                worst = worst.min(diag.fitted_exponent);
                l2_ok &= diag.passes;
            }
            Err(e) => {
                l2_ok = false;
                worst = f64::NAN;
                notes.push(format!("axis {axis}: {e}"));
            }
        }
    }
    items.push(AssumptionItem {
        item: 1,
        name: "l2_differentiable".into(),
        value: worst,
        argmax: None,
        passes: l2_ok,
        note: if notes.is_empty() {
            "smallest fitted remainder exponent over coordinate directions (must exceed 1)".into()
        } else {
            notes.join("; ")
        },
    });

    // 2. Invertible Fisher information.
    let fisher = fisher_information(model, theta0, spec)?;
    let cond = condition_number_sym(&fisher.value);
    items.push(AssumptionItem {
        item: 2,
        name: "fisher_invertible".into(),
        value: cond,
        argmax: None,
        passes: cond < MAX_CONDITION,
        note: format!("condition number of I(theta0), must be below {MAX_CONDITION:e}"),
    });

    let to_vec = |t: &ParameterPoint| t.as_slice().to_vec();

    // 3. sup E_θ‖J_θ g(X, θ')‖² over grid pairs.
    let mut sup3 = 0.0f64;
    let mut arg3 = None;
    let mut ok3 = true;
    let mut note3 = "sampled supremum over grid pairs".to_string();
    if g.is_differentiable() {
        for a in neighborhood {
            for b in neighborhood {
                let probe = probe_moment(
                    model,
                    a.as_slice(),
                    |x| Ok(g.jacobian(x, b.as_slice())?.norm_squared()),
                    spec,
                )?;
                if probe.diverging {
                    ok3 = false;
                }
                if probe.value > sup3 || probe.diverging {
                    sup3 = probe.value;
                    arg3 = Some(vec![to_vec(a), to_vec(b)]);
                }
            }
        }
    } else {
        ok3 = false;
        note3 = "predictand is not differentiable in theta".into();
    }
    items.push(AssumptionItem {
        item: 3,
        name: "sup_jacobian_second_moment".into(),
        value: sup3,
        argmax: arg3,
        passes: ok3 && sup3.is_finite(),
        note: note3,
    });

    // 4. sup E_θ L²(θ, θ').
    let mut sup4 = 0.0f64;
    let mut arg4 = None;
    let mut ok4 = true;
    let mut note4 = "sampled supremum over grid pairs".to_string();
    for a in neighborhood {
        for b in neighborhood {
            let res = probe_moment(
                model,
                a.as_slice(),
                |x| {
                    let l = model.log_likelihood_ratio(a.as_slice(), b.as_slice(), x)?;
                    if l == f64::INFINITY {
                        return Err(Error::AbsoluteContinuity(format!("L = +inf at x={x:?}")));
                    }
                    Ok((2.0 * l).exp())
                },
                spec,
            );
            match res {
                Ok(probe) => {
                    if probe.diverging {
                        ok4 = false;
                    }
                    if probe.value > sup4 || probe.diverging {
                        sup4 = probe.value;
                        arg4 = Some(vec![to_vec(a), to_vec(b)]);
                    }
                }
                Err(e) if matches!(e.root(), Error::AbsoluteContinuity(_) | Error::Integrand { .. }) => {
                    ok4 = false;
                    sup4 = f64::INFINITY;
                    arg4 = Some(vec![to_vec(a), to_vec(b)]);
                    note4 = e.to_string();
                }
                Err(e) => return Err(e),
            }
        }
    }
    items.push(AssumptionItem {
        item: 4,
        name: "sup_likelihood_ratio_second_moment".into(),
        value: sup4,
        argmax: arg4,
        passes: ok4 && sup4.is_finite(),
        note: note4,
    });

    // 5. sup E_θ‖p‖².
    let mut sup5 = 0.0f64;
    let mut arg5 = None;
    let mut ok5 = true;
    for a in neighborhood {
        let probe = probe_moment(model, a.as_slice(), |x| Ok(p.eval(x)?.norm_squared()), spec)?;
        if probe.diverging {
            ok5 = false;
        }
        if probe.value > sup5 || probe.diverging {
            sup5 = probe.value;
            arg5 = Some(vec![to_vec(a)]);
        }
    }
    items.push(AssumptionItem {
        item: 5,
        name: "sup_predictor_second_moment".into(),
        value: sup5,
        argmax: arg5,
        passes: ok5 && sup5.is_finite(),
        note: "sampled supremum over grid points".into(),
    });

    Ok(AssumptionReport {
        theta0: theta0.to_vec(),
        grid: neighborhood.iter().map(to_vec).collect(),
        all_pass: items.iter().all(|i| i.passes),
        items,
        caveat: "suprema are taken over a finite grid; this is evidence, not a proof".into(),
    })
}
