//! Reconstruction of an exponential-type representation
//! `dP_θ/dP_θ0 = exp(A(θ)'p(x) − B(x, θ))` by integrating along a path
//! `s ↦ θ_s` from θ0 to θ:
//!
//! ```text
//! A(θ)'   = ∫₀¹ θ̇_s' I(θ_s) G(θ_s)⁻¹ ds
//! B(x, θ) = ∫₀¹ θ̇_s' I(θ_s) G(θ_s)⁻¹ g(x, θ_s) ds
//! ```
//!
//! Integrals use composite Simpson on the path nodes; the error estimate is
//! `|S_n − S_{n/2}| / 15`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{g_general, g_simplified, Predictand, Predictor};
use crate::error::{Error, Result};
use crate::expectation::{expect_scalar, IntegrationSpec};
use crate::l2diff::fisher_information;
use crate::linalg::inverse_general;
use crate::model::{DominatedModel, Observation};

pub const DEFAULT_STEPS: usize = 1000;

/// Relative step of the differences taken across reconstructions.
pub const RECON_FD_STEP: f64 = 1e-4;

/// Largest accepted refinement error relative to `max(1, ‖A‖∞)`.
pub const REFINEMENT_TOL: f64 = 1e-3;

pub type PathFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
enum Shape {
    /// Piecewise linear through the points, each segment taking an equal
    /// share of `[0, 1]`.
    Polyline(Vec<DVector<f64>>),
    Custom { theta: PathFn, theta_dot: PathFn },
}

/// Continuously differentiable (piecewise for polylines) path in Θ.
#[derive(Clone)]
pub struct ParameterPath {
    shape: Shape,
    n_steps: usize,
}

impl fmt::Debug for ParameterPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("ParameterPath");
        match &self.shape {
            Shape::Polyline(p) => s.field("polyline", &p.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>()),
            Shape::Custom { .. } => s.field("custom", &true),
        };
        s.field("n_steps", &self.n_steps).finish()
    }
}

impl ParameterPath {
    pub fn straight(from: &[f64], to: &[f64]) -> Result<Self> {
        Self::polyline(&[from.to_vec(), to.to_vec()])
    }

    pub fn polyline(points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a path needs at least two points"));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("path points must be finite and of equal dimension"));
        }
        Ok(Self {
            shape: Shape::Polyline(points.iter().map(|p| DVector::from_column_slice(p)).collect()),
            n_steps: DEFAULT_STEPS,
        })
    }

    /// Path from closures for `θ_s` and `θ̇_s`.
    pub fn custom(theta: PathFn, theta_dot: PathFn) -> Self {
        Self {
            shape: Shape::Custom { theta, theta_dot },
            n_steps: DEFAULT_STEPS,
        }
    }

    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    fn segments(&self) -> usize {
        match &self.shape {
            Shape::Polyline(p) => p.len() - 1,
            Shape::Custom { .. } => 1,
        }
    }

    /// Step count actually used: rounded up to a multiple of `4·segments`
    /// so that kinks fall on even nodes and `n/2` is still even.
    pub fn effective_steps(&self) -> usize {
        let m = 4 * self.segments();
        self.n_steps.max(m).div_ceil(m) * m
    }

    pub fn theta_at(&self, s: f64) -> DVector<f64> {
        match &self.shape {
            Shape::Polyline(p) => {
                let m = p.len() - 1;
                let j = ((s * m as f64).floor() as usize).min(m - 1);
                let local = s * m as f64 - j as f64;
                &p[j] + (&p[j + 1] - &p[j]) * local
            }
            Shape::Custom { theta, .. } => theta(s),
        }
    }

    pub fn start(&self) -> DVector<f64> {
        self.theta_at(0.0)
    }

    pub fn end(&self) -> DVector<f64> {
        match &self.shape {
            Shape::Polyline(p) => p[p.len() - 1].clone(),
            Shape::Custom { theta, .. } => theta(1.0),
        }
    }

    /// `θ̇` at node `i` of `n`; at a polyline kink the two one-sided
    /// velocities are averaged, which matches Simpson on each segment.
    fn velocity_at_node(&self, i: usize, n: usize) -> DVector<f64> {
        match &self.shape {
            Shape::Polyline(p) => {
                let m = p.len() - 1;
                let seg = |j: usize| (&p[j + 1] - &p[j]) * m as f64;
                let per = n / m;
                if i.is_multiple_of(per) && i > 0 && i < n {
                    let j = i / per;
                    (seg(j - 1) + seg(j)) * 0.5
                } else {
                    seg((i / per).min(m - 1))
                }
            }
            Shape::Custom { theta_dot, .. } => theta_dot(i as f64 / n as f64),
        }
    }

    fn theta_at_node(&self, i: usize, n: usize) -> DVector<f64> {
        match &self.shape {
            Shape::Polyline(p) => {
                let m = p.len() - 1;
                let per = n / m;
                let j = (i / per).min(m - 1);
                let local = (i - j * per) as f64 / per as f64;
                &p[j] + (&p[j + 1] - &p[j]) * local
            }
            Shape::Custom { theta, .. } => theta(i as f64 / n as f64),
        }
    }
}

/// Integrand value `θ̇_s' I(θ_s) G(θ_s)⁻¹` at one path node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathNode {
    pub s: f64,
    pub theta: Vec<f64>,
    pub integrand: Vec<f64>,
}

/// Reconstructed `A(θ)` together with the node data needed for `B(x, θ)`.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub a: DVector<f64>,
    /// `‖S_n − S_{n/2}‖∞ / 15`.
    pub error_estimate: f64,
    pub n_steps: usize,
    pub nodes: Vec<PathNode>,
    g: Predictand,
}

fn simpson_weights(n: usize, stride: usize) -> Vec<(usize, f64)> {
    let m = n / stride;
    let h = stride as f64 / n as f64;
    (0..=m)
        .map(|j| {
            let w = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (j * stride, w * h / 3.0)
        })
        .collect()
}

/// `(S_n, |S_n − S_{n/2}| / 15)` of per-node vectors, summed in node order.
fn simpson(values: &[DVector<f64>], n: usize) -> (DVector<f64>, f64) {
    let k = values[0].len();
    let fine = simpson_weights(n, 1)
        .into_iter()
        .fold(DVector::zeros(k), |acc, (i, w)| acc + &values[i] * w);
    let coarse = simpson_weights(n, 2)
        .into_iter()
        .fold(DVector::zeros(k), |acc, (i, w)| acc + &values[i] * w);
    let err = (&fine - coarse).amax() / 15.0;
    (fine, err)
}

impl ReconstructionResult {
    /// `B(x, θ)` and its refinement error estimate.
    pub fn b_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        let values = self
            .nodes
            .iter()
            .map(|node| {
                if node.integrand.iter().all(|v| *v == 0.0) {
                    return Ok(DVector::zeros(1));
                }
                let g = self.g.eval(x, &node.theta)?;
                let v = DVector::from_column_slice(&node.integrand).dot(&g);
                if !v.is_finite() {
                    return Err(Error::Integrand { value: v }.at(&node.theta, &format!("B integrand at s={}", node.s)));
                }
                Ok(DVector::from_element(1, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let (b, err) = simpson(&values, self.n_steps);
        Ok((b[0], err))
    }

    pub fn integrand_samples(&self) -> DMatrix<f64> {
        let k = self.a.len();
        DMatrix::from_fn(self.nodes.len(), k, |i, j| self.nodes[i].integrand[j])
    }
}

/// `G(θ_s)`: simplified form for differentiable `g`, general form with the
/// supplied predictor otherwise.
fn sensitivity(
    model: &dyn DominatedModel,
    theta: &[f64],
    g: &Predictand,
    predictor: Option<&Predictor>,
    spec: &IntegrationSpec,
) -> Result<DMatrix<f64>> {
    if g.is_differentiable() {
        Ok(g_simplified(model, theta, g, spec)?.value)
    } else {
        let p = predictor.ok_or_else(|| {
            Error::invalid(format!("predictand {} is not differentiable; a predictor is required", g.name))
        })?;
        Ok(g_general(model, theta, p, g, spec)?.value)
    }
}

/// `θ̇_s' I(θ_s) G(θ_s)⁻¹` as a row (returned as a vector of length k).
pub fn path_integrand(
    model: &dyn DominatedModel,
    s: f64,
    path: &ParameterPath,
    g: &Predictand,
    predictor: Option<&Predictor>,
    spec: &IntegrationSpec,
) -> Result<DVector<f64>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("path parameter s={s} outside [0, 1]")));
    }
    let theta = path.theta_at(s);
    let vel = match &path.shape {
        Shape::Custom { theta_dot, .. } => theta_dot(s),
        Shape::Polyline(p) => {
            let m = p.len() - 1;
            let j = ((s * m as f64).floor() as usize).min(m - 1);
            (&p[j + 1] - &p[j]) * m as f64
        }
    };
    integrand_at(model, s, theta.as_slice(), &vel, g, predictor, spec)
}

fn integrand_at(
    model: &dyn DominatedModel,
    s: f64,
    theta: &[f64],
    vel: &DVector<f64>,
    g: &Predictand,
    predictor: Option<&Predictor>,
    spec: &IntegrationSpec,
) -> Result<DVector<f64>> {
    let d = theta.len();
    if vel.len() != d || d != model.param_dim() {
        return Err(Error::invalid("path dimension does not match the model"));
    }
    if g.k != d {
        return Err(Error::invalid(format!(
            "reconstruction needs a square G: predictand {} has k={} but theta has d={d}",
            g.name, g.k
        )));
    }
    let op = format!("path integrand at s={s}");
    model.check_theta(theta).map_err(|e| e.at(theta, &op))?;
    if vel.iter().all(|v| *v == 0.0) {
        return Ok(DVector::zeros(d));
    }
    let run = || -> Result<DVector<f64>> {
        let fisher = fisher_information(model, theta, spec)?;
        if fisher.is_singular() {
            return Err(Error::Singular {
                what: "Fisher information".into(),
                condition: fisher.condition_number(),
            });
        }
        let gm = sensitivity(model, theta, g, predictor, spec)?;
        let ginv = inverse_general(&gm, "G")?;
        let row = vel.transpose() * fisher.value * ginv;
        let out = row.transpose();
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::Integrand { value: *v });
        }
        Ok(out)
    };
    run().map_err(|e| e.at(theta, &op))
}

/// `A(θ)` along `path`, keeping the node data for `B`.
pub fn reconstruct(
    model: &dyn DominatedModel,
    path: &ParameterPath,
    g: &Predictand,
    predictor: Option<&Predictor>,
    spec: &IntegrationSpec,
) -> Result<ReconstructionResult> {
    let n = path.effective_steps();
    let nodes = (0..=n)
        .into_par_iter()
        .map(|i| -> Result<PathNode> {
            let s = i as f64 / n as f64;
            let theta = path.theta_at_node(i, n);
            let vel = path.velocity_at_node(i, n);
            let row = integrand_at(model, s, theta.as_slice(), &vel, g, predictor, spec)?;
            Ok(PathNode {
                s,
                theta: theta.as_slice().to_vec(),
                integrand: row.as_slice().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<DVector<f64>> = nodes.iter().map(|p| DVector::from_column_slice(&p.integrand)).collect();
    let (a, err) = simpson(&values, n);
    if !err.is_finite() || err > REFINEMENT_TOL * a.amax().max(1.0) {
        return Err(Error::Quadrature(format!(
            "path integral of A did not converge: refinement error {err:e} with {n} steps"
        )));
    }
    Ok(ReconstructionResult {
        a,
        error_estimate: err,
        n_steps: n,
        nodes,
        g: g.clone(),
    })
}

/// `A(θ)` at the end of `path` with its error estimate.
pub fn reconstruct_a(
    model: &dyn DominatedModel,
    path: &ParameterPath,
    g: &Predictand,
    spec: &IntegrationSpec,
) -> Result<(DVector<f64>, f64)> {
    let r = reconstruct(model, path, g, None, spec)?;
    Ok((r.a, r.error_estimate))
}

/// `B(x, θ)` at the end of `path` with its error estimate.
pub fn reconstruct_b(
    model: &dyn DominatedModel,
    path: &ParameterPath,
    g: &Predictand,
    x: &[f64],
    spec: &IntegrationSpec,
) -> Result<(f64, f64)> {
    reconstruct(model, path, g, None, spec)?.b_at(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathIndependence {
    /// `‖A_pathA − A_pathB‖∞`.
    pub delta_a: f64,
    /// Sum of the two refinement error estimates.
    pub quadrature_error: f64,
    /// `max_θ ‖(J_θA_rec)' − I G⁻¹‖∞` over the check grid.
    pub jacobian_condition_residual: f64,
}

fn straight_steps(from: &[f64], to: &[f64], n: usize) -> Result<ParameterPath> {
    Ok(ParameterPath::straight(from, to)?.with_steps(n))
}

/// `J_θA_rec` at θ by central differences of straight-path reconstructions
/// from θ0, returned with the B values of `xs` at the shifted endpoints.
#[allow(clippy::type_complexity)]
#[allow(clippy::too_many_arguments)]
fn shifted_reconstructions(
    model: &dyn DominatedModel,
    theta0: &[f64],
    theta: &[f64],
    g: &Predictand,
    predictor: Option<&Predictor>,
    xs: &[Observation],
    n_steps: usize,
    spec: &IntegrationSpec,
) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
    let d = theta.len();
    let mut ja = DMatrix::zeros(g.k, d);
    let mut grad_b = vec![DVector::zeros(d); xs.len()];
    let mut t = theta.to_vec();
    for i in 0..d {
        let h = RECON_FD_STEP * (1.0 + theta[i].abs());
        t[i] = theta[i] + h;
        let up = reconstruct(model, &straight_steps(theta0, &t, n_steps)?, g, predictor, spec)?;
        t[i] = theta[i] - h;
        let down = reconstruct(model, &straight_steps(theta0, &t, n_steps)?, g, predictor, spec)?;
        t[i] = theta[i];
        ja.set_column(i, &((&up.a - &down.a) / (2.0 * h)));
        for (x, gb) in xs.iter().zip(grad_b.iter_mut()) {
            gb[i] = (up.b_at(x)?.0 - down.b_at(x)?.0) / (2.0 * h);
        }
    }
    Ok((ja, grad_b))
}

/// Compare two paths with shared endpoints and test the gradient-field
/// condition `(J_θA)' = I G⁻¹` on `check_grid`.
pub fn path_independence_check(
    model: &dyn DominatedModel,
    path_a: &ParameterPath,
    path_b: &ParameterPath,
    g: &Predictand,
    predictor: Option<&Predictor>,
    check_grid: &[Vec<f64>],
    spec: &IntegrationSpec,
) -> Result<PathIndependence> {
    let ends = |p: &ParameterPath| (p.start(), p.end());
    let ((s_a, e_a), (s_b, e_b)) = (ends(path_a), ends(path_b));
    if (&s_a - &s_b).amax() > 1e-12 || (&e_a - &e_b).amax() > 1e-12 {
        return Err(Error::invalid("paths must share their endpoints"));
    }
    let ra = reconstruct(model, path_a, g, predictor, spec)?;
    let rb = reconstruct(model, path_b, g, predictor, spec)?;
    let mut residual = 0.0f64;
    for theta in check_grid {
        let (ja, _) = shifted_reconstructions(
            model,
            s_a.as_slice(),
            theta,
            g,
            predictor,
            &[],
            path_a.n_steps,
            spec,
        )?;
        let fisher = fisher_information(model, theta, spec).map_err(|e| e.at(theta, "fisher"))?;
        let gm = sensitivity(model, theta, g, predictor, spec)?;
        let field = fisher.value * inverse_general(&gm, "G").map_err(|e| e.at(theta, "gradient field"))?;
        residual = residual.max((ja.transpose() - field).amax());
    }
    Ok(PathIndependence {
        delta_a: (&ra.a - &rb.a).amax(),
        quadrature_error: ra.error_estimate + rb.error_estimate,
        jacobian_condition_residual: residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRatioReport {
    pub a: Vec<f64>,
    /// `E_θ0 exp(A'p − B)` (target 1).
    pub normalization: f64,
    pub normalization_std_error: f64,
    /// `max_x |log f_θ(x) − log f_θ0(x) − A'p(x) + B(x, θ)|` over the test
    /// points.
    pub pointwise_max_abs_log_error: f64,
    /// `max_x B − min_x B` over the test points; zero for x-free `g`.
    pub b_spread: f64,
    pub b_values: Vec<f64>,
}

/// Check `dP_θ/dP_θ0(x) = exp(A'p(x) − B(x, θ))` for the reconstruction
/// along `path` (θ0 at its start, θ at its end).
pub fn validate_density_ratio(
    model: &dyn DominatedModel,
    path: &ParameterPath,
    p: &Predictor,
    g: &Predictand,
    test_points: &[Observation],
    spec: &IntegrationSpec,
) -> Result<DensityRatioReport> {
    if test_points.is_empty() {
        return Err(Error::invalid("density-ratio validation needs test points"));
    }
    if p.k != g.k {
        return Err(Error::invalid("predictor and predictand dimensions differ"));
    }
    let theta0 = path.start();
    let theta = path.end();
    let rec = reconstruct(model, path, g, Some(p), spec)?;
    let exponent = |x: &[f64]| -> Result<f64> { Ok(rec.a.dot(&p.eval(x)?) - rec.b_at(x)?.0) };
    let (normalization, se) = expect_scalar(
        model,
        theta0.as_slice(),
        |x| {
            let e = exponent(x)?;
            if e > 709.0 {
                return Err(Error::Integrand { value: e.exp() });
            }
            Ok(e.exp())
        },
        spec,
    )
    .map_err(|e| e.at(theta.as_slice(), "normalization of the reconstructed ratio"))?;
    let mut worst = 0.0f64;
    let mut b_values = Vec::with_capacity(test_points.len());
    for x in test_points {
        let lr = model.log_likelihood_ratio(theta0.as_slice(), theta.as_slice(), x)?;
        if lr == f64::INFINITY {
            return Err(Error::AbsoluteContinuity(format!("P_theta has mass off the support of P_theta0 at x={x:?}")));
        }
        let b = rec.b_at(x)?.0;
        b_values.push(b);
        if lr == f64::NEG_INFINITY {
            continue;
        }
        worst = worst.max((lr - rec.a.dot(&p.eval(x)?) + b).abs());
    }
    let spread = b_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - b_values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DensityRatioReport {
        a: rec.a.as_slice().to_vec(),
        normalization,
        normalization_std_error: se,
        pointwise_max_abs_log_error: worst,
        b_spread: spread,
        b_values,
    })
}

/// `max_x ‖∇_θB(x, θ) − (J_θA)'g(x, θ)‖∞` with both sides from central
/// differences of straight-path reconstructions from θ0.
#[allow(clippy::too_many_arguments)]
pub fn gradient_condition_check(
    model: &dyn DominatedModel,
    theta0: &[f64],
    theta: &[f64],
    g: &Predictand,
    predictor: Option<&Predictor>,
    x_sample: &[Observation],
    n_steps: usize,
    spec: &IntegrationSpec,
) -> Result<f64> {
    if x_sample.is_empty() {
        return Err(Error::invalid("gradient check needs observation points"));
    }
    let (ja, grad_b) = shifted_reconstructions(model, theta0, theta, g, predictor, x_sample, n_steps, spec)?;
    let mut worst = 0.0f64;
    for (x, gb) in x_sample.iter().zip(&grad_b) {
        let rhs = ja.transpose() * g.eval(x, theta)?;
        worst = worst.max((gb - rhs).amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn quad() -> IntegrationSpec {
        IntegrationSpec::quadrature(200)
    }

    fn logit(t: f64) -> f64 {
        (t / (1.0 - t)).ln()
    }

    #[test]
    fn step_rounding() {
        let p = ParameterPath::straight(&[0.0], &[1.0]).unwrap();
        assert_eq!(p.effective_steps(), 1000);
        let l = ParameterPath::polyline(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap().with_steps(1002);
        assert_eq!(l.effective_steps(), 1008);
        assert!(ParameterPath::polyline(&[vec![0.0]]).is_err());
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let n = 8;
        let values: Vec<DVector<f64>> = (0..=n).map(|i| {
            let s = i as f64 / n as f64;
            DVector::from_element(1, s * s * s)
        }).collect();
        let (v, err) = simpson(&values, n);
        assert!((v[0] - 0.25).abs() < 1e-15 && err < 1e-15);
    }

    #[test]
    fn integrand_examples() {
        let e = catalog::gaussian_location(1, 1.0).unwrap();
        let g = e.predictand("theta").unwrap();
        let path = ParameterPath::straight(&[0.0], &[1.0]).unwrap();
        for s in [0.0, 0.3, 1.0] {
            let v = path_integrand(e.model.as_ref(), s, &path, g, None, &quad()).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-8);
        }
        let still = ParameterPath::straight(&[0.4], &[0.4]).unwrap();
        assert_eq!(path_integrand(e.model.as_ref(), 0.5, &still, g, None, &quad()).unwrap()[0], 0.0);

        let b = catalog::bernoulli(1).unwrap();
        let path = ParameterPath::straight(&[0.3], &[0.6]).unwrap();
        let v = path_integrand(b.model.as_ref(), 0.5, &path, b.predictand("theta").unwrap(), None, &IntegrationSpec::exact())
            .unwrap();
        let t = 0.45;
        assert!((v[0] - 0.3 / (t * (1.0 - t))).abs() < 1e-12);
    }

    #[test]
    fn gaussian_reconstruction() {
        let e = catalog::gaussian_location(1, 1.0).unwrap();
        let g = e.predictand("theta").unwrap();
        let path = ParameterPath::straight(&[0.0], &[1.0]).unwrap();
        let (a, err) = reconstruct_a(e.model.as_ref(), &path, g, &quad()).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-6 && err < 1e-6);
        let (b, _) = reconstruct_b(e.model.as_ref(), &path, g, &[0.7], &quad()).unwrap();
        assert!((b - 0.5).abs() < 1e-6);

        let zero = ParameterPath::straight(&[0.5], &[0.5]).unwrap();
        let r = reconstruct(e.model.as_ref(), &zero, g, None, &quad()).unwrap();
        assert_eq!(r.a[0], 0.0);
        assert_eq!(r.b_at(&[1.0]).unwrap().0, 0.0);
    }

    #[test]
    fn bernoulli_reconstruction_is_the_natural_parameter() {
        let e = catalog::bernoulli(1).unwrap();
        let g = e.predictand("theta").unwrap();
        for t in [0.25, 0.8] {
            let path = ParameterPath::straight(&[0.5], &[t]).unwrap();
            let (a, _) = reconstruct_a(e.model.as_ref(), &path, g, &IntegrationSpec::exact()).unwrap();
            assert!((a[0] - logit(t)).abs() < 1e-6, "{t}: {}", a[0]);
        }
    }

    #[test]
    fn refinement_converges_at_simpson_rate() {
        let e = catalog::bernoulli(1).unwrap();
        let g = e.predictand("theta").unwrap();
        let target = logit(0.9) - logit(0.2);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|n| {
                let path = ParameterPath::straight(&[0.2], &[0.9]).unwrap().with_steps(*n);
                (reconstruct_a(e.model.as_ref(), &path, g, &IntegrationSpec::exact()).unwrap().0[0] - target).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] >= 8.0 && errs[1] / errs[2] >= 8.0, "{errs:?}");
    }

    #[test]
    fn density_ratio_validation() {
        let e = catalog::gaussian_location(1, 1.0).unwrap();
        let path = ParameterPath::straight(&[0.0], &[1.0]).unwrap();
        let xs: Vec<Observation> = (0..100).map(|i| vec![-3.0 + 0.06 * i as f64]).collect();
        let r = validate_density_ratio(e.model.as_ref(), &path, e.predictor("mean").unwrap(), e.predictand("theta").unwrap(), &xs, &quad())
            .unwrap();
        assert!((r.normalization - 1.0).abs() < 1e-3, "{r:?}");
        assert!(r.pointwise_max_abs_log_error < 1e-5 && r.b_spread < 1e-6, "{r:?}");

        let b = catalog::bernoulli(1).unwrap();
        let path = ParameterPath::straight(&[0.5], &[0.25]).unwrap();
        let r = validate_density_ratio(
            b.model.as_ref(),
            &path,
            b.predictor("mean").unwrap(),
            b.predictand("theta").unwrap(),
            &[vec![0.0], vec![1.0]],
            &IntegrationSpec::exact(),
        )
        .unwrap();
        assert!(r.pointwise_max_abs_log_error < 1e-6, "{r:?}");

        let same = ParameterPath::straight(&[0.5], &[0.5]).unwrap();
        let r = validate_density_ratio(b.model.as_ref(), &same, b.predictor("mean").unwrap(), b.predictand("theta").unwrap(), &[vec![1.0]], &IntegrationSpec::exact())
            .unwrap();
        assert_eq!(r.normalization, 1.0);
        assert_eq!(r.pointwise_max_abs_log_error, 0.0);
    }

    #[test]
    fn one_dimensional_paths_agree() {
        let e = catalog::gaussian_location(1, 1.0).unwrap();
        let g = e.predictand("theta").unwrap();
        let a = ParameterPath::straight(&[0.0], &[1.0]).unwrap();
        let detour = ParameterPath::polyline(&[vec![0.0], vec![1.5], vec![1.0]]).unwrap();
        let r = path_independence_check(e.model.as_ref(), &a, &detour, g, None, &[], &quad()).unwrap();
        assert!(r.delta_a <= 1e-6, "{r:?}");
        let r = path_independence_check(e.model.as_ref(), &a, &a, g, None, &[], &quad()).unwrap();
        assert_eq!(r.delta_a, 0.0);
        assert!(path_independence_check(e.model.as_ref(), &a, &ParameterPath::straight(&[0.0], &[2.0]).unwrap(), g, None, &[], &quad()).is_err());
    }

    #[test]
    fn gradient_condition_on_gaussian() {
        let e = catalog::gaussian_location(1, 1.0).unwrap();
        let g = e.predictand("theta").unwrap();
        let xs = vec![vec![-1.0], vec![0.5], vec![2.0]];
        let r = gradient_condition_check(e.model.as_ref(), &[0.0], &[1.0], g, None, &xs, 200, &quad()).unwrap();
        assert!(r <= 1e-4, "{r}");
        let r = gradient_condition_check(e.model.as_ref(), &[0.3], &[0.3], g, None, &xs, 200, &quad()).unwrap();
        assert!(r <= 1e-4, "{r}");
    }

    #[test]
    fn non_square_g_is_rejected() {
        let e = catalog::gaussian_mean(2).unwrap();
        let g = Predictand::parametric("first", 1, |t| DVector::from_element(1, t[0]));
        let path = ParameterPath::straight(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(reconstruct(e.model.as_ref(), &path, &g, None, &IntegrationSpec::quadrature(32)), Err(Error::Invalid(_))));
    }

    #[test]
    fn singular_g_names_the_node() {
        let e = catalog::gaussian_location(1, 1.0).unwrap();
        let g = e.predictand("constant").unwrap();
        let path = ParameterPath::straight(&[0.0], &[1.0]).unwrap().with_steps(8);
        let err = reconstruct(e.model.as_ref(), &path, g, None, &quad()).unwrap_err();
        assert!(matches!(err.root(), Error::Singular { .. }));
        assert!(err.to_string().contains("s="), "{err}");
    }
}
