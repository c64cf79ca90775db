//! Expectations `E_θ[h(X)]` of matrix-valued integrands.
//!
//! Three modes share one entry point:
//!
//! * `ExactDiscrete` sums over the (tail-truncated) support of a counting
//!   model;
//! * `Quadrature` uses composite Gauss-Legendre panels per continuous axis
//!   over `loc ± box_half_width·scale` and enumerates discrete axes;
//! * `MonteCarlo` averages over a seeded batch and reports entrywise
//!   standard errors.
//!
//! All modes split the work into fixed chunks and reduce them in index
//! order, so results are bit-identical whatever the number of worker threads.

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{substream, AxisSupport, DominatedModel};

const CHUNK: usize = 4096;
const MAX_POINTS: usize = 1 << 24;
const PANEL_ORDER: usize = 16;
const MAX_QUADRATURE_AXES: usize = 4;

/// How an expectation is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegrationMode {
    ExactDiscrete,
    Quadrature {
        nodes_per_axis: usize,
        /// Explicit integration box per continuous axis; derived from the
        /// model's location/scale hints when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<Vec<(f64, f64)>>,
    },
    MonteCarlo {
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSpec {
    pub mode: IntegrationMode,
    /// Advisory relative accuracy target; reported, not enforced.
    pub target_rel_tol: f64,
    /// Half-width of the quadrature box in units of the axis scale.
    pub box_half_width: f64,
    /// Mass that discrete truncation is allowed to drop.
    pub tail_mass: f64,
}

pub fn default_rel_tol() -> f64 {
    1e-6
}
pub fn default_half_width() -> f64 {
    10.0
}
pub fn default_tail_mass() -> f64 {
    1e-16
}

impl IntegrationSpec {
    pub fn with_mode(mode: IntegrationMode) -> Self {
        Self {
            mode,
            target_rel_tol: default_rel_tol(),
            box_half_width: default_half_width(),
            tail_mass: default_tail_mass(),
        }
    }

    pub fn exact() -> Self {
        Self::with_mode(IntegrationMode::ExactDiscrete)
    }

    pub fn quadrature(nodes_per_axis: usize) -> Self {
        Self::with_mode(IntegrationMode::Quadrature {
            nodes_per_axis,
            bounds: None,
        })
    }

    pub fn monte_carlo(n: usize, seed: u64) -> Self {
        Self::with_mode(IntegrationMode::MonteCarlo { n, seed })
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self.mode, IntegrationMode::MonteCarlo { .. })
    }

    pub fn seed(&self) -> Option<u64> {
        match self.mode {
            IntegrationMode::MonteCarlo { seed, .. } => Some(seed),
            _ => None,
        }
    }

    /// Replace the Monte Carlo seed; other modes are returned unchanged.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let IntegrationMode::MonteCarlo { seed, .. } = &mut self.mode {
            *seed = new_seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.mode {
            IntegrationMode::Quadrature {
                nodes_per_axis,
                bounds,
            } => {
                if *nodes_per_axis < 15 {
                    return Err(Error::invalid("quadrature needs at least 15 nodes per axis"));
                }
                if let Some(b) = bounds {
                    if b.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                        return Err(Error::invalid("quadrature bounds must be finite with lo < hi"));
                    }
                }
            }
            IntegrationMode::MonteCarlo { n, .. } if *n < 100 => {
                return Err(Error::invalid("monte carlo needs at least 100 draws"));
            }
            _ => {}
        }
        if !(self.box_half_width > 0.0) || !(self.tail_mass > 0.0 && self.tail_mass < 1e-3) {
            return Err(Error::invalid("box_half_width must be positive and tail_mass in (0, 1e-3)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    ExactDiscrete,
    Quadrature,
    MonteCarlo,
}

/// Value and entrywise standard error of an expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationResult {
    pub value: DMatrix<f64>,
    /// Zero in deterministic modes.
    pub std_error: DMatrix<f64>,
    pub n_effective: usize,
    pub mode_used: ModeTag,
}

impl ExpectationResult {
    pub fn scalar(&self) -> f64 {
        self.value[(0, 0)]
    }

    pub fn scalar_se(&self) -> f64 {
        self.std_error[(0, 0)]
    }

    pub fn max_std_error(&self) -> f64 {
        self.std_error.iter().fold(0.0, |a, v| a.max(*v))
    }
}

/// Matrix-valued integrand.
pub trait Integrand: Fn(&[f64]) -> Result<DMatrix<f64>> + Sync {}
impl<F: Fn(&[f64]) -> Result<DMatrix<f64>> + Sync> Integrand for F {}

/// Tensor grid of observation points with their base weights (quadrature
/// weight times counting weight); density is applied per point.
struct Grid {
    axes: Vec<Vec<(f64, f64)>>,
    len: usize,
    mode: ModeTag,
}

impl Grid {
    fn point(&self, mut idx: usize, x: &mut [f64]) -> f64 {
        let mut w = 1.0;
        for (axis, slot) in self.axes.iter().zip(x.iter_mut()).rev() {
            let (node, weight) = axis[idx % axis.len()];
            idx /= axis.len();
            *slot = node;
            w *= weight;
        }
        w
    }
}

fn gl_panels(lo: f64, hi: f64, nodes: usize) -> Vec<(f64, f64)> {
    let panels = nodes.div_ceil(PANEL_ORDER).max(1);
    let order = nodes.div_ceil(panels).max(2);
    let rule = GaussLegendre::new(order).expect("order >= 2");
    let width = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let half = 0.5 * width;
        let mid = a + half;
        for (node, weight) in rule.as_node_weight_pairs() {
            out.push((mid + half * node, half * weight));
        }
    }
    out
}

fn build_grid(model: &dyn DominatedModel, theta: &[f64], spec: &IntegrationSpec) -> Result<Grid> {
    let support = model.axis_support(theta, spec.tail_mass)?;
    let mut axes = Vec::with_capacity(support.len());
    let mode = match &spec.mode {
        IntegrationMode::ExactDiscrete => ModeTag::ExactDiscrete,
        IntegrationMode::Quadrature { .. } => ModeTag::Quadrature,
        IntegrationMode::MonteCarlo { .. } => unreachable!("grid is for deterministic modes"),
    };
    let continuous = support
        .iter()
        .filter(|a| matches!(a, AxisSupport::Continuous { .. }))
        .count();
    let mut cont_idx = 0;
    for axis in support {
        match axis {
            AxisSupport::Discrete(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::Coverage("empty discrete support".into()));
                }
                axes.push(atoms.into_iter().map(|a| (a, 1.0)).collect());
            }
            AxisSupport::Continuous {
                loc,
                scale,
                lower,
                upper,
            } => {
                let IntegrationMode::Quadrature {
                    nodes_per_axis,
                    bounds,
                } = &spec.mode
                else {
                    return Err(Error::Capability {
                        model: model.id(),
                        capability: "exact enumeration (continuous sample space)".into(),
                    });
                };
                if continuous > MAX_QUADRATURE_AXES {
                    return Err(Error::Capability {
                        model: model.id(),
                        capability: format!(
                            "tensor quadrature in {continuous} dimensions (at most {MAX_QUADRATURE_AXES})"
                        ),
                    });
                }
                let (lo, hi) = match bounds.as_ref().and_then(|b| b.get(cont_idx)) {
                    Some(&(lo, hi)) => (lo, hi),
                    None => (
                        (loc - spec.box_half_width * scale).max(lower),
                        (loc + spec.box_half_width * scale).min(upper),
                    ),
                };
                cont_idx += 1;
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Coverage(format!("degenerate quadrature box [{lo}, {hi}]")));
                }
                axes.push(gl_panels(lo, hi, *nodes_per_axis));
            }
        }
    }
    let len = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&n| n <= MAX_POINTS)
        .ok_or_else(|| {
            Error::Coverage(format!(
                "support grid of {} exceeds {MAX_POINTS} points",
                model.id()
            ))
        })?;
    Ok(Grid { axes, len, mode })
}

/// Running first and second moments of matrix samples (Chan/Welford).
#[derive(Clone)]
struct Moments {
    count: f64,
    mean: DMatrix<f64>,
    m2: DMatrix<f64>,
}

impl Moments {
    fn empty(shape: (usize, usize)) -> Self {
        Self {
            count: 0.0,
            mean: DMatrix::zeros(shape.0, shape.1),
            m2: DMatrix::zeros(shape.0, shape.1),
        }
    }

    fn push(&mut self, v: &DMatrix<f64>) {
        self.count += 1.0;
        let delta = v - &self.mean;
        self.mean += &delta / self.count;
        let delta2 = v - &self.mean;
        self.m2 += delta.component_mul(&delta2);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = other.clone();
            return;
        }
        let n = self.count + other.count;
        let delta = &other.mean - &self.mean;
        self.mean += &delta * (other.count / n);
        self.m2 += &other.m2 + delta.component_mul(&delta) * (self.count * other.count / n);
        self.count = n;
    }
}

fn check_finite(v: &DMatrix<f64>) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(bad) => Err(Error::Integrand { value: *bad }),
        None => Ok(()),
    }
}

fn check_shape(v: &DMatrix<f64>, shape: (usize, usize)) -> Result<()> {
    if v.shape() != shape {
        return Err(Error::Evaluation(format!(
            "integrand shape changed from {shape:?} to {:?}",
            v.shape()
        )));
    }
    Ok(())
}

/// `E_θ[h(X)]` in the requested mode.
pub fn expect<H: Integrand>(
    model: &dyn DominatedModel,
    theta: &[f64],
    h: &H,
    spec: &IntegrationSpec,
) -> Result<ExpectationResult> {
    spec.validate()?;
    model.check_theta(theta)?;
    match spec.mode {
        IntegrationMode::MonteCarlo { n, seed } => expect_mc(model, theta, h, n, seed),
        _ => {
            let grid = build_grid(model, theta, spec)?;
            expect_grid(model, theta, h, &grid)
        }
    }
}

fn expect_grid<H: Integrand>(
    model: &dyn DominatedModel,
    theta: &[f64],
    h: &H,
    grid: &Grid,
) -> Result<ExpectationResult> {
    let dim = grid.axes.len();
    let n_chunks = grid.len.div_ceil(CHUNK);
    // (mass, weighted sum, first shape seen)
    let partials: Vec<(f64, Option<DMatrix<f64>>, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut x = vec![0.0; dim];
            let mut mass = 0.0;
            let mut acc: Option<DMatrix<f64>> = None;
            let mut used = 0usize;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(grid.len) {
                let base = grid.point(idx, &mut x);
                let w = base * model.density(&x, theta)?;
                if w == 0.0 {
                    continue;
                }
                mass += w;
                used += 1;
                let v = h(&x)?;
                check_finite(&v)?;
                match &mut acc {
                    Some(a) => {
                        check_shape(&v, a.shape())?;
                        *a += v * w;
                    }
                    None => acc = Some(v * w),
                }
            }
            Ok((mass, acc, used))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mass = 0.0;
    let mut total: Option<DMatrix<f64>> = None;
    let mut used = 0;
    for (m, acc, u) in partials {
        mass += m;
        used += u;
        if let Some(a) = acc {
            match &mut total {
                Some(t) => {
                    check_shape(&a, t.shape())?;
                    *t += a;
                }
                None => total = Some(a),
            }
        }
    }
    let tol = match grid.mode {
        ModeTag::ExactDiscrete => 1e-9,
        _ => 1e-7,
    };
    if !((mass - 1.0).abs() <= tol) {
        return Err(Error::Coverage(format!(
            "{} captured mass {mass} at theta {theta:?} (tolerance {tol:e})",
            model.id()
        )));
    }
    let value = total.ok_or_else(|| Error::Coverage("no point with positive mass".into()))?;
    let shape = value.shape();
    Ok(ExpectationResult {
        value,
        std_error: DMatrix::zeros(shape.0, shape.1),
        n_effective: used,
        mode_used: grid.mode,
    })
}

fn expect_mc<H: Integrand>(
    model: &dyn DominatedModel,
    theta: &[f64],
    h: &H,
    n: usize,
    seed: u64,
) -> Result<ExpectationResult> {
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<Moments> {
            let mut m: Option<Moments> = None;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let x = model.sample_one(theta, &mut substream(seed, i as u64))?;
                let v = h(&x)?;
                check_finite(&v)?;
                let moments = m.get_or_insert_with(|| Moments::empty(v.shape()));
                check_shape(&v, moments.mean.shape())?;
                moments.push(&v);
            }
            Ok(m.expect("chunks are nonempty"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = partials[0].clone();
    for p in &partials[1..] {
        check_shape(&p.mean, total.mean.shape())?;
        total.merge(p);
    }
    let nf = n as f64;
    let std_error = total.m2.map(|m2| (m2.max(0.0) / (nf - 1.0) / nf).sqrt());
    Ok(ExpectationResult {
        value: total.mean,
        std_error,
        n_effective: n,
        mode_used: ModeTag::MonteCarlo,
    })
}

/// `E_θ[h]` computed as `E_θ0[L(θ0, θ) h]`.
pub fn expect_under_shifted<H: Integrand>(
    model: &dyn DominatedModel,
    theta0: &[f64],
    theta: &[f64],
    h: &H,
    spec: &IntegrationSpec,
) -> Result<ExpectationResult> {
    model.check_theta(theta)?;
    let weighted = |x: &[f64]| -> Result<DMatrix<f64>> {
        let l = model.likelihood_ratio(theta0, theta, x)?;
        if l.is_infinite() {
            return Err(Error::AbsoluteContinuity(format!(
                "L(theta0={theta0:?}, theta={theta:?}) = +inf at x={x:?}"
            )));
        }
        Ok(h(x)? * l)
    };
    expect(model, theta0, &weighted, spec)
}

/// Scalar convenience wrapper around [`expect`].
pub fn expect_scalar<F>(
    model: &dyn DominatedModel,
    theta: &[f64],
    h: F,
    spec: &IntegrationSpec,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let r = expect(
        model,
        theta,
        &|x: &[f64]| Ok(DMatrix::from_element(1, 1, h(x)?)),
        spec,
    )?;
    Ok((r.scalar(), r.scalar_se()))
}

/// Outcome of a moment-finiteness probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentProbe {
    pub value: f64,
    pub std_error: f64,
    /// The estimate keeps growing as more of the tail is included (or, for
    /// Monte Carlo, a single draw dominates the sum).
    pub diverging: bool,
}

/// Estimate `E_θ[h]` for a nonnegative `h` and test whether it is finite.
///
/// Quadrature: the box is doubled (with twice the nodes) and the estimate
/// must not move by more than `1e-6` relative. Exact: the truncated tail is
/// shrunk by three orders of magnitude with the same criterion. Monte Carlo:
/// flagged when one draw contributes more than 1% of the total.
pub fn probe_moment<F>(
    model: &dyn DominatedModel,
    theta: &[f64],
    h: F,
    spec: &IntegrationSpec,
) -> Result<MomentProbe>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let h = |x: &[f64]| -> Result<f64> {
        let v = h(x)?;
        if v.is_nan() || v < 0.0 {
            return Err(Error::Evaluation(format!("moment integrand must be nonnegative, got {v}")));
        }
        Ok(v)
    };
    match &spec.mode {
        IntegrationMode::MonteCarlo { n, seed } => {
            spec.validate()?;
            let batch = model.sample(theta, *n, *seed)?;
            let values = batch
                .observations
                .par_iter()
                .map(|x| h(x))
                .collect::<Result<Vec<f64>>>()?;
            let sum: f64 = values.iter().sum();
            let max = values.iter().copied().fold(0.0, f64::max);
            let nf = *n as f64;
            let mean = sum / nf;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            Ok(MomentProbe {
                value: mean,
                std_error: (var / nf).sqrt(),
                diverging: !sum.is_finite() || (sum > 0.0 && max / sum > 0.01),
            })
        }
        _ => {
            let first = match expect_scalar(model, theta, h, spec) {
                Ok(v) => v.0,
                Err(e) if matches!(e.root(), Error::Integrand { .. }) => {
                    return Ok(MomentProbe {
                        value: f64::INFINITY,
                        std_error: 0.0,
                        diverging: true,
                    })
                }
                Err(e) => return Err(e),
            };
            let mut wide = spec.clone();
            match &mut wide.mode {
                IntegrationMode::Quadrature {
                    nodes_per_axis,
                    bounds,
                } => {
                    *nodes_per_axis *= 2;
                    if let Some(b) = bounds {
                        for (lo, hi) in b.iter_mut() {
                            let (mid, half) = (0.5 * (*lo + *hi), 0.5 * (*hi - *lo));
                            *lo = mid - 2.0 * half;
                            *hi = mid + 2.0 * half;
                        }
                    }
                    wide.box_half_width *= 2.0;
                }
                _ => wide.tail_mass *= 1e-3,
            }
            let second = match expect_scalar(model, theta, h, &wide) {
                Ok(v) => v.0,
                Err(e) if matches!(e.root(), Error::Integrand { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let diverging =
                !second.is_finite() || (second - first).abs() > 1e-6 * first.abs().max(1.0);
            Ok(MomentProbe {
                value: if diverging { second } else { first },
                std_error: 0.0,
                diverging,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Bernoulli, GaussianLocation, Poisson};

    fn scalar(v: f64) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, v))
    }

    #[test]
    fn spec_validation() {
        assert!(IntegrationSpec::quadrature(14).validate().is_err());
        assert!(IntegrationSpec::monte_carlo(99, 0).validate().is_err());
        assert!(IntegrationSpec::quadrature(15).validate().is_ok());
        assert!(IntegrationSpec::exact().validate().is_ok());
    }

    #[test]
    fn gaussian_mean_is_zero_under_mc() {
        let m = GaussianLocation::new(1, 1.0).unwrap();
        let r = expect(&m, &[0.0], &|x: &[f64]| scalar(x[0]), &IntegrationSpec::monte_carlo(20_000, 3)).unwrap();
        assert!(r.scalar().abs() < 3.0 * r.scalar_se());
        assert!((r.scalar_se() - (1.0f64 / 20_000.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn bernoulli_mean_exact() {
        let m = Bernoulli::new(1).unwrap();
        let r = expect(&m, &[0.25], &|x: &[f64]| scalar(x[0]), &IntegrationSpec::exact()).unwrap();
        assert_eq!(r.scalar(), 0.25);
        assert_eq!(r.scalar_se(), 0.0);
        assert_eq!(r.mode_used, ModeTag::ExactDiscrete);
    }

    #[test]
    fn gaussian_second_moment_quadrature() {
        let m = GaussianLocation::new(1, 1.0).unwrap();
        let r = expect(&m, &[0.0], &|x: &[f64]| scalar(x[0] * x[0]), &IntegrationSpec::quadrature(200)).unwrap();
        assert!((r.scalar() - 1.0).abs() < 1e-8, "{}", r.scalar());
    }

    #[test]
    fn exact_mode_rejects_continuous_models() {
        let m = GaussianLocation::new(1, 1.0).unwrap();
        let r = expect(&m, &[0.0], &|x: &[f64]| scalar(x[0]), &IntegrationSpec::exact());
        assert!(matches!(r, Err(Error::Capability { .. })));
    }

    #[test]
    fn high_dimensional_quadrature_is_refused() {
        let m = GaussianLocation::new(10, 1.0).unwrap();
        let r = expect(&m, &[0.0], &|x: &[f64]| scalar(x[0]), &IntegrationSpec::quadrature(15));
        assert!(matches!(r, Err(Error::Capability { .. })));
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let m = Bernoulli::new(1).unwrap();
        let r = expect(&m, &[0.5], &|x: &[f64]| scalar(1.0 / x[0]), &IntegrationSpec::exact());
        assert!(matches!(r, Err(Error::Integrand { .. })));
    }

    #[test]
    fn shifted_expectation_examples() {
        let g = GaussianLocation::new(1, 1.0).unwrap();
        let q = IntegrationSpec::quadrature(200);
        let one = expect_under_shifted(&g, &[0.0], &[0.5], &|_: &[f64]| scalar(1.0), &q).unwrap();
        assert!((one.scalar() - 1.0).abs() < 1e-10);

        let mc = IntegrationSpec::monte_carlo(50_000, 11);
        let r = expect_under_shifted(&g, &[0.0], &[0.5], &|x: &[f64]| scalar(x[0]), &mc).unwrap();
        assert!((r.scalar() - 0.5).abs() < 3.0 * r.scalar_se(), "{} ± {}", r.scalar(), r.scalar_se());

        let b = Bernoulli::new(1).unwrap();
        let r = expect_under_shifted(&b, &[0.5], &[0.25], &|x: &[f64]| scalar(x[0]), &IntegrationSpec::exact()).unwrap();
        assert_eq!(r.scalar(), 0.25);
    }

    #[test]
    fn mc_is_reproducible_and_thread_independent() {
        let g = GaussianLocation::new(3, 1.0).unwrap();
        let spec = IntegrationSpec::monte_carlo(10_000, 5);
        let h = |x: &[f64]| scalar(x.iter().sum::<f64>().powi(2));
        let a = expect(&g, &[0.2], &h, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| expect(&g, &[0.2], &h, &spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_truncation_captures_mass() {
        let p = Poisson::new(2).unwrap();
        let (mass, _) = expect_scalar(&p, &[3.0], |_| Ok(1.0), &IntegrationSpec::exact()).unwrap();
        assert!((mass - 1.0).abs() < 1e-11);
    }

    #[test]
    fn divergent_moment_is_detected() {
        let g = GaussianLocation::new(1, 1.0).unwrap();
        let q = IntegrationSpec::quadrature(200);
        let bad = probe_moment(&g, &[0.0], |x| Ok((x[0] * x[0] / 2.0).exp()), &q).unwrap();
        assert!(bad.diverging);
        let good = probe_moment(&g, &[0.0], |x| Ok(x[0] * x[0]), &q).unwrap();
        assert!(!good.diverging);
        assert!((good.value - 1.0).abs() < 1e-8);

        let mc = IntegrationSpec::monte_carlo(100_000, 2);
        assert!(probe_moment(&g, &[0.0], |x| Ok((x[0] * x[0] / 2.0).exp()), &mc).unwrap().diverging);
        assert!(!probe_moment(&g, &[0.0], |x| Ok(x[0] * x[0]), &mc).unwrap().diverging);
    }
}
