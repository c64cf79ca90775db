//! Scores, Fisher information and numerical evidence for (continuous)
//! L²-differentiability.
//!
//! The score is the pointwise derivative `∂_θ log f_θ(x)`, which coincides
//! with the L²-derivative `2 ∂_θ√f / √f` wherever the density is positive
//! and smooth. The diagnostics estimate the remainder terms that must vanish
//! for an L²-differentiable family and fit their decay rate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expectation::{expect, IntegrationSpec, ModeTag};
use crate::linalg::{condition_number_sym, symmetrize};
use crate::model::DominatedModel;

/// Relative step of central differences in θ: `h_i = 1e-5·(1 + |θ_i|)`.
pub const FD_REL_STEP: f64 = 1e-5;

/// Remainders below this multiple of their standard error are noise.
pub const NOISE_FLOOR: f64 = 10.0;

pub fn fd_step(theta_i: f64) -> f64 {
    FD_REL_STEP * (1.0 + theta_i.abs())
}

/// Score at `(x, θ)`: the model's closed form when it has one, otherwise a
/// central difference of `log f` (see [`numeric_score`]).
pub fn score(
    model: &dyn DominatedModel,
    theta: &[f64],
    x: &[f64],
    step: Option<f64>,
) -> Result<DVector<f64>> {
    if model.log_density(x, theta)? == f64::NEG_INFINITY {
        return Err(Error::Support {
            theta: theta.to_vec(),
        });
    }
    match model.analytic_score(x, theta) {
        Some(s) => Ok(s),
        None => numeric_score(model, theta, x, step),
    }
}

/// Central difference of `log f_θ(x)` in each coordinate. `step` is an
/// absolute step; `None` uses `1e-5·(1 + |θ_i|)`.
pub fn numeric_score(
    model: &dyn DominatedModel,
    theta: &[f64],
    x: &[f64],
    step: Option<f64>,
) -> Result<DVector<f64>> {
    if model.log_density(x, theta)? == f64::NEG_INFINITY {
        return Err(Error::Support {
            theta: theta.to_vec(),
        });
    }
    let mut out = DVector::zeros(theta.len());
    let mut shifted = theta.to_vec();
    for i in 0..theta.len() {
        let h = step.unwrap_or_else(|| fd_step(theta[i]));
        if !(h > 0.0) {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        shifted[i] = theta[i] + h;
        let up = model.log_density(x, &shifted)?;
        shifted[i] = theta[i] - h;
        let down = model.log_density(x, &shifted)?;
        shifted[i] = theta[i];
        let d = (up - down) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::Support {
                theta: theta.to_vec(),
            });
        }
        out[i] = d;
    }
    Ok(out)
}

/// `I(θ) = E_θ[L̇ L̇']` with its entrywise standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub value: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub mode_used: ModeTag,
}

impl FisherMatrix {
    pub fn condition_number(&self) -> f64 {
        condition_number_sym(&self.value)
    }

    pub fn is_singular(&self) -> bool {
        !(self.condition_number() < crate::linalg::MAX_CONDITION)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        crate::linalg::inverse_spd(&self.value, "Fisher information")
    }
}

/// Fisher information at θ. In deterministic modes an iid product model is
/// reduced to `n` times the information of one component, which keeps
/// quadrature one-dimensional.
pub fn fisher_information(
    model: &dyn DominatedModel,
    theta: &[f64],
    spec: &IntegrationSpec,
) -> Result<FisherMatrix> {
    model.check_theta(theta)?;
    if spec.is_deterministic() {
        if let Some((component, n)) = model.iid_components() {
            let one = fisher_information(component.as_ref(), theta, spec)?;
            let nf = n as f64;
            return Ok(FisherMatrix {
                value: one.value * nf,
                std_error: one.std_error * nf,
                mode_used: one.mode_used,
            });
        }
    }
    let r = expect(
        model,
        theta,
        &|x: &[f64]| {
            let s = score(model, theta, x, None)?;
            Ok(&s * s.transpose())
        },
        spec,
    )?;
    Ok(FisherMatrix {
        value: symmetrize(&r.value),
        std_error: symmetrize(&r.std_error),
        mode_used: r.mode_used,
    })
}

/// `E_θ L̇_θ` (zero for an L²-differentiable family) and its standard error.
pub fn score_mean(
    model: &dyn DominatedModel,
    theta: &[f64],
    spec: &IntegrationSpec,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let r = expect(
        model,
        theta,
        &|x: &[f64]| Ok(DMatrix::from_column_slice(theta.len(), 1, score(model, theta, x, None)?.as_slice())),
        spec,
    )?;
    Ok((r.value.column(0).into_owned(), r.std_error.column(0).into_owned()))
}

/// Estimated `E_θ0(√L_θ0(u) − 1 − ½u'L̇_θ0)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Remainder {
    pub value: f64,
    pub std_error: f64,
}

/// Tolerance on `1 − E_θ0 L_θ0(u)` before `P_{θ0+u}` is declared not
/// absolutely continuous with respect to `P_θ0`.
const MASS_DEFICIT_TOL: f64 = 1e-7;

fn shifted(theta0: &[f64], u: &[f64]) -> Vec<f64> {
    theta0.iter().zip(u).map(|(a, b)| a + b).collect()
}

fn log_ratio(model: &dyn DominatedModel, theta0: &[f64], theta: &[f64], x: &[f64]) -> Result<f64> {
    let l = model.log_likelihood_ratio(theta0, theta, x)?;
    if l == f64::INFINITY {
        return Err(Error::AbsoluteContinuity(format!(
            "L(theta0={theta0:?}, theta={theta:?}) = +inf at x={x:?}"
        )));
    }
    Ok(l)
}

/// Fails when `E_θ0 L(θ0, θ)` falls short of one: part of `P_θ`'s mass sits
/// where `f_θ0 = 0`.
fn check_mass(total: f64, se: f64, theta0: &[f64], theta: &[f64]) -> Result<()> {
    let deficit = 1.0 - total;
    if deficit > MASS_DEFICIT_TOL.max(5.0 * se) {
        return Err(Error::AbsoluteContinuity(format!(
            "P(theta={theta:?}) puts mass {deficit:.3e} outside the support of P(theta0={theta0:?})"
        )));
    }
    Ok(())
}

pub fn hellinger_remainder(
    model: &dyn DominatedModel,
    theta0: &[f64],
    u: &[f64],
    spec: &IntegrationSpec,
) -> Result<Remainder> {
    if u.len() != theta0.len() {
        return Err(Error::invalid("step u must have the parameter dimension"));
    }
    if u.iter().all(|v| *v == 0.0) {
        return Ok(Remainder {
            value: 0.0,
            std_error: 0.0,
        });
    }
    let theta = shifted(theta0, u);
    model.check_theta(&theta)?;
    let uv = DVector::from_column_slice(u);
    let r = expect(
        model,
        theta0,
        &|x: &[f64]| {
            let log_l = log_ratio(model, theta0, &theta, x)?;
            let s = score(model, theta0, x, None)?;
            let rem = (0.5 * log_l).exp_m1() - 0.5 * uv.dot(&s);
            Ok(DMatrix::from_column_slice(2, 1, &[rem * rem, log_l.exp()]))
        },
        spec,
    )?;
    check_mass(r.value[(1, 0)], r.std_error[(1, 0)], theta0, &theta)?;
    Ok(Remainder {
        value: r.value[(0, 0)].max(0.0),
        std_error: r.std_error[(0, 0)],
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Decay of the Hellinger remainder along a sequence of steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HellingerDiagnostic {
    pub u_norms: Vec<f64>,
    pub remainders: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Whether each point entered the slope fit.
    pub used_in_fit: Vec<bool>,
    pub fitted_exponent: f64,
    pub passes: bool,
    pub warnings: Vec<String>,
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_step_sequence(u_sequence: &[Vec<f64>], min_len: usize) -> Result<Vec<f64>> {
    if u_sequence.len() < min_len {
        return Err(Error::invalid(format!("need at least {min_len} steps")));
    }
    let norms: Vec<f64> = u_sequence.iter().map(|u| norm(u)).collect();
    if norms.iter().any(|n| !(*n > 0.0)) || norms.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("step norms must be positive and strictly decreasing"));
    }
    Ok(norms)
}

/// Fit `log remainder ≈ a + b log‖u‖` and pass iff `b > 1`, i.e. the
/// remainder is `o(‖u‖)` at the observed rate. Smooth families show `b ≈ 4`.
pub fn check_l2_diff(
    model: &dyn DominatedModel,
    theta0: &[f64],
    u_sequence: &[Vec<f64>],
    spec: &IntegrationSpec,
) -> Result<HellingerDiagnostic> {
    let u_norms = check_step_sequence(u_sequence, 5)?;
    let mut remainders = Vec::with_capacity(u_sequence.len());
    let mut std_errors = Vec::with_capacity(u_sequence.len());
    let mut used_in_fit = Vec::with_capacity(u_sequence.len());
    let mut warnings = Vec::new();
    for (u, n) in u_sequence.iter().zip(&u_norms) {
        let r = hellinger_remainder(model, theta0, u, spec)?;
        let usable = r.value > 0.0 && r.value > NOISE_FLOOR * r.std_error;
        if !usable {
            warnings.push(format!(
                "remainder {:.3e} ± {:.3e} at |u| = {n:.3e} is below the noise floor; excluded from fit",
                r.value, r.std_error
            ));
        }
        remainders.push(r.value);
        std_errors.push(r.std_error);
        used_in_fit.push(usable);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = u_norms
        .iter()
        .zip(&remainders)
        .zip(&used_in_fit)
        .filter(|(_, used)| **used)
        .map(|((x, y), _)| (*x, *y))
        .unzip();
    let fitted_exponent = log_log_slope(&xs, &ys);
    if xs.len() < 2 {
        warnings.push("fewer than two usable remainders; exponent not identifiable".into());
    }
    Ok(HellingerDiagnostic {
        u_norms,
        remainders,
        std_errors,
        used_in_fit,
        passes: fitted_exponent > 1.0,
        fitted_exponent,
        warnings,
    })
}

/// Default step grid `2^-3, …, 2^-8` along coordinate `axis`.
pub fn dyadic_steps(dim: usize, axis: usize) -> Vec<Vec<f64>> {
    (3..=8)
        .map(|j| {
            let mut u = vec![0.0; dim];
            u[axis] = 2f64.powi(-j);
            u
        })
        .collect()
}

/// Thresholds ε of the in-probability condition.
pub const LEMMA106_EPSILONS: [f64; 2] = [0.1, 0.01];

/// Evidence for the two-condition characterisation of L²-differentiability:
/// `L(u) − 1 = u'L̇ + o_P(‖u‖)` and `E(√L(u) − 1)² = ¼u'Iu + o(‖u‖²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma106Report {
    pub u_norms: Vec<f64>,
    /// `P_θ0(|L(u) − 1 − u'L̇| / ‖u‖ > ε)`, one row per step, one column per ε.
    pub cond1_probabilities: Vec<[f64; 2]>,
    pub cond1_std_errors: Vec<[f64; 2]>,
    /// `|E(√L(u) − 1)² − ¼u'Iu| / ‖u‖²`.
    pub cond2_residuals: Vec<f64>,
    pub cond2_std_errors: Vec<f64>,
    pub cond1_pass: bool,
    pub cond2_pass: bool,
}

/// Nonincreasing within `slack`, and the last value is at most half the
/// first (or negligible).
fn decreasing_to_zero(values: &[f64], slack: &[f64], negligible: f64) -> bool {
    if values.is_empty() || values.iter().all(|v| v.abs() <= negligible) {
        return true;
    }
    let monotone = values
        .windows(2)
        .zip(slack.windows(2))
        .all(|(v, s)| v[1] <= v[0] + s[0] + s[1]);
    let first = values[0];
    let last = *values.last().unwrap();
    monotone && (last <= 0.5 * first || last <= negligible)
}

pub fn check_lemma_106(
    model: &dyn DominatedModel,
    theta0: &[f64],
    u_sequence: &[Vec<f64>],
    spec: &IntegrationSpec,
) -> Result<Lemma106Report> {
    let nonzero: Vec<Vec<f64>> = u_sequence
        .iter()
        .filter(|u| u.iter().any(|v| *v != 0.0))
        .cloned()
        .collect();
    if nonzero.is_empty() {
        return Ok(Lemma106Report {
            u_norms: vec![0.0; u_sequence.len()],
            cond1_probabilities: vec![[0.0; 2]; u_sequence.len()],
            cond1_std_errors: vec![[0.0; 2]; u_sequence.len()],
            cond2_residuals: vec![0.0; u_sequence.len()],
            cond2_std_errors: vec![0.0; u_sequence.len()],
            cond1_pass: true,
            cond2_pass: true,
        });
    }
    let u_norms = check_step_sequence(&nonzero, 1)?;
    let fisher = fisher_information(model, theta0, spec)?;
    let quad_slack = if spec.is_deterministic() { 1e-6 } else { 0.0 };

    let mut cond1_probabilities = Vec::new();
    let mut cond1_std_errors = Vec::new();
    let mut cond2_residuals = Vec::new();
    let mut cond2_std_errors = Vec::new();
    for (u, un) in nonzero.iter().zip(&u_norms) {
        let theta = shifted(theta0, u);
        model.check_theta(&theta)?;
        let uv = DVector::from_column_slice(u);
        let r = expect(
            model,
            theta0,
            &|x: &[f64]| {
                let log_l = log_ratio(model, theta0, &theta, x)?;
                let s = score(model, theta0, x, None)?;
                let dev = (log_l.exp_m1() - uv.dot(&s)).abs() / un;
                let root = (0.5 * log_l).exp_m1();
                Ok(DMatrix::from_column_slice(
                    4,
                    1,
                    &[
                        f64::from(u8::from(dev > LEMMA106_EPSILONS[0])),
                        f64::from(u8::from(dev > LEMMA106_EPSILONS[1])),
                        root * root,
                        log_l.exp(),
                    ],
                ))
            },
            spec,
        )?;
        check_mass(r.value[(3, 0)], r.std_error[(3, 0)], theta0, &theta)?;
        cond1_probabilities.push([r.value[(0, 0)], r.value[(1, 0)]]);
        cond1_std_errors.push([r.std_error[(0, 0)], r.std_error[(1, 0)]]);
        let quad = 0.25 * (uv.transpose() * &fisher.value * &uv)[(0, 0)];
        let quad_se = 0.25 * (uv.transpose() * &fisher.std_error * &uv)[(0, 0)].abs();
        cond2_residuals.push((r.value[(2, 0)] - quad).abs() / (un * un));
        cond2_std_errors.push((r.std_error[(2, 0)] + quad_se) / (un * un));
    }

    let cond1_pass = (0..2).all(|j| {
        let vals: Vec<f64> = cond1_probabilities.iter().map(|p| p[j]).collect();
        let slack: Vec<f64> = cond1_std_errors
            .iter()
            .map(|s| 3.0 * s[j] + quad_slack)
            .collect();
        decreasing_to_zero(&vals, &slack, 1e-12)
    });
    let slack2: Vec<f64> = cond2_std_errors
        .iter()
        .zip(&u_norms)
        .map(|(s, n)| 3.0 * s + 1e-13 / (n * n))
        .collect();
    let cond2_pass = decreasing_to_zero(&cond2_residuals, &slack2, 1e-10);

    Ok(Lemma106Report {
        u_norms,
        cond1_probabilities,
        cond1_std_errors,
        cond2_residuals,
        cond2_std_errors,
        cond1_pass,
        cond2_pass,
    })
}

/// Norm used in the continuity residual `‖√L L̇_θ − L̇_θ0‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityNorm {
    /// `∫‖√f_θ L̇_θ − √f_θ0 L̇_θ0‖² dν`, evaluated as
    /// `E_θ0‖√L(θ0, θ) L̇_θ − L̇_θ0‖²`.
    #[default]
    DominatingMeasure,
    /// `E_θ0‖√L(θ, θ0) L̇_θ − L̇_θ0‖²`, the ratio taken the other way round.
    ReferenceWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub distances: Vec<f64>,
    pub residuals: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub tolerance: f64,
    pub norm: ContinuityNorm,
    pub passes: bool,
}

/// Continuity of the score in the L² sense along `θ_j → θ0`; passes iff
/// the residuals are nonincreasing (up to noise) and the last one is below
/// `tolerance`.
pub fn check_continuous_l2(
    model: &dyn DominatedModel,
    theta0: &[f64],
    theta_sequence: &[Vec<f64>],
    spec: &IntegrationSpec,
    norm_kind: ContinuityNorm,
    tolerance: f64,
) -> Result<ContinuityReport> {
    if theta_sequence.is_empty() {
        return Err(Error::invalid("theta sequence is empty"));
    }
    model.check_theta(theta0)?;
    let distances: Vec<f64> = theta_sequence
        .iter()
        .map(|t| {
            if t.len() != theta0.len() {
                return f64::NAN;
            }
            norm(&t.iter().zip(theta0).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .collect();
    if distances.iter().any(|d| d.is_nan()) || distances.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("theta sequence must approach theta0 monotonically"));
    }
    let mut residuals = Vec::with_capacity(theta_sequence.len());
    let mut std_errors = Vec::with_capacity(theta_sequence.len());
    for theta in theta_sequence {
        model.check_theta(theta)?;
        if theta.as_slice() == theta0 {
            residuals.push(0.0);
            std_errors.push(0.0);
            continue;
        }
        let r = expect(
            model,
            theta0,
            &|x: &[f64]| {
                let log_l = log_ratio(model, theta0, theta, x)?;
                let weight = match norm_kind {
                    ContinuityNorm::DominatingMeasure => (0.5 * log_l).exp(),
                    ContinuityNorm::ReferenceWeighted => (-0.5 * log_l).exp(),
                };
                if !weight.is_finite() {
                    return Err(Error::AbsoluteContinuity(format!(
                        "reference-weighted ratio is infinite at x={x:?}"
                    )));
                }
                let s0 = score(model, theta0, x, None)?;
                let diff = if weight == 0.0 {
                    -s0
                } else {
                    score(model, theta, x, None)? * weight - s0
                };
                Ok(DMatrix::from_element(1, 1, diff.norm_squared()))
            },
            spec,
        )?;
        residuals.push(r.scalar());
        std_errors.push(r.scalar_se());
    }
    let slack: Vec<f64> = std_errors.iter().map(|s| 3.0 * s + 1e-12).collect();
    let monotone = residuals
        .windows(2)
        .zip(slack.windows(2))
        .all(|(v, s)| v[1] <= v[0] + s[0] + s[1]);
    let last = *residuals.last().unwrap();
    let last_se = *std_errors.last().unwrap();
    Ok(ContinuityReport {
        distances,
        residuals,
        std_errors,
        tolerance,
        norm: norm_kind,
        passes: monotone && last < tolerance + 3.0 * last_se,
    })
}
