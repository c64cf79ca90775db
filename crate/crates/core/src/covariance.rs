//! Covariance matrix inequality `E T^{×2} ≥ E(TS')(E S^{×2})^{-1}E(ST')` on
//! finitely supported joints, and the projection `P_S` onto the span of the
//! components of `S`.
//!
//! Everything here is computed by direct enumeration, so it doubles as the
//! brute-force oracle for the bound modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_number_sym, inverse_spd, min_eigenvalue, symmetrize};

/// Finitely supported law of a pair `(T, S)` with `T ∈ ℝᵏ`, `S ∈ ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    t: Vec<DVector<f64>>,
    s: Vec<DVector<f64>>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(t: Vec<DVector<f64>>, s: Vec<DVector<f64>>, probs: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != s.len() || t.len() != probs.len() {
            return Err(Error::invalid("support lists and probabilities must have equal nonzero length"));
        }
        let (k, d) = (t[0].len(), s[0].len());
        if k == 0 || d == 0 || t.iter().any(|v| v.len() != k) || s.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("support vectors must share nonzero dimensions"));
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::invalid("probabilities must be strictly positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { t, s, probs })
    }

    /// Build from rows of `(t, s)` slices.
    pub fn from_rows(rows: &[(&[f64], &[f64])], probs: &[f64]) -> Result<Self> {
        Self::new(
            rows.iter().map(|(t, _)| DVector::from_column_slice(t)).collect(),
            rows.iter().map(|(_, s)| DVector::from_column_slice(s)).collect(),
            probs.to_vec(),
        )
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn k(&self) -> usize {
        self.t[0].len()
    }

    pub fn d(&self) -> usize {
        self.s[0].len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn t(&self) -> &[DVector<f64>] {
        &self.t
    }

    pub fn s(&self) -> &[DVector<f64>] {
        &self.s
    }

    /// `E[a(ω) b(ω)']` over the support.
    fn cross(&self, a: &[DVector<f64>], b: &[DVector<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(a[0].len(), b[0].len());
        for ((x, y), p) in a.iter().zip(b).zip(&self.probs) {
            m += x * y.transpose() * *p;
        }
        m
    }

    pub fn gram_s(&self) -> DMatrix<f64> {
        symmetrize(&self.cross(&self.s, &self.s))
    }

    pub fn condition_number(&self) -> f64 {
        condition_number_sym(&self.gram_s())
    }

    fn gram_s_inverse(&self) -> Result<DMatrix<f64>> {
        inverse_spd(&self.gram_s(), "E S S'")
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    /// Random joint for property tests: support points uniform in `[-2, 2]`,
    /// probabilities from a flat Dirichlet; redrawn while `E S S'` has
    /// condition number at or above `max_condition`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        k: usize,
        d: usize,
        support: usize,
        max_condition: f64,
    ) -> Self {
        assert!(support >= d, "need at least d support points for an invertible E S S'");
        loop {
            let mut draw = |dim: usize| DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
            let t: Vec<_> = (0..support).map(|_| draw(k)).collect();
            let s: Vec<_> = (0..support).map(|_| draw(d)).collect();
            let raw: Vec<f64> = (0..support).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let Ok(joint) = Self::new(t, s, probs) else {
                continue;
            };
            if joint.condition_number() < max_condition {
                return joint;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    /// `E T T'`.
    pub lhs: DMatrix<f64>,
    /// `E(TS')(E S S')^{-1}E(ST')`.
    pub rhs: DMatrix<f64>,
    pub residual: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// `E‖Z‖²` with `Z = T − E(TS')(E S S')^{-1}S`.
    pub equality_residual: f64,
    pub condition_number: f64,
}

pub fn covariance_bound(joint: &DiscreteJoint) -> Result<CovarianceReport> {
    let gram_inv = joint.gram_s_inverse()?;
    let lhs = symmetrize(&joint.cross(&joint.t, &joint.t));
    let ts = joint.cross(&joint.t, &joint.s);
    let rhs = symmetrize(&(&ts * &gram_inv * ts.transpose()));
    let residual = &lhs - &rhs;
    let coef = &ts * &gram_inv;
    let equality_residual = joint
        .t
        .iter()
        .zip(&joint.s)
        .zip(&joint.probs)
        .map(|((t, s), p)| (t - &coef * s).norm_squared() * p)
        .sum();
    Ok(CovarianceReport {
        min_eigenvalue: min_eigenvalue(&residual),
        lhs,
        rhs,
        residual,
        equality_residual,
        condition_number: joint.condition_number(),
    })
}

/// Outcome-indexed values of `P_S(U) = E(US')(E S S')^{-1} S`.
pub fn project_onto_scores(joint: &DiscreteJoint, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != joint.len() {
        return Err(Error::invalid("u must have one value per support point"));
    }
    let gram_inv = joint.gram_s_inverse()?;
    let mut us = DVector::zeros(joint.d());
    for ((ui, s), p) in u.iter().zip(&joint.s).zip(&joint.probs) {
        us += s * (ui * p);
    }
    let coef = gram_inv * us;
    Ok(joint.s.iter().map(|s| coef.dot(s)).collect())
}

/// Equality case of the inequality: `T` lies in the span of `S` almost
/// surely, judged by `E‖Z‖² ≤ tol`.
pub fn equality_condition_holds(joint: &DiscreteJoint, tol: f64) -> Result<bool> {
    Ok(covariance_bound(joint)?.equality_residual <= tol)
}
