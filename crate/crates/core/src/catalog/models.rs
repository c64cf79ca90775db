//! Parametric families with closed-form densities and scores.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson as PoissonDist, StandardNormal};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::model::{AxisSupport, DominatedModel, MeasureKind, Observation, ParameterDomain};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// `n` iid draws from `N(θ, σ²)`.
#[derive(Debug, Clone)]
pub struct GaussianLocation {
    n: usize,
    sigma: f64,
    domain: ParameterDomain,
}

impl GaussianLocation {
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n == 0 || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("gaussian_location needs n >= 1 and sigma > 0"));
        }
        Ok(Self {
            n,
            sigma,
            domain: ParameterDomain::unbounded(1),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl DominatedModel for GaussianLocation {
    fn id(&self) -> String {
        format!("gaussian_location:n={},sigma={}", self.n, fmt_num(self.sigma))
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn measure(&self) -> MeasureKind {
        MeasureKind::Lebesgue { dim: self.n }
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let ss: f64 = x.iter().map(|xi| (xi - theta[0]).powi(2)).sum();
        -(self.n as f64) * (LN_SQRT_2PI + self.sigma.ln()) - 0.5 * ss / s2
    }

    fn axis_support(&self, theta: &[f64], _tail_mass: f64) -> Result<Vec<AxisSupport>> {
        Ok(vec![AxisSupport::real_line(theta[0], self.sigma); self.n])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Observation> {
        Ok((0..self.n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                theta[0] + self.sigma * z
            })
            .collect())
    }

    fn analytic_score(&self, x: &[f64], theta: &[f64]) -> Option<DVector<f64>> {
        let s: f64 = x.iter().map(|xi| xi - theta[0]).sum();
        Some(DVector::from_element(1, s / (self.sigma * self.sigma)))
    }

    fn iid_components(&self) -> Option<(Arc<dyn DominatedModel>, usize)> {
        (self.n > 1).then(|| (Arc::new(GaussianLocation::new(1, self.sigma).expect("valid")) as _, self.n))
    }
}

/// One draw from `N(θ, I_d)`, `θ ∈ ℝᵈ`.
#[derive(Debug, Clone)]
pub struct GaussianMean {
    domain: ParameterDomain,
}

impl GaussianMean {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > 4 {
            return Err(Error::invalid("gaussian_mean needs 1 <= dim <= 4"));
        }
        Ok(Self {
            domain: ParameterDomain::unbounded(dim),
        })
    }
}

impl DominatedModel for GaussianMean {
    fn id(&self) -> String {
        format!("gaussian_mean:dim={}", self.domain.dim())
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn measure(&self) -> MeasureKind {
        MeasureKind::Lebesgue { dim: self.domain.dim() }
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let ss: f64 = x.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum();
        -(x.len() as f64) * LN_SQRT_2PI - 0.5 * ss
    }

    fn axis_support(&self, theta: &[f64], _tail_mass: f64) -> Result<Vec<AxisSupport>> {
        Ok(theta.iter().map(|t| AxisSupport::real_line(*t, 1.0)).collect())
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Observation> {
        Ok(theta
            .iter()
            .map(|t| {
                let z: f64 = StandardNormal.sample(rng);
                t + z
            })
            .collect())
    }

    fn analytic_score(&self, x: &[f64], theta: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::from_iterator(theta.len(), x.iter().zip(theta).map(|(a, b)| a - b)))
    }
}

/// `n` iid Bernoulli(θ) draws, `θ ∈ (0, 1)`.
#[derive(Debug, Clone)]
pub struct Bernoulli {
    n: usize,
    domain: ParameterDomain,
}

impl Bernoulli {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 20 {
            return Err(Error::invalid("bernoulli needs 1 <= n <= 20"));
        }
        Ok(Self {
            n,
            domain: ParameterDomain::interval(0.0, 1.0),
        })
    }
}

impl DominatedModel for Bernoulli {
    fn id(&self) -> String {
        format!("bernoulli:n={}", self.n)
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn measure(&self) -> MeasureKind {
        MeasureKind::Counting { dim: self.n }
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let t = theta[0];
        x.iter()
            .map(|&xi| {
                if xi == 1.0 {
                    t.ln()
                } else if xi == 0.0 {
                    (-t).ln_1p()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    }

    fn axis_support(&self, _theta: &[f64], _tail_mass: f64) -> Result<Vec<AxisSupport>> {
        Ok(vec![AxisSupport::Discrete(vec![0.0, 1.0]); self.n])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Observation> {
        Ok((0..self.n)
            .map(|_| if rng.random::<f64>() < theta[0] { 1.0 } else { 0.0 })
            .collect())
    }

    fn analytic_score(&self, x: &[f64], theta: &[f64]) -> Option<DVector<f64>> {
        let t = theta[0];
        if x.iter().any(|&xi| xi != 0.0 && xi != 1.0) {
            return None;
        }
        let s: f64 = x.iter().map(|xi| xi - t).sum();
        Some(DVector::from_element(1, s / (t * (1.0 - t))))
    }

    fn iid_components(&self) -> Option<(Arc<dyn DominatedModel>, usize)> {
        (self.n > 1).then(|| (Arc::new(Bernoulli::new(1).expect("valid")) as _, self.n))
    }
}

/// `n` iid Poisson(θ) counts, `θ > 0`.
#[derive(Debug, Clone)]
pub struct Poisson {
    n: usize,
    domain: ParameterDomain,
}

impl Poisson {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::invalid("poisson needs 1 <= n <= 4"));
        }
        Ok(Self {
            n,
            domain: ParameterDomain::new(vec![0.0], vec![f64::INFINITY])?,
        })
    }

    fn ln_pmf(k: f64, theta: f64) -> f64 {
        if k < 0.0 || k.fract() != 0.0 {
            return f64::NEG_INFINITY;
        }
        k * theta.ln() - theta - ln_factorial(k as u64)
    }

    /// Smallest `K` with `P(X > K) ≤ tail` for one coordinate.
    fn truncation(theta: f64, tail: f64) -> usize {
        let mut cdf = 0.0;
        let mut k = 0usize;
        loop {
            cdf += Self::ln_pmf(k as f64, theta).exp();
            // Past the mode the remaining tail is bounded by a geometric series.
            let next = Self::ln_pmf((k + 1) as f64, theta).exp();
            let ratio = theta / (k + 2) as f64;
            let bound = if ratio < 1.0 { next / (1.0 - ratio) } else { f64::INFINITY };
            if (1.0 - cdf <= tail && k as f64 >= theta) || bound <= tail {
                return k;
            }
            k += 1;
        }
    }
}

impl DominatedModel for Poisson {
    fn id(&self) -> String {
        format!("poisson:n={}", self.n)
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn measure(&self) -> MeasureKind {
        MeasureKind::Counting { dim: self.n }
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        x.iter().map(|&k| Self::ln_pmf(k, theta[0])).sum()
    }

    fn axis_support(&self, theta: &[f64], tail_mass: f64) -> Result<Vec<AxisSupport>> {
        let k = Self::truncation(theta[0], tail_mass / self.n as f64);
        let atoms: Vec<f64> = (0..=k).map(|v| v as f64).collect();
        Ok(vec![AxisSupport::Discrete(atoms); self.n])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Observation> {
        let d = PoissonDist::new(theta[0]).map_err(|e| Error::Evaluation(e.to_string()))?;
        Ok((0..self.n).map(|_| d.sample(rng)).collect())
    }

    fn analytic_score(&self, x: &[f64], theta: &[f64]) -> Option<DVector<f64>> {
        let s: f64 = x.iter().map(|k| k / theta[0] - 1.0).sum();
        Some(DVector::from_element(1, s))
    }

    fn iid_components(&self) -> Option<(Arc<dyn DominatedModel>, usize)> {
        (self.n > 1).then(|| (Arc::new(Poisson::new(1).expect("valid")) as _, self.n))
    }
}

/// Stationary zero-mean Gaussian AR(1) path `X_t = θX_{t−1} + ε_t` of
/// length `len` with unit innovation variance, `|θ| < 1`.
#[derive(Debug, Clone)]
pub struct Ar1 {
    len: usize,
    domain: ParameterDomain,
}

impl Ar1 {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::invalid("ar1 needs a path of length >= 2"));
        }
        Ok(Self {
            len,
            domain: ParameterDomain::interval(-1.0, 1.0),
        })
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn stationary_variance(theta: f64) -> f64 {
        1.0 / (1.0 - theta * theta)
    }
}

impl DominatedModel for Ar1 {
    fn id(&self) -> String {
        format!("ar1:len={}", self.len)
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn measure(&self) -> MeasureKind {
        MeasureKind::Lebesgue { dim: self.len }
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let t = theta[0];
        let v = 1.0 - t * t;
        let mut out = -LN_SQRT_2PI + 0.5 * v.ln() - 0.5 * v * x[0] * x[0];
        for w in x.windows(2) {
            out -= LN_SQRT_2PI + 0.5 * (w[1] - t * w[0]).powi(2);
        }
        out
    }

    fn axis_support(&self, theta: &[f64], _tail_mass: f64) -> Result<Vec<AxisSupport>> {
        let sd = Self::stationary_variance(theta[0]).sqrt();
        Ok(vec![AxisSupport::real_line(0.0, sd); self.len])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Observation> {
        let t = theta[0];
        let mut out = Vec::with_capacity(self.len);
        let z: f64 = StandardNormal.sample(rng);
        out.push(z * Self::stationary_variance(t).sqrt());
        for i in 1..self.len {
            let e: f64 = StandardNormal.sample(rng);
            out.push(t * out[i - 1] + e);
        }
        Ok(out)
    }

    fn analytic_score(&self, x: &[f64], theta: &[f64]) -> Option<DVector<f64>> {
        let t = theta[0];
        let mut s = -t / (1.0 - t * t) + t * x[0] * x[0];
        for w in x.windows(2) {
            s += (w[1] - t * w[0]) * w[0];
        }
        Some(DVector::from_element(1, s))
    }
}

/// `n` iid Uniform(0, θ) draws, `θ > 0`. The support moves with θ, so the
/// family is not L²-differentiable.
#[derive(Debug, Clone)]
pub struct UniformScale {
    n: usize,
    domain: ParameterDomain,
}

impl UniformScale {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::invalid("uniform_scale needs 1 <= n <= 4"));
        }
        Ok(Self {
            n,
            domain: ParameterDomain::new(vec![0.0], vec![f64::INFINITY])?,
        })
    }
}

impl DominatedModel for UniformScale {
    fn id(&self) -> String {
        format!("uniform_scale:n={}", self.n)
    }

    fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn measure(&self) -> MeasureKind {
        MeasureKind::Lebesgue { dim: self.n }
    }

    fn log_density_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let t = theta[0];
        if x.iter().all(|&xi| (0.0..=t).contains(&xi)) {
            -(self.n as f64) * t.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn axis_support(&self, theta: &[f64], _tail_mass: f64) -> Result<Vec<AxisSupport>> {
        let t = theta[0];
        Ok(vec![
            AxisSupport::Continuous {
                loc: 0.5 * t,
                scale: 0.5 * t,
                lower: 0.0,
                upper: t,
            };
            self.n
        ])
    }

    fn sample_one(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Observation> {
        Ok((0..self.n).map(|_| theta[0] * rng.random::<f64>()).collect())
    }

    fn analytic_score(&self, x: &[f64], theta: &[f64]) -> Option<DVector<f64>> {
        let t = theta[0];
        x.iter()
            .all(|&xi| (0.0..=t).contains(&xi))
            .then(|| DVector::from_element(1, -(self.n as f64) / t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::expectation::{expect_scalar, IntegrationSpec};

    fn ln_std_normal(z: f64) -> f64 {
        -0.5 * z * z - 0.5 * (2.0 * PI).ln()
    }

    #[test]
    fn ar1_density_matches_innovation_form() {
        let m = Ar1::new(3).unwrap();
        let x = [0.4, -0.2, 1.1];
        let t = 0.5f64;
        let v = Ar1::stationary_variance(t);
        let want = ln_std_normal(x[0] / v.sqrt()) - 0.5 * v.ln()
            + ln_std_normal(x[1] - t * x[0])
            + ln_std_normal(x[2] - t * x[1]);
        assert!((m.log_density_unchecked(&x, &[t]) - want).abs() < 1e-14);
    }

    #[test]
    fn ar1_stationary_variance() {
        let m = Ar1::new(20).unwrap();
        assert!((Ar1::stationary_variance(0.5) - 4.0 / 3.0).abs() < 1e-15);
        let (v, se) = expect_scalar(&m, &[0.5], |x| Ok(x[19] * x[19]), &IntegrationSpec::monte_carlo(100_000, 8)).unwrap();
        assert!((v - 4.0 / 3.0).abs() <= 3.0 * se, "{v} ± {se}");
    }

    #[test]
    fn ar1_score_matches_differences() {
        let m = Ar1::new(4).unwrap();
        let x = [0.3, 0.9, -0.4, 0.2];
        let a = m.analytic_score(&x, &[0.3]).unwrap()[0];
        let n = crate::l2diff::numeric_score(&m, &[0.3], &x, None).unwrap()[0];
        assert!((a - n).abs() < 1e-8);
    }

    #[test]
    fn uniform_support_and_score() {
        let m = UniformScale::new(2).unwrap();
        assert_eq!(m.log_density_unchecked(&[0.5, 1.5], &[1.0]), f64::NEG_INFINITY);
        assert!((m.log_density_unchecked(&[0.5, 0.5], &[2.0]) + 2.0 * 2f64.ln()).abs() < 1e-15);
        let (mass, _) = expect_scalar(&m, &[2.0], |_| Ok(1.0), &IntegrationSpec::quadrature(32)).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_truncation_is_tight() {
        let k = Poisson::truncation(2.0, 1e-12);
        let tail: f64 = 1.0 - (0..=k).map(|j| Poisson::ln_pmf(j as f64, 2.0).exp()).sum::<f64>();
        assert!(tail <= 1e-12 + 1e-15 && k < 30, "k={k}, tail={tail}");
    }

    #[test]
    fn constructors_reject_bad_arguments() {
        assert!(GaussianLocation::new(0, 1.0).is_err());
        assert!(GaussianLocation::new(1, 0.0).is_err());
        assert!(Bernoulli::new(0).is_err());
        assert!(Ar1::new(1).is_err());
        assert!(GaussianMean::new(0).is_err());
    }
}
