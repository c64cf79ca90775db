use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crpred_core::bounds::prediction_bound;
use crpred_core::catalog::{self, Bernoulli, GaussianLocation, GaussianMean, Poisson};
use crpred_core::covariance::{covariance_bound, project_onto_scores, DiscreteJoint};
use crpred_core::expectation::expect;
use crpred_core::l2diff::fisher_information;
use crpred_core::linalg::min_eigenvalue;
use crpred_core::{DominatedModel, IntegrationSpec};

fn joint(seed: u64, k: usize, d: usize, extra: usize) -> DiscreteJoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DiscreteJoint::random(&mut rng, k, d, d + extra, 1e6)
}

fn inner(j: &DiscreteJoint, a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    j.expectation(&prod)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_residual_is_psd(seed in any::<u64>(), k in 1usize..=3, d in 1usize..=3, extra in 0usize..5) {
        let r = covariance_bound(&joint(seed, k, d, extra)).unwrap();
        let scale = r.lhs.amax().max(1.0);
        prop_assert!(r.min_eigenvalue >= -1e-10 * scale);
        prop_assert!((r.equality_residual - r.residual.trace()).abs() <= 1e-10 * scale);
    }

    #[test]
    fn projection_is_an_orthogonal_projector(seed in any::<u64>(), d in 1usize..=3, extra in 0usize..5) {
        let j = joint(seed, 1, d, extra);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let u: Vec<f64> = (0..j.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..j.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let pu = project_onto_scores(&j, &u).unwrap();
        let ppu = project_onto_scores(&j, &pu).unwrap();
        let pv = project_onto_scores(&j, &v).unwrap();
        for (a, b) in pu.iter().zip(&ppu) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
        prop_assert!((inner(&j, &pu, &v) - inner(&j, &u, &pv)).abs() <= 1e-10 * (1.0 + inner(&j, &u, &u)));
        prop_assert!(inner(&j, &pu, &pu) <= inner(&j, &u, &u) + 1e-10);
    }

    #[test]
    fn likelihood_ratio_is_reciprocal(t0 in 0.05f64..0.95, t1 in 0.05f64..0.95, x in 0usize..2, z in -3.0f64..3.0) {
        let b: &dyn DominatedModel = &Bernoulli::new(1).unwrap();
        let x = [x as f64];
        let fwd = b.log_likelihood_ratio(&[t0], &[t1], &x).unwrap();
        let back = b.log_likelihood_ratio(&[t1], &[t0], &x).unwrap();
        prop_assert!((fwd + back).abs() < 1e-12);

        let g: &dyn DominatedModel = &GaussianLocation::new(2, 1.5).unwrap();
        let x = [z, 0.5 * z];
        let fwd = g.log_likelihood_ratio(&[t0], &[t1], &x).unwrap();
        let back = g.log_likelihood_ratio(&[t1], &[t0], &x).unwrap();
        prop_assert!((fwd + back).abs() < 1e-12);

        let p: &dyn DominatedModel = &Poisson::new(1).unwrap();
        let k = [(z.abs() * 2.0).floor()];
        let fwd = p.log_likelihood_ratio(&[t0 * 4.0], &[t1 * 4.0], &k).unwrap();
        let back = p.log_likelihood_ratio(&[t1 * 4.0], &[t0 * 4.0], &k).unwrap();
        prop_assert!((fwd + back).abs() < 1e-12);
    }

    #[test]
    fn fisher_is_symmetric_psd(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let m = GaussianMean::new(2).unwrap();
        let i = fisher_information(&m, &[a, b], &IntegrationSpec::quadrature(32)).unwrap();
        prop_assert_eq!(i.value.clone(), i.value.transpose());
        prop_assert!(min_eigenvalue(&i.value) >= -1e-12);
        prop_assert!((&i.value - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn expectation_is_linear(t in 0.05f64..0.95, ca in -2.0f64..2.0, cb in -2.0f64..2.0) {
        let m = Bernoulli::new(3).unwrap();
        let spec = IntegrationSpec::exact();
        let h1 = |x: &[f64]| Ok(DMatrix::from_element(1, 1, x[0] * x[1]));
        let h2 = |x: &[f64]| Ok(DMatrix::from_element(1, 1, x[2] - x[0]));
        let both = |x: &[f64]| Ok(DMatrix::from_element(1, 1, ca * x[0] * x[1] + cb * (x[2] - x[0])));
        let e1 = expect(&m, &[t], &h1, &spec).unwrap().scalar();
        let e2 = expect(&m, &[t], &h2, &spec).unwrap().scalar();
        let e = expect(&m, &[t], &both, &spec).unwrap().scalar();
        prop_assert!((e - ca * e1 - cb * e2).abs() < 1e-12);
    }

    #[test]
    fn matrix_cr_inequality_on_bernoulli(t in 0.1f64..0.9) {
        let e = catalog::bernoulli(3).unwrap();
        for p in ["mean", "median", "shrunk_mean", "mean_plus_half", "zero"] {
            for g in ["theta", "theta_times_mean"] {
                let r = prediction_bound(
                    e.model.as_ref(), &[t], e.predictor(p).unwrap(), e.predictand(g).unwrap(), &IntegrationSpec::exact(),
                ).unwrap();
                prop_assert!(r.gap_min_eigenvalue >= -1e-8, "{p}/{g} at {t}: {}", r.gap_min_eigenvalue);
                prop_assert!(r.equality_residual.value >= 0.0);
            }
        }
    }
}
