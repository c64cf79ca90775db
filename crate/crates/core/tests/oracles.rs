use crpred_core::bounds::{cr_bound_unbiased, g_general, g_simplified, msep_decompose, prediction_bound, qep};
use crpred_core::catalog::{self, ExpFamilySpec};
use crpred_core::l2diff::{fisher_information, score_mean};
use crpred_core::reconstruction::{
    gradient_condition_check, path_independence_check, reconstruct_a, ParameterPath,
};
use crpred_core::IntegrationSpec;

#[test]
fn closed_form_fisher_matches_the_pipeline_on_every_grid() {
    for e in [
        catalog::gaussian_location(4, 0.5).unwrap(),
        catalog::bernoulli(2).unwrap(),
        catalog::poisson(2).unwrap(),
        catalog::gaussian_mean(2).unwrap(),
    ] {
        let closed = e.closed_forms.fisher.as_ref().unwrap();
        for t in &e.theta_grid {
            let i = fisher_information(e.model.as_ref(), t, &e.default_integration).unwrap();
            let want = closed(t);
            assert!((&i.value - &want).amax() <= 1e-6 * want.amax(), "{} at {t:?}", e.id);
        }
    }
}

#[test]
fn score_has_mean_zero_in_deterministic_modes() {
    for e in [catalog::bernoulli(2).unwrap(), catalog::poisson(1).unwrap(), catalog::gaussian_location(1, 2.0).unwrap()] {
        for t in &e.theta_grid {
            let (m, _) = score_mean(e.model.as_ref(), t, &e.default_integration).unwrap();
            assert!(m.amax() < 1e-9, "{} at {t:?}: {m}", e.id);
        }
    }
}

#[test]
fn qep_is_never_below_the_bound_on_gaussian_grid() {
    let e = catalog::gaussian_location(1, 1.0).unwrap();
    let spec = IntegrationSpec::quadrature(200);
    for t in &e.theta_grid {
        for p in ["mean", "median", "shrunk_mean", "mean_plus_half"] {
            let r = prediction_bound(e.model.as_ref(), t, e.predictor(p).unwrap(), e.predictand("theta").unwrap(), &spec)
                .unwrap();
            assert!(r.gap_min_eigenvalue >= -1e-8, "{p} at {t:?}: {r:?}");
        }
    }
}

#[test]
fn general_and_simplified_forms_agree_for_unbiased_predictors() {
    let e = catalog::gaussian_location(1, 1.0).unwrap();
    let spec = IntegrationSpec::quadrature(200);
    let g = e.predictand("theta_times_mean").unwrap();
    let p = e.predictor("square_minus_variance").unwrap();
    for t in [0.5, 1.0, 2.0] {
        let a = g_general(e.model.as_ref(), &[t], p, g, &spec).unwrap();
        let b = g_simplified(e.model.as_ref(), &[t], g, &spec).unwrap();
        assert!((a.value[(0, 0)] - b.value[(0, 0)]).abs() < 1e-6, "{t}");
    }
}

#[test]
fn degenerate_ar1_bound_is_zero() {
    let e = catalog::ar1_prediction(20).unwrap();
    let spec = IntegrationSpec::monte_carlo(20_000, 4);
    let g = e.predictand("theta_times_last").unwrap();
    let s = g_simplified(e.model.as_ref(), &[0.5], g, &spec).unwrap();
    assert!(s.value[(0, 0)].abs() <= 3.0 * s.std_error[(0, 0)]);
    let q = qep(e.model.as_ref(), &[0.5], e.predictor("plugin").unwrap(), g, &spec).unwrap();
    assert!(q.value[(0, 0)] > 0.0);
}

#[test]
fn gaussian_msep_with_independent_future_draw() {
    let e = catalog::gaussian_location(5, 1.0).unwrap();
    let joint = e.joint.as_ref().unwrap();
    let spec = IntegrationSpec::monte_carlo(50_000, 12);
    let m = msep_decompose(
        joint.model.as_ref(),
        joint.x_dim,
        &[0.3],
        e.predictor("mean").unwrap(),
        &joint.targets["y"],
        e.predictand("future_observation").unwrap(),
        &spec,
    )
    .unwrap();
    assert!(m.consistent, "{m:?}");
    // Var(mean) + Var(Y) = 1/5 + 1.
    assert!((m.total.value[(0, 0)] - 1.2).abs() <= 3.0 * m.total.std_error[(0, 0)]);
}

#[test]
fn two_dimensional_paths_agree() {
    let e = catalog::gaussian_mean(2).unwrap();
    let spec = IntegrationSpec::quadrature(48);
    let g = e.predictand("theta").unwrap();
    let straight = ParameterPath::straight(&[0.0, 0.0], &[1.0, 0.5]).unwrap();
    let ell = ParameterPath::polyline(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.5]]).unwrap();
    let r = path_independence_check(e.model.as_ref(), &straight, &ell, g, None, &[vec![0.5, 0.25]], &spec).unwrap();
    assert!(r.delta_a <= 1e-5, "{r:?}");
    assert!(r.jacobian_condition_residual <= 1e-4, "{r:?}");
    let res = gradient_condition_check(
        e.model.as_ref(),
        &[0.0, 0.0],
        &[1.0, 0.5],
        g,
        None,
        &[vec![0.1, -0.3], vec![1.2, 0.4]],
        200,
        &spec,
    )
    .unwrap();
    assert!(res <= 1e-4, "{res}");
}

#[test]
fn builder_round_trip_on_normal_location() {
    let grid = [vec![0.25], vec![0.5], vec![1.0]];
    let e = catalog::exponential_family_builder(ExpFamilySpec::normal_location(), &grid, &IntegrationSpec::quadrature(200))
        .unwrap();
    let g = e.predictand("derived").unwrap();
    for t in &grid {
        let path = ParameterPath::straight(&[0.0], t).unwrap();
        let (a, _) = reconstruct_a(e.model.as_ref(), &path, g, &IntegrationSpec::quadrature(200)).unwrap();
        assert!((a[0] - t[0]).abs() < 1e-5, "{t:?}: {a}");
    }
}

#[test]
fn builder_round_trip_on_bernoulli_natural_parameter() {
    let grid = [vec![-1.0], vec![0.5], vec![2.0]];
    let e = catalog::exponential_family_builder(ExpFamilySpec::bernoulli_natural(), &grid, &IntegrationSpec::exact()).unwrap();
    // With g = θ = η the field is I(η)/1 = σ(η)(1 − σ(η)), so A(η) = σ(η) − σ(0).
    let g = e.predictand("theta").unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for t in &grid {
        let path = ParameterPath::straight(&[0.0], t).unwrap();
        let (a, _) = reconstruct_a(e.model.as_ref(), &path, g, &IntegrationSpec::exact()).unwrap();
        assert!((a[0] - (sig(t[0]) - 0.5)).abs() < 1e-6, "{t:?}: {a}");
    }
    let g = e.predictand("derived").unwrap();
    for t in &grid {
        let path = ParameterPath::straight(&[0.0], t).unwrap();
        let (a, _) = reconstruct_a(e.model.as_ref(), &path, g, &IntegrationSpec::exact()).unwrap();
        assert!((a[0] - t[0]).abs() < 1e-5, "{t:?}: {a}");
    }
}

#[test]
fn constant_family_bound_is_singular() {
    let e = catalog::lookup("exp_family_constant").unwrap();
    let r = cr_bound_unbiased(e.model.as_ref(), &[0.5], e.predictand("theta").unwrap(), &IntegrationSpec::quadrature(200));
    assert!(r.is_err());
}
