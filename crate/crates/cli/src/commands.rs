//! Per-command work on one grid point.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crpred_core::bounds::{
    biased_prediction_bound_with, check_assumptions, cr_bound_unbiased_with, efficiency_residual_with,
    msep_decompose, prediction_bound_with, qep, BoundReport, Predictand, Predictor,
};
use crpred_core::catalog::CatalogEntry;
use crpred_core::covariance::{covariance_bound, DiscreteJoint};
use crpred_core::l2diff::{
    check_continuous_l2, check_l2_diff, check_lemma_106, fisher_information, score_mean,
};
use crpred_core::linalg::min_eigenvalue;
use crpred_core::model::substream;
use crpred_core::reconstruction::{
    gradient_condition_check, path_independence_check, reconstruct, validate_density_ratio, ParameterPath,
    DEFAULT_STEPS,
};
use crpred_core::{Error, IntegrationSpec, Result};

use crate::config::RunConfig;
use crate::report::{Record, Verdict};

/// Floor under `3·std_error` for deterministic comparisons.
const ROUNDOFF: f64 = 1e-9;
const DEFAULT_CONTINUITY_TOL: f64 = 1e-3;
const DEFAULT_JOINTS: usize = 200;
const LEMMA1_TOL: f64 = 1e-10;
const RECON_TOL: f64 = 1e-6;
const PATH_TOL: f64 = 1e-5;
const GRADIENT_TOL: f64 = 1e-4;

/// Everything a grid point needs.
pub struct Context<'a> {
    pub entry: &'a CatalogEntry,
    pub spec: &'a IntegrationSpec,
    /// Integration for the Fisher information in the bound commands.
    pub fisher_spec: &'a IntegrationSpec,
    pub config: &'a RunConfig,
}

impl Context<'_> {
    fn model(&self) -> &dyn crpred_core::DominatedModel {
        self.entry.model.as_ref()
    }

    fn predictand(&self) -> Result<&Predictand> {
        self.entry.predictand(self.config.predictand.as_deref().unwrap_or("theta"))
    }

    /// Configured predictor, else the entry's efficient one.
    fn predictor(&self) -> Result<&Predictor> {
        if let Some(name) = &self.config.predictor {
            return self.entry.predictor(name);
        }
        if self.entry.predictors.contains_key("efficient") {
            return self.entry.predictor("efficient");
        }
        match &self.entry.closed_forms.efficient_predictor {
            Some(name) => self.entry.predictor(name),
            None => Err(Error::invalid(format!("{} needs an explicit predictor", self.entry.id))),
        }
    }

    fn axis(&self, dim: usize) -> Result<usize> {
        let axis = self.config.options.axis.unwrap_or(0);
        if axis >= dim {
            return Err(Error::invalid(format!("axis {axis} out of range for dimension {dim}")));
        }
        Ok(axis)
    }

    /// Step vectors along the configured axis.
    fn steps(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        let axis = self.axis(dim)?;
        let mags = match &self.config.options.u_grid {
            Some(u) => u.clone(),
            None => (3..=8).map(|j| 2f64.powi(-j)).collect(),
        };
        Ok(mags
            .into_iter()
            .map(|m| {
                let mut u = vec![0.0; dim];
                u[axis] = m;
                u
            })
            .collect())
    }
}

fn tol3(se: f64, scale: f64) -> f64 {
    (3.0 * se).max(ROUNDOFF * scale.max(1.0))
}

pub fn fisher(cx: &Context, theta: &[f64]) -> Result<Record> {
    let i = fisher_information(cx.model(), theta, cx.spec)?;
    let mut r = Record::default();
    r.mat("fisher", &i.value)
        .mat("std_error", &i.std_error)
        .put("condition_number", i.condition_number())
        .put("mode_used", i.mode_used);
    let scale = i.value.amax();
    r.verdict(Verdict::at_least_zero("psd", min_eigenvalue(&i.value), tol3(i.std_error.amax(), scale)));
    if let Some(f) = &cx.entry.closed_forms.fisher {
        let c = f(theta);
        let diff = (&i.value - &c).amax();
        r.mat("closed_form", &c);
        let tol = (1e-6 * c.amax().max(1.0)).max(3.0 * i.std_error.amax());
        r.verdict(Verdict::within("matches_closed_form", diff, tol));
    }
    Ok(r)
}

pub fn score(cx: &Context, theta: &[f64]) -> Result<Record> {
    let (m, se) = score_mean(cx.model(), theta, cx.spec)?;
    let mut r = Record::default();
    r.mat("mean", &DMatrix::from_column_slice(m.len(), 1, m.as_slice()))
        .mat("std_error", &DMatrix::from_column_slice(se.len(), 1, se.as_slice()));
    r.verdict(Verdict::within("mean_zero", m.amax(), tol3(se.amax(), 1.0)));
    Ok(r)
}

pub fn l2diag(cx: &Context, theta: &[f64]) -> Result<Record> {
    let diag = check_l2_diff(cx.model(), theta, &cx.steps(theta.len())?, cx.spec)?;
    let mut r = Record::default();
    r.verdict(Verdict::new("remainder_exponent_above_one", diag.passes, diag.fitted_exponent, 1.0).assumption());
    r.put("diagnostic", diag);
    Ok(r)
}

pub fn lemma106(cx: &Context, theta: &[f64]) -> Result<Record> {
    let rep = check_lemma_106(cx.model(), theta, &cx.steps(theta.len())?, cx.spec)?;
    let mut r = Record::default();
    r.verdict(Verdict::flag("in_probability_condition", rep.cond1_pass).assumption());
    r.verdict(Verdict::flag("hellinger_second_order_condition", rep.cond2_pass).assumption());
    r.put("conditions", rep);
    Ok(r)
}

pub fn continuity(cx: &Context, theta: &[f64]) -> Result<Record> {
    let seq: Vec<Vec<f64>> = cx
        .steps(theta.len())?
        .into_iter()
        .map(|u| theta.iter().zip(&u).map(|(a, b)| a + b).collect())
        .collect();
    let tol = cx.config.options.continuity_tolerance.unwrap_or(DEFAULT_CONTINUITY_TOL);
    let norm = cx.config.options.continuity_norm.unwrap_or_default();
    let rep = check_continuous_l2(cx.model(), theta, &seq, cx.spec, norm, tol)?;
    let mut r = Record::default();
    let last = rep.residuals.last().copied().unwrap_or(0.0);
    r.verdict(Verdict::new("score_continuous_in_l2", rep.passes, last, tol).assumption());
    r.put("continuity", rep);
    Ok(r)
}

fn bound_record(rep: &BoundReport) -> Record {
    let mut r = Record::default();
    r.mat("qep", &rep.qep.value)
        .mat("qep_std_error", &rep.qep.std_error)
        .mat("bound", &rep.bound)
        .mat("gap", &rep.gap)
        .put("gap_min_eigenvalue", rep.gap_min_eigenvalue)
        .put("equality_residual", rep.equality_residual)
        .mat("g_used", &rep.g_used.value)
        .mat("g_used_std_error", &rep.g_used.std_error)
        .mat("fisher", &rep.i_used)
        .put("form", rep.form)
        .mat("mean_error", &rep.mean_error.value)
        .put("degenerate", rep.degenerate);
    if let Some(b) = &rep.bias {
        r.mat("bias", &DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
    }
    let eq = rep.equality_residual;
    r.put("attains_bound", eq.value <= tol3(eq.std_error, 1.0));
    let scale = rep.qep.value.amax();
    r.verdict(Verdict::at_least_zero(
        "bound_below_qep",
        rep.gap_min_eigenvalue,
        tol3(rep.qep.max_std_error() + rep.g_used.max_std_error(), scale),
    ));
    r
}

pub fn bound(cx: &Context, theta: &[f64]) -> Result<Record> {
    let rep = prediction_bound_with(cx.model(), theta, cx.predictor()?, cx.predictand()?, cx.spec, cx.fisher_spec)?;
    Ok(bound_record(&rep))
}

pub fn biased_bound(cx: &Context, theta: &[f64]) -> Result<Record> {
    let p = cx.predictor()?;
    let rb = cx.entry.biased_predictand(&cx.predictand()?.name, &p.name)?;
    let rep = biased_prediction_bound_with(cx.model(), theta, p, &rb, cx.spec, cx.fisher_spec)?;
    Ok(bound_record(&rep))
}

pub fn qep_cmd(cx: &Context, theta: &[f64]) -> Result<Record> {
    let q = qep(cx.model(), theta, cx.predictor()?, cx.predictand()?, cx.spec)?;
    let mut r = Record::default();
    r.mat("qep", &q.value).mat("std_error", &q.std_error);
    r.verdict(Verdict::at_least_zero("psd", min_eigenvalue(&q.value), tol3(q.max_std_error(), q.value.amax())));
    Ok(r)
}

pub fn efficiency(cx: &Context, theta: &[f64]) -> Result<Record> {
    let (p, g) = (cx.predictor()?, cx.predictand()?);
    let res = efficiency_residual_with(cx.model(), theta, p, g, cx.spec, cx.fisher_spec)?;
    let q = qep(cx.model(), theta, p, g, cx.spec)?;
    let b = cr_bound_unbiased_with(cx.model(), theta, g, cx.spec, cx.fisher_spec)?;
    let mut r = Record::default();
    r.put("efficiency_residual", res)
        .mat("qep", &q.value)
        .mat("qep_std_error", &q.std_error)
        .mat("bound", &b.bound);
    r.verdict(Verdict::within("efficient", res.value, tol3(res.std_error, 1.0)));
    Ok(r)
}

pub fn msep(cx: &Context, theta: &[f64]) -> Result<Record> {
    let joint = cx
        .entry
        .joint
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("{} has no joint model for msep", cx.entry.id)))?;
    let target_name = cx.config.options.target.as_deref().unwrap_or("y");
    let target = joint
        .targets
        .get(target_name)
        .ok_or_else(|| Error::invalid(format!("joint model has no target {target_name:?}")))?;
    let r_name = cx
        .config
        .predictand
        .as_deref()
        .ok_or_else(|| Error::invalid("msep needs the conditional predictand r as predictand"))?;
    let m = msep_decompose(
        joint.model.as_ref(),
        joint.x_dim,
        theta,
        cx.predictor()?,
        target,
        cx.entry.predictand(r_name)?,
        cx.spec,
    )?;
    let mut r = Record::default();
    r.mat("total", &m.total.value)
        .mat("total_std_error", &m.total.std_error)
        .mat("qep_term", &m.qep_term.value)
        .mat("qep_term_std_error", &m.qep_term.std_error)
        .mat("incompressible", &m.incompressible.value)
        .mat("incompressible_std_error", &m.incompressible.std_error)
        .mat("cross_term", &m.cross_term.value)
        .mat("combined_std_error", &m.combined_std_error);
    r.verdict(Verdict::flag("total_equals_qep_plus_incompressible", m.consistent));
    if let Some(c) = cx.entry.closed_forms.scalars.get("incompressible") {
        let diff = m.incompressible.value[(0, 0)] - c;
        r.verdict(Verdict::within(
            "incompressible_matches_closed_form",
            diff,
            tol3(m.incompressible.std_error[(0, 0)], c.abs()),
        ));
    }
    Ok(r)
}

fn path_between(from: &[f64], corners: Option<&Vec<Vec<f64>>>, to: &[f64], steps: usize) -> Result<ParameterPath> {
    let path = match corners {
        Some(c) if !c.is_empty() => {
            let mut pts = vec![from.to_vec()];
            pts.extend(c.iter().cloned());
            pts.push(to.to_vec());
            ParameterPath::polyline(&pts)?
        }
        _ => ParameterPath::straight(from, to)?,
    };
    Ok(path.with_steps(steps))
}

pub fn reconstruct_cmd(cx: &Context, theta: &[f64]) -> Result<Record> {
    let opts = &cx.config.options;
    let theta0 = opts.theta0.clone().unwrap_or_else(|| vec![0.0; theta.len()]);
    if theta0.len() != theta.len() {
        return Err(Error::invalid("theta0 and grid points differ in dimension"));
    }
    let (p, g) = (cx.predictor()?, cx.predictand()?);
    let steps = opts.n_steps.unwrap_or(DEFAULT_STEPS);
    let path = path_between(&theta0, opts.waypoints.as_ref(), theta, steps)?;
    let mut r = Record::default();
    r.put("theta0", &theta0);
    if theta0 == theta {
        r.mat("a", &DMatrix::zeros(g.k, 1)).put("error_estimate", 0.0);
        return Ok(r);
    }
    let rec = reconstruct(cx.model(), &path, g, Some(p), cx.spec)?;
    let test_points = match &opts.test_points {
        Some(t) => t.clone(),
        None => cx.model().sample(&theta0, 5, cx.config.seed)?.observations,
    };
    let ratio = validate_density_ratio(cx.model(), &path, p, g, &test_points, cx.spec)?;
    let a_scale = rec.a.amax().max(1.0);
    r.mat("a", &DMatrix::from_column_slice(rec.a.len(), 1, rec.a.as_slice()))
        .put("error_estimate", rec.error_estimate)
        .put("n_steps", rec.n_steps)
        .put("test_points", &test_points)
        .put("b", &ratio.b_values)
        .put("b_spread", ratio.b_spread)
        .put("normalization", ratio.normalization)
        .put("normalization_std_error", ratio.normalization_std_error)
        .put("pointwise_max_abs_log_error", ratio.pointwise_max_abs_log_error);
    r.verdict(Verdict::within(
        "normalization_is_one",
        ratio.normalization - 1.0,
        (1e-3f64).max(3.0 * ratio.normalization_std_error),
    ));
    r.verdict(Verdict::within(
        "log_ratio_matches",
        ratio.pointwise_max_abs_log_error,
        RECON_TOL * a_scale,
    ));
    let cf = &cx.entry.closed_forms;
    let closed_applies = cf.efficient_predictor.as_deref() == Some(p.name.as_str()) && g.name == "theta";
    if closed_applies {
        if let Some(fa) = &cf.reconstruction_a {
            let want: DVector<f64> = fa(&theta0, theta);
            r.mat("a_closed_form", &DMatrix::from_column_slice(want.len(), 1, want.as_slice()));
            r.verdict(Verdict::within("a_matches_closed_form", (&rec.a - &want).amax(), RECON_TOL * a_scale));
        }
        if let Some(fb) = &cf.reconstruction_b {
            let want = fb(&theta0, theta);
            let worst = ratio.b_values.iter().fold(0.0f64, |m, b| m.max((b - want).abs()));
            r.put("b_closed_form", want);
            r.verdict(Verdict::within("b_matches_closed_form", worst, RECON_TOL * want.abs().max(1.0)));
        }
    }
    if let Some(corners) = &opts.compare_waypoints {
        let other = path_between(&theta0, Some(corners), theta, steps)?;
        let pi = path_independence_check(cx.model(), &path, &other, g, Some(p), &[theta.to_vec()], cx.spec)?;
        let grad = gradient_condition_check(cx.model(), &theta0, theta, g, Some(p), &test_points, steps, cx.spec)?;
        r.verdict(Verdict::within("paths_agree", pi.delta_a, PATH_TOL.max(pi.quadrature_error)).assumption());
        r.put("path_independence", pi).put("gradient_condition_residual", grad);
        r.verdict(Verdict::within("gradient_condition", grad, GRADIENT_TOL).assumption());
    }
    Ok(r)
}

/// Star-shaped grid `θ0 ± radius·j/m` along each axis, θ0 included.
fn neighborhood(theta0: &[f64], radius: f64, m: usize) -> Vec<DVector<f64>> {
    let mut pts = vec![DVector::from_column_slice(theta0)];
    for axis in 0..theta0.len() {
        for j in 1..=m {
            for sign in [-1.0, 1.0] {
                let mut t = theta0.to_vec();
                t[axis] += sign * radius * j as f64 / m as f64;
                pts.push(DVector::from_vec(t));
            }
        }
    }
    pts
}

pub fn assumptions(cx: &Context, theta: &[f64]) -> Result<Record> {
    let radius = cx.config.options.radius.unwrap_or(0.1);
    let m = cx.config.options.neighborhood_count.unwrap_or(1);
    if !(radius > 0.0) || m == 0 {
        return Err(Error::invalid("radius must be positive and neighborhood_count at least 1"));
    }
    let grid = neighborhood(theta, radius, m);
    let rep = check_assumptions(cx.model(), theta, &grid, cx.predictor()?, cx.predictand()?, cx.spec)?;
    let mut r = Record::default();
    for item in &rep.items {
        r.verdict(Verdict::new(&item.name, item.passes, item.value, 0.0).assumption());
    }
    r.put("assumptions", rep);
    Ok(r)
}

/// Random finite joint laws under the run seed; one record per law.
pub fn lemma1(config: &RunConfig) -> Result<Vec<Record>> {
    let o = &config.options;
    let (k, d) = (o.k.unwrap_or(2), o.d.unwrap_or(2));
    let count = o.joints.unwrap_or(DEFAULT_JOINTS);
    if k == 0 || d == 0 || count == 0 {
        return Err(Error::invalid("lemma1 needs positive k, d and joints"));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i as u64);
            let joint = DiscreteJoint::random(&mut rng, k, d, d + 1 + i % 5, 1e6);
            let rep = covariance_bound(&joint)?;
            let scale = rep.lhs.amax().max(1.0);
            let trace = rep.residual.trace();
            let mut r = Record::default();
            r.put("support", joint.len())
                .mat("lhs", &rep.lhs)
                .mat("rhs", &rep.rhs)
                .put("min_eigenvalue", rep.min_eigenvalue)
                .put("equality_residual", rep.equality_residual)
                .put("residual_trace", trace)
                .put("condition_number", rep.condition_number);
            r.verdict(Verdict::at_least_zero("residual_psd", rep.min_eigenvalue, LEMMA1_TOL * scale));
            r.verdict(Verdict::within(
                "equality_residual_is_trace",
                rep.equality_residual - trace,
                LEMMA1_TOL * scale,
            ));
            Ok(r)
        })
        .collect()
}
