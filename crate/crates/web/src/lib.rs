//! Browser bindings. Each export takes plain numbers and returns a JSON string
//! for the page script in `www/` to draw.

use lvggm::experiments::{
    collapse_band, effrank_trends, fit_loglog_slope, run_effrank_study, run_error_scaling_study,
    EffRankStudyConfig, ErrorScalingConfig,
};
use lvggm::theory::{select_regularization, Regime, ScheduleConstants};
use lvggm::{
    assemble_joint, chain_precision, energy_ratio, glasso, lvggm_admm, marginalize, sample,
    sample_covariance, Matrix, SolverConfig,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps the page responsive: the solver is dense and single-threaded here.
const MAX_P: usize = 60;

#[derive(Serialize)]
struct Heatmap {
    rows: usize,
    cols: usize,
    /// Row-major.
    values: Vec<f64>,
}

impl From<&Matrix> for Heatmap {
    fn from(m: &Matrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            values: m.transpose().as_slice().to_vec(),
        }
    }
}

#[derive(Serialize)]
struct EffRankPoint {
    ratio: f64,
    mean: f64,
    cells: usize,
}

#[derive(Serialize)]
struct EffRankSweep {
    p: usize,
    r: usize,
    points: Vec<EffRankPoint>,
    /// Every attained `(ratio, r_eff)` cell.
    scatter: Vec<(f64, f64)>,
    spearman: Option<f64>,
    max_r_eff: f64,
    unattained: usize,
}

fn check_p(p: usize) -> Result<(), String> {
    if !(2..=MAX_P).contains(&p) {
        return Err(format!("p must lie in [2, {MAX_P}], got {p}"));
    }
    Ok(())
}

pub fn effrank_sweep_json(p: usize, r: usize, reps: usize, seed: u64) -> Result<String, String> {
    check_p(p)?;
    let cfg = EffRankStudyConfig {
        p_values: vec![p],
        r_latent: r,
        reps_per_cell: reps,
        base_seed: seed,
        ..EffRankStudyConfig::default()
    };
    let recs = run_effrank_study(&cfg).map_err(|e| e.to_string())?;
    let trend = effrank_trends(&recs).pop().ok_or("no records")?;
    let out = EffRankSweep {
        p,
        r,
        points: trend
            .means
            .iter()
            .map(|&(ratio, mean, cells)| EffRankPoint { ratio, mean, cells })
            .collect(),
        scatter: recs.iter().filter_map(|r| Some((r.ratio?, r.metric?))).collect(),
        spearman: trend.spearman,
        max_r_eff: trend.max_r_eff,
        unattained: trend.unattained,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Comparison {
    p: usize,
    r: usize,
    n: usize,
    energy_ratio: f64,
    lambda: f64,
    mu: f64,
    lvggm_error: f64,
    glasso_error: f64,
    lvggm_iterations: usize,
    glasso_iterations: usize,
    lvggm_converged: bool,
    glasso_converged: bool,
    rank_l_hat: usize,
    theta_star: Heatmap,
    theta_lvggm: Heatmap,
    theta_glasso: Heatmap,
    l_hat: Heatmap,
}

/// Chain conditional graph plus `r` latents; fits both estimators with the
/// practical schedule `λ = ca·σ̄√(ln p/n)`, `μ = cb·ρ√(r_eff ln p/n)`.
pub fn compare_estimators_json(
    p: usize,
    r: usize,
    n: usize,
    latent_scale: f64,
    ca: f64,
    cb: f64,
    seed: u64,
) -> Result<String, String> {
    check_p(p)?;
    let run = || -> lvggm::Result<Comparison> {
        let s = chain_precision(p, 1.0)?;
        let truth = marginalize(&assemble_joint(&s, r, latent_scale, seed)?)?;
        let cov = sample_covariance(&sample(&truth.sigma_star, n, seed.wrapping_add(1))?);
        let consts = ScheduleConstants {
            ca,
            cb,
            ..ScheduleConstants::default()
        };
        let (lambda, mu) = select_regularization(&cov.sigma_hat, n, Regime::Practical, consts)?;
        let cfg = SolverConfig::new(lambda, mu);
        let lv = lvggm_admm(&cov, &cfg)?;
        let gl = glasso(&cov, lambda, &cfg)?;
        let err = |m: &Matrix| (m - &truth.theta_star).norm();
        Ok(Comparison {
            p,
            r,
            n,
            energy_ratio: energy_ratio(&truth)?,
            lambda,
            mu,
            lvggm_error: err(&lv.theta_hat),
            glasso_error: err(&gl.theta_hat),
            lvggm_iterations: lv.iterations,
            glasso_iterations: gl.iterations,
            lvggm_converged: lv.converged,
            glasso_converged: gl.converged,
            rank_l_hat: lvggm::model::numerical_rank(&lv.l_hat)?,
            theta_star: (&truth.theta_star).into(),
            theta_lvggm: (&lv.theta_hat).into(),
            theta_glasso: (&gl.theta_hat).into(),
            l_hat: (&lv.l_hat).into(),
        })
    };
    let out = run().map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ScalingCurve {
    /// `(p, r, n, rescaled n, error)` per converged cell.
    points: Vec<(usize, usize, usize, f64, f64)>,
    slope: Option<f64>,
    intercept: Option<f64>,
    band: Option<f64>,
    not_converged: usize,
}

pub fn scaling_curve_json(p: usize, r: usize, reps: usize, ca: f64, cb: f64, seed: u64) -> Result<String, String> {
    check_p(p)?;
    let cfg = ErrorScalingConfig {
        p_values: vec![p],
        r_values: Some(vec![r]),
        reps,
        ca,
        cb,
        base_seed: seed,
        ..ErrorScalingConfig::default()
    };
    let recs = run_error_scaling_study(&cfg).map_err(|e| e.to_string())?;
    let fit = fit_loglog_slope(&recs).ok();
    let out = ScalingCurve {
        points: recs
            .iter()
            .filter(|r| r.converged)
            .filter_map(|r| Some((r.p, r.r, r.n?, r.rescaled_n?, r.metric?)))
            .collect(),
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        band: collapse_band(&recs, 5.0).ok().map(|b| b.band),
        not_converged: recs.iter().filter(|r| !r.converged).count(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Mean effective rank of the marginal covariance across eight energy ratios in [0.1, 10].
#[wasm_bindgen(js_name = effrankSweep)]
pub fn effrank_sweep(p: usize, r: usize, reps: usize, seed: u32) -> Result<String, JsValue> {
    effrank_sweep_json(p, r, reps, seed.into()).map_err(|e| JsValue::from_str(&e))
}

/// LVGGM against the graphical lasso on one chain-plus-latent instance.
#[wasm_bindgen(js_name = compareEstimators)]
pub fn compare_estimators(
    p: usize,
    r: usize,
    n: usize,
    latent_scale: f64,
    ca: f64,
    cb: f64,
    seed: u32,
) -> Result<String, JsValue> {
    compare_estimators_json(p, r, n, latent_scale, ca, cb, seed.into()).map_err(|e| JsValue::from_str(&e))
}

/// Frobenius error against rescaled sample size for n in 200..1000.
#[wasm_bindgen(js_name = scalingCurve)]
pub fn scaling_curve(p: usize, r: usize, reps: usize, ca: f64, cb: f64, seed: u32) -> Result<String, JsValue> {
    scaling_curve_json(p, r, reps, ca, cb, seed.into()).map_err(|e| JsValue::from_str(&e))
}
