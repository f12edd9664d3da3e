//! Penalized maximum-likelihood estimation of `Θ = S + L`.
//!
//! Minimizes
//!
//! ```text
//! ⟨Σ̂, S + L⟩ − log det(S + L) + λ‖S‖₁ + μ‖L‖_*   s.t.  −L ⪰ 0,  S + L ≻ 0
//! ```
//!
//! by consensus ADMM over `(R, S, L)` with the constraint `R = S + L` and a
//! scaled dual `U`. Every block update is closed form:
//!
//! 1. `R`: eigendecompose `ρ(S + L − U) − Σ̂ = Q diag(d) Qᵀ` and take the
//!    positive root of `ρr² − d r − 1 = 0` per eigenvalue, so `R ≻ 0`.
//! 2. `S`: entrywise soft threshold of `R − L + U` at `λ/ρ`.
//! 3. `L`: eigendecompose `R − S + U` and map each eigenvalue `m` to
//!    `min(m + μ/ρ, 0)` (the nuclear norm is `−tr L` on the NSD cone).
//! 4. `U ← U + R − S − L`.
//!
//! With `latent_enabled = false` step 3 is skipped and the method reduces to
//! the graphical lasso.

use serde::{Deserialize, Serialize};

use crate::error::{LvggmError, Result};
use crate::estimation::{
    check_finite, eigh, inner, logdet_pd, matrix_norm, soft_threshold, CovarianceEstimate, NormKind,
};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `ℓ₁` weight on `S`.
    pub lambda: f64,
    /// Nuclear-norm weight on `L`.
    pub mu: f64,
    /// Augmented-Lagrangian penalty.
    pub rho: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// `false` runs the graphical lasso (`L ≡ 0`).
    pub latent_enabled: bool,
    /// Double or halve `ρ` every 10 iterations when one residual exceeds the other tenfold.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            mu: 0.1,
            rho: 1.0,
            max_iters: 2000,
            eps_abs: 1e-7,
            eps_rel: 1e-6,
            latent_enabled: true,
            adaptive_rho: false,
        }
    }
}

impl SolverConfig {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            ..Self::default()
        }
    }

    pub fn glasso(lambda: f64) -> Self {
        Self {
            lambda,
            mu: 0.0,
            latent_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(LvggmError::InvalidArgument(format!("solver {what} must be valid, got {v}")))
        };
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda (>= 0)", self.lambda);
        }
        if self.latent_enabled && (!(self.mu >= 0.0) || !self.mu.is_finite()) {
            return bad("mu (>= 0)", self.mu);
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return bad("rho (> 0)", self.rho);
        }
        if !(self.eps_abs > 0.0) {
            return bad("eps_abs (> 0)", self.eps_abs);
        }
        if !(self.eps_rel > 0.0) {
            return bad("eps_rel (> 0)", self.eps_rel);
        }
        if self.max_iters == 0 {
            return Err(LvggmError::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Solver output. `theta_hat` is the `R` iterate and therefore always PD.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub s_hat: Matrix,
    pub l_hat: Matrix,
    pub theta_hat: Matrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Primal residual after the first iteration.
    pub first_primal_residual: f64,
    pub objective_value: f64,
    pub converged: bool,
    /// Penalty in effect at exit (differs from the config only with adaptive ρ).
    pub final_rho: f64,
}

/// `⟨Σ̂, S + L⟩ − log det(S + L) + λ‖S‖₁ + μ‖L‖_*`.
pub fn objective(sigma_hat: &Matrix, s: &Matrix, l: &Matrix, lambda: f64, mu: f64) -> Result<f64> {
    let theta = s + l;
    let nll = negative_log_likelihood(sigma_hat, &theta)?;
    let mut value = nll + lambda * matrix_norm(s, NormKind::ElementwiseL1);
    if mu != 0.0 {
        value += mu * matrix_norm(l, NormKind::Nuclear);
    }
    Ok(value)
}

/// `⟨Σ̂, Θ⟩ − log det Θ`; an error when `Θ` is not PD.
pub fn negative_log_likelihood(sigma_hat: &Matrix, theta: &Matrix) -> Result<f64> {
    Ok(inner(sigma_hat, theta) - logdet_pd(theta)?)
}

/// Positive root of `ρr² − d r − 1 = 0`, written to avoid cancellation for `d < 0`.
#[inline]
fn log_det_prox_root(d: f64, rho: f64) -> f64 {
    let disc = (d * d + 4.0 * rho).sqrt();
    if d >= 0.0 {
        (d + disc) / (2.0 * rho)
    } else {
        2.0 / (disc - d)
    }
}

/// `argmin_R ⟨Σ̂, R⟩ − log det R + (ρ/2)‖R − Z‖²_F`.
fn r_update(sigma_hat: &Matrix, z: &Matrix, rho: f64) -> Result<Matrix> {
    let e = eigh(&(z * rho - sigma_hat))?;
    Ok(e.map_spectrum(|d| log_det_prox_root(d, rho)))
}

/// `argmin_{L ⪯ 0} −μ tr L + (ρ/2)‖L − M‖²_F` with `shift = μ/ρ`.
fn l_update(m: &Matrix, shift: f64) -> Result<Matrix> {
    let e = eigh(m)?;
    Ok(e.map_spectrum(|w| (w + shift).min(0.0)))
}

fn ensure_finite(m: &Matrix, update: &'static str, iteration: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LvggmError::SolverNonFinite { update, iteration })
    }
}

struct Iterate {
    r: Matrix,
    s: Matrix,
    l: Matrix,
    primal: f64,
    dual: f64,
    iteration: usize,
}

/// Sparse plus low-rank penalized ML estimate.
pub fn lvggm_admm(cov: &CovarianceEstimate, cfg: &SolverConfig) -> Result<Estimate> {
    cfg.validate()?;
    let sigma_hat = &cov.sigma_hat;
    if !sigma_hat.is_square() || sigma_hat.is_empty() {
        return Err(LvggmError::InvalidArgument("covariance must be a non-empty square matrix".into()));
    }
    check_finite(sigma_hat, "covariance")?;
    let p = sigma_hat.nrows();
    let tol_abs = p as f64 * cfg.eps_abs;

    let mut rho = cfg.rho;
    let mut s = Matrix::from_diagonal(&sigma_hat.diagonal().map(|d| 1.0 / (d + cfg.lambda).max(1e-12)));
    let mut l = Matrix::zeros(p, p);
    let mut u = Matrix::zeros(p, p);
    let mut r = s.clone();

    let mut first_primal = f64::NAN;
    let mut best: Option<(f64, Iterate)> = None;
    let mut converged = false;
    let mut last = (0.0, 0.0, 0usize);

    for k in 1..=cfg.max_iters {
        let prev_sum = &s + &l;

        r = r_update(sigma_hat, &(&prev_sum - &u), rho).map_err(|e| match e {
            LvggmError::NonFinite(_) => LvggmError::SolverNonFinite {
                update: "R-update",
                iteration: k,
            },
            other => other,
        })?;
        ensure_finite(&r, "R-update", k)?;

        s = soft_threshold(&(&r - &l + &u), cfg.lambda / rho);
        ensure_finite(&s, "S-update", k)?;

        if cfg.latent_enabled {
            l = l_update(&(&r - &s + &u), cfg.mu / rho).map_err(|e| match e {
                LvggmError::NonFinite(_) => LvggmError::SolverNonFinite {
                    update: "L-update",
                    iteration: k,
                },
                other => other,
            })?;
            ensure_finite(&l, "L-update", k)?;
        }

        let sum = &s + &l;
        let gap = &r - &sum;
        u += &gap;
        ensure_finite(&u, "dual update", k)?;

        let primal = gap.norm();
        let dual = rho * (&sum - &prev_sum).norm();
        if k == 1 {
            first_primal = primal;
        }
        let eps_pri = tol_abs + cfg.eps_rel * r.norm().max(sum.norm());
        let eps_dual = tol_abs + cfg.eps_rel * rho * u.norm();
        last = (primal, dual, k);

        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }

        let score = (primal / eps_pri).max(dual / eps_dual);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((
                score,
                Iterate {
                    r: r.clone(),
                    s: s.clone(),
                    l: l.clone(),
                    primal,
                    dual,
                    iteration: k,
                },
            ));
        }

        if cfg.adaptive_rho && k % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u *= 0.5;
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u *= 2.0;
            }
        }
    }

    let (r, s, l, primal, dual, iterations) = if converged {
        (r, s, l, last.0, last.1, last.2)
    } else {
        let (_, it) = best.expect("at least one iteration ran");
        (it.r, it.s, it.l, it.primal, it.dual, it.iteration)
    };

    let mu = if cfg.latent_enabled { cfg.mu } else { 0.0 };
    let objective_value = objective(sigma_hat, &s, &l, cfg.lambda, mu).or_else(|_| {
        // S + L can sit outside the cone for a non-converged iterate; R never does.
        Ok::<f64, LvggmError>(
            negative_log_likelihood(sigma_hat, &r)?
                + cfg.lambda * matrix_norm(&s, NormKind::ElementwiseL1)
                + mu * matrix_norm(&l, NormKind::Nuclear),
        )
    })?;

    Ok(Estimate {
        s_hat: s,
        l_hat: l,
        theta_hat: r,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        first_primal_residual: first_primal,
        objective_value,
        converged,
        final_rho: rho,
    })
}

/// Graphical lasso: the same scheme with `L ≡ 0`; `cfg.mu` is ignored.
pub fn glasso(cov: &CovarianceEstimate, lambda: f64, cfg: &SolverConfig) -> Result<Estimate> {
    let cfg = SolverConfig {
        lambda,
        mu: 0.0,
        latent_enabled: false,
        ..cfg.clone()
    };
    lvggm_admm(cov, &cfg)
}
