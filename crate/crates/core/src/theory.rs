//! Computable pieces of the error analysis: Fisher geometry at `Θ*`, model
//! subspace projectors, incoherence diagnostics, regularization schedules and
//! the deterministic Frobenius error bound.
//!
//! The Gaussian Fisher information at `Θ*` is `F* = Θ*⁻¹ ⊗ Θ*⁻¹`. Nothing here
//! forms it explicitly: `F*` acts on a matrix `Δ` as `Θ*⁻¹ Δ Θ*⁻¹`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{LvggmError, Result};
use crate::estimation::{
    effective_rank, eigh, inverse_pd, matrix_norm, sample_covariance, CovarianceEstimate, NormKind,
};
use crate::model::{sample, MarginalModel, Support};
use crate::rng::seeded;
use crate::Matrix;

/// Largest `p` accepted by [`sfi_singular_values`].
pub const SFI_MAX_DIM: usize = 64;
const LANCZOS_MAX_STEPS: usize = 500;
const LANCZOS_REL_TOL: f64 = 1e-14;

/// Sparse support `E` and low-rank column space `U` defining the model subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceSpec {
    pub support: Support,
    /// `p × r` with orthonormal columns.
    pub u_basis: Matrix,
}

impl SubspaceSpec {
    pub fn new(support: Support, u_basis: Matrix) -> Result<Self> {
        let r = u_basis.ncols();
        let gram = u_basis.transpose() * &u_basis;
        if (gram - Matrix::identity(r, r)).amax() > 1e-10 {
            return Err(LvggmError::InvalidArgument("U basis columns are not orthonormal".into()));
        }
        if let Some(&(i, j)) = support.iter().find(|&&(i, j)| i >= u_basis.nrows() || j >= u_basis.nrows()) {
            return Err(LvggmError::InvalidArgument(format!(
                "support pair ({i}, {j}) out of range for p = {}",
                u_basis.nrows()
            )));
        }
        Ok(Self { support, u_basis })
    }

    /// `E = supp(S*)` and `U = col(L*)`.
    pub fn from_marginal(mm: &MarginalModel) -> Result<Self> {
        let e = eigh(&mm.l_star)?;
        let scale = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let cols: Vec<usize> = (0..e.values.len())
            .filter(|&i| scale > 0.0 && e.values[i].abs() > crate::model::RANK_TOL * scale)
            .collect();
        let p = mm.p();
        let mut u = Matrix::zeros(p, cols.len());
        for (k, &c) in cols.iter().enumerate() {
            u.set_column(k, &e.vectors.column(c));
        }
        Self::new(mm.support.clone(), u)
    }

    pub fn p(&self) -> usize {
        self.u_basis.nrows()
    }

    /// `s = |E|`.
    pub fn s(&self) -> usize {
        self.support.len()
    }

    /// `r = dim U`.
    pub fn r(&self) -> usize {
        self.u_basis.ncols()
    }

    fn projector(&self) -> Matrix {
        &self.u_basis * self.u_basis.transpose()
    }
}

/// Constants entering the error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Restricted Fisher eigenvalue `κ*_min`.
    pub kappa_min: f64,
    /// Burn-in constant `M > 6`.
    pub m_const: f64,
    /// `κ_L = (M − 2)/(2(M − 1))·κ*_min`.
    pub kappa_l: f64,
    /// `max_i Σ*_ii`.
    pub sigma_bar: f64,
    /// `‖Σ*‖₂`.
    pub rho_star: f64,
    pub r_eff: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `Λ` of the incoherence condition, when defined.
    pub lambda_sfi: Option<f64>,
    /// Approximation error `r*_⊥`.
    pub r_perp: f64,
}

impl TheoryParams {
    pub fn new(kappa_min: f64, m_const: f64) -> Result<Self> {
        if !(m_const > 6.0) {
            return Err(LvggmError::InvalidArgument(format!("M must exceed 6, got {m_const}")));
        }
        Ok(Self {
            kappa_min,
            m_const,
            kappa_l: curvature(kappa_min, m_const),
            sigma_bar: 0.0,
            rho_star: 0.0,
            r_eff: 0.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            lambda_sfi: None,
            r_perp: 0.0,
        })
    }

    /// Covariance quantities from the truth, `κ*_min` from its trivial lower
    /// bound `λ_min(Θ*)²` and zero approximation error.
    pub fn from_truth(mm: &MarginalModel, m_const: f64) -> Result<Self> {
        let mut params = Self::new(rfe_lower_bound(&mm.theta_star)?, m_const)?;
        params.sigma_bar = max_diagonal(&mm.sigma_star);
        params.rho_star = matrix_norm(&mm.sigma_star, NormKind::Spectral);
        params.r_eff = effective_rank(&mm.sigma_star);
        Ok(params)
    }
}

/// `κ_L = (M − 2)/(2(M − 1))·κ*_min`.
pub fn curvature(kappa_min: f64, m_const: f64) -> f64 {
    (m_const - 2.0) / (2.0 * (m_const - 1.0)) * kappa_min
}

/// `c₁ = 16M/(M − 6)`.
pub fn sfi_constant(m_const: f64) -> f64 {
    16.0 * m_const / (m_const - 6.0)
}

/// Applies `F*` and answers Fisher inner products for a fixed `Θ*`.
#[derive(Debug, Clone)]
pub struct FisherOperator {
    theta_inv: Matrix,
}

impl FisherOperator {
    pub fn new(theta_star: &Matrix) -> Result<Self> {
        Ok(Self {
            theta_inv: inverse_pd(theta_star, "Θ*")?,
        })
    }

    /// `Θ*⁻¹ Δ Θ*⁻¹`.
    pub fn apply(&self, delta: &Matrix) -> Matrix {
        &self.theta_inv * delta * &self.theta_inv
    }

    /// `tr(Θ*⁻¹ A Θ*⁻¹ B)`.
    pub fn inner(&self, a: &Matrix, b: &Matrix) -> f64 {
        let left = &self.theta_inv * a;
        let right = &self.theta_inv * b;
        // tr(XY) = Σ_ij X_ij Y_ji
        left.component_mul(&right.transpose()).sum()
    }
}

pub fn fisher_norm_sq(theta_star: &Matrix, delta: &Matrix) -> Result<f64> {
    let f = FisherOperator::new(theta_star)?;
    Ok(f.inner(delta, delta).max(0.0))
}

pub fn fisher_inner(theta_star: &Matrix, a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(FisherOperator::new(theta_star)?.inner(a, b))
}

/// Keeps entries on `E` and the diagonal.
pub fn project_sparse(m: &Matrix, support: &Support) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i == j || support.contains(i, j) {
            m[(i, j)]
        } else {
            0.0
        }
    })
}

pub fn project_sparse_complement(m: &Matrix, support: &Support) -> Matrix {
    m - project_sparse(m, support)
}

/// `PM + MP − PMP` with `P = U Uᵀ`.
pub fn project_lowrank(m: &Matrix, u_basis: &Matrix) -> Matrix {
    m - project_lowrank_complement(m, u_basis)
}

/// `(I − P) M (I − P)`.
pub fn project_lowrank_complement(m: &Matrix, u_basis: &Matrix) -> Matrix {
    let p = m.nrows();
    let q = Matrix::identity(p, p) - u_basis * u_basis.transpose();
    &q * m * &q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Proj {
    Sparse,
    SparseComplement,
    LowRank,
    LowRankComplement,
}

struct Projections<'a> {
    support: &'a Support,
    /// `I − UUᵀ`
    complement: Matrix,
}

impl Projections<'_> {
    fn apply(&self, which: Proj, m: &Matrix) -> Matrix {
        match which {
            Proj::Sparse => project_sparse(m, self.support),
            Proj::SparseComplement => project_sparse_complement(m, self.support),
            Proj::LowRank => m - &self.complement * m * &self.complement,
            Proj::LowRankComplement => &self.complement * m * &self.complement,
        }
    }
}

/// Largest singular value of `Π_a ∘ F* ∘ Π_b`.
///
/// Lanczos with full reorthogonalization on the normal operator, started from
/// a random matrix in the range of `Π_b`. Plain power iteration stalls when
/// the leading singular values cluster, which projected Fisher operators do.
fn projected_operator_norm(
    fisher: &FisherOperator,
    proj: &Projections<'_>,
    a: Proj,
    b: Proj,
    seed: u64,
) -> Result<f64> {
    let p = fisher.theta_inv.nrows();
    let mut rng = seeded(seed);
    let start = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let mut q = proj.apply(b, &start);
    let norm = q.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    q /= norm;
    // The adjoint of Π_a F* Π_b is Π_b F* Π_a: both projectors and F* are self-adjoint.
    let normal = |x: &Matrix| {
        let t = proj.apply(a, &fisher.apply(&proj.apply(b, x)));
        proj.apply(b, &fisher.apply(&proj.apply(a, &t)))
    };
    let max_steps = LANCZOS_MAX_STEPS.min(p * p);
    let mut basis: Vec<Matrix> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut top = 0.0_f64;
    for k in 0..max_steps {
        let mut w = normal(&basis[k]);
        alpha.push(basis[k].dot(&w));
        // Two Gram-Schmidt passes keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w -= v * c;
            }
        }
        let b_next = w.norm();
        let m = alpha.len();
        let tri = Matrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i.abs_diff(j) == 1 {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = eigh(&tri)?;
        let theta = eig.max();
        // Residual of the leading Ritz pair is |β_k · (last component of its eigenvector)|.
        let last = eig.vectors[(m - 1, m - 1)].abs();
        let residual = b_next * last;
        let settled = (theta - top).abs() <= LANCZOS_REL_TOL * theta.abs();
        top = theta;
        if b_next <= LANCZOS_REL_TOL * theta.abs().max(f64::MIN_POSITIVE)
            || residual <= LANCZOS_REL_TOL * theta.abs()
            || (settled && k > 0)
        {
            break;
        }
        beta.push(b_next);
        basis.push(w / b_next);
    }
    Ok(top.max(0.0).sqrt())
}

/// Incoherence diagnostics at `Θ*` for a subspace pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfiReport {
    /// `σ̄(P_E F* P_U)`, `σ̄(P_E⊥ F* P_U)`, `σ̄(P_E F* P_U⊥)`, `σ̄(P_E⊥ F* P_U⊥)`.
    pub values: [f64; 4],
    pub c1: f64,
    /// `Λ = 2 + 3 max{λ√s/(μ√r), μ√r/(λ√s)}`; `None` when `s`, `r`, `λ` or `μ` is zero.
    pub lambda_sfi: Option<f64>,
    /// `κ*_min/(c₁Λ²)`.
    pub threshold: Option<f64>,
    pub satisfied: Option<bool>,
}

impl SfiReport {
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfiInputs {
    pub lambda: f64,
    pub mu: f64,
    pub m_const: f64,
    pub kappa_min: f64,
}

pub fn sfi_singular_values(theta_star: &Matrix, subspace: &SubspaceSpec, inputs: SfiInputs) -> Result<SfiReport> {
    let p = theta_star.nrows();
    if p > SFI_MAX_DIM {
        return Err(LvggmError::InvalidArgument(format!(
            "incoherence diagnostics are limited to p <= {SFI_MAX_DIM}, got {p}"
        )));
    }
    if subspace.p() != p {
        return Err(LvggmError::DimensionMismatch {
            expected: format!("U basis with {p} rows"),
            actual: format!("{}", subspace.p()),
        });
    }
    if !(inputs.m_const > 6.0) {
        return Err(LvggmError::InvalidArgument(format!("M must exceed 6, got {}", inputs.m_const)));
    }
    let fisher = FisherOperator::new(theta_star)?;
    let proj = Projections {
        support: &subspace.support,
        complement: Matrix::identity(p, p) - subspace.projector(),
    };
    let pairs = [
        (Proj::Sparse, Proj::LowRank),
        (Proj::SparseComplement, Proj::LowRank),
        (Proj::Sparse, Proj::LowRankComplement),
        (Proj::SparseComplement, Proj::LowRankComplement),
    ];
    let mut values = [0.0; 4];
    for (k, &(a, b)) in pairs.iter().enumerate() {
        values[k] = projected_operator_norm(&fisher, &proj, a, b, 0x5F1 + k as u64)?;
    }

    let c1 = sfi_constant(inputs.m_const);
    let (s, r) = (subspace.s() as f64, subspace.r() as f64);
    let sparse_side = inputs.lambda * s.sqrt();
    let lowrank_side = inputs.mu * r.sqrt();
    let lambda_sfi = (sparse_side > 0.0 && lowrank_side > 0.0)
        .then(|| 2.0 + 3.0 * (sparse_side / lowrank_side).max(lowrank_side / sparse_side));
    let threshold = lambda_sfi.map(|l| inputs.kappa_min / (c1 * l * l));
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(SfiReport {
        values,
        c1,
        lambda_sfi,
        threshold,
        satisfied: threshold.map(|t| max <= t),
    })
}

/// `λ_min(Θ*)²`, the trivial restricted Fisher eigenvalue.
pub fn rfe_lower_bound(theta_star: &Matrix) -> Result<f64> {
    let min = eigh(theta_star)?.min();
    if !(min > 0.0) {
        return Err(LvggmError::NotPositiveDefinite("Θ*".into()));
    }
    Ok(min * min)
}

/// Is `Δ` in the `ℓ₁` structural error set around `S*` for support `E`?
pub fn in_sparse_error_set(delta: &Matrix, support: &Support, s_star: &Matrix) -> bool {
    let on = matrix_norm(&project_sparse(delta, support), NormKind::ElementwiseL1);
    let off = matrix_norm(&project_sparse_complement(delta, support), NormKind::ElementwiseL1);
    let truth_off = matrix_norm(&project_sparse_complement(s_star, support), NormKind::ElementwiseL1);
    off <= 3.0 * on + 4.0 * truth_off
}

/// Is `Δ` in the nuclear-norm structural error set around `L*` for column space `U`?
pub fn in_lowrank_error_set(delta: &Matrix, u_basis: &Matrix, l_star: &Matrix) -> bool {
    let off = matrix_norm(&project_lowrank_complement(delta, u_basis), NormKind::Nuclear);
    let on = matrix_norm(&project_lowrank(delta, u_basis), NormKind::Nuclear);
    let truth_off = matrix_norm(&project_lowrank_complement(l_star, u_basis), NormKind::Nuclear);
    off <= 3.0 * on + 4.0 * truth_off
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `λ = 160 C₁ σ̄ √(log p/n)`, `μ = 16 C₂ ρ √(p/n)`.
    Cor1,
    /// Same `λ`, `μ = C₄ ρ √(r_eff log p/n)`.
    Thm2,
    /// `λ = C_a σ̄ √(log p/n)`, `μ = C_b ρ √(r_eff log p/n)`.
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub c1: f64,
    pub c2: f64,
    pub c4: f64,
    /// Multiplies `λ` (or is its whole constant in [`Regime::Practical`]).
    pub ca: f64,
    /// Multiplies `μ` (or is its whole constant in [`Regime::Practical`]).
    pub cb: f64,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c4: 1.0,
            ca: 1.0,
            cb: 1.0,
        }
    }
}

pub fn max_diagonal(m: &Matrix) -> f64 {
    m.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Regularization pair `(λ, μ)` for `n` samples.
///
/// `sigma` may be the true `Σ*` or the sample `Σ̂`; `σ̄`, `ρ` and `r_eff` are
/// read from it.
pub fn select_regularization(
    sigma: &Matrix,
    n: usize,
    regime: Regime,
    constants: ScheduleConstants,
) -> Result<(f64, f64)> {
    let p = sigma.nrows();
    if n < 2 || p < 2 {
        return Err(LvggmError::InvalidArgument(format!(
            "schedules need n >= 2 and p >= 2, got n = {n}, p = {p}"
        )));
    }
    let sigma_bar = max_diagonal(sigma);
    let rho = matrix_norm(sigma, NormKind::Spectral);
    let (n, pf) = (n as f64, p as f64);
    let log_rate = (pf.ln() / n).sqrt();
    Ok(match regime {
        Regime::Cor1 => (
            constants.ca * 160.0 * constants.c1 * sigma_bar * log_rate,
            constants.cb * 16.0 * constants.c2 * rho * (pf / n).sqrt(),
        ),
        Regime::Thm2 => (
            constants.ca * 160.0 * constants.c1 * sigma_bar * log_rate,
            constants.cb * constants.c4 * rho * (effective_rank(sigma) * pf.ln() / n).sqrt(),
        ),
        Regime::Practical => (
            constants.ca * sigma_bar * log_rate,
            constants.cb * rho * (effective_rank(sigma) * pf.ln() / n).sqrt(),
        ),
    })
}

/// `(6/κ_L) max{λ√s, μ√r} + √(8 r⊥/κ_L)`.
pub fn thm1_bound(params: &TheoryParams, lambda: f64, mu: f64, s: usize, r: usize) -> Result<f64> {
    let k = params.kappa_l;
    if !(k > 0.0) {
        return Err(LvggmError::InvalidArgument(format!("κ_L must be positive, got {k}")));
    }
    let estimation = 6.0 / k * (lambda * (s as f64).sqrt()).max(mu * (r as f64).sqrt());
    let approximation = (8.0 * params.r_perp.max(0.0) / k).sqrt();
    Ok(estimation + approximation)
}

/// Empirical check of `λ ≥ 2‖Σ̂ − Σ*‖_∞` and `μ ≥ 2‖Σ̂ − Σ*‖₂` under the
/// `Cor1` schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub trials: usize,
    pub n: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Fraction of trials with `‖Σ̂ − Σ*‖_∞ ≤ λ/2`; `None` without trials.
    pub inf_success_rate: Option<f64>,
    /// Fraction of trials with `‖Σ̂ − Σ*‖₂ ≤ μ/2`.
    pub spectral_success_rate: Option<f64>,
    pub mean_inf_deviation: Option<f64>,
    pub mean_spectral_deviation: Option<f64>,
}

pub fn deviation_check(
    sigma_star: &Matrix,
    n: usize,
    trials: usize,
    seed: u64,
    c1: f64,
    c2: f64,
) -> Result<DeviationReport> {
    let constants = ScheduleConstants {
        c1,
        c2,
        ..ScheduleConstants::default()
    };
    let (lambda, mu) = select_regularization(sigma_star, n, Regime::Cor1, constants)?;
    let trial = |t: usize| -> Result<(f64, f64)> {
        let x = sample(sigma_star, n, seed.wrapping_add(t as u64))?;
        let CovarianceEstimate { sigma_hat, .. } = sample_covariance(&x);
        let dev = sigma_hat - sigma_star;
        Ok((
            matrix_norm(&dev, NormKind::ElementwiseMax),
            matrix_norm(&dev, NormKind::Spectral),
        ))
    };
    #[cfg(feature = "parallel")]
    let devs: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(trial).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let devs: Vec<(f64, f64)> = (0..trials).map(trial).collect::<Result<_>>()?;

    let rate = |ok: usize| (trials > 0).then(|| ok as f64 / trials as f64);
    let mean = |f: fn(&(f64, f64)) -> f64| (trials > 0).then(|| devs.iter().map(f).sum::<f64>() / trials as f64);
    Ok(DeviationReport {
        trials,
        n,
        lambda,
        mu,
        inf_success_rate: rate(devs.iter().filter(|d| d.0 <= lambda / 2.0).count()),
        spectral_success_rate: rate(devs.iter().filter(|d| d.1 <= mu / 2.0).count()),
        mean_inf_deviation: mean(|d| d.0),
        mean_spectral_deviation: mean(|d| d.1),
    })
}

/// Everything the `diagnose` command reports for a ground-truth model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub p: usize,
    pub s: usize,
    pub r: usize,
    pub lambda: f64,
    pub mu: f64,
    pub m_const: f64,
    pub sigma_bar: f64,
    pub rho_star: f64,
    pub r_eff: f64,
    pub rfe_lower_bound: f64,
    pub kappa_l: f64,
    pub sfi: [f64; 4],
    pub lambda_sfi: Option<f64>,
    pub threshold: Option<f64>,
    pub sfi_satisfied: Option<bool>,
    /// Evaluated with `κ*_min = λ_min(Θ*)²` and `r⊥ = 0`, hence conservative.
    pub thm1_bound: f64,
}

pub fn diagnose(mm: &MarginalModel, lambda: f64, mu: f64, m_const: f64) -> Result<DiagnosticReport> {
    let params = TheoryParams::from_truth(mm, m_const)?;
    let subspace = SubspaceSpec::from_marginal(mm)?;
    let sfi = sfi_singular_values(
        &mm.theta_star,
        &subspace,
        SfiInputs {
            lambda,
            mu,
            m_const,
            kappa_min: params.kappa_min,
        },
    )?;
    let bound = thm1_bound(&params, lambda, mu, subspace.s(), subspace.r())?;
    Ok(DiagnosticReport {
        p: mm.p(),
        s: subspace.s(),
        r: subspace.r(),
        lambda,
        mu,
        m_const,
        sigma_bar: params.sigma_bar,
        rho_star: params.rho_star,
        r_eff: params.r_eff,
        rfe_lower_bound: params.kappa_min,
        kappa_l: params.kappa_l,
        sfi: sfi.values,
        lambda_sfi: sfi.lambda_sfi,
        threshold: sfi.threshold,
        sfi_satisfied: sfi.satisfied,
        thm1_bound: bound,
    })
}
