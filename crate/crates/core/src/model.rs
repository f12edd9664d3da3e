//! Ground-truth LVGGM instances.
//!
//! A [`JointModel`] holds the `(p + r)`-dimensional precision `J` of observed
//! and latent variables. [`marginalize`] applies the Schur complement to get
//! the observed precision `Θ* = S* + L*` with `S* = J_OO` sparse and
//! `L* = −J_OL J_LL⁻¹ J_LO` negative semidefinite of rank at most `r`.

use std::collections::BTreeSet;

use nalgebra::Cholesky;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LvggmError, Result};
use crate::estimation::{check_finite, eigh, inverse_pd, is_positive_definite, singular_values, symmetrize};
use crate::rng::seeded;
use crate::Matrix;

/// Schur-complement margin enforced by [`assemble_joint`].
pub const JOINT_PD_MARGIN: f64 = 0.05;
/// Entries of `S*` with magnitude above this count as edges.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Relative eigenvalue threshold (against `‖L*‖₂`) for the numerical rank.
pub const RANK_TOL: f64 = 1e-10;
/// Default diagonal surplus over the absolute off-diagonal row sum.
pub const DEFAULT_DIAG_MARGIN: f64 = 0.5;

/// Symmetric set of off-diagonal index pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Support(BTreeSet<(usize, usize)>);

impl Support {
    pub fn new() -> Self {
        Self::default()
    }

    /// Off-diagonal entries of `m` with `|m_ij| > tol`.
    pub fn from_matrix(m: &Matrix, tol: f64) -> Self {
        let mut set = BTreeSet::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if i != j && m[(i, j)].abs() > tol {
                    set.insert((i, j));
                    set.insert((j, i));
                }
            }
        }
        Self(set)
    }

    /// Every off-diagonal pair of a `p × p` matrix.
    pub fn complete(p: usize) -> Self {
        let mut set = BTreeSet::new();
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    set.insert((i, j));
                }
            }
        }
        Self(set)
    }

    /// Inserts both `(i, j)` and `(j, i)`. Diagonal pairs are ignored.
    pub fn insert(&mut self, i: usize, j: usize) {
        if i != j {
            self.0.insert((i, j));
            self.0.insert((j, i));
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.0.contains(&(i, j))
    }

    /// Number of ordered pairs, `s = |E|`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.0.iter()
    }
}

/// Precision of the joint observed/latent Gaussian.
#[derive(Debug, Clone)]
pub struct JointModel {
    p: usize,
    r: usize,
    j: Matrix,
    latent_factor: f64,
}

impl JointModel {
    /// Builds `J = [[J_OO, J_OL], [J_LO, J_LL]]` and validates it.
    pub fn from_blocks(j_oo: &Matrix, j_ol: &Matrix, j_ll: &Matrix) -> Result<Self> {
        let p = j_oo.nrows();
        let r = j_ll.nrows();
        if !j_oo.is_square() || !j_ll.is_square() || j_ol.nrows() != p || j_ol.ncols() != r {
            return Err(LvggmError::DimensionMismatch {
                expected: format!("J_OO {p}x{p}, J_OL {p}x{r}, J_LL {r}x{r}"),
                actual: format!(
                    "J_OO {}x{}, J_OL {}x{}, J_LL {}x{}",
                    j_oo.nrows(),
                    j_oo.ncols(),
                    j_ol.nrows(),
                    j_ol.ncols(),
                    j_ll.nrows(),
                    j_ll.ncols()
                ),
            });
        }
        let mut j = Matrix::zeros(p + r, p + r);
        j.view_mut((0, 0), (p, p)).copy_from(j_oo);
        j.view_mut((0, p), (p, r)).copy_from(j_ol);
        j.view_mut((p, 0), (r, p)).copy_from(&j_ol.transpose());
        j.view_mut((p, p), (r, r)).copy_from(j_ll);
        Self::from_full(j, p, 1.0)
    }

    /// Validates a full `(p + r)`-square precision whose first `p` indices are observed.
    pub fn from_matrix(j: Matrix, p: usize) -> Result<Self> {
        Self::from_full(j, p, 1.0)
    }

    fn from_full(j: Matrix, p: usize, latent_factor: f64) -> Result<Self> {
        if !j.is_square() || p == 0 || p > j.nrows() {
            return Err(LvggmError::InvalidArgument(format!(
                "joint precision must be square with 0 < p <= dim, got {}x{} and p = {p}",
                j.nrows(),
                j.ncols()
            )));
        }
        check_finite(&j, "joint precision")?;
        let asym = (&j - j.transpose()).amax();
        if asym > 1e-10 * j.amax().max(1.0) {
            return Err(LvggmError::InvalidArgument(format!(
                "joint precision is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let j = symmetrize(&j);
        let r = j.nrows() - p;
        if !is_positive_definite(&j) {
            return Err(LvggmError::NotPositiveDefinite("joint precision J".into()));
        }
        if r > 0 && !is_positive_definite(&j.view((p, p), (r, r)).into_owned()) {
            return Err(LvggmError::NotPositiveDefinite("latent block J_LL".into()));
        }
        Ok(Self {
            p,
            r,
            j,
            latent_factor,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    /// Scalar applied to the drawn `J_OL` to keep the joint positive definite.
    pub fn latent_factor(&self) -> f64 {
        self.latent_factor
    }

    pub fn j_oo(&self) -> Matrix {
        self.j.view((0, 0), (self.p, self.p)).into_owned()
    }

    pub fn j_ol(&self) -> Matrix {
        self.j.view((0, self.p), (self.p, self.r)).into_owned()
    }

    pub fn j_ll(&self) -> Matrix {
        self.j.view((self.p, self.p), (self.r, self.r)).into_owned()
    }

    /// Same model with `J_OL` multiplied by `c`. Fails if the result is not PD.
    pub fn with_scaled_coupling(&self, c: f64) -> Result<Self> {
        let mut j = self.j.clone();
        let (p, r) = (self.p, self.r);
        j.view_mut((0, p), (p, r)).scale_mut(c);
        j.view_mut((p, 0), (r, p)).scale_mut(c);
        Self::from_full(j, p, self.latent_factor * c)
    }
}

/// Ground-truth marginal quantities of an LVGGM.
#[derive(Debug, Clone)]
pub struct MarginalModel {
    pub s_star: Matrix,
    pub l_star: Matrix,
    pub theta_star: Matrix,
    pub sigma_star: Matrix,
    pub support: Support,
    pub rank: usize,
}

impl MarginalModel {
    /// Builds the marginal from a sparse part and an NSD low-rank part.
    pub fn from_parts(s_star: Matrix, l_star: Matrix) -> Result<Self> {
        if s_star.shape() != l_star.shape() || !s_star.is_square() {
            return Err(LvggmError::DimensionMismatch {
                expected: format!("two equal square matrices ({}x{})", s_star.nrows(), s_star.nrows()),
                actual: format!("{}x{}", l_star.nrows(), l_star.ncols()),
            });
        }
        let s_star = symmetrize(&s_star);
        let l_star = symmetrize(&l_star);
        let theta_star = &s_star + &l_star;
        let sigma_star = inverse_pd(&theta_star, "marginal precision S* + L*")?;
        let support = Support::from_matrix(&s_star, SUPPORT_TOL);
        let rank = numerical_rank(&l_star)?;
        Ok(Self {
            s_star,
            l_star,
            theta_star,
            sigma_star,
            support,
            rank,
        })
    }

    pub fn p(&self) -> usize {
        self.s_star.nrows()
    }
}

/// Number of eigenvalues with `|w| > 1e-10·‖M‖₂`.
pub fn numerical_rank(m: &Matrix) -> Result<usize> {
    let e = eigh(m)?;
    let scale = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(0);
    }
    Ok(e.values.iter().filter(|v| v.abs() > RANK_TOL * scale).count())
}

/// Tridiagonal chain-graph precision: `diag` on the diagonal, `0.4·diag` beside it.
pub fn chain_precision(p: usize, diag: f64) -> Result<Matrix> {
    if p < 2 {
        return Err(LvggmError::InvalidArgument(format!("chain needs p >= 2, got {p}")));
    }
    if !(diag > 0.0) {
        return Err(LvggmError::InvalidArgument(format!("chain diagonal must be > 0, got {diag}")));
    }
    Ok(Matrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => diag,
        1 => 0.4 * diag,
        _ => 0.0,
    }))
}

/// Random sparse precision with the default diagonal margin of 0.5.
pub fn random_sparse_precision(p: usize, density: f64, seed: u64) -> Result<(Matrix, Support)> {
    random_sparse_precision_with_margin(p, density, DEFAULT_DIAG_MARGIN, seed)
}

/// Each off-diagonal pair is an edge with probability `density`; edge values
/// are uniform on `[−0.5, −0.1] ∪ [0.1, 0.5]`. The diagonal is the absolute
/// row sum plus `diag_margin`, so the result is strictly diagonally dominant.
pub fn random_sparse_precision_with_margin(
    p: usize,
    density: f64,
    diag_margin: f64,
    seed: u64,
) -> Result<(Matrix, Support)> {
    if p == 0 {
        return Err(LvggmError::InvalidArgument("p must be positive".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(LvggmError::InvalidArgument(format!("density must lie in [0, 1], got {density}")));
    }
    if !(diag_margin > 0.0) {
        return Err(LvggmError::InvalidArgument(format!(
            "diagonal margin must be > 0, got {diag_margin}"
        )));
    }
    let mut rng = seeded(seed);
    let mut m = Matrix::zeros(p, p);
    let mut support = Support::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < density {
                let magnitude = rng.random_range(0.1..=0.5);
                let v = if rng.random::<bool>() { magnitude } else { -magnitude };
                m[(i, j)] = v;
                m[(j, i)] = v;
                support.insert(i, j);
            }
        }
    }
    for i in 0..p {
        let row: f64 = m.row(i).iter().map(|v| v.abs()).sum();
        m[(i, i)] = row + diag_margin;
    }
    Ok((m, support))
}

/// Couples `r` independent unit-precision latents to the observed block.
///
/// `J_OL` is dense with entries `latent_scale·u`, `u ~ U[−1, 1]`. If the
/// Schur complement `I − J_LO S_OO⁻¹ J_OL` would have an eigenvalue below
/// [`JOINT_PD_MARGIN`], `J_OL` is shrunk by the largest factor that restores
/// the margin.
pub fn assemble_joint(s_oo: &Matrix, r: usize, latent_scale: f64, seed: u64) -> Result<JointModel> {
    if !(latent_scale >= 0.0) {
        return Err(LvggmError::InvalidArgument(format!(
            "latent scale must be >= 0, got {latent_scale}"
        )));
    }
    let s_inv = inverse_pd(s_oo, "conditional precision S_OO")?;
    let p = s_oo.nrows();
    let mut rng = seeded(seed);
    let mut j_ol = Matrix::zeros(p, r);
    for v in j_ol.iter_mut() {
        *v = latent_scale * rng.random_range(-1.0..=1.0);
    }
    let mut factor = 1.0;
    if r > 0 {
        let coupling = j_ol.transpose() * &s_inv * &j_ol;
        let top = eigh(&coupling)?.max();
        if top > 1.0 - JOINT_PD_MARGIN {
            factor = ((1.0 - JOINT_PD_MARGIN) / top).sqrt();
            j_ol *= factor;
        }
    }
    let mut jm = JointModel::from_blocks(s_oo, &j_ol, &Matrix::identity(r, r))?;
    jm.latent_factor = factor;
    Ok(jm)
}

/// Exact marginal of the observed block via the Schur complement.
pub fn marginalize(jm: &JointModel) -> Result<MarginalModel> {
    let s_star = jm.j_oo();
    let j_ol = jm.j_ol();
    let l_star = if jm.r() == 0 {
        Matrix::zeros(jm.p(), jm.p())
    } else {
        let j_ll_inv = inverse_pd(&jm.j_ll(), "latent block J_LL")?;
        symmetrize(&(-(&j_ol * j_ll_inv * j_ol.transpose())))
    };
    let theta_star = &s_star + &l_star;
    let sigma_star = inverse_pd(&theta_star, "marginal precision Θ*")?;
    let support = Support::from_matrix(&s_star, SUPPORT_TOL);
    let rank = if jm.r() == 0 {
        0
    } else {
        let sv = singular_values(&j_ol);
        let top = sv.iter().copied().fold(0.0, f64::max);
        let col_rank = sv.iter().filter(|&&s| s > RANK_TOL * top).count();
        if top > 0.0 && col_rank == jm.r() {
            jm.r()
        } else {
            numerical_rank(&l_star)?
        }
    };
    Ok(MarginalModel {
        s_star,
        l_star,
        theta_star,
        sigma_star,
        support,
        rank,
    })
}

/// Global-to-local energy `tr(G)/tr(S*⁻¹)` where `Σ* = G + S*⁻¹`.
pub fn energy_ratio(mm: &MarginalModel) -> Result<f64> {
    let local = inverse_pd(&mm.s_star, "conditional precision S*")?.trace();
    let global = (mm.sigma_star.trace() - local).max(0.0);
    Ok(global / local)
}

const RATIO_BISECTION_ITERS: usize = 60;
const RATIO_REL_TOL: f64 = 1e-6;
/// Closest approach to the PD boundary, as a fraction of the squared critical scale.
const BOUNDARY_FRACTION: f64 = 1.0 - 1e-9;

/// Rescales `J_OL` so that the marginal attains `tr(G)/tr(S⁻¹) = target`.
///
/// The ratio increases monotonically with the coupling scalar and diverges at
/// the scale where the Schur complement becomes singular, so the search runs
/// over `t = c²/c_crit² ∈ (0, 1)`.
pub fn scale_to_energy_ratio(jm: &JointModel, target: f64) -> Result<JointModel> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(LvggmError::InvalidArgument(format!("target ratio must be > 0, got {target}")));
    }
    let unattainable = |max: f64| LvggmError::UnattainableRatio {
        target,
        min: 0.0,
        max,
    };
    if jm.r() == 0 || jm.j_ol().amax() == 0.0 {
        return Err(unattainable(0.0));
    }
    let s_inv = inverse_pd(&jm.j_oo(), "conditional precision S_OO")?;
    let j_ol = jm.j_ol();
    let chol_ll = Cholesky::new(jm.j_ll())
        .ok_or_else(|| LvggmError::NotPositiveDefinite("latent block J_LL".into()))?;
    // Whitened coupling W = L_LL⁻¹ J_LO S⁻¹ J_OL L_LL⁻ᵀ; J is PD iff c²·λmax(W) < 1.
    let coupling = j_ol.transpose() * &s_inv * &j_ol;
    let l_inv = chol_ll
        .l()
        .try_inverse()
        .ok_or_else(|| LvggmError::NotPositiveDefinite("latent block J_LL".into()))?;
    let whitened = &l_inv * coupling * l_inv.transpose();
    let crit = eigh(&whitened)?.max();
    if !(crit > 0.0) {
        return Err(unattainable(0.0));
    }
    let scaled = |t: f64| -> Result<(JointModel, f64)> {
        let m = jm.with_scaled_coupling((t / crit).sqrt())?;
        let ratio = energy_ratio(&marginalize(&m)?)?;
        Ok((m, ratio))
    };

    let (mut best, ratio_hi) = scaled(BOUNDARY_FRACTION)?;
    if ratio_hi < target {
        return Err(unattainable(ratio_hi));
    }
    let mut best_err = (ratio_hi - target).abs();
    let (mut lo, mut hi) = (0.0, BOUNDARY_FRACTION);
    for _ in 0..RATIO_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let (m, ratio) = scaled(mid)?;
        let err = (ratio - target).abs();
        if err < best_err {
            best_err = err;
            best = m;
        }
        if err <= RATIO_REL_TOL * target {
            break;
        }
        if ratio < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Columns of the returned matrix are i.i.d. draws `x = C z` with `Σ = C Cᵀ`.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    /// `p × n`, one sample per column.
    pub data: Matrix,
    pub seed: u64,
}

impl SampleMatrix {
    pub fn new(data: Matrix, seed: u64) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(LvggmError::InvalidArgument("sample matrix must be non-empty".into()));
        }
        check_finite(&data, "sample matrix")?;
        Ok(Self { data, seed })
    }

    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }
}

pub fn sample(sigma: &Matrix, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(LvggmError::InvalidArgument("n must be positive".into()));
    }
    check_finite(sigma, "covariance")?;
    let chol = Cholesky::new(symmetrize(sigma))
        .ok_or_else(|| LvggmError::NotPositiveDefinite("sampling covariance".into()))?;
    let p = sigma.nrows();
    let mut rng = seeded(seed);
    let z = Matrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
    let data = chol.l() * z;
    SampleMatrix::new(data, seed)
}
