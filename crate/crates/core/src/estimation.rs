//! Sample covariance, matrix norms, effective rank and the proximal
//! primitives shared by the solver and the experiment harnesses.

use nalgebra::{Cholesky, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LvggmError, Result};
use crate::model::SampleMatrix;
use crate::Matrix;

/// Sample covariance `Σ̂` together with the number of samples behind it.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub sigma_hat: Matrix,
    pub n: usize,
}

impl CovarianceEstimate {
    /// Wraps an externally supplied covariance. The matrix is symmetrized.
    pub fn from_matrix(sigma_hat: Matrix, n: usize) -> Result<Self> {
        check_square(&sigma_hat, "covariance")?;
        check_finite(&sigma_hat, "covariance")?;
        Ok(Self {
            sigma_hat: symmetrize(&sigma_hat),
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma_hat.nrows()
    }
}

/// `(1/n) Σ_i x_i x_iᵀ` over the columns of `X`, treating data as zero-mean.
pub fn sample_covariance(x: &SampleMatrix) -> CovarianceEstimate {
    let n = x.n();
    let data = &x.data;
    let mut sigma = data * data.transpose();
    sigma /= n.max(1) as f64;
    CovarianceEstimate {
        sigma_hat: symmetrize(&sigma),
        n,
    }
}

/// Like [`sample_covariance`] but subtracts the per-row mean first.
pub fn sample_covariance_centered(x: &SampleMatrix) -> CovarianceEstimate {
    let n = x.n();
    let mut centered = x.data.clone();
    for mut row in centered.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    let mut sigma = &centered * centered.transpose();
    sigma /= n.max(1) as f64;
    CovarianceEstimate {
        sigma_hat: symmetrize(&sigma),
        n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `max |M_ij|`
    ElementwiseMax,
    /// Largest singular value.
    Spectral,
    Frobenius,
    /// Sum of singular values.
    Nuclear,
    /// `Σ |M_ij|`, diagonal included.
    ElementwiseL1,
}

pub fn matrix_norm(m: &Matrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::ElementwiseMax => m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
        NormKind::Spectral => singular_values(m).iter().copied().fold(0.0, f64::max),
        NormKind::Frobenius => m.norm(),
        NormKind::Nuclear => singular_values(m).iter().sum(),
        NormKind::ElementwiseL1 => m.iter().map(|v| v.abs()).sum(),
    }
}

pub fn singular_values(m: &Matrix) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// `tr(Σ) / ‖Σ‖₂`; zero for the zero matrix.
pub fn effective_rank(sigma: &Matrix) -> f64 {
    let spectral = matrix_norm(sigma, NormKind::Spectral);
    if spectral == 0.0 {
        return 0.0;
    }
    sigma.trace() / spectral
}

#[inline]
pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// Entrywise `sign(m)·max(|m| − τ, 0)`, diagonal included.
pub fn soft_threshold(m: &Matrix, tau: f64) -> Matrix {
    m.map(|x| soft_threshold_scalar(x, tau))
}

/// Symmetric eigendecomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: Matrix,
}

impl Eigh {
    /// `Q diag(f(w)) Qᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        let out = scaled * self.vectors.transpose();
        symmetrize(&out)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Eigendecomposition of `(M + Mᵀ)/2`.
pub fn eigh(m: &Matrix) -> Result<Eigh> {
    check_square(m, "eigh input")?;
    check_finite(m, "eigh input")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigh { values, vectors })
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    Ok(eigh(m)?.min())
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    m.is_square() && Cholesky::new(symmetrize(m)).is_some()
}

/// `log det` of a positive-definite matrix via its Cholesky factor.
pub fn logdet_pd(m: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(symmetrize(m))
        .ok_or_else(|| LvggmError::NotPositiveDefinite("log-det argument".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_pd(m: &Matrix, what: &str) -> Result<Matrix> {
    let chol = Cholesky::new(symmetrize(m))
        .ok_or_else(|| LvggmError::NotPositiveDefinite(what.to_string()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Frobenius inner product `⟨A, B⟩ = tr(AᵀB)`.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

pub(crate) fn check_square(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(LvggmError::DimensionMismatch {
            expected: format!("square {what}"),
            actual: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LvggmError::NonFinite(what.to_string()))
    }
}
