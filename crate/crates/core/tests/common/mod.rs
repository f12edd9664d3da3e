//! Dense reference constructions shared by the integration tests.
#![allow(dead_code)]

use lvggm::model::{assemble_joint, marginalize, random_sparse_precision};
use lvggm::rng::seeded;
use lvggm::theory::SubspaceSpec;
use lvggm::{MarginalModel, Matrix, Support};
use rand::Rng as _;

/// Column-major `vec`.
pub fn vec_of(m: &Matrix) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// `Θ⁻¹ ⊗ Θ⁻¹`, acting on column-major `vec(Δ)`.
pub fn dense_fisher(theta: &Matrix) -> Matrix {
    let inv = theta.clone().try_inverse().expect("invertible");
    kron(&inv, &inv)
}

/// Diagonal mask of `E ∪ diag` on `vec` coordinates.
pub fn dense_sparse_projector(p: usize, support: &Support) -> Matrix {
    let mut out = Matrix::zeros(p * p, p * p);
    for j in 0..p {
        for i in 0..p {
            if i == j || support.contains(i, j) {
                out[(j * p + i, j * p + i)] = 1.0;
            }
        }
    }
    out
}

/// `I⊗P + P⊗I − P⊗P` with `P = UUᵀ`.
pub fn dense_lowrank_projector(u: &Matrix) -> Matrix {
    let p = u.nrows();
    let proj = u * u.transpose();
    let id = Matrix::identity(p, p);
    kron(&id, &proj) + kron(&proj, &id) - kron(&proj, &proj)
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// The four projected operator norms from explicit `p² × p²` matrices, in the
/// order `(E,U)`, `(E⊥,U)`, `(E,U⊥)`, `(E⊥,U⊥)`.
pub fn dense_sfi(theta: &Matrix, subspace: &SubspaceSpec) -> [f64; 4] {
    let p = theta.nrows();
    let f = dense_fisher(theta);
    let id = Matrix::identity(p * p, p * p);
    let pe = dense_sparse_projector(p, &subspace.support);
    let pu = dense_lowrank_projector(&subspace.u_basis);
    let pe_c = &id - &pe;
    let pu_c = &id - &pu;
    [
        spectral_norm(&(&pe * &f * &pu)),
        spectral_norm(&(&pe_c * &f * &pu)),
        spectral_norm(&(&pe * &f * &pu_c)),
        spectral_norm(&(&pe_c * &f * &pu_c)),
    ]
}

pub fn random_symmetric(p: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    let a = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// A sparse-plus-low-rank truth small enough for the dense oracle.
pub fn small_truth(p: usize, r: usize, seed: u64) -> MarginalModel {
    let (s, _) = random_sparse_precision(p, 0.4, seed).expect("valid generator arguments");
    let jm = assemble_joint(&s, r, 0.5, seed ^ 0xA11CE).expect("valid joint");
    marginalize(&jm).expect("PD joint")
}
