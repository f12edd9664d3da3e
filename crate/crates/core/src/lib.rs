//! Latent-variable Gaussian graphical models.
//!
//! The observed marginal precision of a Gaussian graphical model with a few
//! hidden variables decomposes as `Θ = S + L`: a sparse conditional precision
//! `S` plus a negative-semidefinite low-rank term `L` coming from the latent
//! block. This crate provides
//!
//! - [`model`]: ground-truth joint models, exact marginalization and sampling,
//! - [`estimation`]: sample covariance, matrix norms, effective rank and the
//!   proximal primitives,
//! - [`solver`]: a three-block ADMM for the `ℓ₁ + nuclear` penalized
//!   likelihood and a graphical-lasso baseline,
//! - [`theory`]: Fisher norms, subspace projectors, incoherence diagnostics,
//!   regularization schedules and the Frobenius error bound,
//! - [`experiments`]: Monte-Carlo harnesses for effective rank and error
//!   scaling,
//! - [`io`]: matrix CSV, flat configs, run manifests and SVG scatter plots.

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod model;
pub mod rng;
pub mod solver;
pub mod theory;

pub use error::{LvggmError, Result};
pub use estimation::{
    effective_rank, eigh, matrix_norm, sample_covariance, soft_threshold, CovarianceEstimate,
    Eigh, NormKind,
};
pub use model::{
    assemble_joint, chain_precision, energy_ratio, marginalize, random_sparse_precision, sample,
    scale_to_energy_ratio, JointModel, MarginalModel, SampleMatrix, Support,
};
pub use solver::{glasso, lvggm_admm, objective, Estimate, SolverConfig};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
