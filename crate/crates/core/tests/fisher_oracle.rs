mod common;

use common::*;
use lvggm::theory::{fisher_inner, fisher_norm_sq, sfi_singular_values, SfiInputs, SubspaceSpec};

fn inputs() -> SfiInputs {
    SfiInputs {
        lambda: 0.1,
        mu: 0.1,
        m_const: 7.0,
        kappa_min: 1.0,
    }
}

#[test]
fn fisher_norm_matches_kronecker_form() {
    for (k, p) in [3usize, 5, 7].into_iter().enumerate() {
        let mm = small_truth(p, 1, 40 + k as u64);
        let a = random_symmetric(p, 1 + k as u64);
        let b = random_symmetric(p, 100 + k as u64);
        let f = dense_fisher(&mm.theta_star);
        let (va, vb) = (vec_of(&a), vec_of(&b));
        let dense_aa = va.dot(&(&f * &va));
        let dense_ab = va.dot(&(&f * &vb));
        assert!((fisher_norm_sq(&mm.theta_star, &a).unwrap() - dense_aa).abs() <= 1e-10 * dense_aa.max(1.0));
        assert!((fisher_inner(&mm.theta_star, &a, &b).unwrap() - dense_ab).abs() <= 1e-10 * dense_ab.abs().max(1.0));
    }
}

#[test]
fn projected_norms_match_kronecker_form() {
    for seed in 0..4u64 {
        let p = 4 + seed as usize % 2;
        let mm = small_truth(p, 1 + seed as usize % 2, seed);
        let subspace = SubspaceSpec::from_marginal(&mm).unwrap();
        let rep = sfi_singular_values(&mm.theta_star, &subspace, inputs()).unwrap();
        let dense = dense_sfi(&mm.theta_star, &subspace);
        for k in 0..4 {
            assert!(
                (rep.values[k] - dense[k]).abs() <= 1e-8 * dense[k].max(1.0),
                "seed {seed} value {k}: {} vs {}",
                rep.values[k],
                dense[k]
            );
        }
    }
}

#[test]
fn projected_norms_bounded_by_full_operator() {
    let mm = small_truth(6, 2, 9);
    let subspace = SubspaceSpec::from_marginal(&mm).unwrap();
    let rep = sfi_singular_values(&mm.theta_star, &subspace, inputs()).unwrap();
    let full = spectral_norm(&dense_fisher(&mm.theta_star));
    assert!(rep.values.iter().all(|v| *v <= full * (1.0 + 1e-10)));
}
