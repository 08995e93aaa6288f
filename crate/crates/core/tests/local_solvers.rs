mod common;

use ames_core::gallery;
use ames_core::local::{
    ainv_factorize, exact_lu_factorize, factorize, fsai_factorize, ilu_factorize, local_apply, DropRule, LocalConfig,
    LocalFactor, LocalKind,
};
use ames_core::CsrMatrix;
use common::{dense, random_vec, rel_err};

#[test]
fn ilu_without_dropping_reproduces_block() {
    let b = gallery::random_sparse(30, 0.12, 17);
    let f = ilu_factorize(&b, &DropRule::exact()).unwrap();
    let lu = dense(f.l()) * dense(f.u());
    let err = (lu - dense(&b)).abs().max();
    assert!(err <= 1e-12 * b.norm_inf(), "{err}");
}

#[test]
fn ilu_apply_inverts_product_exactly_at_zero_droptol() {
    let b = gallery::random_sparse(60, 0.08, 4);
    let f = factorize(&b, &LocalConfig::new(LocalKind::Ilu, 0.0)).unwrap();
    let x = random_vec(60, 1);
    assert!(rel_err(&local_apply(&f, &b.spmv(&x).unwrap()), &x) <= 1e-10);
}

#[test]
fn ainv_without_dropping_matches_dense_inverse() {
    let b = gallery::random_sparse(20, 0.2, 33);
    let f = ainv_factorize(&b, &DropRule::exact()).unwrap();
    let z = dense(&f.z().to_csr());
    let w = dense(&f.w().to_csr());
    let dinv = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(20, f.d().iter().map(|d| 1.0 / d)));
    let approx = z * dinv * w.transpose();
    let inv = dense(&b).try_inverse().unwrap();
    let err = (approx - inv).abs().max();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn exact_lu_residual_on_random_block() {
    let b = gallery::random_directed(100, 0.04, 8);
    let f = exact_lu_factorize(&b).unwrap();
    let y = random_vec(100, 2);
    let mut x = vec![0.0; 100];
    f.solve_into(&y, &mut x);
    assert!(rel_err(&b.spmv(&x).unwrap(), &y) <= 1e-12);
}

#[test]
fn exact_kinds_match_dense_inverse_up_to_200() {
    for (k, n) in [20usize, 75, 140, 200].into_iter().enumerate() {
        let b = gallery::random_sparse(n, 6.0 / n as f64, 100 + k as u64);
        let x = random_vec(n, k as u64);
        let reference = (dense(&b).try_inverse().unwrap() * nalgebra::DVector::from_column_slice(&x))
            .as_slice()
            .to_vec();
        for kind in [LocalKind::Exact, LocalKind::Ilu, LocalKind::Ainv] {
            let f = factorize(&b, &LocalConfig::new(kind, 0.0)).unwrap();
            let err = rel_err(&local_apply(&f, &x), &reference);
            assert!(err <= 1e-8, "n={n} {kind}: {err}");
        }
    }
}

#[test]
fn fsai_preconditioning_reduces_condition_number() {
    // SPD tridiagonal: 1D Laplacian with a varying diagonal
    let n = 10;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0 + 0.3 * i as f64));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    let b = CsrMatrix::from_triplets(n, n, &t).unwrap();
    let f = fsai_factorize(&b, 1).unwrap();
    let ml = dense(f.ml());
    let pre = &ml * dense(&b) * ml.transpose();
    let cond = |m: nalgebra::DMatrix<f64>| {
        let e = m.symmetric_eigen().eigenvalues;
        e.max() / e.min()
    };
    let (c0, c1) = (cond(dense(&b)), cond(pre));
    assert!(c1 < c0, "{c1} >= {c0}");
}

#[test]
fn all_kinds_converge_to_the_same_vector_at_full_accuracy() {
    let b = gallery::random_sparse(15, 1.0, 71);
    let x = random_vec(15, 7);
    let mut outs = Vec::new();
    for kind in [LocalKind::Exact, LocalKind::Ilu, LocalKind::Ainv, LocalKind::Fsai] {
        let f = factorize(&b, &LocalConfig::new(kind, 0.0)).unwrap();
        outs.push(local_apply(&f, &x));
    }
    for o in &outs[1..] {
        assert!(rel_err(o, &outs[0]) <= 1e-6);
    }
}

#[test]
fn density_shrinks_as_droptol_grows() {
    let b = gallery::random_grid(15, 20, 2, 5);
    let mut prev = usize::MAX;
    for tol in [0.0, 0.001, 0.01, 0.1] {
        let f = factorize(&b, &LocalConfig::new(LocalKind::Ilu, tol)).unwrap();
        assert!(f.nnz_factors() <= prev, "tol {tol}");
        prev = f.nnz_factors();
    }
}

#[test]
fn factor_counts_are_exact() {
    let b = gallery::random_sparse(25, 0.1, 3);
    for kind in [LocalKind::Exact, LocalKind::Ilu, LocalKind::Ainv, LocalKind::Fsai] {
        let f = factorize(&b, &LocalConfig::new(kind, 0.01)).unwrap();
        let recount = match &f {
            LocalFactor::Ilu(g) => g.l().nnz() + g.u().nnz() - 25,
            LocalFactor::Exact(g) => g.nnz_factors(),
            LocalFactor::Fsai(g) => g.ml().nnz() + g.mu().nnz() - 25,
            LocalFactor::Ainv(g) => g.z().nnz() + g.w().nnz() - 25,
        };
        assert_eq!(f.nnz_factors(), recount);
    }
}
