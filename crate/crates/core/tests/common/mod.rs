#![allow(dead_code)]

use ames_core::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n_rows(), a.n_cols());
    for (i, j, v) in a.iter() {
        m[(i, j)] = v;
    }
    m
}

pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    dense(a)
        .lu()
        .solve(&DVector::from_column_slice(b))
        .expect("oracle matrix is nonsingular")
        .as_slice()
        .to_vec()
}

pub fn rel_err(x: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.spmv(x).unwrap();
    rel_err(&ax, b)
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
