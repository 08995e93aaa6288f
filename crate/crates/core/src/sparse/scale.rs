//! Row/column equilibration applied before reordering.
//!
//! The row pass multiplies row `i` by `1/sqrt(max_j |a_ij|)`; the column
//! pass then divides every column of the row-scaled matrix by its largest
//! magnitude. Every entry of the result is bounded by one and every column
//! attains it.

use thiserror::Error;

use super::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("row {0} has no nonzero entry; the system cannot be scaled")]
    ZeroRow(usize),
    #[error("column {0} has no nonzero entry; the system cannot be scaled")]
    ZeroColumn(usize),
    #[error("non-finite entry in row {0}")]
    NonFinite(usize),
    #[error("vector length {got} does not match dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Diagonal row (`d1`) and column (`d2`) factors: `A_s = diag(d1) A diag(d2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPair {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl ScalingPair {
    pub fn identity(n: usize) -> Self {
        Self {
            d1: vec![1.0; n],
            d2: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.d1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d1.is_empty()
    }
}

/// Scales `A y = b` into `diag(d1) A diag(d2) y = diag(d1) b`; the original
/// solution is recovered with [`unscale_solution`].
pub fn scale_system(a: &CsrMatrix, b: &[f64]) -> Result<(CsrMatrix, Vec<f64>, ScalingPair), ScaleError> {
    if !a.is_square() {
        return Err(ScaleError::NotSquare(a.n_rows(), a.n_cols()));
    }
    let n = a.n_rows();
    if b.len() != n {
        return Err(ScaleError::LengthMismatch {
            expected: n,
            got: b.len(),
        });
    }

    let mut d1 = vec![0.0; n];
    for (i, d) in d1.iter_mut().enumerate() {
        let (_, vals) = a.row(i);
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(ScaleError::NonFinite(i));
        }
        let m = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return Err(ScaleError::ZeroRow(i));
        }
        *d = 1.0 / m.sqrt();
    }

    let mut col_max = vec![0.0f64; n];
    for (i, j, v) in a.iter() {
        col_max[j] = col_max[j].max((d1[i] * v).abs());
    }
    let mut d2 = vec![0.0; n];
    for (j, (d, &m)) in d2.iter_mut().zip(&col_max).enumerate() {
        if m == 0.0 {
            return Err(ScaleError::ZeroColumn(j));
        }
        *d = 1.0 / m;
    }

    // dividing by the column maximum keeps every entry at most 1 exactly
    let col_max = &col_max;
    let scaled = CsrMatrix::from_sorted_rows(
        n,
        n,
        (0..n).map(|i| {
            let (cols, vals) = a.row(i);
            let r = d1[i];
            cols.iter()
                .zip(vals)
                .map(move |(&j, &v)| (j, (r * v) / col_max[j]))
                .collect::<Vec<_>>()
        }),
    );
    let b_scaled = b.iter().zip(&d1).map(|(bi, di)| bi * di).collect();
    Ok((scaled, b_scaled, ScalingPair { d1, d2 }))
}

/// `x = diag(d2) y`.
pub fn unscale_solution(y: &[f64], s: &ScalingPair) -> Result<Vec<f64>, ScaleError> {
    if y.len() != s.d2.len() {
        return Err(ScaleError::LengthMismatch {
            expected: s.d2.len(),
            got: y.len(),
        });
    }
    Ok(y.iter().zip(&s.d2).map(|(a, b)| a * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_scales_to_identity() {
        let a = CsrMatrix::from_diagonal(&[4.0, 4.0, 4.0]);
        let (s, bs, pair) = scale_system(&a, &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(s, CsrMatrix::identity(3));
        // scaled solution is ones/d2, unscaled back to the original ones
        let y: Vec<f64> = bs.clone();
        let x = unscale_solution(&y, &pair).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn entries_bounded_by_one() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 100.0], vec![0.01, 1.0]]);
        let (s, _, _) = scale_system(&a, &[1.0, 1.0]).unwrap();
        assert!(s.max_abs() <= 1.0);
    }

    #[test]
    fn zero_row_and_column_are_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(scale_system(&a, &[1.0, 1.0]).unwrap_err(), ScaleError::ZeroRow(1));
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(scale_system(&a, &[1.0, 1.0]).unwrap_err(), ScaleError::ZeroColumn(1));
    }

    #[test]
    fn unscale_identity_and_doubling() {
        let pair = ScalingPair::identity(3);
        assert_eq!(unscale_solution(&[1.0, 2.0, 3.0], &pair).unwrap(), vec![1.0, 2.0, 3.0]);
        let pair = ScalingPair {
            d1: vec![1.0, 1.0],
            d2: vec![2.0, 2.0],
        };
        assert_eq!(unscale_solution(&[1.0, 1.0], &pair).unwrap(), vec![2.0, 2.0]);
        assert!(unscale_solution(&[1.0], &pair).is_err());
    }

    #[test]
    fn rescaling_a_unit_matrix_is_a_no_op() {
        // unit diagonal and smaller off-diagonals: every row and column max is 1
        let base = crate::gallery::random_sparse(40, 0.1, 9);
        let t: Vec<_> = base
            .iter()
            .map(|(i, j, v)| (i, j, if i == j { 1.0 } else { 0.9 * v / base.max_abs() }))
            .collect();
        let a = CsrMatrix::from_triplets(40, 40, &t).unwrap();
        let (s, _, pair) = scale_system(&a, &vec![1.0; 40]).unwrap();
        for (x, y) in a.values().iter().zip(s.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
        assert!(pair.d1.iter().chain(&pair.d2).all(|d| (d - 1.0).abs() < 1e-12));
    }
}
