use rayon::prelude::*;

use super::LocalError;
use crate::dense::DenseLu;
use crate::sparse::CsrMatrix;

const LOCAL_TINY: f64 = 1e-14;

/// Factorized sparse approximate inverse `B^{-1} ≈ M_U M_L`.
///
/// `M_L ≈ D^{-1} L^{-1}` is lower triangular and `M_U ≈ U^{-1}` is unit
/// upper triangular, where `B = L D U`.
#[derive(Debug, Clone)]
pub struct FsaiFactor {
    ml: CsrMatrix,
    mu: CsrMatrix,
    fallback_rows: usize,
}

impl FsaiFactor {
    pub fn n(&self) -> usize {
        self.ml.n_rows()
    }

    pub fn ml(&self) -> &CsrMatrix {
        &self.ml
    }

    pub fn mu(&self) -> &CsrMatrix {
        &self.mu
    }

    /// Rows whose local system was singular and were replaced by identity rows.
    pub fn fallback_rows(&self) -> usize {
        self.fallback_rows
    }

    /// `nnz(M_L + M_U)`.
    pub fn nnz_factors(&self) -> usize {
        self.ml.nnz() + self.mu.nnz() - self.n()
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.n()];
        self.ml.spmv_unchecked(x, &mut t);
        self.mu.spmv_unchecked(&t, y);
    }
}

/// Lower-triangular part (diagonal included) of the pattern of
/// `(B + Bᵀ)^power`, one sorted index list per row.
fn lower_pattern(b: &CsrMatrix, power: usize) -> Vec<Vec<usize>> {
    let n = b.n_rows();
    let mut sym: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for (i, j, _) in b.iter() {
        if i != j {
            sym[i].push(j);
            sym[j].push(i);
        }
    }
    for row in &mut sym {
        row.sort_unstable();
        row.dedup();
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<usize> = if power == 1 {
                sym[i].clone()
            } else {
                sym[i].iter().flat_map(|&k| sym[k].iter().copied()).collect()
            };
            row.retain(|&j| j <= i);
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect()
}

/// Rows of the lower factor: for row `i` with pattern `J`, solves
/// `B(J,J)ᵀ m = e_i` so that `(M B)(i, j) = δ_ij` on `J`.
fn lower_inverse_factor(b: &CsrMatrix, pattern: &[Vec<usize>]) -> (Vec<Vec<(usize, f64)>>, usize) {
    let n = b.n_rows();
    let rows: Vec<(Vec<(usize, f64)>, bool)> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![usize::MAX; n],
            |pos, i| {
                let j_set = &pattern[i];
                let m = j_set.len();
                for (k, &j) in j_set.iter().enumerate() {
                    pos[j] = k;
                }
                // dense B(J,J)ᵀ, row-major
                let mut dense = vec![0.0; m * m];
                for (r, &gr) in j_set.iter().enumerate() {
                    let (cols, vals) = b.row(gr);
                    for (&c, &v) in cols.iter().zip(vals) {
                        let k = pos[c];
                        if k != usize::MAX {
                            dense[k * m + r] = v;
                        }
                    }
                }
                for &j in j_set {
                    pos[j] = usize::MAX;
                }
                let mut rhs = vec![0.0; m];
                rhs[m - 1] = 1.0;
                match DenseLu::factor(m, dense, LOCAL_TINY) {
                    Some(lu) => {
                        let sol = lu.solve(&rhs);
                        if sol.iter().all(|v| v.is_finite()) {
                            return (j_set.iter().copied().zip(sol).collect(), false);
                        }
                        (vec![(i, 1.0)], true)
                    }
                    None => (vec![(i, 1.0)], true),
                }
            },
        )
        .collect();
    let fallbacks = rows.iter().filter(|r| r.1).count();
    (rows.into_iter().map(|r| r.0).collect(), fallbacks)
}

/// FSAI with the static pattern of the lower and upper triangular parts of
/// `(B + Bᵀ)^power`, `power ∈ {1, 2}`.
///
/// Rows whose local system is singular fall back to identity rows and are
/// counted in [`FsaiFactor::fallback_rows`].
pub fn fsai_factorize(b: &CsrMatrix, power: usize) -> Result<FsaiFactor, LocalError> {
    if !b.is_square() {
        return Err(LocalError::NotSquare(b.n_rows(), b.n_cols()));
    }
    if !(1..=2).contains(&power) {
        return Err(LocalError::PatternPower(power));
    }
    let n = b.n_rows();
    let pattern = lower_pattern(b, power);
    let (ml_rows, fb_l) = lower_inverse_factor(b, &pattern);
    let ml = CsrMatrix::from_sorted_rows(n, n, ml_rows);

    // same construction on Bᵀ, transposed and normalised to a unit diagonal
    let bt = b.transpose();
    let (mt_rows, fb_u) = lower_inverse_factor(&bt, &pattern);
    let normalised: Vec<Vec<(usize, f64)>> = mt_rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let d = row.iter().find(|e| e.0 == i).map_or(1.0, |e| e.1);
            row.into_iter().map(|(j, v)| (j, if j == i { 1.0 } else { v / d })).collect()
        })
        .collect();
    let mu = CsrMatrix::from_sorted_rows(n, n, normalised).transpose();
    Ok(FsaiFactor {
        ml,
        mu,
        fallback_rows: fb_l + fb_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn diagonal_block_gives_inverse_diagonal() {
        let b = CsrMatrix::from_diagonal(&[2.0, -4.0, 0.5]);
        let f = fsai_factorize(&b, 1).unwrap();
        assert_eq!(f.ml(), &CsrMatrix::from_diagonal(&[0.5, -0.25, 2.0]));
        assert_eq!(f.mu(), &CsrMatrix::identity(3));
        assert_eq!(f.nnz_factors(), 3);
    }

    #[test]
    fn patterns_stay_within_prescription() {
        let b = gallery::random_sparse(40, 0.06, 5);
        for power in [1, 2] {
            let pattern = lower_pattern(&b, power);
            let f = fsai_factorize(&b, power).unwrap();
            for (i, j, _) in f.ml().iter() {
                assert!(pattern[i].binary_search(&j).is_ok());
            }
            for (i, j, _) in f.mu().iter() {
                assert!(pattern[j].binary_search(&i).is_ok());
            }
            assert!((0..40).all(|i| f.mu().get(i, i) == 1.0));
        }
    }

    #[test]
    fn full_pattern_is_exact_inverse() {
        let b = gallery::random_sparse(12, 1.0, 3);
        let f = fsai_factorize(&b, 1).unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64 - 3.0).collect();
        let mut y = vec![0.0; 12];
        f.apply_into(&b.spmv(&x).unwrap(), &mut y);
        let err = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn singular_local_system_falls_back() {
        // row 1 of B(J,J)ᵀ for J = {0, 1} is singular
        let b = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let f = fsai_factorize(&b, 1).unwrap();
        assert!(f.fallback_rows() >= 1);
        assert!(matches!(fsai_factorize(&b, 3), Err(LocalError::PatternPower(3))));
    }
}
