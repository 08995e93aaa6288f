use super::LocalError;
use crate::sparse::{CscMatrix, CsrMatrix};

const SINGULAR: f64 = 1e-14;

/// Sparse LU with partial pivoting, `P B = L U`.
///
/// `L` is unit lower triangular (diagonal implicit), `U` upper triangular;
/// both are column-compressed in pivoted row numbering.
#[derive(Debug, Clone)]
pub struct PivotedLu {
    l: CscMatrix,
    u: CscMatrix,
    /// `perm[k]` is the original row chosen as the k-th pivot.
    perm: Vec<usize>,
}

impl PivotedLu {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// `nnz(L + U)` with the implicit unit diagonal not counted.
    pub fn nnz_factors(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }

    pub fn row_permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Solves `B y = x`.
    pub fn solve_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for (k, &r) in self.perm.iter().enumerate() {
            y[k] = x[r];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                let (rows, vals) = self.l.col(j);
                for (&i, &v) in rows.iter().zip(vals) {
                    y[i] -= v * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let (rows, vals) = self.u.col(j);
            // diagonal is the last entry of the column
            let yj = y[j] / vals[vals.len() - 1];
            y[j] = yj;
            if yj != 0.0 {
                for (&i, &v) in rows[..rows.len() - 1].iter().zip(vals) {
                    y[i] -= v * yj;
                }
            }
        }
    }
}

/// Left-looking LU with partial pivoting on a dense work column.
pub fn exact_lu_factorize(b: &CsrMatrix) -> Result<PivotedLu, LocalError> {
    if !b.is_square() {
        return Err(LocalError::NotSquare(b.n_rows(), b.n_cols()));
    }
    let n = b.n_rows();
    let bc = b.to_csc();
    let scale = b.max_abs();
    // pinv[r] = pivot step of original row r, or usize::MAX while unpivoted
    let mut pinv = vec![usize::MAX; n];
    let mut perm = Vec::with_capacity(n);
    // L columns indexed by original rows until the end
    let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut x = vec![0.0; n];
    let mut mark = vec![false; n];
    let mut nz: Vec<usize> = Vec::new();

    for j in 0..n {
        let (rows, vals) = bc.col(j);
        for (&r, &v) in rows.iter().zip(vals) {
            x[r] = v;
            mark[r] = true;
            nz.push(r);
        }
        let mut ucol: Vec<(usize, f64)> = Vec::new();
        for (k, lcol) in l_cols.iter().enumerate() {
            let xk = x[perm[k]];
            if xk == 0.0 {
                continue;
            }
            ucol.push((k, xk));
            for &(r, v) in lcol {
                if !mark[r] {
                    mark[r] = true;
                    nz.push(r);
                }
                x[r] -= v * xk;
            }
        }
        let mut piv_row = usize::MAX;
        let mut best = 0.0f64;
        for &r in &nz {
            if pinv[r] == usize::MAX && x[r].abs() > best {
                best = x[r].abs();
                piv_row = r;
            }
        }
        if piv_row == usize::MAX || best <= SINGULAR * scale {
            return Err(LocalError::Singular { col: j });
        }
        let pivot = x[piv_row];
        ucol.push((j, pivot));
        pinv[piv_row] = j;
        perm.push(piv_row);
        let mut lcol: Vec<(usize, f64)> = nz
            .iter()
            .filter(|&&r| pinv[r] == usize::MAX && x[r] != 0.0)
            .map(|&r| (r, x[r] / pivot))
            .collect();
        lcol.sort_unstable_by_key(|e| e.0);
        for &r in &nz {
            x[r] = 0.0;
            mark[r] = false;
        }
        nz.clear();
        l_cols.push(lcol);
        u_cols.push(ucol);
    }

    let l_cols: Vec<Vec<(usize, f64)>> = l_cols
        .into_iter()
        .map(|c| {
            let mut c: Vec<(usize, f64)> = c.into_iter().map(|(r, v)| (pinv[r], v)).collect();
            c.sort_unstable_by_key(|e| e.0);
            c
        })
        .collect();
    Ok(PivotedLu {
        l: CscMatrix::from_sorted_cols(n, n, l_cols),
        u: CscMatrix::from_sorted_cols(n, n, u_cols),
        perm,
    })
}
