use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{cap_entries, DropRule, LocalError};
use crate::sparse::CsrMatrix;

const MAX_SHIFTS: usize = 3;
const TINY_PIVOT: f64 = 1e-13;

/// Threshold incomplete LU, `B ≈ L U` with `L` unit lower triangular
/// (diagonal stored explicitly) and `U` upper triangular.
#[derive(Debug, Clone)]
pub struct IluFactor {
    l: CsrMatrix,
    u: CsrMatrix,
    shifts: usize,
}

impl IluFactor {
    pub fn n(&self) -> usize {
        self.l.n_rows()
    }

    pub fn l(&self) -> &CsrMatrix {
        &self.l
    }

    pub fn u(&self) -> &CsrMatrix {
        &self.u
    }

    /// Number of diagonal shifts applied to rescue tiny pivots.
    pub fn shifts(&self) -> usize {
        self.shifts
    }

    /// `nnz(L + U)`.
    pub fn nnz_factors(&self) -> usize {
        self.l.nnz() + self.u.nnz() - self.n()
    }

    /// `y = U^{-1} L^{-1} x`.
    pub fn solve_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        y.copy_from_slice(x);
        for i in 0..n {
            let (cols, vals) = self.l.row(i);
            let mut s = y[i];
            // last entry is the unit diagonal
            for (&j, &v) in cols[..cols.len() - 1].iter().zip(vals) {
                s -= v * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.u.row(i);
            let mut s = y[i];
            for (&j, &v) in cols[1..].iter().zip(&vals[1..]) {
                s -= v * y[j];
            }
            y[i] = s / vals[0];
        }
    }
}

/// Row-wise (IKJ) threshold ILU with absolute dropping.
///
/// Multipliers and updated entries below `rule.droptol` are discarded; the
/// diagonal is always kept. A pivot below `1e-13 ‖row‖∞` is shifted by
/// `σ = max(droptol, 1e-8) ‖row‖∞` in the direction of the original
/// diagonal, escalating σ tenfold up to three times.
pub fn ilu_factorize(b: &CsrMatrix, rule: &DropRule) -> Result<IluFactor, LocalError> {
    if !b.is_square() {
        return Err(LocalError::NotSquare(b.n_rows(), b.n_cols()));
    }
    let n = b.n_rows();
    let mut w = vec![0.0; n];
    let mut in_row = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut l_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut u_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut shifts = 0;

    for i in 0..n {
        let (cols, vals) = b.row(i);
        let row_norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let orig_diag = b.get(i, i);
        for (&j, &v) in cols.iter().zip(vals) {
            w[j] = v;
            in_row[j] = true;
            touched.push(j);
            if j < i {
                heap.push(Reverse(j));
            }
        }
        if !in_row[i] {
            in_row[i] = true;
            touched.push(i);
        }

        let mut lrow: Vec<(usize, f64)> = Vec::new();
        while let Some(Reverse(k)) = heap.pop() {
            let ukk = u_rows[k][0].1;
            let m = w[k] / ukk;
            w[k] = 0.0;
            if !rule.keeps(m) {
                continue;
            }
            lrow.push((k, m));
            for &(j, ukj) in &u_rows[k][1..] {
                if !in_row[j] {
                    in_row[j] = true;
                    touched.push(j);
                    if j < i {
                        heap.push(Reverse(j));
                    }
                }
                w[j] -= m * ukj;
            }
        }

        let mut pivot = w[i];
        if pivot.abs() <= TINY_PIVOT * row_norm || pivot == 0.0 {
            let sign = if orig_diag < 0.0 { -1.0 } else { 1.0 };
            let mut sigma = rule.droptol.max(1e-8) * row_norm;
            let mut rescued = false;
            for _ in 0..MAX_SHIFTS {
                shifts += 1;
                pivot += sign * sigma;
                if pivot.abs() > TINY_PIVOT * row_norm && pivot != 0.0 {
                    rescued = true;
                    break;
                }
                sigma *= 10.0;
            }
            if !rescued {
                return Err(LocalError::ZeroPivot { row: i });
            }
        }

        let mut urow: Vec<(usize, f64)> = touched
            .iter()
            .filter(|&&j| j > i && rule.keeps(w[j]))
            .map(|&j| (j, w[j]))
            .collect();
        urow.sort_unstable_by_key(|e| e.0);
        cap_entries(&mut urow, rule.fill_cap);
        urow.insert(0, (i, pivot));
        cap_entries(&mut lrow, rule.fill_cap);
        lrow.push((i, 1.0));

        for &j in &touched {
            w[j] = 0.0;
            in_row[j] = false;
        }
        touched.clear();
        l_rows.push(lrow);
        u_rows.push(urow);
    }

    Ok(IluFactor {
        l: CsrMatrix::from_sorted_rows(n, n, l_rows),
        u: CsrMatrix::from_sorted_rows(n, n, u_rows),
        shifts,
    })
}
