use super::{cap_entries, DropRule, LocalError};
use crate::sparse::{CscMatrix, CsrMatrix};

const BREAKDOWN: f64 = 1e-14;

/// Approximate inverse `B^{-1} ≈ Z D^{-1} Wᵀ` from two-sided biconjugation.
///
/// `Z` and `W` are unit upper triangular, stored by columns.
#[derive(Debug, Clone)]
pub struct AinvFactor {
    z: CscMatrix,
    w: CscMatrix,
    d: Vec<f64>,
}

impl AinvFactor {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn z(&self) -> &CscMatrix {
        &self.z
    }

    pub fn w(&self) -> &CscMatrix {
        &self.w
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// `nnz(Z + W)`.
    pub fn nnz_factors(&self) -> usize {
        self.z.nnz() + self.w.nnz() - self.n()
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.n()];
        self.w.spmv_transpose_unchecked(x, &mut t);
        for (ti, di) in t.iter_mut().zip(&self.d) {
            *ti /= di;
        }
        y.fill(0.0);
        self.z.spmv_add_unchecked(1.0, &t, y);
    }
}

/// `a - alpha * b` on sorted sparse vectors, dropping entries below the
/// rule's threshold except at `keep`.
fn axpy_drop(a: &[(usize, f64)], alpha: f64, b: &[(usize, f64)], rule: &DropRule, keep: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut p, mut q) = (0, 0);
    while p < a.len() || q < b.len() {
        let (idx, v) = if q == b.len() || (p < a.len() && a[p].0 < b[q].0) {
            p += 1;
            a[p - 1]
        } else if p == a.len() || b[q].0 < a[p].0 {
            q += 1;
            (b[q - 1].0, -alpha * b[q - 1].1)
        } else {
            p += 1;
            q += 1;
            (a[p - 1].0, a[p - 1].1 - alpha * b[q - 1].1)
        };
        if idx == keep || rule.keeps(v) {
            out.push((idx, v));
        }
    }
    out
}

fn sparse_dot(dense: &[f64], v: &[(usize, f64)]) -> f64 {
    v.iter().map(|&(k, x)| dense[k] * x).sum()
}

/// Right-looking biconjugation: at step `i` the pivots `p_j = a_iᵀ z_j`,
/// `q_j = c_iᵀ w_j` (`a_i`, `c_i` the i-th row and column of `B`) update all
/// later columns of `Z` and `W`; updated columns are dropped against
/// `rule` immediately.
pub fn ainv_factorize(b: &CsrMatrix, rule: &DropRule) -> Result<AinvFactor, LocalError> {
    if !b.is_square() {
        return Err(LocalError::NotSquare(b.n_rows(), b.n_cols()));
    }
    let n = b.n_rows();
    let bt = b.transpose();
    let scale = b.max_abs();
    let mut z: Vec<Vec<(usize, f64)>> = (0..n).map(|j| vec![(j, 1.0)]).collect();
    let mut w = z.clone();
    let mut d = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut col = vec![0.0; n];

    for i in 0..n {
        let (rc, rv) = b.row(i);
        let (cc, cv) = bt.row(i);
        for (&k, &v) in rc.iter().zip(rv) {
            row[k] = v;
        }
        for (&k, &v) in cc.iter().zip(cv) {
            col[k] = v;
        }
        let pi = sparse_dot(&row, &z[i]);
        let qi = sparse_dot(&col, &w[i]);
        if !(pi.abs() > BREAKDOWN * scale && qi.abs() > BREAKDOWN * scale) {
            return Err(LocalError::Breakdown {
                step: i,
                pivot: if pi.abs() < qi.abs() { pi } else { qi },
            });
        }
        d[i] = pi;
        let (zi, wi) = (z[i].clone(), w[i].clone());
        for j in i + 1..n {
            let pj = sparse_dot(&row, &z[j]);
            if pj != 0.0 {
                z[j] = axpy_drop(&z[j], pj / pi, &zi, rule, j);
            }
            let qj = sparse_dot(&col, &w[j]);
            if qj != 0.0 {
                w[j] = axpy_drop(&w[j], qj / qi, &wi, rule, j);
            }
        }
        for &k in rc {
            row[k] = 0.0;
        }
        for &k in cc {
            col[k] = 0.0;
        }
    }
    if rule.fill_cap.is_some() {
        for (j, v) in z.iter_mut().chain(w.iter_mut()).enumerate() {
            let j = j % n.max(1);
            let diag = v.iter().position(|e| e.0 == j).map(|p| v.remove(p));
            cap_entries(v, rule.fill_cap);
            if let Some(e) = diag {
                v.push(e);
            }
        }
    }
    Ok(AinvFactor {
        z: CscMatrix::from_sorted_cols(n, n, z),
        w: CscMatrix::from_sorted_cols(n, n, w),
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn identity_gives_identity_factors() {
        let f = ainv_factorize(&CsrMatrix::identity(4), &DropRule::new(0.1)).unwrap();
        assert_eq!(f.z().to_csr(), CsrMatrix::identity(4));
        assert_eq!(f.w().to_csr(), CsrMatrix::identity(4));
        assert_eq!(f.d(), &[1.0; 4]);
    }

    #[test]
    fn biconjugates_exactly_without_dropping() {
        let b = gallery::random_sparse(20, 0.2, 6);
        let f = ainv_factorize(&b, &DropRule::exact()).unwrap();
        // Wᵀ B Z = D
        let (z, w, bd) = (f.z().to_csr().to_dense(), f.w().to_csr().to_dense(), b.to_dense());
        for r in 0..20 {
            for c in 0..20 {
                let v: f64 = (0..20)
                    .flat_map(|k| (0..20).map(move |l| (k, l)))
                    .map(|(k, l)| w[k][r] * bd[k][l] * z[l][c])
                    .sum();
                let expect = if r == c { f.d()[r] } else { 0.0 };
                assert!((v - expect).abs() < 1e-10, "({r},{c}) {v}");
            }
        }
        for (i, j, _) in f.z().to_csr().iter().chain(f.w().to_csr().iter()) {
            assert!(i <= j);
        }
    }

    #[test]
    fn zero_leading_pivot_is_breakdown() {
        let b = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(
            ainv_factorize(&b, &DropRule::exact()),
            Err(LocalError::Breakdown { step: 0, .. })
        ));
    }

    #[test]
    fn dropping_reduces_storage() {
        let b = gallery::random_sparse(60, 0.1, 2);
        let full = ainv_factorize(&b, &DropRule::exact()).unwrap();
        let sparse = ainv_factorize(&b, &DropRule::new(0.05)).unwrap();
        assert!(sparse.nnz_factors() < full.nnz_factors());
    }
}
