//! Small dense LU with partial pivoting, used for the local systems of FSAI.

/// Row-major square matrix factored in place.
#[derive(Debug, Clone)]
pub(crate) struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Factors `a` (row-major, `n x n`). Returns `None` when a pivot falls
    /// below `tiny` times the largest entry of `a`.
    pub(crate) fn factor(n: usize, mut a: Vec<f64>, tiny: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if n > 0 && scale == 0.0 {
            return None;
        }
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, a[k * n + k].abs());
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if best <= tiny * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Some(Self { n, lu: a, piv })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        // needs a row swap: zero in the leading position
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::factor(3, a.clone(), 1e-14).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular() {
        assert!(DenseLu::factor(2, vec![1.0, 2.0, 2.0, 4.0], 1e-12).is_none());
        assert!(DenseLu::factor(2, vec![0.0; 4], 1e-12).is_none());
    }
}
