//! Square linear operators, the common currency of the solver.

use crate::sparse::CsrMatrix;

/// A square linear map `y = Op x` on `R^n`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes `Op x` into `y`; both slices have length [`Self::dim`].
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "operator matrix must be square");
        self.n_rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        assert_eq!(y.len(), self.n_rows());
        self.spmv_unchecked(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

/// The identity on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}
