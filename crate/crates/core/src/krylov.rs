//! Restarted GMRES with modified Gram–Schmidt Arnoldi and Givens rotations.

use std::time::Instant;

use thiserror::Error;

use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error("dimension mismatch: operator has {expected} rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in the Krylov basis at iteration {0}")]
    NonFinite(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solves `M A x = M b`.
    Left,
    /// Solves `A M y = b`, `x = M y`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    /// Budget of products with `A`.
    pub max_matvecs: usize,
    /// Target for `‖b − A x‖ / ‖b − A x0‖`.
    pub rtol: f64,
    pub side: Side,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 500,
            max_matvecs: 5000,
            rtol: 1e-12,
            side: Side::Right,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<(), KrylovError> {
        if self.restart == 0 {
            return Err(KrylovError::Config("restart must be at least 1".into()));
        }
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return Err(KrylovError::Config(format!("rtol must be positive, got {}", self.rtol)));
        }
        Ok(())
    }
}

/// Wall-clock seconds of the preorder, factorization and solve phases.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub t_p: f64,
    pub t_f: f64,
    pub t_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Arnoldi steps over all cycles.
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual of the returned iterate.
    pub final_relative_residual: f64,
    /// Relative residual estimates; each cycle starts with the true value.
    pub residual_history: Vec<f64>,
    /// Index into `residual_history` where each cycle starts.
    pub cycle_starts: Vec<usize>,
    pub matvecs: usize,
    pub precond_applies: usize,
    pub timings: Timings,
    pub density_ratio: Option<f64>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `b = A e` with `e` the vector of ones.
pub fn make_rhs(a: &CsrMatrix) -> Vec<f64> {
    let mut b = vec![0.0; a.n_rows()];
    a.spmv_unchecked(&vec![1.0; a.n_cols()], &mut b);
    b
}

struct Counter<'a> {
    a: &'a dyn LinearOperator,
    m: Option<&'a dyn LinearOperator>,
    matvecs: usize,
    applies: usize,
}

impl Counter<'_> {
    fn a(&mut self, x: &[f64], y: &mut [f64]) {
        self.matvecs += 1;
        self.a.apply_into(x, y);
    }

    fn m(&mut self, x: &[f64], y: &mut [f64]) {
        match self.m {
            Some(m) => {
                self.applies += 1;
                m.apply_into(x, y);
            }
            None => y.copy_from_slice(x),
        }
    }

    fn residual(&mut self, b: &[f64], x: &[f64], r: &mut [f64]) {
        self.a(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    }
}

/// Restarted GMRES from `x0` (zero when `None`).
///
/// Iteration stops on the cheap least-squares estimate; convergence is only
/// reported once the true residual `‖b − A x‖ / ‖b − A x0‖` of the updated
/// iterate meets `rtol`, otherwise a new cycle starts.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    m: Option<&dyn LinearOperator>,
    cfg: &GmresConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), KrylovError> {
    cfg.validate()?;
    let start = Instant::now();
    let n = a.dim();
    if b.len() != n {
        return Err(KrylovError::DimensionMismatch { expected: n, got: b.len() });
    }
    if let Some(mm) = m {
        if mm.dim() != n {
            return Err(KrylovError::DimensionMismatch { expected: n, got: mm.dim() });
        }
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => return Err(KrylovError::DimensionMismatch { expected: n, got: x0.len() }),
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut ops = Counter {
        a,
        m,
        matvecs: 0,
        applies: 0,
    };
    let mut r = vec![0.0; n];
    if x.iter().all(|&v| v == 0.0) {
        r.copy_from_slice(b);
    } else {
        ops.residual(b, &x, &mut r);
    }
    let r0 = norm(&r);
    let mut history = vec![1.0];
    let mut cycle_starts = vec![0];
    let mut iterations = 0;
    let finish = |x: Vec<f64>, ops: &Counter, its, conv, rel, history, cycle_starts| {
        let report = SolveReport {
            iterations: its,
            converged: conv,
            final_relative_residual: rel,
            residual_history: history,
            cycle_starts,
            matvecs: ops.matvecs,
            precond_applies: ops.applies,
            timings: Timings {
                t_s: start.elapsed().as_secs_f64(),
                ..Timings::default()
            },
            density_ratio: None,
        };
        Ok((x, report))
    };
    if r0 == 0.0 {
        return finish(x, &ops, 0, true, 0.0, history, cycle_starts);
    }
    if !r0.is_finite() {
        return Err(KrylovError::NonFinite(0));
    }

    let k = cfg.restart.min(n.max(1));
    let mut true_rel = 1.0;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut h = vec![vec![0.0; k]; k + 1];
    let mut cs = vec![0.0; k];
    let mut sn = vec![0.0; k];
    let mut g = vec![0.0; k + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        // cycle start: r holds the true residual of x
        let (beta, est_scale) = match cfg.side {
            Side::Right => (norm(&r), 1.0 / r0),
            Side::Left => {
                ops.m(&r, &mut z);
                let beta = norm(&z);
                (beta, if beta > 0.0 { true_rel / beta } else { 0.0 })
            }
        };
        if beta == 0.0 || !beta.is_finite() {
            if !beta.is_finite() {
                return Err(KrylovError::NonFinite(iterations));
            }
            // preconditioned residual vanished without convergence
            return finish(x, &ops, iterations, true_rel <= cfg.rtol, true_rel, history, cycle_starts);
        }
        v.clear();
        let first: Vec<f64> = match cfg.side {
            Side::Right => r.iter().map(|ri| ri / beta).collect(),
            Side::Left => z.iter().map(|zi| zi / beta).collect(),
        };
        v.push(first);
        g.fill(0.0);
        g[0] = beta;
        let mut j = 0;
        while j < k && ops.matvecs < cfg.max_matvecs {
            match cfg.side {
                Side::Right => {
                    ops.m(&v[j], &mut z);
                    ops.a(&z, &mut w);
                }
                Side::Left => {
                    ops.a(&v[j], &mut z);
                    ops.m(&z, &mut w);
                }
            }
            let w_norm0 = norm(&w);
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][j] = hij;
                for (wl, vl) in w.iter_mut().zip(vi) {
                    *wl -= hij * vl;
                }
            }
            let hnext = norm(&w);
            if !hnext.is_finite() || h.iter().take(j + 1).any(|row| !row[j].is_finite()) {
                return Err(KrylovError::NonFinite(iterations + 1));
            }
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (hjj, hj1) = (h[j][j], h[j + 1][j]);
            let rho = hjj.hypot(hj1);
            if rho == 0.0 {
                // A M is singular on the Krylov space: no progress possible
                break;
            }
            cs[j] = hjj / rho;
            sn[j] = hj1 / rho;
            h[j][j] = rho;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            iterations += 1;
            j += 1;
            let est = g[j].abs() * est_scale;
            history.push(est);
            let happy = hnext <= 1e-14 * w_norm0.max(f64::MIN_POSITIVE);
            if est <= cfg.rtol || happy {
                break;
            }
            v.push(w.iter().map(|wl| wl / hnext).collect());
        }

        // y = H^{-1} g on the leading j x j triangle
        let mut y = vec![0.0; j];
        for i in (0..j).rev() {
            let mut s = g[i];
            for l in i + 1..j {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (vi, yi) in v.iter().zip(&y) {
            for (u, vl) in update.iter_mut().zip(vi) {
                *u += yi * vl;
            }
        }
        match cfg.side {
            Side::Right => {
                ops.m(&update, &mut z);
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += zi;
                }
            }
            Side::Left => {
                for (xi, ui) in x.iter_mut().zip(&update) {
                    *xi += ui;
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(KrylovError::NonFinite(iterations));
        }
        ops.residual(b, &x, &mut r);
        true_rel = norm(&r) / r0;
        if true_rel <= cfg.rtol {
            return finish(x, &ops, iterations, true, true_rel, history, cycle_starts);
        }
        if ops.matvecs >= cfg.max_matvecs || j == 0 {
            return finish(x, &ops, iterations, false, true_rel, history, cycle_starts);
        }
        cycle_starts.push(history.len());
        history.push(true_rel);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{FnOperator, Identity};

    fn assert_monotone_cycles(r: &SolveReport) {
        let mut bounds = r.cycle_starts.clone();
        bounds.push(r.residual_history.len());
        for w in bounds.windows(2) {
            let seg = &r.residual_history[w[0]..w[1]];
            for p in seg.windows(2) {
                assert!(p[1] <= p[0] * (1.0 + 1e-10), "{:?}", seg);
            }
        }
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = CsrMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 + 1.0).collect();
        let (x, rep) = gmres(&a, &b, None, &GmresConfig::default(), None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_converges_within_dimension() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let a = CsrMatrix::from_diagonal(&d);
        let b = make_rhs(&a);
        for side in [Side::Right, Side::Left] {
            let cfg = GmresConfig {
                restart: 10,
                side,
                ..GmresConfig::default()
            };
            let (x, rep) = gmres(&a, &b, None, &cfg, None).unwrap();
            assert!(rep.converged, "{side:?}");
            assert!(rep.iterations <= 10);
            assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
            assert_monotone_cycles(&rep);
        }
    }

    #[test]
    fn exact_preconditioner_converges_immediately() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let inv = FnOperator::new(2, |x: &[f64], y: &mut [f64]| {
            let det = 10.0;
            y[0] = (3.0 * x[0] - x[1]) / det;
            y[1] = (-2.0 * x[0] + 4.0 * x[1]) / det;
        });
        for side in [Side::Right, Side::Left] {
            let cfg = GmresConfig { side, ..GmresConfig::default() };
            let (_, rep) = gmres(&a, &[5.0, 5.0], Some(&inv), &cfg, None).unwrap();
            assert!(rep.converged && rep.iterations <= 2, "{side:?} {rep:?}");
        }
    }

    #[test]
    fn restarts_record_cycles_and_respect_budget() {
        let a = crate::gallery::convection_diffusion2d(12, 20.0);
        let b = make_rhs(&a);
        let cfg = GmresConfig {
            restart: 5,
            max_matvecs: 60,
            ..GmresConfig::default()
        };
        let (_, rep) = gmres(&a, &b, None, &cfg, None).unwrap();
        assert!(!rep.converged);
        assert!(rep.cycle_starts.len() > 1);
        assert!(rep.matvecs <= 60 + 13);
        assert_monotone_cycles(&rep);
        assert!((rep.residual_history[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_and_bad_input() {
        let a = CsrMatrix::identity(3);
        let (x, rep) = gmres(&a, &[0.0; 3], None, &GmresConfig::default(), None).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert!(rep.converged && rep.iterations == 0);
        assert!(matches!(
            gmres(&a, &[1.0; 2], None, &GmresConfig::default(), None),
            Err(KrylovError::DimensionMismatch { .. })
        ));
        assert!(gmres(&Identity(3), &[1.0; 3], None, &GmresConfig { restart: 0, ..GmresConfig::default() }, None).is_err());
    }

    #[test]
    fn nonzero_initial_guess_is_used() {
        let a = CsrMatrix::from_diagonal(&[2.0, 4.0]);
        let (x, rep) = gmres(&a, &[2.0, 4.0], None, &GmresConfig::default(), Some(&[1.0, 1.0])).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![1.0, 1.0]);
    }
}
