//! Local solvers for last-level blocks and Schur complements.
//!
//! Every factor approximates `B^{-1}` and is applied through
//! [`LocalFactor::apply_into`]:
//!
//! - threshold ILU and exact LU by forward and backward substitution;
//! - FSAI as `M_U (M_L x)` with explicit sparse inverse triangles;
//! - AINV as `Z D^{-1} Wᵀ x`.

mod ainv;
mod fsai;
mod ilu;
mod lu;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;

pub use ainv::{ainv_factorize, AinvFactor};
pub use fsai::{fsai_factorize, FsaiFactor};
pub use ilu::{ilu_factorize, IluFactor};
pub use lu::{exact_lu_factorize, PivotedLu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalError {
    #[error("block is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("zero pivot at row {row} persists after diagonal shifts")]
    ZeroPivot { row: usize },
    #[error("matrix is numerically singular at column {col}")]
    Singular { col: usize },
    #[error("biconjugation breakdown at step {step} (pivot {pivot:e})")]
    Breakdown { step: usize, pivot: f64 },
    #[error("FSAI pattern power must be 1 or 2, got {0}")]
    PatternPower(usize),
    #[error("invalid drop tolerance {0}")]
    DropTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalKind {
    Ilu,
    Fsai,
    Ainv,
    Exact,
}

impl LocalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LocalKind::Ilu => "ilu",
            LocalKind::Fsai => "fsai",
            LocalKind::Ainv => "ainv",
            LocalKind::Exact => "exact",
        }
    }
}

impl fmt::Display for LocalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ilu" => Ok(LocalKind::Ilu),
            "fsai" => Ok(LocalKind::Fsai),
            "ainv" => Ok(LocalKind::Ainv),
            "exact" | "lu" => Ok(LocalKind::Exact),
            other => Err(format!("unknown local solver '{other}' (expected ilu, fsai, ainv or exact)")),
        }
    }
}

/// Absolute dropping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropRule {
    /// Entries of magnitude below this are discarded.
    pub droptol: f64,
    /// Optional cap on kept off-diagonal entries per row of each factor.
    pub fill_cap: Option<usize>,
}

impl DropRule {
    pub fn new(droptol: f64) -> Self {
        Self {
            droptol,
            fill_cap: None,
        }
    }

    pub fn exact() -> Self {
        Self::new(0.0)
    }

    pub fn validate(&self) -> Result<(), LocalError> {
        if self.droptol.is_finite() && self.droptol >= 0.0 {
            Ok(())
        } else {
            Err(LocalError::DropTolerance(self.droptol))
        }
    }

    #[inline]
    pub(crate) fn keeps(&self, v: f64) -> bool {
        v != 0.0 && v.abs() >= self.droptol
    }
}

impl Default for DropRule {
    fn default() -> Self {
        Self::exact()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalConfig {
    pub kind: LocalKind,
    pub rule: DropRule,
    /// Power of `B + Bᵀ` giving the FSAI pattern.
    pub fsai_power: usize,
}

impl LocalConfig {
    pub fn new(kind: LocalKind, droptol: f64) -> Self {
        Self {
            kind,
            rule: DropRule::new(droptol),
            fsai_power: 1,
        }
    }

    pub fn exact() -> Self {
        Self::new(LocalKind::Exact, 0.0)
    }
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self::exact()
    }
}

#[derive(Debug, Clone)]
pub enum LocalFactor {
    Ilu(IluFactor),
    Exact(PivotedLu),
    Fsai(FsaiFactor),
    Ainv(AinvFactor),
}

impl LocalFactor {
    pub fn kind(&self) -> LocalKind {
        match self {
            LocalFactor::Ilu(_) => LocalKind::Ilu,
            LocalFactor::Exact(_) => LocalKind::Exact,
            LocalFactor::Fsai(_) => LocalKind::Fsai,
            LocalFactor::Ainv(_) => LocalKind::Ainv,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            LocalFactor::Ilu(f) => f.n(),
            LocalFactor::Exact(f) => f.n(),
            LocalFactor::Fsai(f) => f.n(),
            LocalFactor::Ainv(f) => f.n(),
        }
    }

    /// Stored nonzeros; unit diagonals shared by a factor pair count once.
    pub fn nnz_factors(&self) -> usize {
        match self {
            LocalFactor::Ilu(f) => f.nnz_factors(),
            LocalFactor::Exact(f) => f.nnz_factors(),
            LocalFactor::Fsai(f) => f.nnz_factors(),
            LocalFactor::Ainv(f) => f.nnz_factors(),
        }
    }

    /// Diagonal shifts (ILU) or fallback rows (FSAI) used while factoring.
    pub fn repairs(&self) -> usize {
        match self {
            LocalFactor::Ilu(f) => f.shifts(),
            LocalFactor::Fsai(f) => f.fallback_rows(),
            LocalFactor::Exact(_) | LocalFactor::Ainv(_) => 0,
        }
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        match self {
            LocalFactor::Ilu(f) => f.solve_into(x, y),
            LocalFactor::Exact(f) => f.solve_into(x, y),
            LocalFactor::Fsai(f) => f.apply_into(x, y),
            LocalFactor::Ainv(f) => f.apply_into(x, y),
        }
    }
}

impl LinearOperator for LocalFactor {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        LocalFactor::apply_into(self, x, y)
    }
}

/// Factors `b` with the solver selected in `cfg`.
pub fn factorize(b: &CsrMatrix, cfg: &LocalConfig) -> Result<LocalFactor, LocalError> {
    if !b.is_square() {
        return Err(LocalError::NotSquare(b.n_rows(), b.n_cols()));
    }
    cfg.rule.validate()?;
    Ok(match cfg.kind {
        LocalKind::Ilu => LocalFactor::Ilu(ilu_factorize(b, &cfg.rule)?),
        LocalKind::Exact => LocalFactor::Exact(exact_lu_factorize(b)?),
        LocalKind::Fsai => LocalFactor::Fsai(fsai_factorize(b, cfg.fsai_power)?),
        LocalKind::Ainv => LocalFactor::Ainv(ainv_factorize(b, &cfg.rule)?),
    })
}

/// `f^{-1} x` as a new vector.
pub fn local_apply(f: &LocalFactor, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; f.n()];
    f.apply_into(x, &mut y);
    y
}

/// Keeps the `cap` largest-magnitude entries, restoring index order.
pub(crate) fn cap_entries(entries: &mut Vec<(usize, f64)>, cap: Option<usize>) {
    if let Some(cap) = cap {
        if entries.len() > cap {
            entries.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            entries.truncate(cap);
            entries.sort_by_key(|e| e.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn kind_round_trips_through_strings() {
        for k in [LocalKind::Ilu, LocalKind::Fsai, LocalKind::Ainv, LocalKind::Exact] {
            assert_eq!(k.as_str().parse::<LocalKind>().unwrap(), k);
        }
        assert!("spai".parse::<LocalKind>().is_err());
    }

    #[test]
    fn identity_is_fixed_by_every_kind() {
        let b = CsrMatrix::identity(6);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        for kind in [LocalKind::Ilu, LocalKind::Fsai, LocalKind::Ainv, LocalKind::Exact] {
            let f = factorize(&b, &LocalConfig::new(kind, 0.1)).unwrap();
            assert_eq!(local_apply(&f, &x), x, "{kind}");
            assert_eq!(f.nnz_factors(), 6, "{kind}");
        }
    }

    #[test]
    fn empty_block_is_supported() {
        let b = CsrMatrix::zeros(0, 0);
        for kind in [LocalKind::Ilu, LocalKind::Fsai, LocalKind::Ainv, LocalKind::Exact] {
            let f = factorize(&b, &LocalConfig::new(kind, 0.0)).unwrap();
            assert!(local_apply(&f, &[]).is_empty());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            factorize(&CsrMatrix::zeros(2, 3), &LocalConfig::exact()),
            Err(LocalError::NotSquare(2, 3))
        ));
        let cfg = LocalConfig::new(LocalKind::Ilu, -1.0);
        assert!(matches!(factorize(&CsrMatrix::identity(2), &cfg), Err(LocalError::DropTolerance(_))));
    }

    #[test]
    fn cap_keeps_largest() {
        let mut e = vec![(0, 1.0), (3, -5.0), (5, 2.0), (7, 0.5)];
        cap_entries(&mut e, Some(2));
        assert_eq!(e, vec![(3, -5.0), (5, 2.0)]);
    }

    #[test]
    fn all_kinds_agree_at_full_accuracy() {
        // dominant enough that the full FSAI pattern is the exact inverse pattern
        let b = gallery::random_sparse(15, 1.0, 9);
        let x: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let reference = local_apply(&factorize(&b, &LocalConfig::exact()).unwrap(), &x);
        for kind in [LocalKind::Ilu, LocalKind::Ainv, LocalKind::Fsai] {
            let f = factorize(&b, &LocalConfig::new(kind, 0.0)).unwrap();
            let y = local_apply(&f, &x);
            let err = y.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{kind}: {err}");
        }
    }
}
