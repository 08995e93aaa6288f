//! Algebraic recursive multilevel inverse-factorization preconditioning for
//! general sparse linear systems.
//!
//! The pipeline mirrors the phases of the method:
//!
//! 1. [`sparse::scale_system`] equilibrates rows and columns;
//! 2. [`partition`] computes a block-bordered ordering from the graph of
//!    the matrix;
//! 3. [`mltree::build_tree`] applies that ordering recursively and stores the
//!    border and corner blocks of every level;
//! 4. [`precond::factorize`] factors the last-level blocks with a
//!    [`local`] solver, assembles the Schur complements and factors them in
//!    turn;
//! 5. [`krylov::gmres`] solves the system with the preconditioner.
//!
//! [`overlap`] optionally enlarges the first-level subdomains before the
//! analysis phase and restricts the solution afterwards.

#![allow(clippy::needless_range_loop)]

pub(crate) mod dense;
pub mod gallery;
pub mod krylov;
pub mod local;
pub mod mltree;
pub mod operator;
pub mod overlap;
pub mod partition;
pub mod precond;
pub mod sparse;

pub use operator::LinearOperator;
pub use sparse::{CscMatrix, CsrMatrix, Permutation};
