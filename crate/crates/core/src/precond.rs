//! Factorization and solve phases.
//!
//! A split node keeps its children's preconditioners, the border blocks
//! `E_i`, `F_i` and a preconditioner for the Schur complement
//! `S = C − Σ E_i B̃_i^{-1} F_i`. The coupling factors of the block LU
//! factorization are never formed; applies go through the stored blocks.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::local::{self, LocalConfig, LocalError, LocalFactor};
use crate::mltree::{build_tree, DissectionNode, NodeKind, TreeConfig, TreeError};
use crate::operator::LinearOperator;
use crate::sparse::{CscMatrix, CsrMatrix, Permutation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecondError {
    #[error("factorization of block {path} failed: {source}")]
    Local {
        path: String,
        #[source]
        source: LocalError,
    },
    #[error("reordering of Schur complement {path} failed: {source}")]
    SchurTree {
        path: String,
        #[source]
        source: TreeError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizeConfig {
    /// Solver for leaves and for Schur complements factored as one block.
    pub local: LocalConfig,
    /// Absolute threshold applied to assembled Schur complements; the
    /// diagonal is always kept.
    pub droptol_schur: f64,
    /// Dissection levels applied to the first-level Schur complement.
    pub n_lev_as: usize,
    /// Parts per split inside the Schur complement tree.
    pub schur_p: usize,
    pub schur_min_block: usize,
    pub seed: u64,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        Self {
            local: LocalConfig::exact(),
            droptol_schur: 0.0,
            n_lev_as: 0,
            schur_p: 4,
            schur_min_block: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitPrecond {
    children: Vec<AmesPreconditioner>,
    e_blocks: Vec<CsrMatrix>,
    f_blocks: Vec<CscMatrix>,
    schur: AmesPreconditioner,
    /// Child `i` owns `ranges[i]`; the separator owns the rest.
    ranges: Vec<Range<usize>>,
    sep_start: usize,
}

#[derive(Debug, Clone)]
pub enum PrecondNode {
    Leaf(LocalFactor),
    Split(Box<SplitPrecond>),
}

/// Recursive approximate inverse of a block-bordered matrix.
#[derive(Debug, Clone)]
pub struct AmesPreconditioner {
    n: usize,
    /// Reordering applied to this block before `node` (Schur trees only).
    perm: Option<Permutation>,
    node: PrecondNode,
}

impl AmesPreconditioner {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node(&self) -> &PrecondNode {
        &self.node
    }

    pub fn permutation(&self) -> Option<&Permutation> {
        self.perm.as_ref()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.node, PrecondNode::Leaf(_))
    }

    pub fn children(&self) -> &[AmesPreconditioner] {
        match &self.node {
            PrecondNode::Leaf(_) => &[],
            PrecondNode::Split(s) => &s.children,
        }
    }

    pub fn schur(&self) -> Option<&AmesPreconditioner> {
        match &self.node {
            PrecondNode::Leaf(_) => None,
            PrecondNode::Split(s) => Some(&s.schur),
        }
    }

    /// Lower border blocks `E_i` of a split node.
    pub fn e_blocks(&self) -> &[CsrMatrix] {
        match &self.node {
            PrecondNode::Leaf(_) => &[],
            PrecondNode::Split(s) => &s.e_blocks,
        }
    }

    /// Upper border blocks `F_i` of a split node.
    pub fn f_blocks(&self) -> &[CscMatrix] {
        match &self.node {
            PrecondNode::Leaf(_) => &[],
            PrecondNode::Split(s) => &s.f_blocks,
        }
    }

    pub fn local_factor(&self) -> Option<&LocalFactor> {
        match &self.node {
            PrecondNode::Leaf(f) => Some(f),
            PrecondNode::Split(_) => None,
        }
    }

    /// Nonzeros of every stored factor and coupling block.
    pub fn stored_nnz(&self) -> usize {
        match &self.node {
            PrecondNode::Leaf(f) => f.nnz_factors(),
            PrecondNode::Split(s) => {
                s.children.iter().map(Self::stored_nnz).sum::<usize>()
                    + s.e_blocks.iter().map(CsrMatrix::nnz).sum::<usize>()
                    + s.f_blocks.iter().map(CscMatrix::nnz).sum::<usize>()
                    + s.schur.stored_nnz()
            }
        }
    }

    /// Diagonal shifts and fallback rows over all local factors.
    pub fn repairs(&self) -> usize {
        match &self.node {
            PrecondNode::Leaf(f) => f.repairs(),
            PrecondNode::Split(s) => s.children.iter().map(Self::repairs).sum::<usize>() + s.schur.repairs(),
        }
    }

    /// Size of the first-level Schur complement (0 for a single leaf).
    pub fn schur_size(&self) -> usize {
        self.schur().map_or(0, Self::n)
    }

    /// Line-oriented dump: one line per node with sizes, nnz and kinds.
    pub fn stats(&self) -> String {
        let mut out = String::new();
        self.write_stats(&mut out, "root", 0);
        out
    }

    fn write_stats(&self, out: &mut String, name: &str, depth: usize) {
        let indent = "  ".repeat(depth);
        let reordered = if self.perm.is_some() { " reordered" } else { "" };
        match &self.node {
            PrecondNode::Leaf(f) => {
                let _ = writeln!(
                    out,
                    "{indent}{name} leaf n={} kind={} nnz={} repairs={}{reordered}",
                    self.n,
                    f.kind(),
                    f.nnz_factors(),
                    f.repairs()
                );
            }
            PrecondNode::Split(s) => {
                let e: usize = s.e_blocks.iter().map(CsrMatrix::nnz).sum();
                let f: usize = s.f_blocks.iter().map(CscMatrix::nnz).sum();
                let _ = writeln!(
                    out,
                    "{indent}{name} split n={} children={} schur={} nnz(E)={e} nnz(F)={f}{reordered}",
                    self.n,
                    s.children.len(),
                    s.schur.n
                );
                for (i, c) in s.children.iter().enumerate() {
                    c.write_stats(out, &format!("B{i}"), depth + 1);
                }
                s.schur.write_stats(out, "S", depth + 1);
            }
        }
    }

    /// `y = M x`, the fused form of the recursive block solve:
    /// `p = B̃^{-1} x_B`, `q = S̃^{-1}(E p − x_S)`, `y_S = −q`,
    /// `y_B = p + B̃^{-1} F q`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        match &self.perm {
            Some(perm) => {
                let xp = perm.permute_vec(x);
                let mut yp = vec![0.0; self.n];
                self.apply_node(&xp, &mut yp, false);
                y.copy_from_slice(&perm.unpermute_vec(&yp));
            }
            None => self.apply_node(x, y, false),
        }
    }

    /// The five-step block solve evaluated literally, with two Schur
    /// solves and two block solves per level. Mathematically identical to
    /// [`Self::apply_into`]; kept as a reference.
    pub fn apply_literal(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        match &self.perm {
            Some(perm) => {
                let xp = perm.permute_vec(x);
                let mut yp = vec![0.0; self.n];
                self.apply_node(&xp, &mut yp, true);
                y.copy_from_slice(&perm.unpermute_vec(&yp));
            }
            None => self.apply_node(x, &mut y, true),
        }
        y
    }

    fn sub_apply(&self, x: &[f64], y: &mut [f64], literal: bool) {
        if literal {
            y.copy_from_slice(&self.apply_literal(x));
        } else {
            self.apply_into(x, y);
        }
    }

    fn apply_node(&self, x: &[f64], y: &mut [f64], literal: bool) {
        let s = match &self.node {
            PrecondNode::Leaf(f) => return f.apply_into(x, y),
            PrecondNode::Split(s) => s,
        };
        let ns = s.schur.n;
        let (x1, x2) = x.split_at(s.sep_start);
        let (y1, y2) = y.split_at_mut(s.sep_start);

        // p1 = B̃^{-1} x1
        let mut p1 = vec![0.0; s.sep_start];
        for (child, r) in s.children.iter().zip(&s.ranges) {
            child.sub_apply(&x1[r.clone()], &mut p1[r.clone()], literal);
        }
        let mut ep1 = vec![0.0; ns];
        for (e, r) in s.e_blocks.iter().zip(&s.ranges) {
            e.spmv_add_unchecked(1.0, &p1[r.clone()], &mut ep1);
        }

        if !literal {
            let rhs: Vec<f64> = ep1.iter().zip(x2).map(|(a, b)| a - b).collect();
            let mut q = vec![0.0; ns];
            s.schur.sub_apply(&rhs, &mut q, false);
            for (yi, qi) in y2.iter_mut().zip(&q) {
                *yi = -qi;
            }
            for ((child, f), r) in s.children.iter().zip(&s.f_blocks).zip(&s.ranges) {
                let mut fq = vec![0.0; r.len()];
                f.spmv_add_unchecked(1.0, &q, &mut fq);
                let mut corr = vec![0.0; r.len()];
                child.sub_apply(&fq, &mut corr, false);
                for ((yi, pi), ci) in y1[r.clone()].iter_mut().zip(&p1[r.clone()]).zip(&corr) {
                    *yi = pi + ci;
                }
            }
            return;
        }

        // [p2, p3] = S̃^{-1} [E p1, x2]
        let mut p2 = vec![0.0; ns];
        let mut p3 = vec![0.0; ns];
        s.schur.sub_apply(&ep1, &mut p2, true);
        s.schur.sub_apply(x2, &mut p3, true);
        // [p4, p5] = B̃^{-1} [F p2, F p3]
        for ((child, f), r) in s.children.iter().zip(&s.f_blocks).zip(&s.ranges) {
            let mut fp2 = vec![0.0; r.len()];
            let mut fp3 = vec![0.0; r.len()];
            f.spmv_add_unchecked(1.0, &p2, &mut fp2);
            f.spmv_add_unchecked(1.0, &p3, &mut fp3);
            let mut p4 = vec![0.0; r.len()];
            let mut p5 = vec![0.0; r.len()];
            child.sub_apply(&fp2, &mut p4, true);
            child.sub_apply(&fp3, &mut p5, true);
            for (k, yi) in y1[r.clone()].iter_mut().enumerate() {
                *yi = p1[r.start + k] + p4[k] - p5[k];
            }
        }
        for ((yi, a), b) in y2.iter_mut().zip(&p3).zip(&p2) {
            *yi = a - b;
        }
    }
}

impl LinearOperator for AmesPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        AmesPreconditioner::apply_into(self, x, y)
    }
}

/// `S = C − Σ E_i B̃_i^{-1} F_i` with absolute dropping (diagonal kept).
pub fn compute_schur(
    c: &CsrMatrix,
    e_blocks: &[CsrMatrix],
    f_blocks: &[CscMatrix],
    solvers: &[&dyn LinearOperator],
    droptol: f64,
) -> CsrMatrix {
    compute_schur_counted(c, e_blocks, f_blocks, solvers, droptol).0
}

/// [`compute_schur`] that also returns the number of block solves, one per
/// nonzero column of each `F_i`.
pub fn compute_schur_counted(
    c: &CsrMatrix,
    e_blocks: &[CsrMatrix],
    f_blocks: &[CscMatrix],
    solvers: &[&dyn LinearOperator],
    droptol: f64,
) -> (CsrMatrix, usize) {
    let s = c.n_rows();
    assert_eq!(c.n_cols(), s, "corner block must be square");
    assert_eq!(e_blocks.len(), f_blocks.len());
    assert_eq!(e_blocks.len(), solvers.len());
    for ((e, f), b) in e_blocks.iter().zip(f_blocks).zip(solvers) {
        assert_eq!((e.n_rows(), e.n_cols()), (s, b.dim()), "E block shape");
        assert_eq!((f.n_rows(), f.n_cols()), (b.dim(), s), "F block shape");
    }
    let cc = c.to_csc();
    let cols: Vec<(Vec<(usize, f64)>, usize)> = (0..s)
        .into_par_iter()
        .map_init(
            || vec![0.0; s],
            |acc, j| {
                let (rows, vals) = cc.col(j);
                for (&r, &v) in rows.iter().zip(vals) {
                    acc[r] = v;
                }
                let mut solves = 0;
                for ((e, f), b) in e_blocks.iter().zip(f_blocks).zip(solvers) {
                    let (fr, fv) = f.col(j);
                    if fr.is_empty() {
                        continue;
                    }
                    let mut rhs = vec![0.0; b.dim()];
                    for (&r, &v) in fr.iter().zip(fv) {
                        rhs[r] = v;
                    }
                    let mut z = vec![0.0; b.dim()];
                    b.apply_into(&rhs, &mut z);
                    solves += 1;
                    e.spmv_add_unchecked(-1.0, &z, acc);
                }
                let col: Vec<(usize, f64)> = acc
                    .iter()
                    .enumerate()
                    .filter(|&(r, &v)| v != 0.0 && (r == j || v.abs() >= droptol))
                    .map(|(r, &v)| (r, v))
                    .collect();
                acc.fill(0.0);
                (col, solves)
            },
        )
        .collect();
    let solves = cols.iter().map(|c| c.1).sum();
    let csc = CscMatrix::from_sorted_cols(s, s, cols.into_iter().map(|c| c.0));
    (csc.to_csr(), solves)
}

/// Factors the tree bottom-up: leaves with the local solver, then each
/// split node's Schur complement. The first-level Schur complement is
/// reordered with `n_lev_as` dissection levels; all others are factored as
/// single blocks.
pub fn factorize(tree: &DissectionNode, cfg: &FactorizeConfig) -> Result<AmesPreconditioner, PrecondError> {
    factor_node(tree, cfg, "root".to_string(), true)
}

fn factor_node(
    node: &DissectionNode,
    cfg: &FactorizeConfig,
    path: String,
    reorder_schur: bool,
) -> Result<AmesPreconditioner, PrecondError> {
    let (children, e_blocks, f_blocks, c_block) = match &node.kind {
        NodeKind::Leaf { block } => return factor_leaf(block, cfg, path),
        NodeKind::Split {
            children,
            e_blocks,
            f_blocks,
            c_block,
        } => (children, e_blocks, f_blocks, c_block),
    };
    let factored: Vec<AmesPreconditioner> = children
        .par_iter()
        .enumerate()
        .map(|(i, c)| factor_node(c, cfg, format!("{path}/B{i}"), false))
        .collect::<Result<_, _>>()?;
    let solvers: Vec<&dyn LinearOperator> = factored.iter().map(|f| f as &dyn LinearOperator).collect();
    let s = compute_schur(c_block, e_blocks, f_blocks, &solvers, cfg.droptol_schur);
    let schur_path = format!("{path}/S");
    let schur = if reorder_schur && cfg.n_lev_as > 0 && s.n_rows() > cfg.schur_min_block {
        let tcfg = TreeConfig {
            p: cfg.schur_p,
            n_lev: cfg.n_lev_as,
            min_block_size: cfg.schur_min_block,
        };
        let (stree, sperm) = build_tree(&s, &tcfg, cfg.seed ^ 0x5C4B).map_err(|source| PrecondError::SchurTree {
            path: schur_path.clone(),
            source,
        })?;
        let mut inner = factor_node(&stree, cfg, schur_path, false)?;
        if !sperm.is_identity() {
            inner.perm = Some(sperm);
        }
        inner
    } else {
        factor_leaf(&s, cfg, schur_path)?
    };

    let mut ranges = Vec::with_capacity(factored.len());
    let mut off = 0;
    for c in &factored {
        ranges.push(off..off + c.n);
        off += c.n;
    }
    Ok(AmesPreconditioner {
        n: node.size(),
        perm: None,
        node: PrecondNode::Split(Box::new(SplitPrecond {
            children: factored,
            e_blocks: e_blocks.clone(),
            f_blocks: f_blocks.clone(),
            schur,
            ranges,
            sep_start: off,
        })),
    })
}

fn factor_leaf(block: &CsrMatrix, cfg: &FactorizeConfig, path: String) -> Result<AmesPreconditioner, PrecondError> {
    let f = local::factorize(block, &cfg.local).map_err(|source| PrecondError::Local { path, source })?;
    Ok(AmesPreconditioner {
        n: block.n_rows(),
        perm: None,
        node: PrecondNode::Leaf(f),
    })
}

/// Stored preconditioner nonzeros relative to `nnz(A)`.
pub fn density_ratio(m: &AmesPreconditioner, a: &CsrMatrix) -> f64 {
    m.stored_nnz() as f64 / a.nnz().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::local::LocalKind;
    use crate::partition::{build_adjacency, PartitionResult};
    use crate::mltree::build_tree_with_partition;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn scalar_schur_complement() {
        let c = CsrMatrix::from_dense(&[vec![1.0]]);
        let e = CsrMatrix::from_dense(&[vec![1.0]]);
        let f = CsrMatrix::from_dense(&[vec![1.0]]).to_csc();
        let b = local::factorize(&CsrMatrix::from_dense(&[vec![2.0]]), &LocalConfig::exact()).unwrap();
        let s = compute_schur(&c, &[e], &[f], &[&b], 0.0);
        assert_eq!(s.get(0, 0), 0.5);
    }

    #[test]
    fn zero_coupling_leaves_corner_unchanged() {
        let c = gallery::random_sparse(5, 0.3, 1);
        let b = local::factorize(&CsrMatrix::identity(3), &LocalConfig::exact()).unwrap();
        let (s, solves) = compute_schur_counted(&c, &[CsrMatrix::zeros(5, 3)], &[CscMatrix::from(&CsrMatrix::zeros(3, 5))], &[&b], 0.0);
        assert_eq!(s, c);
        assert_eq!(solves, 0);
    }

    #[test]
    fn solve_count_matches_nonzero_columns() {
        let f0 = CsrMatrix::from_triplets(2, 4, &[(0, 1, 1.0), (1, 1, 2.0), (1, 3, 1.0)]).unwrap();
        let f1 = CsrMatrix::from_triplets(3, 4, &[(2, 0, 1.0)]).unwrap();
        let e0 = CsrMatrix::from_triplets(4, 2, &[(0, 0, 1.0)]).unwrap();
        let e1 = CsrMatrix::from_triplets(4, 3, &[(3, 2, 1.0)]).unwrap();
        let b0 = local::factorize(&CsrMatrix::identity(2), &LocalConfig::exact()).unwrap();
        let b1 = local::factorize(&CsrMatrix::identity(3), &LocalConfig::exact()).unwrap();
        let (_, solves) = compute_schur_counted(
            &CsrMatrix::identity(4),
            &[e0, e1],
            &[f0.to_csc(), f1.to_csc()],
            &[&b0, &b1],
            0.0,
        );
        assert_eq!(solves, 3);
    }

    #[test]
    fn schur_drops_small_offdiagonals_but_keeps_diagonal() {
        let c = CsrMatrix::from_dense(&[vec![1e-3, 1e-3], vec![1e-3, 1.0]]);
        let s = compute_schur(&c, &[], &[], &[], 1e-2);
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(0, 0), 1e-3);
    }

    #[test]
    fn example5_exact_preconditioner_inverts_matrix() {
        let a = gallery::example5_matrix();
        let g = build_adjacency(&a, true).unwrap();
        let pr = PartitionResult::from_interiors(&g, vec![vec![0, 1], vec![2]], vec![3, 4]).unwrap();
        let cfg = TreeConfig {
            p: 2,
            n_lev: 1,
            min_block_size: 1,
        };
        let (tree, _) = build_tree_with_partition(&a, &pr, &cfg, 0).unwrap();
        let m = factorize(&tree, &FactorizeConfig::default()).unwrap();
        assert_eq!(m.schur_size(), 2);
        let x = [1.0, -2.0, 3.0, 0.5, -1.0];
        let y = m.apply(&a.spmv(&x).unwrap());
        assert!(max_diff(&y, &x) < 1e-10);
        assert!(max_diff(&m.apply_literal(&a.spmv(&x).unwrap()), &x) < 1e-10);
    }

    #[test]
    fn reordered_schur_tree_stays_exact() {
        let a = gallery::random_grid(16, 3, 1, 4);
        let tcfg = TreeConfig {
            p: 4,
            n_lev: 2,
            min_block_size: 4,
        };
        let (tree, perm) = build_tree(&a, &tcfg, 3).unwrap();
        let cfg = FactorizeConfig {
            n_lev_as: 2,
            schur_p: 2,
            schur_min_block: 4,
            ..FactorizeConfig::default()
        };
        let m = factorize(&tree, &cfg).unwrap();
        assert!(m.schur().unwrap().permutation().is_some() || !m.schur().unwrap().is_leaf());
        let ap = a.permute(&perm).unwrap();
        let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.1).sin()).collect();
        let y = m.apply(&ap.spmv(&x).unwrap());
        assert!(max_diff(&y, &x) < 1e-8);
        let lit = m.apply_literal(&ap.spmv(&x).unwrap());
        assert!(max_diff(&lit, &y) < 1e-10);
    }

    #[test]
    fn inexact_apply_is_linear_and_repeatable() {
        let a = gallery::random_grid(12, 4, 1, 9);
        let (tree, _) = build_tree(&a, &TreeConfig { p: 3, n_lev: 2, min_block_size: 4 }, 1).unwrap();
        let cfg = FactorizeConfig {
            local: LocalConfig::new(LocalKind::Ilu, 0.05),
            droptol_schur: 0.01,
            ..FactorizeConfig::default()
        };
        let m = factorize(&tree, &cfg).unwrap();
        let x: Vec<f64> = (0..144).map(|i| (i % 7) as f64).collect();
        let z: Vec<f64> = (0..144).map(|i| (i as f64).cos()).collect();
        let xz: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let (mx, mz, mxz) = (m.apply(&x), m.apply(&z), m.apply(&xz));
        let comb: Vec<f64> = mx.iter().zip(&mz).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let scale = mxz.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        assert!(max_diff(&comb, &mxz) <= 1e-12 * scale.max(1.0));
        assert_eq!(m.apply(&x), mx);
        assert!(max_diff(&m.apply_literal(&x), &mx) <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn failing_block_reports_its_path() {
        // zero-diagonal leaf breaks AINV
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (2, 2, 1.0)]).unwrap();
        let (tree, _) = build_tree(&a, &TreeConfig { p: 1, n_lev: 0, min_block_size: 1 }, 0).unwrap();
        let cfg = FactorizeConfig {
            local: LocalConfig::new(LocalKind::Ainv, 0.0),
            ..FactorizeConfig::default()
        };
        match factorize(&tree, &cfg) {
            Err(PrecondError::Local { path, .. }) => assert_eq!(path, "root"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn density_counts_all_blocks() {
        let a = gallery::poisson2d(10);
        let (tree, _) = build_tree(&a, &TreeConfig { p: 2, n_lev: 1, min_block_size: 4 }, 0).unwrap();
        let m = factorize(&tree, &FactorizeConfig::default()).unwrap();
        let mut expect = m.schur().unwrap().stored_nnz();
        for c in m.children() {
            expect += c.local_factor().unwrap().nnz_factors();
        }
        if let NodeKind::Split { e_blocks, f_blocks, .. } = &tree.kind {
            expect += e_blocks.iter().map(CsrMatrix::nnz).sum::<usize>();
            expect += f_blocks.iter().map(CscMatrix::nnz).sum::<usize>();
        }
        assert_eq!(m.stored_nnz(), expect);
        assert_eq!(density_ratio(&m, &a), expect as f64 / a.nnz() as f64);
        assert!(m.stats().lines().count() >= 4);
    }
}
