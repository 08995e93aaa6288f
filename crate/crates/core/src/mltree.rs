//! Analysis phase: the recursive dissection tree.
//!
//! Every split node stores the border blocks `E_i` (row-compressed),
//! `F_i` (column-compressed) and the corner block `C` of its own
//! block-bordered form; only leaves store a diagonal block in full. Each
//! node also keeps the original indices of its unknowns in node order, so
//! the concatenation at the root is the global permutation.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::partition::{build_adjacency, partition_graph, PartitionError, PartitionResult};
use crate::sparse::{CscMatrix, CsrMatrix, Permutation, SparseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("invalid tree configuration: {0}")]
    Config(String),
    #[error("partitioning failed at level {level}: {source}")]
    Partition {
        level: usize,
        #[source]
        source: PartitionError,
    },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Shape of the dissection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    /// Parts per split.
    pub p: usize,
    /// Maximum depth; `0` keeps the whole matrix in a single leaf.
    pub n_lev: usize,
    /// Blocks of at most this size are not split further.
    pub min_block_size: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            p: 4,
            n_lev: 1,
            min_block_size: 8,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.min_block_size == 0 {
            return Err(TreeError::Config("min_block_size must be at least 1".into()));
        }
        if self.n_lev > 0 && self.p == 0 {
            return Err(TreeError::Config("p must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf {
        block: CsrMatrix,
    },
    Split {
        children: Vec<DissectionNode>,
        /// `E_i`: separator rows, columns of child `i`.
        e_blocks: Vec<CsrMatrix>,
        /// `F_i`: rows of child `i`, separator columns.
        f_blocks: Vec<CscMatrix>,
        c_block: CsrMatrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissectionNode {
    pub level: usize,
    /// Original indices of this node's unknowns, in node order. For a split
    /// node the children's unknowns come first and the separator last.
    pub indices: Vec<usize>,
    pub kind: NodeKind,
}

impl DissectionNode {
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn children(&self) -> &[DissectionNode] {
        match &self.kind {
            NodeKind::Leaf { .. } => &[],
            NodeKind::Split { children, .. } => children,
        }
    }

    /// Size of the corner block (zero at leaves).
    pub fn separator_size(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf { .. } => 0,
            NodeKind::Split { c_block, .. } => c_block.n_rows(),
        }
    }

    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Nonzeros over all stored blocks of the subtree.
    pub fn stored_nnz(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf { block } => block.nnz(),
            NodeKind::Split {
                children,
                e_blocks,
                f_blocks,
                c_block,
            } => {
                children.iter().map(DissectionNode::stored_nnz).sum::<usize>()
                    + e_blocks.iter().map(CsrMatrix::nnz).sum::<usize>()
                    + f_blocks.iter().map(CscMatrix::nnz).sum::<usize>()
                    + c_block.nnz()
            }
        }
    }

    /// Global permutation described by this (root) node.
    pub fn permutation(&self) -> Permutation {
        Permutation::new(self.indices.clone()).expect("tree indices form a permutation")
    }

    /// Textual summary, one line per node.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        self.write_summary(&mut out);
        out
    }

    fn write_summary(&self, out: &mut String) {
        let indent = "  ".repeat(self.level);
        match &self.kind {
            NodeKind::Leaf { block } => {
                let _ = writeln!(out, "{indent}leaf level={} size={} nnz={}", self.level, self.size(), block.nnz());
            }
            NodeKind::Split {
                children,
                e_blocks,
                f_blocks,
                c_block,
            } => {
                let e: Vec<String> = e_blocks.iter().map(|b| b.nnz().to_string()).collect();
                let f: Vec<String> = f_blocks.iter().map(|b| b.nnz().to_string()).collect();
                let _ = writeln!(
                    out,
                    "{indent}split level={} size={} children={} sep={} nnz(C)={} nnz(E)=[{}] nnz(F)=[{}]",
                    self.level,
                    self.size(),
                    children.len(),
                    c_block.n_rows(),
                    c_block.nnz(),
                    e.join(","),
                    f.join(",")
                );
                for c in children {
                    c.write_summary(out);
                }
            }
        }
    }
}

/// Builds the dissection tree of `a` and the global permutation.
pub fn build_tree(a: &CsrMatrix, cfg: &TreeConfig, seed: u64) -> Result<(DissectionNode, Permutation), TreeError> {
    build(a, cfg, seed, None)
}

/// Like [`build_tree`] but the first split uses `first` (a partition of the
/// graph of `a`) instead of calling the partitioner.
pub fn build_tree_with_partition(
    a: &CsrMatrix,
    first: &PartitionResult,
    cfg: &TreeConfig,
    seed: u64,
) -> Result<(DissectionNode, Permutation), TreeError> {
    let g = build_adjacency(a, true).map_err(|source| TreeError::Partition { level: 0, source })?;
    first
        .validate(&g)
        .map_err(|source| TreeError::Partition { level: 0, source })?;
    build(a, cfg, seed, Some(first))
}

fn build(
    a: &CsrMatrix,
    cfg: &TreeConfig,
    seed: u64,
    first: Option<&PartitionResult>,
) -> Result<(DissectionNode, Permutation), TreeError> {
    if !a.is_square() {
        return Err(TreeError::NotSquare(a.n_rows(), a.n_cols()));
    }
    cfg.validate()?;
    let verts: Vec<usize> = (0..a.n_rows()).collect();
    let root = build_node(a, verts, 0, cfg, seed, first)?;
    let perm = root.permutation();
    Ok((root, perm))
}

fn node_seed(seed: u64, level: usize, first_index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ ((level as u64) << 48)
        ^ (first_index as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

fn build_node(
    a: &CsrMatrix,
    verts: Vec<usize>,
    level: usize,
    cfg: &TreeConfig,
    seed: u64,
    first: Option<&PartitionResult>,
) -> Result<DissectionNode, TreeError> {
    let n = verts.len();
    let forced = level == 0 && first.is_some();
    let stop = level >= cfg.n_lev || n <= cfg.min_block_size || cfg.p < 2 || n < 2;
    if stop && !forced {
        return leaf(a, verts, level);
    }

    let pr = match first.filter(|_| level == 0) {
        Some(pr) => pr.clone(),
        None => {
            let sub = submatrix(a, &verts, &verts);
            let g = build_adjacency(&sub, true).map_err(|source| TreeError::Partition { level, source })?;
            partition_graph(&g, cfg.p.min(n), node_seed(seed, level, verts[0]))
                .map_err(|source| TreeError::Partition { level, source })?
        }
    };

    let child_sets: Vec<Vec<usize>> = pr
        .interior
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.iter().map(|&k| verts[k]).collect())
        .collect();
    if child_sets.is_empty() || (child_sets.len() == 1 && pr.interface.is_empty()) {
        // nothing to gain from splitting
        return leaf(a, verts, level);
    }
    let sep: Vec<usize> = pr.interface.iter().map(|&k| verts[k]).collect();

    let children: Vec<DissectionNode> = child_sets
        .into_par_iter()
        .map(|set| build_node(a, set, level + 1, cfg, seed, None))
        .collect::<Result<_, _>>()?;

    let e_blocks = children.iter().map(|c| submatrix(a, &sep, &c.indices)).collect();
    let f_blocks = children
        .iter()
        .map(|c| submatrix(a, &c.indices, &sep).to_csc())
        .collect();
    let c_block = submatrix(a, &sep, &sep);
    let mut indices: Vec<usize> = Vec::with_capacity(n);
    for c in &children {
        indices.extend_from_slice(&c.indices);
    }
    indices.extend_from_slice(&sep);
    Ok(DissectionNode {
        level,
        indices,
        kind: NodeKind::Split {
            children,
            e_blocks,
            f_blocks,
            c_block,
        },
    })
}

fn leaf(a: &CsrMatrix, verts: Vec<usize>, level: usize) -> Result<DissectionNode, TreeError> {
    let block = submatrix(a, &verts, &verts);
    Ok(DissectionNode {
        level,
        indices: verts,
        kind: NodeKind::Leaf { block },
    })
}

fn submatrix(a: &CsrMatrix, rows: &[usize], cols: &[usize]) -> CsrMatrix {
    let mut col_map = vec![usize::MAX; a.n_cols()];
    for (k, &c) in cols.iter().enumerate() {
        col_map[c] = k;
    }
    a.extract_with_map(rows, &col_map, cols.len())
}

/// Rebuilds `Pᵀ A P` from the blocks stored in the tree.
pub fn reassemble(node: &DissectionNode) -> CsrMatrix {
    let mut t = Vec::with_capacity(node.stored_nnz());
    collect(node, 0, &mut t);
    CsrMatrix::from_triplets(node.size(), node.size(), &t).expect("blocks fit the node")
}

fn collect(node: &DissectionNode, base: usize, t: &mut Vec<(usize, usize, f64)>) {
    match &node.kind {
        NodeKind::Leaf { block } => t.extend(block.iter().map(|(i, j, v)| (base + i, base + j, v))),
        NodeKind::Split {
            children,
            e_blocks,
            f_blocks,
            c_block,
        } => {
            let sep_base = base + node.size() - c_block.n_rows();
            let mut off = base;
            for ((child, e), f) in children.iter().zip(e_blocks).zip(f_blocks) {
                collect(child, off, t);
                t.extend(e.iter().map(|(i, j, v)| (sep_base + i, off + j, v)));
                for j in 0..f.n_cols() {
                    let (rows, vals) = f.col(j);
                    t.extend(rows.iter().zip(vals).map(|(&i, &v)| (off + i, sep_base + j, v)));
                }
                off += child.size();
            }
            t.extend(c_block.iter().map(|(i, j, v)| (sep_base + i, sep_base + j, v)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    fn check_shapes(node: &DissectionNode, cfg: &TreeConfig) {
        assert!(node.level <= cfg.n_lev);
        match &node.kind {
            NodeKind::Leaf { block } => {
                assert_eq!(block.n_rows(), node.size());
            }
            NodeKind::Split {
                children,
                e_blocks,
                f_blocks,
                c_block,
            } => {
                let s = c_block.n_rows();
                assert_eq!(children.iter().map(|c| c.size()).sum::<usize>() + s, node.size());
                for ((c, e), f) in children.iter().zip(e_blocks).zip(f_blocks) {
                    assert_eq!((e.n_rows(), e.n_cols()), (s, c.size()));
                    assert_eq!((f.n_rows(), f.n_cols()), (c.size(), s));
                    check_shapes(c, cfg);
                }
            }
        }
    }

    #[test]
    fn single_leaf_without_splitting() {
        let a = gallery::random_sparse(30, 0.1, 1);
        let cfg = TreeConfig {
            p: 1,
            n_lev: 1,
            min_block_size: 1,
        };
        let (root, perm) = build_tree(&a, &cfg, 0).unwrap();
        assert!(root.is_leaf());
        assert!(perm.is_identity());
        assert_eq!(reassemble(&root), a);
    }

    #[test]
    fn example5_with_given_partition() {
        let a = gallery::example5_matrix();
        let g = build_adjacency(&a, true).unwrap();
        let pr = PartitionResult::from_interiors(&g, vec![vec![0, 1], vec![2]], vec![3, 4]).unwrap();
        let cfg = TreeConfig {
            p: 2,
            n_lev: 1,
            min_block_size: 1,
        };
        let (root, perm) = build_tree_with_partition(&a, &pr, &cfg, 0).unwrap();
        assert!(perm.is_identity());
        let sizes: Vec<usize> = root.children().iter().map(|c| c.size()).collect();
        assert_eq!(sizes, vec![2, 1]);
        assert!(root.children().iter().all(DissectionNode::is_leaf));
        assert_eq!(root.separator_size(), 2);
        assert_eq!(reassemble(&root), a);
        assert_eq!(root.stored_nnz(), a.nnz());
    }

    #[test]
    fn reassembly_is_lossless_on_three_levels() {
        let a = gallery::brusselator2d(32);
        let cfg = TreeConfig {
            p: 4,
            n_lev: 3,
            min_block_size: 8,
        };
        let (root, perm) = build_tree(&a, &cfg, 11).unwrap();
        assert_eq!(root.depth(), 3);
        check_shapes(&root, &cfg);
        assert_eq!(reassemble(&root), a.permute(&perm).unwrap());
        assert_eq!(root.stored_nnz(), a.nnz());
    }

    #[test]
    fn reassembly_on_random_two_level_tree() {
        let a = gallery::random_sparse(200, 0.015, 4);
        let cfg = TreeConfig {
            p: 3,
            n_lev: 2,
            min_block_size: 4,
        };
        let (root, perm) = build_tree(&a, &cfg, 2).unwrap();
        check_shapes(&root, &cfg);
        assert_eq!(reassemble(&root), a.permute(&perm).unwrap());
        assert_eq!(root.stored_nnz(), a.nnz());
    }

    #[test]
    fn leaves_satisfy_stop_condition_and_build_is_deterministic() {
        let a = gallery::poisson2d(20);
        let cfg = TreeConfig {
            p: 2,
            n_lev: 4,
            min_block_size: 30,
        };
        let (root, _) = build_tree(&a, &cfg, 5).unwrap();
        fn walk(n: &DissectionNode, cfg: &TreeConfig) {
            if n.is_leaf() {
                assert!(n.level == cfg.n_lev || n.size() <= cfg.min_block_size || n.level > 0);
            }
            assert!(n.level <= cfg.n_lev);
            n.children().iter().for_each(|c| walk(c, cfg));
        }
        walk(&root, &cfg);
        assert_eq!(build_tree(&a, &cfg, 5).unwrap().0, root);
        assert!(root.summary().lines().count() > 3);
    }

    #[test]
    fn disconnected_matrix_gives_empty_separator() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let cfg = TreeConfig {
            p: 2,
            n_lev: 1,
            min_block_size: 1,
        };
        let (root, _) = build_tree(&a, &cfg, 0).unwrap();
        assert_eq!(root.separator_size(), 0);
        assert_eq!(root.children().len(), 2);
        assert_eq!(reassemble(&root), a.permute(&root.permutation()).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_tree(&CsrMatrix::zeros(2, 3), &TreeConfig::default(), 0),
            Err(TreeError::NotSquare(2, 3))
        ));
        let cfg = TreeConfig {
            min_block_size: 0,
            ..TreeConfig::default()
        };
        assert!(matches!(build_tree(&CsrMatrix::identity(3), &cfg, 0), Err(TreeError::Config(_))));
    }
}
