//! Preorder phase: the undirected graph of the matrix, a `p`-way vertex
//! partition, and the interior/interface classification that yields the
//! block-bordered ordering.

mod multilevel;

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::sparse::{CsrMatrix, Permutation};

pub use multilevel::BisectionOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("pattern is not symmetric at ({0}, {1}); pass symmetrize = true")]
    NotSymmetric(usize, usize),
    #[error("cannot split {n} vertices into {p} parts")]
    TooManyParts { n: usize, p: usize },
    #[error("number of parts must be at least 1")]
    NoParts,
    #[error("part vector has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("vertex {vertex} is interior to part {part} but adjacent to vertex {neighbor} of part {other}")]
    NotSeparated {
        vertex: usize,
        part: usize,
        neighbor: usize,
        other: usize,
    },
    #[error("vertex {0} listed more than once")]
    DuplicateVertex(usize),
    #[error("partition file: {0}")]
    File(String),
}

/// Symmetric adjacency structure without self-loops, stored compressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    xadj: Vec<usize>,
    adj: Vec<usize>,
}

impl AdjacencyGraph {
    /// Validates symmetry and the absence of self-loops; lists are sorted.
    pub fn from_neighbor_lists(mut lists: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let n = lists.len();
        for (u, l) in lists.iter_mut().enumerate() {
            l.sort_unstable();
            l.dedup();
            if let Some(&v) = l.iter().find(|&&v| v >= n || v == u) {
                return Err(PartitionError::NotSymmetric(u, v));
            }
        }
        for (u, l) in lists.iter().enumerate() {
            for &v in l {
                if lists[v].binary_search(&u).is_err() {
                    return Err(PartitionError::NotSymmetric(u, v));
                }
            }
        }
        let mut xadj = Vec::with_capacity(n + 1);
        xadj.push(0);
        let mut adj = Vec::new();
        for l in lists {
            adj.extend(l);
            xadj.push(adj.len());
        }
        Ok(Self { xadj, adj })
    }

    pub fn n(&self) -> usize {
        self.xadj.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.xadj[v]..self.xadj[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.xadj[v + 1] - self.xadj[v]
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }
}

/// Graph of the pattern of `A` (or of `A + Aᵀ` when `symmetrize` is set),
/// ignoring the diagonal.
pub fn build_adjacency(a: &CsrMatrix, symmetrize: bool) -> Result<AdjacencyGraph, PartitionError> {
    if !a.is_square() {
        return Err(PartitionError::NotSquare(a.n_rows(), a.n_cols()));
    }
    let n = a.n_rows();
    let mut lists: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect();
    if symmetrize {
        for i in 0..n {
            for &j in a.row(i).0 {
                if j != i {
                    lists[j].push(i);
                }
            }
        }
    }
    AdjacencyGraph::from_neighbor_lists(lists)
}

/// A `p`-way vertex partition together with its interior/interface split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionResult {
    /// Home part of every vertex, including interface vertices.
    pub part_of: Vec<usize>,
    /// Interior vertices of each part, increasing.
    pub interior: Vec<Vec<usize>>,
    /// Separator vertices, increasing.
    pub interface: Vec<usize>,
}

impl PartitionResult {
    /// Classifies a part assignment: a vertex with a neighbour in another
    /// part joins the interface, all others are interior to their part.
    pub fn from_parts(g: &AdjacencyGraph, part_of: Vec<usize>, n_parts: usize) -> Result<Self, PartitionError> {
        if part_of.len() != g.n() {
            return Err(PartitionError::LengthMismatch {
                expected: g.n(),
                got: part_of.len(),
            });
        }
        if let Some(&bad) = part_of.iter().find(|&&q| q >= n_parts) {
            return Err(PartitionError::File(format!("part id {bad} >= {n_parts}")));
        }
        let mut interior = vec![Vec::new(); n_parts];
        let mut interface = Vec::new();
        for v in 0..g.n() {
            let q = part_of[v];
            if g.neighbors(v).iter().any(|&u| part_of[u] != q) {
                interface.push(v);
            } else {
                interior[q].push(v);
            }
        }
        Ok(Self {
            part_of,
            interior,
            interface,
        })
    }

    /// Builds a classification from explicit interior sets and separator,
    /// checking that no edge joins interiors of different parts.
    pub fn from_interiors(
        g: &AdjacencyGraph,
        interior: Vec<Vec<usize>>,
        interface: Vec<usize>,
    ) -> Result<Self, PartitionError> {
        let n = g.n();
        let mut part_of = vec![usize::MAX; n];
        for (q, set) in interior.iter().enumerate() {
            for &v in set {
                if v >= n {
                    return Err(PartitionError::LengthMismatch { expected: n, got: v });
                }
                if part_of[v] != usize::MAX {
                    return Err(PartitionError::DuplicateVertex(v));
                }
                part_of[v] = q;
            }
        }
        let mut in_sep = vec![false; n];
        for &v in &interface {
            if v >= n {
                return Err(PartitionError::LengthMismatch { expected: n, got: v });
            }
            if part_of[v] != usize::MAX || in_sep[v] {
                return Err(PartitionError::DuplicateVertex(v));
            }
            in_sep[v] = true;
        }
        if let Some(v) = (0..n).find(|&v| part_of[v] == usize::MAX && !in_sep[v]) {
            return Err(PartitionError::LengthMismatch {
                expected: n,
                got: v,
            });
        }
        // separator vertices take the part of their first interior neighbour
        for &v in &interface {
            part_of[v] = g
                .neighbors(v)
                .iter()
                .map(|&u| part_of[u])
                .find(|&q| q != usize::MAX)
                .unwrap_or(0);
        }
        let mut interior = interior;
        for set in &mut interior {
            set.sort_unstable();
        }
        let mut interface = interface;
        interface.sort_unstable();
        let pr = Self {
            part_of,
            interior,
            interface,
        };
        pr.validate(g)?;
        Ok(pr)
    }

    pub fn n_parts(&self) -> usize {
        self.interior.len()
    }

    pub fn n(&self) -> usize {
        self.part_of.len()
    }

    /// `true` for separator vertices.
    pub fn interface_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n()];
        for &v in &self.interface {
            m[v] = true;
        }
        m
    }

    /// Number of vertices assigned to each part (interior and interface).
    pub fn part_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_parts()];
        for &q in &self.part_of {
            s[q] += 1;
        }
        s
    }

    /// Checks that every vertex is classified exactly once and that interior
    /// vertices are adjacent only to their own part's interior or the
    /// separator.
    pub fn validate(&self, g: &AdjacencyGraph) -> Result<(), PartitionError> {
        let n = g.n();
        if self.part_of.len() != n {
            return Err(PartitionError::LengthMismatch {
                expected: n,
                got: self.part_of.len(),
            });
        }
        let mut owner = vec![usize::MAX; n];
        for (q, set) in self.interior.iter().enumerate() {
            for &v in set {
                if owner[v] != usize::MAX {
                    return Err(PartitionError::DuplicateVertex(v));
                }
                owner[v] = q;
            }
        }
        let sep = usize::MAX - 1;
        for &v in &self.interface {
            if owner[v] != usize::MAX {
                return Err(PartitionError::DuplicateVertex(v));
            }
            owner[v] = sep;
        }
        if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(PartitionError::LengthMismatch { expected: n, got: v });
        }
        for v in 0..n {
            let q = owner[v];
            if q == sep {
                continue;
            }
            for &u in g.neighbors(v) {
                if owner[u] != q && owner[u] != sep {
                    return Err(PartitionError::NotSeparated {
                        vertex: v,
                        part: q,
                        neighbor: u,
                        other: owner[u],
                    });
                }
            }
        }
        Ok(())
    }
}

/// Splits `g` into `p` parts of roughly equal size by multilevel recursive
/// bisection and classifies interior and interface vertices. The result is
/// a deterministic function of `(g, p, seed)`.
pub fn partition_graph(g: &AdjacencyGraph, p: usize, seed: u64) -> Result<PartitionResult, PartitionError> {
    partition_graph_with(g, p, seed, &BisectionOptions::default())
}

pub fn partition_graph_with(
    g: &AdjacencyGraph,
    p: usize,
    seed: u64,
    opts: &BisectionOptions,
) -> Result<PartitionResult, PartitionError> {
    if p == 0 {
        return Err(PartitionError::NoParts);
    }
    if p > g.n() {
        return Err(PartitionError::TooManyParts { n: g.n(), p });
    }
    let part_of = multilevel::recursive_bisection(g, p, seed, opts);
    PartitionResult::from_parts(g, part_of, p)
}

/// Reads one part id per vertex (whitespace separated), e.g. a partition
/// vector written by an external partitioner.
pub fn read_partition_file(path: impl AsRef<Path>) -> Result<Vec<usize>, PartitionError> {
    let text = fs::read_to_string(path).map_err(|e| PartitionError::File(e.to_string()))?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| PartitionError::File(format!("bad part id '{t}'")))
        })
        .collect()
}

/// Classifies an externally supplied part vector against `g`.
pub fn partition_from_vector(g: &AdjacencyGraph, part_of: Vec<usize>) -> Result<PartitionResult, PartitionError> {
    let n_parts = part_of.iter().max().map_or(1, |m| m + 1);
    PartitionResult::from_parts(g, part_of, n_parts)
}

/// Interior of part 0, then part 1, ..., then the interface.
pub fn block_bordered_permutation(pr: &PartitionResult) -> Permutation {
    let forward: Vec<usize> = pr
        .interior
        .iter()
        .flatten()
        .chain(&pr.interface)
        .copied()
        .collect();
    Permutation::new(forward).expect("a valid partition classifies every vertex once")
}
