//! One level of overlapping after the first reordering level.
//!
//! Each subdomain `Ω_i` is extended by its separator successors `ext_i`,
//! and the separator `S` by the subdomain successors of all extension
//! vertices. Every vertex of an extended set gets its own copy; the
//! overlapped matrix keeps one equation per copy, with exactly the
//! nonzeros of the original equation, each routed to a unique copy of its
//! column vertex:
//!
//! - from a copy in `Ω̂_i`, column `v` goes to `v`'s copy in `Ω̂_i` if one
//!   exists, otherwise to its separator copy;
//! - from a separator copy, column `v` goes to its separator copy if
//!   `v ∈ Ŝ`, otherwise to the copy in `v`'s own subdomain.

use std::ops::Range;

use thiserror::Error;

use crate::partition::{build_adjacency, PartitionError, PartitionResult};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlapError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("partition does not match the matrix: {0}")]
    Partition(#[from] PartitionError),
}

/// Which extended set a copy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CopyTag {
    Part(usize),
    Separator,
}

/// Extended subdomains and separator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensionSets {
    /// Separator successors of each subdomain, increasing.
    pub ext: Vec<Vec<usize>>,
    /// `Ω̂_i = Ω_i ++ ext_i`.
    pub extended: Vec<Vec<usize>>,
    /// `Ŝ`: the separator (increasing) followed by the added subdomain
    /// vertices (increasing).
    pub s_hat: Vec<usize>,
}

/// Copy bookkeeping between original and overlapped unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMap {
    /// `(Π₁, Π₂)` of every overlapped unknown.
    pub copies: Vec<(usize, CopyTag)>,
    /// Overlapped indices of each original vertex.
    pub copies_of: Vec<Vec<usize>>,
    /// Copy used to read back each original unknown.
    pub primary: Vec<usize>,
}

impl OverlapMap {
    pub fn n_original(&self) -> usize {
        self.copies_of.len()
    }

    pub fn n_overlapped(&self) -> usize {
        self.copies.len()
    }

    /// `Π₁` of an overlapped unknown.
    pub fn original(&self, copy: usize) -> usize {
        self.copies[copy].0
    }
}

#[derive(Debug, Clone)]
pub struct OverlappedSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub map: OverlapMap,
    /// Row range of each extended subdomain.
    pub part_ranges: Vec<Range<usize>>,
    pub sep_range: Range<usize>,
}

impl OverlappedSystem {
    /// First-level partition of the overlapped matrix: extended subdomains
    /// as interiors, extended separator as interface.
    pub fn partition(&self) -> Result<PartitionResult, OverlapError> {
        let g = build_adjacency(&self.a, true)?;
        let interior = self.part_ranges.iter().map(|r| r.clone().collect()).collect();
        Ok(PartitionResult::from_interiors(&g, interior, self.sep_range.clone().collect())?)
    }
}

/// Size and coupling statistics before and after overlapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapStats {
    /// `n(Ã) / n(A)`.
    pub size_ratio: f64,
    /// `nnz(Ã) / nnz(A)`.
    pub nnz_ratio: f64,
    pub separator_before: usize,
    pub separator_after: usize,
    /// `nnz(F) / size(F)` of the border block before overlapping.
    pub sp_f_before: f64,
    pub sp_f_after: f64,
}

/// Extension sets following the directed pattern of `a`.
pub fn compute_extension_sets(a: &CsrMatrix, pr: &PartitionResult) -> ExtensionSets {
    let n = a.n_rows();
    let in_sep = pr.interface_mask();
    let mut ext = Vec::with_capacity(pr.n_parts());
    let mut mark = vec![false; n];
    for set in &pr.interior {
        let mut e: Vec<usize> = Vec::new();
        for &u in set {
            for &v in a.row(u).0 {
                if in_sep[v] && !mark[v] {
                    mark[v] = true;
                    e.push(v);
                }
            }
        }
        for &v in &e {
            mark[v] = false;
        }
        e.sort_unstable();
        ext.push(e);
    }
    let extended = pr
        .interior
        .iter()
        .zip(&ext)
        .map(|(i, e)| i.iter().chain(e).copied().collect())
        .collect();

    let mut in_ext = vec![false; n];
    for &v in ext.iter().flatten() {
        in_ext[v] = true;
    }
    let mut added: Vec<usize> = Vec::new();
    for u in (0..n).filter(|&u| in_ext[u]) {
        for &v in a.row(u).0 {
            if !in_sep[v] && !mark[v] {
                mark[v] = true;
                added.push(v);
            }
        }
    }
    added.sort_unstable();
    let s_hat = pr.interface.iter().chain(&added).copied().collect();
    ExtensionSets { ext, extended, s_hat }
}

/// Builds the overlapped system `Ã x̃ = b̃` of `a x = b` for the first-level
/// partition `pr` (computed on the symmetrized graph of `a`).
pub fn build_overlapped(a: &CsrMatrix, b: &[f64], pr: &PartitionResult) -> Result<OverlappedSystem, OverlapError> {
    if !a.is_square() {
        return Err(OverlapError::NotSquare(a.n_rows(), a.n_cols()));
    }
    let n = a.n_rows();
    if b.len() != n {
        return Err(OverlapError::LengthMismatch { expected: n, got: b.len() });
    }
    pr.validate(&build_adjacency(a, true)?)?;
    let sets = compute_extension_sets(a, pr);
    let n_parts = pr.n_parts();

    let mut copies: Vec<(usize, CopyTag)> = Vec::new();
    let mut copies_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut part_ranges = Vec::with_capacity(n_parts);
    // part_copy[i][v]: copy of v in Ω̂_i, via a per-part lookup list
    let mut part_copy: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n_parts);
    for (i, set) in sets.extended.iter().enumerate() {
        let start = copies.len();
        let mut lookup = Vec::with_capacity(set.len());
        for &v in set {
            lookup.push((v, copies.len()));
            copies_of[v].push(copies.len());
            copies.push((v, CopyTag::Part(i)));
        }
        lookup.sort_unstable();
        part_copy.push(lookup);
        part_ranges.push(start..copies.len());
    }
    let sep_start = copies.len();
    let mut sep_copy = vec![usize::MAX; n];
    for &v in &sets.s_hat {
        sep_copy[v] = copies.len();
        copies_of[v].push(copies.len());
        copies.push((v, CopyTag::Separator));
    }
    let sep_range = sep_start..copies.len();

    // copy of an interior vertex in its own subdomain
    let mut home_copy = vec![usize::MAX; n];
    for (i, set) in pr.interior.iter().enumerate() {
        for &v in set {
            home_copy[v] = lookup_copy(&part_copy[i], v).expect("interior vertices are copied");
        }
    }
    let primary: Vec<usize> = (0..n)
        .map(|v| if home_copy[v] != usize::MAX { home_copy[v] } else { sep_copy[v] })
        .collect();

    let mut triplets = Vec::new();
    for (row, &(u, tag)) in copies.iter().enumerate() {
        let (cols, vals) = a.row(u);
        for (&v, &val) in cols.iter().zip(vals) {
            let col = match tag {
                CopyTag::Part(i) => lookup_copy(&part_copy[i], v).unwrap_or(sep_copy[v]),
                CopyTag::Separator => {
                    if sep_copy[v] != usize::MAX {
                        sep_copy[v]
                    } else {
                        home_copy[v]
                    }
                }
            };
            debug_assert!(col != usize::MAX, "every neighbour has a reachable copy");
            triplets.push((row, col, val));
        }
    }
    let m = copies.len();
    let a_tilde = CsrMatrix::from_triplets(m, m, &triplets).expect("copies index the overlapped matrix");
    let b_tilde = copies.iter().map(|&(v, _)| b[v]).collect();
    Ok(OverlappedSystem {
        a: a_tilde,
        b: b_tilde,
        map: OverlapMap {
            copies,
            copies_of,
            primary,
        },
        part_ranges,
        sep_range,
    })
}

fn lookup_copy(lookup: &[(usize, usize)], v: usize) -> Option<usize> {
    lookup.binary_search_by_key(&v, |e| e.0).ok().map(|k| lookup[k].1)
}

/// `x(v) = x̃(primary(v))`.
pub fn restrict_solution(x_tilde: &[f64], map: &OverlapMap) -> Result<Vec<f64>, OverlapError> {
    if x_tilde.len() != map.n_overlapped() {
        return Err(OverlapError::LengthMismatch {
            expected: map.n_overlapped(),
            got: x_tilde.len(),
        });
    }
    Ok(map.primary.iter().map(|&c| x_tilde[c]).collect())
}

/// Border-block density `nnz / (rows × cols)` for rows in `rows` and
/// columns in `cols_mask`.
fn border_density(a: &CsrMatrix, rows: impl Iterator<Item = usize>, cols_mask: &[bool], n_cols: usize) -> f64 {
    let mut nnz = 0usize;
    let mut n_rows = 0usize;
    for r in rows {
        n_rows += 1;
        nnz += a.row(r).0.iter().filter(|&&c| cols_mask[c]).count();
    }
    let size = n_rows * n_cols;
    if size == 0 {
        0.0
    } else {
        nnz as f64 / size as f64
    }
}

pub fn overlap_stats(a: &CsrMatrix, pr: &PartitionResult, ov: &OverlappedSystem) -> OverlapStats {
    let sep_mask = pr.interface_mask();
    let sp_f_before = border_density(a, pr.interior.iter().flatten().copied(), &sep_mask, pr.interface.len());
    let mut sep_mask_t = vec![false; ov.a.n_rows()];
    for c in ov.sep_range.clone() {
        sep_mask_t[c] = true;
    }
    let sp_f_after = border_density(&ov.a, 0..ov.sep_range.start, &sep_mask_t, ov.sep_range.len());
    OverlapStats {
        size_ratio: ov.a.n_rows() as f64 / a.n_rows().max(1) as f64,
        nnz_ratio: ov.a.nnz() as f64 / a.nnz().max(1) as f64,
        separator_before: pr.interface.len(),
        separator_after: ov.sep_range.len(),
        sp_f_before,
        sp_f_after,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::partition::partition_graph;

    fn example5_partition() -> (CsrMatrix, PartitionResult) {
        let a = gallery::example5_matrix();
        let g = build_adjacency(&a, true).unwrap();
        let pr = PartitionResult::from_interiors(&g, vec![vec![0, 1], vec![2]], vec![3, 4]).unwrap();
        (a, pr)
    }

    #[test]
    fn example5_extension_sets() {
        let (a, pr) = example5_partition();
        let s = compute_extension_sets(&a, &pr);
        // 0-based: ext_1 = {4,5}, Ω̂₁ = {1,2,4,5}, Ŝ = {4,5,1,3}
        assert_eq!(s.ext, vec![vec![3, 4], vec![3, 4]]);
        assert_eq!(s.extended[0], vec![0, 1, 3, 4]);
        assert_eq!(s.extended[1], vec![2, 3, 4]);
        assert_eq!(s.s_hat, vec![3, 4, 0, 2]);
    }

    #[test]
    fn no_separator_is_a_no_op() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]);
        let g = build_adjacency(&a, true).unwrap();
        let pr = partition_graph(&g, 2, 0).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let ov = build_overlapped(&a, &b, &pr).unwrap();
        assert_eq!(ov.a.n_rows(), 4);
        assert!(ov.sep_range.is_empty());
        let stats = overlap_stats(&a, &pr, &ov);
        assert_eq!((stats.size_ratio, stats.nnz_ratio), (1.0, 1.0));
        let x = restrict_solution(&ov.b, &ov.map).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn example5_stats() {
        let (a, pr) = example5_partition();
        let ov = build_overlapped(&a, &[1.0; 5], &pr).unwrap();
        let s = overlap_stats(&a, &pr, &ov);
        assert!((s.size_ratio - 2.2).abs() < 1e-15);
        assert_eq!((s.separator_before, s.separator_after), (2, 4));
        // F = rows {1,2,3} x cols {4,5}: 4 entries of 6
        assert!((s.sp_f_before - 4.0 / 6.0).abs() < 1e-15);
        // F̃: a43, a53 in rows 4_1, 5_1 and a41, a51 in rows 4_2, 5_2
        assert!((s.sp_f_after - 4.0 / 28.0).abs() < 1e-15);
        assert!(ov.partition().is_ok());
    }

    #[test]
    fn restrict_checks_length() {
        let (a, pr) = example5_partition();
        let ov = build_overlapped(&a, &[1.0; 5], &pr).unwrap();
        assert!(matches!(
            restrict_solution(&[0.0; 5], &ov.map),
            Err(OverlapError::LengthMismatch { expected: 11, got: 5 })
        ));
    }
}
