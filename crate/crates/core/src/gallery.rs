//! Deterministic test matrices: random sparse systems, model PDE operators
//! and the 5x5 overlapping example.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::CsrMatrix;

/// 1-based label `10*i + j` for the entry at 0-based `(i, j)` of
/// [`example5_matrix`]; lets tests recognise where an entry ended up.
pub fn example5_value(i: usize, j: usize) -> f64 {
    (10 * (i + 1) + (j + 1)) as f64
}

/// The 5x5 example with two independent clusters `{1,2}`, `{3}` and the
/// separator `{4,5}` (1-based). Entry `a_ij` has value `10 i + j`.
pub fn example5_matrix() -> CsrMatrix {
    let pattern: [(usize, usize); 15] = [
        (1, 1), (1, 2), (1, 4), (1, 5),
        (2, 1), (2, 2),
        (3, 3), (3, 4), (3, 5),
        (4, 1), (4, 3), (4, 4),
        (5, 1), (5, 3), (5, 5),
    ];
    let t: Vec<_> = pattern
        .iter()
        .map(|&(i, j)| (i - 1, j - 1, example5_value(i - 1, j - 1)))
        .collect();
    CsrMatrix::from_triplets(5, 5, &t).expect("static pattern")
}

/// Random pattern with roughly `density * n` off-diagonal entries per row,
/// values uniform in `[-1, 1]`, and a diagonal whose magnitude is a random
/// multiple in `[0.6, 1.4]` of the off-diagonal row sum (plus one). The
/// sign of each diagonal entry is random, so the matrix is nonsymmetric and
/// generally indefinite but comfortably nonsingular.
pub fn random_sparse(n: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let mut row_sum = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < density {
                let v: f64 = rng.gen_range(-1.0..1.0);
                row_sum[i] += v.abs();
                t.push((i, j, v));
            }
        }
    }
    for (i, s) in row_sum.iter().enumerate() {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        t.push((i, i, sign * (1.0 + s) * rng.gen_range(0.6..1.4)));
    }
    CsrMatrix::from_triplets(n, n, &t).expect("indices in range")
}

/// Random nonsingular matrix with local coupling: a 2D grid connectivity
/// (`m x m` points, `n = m*m`) with random weights, a few random extra
/// entries within `band` of the diagonal, and a random-sign diagonal as in
/// [`random_sparse`]. Separators stay small, so it partitions like a PDE
/// problem while having no exploitable symmetry.
pub fn random_grid(m: usize, band: usize, extra_per_row: usize, seed: u64) -> CsrMatrix {
    let n = m * m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let mut row_sum = vec![0.0; n];
    let push = |t: &mut Vec<(usize, usize, f64)>, rs: &mut Vec<f64>, i: usize, j: usize, rng: &mut ChaCha8Rng| {
        let v: f64 = rng.gen_range(-1.0..1.0);
        rs[i] += v.abs();
        t.push((i, j, v));
    };
    for y in 0..m {
        for x in 0..m {
            let i = y * m + x;
            if x > 0 {
                push(&mut t, &mut row_sum, i, i - 1, &mut rng);
            }
            if x + 1 < m {
                push(&mut t, &mut row_sum, i, i + 1, &mut rng);
            }
            if y > 0 {
                push(&mut t, &mut row_sum, i, i - m, &mut rng);
            }
            if y + 1 < m {
                push(&mut t, &mut row_sum, i, i + m, &mut rng);
            }
            for _ in 0..extra_per_row {
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(n - 1);
                let j = rng.gen_range(lo..=hi);
                if j != i {
                    push(&mut t, &mut row_sum, i, j, &mut rng);
                }
            }
        }
    }
    for (i, s) in row_sum.iter().enumerate() {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        t.push((i, i, sign * (1.0 + s) * rng.gen_range(0.6..1.4)));
    }
    CsrMatrix::from_triplets(n, n, &t).expect("indices in range")
}

/// Random directed pattern (structurally nonsymmetric) with a full
/// diagonal; off-diagonal entries appear independently with probability
/// `density`.
pub fn random_directed(n: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                t.push((i, i, 4.0 + rng.gen::<f64>()));
            } else if rng.gen::<f64>() < density {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t).expect("indices in range")
}

/// 5-point Laplacian on an `m x m` grid (SPD).
pub fn poisson2d(m: usize) -> CsrMatrix {
    convection_diffusion2d(m, 0.0)
}

/// Upwinded convection-diffusion on an `m x m` grid with a constant
/// diagonal wind; `peclet = 0` gives the Laplacian.
pub fn convection_diffusion2d(m: usize, peclet: f64) -> CsrMatrix {
    let n = m * m;
    let h = 1.0 / (m as f64 + 1.0);
    let c = peclet * h;
    let mut t = Vec::with_capacity(5 * n);
    for y in 0..m {
        for x in 0..m {
            let i = y * m + x;
            t.push((i, i, 4.0 + 2.0 * c));
            if x > 0 {
                t.push((i, i - 1, -1.0 - c));
            }
            if x + 1 < m {
                t.push((i, i + 1, -1.0));
            }
            if y > 0 {
                t.push((i, i - m, -1.0 - c));
            }
            if y + 1 < m {
                t.push((i, i + m, -1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t).expect("indices in range")
}

/// Jacobian of a two-species Brusselator reaction-diffusion model on an
/// `m x m` grid, `n = 2 m^2`; `m = 32` gives a 2048-unknown problem of the
/// same structure as the classic `rdb2048` test matrix.
pub fn brusselator2d(m: usize) -> CsrMatrix {
    let (a, b) = (2.0, 5.45);
    let (du, dv) = (0.008, 0.004);
    let h = 1.0 / (m as f64 + 1.0);
    let (su, sv) = (du / (h * h), dv / (h * h));
    let n = 2 * m * m;
    let mut t = Vec::with_capacity(12 * m * m);
    for y in 0..m {
        for x in 0..m {
            let g = y * m + x;
            let (u, v) = (2 * g, 2 * g + 1);
            // steady state u = a, v = b/a
            t.push((u, u, -4.0 * su + (b - 1.0)));
            t.push((u, v, a * a));
            t.push((v, u, -b));
            t.push((v, v, -4.0 * sv - a * a));
            let mut nb = |gn: usize| {
                t.push((u, 2 * gn, su));
                t.push((v, 2 * gn + 1, sv));
            };
            if x > 0 {
                nb(g - 1);
            }
            if x + 1 < m {
                nb(g + 1);
            }
            if y > 0 {
                nb(g - m);
            }
            if y + 1 < m {
                nb(g + m);
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t).expect("indices in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example5_pattern() {
        let a = example5_matrix();
        assert_eq!(a.nnz(), 15);
        assert_eq!(a.get(3, 2), 43.0);
        assert_eq!(a.get(2, 3), 34.0);
        assert_eq!(a.get(1, 3), 0.0);
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        assert_eq!(random_sparse(50, 0.1, 1), random_sparse(50, 0.1, 1));
        assert_ne!(random_sparse(50, 0.1, 1), random_sparse(50, 0.1, 2));
        for a in [
            random_sparse(50, 0.1, 1),
            random_grid(10, 5, 1, 3),
            random_directed(30, 0.1, 4),
            poisson2d(6),
            convection_diffusion2d(6, 10.0),
            brusselator2d(4),
        ] {
            assert!(a.check_invariants());
            assert!(a.diagonal().iter().all(|&d| d != 0.0));
        }
        assert_eq!(brusselator2d(32).n_rows(), 2048);
        assert!(poisson2d(5).is_symmetric());
    }
}
