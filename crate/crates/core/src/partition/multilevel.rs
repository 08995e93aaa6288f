//! Multilevel recursive bisection: heavy-edge matching coarsening, greedy
//! graph growing on the coarsest graph, and Fiduccia-Mattheyses boundary
//! refinement while uncoarsening.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AdjacencyGraph;

#[derive(Debug, Clone)]
pub struct BisectionOptions {
    /// Allowed ratio between the largest final part and the average part.
    pub imbalance: f64,
    /// Coarsening stops once a graph has at most this many vertices.
    pub coarsen_to: usize,
    /// Number of greedy-growing attempts on the coarsest graph.
    pub init_trials: usize,
    /// Maximum refinement passes per level.
    pub fm_passes: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            imbalance: 1.2,
            coarsen_to: 40,
            init_trials: 8,
            fm_passes: 8,
        }
    }
}

/// Vertex- and edge-weighted graph used internally by the multilevel scheme.
#[derive(Debug, Clone)]
struct WGraph {
    xadj: Vec<usize>,
    adj: Vec<usize>,
    ewgt: Vec<i64>,
    vwgt: Vec<i64>,
}

impl WGraph {
    fn n(&self) -> usize {
        self.vwgt.len()
    }

    fn total_weight(&self) -> i64 {
        self.vwgt.iter().sum()
    }

    fn edges(&self, v: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        (self.xadj[v]..self.xadj[v + 1]).map(move |k| (self.adj[k], self.ewgt[k]))
    }

    fn induced(g: &AdjacencyGraph, verts: &[usize]) -> WGraph {
        let mut local = vec![usize::MAX; g.n()];
        for (i, &v) in verts.iter().enumerate() {
            local[v] = i;
        }
        let mut xadj = Vec::with_capacity(verts.len() + 1);
        let mut adj = Vec::new();
        xadj.push(0);
        for &v in verts {
            for &u in g.neighbors(v) {
                if local[u] != usize::MAX {
                    adj.push(local[u]);
                }
            }
            xadj.push(adj.len());
        }
        let ewgt = vec![1; adj.len()];
        WGraph {
            xadj,
            adj,
            ewgt,
            vwgt: vec![1; verts.len()],
        }
    }
}

pub(super) fn recursive_bisection(g: &AdjacencyGraph, p: usize, seed: u64, opts: &BisectionOptions) -> Vec<usize> {
    let mut part = vec![0usize; g.n()];
    let levels = (p as f64).log2().ceil().max(1.0);
    let ub = opts.imbalance.max(1.0).powf(1.0 / levels);
    let verts: Vec<usize> = (0..g.n()).collect();
    split(g, &verts, p, 0, seed, ub, opts, &mut part);
    part
}

#[allow(clippy::too_many_arguments)]
fn split(
    g: &AdjacencyGraph,
    verts: &[usize],
    p: usize,
    offset: usize,
    seed: u64,
    ub: f64,
    opts: &BisectionOptions,
    part: &mut [usize],
) {
    if p == 1 {
        for &v in verts {
            part[v] = offset;
        }
        return;
    }
    let p0 = p / 2;
    let p1 = p - p0;
    let sub = WGraph::induced(g, verts);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, offset as u64, p as u64));
    let mut side = bisect(&sub, p0 as f64 / p as f64, ub, &mut rng, opts);
    ensure_counts(&sub, &mut side, [p0, p1]);

    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (i, &v) in verts.iter().enumerate() {
        if side[i] == 0 {
            left.push(v);
        } else {
            right.push(v);
        }
    }
    split(g, &left, p0, offset, seed, ub, opts, part);
    split(g, &right, p1, offset + p0, seed, ub, opts, part);
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 31;
    x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Each side must hold at least as many vertices as parts it will be split
/// into.
fn ensure_counts(g: &WGraph, side: &mut [u8], need: [usize; 2]) {
    for s in 0..2u8 {
        let mut have = side.iter().filter(|&&x| x == s).count();
        let other = 1 - s;
        while have < need[s as usize] {
            // prefer a vertex of the other side that touches this side
            let v = (0..g.n())
                .find(|&v| side[v] == other && g.edges(v).any(|(u, _)| side[u] == s))
                .or_else(|| (0..g.n()).find(|&v| side[v] == other))
                .expect("enough vertices overall");
            side[v] = s;
            have += 1;
        }
    }
}

fn bisect(g: &WGraph, frac0: f64, ub: f64, rng: &mut ChaCha8Rng, opts: &BisectionOptions) -> Vec<u8> {
    let n = g.n();
    if n <= opts.coarsen_to.max(2) {
        return initial_bisection(g, frac0, ub, rng, opts);
    }
    let (cmap, cn) = heavy_edge_matching(g, rng, opts);
    if cn as f64 > 0.95 * n as f64 {
        return initial_bisection(g, frac0, ub, rng, opts);
    }
    let coarse = contract(g, &cmap, cn);
    let cside = bisect(&coarse, frac0, ub, rng, opts);
    let mut side: Vec<u8> = cmap.iter().map(|&c| cside[c]).collect();
    let bounds = Bounds::new(g, frac0, ub);
    fm_refine(g, &mut side, &bounds, opts.fm_passes);
    side
}

fn heavy_edge_matching(g: &WGraph, rng: &mut ChaCha8Rng, opts: &BisectionOptions) -> (Vec<usize>, usize) {
    let n = g.n();
    let max_vw = ((1.5 * g.total_weight() as f64 / opts.coarsen_to as f64) as i64).max(2);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut cmap = vec![usize::MAX; n];
    let mut cn = 0;
    for &u in &order {
        if cmap[u] != usize::MAX {
            continue;
        }
        let mut best: Option<(i64, usize)> = None;
        for (v, w) in g.edges(u) {
            if v == u || cmap[v] != usize::MAX || g.vwgt[u] + g.vwgt[v] > max_vw {
                continue;
            }
            best = match best {
                Some((bw, bv)) if bw > w || (bw == w && bv < v) => Some((bw, bv)),
                _ => Some((w, v)),
            };
        }
        cmap[u] = cn;
        if let Some((_, v)) = best {
            cmap[v] = cn;
        }
        cn += 1;
    }
    (cmap, cn)
}

fn contract(g: &WGraph, cmap: &[usize], cn: usize) -> WGraph {
    let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(2); cn];
    for (v, &c) in cmap.iter().enumerate() {
        members[c].push(v);
    }
    let mut vwgt = vec![0i64; cn];
    let mut xadj = Vec::with_capacity(cn + 1);
    let mut adj = Vec::new();
    let mut ewgt = Vec::new();
    let mut slot = vec![usize::MAX; cn];
    xadj.push(0);
    for c in 0..cn {
        let start = adj.len();
        for &v in &members[c] {
            vwgt[c] += g.vwgt[v];
            for (u, w) in g.edges(v) {
                let cu = cmap[u];
                if cu == c {
                    continue;
                }
                if slot[cu] == usize::MAX || slot[cu] < start {
                    slot[cu] = adj.len();
                    adj.push(cu);
                    ewgt.push(w);
                } else {
                    ewgt[slot[cu]] += w;
                }
            }
        }
        xadj.push(adj.len());
    }
    WGraph {
        xadj,
        adj,
        ewgt,
        vwgt,
    }
}

struct Bounds {
    max: [f64; 2],
}

impl Bounds {
    fn new(g: &WGraph, frac0: f64, ub: f64) -> Self {
        let total = g.total_weight() as f64;
        let heaviest = g.vwgt.iter().copied().max().unwrap_or(1) as f64;
        let t = [frac0 * total, (1.0 - frac0) * total];
        // coarse graphs cannot always be split finer than one vertex weight
        let slack = |t: f64| (ub * t).max(t + if g.vwgt.iter().all(|&w| w == 1) { 0.0 } else { heaviest });
        Self {
            max: [slack(t[0]), slack(t[1])],
        }
    }

    fn overweight(&self, w: &[i64; 2]) -> f64 {
        (w[0] as f64 - self.max[0]).max(0.0) + (w[1] as f64 - self.max[1]).max(0.0)
    }
}

fn initial_bisection(g: &WGraph, frac0: f64, ub: f64, rng: &mut ChaCha8Rng, opts: &BisectionOptions) -> Vec<u8> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    let bounds = Bounds::new(g, frac0, ub);
    let target0 = frac0 * g.total_weight() as f64;
    let mut best: Option<(f64, i64, Vec<u8>)> = None;
    for _ in 0..opts.init_trials.max(1) {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut side = vec![1u8; n];
        let mut w0 = 0i64;
        let mut queue = VecDeque::new();
        let mut next_seed = 0;
        let mut queued = vec![false; n];
        // breadth-first growth of side 0; restarts in a fresh component when
        // the frontier empties
        while (w0 as f64) < target0 {
            let v = match queue.pop_front() {
                Some(v) => v,
                None => {
                    while next_seed < n && queued[order[next_seed]] {
                        next_seed += 1;
                    }
                    if next_seed == n {
                        break;
                    }
                    let v = order[next_seed];
                    queued[v] = true;
                    v
                }
            };
            if (w0 + g.vwgt[v]) as f64 > bounds.max[0] && w0 > 0 {
                continue;
            }
            side[v] = 0;
            w0 += g.vwgt[v];
            for (u, _) in g.edges(v) {
                if !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
        fm_refine(g, &mut side, &bounds, opts.fm_passes);
        let w = side_weights(g, &side);
        let state = (bounds.overweight(&w), cut_of(g, &side));
        let better = match &best {
            None => true,
            Some((ow, c, _)) => state.0 < *ow || (state.0 == *ow && state.1 < *c),
        };
        if better {
            best = Some((state.0, state.1, side));
        }
    }
    best.expect("at least one trial").2
}

fn side_weights(g: &WGraph, side: &[u8]) -> [i64; 2] {
    let mut w = [0i64; 2];
    for (v, &s) in side.iter().enumerate() {
        w[s as usize] += g.vwgt[v];
    }
    w
}

fn cut_of(g: &WGraph, side: &[u8]) -> i64 {
    let mut cut = 0;
    for v in 0..g.n() {
        for (u, w) in g.edges(v) {
            if side[u] != side[v] {
                cut += w;
            }
        }
    }
    cut / 2
}

/// Fiduccia-Mattheyses passes with single-vertex moves. Each pass moves
/// vertices greedily by gain (ties: lowest index) and rolls back to the best
/// prefix, ranked first by balance violation and then by cut.
fn fm_refine(g: &WGraph, side: &mut [u8], bounds: &Bounds, passes: usize) {
    let n = g.n();
    if n < 2 {
        return;
    }
    let patience = (n / 20).clamp(25, 400);
    for _ in 0..passes {
        let mut w = side_weights(g, side);
        let mut gain = vec![0i64; n];
        let mut boundary = vec![false; n];
        let mut cut = 0i64;
        for v in 0..n {
            for (u, ew) in g.edges(v) {
                if side[u] != side[v] {
                    gain[v] += ew;
                    boundary[v] = true;
                    cut += ew;
                } else {
                    gain[v] -= ew;
                }
            }
        }
        cut /= 2;
        let start = (bounds.overweight(&w), cut);

        let mut heaps: [BinaryHeap<(i64, Reverse<usize>)>; 2] = [BinaryHeap::new(), BinaryHeap::new()];
        let heavy = if w[0] as f64 > bounds.max[0] {
            Some(0u8)
        } else if w[1] as f64 > bounds.max[1] {
            Some(1u8)
        } else {
            None
        };
        for v in 0..n {
            if boundary[v] || heavy == Some(side[v]) {
                heaps[side[v] as usize].push((gain[v], Reverse(v)));
            }
        }

        let mut locked = vec![false; n];
        let mut moves: Vec<usize> = Vec::new();
        let mut best = start;
        let mut best_len = 0;
        while let Some(v) = pick_move(g, side, &gain, &locked, &mut heaps, &w, bounds) {
            let from = side[v] as usize;
            let to = 1 - from;
            side[v] = to as u8;
            w[from] -= g.vwgt[v];
            w[to] += g.vwgt[v];
            cut -= gain[v];
            locked[v] = true;
            gain[v] = -gain[v];
            for (u, ew) in g.edges(v) {
                if side[u] as usize == to {
                    gain[u] -= 2 * ew;
                } else {
                    gain[u] += 2 * ew;
                }
                if !locked[u] {
                    heaps[side[u] as usize].push((gain[u], Reverse(u)));
                }
            }
            moves.push(v);
            let state = (bounds.overweight(&w), cut);
            if state.0 < best.0 || (state.0 == best.0 && state.1 < best.1) {
                best = state;
                best_len = moves.len();
            }
            if moves.len() - best_len > patience {
                break;
            }
        }
        for &v in moves[best_len..].iter().rev() {
            side[v] = 1 - side[v];
        }
        if best_len == 0 || !(best.0 < start.0 || best.1 < start.1) {
            break;
        }
    }
}

fn pick_move(
    g: &WGraph,
    side: &[u8],
    gain: &[i64],
    locked: &[bool],
    heaps: &mut [BinaryHeap<(i64, Reverse<usize>)>; 2],
    w: &[i64; 2],
    bounds: &Bounds,
) -> Option<usize> {
    // drop stale heap entries
    for s in 0..2 {
        while let Some(&(gv, Reverse(v))) = heaps[s].peek() {
            if locked[v] || side[v] as usize != s || gain[v] != gv {
                heaps[s].pop();
            } else {
                break;
            }
        }
    }
    let feasible = |s: usize, v: usize| {
        let to = 1 - s;
        let mut nw = *w;
        nw[s] -= g.vwgt[v];
        nw[to] += g.vwgt[v];
        bounds.overweight(&nw) <= bounds.overweight(w)
    };
    let over = [w[0] as f64 > bounds.max[0], w[1] as f64 > bounds.max[1]];
    let order: Vec<usize> = if over[0] {
        vec![0]
    } else if over[1] {
        vec![1]
    } else {
        let top = |s: usize| heaps[s].peek().map(|&(gv, Reverse(v))| (gv, Reverse(v)));
        match (top(0), top(1)) {
            (Some(a), Some(b)) if b > a => vec![1, 0],
            _ => vec![0, 1],
        }
    };
    for s in order {
        if let Some(&(_, Reverse(v))) = heaps[s].peek() {
            if feasible(s, v) {
                heaps[s].pop();
                return Some(v);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> AdjacencyGraph {
        let a = crate::gallery::poisson2d(m);
        super::super::build_adjacency(&a, false).unwrap()
    }

    #[test]
    fn grid_bisection_finds_a_short_cut() {
        let g = grid(16);
        let part = recursive_bisection(&g, 2, 1, &BisectionOptions::default());
        let wg = WGraph::induced(&g, &(0..g.n()).collect::<Vec<_>>());
        let side: Vec<u8> = part.iter().map(|&p| p as u8).collect();
        // a straight cut of a 16x16 grid has 16 edges
        assert!(cut_of(&wg, &side) <= 24, "cut {}", cut_of(&wg, &side));
        let n0 = part.iter().filter(|&&p| p == 0).count();
        assert!((108..=148).contains(&n0), "n0 = {n0}");
    }

    #[test]
    fn contraction_preserves_weights() {
        let g = grid(8);
        let wg = WGraph::induced(&g, &(0..g.n()).collect::<Vec<_>>());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (cmap, cn) = heavy_edge_matching(&wg, &mut rng, &BisectionOptions::default());
        let c = contract(&wg, &cmap, cn);
        assert_eq!(c.total_weight(), wg.total_weight());
        assert!(cn < wg.n());
        // total edge weight drops exactly by the weight of contracted edges
        let internal: i64 = (0..wg.n())
            .flat_map(|v| wg.edges(v).map(move |(u, w)| (v, u, w)))
            .filter(|&(v, u, _)| cmap[v] == cmap[u])
            .map(|(_, _, w)| w)
            .sum();
        let fine: i64 = wg.ewgt.iter().sum();
        let coarse: i64 = c.ewgt.iter().sum();
        assert_eq!(fine - internal, coarse);
    }

    #[test]
    fn disconnected_graph_is_handled() {
        let lists = vec![vec![1], vec![0], vec![3], vec![2], vec![], vec![]];
        let g = AdjacencyGraph::from_neighbor_lists(lists).unwrap();
        let part = recursive_bisection(&g, 3, 0, &BisectionOptions::default());
        let mut counts = [0; 3];
        for p in part {
            counts[p] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0));
    }
}
