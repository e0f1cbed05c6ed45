//! Optimal-matching distances between persistence diagrams, and the vector
//! distances used on persistence-image embeddings.
//!
//! Matching is always within a homology dimension. Finite points may match
//! the diagonal; essential points only match essential points (a count
//! mismatch yields an infinite distance). Bottleneck uses the sup norm on
//! the plane, Wasserstein the Euclidean norm.

use crate::persistence::PersistenceDiagram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorDistance {
    Euclidean,
    Cosine,
}

/// Euclidean norm of the difference, or 1 - cosine similarity.
/// Cosine against a zero vector is defined as 1 (maximal dissimilarity).
pub fn vector_distance(a: &[f64], b: &[f64], kind: VectorDistance) -> f64 {
    assert_eq!(a.len(), b.len(), "vectors must have equal length");
    match kind {
        VectorDistance::Euclidean => {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        }
        VectorDistance::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return 1.0;
            }
            (1.0 - dot / (na * nb)).max(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    birth: f64,
    death: f64,
}

impl Point {
    fn linf(&self, other: &Point) -> f64 {
        (self.birth - other.birth).abs().max((self.death - other.death).abs())
    }

    fn l2(&self, other: &Point) -> f64 {
        let db = self.birth - other.birth;
        let dd = self.death - other.death;
        (db * db + dd * dd).sqrt()
    }

    /// Sup-norm distance to the diagonal.
    fn diag_linf(&self) -> f64 {
        (self.death - self.birth) / 2.0
    }

    /// Euclidean distance to the diagonal.
    fn diag_l2(&self) -> f64 {
        (self.death - self.birth) / std::f64::consts::SQRT_2
    }
}

fn split_dim(d: &PersistenceDiagram, dim: u8) -> (Vec<Point>, Vec<f64>) {
    let mut finite = Vec::new();
    let mut essential_births = Vec::new();
    for p in d.pairs_of_dim(dim) {
        if p.is_essential() {
            essential_births.push(p.birth);
        } else {
            finite.push(Point { birth: p.birth, death: p.death });
        }
    }
    essential_births.sort_by(f64::total_cmp);
    (finite, essential_births)
}

/// Kuhn's augmenting-path maximum bipartite matching.
fn max_bipartite_matching(left: usize, right: usize, adj: &[Vec<usize>]) -> usize {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        match_right: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if match_right[v].is_none()
                    || augment(match_right[v].unwrap(), adj, seen, match_right)
                {
                    match_right[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut match_right: Vec<Option<usize>> = vec![None; right];
    let mut size = 0;
    for u in 0..left {
        let mut seen = vec![false; right];
        if augment(u, adj, &mut seen, &mut match_right) {
            size += 1;
        }
    }
    size
}

/// Is there a perfect matching using only moves of cost <= t?
/// Left side: points of a, then diagonal partners for b's points.
/// Right side: points of b, then diagonal partners for a's points.
fn bottleneck_feasible(a: &[Point], b: &[Point], t: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    let total = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if x.linf(y) <= t {
                adj[i].push(j);
            }
        }
        if x.diag_linf() <= t {
            adj[i].push(m + i);
        }
    }
    for (j, y) in b.iter().enumerate() {
        if y.diag_linf() <= t {
            adj[n + j].push(j);
        }
        for i in 0..n {
            adj[n + j].push(m + i);
        }
    }
    max_bipartite_matching(total, total, &adj) == total
}

fn bottleneck_one_dim(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut candidates: Vec<f64> = vec![0.0];
    for x in a {
        candidates.push(x.diag_linf());
        for y in b {
            candidates.push(x.linf(y));
        }
    }
    for y in b {
        candidates.push(y.diag_linf());
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // Smallest candidate threshold admitting a perfect matching.
    let mut lo = 0;
    let mut hi = candidates.len() - 1;
    debug_assert!(bottleneck_feasible(a, b, candidates[hi]));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if bottleneck_feasible(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Min-max cost of matching two sorted 1-D point sets of equal length
/// (sorted order is optimal for both min-max and min-sum objectives).
fn essential_bottleneck(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact bottleneck distance per dimension; returns per-dim values.
/// A mismatch in essential-pair counts yields `f64::INFINITY`.
pub fn bottleneck_distance_by_dim(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> [f64; 2] {
    let mut out = [0.0; 2];
    for dim in 0..2u8 {
        let (fa, ea) = split_dim(d1, dim);
        let (fb, eb) = split_dim(d2, dim);
        out[dim as usize] = if ea.len() != eb.len() {
            f64::INFINITY
        } else {
            bottleneck_one_dim(&fa, &fb).max(essential_bottleneck(&ea, &eb))
        };
    }
    out
}

/// Exact bottleneck distance (max over dimensions).
pub fn bottleneck_distance(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> f64 {
    let [h0, h1] = bottleneck_distance_by_dim(d1, d2);
    h0.max(h1)
}

/// O(n^3) Hungarian algorithm (potentials formulation) for a square cost
/// matrix; returns the minimum assignment cost.
fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut assignment = vec![0usize; n + 1]; // assignment[j] = row matched to column j (1-based)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assignment[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assignment[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assignment[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assignment[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assignment[j0] = assignment[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[assignment[j] - 1][j - 1]).sum()
}

/// Sum of p-th powers of the optimal matching per dimension.
fn wasserstein_power_one_dim(a: &[Point], b: &[Point], p: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n + m == 0 {
        return 0.0;
    }
    // Augmented square matrix: real-vs-real block, then diagonal rows and
    // columns; dummy-vs-dummy is free.
    let total = n + m;
    let mut cost = vec![vec![0.0; total]; total];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cost[i][j] = x.l2(y).powf(p);
        }
        let d = x.diag_l2().powf(p);
        for k in 0..n {
            cost[i][m + k] = d;
        }
    }
    for j in 0..m {
        let d = b[j].diag_l2().powf(p);
        for row in 0..m {
            cost[n + row][j] = d;
        }
    }
    hungarian(&cost)
}

/// Exact p-Wasserstein distance per dimension (each value already rooted).
pub fn wasserstein_distance_by_dim(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
) -> [f64; 2] {
    assert!(p >= 1.0, "p must be at least 1");
    let mut out = [0.0; 2];
    for dim in 0..2u8 {
        let (fa, ea) = split_dim(d1, dim);
        let (fb, eb) = split_dim(d2, dim);
        out[dim as usize] = if ea.len() != eb.len() {
            f64::INFINITY
        } else {
            let essential: f64 = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs().powf(p)).sum();
            (wasserstein_power_one_dim(&fa, &fb, p) + essential).powf(1.0 / p)
        };
    }
    out
}

/// Exact p-Wasserstein distance with per-dimension matching, pooled as
/// (sum of per-dimension p-th-power costs)^(1/p).
pub fn wasserstein_distance(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> f64 {
    let [h0, h1] = wasserstein_distance_by_dim(d1, d2, p);
    if h0.is_infinite() || h1.is_infinite() {
        return f64::INFINITY;
    }
    (h0.powf(p) + h1.powf(p)).powf(1.0 / p)
}
