#![allow(dead_code)]

use eta_graph::numeric::{DenseMatrix, SparseAdjacency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph; isolated vertices are allowed.
pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> SparseAdjacency<f64> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    SparseAdjacency::from_undirected_edges(n, edges)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn ring(n: usize) -> SparseAdjacency<f64> {
    SparseAdjacency::from_undirected_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
}

/// Two dense communities joined by a single bridge; community `c` has
/// features centred on `±1` in alternating columns.
pub fn two_communities(n: usize, dim: usize, seed: u64) -> (SparseAdjacency<f64>, DenseMatrix<f64>) {
    let mut rng = rng(seed);
    let half = n / 2;
    let mut edges = Vec::new();
    for i in 0..n {
        for _ in 0..4 {
            let (lo, hi) = if i < half { (0, half) } else { (half, n) };
            let j = rng.gen_range(lo..hi);
            edges.push((i, j));
        }
    }
    edges.push((0, half));
    let x = DenseMatrix::from_fn(n, dim, |i, j| {
        let sign = if (i < half) == (j % 2 == 0) { 1.0 } else { -1.0 };
        sign + rng.gen_range(-0.5..0.5)
    });
    (SparseAdjacency::from_undirected_edges(n, edges), x)
}
