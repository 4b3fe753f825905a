//! Sparse layer kernels against straightforward dense re-implementations.

mod common;

use common::{random_graph, random_matrix, rng};
use eta_graph::encoders::{
    attention_entries, gat_layer_forward, gcn_layer_forward, sage_layer_forward, Activation, Encoder, EncoderConfig,
    EncoderKind, GraphOperators, HeadParams, Neighborhood,
};
use eta_graph::numeric::{DenseMatrix, ParamStore, SparseAdjacency};
use proptest::prelude::*;
use rand::Rng;

type Dense = Vec<Vec<f64>>;

fn to_rows(m: &DenseMatrix<f64>) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn naive_matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect())
        .collect()
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn dense_adjacency(adj: &SparseAdjacency<f64>) -> Dense {
    let n = adj.n();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for &j in adj.neighbors(i) {
            a[i][j] = 1.0;
        }
    }
    a
}

fn dense_gcn(adj: &SparseAdjacency<f64>, h: &Dense, w: &Dense) -> Dense {
    let n = adj.n();
    let mut a = dense_adjacency(adj);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let norm: Dense = (0..n).map(|i| (0..n).map(|j| a[i][j] / (d[i] * d[j]).sqrt()).collect()).collect();
    naive_matmul(&naive_matmul(&norm, h), w).into_iter().map(|r| r.into_iter().map(relu).collect()).collect()
}

fn dense_sage(adj: &SparseAdjacency<f64>, h: &Dense, w: &Dense) -> Dense {
    let a = dense_adjacency(adj);
    let concat: Dense = (0..h.len())
        .map(|i| {
            let deg: f64 = a[i].iter().sum();
            let mut mean = vec![0.0; h[0].len()];
            for (j, hj) in h.iter().enumerate() {
                if a[i][j] != 0.0 {
                    for (m, v) in mean.iter_mut().zip(hj) {
                        *m += v / deg;
                    }
                }
            }
            h[i].iter().copied().chain(mean).collect()
        })
        .collect();
    naive_matmul(&concat, w).into_iter().map(|r| r.into_iter().map(relu).collect()).collect()
}

/// One head per `(W, a)`; outputs concatenated.
fn dense_gat(adj: &SparseAdjacency<f64>, h: &Dense, heads: &[(Dense, Vec<f64>)]) -> Dense {
    let n = adj.n();
    let mut a = dense_adjacency(adj);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut out = vec![Vec::new(); n];
    for (w, att) in heads {
        let p = naive_matmul(h, w);
        let f = w[0].len();
        for i in 0..n {
            let logits: Vec<(usize, f64)> = (0..n)
                .filter(|&j| a[i][j] != 0.0)
                .map(|j| {
                    let s: f64 = (0..f).map(|c| att[c] * p[i][c] + att[f + c] * p[j][c]).sum();
                    (j, if s > 0.0 { s } else { 0.2 * s })
                })
                .collect();
            let max = logits.iter().map(|&(_, e)| e).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|&(_, e)| (e - max).exp()).sum();
            let mut acc = vec![0.0; f];
            for &(j, e) in &logits {
                let alpha = (e - max).exp() / z;
                for c in 0..f {
                    acc[c] += alpha * p[j][c];
                }
            }
            out[i].extend(acc.into_iter().map(relu));
        }
    }
    out
}

fn max_diff(a: &DenseMatrix<f64>, b: &Dense) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        assert_eq!(a.cols(), row.len());
        for (j, &v) in row.iter().enumerate() {
            worst = worst.max((a[(i, j)] - v).abs());
        }
    }
    worst
}

#[test]
fn gcn_matches_dense_on_100_graphs() {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.gen_range(1..=20);
        let adj = random_graph(n, r.gen_range(0.05..0.6), &mut r);
        let h = random_matrix(n, 6, &mut r);
        let w = random_matrix(6, 5, &mut r);
        let (out, _) = gcn_layer_forward(&adj.gcn_normalized(), &h, &w, Activation::Relu).unwrap();
        worst = worst.max(max_diff(&out, &dense_gcn(&adj, &to_rows(&h), &to_rows(&w))));
    }
    assert!(worst < 1e-10, "max abs diff {worst:e}");
}

#[test]
fn gat_matches_dense_on_100_graphs() {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.gen_range(1..=20);
        let adj = random_graph(n, r.gen_range(0.05..0.6), &mut r);
        let h = random_matrix(n, 6, &mut r);
        let heads: Vec<(DenseMatrix<f64>, DenseMatrix<f64>)> =
            (0..r.gen_range(1..=4)).map(|_| (random_matrix(6, 3, &mut r), random_matrix(1, 6, &mut r))).collect();
        let hp: Vec<_> = heads.iter().map(|(w, a)| HeadParams { weight: w, attention: a }).collect();
        let (out, _) = gat_layer_forward(&adj.with_self_loops(), &h, &hp, Activation::Relu).unwrap();
        let dense_heads: Vec<(Dense, Vec<f64>)> = heads.iter().map(|(w, a)| (to_rows(w), a.row(0).to_vec())).collect();
        worst = worst.max(max_diff(&out, &dense_gat(&adj, &to_rows(&h), &dense_heads)));
    }
    assert!(worst < 1e-10, "max abs diff {worst:e}");
}

#[test]
fn sage_full_neighborhood_matches_dense() {
    let mut r = rng(3);
    for _ in 0..100 {
        let n = r.gen_range(1..=20);
        let adj = random_graph(n, r.gen_range(0.05..0.6), &mut r);
        let h = random_matrix(n, 4, &mut r);
        let w = random_matrix(8, 5, &mut r);
        let (out, _) = sage_layer_forward(&adj, &h, &w, None, 0, Activation::Relu).unwrap();
        assert!(max_diff(&out, &dense_sage(&adj, &to_rows(&h), &to_rows(&w))) < 1e-10);
    }
}

#[test]
fn attention_rows_sum_to_one() {
    let mut r = rng(4);
    for _ in 0..100 {
        let n = r.gen_range(1..=30);
        let support = random_graph(n, r.gen_range(0.05..0.5), &mut r).with_self_loops();
        let h = random_matrix(n, 5, &mut r).scaled(3.0);
        let heads: Vec<_> = (0..4).map(|_| (random_matrix(5, 4, &mut r), random_matrix(1, 8, &mut r).scaled(3.0))).collect();
        let hp: Vec<_> = heads.iter().map(|(w, a)| HeadParams { weight: w, attention: a }).collect();
        let (_, cache) = gat_layer_forward(&support, &h, &hp, Activation::Relu).unwrap();
        for head in &cache.heads {
            let mut sums = vec![0.0f64; n];
            for (i, _, a) in attention_entries(&support, head) {
                assert!(a > 0.0);
                sums[i] += a;
            }
            for s in sums {
                assert!((s - 1.0).abs() < 1e-6, "row sum {s}");
            }
        }
    }
}

fn encoder(kind: EncoderKind, layers: usize, input: usize) -> (Encoder, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut cfg = EncoderConfig::new(kind, layers, input).with_seed(11);
    cfg.hidden_dim = 16;
    let enc = Encoder::new(cfg, &mut store, "").unwrap();
    (enc, store)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encoders_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..14, kind_ix in 0usize..3, layers in 1usize..=3) {
        let kind = EncoderKind::ALL[kind_ix];
        let mut r = rng(seed);
        let adj = random_graph(n, 0.35, &mut r);
        let x = random_matrix(n, 5, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        // Vertex v of the original graph becomes vertex inv[v] of the permuted one.
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| adj.neighbors(i).iter().map(move |&j| (i, j))).map(|(i, j)| (inv[i], inv[j])).collect();
        let adj_p = SparseAdjacency::from_undirected_edges(n, edges);
        let x_p = x.select_rows(&perm);

        let (enc, store) = encoder(kind, layers, 5);
        let z = enc.forward(&GraphOperators::new(&adj), &x, &store, Neighborhood::Full).unwrap().0;
        let z_p = enc.forward(&GraphOperators::new(&adj_p), &x_p, &store, Neighborhood::Full).unwrap().0;
        prop_assert!(z.select_rows(&perm).max_abs_diff(&z_p) < 1e-10);
    }

    #[test]
    fn f32_agrees_with_f64(seed in any::<u64>(), kind_ix in 0usize..3) {
        let kind = EncoderKind::ALL[kind_ix];
        let mut r = rng(seed);
        let adj = random_graph(12, 0.3, &mut r);
        let x = random_matrix(12, 6, &mut r);
        let (enc, store) = encoder(kind, 2, 6);
        let mut store32 = ParamStore::<f32>::new();
        for p in store.iter() {
            store32.register(p.name.clone(), p.value.cast());
        }
        let z64 = enc.forward(&GraphOperators::<f64>::new(&adj), &x, &store, Neighborhood::Full).unwrap().0;
        let z32 = enc.forward(&GraphOperators::<f32>::new(&adj), &x.cast(), &store32, Neighborhood::Full).unwrap().0;
        let scale = z64.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(z32.cast::<f64>().max_abs_diff(&z64) / scale < 1e-4);
    }
}
