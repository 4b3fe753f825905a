//! Analytic gradients against central finite differences, 64-bit, n ≤ 10.

mod common;

use common::{random_graph, random_matrix, rng};
use eta_graph::dgi::DgiModel;
use eta_graph::encoders::{
    gat_layer_backward, gat_layer_forward, gcn_layer_backward, gcn_layer_forward, sage_layer_backward, sage_layer_forward,
    Activation, Encoder, EncoderConfig, EncoderKind, GraphOperators, HeadParams, Neighborhood,
};
use eta_graph::linkpred::{sample_pairs, LinkPredModel};
use eta_graph::numeric::{dot, finite_difference_check, DenseMatrix, GradCheckConfig, ParamStore, SparseAdjacency};
use eta_graph::regression::{Mlp, MlpConfig};

const TOL: f64 = 1e-4;

fn check(store: &mut ParamStore<f64>, loss: impl FnMut(&ParamStore<f64>) -> f64) -> f64 {
    let report = finite_difference_check(store, GradCheckConfig { eps: 1e-6, max_coords_per_param: Some(48) }, loss);
    assert!(report.checked > 0);
    assert!(report.max_rel_error < TOL, "max relative error {} at {:?}", report.max_rel_error, report.worst);
    report.max_rel_error
}

/// Projects an output onto fixed random weights so every entry matters.
fn projection_loss(out: &DenseMatrix<f64>, r: &DenseMatrix<f64>) -> f64 {
    dot(out.as_slice(), r.as_slice())
}

fn small_graph(seed: u64, n: usize) -> SparseAdjacency<f64> {
    random_graph(n, 0.4, &mut rng(seed))
}

#[test]
fn gcn_layer_weights_and_inputs() {
    for seed in 0..4 {
        let mut r = rng(100 + seed);
        let adj = small_graph(seed, 7).gcn_normalized();
        let h = random_matrix(7, 4, &mut r);
        let proj = random_matrix(7, 3, &mut r);
        let mut store = ParamStore::new();
        let w = store.register("w", random_matrix(4, 3, &mut r));
        let hid = store.register("h", h);
        let (_, cache) = gcn_layer_forward(&adj, store.value(hid), store.value(w), Activation::Relu).unwrap();
        let (dh, dw) = gcn_layer_backward(&adj, store.value(w), Activation::Relu, &cache, &proj, true).unwrap();
        store.accumulate(w, &dw).unwrap();
        store.accumulate(hid, &dh.unwrap()).unwrap();
        check(&mut store, |s| projection_loss(&gcn_layer_forward(&adj, s.value(hid), s.value(w), Activation::Relu).unwrap().0, &proj));
    }
}

#[test]
fn sage_layer_weights_and_inputs() {
    for seed in 0..4 {
        let mut r = rng(200 + seed);
        let adj = small_graph(seed, 8);
        let proj = random_matrix(8, 3, &mut r);
        let mut store = ParamStore::new();
        let w = store.register("w", random_matrix(8, 3, &mut r));
        let hid = store.register("h", random_matrix(8, 4, &mut r));
        let fwd = |s: &ParamStore<f64>| sage_layer_forward(&adj, s.value(hid), s.value(w), Some(2), 5, Activation::Relu).unwrap();
        let (_, cache) = fwd(&store);
        let (dh, dw) = sage_layer_backward(store.value(w), Activation::Relu, &cache, &proj, true).unwrap();
        store.accumulate(w, &dw).unwrap();
        store.accumulate(hid, &dh.unwrap()).unwrap();
        check(&mut store, |s| projection_loss(&fwd(s).0, &proj));
    }
}

#[test]
fn gat_layer_weights_attention_and_inputs() {
    for seed in 0..4 {
        let mut r = rng(300 + seed);
        let support = small_graph(seed, 6).with_self_loops();
        let heads = 3;
        let proj = random_matrix(6, 2 * heads, &mut r);
        let mut store = ParamStore::new();
        let hid = store.register("h", random_matrix(6, 4, &mut r));
        let ids: Vec<_> = (0..heads)
            .map(|k| (store.register(format!("w{k}"), random_matrix(4, 2, &mut r)), store.register(format!("a{k}"), random_matrix(1, 4, &mut r))))
            .collect();
        let fwd = |s: &ParamStore<f64>| {
            let hp: Vec<_> = ids.iter().map(|&(w, a)| HeadParams { weight: s.value(w), attention: s.value(a) }).collect();
            gat_layer_forward(&support, s.value(hid), &hp, Activation::Relu).unwrap()
        };
        let (_, cache) = fwd(&store);
        let hp: Vec<_> = ids.iter().map(|&(w, a)| HeadParams { weight: store.value(w), attention: store.value(a) }).collect();
        let (dh, grads) = gat_layer_backward(&support, store.value(hid), &hp, Activation::Relu, &cache, &proj, true).unwrap();
        for (&(w, a), (dw, da)) in ids.iter().zip(grads) {
            store.accumulate(w, &dw).unwrap();
            store.accumulate(a, &da).unwrap();
        }
        store.accumulate(hid, &dh.unwrap()).unwrap();
        check(&mut store, |s| projection_loss(&fwd(s).0, &proj));
    }
}

#[test]
fn stacked_encoders_all_kinds_and_depths() {
    for kind in EncoderKind::ALL {
        for layers in 1..=3 {
            let mut r = rng(400 + layers as u64);
            let adj = small_graph(layers as u64 + 10, 9);
            let ops = GraphOperators::<f64>::new(&adj);
            let x = random_matrix(9, 5, &mut r);
            let mut cfg = EncoderConfig::new(kind, layers, 5).with_seed(layers as u64);
            cfg.hidden_dim = 8;
            cfg.gat_heads = 2;
            cfg.sage_fanout = vec![3, 2, 2];
            let mut store = ParamStore::new();
            let enc = Encoder::new(cfg, &mut store, "").unwrap();
            let proj = random_matrix(9, 128, &mut r);
            let mode = Neighborhood::Sampled { seed: 3 };
            let (_, cache) = enc.forward(&ops, &x, &store, mode).unwrap();
            enc.backward(&ops, &cache, &proj, &mut store, false).unwrap();
            let err = check(&mut store, |s| projection_loss(&enc.forward(&ops, &x, s, mode).unwrap().0, &proj));
            println!("{kind:?} layers={layers}: max rel error {err:.2e}");
        }
    }
}

#[test]
fn dgi_objective_through_encoder_and_discriminator() {
    for kind in EncoderKind::ALL {
        let adj = small_graph(21, 6);
        let ops = GraphOperators::<f64>::new(&adj);
        let x = random_matrix(6, 4, &mut rng(22));
        let mut cfg = EncoderConfig::new(kind, 2, 4).with_seed(7);
        cfg.hidden_dim = 8;
        cfg.gat_heads = 2;
        let mut model = DgiModel::<f64>::new(cfg).unwrap();
        let mode = Neighborhood::Sampled { seed: 1 };
        model.params.zero_grad();
        model.evaluate(&ops, &x, 99, mode, true).unwrap();
        let (encoder, disc) = (model.encoder.clone(), model.discriminator);
        let err = check(&mut model.params, |s| {
            let mut m = DgiModel { encoder: encoder.clone(), discriminator: disc, params: s.clone() };
            m.evaluate(&ops, &x, 99, mode, false).unwrap().loss
        });
        println!("DGI {kind:?}: max rel error {err:.2e}");
    }
}

#[test]
fn link_prediction_objective() {
    let adj = small_graph(31, 8);
    let ops = GraphOperators::<f64>::new(&adj);
    let x = random_matrix(8, 4, &mut rng(32));
    let mut cfg = EncoderConfig::new(EncoderKind::Sage, 2, 4).with_seed(2);
    cfg.hidden_dim = 8;
    let mut model = LinkPredModel::<f64>::new(cfg).unwrap();
    let pairs = sample_pairs(&adj, 10, 3, &mut rng(33));
    model.params.zero_grad();
    model.evaluate(&ops, &x, &pairs, Neighborhood::Full, true).unwrap();
    let encoder = model.encoder.clone();
    check(&mut model.params, |s| {
        let mut m = LinkPredModel { encoder: encoder.clone(), params: s.clone() };
        m.evaluate(&ops, &x, &pairs, Neighborhood::Full, false).unwrap().0
    });
}

#[test]
fn mlp_mse() {
    let mut r = rng(41);
    let x = random_matrix(10, 6, &mut r);
    let y = random_matrix(10, 1, &mut r);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(MlpConfig { input_dim: 6, hidden: vec![7, 5], seed: 3 }, &mut store, "").unwrap();
    // Non-zero biases so their gradients are exercised away from the origin.
    for &(_, b) in mlp.layers() {
        let cols = store.value(b).cols();
        *store.value_mut(b) = random_matrix(1, cols, &mut r);
    }
    let mse = |pred: &DenseMatrix<f64>| pred.sub(&y).unwrap().frobenius_sq() / 10.0;
    let (pred, cache) = mlp.forward(&x, &store).unwrap();
    let grad = pred.sub(&y).unwrap().scaled(2.0 / 10.0);
    mlp.backward(&cache, &grad, &mut store).unwrap();
    check(&mut store, |s| mse(&mlp.forward(&x, s).unwrap().0));
}

#[test]
fn suite_is_fast() {
    // The whole file runs in well under a minute; this guards the largest case.
    let start = std::time::Instant::now();
    let adj = small_graph(51, 10);
    let ops = GraphOperators::<f64>::new(&adj);
    let x = random_matrix(10, 44, &mut rng(52));
    let mut model = DgiModel::<f64>::new(EncoderConfig::new(EncoderKind::Gat, 3, 44)).unwrap();
    model.params.zero_grad();
    model.evaluate(&ops, &x, 1, Neighborhood::Full, true).unwrap();
    let (encoder, disc) = (model.encoder.clone(), model.discriminator);
    check(&mut model.params, |s| {
        let mut m = DgiModel { encoder: encoder.clone(), discriminator: disc, params: s.clone() };
        m.evaluate(&ops, &x, 1, Neighborhood::Full, false).unwrap().loss
    });
    assert!(start.elapsed().as_secs() < 60);
}
