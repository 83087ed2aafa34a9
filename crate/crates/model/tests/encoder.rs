use molpc_autograd::{Graph, Tensor};
use molpc_model::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

#[test]
fn sse_identities() {
    let cfg = SseConfig::default();
    let w = cfg.wavelengths();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let s: f64 = rng.gen_range(-50.0..50.0);
        let v = sse_embed(s, &cfg);
        for i in 0..cfg.dim / 2 {
            assert!((v[2 * i].powi(2) + v[2 * i + 1].powi(2) - 1.0).abs() <= 1e-12);
        }
    }
    let zero = sse_embed(0.0, &cfg);
    assert_eq!(zero, (0..cfg.dim).map(|i| (i % 2) as f64).collect::<Vec<_>>());
    let half_turn = sse_embed(std::f64::consts::PI * w[0], &cfg);
    assert!(half_turn[0].abs() < 1e-12 && (half_turn[1] + 1.0).abs() < 1e-12);
}

#[test]
fn graph_sse_matches_direct_formula() {
    let (model, _) = toy_model(0);
    let cfg = &model.config.encoder.coord_sse;
    let wid = model.params.id("point.coord_wavelengths").unwrap();
    let mut g = Graph::new(&model.params);
    let s = g.constant(Tensor::matrix(3, 1, vec![0.0, 1.25, -7.5]).unwrap());
    let w = g.param(wid);
    let out = g.sse(s, w).unwrap();
    for (r, &s) in [0.0, 1.25, -7.5].iter().enumerate() {
        assert_eq!(g.value(out).row(r), sse_embed(s, cfg).as_slice());
    }
}

#[test]
fn point_feature_embeddings() {
    let (model, vocab) = toy_model(1);
    let table = model.params.value(model.embedding_id());
    let id = |t: &str| vocab.id(t).unwrap() as usize;
    let points = PointInput {
        features: vec![vec![id("C")], vec![id("ligand"), id("N")], vec![id("N"), id("ligand")], {
            let mut v = vec![id("ligand"), id("N"), id("+")];
            v.sort_unstable();
            v
        }],
        coords: vec![[0.0; 3]; 4],
    };
    let mut g = Graph::new(&model.params);
    let n0 = model.embed_point_features(&mut g, &points).unwrap();
    let n0 = g.value(n0);
    assert_eq!(n0.row(0), table.row(id("C")));
    assert_eq!(n0.row(1), n0.row(2));
    let h = table.cols();
    for c in 0..h {
        let explicit = table.at(id("ligand"), c) + table.at(id("N"), c) + table.at(id("+"), c);
        assert!((n0.at(3, c) - explicit).abs() < 1e-15);
    }

    let unknown = molpc_core::pointcloud::PointCloud::new(vec![molpc_core::pointcloud::Point::new([0.0; 3], ["not-a-token"])]);
    assert!(matches!(PointInput::from_cloud(&unknown, &vocab), Err(ModelError::UnknownFeatureToken(t)) if t == "not-a-token"));
}

#[test]
fn shared_embedding_receives_point_and_text_gradients() {
    let (model, vocab) = toy_model(2);
    let id = |t: &str| vocab.id(t).unwrap() as usize;
    let points = PointInput {
        features: vec![vec![id("C"), id("ligand")]],
        coords: vec![[0.0; 3]],
    };
    let mut g = Graph::new(&model.params);
    let n0 = model.embed_point_features(&mut g, &points).unwrap();
    let loss = g.sum_all(n0).unwrap();
    let grads = g.backward(loss).unwrap();
    let ge = grads.get(model.embedding_id()).unwrap();
    for r in 0..ge.rows() {
        let touched = ge.row(r).iter().any(|&x| x != 0.0);
        assert_eq!(touched, r == id("C") || r == id("ligand"), "row {r}");
    }
    assert_eq!(model.params.get(model.embedding_id()).name, "embed.tokens");
    let mut g = Graph::new(&model.params);
    let t = model.text_encoder(&mut g, &[id("C")]).unwrap();
    let loss = g.sum_all(t).unwrap();
    let grads = g.backward(loss).unwrap();
    assert!(grads.get(model.embedding_id()).unwrap().row(id("C")).iter().any(|&x| x != 0.0));
}

#[test]
fn distance_bias_properties() {
    let (model, vocab) = toy_model(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_points(&mut rng, 7, &vocab);
    let heads = model.config.encoder.heads;
    for layer in 0..model.config.encoder.layers {
        let mut g = Graph::new(&model.params);
        let b = model.distance_bias(&mut g, &p.coords, layer).unwrap();
        let b = g.value(b).clone();
        assert_eq!(b.shape(), &[49, heads]);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(b.row(i * 7 + j), b.row(j * 7 + i));
            }
        }
        let moved: Vec<_> = p.coords.iter().map(|c| [c[0] + 3.5, c[1] - 1.25, c[2] + 0.5]).collect();
        let mut g = Graph::new(&model.params);
        let b2 = model.distance_bias(&mut g, &moved, layer).unwrap();
        assert!(max_abs_diff(&b, g.value(b2)) < 1e-12);
    }
    // two separate pairs at the same distance
    let coords = [[0.0, 0.0, 0.0], [1.7, 0.0, 0.0], [10.0, 5.0, 0.0], [10.0, 5.0, 1.7]];
    let mut g = Graph::new(&model.params);
    let b = model.distance_bias(&mut g, &coords, 0).unwrap();
    let b = g.value(b);
    assert_eq!(b.row(1), b.row(2 * 4 + 3));
    assert_eq!(b.row(0), b.row(3 * 4 + 3));
}

#[test]
fn invariance_and_equivariance() {
    let (model, vocab) = toy_model(4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_nl: f64 = 0.0;
    let mut worst_perm: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..10);
        let p = random_points(&mut rng, n, &vocab);
        let mut g = Graph::new(&model.params);
        let base = model.point_encoder(&mut g, &p).unwrap();
        let (nl, nout) = (g.value(base.n_l).clone(), g.value(base.n_out).clone());
        for _ in 0..10 {
            let q = rigid_motion(&p, &mut rng);
            let mut g = Graph::new(&model.params);
            let s = model.point_encoder(&mut g, &q).unwrap();
            worst_nl = worst_nl.max(max_abs_diff(&nl, g.value(s.n_l)));
            assert!(max_abs_diff(&nout, g.value(s.n_out)) > 1e-6);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut g = Graph::new(&model.params);
        let s = model.point_encoder(&mut g, &permute(&p, &order)).unwrap();
        worst_perm = worst_perm.max(max_abs_diff(&permuted_rows(&nout, &order), g.value(s.n_out)));
    }
    assert!(worst_nl < 1e-6, "{worst_nl}");
    assert!(worst_perm < 1e-9, "{worst_perm}");
}

fn layer_norm(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    x.iter().map(|v| (v - mean) / (var + 1e-6).sqrt()).collect()
}

fn vec_mat(x: &[f64], m: &Tensor) -> Vec<f64> {
    (0..m.cols()).map(|c| x.iter().enumerate().map(|(r, v)| v * m.at(r, c)).sum()).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

#[test]
fn single_point_matches_closed_form() {
    let (model, vocab) = toy_model(5);
    let p = PointInput {
        features: vec![vec![vocab.id("C").unwrap() as usize]],
        coords: vec![[0.3, -0.2, 1.1]],
    };
    let get = |name: &str| model.params.by_name(name).unwrap().value.clone();
    // one token attends only to itself: attention reduces to x Wv Wo
    let mut x = get("embed.tokens").row(vocab.id("C").unwrap() as usize).to_vec();
    for l in 0..model.config.encoder.layers {
        let h = layer_norm(&x);
        let a = vec_mat(&vec_mat(&h, &get(&format!("point.layer{l}.attn.v"))), &get(&format!("point.layer{l}.attn.o")));
        x = x.iter().zip(&a).map(|(u, v)| u + v).collect();
        let h = layer_norm(&x);
        let b1 = get(&format!("point.layer{l}.ff.b1"));
        let b2 = get(&format!("point.layer{l}.ff.b2"));
        let f: Vec<f64> = vec_mat(&h, &get(&format!("point.layer{l}.ff.w1")))
            .iter()
            .zip(b1.data())
            .map(|(u, b)| gelu(u + b))
            .collect();
        let f = vec_mat(&f, &get(&format!("point.layer{l}.ff.w2")));
        x = x.iter().zip(f.iter().zip(b2.data())).map(|(u, (v, b))| u + v + b).collect();
    }
    let expected = layer_norm(&x);
    let mut g = Graph::new(&model.params);
    let s = model.point_encoder(&mut g, &p).unwrap();
    let got = g.value(s.n_l).row(0);
    let err = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn text_encoder_shapes() {
    let (model, vocab) = toy_model(6);
    let mut g = Graph::new(&model.params);
    let one = model.text_encoder(&mut g, &[molpc_core::codec::BOS as usize]).unwrap();
    assert_eq!(g.value(one).shape(), &[1, 64]);
    assert!(g.value(one).is_finite());
    let ids = encode_text(&vocab, "Generate molecular 3d structure from GEOM");
    let states = model.text_encoder(&mut g, &ids).unwrap();
    assert_eq!(g.value(states).shape(), &[ids.len(), 64]);
    assert!(matches!(model.text_encoder(&mut g, &[100_000]), Err(ModelError::TokenOutOfRange(100_000))));
}

#[test]
fn relative_bias_depends_only_on_offset() {
    for (q1, k1, q2, k2) in [(0i64, 5i64, 10i64, 15i64), (7, 2, 107, 102), (3, 3, 50, 50)] {
        for bidirectional in [true, false] {
            assert_eq!(
                relative_position_bucket(k1 - q1, bidirectional, 32, 128),
                relative_position_bucket(k2 - q2, bidirectional, 32, 128)
            );
        }
    }
    for d in -300i64..300 {
        assert!(relative_position_bucket(d, true, 32, 128) < 32);
    }
}
