#![allow(dead_code)]

use molpc_autograd::Tensor;
use molpc_core::codec::Vocabulary;
use molpc_core::pointcloud::Rotation;
use molpc_model::{Model, ModelConfig, PointInput};
use rand::seq::SliceRandom;
use rand::Rng;

pub const FEATURE_SETS: [&[&str]; 6] = [
    &["ligand", "C"],
    &["ligand", "N", "+"],
    &["ligand", "O"],
    &["pocket", "ALA", "CA", "C"],
    &["pocket", "GLY", "N"],
    &["shape"],
];

pub fn toy_model(seed: u64) -> (Model, Vocabulary) {
    let vocab = Vocabulary::standard();
    (Model::new(ModelConfig::toy(vocab.len()), seed).unwrap(), vocab)
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, vocab: &Vocabulary) -> PointInput {
    let mut features = Vec::new();
    let mut coords = Vec::new();
    for _ in 0..n {
        let set = FEATURE_SETS.choose(rng).unwrap();
        let mut ids: Vec<usize> = set.iter().map(|t| vocab.id(t).unwrap() as usize).collect();
        ids.sort_unstable();
        features.push(ids);
        coords.push(std::array::from_fn(|_| rng.gen_range(-4.0..4.0)));
    }
    PointInput { features, coords }
}

pub fn rigid_motion<R: Rng>(p: &PointInput, rng: &mut R) -> PointInput {
    let r = Rotation::random(rng);
    let t: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
    PointInput {
        features: p.features.clone(),
        coords: p
            .coords
            .iter()
            .map(|c| {
                let q = r.apply(*c);
                [q[0] + t[0], q[1] + t[1], q[2] + t[2]]
            })
            .collect(),
    }
}

pub fn permute(p: &PointInput, order: &[usize]) -> PointInput {
    PointInput {
        features: order.iter().map(|&i| p.features[i].clone()).collect(),
        coords: order.iter().map(|&i| p.coords[i]).collect(),
    }
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn permuted_rows(t: &Tensor, order: &[usize]) -> Tensor {
    let cols = t.cols();
    let mut data = Vec::with_capacity(t.len());
    for &i in order {
        data.extend_from_slice(t.row(i));
    }
    Tensor::matrix(order.len(), cols, data).unwrap()
}
