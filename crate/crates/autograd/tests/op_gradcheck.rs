use molpc_autograd::{grad_check, Axis, GradCheckOptions, Graph, ParamStore, Result, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Reduces an op output to a scalar through fixed random weights so no
/// gradient vanishes by symmetry (e.g. softmax rows summing to one).
fn weighted_sum(g: &mut Graph<'_>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.value(y).shape().to_vec();
    let w = g.constant(random(&mut rng, &shape));
    let p = g.mul(y, w)?;
    g.sum_all(p)
}

fn check(name: &str, shapes: &[(&str, &[usize])], f: impl Fn(&mut Graph<'_>, &[Var]) -> Result<Var>) {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let mut store = ParamStore::new();
    let ids: Vec<_> = shapes
        .iter()
        .map(|(n, s)| store.insert(*n, random(&mut rng, s)).unwrap())
        .collect();
    let report = grad_check(
        &store,
        |g| {
            let vars: Vec<Var> = ids.iter().map(|&id| g.param(id)).collect();
            let y = f(g, &vars)?;
            weighted_sum(g, y, 99)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    println!("{name}: max rel err {:.3e} over {} elements", report.max_rel_error, report.checked);
    assert!(report.max_rel_error < 1e-6, "{name}: {report:?}");
}

#[test]
fn quadratic_is_exact() {
    let mut store = ParamStore::new();
    let id = store.insert("w", Tensor::new(vec![5], vec![0.3, -1.2, 2.0, 0.7, -0.1]).unwrap()).unwrap();
    let report = grad_check(
        &store,
        |g| {
            let w = g.param(id);
            let sq = g.mul(w, w)?;
            g.sum_all(sq)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-9, "{report:?}");
}

#[test]
fn every_op_passes_in_isolation() {
    check("matmul", &[("a", &[3, 4]), ("b", &[4, 5])], |g, v| g.matmul(v[0], v[1]));
    check("matmul_nt", &[("a", &[3, 4]), ("b", &[5, 4])], |g, v| g.matmul_nt(v[0], v[1]));
    check("add", &[("a", &[3, 4]), ("b", &[3, 4])], |g, v| g.add(v[0], v[1]));
    check("add_row", &[("a", &[3, 4]), ("b", &[4])], |g, v| g.add_row(v[0], v[1]));
    check("mul", &[("a", &[3, 4]), ("b", &[3, 4])], |g, v| g.mul(v[0], v[1]));
    check("scale", &[("a", &[2, 3])], |g, v| g.scale(v[0], -1.7));
    check("softmax", &[("a", &[3, 6])], |g, v| g.softmax(v[0]));
    check("layer_norm", &[("a", &[3, 6])], |g, v| g.layer_norm(v[0], 1e-5));
    check("gelu", &[("a", &[4, 5])], |g, v| g.gelu(v[0]));
    check("relu", &[("a", &[4, 5])], |g, v| g.relu(v[0]));
    check("embedding", &[("t", &[6, 3])], |g, v| g.embedding(v[0], &[0, 4, 4, 2]));
    check("concat_rows", &[("a", &[2, 3]), ("b", &[1, 3])], |g, v| g.concat_rows(&[v[0], v[1], v[0]]));
    check("concat_cols", &[("a", &[2, 3]), ("b", &[2, 1])], |g, v| g.concat_cols(&[v[1], v[0]]));
    check("slice_rows", &[("a", &[5, 3])], |g, v| g.slice_rows(v[0], 1, 4));
    check("slice_cols", &[("a", &[3, 5])], |g, v| g.slice_cols(v[0], 2, 5));
    check("reshape", &[("a", &[3, 4])], |g, v| g.reshape(v[0], &[2, 6]));
    check("transpose", &[("a", &[3, 4])], |g, v| g.transpose(v[0]));
    check("sum_rows", &[("a", &[3, 4])], |g, v| g.sum(v[0], Axis::Rows));
    check("sum_cols", &[("a", &[3, 4])], |g, v| g.sum(v[0], Axis::Cols));
    check("mean_rows", &[("a", &[3, 4])], |g, v| g.mean(v[0], Axis::Rows));
    check("mean_cols", &[("a", &[3, 4])], |g, v| g.mean(v[0], Axis::Cols));
    check("sum_all", &[("a", &[3, 4])], |g, v| g.sum_all(v[0]));
    check("cross_entropy", &[("a", &[4, 7])], |g, v| {
        g.cross_entropy(v[0], &[1, 6, 0, 3], &[true, true, false, true])
    });
    check("sse", &[("s", &[4, 1]), ("w", &[3])], |g, v| {
        // keep wavelengths away from zero
        let shift = g.constant(Tensor::new(vec![3], vec![2.0, 2.5, 3.0]).unwrap());
        let w = g.add(v[1], shift)?;
        g.sse(v[0], w)
    });
}

#[test]
fn forward_is_bit_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let a = store.insert("a", random(&mut rng, &[7, 9])).unwrap();
    let b = store.insert("b", random(&mut rng, &[9, 11])).unwrap();
    let run = || {
        let mut g = Graph::new(&store);
        let (va, vb) = (g.param(a), g.param(b));
        let m = g.matmul(va, vb).unwrap();
        let s = g.softmax(m).unwrap();
        let l = g.layer_norm(s, 1e-6).unwrap();
        let out = g.value(l).clone();
        let loss = g.sum_all(l).unwrap();
        let grads = g.backward(loss).unwrap();
        (out, grads.get(a).unwrap().clone())
    };
    let (x1, g1) = run();
    let (x2, g2) = run();
    assert_eq!(x1.data(), x2.data());
    assert_eq!(g1.data(), g2.data());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn softmax_rows_are_distributions(vals in proptest::collection::vec(-30.0f64..30.0, 12)) {
            let store = ParamStore::new();
            let mut g = Graph::new(&store);
            let x = g.constant(Tensor::matrix(3, 4, vals).unwrap());
            let y = g.softmax(x).unwrap();
            for r in 0..3 {
                let row = g.value(y).row(r);
                prop_assert!(row.iter().all(|p| *p >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
