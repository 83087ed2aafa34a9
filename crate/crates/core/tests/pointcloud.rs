use molpc_core::pointcloud::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| Point::new(std::array::from_fn(|_| rng.gen_range(-5.0..5.0)), ["ligand", "C"]))
            .collect(),
    )
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[test]
fn centering_is_idempotent_and_zero_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..20 {
        let pc = random_cloud(&mut rng, n);
        let c = center(&pc).unwrap();
        let m = c.mean().unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-9));
        let cc = center(&c).unwrap();
        for (a, b) in c.points.iter().zip(&cc.points) {
            assert!(dist(a.coord, b.coord) < 1e-9);
        }
    }
    let single = PointCloud::new(vec![Point::new([1.0, 2.0, 3.0], ["ligand"])]);
    assert_eq!(center(&single).unwrap().points[0].coord, [0.0, 0.0, 0.0]);
}

#[test]
fn rotations_preserve_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let pc = random_cloud(&mut rng, 12);
        let r = random_rotation(&pc, &mut rng);
        for i in 0..pc.len() {
            for j in 0..pc.len() {
                let d0 = dist(pc.points[i].coord, pc.points[j].coord);
                let d1 = dist(r.points[i].coord, r.points[j].coord);
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn rotated_unit_vector_has_no_preferred_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut sum = [0.0; 3];
    for _ in 0..n {
        let v = Rotation::random(&mut rng).apply([1.0, 0.0, 0.0]);
        for k in 0..3 {
            sum[k] += v[k] / n as f64;
        }
    }
    let norm = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
    assert!(norm < 0.02, "{norm}");
}

#[test]
fn blur_offsets_have_requested_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sigma = 0.7;
    let pc = PointCloud::new(vec![Point::new([1.0, -2.0, 0.5], ["ligand", "O"])]);
    let b = blur_points(&pc, sigma, 100_000, false, &mut rng);
    for k in 0..3 {
        let offsets: Vec<f64> = b.points.iter().map(|p| p.coord[k] - pc.points[0].coord[k]).collect();
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        let var = offsets.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (offsets.len() - 1) as f64;
        assert!((var.sqrt() - sigma).abs() / sigma < 0.02, "axis {k}: {}", var.sqrt());
    }
    assert!(b.points.iter().all(|p| p.features == pc.points[0].features));
}

fn pocket_point(name: &str) -> Point {
    Point::new([0.0; 3], ["pocket", "C", "LEU", name])
}

#[test]
fn downsampling_keeps_priority_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rule = PriorityRule::default();
    let mut pc = PointCloud::default();
    for _ in 0..10 {
        pc.points.push(Point::new([1.0; 3], ["ligand", "N"]));
    }
    for _ in 0..90 {
        pc.points.push(pocket_point("CD"));
    }
    let out = downsample_prioritized(&pc, 20, &rule, &mut rng).unwrap();
    assert_eq!(out.len(), 20);
    assert_eq!(out.points.iter().filter(|p| p.has(LIGAND)).count(), 10);
    assert_eq!(out.points.iter().filter(|p| p.has(POCKET)).count(), 10);

    assert_eq!(downsample_prioritized(&pc, 200, &rule, &mut rng).unwrap(), pc);
    assert!(matches!(
        downsample_prioritized(&pc, 5, &rule, &mut rng),
        Err(PointCloudError::BudgetTooSmall { priority: 10, budget: 5 })
    ));
}

#[test]
fn downsampling_never_drops_priority_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rule = PriorityRule::default();
    let names = ["CA", "N", "C", "O", "CB", "CG", "CD1", "OXT", "CE1", "NZ"];
    for _ in 0..200 {
        let n = rng.gen_range(1..120);
        let pc = PointCloud::new(
            (0..n)
                .map(|i| {
                    let mut p = pocket_point(names[rng.gen_range(0..names.len())]);
                    p.coord = [i as f64, 0.0, 0.0];
                    p
                })
                .collect(),
        );
        let prio = pc.points.iter().filter(|p| rule.is_priority(p)).count();
        let budget = rng.gen_range(prio..prio + 40);
        let out = downsample_prioritized(&pc, budget, &rule, &mut rng).unwrap();
        assert_eq!(out.len(), budget.min(n));
        assert_eq!(out.points.iter().filter(|p| rule.is_priority(p)).count(), prio);
    }
}

#[test]
fn priority_list_from_text() {
    let rule = PriorityRule::parse("# names\nCA\n\nOXT # terminus\n");
    assert_eq!(rule.atom_names.len(), 2);
    assert!(rule.is_priority(&pocket_point("OXT")));
    assert!(!rule.is_priority(&pocket_point("CB")));
}
