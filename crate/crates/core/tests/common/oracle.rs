//! Independent reference checks shared with the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeSet;

use molpc_core::chem::{Element, Molecule3D, Vec3};
use molpc_core::codec::parse_mol3d;
use molpc_core::pointcloud::PointCloud;
use molpc_core::pretrain::DropoutExample;

fn euler(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = |t: f64| [[t.cos(), 0.0, t.sin()], [0.0, 1.0, 0.0], [-t.sin(), 0.0, t.cos()]];
    let mul = |x: [[f64; 3]; 3], y: [[f64; 3]; 3]| {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = (0..3).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        r
    };
    mul(mul(rz(a), ry(b)), rz(c))
}

fn centered(x: &[Vec3]) -> Vec<Vec3> {
    let n = x.len() as f64;
    let m: Vec3 = std::array::from_fn(|k| x.iter().map(|p| p[k]).sum::<f64>() / n);
    x.iter().map(|p| std::array::from_fn(|k| p[k] - m[k])).collect()
}

fn rmsd_at(a: &[Vec3], b: &[Vec3], r: [[f64; 3]; 3]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (0..3).map(|i| ((0..3).map(|k| r[i][k] * p[k]).sum::<f64>() - q[i]).powi(2)).sum::<f64>())
        .sum();
    (s / a.len() as f64).sqrt()
}

/// Minimum RMSD over a ZYZ Euler-angle grid, refined by repeatedly
/// re-gridding a shrinking box around the best few cells.
pub fn grid_rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    use std::f64::consts::PI;
    let (a, b) = (centered(a), centered(b));
    let steps = 24;
    let mut cands: Vec<(f64, [f64; 3])> = Vec::new();
    for i in 0..steps {
        for j in 0..=steps / 2 {
            for k in 0..steps {
                let x = [
                    2.0 * PI * i as f64 / steps as f64,
                    PI * j as f64 / (steps / 2) as f64,
                    2.0 * PI * k as f64 / steps as f64,
                ];
                cands.push((rmsd_at(&a, &b, euler(x[0], x[1], x[2])), x));
            }
        }
    }
    cands.sort_by(|p, q| p.0.total_cmp(&q.0));
    cands.truncate(8);
    let mut best = cands[0].0;
    for (_, mut x) in cands {
        let mut span = 2.0 * PI / steps as f64;
        let mut cur = rmsd_at(&a, &b, euler(x[0], x[1], x[2]));
        for _ in 0..40 {
            let mut improved = (cur, x);
            for di in -4..=4 {
                for dj in -4..=4 {
                    for dk in -4..=4 {
                        let y = [
                            x[0] + span * di as f64 / 4.0,
                            x[1] + span * dj as f64 / 4.0,
                            x[2] + span * dk as f64 / 4.0,
                        ];
                        let v = rmsd_at(&a, &b, euler(y[0], y[1], y[2]));
                        if v < improved.0 {
                            improved = (v, y);
                        }
                    }
                }
            }
            (cur, x) = improved;
            span *= 0.6;
        }
        best = best.min(cur);
    }
    best
}

fn cents(c: Vec3) -> [i64; 3] {
    c.map(|v| (v * 100.0).round() as i64)
}

fn atom_at(mol: &Molecule3D, c: Vec3) -> Option<usize> {
    let key = cents(c);
    let hits: Vec<usize> = (0..mol.atom_count()).filter(|&i| cents(mol.coords()[i]) == key).collect();
    (hits.len() == 1).then(|| hits[0])
}

/// Checks a fragment-dropout example against its source molecule: the
/// masked fragments written in the target, re-attached to the visible atoms
/// at their `*` positions, rebuild exactly the original bond set.
pub fn check_dropout(mol: &Molecule3D, pocket: Option<&PointCloud>, ex: &DropoutExample) -> Result<(), String> {
    if ex.masked.is_empty() {
        return Err("nothing masked".into());
    }
    match pocket {
        Some(p) => {
            if ex.pocket_points != p.len() || ex.input_pc.points[..p.len()] != p.points[..] {
                return Err("pocket points altered".into());
            }
        }
        None if ex.pocket_points != 0 => return Err("pocket points without a pocket".into()),
        None => {}
    }

    let smiles = ex.target.split('|').next().unwrap_or("");
    let dots = smiles.matches('.').count();
    if dots + 1 != ex.masked.len() {
        return Err(format!("{dots} dots for {} masked fragments", ex.masked.len()));
    }
    let target = parse_mol3d(&ex.target).map_err(|e| format!("target does not parse: {e}"))?;
    let tg = target.graph();

    let mut star_expected = 0;
    for &f in &ex.masked {
        star_expected += ex.split.attachment_points[f].len();
    }
    let stars = tg.atoms().iter().filter(|a| a.element == Element::Wildcard).count();
    if stars != star_expected {
        return Err(format!("{stars} stars for {star_expected} cut-bond incidences"));
    }

    let mut map = Vec::with_capacity(tg.atom_count());
    let mut masked_atoms = BTreeSet::new();
    for (i, a) in tg.atoms().iter().enumerate() {
        let o = atom_at(mol, target.coords()[i]).ok_or_else(|| format!("target atom {i} matches no source atom"))?;
        if a.element != Element::Wildcard {
            if mol.graph().atoms()[o] != *a {
                return Err(format!("target atom {i} differs from source atom {o}"));
            }
            if !masked_atoms.insert(o) {
                return Err(format!("source atom {o} appears twice"));
            }
        }
        map.push(o);
    }

    let visible = mol.atom_count() - masked_atoms.len();
    let start = ex.pocket_points;
    if ex.input_pc.len() < start + visible {
        return Err("input cloud too small".into());
    }
    let mut visible_atoms = BTreeSet::new();
    for p in &ex.input_pc.points[start..start + visible] {
        let o = atom_at(mol, p.coord).ok_or("visible point matches no source atom")?;
        if masked_atoms.contains(&o) || !visible_atoms.insert(o) {
            return Err(format!("source atom {o} both visible and masked or duplicated"));
        }
    }
    if visible_atoms.len() + masked_atoms.len() != mol.atom_count() {
        return Err("atoms lost".into());
    }

    let mut rebuilt = BTreeSet::new();
    for b in tg.bonds() {
        let (x, y) = (map[b.a], map[b.b]);
        let star_end = [b.a, b.b].map(|i| tg.atoms()[i].element == Element::Wildcard);
        if star_end[0] && star_end[1] {
            return Err("bond between two stars".into());
        }
        if star_end.iter().any(|&s| s) {
            let outer = if star_end[0] { x } else { y };
            let inner = if star_end[0] { y } else { x };
            if ex.split.fragment_of(outer) == ex.split.fragment_of(inner) {
                return Err("star inside its own fragment".into());
            }
        }
        rebuilt.insert((x.min(y), x.max(y), b.order));
    }
    let original: BTreeSet<_> = mol
        .graph()
        .bonds()
        .iter()
        .filter(|b| masked_atoms.contains(&b.a) || masked_atoms.contains(&b.b))
        .map(|b| (b.a.min(b.b), b.a.max(b.b), b.order))
        .collect();
    if rebuilt != original {
        return Err("re-attached bonds differ from source bonds".into());
    }
    Ok(())
}
