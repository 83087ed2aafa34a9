//! Procedural toy molecules with idealized geometry.

use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::chem::{
    cross, norm, parse_smiles, sub, write_smiles_with_order, Atom, Bond, BondOrder, Element, MolGraph, Molecule3D,
    Vec3,
};
use crate::codec::{parse_mol3d, serialize, CodecError};
use crate::pointcloud::ResidueAtom;

pub const TETRAHEDRAL_ANGLE: f64 = 109.5;
pub const AROMATIC_CC: f64 = 1.40;

/// Idealized bond length in angstroms.
pub fn bond_length(a: Element, b: Element, order: BondOrder) -> f64 {
    use Element::*;
    let (x, y) = if (a as u8) <= (b as u8) { (a, b) } else { (b, a) };
    match (x, y, order) {
        (C, C, BondOrder::Aromatic) => AROMATIC_CC,
        (C, O, BondOrder::Double) => 1.22,
        (C, C, _) => 1.54,
        (C, N, _) => 1.47,
        (C, O, _) => 1.43,
        (N, N, _) => 1.45,
        (N, O, _) => 1.40,
        (O, O, _) => 1.48,
        _ => 1.50,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub seed: u64,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub palette: Vec<(Element, f64)>,
    /// Chance that a new tree atom attaches somewhere other than the last atom.
    pub branch_prob: f64,
    /// Chance that a molecule is built around a single ring.
    pub ring_prob: f64,
    /// Chance that a terminal oxygen on carbon becomes a carbonyl.
    pub carbonyl_prob: f64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            seed: 0,
            min_atoms: 4,
            max_atoms: 12,
            palette: vec![(Element::C, 0.6), (Element::N, 0.2), (Element::O, 0.2)],
            branch_prob: 0.3,
            ring_prob: 0.3,
            carbonyl_prob: 0.3,
        }
    }
}

fn max_degree(e: Element) -> usize {
    match e {
        Element::O => 2,
        Element::N => 3,
        _ => 4,
    }
}

fn nerf(a: Vec3, b: Vec3, c: Vec3, length: f64, angle_deg: f64, torsion_deg: f64) -> Vec3 {
    let unit = |v: Vec3| {
        let n = norm(v);
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let bc = unit(sub(c, b));
    let n = unit(cross(sub(b, a), bc));
    let m = cross(n, bc);
    let (theta, phi) = (angle_deg.to_radians(), torsion_deg.to_radians());
    let d = [
        -length * theta.cos(),
        length * theta.sin() * phi.cos(),
        length * theta.sin() * phi.sin(),
    ];
    std::array::from_fn(|k| c[k] + d[0] * bc[k] + d[1] * m[k] + d[2] * n[k])
}

fn centered(mut coords: Vec<Vec3>) -> Vec<Vec3> {
    let n = coords.len() as f64;
    let mut mean = [0.0; 3];
    for c in &coords {
        for k in 0..3 {
            mean[k] += c[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    for c in &mut coords {
        for k in 0..3 {
            c[k] -= mean[k];
        }
    }
    coords
}

fn tree<R: Rng>(spec: &ToySpec, n: usize, rng: &mut R) -> (Vec<Atom>, Vec<Bond>, Vec<Vec3>) {
    let elements: Vec<Element> = spec.palette.iter().map(|p| p.0).collect();
    let pick = WeightedIndex::new(spec.palette.iter().map(|p| p.1)).expect("palette weights");
    let mut atoms = vec![Atom::new(Element::C)];
    let mut parent = vec![usize::MAX];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut bonds = Vec::new();
    let capacity = |atoms: &[Atom], parent: &[usize], children: &[Vec<usize>], u: usize| {
        let degree = children[u].len() + usize::from(parent[u] != usize::MAX);
        // the root reserves one tetrahedral slot for its virtual parent
        let limit = if parent[u] == usize::MAX { 3 } else { max_degree(atoms[u].element) };
        degree < limit.min(max_degree(atoms[u].element))
    };
    for i in 1..n {
        let last = i - 1;
        let p = if !rng.gen_bool(spec.branch_prob) && capacity(&atoms, &parent, &children, last) {
            last
        } else {
            let open: Vec<usize> = (0..i).filter(|&u| capacity(&atoms, &parent, &children, u)).collect();
            open[rng.gen_range(0..open.len())]
        };
        atoms.push(Atom::new(elements[pick.sample(rng)]));
        parent.push(p);
        children.push(Vec::new());
        children[p].push(i);
        bonds.push(Bond::new(p, i, BondOrder::Single));
    }
    let mut used: Vec<usize> = (0..n).map(|u| children[u].len() + usize::from(parent[u] != usize::MAX)).collect();
    for b in &mut bonds {
        let (p, c) = (b.a, b.b);
        let terminal_o = atoms[c].element == Element::O && children[c].is_empty();
        if terminal_o && atoms[p].element == Element::C && used[p] <= 3 && rng.gen_bool(spec.carbonyl_prob) {
            b.order = BondOrder::Double;
            used[p] += 1;
        }
    }

    let mut pos = vec![[0.0; 3]; n];
    let mut frame = vec![([-1.0, 0.0, 0.0], [-1.5, 1.0, 0.0]); n];
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        let (prev1, prev2) = frame[u];
        for (k, &v) in children[u].iter().enumerate() {
            let order = bonds[v - 1].order;
            let len = bond_length(atoms[u].element, atoms[v].element, order);
            pos[v] = nerf(prev2, prev1, pos[u], len, TETRAHEDRAL_ANGLE, [180.0, 60.0, -60.0][k]);
            frame[v] = (pos[u], prev1);
            stack.push(v);
        }
    }
    (atoms, bonds, pos)
}

fn ring<R: Rng>(spec: &ToySpec, n: usize, rng: &mut R) -> (Vec<Atom>, Vec<Bond>, Vec<Vec3>) {
    let size = if n >= 11 || (n >= 6 && rng.gen_bool(0.5)) { 6 } else { 5 };
    let aromatic = size == 6 && rng.gen_bool(0.5);
    let (order, len) = if aromatic {
        (BondOrder::Aromatic, AROMATIC_CC)
    } else {
        (BondOrder::Single, 1.54)
    };
    let radius = len / (2.0 * (std::f64::consts::PI / size as f64).sin());
    let mut atoms = Vec::new();
    let mut bonds = Vec::new();
    let mut pos = Vec::new();
    for k in 0..size {
        let t = 2.0 * std::f64::consts::PI * k as f64 / size as f64;
        atoms.push(if aromatic { Atom::aromatic(Element::C) } else { Atom::new(Element::C) });
        pos.push([radius * t.cos(), radius * t.sin(), 0.0]);
        bonds.push(Bond::new(k, (k + 1) % size, order));
    }
    let elements: Vec<Element> = spec.palette.iter().map(|p| p.0).collect();
    let pick = WeightedIndex::new(spec.palette.iter().map(|p| p.1)).expect("palette weights");
    let sites = rand::seq::index::sample(rng, size, n - size).into_vec();
    for site in sites {
        let e = elements[pick.sample(rng)];
        let l = bond_length(Element::C, e, BondOrder::Single);
        let r = pos[site];
        let scale = (radius + l) / radius;
        atoms.push(Atom::new(e));
        pos.push([r[0] * scale, r[1] * scale, 0.0]);
        bonds.push(Bond::new(site, atoms.len() - 1, BondOrder::Single));
    }
    (atoms, bonds, pos)
}

/// Molecule `index` of the corpus described by `spec`. Atoms are ordered as
/// they appear in the molecule's SMILES and coordinates are centered.
pub fn generate_molecule(spec: &ToySpec, index: u64) -> Molecule3D {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let n = rng.gen_range(spec.min_atoms..=spec.max_atoms);
    let (atoms, bonds, pos) = if n >= 5 && rng.gen_bool(spec.ring_prob) {
        ring(spec, n, &mut rng)
    } else {
        tree(spec, n, &mut rng)
    };
    let graph = MolGraph::new(atoms, bonds).expect("toy molecules are valid");
    let mol = Molecule3D::new(graph, centered(pos)).expect("finite coordinates");
    let (_, order) = write_smiles_with_order(mol.graph(), None).expect("valid graph");
    mol.permuted(&order)
}

pub fn generate_toy_corpus(spec: &ToySpec, n: usize) -> Vec<Molecule3D> {
    (0..n as u64).map(|i| generate_molecule(spec, i)).collect()
}

/// Independent Gaussian jitter on every coordinate.
pub fn perturb_conformer<R: Rng + ?Sized>(mol: &Molecule3D, sigma: f64, rng: &mut R) -> Molecule3D {
    if sigma == 0.0 {
        return mol.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    let coords = mol
        .coords()
        .iter()
        .map(|c| std::array::from_fn(|k| c[k] + normal.sample(rng)))
        .collect();
    mol.with_coords(coords).expect("finite jitter")
}

/// One molecule per line in the text format.
pub fn write_corpus(mols: &[Molecule3D]) -> Result<String, CodecError> {
    let mut out = String::new();
    for m in mols {
        out.push_str(&serialize(m)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_corpus(text: &str) -> Result<Vec<Molecule3D>, (usize, CodecError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_mol3d(l.trim_end()).map_err(|e| (i + 1, e)))
        .collect()
}

const RESIDUE_SIDE_CHAINS: [(&str, &[&str]); 10] = [
    ("GLY", &[]),
    ("ALA", &["CB"]),
    ("SER", &["CB", "OG"]),
    ("CYS", &["CB", "SG"]),
    ("VAL", &["CB", "CG1", "CG2"]),
    ("THR", &["CB", "OG1", "CG2"]),
    ("LEU", &["CB", "CG", "CD1", "CD2"]),
    ("ASP", &["CB", "CG", "OD1", "OD2"]),
    ("LYS", &["CB", "CG", "CD", "CE", "NZ"]),
    ("PHE", &["CB", "CG", "CD1", "CD2", "CE1", "CE2", "CZ"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPocket {
    /// Unbonded pocket atoms.
    pub atoms: Molecule3D,
    pub annotations: Vec<ResidueAtom>,
}

/// Residues scattered on a shell around the ligand, each with backbone
/// atoms and a side chain from a small template table.
pub fn generate_pocket<R: Rng + ?Sized>(ligand: &Molecule3D, residues: usize, rng: &mut R) -> ToyPocket {
    let coords = ligand.coords();
    let n = coords.len() as f64;
    let mut center = [0.0; 3];
    for c in coords {
        for k in 0..3 {
            center[k] += c[k] / n;
        }
    }
    let extent = coords
        .iter()
        .map(|c| norm(sub(*c, center)))
        .fold(0.0, f64::max);
    let shell = extent + 4.0;
    let jitter = Normal::new(0.0, 0.8).expect("valid");
    let mut atoms = Vec::new();
    let mut pos = Vec::new();
    let mut annotations = Vec::new();
    for _ in 0..residues {
        let dir = loop {
            let v: Vec3 = std::array::from_fn(|_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let l = norm(v);
            if l > 1e-9 {
                break [v[0] / l, v[1] / l, v[2] / l];
            }
        };
        let anchor: Vec3 = std::array::from_fn(|k| center[k] + shell * dir[k]);
        let (res, side) = RESIDUE_SIDE_CHAINS[rng.gen_range(0..RESIDUE_SIDE_CHAINS.len())];
        for (i, name) in ["N", "CA", "C", "O"].iter().chain(side.iter()).enumerate() {
            let out = if i < 4 { 0.0 } else { 1.2 * (i - 3) as f64 };
            let p: Vec3 = std::array::from_fn(|k| anchor[k] + dir[k] * out + jitter.sample(rng));
            let element = Element::from_symbol(&name[..1]).expect("atom names start with an element");
            atoms.push(Atom::new(element));
            pos.push(p);
            annotations.push(ResidueAtom {
                residue: res.to_string(),
                name: name.to_string(),
            });
        }
    }
    let graph = MolGraph::new(atoms, Vec::new()).expect("isolated atoms are valid");
    ToyPocket {
        atoms: Molecule3D::new(graph, pos).expect("finite"),
        annotations,
    }
}

/// A small fixed molecule handy for examples and smoke tests.
pub fn example_molecule() -> Molecule3D {
    let g = parse_smiles("CC(=O)NC").expect("valid");
    let coords = vec![
        [-1.96, -0.45, 0.0],
        [-0.71, 0.40, 0.0],
        [-0.80, 1.62, 0.0],
        [0.53, -0.20, 0.0],
        [1.77, 0.61, 0.0],
    ];
    Molecule3D::new(g, coords).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{angle, distance, geometry_terms, write_smiles};

    #[test]
    fn deterministic_and_valid() {
        let spec = ToySpec {
            seed: 7,
            ..ToySpec::default()
        };
        let a = generate_toy_corpus(&spec, 200);
        let b = generate_toy_corpus(&spec, 200);
        assert_eq!(a, b);
        for m in &a {
            assert!((4..=12).contains(&m.atom_count()));
            m.graph().validate().unwrap();
            let (_, order) = write_smiles_with_order(m.graph(), None).unwrap();
            assert_eq!(order, (0..m.atom_count()).collect::<Vec<_>>());
            geometry_terms(m).unwrap();
        }
        let other = generate_toy_corpus(&ToySpec { seed: 8, ..spec }, 200);
        assert_ne!(a, other);
    }

    #[test]
    fn tree_geometry_is_ideal() {
        let spec = ToySpec {
            ring_prob: 0.0,
            ..ToySpec::default()
        };
        for m in generate_toy_corpus(&spec, 50) {
            let g = m.graph();
            let x = m.coords();
            for b in g.bonds() {
                let want = bond_length(g.atoms()[b.a].element, g.atoms()[b.b].element, b.order);
                assert!((distance(x[b.a], x[b.b]) - want).abs() < 1e-9);
            }
            for c in 0..m.atom_count() {
                let nb = g.neighbors(c);
                for i in 0..nb.len() {
                    for j in i + 1..nb.len() {
                        let a = angle(x[nb[i].0], x[c], x[nb[j].0]);
                        assert!((a - TETRAHEDRAL_ANGLE).abs() < 0.1, "{a} in {}", write_smiles(g, None).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn perturb_zero_is_identity() {
        let m = example_molecule();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(perturb_conformer(&m, 0.0, &mut rng), m);
        assert_ne!(perturb_conformer(&m, 0.1, &mut rng), m);
    }

    #[test]
    fn corpus_text_round_trip() {
        let mols = generate_toy_corpus(&ToySpec::default(), 20);
        let text = write_corpus(&mols).unwrap();
        let back = read_corpus(&text).unwrap();
        assert_eq!(back.len(), 20);
        assert_eq!(write_corpus(&back).unwrap(), text);
    }

    #[test]
    fn pocket_surrounds_ligand() {
        let lig = example_molecule();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = generate_pocket(&lig, 6, &mut rng);
        assert_eq!(p.atoms.atom_count(), p.annotations.len());
        assert!(p.annotations.iter().filter(|a| a.name == "CA").count() == 6);
    }
}
