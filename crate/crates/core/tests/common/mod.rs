#![allow(dead_code)]

pub mod oracle;

use molpc_core::chem::{Atom, Bond, BondOrder, Element, MolGraph};
use rand::seq::SliceRandom;
use rand::Rng;

const ELEMENTS: [Element; 8] = [
    Element::C,
    Element::C,
    Element::C,
    Element::N,
    Element::O,
    Element::S,
    Element::F,
    Element::Cl,
];

fn max_valence(a: &Atom) -> u32 {
    a.element.valences(a.charge).iter().copied().max().unwrap_or(0) as u32
}

/// Random connected valid graph with up to `max_atoms` atoms, possibly with
/// rings, multiple bonds and charged nitrogens or oxygens.
pub fn random_graph<R: Rng>(rng: &mut R, max_atoms: usize) -> MolGraph {
    let n = rng.gen_range(1..=max_atoms);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut used: Vec<u32> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    for i in 0..n {
        let mut atom = Atom::new(*ELEMENTS.choose(rng).unwrap());
        if rng.gen_bool(0.1) {
            match atom.element {
                Element::N => atom = Atom::charged(Element::N, 1),
                Element::O => atom = Atom::charged(Element::O, -1),
                _ => {}
            }
        }
        if i > 0 {
            let open: Vec<usize> = (0..i).filter(|&j| used[j] < max_valence(&atoms[j])).collect();
            if open.is_empty() {
                break;
            }
            let p = *open.choose(rng).unwrap();
            let room = (max_valence(&atoms[p]) - used[p]).min(max_valence(&atom));
            if room == 0 {
                continue;
            }
            let order = match rng.gen_range(0..10) {
                0 if room >= 3 => BondOrder::Triple,
                1 | 2 if room >= 2 => BondOrder::Double,
                _ => BondOrder::Single,
            };
            let w = match order {
                BondOrder::Triple => 3,
                BondOrder::Double => 2,
                _ => 1,
            };
            used[p] += w;
            bonds.push(Bond::new(p, i, order));
            atoms.push(atom);
            used.push(w);
        } else {
            atoms.push(atom);
            used.push(0);
        }
    }
    let k = atoms.len();
    for _ in 0..rng.gen_range(0..3) {
        if k < 3 {
            break;
        }
        let a = rng.gen_range(0..k);
        let b = rng.gen_range(0..k);
        let exists = bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a));
        if a != b && !exists && used[a] < max_valence(&atoms[a]) && used[b] < max_valence(&atoms[b]) {
            used[a] += 1;
            used[b] += 1;
            bonds.push(Bond::new(a, b, BondOrder::Single));
        }
    }
    MolGraph::new(atoms, bonds).expect("generator respects valence")
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Fixed graphs with aromatic rings and symmetry that random trees rarely hit.
pub const AROMATIC_SMILES: [&str; 8] = [
    "c1ccccc1",
    "c1ccc2ccccc2c1",
    "c1ccncc1",
    "Cc1ccccc1C",
    "c1ccccc1-c1ccccc1",
    "S=c1ccccn1[O-]",
    "c1(c(ccc(Br)c1)O)C#N",
    "C1=NC(c2ccccc2)C=N1",
];
