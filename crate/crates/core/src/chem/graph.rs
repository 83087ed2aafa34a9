use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Supported elements plus the `*` attachment wildcard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
    Wildcard,
}

impl Element {
    pub const ALL: [Element; 11] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
        Element::Wildcard,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::Wildcard => "*",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.symbol() == s)
    }

    /// Lowercase SMILES spelling for elements that may be aromatic.
    pub fn aromatic_symbol(self) -> Option<&'static str> {
        match self {
            Element::B => Some("b"),
            Element::C => Some("c"),
            Element::N => Some("n"),
            Element::O => Some("o"),
            Element::P => Some("p"),
            Element::S => Some("s"),
            _ => None,
        }
    }

    pub fn from_aromatic_symbol(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.aromatic_symbol() == Some(s))
    }

    fn group(self) -> Option<(i32, bool)> {
        // (periodic group, second-row element)
        match self {
            Element::B => Some((13, true)),
            Element::C => Some((14, true)),
            Element::N => Some((15, true)),
            Element::O => Some((16, true)),
            Element::F => Some((17, true)),
            Element::P => Some((15, false)),
            Element::S => Some((16, false)),
            Element::Cl | Element::Br | Element::I => Some((17, false)),
            Element::Wildcard => None,
        }
    }

    /// Allowed valences for a given formal charge, using the isoelectronic
    /// neighbour in the same row (N+ behaves like C, O- like F).
    pub fn valences(self, charge: i8) -> &'static [u8] {
        let Some((group, second_row)) = self.group() else {
            return &[];
        };
        match (group - charge as i32, second_row) {
            (13, _) => &[3],
            (14, _) => &[4],
            (15, true) => &[3],
            (15, false) => &[3, 5],
            (16, true) => &[2],
            (16, false) => &[2, 4, 6],
            (17, _) => &[1],
            (18, _) => &[0],
            _ => &[],
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    /// Hydrogen count from a bracket atom. `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Self {
            element,
            charge: 0,
            aromatic: false,
            explicit_h: None,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Self {
            aromatic: true,
            ..Self::new(element)
        }
    }

    pub fn charged(element: Element, charge: i8) -> Self {
        Self {
            charge,
            explicit_h: Some(0),
            ..Self::new(element)
        }
    }

    pub fn wildcard() -> Self {
        Self::new(Element::Wildcard)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const ALL: [BondOrder; 4] = [
        BondOrder::Single,
        BondOrder::Double,
        BondOrder::Triple,
        BondOrder::Aromatic,
    ];

    /// Contribution to the lower-bound valence: aromatic bonds count 1.
    fn min_valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "-",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic => ":",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Self { a, b, order }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {bond} references atom outside 0..{atoms}")]
    BondOutOfRange { bond: usize, atoms: usize },
    #[error("bond {bond} is a self-loop on atom {atom}")]
    SelfLoop { bond: usize, atom: usize },
    #[error("more than one bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
    #[error("atom {atom} has charge {charge} outside [-4, 4]")]
    ChargeOutOfRange { atom: usize, charge: i8 },
    #[error("atom {atom} ({element}) has valence {used}, allowed at most {max}")]
    ValenceViolation {
        atom: usize,
        element: Element,
        used: u32,
        max: u32,
    },
    #[error("aromatic atom {atom} is not on a ring")]
    AromaticOffRing { atom: usize },
    #[error("aromatic bond {bond} joins a non-aromatic atom")]
    AromaticBondMismatch { bond: usize },
}

/// Hydrogen-depleted molecular graph.
///
/// Bonds are stored with `a < b`. Charged atoms without an explicit hydrogen
/// count are normalized to `Some(0)` since they can only be spelled as bracket atoms.
#[derive(Clone, Debug)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl PartialEq for MolGraph {
    fn eq(&self, other: &Self) -> bool {
        if self.atoms != other.atoms || self.bonds.len() != other.bonds.len() {
            return false;
        }
        let key = |b: &Bond| (b.a, b.b, b.order);
        let mut x: Vec<_> = self.bonds.iter().map(key).collect();
        let mut y: Vec<_> = other.bonds.iter().map(key).collect();
        x.sort_unstable();
        y.sort_unstable();
        x == y
    }
}

impl Eq for MolGraph {}

impl MolGraph {
    /// Builds and validates a graph.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let g = Self::build(atoms, bonds)?;
        g.validate()?;
        Ok(g)
    }

    /// Builds a graph checking only structural soundness (indices, loops,
    /// parallel edges). Chemistry rules are not enforced.
    pub fn build(mut atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        for a in &mut atoms {
            if a.charge != 0 && a.explicit_h.is_none() {
                a.explicit_h = Some(0);
            }
        }
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut norm = Vec::with_capacity(bonds.len());
        for (i, b) in bonds.into_iter().enumerate() {
            if b.a >= n || b.b >= n {
                return Err(GraphError::BondOutOfRange { bond: i, atoms: n });
            }
            if b.a == b.b {
                return Err(GraphError::SelfLoop { bond: i, atom: b.a });
            }
            let (a, c) = (b.a.min(b.b), b.a.max(b.b));
            if adjacency[a].iter().any(|&(nb, _)| nb == c) {
                return Err(GraphError::DuplicateBond { a, b: c });
            }
            adjacency[a].push((c, i));
            adjacency[c].push((a, i));
            norm.push(Bond::new(a, c, b.order));
        }
        Ok(Self {
            atoms,
            bonds: norm,
            adjacency,
        })
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        for (i, a) in self.atoms.iter().enumerate() {
            if a.charge.abs() > 4 {
                return Err(GraphError::ChargeOutOfRange { atom: i, charge: a.charge });
            }
            if a.element == Element::Wildcard {
                continue;
            }
            let used = self.used_valence(i);
            let max = a.element.valences(a.charge).iter().copied().max();
            match max {
                Some(m) if used <= m as u32 => {}
                _ => {
                    return Err(GraphError::ValenceViolation {
                        atom: i,
                        element: a.element,
                        used,
                        max: max.unwrap_or(0) as u32,
                    })
                }
            }
        }
        let acyclic = self.acyclic_bonds();
        for (i, b) in self.bonds.iter().enumerate() {
            if b.order == BondOrder::Aromatic
                && !(self.atoms[b.a].aromatic && self.atoms[b.b].aromatic)
            {
                return Err(GraphError::AromaticBondMismatch { bond: i });
            }
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if a.aromatic && !self.adjacency[i].iter().any(|&(_, bi)| !acyclic[bi]) {
                return Err(GraphError::AromaticOffRing { atom: i });
            }
        }
        Ok(())
    }

    /// Lower bound of the atom's valence over all Kekulé assignments:
    /// aromatic bonds count as single bonds.
    pub fn used_valence(&self, atom: usize) -> u32 {
        let bonds: u32 = self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.min_valence())
            .sum();
        bonds + self.atoms[atom].explicit_h.unwrap_or(0) as u32
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor, bond index)` pairs in bond insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(n, _)| n == b).map(|&(_, bi)| bi)
    }

    /// Per bond: true if removing it disconnects its component (a bridge).
    pub fn acyclic_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut bridge = vec![false; self.bonds.len()];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // iterative DFS: (atom, parent bond, next neighbor cursor)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, pb, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[u].len() {
                    let (v, bi) = self.adjacency[u][*cursor];
                    *cursor += 1;
                    if bi == pb {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bi, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            bridge[pb] = true;
                        }
                    }
                }
            }
        }
        bridge
    }

    /// Connected components, each sorted ascending, ordered by lowest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        self.components_without(&[])
    }

    /// Components after deleting the given bonds.
    pub fn components_without(&self, removed: &[usize]) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut cut = vec![false; self.bonds.len()];
        for &b in removed {
            cut[b] = true;
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, bi) in &self.adjacency[u] {
                    if !cut[bi] && !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Cyclomatic number `E - V + C`: the size of any minimum cycle basis.
    pub fn ring_count(&self) -> usize {
        self.bonds.len() + self.components().len() - self.atoms.len()
    }

    /// Smallest set of smallest rings, as atom lists. Candidate rings are the
    /// shortest cycle through each ring bond; they are accepted shortest-first
    /// when linearly independent over GF(2) of the bond space.
    pub fn sssr(&self) -> Vec<Vec<usize>> {
        let target = self.ring_count();
        if target == 0 {
            return Vec::new();
        }
        let acyclic = self.acyclic_bonds();
        let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for (bi, bond) in self.bonds.iter().enumerate() {
            if acyclic[bi] {
                continue;
            }
            if let Some(path) = self.shortest_path_avoiding(bond.a, bond.b, bi) {
                let mut ring_bonds: Vec<usize> = path
                    .windows(2)
                    .map(|w| self.bond_between(w[0], w[1]).expect("path bond"))
                    .collect();
                ring_bonds.push(bi);
                ring_bonds.sort_unstable();
                candidates.push((path, ring_bonds));
            }
        }
        candidates.sort_by(|x, y| x.1.len().cmp(&y.1.len()).then_with(|| x.1.cmp(&y.1)));
        candidates.dedup_by(|x, y| x.1 == y.1);

        let words = self.bonds.len().div_ceil(64);
        let mut basis: Vec<Vec<u64>> = Vec::new();
        let mut rings = Vec::new();
        for (atoms, ring_bonds) in candidates {
            let mut v = vec![0u64; words];
            for b in &ring_bonds {
                v[b / 64] |= 1 << (b % 64);
            }
            if reduce_gf2(&mut basis, v) {
                rings.push(atoms);
                if rings.len() == target {
                    break;
                }
            }
        }
        rings
    }

    fn shortest_path_avoiding(&self, from: usize, to: usize, skip_bond: usize) -> Option<Vec<usize>> {
        let n = self.atoms.len();
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            let mut nbrs: Vec<_> = self.adjacency[u].iter().filter(|&&(_, b)| b != skip_bond).collect();
            nbrs.sort_unstable();
            for &(v, _) in nbrs {
                if !seen[v] {
                    seen[v] = true;
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Renumbers atoms so that new atom `i` is old atom `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> MolGraph {
        let mut inverse = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let atoms = order.iter().map(|&o| self.atoms[o]).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(inverse[b.a], inverse[b.b], b.order))
            .collect();
        MolGraph::build(atoms, bonds).expect("permutation preserves structure")
    }

    /// Subgraph induced by `atoms` (kept in the given order).
    pub fn induced(&self, atoms: &[usize]) -> MolGraph {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in atoms.iter().enumerate() {
            map[old] = new;
        }
        let new_atoms = atoms.iter().map(|&a| self.atoms[a]).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond::new(map[b.a], map[b.b], b.order))
            .collect();
        MolGraph::build(new_atoms, bonds).expect("induced subgraph is structurally sound")
    }
}

fn reduce_gf2(basis: &mut Vec<Vec<u64>>, mut v: Vec<u64>) -> bool {
    for b in basis.iter() {
        let pivot = leading_bit(b).expect("basis vectors are nonzero");
        if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
            for (x, y) in v.iter_mut().zip(b) {
                *x ^= y;
            }
        }
    }
    if leading_bit(&v).is_none() {
        return false;
    }
    basis.push(v);
    // keep pivots distinct: sort by pivot descending so reduction stays triangular
    basis.sort_by_key(|b| std::cmp::Reverse(leading_bit(b)));
    let mut i = 0;
    while i < basis.len() {
        let p = leading_bit(&basis[i]).expect("nonzero");
        for j in 0..basis.len() {
            if j != i && basis[j][p / 64] >> (p % 64) & 1 == 1 {
                let bi = basis[i].clone();
                for (x, y) in basis[j].iter_mut().zip(&bi) {
                    *x ^= y;
                }
            }
        }
        i += 1;
    }
    true
}

fn leading_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> MolGraph {
        let atoms = vec![Atom::new(Element::C); n];
        let bonds = (1..n).map(|i| Bond::new(i - 1, i, BondOrder::Single)).collect();
        MolGraph::new(atoms, bonds).unwrap()
    }

    #[test]
    fn valence_table() {
        assert_eq!(Element::N.valences(1), &[4]);
        assert_eq!(Element::O.valences(-1), &[1]);
        assert_eq!(Element::S.valences(0), &[2, 4, 6]);
        assert_eq!(Element::P.valences(0), &[3, 5]);
        assert_eq!(Element::B.valences(0), &[3]);
        assert!(Element::C.valences(2).is_empty());
    }

    #[test]
    fn rejects_structural_errors() {
        let c = Atom::new(Element::C);
        assert!(matches!(
            MolGraph::new(vec![c], vec![Bond::new(0, 0, BondOrder::Single)]),
            Err(GraphError::SelfLoop { .. })
        ));
        assert!(matches!(
            MolGraph::new(
                vec![c, c],
                vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 0, BondOrder::Double)]
            ),
            Err(GraphError::DuplicateBond { .. })
        ));
        let o = Atom::new(Element::O);
        assert!(matches!(
            MolGraph::new(
                vec![o, c, c],
                vec![Bond::new(0, 1, BondOrder::Double), Bond::new(0, 2, BondOrder::Single)]
            ),
            Err(GraphError::ValenceViolation { atom: 0, .. })
        ));
    }

    #[test]
    fn aromatic_atom_must_be_on_ring() {
        let a = Atom::aromatic(Element::C);
        let err = MolGraph::new(vec![a, a], vec![Bond::new(0, 1, BondOrder::Aromatic)]).unwrap_err();
        assert!(matches!(err, GraphError::AromaticOffRing { .. }));
    }

    #[test]
    fn bridges_and_rings() {
        // cyclopropane with a methyl tail
        let c = Atom::new(Element::C);
        let g = MolGraph::new(
            vec![c; 4],
            vec![
                Bond::new(0, 1, BondOrder::Single),
                Bond::new(1, 2, BondOrder::Single),
                Bond::new(2, 0, BondOrder::Single),
                Bond::new(2, 3, BondOrder::Single),
            ],
        )
        .unwrap();
        assert_eq!(g.acyclic_bonds(), vec![false, false, false, true]);
        assert_eq!(g.ring_count(), 1);
        assert_eq!(g.sssr().len(), 1);
        assert_eq!(g.sssr()[0].len(), 3);
        assert_eq!(chain(5).ring_count(), 0);
    }

    #[test]
    fn fused_rings_give_two_smallest() {
        // naphthalene-like skeleton (saturated): two fused 6-rings, 11 bonds, 10 atoms
        let c = Atom::new(Element::C);
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (4, 6), (6, 7), (7, 8), (8, 9), (9, 5)];
        let g = MolGraph::new(
            vec![c; 10],
            edges.iter().map(|&(a, b)| Bond::new(a, b, BondOrder::Single)).collect(),
        )
        .unwrap();
        let rings = g.sssr();
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.len() == 6));
    }

    #[test]
    fn permuted_and_induced() {
        let g = chain(4);
        let p = g.permuted(&[3, 2, 1, 0]);
        assert_eq!(p.bond_between(0, 1).is_some(), true);
        let sub = g.induced(&[1, 2]);
        assert_eq!(sub.atom_count(), 2);
        assert_eq!(sub.bonds().len(), 1);
    }
}
