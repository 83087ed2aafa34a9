//! Brute-force graph isomorphism by backtracking. Exponential in the worst
//! case; intended for small graphs and as a reference in tests.

use super::graph::{Atom, MolGraph};

fn atom_key(a: &Atom) -> (u8, i8, bool, Option<u8>) {
    (a.element as u8, a.charge, a.aromatic, a.explicit_h)
}

/// Element, charge, aromaticity, hydrogen and bond-order preserving isomorphism.
/// Returns a mapping `m` with `m[i]` = atom of `b` matched to atom `i` of `a`.
pub fn find_isomorphism(a: &MolGraph, b: &MolGraph) -> Option<Vec<usize>> {
    let n = a.atom_count();
    if n != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return None;
    }
    let mut ka: Vec<_> = a.atoms().iter().map(|x| (atom_key(x), 0usize)).collect();
    let mut kb: Vec<_> = b.atoms().iter().map(|x| (atom_key(x), 0usize)).collect();
    for i in 0..n {
        ka[i].1 = a.degree(i);
        kb[i].1 = b.degree(i);
    }
    let mut sa = ka.clone();
    let mut sb = kb.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return None;
    }
    // visit atoms of `a` so that each one after the first in its component is
    // adjacent to an earlier one, which lets bond checks prune early
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, _) in a.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if extend(a, b, &ka, &kb, &order, 0, &mut map, &mut used) {
        Some(map)
    } else {
        None
    }
}

pub fn is_isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    find_isomorphism(a, b).is_some()
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &MolGraph,
    b: &MolGraph,
    ka: &[((u8, i8, bool, Option<u8>), usize)],
    kb: &[((u8, i8, bool, Option<u8>), usize)],
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    'cand: for v in 0..b.atom_count() {
        if used[v] || ka[u] != kb[v] {
            continue;
        }
        for &(w, bi) in a.neighbors(u) {
            let mw = map[w];
            if mw == usize::MAX {
                continue;
            }
            match b.bond_between(v, mw) {
                Some(bj) if b.bonds()[bj].order == a.bonds()[bi].order => {}
                _ => continue 'cand,
            }
        }
        map[u] = v;
        used[v] = true;
        if extend(a, b, ka, kb, order, depth + 1, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[v] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn spellings_of_one_molecule() {
        let a = parse_smiles("CC(=O)N").unwrap();
        let b = parse_smiles("NC(C)=O").unwrap();
        let m = find_isomorphism(&a, &b).unwrap();
        assert_eq!(b.atoms()[m[2]].element, a.atoms()[2].element);
        assert!(!is_isomorphic(&a, &parse_smiles("CC(O)=N").unwrap()));
        assert!(!is_isomorphic(&parse_smiles("c1ccccc1").unwrap(), &parse_smiles("C1CCCCC1").unwrap()));
        assert!(!is_isomorphic(&parse_smiles("CCCCCC").unwrap(), &parse_smiles("CC(C)CCC").unwrap()));
        assert!(is_isomorphic(&parse_smiles("C.CO").unwrap(), &parse_smiles("OC.C").unwrap()));
    }
}
