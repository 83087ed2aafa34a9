use super::graph::MolGraph;
use super::smiles::write_smiles;

/// Upper bound on the number of complete orderings explored while breaking
/// symmetry ties. Highly symmetric graphs beyond this bound may receive a
/// spelling that depends on input atom order.
pub const CANONICAL_LEAF_LIMIT: usize = 5000;

type Classes = Vec<usize>;

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> (Classes, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let classes = keys.iter().map(|k| sorted.binary_search(k).expect("present")).collect();
    (classes, sorted.len())
}

fn initial_classes(g: &MolGraph) -> Classes {
    let keys: Vec<_> = (0..g.atom_count())
        .map(|i| {
            let a = g.atoms()[i];
            let mut orders: Vec<usize> = g.neighbors(i).iter().map(|&(_, b)| g.bonds()[b].order.index()).collect();
            orders.sort_unstable();
            (a.element as u8, a.charge, a.aromatic, a.explicit_h, g.degree(i), orders)
        })
        .collect();
    dense_rank(&keys).0
}

fn refine(g: &MolGraph, mut classes: Classes) -> Classes {
    let mut count = classes.iter().copied().max().map_or(0, |m| m + 1);
    loop {
        let keys: Vec<_> = (0..g.atom_count())
            .map(|i| {
                let mut env: Vec<(usize, usize)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (classes[j], g.bonds()[b].order.index()))
                    .collect();
                env.sort_unstable();
                (classes[i], env)
            })
            .collect();
        let (next, next_count) = dense_rank(&keys);
        classes = next;
        if next_count == count {
            return classes;
        }
        count = next_count;
    }
}

fn search(g: &MolGraph, classes: Classes, leaves: &mut usize, best: &mut Option<String>) {
    if *leaves >= CANONICAL_LEAF_LIMIT && best.is_some() {
        return;
    }
    let n = classes.len();
    let mut sizes = vec![0usize; n];
    for &c in &classes {
        sizes[c] += 1;
    }
    let Some(cell) = (0..n).find(|&c| sizes[c] > 1) else {
        *leaves += 1;
        let mut order = vec![0usize; n];
        for (atom, &c) in classes.iter().enumerate() {
            order[c] = atom;
        }
        let s = write_smiles(g, Some(&order)).expect("classes form a permutation");
        if best.as_ref().map_or(true, |b| s < *b) {
            *best = Some(s);
        }
        return;
    };
    for v in (0..n).filter(|&v| classes[v] == cell) {
        let keys: Vec<(usize, bool)> = (0..n).map(|x| (classes[x], classes[x] == cell && x != v)).collect();
        let (split, _) = dense_rank(&keys);
        search(g, refine(g, split), leaves, best);
    }
}

/// Deterministic spelling shared by all isomorphic graphs. Atom classes are
/// refined from local invariants, then remaining ties are broken in every
/// possible way and the lexicographically smallest SMILES is kept.
pub fn canonical_smiles(graph: &MolGraph) -> String {
    if graph.atom_count() == 0 {
        return String::new();
    }
    let classes = refine(graph, initial_classes(graph));
    let mut best = None;
    let mut leaves = 0;
    search(graph, classes, &mut leaves, &mut best);
    best.expect("at least one leaf")
}
