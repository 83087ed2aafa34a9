use super::graph::{BondOrder, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSplit {
    /// Atom sets, each sorted, ordered by their lowest atom index.
    pub fragments: Vec<Vec<usize>>,
    /// Indices into the graph's bond list, ascending.
    pub cut_bonds: Vec<usize>,
    /// Per fragment: (atom inside the fragment, id of the fragment across the cut).
    pub attachment_points: Vec<Vec<(usize, usize)>>,
}

impl FragmentSplit {
    pub fn fragment_of(&self, atom: usize) -> Option<usize> {
        self.fragments.iter().position(|f| f.binary_search(&atom).is_ok())
    }

    /// Fragment id of every atom.
    pub fn labels(&self, atom_count: usize) -> Vec<usize> {
        let mut labels = vec![usize::MAX; atom_count];
        for (fid, frag) in self.fragments.iter().enumerate() {
            for &a in frag {
                labels[a] = fid;
            }
        }
        labels
    }
}

/// Cuts every acyclic, non-aromatic single bond whose endpoints both have
/// degree at least two.
pub fn fragment_molecule(graph: &MolGraph) -> FragmentSplit {
    let acyclic = graph.acyclic_bonds();
    let cut_bonds: Vec<usize> = graph
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            acyclic[i] && b.order == BondOrder::Single && graph.degree(b.a) >= 2 && graph.degree(b.b) >= 2
        })
        .map(|(i, _)| i)
        .collect();
    let mut fragments = graph.components_without(&cut_bonds);
    for f in &mut fragments {
        f.sort_unstable();
    }
    fragments.sort_by_key(|f| f[0]);
    let mut split = FragmentSplit {
        attachment_points: vec![Vec::new(); fragments.len()],
        fragments,
        cut_bonds,
    };
    let labels = split.labels(graph.atom_count());
    for &bi in &split.cut_bonds {
        let b = graph.bonds()[bi];
        split.attachment_points[labels[b.a]].push((b.a, labels[b.b]));
        split.attachment_points[labels[b.b]].push((b.b, labels[b.a]));
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn small_cases() {
        let s = fragment_molecule(&parse_smiles("CC").unwrap());
        assert_eq!(s.fragments, vec![vec![0, 1]]);
        assert!(s.cut_bonds.is_empty());

        let s = fragment_molecule(&parse_smiles("CCCC").unwrap());
        assert_eq!(s.fragments, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(s.cut_bonds, vec![1]);
        assert_eq!(s.attachment_points, vec![vec![(1, 1)], vec![(2, 0)]]);

        let s = fragment_molecule(&parse_smiles("c1ccccc1").unwrap());
        assert_eq!(s.fragments.len(), 1);

        // double bonds and ring bonds stay intact
        let s = fragment_molecule(&parse_smiles("CC=CC").unwrap());
        assert_eq!(s.fragments.len(), 1);
        let s = fragment_molecule(&parse_smiles("CCc1ccccc1").unwrap());
        assert_eq!(s.fragments, vec![vec![0, 1], vec![2, 3, 4, 5, 6, 7]]);
    }
}
