use std::collections::{BTreeMap, BTreeSet};

use crate::chem::{canonical_smiles, distance, fingerprint, tanimoto, Element, Molecule3D};
use crate::codec::parse_mol3d;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub total: usize,
    pub valid: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub diversity: f64,
}

pub const CONTAINMENT_TOLERANCE: f64 = 0.5;

/// Whether `mol` is connected and has, for every non-wildcard atom of
/// `fragments`, an atom of the same element within `tolerance`.
pub fn contains_fragments(mol: &Molecule3D, fragments: &Molecule3D, tolerance: f64) -> bool {
    if mol.graph().components().len() != 1 {
        return false;
    }
    fragments
        .graph()
        .atoms()
        .iter()
        .zip(fragments.coords())
        .filter(|(a, _)| a.element != Element::Wildcard)
        .all(|(a, c)| {
            mol.graph()
                .atoms()
                .iter()
                .zip(mol.coords())
                .any(|(b, d)| b.element == a.element && distance(*c, *d) <= tolerance)
        })
}

/// Validity, uniqueness, novelty and diversity of decoded samples.
///
/// Diversity is one minus the mean pairwise Tanimoto similarity of the
/// unique valid molecules, and zero when fewer than two are unique.
pub fn sample_stats(samples: &[String], train: &BTreeSet<String>, condition: Option<&Molecule3D>) -> SampleStats {
    let valid: Vec<Molecule3D> = samples
        .iter()
        .filter_map(|s| parse_mol3d(s).ok())
        .filter(|m| condition.map_or(true, |f| contains_fragments(m, f, CONTAINMENT_TOLERANCE)))
        .collect();
    let mut unique: BTreeMap<String, usize> = BTreeMap::new();
    for (i, m) in valid.iter().enumerate() {
        unique.entry(canonical_smiles(m.graph())).or_insert(i);
    }
    let novel = unique.keys().filter(|k| !train.contains(*k)).count();
    let fps: Vec<_> = unique.values().map(|&i| fingerprint(valid[i].graph())).collect();
    let mut sim = 0.0;
    let mut pairs = 0usize;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            sim += tanimoto(&fps[i], &fps[j]);
            pairs += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    SampleStats {
        total: samples.len(),
        valid: valid.len(),
        validity: ratio(valid.len(), samples.len()),
        uniqueness: ratio(unique.len(), valid.len()),
        novelty: ratio(novel, unique.len()),
        diversity: if pairs == 0 { 0.0 } else { 1.0 - sim / pairs as f64 },
    }
}
