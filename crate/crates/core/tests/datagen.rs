use std::collections::BTreeMap;

use molpc_core::chem::{distance, fragment_molecule, geometry_terms};
use molpc_core::datagen::*;
use molpc_core::metrics::{kabsch_rmsd, Histogram};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn bond_length_histograms_peak_at_table_values() {
    let corpus = generate_toy_corpus(&ToySpec::default(), 1000);
    let mut by_key: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in &corpus {
        for (k, d) in geometry_terms(m).unwrap().bond_lengths {
            by_key.entry(k).or_default().push(d);
        }
    }
    let cases = [("C-C", 1.54), ("C-N", 1.47), ("C-O", 1.43), ("C=O", 1.22), ("C:C", 1.40)];
    for (key, want) in cases {
        let values = by_key.get(key).unwrap_or_else(|| panic!("no {key} bonds"));
        let h = Histogram::from_values(0.0, 3.0, 300, values.iter().copied());
        let peak = h.counts().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let centre = (peak as f64 + 0.5) * 0.01;
        assert!((centre - want).abs() <= 0.01, "{key}: peak {centre}, want {want}");
    }
}

#[test]
fn rmsd_grows_with_noise() {
    let corpus = generate_toy_corpus(&ToySpec::default(), 200);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut means = Vec::new();
    for sigma in [0.05, 0.1, 0.2, 0.4] {
        let total: f64 = corpus
            .iter()
            .map(|m| kabsch_rmsd(perturb_conformer(m, sigma, &mut rng).coords(), m.coords()).unwrap())
            .sum();
        means.push(total / corpus.len() as f64);
    }
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn corpus_has_cuttable_molecules_and_no_clashes() {
    let corpus = generate_toy_corpus(&ToySpec::default(), 500);
    let multi = corpus.iter().filter(|m| fragment_molecule(m.graph()).fragments.len() > 1).count();
    assert!(multi > 250, "{multi}");
    let rings = corpus.iter().filter(|m| m.graph().bonds().len() >= m.atom_count()).count();
    assert!(rings > 50, "{rings}");
    for m in &corpus {
        let x = m.coords();
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                assert!(distance(x[i], x[j]) > 0.5);
            }
        }
        let c = x.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]]);
        assert!(c.iter().all(|v| (v / x.len() as f64).abs() < 1e-9));
    }
}

#[test]
fn generation_is_index_addressable() {
    let spec = ToySpec { seed: 11, ..ToySpec::default() };
    let corpus = generate_toy_corpus(&spec, 40);
    assert_eq!(generate_molecule(&spec, 37), corpus[37]);
}
