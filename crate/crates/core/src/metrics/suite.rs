use std::collections::BTreeMap;

use crate::chem::{geometry_terms, BondOrder, GeometryTerms, Molecule3D};

use super::histogram::{js_masses, Histogram};
use super::{MetricReport, MetricsError};

#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    fn histogram(&self, values: impl IntoIterator<Item = f64>) -> Histogram {
        Histogram::from_values(self.lo, self.hi, self.bins, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub bond_lengths: Binning,
    pub bond_angles: Binning,
    pub dihedrals: Binning,
    /// Number of most frequent reference keys compared per geometry family.
    pub top_k: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            bond_lengths: Binning {
                lo: 0.0,
                hi: 3.0,
                bins: 60,
            },
            bond_angles: Binning {
                lo: 0.0,
                hi: 180.0,
                bins: 60,
            },
            dihedrals: Binning {
                lo: -180.0,
                hi: 180.0,
                bins: 72,
            },
            top_k: 8,
        }
    }
}

pub const RING_SIZES: std::ops::RangeInclusive<usize> = 3..=9;
const COUNT_BINS: usize = 10;

/// JS divergence where an empty side is maximally different from a
/// non-empty one and two empty sides are identical.
fn js_or_convention(p: &Histogram, q: &Histogram) -> f64 {
    match (p.masses(), q.masses()) {
        (Some(a), Some(b)) => js_masses(&a, &b),
        (None, None) => 0.0,
        _ => 1.0,
    }
}

fn frequent_keys(terms: &[(String, f64)], k: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (key, _) in terms {
        *counts.entry(key).or_default() += 1;
    }
    let mut v: Vec<(&str, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(k).map(|(s, _)| s.to_string()).collect()
}

struct Pooled {
    lengths: Vec<(String, f64)>,
    angles: Vec<(String, f64)>,
    dihedrals: Vec<(String, f64)>,
    degenerate: usize,
}

fn pool(mols: &[Molecule3D]) -> Pooled {
    let mut p = Pooled {
        lengths: Vec::new(),
        angles: Vec::new(),
        dihedrals: Vec::new(),
        degenerate: 0,
    };
    for m in mols {
        match geometry_terms(m) {
            Ok(GeometryTerms {
                bond_lengths,
                bond_angles,
                dihedrals,
            }) => {
                p.lengths.extend(bond_lengths);
                p.angles.extend(bond_angles);
                p.dihedrals.extend(dihedrals);
            }
            Err(_) => p.degenerate += 1,
        }
    }
    p
}

fn family(
    report: &mut MetricReport,
    name: &str,
    gen: &[(String, f64)],
    reference: &[(String, f64)],
    binning: &Binning,
    top_k: usize,
) {
    let keys = frequent_keys(reference, top_k);
    if keys.is_empty() {
        return;
    }
    let values = |terms: &[(String, f64)], key: &str| -> Vec<f64> {
        terms.iter().filter(|(k, _)| k == key).map(|(_, v)| *v).collect()
    };
    let mut total = 0.0;
    let mut freq_ref = Histogram::categorical(keys.len());
    let mut freq_gen = Histogram::categorical(keys.len());
    for (i, key) in keys.iter().enumerate() {
        let r = values(reference, key);
        let g = values(gen, key);
        freq_ref.add_weight(i, r.len() as f64);
        freq_gen.add_weight(i, g.len() as f64);
        let js = js_or_convention(&binning.histogram(g), &binning.histogram(r));
        report.insert(format!("js_{name}[{key}]"), js);
        total += js;
    }
    report.insert(format!("js_{name}"), total / keys.len() as f64);
    report.insert(format!("js_{name}_frequency"), js_or_convention(&freq_gen, &freq_ref));
}

fn count_histogram(mols: &[Molecule3D], bins: usize, f: impl Fn(&Molecule3D) -> Vec<usize>) -> Histogram {
    let mut h = Histogram::categorical(bins);
    for m in mols {
        for v in f(m) {
            h.add_index(v);
        }
    }
    h
}

fn ring_sizes(m: &Molecule3D) -> Vec<usize> {
    m.graph().sssr().iter().map(Vec::len).collect()
}

/// JS divergences between generated and reference corpora over geometry,
/// bond and ring statistics. Geometry families compare the `top_k` most
/// frequent reference keys; `js_<family>` is their mean.
pub fn structure_js_suite(
    gen: &[Molecule3D],
    reference: &[Molecule3D],
    config: &SuiteConfig,
) -> Result<MetricReport, MetricsError> {
    if gen.is_empty() || reference.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut report = MetricReport::default();
    let (pg, pr) = (pool(gen), pool(reference));
    family(&mut report, "bond_length", &pg.lengths, &pr.lengths, &config.bond_lengths, config.top_k);
    family(&mut report, "bond_angle", &pg.angles, &pr.angles, &config.bond_angles, config.top_k);
    family(&mut report, "dihedral", &pg.dihedrals, &pr.dihedrals, &config.dihedrals, config.top_k);

    let degrees = |m: &Molecule3D| (0..m.atom_count()).map(|i| m.graph().degree(i)).collect();
    report.insert(
        "js_bonds_per_atom".into(),
        js_or_convention(&count_histogram(gen, 7, degrees), &count_histogram(reference, 7, degrees)),
    );
    let bond_types = |m: &Molecule3D| m.graph().bonds().iter().map(|b| b.order.index()).collect();
    report.insert(
        "js_bond_type".into(),
        js_or_convention(
            &count_histogram(gen, BondOrder::ALL.len(), bond_types),
            &count_histogram(reference, BondOrder::ALL.len(), bond_types),
        ),
    );
    let rings = |m: &Molecule3D| vec![m.graph().ring_count()];
    report.insert(
        "js_ring_count".into(),
        js_or_convention(&count_histogram(gen, COUNT_BINS, rings), &count_histogram(reference, COUNT_BINS, rings)),
    );
    let mut total = 0.0;
    for n in RING_SIZES {
        let of_size = |m: &Molecule3D| vec![ring_sizes(m).iter().filter(|&&s| s == n).count()];
        let js = js_or_convention(
            &count_histogram(gen, COUNT_BINS, of_size),
            &count_histogram(reference, COUNT_BINS, of_size),
        );
        report.insert(format!("js_n_sized_rings[{n}]"), js);
        total += js;
    }
    report.insert("js_n_sized_rings".into(), total / RING_SIZES.count() as f64);

    report.note("gen_molecules", gen.len().to_string());
    report.note("ref_molecules", reference.len().to_string());
    report.note("gen_degenerate_geometry", pg.degenerate.to_string());
    report.note("top_k", config.top_k.to_string());
    for (name, b) in [
        ("bond_length_bins", &config.bond_lengths),
        ("bond_angle_bins", &config.bond_angles),
        ("dihedral_bins", &config.dihedrals),
    ] {
        report.note(name, format!("{} {} {}", b.lo, b.hi, b.bins));
    }
    Ok(report)
}
