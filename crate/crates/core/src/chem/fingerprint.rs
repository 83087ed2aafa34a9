use super::graph::MolGraph;

pub const FINGERPRINT_BITS: usize = 2048;
const WORDS: usize = FINGERPRINT_BITS / 64;
const RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint([u64; WORDS]);

impl Default for Fingerprint {
    fn default() -> Self {
        Fingerprint([0; WORDS])
    }
}

impl Fingerprint {
    pub fn set(&mut self, bit: usize) {
        let bit = bit % FINGERPRINT_BITS;
        self.0[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.0[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..FINGERPRINT_BITS).filter(|&b| self.get(b))
    }

    pub fn words(&self) -> &[u64; WORDS] {
        &self.0
    }
}

/// Intersection over union of set bits. Two empty fingerprints score 1.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let mut inter = 0u32;
    let mut union = 0u32;
    for (x, y) in a.0.iter().zip(&b.0) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }
}

/// Circular fingerprint of radius 2: each atom's identifier is iteratively
/// rehashed with the sorted multiset of (bond order, neighbour identifier),
/// and every identifier at every radius sets one bit.
pub fn fingerprint(graph: &MolGraph) -> Fingerprint {
    let mut fp = Fingerprint::default();
    let n = graph.atom_count();
    let in_ring: Vec<bool> = {
        let acyclic = graph.acyclic_bonds();
        (0..n)
            .map(|i| graph.neighbors(i).iter().any(|&(_, b)| !acyclic[b]))
            .collect()
    };
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = graph.atoms()[i];
            let mut h = Fnv::new();
            h.write(a.element.symbol().as_bytes());
            h.write(&[
                a.charge as u8,
                a.aromatic as u8,
                a.explicit_h.map_or(255, |x| x),
                graph.degree(i) as u8,
                in_ring[i] as u8,
            ]);
            h.0
        })
        .collect();
    for &id in &ids {
        fp.set((id % FINGERPRINT_BITS as u64) as usize);
    }
    for round in 1..=RADIUS {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<(usize, u64)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (graph.bonds()[b].order.index(), ids[j]))
                    .collect();
                env.sort_unstable();
                let mut h = Fnv::new();
                h.write_u64(round as u64);
                h.write_u64(ids[i]);
                for (o, id) in env {
                    h.write_u64(o as u64);
                    h.write_u64(id);
                }
                h.0
            })
            .collect();
        ids = next;
        for &id in &ids {
            fp.set((id % FINGERPRINT_BITS as u64) as usize);
        }
    }
    fp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn identical_and_different() {
        let a = fingerprint(&parse_smiles("CCO").unwrap());
        assert_eq!(tanimoto(&a, &fingerprint(&parse_smiles("OCC").unwrap())), 1.0);
        let benzene = fingerprint(&parse_smiles("c1ccccc1").unwrap());
        let hexane = fingerprint(&parse_smiles("C1CCCCC1").unwrap());
        assert!(tanimoto(&benzene, &hexane) < 1.0);
        assert!(a.count_ones() > 0);
    }
}
