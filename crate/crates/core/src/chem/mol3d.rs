use thiserror::Error;

use super::graph::MolGraph;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{atoms} atoms but {coords} coordinates")]
    LengthMismatch { atoms: usize, coords: usize },
    #[error("non-finite coordinate for atom {0}")]
    NonFinite(usize),
    #[error("bonded atoms {0} and {1} share a position")]
    DegenerateGeometry(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule3D {
    graph: MolGraph,
    coords: Vec<Vec3>,
}

impl Molecule3D {
    pub fn new(graph: MolGraph, coords: Vec<Vec3>) -> Result<Self, GeometryError> {
        if graph.atom_count() != coords.len() {
            return Err(GeometryError::LengthMismatch {
                atoms: graph.atom_count(),
                coords: coords.len(),
            });
        }
        if let Some(i) = coords.iter().position(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(GeometryError::NonFinite(i));
        }
        Ok(Self { graph, coords })
    }

    pub fn graph(&self) -> &MolGraph {
        &self.graph
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    pub fn atom_count(&self) -> usize {
        self.coords.len()
    }

    pub fn into_parts(self) -> (MolGraph, Vec<Vec3>) {
        (self.graph, self.coords)
    }

    /// Same molecule with atom `i` of the result taken from atom `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Molecule3D {
        Molecule3D {
            graph: self.graph.permuted(order),
            coords: order.iter().map(|&i| self.coords[i]).collect(),
        }
    }

    pub fn with_coords(&self, coords: Vec<Vec3>) -> Result<Molecule3D, GeometryError> {
        Molecule3D::new(self.graph.clone(), coords)
    }
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Angle at `b` in degrees.
pub fn angle(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let u = sub(a, b);
    let v = sub(c, b);
    let y = norm(cross(u, v));
    let x = dot(u, v);
    y.atan2(x).to_degrees()
}

/// Signed torsion a-b-c-d in degrees, in (-180, 180].
pub fn dihedral(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    let b1 = sub(b, a);
    let b2 = sub(c, b);
    let b3 = sub(d, c);
    let n1 = cross(b1, b2);
    let n2 = cross(b2, b3);
    let len = norm(b2);
    let m1 = cross(n1, [b2[0] / len, b2[1] / len, b2[2] / len]);
    let deg = dot(m1, n2).atan2(dot(n1, n2)).to_degrees();
    if deg <= -180.0 {
        deg + 360.0
    } else {
        deg
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeometryTerms {
    pub bond_lengths: Vec<(String, f64)>,
    pub bond_angles: Vec<(String, f64)>,
    pub dihedrals: Vec<(String, f64)>,
}

fn path_key(graph: &MolGraph, atoms: &[usize]) -> String {
    let sym = |i: usize| graph.atoms()[i].element.symbol();
    let bond = |i: usize, j: usize| {
        let b = graph.bond_between(i, j).expect("path follows bonds");
        graph.bonds()[b].order.symbol()
    };
    let spell = |path: &mut dyn Iterator<Item = usize>| {
        let path: Vec<usize> = path.collect();
        let mut s = String::from(sym(path[0]));
        for w in path.windows(2) {
            s.push_str(bond(w[0], w[1]));
            s.push_str(sym(w[1]));
        }
        s
    };
    let forward = spell(&mut atoms.iter().copied());
    let backward = spell(&mut atoms.iter().rev().copied());
    forward.min(backward)
}

/// Bond lengths, bond angles and torsions keyed by element and bond-order
/// spelling, read in whichever direction sorts first.
pub fn geometry_terms(mol: &Molecule3D) -> Result<GeometryTerms, GeometryError> {
    let g = mol.graph();
    let x = mol.coords();
    let mut terms = GeometryTerms::default();
    for b in g.bonds() {
        let d = distance(x[b.a], x[b.b]);
        if d == 0.0 {
            return Err(GeometryError::DegenerateGeometry(b.a, b.b));
        }
        terms.bond_lengths.push((path_key(g, &[b.a, b.b]), d));
    }
    for center in 0..g.atom_count() {
        let nbrs = g.neighbors(center);
        for (i, &(a, _)) in nbrs.iter().enumerate() {
            for &(c, _) in &nbrs[i + 1..] {
                terms
                    .bond_angles
                    .push((path_key(g, &[a, center, c]), angle(x[a], x[center], x[c])));
            }
        }
    }
    for bond in g.bonds() {
        let (b, c) = (bond.a, bond.b);
        for &(a, _) in g.neighbors(b) {
            if a == c {
                continue;
            }
            for &(d, _) in g.neighbors(c) {
                if d == b || d == a {
                    continue;
                }
                terms
                    .dihedrals
                    .push((path_key(g, &[a, b, c, d]), dihedral(x[a], x[b], x[c], x[d])));
            }
        }
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn simple_geometries() {
        let m = Molecule3D::new(parse_smiles("CO").unwrap(), vec![[0.0; 3], [0.0, 0.0, 1.5]]).unwrap();
        let t = geometry_terms(&m).unwrap();
        assert_eq!(t.bond_lengths, vec![("C-O".to_string(), 1.5)]);
        assert!(t.bond_angles.is_empty());

        let m = Molecule3D::new(
            parse_smiles("CCC").unwrap(),
            vec![[1.0, 0.0, 0.0], [0.0; 3], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let t = geometry_terms(&m).unwrap();
        assert_eq!(t.bond_angles.len(), 1);
        assert!((t.bond_angles[0].1 - 90.0).abs() < 1e-12);
        assert_eq!(t.bond_angles[0].0, "C-C-C");
    }

    #[test]
    fn keys_normalize_direction() {
        let m = Molecule3D::new(
            parse_smiles("OC=C").unwrap(),
            vec![[1.0, 0.0, 0.0], [0.0; 3], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let t = geometry_terms(&m).unwrap();
        assert_eq!(t.bond_angles[0].0, "C=C-O");
    }

    #[test]
    fn coincident_bonded_atoms() {
        let m = Molecule3D::new(parse_smiles("CC").unwrap(), vec![[1.0; 3], [1.0; 3]]).unwrap();
        assert_eq!(geometry_terms(&m), Err(GeometryError::DegenerateGeometry(0, 1)));
        assert!(Molecule3D::new(parse_smiles("CC").unwrap(), vec![[0.0; 3]]).is_err());
        assert!(Molecule3D::new(parse_smiles("C").unwrap(), vec![[f64::NAN, 0.0, 0.0]]).is_err());
    }
}
