//! Molecular graphs, SMILES, and graph-level analyses.

mod canonical;
mod fingerprint;
mod fragment;
mod graph;
mod isomorphism;
mod mol3d;
mod smiles;

pub use canonical::{canonical_smiles, CANONICAL_LEAF_LIMIT};
pub use fingerprint::{fingerprint, tanimoto, Fingerprint, FINGERPRINT_BITS};
pub use fragment::{fragment_molecule, FragmentSplit};
pub use graph::{Atom, Bond, BondOrder, Element, GraphError, MolGraph};
pub use isomorphism::{find_isomorphism, is_isomorphic};
pub use mol3d::{
    angle, cross, dihedral, distance, dot, geometry_terms, norm, sub, GeometryError, GeometryTerms, Molecule3D, Vec3,
};
pub use smiles::{
    parse_smiles, parse_smiles_with_notes, write_smiles, write_smiles_with_order, ParseNote, SmilesError,
};
