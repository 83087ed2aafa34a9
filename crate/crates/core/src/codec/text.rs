use crate::chem::{parse_smiles, write_smiles_with_order, Element, MolGraph, Molecule3D, Vec3};

use super::coord::{format_coordinate, quantized_value};
use super::CodecError;

pub const RECORD_SEPARATOR: char = '|';

fn record_symbol(graph: &MolGraph, atom: usize) -> &'static str {
    graph.atoms()[atom].element.symbol()
}

/// Coordinate records `El x y z` for the given atoms, joined by `|`.
pub fn serialize_records(mol: &Molecule3D, order: &[usize]) -> Result<String, CodecError> {
    let mut out = String::new();
    for (k, &i) in order.iter().enumerate() {
        if k > 0 {
            out.push(RECORD_SEPARATOR);
        }
        out.push_str(record_symbol(mol.graph(), i));
        for v in mol.coords()[i] {
            out.push(' ');
            out.push_str(&format_coordinate(v)?);
        }
    }
    Ok(out)
}

/// `SMILES|El x y z|...` with records in SMILES atom order. Also returns
/// that order as indices into the molecule's atoms.
pub fn serialize_with_order(mol: &Molecule3D) -> Result<(String, Vec<usize>), CodecError> {
    let (smiles, order) = write_smiles_with_order(mol.graph(), None)?;
    let records = serialize_records(mol, &order)?;
    Ok((format!("{smiles}{RECORD_SEPARATOR}{records}"), order))
}

pub fn serialize(mol: &Molecule3D) -> Result<String, CodecError> {
    serialize_with_order(mol).map(|(s, _)| s)
}

fn parse_record(record: &str, position: usize) -> Result<(&str, Vec3), CodecError> {
    let malformed = || CodecError::MalformedRecord {
        position,
        record: record.to_string(),
    };
    let mut parts = record.split(' ');
    let symbol = parts.next().filter(|s| !s.is_empty()).ok_or_else(malformed)?;
    let mut xyz = [0.0; 3];
    for slot in &mut xyz {
        let field = parts.next().ok_or_else(malformed)?;
        if !field.bytes().all(|b| b.is_ascii_digit() || b == b'-' || b == b'.') {
            return Err(malformed());
        }
        *slot = field.parse().map_err(|_| malformed())?;
    }
    if parts.next().is_some() {
        return Err(malformed());
    }
    Ok((symbol, xyz))
}

/// Parses `|`-joined records against a graph whose atom order they follow.
pub fn parse_records(graph: MolGraph, records: &str) -> Result<Molecule3D, CodecError> {
    let parts: Vec<&str> = if records.is_empty() {
        Vec::new()
    } else {
        records.split(RECORD_SEPARATOR).collect()
    };
    if parts.len() != graph.atom_count() {
        return Err(CodecError::AtomCountMismatch {
            atoms: graph.atom_count(),
            records: parts.len(),
        });
    }
    let mut coords = Vec::with_capacity(parts.len());
    for (i, rec) in parts.iter().enumerate() {
        let (symbol, xyz) = parse_record(rec, i)?;
        let expected = graph.atoms()[i].element;
        if Element::from_symbol(symbol) != Some(expected) {
            return Err(CodecError::ElementMismatch {
                position: i,
                expected: expected.symbol(),
                found: symbol.to_string(),
            });
        }
        coords.push(xyz);
    }
    Ok(Molecule3D::new(graph, coords)?)
}

pub fn parse_mol3d(text: &str) -> Result<Molecule3D, CodecError> {
    let (smiles, records) = text.split_once(RECORD_SEPARATOR).unwrap_or((text, ""));
    let graph = parse_smiles(smiles)?;
    parse_records(graph, records)
}

/// The molecule with coordinates rounded to the codec's resolution.
pub fn quantize_molecule(mol: &Molecule3D) -> Result<Molecule3D, CodecError> {
    let coords = mol
        .coords()
        .iter()
        .map(|c| Ok([quantized_value(c[0])?, quantized_value(c[1])?, quantized_value(c[2])?]))
        .collect::<Result<Vec<_>, CodecError>>()?;
    Ok(mol.with_coords(coords)?)
}
