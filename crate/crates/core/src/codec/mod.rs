//! The combined SMILES plus coordinates text format and its token vocabulary.

mod coord;
mod text;
mod vocab;

use thiserror::Error;

use crate::chem::{GeometryError, SmilesError};

pub use coord::{detokenize_coordinate, format_coordinate, quantize, quantized_value, tokenize_coordinate};
pub use text::{
    parse_mol3d, parse_records, quantize_molecule, serialize, serialize_records, serialize_with_order,
    RECORD_SEPARATOR,
};
pub use vocab::{
    charge_token, decode_text, encode_text, TokenId, TokenSequence, Vocabulary, ATOM_NAMES, BOS, EOS, PAD, RESIDUES,
    UNK,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("coordinate {0} is outside the representable range")]
    CoordinateOutOfRange(f64),
    #[error("malformed coordinate `{0}`")]
    MalformedCoordinate(String),
    #[error("SMILES has {atoms} atoms but there are {records} coordinate records")]
    AtomCountMismatch { atoms: usize, records: usize },
    #[error("record {position}: expected element {expected}, found `{found}`")]
    ElementMismatch {
        position: usize,
        expected: &'static str,
        found: String,
    },
    #[error("record {position} is malformed: `{record}`")]
    MalformedRecord { position: usize, record: String },
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
}
