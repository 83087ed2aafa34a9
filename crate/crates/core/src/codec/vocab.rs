use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::chem::Element;

use super::CodecError;

pub type TokenId = u32;
pub type TokenSequence = Vec<TokenId>;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;

const SPECIALS: [&str; 8] = ["<pad>", "<bos>", "<eos>", "<unk>", "*", ".", "|", " "];

pub const RESIDUES: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET", "PHE", "PRO", "SER",
    "THR", "TRP", "TYR", "VAL",
];

pub const ATOM_NAMES: [&str; 37] = [
    "N", "CA", "C", "O", "OXT", "CB", "CG", "CG1", "CG2", "CD", "CD1", "CD2", "CE", "CE1", "CE2", "CE3", "CZ", "CZ2",
    "CZ3", "CH2", "ND1", "ND2", "NE", "NE1", "NE2", "NH1", "NH2", "NZ", "OD1", "OD2", "OE1", "OE2", "OG", "OG1", "OH",
    "SD", "SG",
];

const WORDS: [&str; 17] = [
    "Generate", "molecular", "3d", "structure", "for", "from", "GEOM", "shape", "pocket", "linker", "decoration",
    "missing", "fragments", "ligand", "design", "conformation", "generation",
];

const STRUCTURAL: [&str; 12] = ["(", ")", "[", "]", "=", "#", "-", ":", "/", "\\", "@", "%"];

/// Charge token for a point feature; `None` for neutral atoms.
pub fn charge_token(charge: i8) -> Option<String> {
    match charge {
        0 => None,
        1 => Some("+".into()),
        -1 => Some("-".into()),
        q if q > 0 => Some(format!("+{q}")),
        q => Some(format!("-{}", -q)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
    max_token_len: usize,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, CodecError> {
        if tokens.len() < SPECIALS.len() || tokens.iter().zip(SPECIALS).any(|(t, s)| t != s) {
            return Err(CodecError::Vocabulary("special tokens must come first".into()));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains('\n') {
                return Err(CodecError::Vocabulary(format!("invalid token at line {}", i + 1)));
            }
            if ids.insert(t.clone(), i as TokenId).is_some() {
                return Err(CodecError::Vocabulary(format!("duplicate token {t:?}")));
            }
        }
        let max_token_len = tokens.iter().map(|t| t.len()).max().unwrap_or(1);
        Ok(Self {
            tokens,
            ids,
            max_token_len,
        })
    }

    /// The shared vocabulary: specials, chemistry and coordinate tokens,
    /// prompt words, point-feature tokens, then every printable ASCII
    /// character not already present.
    pub fn standard() -> Self {
        let mut tokens: Vec<String> = Vec::new();
        let push = |t: String, tokens: &mut Vec<String>| {
            if !tokens.contains(&t) {
                tokens.push(t);
            }
        };
        for s in SPECIALS {
            push(s.into(), &mut tokens);
        }
        for e in Element::ALL {
            push(e.symbol().into(), &mut tokens);
            if let Some(a) = e.aromatic_symbol() {
                push(a.into(), &mut tokens);
            }
        }
        for q in [1i8, -1, 2, -2, 3, -3, 4, -4] {
            push(charge_token(q).expect("nonzero"), &mut tokens);
        }
        for s in STRUCTURAL {
            push(s.into(), &mut tokens);
        }
        push("H".into(), &mut tokens);
        push("-0".into(), &mut tokens);
        for i in -49i32..=49 {
            push(i.to_string(), &mut tokens);
        }
        for f in 0..100 {
            push(format!(".{f:02}"), &mut tokens);
        }
        for w in WORDS {
            push(w.into(), &mut tokens);
        }
        for r in RESIDUES {
            push(r.into(), &mut tokens);
        }
        for a in ATOM_NAMES {
            push(a.into(), &mut tokens);
        }
        for c in 0x20u8..0x7f {
            push((c as char).to_string(), &mut tokens);
        }
        Self::from_tokens(tokens).expect("standard vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Greedy longest match; characters with no token map to UNK.
    pub fn encode(&self, text: &str) -> TokenSequence {
        let mut out = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            let mut matched = None;
            let mut end = rest.len().min(self.max_token_len);
            while end > 0 {
                if rest.is_char_boundary(end) {
                    if let Some(id) = self.id(&rest[..end]) {
                        matched = Some((id, end));
                        break;
                    }
                }
                end -= 1;
            }
            match matched {
                Some((id, len)) => {
                    out.push(id);
                    rest = &rest[len..];
                }
                None => {
                    out.push(UNK);
                    let len = rest.chars().next().map_or(1, char::len_utf8);
                    rest = &rest[len..];
                }
            }
        }
        out
    }

    /// Concatenates tokens, skipping padding, BOS and EOS.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|&&id| id != PAD && id != BOS && id != EOS)
            .map(|&id| self.token(id).unwrap_or(SPECIALS[UNK as usize]))
            .collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, CodecError> {
        let tokens = r
            .lines()
            .collect::<std::io::Result<Vec<String>>>()
            .map_err(|e| CodecError::Vocabulary(e.to_string()))?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()
    }

    pub fn load(path: &Path) -> Result<Self, CodecError> {
        let f = std::fs::File::open(path).map_err(|e| CodecError::Vocabulary(e.to_string()))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

pub fn encode_text(text: &str, vocab: &Vocabulary) -> TokenSequence {
    vocab.encode(text)
}

pub fn decode_text(ids: &[TokenId], vocab: &Vocabulary) -> String {
    vocab.decode(ids)
}
