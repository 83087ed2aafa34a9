//! SMILES reading and writing for the supported subset.
//!
//! Accepted: organic-subset atoms (`B C N O P S F Cl Br I`, aromatic
//! `b c n o p s`), the wildcard `*`, bracket atoms with element, optional
//! hydrogen count and charge, branches, ring closures `0-9` and `%nn`, bond
//! symbols `- = # :`, and `.`-separated components. Stereo marks (`/ \ @ @@`)
//! are accepted and dropped with a [`ParseNote`]. Isotopes and atom classes
//! are rejected.
//!
//! Atom order of a parsed graph is the left-to-right order in which atoms
//! appear in the string.

use std::collections::BTreeMap;

use thiserror::Error;

use super::graph::{Atom, Bond, BondOrder, Element, GraphError, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    EmptyInput,
    #[error("unexpected character {ch:?} at {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unknown element `{symbol}` at {pos}")]
    UnknownElement { pos: usize, symbol: String },
    #[error("ring closure {label} is never closed")]
    UnmatchedRingClosure { label: u32 },
    #[error("unbalanced branch at {pos}")]
    UnbalancedBranch { pos: usize },
    #[error("invalid bond at {pos}: {reason}")]
    InvalidBond { pos: usize, reason: &'static str },
    #[error("atom order is not a permutation of 0..{0}")]
    InvalidAtomOrder(usize),
    #[error(transparent)]
    Invalid(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseNote {
    /// A `/`, `\`, `@` or `@@` mark was read and discarded.
    StereoDiscarded { pos: usize },
}

pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    parse_smiles_with_notes(text).map(|(g, _)| g)
}

pub fn parse_smiles_with_notes(text: &str) -> Result<(MolGraph, Vec<ParseNote>), SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    Parser::new(text).run()
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    notes: Vec<ParseNote>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    branches: Vec<(usize, usize)>,
    rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            s: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            notes: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
        }
    }

    fn unexpected(&self) -> SmilesError {
        let ch = std::str::from_utf8(&self.s[self.pos..])
            .ok()
            .and_then(|t| t.chars().next())
            .unwrap_or(self.s[self.pos] as char);
        SmilesError::UnexpectedChar { pos: self.pos, ch }
    }

    fn run(mut self) -> Result<(MolGraph, Vec<ParseNote>), SmilesError> {
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            match c {
                b'(' => {
                    let Some(p) = self.prev else {
                        return Err(SmilesError::UnbalancedBranch { pos: self.pos });
                    };
                    if self.pending.is_some() {
                        return Err(SmilesError::InvalidBond {
                            pos: self.pos,
                            reason: "bond before branch",
                        });
                    }
                    self.branches.push((p, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedBranch { pos: self.pos });
                    };
                    self.check_no_pending()?;
                    self.prev = Some(p);
                    self.pos += 1;
                }
                b'.' => {
                    self.check_no_pending()?;
                    if !self.branches.is_empty() {
                        return Err(SmilesError::UnbalancedBranch { pos: self.pos });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(SmilesError::InvalidBond {
                            pos: self.pos,
                            reason: "bond without a preceding atom",
                        });
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        b'/' | b'\\' => {
                            self.notes.push(ParseNote::StereoDiscarded { pos: self.pos });
                            BondOrder::Single
                        }
                        _ => BondOrder::Single,
                    };
                    self.pending = Some((order, self.pos));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom)?;
                }
            }
        }
        if let Some(&(_, pos)) = self.branches.last() {
            return Err(SmilesError::UnbalancedBranch { pos });
        }
        if let Some((&label, _)) = self.rings.iter().next() {
            return Err(SmilesError::UnmatchedRingClosure { label });
        }
        self.check_no_pending()?;
        if self.atoms.is_empty() {
            return Err(SmilesError::EmptyInput);
        }
        let graph = MolGraph::new(self.atoms, self.bonds)?;
        Ok((graph, self.notes))
    }

    fn check_no_pending(&self) -> Result<(), SmilesError> {
        match self.pending {
            Some((_, pos)) => Err(SmilesError::InvalidBond {
                pos,
                reason: "dangling bond",
            }),
            None => Ok(()),
        }
    }

    fn implicit_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(p) = self.prev {
            let order = match self.pending.take() {
                Some((o, _)) => o,
                None => self.implicit_order(p, idx),
            };
            self.bonds.push(Bond::new(p, idx, order));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(atom) = self.prev else {
            return Err(self.unexpected());
        };
        let label = if self.s[self.pos] == b'%' {
            let digits = self.s.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                }
                _ => return Err(self.unexpected()),
            }
        } else {
            self.pos += 1;
            (self.s[start] - b'0') as u32
        };
        let bond = self.pending.take();
        match self.rings.remove(&label) {
            Some((other, open_bond, _)) => {
                if other == atom {
                    return Err(SmilesError::InvalidBond {
                        pos: start,
                        reason: "ring closure onto the same atom",
                    });
                }
                let order = match (open_bond, bond.map(|b| b.0)) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(SmilesError::InvalidBond {
                            pos: start,
                            reason: "conflicting ring-closure bond symbols",
                        })
                    }
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.implicit_order(other, atom),
                };
                if self.bonds.iter().any(|b| (b.a == other && b.b == atom) || (b.a == atom && b.b == other)) {
                    return Err(SmilesError::InvalidBond {
                        pos: start,
                        reason: "ring closure duplicates an existing bond",
                    });
                }
                self.bonds.push(Bond::new(other, atom, order));
            }
            None => {
                self.rings.insert(label, (atom, bond.map(|b| b.0), start));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let rest = &self.s[self.pos..];
        let start = self.pos;
        if rest[0] == b'*' {
            self.pos += 1;
            return Ok(Atom::wildcard());
        }
        for two in ["Cl", "Br"] {
            if rest.starts_with(two.as_bytes()) {
                self.pos += 2;
                return Ok(Atom::new(Element::from_symbol(two).expect("known")));
            }
        }
        let c = rest[0];
        if !c.is_ascii_alphabetic() {
            return Err(self.unexpected());
        }
        let sym = (c as char).to_string();
        self.pos += 1;
        if c.is_ascii_uppercase() {
            match Element::from_symbol(&sym) {
                Some(e) if e != Element::Wildcard => Ok(Atom::new(e)),
                _ => Err(SmilesError::UnknownElement { pos: start, symbol: sym }),
            }
        } else {
            match Element::from_aromatic_symbol(&sym) {
                Some(e) => Ok(Atom::aromatic(e)),
                None => Err(SmilesError::UnknownElement { pos: start, symbol: sym }),
            }
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let peek = |p: &Self| p.s.get(p.pos).copied();
        if peek(self).is_some_and(|c| c.is_ascii_digit()) {
            // isotopes are outside the supported subset
            return Err(self.unexpected());
        }
        let sym_start = self.pos;
        let (element, aromatic) = match peek(self) {
            Some(b'*') => {
                self.pos += 1;
                (Element::Wildcard, false)
            }
            Some(c) if c.is_ascii_uppercase() => {
                self.pos += 1;
                if peek(self).is_some_and(|c| c.is_ascii_lowercase()) {
                    self.pos += 1;
                }
                let sym = std::str::from_utf8(&self.s[sym_start..self.pos]).expect("ascii");
                match Element::from_symbol(sym) {
                    Some(e) => (e, false),
                    None => {
                        return Err(SmilesError::UnknownElement {
                            pos: sym_start,
                            symbol: sym.to_string(),
                        })
                    }
                }
            }
            Some(c) if c.is_ascii_lowercase() => {
                self.pos += 1;
                let sym = (c as char).to_string();
                match Element::from_aromatic_symbol(&sym) {
                    Some(e) => (e, true),
                    None => return Err(SmilesError::UnknownElement { pos: sym_start, symbol: sym }),
                }
            }
            _ => {
                return Err(if self.pos < self.s.len() {
                    self.unexpected()
                } else {
                    SmilesError::UnexpectedChar { pos: open, ch: '[' }
                })
            }
        };
        if peek(self) == Some(b'@') {
            self.notes.push(ParseNote::StereoDiscarded { pos: self.pos });
            self.pos += 1;
            if peek(self) == Some(b'@') {
                self.pos += 1;
            }
        }
        let mut h = 0u8;
        if peek(self) == Some(b'H') {
            self.pos += 1;
            h = 1;
            if let Some(d) = peek(self).filter(u8::is_ascii_digit) {
                h = d - b'0';
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = peek(self) {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = peek(self).filter(u8::is_ascii_digit) {
                charge = unit * (d - b'0') as i32;
                self.pos += 1;
            } else {
                charge = unit;
                while peek(self) == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        if peek(self) != Some(b']') {
            return Err(if self.pos < self.s.len() {
                self.unexpected()
            } else {
                SmilesError::UnexpectedChar { pos: open, ch: '[' }
            });
        }
        self.pos += 1;
        Ok(Atom {
            element,
            charge: charge.clamp(-100, 100) as i8,
            aromatic,
            explicit_h: Some(h),
        })
    }
}

fn atom_text(a: &Atom) -> String {
    let sym = if a.aromatic {
        a.element.aromatic_symbol().unwrap_or(a.element.symbol())
    } else {
        a.element.symbol()
    };
    if a.charge == 0 && a.explicit_h.is_none() {
        return sym.to_string();
    }
    let mut s = String::from("[");
    s.push_str(sym);
    match a.explicit_h {
        Some(0) | None => {}
        Some(1) => s.push('H'),
        Some(h) => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        q if q > 0 => s.push_str(&format!("+{q}")),
        q => s.push_str(&format!("-{}", -q)),
    }
    s.push(']');
    s
}

fn bond_text(g: &MolGraph, bond: usize) -> &'static str {
    let b = g.bonds()[bond];
    let both_aromatic = g.atoms()[b.a].aromatic && g.atoms()[b.b].aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn ring_label(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d:02}")
    }
}

/// Writes a SMILES string. `atom_order` ranks atoms: traversal starts at
/// `atom_order[0]` and prefers lower-ranked neighbours. `None` uses index order.
pub fn write_smiles(graph: &MolGraph, atom_order: Option<&[usize]>) -> Result<String, SmilesError> {
    write_smiles_with_order(graph, atom_order).map(|(s, _)| s)
}

/// As [`write_smiles`], also returning the atoms in the order they appear in the string.
pub fn write_smiles_with_order(
    graph: &MolGraph,
    atom_order: Option<&[usize]>,
) -> Result<(String, Vec<usize>), SmilesError> {
    let n = graph.atom_count();
    let rank: Vec<usize> = match atom_order {
        None => (0..n).collect(),
        Some(order) => {
            let mut rank = vec![usize::MAX; n];
            if order.len() != n {
                return Err(SmilesError::InvalidAtomOrder(n));
            }
            for (r, &a) in order.iter().enumerate() {
                if a >= n || rank[a] != usize::MAX {
                    return Err(SmilesError::InvalidAtomOrder(n));
                }
                rank[a] = r;
            }
            rank
        }
    };
    let mut by_rank: Vec<usize> = (0..n).collect();
    by_rank.sort_by_key(|&a| rank[a]);

    let mut w = Writer {
        g: graph,
        rank: &rank,
        visited: vec![false; n],
        parent_bond: vec![usize::MAX; n],
        children: vec![Vec::new(); n],
        ring_at: vec![Vec::new(); n],
        ring_seen: vec![false; graph.bonds().len()],
        preorder: Vec::with_capacity(n),
        position: vec![0; n],
    };
    let mut roots = Vec::new();
    for &a in &by_rank {
        if !w.visited[a] {
            roots.push(a);
            w.traverse(a);
        }
    }
    for (i, &a) in w.preorder.iter().enumerate() {
        w.position[a] = i;
    }
    let mut out = String::new();
    let mut digits = DigitPool::default();
    let mut open_digit = vec![0u32; graph.bonds().len()];
    for (i, &r) in roots.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        w.emit(r, &mut out, &mut digits, &mut open_digit);
    }
    Ok((out, w.preorder))
}

#[derive(Default)]
struct DigitPool {
    used: Vec<bool>,
}

impl DigitPool {
    fn take(&mut self) -> u32 {
        let d = (1..).find(|&d| !self.used.get(d as usize).copied().unwrap_or(false)).expect("free digit");
        if self.used.len() <= d as usize {
            self.used.resize(d as usize + 1, false);
        }
        self.used[d as usize] = true;
        d
    }

    fn release(&mut self, d: u32) {
        self.used[d as usize] = false;
    }
}

struct Writer<'g> {
    g: &'g MolGraph,
    rank: &'g [usize],
    visited: Vec<bool>,
    parent_bond: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    ring_at: Vec<Vec<usize>>,
    ring_seen: Vec<bool>,
    preorder: Vec<usize>,
    position: Vec<usize>,
}

impl Writer<'_> {
    fn sorted_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nbrs = self.g.neighbors(u).to_vec();
        nbrs.sort_by_key(|&(v, _)| self.rank[v]);
        nbrs
    }

    fn traverse(&mut self, u: usize) {
        self.visited[u] = true;
        self.preorder.push(u);
        for (v, bi) in self.sorted_neighbors(u) {
            if bi == self.parent_bond[u] {
                continue;
            }
            if !self.visited[v] {
                self.parent_bond[v] = bi;
                self.children[u].push((v, bi));
                self.traverse(v);
            } else if !self.ring_seen[bi] && self.parent_bond[v] != bi {
                self.ring_seen[bi] = true;
                self.ring_at[u].push(bi);
                self.ring_at[v].push(bi);
            }
        }
    }

    fn emit(&self, u: usize, out: &mut String, digits: &mut DigitPool, open_digit: &mut [u32]) {
        out.push_str(&atom_text(&self.g.atoms()[u]));
        let mut rings = self.ring_at[u].clone();
        rings.sort_by_key(|&bi| {
            let other = self.g.bonds()[bi].other(u);
            (self.position[other] > self.position[u], self.position[other])
        });
        let mut released = Vec::new();
        for bi in rings {
            let other = self.g.bonds()[bi].other(u);
            if self.position[other] > self.position[u] {
                let d = digits.take();
                open_digit[bi] = d;
                out.push_str(bond_text(self.g, bi));
                out.push_str(&ring_label(d));
            } else {
                let d = open_digit[bi];
                out.push_str(&ring_label(d));
                released.push(d);
            }
        }
        for d in released {
            digits.release(d);
        }
        let kids = &self.children[u];
        for (i, &(v, bi)) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_text(self.g, bi));
            self.emit(v, out, digits, open_digit);
            if !last {
                out.push(')');
            }
        }
    }
}
