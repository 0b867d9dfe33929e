use std::collections::BTreeMap;

use thiserror::Error;

use super::{AtomSpec, Bond, BondOrder, Element, GraphError, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnsupportedToken,
    UnclosedBranch,
    UnmatchedRingBond,
    DuplicateBond,
    ValenceViolation,
    DisconnectedInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at byte {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl ParseError {
    fn at(kind: ParseErrorKind, offset: usize) -> Self {
        ParseError { kind, offset }
    }
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

/// Parses the supported SMILES subset into a validated graph.
///
/// Accepted: organic-subset atoms, bracketed bare element symbols (`[Si]`),
/// lowercase `c n o s`, branches, ring closures `1`-`9` and `%nn`, bond
/// symbols `- = #`. Everything else is rejected with the offending byte
/// offset.
pub fn parse_smiles(text: &str) -> Result<MolGraph, ParseError> {
    use ParseErrorKind::*;

    let bytes = text.as_bytes();
    let mut atoms: Vec<AtomSpec> = Vec::new();
    let mut offsets: Vec<usize> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut branch_stack: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondOrder, usize)> = None;

    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let atom = match c {
            b'B' | b'C' => {
                let two = bytes.get(i + 1).copied();
                if c == b'C' && two == Some(b'l') {
                    i += 2;
                    Some(AtomSpec::new(Element::Cl))
                } else if c == b'B' && two == Some(b'r') {
                    i += 2;
                    Some(AtomSpec::new(Element::Br))
                } else {
                    i += 1;
                    Some(AtomSpec::new(if c == b'B' { Element::B } else { Element::C }))
                }
            }
            b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                i += 1;
                let e = match c {
                    b'N' => Element::N,
                    b'O' => Element::O,
                    b'P' => Element::P,
                    b'S' => Element::S,
                    b'F' => Element::F,
                    _ => Element::I,
                };
                Some(AtomSpec::new(e))
            }
            b'c' | b'n' | b'o' | b's' => {
                i += 1;
                let e = match c {
                    b'c' => Element::C,
                    b'n' => Element::N,
                    b'o' => Element::O,
                    _ => Element::S,
                };
                Some(AtomSpec::aromatic(e))
            }
            b'[' => {
                let close = bytes[i + 1..]
                    .iter()
                    .position(|&b| b == b']')
                    .map(|p| p + i + 1)
                    .ok_or(ParseError::at(UnsupportedToken, i))?;
                let inner = &text[i + 1..close];
                let element: Element = inner
                    .parse()
                    .map_err(|_| ParseError::at(UnsupportedToken, i + 1))?;
                i = close + 1;
                Some(AtomSpec::new(element))
            }
            _ => None,
        };

        if let Some(spec) = atom {
            let idx = atoms.len();
            atoms.push(spec);
            offsets.push(start);
            if let Some(p) = prev {
                let order = match pending.take() {
                    Some((o, _)) => o,
                    None => implicit_order(&atoms[p], &spec),
                };
                bonds.push(Bond {
                    a: p,
                    b: idx,
                    order,
                });
            } else if let Some((_, off)) = pending {
                return Err(ParseError::at(UnsupportedToken, off));
            }
            prev = Some(idx);
            continue;
        }

        match c {
            b'-' | b'=' | b'#' => {
                if pending.is_some() || prev.is_none() {
                    return Err(ParseError::at(UnsupportedToken, i));
                }
                let order = match c {
                    b'-' => BondOrder::Single,
                    b'=' => BondOrder::Double,
                    _ => BondOrder::Triple,
                };
                pending = Some((order, i));
                i += 1;
            }
            b'(' => {
                let Some(p) = prev else {
                    return Err(ParseError::at(UnsupportedToken, i));
                };
                if pending.is_some() || bytes.get(i + 1) == Some(&b')') {
                    return Err(ParseError::at(UnsupportedToken, i));
                }
                branch_stack.push((p, i));
                i += 1;
            }
            b')' => {
                if let Some((_, off)) = pending {
                    return Err(ParseError::at(UnsupportedToken, off));
                }
                let (p, _) = branch_stack
                    .pop()
                    .ok_or(ParseError::at(UnclosedBranch, i))?;
                prev = Some(p);
                i += 1;
            }
            b'0'..=b'9' | b'%' => {
                let Some(p) = prev else {
                    return Err(ParseError::at(UnsupportedToken, i));
                };
                let (label, width) = if c == b'%' {
                    let digits = bytes.get(i + 1..i + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                    let d = digits.ok_or(ParseError::at(UnsupportedToken, i))?;
                    (((d[0] - b'0') as u32) * 10 + (d[1] - b'0') as u32, 3)
                } else if c == b'0' {
                    return Err(ParseError::at(UnsupportedToken, i));
                } else {
                    ((c - b'0') as u32, 1)
                };
                let order = pending.take().map(|(o, _)| o);
                match rings.remove(&label) {
                    None => {
                        rings.insert(
                            label,
                            OpenRing {
                                atom: p,
                                order,
                                offset: i,
                            },
                        );
                    }
                    Some(open) => {
                        if open.atom == p {
                            return Err(ParseError::at(UnmatchedRingBond, i));
                        }
                        let order = match (open.order, order) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(ParseError::at(UnmatchedRingBond, i))
                            }
                            (Some(a), _) | (None, Some(a)) => a,
                            (None, None) => implicit_order(&atoms[open.atom], &atoms[p]),
                        };
                        if bonds
                            .iter()
                            .any(|b| (b.a == open.atom && b.b == p) || (b.a == p && b.b == open.atom))
                        {
                            return Err(ParseError::at(DuplicateBond, i));
                        }
                        bonds.push(Bond {
                            a: open.atom,
                            b: p,
                            order,
                        });
                    }
                }
                i += width;
            }
            b'.' => return Err(ParseError::at(DisconnectedInput, i)),
            _ => return Err(ParseError::at(UnsupportedToken, i)),
        }
    }

    if let Some((_, off)) = pending {
        return Err(ParseError::at(UnsupportedToken, off));
    }
    if let Some(&(_, off)) = branch_stack.last() {
        return Err(ParseError::at(UnclosedBranch, off));
    }
    if let Some(open) = rings.values().next() {
        return Err(ParseError::at(UnmatchedRingBond, open.offset));
    }
    if atoms.is_empty() {
        return Err(ParseError::at(Empty, 0));
    }

    MolGraph::new(&atoms, bonds).map_err(|e| match e {
        GraphError::Valence(a) | GraphError::Aromaticity(a) => {
            ParseError::at(ValenceViolation, offsets[a])
        }
        GraphError::Disconnected(a) => ParseError::at(DisconnectedInput, offsets[a]),
        GraphError::ParallelBond(_, b) => ParseError::at(DuplicateBond, offsets[b]),
        GraphError::Empty => ParseError::at(Empty, 0),
        GraphError::BondOutOfRange(_) | GraphError::SelfLoop(_) => {
            unreachable!("parser only emits in-range, non-loop bonds")
        }
    })
}

fn implicit_order(a: &AtomSpec, b: &AtomSpec) -> BondOrder {
    if a.aromatic && b.aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> (ParseErrorKind, usize) {
        let e = parse_smiles(s).unwrap_err();
        (e.kind, e.offset)
    }

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bond_count(), 2);
        let els: Vec<Element> = g.atoms().iter().map(|a| a.element).collect();
        assert_eq!(els, vec![Element::C, Element::C, Element::O]);
        let hs: Vec<u8> = g.atoms().iter().map(|a| a.implicit_h).collect();
        assert_eq!(hs, vec![3, 2, 1]);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
    }

    #[test]
    fn cyclobutane_ring_closure() {
        let g = parse_smiles("C1CCC1").unwrap();
        assert_eq!(g.bond_count(), 4);
        assert_eq!(g.ring_info().len(), 1);
        assert_eq!(g.ring_info()[0].atoms.len(), 4);
    }

    #[test]
    fn ethyl_acetate_atoms() {
        let g = parse_smiles("CC(=O)OCC").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bond_between(1, 2).unwrap().order, BondOrder::Double);
        let hs: Vec<u8> = g.atoms().iter().map(|a| a.implicit_h).collect();
        assert_eq!(hs, vec![3, 0, 0, 0, 2, 3]);
    }

    #[test]
    fn aromatic_bonds() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(g.atoms().iter().all(|a| a.implicit_h == 1));
        let t = parse_smiles("c1ccsc1").unwrap();
        assert_eq!(t.atom(3).element, Element::S);
        assert_eq!(t.atom(3).implicit_h, 0);
        let tol = parse_smiles("Cc1ccccc1").unwrap();
        assert_eq!(tol.bond_between(0, 1).unwrap().order, BondOrder::Single);
        assert_eq!(tol.atom(1).implicit_h, 0);
    }

    #[test]
    fn bracket_silicon_and_percent_rings() {
        let g = parse_smiles("C[Si](C)(C)O[Si](C)(C)C").unwrap();
        assert_eq!(g.atom(1).element, Element::Si);
        assert_eq!(g.atom(1).implicit_h, 0);
        let r = parse_smiles("C%12CCCC%12").unwrap();
        assert_eq!(r.ring_info().len(), 1);
        let d = parse_smiles("C=1CCCC1").unwrap();
        assert_eq!(d.bond_between(0, 4).unwrap().order, BondOrder::Double);
    }

    #[test]
    fn two_letter_halogens() {
        let g = parse_smiles("ClCBr").unwrap();
        let els: Vec<Element> = g.atoms().iter().map(|a| a.element).collect();
        assert_eq!(els, vec![Element::Cl, Element::C, Element::Br]);
    }

    #[test]
    fn error_offsets() {
        use ParseErrorKind::*;
        assert_eq!(kind(""), (Empty, 0));
        assert_eq!(kind("CC[CH3]"), (UnsupportedToken, 3));
        assert_eq!(kind("C[Si"), (UnsupportedToken, 1));
        assert_eq!(kind("C[C@@H]"), (UnsupportedToken, 2));
        assert_eq!(kind("CC(C"), (UnclosedBranch, 2));
        assert_eq!(kind("CC)C"), (UnclosedBranch, 2));
        assert_eq!(kind("C1CC"), (UnmatchedRingBond, 1));
        assert_eq!(kind("C11"), (UnmatchedRingBond, 2));
        assert_eq!(kind("C=1CC#1"), (UnmatchedRingBond, 6));
        assert_eq!(kind("C1C1"), (DuplicateBond, 3));
        assert_eq!(kind("CC.O"), (DisconnectedInput, 2));
        assert_eq!(kind("C(C)(C)(C)(C)C"), (ValenceViolation, 0));
        assert_eq!(kind("CO=C"), (ValenceViolation, 1));
        assert_eq!(kind("C/C=C/C"), (UnsupportedToken, 1));
        assert_eq!(kind("c"), (ValenceViolation, 0));
        assert_eq!(kind("CC="), (UnsupportedToken, 2));
        assert_eq!(kind("C()C"), (UnsupportedToken, 1));
        assert_eq!(kind("[Xe]"), (UnsupportedToken, 1));
        assert_eq!(kind("b1ccccc1"), (UnsupportedToken, 0));
        assert_eq!(kind("C%1C"), (UnsupportedToken, 1));
    }
}
