//! Brute-force graph isomorphism for small molecules.
//!
//! Backtracking in the VF2 style: atoms of the first graph are matched in
//! breadth-first order and every partial mapping is checked against all
//! already-mapped neighbors. Exponential in the worst case, fine for the
//! molecule sizes handled here.

use super::MolGraph;

/// True when an element-, aromaticity- and bond-order-preserving bijection
/// exists between the two graphs.
pub fn is_isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    find_mapping(a, b).is_some()
}

/// A mapping `m` with atom `i` of `a` corresponding to `m[i]` of `b`.
pub fn find_mapping(a: &MolGraph, b: &MolGraph) -> Option<Vec<usize>> {
    let n = a.atom_count();
    if n != b.atom_count() || a.bond_count() != b.bond_count() {
        return None;
    }
    let signature = |g: &MolGraph, i: usize| {
        let atom = g.atom(i);
        (atom.element, atom.aromatic, atom.implicit_h, g.degree(i))
    };
    let mut sa: Vec<_> = (0..n).map(|i| signature(a, i)).collect();
    let mut sb: Vec<_> = (0..n).map(|i| signature(b, i)).collect();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return None;
    }

    let order = bfs_order(a);
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if extend(a, b, &order, 0, &mut map, &mut used, &signature) {
        Some(map)
    } else {
        None
    }
}

fn bfs_order(g: &MolGraph) -> Vec<usize> {
    let n = g.atom_count();
    let mut seen = vec![false; n];
    let mut order = vec![0];
    seen[0] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &(w, _) in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                order.push(w);
            }
        }
    }
    order
}

fn extend<S, K>(
    a: &MolGraph,
    b: &MolGraph,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
    signature: &S,
) -> bool
where
    S: Fn(&MolGraph, usize) -> K,
    K: PartialEq,
{
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    let want = signature(a, v);
    for w in 0..b.atom_count() {
        if used[w] || signature(b, w) != want {
            continue;
        }
        let consistent = a.neighbors(v).iter().all(|&(nv, k)| {
            let mapped = map[nv];
            mapped == usize::MAX
                || b.bond_between(w, mapped).map(|bb| bb.order) == Some(a.bonds()[k].order)
        });
        if !consistent {
            continue;
        }
        map[v] = w;
        used[w] = true;
        if extend(a, b, order, depth + 1, map, used, signature) {
            return true;
        }
        map[v] = usize::MAX;
        used[w] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn iso(x: &str, y: &str) -> bool {
        is_isomorphic(&parse_smiles(x).unwrap(), &parse_smiles(y).unwrap())
    }

    #[test]
    fn matches_reorderings() {
        assert!(iso("CCO", "OCC"));
        assert!(iso("CC(=O)OCC", "CCOC(C)=O"));
        assert!(iso("C1CCCCC1", "C1CCCCC1"));
    }

    #[test]
    fn distinguishes_isomers() {
        assert!(!iso("CCCC", "CC(C)C"));
        assert!(!iso("CCOC", "CCCO"));
        assert!(!iso("C=CC", "CC=C=C"));
        assert!(!iso("C1CCCCC1", "CC1CCCC1"));
    }

    #[test]
    fn mapping_preserves_bonds() {
        let a = parse_smiles("CC(C)OC(=O)C").unwrap();
        let b = parse_smiles("CC(=O)OC(C)C").unwrap();
        let m = find_mapping(&a, &b).unwrap();
        for bond in a.bonds() {
            assert_eq!(b.bond_between(m[bond.a], m[bond.b]).unwrap().order, bond.order);
        }
    }
}
