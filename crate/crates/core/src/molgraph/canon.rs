use std::fmt::Write;

use super::{BondOrder, Element, MolGraph};

/// Canonical rank of every atom (a permutation of `0..n`).
///
/// Atoms start from a local invariant and are refined by their sorted
/// neighbor ranks until the partition is stable; remaining ties are broken
/// by promoting the lowest-index atom of the first tied class.
pub fn canonical_ranks(g: &MolGraph) -> Vec<usize> {
    let n = g.atom_count();
    let invariants: Vec<(usize, bool, usize, u8, Vec<usize>)> = (0..n)
        .map(|i| {
            let a = g.atom(i);
            let mut orders: Vec<usize> = g.neighbors(i).iter().map(|&(_, k)| g.bonds()[k].order.index()).collect();
            orders.sort_unstable();
            (a.element.index(), a.aromatic, g.degree(i), a.implicit_h, orders)
        })
        .collect();
    let mut ranks = dense_ranks(&invariants);
    refine(g, &mut ranks);
    loop {
        let classes = distinct(&ranks);
        if classes == n {
            return ranks;
        }
        // lowest tied rank, lowest index within it
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n).find(|&r| counts[r] > 1).unwrap();
        let pick = (0..n).find(|&i| ranks[i] == tied).unwrap();
        let keys: Vec<(usize, bool)> = (0..n).map(|i| (ranks[i], i != pick)).collect();
        ranks = dense_ranks(&keys);
        refine(g, &mut ranks);
    }
}

fn refine(g: &MolGraph, ranks: &mut Vec<usize>) {
    let n = g.atom_count();
    let mut classes = distinct(ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, usize)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(usize, usize)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(j, k)| (ranks[j], g.bonds()[k].order.index()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = distinct(&next);
        *ranks = next;
        if next_classes == classes {
            return;
        }
        classes = next_classes;
    }
}

/// Maps keys to ranks, where a rank is the number of strictly smaller keys.
fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && keys[order[pos - 1]] == keys[i] {
            ranks[order[pos - 1]]
        } else {
            pos
        };
    }
    ranks
}

fn distinct(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().filter(|&&r| !std::mem::replace(&mut seen[r], true)).count()
}

/// Deterministic SMILES for `g`, independent of input atom order.
pub fn write_smiles(g: &MolGraph) -> String {
    let ranks = canonical_ranks(g);
    let n = g.atom_count();
    let root = (0..n).min_by_key(|&i| ranks[i]).unwrap();

    let mut plan = Plan {
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        closures: vec![Vec::new(); n],
    };
    plan.walk(g, &ranks, root, None);
    for list in &mut plan.closures {
        list.sort_by_key(|&(other, _)| ranks[other]);
    }

    let mut out = String::new();
    let mut digits: Vec<Option<(usize, usize)>> = Vec::new();
    emit(g, &plan, root, &mut out, &mut digits);
    out
}

struct Plan {
    visited: Vec<bool>,
    children: Vec<Vec<usize>>,
    // (partner, opens_here)
    closures: Vec<Vec<(usize, bool)>>,
}

impl Plan {
    fn walk(&mut self, g: &MolGraph, ranks: &[usize], v: usize, parent: Option<usize>) {
        self.visited[v] = true;
        let mut nbrs: Vec<usize> = g.neighbors(v).iter().map(|&(w, _)| w).filter(|&w| Some(w) != parent).collect();
        nbrs.sort_by_key(|&w| ranks[w]);
        for w in nbrs {
            if self.visited[w] {
                // back edge to an ancestor: closes at v, opened at w earlier
                if !self.closures[v].iter().any(|&(p, _)| p == w) {
                    self.closures[v].push((w, false));
                    self.closures[w].push((v, true));
                }
            } else {
                self.children[v].push(w);
                self.walk(g, ranks, w, Some(v));
            }
        }
    }
}

fn emit(g: &MolGraph, plan: &Plan, v: usize, out: &mut String, digits: &mut Vec<Option<(usize, usize)>>) {
    let atom = g.atom(v);
    match (atom.element, atom.aromatic) {
        (Element::Si, _) => out.push_str("[Si]"),
        (e, true) => out.push_str(&e.symbol().to_ascii_lowercase()),
        (e, false) => out.push_str(e.symbol()),
    }
    for &(other, opens) in &plan.closures[v] {
        let slot = if opens {
            let free = digits.iter().position(Option::is_none).unwrap_or_else(|| {
                digits.push(None);
                digits.len() - 1
            });
            digits[free] = Some((v, other));
            out.push_str(bond_symbol(g, v, other));
            free
        } else {
            let slot = digits
                .iter()
                .position(|d| *d == Some((other, v)))
                .expect("ring closure opened before it closes");
            digits[slot] = None;
            slot
        };
        let label = slot + 1;
        if label < 10 {
            write!(out, "{label}").unwrap();
        } else {
            write!(out, "%{label:02}").unwrap();
        }
    }
    let children = &plan.children[v];
    for (k, &c) in children.iter().enumerate() {
        let last = k + 1 == children.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_symbol(g, v, c));
        emit(g, plan, c, out, digits);
        if !last {
            out.push(')');
        }
    }
}

fn bond_symbol(g: &MolGraph, a: usize, b: usize) -> &'static str {
    let order = g.bond_between(a, b).unwrap().order;
    match order {
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => "",
        BondOrder::Single if g.atom(a).aromatic && g.atom(b).aromatic => "-",
        BondOrder::Single => "",
    }
}
