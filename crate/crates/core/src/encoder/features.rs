use crate::molgraph::{Element, MolGraph};
use crate::nncore::Tensor;

/// Element one-hot (11), heavy-atom degree one-hot 0..=4 (5), aromatic flag.
pub const ATOM_FEATURES: usize = 17;
/// Bond order one-hot.
pub const EDGE_FEATURES: usize = 4;

const DEGREE_OFFSET: usize = Element::ALL.len();
const AROMATIC_OFFSET: usize = DEGREE_OFFSET + 5;

/// Per-molecule features. Directed edge `2k` runs `a→b` of bond `k`,
/// `2k+1` runs `b→a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedGraph {
    pub atom_features: Vec<[f64; ATOM_FEATURES]>,
    pub edge_features: Vec<[f64; EDGE_FEATURES]>,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
}

impl FeaturizedGraph {
    pub fn atom_count(&self) -> usize {
        self.atom_features.len()
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }
}

pub fn featurize(g: &MolGraph) -> FeaturizedGraph {
    let atom_features = (0..g.atom_count())
        .map(|i| {
            let atom = g.atom(i);
            let mut f = [0.0; ATOM_FEATURES];
            f[atom.element.index()] = 1.0;
            f[DEGREE_OFFSET + g.degree(i).min(4)] = 1.0;
            if atom.aromatic {
                f[AROMATIC_OFFSET] = 1.0;
            }
            f
        })
        .collect();
    let mut edge_features = Vec::with_capacity(2 * g.bond_count());
    let mut src = Vec::with_capacity(2 * g.bond_count());
    let mut dst = Vec::with_capacity(2 * g.bond_count());
    for bond in g.bonds() {
        let mut f = [0.0; EDGE_FEATURES];
        f[bond.order.index()] = 1.0;
        for (s, d) in [(bond.a, bond.b), (bond.b, bond.a)] {
            edge_features.push(f);
            src.push(s);
            dst.push(d);
        }
    }
    FeaturizedGraph {
        atom_features,
        edge_features,
        src,
        dst,
    }
}

/// Several molecules merged into one disjoint graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    /// atoms × ATOM_FEATURES
    pub atom_x: Tensor,
    /// edges × (ATOM_FEATURES + EDGE_FEATURES): source atom ⊕ bond
    pub edge_in: Tensor,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub rev: Vec<usize>,
    pub atom_mol: Vec<usize>,
    mols: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&FeaturizedGraph]) -> Self {
        let n_atoms: usize = graphs.iter().map(|g| g.atom_count()).sum();
        let n_edges: usize = graphs.iter().map(|g| g.edge_count()).sum();
        let mut atom_x = Vec::with_capacity(n_atoms * ATOM_FEATURES);
        let mut edge_in = Vec::with_capacity(n_edges * (ATOM_FEATURES + EDGE_FEATURES));
        let mut src = Vec::with_capacity(n_edges);
        let mut dst = Vec::with_capacity(n_edges);
        let mut rev = Vec::with_capacity(n_edges);
        let mut atom_mol = Vec::with_capacity(n_atoms);
        let (mut atom_off, mut edge_off) = (0, 0);
        for (m, g) in graphs.iter().enumerate() {
            for f in &g.atom_features {
                atom_x.extend_from_slice(f);
                atom_mol.push(m);
            }
            for e in 0..g.edge_count() {
                edge_in.extend_from_slice(&g.atom_features[g.src[e]]);
                edge_in.extend_from_slice(&g.edge_features[e]);
                src.push(atom_off + g.src[e]);
                dst.push(atom_off + g.dst[e]);
                rev.push(edge_off + (e ^ 1));
            }
            atom_off += g.atom_count();
            edge_off += g.edge_count();
        }
        GraphBatch {
            atom_x: Tensor::from_vec(n_atoms, ATOM_FEATURES, atom_x).expect("atom feature layout"),
            edge_in: Tensor::from_vec(n_edges, ATOM_FEATURES + EDGE_FEATURES, edge_in).expect("edge feature layout"),
            src,
            dst,
            rev,
            atom_mol,
            mols: graphs.len(),
        }
    }

    pub fn atom_count(&self) -> usize {
        self.atom_mol.len()
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }

    pub fn mol_count(&self) -> usize {
        self.mols
    }
}
