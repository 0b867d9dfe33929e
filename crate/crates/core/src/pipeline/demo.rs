//! A seeded synthetic world: reactant library, ground-truth properties,
//! a ten-property teacher and its distilled surrogate.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::filters::postfilter;
use crate::gate::{train_gate, GateError, LossWeights, ModelConfig, MultiTaskDataset, Split, TrainConfig};
use crate::molgraph::random::{random_molecule, Handle, SkeletonSpec};
use crate::molgraph::{descriptors, BondOrder, Element, MolGraph};
use crate::nncore::{rng_for, AdamConfig, Tensor};
use crate::properties::{Property, PropertyVector};
use crate::reactor::{classify_reactant, react, Reactant, ReactantSets, Reaction, Role};
use crate::surrogate::{
    build_lookup, fidelity_report, pair_inputs, sample_pairs, train_surrogate, EmbeddingTable, GateTeacher,
    SurrogateConfig, SurrogateError, SurrogateModel, SurrogateReport, TaskFidelity, Teacher,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub alcohols: usize,
    pub chlorides: usize,
    pub acids: usize,
    pub purchasables: usize,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            alcohols: 200,
            chlorides: 75,
            acids: 75,
            purchasables: 50,
        }
    }
}

/// Reactants with exactly one role each, plus purchasable molecules.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoLibrary {
    pub sets: ReactantSets,
    pub purchasables: Vec<Reactant>,
}

impl DemoLibrary {
    /// Partner column `j` runs over chlorides, then acids.
    pub fn partner_count(&self) -> usize {
        self.sets.chlorides.len() + self.sets.acids.len()
    }

    pub fn partner(&self, j: usize) -> (Reaction, &Reactant) {
        let n = self.sets.chlorides.len();
        if j < n {
            (Reaction::Ether, &self.sets.chlorides[j])
        } else {
            (Reaction::Ester, &self.sets.acids[j - n])
        }
    }

    pub fn product(&self, i: usize, j: usize) -> MolGraph {
        let (reaction, partner) = self.partner(j);
        react(reaction, &self.sets.alcohols[i].graph, &partner.graph)
            .expect("library reactants carry their handle")
            .product
    }

    pub fn pair_ids(&self, i: usize, j: usize) -> (&str, &str) {
        (&self.sets.alcohols[i].id, &self.partner(j).1.id)
    }

    /// Every reactant once, alcohols first. A molecule listed under two
    /// roles keeps its first position.
    pub fn reactant_pool(&self) -> Vec<(String, &MolGraph)> {
        let mut seen = HashSet::new();
        self.sets
            .alcohols
            .iter()
            .chain(&self.sets.chlorides)
            .chain(&self.sets.acids)
            .filter(|r| seen.insert(r.id.as_str()))
            .map(|r| (r.id.clone(), &r.graph))
            .collect()
    }
}

fn draw_unique(
    rng: &mut impl rand::Rng,
    spec: &SkeletonSpec,
    handle: Handle,
    want: Option<Role>,
    count: usize,
    prefix: &str,
    seen: &mut HashSet<String>,
) -> Vec<Reactant> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let g = random_molecule(rng, spec, handle);
        let roles = classify_reactant(&g);
        let ok = match want {
            Some(r) => roles == BTreeSet::from([r]),
            None => roles.is_empty() && postfilter(&g).passed,
        };
        if !ok {
            continue;
        }
        let r = Reactant::new(format!("{prefix}{:04}", out.len() + 1), g);
        if seen.insert(r.smiles.clone()) {
            out.push(r);
        }
    }
    out
}

pub fn demo_library(cfg: &LibraryConfig, seed: u64) -> DemoLibrary {
    let mut seen = HashSet::new();
    let spec = SkeletonSpec {
        min_atoms: 3,
        max_atoms: 10,
        ..SkeletonSpec::default()
    };
    let mut rng = rng_for(seed, "demo.alcohols");
    let alcohols = draw_unique(&mut rng, &spec, Handle::Alcohol, Some(Role::Alcohol), cfg.alcohols, "A", &mut seen);
    let mut rng = rng_for(seed, "demo.chlorides");
    let chlorides = draw_unique(&mut rng, &spec, Handle::Chloride, Some(Role::Chloride), cfg.chlorides, "C", &mut seen);
    let mut rng = rng_for(seed, "demo.acids");
    let acids = draw_unique(&mut rng, &spec, Handle::Acid, Some(Role::Acid), cfg.acids, "K", &mut seen);
    let big = SkeletonSpec {
        min_atoms: 10,
        max_atoms: 22,
        ..SkeletonSpec::default()
    };
    let mut rng = rng_for(seed, "demo.purchasables");
    let purchasables = draw_unique(&mut rng, &big, Handle::None, None, cfg.purchasables, "P", &mut seen);
    DemoLibrary {
        sets: ReactantSets {
            alcohols,
            chlorides,
            acids,
        },
        purchasables,
    }
}

/// Ground-truth property model of the synthetic world. Size, polarity,
/// branching, rings and unsaturation drive every property, so the ten
/// targets are correlated the way real fluid properties are.
pub fn true_properties(g: &MolGraph) -> PropertyVector {
    let d = descriptors(g);
    let n = d.heavy_atom_count as f64;
    let f = |e| d.fraction(e);
    let polarity = 2.0 * f(Element::O) + 2.5 * f(Element::N) + 1.5 * f(Element::Cl) - 0.5 * f(Element::Si);
    let ring = {
        let mut mark = vec![false; g.atom_count()];
        for r in g.ring_info() {
            for &a in &r.atoms {
                mark[a] = true;
            }
        }
        mark.iter().filter(|&&m| m).count() as f64 / n
    };
    let unsat =
        g.bonds().iter().filter(|b| b.order != BondOrder::Single).count() as f64 / g.bond_count().max(1) as f64;
    let branch = d.branching_degree;

    let bp = 40.0 + 14.0 * n * (1.0 - 0.3 * branch) + 150.0 * polarity + 30.0 * ring;
    let mp = -140.0 + 6.0 * n + 80.0 * ring - 60.0 * branch + 60.0 * polarity;
    let fp = 0.75 * bp - 40.0;
    let ct = 1.3 * bp + 120.0;
    let dt = 120.0 + 10.0 * n - 40.0 * unsat + 20.0 * f(Element::Si);
    let cp = 2.2 - 0.5 * f(Element::O) - 0.3 * f(Element::Si) + 0.2 * branch;
    let vp = 10f64.powf(2.5 - 0.012 * bp);
    let mu = 0.0005 * (0.12 * n + 3.0 * polarity + ring).exp();
    let rho = 700.0 + 500.0 * f(Element::O) + 400.0 * f(Element::N) + 300.0 * f(Element::Si) + 80.0 * ring;
    let eps = 1.8 + 12.0 * polarity + 2.0 * unsat;
    PropertyVector::from_array([bp, mp, fp, ct, dt, cp, vp, mu, rho, eps])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    /// Labeled products besides reactants and purchasables.
    pub product_labels: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: usize,
    pub latent: usize,
    pub val_fraction: f64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            product_labels: 900,
            epochs: 30,
            batch_size: 64,
            lr: 1e-3,
            hidden: 32,
            latent: 16,
            val_fraction: 0.1,
        }
    }
}

/// Reactants, purchasables and a seeded sample of products, labeled with
/// [`true_properties`].
pub fn teacher_dataset(lib: &DemoLibrary, product_labels: usize, seed: u64) -> MultiTaskDataset {
    let names = Property::ALL.iter().map(|p| p.name().to_string()).collect();
    let mut ds = MultiTaskDataset::new(names);
    let mut add = |g: &MolGraph| ds.push(g, true_properties(g).to_array().map(Some).to_vec());
    for (_, g) in lib.reactant_pool() {
        add(g);
    }
    for r in &lib.purchasables {
        add(&r.graph);
    }
    for (i, j) in sample_pairs(lib.sets.alcohols.len(), lib.partner_count(), product_labels, seed ^ 0x7e4c) {
        add(&lib.product(i, j));
    }
    ds
}

pub fn teacher_train_config(cfg: &TeacherConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        optimizer: AdamConfig::adamw(cfg.lr, 0.01),
        perturbations: 10,
        sigma: 0.05,
        weights: LossWeights::UNIT,
        seed,
        model: ModelConfig {
            encoder: EncoderConfig {
                hidden: cfg.hidden,
                latent: cfg.latent,
                ..Default::default()
            },
            head_hidden: 32,
            slope: 0.01,
        },
    }
}

/// Trains the ten-property GATE teacher on the synthetic world.
pub fn train_teacher(lib: &DemoLibrary, cfg: &TeacherConfig, seed: u64) -> Result<GateTeacher, SurrogateError> {
    let ds = teacher_dataset(lib, cfg.product_labels, seed);
    let split = Split::random(ds.len(), cfg.val_fraction, seed);
    let outcome = train_gate(&ds, &split, &teacher_train_config(cfg, seed), None).map_err(|e| match e {
        GateError::DivergenceDetected { epoch } => SurrogateError::DivergenceDetected { epoch },
        other => SurrogateError::TeacherUnavailable(other.to_string()),
    })?;
    GateTeacher::new(outcome.model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Share of all alcohol × partner pairs labeled by the teacher.
    pub sample_fraction: f64,
    pub val_fraction: f64,
    /// Further unseen pairs for the fidelity report.
    pub holdout: usize,
    pub surrogate: SurrogateConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            sample_fraction: 0.005,
            val_fraction: 0.1,
            holdout: 2000,
            surrogate: SurrogateConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Distilled {
    pub model: SurrogateModel,
    pub report: SurrogateReport,
    /// Surrogate against teacher on the holdout pairs.
    pub fidelity: Vec<TaskFidelity>,
    pub train_pairs: usize,
}

/// Reactant embeddings for every library member.
pub fn library_lookup(lib: &DemoLibrary, teacher: &dyn Teacher) -> Result<EmbeddingTable, SurrogateError> {
    build_lookup(&lib.reactant_pool(), teacher)
}

/// Labels a pair sample with the teacher and fits the surrogate to it.
pub fn distill(
    lib: &DemoLibrary,
    teacher: &dyn Teacher,
    table: &EmbeddingTable,
    cfg: &DistillConfig,
    seed: u64,
) -> Result<Distilled, SurrogateError> {
    table.check_provenance(teacher.provenance())?;
    let n = lib.sets.alcohols.len();
    let m = lib.partner_count();
    let count = ((n * m) as f64 * cfg.sample_fraction).round() as usize;
    let cells = sample_pairs(n, m, count + cfg.holdout, seed);
    let (train_cells, holdout_cells) = cells.split_at(count.min(cells.len()));

    let label = |cells: &[(usize, usize)]| -> Result<(Tensor, Vec<PropertyVector>), SurrogateError> {
        let ids: Vec<(&str, &str)> = cells.iter().map(|&(i, j)| lib.pair_ids(i, j)).collect();
        let graphs: Vec<MolGraph> = cells.iter().map(|&(i, j)| lib.product(i, j)).collect();
        let refs: Vec<&MolGraph> = graphs.iter().collect();
        let y = if refs.is_empty() { Vec::new() } else { teacher.predict(&refs)? };
        Ok((pair_inputs(&ids, table)?, y))
    };

    let (x, y) = label(train_cells)?;
    let split = Split::random(x.rows(), cfg.val_fraction, seed);
    let surrogate_cfg = SurrogateConfig { seed, ..cfg.surrogate };
    let (model, report) = train_surrogate(&x, &y, &split, teacher.provenance(), &surrogate_cfg)?;
    let (hx, hy) = label(holdout_cells)?;
    let fidelity = if hy.is_empty() {
        Vec::new()
    } else {
        fidelity_report(&model.predict_inputs(&hx)?, &hy)
    };
    Ok(Distilled {
        model,
        report,
        fidelity,
        train_pairs: train_cells.len(),
    })
}
