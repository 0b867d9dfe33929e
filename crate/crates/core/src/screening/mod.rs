//! Threshold criteria, figures of merit and the two-stage
//! surrogate→teacher screen.

mod criteria;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::biaslab::{indicator_cov, BiasError, EventSpec, Tail, Variable};
use crate::filters::postfilter;
use crate::molgraph::{write_smiles, MolGraph};
use crate::properties::{Property, PropertyVector};
use crate::reactor::{ProductStream, Reactant, ReactantSets, Reaction, Shard};
use crate::surrogate::{build_lookup, predict_pairs, EmbeddingTable, SurrogateError, SurrogateModel, Teacher};

pub use criteria::{
    assign_partition, check_relaxation, evaluate, fom1, fom2, fom3, partition_of, CriteriaSet, CriterionPartition,
    DielectricBin, Direction, Evaluation, FlashBin, FomInputs, Relaxation, ThresholdSpec, DIELECTRIC_EDGES,
    FLASH_EDGES,
};

#[derive(Debug, thiserror::Error)]
pub enum ScreeningError {
    #[error("threshold for {0} is not finite")]
    NonFiniteThreshold(Property),
    #[error("more than one threshold for {0}")]
    DuplicateThreshold(Property),
    #[error("invalid criteria: {0}")]
    Config(String),
    #[error("relaxed threshold for {0} is not implied by the final criteria")]
    RelaxationInversion(Property),
    #[error("figure-of-merit input {0} must be positive")]
    NonPositiveInput(&'static str),
    #[error("bias report needs at least two thresholds")]
    TooFewThresholds,
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Bias(#[from] BiasError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Purchasable,
    Ether,
    Ester,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Purchasable => "purchasable",
            Source::Ether => "ether",
            Source::Ester => "ester",
        }
    }
}

impl From<Reaction> for Source {
    fn from(r: Reaction) -> Self {
        match r {
            Reaction::Ether => Source::Ether,
            Reaction::Ester => Source::Ester,
        }
    }
}

/// A molecule passing the final criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// `alcohol+partner` for products, the library id for purchasables.
    pub id: String,
    pub smiles: String,
    pub source: Source,
    pub criterion: Option<u8>,
    pub properties: PropertyVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRate {
    pub property: Property,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCovariance {
    pub a: Property,
    pub b: Property,
    pub p_joint: f64,
    pub product: f64,
    pub cov: f64,
}

/// Independence estimate versus the empirical joint pass rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub samples: usize,
    pub marginals: Vec<ThresholdRate>,
    pub product: f64,
    pub joint: f64,
    /// `product − joint`.
    pub gap: f64,
    pub pairs: Vec<PairCovariance>,
}

pub fn bias_report(pvs: &[PropertyVector], set: &CriteriaSet) -> Result<BiasReport, ScreeningError> {
    if set.thresholds().len() < 2 {
        return Err(ScreeningError::TooFewThresholds);
    }
    if pvs.is_empty() {
        return Err(BiasError::EmptySample.into());
    }
    let n = pvs.len() as f64;
    let evals: Vec<Evaluation> = pvs.iter().map(|pv| evaluate(pv, set)).collect();
    let marginals: Vec<ThresholdRate> = set
        .thresholds()
        .iter()
        .enumerate()
        .map(|(k, t)| ThresholdRate {
            property: t.property,
            pass_rate: evals.iter().filter(|e| e.passes[k]).count() as f64 / n,
        })
        .collect();
    let product = marginals.iter().map(|m| m.pass_rate).product::<f64>();
    let joint = evals.iter().filter(|e| e.pass).count() as f64 / n;
    let on = |v: Variable| EventSpec::new(v, Tail::Greater, 0.5).expect("finite");
    let mut pairs = Vec::new();
    let th = set.thresholds();
    for a in 0..th.len() {
        for b in a + 1..th.len() {
            let samples: Vec<(f64, f64)> = evals
                .iter()
                .map(|e| (f64::from(u8::from(e.passes[a])), f64::from(u8::from(e.passes[b]))))
                .collect();
            let est = indicator_cov(&samples, &on(Variable::X), &on(Variable::Y))?;
            pairs.push(PairCovariance {
                a: th[a].property,
                b: th[b].property,
                p_joint: est.p_joint,
                product: est.product,
                cov: est.cov_indicators,
            });
        }
    }
    Ok(BiasReport {
        samples: pvs.len(),
        marginals,
        product,
        joint,
        gap: product - joint,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub threads: usize,
    /// Products per surrogate or teacher batch.
    pub batch: usize,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig { threads: 1, batch: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    /// Products enumerated from the reactant sets.
    pub library_size: u64,
    /// Products passing the structural postfilter.
    pub prefilter_pass: u64,
    /// Products passing the relaxed criteria on surrogate predictions.
    pub surrogate_pass: u64,
    /// Products passing the final criteria on teacher predictions.
    pub teacher_pass: u64,
    pub purchasables: u64,
    pub purchasable_pass: u64,
    /// Candidates per criterion 1-6.
    pub criterion_counts: [u64; 6],
    /// Teacher evaluations (embeddings and predictions) during the run.
    pub teacher_calls: u64,
    pub surrogate_calls: u64,
    /// Relaxed and final criteria coincide.
    pub zero_margin: bool,
    /// Over everything the teacher scored, against the final criteria.
    pub bias: Option<BiasReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOutcome {
    pub report: ScreeningReport,
    pub candidates: Vec<Candidate>,
}

struct Product {
    id: String,
    source: Source,
    graph: MolGraph,
}

#[derive(Default)]
struct ShardResult {
    library: u64,
    structure_pass: u64,
    surrogate_calls: u64,
    survivors: Vec<Product>,
}

fn pair_id(sets: &ReactantSets, reaction: Reaction, i: usize, j: usize) -> (&str, &str) {
    (&sets.alcohols[i].id, &sets.partners(reaction)[j].id)
}

/// Distinct reactants by id: alcohols, then chlorides, then acids.
fn reactant_pool(sets: &ReactantSets) -> Vec<(String, &MolGraph)> {
    let mut seen = HashSet::new();
    sets.alcohols
        .iter()
        .chain(&sets.chlorides)
        .chain(&sets.acids)
        .filter(|r| seen.insert(r.id.as_str()))
        .map(|r| (r.id.clone(), &r.graph))
        .collect()
}

fn surrogate_shard(
    sets: &ReactantSets,
    shard: Shard,
    model: &SurrogateModel,
    table: &EmbeddingTable,
    relaxed: &CriteriaSet,
    batch: usize,
) -> Result<ShardResult, ScreeningError> {
    let mut out = ShardResult::default();
    let mut pending: Vec<Product> = Vec::with_capacity(batch);
    let mut pairs: Vec<(Reaction, usize, usize)> = Vec::with_capacity(batch);
    let flush = |pending: &mut Vec<Product>, pairs: &mut Vec<(Reaction, usize, usize)>, out: &mut ShardResult| {
        let ids: Vec<(&str, &str)> = pairs.iter().map(|&(r, i, j)| pair_id(sets, r, i, j)).collect();
        let preds = predict_pairs(&ids, model, table)?;
        out.surrogate_calls += preds.len() as u64;
        for (p, pv) in pending.drain(..).zip(preds) {
            if evaluate(&pv, relaxed).pass {
                out.survivors.push(p);
            }
        }
        pairs.clear();
        Ok::<(), ScreeningError>(())
    };
    for rec in ProductStream::new(sets, shard) {
        out.library += 1;
        if !postfilter(&rec.product).passed {
            continue;
        }
        out.structure_pass += 1;
        let (i, j) = rec.parents;
        let (a, b) = pair_id(sets, rec.reaction, i, j);
        pending.push(Product {
            id: format!("{a}+{b}"),
            source: rec.reaction.into(),
            graph: rec.product,
        });
        pairs.push((rec.reaction, i, j));
        if pending.len() >= batch {
            flush(&mut pending, &mut pairs, &mut out)?;
        }
    }
    if !pending.is_empty() {
        flush(&mut pending, &mut pairs, &mut out)?;
    }
    Ok(out)
}

fn teacher_stage(
    items: &[Product],
    teacher: &dyn Teacher,
    final_set: &CriteriaSet,
    batch: usize,
    scored: &mut Vec<PropertyVector>,
) -> Result<Vec<Candidate>, ScreeningError> {
    let mut out = Vec::new();
    for chunk in items.chunks(batch.max(1)) {
        let graphs: Vec<&MolGraph> = chunk.iter().map(|p| &p.graph).collect();
        let preds = teacher.predict(&graphs)?;
        for (p, pv) in chunk.iter().zip(preds) {
            scored.push(pv);
            if evaluate(&pv, final_set).pass {
                out.push(Candidate {
                    id: p.id.clone(),
                    smiles: write_smiles(&p.graph),
                    source: p.source,
                    criterion: assign_partition(&pv),
                    properties: pv,
                });
            }
        }
    }
    Ok(out)
}

fn purchasable_items(purchasables: &[Reactant]) -> Vec<Product> {
    purchasables
        .iter()
        .map(|r| Product {
            id: r.id.clone(),
            source: Source::Purchasable,
            graph: r.graph.clone(),
        })
        .collect()
}

fn finish(
    mut report: ScreeningReport,
    mut product_hits: Vec<Candidate>,
    purchasable_hits: Vec<Candidate>,
    scored: &[PropertyVector],
    final_set: &CriteriaSet,
) -> Result<ScreenOutcome, ScreeningError> {
    report.teacher_pass = product_hits.len() as u64;
    report.purchasable_pass = purchasable_hits.len() as u64;
    product_hits.extend(purchasable_hits);
    for c in &product_hits {
        if let Some(k) = c.criterion {
            report.criterion_counts[usize::from(k - 1)] += 1;
        }
    }
    report.bias = if scored.is_empty() || final_set.thresholds().len() < 2 {
        None
    } else {
        Some(bias_report(scored, final_set)?)
    };
    Ok(ScreenOutcome {
        report,
        candidates: product_hits,
    })
}

/// Reactants are embedded once each by the teacher; every product passing
/// the postfilter is scored by the surrogate against `relaxed`; survivors
/// and purchasables are scored by the teacher against `final_set`.
#[allow(clippy::too_many_arguments)]
pub fn two_stage_screen(
    sets: &ReactantSets,
    purchasables: &[Reactant],
    surrogate: &SurrogateModel,
    teacher: &dyn Teacher,
    relaxed: &CriteriaSet,
    final_set: &CriteriaSet,
    config: &ScreenConfig,
) -> Result<ScreenOutcome, ScreeningError> {
    check_relaxation(relaxed, final_set)?;
    let start_calls = teacher.calls();
    let table = build_lookup(&reactant_pool(sets), teacher)?;
    table.check_provenance(&surrogate.provenance)?;

    let threads = config.threads.max(1);
    let batch = config.batch.max(1);
    let shards: Vec<Result<ShardResult, ScreeningError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|index| {
                let table = &table;
                scope.spawn(move || {
                    surrogate_shard(sets, Shard { index, count: threads }, surrogate, table, relaxed, batch)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("screening thread panicked")).collect()
    });

    let mut report = ScreeningReport {
        library_size: 0,
        prefilter_pass: 0,
        surrogate_pass: 0,
        teacher_pass: 0,
        purchasables: purchasables.len() as u64,
        purchasable_pass: 0,
        criterion_counts: [0; 6],
        teacher_calls: 0,
        surrogate_calls: 0,
        zero_margin: relaxed == final_set,
        bias: None,
    };
    let mut survivors = Vec::new();
    for s in shards {
        let s = s?;
        report.library_size += s.library;
        report.prefilter_pass += s.structure_pass;
        report.surrogate_calls += s.surrogate_calls;
        survivors.extend(s.survivors);
    }
    report.surrogate_pass = survivors.len() as u64;

    let mut scored = Vec::new();
    let hits = teacher_stage(&survivors, teacher, final_set, batch, &mut scored)?;
    let bought = teacher_stage(&purchasable_items(purchasables), teacher, final_set, batch, &mut scored)?;
    report.teacher_calls = teacher.calls() - start_calls;
    finish(report, hits, bought, &scored, final_set)
}

/// Teacher over every structure-passing product and purchasable; the
/// reference the two-stage screen is measured against.
pub fn teacher_screen(
    sets: &ReactantSets,
    purchasables: &[Reactant],
    teacher: &dyn Teacher,
    final_set: &CriteriaSet,
    config: &ScreenConfig,
) -> Result<ScreenOutcome, ScreeningError> {
    let start_calls = teacher.calls();
    let mut report = ScreeningReport {
        library_size: 0,
        prefilter_pass: 0,
        surrogate_pass: 0,
        teacher_pass: 0,
        purchasables: purchasables.len() as u64,
        purchasable_pass: 0,
        criterion_counts: [0; 6],
        teacher_calls: 0,
        surrogate_calls: 0,
        zero_margin: true,
        bias: None,
    };
    let mut scored = Vec::new();
    let mut hits = Vec::new();
    let mut pending = Vec::new();
    let batch = config.batch.max(1);
    for rec in ProductStream::new(sets, Shard::WHOLE) {
        report.library_size += 1;
        if !postfilter(&rec.product).passed {
            continue;
        }
        report.prefilter_pass += 1;
        let (a, b) = pair_id(sets, rec.reaction, rec.parents.0, rec.parents.1);
        pending.push(Product {
            id: format!("{a}+{b}"),
            source: rec.reaction.into(),
            graph: rec.product,
        });
        if pending.len() >= batch {
            hits.extend(teacher_stage(&pending, teacher, final_set, batch, &mut scored)?);
            pending.clear();
        }
    }
    hits.extend(teacher_stage(&pending, teacher, final_set, batch, &mut scored)?);
    report.surrogate_pass = report.prefilter_pass;
    let bought = teacher_stage(&purchasable_items(purchasables), teacher, final_set, batch, &mut scored)?;
    report.teacher_calls = teacher.calls() - start_calls;
    finish(report, hits, bought, &scored, final_set)
}

/// Reference candidates absent from `found`, by id.
pub fn missed_candidates(found: &[Candidate], reference: &[Candidate]) -> usize {
    let have: BTreeSet<&str> = found.iter().map(|c| c.id.as_str()).collect();
    reference.iter().filter(|c| !have.contains(c.id.as_str())).count()
}

pub fn write_candidates_csv<W: Write>(out: W, candidates: &[Candidate]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["smiles".to_string(), "source".into(), "criterion_index".into()];
    header.extend(Property::ALL.iter().map(|p| p.name().to_string()));
    w.write_record(&header)?;
    for c in candidates {
        let mut row = vec![
            c.smiles.clone(),
            c.source.name().to_string(),
            c.criterion.map_or_else(String::new, |k| k.to_string()),
        ];
        row.extend(c.properties.to_array().iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
