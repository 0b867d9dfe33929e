//! Staged runner: filter, react, teacher, lookup, surrogate, screen and an
//! optional all-teacher oracle. Every stage writes a JSON manifest whose
//! `previous` field holds the hash of the manifest before it.

pub mod bench;
pub mod demo;
pub mod io;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::filters::{postfilter, prefilter};
use crate::gate::GateModel;
use crate::reactor::{count_products, ProductStream, Reactant, ReactantSets, Shard};
use crate::screening::{
    missed_candidates, teacher_screen, two_stage_screen, write_candidates_csv, CriteriaSet, Relaxation,
    ScreenConfig, ScreenOutcome,
};
use crate::surrogate::{write_fidelity_csv, EmbeddingTable, GateTeacher, SurrogateModel, Teacher};
use demo::{demo_library, distill, library_lookup, train_teacher, DemoLibrary, DistillConfig, LibraryConfig, TeacherConfig};

pub const STAGES: [&str; 7] = ["filter", "react", "teacher", "lookup", "surrogate", "screen", "oracle"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub filter: bool,
    pub react: bool,
    pub teacher: bool,
    pub lookup: bool,
    pub surrogate: bool,
    pub screen: bool,
    pub oracle: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            filter: true,
            react: true,
            teacher: true,
            lookup: true,
            surrogate: true,
            screen: true,
            oracle: false,
        }
    }
}

impl Stages {
    pub fn only(stage: &str) -> Option<Self> {
        let mut s = Stages {
            filter: false,
            react: false,
            teacher: false,
            lookup: false,
            surrogate: false,
            screen: false,
            oracle: false,
        };
        *s.flag_mut(stage)? = true;
        Some(s)
    }

    pub fn enabled(&self, stage: &str) -> bool {
        let mut copy = *self;
        copy.flag_mut(stage).map(|f| *f).unwrap_or(false)
    }

    fn flag_mut(&mut self, stage: &str) -> Option<&mut bool> {
        Some(match stage {
            "filter" => &mut self.filter,
            "react" => &mut self.react,
            "teacher" => &mut self.teacher,
            "lookup" => &mut self.lookup,
            "surrogate" => &mut self.surrogate,
            "screen" => &mut self.screen,
            "oracle" => &mut self.oracle,
            _ => return None,
        })
    }
}

/// Run description. Without `reactants` the filter stage draws the seeded
/// synthetic library described by `library`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub reactants: Option<PathBuf>,
    pub purchasables: Option<PathBuf>,
    pub library: LibraryConfig,
    pub stages: Stages,
    /// One-based `k/n` block of alcohols for the react stage.
    pub shard: String,
    /// Final criteria as a JSON threshold list; the immersion defaults otherwise.
    pub criteria: Option<PathBuf>,
    pub relaxation: Option<PathBuf>,
    /// Existing teacher weights; the teacher stage trains one otherwise.
    pub teacher_weights: Option<PathBuf>,
    pub teacher: TeacherConfig,
    pub distill: DistillConfig,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            reactants: None,
            purchasables: None,
            library: LibraryConfig::default(),
            stages: Stages::default(),
            shard: "1/1".into(),
            criteria: None,
            relaxation: None,
            teacher_weights: None,
            teacher: TeacherConfig::default(),
            distill: DistillConfig::default(),
            threads: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("run directory does not verify: {0}")]
    Tampered(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

impl RunConfig {
    /// Parses a config file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.reactants,
            &mut cfg.purchasables,
            &mut cfg.criteria,
            &mut cfg.relaxation,
            &mut cfg.teacher_weights,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.shard_spec()?;
        if self.threads == 0 {
            return Err(PipelineError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn shard_spec(&self) -> Result<Shard, PipelineError> {
        self.shard.parse().map_err(|e: crate::reactor::ShardParseError| PipelineError::Config(e.to_string()))
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String, String> {
    std::fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Hash of the preceding manifest of this run.
    pub previous: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, Value>,
    pub status: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIndexEntry {
    pub stage: String,
    pub manifest_sha256: String,
}

/// `run.json`: the manifests of the last run, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIndex {
    pub seed: u64,
    pub config_sha256: String,
    pub stages: Vec<RunIndexEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifests: Vec<Manifest>,
    /// Wall seconds per stage; also written to `timings.json`, never into manifests.
    pub timings: Vec<(String, f64)>,
}

impl RunSummary {
    pub fn manifest(&self, stage: &str) -> Option<&Manifest> {
        self.manifests.iter().find(|m| m.stage == stage)
    }
}

#[derive(Default)]
struct StageRecord {
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    counts: BTreeMap<String, Value>,
}

impl StageRecord {
    fn count(&mut self, key: &str, v: impl Into<Value>) {
        self.counts.insert(key.to_string(), v.into());
    }
}

/// Artifacts shared between stages; loaded from the run directory when an
/// earlier stage was disabled.
struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    library: Option<DemoLibrary>,
    teacher: Option<GateTeacher>,
    table: Option<EmbeddingTable>,
    surrogate: Option<SurrogateModel>,
    screen: Option<ScreenOutcome>,
}

fn need(path: &Path) -> Result<PathBuf, String> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(format!("missing input {}", path.display()))
    }
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ensure_library(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        let path = need(&self.path("library.csv"))?;
        if self.library.is_none() {
            let f = File::open(&path).map_err(|e| e.to_string())?;
            self.library = Some(io::read_library_csv(f).map_err(|e| e.to_string())?);
        }
        rec.inputs.push(path);
        Ok(())
    }

    fn ensure_teacher(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        let path = need(&self.path("teacher.weights"))?;
        if self.teacher.is_none() {
            let model = GateModel::load(&path).map_err(|e| e.to_string())?;
            self.teacher = Some(GateTeacher::new(model).map_err(|e| e.to_string())?);
        }
        rec.inputs.push(path);
        Ok(())
    }

    fn ensure_table(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        let path = need(&self.path("lookup.emb"))?;
        if self.table.is_none() {
            self.table = Some(EmbeddingTable::read(&path).map_err(|e| e.to_string())?);
        }
        rec.inputs.push(path);
        Ok(())
    }

    fn ensure_surrogate(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        let path = need(&self.path("surrogate.weights"))?;
        if self.surrogate.is_none() {
            self.surrogate = Some(SurrogateModel::load(&path).map_err(|e| e.to_string())?);
        }
        rec.inputs.push(path);
        Ok(())
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, String> {
        let p = self.path(name);
        File::create(&p).map(BufWriter::new).map_err(|e| format!("{}: {e}", p.display()))
    }

    fn run_stage(&mut self, stage: &str, rec: &mut StageRecord) -> Result<(), String> {
        match stage {
            "filter" => self.filter(rec),
            "react" => self.react(rec),
            "teacher" => self.train_teacher(rec),
            "lookup" => self.lookup(rec),
            "surrogate" => self.surrogate(rec),
            "screen" => self.screen(rec),
            "oracle" => self.oracle(rec),
            _ => unreachable!("unknown stage {stage}"),
        }
    }

    fn filter(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        let cfg = self.cfg;
        let (lib, molecules_in) = match &cfg.reactants {
            None => {
                let lib = demo_library(&cfg.library, cfg.seed);
                let n = lib.reactant_pool().len() + lib.purchasables.len();
                (lib, n)
            }
            Some(path) => {
                rec.inputs.push(need(path)?);
                let rows = io::read_molecules(File::open(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                let mut n = rows.len();
                let mut parse_errors = rows.iter().filter(|r| r.2.is_err()).count();
                let parsed = rows.into_iter().filter_map(|(id, _, g)| g.ok().map(|g| Reactant::new(id, g)));
                let (sets, rejected) = ReactantSets::build(parsed);
                rec.count("rejected", rejected.len());
                let mut purchasables = Vec::new();
                if let Some(path) = &cfg.purchasables {
                    rec.inputs.push(need(path)?);
                    let rows =
                        io::read_molecules(File::open(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                    n += rows.len();
                    parse_errors += rows.iter().filter(|r| r.2.is_err()).count();
                    let mut seen = HashSet::new();
                    for (id, _, g) in rows {
                        let Ok(g) = g else { continue };
                        if prefilter(&g).passed && postfilter(&g).passed {
                            let r = Reactant::new(id, g);
                            if seen.insert(r.smiles.clone()) {
                                purchasables.push(r);
                            }
                        }
                    }
                }
                rec.count("parse_errors", parse_errors);
                (DemoLibrary { sets, purchasables }, n)
            }
        };
        let molecules_out = lib.reactant_pool().len() + lib.purchasables.len();
        rec.count("in", molecules_in);
        rec.count("out", molecules_out);
        rec.count("alcohols", lib.sets.alcohols.len());
        rec.count("chlorides", lib.sets.chlorides.len());
        rec.count("acids", lib.sets.acids.len());
        rec.count("purchasables", lib.purchasables.len());
        let mut w = self.create("library.csv")?;
        io::write_library_csv(&mut w, &lib).map_err(|e| e.to_string())?;
        drop(w);
        rec.outputs.push("library.csv".into());
        self.library = Some(lib);
        Ok(())
    }

    fn react(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        self.ensure_library(rec)?;
        let shard = self.cfg.shard_spec().map_err(|e| e.to_string())?;
        let sets = &self.library.as_ref().expect("library loaded").sets;
        let mut w = csv::Writer::from_writer(self.create("products.csv")?);
        w.write_record(["alcohol", "partner", "reaction", "smiles"]).map_err(|e| e.to_string())?;
        let (mut ethers, mut esters) = (0u64, 0u64);
        for p in ProductStream::new(sets, shard) {
            let partner = &sets.partners(p.reaction)[p.parents.1];
            let smiles = crate::molgraph::write_smiles(&p.product);
            w.write_record([&sets.alcohols[p.parents.0].id, &partner.id, p.reaction.name(), &smiles])
                .map_err(|e| e.to_string())?;
            match p.reaction {
                crate::reactor::Reaction::Ether => ethers += 1,
                crate::reactor::Reaction::Ester => esters += 1,
            }
        }
        w.flush().map_err(|e| e.to_string())?;
        let expected = count_products(sets, shard);
        if expected.ethers != ethers || expected.esters != esters {
            return Err(format!("stream produced {ethers}+{esters}, count-only {expected:?}"));
        }
        rec.count("shard", shard.to_string());
        rec.count("ethers", ethers);
        rec.count("esters", esters);
        rec.count("total", ethers + esters);
        rec.outputs.push("products.csv".into());
        Ok(())
    }

    fn train_teacher(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        let teacher = match &self.cfg.teacher_weights {
            Some(path) => {
                rec.inputs.push(need(path)?);
                rec.count("trained", false);
                GateTeacher::new(GateModel::load(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?
            }
            None => {
                self.ensure_library(rec)?;
                let lib = self.library.as_ref().expect("library loaded");
                rec.count("trained", true);
                rec.count("epochs", self.cfg.teacher.epochs);
                rec.count("product_labels", self.cfg.teacher.product_labels);
                train_teacher(lib, &self.cfg.teacher, self.cfg.seed).map_err(|e| e.to_string())?
            }
        };
        teacher.model().save(&self.path("teacher.weights")).map_err(|e| e.to_string())?;
        rec.count("latent_dim", teacher.latent_dim());
        rec.outputs.extend(["teacher.weights".into(), "teacher.json".into()]);
        self.teacher = Some(teacher);
        Ok(())
    }

    fn lookup(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        self.ensure_library(rec)?;
        self.ensure_teacher(rec)?;
        let teacher = self.teacher.as_ref().expect("teacher loaded");
        let before = teacher.calls();
        let table = library_lookup(self.library.as_ref().expect("library loaded"), teacher).map_err(|e| e.to_string())?;
        rec.count("reactants", table.len());
        rec.count("teacher_calls", teacher.calls() - before);
        table.write(&self.path("lookup.emb")).map_err(|e| e.to_string())?;
        rec.outputs.push("lookup.emb".into());
        self.table = Some(table);
        Ok(())
    }

    fn surrogate(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        self.ensure_library(rec)?;
        self.ensure_teacher(rec)?;
        self.ensure_table(rec)?;
        let lib = self.library.as_ref().expect("library loaded");
        let teacher = self.teacher.as_ref().expect("teacher loaded");
        let table = self.table.as_ref().expect("table loaded");
        let d = distill(lib, teacher, table, &self.cfg.distill, self.cfg.seed).map_err(|e| e.to_string())?;
        d.model.save(&self.path("surrogate.weights")).map_err(|e| e.to_string())?;
        write_fidelity_csv(self.create("fidelity.csv")?, &d.fidelity).map_err(|e| e.to_string())?;
        rec.count("train_pairs", d.train_pairs);
        rec.count("holdout_pairs", self.cfg.distill.holdout);
        let strong = d.fidelity.iter().filter(|f| f.pearson.is_some_and(|r| r >= 0.9)).count();
        rec.count("heads_r_at_least_0_9", strong);
        rec.outputs.extend(["surrogate.weights".into(), "surrogate.json".into(), "fidelity.csv".into()]);
        self.surrogate = Some(d.model);
        Ok(())
    }

    fn criteria(&self, rec: &mut StageRecord) -> Result<(CriteriaSet, CriteriaSet), String> {
        let final_set = match &self.cfg.criteria {
            Some(p) => {
                rec.inputs.push(need(p)?);
                CriteriaSet::from_json(&std::fs::read_to_string(p).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?
            }
            None => CriteriaSet::immersion_default(),
        };
        let relaxation: Relaxation = match &self.cfg.relaxation {
            Some(p) => {
                rec.inputs.push(need(p)?);
                serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| e.to_string())?)
                    .map_err(|e| format!("relaxation: {e}"))?
            }
            None => Relaxation::default(),
        };
        let relaxed = relaxation.apply(&final_set);
        Ok((relaxed, final_set))
    }

    fn screen_config(&self) -> ScreenConfig {
        ScreenConfig {
            threads: self.cfg.threads,
            ..ScreenConfig::default()
        }
    }

    fn screen(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        self.ensure_library(rec)?;
        self.ensure_teacher(rec)?;
        self.ensure_surrogate(rec)?;
        let (relaxed, final_set) = self.criteria(rec)?;
        let lib = self.library.as_ref().expect("library loaded");
        let out = two_stage_screen(
            &lib.sets,
            &lib.purchasables,
            self.surrogate.as_ref().expect("surrogate loaded"),
            self.teacher.as_ref().expect("teacher loaded"),
            &relaxed,
            &final_set,
            &self.screen_config(),
        )
        .map_err(|e| e.to_string())?;
        write_candidates_csv(self.create("candidates.csv")?, &out.candidates).map_err(|e| e.to_string())?;
        let report = serde_json::to_vec_pretty(&out.report).map_err(|e| e.to_string())?;
        std::fs::write(self.path("screen.json"), report).map_err(|e| e.to_string())?;
        let r = &out.report;
        rec.count("library_size", r.library_size);
        rec.count("prefilter_pass", r.prefilter_pass);
        rec.count("surrogate_pass", r.surrogate_pass);
        rec.count("teacher_pass", r.teacher_pass);
        rec.count("purchasable_pass", r.purchasable_pass);
        rec.count("teacher_calls", r.teacher_calls);
        rec.count("surrogate_calls", r.surrogate_calls);
        rec.count("candidates", out.candidates.len());
        rec.count("criterion_counts", r.criterion_counts.to_vec());
        rec.outputs.extend(["candidates.csv".into(), "screen.json".into()]);
        self.screen = Some(out);
        Ok(())
    }

    fn oracle(&mut self, rec: &mut StageRecord) -> Result<(), String> {
        self.ensure_library(rec)?;
        self.ensure_teacher(rec)?;
        let (_, final_set) = self.criteria(rec)?;
        let lib = self.library.as_ref().expect("library loaded");
        let out = teacher_screen(
            &lib.sets,
            &lib.purchasables,
            self.teacher.as_ref().expect("teacher loaded"),
            &final_set,
            &self.screen_config(),
        )
        .map_err(|e| e.to_string())?;
        write_candidates_csv(self.create("oracle.csv")?, &out.candidates).map_err(|e| e.to_string())?;
        rec.count("candidates", out.candidates.len());
        rec.count("teacher_calls", out.report.teacher_calls);
        if let Some(two) = &self.screen {
            rec.count("missed_by_two_stage", missed_candidates(&two.candidates, &out.candidates));
        }
        rec.outputs.push("oracle.csv".into());
        Ok(())
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| io_err(path, e))?;
    bytes.push(b'\n');
    std::fs::write(path, &bytes).map_err(|e| io_err(path, e))?;
    Ok(bytes)
}

/// Runs the enabled stages in order, writing artifacts and manifests under
/// `out_dir`. Stops at the first failing stage after recording its manifest.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let manifest_dir = out_dir.join("manifests");
    std::fs::create_dir_all(&manifest_dir).map_err(|e| io_err(&manifest_dir, e))?;
    let config_sha = cfg.sha256();
    let mut ctx = Ctx {
        cfg,
        dir: out_dir,
        library: None,
        teacher: None,
        table: None,
        surrogate: None,
        screen: None,
    };
    let mut index = RunIndex {
        seed: cfg.seed,
        config_sha256: config_sha.clone(),
        stages: Vec::new(),
    };
    let mut summary = RunSummary {
        manifests: Vec::new(),
        timings: Vec::new(),
    };
    let mut failure = None;
    for stage in STAGES.into_iter().filter(|s| cfg.stages.enabled(s)) {
        log::info!("stage {stage}");
        let start = Instant::now();
        let mut rec = StageRecord::default();
        let result = ctx.run_stage(stage, &mut rec);
        summary.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));

        let mut manifest = Manifest {
            stage: stage.to_string(),
            seed: cfg.seed,
            config_sha256: config_sha.clone(),
            previous: index.stages.last().map(|e| e.manifest_sha256.clone()),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: rec.counts,
            status: "ok".into(),
            error: None,
        };
        let hashes = result.and_then(|()| {
            for p in &rec.inputs {
                let key = match p.strip_prefix(out_dir) {
                    Ok(rel) => rel.display().to_string(),
                    Err(_) => p.display().to_string(),
                };
                manifest.inputs.insert(key, file_sha256(p)?);
            }
            for name in &rec.outputs {
                manifest.outputs.insert(name.clone(), file_sha256(&out_dir.join(name))?);
            }
            Ok(())
        });
        if let Err(message) = hashes {
            manifest.status = "failed".into();
            manifest.error = Some(message.clone());
            failure = Some(PipelineError::Stage {
                stage: stage.to_string(),
                message,
            });
        }
        let bytes = write_json(&manifest_dir.join(format!("{stage}.json")), &manifest)?;
        index.stages.push(RunIndexEntry {
            stage: stage.to_string(),
            manifest_sha256: sha256_hex(&bytes),
        });
        summary.manifests.push(manifest);
        if failure.is_some() {
            break;
        }
    }
    write_json(&out_dir.join("run.json"), &index)?;
    let timings: BTreeMap<&str, f64> = summary.timings.iter().map(|(s, t)| (s.as_str(), *t)).collect();
    write_json(&out_dir.join("timings.json"), &json!(timings))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Re-hashes the last run's manifests and outputs against `run.json`.
pub fn verify_run(out_dir: &Path) -> Result<Vec<Manifest>, PipelineError> {
    let index_path = out_dir.join("run.json");
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let index: RunIndex = serde_json::from_str(&text).map_err(|e| io_err(&index_path, e))?;
    let mut previous: Option<String> = None;
    let mut out = Vec::new();
    for entry in &index.stages {
        let path = out_dir.join("manifests").join(format!("{}.json", entry.stage));
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        if sha256_hex(&bytes) != entry.manifest_sha256 {
            return Err(PipelineError::Tampered(format!("manifest {} changed", entry.stage)));
        }
        let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| io_err(&path, e))?;
        if m.previous != previous {
            return Err(PipelineError::Tampered(format!("manifest {} breaks the chain", entry.stage)));
        }
        for (name, sha) in &m.outputs {
            let actual = file_sha256(&out_dir.join(name)).map_err(PipelineError::Io)?;
            if &actual != sha {
                return Err(PipelineError::Tampered(format!("{name} differs from the {} manifest", m.stage)));
            }
        }
        previous = Some(entry.manifest_sha256.clone());
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
