//! Per-stage throughput on one product set.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::demo::DemoLibrary;
use super::{io, PipelineError};
use crate::filters::postfilter;
use crate::gate::GateModel;
use crate::molgraph::MolGraph;
use crate::reactor::{ProductStream, Shard};
use crate::surrogate::{pair_inputs, EmbeddingTable, GateTeacher, SurrogateError, SurrogateModel, Teacher};

const BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageThroughput {
    pub stage: String,
    pub molecules: u64,
    pub seconds: f64,
    /// Zero when nothing was processed.
    pub per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub stages: Vec<StageThroughput>,
}

impl BenchReport {
    pub fn stage(&self, name: &str) -> Option<&StageThroughput> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

fn timed<T>(stage: &str, molecules: impl Fn(&T) -> usize, f: impl FnOnce() -> T) -> (T, StageThroughput) {
    let start = Instant::now();
    let out = f();
    let seconds = start.elapsed().as_secs_f64();
    let n = molecules(&out) as u64;
    let per_second = if n > 0 && seconds > 0.0 { n as f64 / seconds } else { 0.0 };
    let row = StageThroughput {
        stage: stage.to_string(),
        molecules: n,
        seconds,
        per_second,
    };
    (out, row)
}

/// Times enumeration, structure filtering, teacher prediction and
/// surrogate prediction over the first `limit` products.
pub fn bench(
    lib: &DemoLibrary,
    teacher: &dyn Teacher,
    surrogate: &SurrogateModel,
    table: &EmbeddingTable,
    limit: usize,
) -> Result<BenchReport, SurrogateError> {
    let sets = &lib.sets;
    let (products, react) = timed("react", Vec::len, || {
        ProductStream::new(sets, Shard::WHOLE).take(limit).collect::<Vec<_>>()
    });
    let (_, filter) = timed("filter", |n: &usize| *n, || {
        std::hint::black_box(products.iter().filter(|p| postfilter(&p.product).passed).count());
        products.len()
    });
    let graphs: Vec<&MolGraph> = products.iter().map(|p| &p.product).collect();
    let (teacher_out, teacher_row) = timed(
        "teacher",
        |r: &Result<usize, SurrogateError>| *r.as_ref().unwrap_or(&0),
        || {
            for chunk in graphs.chunks(BATCH) {
                teacher.predict(chunk)?;
            }
            Ok(graphs.len())
        },
    );
    teacher_out?;
    let ids: Vec<(&str, &str)> = products
        .iter()
        .map(|p| {
            let partner = &sets.partners(p.reaction)[p.parents.1];
            (sets.alcohols[p.parents.0].id.as_str(), partner.id.as_str())
        })
        .collect();
    let (surrogate_out, surrogate_row) = timed(
        "surrogate",
        |r: &Result<usize, SurrogateError>| *r.as_ref().unwrap_or(&0),
        || {
            for chunk in ids.chunks(BATCH) {
                surrogate.predict_inputs(&pair_inputs(chunk, table)?)?;
            }
            Ok(ids.len())
        },
    );
    surrogate_out?;
    Ok(BenchReport {
        stages: vec![react, filter, teacher_row, surrogate_row],
    })
}

/// [`bench`] over the artifacts of a finished run.
pub fn bench_run(out_dir: &Path, limit: usize) -> Result<BenchReport, PipelineError> {
    let fail = |e: &dyn std::fmt::Display| PipelineError::Stage {
        stage: "bench".into(),
        message: e.to_string(),
    };
    let path = out_dir.join("library.csv");
    let file = std::fs::File::open(&path).map_err(|e| super::io_err(&path, e))?;
    let lib = io::read_library_csv(file).map_err(|e| fail(&e))?;
    let model = GateModel::load(&out_dir.join("teacher.weights")).map_err(|e| fail(&e))?;
    let teacher = GateTeacher::new(model).map_err(|e| fail(&e))?;
    let surrogate = SurrogateModel::load(&out_dir.join("surrogate.weights")).map_err(|e| fail(&e))?;
    let table = EmbeddingTable::read(&out_dir.join("lookup.emb")).map_err(|e| fail(&e))?;
    table.check_provenance(teacher.provenance()).map_err(|e| fail(&e))?;
    bench(&lib, &teacher, &surrogate, &table, limit).map_err(|e| fail(&e))
}
