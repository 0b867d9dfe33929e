//! Geometrically aligned transfer encoder (GATE) and its single-task
//! baseline.
//!
//! All tasks share one molecular encoder producing `z`. Task `t` owns a
//! transfer net `h_t` into its manifold coordinates `m = h_t(z)`, an inverse
//! net `g_t` back to `z`, and a head scoring `m`. The single-task baseline
//! is the same stack for one task with no inverse net and only the
//! regression loss.

mod data;
mod losses;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{featurize, Encoder, EncoderConfig, FeaturizedGraph, GraphBatch};
use crate::molgraph::MolGraph;
use crate::nncore::{
    read_weights, rng_for, write_weights, Eval, Mlp, NnError, Ops, Params, Tensor, WeightsError,
};

pub use data::{descriptor_features, latent_factors, make_synthetic_tasks, MultiTaskDataset, Split};
pub use losses::{loss_auto, loss_cons, loss_dis, loss_map, loss_reg, pivot_index};
pub use train::{train_gate, train_stl, EpochMetrics, Observer, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("batch has no labeled rows")]
    EmptyBatch,
    #[error("target task has no labels in this batch")]
    MissingLabels,
    #[error("training diverged at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("need at least one task with a labeled training example")]
    NotEnoughTasks,
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("weights do not match the model layout: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub head_hidden: usize,
    pub slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            head_hidden: 32,
            slope: 0.01,
        }
    }
}

/// Per-task label standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler { mean: 0.0, std: 1.0 };

    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::IDENTITY;
        }
        let mean = crate::stats::mean(values);
        let std = crate::stats::std_dev(values);
        Scaler {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskNets {
    /// `h_t`: d → d
    pub transfer: Mlp,
    /// `g_t`: d → d
    pub inverse: Option<Mlp>,
    /// d → head_hidden → 1
    pub head: Mlp,
}

/// Loss weights `(α, β, γ, δ)` for auto, cons, map and dis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl LossWeights {
    pub const UNIT: LossWeights = LossWeights {
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
        delta: 1.0,
    };
    pub const ZERO: LossWeights = LossWeights {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        delta: 0.0,
    };
}

/// Unweighted loss components of one step. Terms with zero weight are
/// not computed and read as zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reg: f64,
    pub auto: f64,
    pub cons: f64,
    pub map: f64,
    pub dis: f64,
    pub total: f64,
}

/// One optimization step's inputs.
#[derive(Debug, Clone)]
pub struct StepBatch {
    pub graphs: GraphBatch,
    /// Per model task: batch rows carrying a label, and the standardized
    /// labels as a column.
    pub labels: Vec<(Vec<usize>, Tensor)>,
    /// Standard normal draws, `N·M × d`, for the distance loss.
    pub noise: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateModel {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub tasks: Vec<TaskNets>,
    pub task_names: Vec<String>,
    pub scalers: Vec<Scaler>,
    pub params: Params,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    config: ModelConfig,
    task_names: Vec<String>,
    scalers: Vec<Scaler>,
    with_inverse: bool,
}

impl GateModel {
    /// Fresh model. Every module draws its initial weights from its own
    /// seeded stream, so layouts with and without inverse nets share the
    /// encoder, transfer and head initializations.
    pub fn new(config: ModelConfig, task_names: Vec<String>, with_inverse: bool, seed: u64) -> Result<Self, NnError> {
        let mut params = Params::new();
        let encoder = Encoder::new(&mut params, config.encoder, seed)?;
        let d = config.encoder.latent;
        let mut tasks = Vec::with_capacity(task_names.len());
        for t in 0..task_names.len() {
            let name = format!("task{t}");
            let transfer = Mlp::new(
                &mut params,
                &format!("{name}.transfer"),
                &[d, d, d],
                config.slope,
                &mut rng_for(seed, &format!("{name}.transfer")),
            )?;
            let inverse = if with_inverse {
                Some(Mlp::new(
                    &mut params,
                    &format!("{name}.inverse"),
                    &[d, d, d],
                    config.slope,
                    &mut rng_for(seed, &format!("{name}.inverse")),
                )?)
            } else {
                None
            };
            let head = Mlp::new(
                &mut params,
                &format!("{name}.head"),
                &[d, config.head_hidden, 1],
                config.slope,
                &mut rng_for(seed, &format!("{name}.head")),
            )?;
            tasks.push(TaskNets { transfer, inverse, head });
        }
        let scalers = vec![Scaler::IDENTITY; task_names.len()];
        Ok(GateModel {
            config,
            encoder,
            tasks,
            task_names,
            scalers,
            params,
        })
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.config.encoder.latent
    }

    pub fn has_inverse(&self) -> bool {
        self.tasks.iter().all(|t| t.inverse.is_some())
    }

    pub fn latent<O: Ops>(&self, ops: &mut O, params: &Params, batch: &GraphBatch) -> Result<O::V, NnError> {
        self.encoder.encode_batch(ops, params, batch)
    }

    pub fn transfer<O: Ops>(&self, ops: &mut O, params: &Params, task: usize, z: &O::V) -> Result<O::V, NnError> {
        self.tasks[task].transfer.forward(ops, params, z)
    }

    /// `g_t(m)`; identity when the model has no inverse nets.
    pub fn inverse<O: Ops>(&self, ops: &mut O, params: &Params, task: usize, m: &O::V) -> Result<O::V, NnError> {
        match &self.tasks[task].inverse {
            Some(net) => net.forward(ops, params, m),
            None => Ok(m.clone()),
        }
    }

    pub fn head<O: Ops>(&self, ops: &mut O, params: &Params, task: usize, m: &O::V) -> Result<O::V, NnError> {
        self.tasks[task].head.forward(ops, params, m)
    }

    /// Standardized prediction `head_t(h_t(z))`.
    pub fn score<O: Ops>(&self, ops: &mut O, params: &Params, task: usize, z: &O::V) -> Result<O::V, NnError> {
        let m = self.transfer(ops, params, task, z)?;
        self.head(ops, params, task, &m)
    }

    /// Predictions in task units, one row per molecule, one column per task.
    pub fn predict_batch(&self, graphs: &[FeaturizedGraph]) -> Result<Tensor, NnError> {
        let z = self.latent_batch(graphs)?;
        self.predict_from_latent(&z)
    }

    /// Predictions in task units from precomputed latents.
    pub fn predict_from_latent(&self, z: &Tensor) -> Result<Tensor, NnError> {
        let mut out = Tensor::zeros(z.rows(), self.task_count());
        for t in 0..self.task_count() {
            let y = self.score(&mut Eval, &self.params, t, z)?;
            for r in 0..z.rows() {
                out.set(r, t, self.scalers[t].inverse(y.get(r, 0)));
            }
        }
        Ok(out)
    }

    pub fn latent_batch(&self, graphs: &[FeaturizedGraph]) -> Result<Tensor, NnError> {
        let refs: Vec<&FeaturizedGraph> = graphs.iter().collect();
        self.latent(&mut Eval, &self.params, &GraphBatch::new(&refs))
    }

    pub fn predict(&self, g: &MolGraph) -> Result<Vec<f64>, NnError> {
        Ok(self.predict_batch(&[featurize(g)])?.into_data())
    }

    /// Shared latent `z` of one molecule.
    pub fn latent_of(&self, g: &MolGraph) -> Result<Vec<f64>, NnError> {
        Ok(self.latent_batch(&[featurize(g)])?.into_data())
    }

    /// Manifold point `m = h_t(z)` of one molecule.
    pub fn manifold_embed(&self, g: &MolGraph, task: usize) -> Result<Vec<f64>, NnError> {
        let z = self.latent_batch(&[featurize(g)])?;
        Ok(self.transfer(&mut Eval, &self.params, task, &z)?.into_data())
    }

    pub fn save(&self, path: &Path) -> Result<(), GateError> {
        let side = Sidecar {
            kind: "gate".into(),
            config: self.config,
            task_names: self.task_names.clone(),
            scalers: self.scalers.clone(),
            with_inverse: self.has_inverse(),
        };
        let json = serde_json::to_value(&side).map_err(WeightsError::from)?;
        write_weights(path, &self.params, &json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GateError> {
        let (loaded, json) = read_weights(path)?;
        let side: Sidecar = serde_json::from_value(json).map_err(WeightsError::from)?;
        let mut model = GateModel::new(side.config, side.task_names, side.with_inverse, 0)?;
        if loaded.len() != model.params.len() {
            return Err(GateError::LayoutMismatch(format!(
                "{} tensors, expected {}",
                loaded.len(),
                model.params.len()
            )));
        }
        for (name, t) in loaded.iter() {
            let id = model
                .params
                .id(name)
                .ok_or_else(|| GateError::LayoutMismatch(format!("unexpected tensor {name}")))?;
            if model.params.get(id).shape() != t.shape() {
                return Err(GateError::LayoutMismatch(format!("shape of {name}")));
            }
            *model.params.get_mut(id) = t.clone();
        }
        model.scalers = side.scalers;
        Ok(model)
    }
}

/// `L_tot` for the ordered task pair `(s, t)` and its unweighted parts.
///
/// `L_reg` sums per-task MSE over every task with labels in the batch.
/// `L_auto` reconstructs `z` through both `g_s∘h_s` and `g_t∘h_t`.
/// `L_map` scores `h_t(g_s(h_s(z)))` with the target head. `L_dis` uses
/// latent-space perturbations `z + σ·ε`. Terms with zero weight are
/// skipped entirely.
#[allow(clippy::too_many_arguments)]
pub fn loss_total<O: Ops>(
    ops: &mut O,
    model: &GateModel,
    params: &Params,
    batch: &StepBatch,
    pair: (usize, usize),
    weights: &LossWeights,
    sigma: f64,
    perturbations: usize,
) -> Result<(O::V, LossBreakdown), GateError> {
    let (s, t) = pair;
    let z = model.latent(ops, params, &batch.graphs)?;
    let mut br = LossBreakdown::default();

    let mut total: Option<O::V> = None;
    let add = |ops: &mut O, total: &mut Option<O::V>, term: O::V| -> Result<(), NnError> {
        *total = Some(match total.take() {
            None => term,
            Some(acc) => ops.add(&acc, &term)?,
        });
        Ok(())
    };

    for (task, (rows, y)) in batch.labels.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let zr = ops.gather_rows(&z, rows)?;
        let pred = model.score(ops, params, task, &zr)?;
        let yv = ops.constant(y.clone());
        let l = loss_reg(ops, &yv, &pred)?;
        br.reg += ops.value(&l).item();
        add(ops, &mut total, l)?;
    }
    let mut total = match total {
        Some(v) => v,
        None => ops.constant(Tensor::scalar(0.0)),
    };

    let needs_ms = weights.alpha != 0.0 || weights.beta != 0.0 || weights.gamma != 0.0;
    let needs_mt = weights.alpha != 0.0 || weights.beta != 0.0;
    let m_s = if needs_ms { Some(model.transfer(ops, params, s, &z)?) } else { None };
    let m_t = if needs_mt { Some(model.transfer(ops, params, t, &z)?) } else { None };

    let weighted = |ops: &mut O, total: &mut O::V, w: f64, term: &O::V| -> Result<(), NnError> {
        let scaled = ops.scale(term, w);
        *total = ops.add(total, &scaled)?;
        Ok(())
    };

    if weights.alpha != 0.0 {
        let (ms, mt) = (m_s.as_ref().expect("m_s"), m_t.as_ref().expect("m_t"));
        let zs = model.inverse(ops, params, s, ms)?;
        let zt = model.inverse(ops, params, t, mt)?;
        let ls = loss_auto(ops, &z, &zs)?;
        let lt = loss_auto(ops, &z, &zt)?;
        let l = ops.add(&ls, &lt)?;
        br.auto = ops.value(&l).item();
        weighted(ops, &mut total, weights.alpha, &l)?;
    }
    if weights.beta != 0.0 {
        let (ms, mt) = (m_s.as_ref().expect("m_s"), m_t.as_ref().expect("m_t"));
        let l = loss_cons(ops, ms, mt)?;
        br.cons = ops.value(&l).item();
        weighted(ops, &mut total, weights.beta, &l)?;
    }
    if weights.gamma != 0.0 {
        let (rows, y) = &batch.labels[t];
        if !rows.is_empty() {
            let ms = m_s.as_ref().expect("m_s");
            let ms_r = ops.gather_rows(ms, rows)?;
            let back = model.inverse(ops, params, s, &ms_r)?;
            let mapped = model.transfer(ops, params, t, &back)?;
            let pred = model.head(ops, params, t, &mapped)?;
            let yv = ops.constant(y.clone());
            let l = loss_map(ops, &yv, &pred)?;
            br.map = ops.value(&l).item();
            weighted(ops, &mut total, weights.gamma, &l)?;
        }
    }
    if weights.delta != 0.0 {
        let noise = batch.noise.as_ref().ok_or(GateError::EmptyBatch)?;
        let n = ops.value(&z).rows();
        let index = pivot_index(n, perturbations);
        let rep = ops.gather_rows(&z, &index)?;
        let eps = ops.constant(noise.map(|v| v * sigma));
        let pert = ops.add(&rep, &eps)?;
        let piv_s = match &m_s {
            Some(v) => v.clone(),
            None => model.transfer(ops, params, s, &z)?,
        };
        let piv_t = match &m_t {
            Some(v) => v.clone(),
            None => model.transfer(ops, params, t, &z)?,
        };
        let pert_s = model.transfer(ops, params, s, &pert)?;
        let pert_t = model.transfer(ops, params, t, &pert)?;
        let l = loss_dis(ops, &piv_s, &pert_s, &piv_t, &pert_t, perturbations)?;
        br.dis = ops.value(&l).item();
        weighted(ops, &mut total, weights.delta, &l)?;
    }
    br.total = ops.value(&total).item();
    Ok((total, br))
}
