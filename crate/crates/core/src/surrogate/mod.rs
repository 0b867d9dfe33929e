//! Distilled pair predictor over concatenated reactant embeddings.

pub(crate) mod table;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::gate::{Scaler, Split};
use crate::nncore::{
    read_weights, rng_for, write_weights, AdamConfig, Eval, Mlp, NnError, Ops, OptimizerState, Params, Tape, Tensor,
    WeightsError,
};
use crate::properties::{Property, PropertyVector};
use crate::stats;

pub use table::{build_lookup, EmbeddingTable, GateTeacher, Teacher};

pub const TRUNK_WIDTHS: [usize; 2] = [64, 50];
pub const TOWER_WIDTHS: [usize; 3] = [32, 16, 1];

#[derive(Debug, thiserror::Error)]
pub enum SurrogateError {
    #[error("teacher unavailable: {0}")]
    TeacherUnavailable(String),
    #[error("teacher tasks are not the ten properties: {0}")]
    TeacherLayout(String),
    #[error("no embedding for reactant {0:?}")]
    MissingEmbedding(String),
    #[error("duplicate reactant id {0:?}")]
    DuplicateId(String),
    #[error("malformed embedding table")]
    BadTable,
    #[error("embedding table built by teacher {table}, expected {expected}")]
    ProvenanceMismatch { table: String, expected: String },
    #[error("training diverged at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("no training pairs")]
    EmptySample,
    #[error("{0} targets for {1} inputs")]
    TargetCount(usize, usize),
    #[error("weights do not match the surrogate layout: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate reached at the last epoch by cosine annealing.
    pub final_lr: f64,
    pub slope: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            epochs: 400,
            batch_size: 256,
            lr: 1e-3,
            final_lr: 1e-5,
            slope: 0.01,
            seed: 0,
        }
    }
}

/// Shared trunk `2d → 64 → 50` and one `50 → 32 → 16 → 1` tower per property.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub latent_dim: usize,
    pub trunk: Mlp,
    pub towers: Vec<Mlp>,
    /// Label standardization per property; identity until trained.
    pub scalers: Vec<Scaler>,
    /// Provenance of the teacher whose table this model reads.
    pub provenance: String,
    pub params: Params,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    latent_dim: usize,
    slope: f64,
    scalers: Vec<Scaler>,
    provenance: String,
}

impl SurrogateModel {
    pub fn new(latent_dim: usize, slope: f64, provenance: &str, seed: u64) -> Result<Self, NnError> {
        let mut params = Params::new();
        let mut rng = rng_for(seed, "surrogate.trunk");
        let mut trunk = Mlp::new(
            &mut params,
            "trunk",
            &[2 * latent_dim, TRUNK_WIDTHS[0], TRUNK_WIDTHS[1]],
            slope,
            &mut rng,
        )?;
        trunk.activate_last = true;
        let towers = Property::ALL
            .iter()
            .map(|p| {
                let mut rng = rng_for(seed, &format!("surrogate.{}", p.name()));
                let widths = [TRUNK_WIDTHS[1], TOWER_WIDTHS[0], TOWER_WIDTHS[1], TOWER_WIDTHS[2]];
                Mlp::new(&mut params, &format!("tower.{}", p.name()), &widths, slope, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SurrogateModel {
            latent_dim,
            trunk,
            towers,
            scalers: vec![Scaler::IDENTITY; Property::ALL.len()],
            provenance: provenance.to_string(),
            params,
        })
    }

    /// Standardized outputs, one `N×1` column per property.
    pub fn forward<O: Ops>(&self, ops: &mut O, params: &Params, x: &O::V) -> Result<Vec<O::V>, NnError> {
        let h = self.trunk.forward(ops, params, x)?;
        self.towers.iter().map(|t| t.forward(ops, params, &h)).collect()
    }

    /// Predictions in property units for `N×2d` inputs.
    pub fn predict_inputs(&self, x: &Tensor) -> Result<Vec<PropertyVector>, NnError> {
        let cols = self.forward(&mut Eval, &self.params, x)?;
        Ok((0..x.rows())
            .map(|r| {
                let mut v = [0.0; 10];
                for (k, c) in cols.iter().enumerate() {
                    v[k] = self.scalers[k].inverse(c.get(r, 0));
                }
                PropertyVector::from_array(v)
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), SurrogateError> {
        let side = Sidecar {
            kind: "surrogate".into(),
            latent_dim: self.latent_dim,
            slope: self.trunk.slope,
            scalers: self.scalers.clone(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_value(&side).map_err(WeightsError::from)?;
        write_weights(path, &self.params, &json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SurrogateError> {
        let (loaded, json) = read_weights(path)?;
        let side: Sidecar = serde_json::from_value(json).map_err(WeightsError::from)?;
        if side.kind != "surrogate" {
            return Err(SurrogateError::LayoutMismatch(format!("kind {}", side.kind)));
        }
        let mut model = SurrogateModel::new(side.latent_dim, side.slope, &side.provenance, 0)?;
        if loaded.len() != model.params.len() {
            return Err(SurrogateError::LayoutMismatch(format!(
                "{} tensors, expected {}",
                loaded.len(),
                model.params.len()
            )));
        }
        for (name, t) in loaded.iter() {
            let id = model
                .params
                .id(name)
                .ok_or_else(|| SurrogateError::LayoutMismatch(format!("unexpected tensor {name}")))?;
            if model.params.get(id).shape() != t.shape() {
                return Err(SurrogateError::LayoutMismatch(format!("shape of {name}")));
            }
            *model.params.get_mut(id) = t.clone();
        }
        if side.scalers.len() != Property::ALL.len() {
            return Err(SurrogateError::LayoutMismatch("scaler count".into()));
        }
        model.scalers = side.scalers;
        Ok(model)
    }
}

/// `concat(e_r1, e_r2)`, alcohol slot first.
pub fn surrogate_input(r1: &str, r2: &str, table: &EmbeddingTable) -> Result<Vec<f64>, SurrogateError> {
    let a = table.get(r1).ok_or_else(|| SurrogateError::MissingEmbedding(r1.to_string()))?;
    let b = table.get(r2).ok_or_else(|| SurrogateError::MissingEmbedding(r2.to_string()))?;
    Ok(a.iter().chain(b).copied().collect())
}

/// Stacks the inputs of many pairs into one `N×2d` tensor.
pub fn pair_inputs(pairs: &[(&str, &str)], table: &EmbeddingTable) -> Result<Tensor, SurrogateError> {
    let mut data = Vec::with_capacity(pairs.len() * 2 * table.dim());
    for (a, b) in pairs {
        data.extend(surrogate_input(a, b, table)?);
    }
    Ok(Tensor::from_vec(pairs.len(), 2 * table.dim(), data)?)
}

pub fn predict_pair(
    r1: &str,
    r2: &str,
    model: &SurrogateModel,
    table: &EmbeddingTable,
) -> Result<PropertyVector, SurrogateError> {
    Ok(predict_pairs(&[(r1, r2)], model, table)?.remove(0))
}

pub fn predict_pairs(
    pairs: &[(&str, &str)],
    model: &SurrogateModel,
    table: &EmbeddingTable,
) -> Result<Vec<PropertyVector>, SurrogateError> {
    table.check_provenance(&model.provenance)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    Ok(model.predict_inputs(&pair_inputs(pairs, table)?)?)
}

/// `count` distinct cells of an `rows × cols` grid, uniform without replacement.
pub fn sample_pairs(rows: usize, cols: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = rows * cols;
    let mut rng = rng_for(seed, "surrogate.pairs");
    rand::seq::index::sample(&mut rng, total, count.min(total))
        .into_iter()
        .map(|k| (k / cols, k % cols))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    /// Step-averaged training loss per epoch, in standardized units.
    pub history: Vec<f64>,
    pub val_pearson: Vec<Option<f64>>,
    pub val_mse: Vec<Option<f64>>,
}

/// Fits the surrogate to teacher predictions. Loss is the unweighted sum
/// of per-property MSE on standardized targets; Adam with a cosine
/// learning-rate schedule.
pub fn train_surrogate(
    inputs: &Tensor,
    targets: &[PropertyVector],
    split: &Split,
    provenance: &str,
    config: &SurrogateConfig,
) -> Result<(SurrogateModel, SurrogateReport), SurrogateError> {
    if targets.len() != inputs.rows() {
        return Err(SurrogateError::TargetCount(targets.len(), inputs.rows()));
    }
    if split.train.is_empty() || !inputs.cols().is_multiple_of(2) {
        return Err(SurrogateError::EmptySample);
    }
    let mut model = SurrogateModel::new(inputs.cols() / 2, config.slope, provenance, config.seed)?;
    model.scalers = Property::ALL
        .iter()
        .map(|p| Scaler::fit(&split.train.iter().map(|&i| targets[i].get(*p)).collect::<Vec<_>>()))
        .collect();

    let mut opt = OptimizerState::new(AdamConfig::adam(config.lr), &model.params);
    let mut rng = rng_for(config.seed, "surrogate.shuffle");
    let batch_size = config.batch_size.clamp(1, split.train.len());
    let mut order = split.train.clone();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let progress = if config.epochs > 1 {
            (epoch - 1) as f64 / (config.epochs - 1) as f64
        } else {
            0.0
        };
        opt.config.lr = config.final_lr + 0.5 * (config.lr - config.final_lr) * (1.0 + (std::f64::consts::PI * progress).cos());
        let mut sum = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(batch_size) {
            let mut tape = Tape::new();
            let x = tape.constant(gather(inputs, chunk));
            let outs = model.forward(&mut tape, &model.params, &x)?;
            let mut loss = None;
            for (k, out) in outs.iter().enumerate() {
                let y: Vec<f64> = chunk.iter().map(|&i| model.scalers[k].forward(targets[i].to_array()[k])).collect();
                let y = tape.constant(Tensor::column(&y));
                let l = tape.mse(out, &y)?;
                loss = Some(match loss {
                    None => l,
                    Some(acc) => tape.add(&acc, &l)?,
                });
            }
            let loss = loss.expect("ten towers");
            let value = tape.value(&loss).item();
            if !value.is_finite() {
                return Err(SurrogateError::DivergenceDetected { epoch });
            }
            let grads = match tape.backward(loss) {
                Ok(g) => g,
                Err(NnError::NonFinite(_)) => return Err(SurrogateError::DivergenceDetected { epoch }),
                Err(e) => return Err(e.into()),
            };
            opt.step(&mut model.params, &grads)?;
            sum += value;
            steps += 1;
        }
        history.push(sum / steps as f64);
    }

    let (val_pearson, val_mse) = if split.val.is_empty() {
        (vec![None; 10], vec![None; 10])
    } else {
        let pred = model.predict_inputs(&gather(inputs, &split.val))?;
        let truth: Vec<PropertyVector> = split.val.iter().map(|&i| targets[i]).collect();
        let rows = fidelity_report(&pred, &truth);
        (
            rows.iter().map(|r| r.pearson).collect(),
            rows.iter().map(|r| Some(r.mse)).collect(),
        )
    };
    Ok((
        model,
        SurrogateReport {
            history,
            val_pearson,
            val_mse,
        },
    ))
}

fn gather(x: &Tensor, rows: &[usize]) -> Tensor {
    let mut data = Vec::with_capacity(rows.len() * x.cols());
    for &r in rows {
        data.extend_from_slice(x.row_slice(r));
    }
    Tensor::from_vec(rows.len(), x.cols(), data).expect("row gather keeps shape")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFidelity {
    pub property: Property,
    pub pearson: Option<f64>,
    pub mae: f64,
    pub mse: f64,
}

/// Agreement between surrogate and teacher on the same products.
pub fn fidelity_report(surrogate: &[PropertyVector], teacher: &[PropertyVector]) -> Vec<TaskFidelity> {
    Property::ALL
        .iter()
        .map(|&p| {
            let a: Vec<f64> = surrogate.iter().map(|v| v.get(p)).collect();
            let b: Vec<f64> = teacher.iter().map(|v| v.get(p)).collect();
            let mse = if a.is_empty() {
                0.0
            } else {
                a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
            };
            TaskFidelity {
                property: p,
                pearson: stats::pearson(&a, &b),
                mae: if a.is_empty() { 0.0 } else { stats::mae(&a, &b) },
                mse,
            }
        })
        .collect()
}

pub fn write_fidelity_csv<W: Write>(out: W, rows: &[TaskFidelity]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["property", "pearson_r", "mae"])?;
    for r in rows {
        let pearson = r.pearson.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        w.write_record([r.property.name().to_string(), pearson, format!("{:.6}", r.mae)])?;
    }
    w.flush()?;
    Ok(())
}
