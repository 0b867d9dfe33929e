use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoder::{FeaturizedGraph, GraphBatch};
use crate::nncore::{rng_for, AdamConfig, NnError, OptimizerState, Tape, Tensor};
use crate::stats;

use super::{loss_total, GateError, GateModel, LossWeights, ModelConfig, MultiTaskDataset, Scaler, Split, StepBatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub perturbations: usize,
    pub sigma: f64,
    pub weights: LossWeights,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            batch_size: 512,
            optimizer: AdamConfig::adamw(5e-5, 0.01),
            perturbations: 10,
            sigma: 0.05,
            weights: LossWeights::UNIT,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

/// Per-epoch record, written as one JSON line in metrics logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Step-averaged weighted total.
    pub loss: f64,
    pub reg: f64,
    pub auto: f64,
    pub cons: f64,
    pub map: f64,
    pub dis: f64,
    /// Validation Pearson r per task, in task units.
    pub val_pearson: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GateModel,
    pub history: Vec<EpochMetrics>,
}

/// Called after every epoch with its metrics and the current model.
pub type Observer<'a> = &'a mut dyn FnMut(&EpochMetrics, &GateModel);

/// Trains GATE on every task of `dataset`.
pub fn train_gate(
    dataset: &MultiTaskDataset,
    split: &Split,
    config: &TrainConfig,
    observer: Option<Observer<'_>>,
) -> Result<TrainOutcome, GateError> {
    let tasks: Vec<usize> = (0..dataset.task_count()).collect();
    let model = GateModel::new(config.model, dataset.task_names.clone(), true, config.seed)?;
    fit(model, dataset, &tasks, split, config, config.weights, observer)
}

/// Single-task baseline for one task of `dataset`: shared-shape encoder,
/// transfer and head, no inverse net, regression loss only.
pub fn train_stl(
    dataset: &MultiTaskDataset,
    task: usize,
    split: &Split,
    config: &TrainConfig,
    observer: Option<Observer<'_>>,
) -> Result<TrainOutcome, GateError> {
    if task >= dataset.task_count() {
        return Err(GateError::UnknownTask(task.to_string()));
    }
    let model = GateModel::new(config.model, vec![dataset.task_names[task].clone()], false, config.seed)?;
    fit(model, dataset, &[task], split, config, LossWeights::ZERO, observer)
}

fn fit(
    mut model: GateModel,
    dataset: &MultiTaskDataset,
    tasks: &[usize],
    split: &Split,
    config: &TrainConfig,
    weights: LossWeights,
    mut observer: Option<Observer<'_>>,
) -> Result<TrainOutcome, GateError> {
    let labeled = |i: usize| tasks.iter().any(|&t| dataset.labels[i][t].is_some());
    let train: Vec<usize> = split.train.iter().copied().filter(|&i| labeled(i)).collect();
    if tasks.is_empty() || train.is_empty() {
        return Err(GateError::NotEnoughTasks);
    }

    model.scalers = tasks
        .iter()
        .map(|&t| {
            let values: Vec<f64> = train.iter().filter_map(|&i| dataset.labels[i][t]).collect();
            Scaler::fit(&values)
        })
        .collect();

    let d = model.latent_dim();
    let batch_size = config.batch_size.max(1).min(train.len());
    let mut opt = OptimizerState::new(config.optimizer, &model.params);
    let mut shuffle_rng = rng_for(config.seed, "shuffle");
    let mut pair_rng = rng_for(config.seed, "pairs");
    let mut noise_rng = rng_for(config.seed, "perturb");
    let mut history = Vec::with_capacity(config.epochs);
    let mut order = train.clone();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sums = [0.0f64; 6];
        let mut steps = 0usize;
        for chunk in order.chunks(batch_size) {
            let refs: Vec<&FeaturizedGraph> = chunk.iter().map(|&i| &dataset.features[i]).collect();
            let labels: Vec<(Vec<usize>, Tensor)> = tasks
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let mut rows = Vec::new();
                    let mut ys = Vec::new();
                    for (r, &i) in chunk.iter().enumerate() {
                        if let Some(y) = dataset.labels[i][t] {
                            rows.push(r);
                            ys.push(model.scalers[k].forward(y));
                        }
                    }
                    (rows, Tensor::column(&ys))
                })
                .collect();
            let pair = sample_pair(&labels, &mut pair_rng);
            let noise = if weights.delta != 0.0 {
                let n = chunk.len() * config.perturbations * d;
                let draws: Vec<f64> = (0..n).map(|_| noise_rng.sample(StandardNormal)).collect();
                Some(Tensor::from_vec(chunk.len() * config.perturbations, d, draws)?)
            } else {
                None
            };
            let batch = StepBatch {
                graphs: GraphBatch::new(&refs),
                labels,
                noise,
            };

            let mut tape = Tape::new();
            let (loss, br) = loss_total(
                &mut tape,
                &model,
                &model.params,
                &batch,
                pair,
                &weights,
                config.sigma,
                config.perturbations,
            )?;
            if !br.total.is_finite() {
                return Err(GateError::DivergenceDetected { epoch });
            }
            let grads = match tape.backward(loss) {
                Ok(g) => g,
                Err(NnError::NonFinite(_)) => return Err(GateError::DivergenceDetected { epoch }),
                Err(e) => return Err(e.into()),
            };
            opt.step(&mut model.params, &grads)?;
            for (s, v) in sums.iter_mut().zip([br.total, br.reg, br.auto, br.cons, br.map, br.dis]) {
                *s += v;
            }
            steps += 1;
        }
        let avg = |k: usize| sums[k] / steps as f64;
        let metrics = EpochMetrics {
            epoch,
            loss: avg(0),
            reg: avg(1),
            auto: avg(2),
            cons: avg(3),
            map: avg(4),
            dis: avg(5),
            val_pearson: validation_pearson(&model, dataset, tasks, &split.val)?,
        };
        if let Some(obs) = observer.as_mut() {
            obs(&metrics, &model);
        }
        history.push(metrics);
    }
    Ok(TrainOutcome { model, history })
}

/// Ordered pair of distinct tasks, drawn among tasks labeled in the batch
/// when at least two are, otherwise among all tasks. A single-task model
/// always gets `(0, 0)`.
fn sample_pair<R: Rng>(labels: &[(Vec<usize>, Tensor)], rng: &mut R) -> (usize, usize) {
    let n = labels.len();
    if n < 2 {
        return (0, 0);
    }
    let present: Vec<usize> = (0..n).filter(|&t| !labels[t].0.is_empty()).collect();
    let pool: Vec<usize> = if present.len() >= 2 { present } else { (0..n).collect() };
    let s = rng.random_range(0..pool.len());
    let mut t = rng.random_range(0..pool.len() - 1);
    if t >= s {
        t += 1;
    }
    (pool[s], pool[t])
}

fn validation_pearson(
    model: &GateModel,
    dataset: &MultiTaskDataset,
    tasks: &[usize],
    val: &[usize],
) -> Result<Vec<Option<f64>>, GateError> {
    if val.is_empty() {
        return Ok(vec![None; tasks.len()]);
    }
    let graphs: Vec<FeaturizedGraph> = val.iter().map(|&i| dataset.features[i].clone()).collect();
    let pred = model.predict_batch(&graphs)?;
    Ok(tasks
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (r, &i) in val.iter().enumerate() {
                if let Some(y) = dataset.labels[i][t] {
                    a.push(y);
                    b.push(pred.get(r, k));
                }
            }
            stats::pearson(&a, &b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;
    use crate::gate::make_synthetic_tasks;

    fn small_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 32,
            optimizer: AdamConfig::adamw(1e-3, 0.01),
            perturbations: 3,
            model: ModelConfig {
                encoder: EncoderConfig {
                    hidden: 16,
                    latent: 8,
                    ..Default::default()
                },
                head_hidden: 8,
                slope: 0.01,
            },
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn pair_sampling_prefers_labeled_tasks() {
        let mut rng = rng_for(0, "t");
        let labels = vec![
            (vec![0], Tensor::column(&[1.0])),
            (vec![], Tensor::column(&[])),
            (vec![1], Tensor::column(&[1.0])),
        ];
        for _ in 0..50 {
            let (s, t) = sample_pair(&labels, &mut rng);
            assert_ne!(s, t);
            assert!(s != 1 && t != 1);
        }
    }

    #[test]
    fn gate_training_reduces_loss_and_is_seeded() {
        let ds = make_synthetic_tasks(120, 2, 0.8, 0.05, 1);
        let split = Split::random(ds.len(), 0.1, 1);
        let cfg = small_config(30);
        let a = train_gate(&ds, &split, &cfg, None).unwrap();
        let first = a.history.first().unwrap().loss;
        let last = a.history.last().unwrap().loss;
        assert!(last <= 0.5 * first, "{first} -> {last}");
        let b = train_gate(&ds, &split, &cfg, None).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        assert!(a.history.iter().all(|m| m.auto > 0.0 && m.dis >= 0.0));
    }

    #[test]
    fn zero_weight_single_task_gate_matches_stl() {
        let mut ds = make_synthetic_tasks(60, 1, 0.0, 0.05, 2);
        ds.task_names = vec!["only".into()];
        let split = Split::random(ds.len(), 0.1, 2);
        let mut cfg = small_config(5);
        cfg.weights = LossWeights::ZERO;
        let g = train_gate(&ds, &split, &cfg, None).unwrap();
        let s = train_stl(&ds, 0, &split, &cfg, None).unwrap();
        let bits = |h: &[EpochMetrics]| h.iter().map(|m| m.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&g.history), bits(&s.history));
    }

    #[test]
    fn observer_sees_every_epoch() {
        let ds = make_synthetic_tasks(40, 2, 0.5, 0.1, 3);
        let mut seen = Vec::new();
        let mut obs = |m: &EpochMetrics, _: &GateModel| seen.push(m.epoch);
        train_gate(&ds, &Split::all_train(ds.len()), &small_config(3), Some(&mut obs)).unwrap();
        assert_eq!(seen, vec![1, 2, 3]);
    }
}
