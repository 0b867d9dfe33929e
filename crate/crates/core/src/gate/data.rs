//! Multi-task datasets: CSV I/O, splits and the seeded synthetic tasks
//! used for desk-scale experiments.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoder::{featurize, FeaturizedGraph};
use crate::molgraph::random::{random_molecule, Handle, SkeletonSpec};
use crate::molgraph::{parse_smiles, write_smiles, BondOrder, Element, MolGraph};
use crate::nncore::rng_for;
use crate::stats;

use super::GateError;

/// Molecules with sparse per-task labels. `labels[i][t]` is molecule `i`,
/// task `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskDataset {
    pub task_names: Vec<String>,
    pub smiles: Vec<String>,
    pub features: Vec<FeaturizedGraph>,
    pub labels: Vec<Vec<Option<f64>>>,
}

impl MultiTaskDataset {
    pub fn new(task_names: Vec<String>) -> Self {
        MultiTaskDataset {
            task_names,
            smiles: Vec::new(),
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, g: &MolGraph, labels: Vec<Option<f64>>) {
        debug_assert_eq!(labels.len(), self.task_names.len());
        self.smiles.push(write_smiles(g));
        self.features.push(featurize(g));
        self.labels.push(labels);
    }

    pub fn len(&self) -> usize {
        self.smiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smiles.is_empty()
    }

    pub fn task_count(&self) -> usize {
        self.task_names.len()
    }

    pub fn labeled_count(&self, task: usize) -> usize {
        self.labels.iter().filter(|l| l[task].is_some()).count()
    }

    /// Drops labels of `task` on every molecule in `among` except a seeded
    /// random subset of size `keep`.
    pub fn limit_labels(&mut self, task: usize, keep: usize, among: &[usize], seed: u64) {
        let mut rng = rng_for(seed, &format!("labels.{task}"));
        let mut pool: Vec<usize> = among.iter().copied().filter(|&i| self.labels[i][task].is_some()).collect();
        pool.shuffle(&mut rng);
        for &i in pool.iter().skip(keep) {
            self.labels[i][task] = None;
        }
    }

    /// Reads `smiles,task_id,value` rows. Rows naming the same canonical
    /// molecule are merged; tasks are ordered by first appearance.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, GateError> {
        let mut reader = csv::Reader::from_reader(input);
        let mut task_index: HashMap<String, usize> = HashMap::new();
        let mut task_names = Vec::new();
        let mut mol_index: HashMap<String, usize> = HashMap::new();
        let mut graphs: Vec<MolGraph> = Vec::new();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |msg: &str| GateError::BadRecord {
                line: line + 2,
                message: msg.to_string(),
            };
            if record.len() != 3 {
                return Err(bad("expected smiles,task_id,value"));
            }
            let g = parse_smiles(&record[0]).map_err(|e| bad(&e.to_string()))?;
            let value: f64 = record[2].trim().parse().map_err(|_| bad("value is not a number"))?;
            if !value.is_finite() {
                return Err(bad("value is not finite"));
            }
            let task = *task_index.entry(record[1].to_string()).or_insert_with(|| {
                task_names.push(record[1].to_string());
                task_names.len() - 1
            });
            let canon = write_smiles(&g);
            let mol = *mol_index.entry(canon).or_insert_with(|| {
                graphs.push(g);
                rows.push(Vec::new());
                graphs.len() - 1
            });
            rows[mol].push((task, value));
        }
        let mut ds = MultiTaskDataset::new(task_names);
        for (g, entries) in graphs.iter().zip(rows) {
            let mut labels = vec![None; ds.task_count()];
            for (t, v) in entries {
                labels[t] = Some(v);
            }
            ds.push(g, labels);
        }
        Ok(ds)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GateError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["smiles", "task_id", "value"])?;
        for (smiles, labels) in self.smiles.iter().zip(&self.labels) {
            for (t, v) in labels.iter().enumerate() {
                if let Some(v) = v {
                    w.write_record([smiles.as_str(), self.task_names[t].as_str(), &format!("{v:e}")])?;
                }
            }
        }
        w.flush().map_err(|e| GateError::Io(e.to_string()))?;
        Ok(())
    }
}

/// Train/validation molecule indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Split {
    /// Seeded shuffle, last `val_fraction` of molecules held out.
    pub fn random(n: usize, val_fraction: f64, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_for(seed, "split"));
        let n_val = ((n as f64) * val_fraction).round() as usize;
        let val = idx.split_off(n - n_val.min(n));
        Split { train: idx, val }
    }

    pub fn all_train(n: usize) -> Self {
        Split {
            train: (0..n).collect(),
            val: Vec::new(),
        }
    }
}

/// Size-independent structural descriptors: element fractions, degree
/// profile, ring and unsaturation fractions.
pub fn descriptor_features(g: &MolGraph) -> Vec<f64> {
    let n = g.atom_count() as f64;
    let frac = |e: Element| g.atoms().iter().filter(|a| a.element == e).count() as f64 / n;
    let deg = |pred: &dyn Fn(usize) -> bool| (0..g.atom_count()).filter(|&i| pred(g.degree(i))).count() as f64 / n;
    let in_ring = {
        let mut mark = vec![false; g.atom_count()];
        for r in g.ring_info() {
            for &a in &r.atoms {
                mark[a] = true;
            }
        }
        mark.iter().filter(|&&m| m).count() as f64 / n
    };
    let bonds = g.bond_count().max(1) as f64;
    let unsat = g.bonds().iter().filter(|b| b.order != BondOrder::Single).count() as f64 / bonds;
    let hetero_c = (0..g.atom_count())
        .filter(|&i| {
            g.atom(i).element == Element::C
                && g.neighbors(i).iter().any(|&(j, _)| g.atom(j).element != Element::C)
        })
        .count() as f64
        / n;
    vec![
        frac(Element::C),
        frac(Element::O),
        frac(Element::N),
        frac(Element::Si),
        frac(Element::Cl),
        deg(&|d| d <= 1),
        deg(&|d| d >= 3),
        in_ring,
        unsat,
        hetero_c,
    ]
}

fn standardize(v: &mut [f64]) {
    let m = stats::mean(v);
    let s = stats::std_dev(v);
    for x in v.iter_mut() {
        *x = if s > 0.0 { (*x - m) / s } else { 0.0 };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `k` standardized latent factors over the molecules, mutually
/// orthogonal over this sample. Each factor mixes a linear and a squared
/// projection of the standardized descriptors.
pub fn latent_factors(graphs: &[MolGraph], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let desc: Vec<Vec<f64>> = graphs.iter().map(descriptor_features).collect();
    let width = desc.first().map_or(0, Vec::len);
    let mut cols: Vec<Vec<f64>> = (0..width).map(|c| desc.iter().map(|d| d[c]).collect()).collect();
    for c in &mut cols {
        standardize(c);
    }
    let mut rng = rng_for(seed, "factors");
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let w: Vec<f64> = (0..width).map(|_| rng.sample(StandardNormal)).collect();
        let u: Vec<f64> = (0..width).map(|_| rng.sample(StandardNormal)).collect();
        let mut f: Vec<f64> = (0..graphs.len())
            .map(|i| {
                let row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                let q = dot(&u, &row) / (width as f64).sqrt();
                dot(&w, &row) + 0.5 * q * q
            })
            .collect();
        standardize(&mut f);
        // Gram-Schmidt against earlier factors
        for prev in &factors {
            let proj = dot(&f, prev) / dot(prev, prev);
            for (x, p) in f.iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        standardize(&mut f);
        factors.push(f);
    }
    factors
}

/// Synthetic multi-task set over seeded random molecules. Task 0 follows
/// the shared factor; task `t ≥ 1` is `ρ·f₀ + √(1−ρ²)·f_t`, so every task
/// correlates with task 0 at about `ρ`. Gaussian noise of the given
/// standard deviation is added to every label. All labels are present.
pub fn make_synthetic_tasks(n_mols: usize, tasks: usize, rho: f64, noise: f64, seed: u64) -> MultiTaskDataset {
    let mut rng = rng_for(seed, "synthetic.mols");
    let spec = SkeletonSpec::default();
    let graphs: Vec<MolGraph> = (0..n_mols)
        .map(|_| {
            let handle = match rng.random_range(0..4) {
                0 => Handle::Alcohol,
                1 => Handle::Acid,
                _ => Handle::None,
            };
            random_molecule(&mut rng, &spec, handle)
        })
        .collect();
    let factors = latent_factors(&graphs, tasks.max(1), seed);
    let mut noise_rng = rng_for(seed, "synthetic.noise");
    let names = (0..tasks).map(|t| format!("task{t}")).collect();
    let mut ds = MultiTaskDataset::new(names);
    let side = (1.0 - rho * rho).max(0.0).sqrt();
    for (i, g) in graphs.iter().enumerate() {
        let labels = (0..tasks)
            .map(|t| {
                let clean = if t == 0 {
                    factors[0][i]
                } else {
                    rho * factors[0][i] + side * factors[t][i]
                };
                let eps: f64 = noise_rng.sample(StandardNormal);
                Some(clean + noise * eps)
            })
            .collect();
        ds.push(g, labels);
    }
    ds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(ds: &MultiTaskDataset, t: usize) -> Vec<f64> {
        ds.labels.iter().map(|l| l[t].unwrap()).collect()
    }

    #[test]
    fn perfect_correlation_without_noise() {
        let ds = make_synthetic_tasks(200, 2, 1.0, 0.0, 1);
        let r = stats::pearson(&column(&ds, 0), &column(&ds, 1)).unwrap();
        assert!(r > 0.999, "{r}");
    }

    #[test]
    fn zero_correlation() {
        let ds = make_synthetic_tasks(500, 2, 0.0, 0.0, 2);
        let r = stats::pearson(&column(&ds, 0), &column(&ds, 1)).unwrap();
        assert!(r.abs() < 0.1, "{r}");
    }

    #[test]
    fn intermediate_correlation_is_near_target() {
        let ds = make_synthetic_tasks(500, 3, 0.6, 0.0, 3);
        for t in 1..3 {
            let r = stats::pearson(&column(&ds, 0), &column(&ds, t)).unwrap();
            assert!((r - 0.6).abs() < 1e-9, "{r}");
        }
    }

    #[test]
    fn scarcity_mode() {
        let mut ds = make_synthetic_tasks(2100, 2, 0.9, 0.1, 4);
        let all: Vec<usize> = (0..ds.len()).collect();
        ds.limit_labels(1, 50, &all, 4);
        ds.limit_labels(0, 2000, &all, 4);
        assert_eq!(ds.labeled_count(0), 2000);
        assert_eq!(ds.labeled_count(1), 50);
    }

    #[test]
    fn csv_round_trip() {
        let mut ds = make_synthetic_tasks(12, 2, 0.5, 0.1, 5);
        ds.labels[3][1] = None;
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = MultiTaskDataset::read_csv(buf.as_slice()).unwrap();
        // duplicates from random generation merge, so compare by molecule
        for (i, s) in back.smiles.iter().enumerate() {
            let j = ds.smiles.iter().position(|x| x == s).unwrap();
            for t in 0..2 {
                if let (Some(a), Some(b)) = (back.labels[i][t], ds.labels[j][t]) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
        assert_eq!(back.task_names, vec!["task0", "task1"]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "smiles,task_id,value\nCCO,bp,1.0\nC(C,bp,2.0\n";
        match MultiTaskDataset::read_csv(text.as_bytes()) {
            Err(GateError::BadRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_is_seeded_partition() {
        let s = Split::random(100, 0.1, 9);
        assert_eq!(s.val.len(), 10);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, Split::random(100, 0.1, 9));
    }
}
