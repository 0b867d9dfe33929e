//! Monte Carlo false-positive inflation as the number of criteria grows.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nncore::rng_for;

use super::BiasError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationConfig {
    /// `K×K` correlation of the true properties; the curve covers the
    /// leading `k×k` blocks for `k = 1..=K`.
    pub correlation: Vec<Vec<f64>>,
    /// Pass means `X_i > thresholds[i]`, in z-units.
    pub thresholds: Vec<f64>,
    /// Noise of each independent predictor.
    pub sigma_pred: f64,
    pub samples: usize,
    /// Independent streams; also the batch-means error estimate.
    pub batches: usize,
    pub seed: u64,
    pub threads: usize,
}

impl InflationConfig {
    /// Chain correlation: neighbours at `rho`, everything else zero.
    pub fn chain(k: usize, rho: f64, threshold: f64) -> Self {
        let correlation = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| match i.abs_diff(j) {
                        0 => 1.0,
                        1 => rho,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        InflationConfig {
            correlation,
            thresholds: vec![threshold; k],
            sigma_pred: 0.0,
            samples: 1_000_000,
            batches: 50,
            seed: 0,
            threads: 1,
        }
    }

    /// Every off-diagonal entry equal to `rho`.
    pub fn equicorrelated(k: usize, rho: f64, threshold: f64) -> Self {
        let mut c = Self::chain(k, 0.0, threshold);
        for (i, row) in c.correlation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j {
                    *v = rho;
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationPoint {
    pub k: usize,
    /// True joint feasibility.
    pub joint: f64,
    /// Product of true marginal pass rates.
    pub product: f64,
    pub gap: f64,
    pub gap_se: f64,
    /// Standard error of `gap(k) − gap(k−1)`, paired within batches.
    pub gap_step_se: Option<f64>,
    pub predicted_pass: f64,
    /// Share of predicted passes that truly fail some criterion.
    pub false_positive_fraction: f64,
    pub fp_se: f64,
}

/// Lower-triangular `L` with `L·Lᵀ = m`.
pub fn cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, BiasError> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d < -1e-10 {
                    return Err(BiasError::NonPSDMatrix { pivot: i, value: d });
                }
                l[i][i] = d.max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = (m[i][j] - s) / l[j][j];
            } else if (m[i][j] - s).abs() > 1e-10 {
                return Err(BiasError::NonPSDMatrix { pivot: j, value: 0.0 });
            }
        }
    }
    Ok(l)
}

fn validate(cfg: &InflationConfig) -> Result<(), BiasError> {
    let k = cfg.correlation.len();
    if k == 0 {
        return Err(BiasError::BadConfig("need at least one criterion".into()));
    }
    if cfg.thresholds.len() != k {
        return Err(BiasError::BadConfig(format!("{} thresholds for {k} criteria", cfg.thresholds.len())));
    }
    if cfg.batches < 2 || cfg.samples < cfg.batches {
        return Err(BiasError::BadConfig("need at least two batches and one sample per batch".into()));
    }
    if !(cfg.sigma_pred >= 0.0 && cfg.sigma_pred.is_finite()) {
        return Err(BiasError::BadConfig(format!("sigma_pred {}", cfg.sigma_pred)));
    }
    for (i, row) in cfg.correlation.iter().enumerate() {
        if row.len() != k {
            return Err(BiasError::BadCorrelation(format!("row {i} has {} entries", row.len())));
        }
        if (row[i] - 1.0).abs() > 1e-12 {
            return Err(BiasError::BadCorrelation(format!("diagonal entry {i} is {}", row[i])));
        }
        for (j, &v) in row.iter().enumerate() {
            if !(-1.0..=1.0).contains(&v) || (v - cfg.correlation[j][i]).abs() > 1e-12 {
                return Err(BiasError::BadCorrelation(format!("entry ({i},{j})")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
struct BatchCounts {
    n: u64,
    marginal: Vec<u64>,
    joint: Vec<u64>,
    predicted: Vec<u64>,
    false_pos: Vec<u64>,
}

fn run_batch(cfg: &InflationConfig, l: &[Vec<f64>], batch: usize, n: usize) -> BatchCounts {
    let k = l.len();
    let mut rng = rng_for(cfg.seed, &format!("inflation.{batch}"));
    let mut c = BatchCounts {
        n: n as u64,
        marginal: vec![0; k],
        joint: vec![0; k],
        predicted: vec![0; k],
        false_pos: vec![0; k],
    };
    let mut z = vec![0.0; k];
    let mut x = vec![0.0; k];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (i, xi) in x.iter_mut().enumerate().take(k) {
            *xi = (0..=i).map(|j| l[i][j] * z[j]).sum();
        }
        let mut all_true = true;
        let mut all_pred = true;
        for (i, (&xi, &t)) in x.iter().zip(&cfg.thresholds).enumerate().take(k) {
            let truth = xi > t;
            let pred = if cfg.sigma_pred > 0.0 {
                let e: f64 = rng.sample(StandardNormal);
                xi + cfg.sigma_pred * e > t
            } else {
                truth
            };
            c.marginal[i] += u64::from(truth);
            all_true &= truth;
            all_pred &= pred;
            c.joint[i] += u64::from(all_true);
            c.predicted[i] += u64::from(all_pred);
            c.false_pos[i] += u64::from(all_pred && !all_true);
        }
    }
    c
}

fn gap_of(c: &BatchCounts, k: usize) -> f64 {
    let n = c.n as f64;
    let product: f64 = c.marginal[..k].iter().map(|&m| m as f64 / n).product();
    product - c.joint[k - 1] as f64 / n
}

fn batch_se(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Simulates true properties `X ~ N(0, Σ)` and noisy independent
/// predictors `X̂_i = X_i + σ·ε_i`, then reports the independence-product
/// estimate against the true joint pass rate, and the false-positive
/// share among predicted passes, for each leading subset of criteria.
pub fn fp_inflation_sim(cfg: &InflationConfig) -> Result<Vec<InflationPoint>, BiasError> {
    validate(cfg)?;
    let l = cholesky(&cfg.correlation)?;
    let k_max = l.len();
    let sizes: Vec<usize> = (0..cfg.batches)
        .map(|b| cfg.samples / cfg.batches + usize::from(b < cfg.samples % cfg.batches))
        .collect();

    let threads = cfg.threads.clamp(1, cfg.batches);
    let mut results: Vec<BatchCounts> = vec![BatchCounts::default(); cfg.batches];
    std::thread::scope(|scope| {
        let chunk = cfg.batches.div_ceil(threads);
        for (t, slots) in results.chunks_mut(chunk).enumerate() {
            let l = &l;
            let sizes = &sizes;
            scope.spawn(move || {
                for (i, slot) in slots.iter_mut().enumerate() {
                    let b = t * chunk + i;
                    *slot = run_batch(cfg, l, b, sizes[b]);
                }
            });
        }
    });

    let mut total = BatchCounts {
        n: 0,
        marginal: vec![0; k_max],
        joint: vec![0; k_max],
        predicted: vec![0; k_max],
        false_pos: vec![0; k_max],
    };
    for r in &results {
        total.n += r.n;
        for i in 0..k_max {
            total.marginal[i] += r.marginal[i];
            total.joint[i] += r.joint[i];
            total.predicted[i] += r.predicted[i];
            total.false_pos[i] += r.false_pos[i];
        }
    }
    let n = total.n as f64;
    Ok((1..=k_max)
        .map(|k| {
            let product: f64 = total.marginal[..k].iter().map(|&m| m as f64 / n).product();
            let joint = total.joint[k - 1] as f64 / n;
            let per_batch: Vec<f64> = results.iter().map(|r| gap_of(r, k)).collect();
            let gap_step_se = (k > 1).then(|| {
                let steps: Vec<f64> = results.iter().map(|r| gap_of(r, k) - gap_of(r, k - 1)).collect();
                batch_se(&steps)
            });
            let predicted = total.predicted[k - 1] as f64;
            let fp = if predicted > 0.0 {
                total.false_pos[k - 1] as f64 / predicted
            } else {
                0.0
            };
            InflationPoint {
                k,
                joint,
                product,
                gap: product - joint,
                gap_se: batch_se(&per_batch),
                gap_step_se,
                predicted_pass: predicted / n,
                false_positive_fraction: fp,
                fp_se: if predicted > 0.0 {
                    (fp * (1.0 - fp) / predicted).sqrt()
                } else {
                    0.0
                },
            }
        })
        .collect())
}

pub fn write_inflation_csv<W: Write>(out: W, points: &[InflationPoint]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k",
        "joint",
        "product",
        "gap",
        "gap_se",
        "gap_step_se",
        "predicted_pass",
        "false_positive_fraction",
        "fp_se",
    ])?;
    for p in points {
        w.write_record([
            p.k.to_string(),
            format!("{:.8}", p.joint),
            format!("{:.8}", p.product),
            format!("{:.8}", p.gap),
            format!("{:.8}", p.gap_se),
            p.gap_step_se.map_or_else(String::new, |v| format!("{v:.8}")),
            format!("{:.8}", p.predicted_pass),
            format!("{:.8}", p.false_positive_fraction),
            format!("{:.8}", p.fp_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biaslab::{gaussian_joint, upper_tail, Tail};

    #[test]
    fn cholesky_reconstructs() {
        let m = InflationConfig::chain(4, -0.3, 0.0).correlation;
        let l = cholesky(&m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let v: f64 = (0..4).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - m[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equicorrelated_negative_is_not_psd_beyond_limit() {
        assert!(cholesky(&InflationConfig::equicorrelated(4, -0.3, 0.0).correlation).is_ok());
        let err = cholesky(&InflationConfig::equicorrelated(5, -0.3, 0.0).correlation).unwrap_err();
        assert!(matches!(err, BiasError::NonPSDMatrix { .. }));
        let mut cfg = InflationConfig::equicorrelated(6, -0.3, 0.0);
        cfg.samples = 100;
        assert!(matches!(fp_inflation_sim(&cfg), Err(BiasError::NonPSDMatrix { .. })));
    }

    #[test]
    fn single_criterion_has_no_gap() {
        let mut cfg = InflationConfig::chain(1, 0.0, 0.5);
        cfg.samples = 10_000;
        let p = fp_inflation_sim(&cfg).unwrap();
        assert_eq!(p[0].gap, 0.0);
        assert_eq!(p[0].product, p[0].joint);
    }

    #[test]
    fn perfect_predictors_have_no_false_positives() {
        let mut cfg = InflationConfig::chain(4, 0.0, 0.0);
        cfg.samples = 20_000;
        for p in fp_inflation_sim(&cfg).unwrap() {
            assert_eq!(p.false_positive_fraction, 0.0);
        }
        cfg.sigma_pred = 0.5;
        let p = fp_inflation_sim(&cfg).unwrap();
        assert!(p.iter().all(|p| p.false_positive_fraction > 0.0));
        assert!(p[3].false_positive_fraction > p[0].false_positive_fraction);
    }

    #[test]
    fn negative_pair_gap_matches_oracle() {
        let mut cfg = InflationConfig::chain(2, -0.5, 0.0);
        cfg.samples = 1_000_000;
        let p = fp_inflation_sim(&cfg).unwrap();
        let exact = upper_tail(0.0).powi(2) - gaussian_joint(0.0, Tail::Greater, 0.0, Tail::Greater, -0.5).unwrap();
        assert!(p[1].gap > 5.0 * p[1].gap_se);
        assert!((p[1].gap - exact).abs() < 5.0 * p[1].gap_se, "{} vs {exact}", p[1].gap);
    }

    #[test]
    fn threads_do_not_change_results() {
        let mut cfg = InflationConfig::chain(3, -0.3, 0.0);
        cfg.samples = 5_000;
        let a = fp_inflation_sim(&cfg).unwrap();
        cfg.threads = 3;
        assert_eq!(a, fp_inflation_sim(&cfg).unwrap());
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = InflationConfig::chain(2, 0.2, 0.0);
        cfg.thresholds.pop();
        assert!(fp_inflation_sim(&cfg).is_err());
        let mut cfg = InflationConfig::chain(2, 0.2, 0.0);
        cfg.correlation[0][1] = 0.5;
        assert!(matches!(fp_inflation_sim(&cfg), Err(BiasError::BadCorrelation(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut cfg = InflationConfig::chain(2, -0.3, 0.0);
        cfg.samples = 1_000;
        let mut buf = Vec::new();
        write_inflation_csv(&mut buf, &fp_inflation_sim(&cfg).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("k,joint,product,gap,gap_se"));
    }
}
