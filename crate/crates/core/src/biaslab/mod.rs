//! Joint versus independent pass probabilities for threshold events.

mod quad;
mod sim;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

pub use quad::integrate;
pub use sim::{cholesky, fp_inflation_sim, write_inflation_csv, InflationConfig, InflationPoint};

/// Integration tolerance for orthant probabilities.
pub const TOLERANCE: f64 = 1e-8;
const CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BiasError {
    #[error("empty sample")]
    EmptySample,
    #[error("correlation matrix is not positive semidefinite (pivot {pivot} = {value})")]
    NonPSDMatrix { pivot: usize, value: f64 },
    #[error("invalid correlation matrix: {0}")]
    BadCorrelation(String),
    #[error("correlation {0} outside [-1, 1]")]
    InvalidRho(f64),
    #[error("grid is not sorted")]
    UnsortedGrid,
    #[error("non-finite threshold {0}")]
    NonFiniteThreshold(f64),
    #[error("{0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Greater,
    Less,
}

/// `{X > t}`, `{Y < t}` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub variable: Variable,
    pub direction: Tail,
    pub threshold: f64,
}

impl EventSpec {
    pub fn new(variable: Variable, direction: Tail, threshold: f64) -> Result<Self, BiasError> {
        if !threshold.is_finite() {
            return Err(BiasError::NonFiniteThreshold(threshold));
        }
        Ok(EventSpec {
            variable,
            direction,
            threshold,
        })
    }

    pub fn holds(&self, x: f64, y: f64) -> bool {
        let v = match self.variable {
            Variable::X => x,
            Variable::Y => y,
        };
        match self.direction {
            Tail::Greater => v > self.threshold,
            Tail::Less => v < self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DependenceModel {
    /// Standard margins, correlation `rho`.
    BivariateGaussian { rho: f64 },
    EmpiricalSample(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub p_joint: f64,
    pub p_u: f64,
    pub p_v: f64,
    pub product: f64,
    pub cov_indicators: f64,
    /// `product − p_joint`; positive when independence overestimates.
    pub gap: f64,
    /// Standard error of the covariance estimate; zero for exact models.
    pub mc_std_err: f64,
}

/// Empirical marginals, joint and indicator covariance of `u` and `v`.
pub fn indicator_cov(samples: &[(f64, f64)], u: &EventSpec, v: &EventSpec) -> Result<BiasEstimate, BiasError> {
    if samples.is_empty() {
        return Err(BiasError::EmptySample);
    }
    let n = samples.len() as f64;
    let iu: Vec<f64> = samples.iter().map(|&(x, y)| f64::from(u8::from(u.holds(x, y)))).collect();
    let iv: Vec<f64> = samples.iter().map(|&(x, y)| f64::from(u8::from(v.holds(x, y)))).collect();
    let p_u = iu.iter().sum::<f64>() / n;
    let p_v = iv.iter().sum::<f64>() / n;
    let p_joint = iu.iter().zip(&iv).map(|(a, b)| a * b).sum::<f64>() / n;
    let centered: Vec<f64> = iu.iter().zip(&iv).map(|(a, b)| (a - p_u) * (b - p_v)).collect();
    let cov = centered.iter().sum::<f64>() / n;
    let var = centered.iter().map(|c| (c - cov).powi(2)).sum::<f64>() / n;
    let product = p_u * p_v;
    Ok(BiasEstimate {
        p_joint,
        p_u,
        p_v,
        product,
        cov_indicators: cov,
        gap: product - p_joint,
        mc_std_err: (var / n).sqrt(),
    })
}

/// `P(Z > t)` for a standard normal `Z`.
pub fn upper_tail(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

fn tail_prob(t: f64, d: Tail) -> f64 {
    match d {
        Tail::Greater => upper_tail(t),
        Tail::Less => upper_tail(-t),
    }
}

/// `P(X ⋈₁ t1, Y ⋈₂ t2)` for standard bivariate normal margins with
/// correlation `rho`. `Less` events are reflected onto `Greater` ones
/// (negating the variable, threshold and correlation), then the upper
/// orthant is integrated numerically on `[t, 8]²`.
pub fn gaussian_joint(t1: f64, d1: Tail, t2: f64, d2: Tail, rho: f64) -> Result<f64, BiasError> {
    if !(-1.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(BiasError::InvalidRho(rho));
    }
    for t in [t1, t2] {
        if !t.is_finite() {
            return Err(BiasError::NonFiniteThreshold(t));
        }
    }
    let (mut a, mut b, mut r) = (t1, t2, rho);
    if d1 == Tail::Less {
        a = -a;
        r = -r;
    }
    if d2 == Tail::Less {
        b = -b;
        r = -r;
    }
    Ok(upper_orthant(a, b, r))
}

fn upper_orthant(a: f64, b: f64, rho: f64) -> f64 {
    if rho >= 1.0 {
        return upper_tail(a.max(b));
    }
    if rho <= -1.0 {
        // X > a and −X > b.
        return (upper_tail(a) - upper_tail(-b)).max(0.0);
    }
    let lo_x = a.max(-CUTOFF);
    let lo_y = b.max(-CUTOFF);
    if lo_x >= CUTOFF || lo_y >= CUTOFF {
        return 0.0;
    }
    let s = (1.0 - rho * rho).sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s);
    let q = 0.5 / (1.0 - rho * rho);
    let inner_tol = 1e-13;
    quad::integrate(
        |x| {
            quad::integrate(
                |y| norm * (-(x * x - 2.0 * rho * x * y + y * y) * q).exp(),
                lo_y,
                CUTOFF,
                inner_tol,
            )
        },
        lo_x,
        CUTOFF,
        1e-12,
    )
    .clamp(0.0, 1.0)
}

/// Exact quantities under a dependence model.
pub fn estimate(model: &DependenceModel, u: &EventSpec, v: &EventSpec) -> Result<BiasEstimate, BiasError> {
    match model {
        DependenceModel::EmpiricalSample(s) => indicator_cov(s, u, v),
        DependenceModel::BivariateGaussian { rho } => {
            let r = if u.variable == v.variable { 1.0 } else { *rho };
            let (xu, yv) = if u.variable == Variable::Y && v.variable == Variable::X {
                (v, u)
            } else {
                (u, v)
            };
            let p_joint = gaussian_joint(xu.threshold, xu.direction, yv.threshold, yv.direction, r)?;
            let p_u = tail_prob(u.threshold, u.direction);
            let p_v = tail_prob(v.threshold, v.direction);
            let product = p_u * p_v;
            Ok(BiasEstimate {
                p_joint,
                p_u,
                p_v,
                product,
                cov_indicators: p_joint - product,
                gap: product - p_joint,
                mc_std_err: 0.0,
            })
        }
    }
}

/// Same-direction events under non-positive correlation:
/// `P(X>t1, Y>t2) ≤ P(X>t1)·P(Y>t2)` within [`TOLERANCE`].
pub fn case1_check(rho: f64, t1: f64, t2: f64) -> Result<bool, BiasError> {
    let joint = gaussian_joint(t1, Tail::Greater, t2, Tail::Greater, rho)?;
    Ok(joint <= upper_tail(t1) * upper_tail(t2) + TOLERANCE)
}

/// Opposing-direction events under non-negative correlation:
/// `P(X>t1, Y<t2) ≤ P(X>t1)·P(Y<t2)` within [`TOLERANCE`].
pub fn case2_check(rho: f64, t1: f64, t2: f64) -> Result<bool, BiasError> {
    let joint = gaussian_joint(t1, Tail::Greater, t2, Tail::Less, rho)?;
    Ok(joint <= upper_tail(t1) * upper_tail(-t2) + TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub rho: f64,
    pub p_joint: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityScan {
    pub t1: f64,
    pub t2: f64,
    pub rows: Vec<ScanRow>,
    /// Joint probability never drops by more than [`TOLERANCE`].
    pub monotone: bool,
}

/// Upper-orthant probability along a sorted correlation grid.
pub fn monotonicity_scan(t1: f64, t2: f64, grid: &[f64]) -> Result<MonotonicityScan, BiasError> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(BiasError::UnsortedGrid);
    }
    let product = upper_tail(t1) * upper_tail(t2);
    let rows = grid
        .iter()
        .map(|&rho| {
            Ok(ScanRow {
                rho,
                p_joint: gaussian_joint(t1, Tail::Greater, t2, Tail::Greater, rho)?,
                product,
            })
        })
        .collect::<Result<Vec<_>, BiasError>>()?;
    let monotone = rows.windows(2).all(|w| w[1].p_joint >= w[0].p_joint - TOLERANCE);
    Ok(MonotonicityScan { t1, t2, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ev(v: Variable, d: Tail, t: f64) -> EventSpec {
        EventSpec::new(v, d, t).unwrap()
    }

    fn closed_form(rho: f64) -> f64 {
        0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn empirical_examples() {
        let u = ev(Variable::X, Tail::Greater, 0.0);
        let v = ev(Variable::Y, Tail::Greater, 0.0);
        let e = indicator_cov(&[(1.0, 1.0); 4], &u, &v).unwrap();
        assert_eq!((e.p_joint, e.product, e.cov_indicators), (1.0, 1.0, 0.0));
        let e = indicator_cov(&[(1.0, -1.0), (-1.0, 1.0)], &u, &v).unwrap();
        assert_eq!((e.p_joint, e.product, e.cov_indicators), (0.0, 0.25, -0.25));
        assert_eq!(indicator_cov(&[], &u, &v), Err(BiasError::EmptySample));
        assert!(EventSpec::new(Variable::X, Tail::Less, f64::NAN).is_err());
    }

    #[test]
    fn identity_on_random_samples() {
        let mut rng = crate::nncore::rng_for(5, "bias");
        for _ in 0..200 {
            let n = rng.random_range(1..50);
            let s: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let u = ev(Variable::X, Tail::Greater, rng.random_range(-1.0..1.0));
            let v = ev(Variable::Y, Tail::Less, rng.random_range(-1.0..1.0));
            let e = indicator_cov(&s, &u, &v).unwrap();
            assert!((e.p_joint - e.product - e.cov_indicators).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_examples() {
        let g = |rho| gaussian_joint(0.0, Tail::Greater, 0.0, Tail::Greater, rho).unwrap();
        assert!((g(0.0) - 0.25).abs() < 1e-12);
        assert!((g(0.5) - 1.0 / 3.0).abs() < 1e-8);
        assert!((g(-0.5) - 1.0 / 6.0).abs() < 1e-8);
        for i in -9..=9 {
            let rho = i as f64 / 10.0;
            assert!((g(rho) - closed_form(rho)).abs() < 1e-8, "{rho}");
        }
        assert!((g(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(g(-1.0), 0.0);
        assert!(gaussian_joint(0.0, Tail::Greater, 0.0, Tail::Greater, 1.5).is_err());
    }

    #[test]
    fn independence_factorizes_off_zero() {
        for (t1, t2) in [(1.0, -0.5), (-2.0, 2.0), (0.3, 0.3)] {
            let joint = gaussian_joint(t1, Tail::Greater, t2, Tail::Less, 0.0).unwrap();
            assert!((joint - upper_tail(t1) * upper_tail(-t2)).abs() < 1e-10);
        }
    }

    #[test]
    fn reflections_are_consistent() {
        // P(X>a, Y<b) = P(X>a) − P(X>a, Y>b)
        let (a, b, r) = (0.4, -0.7, 0.6);
        let gt = gaussian_joint(a, Tail::Greater, b, Tail::Greater, r).unwrap();
        let lt = gaussian_joint(a, Tail::Greater, b, Tail::Less, r).unwrap();
        assert!((gt + lt - upper_tail(a)).abs() < 1e-10);
    }

    #[test]
    fn case_checks() {
        assert!(case1_check(-0.8, 1.0, -1.0).unwrap());
        assert!(case2_check(0.8, 0.0, 0.0).unwrap());
        let joint = gaussian_joint(0.7, Tail::Greater, -0.2, Tail::Greater, 0.0).unwrap();
        assert!((joint - upper_tail(0.7) * upper_tail(-0.2)).abs() < 1e-8);
        assert!(!case1_check(0.8, 0.0, 0.0).unwrap());
    }

    #[test]
    fn scan_examples() {
        let s = monotonicity_scan(0.0, 0.0, &[-0.9, 0.0, 0.9]).unwrap();
        let p: Vec<f64> = s.rows.iter().map(|r| r.p_joint).collect();
        assert!((p[0] - closed_form(-0.9)).abs() < 1e-8 && (p[2] - closed_form(0.9)).abs() < 1e-8);
        assert!((p[0] - 0.0718).abs() < 1e-4 && (p[1] - 0.25).abs() < 1e-10);
        assert!((p[0] + p[2] - 0.5).abs() < 1e-8);
        assert!(s.monotone);
        assert!(monotonicity_scan(0.0, 0.0, &[0.3]).unwrap().monotone);
        let grid: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
        assert!(monotonicity_scan(2.0, 2.0, &grid).unwrap().monotone);
        assert_eq!(monotonicity_scan(0.0, 0.0, &[0.5, 0.1]), Err(BiasError::UnsortedGrid));
    }

    #[test]
    fn gaussian_model_estimate() {
        let u = ev(Variable::X, Tail::Greater, 0.0);
        let v = ev(Variable::Y, Tail::Greater, 0.0);
        let e = estimate(&DependenceModel::BivariateGaussian { rho: -0.5 }, &u, &v).unwrap();
        assert!((e.p_joint - 1.0 / 6.0).abs() < 1e-8);
        assert!((e.gap - (0.25 - 1.0 / 6.0)).abs() < 1e-8);
        let same = estimate(&DependenceModel::BivariateGaussian { rho: 0.0 }, &u, &u).unwrap();
        assert!((same.p_joint - 0.5).abs() < 1e-15);
    }
}
