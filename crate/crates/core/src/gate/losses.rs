//! The five GATE loss terms, each written against [`Ops`] so the same
//! code serves training, evaluation and gradient checks.

use crate::nncore::{NnError, Ops};

use super::GateError;

/// `(1/N) Σ (y − ŷ)²` over an N×1 column.
pub fn loss_reg<O: Ops>(ops: &mut O, y: &O::V, y_hat: &O::V) -> Result<O::V, GateError> {
    if ops.value(y).rows() == 0 {
        return Err(GateError::EmptyBatch);
    }
    Ok(ops.mse(y, y_hat)?)
}

/// `(1/N) Σ ‖z − ẑ‖²`
pub fn loss_auto<O: Ops>(ops: &mut O, z: &O::V, z_hat: &O::V) -> Result<O::V, NnError> {
    ops.row_sq_dist_mean(z, z_hat)
}

/// `(1/N) Σ ‖m_s − m_t‖²`
pub fn loss_cons<O: Ops>(ops: &mut O, m_s: &O::V, m_t: &O::V) -> Result<O::V, NnError> {
    ops.row_sq_dist_mean(m_s, m_t)
}

/// `(1/N) Σ (y − ŷ′)²` where `ŷ′` comes from the mapped latent.
pub fn loss_map<O: Ops>(ops: &mut O, y: &O::V, y_mapped: &O::V) -> Result<O::V, GateError> {
    if ops.value(y).rows() == 0 {
        return Err(GateError::MissingLabels);
    }
    Ok(ops.mse(y, y_mapped)?)
}

/// Row `i·M + j` of the perturbed blocks belongs to pivot `i`.
pub fn pivot_index(pivots: usize, m: usize) -> Vec<usize> {
    (0..pivots).flat_map(|i| std::iter::repeat_n(i, m)).collect()
}

/// `(1/NM) Σ_i Σ_j ‖(m_i − m_ij)⁽ˢ⁾ − (m_i − m_ij)⁽ᵗ⁾‖²`.
///
/// `pivot_*` are N×d, `pert_*` are NM×d with perturbation `j` of pivot
/// `i` in row `i·M + j`.
pub fn loss_dis<O: Ops>(
    ops: &mut O,
    pivot_s: &O::V,
    pert_s: &O::V,
    pivot_t: &O::V,
    pert_t: &O::V,
    m: usize,
) -> Result<O::V, NnError> {
    let n = ops.value(pivot_s).rows();
    if ops.value(pert_s).rows() != n * m {
        return Err(NnError::ShapeMismatch {
            op: "loss_dis",
            left: ops.value(pivot_s).shape(),
            right: ops.value(pert_s).shape(),
        });
    }
    let index = pivot_index(n, m);
    let rep_s = ops.gather_rows(pivot_s, &index)?;
    let rep_t = ops.gather_rows(pivot_t, &index)?;
    let ds = ops.sub(&rep_s, pert_s)?;
    let dt = ops.sub(&rep_t, pert_t)?;
    ops.row_sq_dist_mean(&ds, &dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{Eval, Tensor};

    #[test]
    fn regression_examples() {
        let mut e = Eval;
        let l = loss_reg(&mut e, &Tensor::column(&[0.0]), &Tensor::column(&[3.0])).unwrap();
        assert_eq!(l.item(), 9.0);
        let l = loss_reg(&mut e, &Tensor::column(&[1.0, 2.0]), &Tensor::column(&[2.0, 4.0])).unwrap();
        assert_eq!(l.item(), 2.5);
        assert!(matches!(
            loss_reg(&mut e, &Tensor::zeros(0, 1), &Tensor::zeros(0, 1)),
            Err(GateError::EmptyBatch)
        ));
    }

    #[test]
    fn auto_and_cons_examples() {
        let mut e = Eval;
        let l = loss_auto(&mut e, &Tensor::row(&[1.0, 0.0]), &Tensor::row(&[0.0, 1.0])).unwrap();
        assert_eq!(l.item(), 2.0);
        let l = loss_cons(&mut e, &Tensor::row(&[1.0]), &Tensor::row(&[-1.0])).unwrap();
        assert_eq!(l.item(), 4.0);
    }

    #[test]
    fn map_with_zero_head_is_mean_square() {
        let mut e = Eval;
        let y = Tensor::column(&[1.0, -2.0, 3.0]);
        let l = loss_map(&mut e, &y, &Tensor::zeros(3, 1)).unwrap();
        assert!((l.item() - 14.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_loss_vanishes_for_identical_tasks() {
        let mut e = Eval;
        let piv = Tensor::from_vec(2, 2, vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        let pert = Tensor::from_vec(6, 2, (0..12).map(|k| k as f64 * 0.1).collect()).unwrap();
        let l = loss_dis(&mut e, &piv, &pert, &piv, &pert, 3).unwrap();
        assert_eq!(l.item(), 0.0);
        assert!(loss_dis(&mut e, &piv, &pert, &piv, &pert, 2).is_err());
    }
}
