use super::{NnError, Ops, Params, Tape, Var};

/// Largest relative disagreement between taped gradients and central
/// differences over every scalar in `params`:
/// `|a − n| / max(1e-8, |a| + |n|)`.
///
/// `f` must build a scalar on the tape it is given and be deterministic.
/// `params` is perturbed in place and restored exactly.
pub fn grad_check<F>(mut f: F, params: &mut Params, eps: f64) -> Result<f64, NnError>
where
    F: FnMut(&mut Tape, &Params) -> Result<Var, NnError>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, params)?;
    let grads = tape.backward(out)?;

    let mut eval = |params: &Params| -> Result<f64, NnError> {
        let mut tape = Tape::new();
        let out = f(&mut tape, params)?;
        Ok(tape.value(&out).item())
    };

    let mut worst = 0.0f64;
    for id in params.ids().collect::<Vec<_>>() {
        let n = params.get(id).data().len();
        for k in 0..n {
            let original = params.get(id).data()[k];
            params.get_mut(id).data_mut()[k] = original + eps;
            let up = eval(params)?;
            params.get_mut(id).data_mut()[k] = original - eps;
            let down = eval(params)?;
            params.get_mut(id).data_mut()[k] = original;

            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[k]);
            let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{rng_for, Mlp, Tensor};
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = rng_for(seed, "data");
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn linear_function_is_exact() {
        let mut p = Params::new();
        let id = p.add("x", random(1, 4, 1)).unwrap();
        let err = grad_check(
            |t, p| {
                let x = t.param(p, id);
                Ok(t.scale(&x, 2.5)).and_then(|y| {
                    let ones = t.constant(Tensor::filled(4, 1, 1.0));
                    t.matmul(&y, &ones)
                })
            },
            &mut p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn quadratic_function() {
        let mut p = Params::new();
        let id = p.add("x", random(3, 2, 2)).unwrap();
        let target = random(3, 2, 3);
        let err = grad_check(
            |t, p| {
                let x = t.param(p, id);
                let y = t.constant(target.clone());
                t.mse(&x, &y)
            },
            &mut p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn affine_weight_gradient_three_by_three() {
        let mut p = Params::new();
        let w = p.add("w", random(3, 3, 4)).unwrap();
        let x = random(1, 3, 5);
        let y = random(1, 3, 6);
        let err = grad_check(
            |t, p| {
                let xv = t.constant(x.clone());
                let wv = t.param(p, w);
                let out = t.matmul(&xv, &wv)?;
                let yv = t.constant(y.clone());
                t.mse(&out, &yv)
            },
            &mut p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn two_layer_mlp() {
        // 2→4→2 with biases: 8 + 4 + 8 + 2 = 22 scalars
        let mut p = Params::new();
        let mut rng = rng_for(9, "mlp");
        let mlp = Mlp::new(&mut p, "m", &[2, 4, 2], 0.01, &mut rng).unwrap();
        for id in p.ids().collect::<Vec<_>>() {
            let shape = p.get(id).shape();
            *p.get_mut(id) = random(shape.0, shape.1, 100 + id.0 as u64);
        }
        assert!(p.scalar_count() >= 20);
        let x = random(5, 2, 7);
        let y = random(5, 2, 8);
        let err = grad_check(
            |t, p| {
                let xv = t.constant(x.clone());
                let out = mlp.forward(t, p, &xv)?;
                let yv = t.constant(y.clone());
                t.mse(&out, &yv)
            },
            &mut p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn structural_ops_have_correct_gradients() {
        let mut p = Params::new();
        let a = p.add("a", random(4, 3, 11)).unwrap();
        let b = p.add("b", random(4, 2, 12)).unwrap();
        let err = grad_check(
            |t, p| {
                let av = t.param(p, a);
                let bv = t.param(p, b);
                let c = t.concat_cols(&av, &bv)?;
                let g = t.gather_rows(&c, &[3, 0, 0, 2, 1])?;
                let s = t.segment_sum(&g, &[0, 1, 1, 2, 0], 3)?;
                let m = t.segment_mean(&c, &[1, 1, 0, 2], 3)?;
                let d = t.sub(&s, &m)?;
                let d = t.scale(&d, 0.7);
                let l = t.leaky_relu(&d, 0.2);
                let z = t.constant(Tensor::zeros(3, 5));
                let r = t.row_sq_dist_mean(&l, &z)?;
                let q = t.mse(&l, &z)?;
                t.add(&r, &q)
            },
            &mut p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
