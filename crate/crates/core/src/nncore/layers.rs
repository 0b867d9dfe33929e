use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Ops, ParamId, Params, Tensor};

/// Affine map `y = x·W + b` with `W: in×out`, `b: 1×out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    /// Xavier-uniform weights, zero bias. Registers `{name}.w` and `{name}.b`.
    pub fn new<R: Rng + ?Sized>(
        params: &mut Params,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs).map(|_| rng.random_range(-bound..=bound)).collect();
        let w = params.add(format!("{name}.w"), Tensor::from_vec(inputs, outputs, data)?)?;
        let b = params.add(format!("{name}.b"), Tensor::zeros(1, outputs))?;
        Ok(Linear { w, b, inputs, outputs })
    }

    pub fn forward<O: Ops>(&self, ops: &mut O, params: &Params, x: &O::V) -> Result<O::V, NnError> {
        let w = ops.param(params, self.w);
        let b = ops.param(params, self.b);
        let xw = ops.matmul(x, &w)?;
        ops.add_bias(&xw, &b)
    }
}

/// Stack of affine layers with LeakyReLU between them. The last layer is
/// linear unless `activate_last` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub slope: f64,
    pub activate_last: bool,
}

impl Mlp {
    /// `widths` lists every layer width including input and output.
    pub fn new<R: Rng + ?Sized>(
        params: &mut Params,
        name: &str,
        widths: &[usize],
        slope: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(params, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mlp {
            layers,
            slope,
            activate_last: false,
        })
    }

    pub fn forward<O: Ops>(&self, ops: &mut O, params: &Params, x: &O::V) -> Result<O::V, NnError> {
        let mut h = x.clone();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(ops, params, &h)?;
            if i < last || self.activate_last {
                h = ops.leaky_relu(&h, self.slope);
            }
        }
        Ok(h)
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{rng_for, Eval, Tape};

    #[test]
    fn xavier_bounds_respected() {
        let mut p = Params::new();
        let mut rng = rng_for(0, "t");
        let l = Linear::new(&mut p, "l", 10, 6, &mut rng).unwrap();
        let bound = (6.0f64 / 16.0).sqrt();
        assert!(p.get(l.w).data().iter().all(|v| v.abs() <= bound));
        assert!(p.get(l.b).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tape_and_eval_agree_exactly() {
        let mut p = Params::new();
        let mut rng = rng_for(3, "mlp");
        let mlp = Mlp::new(&mut p, "m", &[4, 8, 3], 0.01, &mut rng).unwrap();
        let x = Tensor::from_vec(2, 4, vec![0.3, -1.0, 2.0, 0.5, -0.2, 0.1, 0.0, 1.5]).unwrap();
        let mut eval = Eval;
        let xe = eval.constant(x.clone());
        let ye = mlp.forward(&mut eval, &p, &xe).unwrap();
        let mut tape = Tape::new();
        let xt = tape.constant(x);
        let yt = mlp.forward(&mut tape, &p, &xt).unwrap();
        assert_eq!(&ye, tape.value(&yt));
        assert_eq!(ye.shape(), (2, 3));
    }
}
