use std::collections::{BTreeMap, HashMap};

use super::tensor::{self, Tensor};
use super::{NnError, ParamId, Params};

/// Operations a model forward pass may use.
///
/// `Tape` records every result for a later backward pass; `Eval` just
/// computes. Both call the same kernels, so values agree bit for bit.
pub trait Ops {
    type V: Clone;

    fn constant(&mut self, t: Tensor) -> Self::V;
    fn param(&mut self, params: &Params, id: ParamId) -> Self::V;
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a Tensor;

    fn matmul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
    /// Adds a 1×cols row to every row of `x`.
    fn add_bias(&mut self, x: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
    fn leaky_relu(&mut self, x: &Self::V, slope: f64) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
    fn scale(&mut self, x: &Self::V, s: f64) -> Self::V;
    fn concat_cols(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
    fn gather_rows(&mut self, x: &Self::V, index: &[usize]) -> Result<Self::V, NnError>;
    fn segment_sum(&mut self, x: &Self::V, segment: &[usize], segments: usize) -> Result<Self::V, NnError>;
    /// Segment mean; empty segments give zero rows.
    fn segment_mean(&mut self, x: &Self::V, segment: &[usize], segments: usize) -> Result<Self::V, NnError>;
    /// Mean of squared elementwise differences, as a 1×1.
    fn mse(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
    /// `(1/rows) Σ_r ‖a_r − b_r‖²`, as a 1×1.
    fn row_sq_dist_mean(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V, NnError>;
}

pub(crate) fn segment_mean_kernel(x: &Tensor, segment: &[usize], segments: usize) -> Result<(Tensor, Vec<f64>), NnError> {
    let sum = tensor::segment_sum(x, segment, segments)?;
    let inv: Vec<f64> = tensor::segment_counts(segment, segments)
        .into_iter()
        .map(|c| if c > 0.0 { 1.0 / c } else { 0.0 })
        .collect();
    Ok((tensor::scale_rows(&sum, &inv), inv))
}

fn mse_kernel(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    a.check_same(b, "mse")?;
    let n = a.data().len();
    if n == 0 {
        return Ok(Tensor::scalar(0.0));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(Tensor::scalar(s / n as f64))
}

fn row_sq_kernel(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    a.check_same(b, "row_sq_dist_mean")?;
    if a.rows() == 0 {
        return Ok(Tensor::scalar(0.0));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(Tensor::scalar(s / a.rows() as f64))
}

/// Eager evaluator for inference. Records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl Ops for Eval {
    type V = Tensor;

    fn constant(&mut self, t: Tensor) -> Tensor {
        t
    }
    fn param(&mut self, params: &Params, id: ParamId) -> Tensor {
        params.get(id).clone()
    }
    fn value<'a>(&'a self, v: &'a Tensor) -> &'a Tensor {
        v
    }
    fn matmul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        tensor::matmul(a, b)
    }
    fn add_bias(&mut self, x: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        tensor::add_bias(x, b)
    }
    fn leaky_relu(&mut self, x: &Tensor, slope: f64) -> Tensor {
        tensor::leaky_relu(x, slope)
    }
    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        tensor::zip(a, b, "add", |x, y| x + y)
    }
    fn sub(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        tensor::zip(a, b, "sub", |x, y| x - y)
    }
    fn scale(&mut self, x: &Tensor, s: f64) -> Tensor {
        x.map(|v| v * s)
    }
    fn concat_cols(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        tensor::concat_cols(a, b)
    }
    fn gather_rows(&mut self, x: &Tensor, index: &[usize]) -> Result<Tensor, NnError> {
        tensor::gather_rows(x, index)
    }
    fn segment_sum(&mut self, x: &Tensor, segment: &[usize], segments: usize) -> Result<Tensor, NnError> {
        tensor::segment_sum(x, segment, segments)
    }
    fn segment_mean(&mut self, x: &Tensor, segment: &[usize], segments: usize) -> Result<Tensor, NnError> {
        Ok(segment_mean_kernel(x, segment, segments)?.0)
    }
    fn mse(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        mse_kernel(a, b)
    }
    fn row_sq_dist_mean(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
        row_sq_kernel(a, b)
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    AddBias(usize, usize),
    LeakyRelu(usize, f64),
    Add(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    Concat(usize, usize),
    Gather(usize, Vec<usize>),
    SegmentSum(usize, Vec<usize>),
    SegmentMean(usize, Vec<usize>, Vec<f64>),
    Mse(usize, usize),
    RowSqDistMean(usize, usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Per-step computation record. Build it with a forward pass, call
/// [`Tape::backward`] once, then drop it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, usize>,
    consumed: bool,
    non_finite: Option<usize>,
}

/// Parameter gradients from one backward pass. Parameters the loss does
/// not depend on are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.by_param.iter().map(|(&k, v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

fn accumulate(adj: &mut [Option<Tensor>], i: usize, t: Tensor) {
    match &mut adj[i] {
        Some(x) => x.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        let id = self.nodes.len();
        if cfg!(debug_assertions) && self.non_finite.is_none() && !value.all_finite() {
            self.non_finite = Some(id);
        }
        self.nodes.push(Node { op, value, needs_grad });
        Var(id)
    }

    fn ng(&self, v: &Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn val(&self, v: &Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Reverse sweep from a 1×1 node.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::StaleTape);
        }
        self.consumed = true;
        if let Some(node) = self.non_finite {
            return Err(NnError::NonFinite(node));
        }
        let shape = self.nodes[loss.0].value.shape();
        if shape != (1, 1) {
            return Err(NnError::NotScalar(shape));
        }

        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::scalar(1.0));
        let mut grads = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let need = |j: usize| self.nodes[j].needs_grad;
            let value = |j: usize| &self.nodes[j].value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    grads.by_param.insert(*id, g);
                }
                Op::MatMul(a, b) => {
                    if need(*a) {
                        accumulate(&mut adj, *a, tensor::matmul_nt(&g, value(*b)));
                    }
                    if need(*b) {
                        accumulate(&mut adj, *b, tensor::matmul_tn(value(*a), &g));
                    }
                }
                Op::AddBias(x, b) => {
                    if need(*b) {
                        let mut gb = Tensor::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (o, &v) in gb.data_mut().iter_mut().zip(g.row_slice(r)) {
                                *o += v;
                            }
                        }
                        accumulate(&mut adj, *b, gb);
                    }
                    if need(*x) {
                        accumulate(&mut adj, *x, g);
                    }
                }
                Op::LeakyRelu(x, slope) => {
                    let xv = value(*x);
                    let mut gx = g;
                    for (o, &v) in gx.data_mut().iter_mut().zip(xv.data()) {
                        if v <= 0.0 {
                            *o *= slope;
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Add(a, b) => {
                    if need(*a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if need(*b) {
                        accumulate(&mut adj, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if need(*b) {
                        accumulate(&mut adj, *b, g.map(|v| -v));
                    }
                    if need(*a) {
                        accumulate(&mut adj, *a, g);
                    }
                }
                Op::Scale(x, s) => {
                    let s = *s;
                    accumulate(&mut adj, *x, g.map(|v| v * s));
                }
                Op::Concat(a, b) => {
                    let ca = value(*a).cols();
                    let cb = value(*b).cols();
                    if need(*a) {
                        let mut ga = Tensor::zeros(g.rows(), ca);
                        for r in 0..g.rows() {
                            ga.row_slice_mut(r).copy_from_slice(&g.row_slice(r)[..ca]);
                        }
                        accumulate(&mut adj, *a, ga);
                    }
                    if need(*b) {
                        let mut gb = Tensor::zeros(g.rows(), cb);
                        for r in 0..g.rows() {
                            gb.row_slice_mut(r).copy_from_slice(&g.row_slice(r)[ca..]);
                        }
                        accumulate(&mut adj, *b, gb);
                    }
                }
                Op::Gather(x, index) => {
                    let gx = tensor::segment_sum(&g, index, value(*x).rows())?;
                    accumulate(&mut adj, *x, gx);
                }
                Op::SegmentSum(x, segment) => {
                    let gx = tensor::gather_rows(&g, segment)?;
                    accumulate(&mut adj, *x, gx);
                }
                Op::SegmentMean(x, segment, inv) => {
                    let scaled = tensor::scale_rows(&g, inv);
                    let gx = tensor::gather_rows(&scaled, segment)?;
                    accumulate(&mut adj, *x, gx);
                }
                Op::Mse(a, b) | Op::RowSqDistMean(a, b) => {
                    let (av, bv) = (value(*a), value(*b));
                    let denom = match node.op {
                        Op::Mse(..) => av.data().len(),
                        _ => av.rows(),
                    };
                    if denom == 0 {
                        continue;
                    }
                    let c = 2.0 * g.item() / denom as f64;
                    let diff = tensor::zip(av, bv, "sq", |x, y| c * (x - y))?;
                    if need(*b) {
                        accumulate(&mut adj, *b, diff.map(|v| -v));
                    }
                    if need(*a) {
                        accumulate(&mut adj, *a, diff);
                    }
                }
            }
        }
        Ok(grads)
    }
}

impl Ops for Tape {
    type V = Var;

    fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    fn param(&mut self, params: &Params, id: ParamId) -> Var {
        if let Some(&node) = self.param_nodes.get(&id) {
            return Var(node);
        }
        let v = self.push(Op::Param(id), params.get(id).clone(), true);
        self.param_nodes.insert(id, v.0);
        v
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        self.val(v)
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var, NnError> {
        let out = tensor::matmul(self.val(a), self.val(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::MatMul(a.0, b.0), out, ng))
    }

    fn add_bias(&mut self, x: &Var, b: &Var) -> Result<Var, NnError> {
        let out = tensor::add_bias(self.val(x), self.val(b))?;
        let ng = self.ng(x) || self.ng(b);
        Ok(self.push(Op::AddBias(x.0, b.0), out, ng))
    }

    fn leaky_relu(&mut self, x: &Var, slope: f64) -> Var {
        let out = tensor::leaky_relu(self.val(x), slope);
        let ng = self.ng(x);
        self.push(Op::LeakyRelu(x.0, slope), out, ng)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var, NnError> {
        let out = tensor::zip(self.val(a), self.val(b), "add", |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Add(a.0, b.0), out, ng))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var, NnError> {
        let out = tensor::zip(self.val(a), self.val(b), "sub", |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Sub(a.0, b.0), out, ng))
    }

    fn scale(&mut self, x: &Var, s: f64) -> Var {
        let out = self.val(x).map(|v| v * s);
        let ng = self.ng(x);
        self.push(Op::Scale(x.0, s), out, ng)
    }

    fn concat_cols(&mut self, a: &Var, b: &Var) -> Result<Var, NnError> {
        let out = tensor::concat_cols(self.val(a), self.val(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Concat(a.0, b.0), out, ng))
    }

    fn gather_rows(&mut self, x: &Var, index: &[usize]) -> Result<Var, NnError> {
        let out = tensor::gather_rows(self.val(x), index)?;
        let ng = self.ng(x);
        Ok(self.push(Op::Gather(x.0, index.to_vec()), out, ng))
    }

    fn segment_sum(&mut self, x: &Var, segment: &[usize], segments: usize) -> Result<Var, NnError> {
        let out = tensor::segment_sum(self.val(x), segment, segments)?;
        let ng = self.ng(x);
        Ok(self.push(Op::SegmentSum(x.0, segment.to_vec()), out, ng))
    }

    fn segment_mean(&mut self, x: &Var, segment: &[usize], segments: usize) -> Result<Var, NnError> {
        let (out, inv) = segment_mean_kernel(self.val(x), segment, segments)?;
        let ng = self.ng(x);
        Ok(self.push(Op::SegmentMean(x.0, segment.to_vec(), inv), out, ng))
    }

    fn mse(&mut self, a: &Var, b: &Var) -> Result<Var, NnError> {
        let out = mse_kernel(self.val(a), self.val(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Mse(a.0, b.0), out, ng))
    }

    fn row_sq_dist_mean(&mut self, a: &Var, b: &Var) -> Result<Var, NnError> {
        let out = row_sq_kernel(self.val(a), self.val(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::RowSqDistMean(a.0, b.0), out, ng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> (Params, ParamId) {
        let mut p = Params::new();
        let id = p.add("x", Tensor::scalar(v)).unwrap();
        (p, id)
    }

    #[test]
    fn square_gradient() {
        let (p, id) = scalar_param(3.0);
        let mut tape = Tape::new();
        let x = tape.param(&p, id);
        let zero = tape.constant(Tensor::scalar(0.0));
        // mse(x, 0) on a 1×1 is x²
        let y = tape.mse(&x, &zero).unwrap();
        assert_eq!(tape.value(&y).item(), 9.0);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(id).unwrap().item(), 6.0);
    }

    #[test]
    fn leaky_relu_slope_gradient() {
        let (p, id) = scalar_param(-1.0);
        let mut tape = Tape::new();
        let x = tape.param(&p, id);
        let y = tape.leaky_relu(&x, 0.01);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(id).unwrap().item(), 0.01);
    }

    #[test]
    fn second_backward_is_stale() {
        let (p, id) = scalar_param(2.0);
        let mut tape = Tape::new();
        let x = tape.param(&p, id);
        let y = tape.scale(&x, 3.0);
        assert!(tape.backward(y).is_ok());
        assert_eq!(tape.backward(y), Err(NnError::StaleTape));
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let mut p = Params::new();
        let id = p.add("v", Tensor::row(&[1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let x = tape.param(&p, id);
        assert!(matches!(tape.backward(x), Err(NnError::NotScalar((1, 2)))));
    }

    #[test]
    fn non_finite_values_are_caught() {
        let (p, id) = scalar_param(f64::MAX);
        let mut tape = Tape::new();
        let x = tape.param(&p, id);
        let y = tape.scale(&x, 10.0);
        assert!(matches!(tape.backward(y), Err(NnError::NonFinite(_))));
    }

    #[test]
    fn shared_parameter_accumulates() {
        // f = x + x, df/dx = 2
        let (p, id) = scalar_param(5.0);
        let mut tape = Tape::new();
        let a = tape.param(&p, id);
        let b = tape.param(&p, id);
        let y = tape.add(&a, &b).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(id).unwrap().item(), 2.0);
    }

    #[test]
    fn mse_of_equal_inputs_is_zero() {
        let mut e = Eval;
        let a = Tensor::row(&[1.0, 2.0]);
        assert_eq!(e.mse(&a, &a).unwrap().item(), 0.0);
        assert!(e.mse(&a, &Tensor::row(&[1.0])).is_err());
    }

    #[test]
    fn segment_mean_gradient_spreads_evenly() {
        let mut p = Params::new();
        let id = p.add("x", Tensor::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let mut tape = Tape::new();
        let x = tape.param(&p, id);
        let m = tape.segment_mean(&x, &[0, 0, 1], 2).unwrap();
        let target = tape.constant(Tensor::zeros(2, 1));
        // loss = (1.5² + 3²)/2
        let l = tape.mse(&m, &target).unwrap();
        assert_eq!(tape.value(&l).item(), (2.25 + 9.0) / 2.0);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(id).unwrap().data(), &[0.75, 0.75, 3.0]);
    }
}
