//! Dense f64 numerics: tensors, a per-step reverse-mode tape, affine layers,
//! Adam/AdamW and a small binary weight container.
//!
//! Model code is written once against [`Ops`]. Training runs it on a
//! [`Tape`]; inference runs the same code on [`Eval`], which computes values
//! eagerly and records nothing.

mod gradcheck;
mod layers;
mod optim;
mod tape;
mod tensor;
mod weights;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gradcheck::grad_check;
pub use layers::{Linear, Mlp};
pub use optim::{AdamConfig, OptimizerState};
pub use tape::{Eval, Gradients, Ops, Tape, Var};
pub use tensor::Tensor;
pub use weights::{read_weights, weights_from_bytes, weights_to_bytes, write_weights, WeightsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("tape already consumed by a backward pass")]
    StaleTape,
    #[error("backward requires a 1x1 output, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("non-finite value produced at tape node {0}")]
    NonFinite(usize),
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
}

/// Index of a tensor inside a [`Params`] store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct ParamId(pub usize);

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    lookup: HashMap<String, usize>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NnError> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(NnError::DuplicateParam(name));
        }
        let id = self.tensors.len();
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(value);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }
}

/// Deterministic RNG derived from a base seed and a label, so each module
/// gets its own stream regardless of construction order elsewhere.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h.rotate_left(17))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn params_reject_duplicates() {
        let mut p = Params::new();
        let a = p.add("w", Tensor::zeros(2, 2)).unwrap();
        assert_eq!(p.id("w"), Some(a));
        assert!(matches!(p.add("w", Tensor::zeros(1, 1)), Err(NnError::DuplicateParam(_))));
        assert_eq!(p.scalar_count(), 4);
    }

    #[test]
    fn labelled_streams_differ() {
        let a: u64 = rng_for(1, "encoder").random();
        let b: u64 = rng_for(1, "head").random();
        let c: u64 = rng_for(1, "encoder").random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
