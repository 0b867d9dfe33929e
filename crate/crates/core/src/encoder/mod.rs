//! Directed message-passing encoder with a linear bottleneck.
//!
//! Messages live on directed edges. Each round, an edge `u→v` collects the
//! states of all edges entering `u` except its own reverse `v→u`. Atom
//! states are read out from incoming edge states, mean-pooled per molecule
//! and projected to the latent `z`.

mod features;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::molgraph::MolGraph;
use crate::nncore::{rng_for, Eval, Linear, NnError, Ops, Params, Tensor};

pub use features::{featurize, FeaturizedGraph, GraphBatch, ATOM_FEATURES, EDGE_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub latent: usize,
    pub depth: usize,
    pub slope: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 64,
            latent: 16,
            depth: 2,
            slope: 0.01,
        }
    }
}

/// Layer handles into a [`Params`] store.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub edge_init: Linear,
    pub message: Linear,
    pub readout: Linear,
    pub bottleneck: Linear,
    pub decoder: Linear,
}

impl Encoder {
    /// Registers encoder parameters under `enc.*`, initialized from a
    /// stream derived from `seed`.
    pub fn new(params: &mut Params, config: EncoderConfig, seed: u64) -> Result<Self, NnError> {
        let mut rng = rng_for(seed, "encoder");
        let h = config.hidden;
        Ok(Encoder {
            config,
            edge_init: Linear::new(params, "enc.edge_init", ATOM_FEATURES + EDGE_FEATURES, h, &mut rng)?,
            message: Linear::new(params, "enc.message", h, h, &mut rng)?,
            readout: Linear::new(params, "enc.readout", ATOM_FEATURES + h, h, &mut rng)?,
            bottleneck: Linear::new(params, "enc.bottleneck", h, config.latent, &mut rng)?,
            decoder: Linear::new(params, "enc.decoder", config.latent, h, &mut rng)?,
        })
    }

    /// Mean-pooled molecule states, one row per molecule (N×hidden).
    pub fn pooled<O: Ops>(&self, ops: &mut O, params: &Params, batch: &GraphBatch) -> Result<O::V, NnError> {
        let slope = self.config.slope;
        let n_atoms = batch.atom_count();
        let atoms = ops.constant(batch.atom_x.clone());

        let incoming = if batch.edge_count() == 0 || self.config.depth == 0 {
            ops.constant(Tensor::zeros(n_atoms, self.config.hidden))
        } else {
            let edge_in = ops.constant(batch.edge_in.clone());
            let init = self.edge_init.forward(ops, params, &edge_in)?;
            let h0 = ops.leaky_relu(&init, slope);
            let mut h = h0.clone();
            for _ in 0..self.config.depth {
                let into_atom = ops.segment_sum(&h, &batch.dst, n_atoms)?;
                let at_src = ops.gather_rows(&into_atom, &batch.src)?;
                let back = ops.gather_rows(&h, &batch.rev)?;
                let msg = ops.sub(&at_src, &back)?;
                let upd = self.message.forward(ops, params, &msg)?;
                let pre = ops.add(&h0, &upd)?;
                h = ops.leaky_relu(&pre, slope);
            }
            ops.segment_sum(&h, &batch.dst, n_atoms)?
        };

        let cat = ops.concat_cols(&atoms, &incoming)?;
        let ro = self.readout.forward(ops, params, &cat)?;
        let atom_states = ops.leaky_relu(&ro, slope);
        ops.segment_mean(&atom_states, &batch.atom_mol, batch.mol_count())
    }

    /// Latent vectors, one row per molecule (N×latent).
    pub fn encode_batch<O: Ops>(&self, ops: &mut O, params: &Params, batch: &GraphBatch) -> Result<O::V, NnError> {
        let pooled = self.pooled(ops, params, batch)?;
        self.bottleneck.forward(ops, params, &pooled)
    }

    /// Decoder side of the bottleneck: latent back to hidden width.
    pub fn reconstruct<O: Ops>(&self, ops: &mut O, params: &Params, z: &O::V) -> Result<O::V, NnError> {
        self.decoder.forward(ops, params, z)
    }

    /// Bottleneck reconstruction loss `(1/N) Σ ‖H − dec(enc(H))‖²` over pooled states.
    pub fn reconstruction_loss<O: Ops>(&self, ops: &mut O, params: &Params, batch: &GraphBatch) -> Result<O::V, NnError> {
        let pooled = self.pooled(ops, params, batch)?;
        let z = self.bottleneck.forward(ops, params, &pooled)?;
        let back = self.reconstruct(ops, params, &z)?;
        ops.row_sq_dist_mean(&pooled, &back)
    }
}

/// Latent vector of one molecule.
pub fn encode(g: &MolGraph, encoder: &Encoder, params: &Params) -> Result<Vec<f64>, NnError> {
    let fg = featurize(g);
    let batch = GraphBatch::new(&[&fg]);
    let z = encoder.encode_batch(&mut Eval, params, &batch)?;
    Ok(z.into_data())
}

/// Latent vectors for many molecules, one row each.
pub fn encode_all(graphs: &[FeaturizedGraph], encoder: &Encoder, params: &Params) -> Result<Tensor, NnError> {
    let refs: Vec<&FeaturizedGraph> = graphs.iter().collect();
    let batch = GraphBatch::new(&refs);
    encoder.encode_batch(&mut Eval, params, &batch)
}

/// CSV dump `id,z0,...,z{d-1}`.
pub fn write_embeddings_csv<W: Write>(out: W, ids: &[String], z: &Tensor) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend((0..z.cols()).map(|k| format!("z{k}")));
    w.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(z.row_slice(i).iter().map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
