//! Time-frequency sequence modeling block.
//!
//! Per frame, a bidirectional GRU runs across frequency bins (both direction
//! outputs summed), then a unidirectional GRU runs along time per bin; each
//! recurrence is followed by layer normalization and PReLU. A linear
//! projection restores the trunk channel count and a residual connection
//! closes the block, so stacked blocks preserve shape. The frequency
//! recurrence consumes the trunk channels directly; only the output side
//! needs a projection.

use rand_chacha::ChaCha12Rng;

use fdfnet_nn::graph::{Graph, NodeId};
use fdfnet_nn::params::ParamStore;
use fdfnet_nn::real::Real;
use fdfnet_nn::NnError;

use super::blocks::{GruLayer, LinearLayer, PreluLayer};

pub struct TfsmBlock {
    pub channels: usize,
    pub freq_bins: usize,
    pub hidden: usize,
    pub freq_fwd: GruLayer,
    pub freq_bwd: GruLayer,
    pub ln1_gamma: fdfnet_nn::ParamId,
    pub ln1_beta: fdfnet_nn::ParamId,
    pub act1: PreluLayer,
    pub time_gru: GruLayer,
    pub ln2_gamma: fdfnet_nn::ParamId,
    pub ln2_beta: fdfnet_nn::ParamId,
    pub act2: PreluLayer,
    pub out_proj: LinearLayer,
}

impl TfsmBlock {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        channels: usize,
        freq_bins: usize,
        hidden: usize,
    ) -> Self {
        let freq_fwd = GruLayer::new(ps, rng, &format!("{name}.freq_fwd"), channels, hidden, false);
        let freq_bwd = GruLayer::new(ps, rng, &format!("{name}.freq_bwd"), channels, hidden, true);
        let ln1_gamma = ps
            .register(&format!("{name}.ln1.gamma"), fdfnet_nn::init::constant(&[hidden], 1.0))
            .unwrap();
        let ln1_beta = ps
            .register(&format!("{name}.ln1.beta"), fdfnet_nn::init::constant(&[hidden], 0.0))
            .unwrap();
        let act1 = PreluLayer::new(ps, &format!("{name}.act1"), hidden, 2);
        let time_gru = GruLayer::new(ps, rng, &format!("{name}.time_gru"), hidden, hidden, false);
        let ln2_gamma = ps
            .register(&format!("{name}.ln2.gamma"), fdfnet_nn::init::constant(&[hidden], 1.0))
            .unwrap();
        let ln2_beta = ps
            .register(&format!("{name}.ln2.beta"), fdfnet_nn::init::constant(&[hidden], 0.0))
            .unwrap();
        let act2 = PreluLayer::new(ps, &format!("{name}.act2"), hidden, 2);
        let out_proj = LinearLayer::new(ps, rng, &format!("{name}.proj"), hidden, channels);
        Self {
            channels,
            freq_bins,
            hidden,
            freq_fwd,
            freq_bwd,
            ln1_gamma,
            ln1_beta,
            act1,
            time_gru,
            ln2_gamma,
            ln2_beta,
            act2,
            out_proj,
        }
    }

    /// `x: [channels, freq, T]` -> same shape.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let shape = g.shape(x).to_vec();
        if shape != [self.channels, self.freq_bins, g.shape(x)[2]] {
            return Err(NnError::Shape(format!(
                "tfsm input {:?}, expected [{}, {}, T]",
                shape, self.channels, self.freq_bins
            )));
        }
        let t = shape[2];

        // Frequency pass: lanes = frames, sequence = bins, features = channels.
        let freq_seq = g.permute(x, &[2, 1, 0])?; // [T, F, C]
        let fwd = self.freq_fwd.forward(g, ps, freq_seq, None)?;
        let bwd = self.freq_bwd.forward(g, ps, freq_seq, None)?;
        let summed = g.add(fwd, bwd)?; // [T, F, H]
        let g1 = g.param(ps, self.ln1_gamma);
        let b1 = g.param(ps, self.ln1_beta);
        let normed = g.layer_norm(summed, g1, b1)?;
        let freq_out = self.act1.forward(g, ps, normed)?;

        // Time pass: lanes = bins, sequence = frames, features = hidden.
        let time_seq = g.permute(freq_out, &[1, 0, 2])?; // [F, T, H]
        let time_out = self.time_gru.forward(g, ps, time_seq, None)?;
        let g2 = g.param(ps, self.ln2_gamma);
        let b2 = g.param(ps, self.ln2_beta);
        let normed = g.layer_norm(time_out, g2, b2)?;
        let time_out = self.act2.forward(g, ps, normed)?;

        // Project back to trunk channels and add the residual.
        let flat = g.reshape(time_out, &[self.freq_bins * t, self.hidden])?;
        let projected = self.out_proj.forward(g, ps, flat)?;
        let grid = g.reshape(projected, &[self.freq_bins, t, self.channels])?;
        let restored = g.permute(grid, &[2, 0, 1])?; // [C, F, T]
        g.add(restored, x)
    }
}
