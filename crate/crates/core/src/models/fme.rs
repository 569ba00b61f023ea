//! Stage-1 magnitude enhancement network: convolutional encoder, stacked GRU
//! bottleneck over flattened features, fully-connected restore, and a
//! deconvolutional decoder with per-block skip concatenation. The output
//! head is a softplus, keeping enhanced magnitudes strictly non-negative.

use rand_chacha::ChaCha12Rng;

use fdfnet_nn::graph::{Graph, NodeId};
use fdfnet_nn::params::ParamStore;
use fdfnet_nn::real::Real;
use fdfnet_nn::{Conv2dSpec, Deconv2dSpec, NnError};

use super::blocks::{BnUpdate, ConvBlock, Deconv2dLayer, DeconvBlock, GruLayer, LinearLayer, Mode};
use super::config::FmeConfig;

pub struct FmeNet {
    pub cfg: FmeConfig,
    pub enc: Vec<ConvBlock>,
    pub gru: Vec<GruLayer>,
    pub fc: LinearLayer,
    pub dec: Vec<DeconvBlock>,
    pub dec_out: Deconv2dLayer,
}

impl FmeNet {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, rng: &mut ChaCha12Rng, cfg: &FmeConfig) -> Self {
        let ladder = cfg.freq_ladder();
        let pad = cfg.freq_pad();
        let mut enc = Vec::new();
        let mut in_ch = 1;
        for (i, &out_ch) in cfg.encoder_channels.iter().enumerate() {
            let spec = Conv2dSpec {
                in_ch,
                out_ch,
                kernel: cfg.kernel,
                stride: cfg.stride,
                pad_f: pad,
            };
            enc.push(ConvBlock::new(ps, rng, &format!("fme.enc{i}"), spec));
            in_ch = out_ch;
        }

        let bottleneck_ch = *cfg.encoder_channels.last().unwrap();
        let bottleneck_bins = *ladder.last().unwrap();
        let flat = bottleneck_ch * bottleneck_bins;
        let mut gru = Vec::new();
        let mut gru_in = flat;
        for (i, &h) in cfg.gru_hidden.iter().enumerate() {
            gru.push(GruLayer::new(ps, rng, &format!("fme.gru{i}"), gru_in, h, false));
            gru_in = h;
        }
        let fc = LinearLayer::new(ps, rng, "fme.fc", gru_in, cfg.fc_units);

        // Decoder blocks mirror the encoder; inputs are channel-concatenated
        // with the matching encoder output.
        let mut dec = Vec::new();
        let mut prev_ch = bottleneck_ch;
        let n = cfg.decoder_channels.len();
        for (i, &out_ch) in cfg.decoder_channels.iter().enumerate().take(n - 1) {
            let skip_ch = cfg.encoder_channels[n - 1 - i];
            let spec = Deconv2dSpec {
                in_ch: prev_ch + skip_ch,
                out_ch,
                kernel: cfg.kernel,
                stride_f: cfg.stride.0,
                pad_f: pad,
                out_f: ladder[n - 1 - i],
            };
            dec.push(DeconvBlock::new(ps, rng, &format!("fme.dec{i}"), spec));
            prev_ch = out_ch;
        }
        let out_spec = Deconv2dSpec {
            in_ch: prev_ch + cfg.encoder_channels[0],
            out_ch: 1,
            kernel: cfg.kernel,
            stride_f: cfg.stride.0,
            pad_f: pad,
            out_f: cfg.input_bins,
        };
        // The softplus head starts near the mean scaled speech magnitude
        // (softplus(-3.7) ~ 0.024) rather than softplus(0) ~ 0.7, so early
        // optimizer steps refine structure instead of fighting a constant
        // offset.
        let dec_out =
            Deconv2dLayer::with_bias(ps, rng, &format!("fme.dec{}", n - 1), out_spec, Some(-3.7));

        Self { cfg: cfg.clone(), enc, gru, fc, dec, dec_out }
    }

    /// `mag: [1, bins, T]` -> enhanced `[1, bins, T]`, non-negative.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        mag: NodeId,
        mode: Mode,
        updates: &mut Vec<BnUpdate>,
    ) -> Result<NodeId, NnError> {
        let shape = g.shape(mag).to_vec();
        if shape.len() != 3 || shape[0] != 1 || shape[1] != self.cfg.input_bins {
            return Err(NnError::Shape(format!(
                "magnitude input {:?}, expected [1, {}, T]",
                shape, self.cfg.input_bins
            )));
        }
        let t = shape[2];

        let mut x = mag;
        let mut skips = Vec::new();
        for block in &self.enc {
            x = block.forward(g, ps, x, mode, updates)?;
            skips.push(x);
        }

        // Flatten [C, F, T] -> per-frame vectors [T, C*F] (channel-major).
        let ch = *self.cfg.encoder_channels.last().unwrap();
        let bins = *self.cfg.freq_ladder().last().unwrap();
        let frames = g.permute(x, &[2, 0, 1])?;
        let mut seq = g.reshape(frames, &[1, t, ch * bins])?;
        for layer in &self.gru {
            seq = layer.forward(g, ps, seq, None)?;
        }
        let last_h = *self.cfg.gru_hidden.last().unwrap();
        let flat = g.reshape(seq, &[t, last_h])?;
        let restored = self.fc.forward(g, ps, flat)?;
        let restored = g.reshape(restored, &[t, ch, bins])?;
        let mut y = g.permute(restored, &[1, 2, 0])?;

        for (i, block) in self.dec.iter().enumerate() {
            let skip = skips[skips.len() - 1 - i];
            let stacked = g.concat(&[y, skip], 0)?;
            y = block.forward(g, ps, stacked, mode, updates)?;
        }
        let stacked = g.concat(&[y, skips[0]], 0)?;
        let y = self.dec_out.forward(g, ps, stacked)?;
        Ok(g.softplus_op(y))
    }
}
