//! Stage-2 spectrum refinement network. Consumes the noisy and pre-enhanced
//! cosine spectra as two input channels, stacks TFSM blocks between the
//! encoder and decoder, and predicts a signed ratio mask with a linear head
//! (cosine coefficients are signed, so the mask is unbounded and the
//! training target is clipped instead of squashing the output). The head
//! predicts the mask as a residual around unity, so an untrained refiner
//! passes the pre-enhanced spectrum through unchanged.

use rand_chacha::ChaCha12Rng;

use fdfnet_nn::graph::{Graph, NodeId};
use fdfnet_nn::params::ParamStore;
use fdfnet_nn::real::Real;
use fdfnet_nn::{Conv2dSpec, Deconv2dSpec, NnError};

use super::blocks::{BnUpdate, ConvBlock, Deconv2dLayer, DeconvBlock, Mode};
use super::config::DsrConfig;
use super::tfsm::TfsmBlock;

pub struct DsrNet {
    pub cfg: DsrConfig,
    pub enc: Vec<ConvBlock>,
    pub tfsm: Vec<TfsmBlock>,
    pub dec: Vec<DeconvBlock>,
    pub dec_out: Deconv2dLayer,
}

impl DsrNet {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, rng: &mut ChaCha12Rng, cfg: &DsrConfig) -> Self {
        let ladder = cfg.freq_ladder();
        let pad = cfg.freq_pad();
        let mut enc = Vec::new();
        let mut in_ch = cfg.input_channels;
        for (i, &out_ch) in cfg.encoder_channels.iter().enumerate() {
            let spec = Conv2dSpec {
                in_ch,
                out_ch,
                kernel: cfg.kernel,
                stride: cfg.stride,
                pad_f: pad,
            };
            enc.push(ConvBlock::new(ps, rng, &format!("dsr.enc{i}"), spec));
            in_ch = out_ch;
        }

        let trunk_ch = *cfg.encoder_channels.last().unwrap();
        let trunk_bins = *ladder.last().unwrap();
        let tfsm = cfg
            .tfsm_hidden
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                TfsmBlock::new(ps, rng, &format!("dsr.tfsm{i}"), trunk_ch, trunk_bins, h)
            })
            .collect();

        let mut dec = Vec::new();
        let mut prev_ch = trunk_ch;
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
            dec.push(DeconvBlock::new(ps, rng, &format!("dsr.dec{i}"), spec));
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
        let dec_out = Deconv2dLayer::new(ps, rng, &format!("dsr.dec{}", n - 1), out_spec);

        Self { cfg: cfg.clone(), enc, tfsm, dec, dec_out }
    }

    /// `noisy, pre_enhanced: [bins, T]` cosine spectra -> mask `[bins, T]`.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        noisy: NodeId,
        pre_enhanced: NodeId,
        mode: Mode,
        updates: &mut Vec<BnUpdate>,
    ) -> Result<NodeId, NnError> {
        let bins = self.cfg.input_bins;
        let sn = g.shape(noisy).to_vec();
        let sp = g.shape(pre_enhanced).to_vec();
        if sn.len() != 2 || sn[0] != bins {
            return Err(NnError::Shape(format!("noisy spectrum {:?}", sn)));
        }
        if sn != sp {
            return Err(NnError::Shape(format!("input spectra differ: {:?} vs {:?}", sn, sp)));
        }
        let t = sn[1];
        let a = g.reshape(noisy, &[1, bins, t])?;
        let b = g.reshape(pre_enhanced, &[1, bins, t])?;
        let mut x = g.concat(&[a, b], 0)?;

        let mut skips = Vec::new();
        for block in &self.enc {
            x = block.forward(g, ps, x, mode, updates)?;
            skips.push(x);
        }
        for block in &self.tfsm {
            x = block.forward(g, ps, x)?;
        }
        let mut y = x;
        for (i, block) in self.dec.iter().enumerate() {
            let skip = skips[skips.len() - 1 - i];
            let stacked = g.concat(&[y, skip], 0)?;
            y = block.forward(g, ps, stacked, mode, updates)?;
        }
        let stacked = g.concat(&[y, skips[0]], 0)?;
        let residual = self.dec_out.forward(g, ps, stacked)?;
        let ones = g.input(fdfnet_nn::Tensor::full(&[1, bins, t], R::ONE));
        let mask = g.add(residual, ones)?;
        g.reshape(mask, &[bins, t])
    }
}
