//! Causal streaming inference.
//!
//! The stream replays the offline pipeline frame by frame: an input framer
//! (seeded with the same leading zeros the offline analysis pads), per-layer
//! convolution histories and GRU states, overlap-add accumulators for both
//! synthesis stages, and a second framer for the intermediate signal feeding
//! stage 2. Every kernel is shared with the offline path and accumulates in
//! the same order, so chunked streaming output matches the offline forward
//! pass sample for sample regardless of chunk sizes.
//!
//! Output lags input by `2 * (window_len - hop)` samples, rounded up to the
//! next hop boundary (896 samples = 56 ms at the 512/128 defaults, the
//! analysis window plus the synthesis tail).

use std::collections::VecDeque;

use fdfnet_dsp::{
    apply_magnitude_gain, dct2_frame, dct3_frame, dft_frame, idft_frame, make_window, num_frames,
    periodic_envelope, Waveform,
};
use fdfnet_nn::ops::conv::conv2d_step;
use fdfnet_nn::ops::deconv::deconv2d_step;
use fdfnet_nn::ops::gru::{gru_cell, GruScratch};
use fdfnet_nn::ops::linear::matvec_rows;
use fdfnet_nn::ops::norm::{bn_eval_affine, ln_row, NORM_EPS};
use fdfnet_nn::params::ParamStore;
use fdfnet_nn::real::{softplus, Real};

use crate::error::CoreError;
use crate::models::blocks::{BnLayer, ConvBlock, DeconvBlock, GruLayer, PreluLayer};
use crate::models::tfsm::TfsmBlock;
use crate::pipeline::model::FdfNet;

/// Rolling window of the last `depth` frames seen by a conv layer.
struct History<R: Real> {
    frames: VecDeque<Vec<R>>,
}

impl<R: Real> History<R> {
    fn new(depth: usize, frame_len: usize) -> Self {
        Self { frames: (0..depth).map(|_| vec![R::ZERO; frame_len]).collect() }
    }

    /// Past frames oldest-first plus the current one.
    fn with_current<'a>(&'a self, current: &'a [R]) -> Vec<&'a [R]> {
        let mut v: Vec<&[R]> = self.frames.iter().map(|f| f.as_slice()).collect();
        v.push(current);
        v
    }

    fn push(&mut self, frame: Vec<R>) {
        if self.frames.is_empty() {
            return;
        }
        self.frames.pop_front();
        self.frames.push_back(frame);
    }
}

fn bn_frame<R: Real>(ps: &ParamStore<R>, bn: &BnLayer, x: &mut [R], f: usize) {
    let gamma = ps.value(bn.gamma);
    let beta = ps.value(bn.beta);
    let rm = ps.value(bn.running_mean);
    let rv = ps.value(bn.running_var);
    for ch in 0..bn.channels {
        let (scale, shift) = bn_eval_affine(gamma, beta, rm, rv, ch);
        for v in &mut x[ch * f..(ch + 1) * f] {
            *v = scale * *v + shift;
        }
    }
}

fn prelu_frame<R: Real>(ps: &ParamStore<R>, act: &PreluLayer, x: &mut [R], f: usize) {
    let slopes = ps.value(act.slope);
    for (ch, &a) in slopes.data().iter().enumerate() {
        for v in &mut x[ch * f..(ch + 1) * f] {
            if *v < R::ZERO {
                *v = a * *v;
            }
        }
    }
}

/// Per-feature PReLU for sequence-model vectors.
fn prelu_vec<R: Real>(ps: &ParamStore<R>, act: &PreluLayer, x: &mut [R]) {
    let slopes = ps.value(act.slope);
    for (v, &a) in x.iter_mut().zip(slopes.data()) {
        if *v < R::ZERO {
            *v = a * *v;
        }
    }
}

fn conv_block_step<R: Real>(
    ps: &ParamStore<R>,
    block: &ConvBlock,
    hist: &mut History<R>,
    input: Vec<R>,
    f_in: usize,
) -> Vec<R> {
    let spec = &block.conv.spec;
    let f_out = spec.out_freq(f_in).expect("valid encoder geometry");
    let mut out = vec![R::ZERO; spec.out_ch * f_out];
    {
        let frames = hist.with_current(&input);
        conv2d_step(spec, ps.value(block.conv.w), ps.value(block.conv.b), f_in, &frames, &mut out);
    }
    hist.push(input);
    bn_frame(ps, &block.bn, &mut out, f_out);
    prelu_frame(ps, &block.act, &mut out, f_out);
    out
}

fn deconv_block_step<R: Real>(
    ps: &ParamStore<R>,
    block: &DeconvBlock,
    hist: &mut History<R>,
    input: Vec<R>,
    f_in: usize,
) -> Vec<R> {
    let spec = &block.deconv.spec;
    let mut out = vec![R::ZERO; spec.out_ch * spec.out_f];
    {
        let frames = hist.with_current(&input);
        deconv2d_step(
            spec,
            ps.value(block.deconv.w),
            ps.value(block.deconv.b),
            f_in,
            &frames,
            &mut out,
        );
    }
    hist.push(input);
    bn_frame(ps, &block.bn, &mut out, spec.out_f);
    prelu_frame(ps, &block.act, &mut out, spec.out_f);
    out
}

fn gru_step<R: Real>(
    ps: &ParamStore<R>,
    layer: &GruLayer,
    state: &mut Vec<R>,
    input: &[R],
    scratch: &mut GruScratch<R>,
) -> Vec<R> {
    let mut h_new = vec![R::ZERO; layer.spec.hidden];
    gru_cell(
        &layer.spec,
        ps.value(layer.w_ih).data(),
        ps.value(layer.w_hh).data(),
        ps.value(layer.b_ih).data(),
        ps.value(layer.b_hh).data(),
        input,
        state,
        &mut h_new,
        scratch,
        None,
    );
    *state = h_new.clone();
    h_new
}

/// Per-layer streaming state for the stage-1 network.
struct FmeStream<R: Real> {
    enc_hist: Vec<History<R>>,
    gru_h: Vec<Vec<R>>,
    dec_hist: Vec<History<R>>,
    out_hist: History<R>,
    scratch: GruScratch<R>,
}

impl<R: Real> FmeStream<R> {
    fn new(model: &FdfNet<R>) -> Self {
        let cfg = &model.fme_cfg;
        let ladder = cfg.freq_ladder();
        let kt = cfg.kernel.1;
        let enc_hist = model
            .fme
            .enc
            .iter()
            .enumerate()
            .map(|(i, b)| History::new(kt - 1, b.conv.spec.in_ch * ladder[i]))
            .collect();
        let gru_h = cfg.gru_hidden.iter().map(|&h| vec![R::ZERO; h]).collect();
        let n = ladder.len() - 1;
        let dec_hist = model
            .fme
            .dec
            .iter()
            .enumerate()
            .map(|(i, b)| History::new(kt - 1, b.deconv.spec.in_ch * ladder[n - i]))
            .collect();
        let out_hist =
            History::new(kt - 1, model.fme.dec_out.spec.in_ch * ladder[1]);
        let max_h = cfg.gru_hidden.iter().copied().max().unwrap_or(1);
        Self { enc_hist, gru_h, dec_hist, out_hist, scratch: GruScratch::new(max_h) }
    }

    /// One frame through the stage-1 network; input and output are scaled
    /// magnitude frames of `input_bins` values.
    fn step(&mut self, model: &FdfNet<R>, mag_frame: Vec<R>) -> Vec<R> {
        let ps = &model.params;
        let ladder = model.fme_cfg.freq_ladder();
        let mut x = mag_frame;
        let mut skips = Vec::with_capacity(model.fme.enc.len());
        for (i, block) in model.fme.enc.iter().enumerate() {
            x = conv_block_step(ps, block, &mut self.enc_hist[i], x, ladder[i]);
            skips.push(x.clone());
        }
        // Bottleneck: the [C, F] frame is already channel-major flat.
        let mut h = x;
        for (i, layer) in model.fme.gru.iter().enumerate() {
            h = {
                let state = &mut self.gru_h[i];
                gru_step(ps, layer, state, &h, &mut self.scratch)
            };
        }
        let mut restored = vec![R::ZERO; model.fme_cfg.fc_units];
        matvec_rows(
            ps.value(model.fme.fc.w).data(),
            Some(ps.value(model.fme.fc.b).data()),
            &h,
            model.fme.fc.in_features,
            &mut restored,
        );
        let mut y = restored;
        let n = ladder.len() - 1;
        for (i, block) in model.fme.dec.iter().enumerate() {
            let mut stacked = y;
            stacked.extend_from_slice(&skips[n - 1 - i]);
            y = deconv_block_step(ps, block, &mut self.dec_hist[i], stacked, ladder[n - i]);
        }
        let mut stacked = y;
        stacked.extend_from_slice(&skips[0]);
        let spec = &model.fme.dec_out.spec;
        let mut out = vec![R::ZERO; spec.out_f];
        {
            let frames = self.out_hist.with_current(&stacked);
            deconv2d_step(
                spec,
                ps.value(model.fme.dec_out.w),
                ps.value(model.fme.dec_out.b),
                ladder[1],
                &frames,
                &mut out,
            );
        }
        self.out_hist.push(stacked);
        for v in &mut out {
            *v = softplus(*v);
        }
        out
    }
}

/// Streaming state of one sequence-modeling block: only the time-axis GRU
/// carries state; the frequency recurrence completes within each frame.
struct TfsmStream<R: Real> {
    time_h: Vec<Vec<R>>,
    scratch: GruScratch<R>,
}

impl<R: Real> TfsmStream<R> {
    fn new(block: &TfsmBlock) -> Self {
        Self {
            time_h: (0..block.freq_bins).map(|_| vec![R::ZERO; block.hidden]).collect(),
            scratch: GruScratch::new(block.hidden),
        }
    }

    fn step(&mut self, ps: &ParamStore<R>, block: &TfsmBlock, x: &[R]) -> Vec<R> {
        let (c, f, h) = (block.channels, block.freq_bins, block.hidden);
        let eps = R::from_f64(NORM_EPS);
        let inv_h = R::from_f64(1.0 / h as f64);

        // Frequency pass within this frame: forward and reversed GRU over
        // bins, directions summed.
        let mut seq = vec![R::ZERO; f * c];
        for bin in 0..f {
            for ch in 0..c {
                seq[bin * c + ch] = x[ch * f + bin];
            }
        }
        let run_dir = |layer: &GruLayer, order: &mut dyn Iterator<Item = usize>,
                       scratch: &mut GruScratch<R>|
         -> Vec<R> {
            let mut out = vec![R::ZERO; f * h];
            let mut state = vec![R::ZERO; h];
            let mut h_new = vec![R::ZERO; h];
            for bin in order {
                gru_cell(
                    &layer.spec,
                    ps.value(layer.w_ih).data(),
                    ps.value(layer.w_hh).data(),
                    ps.value(layer.b_ih).data(),
                    ps.value(layer.b_hh).data(),
                    &seq[bin * c..(bin + 1) * c],
                    &state,
                    &mut h_new,
                    scratch,
                    None,
                );
                out[bin * h..(bin + 1) * h].copy_from_slice(&h_new);
                std::mem::swap(&mut state, &mut h_new);
            }
            out
        };
        let fwd = run_dir(&block.freq_fwd, &mut (0..f), &mut self.scratch);
        let bwd = run_dir(&block.freq_bwd, &mut (0..f).rev(), &mut self.scratch);

        let g1 = ps.value(block.ln1_gamma);
        let b1 = ps.value(block.ln1_beta);
        let g2 = ps.value(block.ln2_gamma);
        let b2 = ps.value(block.ln2_beta);
        let mut out = vec![R::ZERO; c * f];
        let mut summed = vec![R::ZERO; h];
        let mut normed = vec![R::ZERO; h];
        let mut projected = vec![R::ZERO; c];
        for bin in 0..f {
            for u in 0..h {
                summed[u] = fwd[bin * h + u] + bwd[bin * h + u];
            }
            ln_row(&summed, g1.data(), b1.data(), eps, inv_h, &mut normed);
            prelu_vec(ps, &block.act1, &mut normed);

            // Time pass for this bin.
            let state = &mut self.time_h[bin];
            let mut h_new = vec![R::ZERO; h];
            gru_cell(
                &block.time_gru.spec,
                ps.value(block.time_gru.w_ih).data(),
                ps.value(block.time_gru.w_hh).data(),
                ps.value(block.time_gru.b_ih).data(),
                ps.value(block.time_gru.b_hh).data(),
                &normed,
                state,
                &mut h_new,
                &mut self.scratch,
                None,
            );
            *state = h_new.clone();
            ln_row(&h_new, g2.data(), b2.data(), eps, inv_h, &mut normed);
            prelu_vec(ps, &block.act2, &mut normed);

            matvec_rows(
                ps.value(block.out_proj.w).data(),
                Some(ps.value(block.out_proj.b).data()),
                &normed,
                h,
                &mut projected,
            );
            for ch in 0..c {
                out[ch * f + bin] = projected[ch] + x[ch * f + bin];
            }
        }
        out
    }
}

struct DsrStream<R: Real> {
    enc_hist: Vec<History<R>>,
    tfsm: Vec<TfsmStream<R>>,
    dec_hist: Vec<History<R>>,
    out_hist: History<R>,
}

impl<R: Real> DsrStream<R> {
    fn new(model: &FdfNet<R>) -> Self {
        let cfg = &model.dsr_cfg;
        let ladder = cfg.freq_ladder();
        let kt = cfg.kernel.1;
        let enc_hist = model
            .dsr
            .enc
            .iter()
            .enumerate()
            .map(|(i, b)| History::new(kt - 1, b.conv.spec.in_ch * ladder[i]))
            .collect();
        let tfsm = model.dsr.tfsm.iter().map(TfsmStream::new).collect();
        let n = ladder.len() - 1;
        let dec_hist = model
            .dsr
            .dec
            .iter()
            .enumerate()
            .map(|(i, b)| History::new(kt - 1, b.deconv.spec.in_ch * ladder[n - i]))
            .collect();
        let out_hist = History::new(kt - 1, model.dsr.dec_out.spec.in_ch * ladder[1]);
        Self { enc_hist, tfsm, dec_hist, out_hist }
    }

    /// One frame through the stage-2 network: scaled noisy and pre-enhanced
    /// cosine frames in, mask frame out.
    fn step(&mut self, model: &FdfNet<R>, noisy: &[R], pre: &[R]) -> Vec<R> {
        let ps = &model.params;
        let ladder = model.dsr_cfg.freq_ladder();
        let mut x: Vec<R> = noisy.iter().chain(pre.iter()).copied().collect();
        let mut skips = Vec::with_capacity(model.dsr.enc.len());
        for (i, block) in model.dsr.enc.iter().enumerate() {
            x = conv_block_step(ps, block, &mut self.enc_hist[i], x, ladder[i]);
            skips.push(x.clone());
        }
        for (state, block) in self.tfsm.iter_mut().zip(&model.dsr.tfsm) {
            x = state.step(ps, block, &x);
        }
        let mut y = x;
        let n = ladder.len() - 1;
        for (i, block) in model.dsr.dec.iter().enumerate() {
            let mut stacked = y;
            stacked.extend_from_slice(&skips[n - 1 - i]);
            y = deconv_block_step(ps, block, &mut self.dec_hist[i], stacked, ladder[n - i]);
        }
        let mut stacked = y;
        stacked.extend_from_slice(&skips[0]);
        let spec = &model.dsr.dec_out.spec;
        let mut mask = vec![R::ZERO; spec.out_f];
        {
            let frames = self.out_hist.with_current(&stacked);
            deconv2d_step(
                spec,
                ps.value(model.dsr.dec_out.w),
                ps.value(model.dsr.dec_out.b),
                ladder[1],
                &frames,
                &mut mask,
            );
        }
        self.out_hist.push(stacked);
        // Residual head around unity, matching the offline forward.
        for v in &mut mask {
            *v = *v + R::ONE;
        }
        mask
    }
}

/// Overlap-add accumulator with rolling emission.
struct OlaAcc {
    acc: VecDeque<f64>,
    /// Padded position of `acc[0]`.
    base: usize,
}

impl OlaAcc {
    fn new() -> Self {
        Self { acc: VecDeque::new(), base: 0 }
    }

    fn add_frame(&mut self, position: usize, frame: &[f64], window: &[f64]) {
        let start = position - self.base;
        let need = start + window.len();
        if self.acc.len() < need {
            self.acc.resize(need, 0.0);
        }
        for (k, w) in window.iter().enumerate() {
            self.acc[start + k] += frame[k] * w;
        }
    }

    /// Removes and returns the accumulator values below `position`.
    fn drain_to(&mut self, position: usize) -> Vec<f64> {
        let n = position.saturating_sub(self.base).min(self.acc.len());
        self.base += n;
        self.acc.drain(..n).collect()
    }
}

/// Incremental two-stage enhancer over one audio stream.
pub struct StreamEnhancer<'m, R: Real> {
    model: &'m FdfNet<R>,
    window: Vec<f64>,
    env: Vec<f64>,
    // Stage A: input framing -> stage-1 net -> inverse Fourier OLA.
    a_pending: VecDeque<f32>,
    a_frames: usize,
    fme: FmeStream<R>,
    a_acc: OlaAcc,
    inter_emitted: usize,
    // Stage B: noisy + intermediate framing -> stage-2 net -> inverse cosine OLA.
    noisy_pending: VecDeque<f32>,
    b_pending: VecDeque<f32>,
    b_frames: usize,
    dsr: DsrStream<R>,
    b_acc: OlaAcc,
    out_emitted: usize,
    input_len: usize,
}

impl<'m, R: Real> StreamEnhancer<'m, R> {
    pub fn new(model: &'m FdfNet<R>) -> Self {
        let window = make_window(&model.frame).expect("validated at model construction");
        let env = periodic_envelope(&window, model.frame.hop);
        let pad = model.frame.edge_pad();
        let seed = || -> VecDeque<f32> { std::iter::repeat(0.0).take(pad).collect() };
        Self {
            model,
            window,
            env,
            a_pending: seed(),
            a_frames: 0,
            fme: FmeStream::new(model),
            a_acc: OlaAcc::new(),
            inter_emitted: 0,
            noisy_pending: seed(),
            b_pending: seed(),
            b_frames: 0,
            dsr: DsrStream::new(model),
            b_acc: OlaAcc::new(),
            out_emitted: 0,
            input_len: 0,
        }
    }

    /// Algorithmic latency: output trails input by this many samples once
    /// the stream is hop-aligned (worst case one extra hop).
    pub fn latency_samples(&self) -> usize {
        2 * (self.model.frame.window_len - self.model.frame.hop)
    }

    /// Feeds samples; returns whatever enhanced samples became available.
    pub fn push(&mut self, samples: &[f32]) -> Vec<f32> {
        self.input_len += samples.len();
        self.a_pending.extend(samples.iter().copied());
        self.noisy_pending.extend(samples.iter().copied());
        self.advance(usize::MAX, usize::MAX)
    }

    /// Flushes the stream; total output length equals total input length.
    pub fn finish(mut self) -> Vec<f32> {
        let cfg = &self.model.frame;
        let total_frames = num_frames(self.input_len, cfg);
        let padded_len = (total_frames - 1) * cfg.hop + cfg.window_len;
        let pad = cfg.edge_pad();

        // Stage A needs the trailing zeros the offline analysis padded.
        let a_seen = pad + self.input_len;
        for _ in a_seen..padded_len {
            self.a_pending.push_back(0.0);
        }
        let mut out = self.advance(total_frames, usize::MAX);

        // Stage B: the intermediate signal is `input_len` samples; feed its
        // trailing zeros (the noisy branch gets the same padding).
        let b_seen = pad + self.input_len;
        for _ in b_seen..padded_len {
            self.b_pending.push_back(0.0);
            self.noisy_pending.push_back(0.0);
        }
        out.extend(self.advance(total_frames, total_frames));
        debug_assert_eq!(self.out_emitted, self.input_len);
        out
    }

    /// Processes as many frames as the buffers allow, bounded by per-stage
    /// frame caps, and returns finalized output samples.
    fn advance(&mut self, a_cap: usize, b_cap: usize) -> Vec<f32> {
        let cfg = self.model.frame;
        let (w_len, hop, n) = (cfg.window_len, cfg.hop, cfg.transform_points);
        let bins = cfg.fourier_bins();
        let pad = cfg.edge_pad();
        let mut produced = Vec::new();

        // Stage A: STFT frame -> stage-1 net -> gain -> inverse -> OLA.
        while self.a_pending.len() >= w_len && self.a_frames < a_cap {
            let mut frame = vec![0.0f64; n];
            for (k, w) in self.window.iter().enumerate() {
                frame[k] = self.a_pending[k] as f64 * w;
            }
            let mut re = vec![0.0f64; bins];
            let mut im = vec![0.0f64; bins];
            dft_frame(&frame, &mut re, &mut im);
            let mag_scaled: Vec<R> = re
                .iter()
                .zip(&im)
                .map(|(r, i)| R::from_f64(r.hypot(*i) * self.model.mag_scale))
                .collect();
            let enhanced = self.fme.step(self.model, mag_scaled);
            let gain: Vec<f64> =
                enhanced.iter().map(|v| v.to_f64() / self.model.mag_scale).collect();
            apply_magnitude_gain(&mut re, &mut im, &gain);
            let mut time = vec![0.0f64; n];
            idft_frame(&re, &im, &mut time);
            self.a_acc.add_frame(self.a_frames * hop, &time, &self.window);
            self.a_frames += 1;
            for _ in 0..hop {
                self.a_pending.pop_front();
            }

            // Emit finalized intermediate samples into the stage-B framer.
            let final_to = self.a_frames * hop;
            let raw = self.a_acc.drain_to(final_to);
            let raw_base = final_to - raw.len();
            for (off, v) in raw.iter().enumerate() {
                let p = raw_base + off;
                if p >= pad && self.inter_emitted < self.input_len {
                    let env = self.env[p % hop].max(1e-300);
                    self.b_pending.push_back((v / env) as f32);
                    self.inter_emitted += 1;
                }
            }
        }

        // Stage B: STDCT frames -> stage-2 net -> mask -> inverse -> OLA.
        while self.b_pending.len() >= w_len
            && self.noisy_pending.len() >= w_len
            && self.b_frames < b_cap
        {
            let mut noisy_frame = vec![0.0f64; n];
            let mut pre_frame = vec![0.0f64; n];
            for (k, w) in self.window.iter().enumerate() {
                noisy_frame[k] = self.noisy_pending[k] as f64 * w;
                pre_frame[k] = self.b_pending[k] as f64 * w;
            }
            let mut noisy_dct = vec![0.0f64; n];
            let mut pre_dct = vec![0.0f64; n];
            dct2_frame(&noisy_frame, &mut noisy_dct);
            dct2_frame(&pre_frame, &mut pre_dct);
            let noisy_scaled: Vec<R> =
                noisy_dct.iter().map(|v| R::from_f64(v * self.model.dct_scale)).collect();
            let pre_scaled: Vec<R> =
                pre_dct.iter().map(|v| R::from_f64(v * self.model.dct_scale)).collect();
            let mask = self.dsr.step(self.model, &noisy_scaled, &pre_scaled);
            let refined: Vec<f64> =
                mask.iter().zip(&pre_dct).map(|(m, v)| m.to_f64() * v).collect();
            let mut time = vec![0.0f64; n];
            dct3_frame(&refined, &mut time);
            self.b_acc.add_frame(self.b_frames * hop, &time, &self.window);
            self.b_frames += 1;
            for _ in 0..hop {
                self.b_pending.pop_front();
                self.noisy_pending.pop_front();
            }

            let final_to = self.b_frames * hop;
            let raw = self.b_acc.drain_to(final_to);
            let raw_base = final_to - raw.len();
            for (off, v) in raw.iter().enumerate() {
                let p = raw_base + off;
                if p >= pad && self.out_emitted < self.input_len {
                    let env = self.env[p % hop].max(1e-300);
                    produced.push((v / env) as f32);
                    self.out_emitted += 1;
                }
            }
        }

        produced
    }
}

/// Convenience wrapper: streams `x` through in the given chunk sizes and
/// returns the full-length enhanced waveform.
pub fn enhance_streaming<R: Real>(
    model: &FdfNet<R>,
    x: &Waveform,
    chunk: usize,
) -> Result<Waveform, CoreError> {
    if chunk == 0 {
        return Err(CoreError::Usage("chunk size must be at least 1".into()));
    }
    let mut enhancer = StreamEnhancer::new(model);
    let mut out = Vec::with_capacity(x.len());
    for block in x.samples().chunks(chunk) {
        out.extend(enhancer.push(block));
    }
    out.extend(enhancer.finish());
    Ok(Waveform::new(out, x.sample_rate())?)
}
