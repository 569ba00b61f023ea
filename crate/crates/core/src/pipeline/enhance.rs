//! Offline signal flow: stage-1 magnitude enhancement, the full two-stage
//! forward pass, and the mask-oracle variants used for verification.

use fdfnet_dsp::{
    istdct, istft, stdct, stft, ComplexSpectrogram, FrameConfig, MagnitudeSpectrogram,
    RealSpectrogram, Waveform,
};
use fdfnet_nn::graph::Graph;
use fdfnet_nn::real::Real;

use crate::error::CoreError;
use crate::models::Mode;
use crate::pipeline::bridge::{mag_to_tensor, real_spec_to_tensor, tensor_to_mag, tensor_to_real_spec};
use crate::pipeline::mask::{apply_mask, compute_dctirm};
use crate::pipeline::model::FdfNet;

/// Runs the stage-1 network on a magnitude grid (batch-norm in eval mode).
pub fn fme_enhance_mag<R: Real>(
    model: &FdfNet<R>,
    mag: &MagnitudeSpectrogram,
) -> Result<MagnitudeSpectrogram, CoreError> {
    let mut g = Graph::new();
    let input = g.input(mag_to_tensor::<R>(mag, model.mag_scale));
    let mut updates = Vec::new();
    let out = model.fme.forward(&mut g, &model.params, input, Mode::Eval, &mut updates)?;
    Ok(tensor_to_mag(g.value(out), mag, model.mag_scale))
}

/// Stage 1: enhance the magnitude spectrum and recombine with the noisy
/// phase. Returns the enhanced complex spectrum and its inverse transform.
pub fn stage1_enhance<R: Real>(
    model: &FdfNet<R>,
    x: &Waveform,
) -> Result<(ComplexSpectrogram, Waveform), CoreError> {
    let (mag, _, complex) = stft(x, &model.frame)?;
    let enhanced_mag = fme_enhance_mag(model, &mag)?;
    let enhanced = complex.with_magnitude(&enhanced_mag)?;
    let intermediate = istft(&enhanced)?;
    Ok((enhanced, intermediate))
}

/// Runs the stage-2 network on the noisy and pre-enhanced cosine spectra;
/// returns the predicted mask on the grid of `noisy_dct`.
pub fn dsr_mask<R: Real>(
    model: &FdfNet<R>,
    noisy_dct: &RealSpectrogram,
    pre_enhanced_dct: &RealSpectrogram,
) -> Result<RealSpectrogram, CoreError> {
    if noisy_dct.n_frames() != pre_enhanced_dct.n_frames()
        || noisy_dct.bins() != pre_enhanced_dct.bins()
    {
        return Err(CoreError::Data(format!(
            "stage-2 inputs differ in shape: {}x{} vs {}x{}",
            noisy_dct.bins(),
            noisy_dct.n_frames(),
            pre_enhanced_dct.bins(),
            pre_enhanced_dct.n_frames()
        )));
    }
    let mut g = Graph::new();
    let noisy = g.input(real_spec_to_tensor::<R>(noisy_dct, model.dct_scale));
    let pre = g.input(real_spec_to_tensor::<R>(pre_enhanced_dct, model.dct_scale));
    let mut updates = Vec::new();
    let mask =
        model.dsr.forward(&mut g, &model.params, noisy, pre, Mode::Eval, &mut updates)?;
    // Masks are unitless ratios; no feature rescaling applies.
    Ok(tensor_to_real_spec(g.value(mask), noisy_dct, 1.0))
}

/// The full two-stage forward pass. Output length equals input length.
pub fn full_forward<R: Real>(model: &FdfNet<R>, x: &Waveform) -> Result<Waveform, CoreError> {
    let (enhanced_complex, intermediate) = stage1_enhance(model, x)?;
    let _ = enhanced_complex;
    let pre_dct = stdct(&intermediate, &model.frame)?;
    let noisy_dct = stdct(x, &model.frame)?;
    let mask = dsr_mask(model, &noisy_dct, &pre_dct)?;
    let refined = apply_mask(mask.data(), &pre_dct);
    Ok(istdct(&refined)?)
}

/// Stage-1 oracle: uses the clean magnitude with the noisy phase.
pub fn oracle_stage1(
    x: &Waveform,
    clean: &Waveform,
    frame: &FrameConfig,
) -> Result<(ComplexSpectrogram, Waveform), CoreError> {
    let (_, _, noisy_complex) = stft(x, frame)?;
    let (clean_mag, _, _) = stft(clean, frame)?;
    let enhanced = noisy_complex.with_magnitude(&clean_mag)?;
    let intermediate = istft(&enhanced)?;
    Ok((enhanced, intermediate))
}

/// Double oracle: oracle stage-1 magnitude, then the clipped ideal ratio
/// mask against the oracle intermediate. Bounds what any trained stage-2
/// network can achieve.
pub fn oracle_full(
    x: &Waveform,
    clean: &Waveform,
    frame: &FrameConfig,
    clip_bound: f64,
) -> Result<Waveform, CoreError> {
    let (_, intermediate) = oracle_stage1(x, clean, frame)?;
    let pre_dct = stdct(&intermediate, frame)?;
    let clean_dct = stdct(clean, frame)?;
    let mask = compute_dctirm(&clean_dct, &pre_dct, clip_bound)?;
    let refined = apply_mask(mask.values(), &pre_dct);
    Ok(istdct(&refined)?)
}

/// Mask-only oracle: stage 1 skipped, the clipped ideal ratio mask applied
/// directly to the noisy cosine spectrum.
pub fn oracle_mask_only(
    x: &Waveform,
    clean: &Waveform,
    frame: &FrameConfig,
    clip_bound: f64,
) -> Result<Waveform, CoreError> {
    let noisy_dct = stdct(x, frame)?;
    let clean_dct = stdct(clean, frame)?;
    let mask = compute_dctirm(&clean_dct, &noisy_dct, clip_bound)?;
    let refined = apply_mask(mask.values(), &noisy_dct);
    Ok(istdct(&refined)?)
}
