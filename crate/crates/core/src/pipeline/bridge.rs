//! Conversions between spectrogram grids (f64, frame-major) and network
//! tensors (`[channels, bins, T]`, bin-major). Magnitude features are
//! scaled so typical speech spectra sit near unit range (the window sum
//! sets the raw magnitude scale); cosine-domain features are already O(1)
//! under the orthonormal transform, and ratio masks are unitless.

use fdfnet_dsp::{make_window, FrameConfig, MagnitudeSpectrogram, RealSpectrogram, Waveform};
use fdfnet_nn::real::Real;
use fdfnet_nn::tensor::Tensor;

/// Magnitude feature scale: `16 / sum(window)` brings the RMS of speech
/// magnitude spectra to roughly 0.1..0.3.
pub fn mag_feature_scale(config: &FrameConfig) -> f64 {
    let w = make_window(config).expect("valid frame config");
    16.0 / w.iter().sum::<f64>()
}

/// Cosine-domain features feed the network unscaled.
pub const DCT_FEATURE_SCALE: f64 = 1.0;

/// Magnitude grid -> `[1, bins, T]` tensor, scaled.
pub fn mag_to_tensor<R: Real>(mag: &MagnitudeSpectrogram, scale: f64) -> Tensor<R> {
    let (bins, t) = (mag.bins(), mag.n_frames());
    let mut out = Tensor::zeros(&[1, bins, t]);
    for frame in 0..t {
        let src = mag.frame(frame);
        for (k, v) in src.iter().enumerate() {
            out.data_mut()[k * t + frame] = R::from_f64(v * scale);
        }
    }
    out
}

/// `[1, bins, T]` tensor -> magnitude grid, unscaled back to transform units.
pub fn tensor_to_mag<R: Real>(
    tensor: &Tensor<R>,
    template: &MagnitudeSpectrogram,
    scale: f64,
) -> MagnitudeSpectrogram {
    let (bins, t) = (template.bins(), template.n_frames());
    let mut data = vec![0.0f64; bins * t];
    for frame in 0..t {
        for k in 0..bins {
            data[frame * bins + k] = tensor.data()[k * t + frame].to_f64() / scale;
        }
    }
    template.with_data(data).expect("shape-preserving conversion")
}

/// Cosine spectrum grid -> `[bins, T]` tensor, optionally scaled.
pub fn real_spec_to_tensor<R: Real>(spec: &RealSpectrogram, scale: f64) -> Tensor<R> {
    let (bins, t) = (spec.bins(), spec.n_frames());
    let mut out = Tensor::zeros(&[bins, t]);
    for frame in 0..t {
        let src = spec.frame(frame);
        for (k, v) in src.iter().enumerate() {
            out.data_mut()[k * t + frame] = R::from_f64(v * scale);
        }
    }
    out
}

/// `[bins, T]` tensor -> cosine spectrum grid under the template's metadata.
pub fn tensor_to_real_spec<R: Real>(
    tensor: &Tensor<R>,
    template: &RealSpectrogram,
    scale: f64,
) -> RealSpectrogram {
    let (bins, t) = (template.bins(), template.n_frames());
    let mut data = vec![0.0f64; bins * t];
    for frame in 0..t {
        for k in 0..bins {
            data[frame * bins + k] = tensor.data()[k * t + frame].to_f64() / scale;
        }
    }
    template.with_data(data).expect("shape-preserving conversion")
}

pub fn waveform_to_tensor<R: Real>(x: &Waveform) -> Tensor<R> {
    Tensor::from_vec(
        &[x.len()],
        x.samples().iter().map(|&s| R::from_f64(s as f64)).collect(),
    )
}
