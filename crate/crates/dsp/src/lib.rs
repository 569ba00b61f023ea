//! Windowed analysis/synthesis transforms for the FDFNet pipeline.
//!
//! Two transform pairs share the same framing and weighted overlap-add
//! (WOLA) machinery:
//!
//! * [`stft`] / [`istft`] — complex short-time Fourier transform, split into
//!   magnitude and phase grids.
//! * [`stdct`] / [`istdct`] — real-valued short-time discrete cosine
//!   transform (orthonormal DCT-II analysis, DCT-III synthesis).
//!
//! Analysis applies the window before the frame transform; synthesis applies
//! it again and divides by the summed squared-window envelope, which makes
//! round trips exact on the original sample range independent of any
//! constant-overlap-add property. Signals are padded with `window_len - hop`
//! zeros on both sides before framing and trimmed back after synthesis.
//!
//! Frame transforms run in f64 internally; spectrogram grids are stored in
//! f64 and waveform samples in f32. All operations are pure functions.

mod dct;
mod error;
mod frame;
mod stft;
mod types;
mod window;

pub use dct::{dct2_frame, dct3_frame, istdct, stdct};
pub use error::DspError;
pub use frame::{edge_pad, num_frames, ola_length};
pub use stft::{dft_frame, idft_frame, istft, stft};
pub use types::{
    apply_magnitude_gain, ComplexSpectrogram, FrameConfig, MagnitudeSpectrogram,
    PhaseSpectrogram, RealSpectrogram, Waveform, WindowKind,
};
pub use window::{cola_envelope, make_window, periodic_envelope};
