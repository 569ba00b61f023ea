//! End-to-end two-stage cross-spectrum speech enhancement.
//!
//! Stage 1 enhances the Fourier magnitude spectrum with a convolutional
//! recurrent network and recombines it with the noisy phase. Stage 2
//! re-analyzes the intermediate signal in the cosine (STDCT) domain, where
//! magnitude and phase coexist in one signed real spectrum, and predicts a
//! ratio mask that refines it. Training is two-staged: the magnitude network
//! is trained on spectral MSE, then frozen while the refinement network is
//! trained on a hybrid waveform-L1 + mask-MSE loss against clipped ideal
//! ratio mask targets.
//!
//! Modules:
//! * [`models`] — the two sub-networks and the sequence-modeling block.
//! * [`pipeline`] — signal flow, losses, training loops, streaming state.
//! * [`data`] — WAV I/O, synthetic corpus, mixing, waveform metrics.
//! * [`checkpoint`] — versioned binary parameter container.
//! * [`config`] — run configuration shared by the command-line tools.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod models;
pub mod pipeline;

pub use error::CoreError;
