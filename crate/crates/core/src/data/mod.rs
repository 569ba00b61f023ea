//! Audio file I/O, synthetic mixtures, manifests, and waveform metrics.

pub mod manifest;
pub mod metrics;
pub mod mix;
pub mod synth;
pub mod wav;

pub use manifest::{DatasetManifest, ManifestRecord, SourceKind, Split};
pub use metrics::{si_sdr, snr, METRIC_CAP_DB};
pub use mix::{measured_snr, mix_at_snr, Mix};
pub use synth::{synth_dataset, synth_eval_pairs, synth_in_memory, SynthConfig};
pub use wav::{read_wav, read_wav_with_format, write_wav, SampleFormat};
