use crate::error::DspError;
use crate::frame::{num_frames, ola_length};

/// Analysis window shape. Only the Hamming window is supported; configuration
/// files reject other names at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
}

/// Framing parameters shared by every transform in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    /// Analysis window length in samples (32 ms at 16 kHz).
    pub window_len: usize,
    /// Hop between consecutive frames in samples (8 ms at 16 kHz).
    pub hop: usize,
    /// Transform size; frames are zero-padded up to this length.
    pub transform_points: usize,
    pub window: WindowKind,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 128,
            transform_points: 512,
            window: WindowKind::Hamming,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.window_len == 0 {
            return Err(DspError::InvalidConfig("window_len must be > 0".into()));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(DspError::InvalidConfig(format!(
                "hop must be in 1..={} (got {})",
                self.window_len, self.hop
            )));
        }
        if self.transform_points < self.window_len {
            return Err(DspError::InvalidConfig(format!(
                "transform_points {} < window_len {}",
                self.transform_points, self.window_len
            )));
        }
        Ok(())
    }

    /// Number of complex bins produced by the Fourier analysis.
    pub fn fourier_bins(&self) -> usize {
        self.transform_points / 2 + 1
    }

    /// Number of real bins produced by the cosine analysis.
    pub fn cosine_bins(&self) -> usize {
        self.transform_points
    }

    /// Leading/trailing zero padding applied before framing.
    pub fn edge_pad(&self) -> usize {
        self.window_len - self.hop
    }
}

/// Mono discretized audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::InvalidConfig("sample_rate must be > 0".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Convenience constructor for the pipeline's native rate.
    pub fn mono_16k(samples: Vec<f32>) -> Result<Self, DspError> {
        Self::new(samples, 16_000)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

/// Shared bookkeeping for every spectrogram grid: time-major frame storage
/// plus the padding metadata the synthesis side needs to trim its output
/// back to the analyzed sample range.
#[derive(Debug, Clone, PartialEq)]
struct GridMeta {
    bins: usize,
    n_frames: usize,
    config: FrameConfig,
    /// Zeros prepended before framing; synthesis discards this many samples.
    pad_lead: usize,
    /// Length of the synthesized output after trimming.
    out_len: usize,
    sample_rate: u32,
}

impl GridMeta {
    fn for_signal(config: FrameConfig, bins: usize, signal_len: usize, sample_rate: u32) -> Self {
        Self {
            bins,
            n_frames: num_frames(signal_len, &config),
            config,
            pad_lead: config.edge_pad(),
            out_len: signal_len,
            sample_rate,
        }
    }

    fn raw(config: FrameConfig, bins: usize, n_frames: usize) -> Self {
        Self {
            bins,
            n_frames,
            config,
            pad_lead: 0,
            out_len: ola_length(n_frames, &config),
            sample_rate: 16_000,
        }
    }
}

macro_rules! grid_accessors {
    () => {
        pub fn bins(&self) -> usize {
            self.meta.bins
        }

        pub fn n_frames(&self) -> usize {
            self.meta.n_frames
        }

        pub fn config(&self) -> &FrameConfig {
            &self.meta.config
        }

        /// Leading padding (in samples) the analysis inserted before frame 0.
        pub fn pad_lead(&self) -> usize {
            self.meta.pad_lead
        }

        /// Number of samples the matching synthesis call will return.
        pub fn out_len(&self) -> usize {
            self.meta.out_len
        }

        pub fn sample_rate(&self) -> u32 {
            self.meta.sample_rate
        }
    };
}

/// STFT-domain frames as parallel real/imaginary grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    meta: GridMeta,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexSpectrogram {
    pub(crate) fn for_signal(config: FrameConfig, signal_len: usize, sample_rate: u32) -> Self {
        let meta = GridMeta::for_signal(config, config.fourier_bins(), signal_len, sample_rate);
        let n = meta.bins * meta.n_frames;
        Self { meta, re: vec![0.0; n], im: vec![0.0; n] }
    }

    /// Builds a spectrogram from raw frames with no edge-trim metadata; the
    /// matching [`istft`](crate::istft) returns the full overlap-add range.
    pub fn from_frames(
        config: FrameConfig,
        n_frames: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    ) -> Result<Self, DspError> {
        config.validate()?;
        let bins = config.fourier_bins();
        if re.len() != bins * n_frames || im.len() != bins * n_frames {
            return Err(DspError::ShapeMismatch(format!(
                "expected {} values per grid, got re={} im={}",
                bins * n_frames,
                re.len(),
                im.len()
            )));
        }
        Ok(Self { meta: GridMeta::raw(config, bins, n_frames), re, im })
    }

    grid_accessors!();

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn frame_re(&self, t: usize) -> &[f64] {
        &self.re[t * self.meta.bins..(t + 1) * self.meta.bins]
    }

    pub fn frame_im(&self, t: usize) -> &[f64] {
        &self.im[t * self.meta.bins..(t + 1) * self.meta.bins]
    }

    pub(crate) fn frame_mut(&mut self, t: usize) -> (&mut [f64], &mut [f64]) {
        let b = self.meta.bins;
        (&mut self.re[t * b..(t + 1) * b], &mut self.im[t * b..(t + 1) * b])
    }

    /// Polar decomposition into magnitude and phase grids.
    pub fn to_polar(&self) -> (MagnitudeSpectrogram, PhaseSpectrogram) {
        let mag = self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect();
        let phase = self.re.iter().zip(&self.im).map(|(r, i)| i.atan2(*r)).collect();
        (
            MagnitudeSpectrogram { meta: self.meta.clone(), data: mag },
            PhaseSpectrogram { meta: self.meta.clone(), data: phase },
        )
    }

    /// Rebuilds the complex grid from magnitude and phase (`m * e^{i*theta}`).
    pub fn from_polar(
        mag: &MagnitudeSpectrogram,
        phase: &PhaseSpectrogram,
    ) -> Result<Self, DspError> {
        if mag.meta.bins != phase.meta.bins || mag.meta.n_frames != phase.meta.n_frames {
            return Err(DspError::ShapeMismatch(
                "magnitude and phase grids differ in shape".into(),
            ));
        }
        let re = mag.data.iter().zip(&phase.data).map(|(m, p)| m * p.cos()).collect();
        let im = mag.data.iter().zip(&phase.data).map(|(m, p)| m * p.sin()).collect();
        Ok(Self { meta: mag.meta.clone(), re, im })
    }

    /// Scales each bin of `self` by `gain[k] / |self[k]|`, leaving exact
    /// zeros untouched. The result has magnitude `gain` wherever the source
    /// bin is nonzero, and keeps the source phase.
    pub fn with_magnitude(&self, gain: &MagnitudeSpectrogram) -> Result<Self, DspError> {
        if gain.meta.bins != self.meta.bins || gain.meta.n_frames != self.meta.n_frames {
            return Err(DspError::ShapeMismatch("gain grid differs in shape".into()));
        }
        let mut out = self.clone();
        apply_magnitude_gain(&mut out.re, &mut out.im, &gain.data);
        Ok(out)
    }
}

/// Rescales complex bins in place to the target magnitudes, keeping phase.
/// Bins with exactly zero magnitude stay zero (their phase is undefined),
/// which propagates silence through the whole pipeline.
pub fn apply_magnitude_gain(re: &mut [f64], im: &mut [f64], target_mag: &[f64]) {
    for ((r, i), g) in re.iter_mut().zip(im.iter_mut()).zip(target_mag) {
        let mag = r.hypot(*i);
        if mag > 0.0 {
            let scale = *g / mag;
            *r *= scale;
            *i *= scale;
        }
    }
}

/// Non-negative STFT magnitude grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    meta: GridMeta,
    data: Vec<f64>,
}

impl MagnitudeSpectrogram {
    pub fn from_frames(
        config: FrameConfig,
        n_frames: usize,
        data: Vec<f64>,
    ) -> Result<Self, DspError> {
        config.validate()?;
        let bins = config.fourier_bins();
        if data.len() != bins * n_frames {
            return Err(DspError::ShapeMismatch(format!(
                "expected {} values, got {}",
                bins * n_frames,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DspError::InvalidConfig("magnitudes must be finite and >= 0".into()));
        }
        Ok(Self { meta: GridMeta::raw(config, bins, n_frames), data })
    }

    /// Replaces the grid values, keeping the framing metadata. Used to carry
    /// an enhanced magnitude alongside the analysis metadata of its source.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self, DspError> {
        if data.len() != self.data.len() {
            return Err(DspError::ShapeMismatch(format!(
                "expected {} values, got {}",
                self.data.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DspError::InvalidConfig("magnitudes must be finite and >= 0".into()));
        }
        Ok(Self { meta: self.meta.clone(), data })
    }

    grid_accessors!();

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.meta.bins..(t + 1) * self.meta.bins]
    }
}

/// STFT phase grid in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrogram {
    meta: GridMeta,
    data: Vec<f64>,
}

impl PhaseSpectrogram {
    grid_accessors!();

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.meta.bins..(t + 1) * self.meta.bins]
    }
}

/// STDCT-domain frames: signed real coefficients, `transform_points` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSpectrogram {
    meta: GridMeta,
    data: Vec<f64>,
}

impl RealSpectrogram {
    pub(crate) fn for_signal(config: FrameConfig, signal_len: usize, sample_rate: u32) -> Self {
        let meta = GridMeta::for_signal(config, config.cosine_bins(), signal_len, sample_rate);
        let n = meta.bins * meta.n_frames;
        Self { meta, data: vec![0.0; n] }
    }

    pub fn from_frames(
        config: FrameConfig,
        n_frames: usize,
        data: Vec<f64>,
    ) -> Result<Self, DspError> {
        config.validate()?;
        let bins = config.cosine_bins();
        if data.len() != bins * n_frames {
            return Err(DspError::ShapeMismatch(format!(
                "expected {} values, got {}",
                bins * n_frames,
                data.len()
            )));
        }
        Ok(Self { meta: GridMeta::raw(config, bins, n_frames), data })
    }

    /// Replaces the grid values, keeping the framing metadata.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self, DspError> {
        if data.len() != self.data.len() {
            return Err(DspError::ShapeMismatch(format!(
                "expected {} values, got {}",
                self.data.len(),
                data.len()
            )));
        }
        Ok(Self { meta: self.meta.clone(), data })
    }

    grid_accessors!();

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.meta.bins..(t + 1) * self.meta.bins]
    }

    pub(crate) fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let b = self.meta.bins;
        &mut self.data[t * b..(t + 1) * b]
    }
}
