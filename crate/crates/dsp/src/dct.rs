use crate::error::DspError;
use crate::frame::{overlap_add, windowed_frame};
use crate::types::{FrameConfig, RealSpectrogram, Waveform};
use crate::window::make_window;

/// Cosine table over the quarter-sample grid: `cos(pi * m / (2n))` for
/// `m in 0..4n`, the full period of the DCT-II/III kernels.
struct CosTable {
    n: usize,
    table: Vec<f64>,
}

impl CosTable {
    fn new(n: usize) -> Self {
        let step = std::f64::consts::PI / (2 * n) as f64;
        Self { n, table: (0..4 * n).map(|m| (step * m as f64).cos()).collect() }
    }

    fn scale(&self, k: usize) -> f64 {
        if k == 0 {
            (1.0 / self.n as f64).sqrt()
        } else {
            (2.0 / self.n as f64).sqrt()
        }
    }
}

/// Orthonormal DCT-II of one frame:
/// `c[k] = beta(k) * sum_j f[j] * cos(pi * (2j+1) * k / (2n))`,
/// with `beta(0) = sqrt(1/n)` and `beta(k) = sqrt(2/n)` otherwise.
pub fn dct2_frame(frame: &[f64], out: &mut [f64]) {
    let tab = CosTable::new(frame.len());
    dct2_frame_with(&tab, frame, out);
}

fn dct2_frame_with(tab: &CosTable, frame: &[f64], out: &mut [f64]) {
    let n = tab.n;
    debug_assert_eq!(frame.len(), n);
    debug_assert_eq!(out.len(), n);
    let period = 4 * n;
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        let mut m = k; // (2*0 + 1) * k
        let step = 2 * k;
        for &x in frame {
            acc += x * tab.table[m];
            m += step;
            if m >= period {
                m -= period;
            }
        }
        *o = acc * tab.scale(k);
    }
}

/// Inverse of [`dct2_frame`] (orthonormal DCT-III):
/// `f[j] = sum_k beta(k) * c[k] * cos(pi * (2j+1) * k / (2n))`.
pub fn dct3_frame(coeffs: &[f64], out: &mut [f64]) {
    let tab = CosTable::new(coeffs.len());
    dct3_frame_with(&tab, coeffs, out);
}

fn dct3_frame_with(tab: &CosTable, coeffs: &[f64], out: &mut [f64]) {
    let n = tab.n;
    debug_assert_eq!(coeffs.len(), n);
    debug_assert_eq!(out.len(), n);
    let period = 4 * n;
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        let step = 2 * j + 1;
        let mut m = 0; // step * k at k = 0
        for (k, &c) in coeffs.iter().enumerate() {
            acc += c * tab.scale(k) * tab.table[m];
            m += step;
            if m >= period {
                m -= period;
            }
        }
        *o = acc;
    }
}

/// Short-time discrete cosine transform: shares framing and windowing with
/// [`stft`](crate::stft), transforming each windowed frame with the
/// orthonormal DCT-II over `transform_points` bins.
pub fn stdct(x: &Waveform, config: &FrameConfig) -> Result<RealSpectrogram, DspError> {
    config.validate()?;
    if x.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let window = make_window(config)?;
    let tab = CosTable::new(config.transform_points);
    let mut spec = RealSpectrogram::for_signal(*config, x.len(), x.sample_rate());
    let mut frame = vec![0.0f64; config.transform_points];
    for t in 0..spec.n_frames() {
        windowed_frame(x.samples(), t, config, &window, &mut frame);
        dct2_frame_with(&tab, &frame, spec.frame_mut(t));
    }
    Ok(spec)
}

/// Inverse STDCT: per-frame DCT-III followed by the same weighted
/// overlap-add normalization as [`istft`](crate::istft).
pub fn istdct(spec: &RealSpectrogram) -> Result<Waveform, DspError> {
    let config = *spec.config();
    config.validate()?;
    if spec.bins() != config.cosine_bins() {
        return Err(DspError::ShapeMismatch(format!(
            "spectrogram has {} bins, config expects {}",
            spec.bins(),
            config.cosine_bins()
        )));
    }
    let window = make_window(&config)?;
    let tab = CosTable::new(config.transform_points);
    let n = config.transform_points;
    let frames = (0..spec.n_frames()).map(|t| {
        let mut out = vec![0.0f64; n];
        dct3_frame_with(&tab, spec.frame(t), &mut out);
        out
    });
    let samples = overlap_add(
        frames,
        spec.n_frames(),
        &config,
        &window,
        spec.pad_lead(),
        spec.out_len(),
    );
    Waveform::new(samples, spec.sample_rate())
}
