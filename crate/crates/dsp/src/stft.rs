use crate::error::DspError;
use crate::frame::{overlap_add, windowed_frame};
use crate::types::{ComplexSpectrogram, FrameConfig, MagnitudeSpectrogram, PhaseSpectrogram, Waveform};
use crate::window::make_window;

/// One period of `e^{-i 2 pi m / n}` for table-driven frame transforms.
struct Twiddles {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddles {
    fn new(n: usize) -> Self {
        let step = -2.0 * std::f64::consts::PI / n as f64;
        let (sin, cos) = (0..n).map(|m| (step * m as f64).sin_cos()).unzip();
        Self { cos, sin }
    }
}

/// Forward DFT of one real frame onto `n/2 + 1` bins:
/// `X[k] = sum_j f[j] * e^{-i 2 pi k j / n}`.
pub fn dft_frame(frame: &[f64], re: &mut [f64], im: &mut [f64]) {
    let tw = Twiddles::new(frame.len());
    dft_frame_with(&tw, frame, re, im);
}

fn dft_frame_with(tw: &Twiddles, frame: &[f64], re: &mut [f64], im: &mut [f64]) {
    let n = frame.len();
    let bins = n / 2 + 1;
    debug_assert_eq!(re.len(), bins);
    debug_assert_eq!(im.len(), bins);
    for k in 0..bins {
        let mut acc_re = 0.0f64;
        let mut acc_im = 0.0f64;
        let mut m = 0;
        for &x in frame {
            acc_re += x * tw.cos[m];
            acc_im += x * tw.sin[m];
            m += k;
            if m >= n {
                m -= n;
            }
        }
        re[k] = acc_re;
        im[k] = acc_im;
    }
}

/// Inverse of [`dft_frame`] for a real signal given the half spectrum.
pub fn idft_frame(re: &[f64], im: &[f64], out: &mut [f64]) {
    let tw = Twiddles::new(out.len());
    idft_frame_with(&tw, re, im, out);
}

fn idft_frame_with(tw: &Twiddles, re: &[f64], im: &[f64], out: &mut [f64]) {
    let n = out.len();
    let bins = n / 2 + 1;
    debug_assert_eq!(re.len(), bins);
    debug_assert_eq!(im.len(), bins);
    let nyquist_unique = n % 2 == 0;
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = re[0];
        let mut m = 0;
        for k in 1..bins {
            m += j;
            if m >= n {
                m -= n;
            }
            // Table holds e^{-i..}; synthesis needs the conjugate.
            let term = re[k] * tw.cos[m] + im[k] * tw.sin[m];
            if k == bins - 1 && nyquist_unique {
                acc += term;
            } else {
                acc += 2.0 * term;
            }
        }
        *o = acc / n as f64;
    }
}

/// Short-time Fourier transform. Frames cover `[t*hop, t*hop + window_len)`
/// of the edge-padded signal; each frame is windowed and transformed.
pub fn stft(
    x: &Waveform,
    config: &FrameConfig,
) -> Result<(MagnitudeSpectrogram, PhaseSpectrogram, ComplexSpectrogram), DspError> {
    config.validate()?;
    if x.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let window = make_window(config)?;
    let tw = Twiddles::new(config.transform_points);
    let mut spec = ComplexSpectrogram::for_signal(*config, x.len(), x.sample_rate());
    let mut frame = vec![0.0f64; config.transform_points];
    for t in 0..spec.n_frames() {
        windowed_frame(x.samples(), t, config, &window, &mut frame);
        let (re, im) = spec.frame_mut(t);
        dft_frame_with(&tw, &frame, re, im);
    }
    let (mag, phase) = spec.to_polar();
    Ok((mag, phase, spec))
}

/// Inverse STFT with weighted overlap-add; trims to the range recorded in
/// the spectrogram's metadata.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform, DspError> {
    let config = *spec.config();
    config.validate()?;
    if spec.bins() != config.fourier_bins() {
        return Err(DspError::ShapeMismatch(format!(
            "spectrogram has {} bins, config expects {}",
            spec.bins(),
            config.fourier_bins()
        )));
    }
    let window = make_window(&config)?;
    let tw = Twiddles::new(config.transform_points);
    let n = config.transform_points;
    let frames = (0..spec.n_frames()).map(|t| {
        let mut out = vec![0.0f64; n];
        idft_frame_with(&tw, spec.frame_re(t), spec.frame_im(t), &mut out);
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
