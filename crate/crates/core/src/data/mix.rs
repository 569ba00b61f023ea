//! Mixture construction at a target signal-to-noise ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use fdfnet_dsp::Waveform;

use crate::error::CoreError;

/// Output of [`mix_at_snr`]: the peak-normalized mixture and its aligned
/// components (`mixture = clean + noise` exactly, before float rounding).
#[derive(Debug, Clone)]
pub struct Mix {
    pub mixture: Waveform,
    pub clean: Waveform,
    pub noise: Waveform,
    /// Peak-normalization gain applied to all three signals.
    pub gain: f64,
}

fn energy(x: &[f32]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum()
}

/// Scales `noise` so that `10*log10(E_clean / E_noise)` equals `snr_db`,
/// adds it to `clean`, and peak-normalizes the mixture to at most 1 with the
/// same factor applied to both components. The noise is seeded-cropped or
/// tiled to the clean length.
pub fn mix_at_snr(
    clean: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    seed: u64,
) -> Result<Mix, CoreError> {
    if clean.is_empty() {
        return Err(CoreError::Data("clean source is empty".into()));
    }
    if noise.is_empty() {
        return Err(CoreError::Data("noise source is empty".into()));
    }
    let e_clean = energy(clean.samples());
    if e_clean == 0.0 {
        return Err(CoreError::Data("clean source is silent; SNR undefined".into()));
    }

    // Crop (seeded) or tile the noise to length.
    let len = clean.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n: Vec<f32> = if noise.len() >= len {
        let start = rng.random_range(0..=noise.len() - len);
        noise.samples()[start..start + len].to_vec()
    } else {
        (0..len).map(|i| noise.samples()[i % noise.len()]).collect()
    };
    let e_noise = energy(&n);
    if e_noise == 0.0 {
        return Err(CoreError::Data("noise crop is silent; SNR undefined".into()));
    }

    let alpha = (e_clean / (e_noise * 10f64.powf(snr_db / 10.0))).sqrt();

    // Peak of the unnormalized mixture, then one shared gain with a little
    // headroom so float rounding cannot push a sample past full scale.
    let peak = clean
        .samples()
        .iter()
        .zip(&n)
        .map(|(&s, &nv)| (s as f64 + nv as f64 * alpha).abs())
        .fold(0.0f64, f64::max);
    let gain = if peak > 1.0 { (1.0 - 1e-6) / peak } else { 1.0 };

    // The stored mixture is the exact f32 sum of the stored components, so
    // subtracting the noise recovers the clean signal up to one rounding.
    let clean_out: Vec<f32> = clean.samples().iter().map(|&s| (s as f64 * gain) as f32).collect();
    let noise_out: Vec<f32> = n.iter().map(|&v| (v as f64 * alpha * gain) as f32).collect();
    let mixture: Vec<f32> = clean_out.iter().zip(&noise_out).map(|(&a, &b)| a + b).collect();

    Ok(Mix {
        mixture: Waveform::new(mixture, clean.sample_rate())?,
        clean: Waveform::new(clean_out, clean.sample_rate())?,
        noise: Waveform::new(noise_out, clean.sample_rate())?,
        gain,
    })
}

/// Measured SNR of a (clean, noise) pair in dB.
pub fn measured_snr(clean: &Waveform, noise: &Waveform) -> f64 {
    10.0 * (energy(clean.samples()) / energy(noise.samples())).log10()
}
