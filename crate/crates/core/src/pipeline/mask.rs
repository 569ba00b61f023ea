//! Cosine-domain ideal ratio mask: clean spectrum over pre-enhanced
//! spectrum, with a sign-preserving denominator floor and symmetric clipping.

use fdfnet_dsp::RealSpectrogram;

use crate::error::CoreError;

pub const DEFAULT_CLIP_BOUND: f64 = 2.0;
pub const DENOM_FLOOR: f64 = 1e-8;

/// Bounded signed ratio mask over a cosine spectrogram grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dctirm {
    values: Vec<f64>,
    bins: usize,
    n_frames: usize,
    clip_bound: f64,
}

impl Dctirm {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.bins..(t + 1) * self.bins]
    }
}

/// Floors the denominator away from zero without changing its sign; exact
/// zeros count as positive.
pub fn floor_denominator(d: f64) -> f64 {
    if d >= 0.0 {
        d.max(DENOM_FLOOR)
    } else {
        d.min(-DENOM_FLOOR)
    }
}

/// Elementwise `clean / pre_enhanced`, floored and clipped. Total on any
/// input pair of matching shape.
pub fn compute_dctirm(
    clean: &RealSpectrogram,
    pre_enhanced: &RealSpectrogram,
    clip_bound: f64,
) -> Result<Dctirm, CoreError> {
    if clean.bins() != pre_enhanced.bins() || clean.n_frames() != pre_enhanced.n_frames() {
        return Err(CoreError::Data(format!(
            "mask spectra differ in shape: {}x{} vs {}x{}",
            clean.bins(),
            clean.n_frames(),
            pre_enhanced.bins(),
            pre_enhanced.n_frames()
        )));
    }
    let values = clean
        .data()
        .iter()
        .zip(pre_enhanced.data())
        .map(|(s, d)| (s / floor_denominator(*d)).clamp(-clip_bound, clip_bound))
        .collect();
    Ok(Dctirm {
        values,
        bins: clean.bins(),
        n_frames: clean.n_frames(),
        clip_bound,
    })
}

/// Applies a mask grid to a cosine spectrogram elementwise.
pub fn apply_mask(mask: &[f64], spec: &RealSpectrogram) -> RealSpectrogram {
    debug_assert_eq!(mask.len(), spec.data().len());
    let data = mask.iter().zip(spec.data()).map(|(m, v)| m * v).collect();
    spec.with_data(data).expect("shape-preserving mask application")
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdfnet_dsp::FrameConfig;

    fn grid(cfg: FrameConfig, frames: usize, data: Vec<f64>) -> RealSpectrogram {
        RealSpectrogram::from_frames(cfg, frames, data).unwrap()
    }

    #[test]
    fn identical_spectra_give_unit_mask() {
        let cfg = FrameConfig::default();
        let data: Vec<f64> = (0..cfg.cosine_bins()).map(|i| (i as f64 - 100.0) / 7.0).collect();
        let a = grid(cfg, 1, data.clone());
        let b = grid(cfg, 1, data);
        let m = compute_dctirm(&a, &b, DEFAULT_CLIP_BOUND).unwrap();
        for (i, v) in m.values().iter().enumerate() {
            // Bins where the shared value is below the floor divide by the
            // floor instead; all others are exactly one.
            let x = a.data()[i];
            if x.abs() >= DENOM_FLOOR {
                assert!((v - 1.0).abs() < 1e-12, "bin {i}: {v}");
            }
        }
    }

    #[test]
    fn zero_clean_gives_zero_mask() {
        let cfg = FrameConfig::default();
        let zero = grid(cfg, 2, vec![0.0; 2 * cfg.cosine_bins()]);
        let denom: Vec<f64> = (0..2 * cfg.cosine_bins()).map(|i| (i as f64) - 300.0).collect();
        let d = grid(cfg, 2, denom);
        let m = compute_dctirm(&zero, &d, DEFAULT_CLIP_BOUND).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn randomized_grids_match_scalar_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        let cfg = FrameConfig::default();
        let n = 3 * cfg.cosine_bins();
        let clean: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let pre: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let a = grid(cfg, 3, clean.clone());
        let b = grid(cfg, 3, pre.clone());
        let m = compute_dctirm(&a, &b, 2.0).unwrap();
        for i in 0..n {
            // Scalar loop with the same floor/clip policy.
            let mut d = pre[i];
            if d >= 0.0 && d < DENOM_FLOOR {
                d = DENOM_FLOOR;
            } else if d < 0.0 && d > -DENOM_FLOOR {
                d = -DENOM_FLOOR;
            }
            let mut want = clean[i] / d;
            if want > 2.0 {
                want = 2.0;
            }
            if want < -2.0 {
                want = -2.0;
            }
            assert_eq!(m.values()[i], want, "element {i}");
        }
        assert!(m.values().iter().all(|&v| (-2.0..=2.0).contains(&v)));
    }
}
