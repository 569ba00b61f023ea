use crate::error::DspError;
use crate::types::{FrameConfig, WindowKind};

/// Builds the analysis/synthesis window: `w[k] = 0.54 - 0.46*cos(2*pi*k/(N-1))`.
pub fn make_window(config: &FrameConfig) -> Result<Vec<f64>, DspError> {
    config.validate()?;
    match config.window {
        WindowKind::Hamming => {
            let n = config.window_len;
            if n == 1 {
                return Ok(vec![1.0]);
            }
            let denom = (n - 1) as f64;
            Ok((0..n)
                .map(|k| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / denom).cos())
                .collect())
        }
    }
}

/// Summed squared-window envelope over one hop period, assuming every frame
/// position is fully overlapped (`window_len / hop` frames cover each
/// sample). The synthesis side divides by this table on the interior.
pub fn periodic_envelope(window: &[f64], hop: usize) -> Vec<f64> {
    let mut env = vec![0.0f64; hop];
    for (r, e) in env.iter_mut().enumerate() {
        // Sum in descending window-offset order, matching the ascending
        // frame order used by the full envelope below.
        let mut k = r + (window.len() - 1) / hop * hop;
        while k >= window.len() {
            k -= hop;
        }
        loop {
            *e += window[k] * window[k];
            if k < hop {
                break;
            }
            k -= hop;
        }
    }
    env
}

/// Summed squared-window envelope for `n_frames` frames at the given hop,
/// evaluated over the whole overlap-add range.
pub fn cola_envelope(window: &[f64], hop: usize, n_frames: usize) -> Vec<f64> {
    let len = (n_frames - 1) * hop + window.len();
    let mut env = vec![0.0f64; len];
    for t in 0..n_frames {
        for (k, w) in window.iter().enumerate() {
            env[t * hop + k] += w * w;
        }
    }
    env
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_endpoint_is_0_08() {
        let cfg = FrameConfig::default();
        let w = make_window(&cfg).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[511] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn hamming_is_symmetric_about_center() {
        let cfg = FrameConfig::default();
        let w = make_window(&cfg).unwrap();
        for k in 0..w.len() / 2 {
            assert!((w[k] - w[w.len() - 1 - k]).abs() < 1e-12);
        }
        assert!((w[255] - w[256]).abs() < 1e-12);
    }

    #[test]
    fn hamming_matches_cosine_formula_at_every_index() {
        let cfg = FrameConfig::default();
        let w = make_window(&cfg).unwrap();
        let n = cfg.window_len as f64;
        for (k, &v) in w.iter().enumerate() {
            let want = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1.0)).cos();
            assert!((v - want).abs() < 1e-15, "index {k}");
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = FrameConfig { hop: 0, ..FrameConfig::default() };
        assert!(make_window(&bad).is_err());
        let bad = FrameConfig { hop: 600, ..FrameConfig::default() };
        assert!(make_window(&bad).is_err());
        let bad = FrameConfig { transform_points: 256, ..FrameConfig::default() };
        assert!(make_window(&bad).is_err());
    }
}
