//! Waveform fidelity metrics: SI-SDR and plain SNR, capped at +/- 100 dB.

use fdfnet_dsp::Waveform;

pub const METRIC_CAP_DB: f64 = 100.0;

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn cap(db: f64) -> f64 {
    db.clamp(-METRIC_CAP_DB, METRIC_CAP_DB)
}

/// Scale-invariant signal-to-distortion ratio of `estimate` against
/// `reference`, in dB. The reference is scaled by the optimal projection
/// before measuring the residual, so pure gain differences score the cap.
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> f64 {
    assert_eq!(estimate.len(), reference.len(), "length mismatch");
    let e_ref = dot(reference.samples(), reference.samples());
    if e_ref == 0.0 {
        return -METRIC_CAP_DB;
    }
    let alpha = dot(estimate.samples(), reference.samples()) / e_ref;
    let mut target = 0.0f64;
    let mut resid = 0.0f64;
    for (&e, &r) in estimate.samples().iter().zip(reference.samples()) {
        let t = alpha * r as f64;
        target += t * t;
        let d = e as f64 - t;
        resid += d * d;
    }
    if resid == 0.0 {
        return METRIC_CAP_DB;
    }
    cap(10.0 * (target / resid).log10())
}

/// Plain signal-to-noise ratio: reference energy over residual energy.
pub fn snr(estimate: &Waveform, reference: &Waveform) -> f64 {
    assert_eq!(estimate.len(), reference.len(), "length mismatch");
    let mut e_ref = 0.0f64;
    let mut resid = 0.0f64;
    for (&e, &r) in estimate.samples().iter().zip(reference.samples()) {
        e_ref += r as f64 * r as f64;
        let d = e as f64 - r as f64;
        resid += d * d;
    }
    if resid == 0.0 {
        return METRIC_CAP_DB;
    }
    if e_ref == 0.0 {
        return -METRIC_CAP_DB;
    }
    cap(10.0 * (e_ref / resid).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn wave(seed: u64, len: usize) -> Waveform {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Waveform::mono_16k((0..len).map(|_| rng.random_range(-0.5f32..0.5)).collect()).unwrap()
    }

    #[test]
    fn identical_signals_hit_the_cap() {
        let x = wave(1, 4000);
        assert_eq!(si_sdr(&x, &x), METRIC_CAP_DB);
        assert_eq!(snr(&x, &x), METRIC_CAP_DB);
    }

    #[test]
    fn scaling_distinguishes_the_two_metrics() {
        let x = wave(2, 4000);
        let doubled =
            Waveform::mono_16k(x.samples().iter().map(|&v| 2.0 * v).collect()).unwrap();
        assert_eq!(si_sdr(&doubled, &x), METRIC_CAP_DB);
        // Residual equals the reference -> 0 dB.
        let s = snr(&doubled, &x);
        assert!(s.abs() < 1e-6, "snr of doubled signal: {s}");
    }

    #[test]
    fn random_signals_match_direct_formula() {
        let est = wave(3, 3000);
        let refr = wave(4, 3000);
        // Direct-formula reference implementation.
        let er: f64 = refr.samples().iter().map(|&v| (v as f64).powi(2)).sum();
        let cross: f64 = est
            .samples()
            .iter()
            .zip(refr.samples())
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        let alpha = cross / er;
        let num: f64 = refr.samples().iter().map(|&v| (alpha * v as f64).powi(2)).sum();
        let den: f64 = est
            .samples()
            .iter()
            .zip(refr.samples())
            .map(|(&a, &b)| (a as f64 - alpha * b as f64).powi(2))
            .sum();
        let want = 10.0 * (num / den).log10();
        assert!((si_sdr(&est, &refr) - want).abs() < 1e-9);

        let resid: f64 = est
            .samples()
            .iter()
            .zip(refr.samples())
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum();
        let want_snr = 10.0 * (er / resid).log10();
        assert!((snr(&est, &refr) - want_snr).abs() < 1e-9);
    }

    #[test]
    fn noisy_estimate_scores_below_perfect() {
        let clean = wave(5, 4000);
        let noisy = Waveform::mono_16k(
            clean.samples().iter().enumerate().map(|(i, &v)| v + ((i % 7) as f32 - 3.0) * 0.01).collect(),
        )
        .unwrap();
        assert!(si_sdr(&noisy, &clean) < si_sdr(&clean, &clean));
    }
}
