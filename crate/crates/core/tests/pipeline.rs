//! Signal-flow contracts: stage-1 recombination, oracles, losses, streaming.

use fdfnet_core::data::{mix_at_snr, si_sdr};
use fdfnet_core::pipeline::{
    enhance_streaming, full_forward, loss_dsr, loss_fme, oracle_full, oracle_mask_only,
    oracle_stage1, stage1_enhance, FdfNet, StreamEnhancer,
};
use fdfnet_dsp::{stft, FrameConfig, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn speechish(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let f0: f64 = rng.random_range(100.0..200.0);
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            let env = 0.2 + 0.8 * (std::f64::consts::TAU * 3.0 * t).sin().abs();
            let mut v = 0.0;
            for k in 1..=4 {
                v += (std::f64::consts::TAU * f0 * k as f64 * t).sin() / k as f64;
            }
            (0.25 * env * v) as f32
        })
        .collect();
    Waveform::mono_16k(samples).unwrap()
}

fn white(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Waveform::mono_16k((0..len).map(|_| rng.random_range(-0.3f32..0.3)).collect()).unwrap()
}

#[test]
fn stage1_keeps_noisy_phase_where_magnitude_is_positive() {
    let model = FdfNet::<f32>::with_defaults(21).unwrap();
    let mix = mix_at_snr(&speechish(4000, 1), &white(4000, 2), 5.0, 3).unwrap();
    let (enhanced, _) = stage1_enhance(&model, &mix.mixture).unwrap();
    let (_, noisy_phase, noisy_complex) = stft(&mix.mixture, &model.frame).unwrap();
    let (enh_mag, enh_phase) = enhanced.to_polar();
    let (noisy_mag, _) = noisy_complex.to_polar();
    let mut checked = 0usize;
    for i in 0..enh_phase.data().len() {
        if noisy_mag.data()[i] > 1e-9 && enh_mag.data()[i] > 1e-9 {
            let d = (enh_phase.data()[i] - noisy_phase.data()[i]).abs();
            let d = d.min(std::f64::consts::TAU - d);
            assert!(d < 1e-9, "phase changed at bin {i}: {d}");
            checked += 1;
        }
    }
    assert!(checked > 1000, "expected plenty of nonzero bins, got {checked}");
}

#[test]
fn stage1_with_random_params_is_finite_and_full_length() {
    let model = FdfNet::<f32>::with_defaults(22).unwrap();
    let x = white(3000, 5);
    let (_, intermediate) = stage1_enhance(&model, &x).unwrap();
    assert_eq!(intermediate.len(), x.len());
    assert!(intermediate.samples().iter().all(|v| v.is_finite()));
}

#[test]
fn oracle_stage1_improves_over_noisy() {
    let clean = speechish(8000, 11);
    let mix = mix_at_snr(&clean, &white(8000, 12), 2.0, 13).unwrap();
    let frame = FrameConfig::default();
    let (_, oracle_wave) = oracle_stage1(&mix.mixture, &mix.clean, &frame).unwrap();
    let noisy_score = si_sdr(&mix.mixture, &mix.clean);
    let oracle_score = si_sdr(&oracle_wave, &mix.clean);
    println!("noisy {noisy_score:.2} dB -> oracle magnitude {oracle_score:.2} dB");
    assert!(oracle_score > noisy_score);
}

#[test]
fn double_oracle_reconstructs_clean_speech() {
    let mut worst = f64::INFINITY;
    for seed in 0..5u64 {
        let clean = speechish(6000, 100 + seed);
        let snr = [0.0, 5.0, 10.0][seed as usize % 3];
        let mix = mix_at_snr(&clean, &white(6000, 200 + seed), snr, seed).unwrap();
        let frame = FrameConfig::default();
        let out = oracle_full(&mix.mixture, &mix.clean, &frame, 2.0).unwrap();
        let score = si_sdr(&out, &mix.clean);
        worst = worst.min(score);
    }
    println!("double-oracle worst SI-SDR: {worst:.2} dB");
    assert!(worst >= 30.0, "double-oracle reconstruction too weak: {worst:.2} dB");
}

#[test]
fn mask_only_oracle_gives_large_improvement() {
    let mut improvements = Vec::new();
    for seed in 0..4u64 {
        let clean = speechish(6000, 300 + seed);
        let mix = mix_at_snr(&clean, &white(6000, 400 + seed), 5.0, seed).unwrap();
        let frame = FrameConfig::default();
        let out = oracle_mask_only(&mix.mixture, &mix.clean, &frame, 2.0).unwrap();
        improvements.push(si_sdr(&out, &mix.clean) - si_sdr(&mix.mixture, &mix.clean));
    }
    let mean: f64 = improvements.iter().sum::<f64>() / improvements.len() as f64;
    println!("mask-only oracle mean improvement: {mean:.2} dB");
    assert!(mean >= 10.0);
}

#[test]
fn silence_in_silence_out() {
    let model = FdfNet::<f32>::with_defaults(23).unwrap();
    let x = Waveform::mono_16k(vec![0.0; 4000]).unwrap();
    let y = full_forward(&model, &x).unwrap();
    assert_eq!(y.len(), 4000);
    assert!(y.samples().iter().all(|&v| v == 0.0), "zero input must yield zero output");
}

#[test]
fn full_forward_preserves_length_for_random_lengths() {
    let model = FdfNet::<f32>::with_defaults(24).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for _ in 0..3 {
        let len = rng.random_range(900..4200);
        let x = white(len, rng.random());
        let y = full_forward(&model, &x).unwrap();
        assert_eq!(y.len(), len);
        assert!(y.samples().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn loss_fme_matches_examples_and_reference_loop() {
    let a = vec![1.0f64, 2.0, 3.0, 4.0];
    assert_eq!(loss_fme(&a, &a), 0.0);
    let shifted: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
    assert!((loss_fme(&shifted, &a) - 1.0).abs() < 1e-15);

    let mut rng = ChaCha12Rng::seed_from_u64(31);
    let p: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut want = 0.0;
    for i in 0..100 {
        want += (p[i] - c[i]) * (p[i] - c[i]);
    }
    want /= 100.0;
    assert!((loss_fme(&p, &c) - want).abs() < 1e-12);
}

#[test]
fn loss_dsr_matches_examples_and_reference_loop() {
    let s = vec![0.5f64, -0.25, 0.75];
    let m = vec![1.0f64, 0.0, -1.0, 2.0];
    assert_eq!(loss_dsr(&s, &s, &m, &m), 0.0);
    let m_off: Vec<f64> = m.iter().map(|v| v + 0.3).collect();
    assert!((loss_dsr(&s, &s, &m_off, &m) - 0.09).abs() < 1e-12);

    let mut rng = ChaCha12Rng::seed_from_u64(32);
    let sh: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sr: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mp: Vec<f64> = (0..80).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mt: Vec<f64> = (0..80).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut l1 = 0.0;
    for i in 0..50 {
        l1 += (sh[i] - sr[i]).abs();
    }
    l1 /= 50.0;
    let mut mse = 0.0;
    for i in 0..80 {
        mse += (mp[i] - mt[i]) * (mp[i] - mt[i]);
    }
    mse /= 80.0;
    assert!((loss_dsr(&sh, &sr, &mp, &mt) - (l1 + mse)).abs() < 1e-12);
}

#[test]
fn streaming_matches_offline_for_all_chunk_sizes() {
    let model = FdfNet::<f32>::with_defaults(25).unwrap();
    let clean = speechish(4800, 41);
    let mix = mix_at_snr(&clean, &white(4800, 42), 5.0, 43).unwrap();
    let offline = full_forward(&model, &mix.mixture).unwrap();
    for chunk in [1usize, 128, 4096] {
        let streamed = enhance_streaming(&model, &mix.mixture, chunk).unwrap();
        assert_eq!(streamed.len(), offline.len());
        let max_diff = streamed
            .samples()
            .iter()
            .zip(offline.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        println!("chunk {chunk}: max abs diff {max_diff:.3e}");
        assert!(max_diff <= 1e-5, "chunk {chunk}: diff {max_diff}");
    }
}

#[test]
fn streaming_emission_follows_the_documented_latency() {
    let model = FdfNet::<f32>::with_defaults(26).unwrap();
    let mut enh = StreamEnhancer::new(&model);
    let latency = enh.latency_samples();
    assert_eq!(latency, 2 * (512 - 128));
    let x = white(4000, 51);
    let mut fed = 0usize;
    let mut emitted = 0usize;
    for block in x.samples().chunks(100) {
        fed += block.len();
        emitted += enh.push(block).len();
        let expect = (fed / 128) * 128;
        let expect = expect.saturating_sub(latency);
        assert_eq!(emitted, expect, "after {fed} samples");
    }
}

#[test]
fn streaming_silence_emits_silence() {
    let model = FdfNet::<f32>::with_defaults(27).unwrap();
    let mut enh = StreamEnhancer::new(&model);
    let mut out = Vec::new();
    for _ in 0..20 {
        out.extend(enh.push(&[0.0f32; 160]));
    }
    assert!(!out.is_empty());
    assert!(out.iter().all(|&v| v == 0.0));
}

#[test]
fn waveform_causality_holds_at_documented_latency() {
    let model = FdfNet::<f32>::with_defaults(28).unwrap();
    let x = white(4000, 61);
    let t_cut = 2500usize;
    let mut x2 = x.samples().to_vec();
    let mut rng = ChaCha12Rng::seed_from_u64(62);
    for v in x2.iter_mut().skip(t_cut) {
        *v = rng.random_range(-0.3..0.3);
    }
    let x2 = Waveform::mono_16k(x2).unwrap();
    let y1 = full_forward(&model, &x).unwrap();
    let y2 = full_forward(&model, &x2).unwrap();
    // Output sample i depends on input samples up to i + 895.
    let safe = t_cut - 896;
    for i in 0..safe {
        assert_eq!(y1.samples()[i], y2.samples()[i], "sample {i}");
    }
}
