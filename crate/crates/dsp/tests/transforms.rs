//! Transform correctness against brute-force definitions and round trips.

use fdfnet_dsp::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Independent O(N^2) DFT evaluated straight from the definition.
fn naive_dft(frame: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = frame.len();
    let bins = n / 2 + 1;
    let mut re = vec![0.0; bins];
    let mut im = vec![0.0; bins];
    for k in 0..bins {
        for (j, &x) in frame.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            re[k] += x * ang.cos();
            im[k] += x * ang.sin();
        }
    }
    (re, im)
}

/// Independent O(N^2) orthonormal DCT-II evaluated straight from the definition.
fn naive_dct2(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..n)
        .map(|k| {
            let beta = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            let sum: f64 = frame
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    x * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64)
                        .cos()
                })
                .sum();
            beta * sum
        })
        .collect()
}

/// Windowed frame `t` of the edge-padded signal, recomputed from scratch.
fn naive_windowed_frame(x: &[f32], t: usize, cfg: &FrameConfig) -> Vec<f64> {
    let w = make_window(cfg).unwrap();
    let pad = cfg.edge_pad() as isize;
    let mut frame = vec![0.0f64; cfg.transform_points];
    for k in 0..cfg.window_len {
        let idx = t as isize * cfg.hop as isize + k as isize - pad;
        if idx >= 0 && (idx as usize) < x.len() {
            frame[k] = x[idx as usize] as f64 * w[k];
        }
    }
    frame
}

fn rel_l2(a: &[f32], b: &[f32]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum();
    let den: f64 = b.iter().map(|y| (*y as f64).powi(2)).sum();
    (num / den.max(1e-300)).sqrt()
}

fn white_noise(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Waveform::mono_16k((0..len).map(|_| rng.random_range(-0.5f32..0.5)).collect()).unwrap()
}

fn chirp(len: usize) -> Waveform {
    let samples = (0..len)
        .map(|i| {
            let t = i as f32 / 16_000.0;
            (2.0 * std::f32::consts::PI * (200.0 + 1500.0 * t) * t).sin() * 0.4
        })
        .collect();
    Waveform::mono_16k(samples).unwrap()
}

#[test]
fn stft_matches_naive_dft_on_random_signal() {
    let cfg = FrameConfig::default();
    let x = white_noise(3 * cfg.hop + cfg.window_len, 7);
    let (_, _, spec) = stft(&x, &cfg).unwrap();
    for t in 0..spec.n_frames() {
        let frame = naive_windowed_frame(x.samples(), t, &cfg);
        let (re, im) = naive_dft(&frame);
        for k in 0..spec.bins() {
            assert!((spec.frame_re(t)[k] - re[k]).abs() < 1e-8, "re mismatch t={t} k={k}");
            assert!((spec.frame_im(t)[k] - im[k]).abs() < 1e-8, "im mismatch t={t} k={k}");
        }
    }
}

#[test]
fn stft_of_constant_signal_has_window_sum_at_dc() {
    let cfg = FrameConfig::default();
    let x = Waveform::mono_16k(vec![1.0; 16_000]).unwrap();
    let (mag, _, _) = stft(&x, &cfg).unwrap();
    let w = make_window(&cfg).unwrap();
    let wsum: f64 = w.iter().sum();
    // Interior frames fully covered by the constant signal.
    let pad = cfg.edge_pad();
    let first_full = pad.div_ceil(cfg.hop);
    let last_full = (pad + x.len() - cfg.window_len) / cfg.hop;
    for t in first_full..=last_full {
        let rel = (mag.frame(t)[0] - wsum).abs() / wsum;
        assert!(rel < 1e-12, "frame {t}: dc {} vs window sum {wsum}", mag.frame(t)[0]);
    }
}

#[test]
fn stft_of_silence_is_zero() {
    let cfg = FrameConfig::default();
    let x = Waveform::mono_16k(vec![0.0; 16_000]).unwrap();
    let (mag, _, spec) = stft(&x, &cfg).unwrap();
    assert!(mag.data().iter().all(|&v| v == 0.0));
    assert!(spec.re().iter().all(|&v| v == 0.0));
    assert!(spec.im().iter().all(|&v| v == 0.0));
}

#[test]
fn magnitude_is_elementwise_hypot_of_complex_grid() {
    let cfg = FrameConfig::default();
    let x = white_noise(4000, 11);
    let (mag, _, spec) = stft(&x, &cfg).unwrap();
    for (i, &m) in mag.data().iter().enumerate() {
        let expect = (spec.re()[i].powi(2) + spec.im()[i].powi(2)).sqrt();
        assert!((m - expect).abs() <= 1e-12 * expect.max(1.0));
    }
}

#[test]
fn polar_recombination_reconstructs_complex_grid() {
    let cfg = FrameConfig::default();
    let x = white_noise(2500, 12);
    let (mag, phase, spec) = stft(&x, &cfg).unwrap();
    let rebuilt = ComplexSpectrogram::from_polar(&mag, &phase).unwrap();
    for i in 0..spec.re().len() {
        let scale = spec.re()[i].abs().max(spec.im()[i].abs()).max(1.0);
        assert!((rebuilt.re()[i] - spec.re()[i]).abs() < 1e-10 * scale);
        assert!((rebuilt.im()[i] - spec.im()[i]).abs() < 1e-10 * scale);
    }
}

#[test]
fn istft_round_trip_white_noise() {
    let cfg = FrameConfig::default();
    let x = white_noise(16_000, 3);
    let (_, _, spec) = stft(&x, &cfg).unwrap();
    let y = istft(&spec).unwrap();
    assert_eq!(y.len(), x.len());
    assert!(rel_l2(y.samples(), x.samples()) <= 1e-6);
}

#[test]
fn istft_of_zero_spectrogram_is_silence() {
    let cfg = FrameConfig::default();
    let bins = cfg.fourier_bins();
    let spec =
        ComplexSpectrogram::from_frames(cfg, 5, vec![0.0; bins * 5], vec![0.0; bins * 5]).unwrap();
    let y = istft(&spec).unwrap();
    assert!(y.samples().iter().all(|&v| v == 0.0));
}

#[test]
fn istft_single_frame_is_windowed_frame_over_envelope() {
    // A single analysis frame of known content u: the DFT of (w .* u) must
    // synthesize back to u, since WOLA divides the windowed frame by w^2.
    let cfg = FrameConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let u: Vec<f64> = (0..cfg.window_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = make_window(&cfg).unwrap();
    let windowed: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a * b).collect();
    let (re, im) = naive_dft(&windowed);
    let spec = ComplexSpectrogram::from_frames(cfg, 1, re, im).unwrap();
    let y = istft(&spec).unwrap();
    assert_eq!(y.len(), cfg.window_len);
    for (k, &out) in y.samples().iter().enumerate() {
        assert!(
            (out as f64 - u[k]).abs() < 1e-6,
            "sample {k}: {out} vs {}",
            u[k]
        );
    }
}

#[test]
fn stdct_matches_naive_dct_on_random_signal() {
    let cfg = FrameConfig::default();
    let x = white_noise(3 * cfg.hop + cfg.window_len, 17);
    let spec = stdct(&x, &cfg).unwrap();
    for t in 0..spec.n_frames() {
        let frame = naive_windowed_frame(x.samples(), t, &cfg);
        let want = naive_dct2(&frame);
        for k in 0..spec.bins() {
            assert!(
                (spec.frame(t)[k] - want[k]).abs() < 1e-8,
                "dct mismatch t={t} k={k}"
            );
        }
    }
}

#[test]
fn stdct_impulse_single_frame_matches_closed_form() {
    // No overlap and no edge padding: the impulse at sample 0 sits at frame
    // position 0, so c[k] = w[0] * beta(k) * cos(pi*k/(2N)).
    let cfg = FrameConfig {
        window_len: 64,
        hop: 64,
        transform_points: 64,
        window: WindowKind::Hamming,
    };
    let mut samples = vec![0.0f32; 64];
    samples[0] = 1.0;
    let x = Waveform::mono_16k(samples).unwrap();
    let spec = stdct(&x, &cfg).unwrap();
    assert_eq!(spec.n_frames(), 1);
    let w = make_window(&cfg).unwrap();
    let n = cfg.transform_points as f64;
    for k in 0..cfg.transform_points {
        let beta = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        let want = w[0] * beta * (std::f64::consts::PI * k as f64 / (2.0 * n)).cos();
        assert!((spec.frame(0)[k] - want).abs() < 1e-12, "bin {k}");
    }
}

#[test]
fn stdct_of_silence_is_zero() {
    let cfg = FrameConfig::default();
    let x = Waveform::mono_16k(vec![0.0; 8000]).unwrap();
    let spec = stdct(&x, &cfg).unwrap();
    assert!(spec.data().iter().all(|&v| v == 0.0));
}

#[test]
fn dct_parseval_energy_is_preserved() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let frame: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut coeffs = vec![0.0f64; 512];
    dct2_frame(&frame, &mut coeffs);
    let e_time: f64 = frame.iter().map(|v| v * v).sum();
    let e_freq: f64 = coeffs.iter().map(|v| v * v).sum();
    assert!((e_time - e_freq).abs() / e_time <= 1e-9);
}

#[test]
fn dct_matrix_is_orthonormal_at_512() {
    let n = 512;
    // Rows of the DCT-II matrix, one basis vector per coefficient.
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![0.0f64; n];
        e[k] = 1.0;
        let mut row = vec![0.0f64; n];
        dct3_frame(&e, &mut row); // column k of DCT-III = row k of DCT-II transposed
        rows.push(row);
    }
    let mut max_dev = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let dot: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            max_dev = max_dev.max((dot - want).abs());
        }
    }
    assert!(max_dev <= 1e-10, "max deviation {max_dev}");
}

#[test]
fn istdct_round_trip_chirp() {
    let cfg = FrameConfig::default();
    let x = chirp(12_000);
    let spec = stdct(&x, &cfg).unwrap();
    let y = istdct(&spec).unwrap();
    assert_eq!(y.len(), x.len());
    assert!(rel_l2(y.samples(), x.samples()) <= 1e-6);
}

#[test]
fn istdct_of_zero_spectrogram_is_silence() {
    let cfg = FrameConfig::default();
    let spec = RealSpectrogram::from_frames(cfg, 4, vec![0.0; cfg.cosine_bins() * 4]).unwrap();
    let y = istdct(&spec).unwrap();
    assert!(y.samples().iter().all(|&v| v == 0.0));
}

#[test]
fn istdct_is_linear() {
    let cfg = FrameConfig::default();
    let a = stdct(&white_noise(5000, 31), &cfg).unwrap();
    let b = stdct(&white_noise(5000, 32), &cfg).unwrap();
    let (ca, cb) = (0.37f64, -1.42f64);
    let mixed: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| ca * x + cb * y)
        .collect();
    let mixed = a.with_data(mixed).unwrap();
    let ya = istdct(&a).unwrap();
    let yb = istdct(&b).unwrap();
    let ym = istdct(&mixed).unwrap();
    for i in 0..ym.len() {
        let want = ca * ya.samples()[i] as f64 + cb * yb.samples()[i] as f64;
        assert!((ym.samples()[i] as f64 - want).abs() < 1e-6);
    }
}

#[test]
fn prepended_silence_shifts_spectrogram_frames() {
    let cfg = FrameConfig::default();
    let x = white_noise(4000, 41);
    let shift_frames = 3;
    let mut shifted = vec![0.0f32; shift_frames * cfg.hop];
    shifted.extend_from_slice(x.samples());
    let shifted = Waveform::mono_16k(shifted).unwrap();

    let (_, _, spec) = stft(&x, &cfg).unwrap();
    let (_, _, spec_s) = stft(&shifted, &cfg).unwrap();
    assert_eq!(spec_s.n_frames(), spec.n_frames() + shift_frames);
    for t in 0..spec.n_frames() {
        assert_eq!(spec.frame_re(t), spec_s.frame_re(t + shift_frames));
        assert_eq!(spec.frame_im(t), spec_s.frame_im(t + shift_frames));
    }

    let dct = stdct(&x, &cfg).unwrap();
    let dct_s = stdct(&shifted, &cfg).unwrap();
    for t in 0..dct.n_frames() {
        assert_eq!(dct.frame(t), dct_s.frame(t + shift_frames));
    }
}

#[test]
fn cola_envelope_is_strictly_positive_for_quarter_hop() {
    let cfg = FrameConfig::default();
    let w = make_window(&cfg).unwrap();
    let env = cola_envelope(&w, cfg.hop, 20);
    // Interior = positions with full overlap.
    let interior = &env[cfg.window_len - cfg.hop..env.len() - (cfg.window_len - cfg.hop)];
    assert!(interior.iter().all(|&e| e > 0.0));
    let periodic = periodic_envelope(&w, cfg.hop);
    for (i, &e) in interior.iter().enumerate() {
        let r = (cfg.window_len - cfg.hop + i) % cfg.hop;
        assert!((e - periodic[r]).abs() < 1e-12);
    }
}

#[test]
fn transforms_are_deterministic() {
    let cfg = FrameConfig::default();
    let x = white_noise(6000, 55);
    let (m1, p1, c1) = stft(&x, &cfg).unwrap();
    let (m2, p2, c2) = stft(&x, &cfg).unwrap();
    assert_eq!(m1.data(), m2.data());
    assert_eq!(p1.data(), p2.data());
    assert_eq!(c1.re(), c2.re());
    let y1 = istft(&c1).unwrap();
    let y2 = istft(&c2).unwrap();
    assert_eq!(y1.samples(), y2.samples());
    let d1 = stdct(&x, &cfg).unwrap();
    let d2 = stdct(&x, &cfg).unwrap();
    assert_eq!(d1.data(), d2.data());
    assert_eq!(istdct(&d1).unwrap().samples(), istdct(&d2).unwrap().samples());
}

#[test]
fn empty_input_is_rejected() {
    let cfg = FrameConfig::default();
    let x = Waveform::mono_16k(vec![]).unwrap();
    assert!(matches!(stft(&x, &cfg), Err(DspError::EmptyInput)));
    assert!(matches!(stdct(&x, &cfg), Err(DspError::EmptyInput)));
}

#[test]
fn mismatched_bin_count_is_rejected() {
    let cfg = FrameConfig::default();
    let other = FrameConfig { transform_points: 1024, window_len: 1024, ..cfg };
    let spec = RealSpectrogram::from_frames(other, 2, vec![0.0; 1024 * 2]).unwrap();
    // Rebuild under the default config's bin expectation by lying about bins.
    let bad = RealSpectrogram::from_frames(cfg, 2, vec![0.0; cfg.cosine_bins() * 2]).unwrap();
    assert!(istdct(&bad).is_ok());
    assert!(istdct(&spec).is_ok());
    // A grid whose data length disagrees with its config is unconstructable.
    assert!(RealSpectrogram::from_frames(cfg, 2, vec![0.0; 100]).is_err());
}
