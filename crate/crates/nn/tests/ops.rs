//! Layer-op contracts: identities, oracles, causality, streaming parity.

use fdfnet_nn::graph::Graph;
use fdfnet_nn::ops::conv::{conv2d_forward, conv2d_step, Conv2dSpec};
use fdfnet_nn::ops::deconv::{deconv2d_forward, deconv2d_step, Deconv2dSpec};
use fdfnet_nn::ops::gru::{gru_run, gru_seq_forward, GruSpec};
use fdfnet_nn::ops::norm::{bn_train_forward, update_running_stats, BnStats};
use fdfnet_nn::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn rand_tensor(rng: &mut ChaCha12Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Triple-loop direct causal convolution, written from the definition.
fn naive_conv(spec: &Conv2dSpec, x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let (f_in, t_in) = (x.shape()[1], x.shape()[2]);
    let (kf, kt) = spec.kernel;
    let f_out = spec.out_freq(f_in).unwrap();
    let t_out = spec.out_time(t_in);
    let mut out = Tensor::zeros(&[spec.out_ch, f_out, t_out]);
    for co in 0..spec.out_ch {
        for fo in 0..f_out {
            for to in 0..t_out {
                let mut acc = b.data()[co];
                for ci in 0..spec.in_ch {
                    for jf in 0..kf {
                        for jt in 0..kt {
                            let fi = (fo * spec.stride.0 + jf) as isize - spec.pad_f as isize;
                            let ti =
                                (to * spec.stride.1 + jt) as isize - (kt as isize - 1);
                            if fi >= 0
                                && (fi as usize) < f_in
                                && ti >= 0
                                && (ti as usize) < t_in
                            {
                                let xv = x.data()
                                    [(ci * f_in + fi as usize) * t_in + ti as usize];
                                let wv = w.data()
                                    [((co * spec.in_ch + ci) * kf + jf) * kt + jt];
                                acc += wv * xv;
                            }
                        }
                    }
                }
                out.data_mut()[(co * f_out + fo) * t_out + to] = acc;
            }
        }
    }
    out
}

#[test]
fn conv_identity_kernel_is_identity() {
    let spec = Conv2dSpec { in_ch: 1, out_ch: 1, kernel: (1, 1), stride: (1, 1), pad_f: 0 };
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let x = rand_tensor(&mut rng, &[1, 5, 7]);
    let w = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]);
    let b = Tensor::zeros(&[1]);
    let y = conv2d_forward(&spec, &x, &w, &b);
    assert_eq!(y.data(), x.data());
}

#[test]
fn conv_matches_triple_loop_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    for (kf, kt, sf, st, pad) in [(3, 2, 2, 1, 1), (5, 2, 2, 1, 2), (3, 3, 1, 2, 1)] {
        let spec = Conv2dSpec { in_ch: 3, out_ch: 4, kernel: (kf, kt), stride: (sf, st), pad_f: pad };
        let x = rand_tensor(&mut rng, &[3, 9, 6]);
        let w = rand_tensor(&mut rng, &[4, 3, kf, kt]);
        let b = rand_tensor(&mut rng, &[4]);
        let got = conv2d_forward(&spec, &x, &w, &b);
        let want = naive_conv(&spec, &x, &w, &b);
        assert_eq!(got.shape(), want.shape());
        for (g, w_) in got.data().iter().zip(want.data()) {
            assert!((g - w_).abs() < 1e-12);
        }
    }
}

#[test]
fn conv_impulse_places_kernel_with_correlation_semantics() {
    // Impulse in the middle; output picks up w[co][ci][jf][jt] at offsets
    // determined by correlation (no kernel flip).
    let spec = Conv2dSpec { in_ch: 1, out_ch: 1, kernel: (3, 2), stride: (1, 1), pad_f: 1 };
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let w = rand_tensor(&mut rng, &[1, 1, 3, 2]);
    let b = Tensor::zeros(&[1]);
    let mut x = Tensor::zeros(&[1, 7, 6]);
    let (fi, ti) = (3usize, 2usize);
    x.data_mut()[fi * 6 + ti] = 1.0;
    let y = conv2d_forward(&spec, &x, &w, &b);
    let want = naive_conv(&spec, &x, &w, &b);
    for (a, b_) in y.data().iter().zip(want.data()) {
        assert!((a - b_).abs() < 1e-15);
    }
    // Spot-check one tap: output at (fo, to) sees x[fo - 1 + jf, to - 1 + jt].
    // For fo = fi, jf must be 1; for to = ti, jt must be 1.
    let got = y.data()[fi * 6 + ti];
    let expect = w.data()[1 * 2 + 1];
    assert!((got - expect).abs() < 1e-15);
}

#[test]
fn conv_is_causal_in_time() {
    let spec = Conv2dSpec { in_ch: 2, out_ch: 3, kernel: (3, 2), stride: (2, 1), pad_f: 1 };
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let x = rand_tensor(&mut rng, &[2, 9, 8]);
    let w = rand_tensor(&mut rng, &[3, 2, 3, 2]);
    let b = rand_tensor(&mut rng, &[3]);
    let y_full = conv2d_forward(&spec, &x, &w, &b);
    let cut = 4usize;
    let mut x2 = x.clone();
    for f in 0..9 {
        for t in cut + 1..8 {
            for c in 0..2 {
                x2.data_mut()[(c * 9 + f) * 8 + t] = rng.random_range(-1.0..1.0);
            }
        }
    }
    let y_cut = conv2d_forward(&spec, &x2, &w, &b);
    let f_out = y_full.shape()[1];
    for co in 0..3 {
        for fo in 0..f_out {
            for t in 0..=cut {
                let i = (co * f_out + fo) * 8 + t;
                assert_eq!(y_full.data()[i], y_cut.data()[i], "changed at t={t} <= {cut}");
            }
        }
    }
}

#[test]
fn conv_streaming_steps_match_offline_bits() {
    let spec = Conv2dSpec { in_ch: 2, out_ch: 3, kernel: (3, 2), stride: (2, 1), pad_f: 1 };
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let t_len = 10usize;
    let x = rand_tensor(&mut rng, &[2, 9, t_len]);
    let w = rand_tensor(&mut rng, &[3, 2, 3, 2]);
    let b = rand_tensor(&mut rng, &[3]);
    let offline = conv2d_forward(&spec, &x, &w, &b);
    let f_out = offline.shape()[1];

    let zero_frame = vec![0.0f64; 2 * 9];
    let mut frames: Vec<Vec<f64>> = vec![zero_frame.clone()];
    let mut out_frame = vec![0.0f64; 3 * f_out];
    for t in 0..t_len {
        let mut cur = vec![0.0f64; 2 * 9];
        for c in 0..2 {
            for f in 0..9 {
                cur[c * 9 + f] = x.data()[(c * 9 + f) * t_len + t];
            }
        }
        frames.push(cur);
        let hist: Vec<&[f64]> = frames[frames.len() - 2..].iter().map(|v| v.as_slice()).collect();
        conv2d_step(&spec, &w, &b, 9, &hist, &mut out_frame);
        for co in 0..3 {
            for fo in 0..f_out {
                let offline_v = offline.data()[(co * f_out + fo) * t_len + t];
                assert_eq!(out_frame[co * f_out + fo], offline_v, "t={t} co={co} fo={fo}");
            }
        }
    }
}

#[test]
fn deconv_identity_kernel_is_identity() {
    let spec = Deconv2dSpec { in_ch: 1, out_ch: 1, kernel: (1, 1), stride_f: 1, pad_f: 0, out_f: 5 };
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let x = rand_tensor(&mut rng, &[1, 5, 4]);
    let w = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]);
    let b = Tensor::zeros(&[1]);
    let y = deconv2d_forward(&spec, &x, &w, &b);
    assert_eq!(y.data(), x.data());
}

#[test]
fn deconv_is_adjoint_of_conv_on_frequency_geometry() {
    // With a time kernel of 1 the causal time axis is trivial and the pair
    // (conv, deconv) is an exact adjoint on the frequency geometry.
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for (kf, sf, pad, f_in) in [(3usize, 2usize, 1usize, 9usize), (5, 2, 2, 16), (3, 1, 1, 7)] {
        let cspec = Conv2dSpec { in_ch: 2, out_ch: 3, kernel: (kf, 1), stride: (sf, 1), pad_f: pad };
        let f_out = cspec.out_freq(f_in).unwrap();
        let dspec = Deconv2dSpec {
            in_ch: 3,
            out_ch: 2,
            kernel: (kf, 1),
            stride_f: sf,
            pad_f: pad,
            out_f: f_in,
        };
        let t_len = 5;
        let x = rand_tensor(&mut rng, &[2, f_in, t_len]);
        let y = rand_tensor(&mut rng, &[3, f_out, t_len]);
        let w_conv = rand_tensor(&mut rng, &[3, 2, kf, 1]);
        // Deconv weights share values: w_deconv[ci][co][jf] = w_conv[co][ci][jf].
        let mut w_dec = Tensor::zeros(&[3, 2, kf, 1]);
        for ci in 0..3 {
            for co in 0..2 {
                for jf in 0..kf {
                    w_dec.data_mut()[(ci * 2 + co) * kf + jf] =
                        w_conv.data()[(ci * 2 + co) * kf + jf];
                }
            }
        }
        let zb_in = Tensor::zeros(&[3]);
        let zb_out = Tensor::zeros(&[2]);
        let cx = conv2d_forward(&cspec, &x, &w_conv, &zb_in);
        let dy = deconv2d_forward(&dspec, &y, &w_dec, &zb_out);
        let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12);
        assert!(rel <= 1e-12, "adjoint mismatch kf={kf} sf={sf}: {lhs} vs {rhs}");
    }
}

#[test]
fn deconv_frequency_ladder_reaches_targets() {
    // Decoder chain of the magnitude network: 9 -> 17 -> 33 -> 65 -> 129 -> 257.
    let chain = [9usize, 17, 33, 65, 129, 257];
    for win in chain.windows(2) {
        let spec = Deconv2dSpec {
            in_ch: 1,
            out_ch: 1,
            kernel: (3, 2),
            stride_f: 2,
            pad_f: 1,
            out_f: win[1],
        };
        assert!(spec.output_reachable(win[0]), "{} -> {}", win[0], win[1]);
        let x = Tensor::<f64>::zeros(&[1, win[0], 2]);
        let w = Tensor::zeros(&[1, 1, 3, 2]);
        let b = Tensor::zeros(&[1]);
        let y = deconv2d_forward(&spec, &x, &w, &b);
        assert_eq!(y.shape()[1], win[1]);
    }
    // Refinement network decoder: 16 -> 32 -> ... -> 512 under kernel 5.
    let chain = [16usize, 32, 64, 128, 256, 512];
    for win in chain.windows(2) {
        let spec = Deconv2dSpec {
            in_ch: 1,
            out_ch: 1,
            kernel: (5, 2),
            stride_f: 2,
            pad_f: 2,
            out_f: win[1],
        };
        assert!(spec.output_reachable(win[0]));
    }
}

#[test]
fn deconv_streaming_steps_match_offline_bits() {
    let spec = Deconv2dSpec { in_ch: 3, out_ch: 2, kernel: (3, 2), stride_f: 2, pad_f: 1, out_f: 9 };
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let t_len = 7;
    let x = rand_tensor(&mut rng, &[3, 5, t_len]);
    let w = rand_tensor(&mut rng, &[3, 2, 3, 2]);
    let b = rand_tensor(&mut rng, &[2]);
    let offline = deconv2d_forward(&spec, &x, &w, &b);

    let zero_frame = vec![0.0f64; 3 * 5];
    let mut frames: Vec<Vec<f64>> = vec![zero_frame];
    let mut out_frame = vec![0.0f64; 2 * 9];
    for t in 0..t_len {
        let mut cur = vec![0.0f64; 3 * 5];
        for c in 0..3 {
            for f in 0..5 {
                cur[c * 5 + f] = x.data()[(c * 5 + f) * t_len + t];
            }
        }
        frames.push(cur);
        let hist: Vec<&[f64]> = frames[frames.len() - 2..].iter().map(|v| v.as_slice()).collect();
        deconv2d_step(&spec, &w, &b, 5, &hist, &mut out_frame);
        for co in 0..2 {
            for fo in 0..9 {
                assert_eq!(
                    out_frame[co * 9 + fo],
                    offline.data()[(co * 9 + fo) * t_len + t]
                );
            }
        }
    }
}

#[test]
fn batch_norm_passes_standardized_input_through() {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    // Build per-channel standardized data.
    let (c, m) = (3usize, 400usize);
    let mut data = Vec::with_capacity(c * m);
    for _ in 0..c {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu = raw.iter().sum::<f64>() / m as f64;
        let var = raw.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m as f64;
        data.extend(raw.iter().map(|v| (v - mu) / var.sqrt()));
    }
    let x = Tensor::from_vec(&[c, m, 1], data);
    let gamma = Tensor::full(&[c], 1.0);
    let beta = Tensor::zeros(&[c]);
    let (y, _) = bn_train_forward(&x, &gamma, &beta);
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn batch_norm_constant_channel_outputs_shift() {
    let x = Tensor::<f64>::full(&[2, 10, 3], 5.0);
    let gamma = Tensor::full(&[2], 3.0);
    let beta = Tensor::from_vec(&[2], vec![0.7, -0.2]);
    let (y, stats) = bn_train_forward(&x, &gamma, &beta);
    for ch in 0..2 {
        for v in &y.data()[ch * 30..(ch + 1) * 30] {
            assert!((v - beta.data()[ch]).abs() < 1e-9);
        }
        assert!((stats.mean.data()[ch] - 5.0).abs() < 1e-12);
        assert!(stats.var.data()[ch].abs() < 1e-12);
    }
}

#[test]
fn running_stats_match_hand_rolled_ema_over_two_batches() {
    let momentum = 0.1;
    let mut rm = Tensor::zeros(&[2]);
    let mut rv = Tensor::full(&[2], 1.0);
    let b1 = BnStats {
        mean: Tensor::from_vec(&[2], vec![1.0, -2.0]),
        var: Tensor::from_vec(&[2], vec![0.5, 2.0]),
    };
    let b2 = BnStats {
        mean: Tensor::from_vec(&[2], vec![3.0, 0.5]),
        var: Tensor::from_vec(&[2], vec![1.5, 0.25]),
    };
    update_running_stats(&mut rm, &mut rv, &b1, momentum);
    update_running_stats(&mut rm, &mut rv, &b2, momentum);
    // Hand-rolled EMA.
    let mut em = [0.0f64; 2];
    let mut ev = [1.0f64; 2];
    for (bm, bv) in [([1.0, -2.0], [0.5, 2.0]), ([3.0, 0.5], [1.5, 0.25])] {
        for ch in 0..2 {
            em[ch] = 0.9 * em[ch] + 0.1 * bm[ch];
            ev[ch] = 0.9 * ev[ch] + 0.1 * bv[ch];
        }
    }
    for ch in 0..2 {
        assert!((rm.data()[ch] - em[ch]).abs() < 1e-15);
        assert!((rv.data()[ch] - ev[ch]).abs() < 1e-15);
    }
}

#[test]
fn layer_norm_standardizes_each_position() {
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    let x = rand_tensor(&mut rng, &[4, 6, 16]);
    let gamma = Tensor::full(&[16], 1.0);
    let beta = Tensor::zeros(&[16]);
    let mut g = Graph::new();
    let xn = g.leaf(x, false);
    let gn = g.leaf(gamma, false);
    let bn = g.leaf(beta, false);
    let y = g.layer_norm(xn, gn, bn).unwrap();
    let yd = g.value(y).data();
    for row in 0..24 {
        let r = &yd[row * 16..(row + 1) * 16];
        let mu: f64 = r.iter().sum::<f64>() / 16.0;
        let var: f64 = r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 16.0;
        assert!(mu.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-4); // epsilon shrinks variance slightly
    }
}

#[test]
fn layer_norm_is_affine_invariant() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let x = rand_tensor(&mut rng, &[5, 8]);
    let scaled = x.map(|v| 3.7 * v + 0.9);
    let gamma = Tensor::full(&[8], 1.0);
    let beta = Tensor::zeros(&[8]);
    let run = |input: Tensor<f64>| {
        let mut g = Graph::new();
        let xn = g.leaf(input, false);
        let gn = g.leaf(gamma.clone(), false);
        let bn = g.leaf(beta.clone(), false);
        let y = g.layer_norm(xn, gn, bn).unwrap();
        g.value(y).data().to_vec()
    };
    let a = run(x);
    let b = run(scaled);
    // Epsilon regularization bounds the match at ~eps/(2*var).
    for (x1, x2) in a.iter().zip(&b) {
        assert!((x1 - x2).abs() < 1e-4);
    }
}

#[test]
fn prelu_identities() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let x_pos = Tensor::from_vec(&[2, 3, 4], (0..24).map(|i| i as f64 / 10.0).collect());
    let slope = Tensor::from_vec(&[2], vec![0.25, 0.5]);
    let mut g = Graph::new();
    let xn = g.leaf(x_pos.clone(), false);
    let sn = g.leaf(slope, false);
    let y = g.prelu(xn, sn, 0).unwrap();
    assert_eq!(g.value(y).data(), x_pos.data());

    // slope 1 is the identity for any sign.
    let x = rand_tensor(&mut rng, &[2, 3, 4]);
    let ones = Tensor::full(&[2], 1.0);
    let mut g = Graph::new();
    let xn = g.leaf(x.clone(), false);
    let sn = g.leaf(ones, false);
    let y = g.prelu(xn, sn, 0).unwrap();
    assert_eq!(g.value(y).data(), x.data());
}

#[test]
fn gru_zero_weights_give_zero_outputs() {
    let spec = GruSpec { input: 3, hidden: 4, reverse: false };
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let seq = rand_tensor(&mut rng, &[6, 3]);
    let w_ih = Tensor::zeros(&[12, 3]);
    let w_hh = Tensor::zeros(&[12, 4]);
    let b = Tensor::zeros(&[12]);
    let (out, state) = gru_run(&spec, &w_ih, &w_hh, &b, &b, &seq, None);
    assert!(out.data().iter().all(|&v| v == 0.0));
    assert!(state.iter().all(|&v| v == 0.0));
}

#[test]
fn gru_single_step_matches_hand_computed_gates() {
    // 2-unit GRU, 1 input feature, one step; gate rows ordered (r, z, n).
    let spec = GruSpec { input: 1, hidden: 2, reverse: false };
    let w_ih = Tensor::from_vec(&[6, 1], vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
    let w_hh = Tensor::from_vec(
        &[6, 2],
        vec![0.05, -0.1, 0.15, 0.2, -0.25, 0.3, 0.35, -0.4, 0.45, 0.5, -0.55, 0.6],
    );
    let b_ih = Tensor::from_vec(&[6], vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06]);
    let b_hh = Tensor::from_vec(&[6], vec![-0.01, -0.02, -0.03, -0.04, -0.05, -0.06]);
    let x = 0.7f64;
    let h0 = [0.3f64, -0.2];
    let seq = Tensor::from_vec(&[1, 1], vec![x]);
    let (out, _) = gru_run(&spec, &w_ih, &w_hh, &b_ih, &b_hh, &seq, Some(&h0));

    // Hand evaluation of the recurrence, written out gate by gate.
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut want = [0.0f64; 2];
    for u in 0..2 {
        let gx_r = w_ih.data()[u] * x + b_ih.data()[u];
        let gx_z = w_ih.data()[2 + u] * x + b_ih.data()[2 + u];
        let gx_n = w_ih.data()[4 + u] * x + b_ih.data()[4 + u];
        let gh_r = w_hh.data()[u * 2] * h0[0] + w_hh.data()[u * 2 + 1] * h0[1] + b_hh.data()[u];
        let gh_z = w_hh.data()[(2 + u) * 2] * h0[0]
            + w_hh.data()[(2 + u) * 2 + 1] * h0[1]
            + b_hh.data()[2 + u];
        let gh_n = w_hh.data()[(4 + u) * 2] * h0[0]
            + w_hh.data()[(4 + u) * 2 + 1] * h0[1]
            + b_hh.data()[4 + u];
        let r = sig(gx_r + gh_r);
        let z = sig(gx_z + gh_z);
        let n = (gx_n + r * gh_n).tanh();
        want[u] = (1.0 - z) * n + z * h0[u];
    }
    for u in 0..2 {
        assert!((out.data()[u] - want[u]).abs() < 1e-14, "unit {u}");
    }
}

#[test]
fn gru_state_threading_matches_single_pass() {
    let spec = GruSpec { input: 5, hidden: 7, reverse: false };
    let mut rng = ChaCha12Rng::seed_from_u64(14);
    let w_ih = rand_tensor(&mut rng, &[21, 5]);
    let w_hh = rand_tensor(&mut rng, &[21, 7]);
    let b_ih = rand_tensor(&mut rng, &[21]);
    let b_hh = rand_tensor(&mut rng, &[21]);
    let seq = rand_tensor(&mut rng, &[10, 5]);
    let (full, full_state) = gru_run(&spec, &w_ih, &w_hh, &b_ih, &b_hh, &seq, None);

    let k = 4;
    let first = Tensor::from_vec(&[k, 5], seq.data()[..k * 5].to_vec());
    let second = Tensor::from_vec(&[10 - k, 5], seq.data()[k * 5..].to_vec());
    let (out1, mid) = gru_run(&spec, &w_ih, &w_hh, &b_ih, &b_hh, &first, None);
    let (out2, end) = gru_run(&spec, &w_ih, &w_hh, &b_ih, &b_hh, &second, Some(&mid));

    for (i, v) in out1.data().iter().chain(out2.data()).enumerate() {
        assert!((v - full.data()[i]).abs() <= 1e-12, "position {i}");
    }
    for (a, b) in end.iter().zip(&full_state) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn bigru_zero_weights_zero_outputs() {
    let mut rng = ChaCha12Rng::seed_from_u64(15);
    let seq = rand_tensor(&mut rng, &[5, 3]);
    let z_ih = Tensor::zeros(&[12, 3]);
    let z_hh = Tensor::zeros(&[12, 4]);
    let zb = Tensor::zeros(&[12]);
    let (f, b) = fdfnet_nn::ops::gru::bigru_run(
        3,
        4,
        (&z_ih, &z_hh, &zb, &zb),
        (&z_ih, &z_hh, &zb, &zb),
        &seq,
    );
    assert!(f.data().iter().all(|&v| v == 0.0));
    assert!(b.data().iter().all(|&v| v == 0.0));
}

#[test]
fn bigru_palindrome_with_tied_weights_mirrors() {
    let mut rng = ChaCha12Rng::seed_from_u64(16);
    let w_ih = rand_tensor(&mut rng, &[9, 2]);
    let w_hh = rand_tensor(&mut rng, &[9, 3]);
    let b_ih = rand_tensor(&mut rng, &[9]);
    let b_hh = rand_tensor(&mut rng, &[9]);
    let half: Vec<f64> = (0..3 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut sym = half.clone();
    sym.extend(half.chunks(2).rev().flatten());
    let seq = Tensor::from_vec(&[6, 2], sym);
    let (f, b) = fdfnet_nn::ops::gru::bigru_run(
        2,
        3,
        (&w_ih, &w_hh, &b_ih, &b_hh),
        (&w_ih, &w_hh, &b_ih, &b_hh),
        &seq,
    );
    for s in 0..6 {
        for u in 0..3 {
            let fwd = f.data()[s * 3 + u];
            let bwd = b.data()[(5 - s) * 3 + u];
            assert!((fwd - bwd).abs() < 1e-13, "s={s} u={u}");
        }
    }
}

#[test]
fn bigru_matches_two_reversed_gru_runs() {
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let w_fi = rand_tensor(&mut rng, &[9, 2]);
    let w_fh = rand_tensor(&mut rng, &[9, 3]);
    let b_fi = rand_tensor(&mut rng, &[9]);
    let b_fh = rand_tensor(&mut rng, &[9]);
    let w_bi = rand_tensor(&mut rng, &[9, 2]);
    let w_bh = rand_tensor(&mut rng, &[9, 3]);
    let b_bi = rand_tensor(&mut rng, &[9]);
    let b_bh = rand_tensor(&mut rng, &[9]);
    let seq = rand_tensor(&mut rng, &[7, 2]);
    let (f, b) = fdfnet_nn::ops::gru::bigru_run(
        2,
        3,
        (&w_fi, &w_fh, &b_fi, &b_fh),
        (&w_bi, &w_bh, &b_bi, &b_bh),
        &seq,
    );
    // Compose by hand: reverse the sequence, run forward, reverse the output.
    let spec = GruSpec { input: 2, hidden: 3, reverse: false };
    let rev_data: Vec<f64> = seq.data().chunks(2).rev().flatten().copied().collect();
    let rev = Tensor::from_vec(&[7, 2], rev_data);
    let (f2, _) = gru_run(&spec, &w_fi, &w_fh, &b_fi, &b_fh, &seq, None);
    let (b2_rev, _) = gru_run(&spec, &w_bi, &w_bh, &b_bi, &b_bh, &rev, None);
    let b2: Vec<f64> = b2_rev.data().chunks(3).rev().flatten().copied().collect();
    for i in 0..f.data().len() {
        assert!((f.data()[i] - f2.data()[i]).abs() < 1e-14);
        assert!((b.data()[i] - b2[i]).abs() < 1e-14);
    }
}

#[test]
fn gru_seq_batched_matches_independent_runs() {
    let spec = GruSpec { input: 3, hidden: 4, reverse: false };
    let mut rng = ChaCha12Rng::seed_from_u64(18);
    let w_ih = rand_tensor(&mut rng, &[12, 3]);
    let w_hh = rand_tensor(&mut rng, &[12, 4]);
    let b_ih = rand_tensor(&mut rng, &[12]);
    let b_hh = rand_tensor(&mut rng, &[12]);
    let x = rand_tensor(&mut rng, &[3, 5, 3]);
    let (out, cache) = gru_seq_forward(&spec, &x, &w_ih, &w_hh, &b_ih, &b_hh, None);
    for lane in 0..3 {
        let seq = Tensor::from_vec(&[5, 3], x.data()[lane * 15..(lane + 1) * 15].to_vec());
        let (want, state) = gru_run(&spec, &w_ih, &w_hh, &b_ih, &b_hh, &seq, None);
        assert_eq!(&out.data()[lane * 20..(lane + 1) * 20], want.data());
        assert_eq!(&cache.h_final.data()[lane * 4..(lane + 1) * 4], state.as_slice());
    }
}

#[test]
fn linear_identity_and_hand_checked() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), false);
    let eye = g.leaf(
        Tensor::from_vec(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        false,
    );
    let y = g.linear(x, eye, None).unwrap();
    assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(&[1, 1], vec![2.5]), false);
    let w = g.leaf(Tensor::from_vec(&[1, 1], vec![-1.5]), false);
    let b = g.leaf(Tensor::from_vec(&[1], vec![0.25]), false);
    let y = g.linear(x, w, Some(b)).unwrap();
    assert!((g.value(y).data()[0] - (-1.5 * 2.5 + 0.25)).abs() < 1e-15);
}

#[test]
fn shape_errors_are_reported() {
    use fdfnet_nn::NnError;
    let mut g = Graph::<f64>::new();
    // Kernel larger than the padded frequency extent.
    let x = g.leaf(Tensor::zeros(&[1, 3, 4]), false);
    let w = g.leaf(Tensor::zeros(&[1, 1, 9, 1]), false);
    let b = g.leaf(Tensor::zeros(&[1]), false);
    let spec = Conv2dSpec { in_ch: 1, out_ch: 1, kernel: (9, 1), stride: (1, 1), pad_f: 1 };
    assert!(matches!(g.conv2d(x, w, b, spec), Err(NnError::Shape(_))));

    // Deconv target extent beyond the uncropped output.
    let x = g.leaf(Tensor::zeros(&[1, 4, 3]), false);
    let w = g.leaf(Tensor::zeros(&[1, 1, 3, 1]), false);
    let b = g.leaf(Tensor::zeros(&[1]), false);
    let spec =
        Deconv2dSpec { in_ch: 1, out_ch: 1, kernel: (3, 1), stride_f: 2, pad_f: 1, out_f: 99 };
    assert!(matches!(g.deconv2d(x, w, b, spec), Err(NnError::Shape(_))));

    // GRU input feature size mismatch.
    let x = g.leaf(Tensor::zeros(&[1, 4, 5]), false);
    let w_ih = g.leaf(Tensor::zeros(&[9, 3]), false);
    let w_hh = g.leaf(Tensor::zeros(&[9, 3]), false);
    let bias = g.leaf(Tensor::zeros(&[9]), false);
    let spec = GruSpec { input: 3, hidden: 3, reverse: false };
    assert!(matches!(
        g.gru_seq(x, w_ih, w_hh, bias, bias, None, spec),
        Err(NnError::Shape(_))
    ));
}
