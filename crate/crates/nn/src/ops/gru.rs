//! Gated recurrent unit over batched sequences.
//!
//! Gate layout follows the (reset, update, candidate) row order in all
//! `[3H, ..]` weight and bias tensors:
//!
//! ```text
//! r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n = tanh(W_in x + b_in + r .* (W_hn h + b_hn))
//! h' = (1 - z) .* n + z .* h
//! ```
//!
//! [`gru_cell`] is the single source of the recurrence; the offline sequence
//! op and the streaming path both call it, so chunked streaming reproduces
//! offline outputs bit for bit.

use crate::real::{sigmoid, Real};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruSpec {
    pub input: usize,
    pub hidden: usize,
    /// Process positions from last to first (outputs stay at their original
    /// positions). Used for the backward half of a bidirectional pass.
    pub reverse: bool,
}

/// Per-step values cached by the forward pass for backpropagation through
/// time. All grids are `[B, S, H]`, indexed by sequence position.
#[derive(Debug, Clone)]
pub struct GruCache<R: Real> {
    pub r: Tensor<R>,
    pub z: Tensor<R>,
    pub n: Tensor<R>,
    /// Hidden-path candidate pre-activation `W_hn h + b_hn`.
    pub gh_n: Tensor<R>,
    /// State entering each position (in processing order semantics).
    pub h_prev: Tensor<R>,
    /// Final state per batch lane, `[B, H]`.
    pub h_final: Tensor<R>,
}

/// Scratch for one cell evaluation.
pub struct GruScratch<R: Real> {
    pub gx: Vec<R>,
    pub gh: Vec<R>,
}

impl<R: Real> GruScratch<R> {
    pub fn new(hidden: usize) -> Self {
        Self { gx: vec![R::ZERO; 3 * hidden], gh: vec![R::ZERO; 3 * hidden] }
    }
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut acc = R::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// One GRU step. Writes the new state into `h_new` and, when `cache` is
/// given, the gate values needed for backprop. `h_prev` and `h_new` may not
/// alias.
#[allow(clippy::too_many_arguments)]
pub fn gru_cell<R: Real>(
    spec: &GruSpec,
    w_ih: &[R],
    w_hh: &[R],
    b_ih: &[R],
    b_hh: &[R],
    x: &[R],
    h_prev: &[R],
    h_new: &mut [R],
    scratch: &mut GruScratch<R>,
    mut cache: Option<(&mut [R], &mut [R], &mut [R], &mut [R])>,
) {
    let h = spec.hidden;
    let i = spec.input;
    debug_assert_eq!(x.len(), i);
    debug_assert_eq!(h_prev.len(), h);
    for g in 0..3 * h {
        scratch.gx[g] = b_ih[g] + dot(&w_ih[g * i..(g + 1) * i], x);
    }
    for g in 0..3 * h {
        scratch.gh[g] = b_hh[g] + dot(&w_hh[g * h..(g + 1) * h], h_prev);
    }
    for u in 0..h {
        let r = sigmoid(scratch.gx[u] + scratch.gh[u]);
        let z = sigmoid(scratch.gx[h + u] + scratch.gh[h + u]);
        let gh_n = scratch.gh[2 * h + u];
        let n = (scratch.gx[2 * h + u] + r * gh_n).tanh();
        h_new[u] = (R::ONE - z) * n + z * h_prev[u];
        if let Some((cr, cz, cn, cg)) = cache.as_mut() {
            cr[u] = r;
            cz[u] = z;
            cn[u] = n;
            cg[u] = gh_n;
        }
    }
}

/// Full sequence forward over `x: [B, S, I]`, returning `[B, S, H]` outputs
/// and the BPTT cache. `h0` is `[B, H]` (zeros when absent).
pub fn gru_seq_forward<R: Real>(
    spec: &GruSpec,
    x: &Tensor<R>,
    w_ih: &Tensor<R>,
    w_hh: &Tensor<R>,
    b_ih: &Tensor<R>,
    b_hh: &Tensor<R>,
    h0: Option<&Tensor<R>>,
) -> (Tensor<R>, GruCache<R>) {
    let (b, s, i) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let h = spec.hidden;
    debug_assert_eq!(i, spec.input);
    let mut out = Tensor::zeros(&[b, s, h]);
    let mut cache = GruCache {
        r: Tensor::zeros(&[b, s, h]),
        z: Tensor::zeros(&[b, s, h]),
        n: Tensor::zeros(&[b, s, h]),
        gh_n: Tensor::zeros(&[b, s, h]),
        h_prev: Tensor::zeros(&[b, s, h]),
        h_final: Tensor::zeros(&[b, h]),
    };
    let mut scratch = GruScratch::new(h);
    let mut state = vec![R::ZERO; h];
    let mut h_new = vec![R::ZERO; h];
    {
        let GruCache { r, z, n, gh_n, h_prev, h_final } = &mut cache;
        let (rd, zd, nd, gd) = (r.data_mut(), z.data_mut(), n.data_mut(), gh_n.data_mut());
        for lane in 0..b {
            match h0 {
                Some(t) => state.copy_from_slice(&t.data()[lane * h..(lane + 1) * h]),
                None => state.fill(R::ZERO),
            }
            let steps: Box<dyn Iterator<Item = usize>> = if spec.reverse {
                Box::new((0..s).rev())
            } else {
                Box::new(0..s)
            };
            for pos in steps {
                let idx = (lane * s + pos) * h;
                h_prev.data_mut()[idx..idx + h].copy_from_slice(&state);
                let x_t = &x.data()[(lane * s + pos) * i..(lane * s + pos + 1) * i];
                gru_cell(
                    spec,
                    w_ih.data(),
                    w_hh.data(),
                    b_ih.data(),
                    b_hh.data(),
                    x_t,
                    &state,
                    &mut h_new,
                    &mut scratch,
                    Some((
                        &mut rd[idx..idx + h],
                        &mut zd[idx..idx + h],
                        &mut nd[idx..idx + h],
                        &mut gd[idx..idx + h],
                    )),
                );
                out.data_mut()[idx..idx + h].copy_from_slice(&h_new);
                state.copy_from_slice(&h_new);
            }
            h_final.data_mut()[lane * h..(lane + 1) * h].copy_from_slice(&state);
        }
    }
    (out, cache)
}

/// Plain (non-tape) single-sequence run over `seq: [S, I]`. Returns the
/// output sequence `[S, H]` and the final state; threading the final state
/// back in as `h0` continues the recurrence exactly.
pub fn gru_run<R: Real>(
    spec: &GruSpec,
    w_ih: &Tensor<R>,
    w_hh: &Tensor<R>,
    b_ih: &Tensor<R>,
    b_hh: &Tensor<R>,
    seq: &Tensor<R>,
    h0: Option<&[R]>,
) -> (Tensor<R>, Vec<R>) {
    let (s, i) = (seq.shape()[0], seq.shape()[1]);
    debug_assert_eq!(i, spec.input);
    let h = spec.hidden;
    let mut out = Tensor::zeros(&[s, h]);
    let mut state = match h0 {
        Some(h0) => h0.to_vec(),
        None => vec![R::ZERO; h],
    };
    let mut h_new = vec![R::ZERO; h];
    let mut scratch = GruScratch::new(h);
    let steps: Box<dyn Iterator<Item = usize>> =
        if spec.reverse { Box::new((0..s).rev()) } else { Box::new(0..s) };
    for pos in steps {
        gru_cell(
            spec,
            w_ih.data(),
            w_hh.data(),
            b_ih.data(),
            b_hh.data(),
            &seq.data()[pos * i..(pos + 1) * i],
            &state,
            &mut h_new,
            &mut scratch,
            None,
        );
        out.data_mut()[pos * h..(pos + 1) * h].copy_from_slice(&h_new);
        std::mem::swap(&mut state, &mut h_new);
    }
    (out, state)
}

/// Bidirectional run: a forward pass and a reversed pass over the same
/// sequence, both outputs aligned to original positions. Summation of the
/// two directions is left to the caller.
#[allow(clippy::too_many_arguments)]
pub fn bigru_run<R: Real>(
    input: usize,
    hidden: usize,
    fwd: (&Tensor<R>, &Tensor<R>, &Tensor<R>, &Tensor<R>),
    bwd: (&Tensor<R>, &Tensor<R>, &Tensor<R>, &Tensor<R>),
    seq: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>) {
    let f_spec = GruSpec { input, hidden, reverse: false };
    let b_spec = GruSpec { input, hidden, reverse: true };
    let (f_out, _) = gru_run(&f_spec, fwd.0, fwd.1, fwd.2, fwd.3, seq, None);
    let (b_out, _) = gru_run(&b_spec, bwd.0, bwd.1, bwd.2, bwd.3, seq, None);
    (f_out, b_out)
}

/// Backpropagation through time. Returns gradients for
/// `(x, w_ih, w_hh, b_ih, b_hh, h0)`.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
pub fn gru_seq_backward<R: Real>(
    spec: &GruSpec,
    x: &Tensor<R>,
    w_ih: &Tensor<R>,
    w_hh: &Tensor<R>,
    cache: &GruCache<R>,
    grad_out: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>, Tensor<R>, Tensor<R>, Tensor<R>, Tensor<R>) {
    let (b, s, i) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let h = spec.hidden;
    let mut gx = Tensor::zeros(&[b, s, i]);
    let mut gwih = Tensor::zeros(&[3 * h, i]);
    let mut gwhh = Tensor::zeros(&[3 * h, h]);
    let mut gbih = Tensor::zeros(&[3 * h]);
    let mut gbhh = Tensor::zeros(&[3 * h]);
    let mut gh0 = Tensor::zeros(&[b, h]);

    let wihd = w_ih.data();
    let whhd = w_hh.data();
    let mut dgates_i = vec![R::ZERO; 3 * h]; // (dr_pre, dz_pre, dn_pre)
    let mut dgates_h = vec![R::ZERO; 3 * h]; // (dr_pre, dz_pre, dn_pre * r)

    for lane in 0..b {
        let mut dh = vec![R::ZERO; h];
        let steps: Box<dyn Iterator<Item = usize>> = if spec.reverse {
            Box::new(0..s)
        } else {
            Box::new((0..s).rev())
        };
        for pos in steps {
            let idx = (lane * s + pos) * h;
            for u in 0..h {
                dh[u] += grad_out.data()[idx + u];
            }
            let r = &cache.r.data()[idx..idx + h];
            let z = &cache.z.data()[idx..idx + h];
            let n = &cache.n.data()[idx..idx + h];
            let gh_n = &cache.gh_n.data()[idx..idx + h];
            let h_prev = &cache.h_prev.data()[idx..idx + h];

            for u in 0..h {
                let dz = dh[u] * (h_prev[u] - n[u]);
                let dn = dh[u] * (R::ONE - z[u]);
                let dn_pre = dn * (R::ONE - n[u] * n[u]);
                let dr = dn_pre * gh_n[u];
                let dr_pre = dr * r[u] * (R::ONE - r[u]);
                let dz_pre = dz * z[u] * (R::ONE - z[u]);
                dgates_i[u] = dr_pre;
                dgates_i[h + u] = dz_pre;
                dgates_i[2 * h + u] = dn_pre;
                dgates_h[u] = dr_pre;
                dgates_h[h + u] = dz_pre;
                dgates_h[2 * h + u] = dn_pre * r[u];
                // Direct path through h' = ... + z .* h
                dh[u] *= z[u];
            }

            let x_t = &x.data()[(lane * s + pos) * i..(lane * s + pos + 1) * i];
            let gx_t = &mut gx.data_mut()[(lane * s + pos) * i..(lane * s + pos + 1) * i];
            {
                let gbihd = gbih.data_mut();
                let gwihd = gwih.data_mut();
                for g in 0..3 * h {
                    let d = dgates_i[g];
                    gbihd[g] += d;
                    let wrow = &wihd[g * i..(g + 1) * i];
                    let gwrow = &mut gwihd[g * i..(g + 1) * i];
                    for k in 0..i {
                        gwrow[k] += d * x_t[k];
                        gx_t[k] += d * wrow[k];
                    }
                }
            }
            {
                let gbhhd = gbhh.data_mut();
                let gwhhd = gwhh.data_mut();
                for g in 0..3 * h {
                    let d = dgates_h[g];
                    gbhhd[g] += d;
                    let wrow = &whhd[g * h..(g + 1) * h];
                    let gwrow = &mut gwhhd[g * h..(g + 1) * h];
                    for k in 0..h {
                        gwrow[k] += d * h_prev[k];
                        dh[k] += d * wrow[k];
                    }
                }
            }
        }
        gh0.data_mut()[lane * h..(lane + 1) * h].copy_from_slice(&dh);
    }

    (gx, gwih, gwhh, gbih, gbhh, gh0)
}
