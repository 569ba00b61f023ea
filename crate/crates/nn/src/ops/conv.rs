//! Causal 2D convolution over `[channels, frequency, time]` tensors.
//!
//! The frequency axis is padded symmetrically with `pad_f` zeros per side;
//! the time axis is padded with `kt - 1` zeros on the past side only, so the
//! output at frame `t` depends on input frames `<= t`.
//!
//! Accumulation-order contract: each output element starts from the bias and
//! accumulates taps in `(ci, jf, jt)` order. [`conv2d_step`] follows the same
//! order, which keeps frame-by-frame streaming bit-identical to the offline
//! forward pass.

use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    /// Kernel extent over (frequency, time).
    pub kernel: (usize, usize),
    /// Stride over (frequency, time).
    pub stride: (usize, usize),
    /// Symmetric zero padding per frequency side.
    pub pad_f: usize,
}

impl Conv2dSpec {
    pub fn out_freq(&self, in_freq: usize) -> Option<usize> {
        let padded = in_freq + 2 * self.pad_f;
        if padded < self.kernel.0 {
            None
        } else {
            Some((padded - self.kernel.0) / self.stride.0 + 1)
        }
    }

    pub fn out_time(&self, in_time: usize) -> usize {
        // Past padding restores the full extent; time stride then subsamples.
        (in_time + self.stride.1 - 1) / self.stride.1
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_ch, self.in_ch, self.kernel.0, self.kernel.1]
    }
}

/// Offline forward pass; `x` is `[in_ch, F, T]`, result `[out_ch, F', T']`.
pub fn conv2d_forward<R: Real>(
    spec: &Conv2dSpec,
    x: &Tensor<R>,
    w: &Tensor<R>,
    b: &Tensor<R>,
) -> Tensor<R> {
    let (f_in, t_in) = (x.shape()[1], x.shape()[2]);
    let f_out = spec.out_freq(f_in).expect("kernel larger than padded input");
    let t_out = spec.out_time(t_in);
    let (kf, kt) = spec.kernel;
    let (sf, st) = spec.stride;
    let mut out = Tensor::zeros(&[spec.out_ch, f_out, t_out]);
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let od = out.data_mut();

    for co in 0..spec.out_ch {
        for fo in 0..f_out {
            let row = &mut od[(co * f_out + fo) * t_out..(co * f_out + fo + 1) * t_out];
            row.fill(bd[co]);
            for ci in 0..spec.in_ch {
                for jf in 0..kf {
                    let fi = (fo * sf + jf) as isize - spec.pad_f as isize;
                    if fi < 0 || fi as usize >= f_in {
                        continue;
                    }
                    let x_row = &xd[(ci * f_in + fi as usize) * t_in
                        ..(ci * f_in + fi as usize + 1) * t_in];
                    for jt in 0..kt {
                        let wv = wd[((co * spec.in_ch + ci) * kf + jf) * kt + jt];
                        if st == 1 {
                            // src time = t + jt - (kt - 1)
                            let lead = kt - 1 - jt;
                            for (o, xv) in row[lead..].iter_mut().zip(&x_row[..t_in - lead]) {
                                *o += wv * *xv;
                            }
                        } else {
                            for (t, o) in row.iter_mut().enumerate() {
                                let ti = (t * st + jt) as isize - (kt - 1) as isize;
                                if ti >= 0 && (ti as usize) < t_in {
                                    *o += wv * x_row[ti as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// One streamed output frame. `history` holds the last `kt` input frames,
/// oldest first, each `[in_ch * F]`; frames before the stream start are
/// all-zero. Returns `[out_ch * F']` for the current frame. Requires time
/// stride 1.
pub fn conv2d_step<R: Real>(
    spec: &Conv2dSpec,
    w: &Tensor<R>,
    b: &Tensor<R>,
    f_in: usize,
    history: &[&[R]],
    out: &mut [R],
) {
    let (kf, kt) = spec.kernel;
    assert_eq!(spec.stride.1, 1, "streaming requires time stride 1");
    assert_eq!(history.len(), kt);
    let f_out = spec.out_freq(f_in).expect("kernel larger than padded input");
    let sf = spec.stride.0;
    let wd = w.data();
    let bd = b.data();
    debug_assert_eq!(out.len(), spec.out_ch * f_out);

    for co in 0..spec.out_ch {
        for fo in 0..f_out {
            let mut acc = bd[co];
            for ci in 0..spec.in_ch {
                for jf in 0..kf {
                    let fi = (fo * sf + jf) as isize - spec.pad_f as isize;
                    if fi < 0 || fi as usize >= f_in {
                        continue;
                    }
                    for (jt, frame) in history.iter().enumerate() {
                        let wv = wd[((co * spec.in_ch + ci) * kf + jf) * kt + jt];
                        acc += wv * frame[ci * f_in + fi as usize];
                    }
                }
            }
            out[co * f_out + fo] = acc;
        }
    }
}

/// Gradients wrt input, weight and bias.
pub fn conv2d_backward<R: Real>(
    spec: &Conv2dSpec,
    x: &Tensor<R>,
    w: &Tensor<R>,
    grad_out: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>, Tensor<R>) {
    let (f_in, t_in) = (x.shape()[1], x.shape()[2]);
    let (f_out, t_out) = (grad_out.shape()[1], grad_out.shape()[2]);
    let (kf, kt) = spec.kernel;
    let (sf, st) = spec.stride;
    let xd = x.data();
    let wd = w.data();
    let gd = grad_out.data();

    let mut gb = Tensor::zeros(&[spec.out_ch]);
    for co in 0..spec.out_ch {
        let mut acc = R::ZERO;
        for v in &gd[co * f_out * t_out..(co + 1) * f_out * t_out] {
            acc += *v;
        }
        gb.data_mut()[co] = acc;
    }

    let mut gw = Tensor::zeros(&w.shape().to_vec());
    {
        let gwd = gw.data_mut();
        for co in 0..spec.out_ch {
            for ci in 0..spec.in_ch {
                for jf in 0..kf {
                    for jt in 0..kt {
                        let mut acc = R::ZERO;
                        for fo in 0..f_out {
                            let fi = (fo * sf + jf) as isize - spec.pad_f as isize;
                            if fi < 0 || fi as usize >= f_in {
                                continue;
                            }
                            let g_row = &gd[(co * f_out + fo) * t_out..];
                            let x_row = &xd[(ci * f_in + fi as usize) * t_in..];
                            for t in 0..t_out {
                                let ti = (t * st + jt) as isize - (kt - 1) as isize;
                                if ti >= 0 && (ti as usize) < t_in {
                                    acc += g_row[t] * x_row[ti as usize];
                                }
                            }
                        }
                        gwd[((co * spec.in_ch + ci) * kf + jf) * kt + jt] = acc;
                    }
                }
            }
        }
    }

    let mut gx = Tensor::zeros(&[spec.in_ch, f_in, t_in]);
    {
        let gxd = gx.data_mut();
        for co in 0..spec.out_ch {
            for fo in 0..f_out {
                let g_row = &gd[(co * f_out + fo) * t_out..(co * f_out + fo + 1) * t_out];
                for ci in 0..spec.in_ch {
                    for jf in 0..kf {
                        let fi = (fo * sf + jf) as isize - spec.pad_f as isize;
                        if fi < 0 || fi as usize >= f_in {
                            continue;
                        }
                        let x_row = &mut gxd[(ci * f_in + fi as usize) * t_in
                            ..(ci * f_in + fi as usize + 1) * t_in];
                        for jt in 0..kt {
                            let wv = wd[((co * spec.in_ch + ci) * kf + jf) * kt + jt];
                            for (t, g) in g_row.iter().enumerate() {
                                let ti = (t * st + jt) as isize - (kt - 1) as isize;
                                if ti >= 0 && (ti as usize) < t_in {
                                    x_row[ti as usize] += wv * *g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    (gx, gw, gb)
}
