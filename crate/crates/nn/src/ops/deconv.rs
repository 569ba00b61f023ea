//! Causal transposed 2D convolution over `[channels, frequency, time]`.
//!
//! The frequency axis is a true transposed convolution with stride `sf`,
//! cropped by `pad_f` leading positions to a caller-supplied target extent —
//! the exact adjoint of the paired convolution's frequency geometry. The
//! time axis (stride 1) is a causal correlation over the past `kt` frames,
//! so decoder outputs never look ahead.
//!
//! Same accumulation-order contract as `conv2d`: bias first, then taps in
//! `(ci, jf, jt)` order per output element.

use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deconv2dSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    /// Kernel extent over (frequency, time). Time stride is fixed at 1.
    pub kernel: (usize, usize),
    /// Frequency upsampling stride.
    pub stride_f: usize,
    /// Leading crop on the frequency axis (the paired conv's padding).
    pub pad_f: usize,
    /// Target frequency extent after cropping.
    pub out_f: usize,
}

impl Deconv2dSpec {
    /// Frequency extent of the uncropped transposed convolution.
    pub fn full_freq(&self, in_freq: usize) -> usize {
        (in_freq - 1) * self.stride_f + self.kernel.0
    }

    /// The target extent must fit inside the uncropped output.
    pub fn output_reachable(&self, in_freq: usize) -> bool {
        self.pad_f + self.out_f <= self.full_freq(in_freq)
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.in_ch, self.out_ch, self.kernel.0, self.kernel.1]
    }

    /// Contributing input positions for output frequency `fo`: pairs of
    /// `(fi, jf)` with `fi * sf + jf == fo + pad_f`.
    fn freq_taps(&self, fo: usize, in_freq: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let target = fo + self.pad_f;
        let sf = self.stride_f;
        (0..self.kernel.0).filter_map(move |jf| {
            if target < jf || (target - jf) % sf != 0 {
                return None;
            }
            let fi = (target - jf) / sf;
            (fi < in_freq).then_some((fi, jf))
        })
    }
}

/// Offline forward pass; `x` is `[in_ch, F, T]`, result `[out_ch, out_f, T]`.
pub fn deconv2d_forward<R: Real>(
    spec: &Deconv2dSpec,
    x: &Tensor<R>,
    w: &Tensor<R>,
    b: &Tensor<R>,
) -> Tensor<R> {
    let (f_in, t) = (x.shape()[1], x.shape()[2]);
    assert!(spec.output_reachable(f_in), "unreachable output extent");
    let (kf, kt) = spec.kernel;
    let mut out = Tensor::zeros(&[spec.out_ch, spec.out_f, t]);
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let od = out.data_mut();

    for co in 0..spec.out_ch {
        for fo in 0..spec.out_f {
            let row = &mut od[(co * spec.out_f + fo) * t..(co * spec.out_f + fo + 1) * t];
            row.fill(bd[co]);
            for ci in 0..spec.in_ch {
                for (fi, jf) in spec.freq_taps(fo, f_in) {
                    let x_row = &xd[(ci * f_in + fi) * t..(ci * f_in + fi + 1) * t];
                    for jt in 0..kt {
                        let wv = wd[((ci * spec.out_ch + co) * kf + jf) * kt + jt];
                        let lead = kt - 1 - jt;
                        for (o, xv) in row[lead..].iter_mut().zip(&x_row[..t - lead]) {
                            *o += wv * *xv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// One streamed output frame; mirrors [`deconv2d_forward`] per time step.
/// `history` holds the last `kt` input frames, oldest first, each
/// `[in_ch * F]`.
pub fn deconv2d_step<R: Real>(
    spec: &Deconv2dSpec,
    w: &Tensor<R>,
    b: &Tensor<R>,
    f_in: usize,
    history: &[&[R]],
    out: &mut [R],
) {
    let (kf, kt) = spec.kernel;
    assert_eq!(history.len(), kt);
    let wd = w.data();
    let bd = b.data();
    debug_assert_eq!(out.len(), spec.out_ch * spec.out_f);

    for co in 0..spec.out_ch {
        for fo in 0..spec.out_f {
            let mut acc = bd[co];
            for ci in 0..spec.in_ch {
                for (fi, jf) in spec.freq_taps(fo, f_in) {
                    for (jt, frame) in history.iter().enumerate() {
                        let wv = wd[((ci * spec.out_ch + co) * kf + jf) * kt + jt];
                        acc += wv * frame[ci * f_in + fi];
                    }
                }
            }
            out[co * spec.out_f + fo] = acc;
        }
    }
}

/// Gradients wrt input, weight and bias.
pub fn deconv2d_backward<R: Real>(
    spec: &Deconv2dSpec,
    x: &Tensor<R>,
    w: &Tensor<R>,
    grad_out: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>, Tensor<R>) {
    let (f_in, t) = (x.shape()[1], x.shape()[2]);
    let (kf, kt) = spec.kernel;
    let xd = x.data();
    let wd = w.data();
    let gd = grad_out.data();

    let mut gb = Tensor::zeros(&[spec.out_ch]);
    for co in 0..spec.out_ch {
        let mut acc = R::ZERO;
        for v in &gd[co * spec.out_f * t..(co + 1) * spec.out_f * t] {
            acc += *v;
        }
        gb.data_mut()[co] = acc;
    }

    let mut gw = Tensor::zeros(&w.shape().to_vec());
    let mut gx = Tensor::zeros(&[spec.in_ch, f_in, t]);
    {
        let gwd = gw.data_mut();
        let gxd = gx.data_mut();
        for co in 0..spec.out_ch {
            for fo in 0..spec.out_f {
                let g_row = &gd[(co * spec.out_f + fo) * t..(co * spec.out_f + fo + 1) * t];
                for ci in 0..spec.in_ch {
                    for (fi, jf) in spec.freq_taps(fo, f_in) {
                        let x_base = (ci * f_in + fi) * t;
                        for jt in 0..kt {
                            let widx = ((ci * spec.out_ch + co) * kf + jf) * kt + jt;
                            let wv = wd[widx];
                            let lead = kt - 1 - jt;
                            let mut wacc = R::ZERO;
                            for (k, g) in g_row[lead..].iter().enumerate() {
                                let xv = xd[x_base + k];
                                wacc += *g * xv;
                                gxd[x_base + k] += wv * *g;
                            }
                            gwd[widx] += wacc;
                        }
                    }
                }
            }
        }
    }

    (gx, gw, gb)
}
