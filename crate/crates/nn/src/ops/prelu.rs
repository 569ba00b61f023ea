//! PReLU with one learnable slope per channel along a chosen axis.

use crate::real::Real;
use crate::tensor::Tensor;

/// Extents around the channel axis: `x` viewed as `[outer, channels, inner]`.
pub(crate) fn axis_split<R: Real>(x: &Tensor<R>, axis: usize) -> (usize, usize, usize) {
    let shape = x.shape();
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub fn prelu_forward<R: Real>(x: &Tensor<R>, slope: &Tensor<R>, axis: usize) -> Tensor<R> {
    let (outer, c, inner) = axis_split(x, axis);
    debug_assert_eq!(slope.numel(), c);
    let mut out = Tensor::zeros(&x.shape().to_vec());
    for o in 0..outer {
        for ch in 0..c {
            let a = slope.data()[ch];
            let base = (o * c + ch) * inner;
            for i in 0..inner {
                let v = x.data()[base + i];
                out.data_mut()[base + i] = if v >= R::ZERO { v } else { a * v };
            }
        }
    }
    out
}

/// Same map for one contiguous channel strip; shared with streaming.
pub fn prelu_strip<R: Real>(xs: &[R], a: R, out: &mut [R]) {
    for (o, v) in out.iter_mut().zip(xs) {
        *o = if *v >= R::ZERO { *v } else { a * *v };
    }
}

pub fn prelu_backward<R: Real>(
    x: &Tensor<R>,
    slope: &Tensor<R>,
    axis: usize,
    grad_out: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>) {
    let (outer, c, inner) = axis_split(x, axis);
    let mut gx = Tensor::zeros(&x.shape().to_vec());
    let mut gslope = Tensor::zeros(&[c]);
    for o in 0..outer {
        for ch in 0..c {
            let a = slope.data()[ch];
            let base = (o * c + ch) * inner;
            let mut ga = R::ZERO;
            for i in 0..inner {
                let v = x.data()[base + i];
                let g = grad_out.data()[base + i];
                if v >= R::ZERO {
                    gx.data_mut()[base + i] = g;
                } else {
                    gx.data_mut()[base + i] = a * g;
                    ga += g * v;
                }
            }
            gslope.data_mut()[ch] += ga;
        }
    }
    (gx, gslope)
}
