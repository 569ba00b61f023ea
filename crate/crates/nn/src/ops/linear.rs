//! Affine map along the last axis: `y = x W^T + b` with `x: [M, K]`,
//! `w: [N, K]`, `b: [N]`.

use crate::real::Real;
use crate::tensor::Tensor;

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut acc = R::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

pub fn linear_forward<R: Real>(
    x: &Tensor<R>,
    w: &Tensor<R>,
    b: Option<&Tensor<R>>,
) -> Tensor<R> {
    let (m, k) = (x.shape()[0], x.shape()[1]);
    let n = w.shape()[0];
    debug_assert_eq!(w.shape()[1], k);
    let mut out = Tensor::zeros(&[m, n]);
    for row in 0..m {
        let xs = &x.data()[row * k..(row + 1) * k];
        let os = &mut out.data_mut()[row * n..(row + 1) * n];
        matvec_rows(w.data(), b.map(|t| t.data()), xs, k, os);
    }
    out
}

/// `out[n] = b[n] + dot(w_row_n, x)`; shared with the streaming path.
pub fn matvec_rows<R: Real>(w: &[R], b: Option<&[R]>, x: &[R], k: usize, out: &mut [R]) {
    for (nrow, o) in out.iter_mut().enumerate() {
        let base = match b {
            Some(bias) => bias[nrow],
            None => R::ZERO,
        };
        *o = base + dot(&w[nrow * k..(nrow + 1) * k], x);
    }
}

pub fn linear_backward<R: Real>(
    x: &Tensor<R>,
    w: &Tensor<R>,
    grad_out: &Tensor<R>,
    with_bias: bool,
) -> (Tensor<R>, Tensor<R>, Option<Tensor<R>>) {
    let (m, k) = (x.shape()[0], x.shape()[1]);
    let n = w.shape()[0];
    let mut gx = Tensor::zeros(&[m, k]);
    let mut gw = Tensor::zeros(&[n, k]);
    let mut gb = with_bias.then(|| Tensor::zeros(&[n]));
    for row in 0..m {
        let xs = &x.data()[row * k..(row + 1) * k];
        let gs = &grad_out.data()[row * n..(row + 1) * n];
        let gxs = &mut gx.data_mut()[row * k..(row + 1) * k];
        for (nrow, g) in gs.iter().enumerate() {
            let wrow = &w.data()[nrow * k..(nrow + 1) * k];
            let gwrow = &mut gw.data_mut()[nrow * k..(nrow + 1) * k];
            for i in 0..k {
                gwrow[i] += *g * xs[i];
                gxs[i] += *g * wrow[i];
            }
            if let Some(gb) = gb.as_mut() {
                gb.data_mut()[nrow] += *g;
            }
        }
    }
    (gx, gw, gb)
}
