//! Batch normalization (channel axis 0 of `[C, F, T]`) and layer
//! normalization (last axis).

use crate::real::Real;
use crate::tensor::Tensor;

pub const NORM_EPS: f64 = 1e-5;

/// Per-channel statistics of one training forward, used for the running
/// exponential moving average.
#[derive(Debug, Clone)]
pub struct BnStats<R: Real> {
    pub mean: Tensor<R>,
    /// Biased variance (normalizing variance).
    pub var: Tensor<R>,
}

/// Training-mode forward: normalizes by the statistics of this input.
pub fn bn_train_forward<R: Real>(
    x: &Tensor<R>,
    gamma: &Tensor<R>,
    beta: &Tensor<R>,
) -> (Tensor<R>, BnStats<R>) {
    let c = x.shape()[0];
    let m = x.numel() / c;
    let eps = R::from_f64(NORM_EPS);
    let mut out = Tensor::zeros(&x.shape().to_vec());
    let mut mean = Tensor::zeros(&[c]);
    let mut var = Tensor::zeros(&[c]);
    let inv_m = R::from_f64(1.0 / m as f64);
    for ch in 0..c {
        let xs = &x.data()[ch * m..(ch + 1) * m];
        let mut mu = R::ZERO;
        for v in xs {
            mu += *v;
        }
        mu *= inv_m;
        let mut v2 = R::ZERO;
        for v in xs {
            let d = *v - mu;
            v2 += d * d;
        }
        v2 *= inv_m;
        mean.data_mut()[ch] = mu;
        var.data_mut()[ch] = v2;
        let inv_std = R::ONE / (v2 + eps).sqrt();
        let (g, b) = (gamma.data()[ch], beta.data()[ch]);
        for (o, v) in out.data_mut()[ch * m..(ch + 1) * m].iter_mut().zip(xs) {
            *o = g * (*v - mu) * inv_std + b;
        }
    }
    (out, BnStats { mean, var })
}

/// Exponential moving average update of the running statistics:
/// `running <- (1 - momentum) * running + momentum * batch`.
pub fn update_running_stats<R: Real>(
    running_mean: &mut Tensor<R>,
    running_var: &mut Tensor<R>,
    batch: &BnStats<R>,
    momentum: f64,
) {
    let m = R::from_f64(momentum);
    let keep = R::from_f64(1.0 - momentum);
    for (r, b) in running_mean.data_mut().iter_mut().zip(batch.mean.data()) {
        *r = keep * *r + m * *b;
    }
    for (r, b) in running_var.data_mut().iter_mut().zip(batch.var.data()) {
        *r = keep * *r + m * *b;
    }
}

/// Evaluation-mode forward: normalizes by the running statistics.
pub fn bn_eval_forward<R: Real>(
    x: &Tensor<R>,
    gamma: &Tensor<R>,
    beta: &Tensor<R>,
    running_mean: &Tensor<R>,
    running_var: &Tensor<R>,
) -> Tensor<R> {
    let c = x.shape()[0];
    let m = x.numel() / c;
    let mut out = Tensor::zeros(&x.shape().to_vec());
    for ch in 0..c {
        let (scale, shift) = bn_eval_affine(gamma, beta, running_mean, running_var, ch);
        for (o, v) in out.data_mut()[ch * m..(ch + 1) * m]
            .iter_mut()
            .zip(&x.data()[ch * m..(ch + 1) * m])
        {
            *o = scale * *v + shift;
        }
    }
    out
}

/// Folded per-channel affine for evaluation mode; the streaming path applies
/// the same closed form per frame.
pub fn bn_eval_affine<R: Real>(
    gamma: &Tensor<R>,
    beta: &Tensor<R>,
    running_mean: &Tensor<R>,
    running_var: &Tensor<R>,
    ch: usize,
) -> (R, R) {
    let eps = R::from_f64(NORM_EPS);
    let inv_std = R::ONE / (running_var.data()[ch] + eps).sqrt();
    let scale = gamma.data()[ch] * inv_std;
    let shift = beta.data()[ch] - running_mean.data()[ch] * scale;
    (scale, shift)
}

/// Training-mode backward; gradients flow through the batch statistics.
pub fn bn_train_backward<R: Real>(
    x: &Tensor<R>,
    gamma: &Tensor<R>,
    stats: &BnStats<R>,
    grad_out: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>, Tensor<R>) {
    let c = x.shape()[0];
    let m = x.numel() / c;
    let eps = R::from_f64(NORM_EPS);
    let inv_m = R::from_f64(1.0 / m as f64);
    let mut gx = Tensor::zeros(&x.shape().to_vec());
    let mut ggamma = Tensor::zeros(&[c]);
    let mut gbeta = Tensor::zeros(&[c]);
    for ch in 0..c {
        let xs = &x.data()[ch * m..(ch + 1) * m];
        let gs = &grad_out.data()[ch * m..(ch + 1) * m];
        let mu = stats.mean.data()[ch];
        let inv_std = R::ONE / (stats.var.data()[ch] + eps).sqrt();
        let mut sum_g = R::ZERO;
        let mut sum_gx = R::ZERO;
        for (v, g) in xs.iter().zip(gs) {
            let xh = (*v - mu) * inv_std;
            sum_g += *g;
            sum_gx += *g * xh;
        }
        ggamma.data_mut()[ch] = sum_gx;
        gbeta.data_mut()[ch] = sum_g;
        let gch = gamma.data()[ch];
        for ((o, v), g) in gx.data_mut()[ch * m..(ch + 1) * m].iter_mut().zip(xs).zip(gs) {
            let xh = (*v - mu) * inv_std;
            *o = gch * inv_std * (*g - sum_g * inv_m - xh * sum_gx * inv_m);
        }
    }
    (gx, ggamma, gbeta)
}

/// Layer norm over the last axis of `x`; `gamma`/`beta` are `[H]`.
pub fn ln_forward<R: Real>(x: &Tensor<R>, gamma: &Tensor<R>, beta: &Tensor<R>) -> Tensor<R> {
    let h = *x.shape().last().unwrap();
    let rows = x.numel() / h;
    let eps = R::from_f64(NORM_EPS);
    let inv_h = R::from_f64(1.0 / h as f64);
    let mut out = Tensor::zeros(&x.shape().to_vec());
    for row in 0..rows {
        let xs = &x.data()[row * h..(row + 1) * h];
        let os = &mut out.data_mut()[row * h..(row + 1) * h];
        ln_row(xs, gamma.data(), beta.data(), eps, inv_h, os);
    }
    out
}

/// One normalized row; shared with the streaming path.
pub fn ln_row<R: Real>(xs: &[R], gamma: &[R], beta: &[R], eps: R, inv_h: R, out: &mut [R]) {
    let mut mu = R::ZERO;
    for v in xs {
        mu += *v;
    }
    mu *= inv_h;
    let mut var = R::ZERO;
    for v in xs {
        let d = *v - mu;
        var += d * d;
    }
    var *= inv_h;
    let inv_std = R::ONE / (var + eps).sqrt();
    for ((o, v), (g, b)) in out.iter_mut().zip(xs).zip(gamma.iter().zip(beta)) {
        *o = *g * (*v - mu) * inv_std + *b;
    }
}

pub fn ln_backward<R: Real>(
    x: &Tensor<R>,
    gamma: &Tensor<R>,
    grad_out: &Tensor<R>,
) -> (Tensor<R>, Tensor<R>, Tensor<R>) {
    let h = *x.shape().last().unwrap();
    let rows = x.numel() / h;
    let eps = R::from_f64(NORM_EPS);
    let inv_h = R::from_f64(1.0 / h as f64);
    let mut gx = Tensor::zeros(&x.shape().to_vec());
    let mut ggamma = Tensor::zeros(&[h]);
    let mut gbeta = Tensor::zeros(&[h]);
    for row in 0..rows {
        let xs = &x.data()[row * h..(row + 1) * h];
        let gs = &grad_out.data()[row * h..(row + 1) * h];
        let mut mu = R::ZERO;
        for v in xs {
            mu += *v;
        }
        mu *= inv_h;
        let mut var = R::ZERO;
        for v in xs {
            let d = *v - mu;
            var += d * d;
        }
        var *= inv_h;
        let inv_std = R::ONE / (var + eps).sqrt();
        let mut sum_g = R::ZERO;
        let mut sum_gx = R::ZERO;
        for ((v, g), gam) in xs.iter().zip(gs).zip(gamma.data()) {
            let xh = (*v - mu) * inv_std;
            sum_g += *g * *gam;
            sum_gx += *g * *gam * xh;
        }
        for (u, (v, g)) in xs.iter().zip(gs).enumerate() {
            let xh = (*v - mu) * inv_std;
            ggamma.data_mut()[u] += *g * xh;
            gbeta.data_mut()[u] += *g;
            gx.data_mut()[row * h + u] =
                inv_std * (*g * gamma.data()[u] - sum_g * inv_h - xh * sum_gx * inv_h);
        }
    }
    (gx, ggamma, gbeta)
}
