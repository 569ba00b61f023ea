//! Training losses.
//!
//! Stage 1: mean squared error between enhanced and clean magnitude grids.
//! Stage 2: hybrid loss — mean absolute waveform error plus mean squared
//! mask error, summed with unit weights. All norms are means over element
//! count so loss magnitudes are shape-invariant.
//!
//! The waveform term differentiates through the inverse cosine transform and
//! its overlap-add, implemented as a custom tape op ([`IstdctOp`]) whose
//! backward pass is the exact adjoint (window-gather followed by the forward
//! cosine transform).

use fdfnet_dsp::{cola_envelope, make_window, FrameConfig, RealSpectrogram};
use fdfnet_nn::graph::{CustomOp, Graph, NodeId};
use fdfnet_nn::real::Real;
use fdfnet_nn::tensor::Tensor;

use crate::error::CoreError;

/// Mean of squared differences (Frobenius norm squared over element count).
pub fn mse_node<R: Real>(g: &mut Graph<R>, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
    let d = g.sub(a, b)?;
    let sq = g.square(d);
    Ok(g.mean(sq))
}

/// Mean absolute difference.
pub fn l1_node<R: Real>(g: &mut Graph<R>, a: NodeId, b: NodeId) -> Result<NodeId, CoreError> {
    let d = g.sub(a, b)?;
    let ab = g.abs(d);
    Ok(g.mean(ab))
}

/// Stage-1 loss node.
pub fn fme_loss_node<R: Real>(
    g: &mut Graph<R>,
    pred_mag: NodeId,
    clean_mag: NodeId,
) -> Result<NodeId, CoreError> {
    mse_node(g, pred_mag, clean_mag)
}

/// Stage-2 hybrid loss node: `mean|s_hat - s| + mean((m_hat - m)^2)`.
pub fn dsr_loss_node<R: Real>(
    g: &mut Graph<R>,
    s_hat: NodeId,
    s_ref: NodeId,
    mask_pred: NodeId,
    mask_target: NodeId,
) -> Result<NodeId, CoreError> {
    let time_term = l1_node(g, s_hat, s_ref)?;
    let mask_term = mse_node(g, mask_pred, mask_target)?;
    Ok(g.add(time_term, mask_term)?)
}

/// Plain (non-tape) stage-1 loss over raw grids.
pub fn loss_fme(pred: &[f64], clean: &[f64]) -> f64 {
    assert_eq!(pred.len(), clean.len());
    let sum: f64 = pred.iter().zip(clean).map(|(a, b)| (a - b) * (a - b)).sum();
    sum / pred.len() as f64
}

/// Plain (non-tape) stage-2 hybrid loss.
pub fn loss_dsr(s_hat: &[f64], s: &[f64], mask_pred: &[f64], mask_target: &[f64]) -> f64 {
    assert_eq!(s_hat.len(), s.len());
    assert_eq!(mask_pred.len(), mask_target.len());
    let l1: f64 = s_hat.iter().zip(s).map(|(a, b)| (a - b).abs()).sum::<f64>() / s.len() as f64;
    let mse: f64 = mask_pred
        .iter()
        .zip(mask_target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / mask_pred.len() as f64;
    l1 + mse
}

/// Differentiable inverse STDCT: per-frame orthonormal DCT-III, synthesis
/// windowing, overlap-add, envelope normalization, edge trim. Input tensors
/// are `[bins, T]` bin-major; output is the `[out_len]` waveform.
#[derive(Clone)]
pub struct IstdctOp<R: Real> {
    n: usize,
    window_len: usize,
    hop: usize,
    n_frames: usize,
    pad_lead: usize,
    out_len: usize,
    window: Vec<R>,
    /// cos(pi * m / (2n)) over the full period `m in 0..4n`.
    cos: Vec<R>,
    beta: Vec<R>,
    env: Vec<R>,
}

impl<R: Real> IstdctOp<R> {
    /// Builds the op against the framing metadata of `template` (the
    /// spectrogram whose grid the masked estimate replaces).
    pub fn new(template: &RealSpectrogram) -> Result<Self, CoreError> {
        let config: FrameConfig = *template.config();
        let n = config.transform_points;
        let window64 = make_window(&config)?;
        let n_frames = template.n_frames();
        let env64 = cola_envelope(&window64, config.hop, n_frames);
        let step = std::f64::consts::PI / (2 * n) as f64;
        Ok(Self {
            n,
            window_len: config.window_len,
            hop: config.hop,
            n_frames,
            pad_lead: template.pad_lead(),
            out_len: template.out_len(),
            window: window64.iter().map(|&w| R::from_f64(w)).collect(),
            cos: (0..4 * n).map(|m| R::from_f64((step * m as f64).cos())).collect(),
            beta: (0..n)
                .map(|k| {
                    let b = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                    R::from_f64(b)
                })
                .collect(),
            env: env64.iter().map(|&e| R::from_f64(e.max(1e-30))).collect(),
        })
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Forward synthesis of a `[bins, T]` coefficient tensor.
    pub fn synthesize(&self, coeffs: &Tensor<R>) -> Tensor<R> {
        let t_total = self.n_frames;
        debug_assert_eq!(coeffs.shape(), [self.n, t_total]);
        let ola_len = (t_total - 1) * self.hop + self.window_len.max(self.n);
        let mut acc = vec![R::ZERO; ola_len.max(self.pad_lead + self.out_len)];
        let period = 4 * self.n;
        let cd = coeffs.data();
        for t in 0..t_total {
            for nn in 0..self.window_len {
                let mut v = R::ZERO;
                let step = 2 * nn + 1;
                let mut m = 0usize;
                for k in 0..self.n {
                    v += cd[k * t_total + t] * self.beta[k] * self.cos[m];
                    m += step;
                    if m >= period {
                        m -= period;
                    }
                }
                acc[t * self.hop + nn] += v * self.window[nn];
            }
        }
        let mut out = Tensor::zeros(&[self.out_len]);
        for i in 0..self.out_len {
            let p = self.pad_lead + i;
            out.data_mut()[i] = acc[p] / self.env[p.min(self.env.len() - 1)];
        }
        out
    }

    /// Records the synthesis on the tape.
    pub fn apply(self, g: &mut Graph<R>, coeffs: NodeId) -> NodeId {
        let value = self.synthesize(g.value(coeffs));
        g.custom(vec![coeffs], value, Box::new(self))
    }
}

impl<R: Real> CustomOp<R> for IstdctOp<R> {
    fn name(&self) -> &'static str {
        "istdct"
    }

    fn backward(&self, grad_out: &Tensor<R>, _parents: &[&Tensor<R>]) -> Vec<Option<Tensor<R>>> {
        let t_total = self.n_frames;
        let ola_len = (t_total - 1) * self.hop + self.window_len.max(self.n);
        let mut gacc = vec![R::ZERO; ola_len.max(self.pad_lead + self.out_len)];
        for i in 0..self.out_len {
            let p = self.pad_lead + i;
            gacc[p] = grad_out.data()[i] / self.env[p.min(self.env.len() - 1)];
        }
        let mut gc = Tensor::zeros(&[self.n, t_total]);
        let period = 4 * self.n;
        let mut gframe = vec![R::ZERO; self.window_len];
        for t in 0..t_total {
            for (nn, gf) in gframe.iter_mut().enumerate() {
                *gf = gacc[t * self.hop + nn] * self.window[nn];
            }
            // Adjoint of the orthonormal DCT-III is the orthonormal DCT-II.
            for k in 0..self.n {
                let mut acc = R::ZERO;
                let step = 2 * k;
                let mut m = k;
                for gf in &gframe {
                    acc += *gf * self.cos[m];
                    m += step;
                    if m >= period {
                        m -= period;
                    }
                }
                gc.data_mut()[k * t_total + t] = acc * self.beta[k];
            }
        }
        vec![Some(gc)]
    }
}
