//! Reverse-mode gradient tape.
//!
//! A [`Graph`] records every operation in execution order as a Wengert list.
//! [`Graph::backward`] seeds the scalar loss with 1, walks the list once in
//! reverse, and accumulates gradients into every trainable parameter leaf.
//! A tape can be differentiated once; re-run the forward pass to record a
//! fresh tape.

use crate::error::NnError;
use crate::ops::conv::{conv2d_backward, conv2d_forward, Conv2dSpec};
use crate::ops::deconv::{deconv2d_backward, deconv2d_forward, Deconv2dSpec};
use crate::ops::gru::{gru_seq_backward, gru_seq_forward, GruCache, GruSpec};
use crate::ops::linear::{linear_backward, linear_forward};
use crate::ops::norm::{
    bn_eval_forward, bn_train_backward, bn_train_forward, ln_backward, ln_forward, BnStats,
};
use crate::ops::prelu::{prelu_backward, prelu_forward};
use crate::ops::shape::{concat_backward, concat_forward, inverse_perm, permute_forward};
use crate::params::{ParamGrads, ParamId, ParamStore};
use crate::real::{sigmoid, softplus, Real};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// Custom differentiable operation defined outside this crate. The forward
/// value is supplied by the caller; `backward` maps the output gradient to
/// per-parent gradients (aligned with the parent list, `None` for parents
/// that need no gradient).
pub trait CustomOp<R: Real>: Send + Sync {
    fn name(&self) -> &'static str;
    fn backward(&self, grad_out: &Tensor<R>, parents: &[&Tensor<R>]) -> Vec<Option<Tensor<R>>>;
}

enum Op<R: Real> {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, R),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Abs(NodeId),
    Square(NodeId),
    Mean(NodeId),
    Reshape(NodeId),
    Permute(NodeId, Vec<usize>),
    Concat(Vec<NodeId>, usize),
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Conv2d { x: NodeId, w: NodeId, b: NodeId, spec: Conv2dSpec },
    Deconv2d { x: NodeId, w: NodeId, b: NodeId, spec: Deconv2dSpec },
    BatchNormTrain { x: NodeId, gamma: NodeId, beta: NodeId, stats: BnStats<R> },
    BatchNormEval { x: NodeId, gamma: NodeId, beta: NodeId, frozen: BnStats<R> },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId },
    PRelu { x: NodeId, slope: NodeId, axis: usize },
    GruSeq {
        x: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        b_ih: NodeId,
        b_hh: NodeId,
        h0: Option<NodeId>,
        spec: GruSpec,
        cache: Box<GruCache<R>>,
    },
    Custom { parents: Vec<NodeId>, op: Box<dyn CustomOp<R>> },
}

struct Node<R: Real> {
    value: Tensor<R>,
    op: Op<R>,
    needs_grad: bool,
    param: Option<ParamId>,
}

pub struct Graph<R: Real> {
    nodes: Vec<Node<R>>,
    consumed: bool,
}

impl<R: Real> Default for Graph<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Graph<R> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<R> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op, needs_grad, param: None });
        id
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Non-differentiable input (data, targets, frozen features).
    pub fn input(&mut self, value: Tensor<R>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf not tied to a parameter store (tests).
    pub fn leaf(&mut self, value: Tensor<R>, needs_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, needs_grad)
    }

    /// Parameter leaf; gradient flows when the parameter is trainable.
    pub fn param(&mut self, store: &ParamStore<R>, id: ParamId) -> NodeId {
        let p = store.get(id);
        let node = self.push(p.value.clone(), Op::Leaf, p.trainable);
        self.nodes[node.0].param = Some(id);
        node
    }

    fn binary_shape_check(&self, a: NodeId, b: NodeId, what: &str) -> Result<(), NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.binary_shape_check(a, b, "add")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x + *y)
            .collect();
        let value = Tensor::from_vec(self.shape(a), data);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.binary_shape_check(a, b, "sub")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x - *y)
            .collect();
        let value = Tensor::from_vec(self.shape(a), data);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.binary_shape_check(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x * *y)
            .collect();
        let value = Tensor::from_vec(self.shape(a), data);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: NodeId, factor: R) -> NodeId {
        let value = self.value(a).map(|v| v * factor);
        let ng = self.needs(a);
        self.push(value, Op::Scale(a, factor), ng)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        let ng = self.needs(a);
        self.push(value, Op::Sigmoid(a), ng)
    }

    pub fn tanh_op(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| v.tanh());
        let ng = self.needs(a);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn softplus_op(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(softplus);
        let ng = self.needs(a);
        self.push(value, Op::Softplus(a), ng)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| v.abs());
        let ng = self.needs(a);
        self.push(value, Op::Abs(a), ng)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| v * v);
        let ng = self.needs(a);
        self.push(value, Op::Square(a), ng)
    }

    /// Mean over all elements, accumulated in f64, returned as `[1]`.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let sum: f64 = self.value(a).data().iter().map(|v| v.to_f64()).sum();
        let value = Tensor::scalar(R::from_f64(sum / self.value(a).numel() as f64));
        let ng = self.needs(a);
        self.push(value, Op::Mean(a), ng)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId, NnError> {
        if shape.iter().product::<usize>() != self.value(a).numel() {
            return Err(NnError::Shape(format!(
                "reshape {:?} -> {:?}",
                self.shape(a),
                shape
            )));
        }
        let value = self.value(a).reshaped(shape);
        let ng = self.needs(a);
        Ok(self.push(value, Op::Reshape(a), ng))
    }

    pub fn permute(&mut self, a: NodeId, perm: &[usize]) -> Result<NodeId, NnError> {
        if perm.len() != self.shape(a).len() {
            return Err(NnError::Shape(format!(
                "permute {:?} on rank {}",
                perm,
                self.shape(a).len()
            )));
        }
        let value = permute_forward(self.value(a), perm);
        let ng = self.needs(a);
        Ok(self.push(value, Op::Permute(a, perm.to_vec()), ng))
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId, NnError> {
        if parts.is_empty() {
            return Err(NnError::InvalidArgument("concat of zero tensors".into()));
        }
        let first = self.shape(parts[0]).to_vec();
        for &p in parts {
            let s = self.shape(p);
            if s.len() != first.len()
                || s.iter().enumerate().any(|(i, &e)| i != axis && e != first[i])
            {
                return Err(NnError::Shape(format!("concat {:?} vs {:?}", first, s)));
            }
        }
        let tensors: Vec<&Tensor<R>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = concat_forward(&tensors, axis);
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis), ng))
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId, NnError> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(NnError::Shape(format!("linear x{:?} w{:?}", xs, ws)));
        }
        if let Some(b) = b {
            if self.value(b).numel() != ws[0] {
                return Err(NnError::Shape("linear bias size".into()));
            }
        }
        let value = linear_forward(self.value(x), self.value(w), b.map(|b| self.value(b)));
        let ng = self.needs(x) || self.needs(w) || b.map(|b| self.needs(b)).unwrap_or(false);
        Ok(self.push(value, Op::Linear { x, w, b }, ng))
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        spec: Conv2dSpec,
    ) -> Result<NodeId, NnError> {
        let xs = self.shape(x);
        if xs.len() != 3 || xs[0] != spec.in_ch {
            return Err(NnError::Shape(format!("conv2d input {:?}", xs)));
        }
        if self.shape(w) != spec.weight_shape() {
            return Err(NnError::Shape(format!(
                "conv2d weight {:?} vs {:?}",
                self.shape(w),
                spec.weight_shape()
            )));
        }
        if spec.out_freq(xs[1]).is_none() {
            return Err(NnError::Shape(format!(
                "conv2d kernel {} larger than padded input {}",
                spec.kernel.0,
                xs[1] + 2 * spec.pad_f
            )));
        }
        let value = conv2d_forward(&spec, self.value(x), self.value(w), self.value(b));
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(value, Op::Conv2d { x, w, b, spec }, ng))
    }

    pub fn deconv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        spec: Deconv2dSpec,
    ) -> Result<NodeId, NnError> {
        let xs = self.shape(x);
        if xs.len() != 3 || xs[0] != spec.in_ch {
            return Err(NnError::Shape(format!("deconv2d input {:?}", xs)));
        }
        if self.shape(w) != spec.weight_shape() {
            return Err(NnError::Shape(format!(
                "deconv2d weight {:?} vs {:?}",
                self.shape(w),
                spec.weight_shape()
            )));
        }
        if !spec.output_reachable(xs[1]) {
            return Err(NnError::Shape(format!(
                "deconv2d target extent {} unreachable from input {}",
                spec.out_f, xs[1]
            )));
        }
        let value = deconv2d_forward(&spec, self.value(x), self.value(w), self.value(b));
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(value, Op::Deconv2d { x, w, b, spec }, ng))
    }

    /// Batch norm over channel axis 0 using this input's statistics.
    /// The recorded statistics are exposed via [`Graph::bn_stats`] for the
    /// trainer's running-average update.
    pub fn batch_norm_train(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
    ) -> Result<NodeId, NnError> {
        let c = self.shape(x)[0];
        if self.value(gamma).numel() != c || self.value(beta).numel() != c {
            return Err(NnError::Shape("batch norm scale/shift size".into()));
        }
        let (value, stats) = bn_train_forward(self.value(x), self.value(gamma), self.value(beta));
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(value, Op::BatchNormTrain { x, gamma, beta, stats }, ng))
    }

    /// Batch norm using frozen running statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: &Tensor<R>,
        running_var: &Tensor<R>,
    ) -> Result<NodeId, NnError> {
        let c = self.shape(x)[0];
        if running_mean.numel() != c || running_var.numel() != c {
            return Err(NnError::Shape("batch norm running stats size".into()));
        }
        let value = bn_eval_forward(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            running_mean,
            running_var,
        );
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let frozen = BnStats { mean: running_mean.clone(), var: running_var.clone() };
        Ok(self.push(value, Op::BatchNormEval { x, gamma, beta, frozen }, ng))
    }

    /// Batch statistics recorded by a `batch_norm_train` node.
    pub fn bn_stats(&self, id: NodeId) -> Option<&BnStats<R>> {
        match &self.nodes[id.0].op {
            Op::BatchNormTrain { stats, .. } => Some(stats),
            _ => None,
        }
    }

    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
    ) -> Result<NodeId, NnError> {
        let h = *self.shape(x).last().unwrap();
        if self.value(gamma).numel() != h || self.value(beta).numel() != h {
            return Err(NnError::Shape("layer norm scale/shift size".into()));
        }
        let value = ln_forward(self.value(x), self.value(gamma), self.value(beta));
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta }, ng))
    }

    pub fn prelu(&mut self, x: NodeId, slope: NodeId, axis: usize) -> Result<NodeId, NnError> {
        if axis >= self.shape(x).len() || self.value(slope).numel() != self.shape(x)[axis] {
            return Err(NnError::Shape("prelu slope size".into()));
        }
        let value = prelu_forward(self.value(x), self.value(slope), axis);
        let ng = self.needs(x) || self.needs(slope);
        Ok(self.push(value, Op::PRelu { x, slope, axis }, ng))
    }

    /// Batched GRU over `x: [B, S, I]`; returns the `[B, S, H]` output
    /// sequence. The final state per lane is available via
    /// [`Graph::gru_final_state`].
    #[allow(clippy::too_many_arguments)]
    pub fn gru_seq(
        &mut self,
        x: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        b_ih: NodeId,
        b_hh: NodeId,
        h0: Option<NodeId>,
        spec: GruSpec,
    ) -> Result<NodeId, NnError> {
        let xs = self.shape(x);
        if xs.len() != 3 || xs[2] != spec.input {
            return Err(NnError::Shape(format!(
                "gru input {:?}, expected [B, S, {}]",
                xs, spec.input
            )));
        }
        let h = spec.hidden;
        if self.shape(w_ih) != [3 * h, spec.input]
            || self.shape(w_hh) != [3 * h, h]
            || self.value(b_ih).numel() != 3 * h
            || self.value(b_hh).numel() != 3 * h
        {
            return Err(NnError::Shape("gru parameter shapes".into()));
        }
        if let Some(h0) = h0 {
            if self.shape(h0) != [xs[0], h] {
                return Err(NnError::Shape(format!(
                    "gru h0 {:?}, expected [{}, {}]",
                    self.shape(h0),
                    xs[0],
                    h
                )));
            }
        }
        let (value, cache) = gru_seq_forward(
            &spec,
            self.value(x),
            self.value(w_ih),
            self.value(w_hh),
            self.value(b_ih),
            self.value(b_hh),
            h0.map(|n| self.value(n)),
        );
        let ng = self.needs(x)
            || self.needs(w_ih)
            || self.needs(w_hh)
            || self.needs(b_ih)
            || self.needs(b_hh)
            || h0.map(|n| self.needs(n)).unwrap_or(false);
        Ok(self.push(
            value,
            Op::GruSeq { x, w_ih, w_hh, b_ih, b_hh, h0, spec, cache: Box::new(cache) },
            ng,
        ))
    }

    /// Final hidden state `[B, H]` recorded by a `gru_seq` node.
    pub fn gru_final_state(&self, id: NodeId) -> Option<&Tensor<R>> {
        match &self.nodes[id.0].op {
            Op::GruSeq { cache, .. } => Some(&cache.h_final),
            _ => None,
        }
    }

    /// Records an externally computed op with a custom backward rule.
    pub fn custom(
        &mut self,
        parents: Vec<NodeId>,
        value: Tensor<R>,
        op: Box<dyn CustomOp<R>>,
    ) -> NodeId {
        let ng = parents.iter().any(|&p| self.needs(p));
        self.push(value, Op::Custom { parents, op }, ng)
    }

    /// Reverse pass from a scalar loss. Returns per-parameter gradients;
    /// parameters not reached by the loss read as zero.
    pub fn backward(&mut self, loss: NodeId, store: &ParamStore<R>) -> Result<ParamGrads<R>, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        if !self.value(loss).is_scalar() {
            return Err(NnError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor<R>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(R::ONE));

        for idx in (0..=loss.0).rev() {
            if grads[idx].is_none() || !self.nodes[idx].needs_grad {
                continue;
            }
            let g = grads[idx].take().unwrap();
            self.backprop_node(idx, &g, &mut grads);
            if self.nodes[idx].param.is_none() {
                // done with this node's gradient
            } else {
                grads[idx] = Some(g);
            }
        }

        let mut out = ParamGrads { grads: (0..store.len()).map(|_| None).collect() };
        for (idx, node) in self.nodes.iter().enumerate() {
            if let (Some(pid), Some(g)) = (node.param, grads[idx].take()) {
                match &mut out.grads[pid.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += *b;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(out)
    }

    /// Like [`Graph::backward`] but returns the raw per-node gradients;
    /// used by the finite-difference harness on leaf nodes.
    pub fn backward_nodes(&mut self, loss: NodeId) -> Result<Vec<Option<Tensor<R>>>, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        if !self.value(loss).is_scalar() {
            return Err(NnError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor<R>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(R::ONE));
        for idx in (0..=loss.0).rev() {
            if grads[idx].is_none() || !self.nodes[idx].needs_grad {
                continue;
            }
            let g = grads[idx].clone().unwrap();
            self.backprop_node(idx, &g, &mut grads);
        }
        Ok(grads)
    }

    fn accumulate(slot: &mut Option<Tensor<R>>, g: Tensor<R>) {
        match slot {
            Some(acc) => {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += *b;
                }
            }
            None => *slot = Some(g),
        }
    }

    fn add_to(&self, grads: &mut [Option<Tensor<R>>], parent: NodeId, g: Tensor<R>) {
        if self.nodes[parent.0].needs_grad {
            Self::accumulate(&mut grads[parent.0], g);
        }
    }

    fn backprop_node(&self, idx: usize, g: &Tensor<R>, grads: &mut [Option<Tensor<R>>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.add_to(grads, *a, g.clone());
                self.add_to(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.add_to(grads, *a, g.clone());
                self.add_to(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let ga = Tensor::from_vec(
                        self.shape(*a),
                        g.data()
                            .iter()
                            .zip(self.value(*b).data())
                            .map(|(x, y)| *x * *y)
                            .collect(),
                    );
                    self.add_to(grads, *a, ga);
                }
                if self.needs(*b) {
                    let gb = Tensor::from_vec(
                        self.shape(*b),
                        g.data()
                            .iter()
                            .zip(self.value(*a).data())
                            .map(|(x, y)| *x * *y)
                            .collect(),
                    );
                    self.add_to(grads, *b, gb);
                }
            }
            Op::Scale(a, factor) => {
                let f = *factor;
                self.add_to(grads, *a, g.map(|v| v * f));
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[idx].value;
                let ga = Tensor::from_vec(
                    self.shape(*a),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gv, yv)| *gv * *yv * (R::ONE - *yv))
                        .collect(),
                );
                self.add_to(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[idx].value;
                let ga = Tensor::from_vec(
                    self.shape(*a),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gv, yv)| *gv * (R::ONE - *yv * *yv))
                        .collect(),
                );
                self.add_to(grads, *a, ga);
            }
            Op::Softplus(a) => {
                let x = self.value(*a);
                let ga = Tensor::from_vec(
                    x.shape(),
                    g.data()
                        .iter()
                        .zip(x.data())
                        .map(|(gv, xv)| *gv * sigmoid(*xv))
                        .collect(),
                );
                self.add_to(grads, *a, ga);
            }
            Op::Abs(a) => {
                let x = self.value(*a);
                let ga = Tensor::from_vec(
                    x.shape(),
                    g.data()
                        .iter()
                        .zip(x.data())
                        .map(|(gv, xv)| {
                            if *xv > R::ZERO {
                                *gv
                            } else if *xv < R::ZERO {
                                -*gv
                            } else {
                                R::ZERO
                            }
                        })
                        .collect(),
                );
                self.add_to(grads, *a, ga);
            }
            Op::Square(a) => {
                let x = self.value(*a);
                let two = R::from_f64(2.0);
                let ga = Tensor::from_vec(
                    x.shape(),
                    g.data()
                        .iter()
                        .zip(x.data())
                        .map(|(gv, xv)| *gv * two * *xv)
                        .collect(),
                );
                self.add_to(grads, *a, ga);
            }
            Op::Mean(a) => {
                let n = self.value(*a).numel();
                let scale = R::from_f64(1.0 / n as f64) * g.item();
                self.add_to(grads, *a, Tensor::full(self.shape(*a), scale));
            }
            Op::Reshape(a) => {
                self.add_to(grads, *a, g.reshaped(self.shape(*a)));
            }
            Op::Permute(a, perm) => {
                let inv = inverse_perm(perm);
                self.add_to(grads, *a, permute_forward(g, &inv));
            }
            Op::Concat(parts, axis) => {
                let tensors: Vec<&Tensor<R>> = parts.iter().map(|&p| self.value(p)).collect();
                let split = concat_backward(g, &tensors, *axis);
                for (&p, gp) in parts.iter().zip(split) {
                    self.add_to(grads, p, gp);
                }
            }
            Op::Linear { x, w, b } => {
                let (gx, gw, gb) =
                    linear_backward(self.value(*x), self.value(*w), g, b.is_some());
                self.add_to(grads, *x, gx);
                self.add_to(grads, *w, gw);
                if let (Some(b), Some(gb)) = (b, gb) {
                    self.add_to(grads, *b, gb);
                }
            }
            Op::Conv2d { x, w, b, spec } => {
                let (gx, gw, gb) = conv2d_backward(spec, self.value(*x), self.value(*w), g);
                self.add_to(grads, *x, gx);
                self.add_to(grads, *w, gw);
                self.add_to(grads, *b, gb);
            }
            Op::Deconv2d { x, w, b, spec } => {
                let (gx, gw, gb) = deconv2d_backward(spec, self.value(*x), self.value(*w), g);
                self.add_to(grads, *x, gx);
                self.add_to(grads, *w, gw);
                self.add_to(grads, *b, gb);
            }
            Op::BatchNormTrain { x, gamma, beta, stats } => {
                let (gx, gg, gb) = bn_train_backward(self.value(*x), self.value(*gamma), stats, g);
                self.add_to(grads, *x, gx);
                self.add_to(grads, *gamma, gg);
                self.add_to(grads, *beta, gb);
            }
            Op::BatchNormEval { x, gamma, beta, frozen } => {
                // Running statistics are constants here, so the map is a
                // per-channel affine.
                let xs = self.value(*x);
                let c = xs.shape()[0];
                let m = xs.numel() / c;
                let eps = R::from_f64(crate::ops::norm::NORM_EPS);
                let mut gx = Tensor::zeros(xs.shape());
                let mut gg = Tensor::zeros(&[c]);
                let mut gbeta = Tensor::zeros(&[c]);
                for ch in 0..c {
                    let inv_std = R::ONE / (frozen.var.data()[ch] + eps).sqrt();
                    let mu = frozen.mean.data()[ch];
                    let gam = self.value(*gamma).data()[ch];
                    let mut sg = R::ZERO;
                    let mut sgx = R::ZERO;
                    for (v, gv) in xs.data()[ch * m..(ch + 1) * m]
                        .iter()
                        .zip(&g.data()[ch * m..(ch + 1) * m])
                    {
                        sg += *gv;
                        sgx += *gv * (*v - mu) * inv_std;
                    }
                    gg.data_mut()[ch] = sgx;
                    gbeta.data_mut()[ch] = sg;
                    for (o, gv) in gx.data_mut()[ch * m..(ch + 1) * m]
                        .iter_mut()
                        .zip(&g.data()[ch * m..(ch + 1) * m])
                    {
                        *o = *gv * gam * inv_std;
                    }
                }
                self.add_to(grads, *x, gx);
                self.add_to(grads, *gamma, gg);
                self.add_to(grads, *beta, gbeta);
            }
            Op::LayerNorm { x, gamma, beta } => {
                let (gx, gg, gb) = ln_backward(self.value(*x), self.value(*gamma), g);
                self.add_to(grads, *x, gx);
                self.add_to(grads, *gamma, gg);
                self.add_to(grads, *beta, gb);
            }
            Op::PRelu { x, slope, axis } => {
                let (gx, gs) = prelu_backward(self.value(*x), self.value(*slope), *axis, g);
                self.add_to(grads, *x, gx);
                self.add_to(grads, *slope, gs);
            }
            Op::GruSeq { x, w_ih, w_hh, b_ih, b_hh, h0, spec, cache } => {
                let (gx, gwih, gwhh, gbih, gbhh, gh0) =
                    gru_seq_backward(spec, self.value(*x), self.value(*w_ih), self.value(*w_hh), cache, g);
                self.add_to(grads, *x, gx);
                self.add_to(grads, *w_ih, gwih);
                self.add_to(grads, *w_hh, gwhh);
                self.add_to(grads, *b_ih, gbih);
                self.add_to(grads, *b_hh, gbhh);
                if let Some(h0) = h0 {
                    self.add_to(grads, *h0, gh0);
                }
            }
            Op::Custom { parents, op } => {
                let values: Vec<&Tensor<R>> = parents.iter().map(|&p| self.value(p)).collect();
                let parent_grads = op.backward(g, &values);
                debug_assert_eq!(parent_grads.len(), parents.len());
                for (&p, gp) in parents.iter().zip(parent_grads) {
                    if let Some(gp) = gp {
                        self.add_to(grads, p, gp);
                    }
                }
            }
        }
    }

    /// Whether gradients flow to this node.
    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.needs(id)
    }
}
