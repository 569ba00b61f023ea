//! Layer wrappers binding named parameters to graph ops.
//!
//! Each wrapper registers its tensors under a hierarchical name at
//! construction and replays them onto a [`Graph`] per forward pass.

use rand_chacha::ChaCha12Rng;

use fdfnet_nn::graph::{Graph, NodeId};
use fdfnet_nn::init;
use fdfnet_nn::ops::gru::GruSpec;
use fdfnet_nn::params::{ParamId, ParamStore};
use fdfnet_nn::real::Real;
use fdfnet_nn::{Conv2dSpec, Deconv2dSpec, NnError};

/// Whether batch norm uses this input's statistics or the running ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A batch-norm node recorded during a training forward, so the trainer can
/// fold its statistics into the running buffers.
#[derive(Debug, Clone, Copy)]
pub struct BnUpdate {
    pub node: NodeId,
    pub mean_buf: ParamId,
    pub var_buf: ParamId,
}

pub struct Conv2dLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub spec: Conv2dSpec,
}

impl Conv2dLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        spec: Conv2dSpec,
    ) -> Self {
        let fan_in = spec.in_ch * spec.kernel.0 * spec.kernel.1;
        let w = ps
            .register(&format!("{name}.w"), init::uniform_fan_in(rng, &spec.weight_shape(), fan_in))
            .unwrap();
        let b = ps
            .register(&format!("{name}.b"), init::uniform_fan_in(rng, &[spec.out_ch], fan_in))
            .unwrap();
        Self { w, b, spec }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let w = g.param(ps, self.w);
        let b = g.param(ps, self.b);
        g.conv2d(x, w, b, self.spec)
    }
}

pub struct Deconv2dLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub spec: Deconv2dSpec,
}

impl Deconv2dLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        spec: Deconv2dSpec,
    ) -> Self {
        Self::with_bias(ps, rng, name, spec, None)
    }

    /// `bias_init` pins the bias to a constant instead of the fan-in draw;
    /// output heads use it to start in the target range.
    pub fn with_bias<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        spec: Deconv2dSpec,
        bias_init: Option<f64>,
    ) -> Self {
        let fan_in = spec.in_ch * spec.kernel.0 * spec.kernel.1;
        let w = ps
            .register(&format!("{name}.w"), init::uniform_fan_in(rng, &spec.weight_shape(), fan_in))
            .unwrap();
        let bias = match bias_init {
            Some(v) => init::constant(&[spec.out_ch], v),
            None => init::uniform_fan_in(rng, &[spec.out_ch], fan_in),
        };
        let b = ps.register(&format!("{name}.b"), bias).unwrap();
        Self { w, b, spec }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let w = g.param(ps, self.w);
        let b = g.param(ps, self.b);
        g.deconv2d(x, w, b, self.spec)
    }
}

pub struct BnLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
}

impl BnLayer {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, name: &str, channels: usize) -> Self {
        let gamma = ps.register(&format!("{name}.gamma"), init::constant(&[channels], 1.0)).unwrap();
        let beta = ps.register(&format!("{name}.beta"), init::constant(&[channels], 0.0)).unwrap();
        let running_mean =
            ps.register_buffer(&format!("{name}.rmean"), init::constant(&[channels], 0.0)).unwrap();
        let running_var =
            ps.register_buffer(&format!("{name}.rvar"), init::constant(&[channels], 1.0)).unwrap();
        Self { gamma, beta, running_mean, running_var, channels }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<BnUpdate>,
    ) -> Result<NodeId, NnError> {
        let gamma = g.param(ps, self.gamma);
        let beta = g.param(ps, self.beta);
        match mode {
            Mode::Train => {
                let node = g.batch_norm_train(x, gamma, beta)?;
                updates.push(BnUpdate {
                    node,
                    mean_buf: self.running_mean,
                    var_buf: self.running_var,
                });
                Ok(node)
            }
            Mode::Eval => {
                let mean = ps.value(self.running_mean).clone();
                let var = ps.value(self.running_var).clone();
                g.batch_norm_eval(x, gamma, beta, &mean, &var)
            }
        }
    }
}

pub struct PreluLayer {
    pub slope: ParamId,
    pub axis: usize,
}

impl PreluLayer {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, name: &str, channels: usize, axis: usize) -> Self {
        let slope =
            ps.register(&format!("{name}.slope"), init::constant(&[channels], 0.25)).unwrap();
        Self { slope, axis }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let slope = g.param(ps, self.slope);
        g.prelu(x, slope, self.axis)
    }
}

pub struct LinearLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl LinearLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        in_features: usize,
        out_features: usize,
    ) -> Self {
        let w = ps
            .register(
                &format!("{name}.w"),
                init::uniform_fan_in(rng, &[out_features, in_features], in_features),
            )
            .unwrap();
        let b = ps
            .register(&format!("{name}.b"), init::uniform_fan_in(rng, &[out_features], in_features))
            .unwrap();
        Self { w, b, in_features, out_features }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
    ) -> Result<NodeId, NnError> {
        let w = g.param(ps, self.w);
        let b = g.param(ps, self.b);
        g.linear(x, w, Some(b))
    }
}

/// Parameters for one GRU direction.
pub struct GruLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub spec: GruSpec,
}

impl GruLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        input: usize,
        hidden: usize,
        reverse: bool,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = ps
            .register(&format!("{name}.w_ih"), init::uniform(rng, &[3 * hidden, input], bound))
            .unwrap();
        let w_hh = ps
            .register(&format!("{name}.w_hh"), init::uniform(rng, &[3 * hidden, hidden], bound))
            .unwrap();
        let b_ih =
            ps.register(&format!("{name}.b_ih"), init::uniform(rng, &[3 * hidden], bound)).unwrap();
        let b_hh =
            ps.register(&format!("{name}.b_hh"), init::uniform(rng, &[3 * hidden], bound)).unwrap();
        Self { w_ih, w_hh, b_ih, b_hh, spec: GruSpec { input, hidden, reverse } }
    }

    /// Runs the layer over `x: [B, S, I]`.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
        h0: Option<NodeId>,
    ) -> Result<NodeId, NnError> {
        let w_ih = g.param(ps, self.w_ih);
        let w_hh = g.param(ps, self.w_hh);
        let b_ih = g.param(ps, self.b_ih);
        let b_hh = g.param(ps, self.b_hh);
        g.gru_seq(x, w_ih, w_hh, b_ih, b_hh, h0, self.spec)
    }
}

/// Encoder unit: convolution, batch norm, PReLU.
pub struct ConvBlock {
    pub conv: Conv2dLayer,
    pub bn: BnLayer,
    pub act: PreluLayer,
}

impl ConvBlock {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        spec: Conv2dSpec,
    ) -> Self {
        let conv = Conv2dLayer::new(ps, rng, &format!("{name}.conv"), spec);
        let bn = BnLayer::new(ps, &format!("{name}.bn"), spec.out_ch);
        let act = PreluLayer::new(ps, &format!("{name}.act"), spec.out_ch, 0);
        Self { conv, bn, act }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<BnUpdate>,
    ) -> Result<NodeId, NnError> {
        let y = self.conv.forward(g, ps, x)?;
        let y = self.bn.forward(g, ps, y, mode, updates)?;
        self.act.forward(g, ps, y)
    }
}

/// Decoder unit: transposed convolution, batch norm, PReLU.
pub struct DeconvBlock {
    pub deconv: Deconv2dLayer,
    pub bn: BnLayer,
    pub act: PreluLayer,
}

impl DeconvBlock {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        rng: &mut ChaCha12Rng,
        name: &str,
        spec: Deconv2dSpec,
    ) -> Self {
        let deconv = Deconv2dLayer::new(ps, rng, &format!("{name}.deconv"), spec);
        let bn = BnLayer::new(ps, &format!("{name}.bn"), spec.out_ch);
        let act = PreluLayer::new(ps, &format!("{name}.act"), spec.out_ch, 0);
        Self { deconv, bn, act }
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        ps: &ParamStore<R>,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<BnUpdate>,
    ) -> Result<NodeId, NnError> {
        let y = self.deconv.forward(g, ps, x)?;
        let y = self.bn.forward(g, ps, y, mode, updates)?;
        self.act.forward(g, ps, y)
    }
}
