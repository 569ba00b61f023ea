//! RMSprop with a per-parameter running mean square of gradients.

use crate::params::{ParamGrads, ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;

pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-8;

/// `v <- rho*v + (1-rho)*g^2; p <- p - lr*g/(sqrt(v) + eps)`
#[derive(Debug, Clone)]
pub struct Rmsprop<R: Real> {
    learning_rate: f64,
    rho: f64,
    eps: f64,
    v: Vec<Option<Tensor<R>>>,
}

impl<R: Real> Rmsprop<R> {
    pub fn new(learning_rate: f64) -> Self {
        Self::with_config(learning_rate, DEFAULT_RHO, DEFAULT_EPS)
    }

    pub fn with_config(learning_rate: f64, rho: f64, eps: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        Self { learning_rate, rho, eps, v: Vec::new() }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    /// Applies one update to every trainable parameter that has a gradient.
    pub fn step(&mut self, store: &mut ParamStore<R>, grads: &ParamGrads<R>) {
        if self.v.len() < store.len() {
            self.v.resize_with(store.len(), || None);
        }
        let rho = R::from_f64(self.rho);
        let one_minus_rho = R::from_f64(1.0 - self.rho);
        let lr = R::from_f64(self.learning_rate);
        let eps = R::from_f64(self.eps);
        for i in 0..store.len() {
            let id = ParamId(i);
            if !store.get(id).trainable {
                continue;
            }
            let Some(g) = grads.get(id) else { continue };
            let v = self.v[i]
                .get_or_insert_with(|| Tensor::zeros(store.value(id).shape()));
            let p = store.value_mut(id);
            for ((pv, vv), gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                *vv = rho * *vv + one_minus_rho * *gv * *gv;
                *pv -= lr * *gv / (vv.sqrt() + eps);
            }
        }
    }

    /// Accumulator tensors present so far, for checkpointing.
    pub fn state(&self) -> impl Iterator<Item = (ParamId, &Tensor<R>)> {
        self.v
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|t| (ParamId(i), t)))
    }

    /// Restores accumulator state saved by [`Rmsprop::state`].
    pub fn restore(&mut self, n_params: usize, entries: Vec<(ParamId, Tensor<R>)>) {
        self.v = (0..n_params).map(|_| None).collect();
        for (id, t) in entries {
            self.v[id.0] = Some(t);
        }
    }
}
