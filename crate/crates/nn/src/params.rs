use std::collections::HashMap;

use crate::error::NnError;
use crate::real::Real;
use crate::tensor::Tensor;

/// Handle to a named tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param<R: Real> {
    pub name: String,
    pub value: Tensor<R>,
    /// Trainable parameters receive gradients and optimizer updates;
    /// buffers (batch-norm running statistics) do not.
    pub trainable: bool,
}

/// Registry of named parameter tensors for one model. Registration order is
/// stable and defines checkpoint layout and gradient indexing.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<R: Real> {
    params: Vec<Param<R>>,
    by_name: HashMap<String, usize>,
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        Self { params: Vec::new(), by_name: HashMap::new() }
    }

    pub fn register(&mut self, name: &str, value: Tensor<R>) -> Result<ParamId, NnError> {
        self.register_with(name, value, true)
    }

    pub fn register_buffer(&mut self, name: &str, value: Tensor<R>) -> Result<ParamId, NnError> {
        self.register_with(name, value, false)
    }

    fn register_with(
        &mut self,
        name: &str,
        value: Tensor<R>,
        trainable: bool,
    ) -> Result<ParamId, NnError> {
        if self.by_name.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.to_string(), id.0);
        self.params.push(Param { name: name.to_string(), value, trainable });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param<R> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<R> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<R> {
        &mut self.params[id.0].value
    }

    pub fn lookup(&self, name: &str) -> Result<ParamId, NnError> {
        self.by_name
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<R>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Marks every parameter whose name starts with `prefix` as frozen.
    pub fn freeze_prefix(&mut self, prefix: &str) {
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.trainable = false;
            }
        }
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Copies the trainable flags from a same-shaped store. Used to undo a
    /// training-session freeze before persisting (frozen-ness is session
    /// state, not a property of the tensor).
    pub fn copy_trainability_from(&mut self, other: &ParamStore<R>) {
        debug_assert_eq!(self.params.len(), other.params.len());
        for (p, o) in self.params.iter_mut().zip(&other.params) {
            debug_assert_eq!(p.name, o.name);
            p.trainable = o.trainable;
        }
    }

    /// Total scalar count over trainable parameters (buffers excluded).
    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.numel()).sum()
    }
}

/// Per-parameter gradients produced by one backward pass, indexed by
/// [`ParamId`]. Parameters that did not participate read as `None`.
#[derive(Debug)]
pub struct ParamGrads<R: Real> {
    pub grads: Vec<Option<Tensor<R>>>,
}

impl<R: Real> ParamGrads<R> {
    pub fn get(&self, id: ParamId) -> Option<&Tensor<R>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient tensor for `id`, materializing zeros for detached parameters.
    pub fn get_or_zeros(&self, id: ParamId, shape: &[usize]) -> Tensor<R> {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape),
        }
    }

    /// Accumulates `other` into `self` elementwise (used to sum gradients
    /// over batch items in a fixed order).
    pub fn accumulate(&mut self, other: &ParamGrads<R>) {
        if self.grads.len() < other.grads.len() {
            self.grads.resize_with(other.grads.len(), || None);
        }
        for (slot, g) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(g) = g {
                match slot {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += *b;
                        }
                    }
                    None => *slot = Some(g.clone()),
                }
            }
        }
    }

    /// Scales every gradient by `factor` (batch averaging).
    pub fn scale(&mut self, factor: R) {
        for g in self.grads.iter_mut().flatten() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
}
