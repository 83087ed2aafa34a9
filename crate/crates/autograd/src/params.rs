use std::collections::BTreeMap;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Frozen parameters are skipped by optimizers and gradient checks.
    pub trainable: bool,
}

/// Named trainable tensors, each with a gradient slot of the same shape.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        self.insert_with(name, value, true)
    }

    pub fn insert_frozen(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        self.insert_with(name, value, false)
    }

    fn insert_with(
        &mut self,
        name: impl Into<String>,
        value: Tensor,
        trainable: bool,
    ) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(TensorError::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            value,
            grad,
            trainable,
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.by_name.get(name).map(|id| &self.params[id.0])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Adds `scale * grads` into the gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients, scale: f64) {
        for (i, g) in grads.slots.iter().enumerate() {
            if let Some(g) = g {
                self.params[i].grad.add_scaled(g, scale);
            }
        }
    }
}

/// Gradients produced by one backward pass, indexed by parameter.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub(crate) slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            slots: vec![None; n],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots.get(id.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn add(&mut self, id: ParamId, g: &Tensor) {
        match &mut self.slots[id.0] {
            Some(acc) => acc.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
    }
}
