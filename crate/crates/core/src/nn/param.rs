//! Named parameter tensors with gradient accumulators.

use rand::Rng;

/// Optimizer group a tensor belongs to. Transformer tensors train at the
/// small fine-tuning rate, everything else at the base rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Bert,
    Other,
}

/// A named, shaped f32 array plus an accumulated gradient buffer.
#[derive(Debug, Clone)]
pub struct ParameterTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
    pub grad: Vec<f32>,
    pub trainable: bool,
    pub group: ParamGroup,
}

impl ParameterTensor {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, group: ParamGroup) -> Self {
        let n = rows * cols;
        ParameterTensor {
            name: name.into(),
            rows,
            cols,
            values: vec![0.0; n],
            grad: vec![0.0; n],
            trainable: true,
            group,
        }
    }

    pub fn frozen(name: impl Into<String>, rows: usize, cols: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), rows * cols);
        let n = rows * cols;
        ParameterTensor {
            name: name.into(),
            rows,
            cols,
            values,
            grad: vec![0.0; n],
            trainable: false,
            group: ParamGroup::Other,
        }
    }

    pub fn numel(&self) -> usize {
        self.rows * self.cols
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Index of a tensor inside a [`ParamStore`].
pub type ParamId = usize;

/// Owning collection of a model's parameters; components hold [`ParamId`]s.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    tensors: Vec<ParameterTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: ParameterTensor) -> ParamId {
        assert!(
            !self.tensors.iter().any(|x| x.name == t.name),
            "duplicate parameter name {}",
            t.name
        );
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &ParameterTensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParameterTensor {
        &mut self.tensors[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&ParameterTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParameterTensor> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParameterTensor> {
        self.tensors.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        0..self.tensors.len()
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    /// Ids of trainable tensors in the given group.
    pub fn group_ids(&self, group: ParamGroup) -> Vec<ParamId> {
        self.ids()
            .filter(|&i| {
                let t = self.get(i);
                t.trainable && t.group == group
            })
            .collect()
    }
}

/// Uniform(-0.05, 0.05) init used for embedding tables.
pub fn init_embedding<R: Rng>(t: &mut ParameterTensor, rng: &mut R) {
    for v in t.values.iter_mut() {
        *v = rng.gen_range(-0.05f32..0.05f32);
    }
}

/// Glorot-style fan-based uniform init for dense weights.
pub fn init_glorot<R: Rng>(t: &mut ParameterTensor, rng: &mut R) {
    let limit = (6.0 / (t.rows + t.cols) as f32).sqrt();
    for v in t.values.iter_mut() {
        *v = rng.gen_range(-limit..limit);
    }
}
