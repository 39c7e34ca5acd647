//! Bridges a model's [`ParamStore`] onto a tape as leaf nodes.

use super::param::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use super::tensor::{Mat, Scalar};

/// Leaf node per parameter, aligned with [`ParamId`] order.
pub struct Binding {
    nodes: Vec<NodeId>,
}

impl Binding {
    /// Copy every parameter's current values onto the tape.
    pub fn bind<T: Scalar>(store: &ParamStore, tape: &mut Tape<T>) -> Self {
        let nodes = store
            .iter()
            .map(|p| {
                let data: Vec<T> = p.values.iter().map(|&v| T::from_f32(v)).collect();
                tape.leaf(Mat::from_vec(p.rows, p.cols, data))
            })
            .collect();
        Binding { nodes }
    }

    /// Bind explicit f64 values (one vec per parameter, aligned with ids).
    /// Used by the finite-difference checker to perturb coordinates without
    /// touching the f32 master copy.
    pub fn bind_values(store: &ParamStore, values: &[Vec<f64>], tape: &mut Tape<f64>) -> Self {
        assert_eq!(values.len(), store.len());
        let nodes = store
            .ids()
            .map(|id| {
                let p = store.get(id);
                assert_eq!(values[id].len(), p.numel());
                tape.leaf(Mat::from_vec(p.rows, p.cols, values[id].clone()))
            })
            .collect();
        Binding { nodes }
    }

    pub fn node(&self, id: ParamId) -> NodeId {
        self.nodes[id]
    }

    /// Add the tape's leaf gradients into the store's f32 accumulators.
    pub fn accumulate_into<T: Scalar>(&self, tape: &Tape<T>, store: &mut ParamStore) {
        for (id, &node) in self.nodes.iter().enumerate() {
            let t = store.get_mut(id);
            if !t.trainable {
                continue;
            }
            let g = tape.grad(node);
            for (dst, src) in t.grad.iter_mut().zip(g.data.iter()) {
                *dst += src.to_f32();
            }
        }
    }
}
