//! Adam optimizer with bias correction.

use super::param::{ParamId, ParamStore};

pub const BETA1: f32 = 0.9;
pub const BETA2: f32 = 0.999;
pub const EPSILON: f32 = 1e-8;

/// Per-parameter first/second moment buffers plus the shared step counter.
/// Buffers are aligned with the full [`ParamStore`]; a state instance is
/// stepped with the ids of its optimizer group only.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let m = store.iter().map(|p| vec![0.0; p.numel()]).collect();
        let v = store.iter().map(|p| vec![0.0; p.numel()]).collect();
        AdamState { m, v, t: 0 }
    }
}

/// One Adam step over `ids` at the given learning rate. Gradients of the
/// stepped tensors are zeroed afterwards.
pub fn adam_step(store: &mut ParamStore, ids: &[ParamId], state: &mut AdamState, lr: f32) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for &id in ids {
        let p = store.get_mut(id);
        debug_assert!(p.trainable, "adam_step over non-trainable tensor {}", p.name);
        let m = &mut state.m[id];
        let v = &mut state.v[id];
        for i in 0..p.values.len() {
            let g = p.grad[i];
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p.values[i] -= lr * mhat / (vhat.sqrt() + EPSILON);
        }
        p.zero_grad();
    }
}
