//! Interaction layer: source/target field embeddings into deep features.
//!
//! Interaction happens only between final field embeddings — never between
//! tokens — which is what allows document embeddings to be pre-computed.

use serde::{Deserialize, Serialize};

use crate::nn::{NodeId, Scalar, Tape};

/// Enabled interaction methods. At least one must be on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    pub cosine: bool,
    pub hadamard: bool,
    pub concat: bool,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        // cosine + hadamard is the best-performing pairing
        InteractionConfig { cosine: true, hadamard: true, concat: false }
    }
}

impl InteractionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.cosine || self.hadamard || self.concat) {
            return Err("at least one interaction method must be enabled".into());
        }
        Ok(())
    }

    /// Deep feature vector length for |S| sources, |T| targets, dimension d.
    pub fn feature_len(&self, num_source: usize, num_target: usize, dim: usize) -> usize {
        let per_pair = usize::from(self.cosine) + if self.hadamard { dim } else { 0 };
        let concat = if self.concat { (num_source + num_target) * dim } else { 0 };
        num_source * num_target * per_pair + concat
    }
}

/// uᵀv / (‖u‖·‖v‖); 0 when either norm is 0.
pub fn cosine_sim(u: &[f32], v: &[f32]) -> f32 {
    assert_eq!(u.len(), v.len(), "cosine dimension mismatch {} vs {}", u.len(), v.len());
    let dot: f32 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f32 = u.iter().map(|a| a * a).sum::<f32>().sqrt();
    let nv: f32 = v.iter().map(|a| a * a).sum::<f32>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// Elementwise product; d features per source/target pair.
pub fn hadamard(u: &[f32], v: &[f32]) -> Vec<f32> {
    assert_eq!(u.len(), v.len(), "hadamard dimension mismatch {} vs {}", u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b).collect()
}

/// Assemble the deep feature vector on the tape. Ordering is fixed: for each
/// (source i, target j) pair in nested loop order, the cosine scalar then the
/// hadamard vector (when enabled); then, when concat is on, each field
/// embedding once, sources before targets. Checkpoint compatibility depends
/// on this ordering staying put.
pub fn assemble_deep_features<T: Scalar>(
    tape: &mut Tape<T>,
    source_embs: &[NodeId],
    target_embs: &[NodeId],
    config: &InteractionConfig,
) -> NodeId {
    let dim = tape.shape(source_embs[0]).1;
    for &e in source_embs.iter().chain(target_embs) {
        assert_eq!(tape.shape(e), (1, dim), "field embedding dimension mismatch");
    }
    let mut parts = Vec::new();
    for &s in source_embs {
        for &t in target_embs {
            if config.cosine {
                parts.push(tape.cosine(s, t));
            }
            if config.hadamard {
                parts.push(tape.mul_elem(s, t));
            }
        }
    }
    if config.concat {
        parts.extend_from_slice(source_embs);
        parts.extend_from_slice(target_embs);
    }
    tape.concat_cols(&parts)
}
