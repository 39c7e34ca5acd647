//! One-dimensional CNN over word embeddings with max-pooling.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::PAD_ID;
use crate::nn::{init_embedding, init_glorot, Binding, NodeId, ParamGroup, ParamId, ParamStore, ParameterTensor, Scalar, Tape};

/// Convolution window over token positions. Multiple window sizes buy
/// nothing here, so it stays fixed.
pub const CNN_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnConfig {
    /// Word-embedding dimension.
    pub embed_dim: usize,
    /// Number of convolution filters; also the output embedding dimension.
    pub filters: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig { embed_dim: 32, filters: 64 }
    }
}

/// Per-field convolutional encoder: embedding table, one filter bank of
/// window size 3, filter biases. Output dimension = number of filters.
#[derive(Debug, Clone)]
pub struct CnnEncoder {
    pub config: CnnConfig,
    pub emb: ParamId,
    pub conv_w: ParamId,
    pub conv_b: ParamId,
}

impl CnnEncoder {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        vocab_size: usize,
        config: CnnConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut emb = ParameterTensor::new(
            format!("{prefix}.emb"),
            vocab_size,
            config.embed_dim,
            ParamGroup::Other,
        );
        init_embedding(&mut emb, rng);
        // PAD embeds to zero and receives no gradient, so it stays zero
        emb.values[..config.embed_dim].iter_mut().for_each(|v| *v = 0.0);

        let mut conv_w = ParameterTensor::new(
            format!("{prefix}.conv_w"),
            CNN_WINDOW * config.embed_dim,
            config.filters,
            ParamGroup::Other,
        );
        init_glorot(&mut conv_w, rng);
        let conv_b = ParameterTensor::new(
            format!("{prefix}.conv_b"),
            1,
            config.filters,
            ParamGroup::Other,
        );

        CnnEncoder {
            config,
            emb: store.add(emb),
            conv_w: store.add(conv_w),
            conv_b: store.add(conv_b),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.config.filters
    }

    /// relu(conv) at every window position, then max-pool across positions.
    /// Trailing PAD is filler and is trimmed first; sequences shorter than
    /// the window are PAD-padded back up to it, so an empty field encodes
    /// the all-PAD window.
    pub fn encode<T: Scalar>(&self, tape: &mut Tape<T>, binding: &Binding, ids: &[u32]) -> NodeId {
        let mut ids: Vec<u32> = ids.to_vec();
        while ids.last() == Some(&PAD_ID) {
            ids.pop();
        }
        while ids.len() < CNN_WINDOW {
            ids.push(PAD_ID);
        }
        let emb = tape.gather(binding.node(self.emb), &ids, Some(PAD_ID));
        let windows = tape.windows(emb, CNN_WINDOW);
        let conv = tape.matmul(windows, binding.node(self.conv_w));
        let conv = tape.add_row(conv, binding.node(self.conv_b));
        let act = tape.relu(conv);
        tape.col_max(act)
    }
}
