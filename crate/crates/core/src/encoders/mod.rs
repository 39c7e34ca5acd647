//! Text embedding layer: per-field CNN and a compact BERT-style transformer,
//! each producing one fixed-size embedding per text field.

mod cnn;
mod mlm;
mod transformer;

pub use cnn::{CnnConfig, CnnEncoder, CNN_WINDOW};
pub use mlm::{mask_tokens, mlm_loss, MaskOutcome};
pub use transformer::{TransformerConfig, TransformerEncoder, TransformerLayerParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("sequence of {got} tokens exceeds the configured maximum {max}")]
    SequenceTooLong { got: usize, max: usize },
    #[error("transformer input must start with the CLS token")]
    MissingCls,
    #[error("masked-language-model batch has no target positions")]
    EmptyTargets,
}

/// The d-dimensional embedding of one text field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEmbedding {
    pub field_name: String,
    pub vector: Vec<f32>,
}

impl FieldEmbedding {
    pub fn new(field_name: impl Into<String>, vector: Vec<f32>) -> Self {
        FieldEmbedding { field_name: field_name.into(), vector }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}
