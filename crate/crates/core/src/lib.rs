//! Representation-based multi-field text ranking.
//!
//! Queries ("source" fields) and documents ("target" fields) are encoded
//! into fixed-size embeddings independently, interaction features are
//! computed between the final embeddings only, and a small MLP combines
//! them with hand-crafted traditional features into one score per document.
//! That separation is what makes the two serving strategies possible:
//! document embeddings can be pre-computed into a key-value store, and a
//! cheap traditional-feature ranker can bound deep-model work via two-pass
//! ranking.
//!
//! Crate layout:
//! - [`data`] — corpus types, word/subword tokenization, JSONL datasets,
//!   synthetic clickthrough generation
//! - [`nn`] — parameter tensors, reverse-mode tape, Adam, gradient checking
//! - [`encoders`] — per-field CNN and compact BERT-style transformer, plus
//!   masked-language-model pretraining pieces
//! - [`interaction`], [`features`], [`scoring`] — deep features, traditional
//!   feature processing, and the scoring head
//! - [`ltr`] — pointwise / pairwise / listwise losses and LambdaRank weights
//! - [`trainer`] — minibatch training with dual learning rates, checkpoints
//! - [`metrics`] — NDCG@K, MRR@K, AUC
//! - [`serving`] — embedding store, two-pass ranking, latency harness

pub mod data;
pub mod encoders;
pub mod features;
pub mod interaction;
pub mod ltr;
pub mod metrics;
pub mod nn;
pub mod scoring;
pub mod serving;
pub mod trainer;
