//! Network embedding for attributed graphs with a multimodal deep autoencoder.
//!
//! The model compresses each node's adjacency vector and attribute vector
//! through per-modality pre-processing layers and a shared encoder, and is
//! trained to preserve three kinds of proximity at once: directly connected
//! nodes stay close (first order), nodes with similar neighborhoods stay
//! close (second order, via reconstruction of the adjacency vector), and
//! nodes with similar attributes stay close (via reconstruction of the
//! attribute vector). Layer-wise RBM pretraining provides the initial
//! weights; plain SGD fine-tunes them.
//!
//! Modules:
//! - [`tensor`]: dense matrix arithmetic and activations.
//! - [`graph`]: attributed-network loading, formats, and evaluation splits.
//! - [`model`]: the autoencoder itself — forward pass, losses, gradients.
//! - [`pretrain`]: RBM / deep-belief-network layer-wise pretraining.
//! - [`trainer`]: SGD fine-tuning loop and hyperparameter grid search.
//! - [`eval`]: reconstruction, link prediction, attribute prediction,
//!   classification.
//! - [`checkpoint`]: binary model persistence.

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod graph;
pub mod logreg;
pub mod model;
pub mod pretrain;
pub mod trainer;
pub mod tensor;

pub use error::{Error, Result};
