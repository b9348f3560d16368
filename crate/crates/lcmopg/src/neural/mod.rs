//! Minimal neural substrate: dense networks over a flat parameter buffer,
//! hand-derived backprop, Adam, cosine feature embeddings, and the Beta /
//! categorical policy heads.
//!
//! Networks here are small and fixed-shape, so parameters live in a single
//! `Vec<f64>` per network. That makes the optimizer, checkpointing,
//! gradient accumulation, and finite-difference testing all operate on one
//! flat buffer.

mod adam;
mod embed;
mod heads;
mod mlp;

pub use adam::Adam;
pub use embed::{cosine_embed, embedded_dim};
pub use heads::{
    argmax_lowest, beta_log_prob, beta_log_prob_grad, beta_mean, beta_params_from_raw,
    categorical_log_prob, categorical_log_prob_grad, log_softmax, sample_beta,
    sample_categorical, softplus, BETA_ACTION_CLAMP,
};
pub use mlp::{init_params, Activation, MlpCache, MlpSpec, INIT_STD, SELU_ALPHA, SELU_LAMBDA};
