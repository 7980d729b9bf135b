//! The classical runners and the shared generative-model contract.
//!
//! All five competitors (QCBM, GRU RNN, Transformer, VAE, WGAN) sit behind
//! [`GenerativeModel`]: one train-step / sample interface with an optional
//! exact log-probability capability. Samples are length-`n_var` bitstrings;
//! validity is measured by the metrics, never enforced by the models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::bitspace::{Bitstring, TrainingSet};
use crate::metrics::QueryBatch;
use crate::optim::OptimError;

mod rnn;
mod transformer;
mod vae;
mod wgan;

pub use rnn::{RnnConfig, RnnModel};
pub use transformer::{TransformerConfig, TransformerModel};
pub use vae::{VaeConfig, VaeModel};
pub use wgan::{WganConfig, WganModel};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{model}: loss is not finite at step {step}")]
    NanLoss { model: &'static str, step: u64 },
    #[error("{model}: n_var {model_n} does not match training set n_var {train_n}")]
    DimensionMismatch {
        model: &'static str,
        model_n: usize,
        train_n: usize,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Uniform contract over all five runners.
///
/// `sample(n, seed)` must be reproducible: the same seed yields the same
/// batch. Models that can enumerate their own distribution expose
/// `exact_log_prob`; its probabilities over all `2^n_var` strings sum to one.
pub trait GenerativeModel: Send {
    /// Identity tag, e.g. `"qcbm"` or `"rnn"`.
    fn tag(&self) -> &'static str;

    fn n_var(&self) -> usize;

    /// Number of trainable parameters.
    fn parameter_count(&self) -> usize;

    /// Hyperparameters under their reporting names, for run records.
    fn hyperparameters(&self) -> Vec<(String, String)>;

    /// Runs one training step and returns the step's loss.
    fn train_step(&mut self, train: &TrainingSet) -> Result<f64, TrainError>;

    /// Draws `n` samples using the caller's RNG stream.
    fn sample_batch(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Bitstring>;

    /// Seed-reproducible batch of `n` samples.
    fn sample(&self, n: usize, seed: u64) -> QueryBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QueryBatch {
            queries: self.sample_batch(n, &mut rng),
            model: self.tag().to_string(),
            epoch: 0,
        }
    }

    /// Natural-log probability of one string, when tractable.
    fn exact_log_prob(&self, x: &Bitstring) -> Option<f64> {
        let _ = x;
        None
    }

    fn has_exact_log_prob(&self) -> bool {
        false
    }
}
