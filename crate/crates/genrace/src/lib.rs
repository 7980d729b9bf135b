//! Race quantum and classical generative models on a constrained
//! bitstring task and score them with quality- and validity-based
//! generalization metrics.
//!
//! The task is fixed up front: learn the even-parity ("Evens") distribution
//! over `n_var`-bit strings from a small reweighted training set, then
//! generate unseen valid strings whose negative separation cost beats the
//! best cost seen in training. Five runners compete behind one
//! [`neural::GenerativeModel`] contract:
//!
//! - a quantum circuit Born machine ([`qsim`]) trained gradient-free with
//!   CMA-ES ([`optim`]),
//! - a GRU sequence model, a single-head causal Transformer, a Bernoulli
//!   VAE, and a WGAN with gradient penalty ([`neural`]), trained with the
//!   in-crate reverse-mode autodiff ([`autodiff`]).
//!
//! Scoring happens under two resource budgets ([`metrics`]): track T1 fixes
//! the number of queries, track T2 fixes the number of unique unseen valid
//! samples. The [`harness`] runs the full race across models, seeds and
//! dataset sizes, aggregates per-epoch statistics, and exports plot-ready
//! tables. Brute-force reference implementations live in [`oracle`] and
//! never share code with what they check.
//!
//! See the crate examples for one runnable entry point per capability, and
//! the `race` binary for the command-line interface.

pub mod autodiff;
pub mod bitspace;
pub mod harness;
pub mod metrics;
pub mod neural;
pub mod optim;
pub mod oracle;
pub mod qsim;

pub use bitspace::{Bitstring, SolutionSpace, TrainingSet};
pub use metrics::{MetricsReport, Track};
pub use neural::GenerativeModel;
