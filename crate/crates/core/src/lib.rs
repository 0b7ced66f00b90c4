//! Metric-recovery embeddings from Markov co-occurrence counts.
//!
//! Tokens generated by a Markov process (a text corpus, a latent Gaussian or
//! topic walk, or a simple random walk on a spatial graph) co-occur at a rate
//! that decays exponentially with the squared latent distance between them.
//! This crate builds those counts, fits embeddings to them (negative-binomial
//! metric regression, GloVe-style and softmax objectives, PMI-SVD and
//! classical MDS), and checks the recovered geometry with semantic and
//! manifold evaluation tasks.
//!
//! Modules:
//! - [`cooccur`]: vocabularies and windowed co-occurrence counting.
//! - [`generators`]: synthetic Markov processes, spatial graphs and their exact oracles.
//! - [`optimizer`]: SGD fitting under the negative-binomial, GloVe and softmax losses.
//! - [`spectral`]: PMI, truncated/randomized SVD, classical MDS, Procrustes.
//! - [`evaluate`]: analogy/SAT/sequence/classification solvers, kNN purity,
//!   and the log-conditional vs squared-distance diagnostic.
//! - [`cli`]: pipeline orchestration behind the `markov-embed` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cooccur;
pub mod error;
pub mod evaluate;
pub mod generators;
pub mod optimizer;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
