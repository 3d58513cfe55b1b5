//! Hidden Markov model and profile HMM toolkit for software birthmark
//! classification.
//!
//! - [`seq_data`]: trace files, alphabets, encoded observation sequences
//! - [`hmm`]: discrete HMMs with Baum-Welch training
//! - [`align`]: pairwise alignment with affine gaps
//! - [`msa`]: spanning-tree guided progressive multiple alignment
//! - [`phmm`]: profile HMMs estimated from an MSA, forward scoring
//! - [`eval`]: cross-validation, ROC curves and AUC

#![allow(clippy::needless_range_loop)]
pub mod align;
pub mod error;
pub mod eval;
pub mod hmm;
pub mod msa;
pub mod phmm;
pub mod rng;
pub mod seq_data;

pub use error::{Error, Result};
