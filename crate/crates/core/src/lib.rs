//! Individual-fairness audits for sentence-completion language models.
//!
//! A completion's bias is the projection of its profession word onto a
//! gender direction fitted from definitional word pairs. A generator is
//! fair on a prompt pair when its expected output biases for the two
//! prompts differ by no more than the distance between the prompts.
//!
//! The modules follow the pipeline:
//!
//! - [`embedding`]: word2vec text I/O, unit-normalized vectors
//! - [`subspace`]: PCA over pair-centered vectors; projection and rejection
//! - [`bias`]: per-word and per-completion bias scores, expectations
//! - [`debias`]: neutralize and equalize
//! - [`similarity`]: Jaccard, embedding-cosine and composite prompt distances
//! - [`corpus`]: completion JSONL and profession extraction
//! - [`audit`]: pair checks, total variation, group averages
//! - [`mock`]: seeded generator with known output distributions
//! - [`report`]: text and CSV renderings
//!
//! ```
//! use genfair::embedding::{CasePolicy, EmbeddingMatrix};
//! use genfair::subspace::{fit_subspace, DefinitionalPairSet};
//!
//! let m = EmbeddingMatrix::from_rows(
//!     vec![("he", vec![1.0, 0.0]), ("she", vec![0.0, 1.0])],
//!     CasePolicy::Lowercase,
//! )?;
//! let pairs = DefinitionalPairSet::new([("he", "she")])?;
//! let g = fit_subspace(&m, &pairs, 1)?;
//! assert!(g.basis[0][1] > 0.0);
//! # Ok::<(), genfair::Error>(())
//! ```

pub mod audit;
pub mod bias;
pub mod corpus;
pub mod debias;
pub mod embedding;
mod error;
pub mod fixtures;
pub mod linalg;
pub mod manifest;
pub mod mock;
pub mod report;
pub mod similarity;
pub mod subspace;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    pub mod embeddings {}
    #[doc = include_str!("../../../book/src/subspace.md")]
    pub mod subspace {}
    #[doc = include_str!("../../../book/src/bias.md")]
    pub mod bias {}
    #[doc = include_str!("../../../book/src/debiasing.md")]
    pub mod debiasing {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    pub mod similarity {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    pub mod corpus {}
    #[doc = include_str!("../../../book/src/fairness.md")]
    pub mod fairness {}
    #[doc = include_str!("../../../book/src/closed_loop.md")]
    pub mod closed_loop {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
