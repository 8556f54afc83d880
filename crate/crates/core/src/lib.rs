//! Phoneme-distribution language similarity for low-resource ASR.
//!
//! Languages are compared by the cosine of their unigram phoneme
//! distributions, projected to 2D with PCA, grouped into family density
//! contours, and ranked as candidate sources for multilingual training.

pub mod contour;
pub mod corpus;
pub mod error;
pub mod export;
pub mod g2p;
pub mod ipa;
pub mod kde;
mod linalg;
pub mod per;
pub mod pipeline;
pub mod projection;
pub mod registry;
pub mod selection;
pub mod stats;
pub mod typology;

pub use error::{Error, Result};
pub use g2p::{Ruleset, UnmatchedMode};
pub use ipa::{tokenize_ipa, NormalizationPolicy, Phoneme, PhonemeSequence};
pub use registry::{LanguageRecord, Registry};
pub use stats::{cosine_similarity, similarity_matrix, PhonemeDistribution, SimilarityMatrix};
