//! Fine-grained word-patch alignment.
//!
//! Report tokens and image patches live in a shared embedding space. A
//! report's similarity to an image is the mean, over its tokens, of each
//! token's best patch cosine. The visual codebook keeps the best-matched
//! patches of the most text-aligned pairs; retrieval ranks codebook entries
//! against the tokens of a new report.

mod codebook;
mod io;
mod kernel;
mod retrieval;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;

pub use codebook::{build_codebook, Keypatch, Provenance, VisualCodebook};
pub use io::{read_codebook, write_codebook, CodebookHeader};
pub use kernel::{cosine_sim, norm, report_to_cxr_sim, word_patch_max, TokenMax};
pub use retrieval::{compute_sw, extract_keypatches, RetrievalResult, Selection, SimilarityMatrix, TokenSelections};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("{context}: dimension {got}, expected {expected}")]
    DimMismatch { context: String, expected: usize, got: usize },
    #[error("no patches to match against")]
    EmptyPatches,
    #[error("no tokens")]
    EmptyTokens,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty similarity matrix")]
    EmptyMatrix,
    #[error("sample `{sample}`: {source}")]
    Sample {
        sample: String,
        #[source]
        source: Box<AlignError>,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// κ1 pairs kept, κ2 patches per pair, κ3 keypatches per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignParams {
    pub kappa1: usize,
    pub kappa2: usize,
    pub kappa3: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self { kappa1: 64, kappa2: 16, kappa3: 4 }
    }
}

impl AlignParams {
    pub fn new(kappa1: usize, kappa2: usize, kappa3: usize) -> Result<Self, AlignError> {
        let p = Self { kappa1, kappa2, kappa3 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.kappa1 == 0 || self.kappa2 == 0 || self.kappa3 == 0 {
            return Err(AlignError::InvalidParams(format!("all κ must be ≥ 1, got {self:?}")));
        }
        Ok(())
    }
}
