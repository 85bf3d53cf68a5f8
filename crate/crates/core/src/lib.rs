//! Anatomy/pathology vocabulary mining, prompt generation, fine-grained
//! word-patch alignment with a visual codebook, keypatch-guided token
//! synthesis and image-quality metrics.

pub mod align;
pub mod corpus;
pub mod fixtures;
mod http;
pub mod matrix;
pub mod metrics;
pub mod prompt;
pub mod raster;
pub mod synth;
pub mod vocab;

pub use align::{AlignParams, Keypatch, RetrievalResult, SimilarityMatrix, VisualCodebook};
pub use corpus::{PairedSample, Patch, PatchGrid, Report, TokenSeq};
pub use matrix::Embeddings;
pub use metrics::{GaussianStats, NiqeConfig, NiqeModel};
pub use prompt::{GeneratedPrompt, PromptSpec};
pub use raster::GrayImage;
pub use synth::{TokenImage, VqCodebook};
pub use vocab::{FrequencyTable, Lexicon, Vocabularies};
