//! Keypatch-guided synthesis: quantize retrieved keypatches into image
//! tokens, hand them to an image-token model with the report, and decode the
//! predicted token grid into pixels.

mod client;
mod encoder;
mod pipeline;
mod request;
mod vq;

use std::fmt;

use thiserror::Error;

use crate::align::AlignError;
use crate::corpus::CorpusError;

pub use client::{predict_tokens, HttpImageClient, ImageTokenClient, Prediction, StubImageClient};
pub use encoder::{HashedTextEncoder, TableTextEncoder, TextEncoder};
pub use pipeline::{synthesize, ContextEntry, SynthParams, Synthesis, SynthesisProvenance};
pub use request::{assemble_request, SynthesisRequest, DEFAULT_TEMPLATE, TEMPLATES};
pub use vq::{
    block_feature, decode_tokens, encode_keypatches, quantize, read_vq, requantize, write_vq, Projection, TokenImage,
    VqCodebook,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Embed,
    Align,
    Retrieve,
    Encode,
    Assemble,
    Predict,
    Decode,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Embed => "embed",
            Stage::Align => "align",
            Stage::Retrieve => "retrieve",
            Stage::Encode => "encode",
            Stage::Assemble => "assemble",
            Stage::Predict => "predict",
            Stage::Decode => "decode",
        })
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{context}: dimension {got}, expected {expected}")]
    DimMismatch { context: String, expected: usize, got: usize },
    #[error("token index {index} out of range for {vocab} codes")]
    InvalidIndex { index: i64, vocab: usize },
    #[error("invalid VQ codebook: {0}")]
    InvalidVq(String),
    #[error("no keypatches to encode")]
    EmptyRetrieval,
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("empty report")]
    EmptyReport,
    #[error("protocol error: {message}; raw payload: {raw}")]
    Protocol { message: String, raw: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<SynthError>,
    },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl SynthError {
    pub fn stage(self, stage: Stage) -> Self {
        Self::Stage { stage, source: Box::new(self) }
    }

    /// Stage tag of a pipeline error, if it carries one.
    pub fn failed_stage(&self) -> Option<Stage> {
        match self {
            Self::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}
