use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SynthError;
use crate::corpus::emb1;
use crate::matrix::Embeddings;

/// Maps report tokens into the alignment embedding space.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, tokens: &[String]) -> Result<Embeddings, SynthError>;
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Gives every word a fixed pseudo-random Gaussian vector derived from its
/// bytes; stable across runs and platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedTextEncoder {
    pub dim: usize,
}

impl HashedTextEncoder {
    pub fn vector(&self, word: &str) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(word));
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl TextEncoder for HashedTextEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[String]) -> Result<Embeddings, SynthError> {
        let mut m = Embeddings::empty(self.dim);
        for t in tokens {
            m.push_row(&self.vector(t));
        }
        Ok(m)
    }
}

/// Looks words up in a table; unknown words fall back to [`HashedTextEncoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableTextEncoder {
    table: HashMap<String, Vec<f32>>,
    fallback: HashedTextEncoder,
}

impl TableTextEncoder {
    pub fn new(words: &[String], vectors: &Embeddings) -> Self {
        let table = words.iter().cloned().zip(vectors.iter_rows().map(<[f32]>::to_vec)).collect();
        Self { table, fallback: HashedTextEncoder { dim: vectors.dim() } }
    }

    /// Reads an EMB1 file whose ids are the words.
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let (ids, m) = emb1::read_embeddings(path)?;
        Ok(Self::new(&ids, &m))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.table.contains_key(word)
    }
}

impl TextEncoder for TableTextEncoder {
    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn encode(&self, tokens: &[String]) -> Result<Embeddings, SynthError> {
        let mut m = Embeddings::empty(self.dim());
        for t in tokens {
            match self.table.get(t) {
                Some(v) => m.push_row(v),
                None => m.push_row(&self.fallback.vector(t)),
            }
        }
        Ok(m)
    }
}
