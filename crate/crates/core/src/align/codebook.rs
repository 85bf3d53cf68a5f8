use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{mean_of_max, norm, word_patch_max};
use super::{AlignError, AlignParams};
use crate::corpus::{PairedSample, Patch};

/// Why a patch entered the codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Rank of the source pair by report-to-image similarity, 0 = best.
    pub pair_rank: usize,
    pub source_report_id: String,
    /// The token whose maximum similarity selected this patch.
    pub token: String,
    pub token_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypatch {
    /// Stored with a unit-norm embedding.
    pub patch: Patch,
    pub source_image_id: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualCodebook {
    pub keypatches: Vec<Keypatch>,
    pub params: AlignParams,
    pub dim: usize,
}

impl VisualCodebook {
    pub fn len(&self) -> usize {
        self.keypatches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypatches.is_empty()
    }

    pub fn embedding(&self, i: usize) -> &[f32] {
        &self.keypatches[i].patch.embedding
    }

    pub fn patch_px(&self) -> Option<usize> {
        let n = self.keypatches.first()?.patch.pixels.as_ref()?.len();
        let side = (n as f64).sqrt().round() as usize;
        (side * side == n && self.keypatches.iter().all(|k| k.patch.pixels.as_ref().is_some_and(|p| p.len() == n)))
            .then_some(side)
    }
}

struct ScoredPair {
    sample: usize,
    similarity: f64,
    maxima: Vec<super::TokenMax>,
}

fn unit(v: &[f32]) -> Vec<f32> {
    let n = norm(v);
    v.iter().map(|&x| (f64::from(x) / n) as f32).collect()
}

/// Mines the visual codebook from a paired corpus.
///
/// Pairs are ranked by report-to-image similarity (ties: report id) and the
/// best `kappa1` kept. Within a kept pair every token contributes its best
/// patch as a `(score, token)` hit; hits are ranked by score (ties: token
/// order) and the first `kappa2` distinct patches are taken, each keeping the
/// provenance of its best hit.
pub fn build_codebook(corpus: &[PairedSample], params: AlignParams) -> Result<VisualCodebook, AlignError> {
    params.validate()?;
    let first = corpus.first().ok_or(AlignError::EmptyCorpus)?;
    let dim = first.token_seq.dim();

    let mut scored = corpus
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let tag = |e| AlignError::Sample { sample: s.id().to_owned(), source: Box::new(e) };
            for (what, got) in [("token", s.token_seq.dim()), ("patch", s.patch_grid.dim())] {
                if got != dim {
                    return Err(tag(AlignError::DimMismatch { context: format!("{what} embeddings"), expected: dim, got }));
                }
            }
            let maxima = word_patch_max(&s.token_seq, &s.patch_grid).map_err(tag)?;
            Ok(ScoredPair { sample: i, similarity: mean_of_max(&maxima), maxima })
        })
        .collect::<Result<Vec<_>, _>>()?;

    scored.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| corpus[a.sample].id().cmp(corpus[b.sample].id()))
    });
    if params.kappa1 > scored.len() {
        log::warn!("kappa1 = {} exceeds corpus size {}; keeping every pair", params.kappa1, scored.len());
    }
    scored.truncate(params.kappa1);

    let keypatches = scored
        .par_iter()
        .enumerate()
        .flat_map_iter(|(rank, pair)| select_pair_patches(&corpus[pair.sample], rank, &pair.maxima, params.kappa2))
        .collect();

    Ok(VisualCodebook { keypatches, params, dim })
}

fn select_pair_patches(sample: &PairedSample, pair_rank: usize, maxima: &[super::TokenMax], kappa2: usize) -> Vec<Keypatch> {
    let mut hits: Vec<(usize, &super::TokenMax)> = maxima.iter().enumerate().collect();
    hits.sort_by(|(ta, a), (tb, b)| b.score.total_cmp(&a.score).then(ta.cmp(tb)));

    let mut taken = HashSet::new();
    let mut chosen = Vec::with_capacity(kappa2);
    for (token_index, hit) in hits {
        if chosen.len() == kappa2 {
            break;
        }
        if taken.insert(hit.patch) {
            chosen.push((token_index, *hit));
        }
    }

    let grid = &sample.patch_grid;
    let cols = grid.grid_shape().1;
    let linear = |slot: usize| {
        let (r, c) = grid.patches()[slot].index;
        r * cols + c
    };
    chosen.sort_by(|(_, a), (_, b)| match b.score.total_cmp(&a.score) {
        Ordering::Equal => linear(a.patch).cmp(&linear(b.patch)),
        o => o,
    });

    chosen
        .into_iter()
        .map(|(token_index, hit)| {
            let src = &grid.patches()[hit.patch];
            Keypatch {
                patch: Patch { index: src.index, embedding: unit(&src.embedding), pixels: src.pixels.clone() },
                source_image_id: grid.image_id.clone(),
                provenance: Provenance {
                    pair_rank,
                    source_report_id: sample.id().to_owned(),
                    token: sample.token_seq.tokens()[token_index].clone(),
                    token_index,
                    score: hit.score,
                },
            }
        })
        .collect()
}
