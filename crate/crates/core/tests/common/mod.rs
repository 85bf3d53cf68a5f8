#![allow(dead_code)]

use std::collections::BTreeSet;

use kpa_core::corpus::{PairedSample, Patch, PatchGrid, Report, TokenSeq};
use kpa_core::raster::GrayImage;
use kpa_core::Embeddings;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

pub fn token_seq(id: &str, rows: Vec<Vec<f32>>) -> TokenSeq {
    let words = (0..rows.len()).map(|i| format!("w{i}")).collect();
    TokenSeq::new(id, words, Embeddings::from_rows(&rows).unwrap()).unwrap()
}

/// Grid shape with at most `max_cells` cells.
pub fn random_shape(rng: &mut ChaCha8Rng, max_cells: usize) -> (usize, usize) {
    let rows = rng.random_range(1..=max_cells.min(4));
    let cols = rng.random_range(1..=max_cells / rows);
    (rows, cols)
}

pub fn random_grid(rng: &mut ChaCha8Rng, id: &str, shape: (usize, usize), dim: usize) -> PatchGrid {
    let patches = (0..shape.0 * shape.1)
        .map(|k| Patch::new((k / shape.1, k % shape.1), gaussian_vec(rng, dim), None).unwrap())
        .collect();
    PatchGrid::new(id, patches, shape).unwrap()
}

/// Random paired corpus with Gaussian token and patch embeddings.
pub fn random_corpus(rng: &mut ChaCha8Rng, pairs: usize, max_tokens: usize, max_patches: usize, dim: usize) -> Vec<PairedSample> {
    (0..pairs)
        .map(|i| {
            let id = format!("r{i:03}");
            let t = rng.random_range(1..=max_tokens);
            let rows: Vec<Vec<f32>> = (0..t).map(|_| gaussian_vec(rng, dim)).collect();
            let seq = token_seq(&id, rows);
            let shape = random_shape(rng, max_patches);
            let grid = random_grid(rng, &id, shape, dim);
            let report = Report::new(id.clone(), "findings", "").unwrap();
            PairedSample::new(report, seq, grid).unwrap()
        })
        .collect()
}

pub fn naive_cosine(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// `(image id, grid index)` of a patch.
pub type PatchId = (String, (usize, usize));

type Ranked<'a> = (f64, &'a PairedSample, Vec<(f64, usize)>);

/// Exhaustive codebook: every token's best patch, pairs ranked by the mean of
/// those maxima, then the `kappa2` best-scoring distinct argmax patches per pair.
pub fn oracle_codebook(corpus: &[PairedSample], kappa1: usize, kappa2: usize) -> Vec<(PatchId, Vec<f32>)> {
    let mut ranked: Vec<Ranked> = corpus
        .iter()
        .map(|s| {
            let maxima: Vec<(f64, usize)> = (0..s.token_seq.len())
                .map(|t| {
                    let mut best = (f64::NEG_INFINITY, 0);
                    for (p, patch) in s.patch_grid.patches().iter().enumerate() {
                        let c = naive_cosine(s.token_seq.embedding(t), &patch.embedding);
                        if c > best.0 {
                            best = (c, p);
                        }
                    }
                    best
                })
                .collect();
            let mean = maxima.iter().map(|m| m.0).sum::<f64>() / maxima.len() as f64;
            (mean, s, maxima)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.id().cmp(b.1.id())));
    let mut out = Vec::new();
    for (_, s, maxima) in ranked.into_iter().take(kappa1) {
        let n = s.patch_grid.len();
        let mut best_per_patch = vec![f64::NEG_INFINITY; n];
        for &(score, p) in &maxima {
            best_per_patch[p] = best_per_patch[p].max(score);
        }
        let mut candidates: Vec<usize> = (0..n).filter(|&p| best_per_patch[p].is_finite()).collect();
        candidates.sort_by(|&a, &b| best_per_patch[b].partial_cmp(&best_per_patch[a]).unwrap());
        for p in candidates.into_iter().take(kappa2) {
            let patch = &s.patch_grid.patches()[p];
            out.push(((s.patch_grid.image_id.clone(), patch.index), patch.embedding.clone()));
        }
    }
    out
}

/// Exhaustive top-`kappa3` keypatches for every query token.
pub fn oracle_retrieval(keypatches: &[(PatchId, Vec<f32>)], query: &TokenSeq, kappa3: usize) -> Vec<BTreeSet<PatchId>> {
    (0..query.len())
        .map(|t| {
            let mut scored: Vec<(f64, &PatchId)> =
                keypatches.iter().map(|(id, e)| (naive_cosine(query.embedding(t), e), id)).collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            scored.into_iter().take(kappa3).map(|(_, id)| id.clone()).collect()
        })
        .collect()
}

pub fn add_noise(image: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    GrayImage::from_fn(image.width(), image.height(), |x, y| image.get(x, y) + n.sample(&mut r))
}
