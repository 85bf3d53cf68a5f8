use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::align::{RetrievalResult, VisualCodebook};
use crate::corpus::{emb1, sidecar_paths, CorpusError};
use crate::matrix::Embeddings;
use crate::raster::GrayImage;

/// Stand-in for a frozen VQ encoder/decoder: a table of code vectors.
///
/// Decoding renders code `k` as a `p × p` block whose pixels cycle through
/// the code vector in row-major order, so `p · p ≥ d_q` is required for a
/// block to carry the whole vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VqCodebook {
    codes: Embeddings,
    patch_px: usize,
}

impl VqCodebook {
    pub fn new(codes: Embeddings, patch_px: usize) -> Result<Self, SynthError> {
        if codes.rows() < 2 {
            return Err(SynthError::InvalidVq(format!("need at least 2 codes, got {}", codes.rows())));
        }
        if codes.dim() == 0 || !codes.all_finite() {
            return Err(SynthError::InvalidVq("codes must be non-empty and finite".into()));
        }
        if patch_px * patch_px < codes.dim() {
            return Err(SynthError::InvalidVq(format!(
                "a {patch_px}×{patch_px} block cannot hold a {}-dimensional code",
                codes.dim()
            )));
        }
        let mut sorted: Vec<&[f32]> = codes.iter_rows().collect();
        sorted.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(SynthError::InvalidVq("duplicate code vectors".into()));
        }
        Ok(Self { codes, patch_px })
    }

    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codes.dim()
    }

    pub fn patch_px(&self) -> usize {
        self.patch_px
    }

    pub fn code(&self, k: usize) -> &[f32] {
        self.codes.row(k)
    }

    pub fn codes(&self) -> &Embeddings {
        &self.codes
    }

    /// Smallest pairwise Euclidean distance between codes.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(sq_dist(self.code(i), self.code(j)).sqrt());
            }
        }
        best
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2)).sum()
}

/// Nearest code by Euclidean distance; ties go to the lower index.
pub fn quantize(embedding: &[f32], vq: &VqCodebook) -> Result<usize, SynthError> {
    if embedding.len() != vq.dim() {
        return Err(SynthError::DimMismatch { context: "quantize".into(), expected: vq.dim(), got: embedding.len() });
    }
    let mut best = (f64::INFINITY, 0);
    for k in 0..vq.len() {
        let d = sq_dist(embedding, vq.code(k));
        if d < best.0 {
            best = (d, k);
        }
    }
    Ok(best.1)
}

/// Optional linear map from alignment space to VQ space.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Projection {
    #[default]
    Identity,
    /// `d_q × d` matrix, row-major.
    Linear(Embeddings),
}

impl Projection {
    pub fn apply(&self, v: &[f32]) -> Result<Vec<f32>, SynthError> {
        match self {
            Projection::Identity => Ok(v.to_vec()),
            Projection::Linear(m) => {
                if m.dim() != v.len() {
                    return Err(SynthError::DimMismatch { context: "projection".into(), expected: m.dim(), got: v.len() });
                }
                Ok(m.iter_rows()
                    .map(|row| row.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum::<f64>() as f32)
                    .collect())
            }
        }
    }
}

/// Quantizes the flattened keypatches of a retrieval, in order.
pub fn encode_keypatches(
    result: &RetrievalResult,
    codebook: &VisualCodebook,
    vq: &VqCodebook,
    projection: &Projection,
) -> Result<Vec<usize>, SynthError> {
    if result.flattened.is_empty() {
        return Err(SynthError::EmptyRetrieval);
    }
    result
        .flattened
        .iter()
        .map(|&i| {
            let kp = codebook.keypatches.get(i).ok_or(SynthError::InvalidIndex { index: i as i64, vocab: codebook.len() })?;
            quantize(&projection.apply(&kp.patch.embedding)?, vq)
        })
        .collect()
}

/// A `rows × cols` grid of code indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenImage {
    pub rows: usize,
    pub cols: usize,
    pub grid: Vec<usize>,
}

impl TokenImage {
    pub fn new(rows: usize, cols: usize, grid: Vec<usize>) -> Option<Self> {
        (grid.len() == rows * cols).then_some(Self { rows, cols, grid })
    }

    pub fn get(&self, r: usize, c: usize) -> usize {
        self.grid[r * self.cols + c]
    }
}

pub fn decode_tokens(tokens: &TokenImage, vq: &VqCodebook) -> Result<GrayImage, SynthError> {
    if let Some(&bad) = tokens.grid.iter().find(|&&k| k >= vq.len()) {
        return Err(SynthError::InvalidIndex { index: bad as i64, vocab: vq.len() });
    }
    let p = vq.patch_px();
    let d = vq.dim();
    Ok(GrayImage::from_fn(tokens.cols * p, tokens.rows * p, |x, y| {
        let code = vq.code(tokens.get(y / p, x / p));
        let offset = (y % p) * p + x % p;
        f64::from(code[offset % d]).clamp(0.0, 1.0)
    }))
}

/// The first `d_q` pixels (row-major) of block `(r, c)`: the code vector as
/// the decoder laid it out.
pub fn block_feature(image: &GrayImage, r: usize, c: usize, vq: &VqCodebook) -> Vec<f32> {
    let p = vq.patch_px();
    (0..vq.dim()).map(|i| image.get(c * p + i % p, r * p + i / p) as f32).collect()
}

/// Re-encodes a decoded image block by block.
pub fn requantize(image: &GrayImage, vq: &VqCodebook) -> Result<TokenImage, SynthError> {
    let p = vq.patch_px();
    let (rows, cols) = (image.height() / p, image.width() / p);
    let mut grid = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            grid.push(quantize(&block_feature(image, r, c, vq), vq)?);
        }
    }
    Ok(TokenImage { rows, cols, grid })
}

#[derive(Serialize, Deserialize)]
struct VqHeader {
    count: usize,
    dim: usize,
    patch_px: usize,
}

pub fn write_vq(base: &Path, vq: &VqCodebook) -> Result<(), SynthError> {
    let paths = sidecar_paths(base);
    let header = VqHeader { count: vq.len(), dim: vq.dim(), patch_px: vq.patch_px() };
    fs::write(&paths.header, serde_json::to_vec_pretty(&header).expect("vq header serializes"))
        .map_err(|e| CorpusError::io(&paths.header, e))?;
    let ids: Vec<String> = (0..vq.len()).map(|k| k.to_string()).collect();
    emb1::write_embeddings(&paths.embeddings, &ids, vq.codes())?;
    Ok(())
}

pub fn read_vq(base: &Path) -> Result<VqCodebook, SynthError> {
    let paths = sidecar_paths(base);
    let raw = fs::read(&paths.header).map_err(|e| CorpusError::io(&paths.header, e))?;
    let header: VqHeader =
        serde_json::from_slice(&raw).map_err(|e| CorpusError::Format(format!("{}: {e}", paths.header.display())))?;
    let (_, codes) = emb1::read_embeddings(&paths.embeddings)?;
    if codes.rows() != header.count || codes.dim() != header.dim {
        return Err(SynthError::InvalidVq("header does not match code table".into()));
    }
    VqCodebook::new(codes, header.patch_px)
}
