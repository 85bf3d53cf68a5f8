use super::AlignError;
use crate::corpus::{PatchGrid, TokenSeq};

pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

/// Cosine with precomputed norms; every similarity in the crate goes through here.
#[inline]
pub(crate) fn cosine_with_norms(u: &[f32], nu: f64, v: &[f32], nv: f64) -> f64 {
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

pub fn cosine_sim(u: &[f32], v: &[f32]) -> Result<f64, AlignError> {
    if u.len() != v.len() {
        return Err(AlignError::DimMismatch { context: "cosine".into(), expected: u.len(), got: v.len() });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(AlignError::ZeroNorm);
    }
    Ok(cosine_with_norms(u, nu, v, nv))
}

/// Best patch for one token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenMax {
    pub score: f64,
    /// Position of the patch in `PatchGrid::patches()`.
    pub patch: usize,
}

pub(crate) fn nonzero_norms<'a>(rows: impl Iterator<Item = &'a [f32]>) -> Result<Vec<f64>, AlignError> {
    rows.map(|r| {
        let n = norm(r);
        if n == 0.0 {
            Err(AlignError::ZeroNorm)
        } else {
            Ok(n)
        }
    })
    .collect()
}

/// For each token, the maximum cosine over all patches; ties go to the
/// earliest patch.
pub fn word_patch_max(tokens: &TokenSeq, patches: &PatchGrid) -> Result<Vec<TokenMax>, AlignError> {
    if patches.is_empty() {
        return Err(AlignError::EmptyPatches);
    }
    if tokens.dim() != patches.dim() {
        return Err(AlignError::DimMismatch {
            context: format!("tokens of `{}` vs patches of `{}`", tokens.report_id, patches.image_id),
            expected: patches.dim(),
            got: tokens.dim(),
        });
    }
    let patch_norms = nonzero_norms(patches.patches().iter().map(|p| p.embedding.as_slice()))?;
    let token_norms = nonzero_norms(tokens.embeddings().iter_rows())?;
    Ok(tokens
        .embeddings()
        .iter_rows()
        .zip(&token_norms)
        .map(|(t, &nt)| {
            let mut best = TokenMax { score: f64::NEG_INFINITY, patch: 0 };
            for (j, (p, &np)) in patches.patches().iter().zip(&patch_norms).enumerate() {
                let s = cosine_with_norms(t, nt, &p.embedding, np);
                if s > best.score {
                    best = TokenMax { score: s, patch: j };
                }
            }
            best
        })
        .collect())
}

/// Report-to-image similarity: mean over tokens of the per-token maximum.
pub fn report_to_cxr_sim(tokens: &TokenSeq, patches: &PatchGrid) -> Result<f64, AlignError> {
    if tokens.is_empty() {
        return Err(AlignError::EmptyTokens);
    }
    Ok(mean_of_max(&word_patch_max(tokens, patches)?))
}

pub(crate) fn mean_of_max(maxima: &[TokenMax]) -> f64 {
    maxima.iter().map(|m| m.score).sum::<f64>() / maxima.len() as f64
}
