use serde::{Deserialize, Serialize};

use super::kernel::{cosine_with_norms, nonzero_norms};
use super::{AlignError, VisualCodebook};
use crate::corpus::TokenSeq;

/// Codebook-by-token cosine matrix (rows: keypatches, columns: tokens).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub row_ids: Vec<usize>,
    pub col_tokens: Vec<String>,
}

impl SimilarityMatrix {
    /// Builds a matrix from explicit row-major values, mostly for tests and
    /// externally scored candidates.
    pub fn from_values(
        values: Vec<f64>,
        row_ids: Vec<usize>,
        col_tokens: Vec<String>,
    ) -> Result<Self, AlignError> {
        let (rows, cols) = (row_ids.len(), col_tokens.len());
        if values.len() != rows * cols {
            return Err(AlignError::DimMismatch {
                context: "similarity values".into(),
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, values, row_ids, col_tokens })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, k: usize) -> f64 {
        self.values[r * self.cols + k]
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, k))
    }
}

pub fn compute_sw(codebook: &VisualCodebook, tokens: &TokenSeq) -> Result<SimilarityMatrix, AlignError> {
    if tokens.dim() != codebook.dim {
        return Err(AlignError::DimMismatch {
            context: format!("tokens of `{}` vs codebook", tokens.report_id),
            expected: codebook.dim,
            got: tokens.dim(),
        });
    }
    let kp_norms = nonzero_norms(codebook.keypatches.iter().map(|k| k.patch.embedding.as_slice()))?;
    let tok_norms = nonzero_norms(tokens.embeddings().iter_rows())?;
    let mut values = Vec::with_capacity(codebook.len() * tokens.len());
    for (kp, &nk) in codebook.keypatches.iter().zip(&kp_norms) {
        for (t, &nt) in tokens.embeddings().iter_rows().zip(&tok_norms) {
            values.push(cosine_with_norms(&kp.patch.embedding, nk, t, nt));
        }
    }
    Ok(SimilarityMatrix {
        rows: codebook.len(),
        cols: tokens.len(),
        values,
        row_ids: (0..codebook.len()).collect(),
        col_tokens: tokens.tokens().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub keypatch: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSelections {
    pub token: String,
    pub hits: Vec<Selection>,
}

/// Per-token top-κ3 keypatches plus their de-duplicated union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub per_token: Vec<TokenSelections>,
    /// Round-robin over tokens by rank, first occurrence kept.
    pub flattened: Vec<usize>,
}

impl RetrievalResult {
    /// The best (token, rank, score) that selected `keypatch`, if any.
    pub fn trace(&self, keypatch: usize) -> Option<(usize, usize, f64)> {
        self.per_token
            .iter()
            .enumerate()
            .flat_map(|(t, sel)| sel.hits.iter().enumerate().map(move |(rank, h)| (t, rank, h)))
            .filter(|(_, _, h)| h.keypatch == keypatch)
            .max_by(|a, b| a.2.score.total_cmp(&b.2.score).then(b.1.cmp(&a.1)).then(b.0.cmp(&a.0)))
            .map(|(t, rank, h)| (t, rank, h.score))
    }
}

/// Top-`kappa3` rows per column, scores descending with ties on the lower
/// keypatch index.
pub fn extract_keypatches(matrix: &SimilarityMatrix, kappa3: usize) -> Result<RetrievalResult, AlignError> {
    if matrix.rows == 0 || matrix.cols == 0 {
        return Err(AlignError::EmptyMatrix);
    }
    if kappa3 == 0 {
        return Err(AlignError::InvalidParams("kappa3 must be ≥ 1".into()));
    }
    let k = if kappa3 > matrix.rows {
        log::warn!("kappa3 = {kappa3} exceeds codebook size {}; clamping", matrix.rows);
        matrix.rows
    } else {
        kappa3
    };

    let per_token: Vec<TokenSelections> = (0..matrix.cols)
        .map(|c| {
            let mut order: Vec<usize> = (0..matrix.rows).collect();
            let key = |r: usize| matrix.get(r, c);
            order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(matrix.row_ids[a].cmp(&matrix.row_ids[b])));
            TokenSelections {
                token: matrix.col_tokens[c].clone(),
                hits: order[..k].iter().map(|&r| Selection { keypatch: matrix.row_ids[r], score: key(r) }).collect(),
            }
        })
        .collect();

    let mut seen = std::collections::HashSet::new();
    let mut flattened = Vec::new();
    for rank in 0..k {
        for sel in &per_token {
            let kp = sel.hits[rank].keypatch;
            if seen.insert(kp) {
                flattened.push(kp);
            }
        }
    }
    Ok(RetrievalResult { per_token, flattened })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> SimilarityMatrix {
        SimilarityMatrix::from_values(values, (0..rows).collect(), (0..cols).map(|c| format!("t{c}")).collect()).unwrap()
    }

    #[test]
    fn sorted_top_two() {
        let r = extract_keypatches(&matrix(3, 1, vec![0.2, 0.9, 0.5]), 2).unwrap();
        let idx: Vec<_> = r.per_token[0].hits.iter().map(|h| h.keypatch).collect();
        assert_eq!(idx, [1, 2]);
        assert_eq!(r.flattened, [1, 2]);
    }

    #[test]
    fn single_keypatch_shared_by_all_tokens() {
        let r = extract_keypatches(&matrix(1, 3, vec![0.1, -0.4, 0.3]), 4).unwrap();
        assert!(r.per_token.iter().all(|t| t.hits.len() == 1 && t.hits[0].keypatch == 0));
        assert_eq!(r.flattened, [0]);
    }

    #[test]
    fn round_robin_flattening() {
        // token 0 prefers 2,0 ; token 1 prefers 2,1
        let m = matrix(3, 2, vec![0.5, 0.1, 0.0, 0.6, 0.9, 0.8]);
        let r = extract_keypatches(&m, 2).unwrap();
        assert_eq!(r.flattened, [2, 0, 1]);
        assert_eq!(r.trace(1), Some((1, 1, 0.6)));
        assert_eq!(r.trace(2), Some((0, 0, 0.9)));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let r = extract_keypatches(&matrix(3, 1, vec![0.5, 0.5, 0.5]), 2).unwrap();
        assert_eq!(r.flattened, [0, 1]);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(extract_keypatches(&matrix(0, 2, vec![]), 1), Err(AlignError::EmptyMatrix)));
    }
}
