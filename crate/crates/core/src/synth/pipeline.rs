use serde::{Deserialize, Serialize};

use super::{
    assemble_request, decode_tokens, encode_keypatches, predict_tokens, ImageTokenClient, Projection, Stage,
    SynthError, TextEncoder, TokenImage, VqCodebook, DEFAULT_TEMPLATE,
};
use crate::align::{compute_sw, extract_keypatches, TokenSelections, VisualCodebook};
use crate::corpus::TokenSeq;
use crate::prompt::GeneratedPrompt;
use crate::raster::GrayImage;
use crate::vocab::tokenize;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub kappa3: usize,
    /// Token grid `(rows, cols)` of the output image.
    pub grid: (usize, usize),
    pub template_id: String,
    pub seed: u64,
    pub projection: Projection,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { kappa3: 4, grid: (16, 16), template_id: DEFAULT_TEMPLATE.to_owned(), seed: 0, projection: Projection::Identity }
    }
}

/// One context token traced back to the alignment that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub keypatch: usize,
    pub code: usize,
    pub token: String,
    pub token_index: usize,
    /// 0-based rank of the keypatch in that token's list.
    pub rank: usize,
    pub score: f64,
    pub source_image_id: String,
    pub patch_index: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisProvenance {
    pub template_id: String,
    pub seed: u64,
    pub findings: String,
    pub tokens: Vec<String>,
    pub per_token: Vec<TokenSelections>,
    pub context: Vec<ContextEntry>,
    pub context_tokens: Vec<usize>,
    pub predicted: TokenImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub image: GrayImage,
    pub provenance: SynthesisProvenance,
}

/// Report → keypatches → image tokens → predicted grid → pixels.
pub fn synthesize(
    prompt: &GeneratedPrompt,
    codebook: &VisualCodebook,
    vq: &VqCodebook,
    encoder: &dyn TextEncoder,
    client: &dyn ImageTokenClient,
    params: &SynthParams,
) -> Result<Synthesis, SynthError> {
    let words = tokenize(&prompt.findings);
    if words.is_empty() {
        return Err(SynthError::EmptyReport.stage(Stage::Embed));
    }
    let seq = encoder
        .encode(&words)
        .and_then(|m| Ok(TokenSeq::new("prompt", words.clone(), m)?))
        .map_err(|e| e.stage(Stage::Embed))?;

    let sw = compute_sw(codebook, &seq).map_err(|e| SynthError::from(e).stage(Stage::Align))?;
    let retrieval = extract_keypatches(&sw, params.kappa3).map_err(|e| SynthError::from(e).stage(Stage::Retrieve))?;
    let codes =
        encode_keypatches(&retrieval, codebook, vq, &params.projection).map_err(|e| e.stage(Stage::Encode))?;

    let context = retrieval
        .flattened
        .iter()
        .zip(&codes)
        .map(|(&kp, &code)| {
            let (token_index, rank, score) = retrieval.trace(kp).expect("flattened keypatches come from per-token lists");
            let src = &codebook.keypatches[kp];
            ContextEntry {
                keypatch: kp,
                code,
                token: words[token_index].clone(),
                token_index,
                rank,
                score,
                source_image_id: src.source_image_id.clone(),
                patch_index: src.patch.index,
            }
        })
        .collect();

    let request = assemble_request(prompt, &codes, &params.template_id).map_err(|e| e.stage(Stage::Assemble))?;
    let predicted =
        predict_tokens(&request, client, params.grid, vq.len(), params.seed).map_err(|e| e.stage(Stage::Predict))?;
    let image = decode_tokens(&predicted, vq).map_err(|e| e.stage(Stage::Decode))?;

    Ok(Synthesis {
        image,
        provenance: SynthesisProvenance {
            template_id: params.template_id.clone(),
            seed: params.seed,
            findings: prompt.findings.clone(),
            tokens: words,
            per_token: retrieval.per_token,
            context,
            context_tokens: codes,
            predicted,
        },
    })
}
