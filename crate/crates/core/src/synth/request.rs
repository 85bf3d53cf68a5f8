use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::prompt::GeneratedPrompt;

pub const DEFAULT_TEMPLATE: &str = "cxr-v1";

/// Versioned synthesis instructions: `(id, text)`.
pub const TEMPLATES: &[(&str, &str)] = &[(
    "cxr-v1",
    "Generate a chest X-ray image that matches the report below. The reference image tokens come from \
     keypatches aligned with the report words; use them as visual clues for the described anatomy and \
     pathology. Answer with image tokens only.",
)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisRequest {
    pub template_id: String,
    pub instruction: String,
    pub report: String,
    pub context_tokens: Vec<usize>,
}

impl SynthesisRequest {
    /// Space-separated `<img_k>` markers.
    pub fn context_string(&self) -> String {
        self.context_tokens.iter().map(|k| format!("<img_{k}>")).collect::<Vec<_>>().join(" ")
    }

    /// The full instruction-following input as one text block.
    pub fn render(&self) -> String {
        format!(
            "### Instruction:\n{}\n\n### Report:\n{}\n\n### Reference image tokens:\n{}\n\n### Response:\n",
            self.instruction,
            self.report,
            self.context_string()
        )
    }
}

pub fn assemble_request(
    prompt: &GeneratedPrompt,
    tokens: &[usize],
    template_id: &str,
) -> Result<SynthesisRequest, SynthError> {
    let (_, text) = TEMPLATES
        .iter()
        .find(|(id, _)| *id == template_id)
        .ok_or_else(|| SynthError::UnknownTemplate(template_id.to_owned()))?;
    if prompt.findings.trim().is_empty() {
        return Err(SynthError::EmptyReport);
    }
    Ok(SynthesisRequest {
        template_id: template_id.to_owned(),
        instruction: (*text).to_owned(),
        report: prompt.findings.clone(),
        context_tokens: tokens.to_vec(),
    })
}
