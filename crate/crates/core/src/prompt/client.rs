//! LLM clients: a JSON-over-HTTP completion endpoint and the offline fallback.

use std::time::Duration;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{fallback_findings, rng, template::format_list, PromptError, PromptSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
    /// Only the offline fallback consumes the seed.
    pub seed: u64,
}

/// Anything that turns an instruction into reply text.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, PromptError>;
}

#[derive(Debug, Clone)]
pub struct HttpLlmConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl HttpLlmConfig {
    pub const URL_VAR: &'static str = "KPA_LLM_URL";
    pub const KEY_VAR: &'static str = "KPA_LLM_KEY";

    /// Reads the endpoint and credential from `KPA_LLM_URL` / `KPA_LLM_KEY`.
    pub fn from_env(model: impl Into<String>) -> Result<Self, PromptError> {
        let url = std::env::var(Self::URL_VAR)
            .map_err(|_| PromptError::Transport(format!("{} is not set", Self::URL_VAR)))?;
        Ok(Self {
            url,
            api_key: std::env::var(Self::KEY_VAR).ok().filter(|k| !k.is_empty()),
            model: model.into(),
            timeout: Duration::from_secs(120),
        })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f32,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// POSTs `{model, prompt, max_tokens, temperature}` and reads `{text}`.
pub struct HttpLlmClient {
    config: HttpLlmConfig,
    agent: ureq::Agent,
}

impl HttpLlmClient {
    pub fn new(config: HttpLlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, PromptError> {
        let body = WireRequest {
            model: &self.config.model,
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
        };
        let raw = crate::http::post_json(&self.agent, &self.config.url, self.config.api_key.as_deref(), &body)
            .map_err(PromptError::Transport)?;
        let parsed: WireResponse = serde_json::from_str(&raw)
            .map_err(|e| PromptError::Transport(format!("bad response body ({e}): {raw}")))?;
        Ok(parsed.text)
    }
}

/// Answers instructions locally with [`fallback_findings`].
///
/// The word lists and the requested counts are read back out of the
/// instruction, so this client works for both word sources.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackClient;

fn requested_counts(prompt: &str) -> Option<(usize, usize)> {
    let rest = &prompt[prompt.find("only include ")? + "only include ".len()..];
    let (n, rest) = rest.split_once(" words from the anatomy list and ")?;
    let (m, _) = rest.split_once(" from the pathology list")?;
    Some((n.trim().parse().ok()?, m.trim().parse().ok()?))
}

impl LlmClient for FallbackClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, PromptError> {
        let bad = |what: &str| PromptError::Transport(format!("fallback could not read {what} from the instruction"));
        let first_block = request.prompt.split("Here are two lists").next().unwrap_or_default();
        let anatomy = super::parse::parse_list(first_block, "anatomy_list").map_err(|_| bad("anatomy_list"))?;
        let pathology =
            super::parse::parse_list(first_block, "pathology_list").map_err(|_| bad("pathology_list"))?;
        let (n, m) = requested_counts(&request.prompt).ok_or_else(|| bad("word counts"))?;
        if n > anatomy.len() || m > pathology.len() || n == 0 || m == 0 {
            return Err(bad("satisfiable word counts"));
        }
        let mut r = rng(request.seed ^ 0x9E37_79B9_7F4A_7C15);
        let pick = |list: &[String], k: usize, r: &mut _| -> Vec<String> {
            if k == list.len() {
                list.to_vec()
            } else {
                let mut idx = sample(r, list.len(), k).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| list[i].clone()).collect()
            }
        };
        let spec = PromptSpec {
            anatomy_words: pick(&anatomy, n, &mut r),
            pathology_words: pick(&pathology, m, &mut r),
            seed: request.seed,
        };
        let g = fallback_findings(&spec, request.seed);
        Ok(format!(
            "anatomy_list = {}\npathology_list = {}\nFindings: {}",
            format_list(&g.anatomy_list),
            format_list(&g.pathology_list),
            g.findings
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::test_server::one_shot_server;

    fn request() -> CompletionRequest {
        CompletionRequest { prompt: "hello".into(), max_tokens: 64, temperature: 0.7, seed: 0 }
    }

    #[test]
    fn http_client_wire_format() {
        let (url, rx) = one_shot_server(200, r#"{"text":"Findings: ok"}"#);
        let client = HttpLlmClient::new(HttpLlmConfig {
            url,
            api_key: Some("sekret".into()),
            model: "m1".into(),
            timeout: Duration::from_secs(5),
        });
        assert_eq!(client.complete(&request()).unwrap(), "Findings: ok");
        let (headers, body) = rx.recv().unwrap();
        assert!(headers.to_ascii_lowercase().contains("authorization: bearer sekret"));
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["model"], "m1");
        assert_eq!(v["prompt"], "hello");
        assert_eq!(v["max_tokens"], 64);
        assert!((v["temperature"].as_f64().unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn http_errors_carry_payload() {
        let (url, _rx) = one_shot_server(500, "boom");
        let client = HttpLlmClient::new(HttpLlmConfig { url, api_key: None, model: "m".into(), timeout: Duration::from_secs(5) });
        match client.complete(&request()) {
            Err(PromptError::Transport(msg)) => assert!(msg.contains("boom"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn counts_read_from_instruction() {
        let t = "x only include 3 words from the anatomy list and 12 from the pathology list, y";
        assert_eq!(requested_counts(t), Some((3, 12)));
        assert_eq!(requested_counts("nothing"), None);
    }
}
