use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SynthError, SynthesisRequest, TokenImage};

/// Raw model output before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub tokens: Vec<i64>,
    /// The payload as received, for diagnostics.
    pub raw: String,
}

/// A model that predicts the image-token grid for a request.
pub trait ImageTokenClient: Send + Sync {
    fn predict(&self, request: &SynthesisRequest, target: (usize, usize), seed: u64) -> Result<Prediction, SynthError>;
}

/// Checks the model output against the target shape and vocabulary size.
pub fn predict_tokens(
    request: &SynthesisRequest,
    client: &dyn ImageTokenClient,
    target: (usize, usize),
    vocab_size: usize,
    seed: u64,
) -> Result<TokenImage, SynthError> {
    let pred = client.predict(request, target, seed)?;
    let (rows, cols) = target;
    if pred.tokens.len() != rows * cols {
        return Err(SynthError::Protocol {
            message: format!("expected {} tokens for a {rows}×{cols} grid, got {}", rows * cols, pred.tokens.len()),
            raw: pred.raw,
        });
    }
    let mut grid = Vec::with_capacity(pred.tokens.len());
    for &t in &pred.tokens {
        match usize::try_from(t) {
            Ok(k) if k < vocab_size => grid.push(k),
            _ => {
                return Err(SynthError::Protocol {
                    message: format!("token {t} outside [0, {vocab_size})"),
                    raw: pred.raw,
                })
            }
        }
    }
    Ok(TokenImage { rows, cols, grid })
}

/// Deterministic offline predictor.
///
/// Cell `i` (row-major) takes context token `i mod len`; with probability
/// `jitter` a cell is replaced by a uniformly drawn code instead. An empty
/// context yields uniformly drawn codes everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubImageClient {
    pub vocab_size: usize,
    pub jitter: f64,
}

impl StubImageClient {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, jitter: 0.1 }
    }
}

impl ImageTokenClient for StubImageClient {
    fn predict(&self, request: &SynthesisRequest, (rows, cols): (usize, usize), seed: u64) -> Result<Prediction, SynthError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = &request.context_tokens;
        let tokens: Vec<i64> = (0..rows * cols)
            .map(|i| {
                let draw = rng.random_range(0..self.vocab_size) as i64;
                let jitter = rng.random_bool(self.jitter.clamp(0.0, 1.0));
                if ctx.is_empty() || jitter {
                    draw
                } else {
                    ctx[i % ctx.len()] as i64
                }
            })
            .collect();
        let raw = format!("{tokens:?}");
        Ok(Prediction { tokens, raw })
    }
}

#[derive(Serialize)]
struct Target {
    rows: usize,
    cols: usize,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    instruction: &'a str,
    report: &'a str,
    context_tokens: &'a [usize],
    target: Target,
}

#[derive(Deserialize)]
struct WireResponse {
    tokens: Vec<i64>,
}

/// POSTs `{instruction, report, context_tokens, target: {rows, cols}}` and
/// expects `{tokens: [int]}`.
pub struct HttpImageClient {
    url: String,
    agent: ureq::Agent,
}

impl HttpImageClient {
    pub const URL_VAR: &'static str = "KPA_IMGLLM_URL";

    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { url: url.into(), agent }
    }

    pub fn from_env() -> Result<Self, SynthError> {
        let url = std::env::var(Self::URL_VAR).map_err(|_| SynthError::Transport(format!("{} is not set", Self::URL_VAR)))?;
        Ok(Self::new(url, Duration::from_secs(300)))
    }
}

impl ImageTokenClient for HttpImageClient {
    fn predict(&self, request: &SynthesisRequest, (rows, cols): (usize, usize), _seed: u64) -> Result<Prediction, SynthError> {
        let body = WireRequest {
            instruction: &request.instruction,
            report: &request.report,
            context_tokens: &request.context_tokens,
            target: Target { rows, cols },
        };
        let raw = crate::http::post_json(&self.agent, &self.url, None, &body).map_err(SynthError::Transport)?;
        let parsed: WireResponse = serde_json::from_str(&raw)
            .map_err(|e| SynthError::Protocol { message: format!("bad response body: {e}"), raw: raw.clone() })?;
        Ok(Prediction { tokens: parsed.tokens, raw })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{assemble_request, DEFAULT_TEMPLATE};
    use crate::prompt::GeneratedPrompt;

    fn request(ctx: &[usize]) -> SynthesisRequest {
        let p = GeneratedPrompt { anatomy_list: vec!["a".into()], pathology_list: vec!["b".into()], findings: "f".into() };
        assemble_request(&p, ctx, DEFAULT_TEMPLATE).unwrap()
    }

    #[test]
    fn stub_is_deterministic() {
        let stub = StubImageClient::new(16);
        let a = predict_tokens(&request(&[7]), &stub, (2, 2), 16, 0).unwrap();
        assert_eq!(a.grid.len(), 4);
        assert!(a.grid.iter().all(|&k| k < 16));
        assert_eq!(a, predict_tokens(&request(&[7]), &stub, (2, 2), 16, 0).unwrap());
    }

    #[test]
    fn stub_respects_bounds_over_seeds() {
        let stub = StubImageClient::new(8);
        for seed in 0..100 {
            let t = predict_tokens(&request(&[1, 7, 3]), &stub, (4, 5), 8, seed).unwrap();
            assert!(t.grid.iter().all(|&k| k < 8));
        }
    }

    #[test]
    fn stub_without_jitter_tiles_context() {
        let stub = StubImageClient { vocab_size: 10, jitter: 0.0 };
        let t = predict_tokens(&request(&[4, 9]), &stub, (1, 5), 10, 3).unwrap();
        assert_eq!(t.grid, [4, 9, 4, 9, 4]);
    }

    struct Fixed(Vec<i64>);

    impl ImageTokenClient for Fixed {
        fn predict(&self, _: &SynthesisRequest, _: (usize, usize), _: u64) -> Result<Prediction, SynthError> {
            Ok(Prediction { tokens: self.0.clone(), raw: format!("{{\"tokens\":{:?}}}", self.0) })
        }
    }

    #[test]
    fn wrong_count_is_protocol_error() {
        match predict_tokens(&request(&[]), &Fixed(vec![1, 2, 3]), (2, 2), 8, 0) {
            Err(SynthError::Protocol { raw, .. }) => assert!(raw.contains("[1, 2, 3]")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(predict_tokens(&request(&[]), &Fixed(vec![0, 1, 8, -1]), (2, 2), 8, 0), Err(SynthError::Protocol { .. })));
    }

    #[test]
    fn http_wire_format() {
        let (url, rx) = crate::http::test_server::one_shot_server(200, r#"{"tokens":[1,2,3,4]}"#);
        let client = HttpImageClient::new(url, Duration::from_secs(5));
        let t = predict_tokens(&request(&[5, 6]), &client, (2, 2), 8, 0).unwrap();
        assert_eq!(t.grid, [1, 2, 3, 4]);
        let (_, body) = rx.recv().unwrap();
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["context_tokens"], serde_json::json!([5, 6]));
        assert_eq!(v["target"], serde_json::json!({"rows": 2, "cols": 2}));
        assert_eq!(v["report"], "f");
    }
}
