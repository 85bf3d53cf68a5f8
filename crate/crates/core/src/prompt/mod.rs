//! Anatomy-pathology prompt generation: sample words, render the instruction,
//! ask an LLM (or the offline fallback) for findings, parse the reply.

mod client;
mod fallback;
mod parse;
mod template;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::Vocabularies;

pub use client::{CompletionRequest, FallbackClient, HttpLlmClient, HttpLlmConfig, LlmClient};
pub use fallback::{fallback_findings, NEGATION_DENYLIST};
pub use parse::{contains_word, denylist_hits, parse_response};
pub use template::{render_instruction, WordSource};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("requested {requested} {list} words but the vocabulary has {available}")]
    TooManyWords { list: &'static str, requested: usize, available: usize },
    #[error("at least one word is required from each list")]
    EmptySelection,
    #[error("response has no {0}")]
    MissingField(&'static str),
    #[error("unbalanced bracket in {0}")]
    UnbalancedBracket(&'static str),
    #[error("{0} is empty")]
    EmptyField(&'static str),
    #[error("transport: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts: {last_error}; last raw response: {raw:?}")]
    Exhausted { attempts: usize, last_error: String, raw: Option<String> },
}

/// The words one prompt must use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub anatomy_words: Vec<String>,
    pub pathology_words: Vec<String>,
    pub seed: u64,
}

impl PromptSpec {
    pub fn n(&self) -> usize {
        self.anatomy_words.len()
    }

    pub fn m(&self) -> usize {
        self.pathology_words.len()
    }
}

/// An anatomy list, a pathology list and the findings written from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedPrompt {
    pub anatomy_list: Vec<String>,
    pub pathology_list: Vec<String>,
    pub findings: String,
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly samples `n` anatomy and `m` pathology words without replacement.
pub fn sample_words(vocab: &Vocabularies, n: usize, m: usize, seed: u64) -> Result<PromptSpec, PromptError> {
    if n == 0 || m == 0 {
        return Err(PromptError::EmptySelection);
    }
    let mut rng = rng(seed);
    let mut pick = |list: &[String], k: usize, name| {
        if k > list.len() {
            return Err(PromptError::TooManyWords { list: name, requested: k, available: list.len() });
        }
        Ok(rand::seq::index::sample(&mut rng, list.len(), k).into_iter().map(|i| list[i].clone()).collect())
    };
    let anatomy_words = pick(&vocab.anatomy, n, "anatomy")?;
    let pathology_words = pick(&vocab.pathology, m, "pathology")?;
    Ok(PromptSpec { anatomy_words, pathology_words, seed })
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub source: WordSource,
    /// Extra attempts after the first failed one.
    pub max_retries: usize,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { source: WordSource::Sampled, max_retries: 3, max_tokens: 256, temperature: 0.7 }
    }
}

/// Renders the instruction, queries `client`, and parses its reply,
/// retrying on transport or parse failures.
pub fn generate_prompt(
    spec: &PromptSpec,
    vocab: &Vocabularies,
    client: &dyn LlmClient,
    opts: &GenerateOptions,
) -> Result<GeneratedPrompt, PromptError> {
    let prompt = render_instruction(spec, vocab, opts.source);
    let mut last_error = String::new();
    let mut raw = None;
    let attempts = opts.max_retries + 1;
    for attempt in 0..attempts {
        let req = CompletionRequest {
            prompt: prompt.clone(),
            max_tokens: opts.max_tokens,
            temperature: opts.temperature,
            seed: spec.seed.wrapping_add(attempt as u64),
        };
        match client.complete(&req) {
            Ok(text) => match parse_response(&text) {
                Ok(p) => {
                    if opts.source == WordSource::Sampled
                        && (p.anatomy_list != spec.anatomy_words || p.pathology_list != spec.pathology_words)
                    {
                        log::warn!("model used different words than requested: {:?} {:?}", p.anatomy_list, p.pathology_list);
                    }
                    return Ok(p);
                }
                Err(e) => {
                    log::debug!("attempt {}: unparseable response: {e}", attempt + 1);
                    last_error = e.to_string();
                    raw = Some(text);
                }
            },
            Err(e) => {
                log::debug!("attempt {}: {e}", attempt + 1);
                last_error = e.to_string();
            }
        }
    }
    Err(PromptError::Exhausted { attempts, last_error, raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn vocab(a: &[&str], p: &[&str]) -> Vocabularies {
        let s = |v: &[&str]| v.iter().map(|w| w.to_string()).collect();
        Vocabularies::new(s(a), s(p), BTreeSet::new()).unwrap()
    }

    #[test]
    fn forced_choice() {
        let s = sample_words(&vocab(&["heart"], &["effusion"]), 1, 1, 9).unwrap();
        assert_eq!(s.anatomy_words, ["heart"]);
        assert_eq!(s.pathology_words, ["effusion"]);
    }

    #[test]
    fn sampling_is_seeded_and_distinct() {
        let v = vocab(&["a1", "a2", "a3", "a4", "a5"], &["p1", "p2", "p3"]);
        let s1 = sample_words(&v, 3, 2, 42).unwrap();
        assert_eq!(s1, sample_words(&v, 3, 2, 42).unwrap());
        let uniq: BTreeSet<_> = s1.anatomy_words.iter().collect();
        assert_eq!(uniq.len(), 3);
        assert!(matches!(
            sample_words(&vocab(&["a", "b"], &["p"]), 3, 1, 0),
            Err(PromptError::TooManyWords { requested: 3, available: 2, .. })
        ));
        assert!(matches!(sample_words(&v, 0, 1, 0), Err(PromptError::EmptySelection)));
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let v = vocab(&["a", "b", "c", "d"], &["p"]);
        let mut hits = [0usize; 4];
        for seed in 0..4000 {
            let s = sample_words(&v, 1, 1, seed).unwrap();
            hits[(s.anatomy_words[0].as_bytes()[0] - b'a') as usize] += 1;
        }
        assert!(hits.iter().all(|&h| (850..1150).contains(&h)), "{hits:?}");
    }

    struct Canned(&'static str, AtomicUsize);

    impl LlmClient for Canned {
        fn complete(&self, _: &CompletionRequest) -> Result<String, PromptError> {
            self.1.fetch_add(1, Ordering::SeqCst);
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn example_reply_through_stub_client() {
        let text = "anatomy_list = ['heart', 'diaphragm']\npathology_list = ['effusion', 'opacity']\nFindings: Presence of opacity observed near the heart and diaphragm regions suggestive of effusion.";
        let v = vocab(&["heart", "diaphragm", "lung"], &["effusion", "opacity"]);
        let spec = sample_words(&v, 2, 2, 1).unwrap();
        let client = Canned(text, AtomicUsize::new(0));
        let p = generate_prompt(&spec, &v, &client, &GenerateOptions::default()).unwrap();
        assert_eq!(p.anatomy_list, ["heart", "diaphragm"]);
        assert_eq!(p.pathology_list, ["effusion", "opacity"]);
        assert_eq!(p.findings, "Presence of opacity observed near the heart and diaphragm regions suggestive of effusion.");
    }

    #[test]
    fn garbage_retries_then_fails() {
        let v = vocab(&["heart"], &["effusion"]);
        let spec = sample_words(&v, 1, 1, 1).unwrap();
        let client = Canned("garbage", AtomicUsize::new(0));
        let err = generate_prompt(&spec, &v, &client, &GenerateOptions::default()).unwrap_err();
        assert_eq!(client.1.load(Ordering::SeqCst), 4);
        match err {
            PromptError::Exhausted { attempts, raw, .. } => {
                assert_eq!(attempts, 4);
                assert_eq!(raw.as_deref(), Some("garbage"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fallback_client_parses_for_many_seeds() {
        let v = vocab(&["heart", "lung", "aorta", "hilum"], &["effusion", "opacity", "edema"]);
        for seed in 0..100 {
            let spec = sample_words(&v, 2, 2, seed).unwrap();
            let p = generate_prompt(&spec, &v, &FallbackClient, &GenerateOptions::default()).unwrap();
            assert_eq!(p.anatomy_list, spec.anatomy_words);
            assert_eq!(p.pathology_list, spec.pathology_words);
        }
    }

    #[test]
    fn fallback_can_pick_from_full_vocabulary() {
        let v = vocab(&["heart", "lung", "aorta", "hilum"], &["effusion", "opacity", "edema"]);
        let spec = sample_words(&v, 2, 1, 5).unwrap();
        let opts = GenerateOptions { source: WordSource::Vocabulary, ..Default::default() };
        let p = generate_prompt(&spec, &v, &FallbackClient, &opts).unwrap();
        assert_eq!(p.anatomy_list.len(), 2);
        assert_eq!(p.pathology_list.len(), 1);
        assert!(p.anatomy_list.iter().all(|w| v.anatomy.contains(w)));
    }
}
