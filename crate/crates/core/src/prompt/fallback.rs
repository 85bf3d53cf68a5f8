//! Offline findings writer used when no LLM endpoint is configured.

use rand::seq::SliceRandom;
use rand::Rng;

use super::parse::count_word;
use super::{rng, GeneratedPrompt, PromptSpec};

/// Words and phrases that mark a negative sentence.
pub const NEGATION_DENYLIST: &[&str] = &["no", "not", "without", "negative", "absent", "unremarkable", "clear of"];

const MAX_WORDS: usize = 50;

// {P} = pathology words, {A} = anatomy words.
const TEMPLATES: &[&str] = &[
    "Presence of {P} observed near the {A} regions.",
    "There is {P} involving the {A}.",
    "Imaging demonstrates {P} projecting over the {A}.",
    "Frontal view shows {P} at the level of the {A}.",
    "Appearance of {P} adjacent to the {A} is seen.",
];

fn join_and(words: &[&String]) -> String {
    match words {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(|w| w.as_str()).collect();
            format!("{} and {last}", head.join(", "))
        }
    }
}

fn acceptable(text: &str, spec: &PromptSpec) -> bool {
    text.split_whitespace().count() <= MAX_WORDS
        && spec.anatomy_words.iter().chain(&spec.pathology_words).all(|w| count_word(text, w) == 1)
        && NEGATION_DENYLIST.iter().all(|neg| {
            // a requested word may itself be denylisted; only template text is policed
            spec.anatomy_words.iter().chain(&spec.pathology_words).any(|w| w == neg) || count_word(text, neg) == 0
        })
}

/// Deterministic findings that mention every requested word exactly once.
///
/// Word order and sentence template are drawn from `seed`; templates whose
/// filler text would repeat a requested word are skipped. When no template
/// fits, the words are listed plainly.
pub fn fallback_findings(spec: &PromptSpec, seed: u64) -> GeneratedPrompt {
    let mut rng = rng(seed);
    let mut anatomy: Vec<&String> = spec.anatomy_words.iter().collect();
    let mut pathology: Vec<&String> = spec.pathology_words.iter().collect();
    anatomy.shuffle(&mut rng);
    pathology.shuffle(&mut rng);
    let (a, p) = (join_and(&anatomy), join_and(&pathology));

    let start = rng.random_range(0..TEMPLATES.len());
    let findings = (0..TEMPLATES.len())
        .map(|i| TEMPLATES[(start + i) % TEMPLATES.len()].replace("{P}", &p).replace("{A}", &a))
        .find(|t| acceptable(t, spec))
        .unwrap_or_else(|| {
            let all: Vec<&str> = pathology.iter().chain(&anatomy).map(|w| w.as_str()).collect();
            if all.len() > MAX_WORDS {
                log::warn!("{} requested words exceed the {MAX_WORDS}-word findings limit", all.len());
            }
            format!("{}.", all.join(", "))
        });

    GeneratedPrompt {
        anatomy_list: spec.anatomy_words.clone(),
        pathology_list: spec.pathology_words.clone(),
        findings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::denylist_hits;

    fn spec(a: &[&str], p: &[&str]) -> PromptSpec {
        PromptSpec {
            anatomy_words: a.iter().map(|s| s.to_string()).collect(),
            pathology_words: p.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }

    #[test]
    fn mentions_all_words() {
        let s = spec(&["heart", "diaphragm"], &["effusion", "opacity"]);
        let g = fallback_findings(&s, 3);
        for w in ["heart", "diaphragm", "effusion", "opacity"] {
            assert_eq!(count_word(&g.findings, w), 1, "{}", g.findings);
        }
        assert_eq!(g, fallback_findings(&s, 3));
    }

    #[test]
    fn colliding_template_words_are_avoided() {
        // "regions", "level", "view" and "appearance" collide with template filler
        let s = spec(&["regions", "level", "view"], &["appearance", "involving", "projecting"]);
        for seed in 0..20 {
            let g = fallback_findings(&s, seed);
            for w in s.anatomy_words.iter().chain(&s.pathology_words) {
                assert_eq!(count_word(&g.findings, w), 1, "{}", g.findings);
            }
        }
    }

    #[test]
    fn no_negations_over_many_seeds() {
        let s = spec(&["heart", "lung", "hilum"], &["effusion", "edema"]);
        for seed in 0..1000 {
            let g = fallback_findings(&s, seed);
            assert!(denylist_hits(&g.findings).is_empty(), "{}", g.findings);
            assert!(g.findings.split_whitespace().count() <= 50);
            let lower = g.findings.to_lowercase();
            assert!(!lower.contains("no ") && !lower.contains("not ") && !lower.contains("without"));
        }
    }
}
