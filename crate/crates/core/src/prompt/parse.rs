//! Reply parsing for the `anatomy_list = [...] / pathology_list = [...] /
//! Findings:` output format.

use super::{GeneratedPrompt, PromptError};

const QUOTES: &[char] = &['\'', '"', '`', '\u{2018}', '\u{2019}', '\u{201C}', '\u{201D}'];

fn rfind_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack.to_ascii_lowercase().rfind(&needle.to_ascii_lowercase())
}

/// Parses the bracketed list that follows `name` (and an `=` or `:`).
pub(crate) fn parse_list(text: &str, name: &'static str) -> Result<Vec<String>, PromptError> {
    let start = rfind_ci(text, name).ok_or(PromptError::MissingField(name))?;
    let rest = text[start + name.len()..].trim_start();
    let rest = rest.strip_prefix(['=', ':']).ok_or(PromptError::MissingField(name))?.trim_start();
    let body = rest.strip_prefix('[').ok_or(PromptError::UnbalancedBracket(name))?;
    let line_end = body.find(['\n']).unwrap_or(body.len());
    let close = body[..line_end].find(']').ok_or(PromptError::UnbalancedBracket(name))?;
    let inner = &body[..close];
    if inner.contains('[') {
        return Err(PromptError::UnbalancedBracket(name));
    }
    let words: Vec<String> = inner
        .split(',')
        .map(|w| w.trim().trim_matches(QUOTES).trim().to_owned())
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return Err(PromptError::EmptyField(name));
    }
    Ok(words)
}

/// Extracts the two word lists and the findings text from a model reply.
///
/// The last `Findings:` marker wins; lists are read from the text before it,
/// again taking the last occurrence, so an echoed example block is ignored.
pub fn parse_response(text: &str) -> Result<GeneratedPrompt, PromptError> {
    let marker = "findings:";
    let at = rfind_ci(text, marker);
    let head = at.map_or(text, |i| &text[..i]);
    let anatomy_list = parse_list(head, "anatomy_list")?;
    let pathology_list = parse_list(head, "pathology_list")?;
    let at = at.ok_or(PromptError::MissingField("Findings"))?;
    let findings = text[at + marker.len()..].trim().to_owned();
    if findings.is_empty() {
        return Err(PromptError::EmptyField("Findings"));
    }
    Ok(GeneratedPrompt { anatomy_list, pathology_list, findings })
}

/// Case-insensitive whole-word (or whole-phrase) containment.
pub fn contains_word(text: &str, word: &str) -> bool {
    count_word(text, word) > 0
}

pub(crate) fn count_word(text: &str, word: &str) -> usize {
    let hay: Vec<String> = crate::vocab::tokenize(text);
    let needle: Vec<String> = crate::vocab::tokenize(word);
    if needle.is_empty() || hay.len() < needle.len() {
        return 0;
    }
    hay.windows(needle.len()).filter(|w| *w == needle.as_slice()).count()
}

/// Denylisted negation words or phrases that occur in `text`.
pub fn denylist_hits(text: &str) -> Vec<&'static str> {
    super::NEGATION_DENYLIST.iter().copied().filter(|w| contains_word(text, w)).collect()
}
