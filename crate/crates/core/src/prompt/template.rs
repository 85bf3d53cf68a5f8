use std::fmt::Write as _;

use super::PromptSpec;
use crate::vocab::Vocabularies;

/// Which word lists are spliced into the instruction header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WordSource {
    /// Only the words already sampled into the [`PromptSpec`]; the model has
    /// no choice left to make.
    #[default]
    Sampled,
    /// The full vocabularies; the model picks N and M words itself.
    Vocabulary,
}

const EXAMPLE_BLOCK: &str = "Here is an example:
anatomy_list = ['heart', 'diaphragm']
pathology_list = ['effusion', 'opacity']
Findings: Presence of opacity observed near the heart and diaphragm regions suggestive of effusion.
Please generate the output in the following format:
";

pub(crate) fn format_list(words: &[impl AsRef<str>]) -> String {
    let items: Vec<String> = words.iter().map(|w| format!("'{}'", w.as_ref())).collect();
    format!("[{}]", items.join(", "))
}

fn count_word(n: usize) -> String {
    const WORDS: [&str; 21] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
        "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
    ];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| w.to_string())
}

/// The word-list instruction for one prompt.
///
/// With N = M = 2 and the sampled words this is the reference instruction
/// text; other counts change only the numerals and the placeholder format.
pub fn render_instruction(spec: &PromptSpec, vocab: &Vocabularies, source: WordSource) -> String {
    let (n, m) = (spec.n(), spec.m());
    let (anatomy, pathology): (&[String], &[String]) = match source {
        WordSource::Sampled => (&spec.anatomy_words, &spec.pathology_words),
        WordSource::Vocabulary => (&vocab.anatomy, &vocab.pathology),
    };
    let mut s = String::new();
    let _ = writeln!(s, "anatomy_list = {}", format_list(anatomy));
    let _ = writeln!(s, "pathology_list = {}", format_list(pathology));
    let _ = writeln!(
        s,
        "Here are two lists of anatomy and pathology for chest X-rays. Please write some findings that only \
         include {n} words from the anatomy list and {m} from the pathology list, and do not write any negative \
         sentences in the findings. These {} words can be randomly selected from the two lists, respectively. \
         Please ensure the findings are reasonable for a chest x-ray in real medical scenarios. The output should \
         be in 50 words.",
        count_word(n + m)
    );
    s.push_str(EXAMPLE_BLOCK);
    let placeholders: Vec<String> = (1..=n + m).map(|i| format!("word{i}")).collect();
    let _ = writeln!(s, "anatomy_list = {}", format_list(&placeholders[..n]));
    let _ = writeln!(s, "pathology_list = {}", format_list(&placeholders[n..]));
    s.push_str("Findings:");
    s
}
