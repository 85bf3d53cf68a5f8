//! Anatomy/pathology vocabulary mining: tokenize reports, keep nouns and
//! adjectives, rank by frequency, then sort the survivors into the two
//! curated lists using seed and exclusion files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Report;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("word `{0}` appears in both the anatomy and pathology seed lists")]
    OverlappingSeeds(String),
    #[error("invalid vocabularies: {0}")]
    Invalid(String),
    #[error("top-k must be at least 1")]
    ZeroK,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VocabError + '_ {
    move |source| VocabError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexClass {
    Noun,
    Adjective,
    Other,
}

impl LexClass {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noun" | "n" => Some(Self::Noun),
            "adjective" | "adj" | "a" => Some(Self::Adjective),
            "other" | "o" => Some(Self::Other),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Self::Noun => "noun",
            Self::Adjective => "adjective",
            Self::Other => "other",
        }
    }
}

/// Word → lexical classes. Words are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<String, BTreeSet<LexClass>>,
}

impl Lexicon {
    pub fn insert(&mut self, word: &str, classes: impl IntoIterator<Item = LexClass>) {
        let set = self.entries.entry(word.to_lowercase()).or_default();
        set.extend(classes);
        if set.is_empty() {
            set.insert(LexClass::Other);
        }
    }

    pub fn classes(&self, word: &str) -> Option<&BTreeSet<LexClass>> {
        self.entries.get(word)
    }

    /// True for words tagged noun or adjective.
    pub fn is_content_word(&self, word: &str) -> bool {
        self.classes(word)
            .is_some_and(|c| c.contains(&LexClass::Noun) || c.contains(&LexClass::Adjective))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `word<TAB>class[,class...]` lines. Blank lines and `#` comments are skipped.
    pub fn parse(src: &str, origin: &Path) -> Result<Self, VocabError> {
        let mut lex = Self::default();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| VocabError::Parse { path: origin.to_path_buf(), line: i + 1, message };
            let (word, classes) = line.split_once('\t').ok_or_else(|| err("expected word<TAB>classes".into()))?;
            let classes = classes
                .split(',')
                .map(|c| LexClass::parse(c).ok_or_else(|| err(format!("unknown class `{}`", c.trim()))))
                .collect::<Result<Vec<_>, _>>()?;
            if word.trim().is_empty() {
                return Err(err("empty word".into()));
            }
            lex.insert(word.trim(), classes);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?, path)
    }

    pub fn to_tsv(&self) -> String {
        let sorted: BTreeMap<_, _> = self.entries.iter().collect();
        let mut out = String::new();
        for (w, classes) in sorted {
            let cs: Vec<_> = classes.iter().map(|c| c.as_str()).collect();
            let _ = writeln!(out, "{w}\t{}", cs.join(","));
        }
        out
    }
}

/// Lowercase alphabetic tokens in reading order.
///
/// Text is split on whitespace and punctuation, digits are removed from each
/// piece, and remnants shorter than two letters are discarded
/// (`"T2-weighted, 5mm"` gives `["weighted", "mm"]`).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(|piece| piece.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|w| w.chars().count() >= 2)
        .collect()
}

pub fn filter_words<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| lexicon.is_content_word(t))
        .map(str::to_owned)
        .collect()
}

/// Occurrence counts of kept words.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Self {
        Self { counts: counts.into_iter().filter(|(_, c)| *c > 0).collect() }
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, c)| (w.as_str(), *c))
    }

    fn merge(mut self, other: Self) -> Self {
        for (w, c) in other.counts {
            *self.counts.entry(w).or_default() += c;
        }
        self
    }

    /// Entries ordered by count descending, then word ascending.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// `word<TAB>count` lines in ranked order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tcount\n");
        for (w, c) in self.ranked() {
            let _ = writeln!(out, "{w}\t{c}");
        }
        out
    }
}

pub fn count_frequencies(corpus: &[Report], lexicon: &Lexicon) -> FrequencyTable {
    corpus
        .par_iter()
        .map(|r| {
            let mut t = FrequencyTable::default();
            for section in [&r.findings, &r.impression] {
                for w in filter_words(&tokenize(section), lexicon) {
                    *t.counts.entry(w).or_default() += 1;
                }
            }
            t
        })
        .reduce(FrequencyTable::default, FrequencyTable::merge)
}

/// The `k` most frequent words; ties broken lexicographically.
pub fn select_top_k(table: &FrequencyTable, k: usize) -> Result<Vec<String>, VocabError> {
    if k == 0 {
        return Err(VocabError::ZeroK);
    }
    Ok(table.ranked().into_iter().take(k).map(|(w, _)| w.to_owned()).collect())
}

/// The curated anatomy and pathology word lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub anatomy: Vec<String>,
    pub pathology: Vec<String>,
    #[serde(default)]
    pub exclusions: BTreeSet<String>,
}

impl Vocabularies {
    pub fn new(anatomy: Vec<String>, pathology: Vec<String>, exclusions: BTreeSet<String>) -> Result<Self, VocabError> {
        let v = Self { anatomy, pathology, exclusions };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), VocabError> {
        for (name, list) in [("anatomy", &self.anatomy), ("pathology", &self.pathology)] {
            let mut seen = BTreeSet::new();
            for w in list {
                if !seen.insert(w) {
                    return Err(VocabError::Invalid(format!("`{w}` repeated in {name} list")));
                }
                if self.exclusions.contains(w) {
                    return Err(VocabError::Invalid(format!("excluded word `{w}` in {name} list")));
                }
            }
        }
        if let Some(w) = self.anatomy.iter().find(|w| self.pathology.contains(w)) {
            return Err(VocabError::Invalid(format!("`{w}` in both lists")));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        let v: Self = serde_json::from_str(&raw).map_err(|e| VocabError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        v.validate()?;
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let mut s = serde_json::to_string_pretty(self).expect("vocabularies serialize");
        s.push('\n');
        fs::write(path, s).map_err(io_err(path))
    }
}

/// Result of sorting candidate words into the two lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Categorized {
    pub vocabularies: Vocabularies,
    /// Candidates that matched neither seed list.
    pub unassigned: Vec<String>,
}

pub fn categorize<S: AsRef<str>>(
    words: &[S],
    anatomy_seeds: &BTreeSet<String>,
    pathology_seeds: &BTreeSet<String>,
    exclusions: &BTreeSet<String>,
) -> Result<Categorized, VocabError> {
    if let Some(w) = anatomy_seeds.intersection(pathology_seeds).next() {
        return Err(VocabError::OverlappingSeeds(w.clone()));
    }
    let mut anatomy = Vec::new();
    let mut pathology = Vec::new();
    let mut unassigned = Vec::new();
    let mut seen = BTreeSet::new();
    for w in words.iter().map(AsRef::as_ref) {
        if exclusions.contains(w) || !seen.insert(w) {
            continue;
        }
        if anatomy_seeds.contains(w) {
            anatomy.push(w.to_owned());
        } else if pathology_seeds.contains(w) {
            pathology.push(w.to_owned());
        } else {
            unassigned.push(w.to_owned());
        }
    }
    if !unassigned.is_empty() {
        log::info!("{} candidate words matched no seed list: {}", unassigned.len(), unassigned.join(", "));
    }
    let vocabularies = Vocabularies::new(anatomy, pathology, exclusions.clone())?;
    Ok(Categorized { vocabularies, unassigned })
}

/// Reads a one-word-per-line list; blank lines and `#` comments are ignored.
pub fn load_word_list(path: &Path) -> Result<BTreeSet<String>, VocabError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// Everything `build-vocab` produces.
#[derive(Debug, Clone)]
pub struct VocabBuild {
    pub frequencies: FrequencyTable,
    pub top_words: Vec<String>,
    pub categorized: Categorized,
}

pub fn build_vocabularies(
    corpus: &[Report],
    lexicon: &Lexicon,
    top_k: usize,
    anatomy_seeds: &BTreeSet<String>,
    pathology_seeds: &BTreeSet<String>,
    exclusions: &BTreeSet<String>,
) -> Result<VocabBuild, VocabError> {
    let frequencies = count_frequencies(corpus, lexicon);
    let top_words = select_top_k(&frequencies, top_k)?;
    let categorized = categorize(&top_words, anatomy_seeds, pathology_seeds, exclusions)?;
    Ok(VocabBuild { frequencies, top_words, categorized })
}
