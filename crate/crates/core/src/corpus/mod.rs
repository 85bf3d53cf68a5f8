//! Reports, token sequences, patch grids and their on-disk formats.

pub mod emb1;
mod layout;
mod patches;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Embeddings;

pub use emb1::{read_embeddings, write_embeddings};
pub use layout::{load_corpus, save_corpus, sidecar_paths, SidecarPaths};
pub use patches::{read_patch_grid, write_patch_grid, PatchGridHeader};
pub(crate) use patches::{decode_pixels as decode_pixels_for, encode_pixels as encode_pixels_for};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate report id `{0}`")]
    DuplicateId(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: need {expected} bytes, file has {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{ids} ids for {rows} matrix rows")]
    LengthMismatch { ids: usize, rows: usize },
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Self::Invalid { what, message: message.into() }
    }
}

/// A radiology report with its two free-text sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    #[serde(default)]
    pub findings: String,
    #[serde(default)]
    pub impression: String,
}

impl Report {
    pub fn new(
        id: impl Into<String>,
        findings: impl Into<String>,
        impression: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let r = Self { id: id.into(), findings: findings.into(), impression: impression.into() };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::invalid("report", "empty id"));
        }
        if self.findings.trim().is_empty() && self.impression.trim().is_empty() {
            return Err(CorpusError::invalid(
                "report",
                format!("`{}` has neither findings nor impression", self.id),
            ));
        }
        Ok(())
    }

    /// Findings followed by impression, the text the vocabulary miner reads.
    pub fn text(&self) -> String {
        match (self.findings.is_empty(), self.impression.is_empty()) {
            (false, false) => format!("{} {}", self.findings, self.impression),
            (false, true) => self.findings.clone(),
            _ => self.impression.clone(),
        }
    }
}

/// Reads a line-delimited JSON report corpus, preserving file order.
pub fn load_reports(path: &Path) -> Result<Vec<Report>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_reports(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

pub fn parse_reports(reader: impl BufRead) -> Result<Vec<Report>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::io(Path::new("<reports>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let report: Report = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedLine { line: line_no, message: e.to_string() })?;
        report.validate().map_err(|e| CorpusError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(report.id.clone()) {
            return Err(CorpusError::DuplicateId(report.id));
        }
        out.push(report);
    }
    Ok(out)
}

pub fn save_reports(path: &Path, reports: &[Report]) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    for r in reports {
        serde_json::to_writer(&mut buf, r).expect("report serializes");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    f.write_all(&buf).map_err(|e| CorpusError::io(path, e))
}

/// A tokenized report: `K` tokens with one embedding row each.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSeq {
    pub report_id: String,
    tokens: Vec<String>,
    embeddings: Embeddings,
}

impl TokenSeq {
    pub fn new(
        report_id: impl Into<String>,
        tokens: Vec<String>,
        embeddings: Embeddings,
    ) -> Result<Self, CorpusError> {
        let report_id = report_id.into();
        if tokens.is_empty() {
            return Err(CorpusError::invalid("token sequence", format!("`{report_id}` has no tokens")));
        }
        if tokens.len() != embeddings.rows() {
            return Err(CorpusError::LengthMismatch { ids: tokens.len(), rows: embeddings.rows() });
        }
        if !embeddings.all_finite() {
            return Err(CorpusError::invalid(
                "token sequence",
                format!("`{report_id}` has non-finite embedding components"),
            ));
        }
        Ok(Self { report_id, tokens, embeddings })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn embeddings(&self) -> &Embeddings {
        &self.embeddings
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn embedding(&self, i: usize) -> &[f32] {
        self.embeddings.row(i)
    }
}

/// One image patch: grid position, feature vector and optional pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub index: (usize, usize),
    pub embedding: Vec<f32>,
    /// `p × p` grayscale block, row-major, values in `[0, 1]`.
    pub pixels: Option<Vec<f32>>,
}

impl Patch {
    pub fn new(index: (usize, usize), embedding: Vec<f32>, pixels: Option<Vec<f32>>) -> Result<Self, CorpusError> {
        let p = Self { index, embedding, pixels };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if !self.embedding.iter().all(|v| v.is_finite()) {
            return Err(CorpusError::invalid("patch", format!("{:?}: non-finite embedding", self.index)));
        }
        if let Some(px) = &self.pixels {
            if !px.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(CorpusError::invalid("patch", format!("{:?}: pixel outside [0,1]", self.index)));
            }
        }
        Ok(())
    }
}

/// The patches of one image, covering a `rows × cols` grid exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub image_id: String,
    patches: Vec<Patch>,
    grid_shape: (usize, usize),
}

impl PatchGrid {
    pub fn new(image_id: impl Into<String>, patches: Vec<Patch>, grid_shape: (usize, usize)) -> Result<Self, CorpusError> {
        let image_id = image_id.into();
        let (rows, cols) = grid_shape;
        if patches.len() != rows * cols {
            return Err(CorpusError::invalid(
                "patch grid",
                format!("`{image_id}`: {} patches for a {rows}×{cols} grid", patches.len()),
            ));
        }
        let mut seen = vec![false; rows * cols];
        let dim = patches.first().map_or(0, |p| p.embedding.len());
        for p in &patches {
            p.validate()?;
            let (r, c) = p.index;
            if r >= rows || c >= cols || std::mem::replace(&mut seen[r * cols + c], true) {
                return Err(CorpusError::invalid(
                    "patch grid",
                    format!("`{image_id}`: patch index {:?} out of range or repeated", p.index),
                ));
            }
            if p.embedding.len() != dim {
                return Err(CorpusError::invalid("patch grid", format!("`{image_id}`: ragged embeddings")));
            }
        }
        Ok(Self { image_id, patches, grid_shape })
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        self.grid_shape
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.patches.first().map_or(0, |p| p.embedding.len())
    }

    /// Side length of the pixel blocks, if every patch carries pixels.
    pub fn patch_px(&self) -> Option<usize> {
        let first = self.patches.first()?.pixels.as_ref()?;
        let side = (first.len() as f64).sqrt().round() as usize;
        (side * side == first.len()
            && self.patches.iter().all(|p| p.pixels.as_ref().is_some_and(|px| px.len() == first.len())))
        .then_some(side)
    }
}

/// A report, its tokens, and the patches of the image it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub report: Report,
    pub token_seq: TokenSeq,
    pub patch_grid: PatchGrid,
}

impl PairedSample {
    pub fn new(report: Report, token_seq: TokenSeq, patch_grid: PatchGrid) -> Result<Self, CorpusError> {
        if token_seq.report_id != report.id {
            return Err(CorpusError::invalid(
                "paired sample",
                format!("token sequence belongs to `{}`, report is `{}`", token_seq.report_id, report.id),
            ));
        }
        if token_seq.dim() != patch_grid.dim() {
            return Err(CorpusError::invalid(
                "paired sample",
                format!(
                    "`{}`: token dim {} vs patch dim {}",
                    report.id,
                    token_seq.dim(),
                    patch_grid.dim()
                ),
            ));
        }
        Ok(Self { report, token_seq, patch_grid })
    }

    pub fn id(&self) -> &str {
        &self.report.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<Report>, CorpusError> {
        parse_reports(s.as_bytes())
    }

    #[test]
    fn single_record() {
        let got = parse(r#"{"id":"r1","findings":"opacity near heart","impression":""}"#).unwrap();
        assert_eq!(got, vec![Report::new("r1", "opacity near heart", "").unwrap()]);
    }

    #[test]
    fn empty_input() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_rejected() {
        let src = "{\"id\":\"r1\",\"findings\":\"a\"}\n{\"id\":\"r1\",\"findings\":\"b\"}\n";
        match parse(src) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "r1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_is_numbered() {
        let src = "{\"id\":\"a\",\"findings\":\"x\"}\n{not json\n";
        match parse(src) {
            Err(CorpusError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let empty_sections = "{\"id\":\"a\",\"findings\":\"\",\"impression\":\" \"}";
        assert!(matches!(parse(empty_sections), Err(CorpusError::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn order_preserved() {
        let src: String = ["c", "a", "b"]
            .iter()
            .map(|id| format!("{{\"id\":\"{id}\",\"impression\":\"x\"}}\n"))
            .collect();
        let ids: Vec<_> = parse(&src).unwrap().into_iter().map(|r| r.id).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn grid_must_be_a_bijection() {
        let p = |r, c| Patch::new((r, c), vec![1.0], None).unwrap();
        assert!(PatchGrid::new("g", vec![p(0, 0), p(0, 1)], (1, 2)).is_ok());
        assert!(PatchGrid::new("g", vec![p(0, 0), p(0, 0)], (1, 2)).is_err());
        assert!(PatchGrid::new("g", vec![p(0, 0)], (1, 2)).is_err());
        assert!(PatchGrid::new("g", vec![p(0, 0), p(1, 0)], (1, 2)).is_err());
    }

    #[test]
    fn pixels_must_be_unit_range() {
        assert!(Patch::new((0, 0), vec![0.0], Some(vec![0.5, 1.2, 0.0, 0.0])).is_err());
        assert!(Patch::new((0, 0), vec![f32::NAN], None).is_err());
    }

    #[test]
    fn token_seq_invariants() {
        let e = Embeddings::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(TokenSeq::new("r", vec![], Embeddings::empty(2)).is_err());
        assert!(TokenSeq::new("r", vec!["a".into(), "b".into()], e.clone()).is_err());
        let bad = Embeddings::from_rows(&[vec![f32::INFINITY, 0.0]]).unwrap();
        assert!(TokenSeq::new("r", vec!["a".into()], bad).is_err());
        assert!(TokenSeq::new("r", vec!["a".into()], e).is_ok());
    }
}
