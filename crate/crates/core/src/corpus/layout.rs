//! Directory layout of a paired corpus:
//!
//! ```text
//! <dir>/reports.jsonl
//! <dir>/samples/<report id>.tokens.emb1       token strings as ids
//! <dir>/samples/<report id>.patches.{json,emb1,pix}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{emb1, load_reports, patches, save_reports, CorpusError, PairedSample, TokenSeq};

pub const REPORTS_FILE: &str = "reports.jsonl";
pub const SAMPLES_DIR: &str = "samples";

/// The files that make up a sidecar-style artifact rooted at one base path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarPaths {
    pub header: PathBuf,
    pub embeddings: PathBuf,
    pub pixels: PathBuf,
}

/// Resolves `foo`, `foo.json`, `foo.emb1` or `foo.pix` to the same triple.
pub fn sidecar_paths(base: &Path) -> SidecarPaths {
    let stem = match base.extension().and_then(|e| e.to_str()) {
        Some("json" | "emb1" | "pix") => base.with_extension(""),
        _ => base.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    SidecarPaths { header: with("json"), embeddings: with("emb1"), pixels: with("pix") }
}

fn tokens_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(SAMPLES_DIR).join(format!("{id}.tokens.emb1"))
}

fn patches_base(dir: &Path, id: &str) -> PathBuf {
    dir.join(SAMPLES_DIR).join(format!("{id}.patches"))
}

pub fn load_corpus(dir: &Path) -> Result<Vec<PairedSample>, CorpusError> {
    let reports = load_reports(&dir.join(REPORTS_FILE))?;
    reports
        .into_iter()
        .map(|report| {
            let (tokens, m) = emb1::read_embeddings(&tokens_path(dir, &report.id))?;
            let seq = TokenSeq::new(report.id.clone(), tokens, m)?;
            let grid = patches::read_patch_grid(&patches_base(dir, &report.id))?;
            PairedSample::new(report, seq, grid)
        })
        .collect()
}

pub fn save_corpus(dir: &Path, samples: &[PairedSample]) -> Result<(), CorpusError> {
    let sdir = dir.join(SAMPLES_DIR);
    fs::create_dir_all(&sdir).map_err(|e| CorpusError::io(&sdir, e))?;
    let reports: Vec<_> = samples.iter().map(|s| s.report.clone()).collect();
    save_reports(&dir.join(REPORTS_FILE), &reports)?;
    for s in samples {
        emb1::write_embeddings(
            &tokens_path(dir, s.id()),
            s.token_seq.tokens(),
            s.token_seq.embeddings(),
        )?;
        patches::write_patch_grid(&patches_base(dir, s.id()), &s.patch_grid)?;
    }
    Ok(())
}
