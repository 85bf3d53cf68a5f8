//! Codebook files: `<base>.json` header with the provenance table,
//! `<base>.emb1` keypatch embeddings and optional `<base>.pix` pixels.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlignError, AlignParams, Keypatch, Provenance, VisualCodebook};
use crate::corpus::{emb1, sidecar_paths, CorpusError, Patch};
use crate::matrix::Embeddings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypatchRecord {
    pub source_image_id: String,
    pub index: (usize, usize),
    #[serde(flatten)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookHeader {
    pub params: AlignParams,
    pub dim: usize,
    pub count: usize,
    pub patch_px: Option<usize>,
    pub provenance: Vec<KeypatchRecord>,
}

pub fn write_codebook(base: &Path, codebook: &VisualCodebook) -> Result<(), AlignError> {
    let paths = sidecar_paths(base);
    let patch_px = codebook.patch_px();
    let header = CodebookHeader {
        params: codebook.params,
        dim: codebook.dim,
        count: codebook.len(),
        patch_px,
        provenance: codebook
            .keypatches
            .iter()
            .map(|k| KeypatchRecord {
                source_image_id: k.source_image_id.clone(),
                index: k.patch.index,
                provenance: k.provenance.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&header).expect("codebook header serializes");
    fs::write(&paths.header, json).map_err(|e| CorpusError::io(&paths.header, e))?;

    let ids: Vec<String> = codebook
        .keypatches
        .iter()
        .map(|k| format!("{}/{},{}", k.source_image_id, k.patch.index.0, k.patch.index.1))
        .collect();
    let mut m = Embeddings::empty(codebook.dim);
    for k in &codebook.keypatches {
        m.push_row(&k.patch.embedding);
    }
    emb1::write_embeddings(&paths.embeddings, &ids, &m)?;
    if patch_px.is_some() {
        let bytes = crate::corpus::encode_pixels_for(codebook.keypatches.iter().map(|k| k.patch.pixels.as_deref().unwrap()));
        fs::write(&paths.pixels, bytes).map_err(|e| CorpusError::io(&paths.pixels, e))?;
    }
    Ok(())
}

pub fn read_codebook(base: &Path) -> Result<VisualCodebook, AlignError> {
    let paths = sidecar_paths(base);
    let raw = fs::read(&paths.header).map_err(|e| CorpusError::io(&paths.header, e))?;
    let header: CodebookHeader = serde_json::from_slice(&raw)
        .map_err(|e| CorpusError::Format(format!("{}: {e}", paths.header.display())))?;
    header.params.validate()?;
    let (_, m) = emb1::read_embeddings(&paths.embeddings)?;
    if m.rows() != header.count || header.provenance.len() != header.count || m.dim() != header.dim {
        return Err(CorpusError::Format(format!(
            "codebook header says {}×{} with {} provenance rows, embeddings are {}×{}",
            header.count,
            header.dim,
            header.provenance.len(),
            m.rows(),
            m.dim()
        ))
        .into());
    }
    let pixels = match header.patch_px {
        Some(p) if paths.pixels.exists() => {
            let bytes = fs::read(&paths.pixels).map_err(|e| CorpusError::io(&paths.pixels, e))?;
            Some(crate::corpus::decode_pixels_for(&bytes, header.count, p)?)
        }
        _ => None,
    };
    let keypatches = header
        .provenance
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let px = pixels.as_ref().map(|all| all[i].clone());
            Ok(Keypatch {
                patch: Patch::new(rec.index, m.row(i).to_vec(), px)?,
                source_image_id: rec.source_image_id,
                provenance: rec.provenance,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Ok(VisualCodebook { keypatches, params: header.params, dim: header.dim })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codebook_file_round_trip() {
        let kp = |i: usize, px: Option<Vec<f32>>| Keypatch {
            patch: Patch::new((i, 1), vec![0.6, 0.8], px).unwrap(),
            source_image_id: format!("img{i}"),
            provenance: Provenance {
                pair_rank: i,
                source_report_id: format!("r{i}"),
                token: "heart".into(),
                token_index: 3,
                score: 0.75,
            },
        };
        let cb = VisualCodebook {
            keypatches: vec![kp(0, Some(vec![0.5; 4])), kp(1, Some(vec![0.25; 4]))],
            params: AlignParams::new(2, 1, 3).unwrap(),
            dim: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("cb");
        write_codebook(&base, &cb).unwrap();
        assert_eq!(read_codebook(&dir.path().join("cb.json")).unwrap(), cb);
    }
}
