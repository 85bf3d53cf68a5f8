//! PatchGrid files: `<base>.json` header, `<base>.emb1` embeddings and an
//! optional `<base>.pix` raw pixel payload (`n · p · p` little-endian f32).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{emb1, sidecar_paths, CorpusError, Patch, PatchGrid};
use crate::matrix::Embeddings;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGridHeader {
    pub image_id: String,
    pub rows: usize,
    pub cols: usize,
    pub patch_px: Option<usize>,
}

pub(crate) fn encode_pixels(blocks: impl IntoIterator<Item = impl AsRef<[f32]>>) -> Vec<u8> {
    blocks
        .into_iter()
        .flat_map(|b| b.as_ref().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<_>>())
        .collect()
}

pub(crate) fn decode_pixels(bytes: &[u8], n: usize, p: usize) -> Result<Vec<Vec<f32>>, CorpusError> {
    let expected = n * p * p * 4;
    if bytes.len() != expected {
        return Err(CorpusError::Truncated { expected, actual: bytes.len() });
    }
    Ok(bytes
        .chunks_exact(p * p * 4)
        .map(|block| block.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        .collect())
}

fn index_id((r, c): (usize, usize)) -> String {
    format!("{r},{c}")
}

fn parse_index_id(id: &str) -> Option<(usize, usize)> {
    let (r, c) = id.split_once(',')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

pub fn write_patch_grid(base: &Path, grid: &PatchGrid) -> Result<(), CorpusError> {
    let paths = sidecar_paths(base);
    let (rows, cols) = grid.grid_shape();
    let patch_px = grid.patch_px();
    let header = PatchGridHeader { image_id: grid.image_id.clone(), rows, cols, patch_px };
    let json = serde_json::to_vec_pretty(&header).expect("header serializes");
    fs::write(&paths.header, json).map_err(|e| CorpusError::io(&paths.header, e))?;

    let ids: Vec<String> = grid.patches().iter().map(|p| index_id(p.index)).collect();
    let mut m = Embeddings::empty(grid.dim());
    for p in grid.patches() {
        m.push_row(&p.embedding);
    }
    emb1::write_embeddings(&paths.embeddings, &ids, &m)?;

    if patch_px.is_some() {
        let bytes = encode_pixels(grid.patches().iter().map(|p| p.pixels.as_deref().unwrap()));
        fs::write(&paths.pixels, bytes).map_err(|e| CorpusError::io(&paths.pixels, e))?;
    }
    Ok(())
}

pub fn read_patch_grid(base: &Path) -> Result<PatchGrid, CorpusError> {
    let paths = sidecar_paths(base);
    let raw = fs::read(&paths.header).map_err(|e| CorpusError::io(&paths.header, e))?;
    let header: PatchGridHeader = serde_json::from_slice(&raw)
        .map_err(|e| CorpusError::Format(format!("{}: {e}", paths.header.display())))?;
    let (ids, m) = emb1::read_embeddings(&paths.embeddings)?;

    let pixels = match header.patch_px {
        Some(p) if paths.pixels.exists() => {
            let bytes = fs::read(&paths.pixels).map_err(|e| CorpusError::io(&paths.pixels, e))?;
            Some(decode_pixels(&bytes, ids.len(), p)?)
        }
        _ => None,
    };

    let mut patches = Vec::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        let index = parse_index_id(id)
            .ok_or_else(|| CorpusError::Format(format!("patch id `{id}` is not `row,col`")))?;
        let px = pixels.as_ref().map(|all| all[i].clone());
        patches.push(Patch::new(index, m.row(i).to_vec(), px)?);
    }
    PatchGrid::new(header.image_id, patches, (header.rows, header.cols))
}
