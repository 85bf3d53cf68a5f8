use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use kpa_core::corpus::emb1;
use kpa_core::metrics::{self, fit_gaussian_rows, frechet_distance, NiqeConfig, NiqeModel};
use kpa_core::raster::GrayImage;
use kpa_core::Embeddings;
use rayon::prelude::*;

use crate::commands::{ensure_parent, require_dir, require_file};
use crate::EvalCommand;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "pnm", "ppm", "png"];

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    require_dir(dir, "image directory")?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().and_then(|e| e.to_str()).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    ensure!(!files.is_empty(), "no images in {}", dir.display());
    Ok(files)
}

fn load_images(files: &[PathBuf]) -> Result<Vec<GrayImage>> {
    files.par_iter().map(|p| GrayImage::load(p).map_err(Into::into)).collect()
}

fn stats(path: &Path) -> Result<(usize, metrics::GaussianStats)> {
    require_file(path, "feature file")?;
    let (_, m) = emb1::read_embeddings(path)?;
    let rows: Vec<Vec<f64>> = m.iter_rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
    let g = fit_gaussian_rows(&rows).with_context(|| format!("fitting {}", path.display()))?;
    Ok((m.rows(), g))
}

fn name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

pub(crate) fn run(cmd: &EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Fid { real, synth } => {
            let (nr, a) = stats(real)?;
            let (ns, b) = stats(synth)?;
            let d = frechet_distance(&a, &b)?;
            println!("metric\treal_n\tsynth_n\tdim\tvalue");
            println!("FID\t{nr}\t{ns}\t{}\t{d:.6}", a.dim());
        }
        EvalCommand::Niqe { model, images } => {
            require_file(model, "NIQE model")?;
            let model = NiqeModel::load(model).with_context(|| format!("loading {}", model.display()))?;
            let files = image_files(images)?;
            let imgs = load_images(&files)?;
            let scores = imgs
                .par_iter()
                .map(|im| metrics::niqe_score(im, &model))
                .collect::<Result<Vec<_>, _>>()?;
            println!("image\tNIQE");
            for (f, s) in files.iter().zip(&scores) {
                println!("{}\t{s:.6}", name(f));
            }
            println!("mean\t{:.6}", scores.iter().sum::<f64>() / scores.len() as f64);
        }
        EvalCommand::NiqeFit { pristine, out, patch_size, sharpness } => {
            let cfg = NiqeConfig { patch_size: *patch_size, sharpness_fraction: *sharpness, ..NiqeConfig::default() };
            cfg.validate()?;
            let imgs = load_images(&image_files(pristine)?)?;
            let model = metrics::fit_niqe_model(&imgs, &cfg)?;
            ensure_parent(out)?;
            model.save(out).with_context(|| format!("writing {}", out.display()))?;
            println!("images\tfeatures\tregularized");
            println!("{}\t{}\t{}", model.images, model.dim(), model.regularized);
        }
        EvalCommand::Features { images, out, cells } => {
            let files = image_files(images)?;
            let imgs = load_images(&files)?;
            let feats = imgs
                .par_iter()
                .map(|im| metrics::grid_statistics(im, *cells))
                .collect::<Result<Vec<_>, _>>()?;
            let rows: Vec<Vec<f32>> = feats.iter().map(|f| f.iter().map(|&v| v as f32).collect()).collect();
            let m = Embeddings::from_rows(&rows).context("feature rows differ in length")?;
            let ids: Vec<String> = files.iter().map(|f| name(f)).collect();
            ensure_parent(out)?;
            emb1::write_embeddings(out, &ids, &m)?;
        }
    }
    Ok(())
}
