//! Seeded synthetic corpora with planted word-patch correspondences.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, emb1, CorpusError, PairedSample, Patch, PatchGrid, Report, TokenSeq};
use crate::matrix::Embeddings;
use crate::raster::{GrayImage, ImageError};
use crate::synth::{write_vq, SynthError, VqCodebook};
use crate::vocab::{tokenize, LexClass, Lexicon};

pub const ANATOMY: &[&str] = &[
    "lung", "lobe", "heart", "mediastinum", "diaphragm", "hilum", "pleura", "apex", "trachea", "aorta", "rib", "costophrenic",
];
pub const PATHOLOGY: &[&str] = &[
    "opacity", "effusion", "consolidation", "atelectasis", "pneumothorax", "edema", "nodule", "cardiomegaly",
    "infiltrate", "fracture", "emphysema", "mass",
];
const MODIFIERS: &[&str] = &["small", "mild", "moderate", "patchy", "left", "right", "bilateral", "stable"];
const EXCLUDED: &[&str] = &["left", "right"];
const FUNCTION_WORDS: &[&str] = &["there", "is", "in", "the", "of", "with", "and", "seen", "near", "noted", "findings"];

pub const PLANTS_FILE: &str = "plants.json";
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const ANATOMY_SEEDS_FILE: &str = "anatomy_seeds.txt";
pub const PATHOLOGY_SEEDS_FILE: &str = "pathology_seeds.txt";
pub const EXCLUSIONS_FILE: &str = "exclusions.txt";
pub const WORD_VECTORS_FILE: &str = "word_embeddings.emb1";
pub const VQ_BASE: &str = "vq";
pub const PRISTINE_DIR: &str = "pristine";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("invalid fixture parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureParams {
    pub pairs: usize,
    pub grid: (usize, usize),
    pub dim: usize,
    /// Distinct anatomy plus pathology words planted per report; even.
    pub planted_per_report: usize,
    /// Standard deviation of the whole perturbation vector added to planted token embeddings.
    pub noise: f64,
    pub patch_px: usize,
    pub vq_codes: usize,
    pub pristine_images: usize,
    pub pristine_size: usize,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            pairs: 8,
            grid: (4, 4),
            dim: 16,
            planted_per_report: 4,
            noise: 0.0,
            patch_px: 8,
            vq_codes: 32,
            pristine_images: 12,
            pristine_size: 192,
        }
    }
}

impl FixtureParams {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: &str| Err(FixtureError::Invalid(m.to_owned()));
        let half = self.planted_per_report / 2;
        if self.pairs == 0 || self.dim == 0 || self.patch_px == 0 {
            return bad("pairs, dim and patch_px must be positive");
        }
        if half == 0 || !self.planted_per_report.is_multiple_of(2) {
            return bad("planted_per_report must be a positive even number");
        }
        if half > ANATOMY.len() || half > PATHOLOGY.len() {
            return bad("planted_per_report exceeds the toy vocabulary");
        }
        if self.planted_per_report > self.grid.0 * self.grid.1 {
            return bad("more planted words than patches");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be a non-negative number");
        }
        if self.vq_codes < 2 {
            return bad("need at least two VQ codes");
        }
        Ok(())
    }

    /// Side of the VQ decoder block: the smallest `p` with `p² ≥ dim`.
    pub fn vq_patch_px(&self) -> usize {
        (1..).find(|p| p * p >= self.dim).unwrap()
    }
}

/// One planted correspondence: `word` in report `sample_id` is a noisy copy of
/// the patch at `patch_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    pub sample_id: String,
    pub word: String,
    pub patch_index: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantManifest {
    pub seed: u64,
    pub params: FixtureParams,
    pub plants: Vec<Plant>,
}

impl PlantManifest {
    pub fn is_planted(&self, sample_id: &str, patch_index: (usize, usize)) -> bool {
        self.plants.iter().any(|p| p.sample_id == sample_id && p.patch_index == patch_index)
    }

    pub fn is_planted_for(&self, word: &str, sample_id: &str, patch_index: (usize, usize)) -> bool {
        self.plants.iter().any(|p| p.word == word && p.sample_id == sample_id && p.patch_index == patch_index)
    }

    pub fn planted_words(&self) -> BTreeSet<&str> {
        self.plants.iter().map(|p| p.word.as_str()).collect()
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let raw = fs::read(path).map_err(|source| FixtureError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_slice(&raw).map_err(|e| FixtureError::Invalid(format!("{}: {e}", path.display())))
    }
}

/// Everything [`make_fixtures`] writes, held in memory.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub samples: Vec<PairedSample>,
    pub lexicon: Lexicon,
    pub anatomy_seeds: Vec<String>,
    pub pathology_seeds: Vec<String>,
    pub exclusions: Vec<String>,
    pub words: Vec<String>,
    pub word_vectors: Embeddings,
    pub vq: VqCodebook,
    pub pristine: Vec<GrayImage>,
    pub manifest: PlantManifest,
}

impl Fixture {
    pub fn word_vector(&self, word: &str) -> Option<&[f32]> {
        self.words.iter().position(|w| w == word).map(|i| self.word_vectors.row(i))
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| (x / n) as f32).collect();
        }
    }
}

fn box_blur(img: &GrayImage, radius: usize) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;
    let pass = |src: &GrayImage, horizontal: bool| {
        GrayImage::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for d in -r..=r {
                let (sx, sy) = if horizontal {
                    ((x as isize + d).clamp(0, w as isize - 1) as usize, y)
                } else {
                    (x, (y as isize + d).clamp(0, h as isize - 1) as usize)
                };
                acc += src.get(sx, sy);
            }
            acc / (2 * r + 1) as f64
        })
    };
    pass(&pass(img, true), false)
}

/// Smooth structure with soft-edged blobs and faint fine-grained texture,
/// rescaled into `[0.1, 0.9]`.
pub fn pristine_texture(seed: u64, width: usize, height: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let waves: Vec<[f64; 4]> = (0..5)
        .map(|_| {
            [
                rng.random_range(0.3..1.0),
                rng.random_range(-3.0..3.0) / width as f64,
                rng.random_range(-3.0..3.0) / height as f64,
                rng.random_range(0.0..tau),
            ]
        })
        .collect();
    let blobs: Vec<[f64; 6]> = (0..rng.random_range(4..9))
        .map(|_| {
            [
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(0.08..0.3) * width as f64,
                rng.random_range(0.08..0.3) * height as f64,
                rng.random_range(-1.2..1.2),
                rng.random_range(1.0..3.0),
            ]
        })
        .collect();
    let grain: Vec<f64> = (0..width * height).map(|_| StandardNormal.sample(&mut rng)).collect();
    let grain = box_blur(&GrayImage::from_vec(width, height, grain).expect("sized"), 1);
    let raw = GrayImage::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut v: f64 = waves.iter().map(|w| w[0] * (tau * (w[1] * xf + w[2] * yf) + w[3]).sin()).sum();
        for b in &blobs {
            let r = (((xf - b[0]) / b[2]).powi(2) + ((yf - b[1]) / b[3]).powi(2)).sqrt();
            let edge = (r - 1.0) * b[2].min(b[3]) / b[5];
            v += b[4] / (1.0 + edge.exp());
        }
        v + 0.15 * grain.get(x, y)
    });
    let (lo, hi) = raw.pixels().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    raw.map(|v| 0.1 + 0.8 * (v - lo) / span)
}

fn toy_lexicon() -> Lexicon {
    let mut lex = Lexicon::default();
    for w in ANATOMY.iter().chain(PATHOLOGY) {
        lex.insert(w, [LexClass::Noun]);
    }
    for w in MODIFIERS {
        lex.insert(w, [LexClass::Adjective]);
    }
    for w in FUNCTION_WORDS {
        lex.insert(w, [LexClass::Other]);
    }
    lex
}

fn compose_findings(rng: &mut ChaCha8Rng, anatomy: &[&str], pathology: &[&str]) -> String {
    anatomy
        .iter()
        .zip(pathology)
        .enumerate()
        .map(|(i, (a, p))| {
            let m = MODIFIERS[rng.random_range(0..MODIFIERS.len())];
            let s = match (i + rng.random_range(0..3)) % 3 {
                0 => format!("There is {m} {p} in the {a}."),
                1 => format!("{m} {p} is seen near the {a}."),
                _ => format!("The {a} with {m} {p} is noted."),
            };
            let mut c = s.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect::<String>()).unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Builds the whole fixture in memory.
pub fn generate(seed: u64, params: &FixtureParams) -> Result<Fixture, FixtureError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lexicon = toy_lexicon();
    let words: Vec<String> = ANATOMY
        .iter()
        .chain(PATHOLOGY)
        .chain(MODIFIERS)
        .chain(FUNCTION_WORDS)
        .map(|w| w.to_string())
        .collect();
    let mut word_vectors = Embeddings::empty(params.dim);
    for _ in &words {
        word_vectors.push_row(&unit_vector(&mut rng, params.dim));
    }
    let vector_of = |w: &str| word_vectors.row(words.iter().position(|x| x == w).expect("toy word")).to_vec();

    let (rows, cols) = params.grid;
    let half = params.planted_per_report / 2;
    let side = params.patch_px;
    let mut samples = Vec::with_capacity(params.pairs);
    let mut plants = Vec::new();
    for s in 0..params.pairs {
        let id = format!("s{s:04}");
        let anatomy: Vec<&str> = sample(&mut rng, ANATOMY.len(), half).iter().map(|i| ANATOMY[i]).collect();
        let pathology: Vec<&str> = sample(&mut rng, PATHOLOGY.len(), half).iter().map(|i| PATHOLOGY[i]).collect();
        let findings = compose_findings(&mut rng, &anatomy, &pathology);
        let report = Report::new(id.clone(), findings, "Stable findings.")?;

        let planted_words: Vec<&str> = anatomy.iter().chain(&pathology).copied().collect();
        let positions = sample(&mut rng, rows * cols, planted_words.len()).into_vec();
        let mut embeddings: Vec<Vec<f32>> = (0..rows * cols).map(|_| unit_vector(&mut rng, params.dim)).collect();
        for (w, &pos) in planted_words.iter().zip(&positions) {
            embeddings[pos] = vector_of(w);
            plants.push(Plant { sample_id: id.clone(), word: w.to_string(), patch_index: (pos / cols, pos % cols) });
        }
        let texture = pristine_texture(rng.random(), cols * side, rows * side);
        let patches = embeddings
            .into_iter()
            .enumerate()
            .map(|(k, e)| {
                let (r, c) = (k / cols, k % cols);
                let px = (0..side * side)
                    .map(|i| texture.get(c * side + i % side, r * side + i / side) as f32)
                    .collect();
                Patch::new((r, c), e, Some(px))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let grid = PatchGrid::new(id.clone(), patches, (rows, cols))?;

        let tokens = tokenize(&report.findings);
        let scale = params.noise / (params.dim as f64).sqrt();
        let mut m = Embeddings::empty(params.dim);
        for t in &tokens {
            let base = vector_of(t);
            let row: Vec<f32> = if planted_words.contains(&t.as_str()) && params.noise > 0.0 {
                base.iter().map(|&b| (f64::from(b) + scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)) as f32).collect()
            } else {
                base
            };
            m.push_row(&row);
        }
        let seq = TokenSeq::new(id.clone(), tokens, m)?;
        samples.push(PairedSample::new(report, seq, grid)?);
    }

    let mut codes = Embeddings::empty(params.dim);
    for _ in 0..params.vq_codes {
        let c: Vec<f32> = (0..params.dim).map(|_| rng.random::<f32>()).collect();
        codes.push_row(&c);
    }
    let vq = VqCodebook::new(codes, params.vq_patch_px())?;

    let pristine =
        (0..params.pristine_images).map(|_| pristine_texture(rng.random(), params.pristine_size, params.pristine_size)).collect();

    Ok(Fixture {
        samples,
        lexicon,
        anatomy_seeds: ANATOMY.iter().map(|w| w.to_string()).collect(),
        pathology_seeds: PATHOLOGY.iter().map(|w| w.to_string()).collect(),
        exclusions: EXCLUDED.iter().map(|w| w.to_string()).collect(),
        words,
        word_vectors,
        vq,
        pristine,
        manifest: PlantManifest { seed, params: *params, plants },
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), FixtureError> {
    fs::write(path, contents).map_err(|source| FixtureError::Io { path: path.to_path_buf(), source })
}

fn word_list(words: &[String]) -> String {
    words.iter().map(|w| format!("{w}\n")).collect()
}

/// Generates a fixture and writes it under `dir`.
pub fn make_fixtures(dir: &Path, seed: u64, params: &FixtureParams) -> Result<Fixture, FixtureError> {
    let fx = generate(seed, params)?;
    let pristine_dir = dir.join(PRISTINE_DIR);
    fs::create_dir_all(&pristine_dir).map_err(|source| FixtureError::Io { path: pristine_dir.clone(), source })?;
    corpus::save_corpus(dir, &fx.samples)?;
    write(&dir.join(LEXICON_FILE), fx.lexicon.to_tsv())?;
    write(&dir.join(ANATOMY_SEEDS_FILE), word_list(&fx.anatomy_seeds))?;
    write(&dir.join(PATHOLOGY_SEEDS_FILE), word_list(&fx.pathology_seeds))?;
    write(&dir.join(EXCLUSIONS_FILE), word_list(&fx.exclusions))?;
    emb1::write_embeddings(&dir.join(WORD_VECTORS_FILE), &fx.words, &fx.word_vectors)?;
    write_vq(&dir.join(VQ_BASE), &fx.vq)?;
    for (i, im) in fx.pristine.iter().enumerate() {
        im.save_pgm(&pristine_dir.join(format!("pristine_{i:03}.pgm")))?;
    }
    let mut manifest = serde_json::to_string_pretty(&fx.manifest).expect("manifest serializes");
    manifest.push('\n');
    write(&dir.join(PLANTS_FILE), manifest)?;
    Ok(fx)
}
