use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use kpa_core::align::{self, compute_sw, extract_keypatches, AlignParams, TokenSelections, VisualCodebook};
use kpa_core::corpus::{self, emb1, TokenSeq};
use kpa_core::fixtures::{self, FixtureParams};
use kpa_core::prompt::{
    generate_prompt, sample_words, FallbackClient, GenerateOptions, GeneratedPrompt, HttpLlmClient, HttpLlmConfig,
    LlmClient, PromptSpec, WordSource,
};
use kpa_core::synth::{
    self, HashedTextEncoder, HttpImageClient, ImageTokenClient, Projection, StubImageClient, SynthParams,
    TableTextEncoder, TextEncoder,
};
use kpa_core::vocab::{build_vocabularies, load_word_list, tokenize, Lexicon, Vocabularies};
use serde::{Deserialize, Serialize};

use crate::{
    BuildCodebookArgs, BuildVocabArgs, GenPromptsArgs, ImageClientChoice, LlmChoice, MakeFixturesArgs, RetrieveArgs,
    SourceChoice, SynthesizeArgs,
};

pub(crate) fn require_file(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_file(), "{what} `{}` does not exist or is not a file", path.display());
    Ok(())
}

pub(crate) fn require_dir(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_dir(), "{what} `{}` does not exist or is not a directory", path.display());
    Ok(())
}

/// Checks that the sidecar header of a base path exists.
fn require_base(base: &Path, what: &str) -> Result<()> {
    require_file(&corpus::sidecar_paths(base).header, what)
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(rows)
}

pub(crate) fn build_vocab(a: &BuildVocabArgs) -> Result<()> {
    require_file(&a.reports, "reports")?;
    require_file(&a.lexicon, "lexicon")?;
    require_file(&a.anatomy_seeds, "anatomy seed list")?;
    require_file(&a.pathology_seeds, "pathology seed list")?;
    if let Some(p) = &a.exclusions {
        require_file(p, "exclusion list")?;
    }
    let reports = corpus::load_reports(&a.reports)?;
    let lexicon = Lexicon::load(&a.lexicon)?;
    let anatomy = load_word_list(&a.anatomy_seeds)?;
    let pathology = load_word_list(&a.pathology_seeds)?;
    let exclusions = a.exclusions.as_deref().map(load_word_list).transpose()?.unwrap_or_default();
    let built = build_vocabularies(&reports, &lexicon, a.top_k, &anatomy, &pathology, &exclusions)?;
    ensure_parent(&a.out)?;
    built.categorized.vocabularies.save(&a.out)?;
    if let Some(p) = &a.freq_out {
        ensure_parent(p)?;
        fs::write(p, built.frequencies.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
    }
    let v = &built.categorized.vocabularies;
    log::info!(
        "{} reports, {} distinct content words; kept {} anatomy and {} pathology words",
        reports.len(),
        built.frequencies.len(),
        v.anatomy.len(),
        v.pathology.len()
    );
    Ok(())
}

/// One line of a prompts file.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct PromptRecord {
    pub id: String,
    pub seed: u64,
    pub requested: PromptSpec,
    #[serde(flatten)]
    pub prompt: GeneratedPrompt,
}

/// Seeds of consecutive prompts are spaced so that retry seeds never collide.
const PROMPT_SEED_STRIDE: u64 = 1 << 8;

pub(crate) fn gen_prompts(a: &GenPromptsArgs, seed: u64) -> Result<()> {
    require_file(&a.vocab, "vocabulary")?;
    let vocab = Vocabularies::load(&a.vocab)?;
    let client: Box<dyn LlmClient> = match a.llm {
        LlmChoice::Fallback => Box::new(FallbackClient),
        LlmChoice::Http => Box::new(HttpLlmClient::new(HttpLlmConfig::from_env(a.model.clone())?)),
    };
    let opts = GenerateOptions {
        source: match a.word_source {
            SourceChoice::Sampled => WordSource::Sampled,
            SourceChoice::Vocabulary => WordSource::Vocabulary,
        },
        max_retries: a.max_retries,
        max_tokens: a.max_tokens,
        temperature: a.temperature,
    };
    let mut rows = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let s = seed.wrapping_add(i as u64 * PROMPT_SEED_STRIDE);
        let spec = sample_words(&vocab, a.anatomy, a.pathology, s)?;
        let prompt = generate_prompt(&spec, &vocab, client.as_ref(), &opts).with_context(|| format!("prompt {i}"))?;
        rows.push(PromptRecord { id: format!("p{i:04}"), seed: s, requested: spec, prompt });
    }
    write_jsonl(&a.out, &rows)
}

pub(crate) fn build_codebook(a: &BuildCodebookArgs) -> Result<()> {
    require_dir(&a.corpus, "corpus directory")?;
    let params = AlignParams::new(a.kappa1, a.kappa2, a.kappa3)?;
    let samples = corpus::load_corpus(&a.corpus)?;
    let cb = align::build_codebook(&samples, params)?;
    ensure_parent(&a.out)?;
    align::write_codebook(&a.out, &cb)?;
    log::info!("{} keypatches from {} pairs", cb.len(), samples.len());
    Ok(())
}

fn load_encoder(path: Option<&Path>, dim: usize) -> Result<Box<dyn TextEncoder>> {
    match path {
        Some(p) => {
            require_file(p, "encoder table")?;
            let enc = TableTextEncoder::load(p)?;
            ensure!(enc.dim() == dim, "encoder dimension {} does not match codebook dimension {dim}", enc.dim());
            Ok(Box::new(enc))
        }
        None => {
            log::info!("no --encoder given; using hashed word vectors");
            Ok(Box::new(HashedTextEncoder { dim }))
        }
    }
}

#[derive(Debug, Serialize)]
struct RetrievedPatch<'a> {
    keypatch: usize,
    source_image_id: &'a str,
    patch_index: (usize, usize),
}

#[derive(Debug, Serialize)]
struct RetrievalRecord<'a> {
    id: &'a str,
    tokens: Vec<String>,
    per_token: Vec<TokenSelections>,
    flattened: Vec<RetrievedPatch<'a>>,
}

fn kappa3_or_stored(kappa3: Option<usize>, cb: &VisualCodebook) -> Result<usize> {
    let k = kappa3.unwrap_or(cb.params.kappa3);
    ensure!(k > 0, "--kappa3 must be positive");
    Ok(k)
}

pub(crate) fn retrieve(a: &RetrieveArgs) -> Result<()> {
    require_base(&a.codebook, "codebook")?;
    require_file(&a.prompts, "prompts")?;
    let cb = align::read_codebook(&a.codebook)?;
    let kappa3 = kappa3_or_stored(a.kappa3, &cb)?;
    let encoder = load_encoder(a.encoder.encoder.as_deref(), cb.dim)?;
    let prompts: Vec<PromptRecord> = read_jsonl(&a.prompts)?;
    let mut lines = Vec::with_capacity(prompts.len());
    for p in &prompts {
        let tokens = tokenize(&p.prompt.findings);
        if tokens.is_empty() {
            bail!("prompt {} has no tokens", p.id);
        }
        let seq = TokenSeq::new(p.id.clone(), tokens.clone(), encoder.encode(&tokens)?)?;
        let result = extract_keypatches(&compute_sw(&cb, &seq)?, kappa3)?;
        let flattened = result
            .flattened
            .iter()
            .map(|&k| RetrievedPatch {
                keypatch: k,
                source_image_id: &cb.keypatches[k].source_image_id,
                patch_index: cb.keypatches[k].patch.index,
            })
            .collect();
        let rec = RetrievalRecord { id: &p.id, tokens, per_token: result.per_token, flattened };
        lines.push(serde_json::to_string(&rec)?);
    }
    ensure_parent(&a.out)?;
    let mut f = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

pub(crate) fn synthesize(a: &SynthesizeArgs, seed: u64) -> Result<()> {
    require_base(&a.codebook, "codebook")?;
    require_base(&a.vq, "VQ codebook")?;
    require_file(&a.prompts, "prompts")?;
    if let Some(p) = &a.projection {
        require_file(p, "projection")?;
    }
    let cb = align::read_codebook(&a.codebook)?;
    let vq = synth::read_vq(&a.vq)?;
    let encoder = load_encoder(a.encoder.encoder.as_deref(), cb.dim)?;
    let projection = match &a.projection {
        Some(p) => Projection::Linear(emb1::read_embeddings(p)?.1),
        None => Projection::Identity,
    };
    let client: Box<dyn ImageTokenClient> = match a.client {
        ImageClientChoice::Stub => Box::new(StubImageClient::new(vq.len())),
        ImageClientChoice::Http => Box::new(HttpImageClient::from_env()?),
    };
    let prompts: Vec<PromptRecord> = read_jsonl(&a.prompts)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let kappa3 = kappa3_or_stored(a.kappa3, &cb)?;
    for (i, p) in prompts.iter().enumerate() {
        let params = SynthParams {
            kappa3,
            grid: a.grid,
            template_id: a.template.clone(),
            seed: seed.wrapping_add(i as u64),
            projection: projection.clone(),
        };
        let out = synth::synthesize(&p.prompt, &cb, &vq, encoder.as_ref(), client.as_ref(), &params)
            .with_context(|| format!("prompt {}", p.id))?;
        out.image.save_pgm(&a.out.join(format!("{}.pgm", p.id)))?;
        let mut prov = serde_json::to_string_pretty(&out.provenance)?;
        prov.push('\n');
        let path = a.out.join(format!("{}.provenance.json", p.id));
        fs::write(&path, prov).with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!("synthesized {} images into {}", prompts.len(), a.out.display());
    Ok(())
}

pub(crate) fn make_fixtures(a: &MakeFixturesArgs, seed: u64) -> Result<()> {
    let params = FixtureParams {
        pairs: a.pairs,
        grid: a.grid,
        dim: a.dim,
        planted_per_report: a.planted,
        noise: a.noise,
        patch_px: a.patch_px,
        vq_codes: a.vq_codes,
        pristine_images: a.pristine,
        pristine_size: a.pristine_size,
    };
    params.validate()?;
    let fx = fixtures::make_fixtures(&a.out, seed, &params)?;
    log::info!("wrote {} pairs and {} plants to {}", fx.samples.len(), fx.manifest.plants.len(), a.out.display());
    Ok(())
}
