mod commands;
mod eval;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "kpa", version, about = "Keypatch-aligned report-to-image synthesis toolkit")]
struct Cli {
    /// Base seed for every random choice; 0 when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count content words and split the top K into anatomy and pathology lists.
    BuildVocab(BuildVocabArgs),
    /// Sample words and have an LLM write findings that use them.
    GenPrompts(GenPromptsArgs),
    /// Mine keypatches from the most text-aligned image-report pairs.
    BuildCodebook(BuildCodebookArgs),
    /// Retrieve per-token keypatches for generated reports.
    Retrieve(RetrieveArgs),
    /// Turn generated reports into images through the keypatch context.
    Synthesize(SynthesizeArgs),
    /// Image-quality metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Write a seeded synthetic corpus with planted word-patch links.
    MakeFixtures(MakeFixturesArgs),
}

#[derive(Debug, Args)]
struct BuildVocabArgs {
    #[arg(long)]
    reports: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    top_k: usize,
    #[arg(long)]
    anatomy_seeds: PathBuf,
    #[arg(long)]
    pathology_seeds: PathBuf,
    #[arg(long)]
    exclusions: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the full frequency table as TSV.
    #[arg(long)]
    freq_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LlmChoice {
    /// Local template writer, no network.
    Fallback,
    /// Completion endpoint from KPA_LLM_URL / KPA_LLM_KEY.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceChoice {
    Sampled,
    Vocabulary,
}

#[derive(Debug, Args)]
struct GenPromptsArgs {
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Anatomy words per prompt (N).
    #[arg(long, default_value_t = 2)]
    anatomy: usize,
    /// Pathology words per prompt (M).
    #[arg(long, default_value_t = 2)]
    pathology: usize,
    #[arg(long, value_enum, default_value_t = LlmChoice::Fallback)]
    llm: LlmChoice,
    #[arg(long, default_value = "gpt-4")]
    model: String,
    #[arg(long, value_enum, default_value_t = SourceChoice::Sampled)]
    word_source: SourceChoice,
    #[arg(long, default_value_t = 3)]
    max_retries: usize,
    #[arg(long, default_value_t = 0.7)]
    temperature: f32,
    #[arg(long, default_value_t = 256)]
    max_tokens: u32,
    /// JSONL output, one prompt per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BuildCodebookArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 64)]
    kappa1: usize,
    #[arg(long, default_value_t = 16)]
    kappa2: usize,
    #[arg(long, default_value_t = 4)]
    kappa3: usize,
    /// Output base path; `.json` and `.emb1` (and `.pix`) are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EncoderArgs {
    /// EMB1 word-vector table; unknown words fall back to hashed vectors.
    #[arg(long)]
    encoder: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    /// Keypatches per token; defaults to the value stored with the codebook.
    #[arg(long)]
    kappa3: Option<usize>,
    #[command(flatten)]
    encoder: EncoderArgs,
    /// JSONL output, one retrieval per prompt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ImageClientChoice {
    Stub,
    /// Image-token endpoint from KPA_IMGLLM_URL.
    Http,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[arg(long)]
    codebook: PathBuf,
    /// VQ codebook base path.
    #[arg(long)]
    vq: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    #[command(flatten)]
    encoder: EncoderArgs,
    /// EMB1 `d_q × d` matrix mapping alignment space to VQ space.
    #[arg(long)]
    projection: Option<PathBuf>,
    /// Keypatches per token; defaults to the value stored with the codebook.
    #[arg(long)]
    kappa3: Option<usize>,
    /// Output token grid as ROWSxCOLS.
    #[arg(long, default_value = "16x16", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value = kpa_core::synth::DEFAULT_TEMPLATE)]
    template: String,
    #[arg(long, value_enum, default_value_t = ImageClientChoice::Stub)]
    client: ImageClientChoice,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Fréchet distance between two EMB1 feature sets.
    Fid {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
    },
    /// Score every image in a directory against a NIQE model.
    Niqe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        images: PathBuf,
    },
    /// Fit a NIQE model to a directory of pristine images.
    NiqeFit {
        #[arg(long)]
        pristine: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 96)]
        patch_size: usize,
        #[arg(long, default_value_t = 0.75)]
        sharpness: f64,
    },
    /// Write grid mean/deviation features of every image in a directory to EMB1.
    Features {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        cells: usize,
    },
}

#[derive(Debug, Args)]
struct MakeFixturesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pairs: usize,
    #[arg(long, default_value = "4x4", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    planted: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 8)]
    patch_px: usize,
    #[arg(long, default_value_t = 32)]
    vq_codes: usize,
    #[arg(long, default_value_t = 12)]
    pristine: usize,
    #[arg(long, default_value_t = 192)]
    pristine_size: usize,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    match (parse(r)?, parse(c)?) {
        (0, _) | (_, 0) => Err("grid sides must be positive".into()),
        g => Ok(g),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cli.seed.unwrap_or_else(|| {
        log::info!("no --seed given; using 0");
        0
    });
    match cli.command {
        Command::BuildVocab(a) => commands::build_vocab(&a),
        Command::GenPrompts(a) => commands::gen_prompts(&a, seed),
        Command::BuildCodebook(a) => commands::build_codebook(&a),
        Command::Retrieve(a) => commands::retrieve(&a),
        Command::Synthesize(a) => commands::synthesize(&a, seed),
        Command::Eval(e) => eval::run(&e),
        Command::MakeFixtures(a) => commands::make_fixtures(&a, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
