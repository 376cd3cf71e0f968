//! The `ctxpara` command line: one subcommand per pipeline stage.
//!
//! Every subcommand accepts `--config`, `--seed` and `--out`, writes its data
//! to files (atomically) and a `manifest.json` describing the run beside them.
//! Logs go to stderr.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::controlwords::{build_vocab, extract_control_words, tagger_by_name};
use crate::corpus::{self, ingest_transcripts, read_samples, write_samples, Corpus, EntailmentPair, Sample};
use crate::entailment::{self, evaluate_nuc, train_entailment, HashEncoder, NucEvalCase};
use crate::evalharness::{
    auto_human_agreement, human_report, ingest_human_labels, run_approach, ApproachName, ApproachSpec, EvalReport,
};
use crate::fluency::{evaluate_fluency, load_cola_tsv, train_fluency, Domain, FluencyClassifier};
use crate::generator::{
    generate, prompt_for_sample, sft_train, GenerationRecord, LanguageModel, PromptLimits, PromptRecipe,
    TinyTransformer, Tokenizer, MODEL_FAMILY,
};
use crate::io::{read_jsonl, write_atomic, write_json, write_jsonl};
use crate::manifest::Manifest;
use crate::metrics::{CompositeEvaluator, Evaluator, ScoreBreakdown};
use crate::rl::{train_rl, SamplePromptSource};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ctxpara", version, about = "Contextual paraphrase generation pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the configuration's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate transcript JSONL and write the normalized corpus.
    Ingest(IngestArgs),
    /// Build the tokenizer, context-window samples, splits, entailment pairs and NUC cases.
    BuildSamples(BuildSamplesArgs),
    /// Tag responses and attach their control words.
    ExtractControls(ExtractControlsArgs),
    /// Supervised fine-tuning of the generator.
    TrainSft(TrainSftArgs),
    /// Train the entailment bi-encoder.
    TrainEntailment(TrainEntailmentArgs),
    /// Next-utterance-classification evaluation of an entailment checkpoint.
    EvalNuc(EvalNucArgs),
    /// Train the fluency classifier.
    TrainFluency(TrainFluencyArgs),
    /// MCC of a fluency checkpoint on a labelled set.
    EvalFluency(EvalFluencyArgs),
    /// Generate one paraphrase per sample.
    Generate(GenerateArgs),
    /// Score generations with the composite evaluator.
    Score(ScoreArgs),
    /// PPO fine-tuning against the composite evaluator.
    TrainRl(TrainRlArgs),
    /// Run the baseline grid and write per-approach scores and a report.
    Evaluate(EvaluateArgs),
    /// Assemble a report from score files and optional human labels.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output corpus JSONL.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildSamplesArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub max_context_tokens: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractControlsArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub tagger: Option<String>,
    /// Output sample JSONL with control words filled in.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the corruption vocabulary built from these responses.
    #[arg(long)]
    pub write_vocab: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSftArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Defaults to `tokenizer.json` next to the samples.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Prompt recipe of a named approach instead of `sft.recipe`.
    #[arg(long)]
    pub approach: Option<String>,
    /// Overrides `sft.steps`; 0 writes the initialized model.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainEntailmentArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalNucArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    /// Metrics JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFluencyArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// In-domain development set.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub dev_out_of_domain: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalFluencyArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Overrides such as `top_p=0.9,temperature=0.8` or `greedy`.
    #[arg(long)]
    pub decode: Option<String>,
    #[arg(long)]
    pub approach: Option<String>,
    /// Output generation JSONL.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub generations: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub entailment_ckpt: PathBuf,
    #[arg(long)]
    pub fluency_ckpt: PathBuf,
    /// Output score JSONL.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainRlArgs {
    #[arg(long)]
    pub sft_ckpt: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub entailment_ckpt: PathBuf,
    #[arg(long)]
    pub fluency_ckpt: PathBuf,
    /// Overrides `rl.total_steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Grid TOML: samples, checkpoints and the approaches to run.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directory with one `<approach>/scores.jsonl` per approach.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub human: Option<PathBuf>,
    /// Report JSON; CSV and Markdown renderings are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

/// Parses arguments, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Error::Validation(problems)) => {
            eprintln!("error: invalid configuration");
            for p in problems {
                eprintln!("  {p}");
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            1
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::BuildSamples(a) => cmd_build_samples(&a),
        Command::ExtractControls(a) => cmd_extract_controls(&a),
        Command::TrainSft(a) => cmd_train_sft(&a),
        Command::TrainEntailment(a) => cmd_train_entailment(&a),
        Command::EvalNuc(a) => cmd_eval_nuc(&a),
        Command::TrainFluency(a) => cmd_train_fluency(&a),
        Command::EvalFluency(a) => cmd_eval_fluency(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Score(a) => cmd_score(&a),
        Command::TrainRl(a) => cmd_train_rl(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok(cfg.with_seed(seed))
}

/// `manifest.json` inside an output directory.
fn dir_manifest(dir: &Path, m: Manifest) -> Result<()> {
    m.write(dir)
}

/// `<file>.manifest.json` next to an output file.
fn file_manifest(file: &Path, m: &Manifest) -> Result<()> {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    write_json(&file.with_file_name(name), m)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            std::fs::create_dir_all(p)?;
        }
    }
    Ok(())
}

fn manifest(kind: &str, cfg: &RunConfig, args: &impl Serialize) -> Result<Manifest> {
    Manifest::new(kind, cfg.seed, cfg)?.with("args", args)
}

fn read_vocab(path: &Path) -> Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn optional_vocab(path: &Option<PathBuf>) -> Result<Vec<String>> {
    path.as_deref().map(read_vocab).transpose().map(Option::unwrap_or_default)
}

fn recipe_for(approach: &Option<String>, fallback: PromptRecipe) -> Result<PromptRecipe> {
    match approach {
        Some(name) => Ok(parse_approach(name)?.default_recipe()),
        None => Ok(fallback),
    }
}

fn parse_approach(name: &str) -> Result<ApproachName> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| {
        Error::invalid(format!(
            "unknown approach {name:?}; expected one of {}",
            ApproachName::ALL.map(|a| a.as_str()).join(", ")
        ))
    })
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let (corpus, _) = ingest_transcripts(file)?;
    Ok(corpus)
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let file = std::io::BufReader::new(std::fs::File::open(&a.input)?);
    let (corpus, summary) = ingest_transcripts(file)?;
    for e in &summary.errors {
        log::warn!("line {}: {}", e.line, e.message);
    }
    ensure_parent(&a.out)?;
    write_atomic(&a.out, &corpus.to_jsonl()?)?;
    log::info!(
        "ingested {} conversations ({} turns), {} records rejected",
        summary.conversations,
        summary.turns,
        summary.errors.len()
    );
    file_manifest(&a.out, &manifest("ingest", &cfg, a)?.with("summary", &summary)?)
}

fn cmd_build_samples(a: &BuildSamplesArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(w) = a.window {
        cfg.corpus.window = w;
    }
    if let Some(m) = a.max_context_tokens {
        cfg.corpus.max_context_tokens = Some(m);
    }
    cfg.validate()?;
    let corpus = read_corpus(&a.corpus)?;
    let texts: Vec<String> = corpus
        .conversations()
        .iter()
        .flat_map(|c| c.turns.iter().map(|t| t.prefixed()))
        .collect();
    let tokenizer = Tokenizer::build(
        texts.iter().map(String::as_str),
        cfg.corpus.tokenizer_min_count,
        cfg.corpus.tokenizer_max_words,
    );
    let samples = corpus::build_samples(&corpus, cfg.corpus.window, cfg.max_context_tokens(), &tokenizer);
    let (train, val) = corpus::split(&samples, cfg.corpus.train_fraction, rng_seed(&cfg, "split"))?;
    let val_ids: std::collections::HashSet<String> = val.iter().map(|s| s.conversation_id.clone()).collect();
    let train_ids: std::collections::HashSet<String> = train.iter().map(|s| s.conversation_id.clone()).collect();
    let train_pairs = corpus::build_entailment_pairs_with_window(&corpus.subset(&train_ids), cfg.corpus.window);
    let val_pairs = corpus::build_entailment_pairs_with_window(&corpus.subset(&val_ids), cfg.corpus.window);
    std::fs::create_dir_all(&a.out)?;
    tokenizer.save(&a.out.join("tokenizer.json"))?;
    write_samples(&a.out.join("samples.jsonl"), &samples)?;
    write_samples(&a.out.join("train.jsonl"), &train)?;
    write_samples(&a.out.join("val.jsonl"), &val)?;
    write_jsonl(&a.out.join("entailment_pairs.jsonl"), &train_pairs)?;
    write_jsonl(&a.out.join("entailment_pairs_val.jsonl"), &val_pairs)?;
    let nuc = match entailment::build_nuc_cases(&val_pairs, rng_seed(&cfg, "nuc-cases")) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("validation split too small for NUC cases ({e}); using all pairs");
            let all = corpus::build_entailment_pairs_with_window(&corpus, cfg.corpus.window);
            entailment::build_nuc_cases(&all, rng_seed(&cfg, "nuc-cases"))?
        }
    };
    write_jsonl(&a.out.join("nuc_cases.jsonl"), &nuc)?;
    log::info!(
        "{} samples ({} train / {} val), vocabulary {}",
        samples.len(),
        train.len(),
        val.len(),
        tokenizer.vocab_size()
    );
    dir_manifest(
        &a.out,
        manifest("build-samples", &cfg, a)?
            .with("samples", samples.len())?
            .with("train", train.len())?
            .with("val", val.len())?
            .with("max_context_tokens", cfg.max_context_tokens())?
            .with("tokenizer_id", tokenizer.id())?,
    )
}

fn rng_seed(cfg: &RunConfig, name: &str) -> u64 {
    crate::seed::derive_seed(cfg.seed, name)
}

fn cmd_extract_controls(a: &ExtractControlsArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(t) = &a.tagger {
        cfg.controls.tagger = t.clone();
    }
    let tagger =
        tagger_by_name(&cfg.controls.tagger).ok_or_else(|| Error::invalid(format!("unknown tagger {:?}", cfg.controls.tagger)))?;
    let mut samples = read_samples(&a.samples)?;
    for s in &mut samples {
        s.control_words = extract_control_words(&s.response, &s.id, tagger.as_ref())?.words;
    }
    ensure_parent(&a.out)?;
    write_samples(&a.out, &samples)?;
    if let Some(v) = &a.write_vocab {
        let vocab = build_vocab(samples.iter().map(|s| s.response.as_str()));
        ensure_parent(v)?;
        let mut text = vocab.join("\n");
        text.push('\n');
        write_atomic(v, text.as_bytes())?;
    }
    let with_controls = samples.iter().filter(|s| !s.control_words.is_empty()).count();
    file_manifest(
        &a.out,
        &manifest("extract-controls", &cfg, a)?
            .with("tagger", tagger.id())?
            .with("samples", samples.len())?
            .with("samples_with_controls", with_controls)?,
    )
}

fn cmd_train_sft(a: &TrainSftArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut train_cfg = cfg.sft.clone();
    train_cfg.recipe = recipe_for(&a.approach, train_cfg.recipe)?;
    if let Some(s) = a.steps {
        train_cfg.steps = s;
    }
    let tok_path = a
        .tokenizer
        .clone()
        .unwrap_or_else(|| a.samples.with_file_name("tokenizer.json"));
    let tokenizer = Tokenizer::load(&tok_path)?;
    let train = read_samples(&a.samples)?;
    let val = a.val.as_deref().map(read_samples).transpose()?.unwrap_or_default();
    let vocab = optional_vocab(&a.vocab)?;
    if train_cfg.recipe.corruption.is_some() && vocab.is_empty() {
        return Err(Error::invalid("control-word corruption needs --vocab"));
    }
    let mut model = TinyTransformer::new(cfg.model.clone(), tokenizer)?;
    let report = sft_train(&mut model, &train, &val, &vocab, &train_cfg)?;
    model.save(&a.out)?;
    write_json(&a.out.join("train_report.json"), &report)?;
    write_atomic(&a.out.join("sft_curve.csv"), &report.curve_csv()?)?;
    dir_manifest(
        &a.out,
        Manifest::new("train-sft", cfg.seed, &train_cfg)?
            .with_model(MODEL_FAMILY, model.tokenizer().id())
            .with("args", a)?
            .with("model", &cfg.model)?
            .with("final_train_loss", report.final_train_loss)?
            .with("final_val_loss", report.final_val_loss)?
            .with("parameter_hash", model.params().hash()?)?,
    )
}

fn cmd_train_entailment(a: &TrainEntailmentArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let pairs: Vec<EntailmentPair> = read_jsonl(&a.pairs)?;
    let (enc, report) = train_entailment(&pairs, &cfg.entailment)?;
    enc.save(&a.out)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "loss"])?;
    for (i, l) in report.losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    write_atomic(
        &a.out.join("loss_curve.csv"),
        &w.into_inner().map_err(|e| Error::invalid(e.to_string()))?,
    )?;
    let accuracy = entailment::retrieval_accuracy(&enc, &pairs[..pairs.len().min(200)])?;
    dir_manifest(
        &a.out,
        Manifest::new("train-entailment", cfg.seed, &cfg.entailment)?
            .with("args", a)?
            .with("pairs", pairs.len())?
            .with("final_loss", report.losses.last())?
            .with("train_retrieval_accuracy", accuracy)?,
    )
}

fn cmd_eval_nuc(a: &EvalNucArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let enc = HashEncoder::load(&a.ckpt)?;
    let cases: Vec<NucEvalCase> = read_jsonl(&a.cases)?;
    let metrics = evaluate_nuc(&enc, &cases)?;
    log::info!(
        "NUC over {} cases: R@1 {:.3} R@2 {:.3} MRR {:.3}",
        metrics.cases,
        metrics.r_at_1,
        metrics.r_at_2,
        metrics.mrr
    );
    ensure_parent(&a.out)?;
    write_json(&a.out, &metrics)?;
    file_manifest(&a.out, &manifest("eval-nuc", &cfg, a)?)
}

fn cmd_train_fluency(a: &TrainFluencyArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let train = load_cola_tsv(&a.train, Domain::Unknown)?;
    let clf = train_fluency(&train, &cfg.fluency)?;
    clf.save(&a.out)?;
    let mut m = Manifest::new("train-fluency", cfg.seed, &cfg.fluency)?
        .with("args", a)?
        .with("train_examples", train.len())?
        .with("train", evaluate_fluency(&clf, &train)?)?;
    if let Some(dev) = &a.dev {
        let e = evaluate_fluency(&clf, &load_cola_tsv(dev, Domain::InDomain)?)?;
        log::info!("dev (in-domain) MCC {:.3}", e.mcc);
        m = m.with("dev_in_domain", e)?;
    }
    if let Some(dev) = &a.dev_out_of_domain {
        let e = evaluate_fluency(&clf, &load_cola_tsv(dev, Domain::OutOfDomain)?)?;
        log::info!("dev (out-of-domain) MCC {:.3}", e.mcc);
        m = m.with("dev_out_of_domain", e)?;
    }
    dir_manifest(&a.out, m)
}

fn cmd_eval_fluency(a: &EvalFluencyArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let clf = FluencyClassifier::load(&a.ckpt)?;
    let eval = evaluate_fluency(&clf, &load_cola_tsv(&a.test, Domain::Unknown)?)?;
    log::info!("MCC {:.3} accuracy {:.3} over {} examples", eval.mcc, eval.accuracy, eval.examples);
    ensure_parent(&a.out)?;
    write_json(&a.out, &eval)?;
    file_manifest(&a.out, &manifest("eval-fluency", &cfg, a)?)
}

/// The recipe a checkpoint was trained with, from its manifest.
fn checkpoint_recipe(dir: &Path) -> Result<PromptRecipe> {
    let m = Manifest::read(dir)?;
    match m.config.get("recipe") {
        Some(r) => Ok(serde_json::from_value(r.clone())?),
        None => Ok(PromptRecipe::default()),
    }
}

fn checkpoint_response_budget(dir: &Path, fallback: usize) -> usize {
    Manifest::read(dir)
        .ok()
        .and_then(|m| m.config.get("response_budget").and_then(|v| v.as_u64()))
        .map(|v| v as usize)
        .unwrap_or(fallback)
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut decode = cfg.decode.clone();
    if let Some(spec) = &a.decode {
        decode = decode.parse_overrides(spec)?;
    }
    let model = TinyTransformer::load(&a.ckpt)?;
    let recipe = recipe_for(&a.approach, checkpoint_recipe(&a.ckpt)?)?;
    let samples = read_samples(&a.samples)?;
    let vocab = optional_vocab(&a.vocab)?;
    let limits = PromptLimits {
        max_sequence_length: model.max_sequence_length(),
        response_budget: checkpoint_response_budget(&a.ckpt, cfg.sft.response_budget),
    };
    let records = samples
        .iter()
        .map(|s| {
            let mut rng = rng_for(decode.seed, &format!("generate:{}", s.id));
            let prompt = prompt_for_sample(model.tokenizer(), s, &recipe, &vocab, limits, &mut rng)?;
            let g = generate(&model, &prompt, &decode, &mut rng)?;
            Ok(GenerationRecord::new(&s.id, &g))
        })
        .collect::<Result<Vec<_>>>()?;
    let empty = records.iter().filter(|r| r.generated.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} of {} generations are empty", records.len());
    }
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &records)?;
    file_manifest(
        &a.out,
        &manifest("generate", &cfg, a)?
            .with("decode", &decode)?
            .with("recipe", &recipe)?
            .with("empty_generations", empty)?,
    )
}

struct LoadedEvaluator {
    encoder: HashEncoder,
    fluency: FluencyClassifier,
    cfg: RunConfig,
}

impl LoadedEvaluator {
    fn load(entailment_ckpt: &Path, fluency_ckpt: &Path, cfg: &RunConfig) -> Result<Self> {
        Ok(LoadedEvaluator {
            encoder: HashEncoder::load(entailment_ckpt).map_err(|e| Error::in_component("textual_entailment", e))?,
            fluency: FluencyClassifier::load(fluency_ckpt).map_err(|e| Error::in_component("fluency", e))?,
            cfg: cfg.clone(),
        })
    }

    fn evaluator(&self) -> CompositeEvaluator<'_> {
        CompositeEvaluator {
            embedder: &self.cfg.metrics.embedder,
            entailment: &self.encoder,
            fluency: &self.fluency,
            bleu: self.cfg.metrics.bleu.clone(),
        }
    }
}

#[derive(Serialize)]
struct ScoringMetadata<'a> {
    embedder: String,
    bleu: &'a crate::metrics::BleuConfig,
    semantic_similarity: &'static str,
    empty_generation: &'static str,
}

fn scoring_metadata(cfg: &RunConfig) -> ScoringMetadata<'_> {
    use crate::metrics::TokenEmbedder;
    ScoringMetadata {
        embedder: cfg.metrics.embedder.id(),
        bleu: &cfg.metrics.bleu,
        semantic_similarity: "greedy-match F1, no idf, no rescaling, clamped to [0, 1]",
        empty_generation: "all components 0, flagged degenerate",
    }
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let loaded = LoadedEvaluator::load(&a.entailment_ckpt, &a.fluency_ckpt, &cfg)?;
    let evaluator = loaded.evaluator();
    let samples: HashMap<String, Sample> = read_samples(&a.samples)?.into_iter().map(|s| (s.id.clone(), s)).collect();
    let generations: Vec<GenerationRecord> = read_jsonl(&a.generations)?;
    let scores = generations
        .iter()
        .map(|g| {
            let s = samples
                .get(&g.sample_id)
                .ok_or_else(|| Error::invalid(format!("generation for unknown sample {}", g.sample_id)))?;
            evaluator.evaluate(&s.id, &s.context_text(), &s.response, &g.generated)
        })
        .collect::<Result<Vec<ScoreBreakdown>>>()?;
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &scores)?;
    let row = crate::evalharness::aggregate("scored", &scores)?;
    log::info!("mean composite {:.4} over {} generations", row.overall, row.samples);
    file_manifest(
        &a.out,
        &manifest("score", &cfg, a)?
            .with("scoring", scoring_metadata(&cfg))?
            .with("means", &row)?,
    )
}

fn cmd_train_rl(a: &TrainRlArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut rl_cfg = cfg.rl.clone();
    if let Some(s) = a.steps {
        rl_cfg.total_steps = s;
    }
    let loaded = LoadedEvaluator::load(&a.entailment_ckpt, &a.fluency_ckpt, &cfg)?;
    let evaluator = loaded.evaluator();
    let mut policy = TinyTransformer::load(&a.sft_ckpt)?;
    let samples = read_samples(&a.samples)?;
    let vocab = optional_vocab(&a.vocab)?;
    let tokenizer = policy.tokenizer().clone();
    let limits = PromptLimits {
        max_sequence_length: policy.max_sequence_length(),
        response_budget: rl_cfg.response_budget,
    };
    let mut source = SamplePromptSource::new(&samples, rl_cfg.recipe.clone(), &vocab, limits, &tokenizer, rl_cfg.seed);
    let report = train_rl(&mut policy, &mut source, &evaluator, &rl_cfg)?;
    policy.save(&a.out)?;
    write_atomic(&a.out.join("training_curve.csv"), &report.curve_csv()?)?;
    write_json(&a.out.join("train_report.json"), &report)?;
    dir_manifest(
        &a.out,
        Manifest::new("train-rl", cfg.seed, &rl_cfg)?
            .with_model(MODEL_FAMILY, policy.tokenizer().id())
            .with("args", a)?
            .with("reference_hash", &report.reference_hash)?
            .with("final_beta", report.final_beta)?
            .with("scoring", scoring_metadata(&cfg))?,
    )
}

/// Grid file for `evaluate`. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub samples: PathBuf,
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    pub entailment_ckpt: PathBuf,
    pub fluency_ckpt: PathBuf,
    #[serde(rename = "approach")]
    pub approaches: Vec<ApproachSpec>,
}

impl GridConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut g: GridConfig = toml::from_str(&text).map_err(|e| Error::Validation(vec![e.to_string()]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut g.samples);
        fix(&mut g.entailment_ckpt);
        fix(&mut g.fluency_ckpt);
        if let Some(v) = g.vocab.as_mut() {
            fix(v);
        }
        for a in &mut g.approaches {
            fix(&mut a.checkpoint);
        }
        let problems: Vec<String> = g
            .approaches
            .iter()
            .filter_map(|a| a.validate().err().map(|e| format!("approach {}: {e}", a.name)))
            .collect();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        if g.approaches.is_empty() {
            return Err(Error::Validation(vec!["grid lists no approaches".into()]));
        }
        Ok(g)
    }
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let grid = GridConfig::load(&a.grid)?;
    let loaded = LoadedEvaluator::load(&grid.entailment_ckpt, &grid.fluency_ckpt, &cfg)?;
    let models: Vec<TinyTransformer> = grid
        .approaches
        .iter()
        .map(|s| TinyTransformer::load(&s.checkpoint))
        .collect::<Result<_>>()?;
    let samples = read_samples(&grid.samples)?;
    let vocab = optional_vocab(&grid.vocab)?;
    let evaluator = loaded.evaluator();
    std::fs::create_dir_all(&a.out)?;
    let mut per_approach = Vec::new();
    for (spec, model) in grid.approaches.iter().zip(&models) {
        let recipe = spec.recipe();
        if recipe.corruption.is_some() && vocab.is_empty() {
            return Err(Error::invalid(format!("approach {} needs a vocab for corruption", spec.name)));
        }
        log::info!("running approach {}", spec.name);
        let budget = checkpoint_response_budget(&spec.checkpoint, cfg.sft.response_budget);
        let outputs = run_approach(
            spec.name,
            &recipe,
            model,
            &samples,
            &vocab,
            &evaluator,
            &cfg.decode,
            budget,
            cfg.seed,
        )?;
        let dir = a.out.join(spec.name.as_str());
        std::fs::create_dir_all(&dir)?;
        let gens: Vec<&GenerationRecord> = outputs.iter().map(|o| &o.generation).collect();
        let scores: Vec<ScoreBreakdown> = outputs.iter().map(|o| o.scores.clone()).collect();
        write_jsonl(&dir.join("generations.jsonl"), &gens)?;
        write_jsonl(&dir.join("scores.jsonl"), &scores)?;
        per_approach.push((spec.name.as_str().to_string(), scores));
    }
    let report = EvalReport::from_scores(&per_approach)?;
    write_report(&a.out.join("report.json"), &report)?;
    dir_manifest(
        &a.out,
        manifest("evaluate", &cfg, a)?
            .with("grid", &grid)?
            .with("scoring", scoring_metadata(&cfg))?,
    )
}

fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    ensure_parent(path)?;
    write_json(path, report)?;
    write_atomic(&path.with_extension("csv"), &report.to_csv()?)?;
    write_atomic(&path.with_extension("md"), report.to_markdown().as_bytes())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut names: Vec<String> = std::fs::read_dir(&a.scores)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("scores.jsonl").is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort_by_key(|n| (parse_approach(n).map(|a| a as usize).unwrap_or(usize::MAX), n.clone()));
    if names.is_empty() {
        return Err(Error::invalid(format!(
            "no <approach>/scores.jsonl files under {}",
            a.scores.display()
        )));
    }
    let per_approach: Vec<(String, Vec<ScoreBreakdown>)> = names
        .iter()
        .map(|n| Ok((n.clone(), read_jsonl(&a.scores.join(n).join("scores.jsonl"))?)))
        .collect::<Result<_>>()?;
    let mut report = EvalReport::from_scores(&per_approach)?;
    if let Some(h) = &a.human {
        let records = ingest_human_labels(std::fs::File::open(h)?)?;
        log::info!("{} human rating records", records.len());
        report.human = human_report(&records);
        for (name, scores) in &per_approach {
            match auto_human_agreement(scores, &records, name) {
                Ok(ag) => {
                    report.agreement.insert(name.clone(), ag);
                }
                Err(e) => log::info!("no agreement for {name}: {e}"),
            }
        }
    }
    write_report(&a.out, &report)?;
    file_manifest(&a.out, &manifest("report", &cfg, a)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_exit_codes() {
        assert_eq!(run(["ctxpara", "--help"]), 0);
        assert_eq!(run(["ctxpara", "no-such-command"]), 2);
        assert_eq!(run(["ctxpara", "ingest", "--in", "x", "--out", "y", "--bogus"]), 2);
    }

    #[test]
    fn approach_names_parse() {
        assert_eq!(parse_approach("rl_finetuned").unwrap(), ApproachName::RlFinetuned);
        assert!(parse_approach("rl").is_err());
    }
}
