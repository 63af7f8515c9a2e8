//! Run configuration, the run manifest, and the pipeline stages behind the
//! CLI subcommands.
//!
//! Every randomized stage derives its streams from the run seed: generation
//! uses one stream per text index (shared by clean and watermarked runs so a
//! zero-delta watermark reproduces plain sampling token for token), and the
//! attack/frequency stages fold documented salts into the seed. Wall-clock
//! time is recorded for the usability metrics but never feeds randomness.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use crate::hashing::sha256_hex;

use crate::attack::{build_ngram_table, scrub, spoof_generate, SpoofConfig, ScrubConfig};
use crate::cefw::{
    self, CefwReport, EvalGroup, Provenance, RawMetrics, Scenario, WeightVector,
};
use crate::corpus::{read_corpus, write_corpus};
use crate::detect::{detect, roc_auc, write_roc_csv, write_scores_csv, DetectionResult, ScoreRow};
use crate::error::{Error, Result};
use crate::lm::{NGramModel, TokenId};
use crate::rng::{derive_stream, splitmix64_mix};
use crate::watermark::{Scheme, WatermarkConfig, Watermarker};

/// Stream salts for stages that must not share randomness with generation.
const FREQ_SALT: u64 = 0x4652_4551;
const SCRUB_SALT: u64 = 0x5343_5242;
const STEAL_SALT: u64 = 0x5354_454C;

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    #[serde(default = "default_train_path")]
    pub train: PathBuf,
    #[serde(default = "default_scoring_path")]
    pub scoring: PathBuf,
    #[serde(default = "default_prompts_path")]
    pub prompts: PathBuf,
}

fn default_train_path() -> PathBuf {
    PathBuf::from("corpus_train.txt")
}
fn default_scoring_path() -> PathBuf {
    PathBuf::from("corpus_scoring.txt")
}
fn default_prompts_path() -> PathBuf {
    PathBuf::from("corpus_prompts.txt")
}

impl Default for CorpusPaths {
    fn default() -> Self {
        CorpusPaths {
            train: default_train_path(),
            scoring: default_scoring_path(),
            prompts: default_prompts_path(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmParams {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_order() -> usize {
    3
}
fn default_alpha() -> f64 {
    0.1
}

impl Default for LmParams {
    fn default() -> Self {
        LmParams {
            order: default_order(),
            alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    /// Texts per population.
    #[serde(default = "default_n_texts")]
    pub n_texts: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    /// Prompt length in tokens, taken from the head of each prompt document.
    #[serde(default = "default_prompt_tokens")]
    pub prompt_tokens: usize,
    /// Unwatermarked samples used to build the BW token frequency ranking.
    #[serde(default = "default_freq_texts")]
    pub select_freq_texts: usize,
    /// Sampling temperature for the clean and watermarked populations
    /// (1.0 = pure ancestral sampling).
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_n_texts() -> usize {
    200
}
fn default_max_tokens() -> usize {
    200
}
fn default_prompt_tokens() -> usize {
    30
}
fn default_freq_texts() -> usize {
    500
}
fn default_temperature() -> f64 {
    1.0
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_texts: default_n_texts(),
            max_tokens: default_max_tokens(),
            prompt_tokens: default_prompt_tokens(),
            select_freq_texts: default_freq_texts(),
            temperature: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    /// Output-file label, e.g. "kgw4".
    pub label: String,
    pub scheme: Scheme,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Secret key; derived from the run seed and label when omitted.
    #[serde(default)]
    pub key: Option<u64>,
}

fn default_delta() -> f64 {
    2.0
}
fn default_window() -> usize {
    1
}

impl SchemeSpec {
    pub fn resolved_key(&self, run_seed: u64) -> u64 {
        self.key
            .unwrap_or_else(|| splitmix64_mix(run_seed ^ label_hash(&self.label)))
    }

    pub fn watermark_config(&self, run_seed: u64) -> WatermarkConfig {
        WatermarkConfig::new(self.scheme, self.delta, self.window, self.resolved_key(run_seed))
    }
}

fn default_schemes() -> Vec<SchemeSpec> {
    [
        ("uniw", Scheme::Uniw, 1),
        ("kgw1", Scheme::Kgw, 1),
        ("kgw4", Scheme::Kgw, 4),
        ("bw1", Scheme::Bw, 1),
        ("bw4", Scheme::Bw, 4),
    ]
    .into_iter()
    .map(|(label, scheme, window)| SchemeSpec {
        label: label.to_string(),
        scheme,
        delta: default_delta(),
        window,
        key: None,
    })
    .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    #[serde(default)]
    pub scrub: ScrubConfig,
    #[serde(default = "default_intensity")]
    pub steal_intensity: f64,
    /// Texts per corpus used to build the spoofing tables (capped at the
    /// generated corpus size).
    #[serde(default = "default_table_texts")]
    pub steal_table_texts: usize,
    /// Spoofed texts emitted per table order.
    #[serde(default = "default_spoof_texts")]
    pub spoof_texts: usize,
}

fn default_intensity() -> f64 {
    4.0
}
fn default_table_texts() -> usize {
    5000
}
fn default_spoof_texts() -> usize {
    200
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            scrub: ScrubConfig::default(),
            steal_intensity: default_intensity(),
            steal_table_texts: default_table_texts(),
            spoof_texts: default_spoof_texts(),
        }
    }
}

/// The whole run configuration. The seed is mandatory: nothing in a run may
/// fall back to wall-clock seeding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub lm: LmParams,
    #[serde(default)]
    pub generation: GenParams,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default)]
    pub attack: AttackParams,
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default)]
    pub weights: WeightVector,
    #[serde(default)]
    pub bounds: cefw::BoundsOverrides,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_scenario() -> Scenario {
    Scenario::A
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&data)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.generation.n_texts < 1 {
            return Err(Error::Config("generation.n_texts must be >= 1".into()));
        }
        if self.generation.max_tokens < 1 {
            return Err(Error::Config("generation.max_tokens must be >= 1".into()));
        }
        if self.generation.temperature <= 0.0 || self.generation.temperature.is_nan() {
            return Err(Error::Config("generation.temperature must be > 0".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for spec in &self.schemes {
            if !seen.insert(&spec.label) {
                return Err(Error::Config(format!("duplicate scheme label `{}`", spec.label)));
            }
            spec.watermark_config(self.seed).validate()?;
        }
        self.attack.scrub.validate()?;
        self.weights.validate()?;
        self.bounds.validate()?;
        Ok(())
    }

    pub fn scheme(&self, label: &str) -> Result<&SchemeSpec> {
        self.schemes
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::Config(format!("no scheme labeled `{label}` in config")))
    }

    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Append-style record of everything a run produced. Every emitted file is
/// listed with a content hash; re-emitting a path replaces its record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub tool_version: String,
    pub config_sha256: String,
    pub created_unix: u64,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    fn new(config_sha256: String) -> Self {
        RunManifest {
            version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            created_unix: now_unix(),
            stages: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn stage_seconds(&self, name: &str) -> Option<f64> {
        self.stages.iter().find(|s| s.name == name).map(|s| s.seconds)
    }

    fn record_stage(&mut self, name: &str, seconds: f64) {
        self.stages.retain(|s| s.name != name);
        self.stages.push(StageRecord {
            name: name.to_string(),
            seconds,
            finished_unix: now_unix(),
        });
    }

    fn record_artifact(&mut self, rel: &str, bytes: &[u8]) {
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(ArtifactRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    }
}

/// Shared state for one run directory: config plus manifest bookkeeping.
pub struct RunContext {
    pub config: RunConfig,
    pub manifest: RunManifest,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunContext {
    /// Open (or initialize) the run directory. A manifest left by a different
    /// config is discarded: its stage timings would not describe this run.
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(&config.out_dir)?;
        let hash = config.sha256();
        let manifest_path = config.out_dir.join(MANIFEST_FILE);
        let manifest = if manifest_path.exists() {
            let data = fs::read_to_string(&manifest_path)?;
            match serde_json::from_str::<RunManifest>(&data) {
                Ok(m) if m.config_sha256 == hash => m,
                _ => RunManifest::new(hash),
            }
        } else {
            RunManifest::new(hash)
        };
        Ok(RunContext { config, manifest })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.config.out_dir.join(rel)
    }

    /// Write a file into the run directory and record it in the manifest.
    pub fn emit(&mut self, rel: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.manifest.record_artifact(rel, contents);
        Ok(path)
    }

    /// Record a file that a component saved directly to `rel`.
    pub fn record_emitted(&mut self, rel: &str) -> Result<()> {
        let bytes = fs::read(self.path(rel))?;
        self.manifest.record_artifact(rel, &bytes);
        Ok(())
    }

    pub fn finish_stage(&mut self, name: &str, started: Instant) {
        self.manifest
            .record_stage(name, started.elapsed().as_secs_f64());
    }

    pub fn record_stage_seconds(&mut self, name: &str, seconds: f64) {
        self.manifest.record_stage(name, seconds);
    }

    pub fn save_manifest(&mut self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Data(format!("manifest encode: {e}")))?;
        // the manifest lists every artifact but not itself
        fs::write(self.path(MANIFEST_FILE), json)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Batch helpers
// ---------------------------------------------------------------------------

/// Per-text rng streams are derived from (seed, index), so parallel order
/// cannot change outputs, and clean/marked runs of the same index share a
/// stream (a zero-delta watermark therefore reproduces clean sampling).
pub fn generate_clean_batch(
    model: &NGramModel,
    prompts: &[Vec<TokenId>],
    max_tokens: usize,
    seed: u64,
) -> Result<Vec<Vec<TokenId>>> {
    generate_clean_batch_tempered(model, prompts, max_tokens, seed, 1.0)
}

pub fn generate_clean_batch_tempered(
    model: &NGramModel,
    prompts: &[Vec<TokenId>],
    max_tokens: usize,
    seed: u64,
    temperature: f64,
) -> Result<Vec<Vec<TokenId>>> {
    prompts
        .par_iter()
        .enumerate()
        .map(|(i, prompt)| {
            let mut rng = derive_stream(seed, i as u64);
            model
                .generate_tempered(prompt, max_tokens, &mut rng, temperature)
                .map(|t| t.ids)
        })
        .collect()
}

pub fn generate_marked_batch(
    model: &NGramModel,
    wm: &Watermarker,
    prompts: &[Vec<TokenId>],
    max_tokens: usize,
    seed: u64,
) -> Result<Vec<crate::watermark::EmbedOutput>> {
    generate_marked_batch_tempered(model, wm, prompts, max_tokens, seed, 1.0)
}

pub fn generate_marked_batch_tempered(
    model: &NGramModel,
    wm: &Watermarker,
    prompts: &[Vec<TokenId>],
    max_tokens: usize,
    seed: u64,
    temperature: f64,
) -> Result<Vec<crate::watermark::EmbedOutput>> {
    prompts
        .par_iter()
        .enumerate()
        .map(|(i, prompt)| {
            let mut rng = derive_stream(seed, i as u64);
            wm.generate_tempered(model, prompt, max_tokens, &mut rng, temperature)
        })
        .collect()
}

pub fn detect_batch(wm: &Watermarker, texts: &[Vec<TokenId>]) -> Result<Vec<DetectionResult>> {
    texts.par_iter().map(|t| detect(t, wm)).collect()
}

/// Build the BW frequency snapshot on its own salted stream.
pub fn bw_frequency_counts(
    model: &NGramModel,
    gen: &GenParams,
    seed: u64,
) -> Result<std::collections::HashMap<TokenId, u64>> {
    let mut rng = derive_stream(seed ^ FREQ_SALT, 0);
    crate::watermark::count_token_frequencies(
        model,
        gen.select_freq_texts,
        gen.max_tokens,
        &mut rng,
    )
}

/// Load prompt documents and cut each to the configured prompt length.
pub fn load_prompts(
    model: &NGramModel,
    path: &Path,
    prompt_tokens: usize,
    needed: usize,
) -> Result<Vec<Vec<TokenId>>> {
    let docs = read_corpus(path)?;
    let mut prompts: Vec<Vec<TokenId>> = docs
        .iter()
        .map(|d| {
            let ids = model.vocab().tokenize_frozen(d).ids;
            let cut = ids.len().min(prompt_tokens);
            ids[..cut].to_vec()
        })
        .filter(|p| !p.is_empty())
        .collect();
    if prompts.len() < needed {
        return Err(Error::Data(format!(
            "prompt corpus {} has {} usable prompts, need {needed}",
            path.display(),
            prompts.len()
        )));
    }
    prompts.truncate(needed);
    Ok(prompts)
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

pub const MODEL_FILE: &str = "model.ngram";
pub const SCORING_MODEL_FILE: &str = "scoring_model.ngram";
pub const CLEAN_FILE: &str = "clean.txt";

pub struct TrainOutcome {
    pub vocab_size: usize,
    pub trained_tokens: u64,
    pub model_path: PathBuf,
}

/// Train the generation model and the held-out scoring model, and persist
/// both.
pub fn cmd_train(ctx: &mut RunContext) -> Result<TrainOutcome> {
    let started = Instant::now();
    let lm = ctx.config.lm;
    let train_docs = read_corpus(&ctx.config.corpus.train)?;
    let model = NGramModel::train(&train_docs, lm.order, lm.alpha)?;
    let model_path = ctx.path(MODEL_FILE);
    model.save(&model_path)?;
    ctx.record_emitted(MODEL_FILE)?;

    let scoring_docs = read_corpus(&ctx.config.corpus.scoring)?;
    let scoring = NGramModel::train(&scoring_docs, lm.order, lm.alpha)?;
    scoring.save(&ctx.path(SCORING_MODEL_FILE))?;
    ctx.record_emitted(SCORING_MODEL_FILE)?;

    ctx.finish_stage("train", started);
    ctx.save_manifest()?;
    Ok(TrainOutcome {
        vocab_size: model.vocab_size(),
        trained_tokens: model.trained_tokens(),
        model_path,
    })
}

fn load_model(ctx: &RunContext, file: &str) -> Result<NGramModel> {
    let path = ctx.path(file);
    if !path.exists() {
        return Err(Error::Data(format!(
            "{} not found; run `train` first",
            path.display()
        )));
    }
    NGramModel::load(&path)
}

/// Build a prepared watermarker for a configured scheme, counting BW
/// frequencies when needed.
pub fn build_watermarker(
    ctx: &RunContext,
    model: &NGramModel,
    label: &str,
) -> Result<Watermarker> {
    let spec = ctx.config.scheme(label)?;
    let config = spec.watermark_config(ctx.config.seed);
    let freq = if spec.scheme == Scheme::Bw {
        Some(bw_frequency_counts(model, &ctx.config.generation, ctx.config.seed)?)
    } else {
        None
    };
    Watermarker::prepare(config, model.vocab_size(), freq.as_ref())
}

pub struct GenerateOutcome {
    pub file: PathBuf,
    pub texts: usize,
    pub seconds: f64,
}

/// Generate one population: clean when `scheme_label` is None, otherwise the
/// labeled watermarked population (also emitting its sidecar).
pub fn cmd_generate(ctx: &mut RunContext, scheme_label: Option<&str>) -> Result<GenerateOutcome> {
    let model = load_model(ctx, MODEL_FILE)?;
    let gen = ctx.config.generation;
    let prompts = load_prompts(
        &model,
        &ctx.config.corpus.prompts,
        gen.prompt_tokens,
        gen.n_texts,
    )?;
    let seed = ctx.config.seed;

    let (stage, file, texts) = match scheme_label {
        None => {
            let started = Instant::now();
            let texts = generate_clean_batch_tempered(
                &model,
                &prompts,
                gen.max_tokens,
                seed,
                gen.temperature,
            )?;
            let seconds = started.elapsed().as_secs_f64();
            ctx.record_stage_seconds("generate:clean", seconds);
            ("generate:clean".to_string(), CLEAN_FILE.to_string(), texts)
        }
        Some(label) => {
            let wm = build_watermarker(ctx, &model, label)?;
            let sidecar_rel = format!("{label}.sidecar.json");
            wm.save_sidecar(&ctx.path(&sidecar_rel))?;
            ctx.record_emitted(&sidecar_rel)?;
            let started = Instant::now();
            let outs = generate_marked_batch_tempered(
                &model,
                &wm,
                &prompts,
                gen.max_tokens,
                seed,
                gen.temperature,
            )?;
            let seconds = started.elapsed().as_secs_f64();
            let stage = format!("generate:{label}");
            ctx.record_stage_seconds(&stage, seconds);
            (
                stage,
                format!("{label}.txt"),
                outs.into_iter().map(|o| o.text.ids).collect(),
            )
        }
    };

    let docs: Vec<String> = texts.iter().map(|t| model.vocab().detokenize(t)).collect();
    write_corpus(&ctx.path(&file), &docs)?;
    ctx.record_emitted(&file)?;
    ctx.save_manifest()?;
    Ok(GenerateOutcome {
        file: ctx.path(&file),
        texts: docs.len(),
        seconds: ctx.manifest.stage_seconds(&stage).unwrap_or(0.0),
    })
}

/// Summary emitted next to each score dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectSummary {
    pub tag: String,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    /// Wall time spent scoring the positive texts.
    pub detect_seconds: f64,
    pub detect_texts: u64,
}

fn read_tokenized_corpus(model: &NGramModel, path: &Path) -> Result<Vec<Vec<TokenId>>> {
    Ok(read_corpus(path)?
        .iter()
        .map(|line| model.vocab().tokenize_frozen(line).ids)
        .collect())
}

/// Score a positive corpus against the clean corpus for one scheme. `input`
/// overrides the positives file (attacked corpora); `tag` names the outputs.
pub fn cmd_detect(
    ctx: &mut RunContext,
    label: &str,
    input: Option<&str>,
    tag: Option<&str>,
) -> Result<DetectSummary> {
    let model = load_model(ctx, MODEL_FILE)?;
    let wm = Watermarker::load_sidecar(&ctx.path(&format!("{label}.sidecar.json")))?;
    let pos_rel = input.map(|s| s.to_string()).unwrap_or(format!("{label}.txt"));
    let tag = tag.map(|s| s.to_string()).unwrap_or(label.to_string());

    let pos_texts = read_tokenized_corpus(&model, &ctx.path(&pos_rel))?;
    let neg_texts = read_tokenized_corpus(&model, &ctx.path(CLEAN_FILE))?;

    let started = Instant::now();
    let pos_results = detect_batch(&wm, &pos_texts)?;
    let detect_seconds = started.elapsed().as_secs_f64();
    let neg_results = detect_batch(&wm, &neg_texts)?;

    let mut rows = Vec::with_capacity(pos_results.len() + neg_results.len());
    for (i, r) in pos_results.iter().enumerate() {
        rows.push(ScoreRow {
            text_id: format!("pos-{i}"),
            label: "marked".into(),
            g: r.green,
            t: r.scored,
            z: r.z,
        });
    }
    for (i, r) in neg_results.iter().enumerate() {
        rows.push(ScoreRow {
            text_id: format!("neg-{i}"),
            label: "clean".into(),
            g: r.green,
            t: r.scored,
            z: r.z,
        });
    }
    let scores_rel = format!("{tag}.scores.csv");
    write_scores_csv(&ctx.path(&scores_rel), &rows)?;
    ctx.record_emitted(&scores_rel)?;

    let pos_z: Vec<f64> = pos_results.iter().map(|r| r.z).collect();
    let neg_z: Vec<f64> = neg_results.iter().map(|r| r.z).collect();
    let curve = roc_auc(&pos_z, &neg_z)?;
    let roc_rel = format!("{tag}.roc.csv");
    write_roc_csv(&ctx.path(&roc_rel), &curve)?;
    ctx.record_emitted(&roc_rel)?;

    let summary = DetectSummary {
        tag: tag.clone(),
        auc: curve.auc,
        positives: pos_results.len(),
        negatives: neg_results.len(),
        detect_seconds,
        detect_texts: pos_results.len() as u64,
    };
    let summary_rel = format!("{tag}.detect.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Data(format!("summary encode: {e}")))?;
    ctx.emit(&summary_rel, json.as_bytes())?;
    ctx.record_stage_seconds(&format!("detect:{tag}"), detect_seconds);
    ctx.save_manifest()?;
    Ok(summary)
}

pub enum AttackKind {
    Scrub,
    Steal,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scrub" => Ok(AttackKind::Scrub),
            "steal" => Ok(AttackKind::Steal),
            other => Err(Error::Config(format!("unknown attack kind `{other}`"))),
        }
    }
}

/// Attack a watermarked corpus. Scrub rewrites `<label>.txt` into
/// `<label>.scrubbed.txt`; steal builds table pairs against the clean corpus
/// and emits four spoofed corpora plus the tables.
pub fn cmd_attack(ctx: &mut RunContext, kind: AttackKind, label: &str) -> Result<Vec<PathBuf>> {
    let model = load_model(ctx, MODEL_FILE)?;
    let seed = ctx.config.seed;
    let started = Instant::now();
    let mut emitted = Vec::new();
    match kind {
        AttackKind::Scrub => {
            let marked = read_tokenized_corpus(&model, &ctx.path(&format!("{label}.txt")))?;
            let cfg = ctx.config.attack.scrub;
            let scrub_seed = seed ^ SCRUB_SALT ^ label_hash(label);
            let scrubbed: Vec<Vec<TokenId>> = marked
                .par_iter()
                .enumerate()
                .map(|(i, text)| {
                    let mut rng = derive_stream(scrub_seed, i as u64);
                    scrub(text, &cfg, &model, &mut rng)
                })
                .collect::<Result<_>>()?;
            let docs: Vec<String> = scrubbed
                .iter()
                .map(|t| model.vocab().detokenize(t))
                .collect();
            let rel = format!("{label}.scrubbed.txt");
            write_corpus(&ctx.path(&rel), &docs)?;
            ctx.record_emitted(&rel)?;
            emitted.push(ctx.path(&rel));
            ctx.finish_stage(&format!("attack:scrub:{label}"), started);
        }
        AttackKind::Steal => {
            let marked = read_tokenized_corpus(&model, &ctx.path(&format!("{label}.txt")))?;
            let clean = read_tokenized_corpus(&model, &ctx.path(CLEAN_FILE))?;
            let cap = ctx.config.attack.steal_table_texts;
            let marked_slice = &marked[..marked.len().min(cap)];
            let clean_slice = &clean[..clean.len().min(cap)];
            let gen = ctx.config.generation;
            let prompts = load_prompts(
                &model,
                &ctx.config.corpus.prompts,
                gen.prompt_tokens,
                ctx.config.attack.spoof_texts,
            )?;
            let intensity = ctx.config.attack.steal_intensity;
            let steal_seed = seed ^ STEAL_SALT ^ label_hash(label);
            for n in 1..=4usize {
                let table_w = build_ngram_table(marked_slice, n)?;
                let table_b = build_ngram_table(clean_slice, n)?;
                let table_rel = format!("{label}.steal{n}.ngrams");
                table_w.save(&ctx.path(&table_rel))?;
                ctx.record_emitted(&table_rel)?;
                let clean_table_rel = format!("clean.steal{n}.ngrams");
                table_b.save(&ctx.path(&clean_table_rel))?;
                ctx.record_emitted(&clean_table_rel)?;
                let config = SpoofConfig { n, intensity };
                let run_seed = splitmix64_mix(steal_seed ^ n as u64);
                let texts: Vec<Vec<TokenId>> = prompts
                    .par_iter()
                    .enumerate()
                    .map(|(i, prompt)| {
                        let mut rng = derive_stream(run_seed, i as u64);
                        spoof_generate(
                            &model,
                            &table_w,
                            &table_b,
                            &config,
                            prompt,
                            gen.max_tokens,
                            &mut rng,
                        )
                        .map(|t| t.ids)
                    })
                    .collect::<Result<_>>()?;
                let docs: Vec<String> =
                    texts.iter().map(|t| model.vocab().detokenize(t)).collect();
                let rel = format!("{label}.steal{n}.txt");
                write_corpus(&ctx.path(&rel), &docs)?;
                ctx.record_emitted(&rel)?;
                emitted.push(ctx.path(&rel));
            }
            ctx.finish_stage(&format!("attack:steal:{label}"), started);
        }
    }
    ctx.save_manifest()?;
    Ok(emitted)
}

fn read_detect_summary(ctx: &RunContext, tag: &str) -> Option<DetectSummary> {
    let path = ctx.path(&format!("{tag}.detect.json"));
    let data = fs::read_to_string(path).ok()?;
    serde_json::from_str(&data).ok()
}

fn mean_perplexity(scoring: &NGramModel, path: &Path) -> Result<f64> {
    let texts = read_tokenized_corpus(scoring, path)?;
    let ppls: Vec<f64> = texts
        .par_iter()
        .filter(|t| !t.is_empty())
        .map(|t| scoring.perplexity(t))
        .collect::<Result<_>>()?;
    if ppls.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(ppls.iter().sum::<f64>() / ppls.len() as f64)
}

fn file_mb(path: &Path) -> Option<f64> {
    fs::metadata(path).ok().map(|m| m.len() as f64 / 1e6)
}

pub enum EvalSource {
    Live,
    Fixtures(PathBuf),
}

/// Assemble the evaluation report. Live mode consumes artifacts produced by
/// the earlier stages and fails with MissingMetric when a characteristic has
/// no inputs; fixture mode replays the bundled reference measurements.
pub fn cmd_evaluate(ctx: &mut RunContext, source: EvalSource) -> Result<CefwReport> {
    let started = Instant::now();
    let report = match source {
        EvalSource::Fixtures(dir) => cefw::evaluate_fixtures_with(
            &dir,
            &ctx.config.weights,
            ctx.config.scenario,
            &ctx.config.bounds,
        )?,
        EvalSource::Live => evaluate_live(ctx)?,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Data(format!("report encode: {e}")))?;
    ctx.emit("report.json", json.as_bytes())?;
    ctx.emit("report.csv", cefw::report_to_csv(&report).as_bytes())?;
    emit_plots(ctx, &report)?;
    ctx.finish_stage("evaluate", started);
    ctx.save_manifest()?;
    Ok(report)
}

fn evaluate_live(ctx: &RunContext) -> Result<CefwReport> {
    let missing = |characteristic: &str, detail: String| Error::MissingMetric {
        characteristic: characteristic.into(),
        detail,
    };
    let scoring = load_model(ctx, SCORING_MODEL_FILE)?;
    let model_mb = file_mb(&ctx.path(MODEL_FILE))
        .ok_or_else(|| missing("usability", format!("{MODEL_FILE} not found; run `train`")))?;
    let clean_path = ctx.path(CLEAN_FILE);
    if !clean_path.exists() {
        return Err(missing(
            "text_quality",
            "clean.txt not found; run `generate` without a scheme".into(),
        ));
    }
    let ppl_base = mean_perplexity(&scoring, &clean_path)?;
    let gen_base = ctx
        .manifest
        .stage_seconds("generate:clean")
        .ok_or_else(|| missing("usability", "no generate:clean stage in manifest".into()))?;

    let mut entries = Vec::new();
    for spec in &ctx.config.schemes {
        let label = &spec.label;
        let plain = read_detect_summary(ctx, label).ok_or_else(|| {
            missing("detectability", format!("{label}.detect.json not found; run `detect`"))
        })?;
        let scrubbed = read_detect_summary(ctx, &format!("{label}.scrubbed")).ok_or_else(|| {
            missing(
                "robustness",
                format!("{label}.scrubbed.detect.json not found; run `attack --kind scrub` then `detect`"),
            )
        })?;
        let mut steal = [0.0f64; 4];
        for n in 1..=4usize {
            let s = read_detect_summary(ctx, &format!("{label}.steal{n}")).ok_or_else(|| {
                missing(
                    "imperceptibility",
                    format!("{label}.steal{n}.detect.json not found; run `attack --kind steal` then `detect`"),
                )
            })?;
            steal[n - 1] = s.auc;
        }
        let ppl_marked = mean_perplexity(&scoring, &ctx.path(&format!("{label}.txt")))?;
        let gen_marked = ctx
            .manifest
            .stage_seconds(&format!("generate:{label}"))
            .ok_or_else(|| missing("usability", format!("no generate:{label} stage in manifest")))?;
        let sidecar_mb = file_mb(&ctx.path(&format!("{label}.sidecar.json")))
            .ok_or_else(|| Error::MissingSidecar(format!("{label}.sidecar.json")))?;
        let raw = RawMetrics {
            detect_auc: Some(plain.auc),
            ppl_base: Some(ppl_base),
            ppl_marked: Some(ppl_marked),
            generate_seconds_base: Some(gen_base),
            generate_seconds_marked: Some(gen_marked),
            detect_seconds_total: Some(plain.detect_seconds),
            detect_texts: Some(plain.detect_texts),
            memory_base_mb: Some(model_mb),
            memory_marked_mb: Some(model_mb + sidecar_mb),
            robust_auc_before: Some(plain.auc),
            robust_auc_after: Some(scrubbed.auc),
            steal_auc: Some(steal),
        };
        entries.push(cefw::evaluate_scheme_with(
            label,
            raw,
            &ctx.config.weights,
            ctx.config.scenario,
            &ctx.config.bounds,
        )?);
    }
    Ok(CefwReport {
        version: 1,
        scenario: ctx.config.scenario,
        weights: ctx.config.weights,
        provenance: Provenance::Measured,
        groups: vec![EvalGroup {
            model: format!("ngram-{}", ctx.config.lm.order),
            dataset: ctx
                .config
                .corpus
                .train
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".into()),
            entries,
        }],
        flags: vec![cefw::DETECTABILITY_CONVENTION_FLAG.to_string()],
    })
}

fn emit_plots(ctx: &mut RunContext, report: &CefwReport) -> Result<()> {
    ctx.emit(
        "plots/characteristics.svg",
        crate::plot::characteristic_bars_svg(report).as_bytes(),
    )?;
    ctx.emit("plots/ranking.svg", crate::plot::ranking_svg(report).as_bytes())?;
    // live runs carry per-text scores; rebuild the ROC curves for plotting
    if report.provenance == Provenance::Measured {
        let mut curves = Vec::new();
        for group in &report.groups {
            for e in &group.entries {
                if let Some(rows) = read_scores_csv(&ctx.path(&format!("{}.scores.csv", e.scheme)))
                {
                    let pos: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.label == "marked")
                        .map(|r| r.z)
                        .collect();
                    let neg: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.label == "clean")
                        .map(|r| r.z)
                        .collect();
                    if !pos.is_empty() && !neg.is_empty() {
                        curves.push((e.scheme.clone(), roc_auc(&pos, &neg)?));
                    }
                }
            }
        }
        if !curves.is_empty() {
            let refs: Vec<(String, &crate::detect::RocCurve)> =
                curves.iter().map(|(l, c)| (l.clone(), c)).collect();
            ctx.emit("plots/roc.svg", crate::plot::roc_svg(&refs).as_bytes())?;
        }
    }
    Ok(())
}

fn read_scores_csv(path: &Path) -> Option<Vec<ScoreRow>> {
    let data = fs::read_to_string(path).ok()?;
    let mut rows = Vec::new();
    for line in data.lines().skip(1) {
        let mut parts = line.split(',');
        let text_id = parts.next()?.to_string();
        let label = parts.next()?.to_string();
        let g = parts.next()?.parse().ok()?;
        let t = parts.next()?.parse().ok()?;
        let z = parts.next()?.parse().ok()?;
        rows.push(ScoreRow {
            text_id,
            label,
            g,
            t,
            z,
        });
    }
    Some(rows)
}

/// Re-emit the CSV and plots for an existing report file.
pub fn cmd_report(report_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let data = fs::read_to_string(report_path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", report_path.display())))?;
    let report: CefwReport = serde_json::from_str(&data)
        .map_err(|e| Error::Data(format!("bad report {}: {e}", report_path.display())))?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("report.csv");
    fs::write(&csv_path, cefw::report_to_csv(&report))?;
    let plots_dir = out_dir.join("plots");
    fs::create_dir_all(&plots_dir)?;
    let bars = plots_dir.join("characteristics.svg");
    fs::write(&bars, crate::plot::characteristic_bars_svg(&report))?;
    let ranking = plots_dir.join("ranking.svg");
    fs::write(&ranking, crate::plot::ranking_svg(&report))?;
    Ok(vec![csv_path, bars, ranking])
}

/// Fields of the live report that carry wall-clock time (directly or through
/// the usability score); excluded from determinism comparisons.
pub const TIMING_FIELDS: &[&str] = &[
    "generate_seconds_base",
    "generate_seconds_marked",
    "detect_seconds_total",
    "s_gt",
    "s_dt",
    "s_u",
    "s_cefw",
    "s_cefw_raw_detect",
];

/// Serialize a report to JSON with the timing-derived fields removed; two
/// identically-seeded runs must agree on this projection exactly.
pub fn deterministic_report_json(report: &CefwReport) -> Result<String> {
    let mut value = serde_json::to_value(report)
        .map_err(|e| Error::Data(format!("report encode: {e}")))?;
    strip_fields(&mut value, TIMING_FIELDS);
    serde_json::to_string_pretty(&value).map_err(|e| Error::Data(format!("report encode: {e}")))
}

fn strip_fields(value: &mut serde_json::Value, fields: &[&str]) {
    match value {
        serde_json::Value::Object(map) => {
            for f in fields {
                map.remove(*f);
            }
            for (_, v) in map.iter_mut() {
                strip_fields(v, fields);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items.iter_mut() {
                strip_fields(v, fields);
            }
        }
        _ => {}
    }
}

/// Map of artifact path -> sha256 for manifest audits.
pub fn artifact_hashes(manifest: &RunManifest) -> BTreeMap<String, String> {
    manifest
        .artifacts
        .iter()
        .map(|a| (a.path.clone(), a.sha256.clone()))
        .collect()
}
