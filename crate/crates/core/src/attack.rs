//! Attacks on watermarked text: token-perturbation scrubbers and the STEAL
//! spoofing attack driven by n-gram frequency tables.
//!
//! The spoofer never sees the watermark key. It compares per-context token
//! frequencies between a watermarked and a clean corpus and biases generation
//! toward tokens that are suspiciously over-represented in the watermarked
//! one.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lm::{sample, softmax, NGramModel, TokenId, TokenSequence};
use crate::rng::{derive_stream, splitmix64_mix, SplitMix64};

/// Independent per-token perturbation rates. Replacements and insertions draw
/// from the model's unigram distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScrubConfig {
    pub replace_rate: f64,
    pub delete_rate: f64,
    pub insert_rate: f64,
}

impl Default for ScrubConfig {
    fn default() -> Self {
        ScrubConfig {
            replace_rate: 0.3,
            delete_rate: 0.0,
            insert_rate: 0.0,
        }
    }
}

impl ScrubConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("replace_rate", self.replace_rate),
            ("delete_rate", self.delete_rate),
            ("insert_rate", self.insert_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        Ok(())
    }
}

/// Per token, in fixed order: maybe replace it, maybe delete it, maybe insert
/// a fresh draw after it. Each check consumes one uniform draw so output is a
/// pure function of (text, config, model, seed).
pub fn scrub(
    text: &[TokenId],
    config: &ScrubConfig,
    model: &NGramModel,
    rng: &mut SplitMix64,
) -> Result<Vec<TokenId>> {
    config.validate()?;
    let unigram = model.unigram_probs();
    let mut out = Vec::with_capacity(text.len());
    for &tok in text {
        let mut current = tok;
        if rng.next_f64() < config.replace_rate {
            current = sample(&unigram, rng)?;
        }
        let deleted = rng.next_f64() < config.delete_rate;
        if !deleted {
            out.push(current);
        }
        if rng.next_f64() < config.insert_rate {
            out.push(sample(&unigram, rng)?);
        }
    }
    Ok(out)
}

/// External paraphraser hook: anything that rewrites text can stand in for
/// the token scrubbers.
pub trait Paraphraser {
    fn paraphrase(&self, text: &str) -> Result<String>;
}

/// The token scrubbers behind the text-level paraphraser interface. Calls
/// are deterministic: the same text always rewrites the same way.
pub struct TokenScrubber<'a> {
    pub model: &'a NGramModel,
    pub config: ScrubConfig,
    pub seed: u64,
}

impl Paraphraser for TokenScrubber<'_> {
    fn paraphrase(&self, text: &str) -> Result<String> {
        let ids = self.model.vocab().tokenize_frozen(text).ids;
        let mut rng = SplitMix64::new(self.seed);
        let out = scrub(&ids, &self.config, self.model, &mut rng)?;
        Ok(self.model.vocab().detokenize(&out))
    }
}

#[derive(Debug, Clone, Default)]
struct ContextFreq {
    freqs: HashMap<TokenId, f64>,
    total: u64,
}

/// Per-context token frequencies over length-(n+1) windows of a corpus.
#[derive(Debug, Clone)]
pub struct NGramTable {
    n: usize,
    contexts: HashMap<Vec<TokenId>, ContextFreq>,
}

const TABLE_MAGIC: &str = "wmbench-table v1";

impl NGramTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn context_count(&self) -> usize {
        self.contexts.len()
    }

    pub fn has_context(&self, ctx: &[TokenId]) -> bool {
        self.contexts.contains_key(ctx)
    }

    /// Frequency of `token` after `ctx`; None when the context was never
    /// observed.
    pub fn freq(&self, ctx: &[TokenId], token: TokenId) -> Option<f64> {
        self.contexts
            .get(ctx)
            .map(|c| c.freqs.get(&token).copied().unwrap_or(0.0))
    }

    /// Versioned text dump (n, contexts, frequencies), keys sorted.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{TABLE_MAGIC}").unwrap();
        writeln!(out, "n {}", self.n).unwrap();
        writeln!(out, "contexts {}", self.contexts.len()).unwrap();
        let mut keys: Vec<&Vec<TokenId>> = self.contexts.keys().collect();
        keys.sort();
        for key in keys {
            let cf = &self.contexts[key];
            let ctx: Vec<String> = key.iter().map(|t| t.to_string()).collect();
            let mut entries: Vec<(TokenId, f64)> =
                cf.freqs.iter().map(|(&t, &f)| (t, f)).collect();
            entries.sort_by_key(|e| e.0);
            let body: Vec<String> = entries
                .iter()
                .map(|(t, f)| format!("{t}:{f:?}"))
                .collect();
            writeln!(out, "{}\t{}\t{}", ctx.join(" "), cf.total, body.join(" ")).unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read_to_string(path)?;
        let bad = |msg: &str| Error::Data(format!("ngram table {}: {msg}", path.display()));
        let mut lines = data.lines();
        if lines.next() != Some(TABLE_MAGIC) {
            return Err(bad("bad or missing header"));
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("n "))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad n"))?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("contexts "))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad context count"))?;
        let mut contexts = HashMap::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = line.splitn(3, '\t');
            let ctx_part = parts.next().ok_or_else(|| bad("bad row"))?;
            let total: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad total"))?;
            let body = parts.next().ok_or_else(|| bad("bad row"))?;
            let ctx: Vec<TokenId> = ctx_part
                .split(' ')
                .map(|s| s.parse().map_err(|_| bad("bad context id")))
                .collect::<Result<_>>()?;
            if ctx.len() != n {
                return Err(bad("context length mismatch"));
            }
            let mut cf = ContextFreq {
                freqs: HashMap::new(),
                total,
            };
            for entry in body.split(' ') {
                let (t, f) = entry.split_once(':').ok_or_else(|| bad("bad entry"))?;
                let t: TokenId = t.parse().map_err(|_| bad("bad token id"))?;
                let f: f64 = f.parse().map_err(|_| bad("bad frequency"))?;
                cf.freqs.insert(t, f);
            }
            contexts.insert(ctx, cf);
        }
        Ok(NGramTable { n, contexts })
    }
}

/// Count every length-(n+1) window of the corpus and normalize per context.
pub fn build_ngram_table(corpus: &[Vec<TokenId>], n: usize) -> Result<NGramTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut counts: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
    for text in corpus {
        if text.len() <= n {
            continue;
        }
        for i in n..text.len() {
            *counts
                .entry(text[i - n..i].to_vec())
                .or_default()
                .entry(text[i])
                .or_insert(0) += 1;
        }
    }
    let contexts = counts
        .into_iter()
        .map(|(ctx, tok_counts)| {
            let total: u64 = tok_counts.values().sum();
            let freqs = tok_counts
                .into_iter()
                .map(|(t, c)| (t, c as f64 / total as f64))
                .collect();
            (ctx, ContextFreq { freqs, total })
        })
        .collect();
    Ok(NGramTable { n, contexts })
}

/// Frequency-ratio score for one (context, token): half the ratio of the
/// watermarked frequency to the clean frequency, capped at its supremum 1.
/// Zero when the token is not over-represented, when both frequencies are
/// zero, or when either table never saw the context.
pub fn spoof_score(
    table_w: &NGramTable,
    table_b: &NGramTable,
    ctx: &[TokenId],
    token: TokenId,
) -> f64 {
    debug_assert_eq!(table_w.n, table_b.n);
    match (table_w.freq(ctx, token), table_b.freq(ctx, token)) {
        (Some(pw), Some(pb)) => score_ratio(pw, pb),
        _ => 0.0,
    }
}

fn score_ratio(pw: f64, pb: f64) -> f64 {
    if pw <= 0.0 {
        return 0.0;
    }
    if pb <= 0.0 {
        return 1.0;
    }
    let r = pw / pb;
    if r >= 1.0 {
        0.5 * r.min(2.0)
    } else {
        0.0
    }
}

/// Spoofing attack parameters: table order n and the bias multiplier.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpoofConfig {
    pub n: usize,
    pub intensity: f64,
}

impl SpoofConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.n) {
            return Err(Error::Config(format!("spoof n must lie in 1..=4, got {}", self.n)));
        }
        if self.intensity < 0.0 || self.intensity.is_nan() {
            return Err(Error::Config(format!(
                "spoof intensity must be >= 0, got {}",
                self.intensity
            )));
        }
        Ok(())
    }
}

/// Generation with the spoofer's bias: every step adds intensity times the
/// frequency-ratio score of each candidate token, keyed by the last n
/// generated tokens. Steps before n tokens exist apply no bias.
pub fn spoof_generate(
    model: &NGramModel,
    table_w: &NGramTable,
    table_b: &NGramTable,
    config: &SpoofConfig,
    prompt: &[TokenId],
    max_tokens: usize,
    rng: &mut SplitMix64,
) -> Result<TokenSequence> {
    config.validate()?;
    if table_w.n != config.n || table_b.n != config.n {
        return Err(Error::InvalidArgument(
            "spoof tables must match the configured n".into(),
        ));
    }
    let n = config.n;
    let prompt_len = prompt.len();
    let intensity = config.intensity;
    model.generate_with(prompt, max_tokens, rng, |seq, logits| {
        let generated = seq.len() - prompt_len;
        if generated < n {
            return softmax(logits.values());
        }
        let ctx = &seq[seq.len() - n..];
        let mut biased = logits.values().to_vec();
        if let (Some(cw), true) = (table_w.contexts.get(ctx), table_b.has_context(ctx)) {
            for (&tok, &pw) in &cw.freqs {
                let pb = table_b.freq(ctx, tok).unwrap_or(0.0);
                let s = score_ratio(pw, pb);
                if s > 0.0 {
                    biased[tok as usize] += intensity * s;
                }
            }
        }
        softmax(&biased)
    })
}

/// One spoofed corpus for a single table order.
#[derive(Debug, Clone)]
pub struct SpoofRun {
    pub n: usize,
    pub texts: Vec<Vec<TokenId>>,
}

/// Run the spoofing attack for n = 1..=4: build a table pair per order and
/// emit one spoofed text per prompt, each on its own derived rng stream.
pub fn steal_suite(
    model: &NGramModel,
    marked_corpus: &[Vec<TokenId>],
    clean_corpus: &[Vec<TokenId>],
    intensity: f64,
    prompts: &[Vec<TokenId>],
    max_tokens: usize,
    seed: u64,
) -> Result<Vec<SpoofRun>> {
    if marked_corpus.is_empty() || clean_corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut runs = Vec::with_capacity(4);
    for n in 1..=4usize {
        let table_w = build_ngram_table(marked_corpus, n)?;
        let table_b = build_ngram_table(clean_corpus, n)?;
        let config = SpoofConfig { n, intensity };
        let run_seed = splitmix64_mix(seed ^ n as u64);
        let texts: Vec<Vec<TokenId>> = prompts
            .par_iter()
            .enumerate()
            .map(|(idx, prompt)| {
                let mut rng = derive_stream(run_seed, idx as u64);
                spoof_generate(model, &table_w, &table_b, &config, prompt, max_tokens, &mut rng)
                    .map(|t| t.ids)
            })
            .collect::<Result<_>>()?;
        runs.push(SpoofRun { n, texts });
    }
    Ok(runs)
}
