//! Tokenization, a Laplace-smoothed backoff n-gram language model, and the
//! sampling loop that watermark schemes and attacks hook into.
//!
//! The model is deliberately small: order-k counts with add-alpha smoothing
//! and longest-seen-context backoff. It is just enough language model for the
//! watermark and attack statistics to be meaningful while staying fast and
//! fully deterministic.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub type TokenId = u32;

/// Reserved padding token, always at id 0. It pads watermark context lookups
/// before the start of a sequence and absorbs out-of-vocabulary words under
/// frozen tokenization. Generation never emits it.
pub const SENTINEL: &str = "<s>";
pub const SENTINEL_ID: TokenId = 0;

const MODEL_MAGIC: &str = "wmbench-ngram v1";

/// Dense token-id space: ids are 0..len, bijective with token strings.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.intern(SENTINEL);
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        // never true: the sentinel is always present
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Tokenize, adding unseen words to the vocabulary.
    pub fn tokenize_build(&mut self, text: &str) -> TokenSequence {
        let ids = split_tokens(text)
            .iter()
            .map(|w| self.intern(w))
            .collect();
        TokenSequence::new(ids, Role::Full)
    }

    /// Tokenize against the fixed vocabulary; unknown words map to the sentinel.
    pub fn tokenize_frozen(&self, text: &str) -> TokenSequence {
        let ids = split_tokens(text)
            .iter()
            .map(|w| self.id(w).unwrap_or(SENTINEL_ID))
            .collect();
        TokenSequence::new(ids, Role::Full)
    }

    /// Render a token sequence back to corpus text (space-joined). Every
    /// non-sentinel token round-trips exactly through `tokenize_frozen`.
    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.token(id));
        }
        out
    }
}

/// Deterministic word splitter: lowercase, split on Unicode whitespace, then
/// peel leading/trailing non-alphanumeric characters off as one-char tokens.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && !chars[start].is_alphanumeric() {
            start += 1;
        }
        while end > start && !chars[end - 1].is_alphanumeric() {
            end -= 1;
        }
        for c in &chars[..start] {
            out.push(c.to_string());
        }
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        for c in &chars[end..] {
            out.push(c.to_string());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Prompt,
    Generated,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub role: Role,
}

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>, role: Role) -> Self {
        TokenSequence { ids, role }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.ids
    }
}

/// One unnormalized log-score per vocabulary id.
#[derive(Debug, Clone)]
pub struct Logits(pub Vec<f64>);

impl Logits {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Temperature-scaled copy (every score divided by `temperature`).
    /// Scaling by 1.0 is bit-exact identity.
    pub fn tempered(&self, temperature: f64) -> Logits {
        Logits(self.0.iter().map(|v| v / temperature).collect())
    }
}

#[derive(Debug, Clone, Default)]
struct ContextStats {
    counts: HashMap<TokenId, u32>,
    total: u64,
}

/// One table's worth of (context, per-token counts) rows, for hand-built
/// test models.
#[cfg(test)]
pub(crate) type RawContextCounts = Vec<(Vec<TokenId>, Vec<(TokenId, u32)>)>;

/// Order-k n-gram model with add-alpha smoothing and backoff to the longest
/// context actually seen in training.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    // tables[l] holds contexts of length l, for l in 0..order
    tables: Vec<HashMap<Vec<TokenId>, ContextStats>>,
    trained_tokens: u64,
}

impl NGramModel {
    pub fn train(corpus: &[String], order: usize, alpha: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidArgument("order must be >= 1".into()));
        }
        if alpha <= 0.0 || alpha.is_nan() {
            return Err(Error::InvalidArgument("alpha must be > 0".into()));
        }
        let mut vocab = Vocabulary::new();
        let docs: Vec<Vec<TokenId>> = corpus
            .iter()
            .map(|line| vocab.tokenize_build(line).ids)
            .collect();
        let mut trained_tokens = 0u64;
        let mut tables: Vec<HashMap<Vec<TokenId>, ContextStats>> =
            (0..order).map(|_| HashMap::new()).collect();
        for doc in &docs {
            trained_tokens += doc.len() as u64;
            for i in 0..doc.len() {
                for (l, table) in tables.iter_mut().enumerate() {
                    if l > i {
                        break;
                    }
                    let stats = table.entry(doc[i - l..i].to_vec()).or_default();
                    *stats.counts.entry(doc[i]).or_insert(0) += 1;
                    stats.total += 1;
                }
            }
        }
        if trained_tokens == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(NGramModel {
            order,
            alpha,
            vocab,
            tables,
            trained_tokens,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn trained_tokens(&self) -> u64 {
        self.trained_tokens
    }

    /// Counts for the longest trained suffix of `context` (length is capped
    /// at order-1). Length 0 always resolves: the unigram table is populated
    /// for any non-empty corpus.
    fn backoff_stats(&self, context: &[TokenId]) -> &ContextStats {
        let max_l = (self.order - 1).min(context.len());
        for l in (1..=max_l).rev() {
            if let Some(stats) = self.tables[l].get(&context[context.len() - l..]) {
                return stats;
            }
        }
        self.tables[0]
            .get(&[][..])
            .expect("unigram table is populated at training time")
    }

    /// Smoothed conditional probability of `token` after `context`.
    pub fn cond_prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let stats = self.backoff_stats(context);
        let count = stats.counts.get(&token).copied().unwrap_or(0) as f64;
        let denom = stats.total as f64 + self.alpha * self.vocab.len() as f64;
        (count + self.alpha) / denom
    }

    /// Log-probability vector over the whole vocabulary for the next token.
    /// softmax(logits) reproduces the smoothed conditional distribution.
    pub fn logits(&self, context: &[TokenId]) -> Logits {
        let mut buf = Vec::new();
        self.logits_into(context, &mut buf);
        Logits(buf)
    }

    fn logits_into(&self, context: &[TokenId], buf: &mut Vec<f64>) {
        let stats = self.backoff_stats(context);
        let ln_denom = (stats.total as f64 + self.alpha * self.vocab.len() as f64).ln();
        let base = self.alpha.ln() - ln_denom;
        buf.clear();
        buf.resize(self.vocab.len(), base);
        for (&tok, &count) in &stats.counts {
            buf[tok as usize] = (count as f64 + self.alpha).ln() - ln_denom;
        }
    }

    /// Smoothed unigram distribution with the sentinel masked out, matching
    /// what generation can actually emit. Used as the scrubbers' replacement
    /// source.
    pub fn unigram_probs(&self) -> Vec<f64> {
        let mut probs = softmax(self.logits(&[]).values());
        mask_sentinel(&mut probs);
        probs
    }

    /// exp(-(1/T) sum log P(token_i | previous tokens)).
    pub fn perplexity(&self, text: &[TokenId]) -> Result<f64> {
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut log_sum = 0.0;
        for i in 0..text.len() {
            log_sum += self.cond_prob(&text[..i], text[i]).ln();
        }
        Ok((-log_sum / text.len() as f64).exp())
    }

    /// Plain ancestral sampling: softmax of the logits at every step.
    pub fn generate(
        &self,
        prompt: &[TokenId],
        max_tokens: usize,
        rng: &mut SplitMix64,
    ) -> Result<TokenSequence> {
        self.generate_tempered(prompt, max_tokens, rng, 1.0)
    }

    /// Ancestral sampling at a given temperature (1.0 = pure sampling).
    pub fn generate_tempered(
        &self,
        prompt: &[TokenId],
        max_tokens: usize,
        rng: &mut SplitMix64,
        temperature: f64,
    ) -> Result<TokenSequence> {
        if temperature <= 0.0 || temperature.is_nan() {
            return Err(Error::InvalidArgument("temperature must be > 0".into()));
        }
        self.generate_with(prompt, max_tokens, rng, |_, logits| {
            softmax(logits.tempered(temperature).values())
        })
    }

    /// Sampling loop with a per-step hook mapping (sequence so far, logits)
    /// to the step distribution. The sentinel is masked after the hook, so
    /// emitted ids always round-trip through corpus files.
    pub fn generate_with<F>(
        &self,
        prompt: &[TokenId],
        max_tokens: usize,
        rng: &mut SplitMix64,
        mut step: F,
    ) -> Result<TokenSequence>
    where
        F: FnMut(&[TokenId], &Logits) -> Vec<f64>,
    {
        if max_tokens < 1 {
            return Err(Error::InvalidArgument("max_tokens must be >= 1".into()));
        }
        let mut seq = prompt.to_vec();
        let mut logits = Logits(Vec::new());
        let mut generated = Vec::with_capacity(max_tokens);
        for _ in 0..max_tokens {
            self.logits_into(&seq, &mut logits.0);
            let mut probs = step(&seq, &logits);
            mask_sentinel(&mut probs);
            let tok = sample(&probs, rng)?;
            seq.push(tok);
            generated.push(tok);
        }
        Ok(TokenSequence::new(generated, Role::Generated))
    }

    /// Versioned text dump: header, vocabulary, then per-length count tables
    /// with keys in sorted order so identical models produce identical bytes.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{MODEL_MAGIC}").unwrap();
        writeln!(out, "order {}", self.order).unwrap();
        writeln!(out, "alpha {:?}", self.alpha).unwrap();
        writeln!(out, "tokens {}", self.trained_tokens).unwrap();
        writeln!(out, "vocab {}", self.vocab.len()).unwrap();
        for tok in self.vocab.tokens() {
            writeln!(out, "{tok}").unwrap();
        }
        for (l, table) in self.tables.iter().enumerate() {
            writeln!(out, "table {} {}", l, table.len()).unwrap();
            let mut keys: Vec<&Vec<TokenId>> = table.keys().collect();
            keys.sort();
            for key in keys {
                let stats = &table[key];
                let ctx: Vec<String> = key.iter().map(|id| id.to_string()).collect();
                let mut entries: Vec<(TokenId, u32)> =
                    stats.counts.iter().map(|(&t, &c)| (t, c)).collect();
                entries.sort_unstable();
                let body: Vec<String> = entries
                    .iter()
                    .map(|(t, c)| format!("{t}:{c}"))
                    .collect();
                writeln!(out, "{}\t{}", ctx.join(" "), body.join(" ")).unwrap();
            }
        }
        writeln!(out, "end").unwrap();
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read_to_string(path)?;
        let mut lines = data.lines();
        let bad = |msg: &str| Error::Data(format!("model dump {}: {msg}", path.display()));
        if lines.next() != Some(MODEL_MAGIC) {
            return Err(bad("bad or missing header"));
        }
        let field = |line: Option<&str>, name: &str| -> Result<String> {
            let line = line.ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(|s| s.to_string())
                .ok_or_else(|| bad(&format!("expected `{name}` line")))
        };
        let order: usize = field(lines.next(), "order")?
            .parse()
            .map_err(|_| bad("bad order"))?;
        let alpha: f64 = field(lines.next(), "alpha")?
            .parse()
            .map_err(|_| bad("bad alpha"))?;
        let trained_tokens: u64 = field(lines.next(), "tokens")?
            .parse()
            .map_err(|_| bad("bad token count"))?;
        let vocab_len: usize = field(lines.next(), "vocab")?
            .parse()
            .map_err(|_| bad("bad vocab size"))?;
        let mut vocab = Vocabulary::new();
        for i in 0..vocab_len {
            let tok = lines.next().ok_or_else(|| bad("truncated vocabulary"))?;
            if i == 0 {
                if tok != SENTINEL {
                    return Err(bad("vocabulary must start with the sentinel"));
                }
                continue;
            }
            vocab.intern(tok);
        }
        if vocab.len() != vocab_len {
            return Err(bad("duplicate vocabulary entries"));
        }
        let mut tables = Vec::with_capacity(order);
        for l in 0..order {
            let header = lines.next().ok_or_else(|| bad("missing table header"))?;
            let mut parts = header.split_whitespace();
            if parts.next() != Some("table") {
                return Err(bad("expected `table` line"));
            }
            let got_l: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad table length tag"))?;
            if got_l != l {
                return Err(bad("table length tags out of order"));
            }
            let n_ctx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad context count"))?;
            let mut table = HashMap::with_capacity(n_ctx);
            for _ in 0..n_ctx {
                let line = lines.next().ok_or_else(|| bad("truncated table"))?;
                let (ctx_part, body) = line
                    .split_once('\t')
                    .ok_or_else(|| bad("bad table row"))?;
                let ctx: Vec<TokenId> = if ctx_part.is_empty() {
                    Vec::new()
                } else {
                    ctx_part
                        .split(' ')
                        .map(|s| s.parse().map_err(|_| bad("bad context id")))
                        .collect::<Result<_>>()?
                };
                if ctx.len() != l {
                    return Err(bad("context length mismatch"));
                }
                let mut stats = ContextStats::default();
                for entry in body.split(' ') {
                    let (t, c) = entry
                        .split_once(':')
                        .ok_or_else(|| bad("bad count entry"))?;
                    let t: TokenId = t.parse().map_err(|_| bad("bad token id"))?;
                    let c: u32 = c.parse().map_err(|_| bad("bad count"))?;
                    stats.counts.insert(t, c);
                    stats.total += c as u64;
                }
                table.insert(ctx, stats);
            }
            tables.push(table);
        }
        if lines.next() != Some("end") {
            return Err(bad("missing end marker"));
        }
        Ok(NGramModel {
            order,
            alpha,
            vocab,
            tables,
            trained_tokens,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        order: usize,
        alpha: f64,
        vocab: Vocabulary,
        raw_tables: Vec<RawContextCounts>,
    ) -> Self {
        let mut tables: Vec<HashMap<Vec<TokenId>, ContextStats>> =
            (0..order).map(|_| HashMap::new()).collect();
        for (l, rows) in raw_tables.into_iter().enumerate() {
            for (ctx, counts) in rows {
                let mut stats = ContextStats::default();
                for (t, c) in counts {
                    stats.counts.insert(t, c);
                    stats.total += c as u64;
                }
                tables[l].insert(ctx, stats);
            }
        }
        NGramModel {
            order,
            alpha,
            vocab,
            tables,
            trained_tokens: 0,
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Zero the sentinel's probability and renormalize the rest.
fn mask_sentinel(probs: &mut [f64]) {
    let p0 = probs[SENTINEL_ID as usize];
    if p0 > 0.0 {
        probs[SENTINEL_ID as usize] = 0.0;
        let rest: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= rest;
        }
    }
}

/// Inverse-CDF sampling over ids in ascending order.
pub fn sample(probs: &[f64], rng: &mut SplitMix64) -> Result<TokenId> {
    let mut sum = 0.0;
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!("bad entry {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("sum {sum}")));
    }
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i as TokenId);
        }
    }
    // u landed in the rounding tail; take the last id with mass
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .map(|i| i as TokenId)
        .ok_or_else(|| Error::InvalidDistribution("all-zero distribution".into()))
}
