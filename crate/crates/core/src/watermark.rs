//! Vocabulary partition functions and the three decode-time watermark
//! embedders, wired into generation as step hooks.
//!
//! All three schemes split the vocabulary into a green and a red list and add
//! a logit bonus delta to green tokens before sampling. They differ only in
//! how the green list is chosen at each step:
//!
//! * UNIW: one fixed key-derived partition for the whole generation.
//! * KGW:  the vocabulary is re-partitioned every step from a hash of the
//!   context token `w` positions back.
//! * BW:   two fixed key-derived halves A/B; a frequency-rank-parity Select
//!   Function of the context token picks which half is green per step.
//!
//! Partition seeds and shuffles are pinned to splitmix64 + Fisher-Yates so
//! embedding and detection agree bit-for-bit across platforms and processes.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::sha256_hex;
use crate::lm::{softmax, Logits, NGramModel, TokenId, TokenSequence, SENTINEL_ID};
use crate::rng::{fisher_yates, splitmix64_mix, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniw,
    Kgw,
    Bw,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::Uniw => "uniw",
            Scheme::Kgw => "kgw",
            Scheme::Bw => "bw",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniw" => Ok(Scheme::Uniw),
            "kgw" => Ok(Scheme::Kgw),
            "bw" => Ok(Scheme::Bw),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Scheme kind, logit bias delta, context distance w, and secret key. The
/// green fraction gamma is fixed at 0.5: all schemes use an equal partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatermarkConfig {
    pub scheme: Scheme,
    pub delta: f64,
    pub window: usize,
    pub key: u64,
    pub gamma: f64,
}

impl WatermarkConfig {
    pub fn new(scheme: Scheme, delta: f64, window: usize, key: u64) -> Self {
        WatermarkConfig {
            scheme,
            delta,
            window,
            key,
            gamma: 0.5,
        }
    }

    /// delta = 0 is accepted so a watermarker can be driven in pass-through
    /// mode; detection is only meaningful for delta > 0.
    pub fn validate(&self) -> Result<()> {
        if self.delta < 0.0 || self.delta.is_nan() {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.window < 1 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.gamma != 0.5 {
            return Err(Error::Config(format!(
                "gamma is fixed at 0.5, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// An equal split of the id space. Green and red are complements; their sizes
/// differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    is_green: Vec<bool>,
    n_green: usize,
}

impl Partition {
    fn from_seed(seed: u64, vocab_size: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::InvalidArgument(
                "partition needs a vocabulary of at least 2 tokens".into(),
            ));
        }
        let mut ids: Vec<TokenId> = (0..vocab_size as TokenId).collect();
        let mut rng = SplitMix64::new(seed);
        fisher_yates(&mut ids, &mut rng);
        let n_green = vocab_size.div_ceil(2);
        let mut is_green = vec![false; vocab_size];
        for &id in &ids[..n_green] {
            is_green[id as usize] = true;
        }
        Ok(Partition { is_green, n_green })
    }

    pub fn size(&self) -> usize {
        self.is_green.len()
    }

    pub fn green_count(&self) -> usize {
        self.n_green
    }

    pub fn is_green(&self, id: TokenId) -> bool {
        self.is_green[id as usize]
    }

    pub fn green_ids(&self) -> Vec<TokenId> {
        (0..self.size() as TokenId)
            .filter(|&id| self.is_green(id))
            .collect()
    }

    pub fn red_ids(&self) -> Vec<TokenId> {
        (0..self.size() as TokenId)
            .filter(|&id| !self.is_green(id))
            .collect()
    }
}

/// Key-seeded fixed split. The first ceil(|V|/2) shuffled ids form list A,
/// reported as green; the remainder form list B.
pub fn partition_fixed(key: u64, vocab_size: usize) -> Result<Partition> {
    Partition::from_seed(key, vocab_size)
}

/// Per-step split keyed by the context token: the partition seed is the
/// one-shot splitmix64 hash of `key XOR (context_token + 1)`.
pub fn partition_hashed(key: u64, context_token: TokenId, vocab_size: usize) -> Result<Partition> {
    let seed = splitmix64_mix(key ^ (context_token as u64 + 1));
    Partition::from_seed(seed, vocab_size)
}

/// Frequency-rank-parity bit per token id. Tokens are sorted by descending
/// frequency (ties by ascending id); the bit is 1 exactly at even 1-based
/// ranks, so adjacent ranks alternate and both signal classes carry roughly
/// equal probability mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectFunction {
    bits: Vec<bool>,
}

impl SelectFunction {
    pub fn signal(&self, token: TokenId) -> bool {
        self.bits[token as usize]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let bits: Result<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Data(format!("bad bit `{other}` in select table"))),
            })
            .collect();
        Ok(SelectFunction { bits: bits? })
    }

    /// Constant-1 function; collapses BW onto UNIW with green = A.
    pub fn constant_one(vocab_size: usize) -> Self {
        SelectFunction {
            bits: vec![true; vocab_size],
        }
    }
}

/// Build the Select Function from token frequency counts. Ids missing from
/// `freq` count as zero.
pub fn build_select_function(freq: &HashMap<TokenId, u64>, vocab_size: usize) -> SelectFunction {
    let mut ranked: Vec<TokenId> = (0..vocab_size as TokenId).collect();
    ranked.sort_by_key(|&id| (std::cmp::Reverse(freq.get(&id).copied().unwrap_or(0)), id));
    let mut bits = vec![false; vocab_size];
    for (rank0, &id) in ranked.iter().enumerate() {
        bits[id as usize] = (rank0 + 1) % 2 == 0;
    }
    SelectFunction { bits }
}

/// Count every generated token id over `n_texts` unwatermarked samples drawn
/// from the model.
pub fn count_token_frequencies(
    model: &NGramModel,
    n_texts: usize,
    max_tokens: usize,
    rng: &mut SplitMix64,
) -> Result<HashMap<TokenId, u64>> {
    if n_texts < 1 {
        return Err(Error::InvalidArgument("n_texts must be >= 1".into()));
    }
    let mut freq = HashMap::new();
    for _ in 0..n_texts {
        let text = model.generate(&[], max_tokens, rng)?;
        for &tok in &text.ids {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    Ok(freq)
}

/// A per-step view of the green list without copying the underlying split.
pub enum StepGreen<'a> {
    /// Fixed halves with an optional flip: green is A when `a_is_green`.
    Halves {
        halves: &'a Partition,
        a_is_green: bool,
    },
    /// Freshly derived per-step partition (KGW).
    Owned(Partition),
}

impl StepGreen<'_> {
    pub fn is_green(&self, id: TokenId) -> bool {
        match self {
            StepGreen::Halves { halves, a_is_green } => halves.is_green(id) == *a_is_green,
            StepGreen::Owned(p) => p.is_green(id),
        }
    }
}

/// Pick the green half for one BW step: A when the Select Function signals 1
/// on the context token, B otherwise.
pub fn select_green<'a>(
    sf: &SelectFunction,
    context_token: TokenId,
    halves: &'a Partition,
) -> StepGreen<'a> {
    StepGreen::Halves {
        halves,
        a_is_green: sf.signal(context_token),
    }
}

/// Biased step distribution: softmax of the logits with `delta` added to
/// every green token. With delta = 0 this is exactly plain softmax.
pub fn apply_bias<F>(logits: &Logits, is_green: F, delta: f64) -> Vec<f64>
where
    F: Fn(TokenId) -> bool,
{
    let mut biased: Vec<f64> = logits.values().to_vec();
    for (id, v) in biased.iter_mut().enumerate() {
        if is_green(id as TokenId) {
            *v += delta;
        }
    }
    softmax(&biased)
}

/// Serialized watermark state: enough to rebuild the detector in a separate
/// process. Fixed partitions are re-derived from the key; the BW select table
/// is stored verbatim along with a hash of the frequency snapshot it came
/// from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub scheme: Scheme,
    pub delta: f64,
    pub window: usize,
    pub key: u64,
    pub gamma: f64,
    pub vocab_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select_bits: Option<String>,
}

/// Output of one watermarked generation: the generated ids plus per-step
/// bookkeeping used by agreement and balance checks.
#[derive(Debug, Clone)]
pub struct EmbedOutput {
    pub text: TokenSequence,
    /// For each generated position, whether the sampled token was green.
    pub green_flags: Vec<bool>,
    /// BW only: for each step, whether half A was selected as green.
    pub a_selected: Vec<bool>,
}

enum Aux {
    Fixed(Partition),
    Hashed,
    Balanced {
        halves: Partition,
        select: SelectFunction,
        freq_sha256: String,
    },
}

/// A prepared watermark embedder/detector for one configuration and one
/// vocabulary. Immutable after construction and safe to share across
/// generation streams.
pub struct Watermarker {
    config: WatermarkConfig,
    vocab_size: usize,
    aux: Aux,
}

impl Watermarker {
    /// Build scheme state. BW requires token frequency counts for its Select
    /// Function; the other schemes ignore `freq`.
    pub fn prepare(
        config: WatermarkConfig,
        vocab_size: usize,
        freq: Option<&HashMap<TokenId, u64>>,
    ) -> Result<Self> {
        config.validate()?;
        let aux = match config.scheme {
            Scheme::Uniw => Aux::Fixed(partition_fixed(config.key, vocab_size)?),
            Scheme::Kgw => {
                if vocab_size < 2 {
                    return Err(Error::InvalidArgument(
                        "partition needs a vocabulary of at least 2 tokens".into(),
                    ));
                }
                Aux::Hashed
            }
            Scheme::Bw => {
                let freq = freq.ok_or_else(|| {
                    Error::InvalidArgument(
                        "bw requires token frequency counts for the select function".into(),
                    )
                })?;
                Aux::Balanced {
                    halves: partition_fixed(config.key, vocab_size)?,
                    select: build_select_function(freq, vocab_size),
                    freq_sha256: freq_digest(freq),
                }
            }
        };
        Ok(Watermarker {
            config,
            vocab_size,
            aux,
        })
    }

    /// Rebuild BW state from an explicit select table (detector side).
    pub fn from_select_function(
        config: WatermarkConfig,
        vocab_size: usize,
        select: SelectFunction,
        freq_sha256: String,
    ) -> Result<Self> {
        config.validate()?;
        if config.scheme != Scheme::Bw {
            return Err(Error::Config(
                "select tables only apply to the bw scheme".into(),
            ));
        }
        if select.len() != vocab_size {
            return Err(Error::Data("select table size != vocabulary size".into()));
        }
        Ok(Watermarker {
            config,
            vocab_size,
            aux: Aux::Balanced {
                halves: partition_fixed(config.key, vocab_size)?,
                select,
                freq_sha256,
            },
        })
    }

    pub fn config(&self) -> &WatermarkConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn scheme(&self) -> Scheme {
        self.config.scheme
    }

    /// The context token feeding the step partition for the token at `pos`
    /// in `seq`; positions within the first `window` steps pad with the
    /// sentinel.
    pub fn context_token(seq: &[TokenId], pos: usize, window: usize) -> TokenId {
        if pos >= window {
            seq[pos - window]
        } else {
            SENTINEL_ID
        }
    }

    /// Green list in effect for a step whose context token is `context`.
    pub fn step_green(&self, context: TokenId) -> Result<StepGreen<'_>> {
        match &self.aux {
            Aux::Fixed(p) => Ok(StepGreen::Halves {
                halves: p,
                a_is_green: true,
            }),
            Aux::Hashed => Ok(StepGreen::Owned(partition_hashed(
                self.config.key,
                context,
                self.vocab_size,
            )?)),
            Aux::Balanced { halves, select, .. } => Ok(select_green(select, context, halves)),
        }
    }

    /// BW's step signal, if this watermarker is BW.
    fn bw_signal(&self, context: TokenId) -> Option<bool> {
        match &self.aux {
            Aux::Balanced { select, .. } => Some(select.signal(context)),
            _ => None,
        }
    }

    /// Watermarked generation: per step, select green per scheme, bias the
    /// logits by delta, softmax, and sample.
    pub fn generate(
        &self,
        model: &NGramModel,
        prompt: &[TokenId],
        max_tokens: usize,
        rng: &mut SplitMix64,
    ) -> Result<EmbedOutput> {
        self.generate_tempered(model, prompt, max_tokens, rng, 1.0)
    }

    /// Watermarked generation with temperature scaling applied to the logits
    /// before the green bias (1.0 = pure sampling, bit-identical to
    /// [`Watermarker::generate`]).
    pub fn generate_tempered(
        &self,
        model: &NGramModel,
        prompt: &[TokenId],
        max_tokens: usize,
        rng: &mut SplitMix64,
        temperature: f64,
    ) -> Result<EmbedOutput> {
        if temperature <= 0.0 || temperature.is_nan() {
            return Err(Error::InvalidArgument("temperature must be > 0".into()));
        }
        if prompt.is_empty() {
            return Err(Error::InvalidArgument(
                "watermarked generation requires a non-empty prompt".into(),
            ));
        }
        if model.vocab_size() != self.vocab_size {
            return Err(Error::InvalidArgument(
                "watermarker and model vocabulary sizes differ".into(),
            ));
        }
        // per-step record of the green list, replayed after sampling to tally
        // the drawn token's color without deriving the partition twice
        enum StepRecord {
            AIsGreen(bool),
            Owned(Partition),
        }
        let mut records: Vec<StepRecord> = Vec::with_capacity(max_tokens);
        let mut a_selected = Vec::new();
        let window = self.config.window;
        let delta = self.config.delta;
        let mut step_err = None;
        let text = model.generate_with(prompt, max_tokens, rng, |seq, logits| {
            let ctx = Self::context_token(seq, seq.len(), window);
            match self.step_green(ctx) {
                Ok(green) => {
                    if let Some(sig) = self.bw_signal(ctx) {
                        a_selected.push(sig);
                    }
                    let probs = apply_bias(
                        &logits.tempered(temperature),
                        |id| green.is_green(id),
                        delta,
                    );
                    records.push(match green {
                        StepGreen::Halves { a_is_green, .. } => StepRecord::AIsGreen(a_is_green),
                        StepGreen::Owned(p) => StepRecord::Owned(p),
                    });
                    probs
                }
                Err(e) => {
                    step_err = Some(e);
                    softmax(logits.values())
                }
            }
        })?;
        if let Some(e) = step_err {
            return Err(e);
        }
        let halves = match &self.aux {
            Aux::Fixed(p) => Some(p),
            Aux::Balanced { halves, .. } => Some(halves),
            Aux::Hashed => None,
        };
        let green_flags = text
            .ids
            .iter()
            .zip(&records)
            .map(|(&tok, record)| match record {
                StepRecord::AIsGreen(a_is_green) => {
                    halves.expect("fixed halves exist").is_green(tok) == *a_is_green
                }
                StepRecord::Owned(p) => p.is_green(tok),
            })
            .collect();
        Ok(EmbedOutput {
            text,
            green_flags,
            a_selected,
        })
    }

    pub fn sidecar(&self) -> Sidecar {
        let (freq_sha256, select_bits) = match &self.aux {
            Aux::Balanced {
                select,
                freq_sha256,
                ..
            } => (Some(freq_sha256.clone()), Some(select.to_bit_string())),
            _ => (None, None),
        };
        Sidecar {
            version: 1,
            scheme: self.config.scheme,
            delta: self.config.delta,
            window: self.config.window,
            key: self.config.key,
            gamma: self.config.gamma,
            vocab_size: self.vocab_size,
            freq_sha256,
            select_bits,
        }
    }

    pub fn save_sidecar(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| Error::Data(format!("sidecar encode: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load_sidecar(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingSidecar(path.display().to_string()));
        }
        let data = fs::read_to_string(path)?;
        let sc: Sidecar = serde_json::from_str(&data)
            .map_err(|e| Error::Data(format!("sidecar decode {}: {e}", path.display())))?;
        if sc.version != 1 {
            return Err(Error::Data(format!(
                "unsupported sidecar version {}",
                sc.version
            )));
        }
        let mut config = WatermarkConfig::new(sc.scheme, sc.delta, sc.window, sc.key);
        config.gamma = sc.gamma;
        match sc.scheme {
            Scheme::Bw => {
                let bits = sc.select_bits.ok_or_else(|| {
                    Error::Data("bw sidecar is missing its select table".into())
                })?;
                Watermarker::from_select_function(
                    config,
                    sc.vocab_size,
                    SelectFunction::from_bit_string(&bits)?,
                    sc.freq_sha256.unwrap_or_default(),
                )
            }
            _ => Watermarker::prepare(config, sc.vocab_size, None),
        }
    }

    /// Bytes of watermark-side state that detection needs beyond the model:
    /// the serialized sidecar.
    pub fn aux_bytes(&self) -> u64 {
        serde_json::to_string(&self.sidecar())
            .map(|s| s.len() as u64)
            .unwrap_or(0)
    }
}

fn freq_digest(freq: &HashMap<TokenId, u64>) -> String {
    let mut entries: Vec<(TokenId, u64)> = freq.iter().map(|(&t, &c)| (t, c)).collect();
    entries.sort_unstable();
    let mut snapshot = String::new();
    for (t, c) in entries {
        snapshot.push_str(&format!("{t}:{c}\n"));
    }
    sha256_hex(snapshot.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_model() -> NGramModel {
        let corpus = vec![
            "the cat sat on the mat and the dog ran off .".to_string(),
            "a small cat saw a big dog near the old tree .".to_string(),
            "the bird flew over the house and the cat slept .".to_string(),
        ];
        NGramModel::train(&corpus, 3, 0.1).unwrap()
    }

    #[test]
    fn fixed_partition_is_deterministic() {
        let a = partition_fixed(42, 101).unwrap();
        let b = partition_fixed(42, 101).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_partition_sizes() {
        let p = partition_fixed(7, 5).unwrap();
        assert_eq!(p.green_count(), 3);
        assert_eq!(p.green_ids().len(), 3);
        assert_eq!(p.red_ids().len(), 2);
        let q = partition_fixed(7, 6).unwrap();
        assert_eq!(q.green_count(), 3);
    }

    #[test]
    fn fixed_partition_invariants() {
        let p = partition_fixed(0xFEED, 33).unwrap();
        let green = p.green_ids();
        let red = p.red_ids();
        assert_eq!(green.len() + red.len(), 33);
        assert!(green.iter().all(|id| !red.contains(id)));
        assert!(green.len().abs_diff(red.len()) <= 1);
    }

    #[test]
    fn distinct_keys_give_distinct_partitions() {
        let mut differing = 0;
        for k in 0..100u64 {
            let a = partition_fixed(k, 64).unwrap();
            let b = partition_fixed(k + 1_000_003, 64).unwrap();
            if a != b {
                differing += 1;
            }
        }
        assert_eq!(differing, 100);
    }

    #[test]
    fn partition_too_small_vocab() {
        assert!(partition_fixed(1, 1).is_err());
    }

    #[test]
    fn hashed_partition_depends_on_token() {
        let key = 99;
        let a = partition_hashed(key, 5, 64).unwrap();
        let b = partition_hashed(key, 5, 64).unwrap();
        assert_eq!(a, b);
        let mut differing = 0;
        let mut rng = SplitMix64::new(3);
        for _ in 0..100 {
            let t1 = rng.next_below(32) as TokenId;
            let t2 = 32 + rng.next_below(32) as TokenId;
            let p1 = partition_hashed(key, t1, 64).unwrap();
            let p2 = partition_hashed(key, t2, 64).unwrap();
            if p1 != p2 {
                differing += 1;
            }
        }
        assert!(differing >= 99, "only {differing} of 100 pairs differ");
    }

    #[test]
    fn hashed_partition_green_fraction() {
        // every per-token partition is an equal split, so the average green
        // fraction over all context tokens is 0.5 up to the ceiling rule
        let n = 101usize;
        let mut total_green = 0usize;
        for t in 0..n as TokenId {
            total_green += partition_hashed(7, t, n).unwrap().green_count();
        }
        let frac = total_green as f64 / (n * n) as f64;
        assert!((frac - 0.5).abs() < 0.02, "frac {frac}");
    }

    #[test]
    fn select_function_rank_parity() {
        // freq ranks t1 > t2 > t3 > t4 -> bits (0, 1, 0, 1) in rank order
        let mut freq = HashMap::new();
        freq.insert(2 as TokenId, 40u64); // rank 1
        freq.insert(0 as TokenId, 30); // rank 2
        freq.insert(3 as TokenId, 20); // rank 3
        freq.insert(1 as TokenId, 10); // rank 4
        let sf = build_select_function(&freq, 4);
        assert!(!sf.signal(2));
        assert!(sf.signal(0));
        assert!(!sf.signal(3));
        assert!(sf.signal(1));
    }

    #[test]
    fn select_function_tie_break_by_id() {
        // all counts equal -> ranking is ascending id, parity alternates
        let freq = HashMap::new();
        let sf = build_select_function(&freq, 6);
        for id in 0..6u32 {
            assert_eq!(sf.signal(id), (id + 1) % 2 == 0, "id {id}");
        }
    }

    #[test]
    fn select_function_ones_count() {
        let freq = HashMap::new();
        let sf = build_select_function(&freq, 7);
        assert_eq!(sf.ones(), 3);
    }

    #[test]
    fn count_frequencies_accounting() {
        let model = small_model();
        let mut rng = SplitMix64::new(11);
        let freq = count_token_frequencies(&model, 5, 40, &mut rng).unwrap();
        let total: u64 = freq.values().sum();
        assert_eq!(total, 5 * 40);
        assert!(count_token_frequencies(&model, 0, 40, &mut SplitMix64::new(1)).is_err());
        // deterministic under the same seed
        let again = count_token_frequencies(&model, 5, 40, &mut SplitMix64::new(11)).unwrap();
        assert_eq!(freq, again);
    }

    #[test]
    fn select_green_picks_halves() {
        let halves = partition_fixed(5, 10).unwrap();
        let mut freq = HashMap::new();
        freq.insert(3 as TokenId, 100u64);
        let sf = build_select_function(&freq, 10);
        // token 3 is rank 1 -> signal 0 -> green = B (complement of A)
        let g = select_green(&sf, 3, &halves);
        for id in 0..10u32 {
            assert_eq!(g.is_green(id), !halves.is_green(id));
        }
        // rank-2 token signals 1 -> green = A
        let rank2 = (0..10u32)
            .filter(|&id| id != 3)
            .min()
            .unwrap();
        let g2 = select_green(&sf, rank2, &halves);
        for id in 0..10u32 {
            assert_eq!(g2.is_green(id), halves.is_green(id));
        }
    }

    #[test]
    fn apply_bias_hand_arithmetic() {
        // |V|=2, logits (0,0), green {0}, delta = ln 2 -> p = (2/3, 1/3)
        let logits = Logits(vec![0.0, 0.0]);
        let p = apply_bias(&logits, |id| id == 0, 2.0_f64.ln());
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn apply_bias_zero_delta_is_softmax() {
        let logits = Logits(vec![-0.3, -1.7, -0.2, -2.5]);
        let biased = apply_bias(&logits, |id| id % 2 == 0, 0.0);
        let plain = softmax(logits.values());
        assert_eq!(biased, plain);
    }

    #[test]
    fn apply_bias_increases_green_mass() {
        let logits = Logits(vec![-0.5, -1.0, -2.0, -0.1, -3.0]);
        let is_green = |id: TokenId| id == 1 || id == 4;
        let base: f64 = apply_bias(&logits, is_green, 0.0)
            .iter()
            .enumerate()
            .filter(|(id, _)| is_green(*id as TokenId))
            .map(|(_, &p)| p)
            .sum();
        for delta in [0.5, 1.0, 2.0, 5.0] {
            let mass: f64 = apply_bias(&logits, is_green, delta)
                .iter()
                .enumerate()
                .filter(|(id, _)| is_green(*id as TokenId))
                .map(|(_, &p)| p)
                .sum();
            assert!(mass > base, "delta {delta}: {mass} <= {base}");
        }
    }

    #[test]
    fn uniw_saturates_at_large_delta() {
        let model = small_model();
        let wm = Watermarker::prepare(
            WatermarkConfig::new(Scheme::Uniw, 50.0, 1, 1234),
            model.vocab_size(),
            None,
        )
        .unwrap();
        let prompt = model.vocab().tokenize_frozen("the cat sat").ids;
        let out = wm
            .generate(&model, &prompt, 400, &mut SplitMix64::new(8))
            .unwrap();
        let green = out.green_flags.iter().filter(|&&g| g).count();
        let frac = green as f64 / out.green_flags.len() as f64;
        assert!(frac >= 0.99, "green fraction {frac}");
    }

    #[test]
    fn bw_with_constant_one_select_matches_uniw() {
        let model = small_model();
        let n = model.vocab_size();
        let key = 777;
        let uniw = Watermarker::prepare(WatermarkConfig::new(Scheme::Uniw, 2.0, 1, key), n, None)
            .unwrap();
        let bw = Watermarker::from_select_function(
            WatermarkConfig::new(Scheme::Bw, 2.0, 1, key),
            n,
            SelectFunction::constant_one(n),
            String::new(),
        )
        .unwrap();
        let prompt = model.vocab().tokenize_frozen("a small cat").ids;
        let a = uniw
            .generate(&model, &prompt, 120, &mut SplitMix64::new(21))
            .unwrap();
        let b = bw
            .generate(&model, &prompt, 120, &mut SplitMix64::new(21))
            .unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn watermarked_generate_requires_prompt() {
        let model = small_model();
        let wm = Watermarker::prepare(
            WatermarkConfig::new(Scheme::Kgw, 2.0, 1, 5),
            model.vocab_size(),
            None,
        )
        .unwrap();
        assert!(wm.generate(&model, &[], 10, &mut SplitMix64::new(0)).is_err());
    }

    #[test]
    fn scheme_key_seed_prompt_determine_output() {
        let model = small_model();
        for scheme in [Scheme::Uniw, Scheme::Kgw, Scheme::Bw] {
            let freq;
            let freq_ref = if scheme == Scheme::Bw {
                freq = count_token_frequencies(&model, 10, 50, &mut SplitMix64::new(1)).unwrap();
                Some(&freq)
            } else {
                None
            };
            let wm = |key: u64| {
                Watermarker::prepare(
                    WatermarkConfig::new(scheme, 2.0, 2, key),
                    model.vocab_size(),
                    freq_ref,
                )
                .unwrap()
            };
            let prompt = model.vocab().tokenize_frozen("the bird flew").ids;
            let a = wm(9)
                .generate(&model, &prompt, 80, &mut SplitMix64::new(4))
                .unwrap();
            let b = wm(9)
                .generate(&model, &prompt, 80, &mut SplitMix64::new(4))
                .unwrap();
            let c = wm(10)
                .generate(&model, &prompt, 80, &mut SplitMix64::new(4))
                .unwrap();
            assert_eq!(a.text, b.text, "{scheme}: same inputs must reproduce");
            assert_ne!(a.text, c.text, "{scheme}: key must matter");
        }
    }

    #[test]
    fn sidecar_round_trip_bw() {
        let model = small_model();
        let freq =
            count_token_frequencies(&model, 10, 50, &mut SplitMix64::new(2)).unwrap();
        let wm = Watermarker::prepare(
            WatermarkConfig::new(Scheme::Bw, 2.0, 3, 0xABCDEF),
            model.vocab_size(),
            Some(&freq),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bw.sidecar.json");
        wm.save_sidecar(&path).unwrap();
        let loaded = Watermarker::load_sidecar(&path).unwrap();
        let prompt = model.vocab().tokenize_frozen("the cat sat").ids;
        let a = wm
            .generate(&model, &prompt, 60, &mut SplitMix64::new(6))
            .unwrap();
        let b = loaded
            .generate(&model, &prompt, 60, &mut SplitMix64::new(6))
            .unwrap();
        assert_eq!(a.text, b.text);
        assert!(matches!(
            Watermarker::load_sidecar(&dir.path().join("nope.json")),
            Err(Error::MissingSidecar(_))
        ));
    }

    proptest! {
        #[test]
        fn partitions_are_always_balanced_complements(key in any::<u64>(), n in 2usize..200) {
            let p = partition_fixed(key, n).unwrap();
            let green = p.green_count();
            let red = n - green;
            prop_assert!(green.abs_diff(red) <= 1);
            let h = partition_hashed(key, (n / 2) as TokenId, n).unwrap();
            prop_assert!(h.green_count().abs_diff(n - h.green_count()) <= 1);
        }

        #[test]
        fn select_function_splits_in_half(n in 2usize..300, seed in any::<u64>()) {
            let mut freq = HashMap::new();
            let mut rng = SplitMix64::new(seed);
            for id in 0..n as TokenId {
                freq.insert(id, rng.next_below(50));
            }
            let sf = build_select_function(&freq, n);
            prop_assert_eq!(sf.ones(), n / 2);
        }
    }
}
