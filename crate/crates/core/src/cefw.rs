//! Metric normalization and the five-characteristic scoring pipeline.
//!
//! Raw metric values (AUCROC, perplexity, times, memory) are normalized into
//! [0, 1] scores under one of three bounds conventions, averaged or reduced
//! into the five characteristic scores, and weighted into a single
//! comprehensive score per scheme.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn clamp01(x: f64) -> f64 {
    // + 0.0 normalizes -0.0 so reports never print a signed zero
    x.clamp(0.0, 1.0) + 0.0
}

/// How normalization bounds are obtained for a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundsSpec {
    /// The metric has intrinsic bounds (e.g. AUCROC: upper 1, lower 0.5).
    Original { upper: f64, lower: f64 },
    /// Bounds supplied by the evaluator (e.g. detect time: 0s best, 1s worst).
    Preset { upper: f64, lower: f64 },
    /// Bounds derived from a measured baseline.
    Comparison { baseline: f64, rule: BoundsRule },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsRule {
    /// Upper bound is the unattacked metric value, lower bound is the random
    /// detector floor 0.5. Used for robustness.
    DetectabilityFloor,
    /// Upper bound is the baseline, lower bound twice the baseline: the worst
    /// accepted degradation is twofold. Used for PPL, generate time, memory.
    DoubleDegradation,
}

impl BoundsSpec {
    pub fn resolve(&self) -> Result<(f64, f64)> {
        let (upper, lower) = match *self {
            BoundsSpec::Original { upper, lower } | BoundsSpec::Preset { upper, lower } => {
                (upper, lower)
            }
            BoundsSpec::Comparison { baseline, rule } => match rule {
                BoundsRule::DetectabilityFloor => (baseline, 0.5),
                BoundsRule::DoubleDegradation => {
                    if baseline <= 0.0 || baseline.is_nan() {
                        return Err(Error::NonpositiveBaseline(baseline));
                    }
                    (baseline, 2.0 * baseline)
                }
            },
        };
        if upper == lower {
            return Err(Error::DegenerateBounds(upper));
        }
        Ok((upper, lower))
    }
}

/// Linear map of `v` from [lower, upper] onto [0, 1], clamped outside.
pub fn normalize(v: f64, upper: f64, lower: f64) -> Result<f64> {
    if upper == lower {
        return Err(Error::DegenerateBounds(upper));
    }
    Ok(clamp01((v - lower) / (upper - lower)))
}

/// Detectability: AUCROC normalized from its intrinsic bounds (0.5, 1).
pub fn score_detectability(auc: f64) -> f64 {
    clamp01((auc - 0.5) / 0.5)
}

/// Shared double-degradation normalization: 1 when the marked value matches
/// the baseline, 0 when it is twice the baseline or worse. Serves text
/// quality (PPL), generate time, and memory cost.
pub fn score_double_degradation(v_marked: f64, v_base: f64) -> Result<f64> {
    if v_base <= 0.0 || v_base.is_nan() {
        return Err(Error::NonpositiveBaseline(v_base));
    }
    Ok(clamp01((v_marked - 2.0 * v_base) / (v_base - 2.0 * v_base)))
}

/// Detect time for one text, preset bounds 0s (best) to 1s (worst).
pub fn score_detect_time(seconds_per_text: f64) -> f64 {
    clamp01(1.0 - seconds_per_text)
}

/// Usability: arithmetic mean of memory, generate-time, and detect-time
/// scores.
pub fn score_usability(s_mc: f64, s_gt: f64, s_dt: f64) -> f64 {
    (s_mc + s_gt + s_dt) / 3.0
}

/// Robustness: detectability retained after a scrubbing attack, relative to
/// the unattacked detectability and floored at the random detector.
pub fn score_robustness(auc_before: f64, auc_after: f64) -> Result<f64> {
    if auc_before <= 0.5 {
        return Err(Error::DegenerateBounds(auc_before));
    }
    Ok(clamp01((auc_after - 0.5) / (auc_before - 0.5)))
}

/// Per-attack spoofing score: 1 when spoofed text is indistinguishable from
/// clean text (AUCROC 0.5), 0 when the attack forges perfectly (AUCROC 1).
pub fn score_steal(auc_spoof: f64) -> f64 {
    clamp01((auc_spoof - 1.0) / (0.5 - 1.0))
}

/// Whether the attacker can probe the detection service to pick the best of
/// its four attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Attacker probes the detector: imperceptibility is the minimum score.
    A,
    /// No detector access: a uniform random pick, so the expected (mean) score.
    Na,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "a",
            Scenario::Na => "na",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Scenario::A),
            "na" | "n.a." => Ok(Scenario::Na),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Reduce the four per-order spoofing scores to one imperceptibility score.
pub fn score_imperceptibility(steal_scores: &[f64; 4], scenario: Scenario) -> f64 {
    match scenario {
        Scenario::A => steal_scores.iter().copied().fold(f64::INFINITY, f64::min),
        Scenario::Na => steal_scores.iter().sum::<f64>() / 4.0,
    }
}

/// Characteristic weights; must be nonnegative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w_d: f64,
    pub w_t: f64,
    pub w_u: f64,
    pub w_r: f64,
    pub w_i: f64,
}

impl Default for WeightVector {
    /// Application (detectability, text quality, usability) and security
    /// (robustness, imperceptibility) weigh equally; members split evenly.
    fn default() -> Self {
        WeightVector {
            w_d: 1.0 / 6.0,
            w_t: 1.0 / 6.0,
            w_u: 1.0 / 6.0,
            w_r: 0.25,
            w_i: 0.25,
        }
    }
}

impl WeightVector {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_d, self.w_t, self.w_u, self.w_r, self.w_i];
        if all.iter().any(|&w| w < 0.0 || w.is_nan()) {
            return Err(Error::InvalidWeights("weights must be nonnegative".into()));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// The five normalized characteristic scores plus their sub-scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicScores {
    pub s_d: f64,
    pub s_t: f64,
    pub s_u: f64,
    pub s_r: f64,
    pub s_i: f64,
    pub s_mc: f64,
    pub s_gt: f64,
    pub s_dt: f64,
    pub s_steal: [f64; 4],
}

/// Weighted comprehensive score over the five characteristic scores.
pub fn score_comprehensive(
    s_d: f64,
    s_t: f64,
    s_u: f64,
    s_r: f64,
    s_i: f64,
    weights: &WeightVector,
) -> Result<f64> {
    weights.validate()?;
    Ok(weights.w_d * s_d
        + weights.w_t * s_t
        + weights.w_u * s_u
        + weights.w_r * s_r
        + weights.w_i * s_i)
}

/// Where a metric value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Fixture,
}

/// Evaluator-tunable normalization bounds. Only detect time is preset-bound;
/// the other characteristics derive their bounds from baselines or intrinsic
/// metric ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsOverrides {
    #[serde(default = "default_detect_time_bounds")]
    pub detect_time: BoundsSpec,
}

fn default_detect_time_bounds() -> BoundsSpec {
    BoundsSpec::Preset {
        upper: 0.0,
        lower: 1.0,
    }
}

impl Default for BoundsOverrides {
    fn default() -> Self {
        BoundsOverrides {
            detect_time: default_detect_time_bounds(),
        }
    }
}

impl BoundsOverrides {
    pub fn validate(&self) -> Result<()> {
        self.detect_time.resolve().map(|_| ())
    }
}

/// Raw metric inputs for one scheme under one setting. Any missing field
/// fails scoring with a MissingMetric naming the characteristic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub detect_auc: Option<f64>,
    pub ppl_base: Option<f64>,
    pub ppl_marked: Option<f64>,
    pub generate_seconds_base: Option<f64>,
    pub generate_seconds_marked: Option<f64>,
    pub detect_seconds_total: Option<f64>,
    pub detect_texts: Option<u64>,
    pub memory_base_mb: Option<f64>,
    pub memory_marked_mb: Option<f64>,
    pub robust_auc_before: Option<f64>,
    pub robust_auc_after: Option<f64>,
    pub steal_auc: Option<[f64; 4]>,
}

fn require<T: Copy>(v: Option<T>, characteristic: &str, detail: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingMetric {
        characteristic: characteristic.to_string(),
        detail: detail.to_string(),
    })
}

/// Normalize one scheme's raw metrics into its characteristic scores with
/// the default bounds.
pub fn compute_scores(raw: &RawMetrics, scenario: Scenario) -> Result<CharacteristicScores> {
    compute_scores_with(raw, scenario, &BoundsOverrides::default())
}

/// Normalize one scheme's raw metrics into its characteristic scores.
pub fn compute_scores_with(
    raw: &RawMetrics,
    scenario: Scenario,
    bounds: &BoundsOverrides,
) -> Result<CharacteristicScores> {
    let s_d = score_detectability(require(raw.detect_auc, "detectability", "detect_auc")?);
    let s_t = score_double_degradation(
        require(raw.ppl_marked, "text_quality", "ppl_marked")?,
        require(raw.ppl_base, "text_quality", "ppl_base")?,
    )?;
    let s_gt = score_double_degradation(
        require(raw.generate_seconds_marked, "usability", "generate_seconds_marked")?,
        require(raw.generate_seconds_base, "usability", "generate_seconds_base")?,
    )?;
    let s_mc = score_double_degradation(
        require(raw.memory_marked_mb, "usability", "memory_marked_mb")?,
        require(raw.memory_base_mb, "usability", "memory_base_mb")?,
    )?;
    let total = require(raw.detect_seconds_total, "usability", "detect_seconds_total")?;
    let texts = require(raw.detect_texts, "usability", "detect_texts")?;
    if texts == 0 {
        return Err(Error::MissingMetric {
            characteristic: "usability".into(),
            detail: "detect_texts is zero".into(),
        });
    }
    let (dt_upper, dt_lower) = bounds.detect_time.resolve()?;
    let s_dt = normalize(total / texts as f64, dt_upper, dt_lower)?;
    let s_u = score_usability(s_mc, s_gt, s_dt);
    let s_r = score_robustness(
        require(raw.robust_auc_before, "robustness", "robust_auc_before")?,
        require(raw.robust_auc_after, "robustness", "robust_auc_after")?,
    )?;
    let steal_auc = require(raw.steal_auc, "imperceptibility", "steal_auc")?;
    let s_steal = [
        score_steal(steal_auc[0]),
        score_steal(steal_auc[1]),
        score_steal(steal_auc[2]),
        score_steal(steal_auc[3]),
    ];
    let s_i = score_imperceptibility(&s_steal, scenario);
    Ok(CharacteristicScores {
        s_d,
        s_t,
        s_u,
        s_r,
        s_i,
        s_mc,
        s_gt,
        s_dt,
        s_steal,
    })
}

/// One scheme's full evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeEvaluation {
    pub scheme: String,
    pub raw: RawMetrics,
    pub scores: CharacteristicScores,
    /// Weighted sum over the five characteristic scores.
    pub s_cefw: f64,
    /// Comprehensive score recomputed with the raw detection AUCROC standing
    /// in for the detectability score. This is the convention the bundled
    /// reference results use; see the report flags.
    pub s_cefw_raw_detect: f64,
}

/// Schemes evaluated under one (model, dataset) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGroup {
    pub model: String,
    pub dataset: String,
    pub entries: Vec<SchemeEvaluation>,
}

/// The full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CefwReport {
    pub version: u32,
    pub scenario: Scenario,
    pub weights: WeightVector,
    pub provenance: Provenance,
    pub groups: Vec<EvalGroup>,
    pub flags: Vec<String>,
}

pub const DETECTABILITY_CONVENTION_FLAG: &str = "detectability: reference results tabulate raw \
AUCROC rather than its normalized score; both s_cefw (normalized s_d) and s_cefw_raw_detect \
(raw AUCROC as s_d) are reported";

pub fn evaluate_scheme(
    scheme: &str,
    raw: RawMetrics,
    weights: &WeightVector,
    scenario: Scenario,
) -> Result<SchemeEvaluation> {
    evaluate_scheme_with(scheme, raw, weights, scenario, &BoundsOverrides::default())
}

pub fn evaluate_scheme_with(
    scheme: &str,
    raw: RawMetrics,
    weights: &WeightVector,
    scenario: Scenario,
    bounds: &BoundsOverrides,
) -> Result<SchemeEvaluation> {
    let scores = compute_scores_with(&raw, scenario, bounds)?;
    let s_cefw = score_comprehensive(scores.s_d, scores.s_t, scores.s_u, scores.s_r, scores.s_i, weights)?;
    let s_cefw_raw_detect = score_comprehensive(
        raw.detect_auc.unwrap_or(scores.s_d),
        scores.s_t,
        scores.s_u,
        scores.s_r,
        scores.s_i,
        weights,
    )?;
    Ok(SchemeEvaluation {
        scheme: scheme.to_string(),
        raw,
        scores,
        s_cefw,
        s_cefw_raw_detect,
    })
}

/// Report as flat CSV, one row per (model, dataset, scheme).
pub fn report_to_csv(report: &CefwReport) -> String {
    let mut out = String::from(
        "model,dataset,scheme,auc,s_d,s_t,s_u,s_r,s_i,s_steal1,s_steal2,s_steal3,s_steal4,s_cefw,s_cefw_raw_detect\n",
    );
    for group in &report.groups {
        for e in &group.entries {
            let s = &e.scores;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                group.model,
                group.dataset,
                e.scheme,
                e.raw.detect_auc.map(|v| v.to_string()).unwrap_or_default(),
                s.s_d,
                s.s_t,
                s.s_u,
                s.s_r,
                s.s_i,
                s.s_steal[0],
                s.s_steal[1],
                s.s_steal[2],
                s.s_steal[3],
                e.s_cefw,
                e.s_cefw_raw_detect,
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Fixture ingestion
// ---------------------------------------------------------------------------

/// Reference metric values read from the bundled CSV fixtures. Keys are
/// (model, dataset, scheme); the baseline rows use scheme "none".
#[derive(Debug, Default)]
pub struct FixtureTables {
    pub detect_auc: BTreeMap<(String, String, String), f64>,
    pub ppl: BTreeMap<(String, String, String), f64>,
    pub generate_seconds: BTreeMap<(String, String, String), f64>,
    pub detect_seconds: BTreeMap<(String, String, String), (f64, u64)>,
    pub memory_mb: BTreeMap<(String, String, String), f64>,
    pub robustness: BTreeMap<(String, String, String), (f64, f64)>,
    pub steal_auc: BTreeMap<(String, String, String), [f64; 4]>,
}

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    reader
        .records()
        .map(|r| r.map_err(|e| Error::Data(format!("bad row in {}: {e}", path.display()))))
        .collect()
}

fn parse_f64(field: &str, path: &Path) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("bad number `{field}` in {}", path.display())))
}

pub fn load_fixtures(dir: &Path) -> Result<FixtureTables> {
    let mut t = FixtureTables::default();
    let key = |r: &csv::StringRecord| {
        (
            r[0].trim().to_string(),
            r[1].trim().to_string(),
            r[2].trim().to_string(),
        )
    };

    let path = dir.join("detectability.csv");
    for r in read_csv(&path)? {
        t.detect_auc.insert(key(&r), parse_f64(&r[3], &path)?);
    }
    let path = dir.join("text_quality.csv");
    for r in read_csv(&path)? {
        t.ppl.insert(key(&r), parse_f64(&r[3], &path)?);
    }
    let path = dir.join("usability.csv");
    for r in read_csv(&path)? {
        let k = key(&r);
        t.generate_seconds.insert(k.clone(), parse_f64(&r[3], &path)?);
        if !r[4].trim().is_empty() {
            let secs = parse_f64(&r[4], &path)?;
            let texts = r[5]
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("bad detect_texts in {}", path.display())))?;
            t.detect_seconds.insert(k.clone(), (secs, texts));
        }
        t.memory_mb.insert(k, parse_f64(&r[6], &path)?);
    }
    let path = dir.join("robustness.csv");
    for r in read_csv(&path)? {
        t.robustness
            .insert(key(&r), (parse_f64(&r[3], &path)?, parse_f64(&r[4], &path)?));
    }
    let path = dir.join("spoofing.csv");
    for r in read_csv(&path)? {
        t.steal_auc.insert(
            key(&r),
            [
                parse_f64(&r[3], &path)?,
                parse_f64(&r[4], &path)?,
                parse_f64(&r[5], &path)?,
                parse_f64(&r[6], &path)?,
            ],
        );
    }
    Ok(t)
}

/// Assemble a full report from fixture tables with the default bounds.
pub fn evaluate_fixtures(
    dir: &Path,
    weights: &WeightVector,
    scenario: Scenario,
) -> Result<CefwReport> {
    evaluate_fixtures_with(dir, weights, scenario, &BoundsOverrides::default())
}

/// Assemble a full report from fixture tables: every (model, dataset, scheme)
/// present in the detectability fixture is evaluated.
pub fn evaluate_fixtures_with(
    dir: &Path,
    weights: &WeightVector,
    scenario: Scenario,
    bounds: &BoundsOverrides,
) -> Result<CefwReport> {
    weights.validate()?;
    bounds.validate()?;
    let t = load_fixtures(dir)?;
    let mut groups: BTreeMap<(String, String), Vec<SchemeEvaluation>> = BTreeMap::new();
    for ((model, dataset, scheme), &auc) in &t.detect_auc {
        if scheme == "none" {
            continue;
        }
        let base_key = (model.clone(), dataset.clone(), "none".to_string());
        let this_key = (model.clone(), dataset.clone(), scheme.clone());
        let raw = RawMetrics {
            detect_auc: Some(auc),
            ppl_base: t.ppl.get(&base_key).copied(),
            ppl_marked: t.ppl.get(&this_key).copied(),
            generate_seconds_base: t.generate_seconds.get(&base_key).copied(),
            generate_seconds_marked: t.generate_seconds.get(&this_key).copied(),
            detect_seconds_total: t.detect_seconds.get(&this_key).map(|&(s, _)| s),
            detect_texts: t.detect_seconds.get(&this_key).map(|&(_, n)| n),
            memory_base_mb: t.memory_mb.get(&base_key).copied(),
            memory_marked_mb: t.memory_mb.get(&this_key).copied(),
            robust_auc_before: t.robustness.get(&this_key).map(|&(b, _)| b),
            robust_auc_after: t.robustness.get(&this_key).map(|&(_, a)| a),
            steal_auc: t.steal_auc.get(&this_key).copied(),
        };
        let eval = evaluate_scheme_with(scheme, raw, weights, scenario, bounds)?;
        groups
            .entry((model.clone(), dataset.clone()))
            .or_default()
            .push(eval);
    }
    if groups.is_empty() {
        return Err(Error::Data("fixtures contain no scheme rows".into()));
    }
    Ok(CefwReport {
        version: 1,
        scenario,
        weights: *weights,
        provenance: Provenance::Fixture,
        groups: groups
            .into_iter()
            .map(|((model, dataset), entries)| EvalGroup {
                model,
                dataset,
                entries,
            })
            .collect(),
        flags: vec![DETECTABILITY_CONVENTION_FLAG.to_string()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_boundaries() {
        assert_eq!(normalize(1.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(normalize(0.5, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(normalize(2.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(normalize(-1.0, 1.0, 0.5).unwrap(), 0.0);
        assert!(matches!(
            normalize(0.7, 0.5, 0.5),
            Err(Error::DegenerateBounds(_))
        ));
    }

    #[test]
    fn bounds_spec_resolution() {
        assert_eq!(
            BoundsSpec::Original { upper: 1.0, lower: 0.5 }.resolve().unwrap(),
            (1.0, 0.5)
        );
        assert_eq!(
            BoundsSpec::Comparison {
                baseline: 4.0,
                rule: BoundsRule::DoubleDegradation
            }
            .resolve()
            .unwrap(),
            (4.0, 8.0)
        );
        assert_eq!(
            BoundsSpec::Comparison {
                baseline: 0.97,
                rule: BoundsRule::DetectabilityFloor
            }
            .resolve()
            .unwrap(),
            (0.97, 0.5)
        );
        assert!(BoundsSpec::Comparison {
            baseline: 0.0,
            rule: BoundsRule::DoubleDegradation
        }
        .resolve()
        .is_err());
    }

    #[test]
    fn detectability_boundaries() {
        assert_eq!(score_detectability(1.0), 1.0);
        assert_eq!(score_detectability(0.5), 0.0);
        assert!((score_detectability(0.998) - 0.996).abs() < 1e-12);
        assert_eq!(score_detectability(0.3), 0.0);
    }

    #[test]
    fn double_degradation_reference_values() {
        // PPL 4.388 -> 6.273 gives ~0.5704
        let s = score_double_degradation(6.273, 4.388).unwrap();
        assert!((s - 0.570_419_325).abs() < 1e-6, "s_t {s}");
        // generate time 18779 -> 21379 gives ~0.8615
        let s = score_double_degradation(21379.0, 18779.0).unwrap();
        assert!((s - 0.861_547_473).abs() < 1e-6, "s_gt {s}");
        assert_eq!(score_double_degradation(5.0, 5.0).unwrap(), 1.0);
        assert_eq!(score_double_degradation(11.0, 5.0).unwrap(), 0.0);
        assert!(score_double_degradation(1.0, 0.0).is_err());
    }

    #[test]
    fn detect_time_boundaries() {
        assert_eq!(score_detect_time(0.0), 1.0);
        assert_eq!(score_detect_time(1.0), 0.0);
        assert_eq!(score_detect_time(3.0), 0.0);
        let s = score_detect_time(20.79 / 5000.0);
        assert!((s - 0.995_842).abs() < 1e-6, "s_dt {s}");
    }

    #[test]
    fn usability_mean() {
        let s = score_usability(0.99996, 0.8615, 0.99584);
        assert!((s - 0.952_433_3).abs() < 1e-6, "s_u {s}");
        assert_eq!(score_usability(1.0, 1.0, 1.0), 1.0);
        assert_eq!(score_usability(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn robustness_reference_values() {
        let s = score_robustness(0.999, 0.992).unwrap();
        assert!((s - 0.985_972).abs() < 1e-6, "s_r {s}");
        assert_eq!(score_robustness(0.97, 0.97).unwrap(), 1.0);
        assert_eq!(score_robustness(0.9, 0.5).unwrap(), 0.0);
        assert!(score_robustness(0.5, 0.7).is_err());
    }

    #[test]
    fn steal_score_values() {
        assert_eq!(score_steal(1.0), 0.0);
        assert_eq!(score_steal(0.5), 1.0);
        let s = score_steal(0.661);
        assert!((s - 0.678).abs() < 1e-12, "s {s}");
        // spoofing worse than chance clamps at 1
        assert_eq!(score_steal(0.3), 1.0);
    }

    #[test]
    fn imperceptibility_scenarios() {
        let scores = [0.1, 0.9, 0.4, 0.6];
        assert_eq!(score_imperceptibility(&scores, Scenario::A), 0.1);
        assert_eq!(score_imperceptibility(&scores, Scenario::Na), 0.5);
        let same = [0.3; 4];
        assert_eq!(
            score_imperceptibility(&same, Scenario::A),
            score_imperceptibility(&same, Scenario::Na)
        );
    }

    #[test]
    fn comprehensive_reference_value() {
        let w = WeightVector::default();
        let s = score_comprehensive(0.998, 0.571, 0.953, 0.986, 0.000, &w).unwrap();
        assert!((s - 0.6668).abs() < 5e-4, "s_cefw {s}");
        assert_eq!(score_comprehensive(1.0, 1.0, 1.0, 1.0, 1.0, &w).unwrap(), 1.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let w = WeightVector {
            w_d: 0.3,
            w_t: 0.3,
            w_u: 0.3,
            w_r: 0.3,
            w_i: 0.3,
        };
        assert!(matches!(
            score_comprehensive(1.0, 1.0, 1.0, 1.0, 1.0, &w),
            Err(Error::InvalidWeights(_))
        ));
        assert!(WeightVector::default().validate().is_ok());
    }

    #[test]
    fn detect_time_bounds_can_be_overridden() {
        let raw = RawMetrics {
            detect_auc: Some(0.99),
            ppl_base: Some(4.0),
            ppl_marked: Some(4.0),
            generate_seconds_base: Some(10.0),
            generate_seconds_marked: Some(10.0),
            detect_seconds_total: Some(400.0),
            detect_texts: Some(100),
            memory_base_mb: Some(50.0),
            memory_marked_mb: Some(50.0),
            robust_auc_before: Some(0.99),
            robust_auc_after: Some(0.9),
            steal_auc: Some([0.9; 4]),
        };
        // 4 s/text saturates the default 0..1s bounds
        let default = compute_scores(&raw, Scenario::A).unwrap();
        assert_eq!(default.s_dt, 0.0);
        // a 10-second budget leaves headroom
        let relaxed = BoundsOverrides {
            detect_time: BoundsSpec::Preset {
                upper: 0.0,
                lower: 10.0,
            },
        };
        let scores = compute_scores_with(&raw, Scenario::A, &relaxed).unwrap();
        assert!((scores.s_dt - 0.6).abs() < 1e-12, "s_dt {}", scores.s_dt);
        assert!(BoundsOverrides {
            detect_time: BoundsSpec::Preset { upper: 1.0, lower: 1.0 },
        }
        .validate()
        .is_err());
    }

    #[test]
    fn missing_metric_names_characteristic() {
        let raw = RawMetrics {
            detect_auc: Some(0.99),
            ..Default::default()
        };
        match compute_scores(&raw, Scenario::A) {
            Err(Error::MissingMetric { characteristic, .. }) => {
                assert_eq!(characteristic, "text_quality");
            }
            other => panic!("expected MissingMetric, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn scores_stay_in_unit_interval(
            auc in 0.0f64..1.0,
            marked in 0.01f64..100.0,
            base in 0.01f64..100.0,
            t in 0.0f64..10.0,
        ) {
            prop_assert!((0.0..=1.0).contains(&score_detectability(auc)));
            prop_assert!((0.0..=1.0).contains(&score_double_degradation(marked, base).unwrap()));
            prop_assert!((0.0..=1.0).contains(&score_detect_time(t)));
            prop_assert!((0.0..=1.0).contains(&score_steal(auc)));
        }

        #[test]
        fn comprehensive_is_monotone(
            base in proptest::array::uniform5(0.0f64..1.0),
            bump in 0.001f64..0.5,
            idx in 0usize..5,
        ) {
            let w = WeightVector::default();
            let s0 = score_comprehensive(base[0], base[1], base[2], base[3], base[4], &w).unwrap();
            let mut bumped = base;
            bumped[idx] = (bumped[idx] + bump).min(1.0);
            let s1 = score_comprehensive(bumped[0], bumped[1], bumped[2], bumped[3], bumped[4], &w).unwrap();
            prop_assert!(s1 >= s0);
        }
    }
}
