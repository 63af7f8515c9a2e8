//! Green-token counting, the z-statistic, and classification metrics.
//!
//! Detection is self-contained: it re-derives the per-step green list from
//! the sidecar state alone and never needs the prompt. For KGW/BW only
//! positions whose context token lies inside the text are scored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lm::TokenId;
use crate::watermark::{Scheme, Watermarker};

/// Green count, scored positions, and the z-statistic for one text.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionResult {
    pub green: u64,
    pub scored: u64,
    pub z: f64,
}

/// Recount green tokens exactly as the embedder chose them. UNIW scores every
/// position; KGW/BW score positions `window..len`, each keyed by the token
/// `window` places back.
pub fn count_green(text: &[TokenId], wm: &Watermarker) -> Result<(u64, u64)> {
    match wm.scheme() {
        Scheme::Uniw => {
            if text.is_empty() {
                return Err(Error::TextTooShort { len: 0, min: 1 });
            }
            let green = wm.step_green(0)?;
            let g = text.iter().filter(|&&t| green.is_green(t)).count() as u64;
            Ok((g, text.len() as u64))
        }
        Scheme::Kgw | Scheme::Bw => {
            let w = wm.config().window;
            if text.len() <= w {
                return Err(Error::TextTooShort {
                    len: text.len(),
                    min: w + 1,
                });
            }
            let mut g = 0u64;
            for i in w..text.len() {
                let green = wm.step_green(text[i - w])?;
                if green.is_green(text[i]) {
                    g += 1;
                }
            }
            Ok((g, (text.len() - w) as u64))
        }
    }
}

/// (g - T/2) / sqrt(T/4): the equal-partition green-count z-statistic.
pub fn z_score(green: u64, scored: u64) -> f64 {
    debug_assert!(scored >= 1);
    let t = scored as f64;
    (green as f64 - t / 2.0) / (t / 4.0).sqrt()
}

pub fn detect(text: &[TokenId], wm: &Watermarker) -> Result<DetectionResult> {
    let (green, scored) = count_green(text, wm)?;
    Ok(DetectionResult {
        green,
        scored,
        z: z_score(green, scored),
    })
}

/// ROC curve points plus the area under it.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RocCurve {
    /// (FPR, TPR) from the all-positive corner sweep, monotone in both axes.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyScoreSet);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores must not be NaN".into()));
    }
    Ok(())
}

/// AUCROC as the Mann-Whitney statistic: the fraction of (positive, negative)
/// pairs with pos > neg, ties counted one half. Computed from rank sums, which
/// is pairwise-exact. Curve points come from a descending threshold sweep.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<RocCurve> {
    check_scores(pos)?;
    check_scores(neg)?;
    let np = pos.len() as f64;
    let nn = neg.len() as f64;

    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are not NaN"));

    // rank sum over positives with average ranks for ties (1-based)
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let pos_in_tie = all[i..j].iter().filter(|(_, is_pos)| *is_pos).count() as f64;
        rank_sum += avg_rank * pos_in_tie;
        i = j;
    }
    let u = rank_sum - np * (np + 1.0) / 2.0;
    let auc = u / (np * nn);

    // threshold sweep from the strictest threshold down
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut k = all.len();
    while k > 0 {
        let mut j = k;
        while j > 0 && all[j - 1].0 == all[k - 1].0 {
            if all[j - 1].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j -= 1;
        }
        points.push((fp / nn, tp / np));
        k = j;
    }
    Ok(RocCurve { points, auc })
}

/// Maximum TPR over thresholds whose empirical FPR stays at or below the cap,
/// classifying positive at score >= threshold.
pub fn tpr_at_fpr(pos: &[f64], neg: &[f64], fpr_cap: f64) -> Result<f64> {
    if !(fpr_cap > 0.0 && fpr_cap < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fpr cap must lie in (0, 1), got {fpr_cap}"
        )));
    }
    check_scores(pos)?;
    check_scores(neg)?;
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let mut pos_sorted = pos.to_vec();
    let mut neg_sorted = neg.to_vec();
    pos_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    neg_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut thresholds: Vec<f64> = pos_sorted
        .iter()
        .chain(neg_sorted.iter())
        .copied()
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let mut best = 0.0f64;
    for &t in &thresholds {
        let fpr = count_at_least(&neg_sorted, t) as f64 / nn;
        if fpr <= fpr_cap {
            let tpr = count_at_least(&pos_sorted, t) as f64 / np;
            best = best.max(tpr);
        }
    }
    Ok(best)
}

fn count_at_least(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&x| x < t)
}

/// One row of the per-text score dump.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ScoreRow {
    pub text_id: String,
    pub label: String,
    pub g: u64,
    pub t: u64,
    pub z: f64,
}

/// CSV with columns (text_id, label, g, T, z).
pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut out = String::from("text_id,label,g,T,z\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.text_id, r.label, r.g, r.t, r.z));
    }
    fs::write(path, out)?;
    Ok(())
}

/// CSV with columns (fpr, tpr).
pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in &curve.points {
        out.push_str(&format!("{fpr},{tpr}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
