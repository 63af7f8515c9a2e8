//! Static SVG plots: ROC curves, per-characteristic score bars, and the
//! comprehensive-score ranking. Hand-rolled SVG keeps output deterministic.

use crate::cefw::CefwReport;
use crate::detect::RocCurve;

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let y0 = H - MARGIN;
    let x1 = W - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
          transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        (x0 + x1) / 2.0,
        H - 20.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
    )
}

fn to_px(x: f64, y: f64) -> (f64, f64) {
    let px = MARGIN + x * (W - 2.0 * MARGIN);
    let py = (H - MARGIN) - y * (H - 2.0 * MARGIN);
    (px, py)
}

/// ROC curves for several labeled detectors on one canvas, with the chance
/// diagonal for reference.
pub fn roc_svg(curves: &[(String, &RocCurve)]) -> String {
    let mut svg = header("ROC curves");
    svg.push_str(&axes("false positive rate", "true positive rate"));
    let (dx0, dy0) = to_px(0.0, 0.0);
    let (dx1, dy1) = to_px(1.0, 1.0);
    svg.push_str(&format!(
        "<line x1=\"{dx0}\" y1=\"{dy0}\" x2=\"{dx1}\" y2=\"{dy1}\" \
         stroke=\"#aaaaaa\" stroke-dasharray=\"4 4\"/>\n"
    ));
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(fpr, tpr)| {
                let (x, y) = to_px(fpr, tpr);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        let ly = MARGIN + 16.0 * i as f64;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\">{label} (auc {:.3})</text>\n",
            W - MARGIN - 170.0,
            ly,
            W - MARGIN - 152.0,
            ly + 10.0,
            curve.auc
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Grouped bars: one cluster per scheme, one bar per characteristic score.
pub fn characteristic_bars_svg(report: &CefwReport) -> String {
    let mut svg = header("characteristic scores");
    svg.push_str(&axes("scheme", "score"));
    let labels = ["s_d", "s_t", "s_u", "s_r", "s_i"];
    let entries: Vec<(String, [f64; 5])> = report
        .groups
        .iter()
        .flat_map(|g| {
            g.entries.iter().map(move |e| {
                let tag = if report.groups.len() > 1 {
                    format!("{}/{}/{}", g.model, g.dataset, e.scheme)
                } else {
                    e.scheme.clone()
                };
                let s = &e.scores;
                (tag, [s.s_d, s.s_t, s.s_u, s.s_r, s.s_i])
            })
        })
        .collect();
    if entries.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let cluster_w = (W - 2.0 * MARGIN) / entries.len() as f64;
    let bar_w = (cluster_w * 0.8) / labels.len() as f64;
    for (ci, (tag, scores)) in entries.iter().enumerate() {
        let cx = MARGIN + cluster_w * (ci as f64 + 0.1);
        for (bi, &score) in scores.iter().enumerate() {
            let x = cx + bar_w * bi as f64;
            let bh = score.clamp(0.0, 1.0) * (H - 2.0 * MARGIN);
            let y = (H - MARGIN) - bh;
            svg.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{bh:.2}\" \
                 fill=\"{}\"/>\n",
                PALETTE[bi % PALETTE.len()]
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{tag}</text>\n",
            cx + cluster_w * 0.4,
            H - MARGIN + 14.0
        ));
    }
    for (bi, label) in labels.iter().enumerate() {
        let ly = MARGIN + 16.0 * bi as f64;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\">{label}</text>\n",
            W - MARGIN - 60.0,
            ly,
            PALETTE[bi % PALETTE.len()],
            W - MARGIN - 42.0,
            ly + 10.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Horizontal bars of comprehensive scores, best first.
pub fn ranking_svg(report: &CefwReport) -> String {
    let mut svg = header("comprehensive score ranking");
    let mut rows: Vec<(String, f64)> = report
        .groups
        .iter()
        .flat_map(|g| {
            g.entries.iter().map(move |e| {
                let tag = if report.groups.len() > 1 {
                    format!("{}/{}/{}", g.model, g.dataset, e.scheme)
                } else {
                    e.scheme.clone()
                };
                (tag, e.s_cefw)
            })
        })
        .collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let usable_h = H - 2.0 * MARGIN;
    let row_h = (usable_h / rows.len().max(1) as f64).min(26.0);
    for (i, (tag, score)) in rows.iter().enumerate() {
        let y = MARGIN + row_h * i as f64;
        let bw = score.clamp(0.0, 1.0) * (W - 2.0 * MARGIN - 120.0);
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{y:.2}\" width=\"{bw:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{tag}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\">{score:.3}</text>\n",
            MARGIN + 110.0,
            row_h * 0.7,
            PALETTE[i % PALETTE.len()],
            MARGIN + 104.0,
            y + row_h * 0.55,
            MARGIN + 114.0 + bw,
            y + row_h * 0.55,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cefw::{evaluate_scheme, CefwReport, EvalGroup, Provenance, RawMetrics, Scenario, WeightVector};

    fn tiny_report() -> CefwReport {
        let raw = RawMetrics {
            detect_auc: Some(0.99),
            ppl_base: Some(4.0),
            ppl_marked: Some(5.0),
            generate_seconds_base: Some(10.0),
            generate_seconds_marked: Some(11.0),
            detect_seconds_total: Some(5.0),
            detect_texts: Some(100),
            memory_base_mb: Some(50.0),
            memory_marked_mb: Some(50.1),
            robust_auc_before: Some(0.99),
            robust_auc_after: Some(0.9),
            steal_auc: Some([0.9, 0.8, 0.7, 0.6]),
        };
        let weights = WeightVector::default();
        let entry = evaluate_scheme("uniw", raw, &weights, Scenario::A).unwrap();
        CefwReport {
            version: 1,
            scenario: Scenario::A,
            weights,
            provenance: Provenance::Measured,
            groups: vec![EvalGroup {
                model: "ngram-3".into(),
                dataset: "synthetic".into(),
                entries: vec![entry],
            }],
            flags: vec![],
        }
    }

    #[test]
    fn svg_outputs_are_well_formed() {
        let report = tiny_report();
        let curve = crate::detect::roc_auc(&[3.0, 4.0, 5.0], &[0.0, 1.0, 2.0]).unwrap();
        for svg in [
            roc_svg(&[("uniw".into(), &curve)]),
            characteristic_bars_svg(&report),
            ranking_svg(&report),
        ] {
            assert!(svg.starts_with("<svg"));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert!(svg.contains("<rect") || svg.contains("<polyline"));
        }
    }
}
