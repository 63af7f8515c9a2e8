//! Python bindings for the wmbench core: the n-gram model, the watermark
//! embedder/detector, attacks, classification metrics, and the
//! characteristic-score arithmetic.
//!
//! Text crosses the boundary as strings; token ids stay internal. Every
//! randomized entry point takes an explicit seed.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use wmbench::attack;
use wmbench::cefw;
use wmbench::corpus;
use wmbench::detect;
use wmbench::lm::{self, NGramModel};
use wmbench::rng::SplitMix64;
use wmbench::watermark::{self, Scheme, WatermarkConfig, Watermarker};

fn to_py(err: wmbench::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Laplace-smoothed backoff n-gram language model.
#[pyclass(frozen)]
struct Model {
    inner: NGramModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn train(corpus: Vec<String>, order: usize, alpha: f64) -> PyResult<Self> {
        Ok(Model {
            inner: NGramModel::train(&corpus, order, alpha).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Model {
            inner: NGramModel::load(Path::new(path)).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(Path::new(path)).map_err(to_py)
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    /// Token ids under the frozen vocabulary; unknown words map to the
    /// sentinel.
    fn tokenize(&self, text: &str) -> Vec<u32> {
        self.inner.vocab().tokenize_frozen(text).ids
    }

    /// Plain ancestral sampling from the prompt.
    fn generate(&self, prompt: &str, max_tokens: usize, seed: u64) -> PyResult<String> {
        let ids = self.inner.vocab().tokenize_frozen(prompt).ids;
        let mut rng = SplitMix64::new(seed);
        let out = self.inner.generate(&ids, max_tokens, &mut rng).map_err(to_py)?;
        Ok(self.inner.vocab().detokenize(&out.ids))
    }

    fn perplexity(&self, text: &str) -> PyResult<f64> {
        let ids = self.inner.vocab().tokenize_frozen(text).ids;
        self.inner.perplexity(&ids).map_err(to_py)
    }
}

/// A prepared watermark embedder/detector (uniw, kgw, or bw).
#[pyclass(frozen)]
struct Watermark {
    inner: Watermarker,
}

#[pymethods]
impl Watermark {
    /// Build scheme state against a model's vocabulary. BW derives its
    /// select function from `freq_texts` unwatermarked samples drawn with
    /// `freq_seed`.
    #[staticmethod]
    #[pyo3(signature = (model, scheme, delta = 2.0, window = 1, key = 0, freq_texts = 200, freq_seed = 0))]
    fn prepare(
        model: &Model,
        scheme: &str,
        delta: f64,
        window: usize,
        key: u64,
        freq_texts: usize,
        freq_seed: u64,
    ) -> PyResult<Self> {
        let scheme: Scheme = scheme.parse().map_err(to_py)?;
        let config = WatermarkConfig::new(scheme, delta, window, key);
        let freq = if scheme == Scheme::Bw {
            let mut rng = SplitMix64::new(freq_seed);
            Some(
                watermark::count_token_frequencies(&model.inner, freq_texts, 200, &mut rng)
                    .map_err(to_py)?,
            )
        } else {
            None
        };
        Ok(Watermark {
            inner: Watermarker::prepare(config, model.inner.vocab_size(), freq.as_ref())
                .map_err(to_py)?,
        })
    }

    /// Watermarked generation; returns the generated text.
    fn generate(&self, model: &Model, prompt: &str, max_tokens: usize, seed: u64) -> PyResult<String> {
        let ids = model.inner.vocab().tokenize_frozen(prompt).ids;
        let mut rng = SplitMix64::new(seed);
        let out = self
            .inner
            .generate(&model.inner, &ids, max_tokens, &mut rng)
            .map_err(to_py)?;
        Ok(model.inner.vocab().detokenize(&out.text.ids))
    }

    /// Green count, scored positions, and z-statistic for a text.
    fn detect(&self, model: &Model, text: &str) -> PyResult<(u64, u64, f64)> {
        let ids = model.inner.vocab().tokenize_frozen(text).ids;
        let r = detect::detect(&ids, &self.inner).map_err(to_py)?;
        Ok((r.green, r.scored, r.z))
    }

    fn save_sidecar(&self, path: &str) -> PyResult<()> {
        self.inner.save_sidecar(Path::new(path)).map_err(to_py)
    }

    #[staticmethod]
    fn load_sidecar(path: &str) -> PyResult<Self> {
        Ok(Watermark {
            inner: Watermarker::load_sidecar(Path::new(path)).map_err(to_py)?,
        })
    }
}

/// A pair of per-context frequency tables (watermarked vs clean) for the
/// spoofing attack.
#[pyclass(frozen)]
struct SpoofTables {
    marked: attack::NGramTable,
    clean: attack::NGramTable,
    n: usize,
}

#[pymethods]
impl SpoofTables {
    #[staticmethod]
    fn build(model: &Model, marked: Vec<String>, clean: Vec<String>, n: usize) -> PyResult<Self> {
        let tok = |docs: &[String]| -> Vec<Vec<u32>> {
            docs.iter()
                .map(|d| model.inner.vocab().tokenize_frozen(d).ids)
                .collect()
        };
        Ok(SpoofTables {
            marked: attack::build_ngram_table(&tok(&marked), n).map_err(to_py)?,
            clean: attack::build_ngram_table(&tok(&clean), n).map_err(to_py)?,
            n,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.n
    }
}

#[pyfunction]
fn split_tokens(text: &str) -> Vec<String> {
    lm::split_tokens(text)
}

#[pyfunction]
fn synthetic_corpus(seed: u64, docs: usize) -> Vec<String> {
    corpus::synthetic_corpus(seed, docs)
}

#[pyfunction]
fn roc_auc(pos: Vec<f64>, neg: Vec<f64>) -> PyResult<f64> {
    Ok(detect::roc_auc(&pos, &neg).map_err(to_py)?.auc)
}

#[pyfunction]
fn roc_points(pos: Vec<f64>, neg: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    Ok(detect::roc_auc(&pos, &neg).map_err(to_py)?.points)
}

#[pyfunction]
fn tpr_at_fpr(pos: Vec<f64>, neg: Vec<f64>, fpr_cap: f64) -> PyResult<f64> {
    detect::tpr_at_fpr(&pos, &neg, fpr_cap).map_err(to_py)
}

/// Token-perturbation scrubbing attack over a text.
#[pyfunction]
fn scrub(
    model: &Model,
    text: &str,
    replace_rate: f64,
    delete_rate: f64,
    insert_rate: f64,
    seed: u64,
) -> PyResult<String> {
    let cfg = attack::ScrubConfig {
        replace_rate,
        delete_rate,
        insert_rate,
    };
    let ids = model.inner.vocab().tokenize_frozen(text).ids;
    let mut rng = SplitMix64::new(seed);
    let out = attack::scrub(&ids, &cfg, &model.inner, &mut rng).map_err(to_py)?;
    Ok(model.inner.vocab().detokenize(&out))
}

/// Key-free spoofing generation biased by the frequency-ratio tables.
#[pyfunction]
fn spoof_generate(
    model: &Model,
    tables: &SpoofTables,
    prompt: &str,
    max_tokens: usize,
    intensity: f64,
    seed: u64,
) -> PyResult<String> {
    let config = attack::SpoofConfig {
        n: tables.n,
        intensity,
    };
    let ids = model.inner.vocab().tokenize_frozen(prompt).ids;
    let mut rng = SplitMix64::new(seed);
    let out = attack::spoof_generate(
        &model.inner,
        &tables.marked,
        &tables.clean,
        &config,
        &ids,
        max_tokens,
        &mut rng,
    )
    .map_err(to_py)?;
    Ok(model.inner.vocab().detokenize(&out.ids))
}

#[pyfunction]
fn normalize(v: f64, upper: f64, lower: f64) -> PyResult<f64> {
    cefw::normalize(v, upper, lower).map_err(to_py)
}

#[pyfunction]
fn score_detectability(auc: f64) -> f64 {
    cefw::score_detectability(auc)
}

#[pyfunction]
fn score_double_degradation(marked: f64, base: f64) -> PyResult<f64> {
    cefw::score_double_degradation(marked, base).map_err(to_py)
}

#[pyfunction]
fn score_detect_time(seconds_per_text: f64) -> f64 {
    cefw::score_detect_time(seconds_per_text)
}

#[pyfunction]
fn score_usability(s_mc: f64, s_gt: f64, s_dt: f64) -> f64 {
    cefw::score_usability(s_mc, s_gt, s_dt)
}

#[pyfunction]
fn score_robustness(auc_before: f64, auc_after: f64) -> PyResult<f64> {
    cefw::score_robustness(auc_before, auc_after).map_err(to_py)
}

#[pyfunction]
fn score_steal(auc_spoof: f64) -> f64 {
    cefw::score_steal(auc_spoof)
}

/// Reduce four per-order spoofing scores under scenario "a" (attacker can
/// probe the detector: minimum) or "na" (random pick: mean).
#[pyfunction]
fn score_imperceptibility(steal_scores: [f64; 4], scenario: &str) -> PyResult<f64> {
    let scenario: cefw::Scenario = scenario.parse().map_err(to_py)?;
    Ok(cefw::score_imperceptibility(&steal_scores, scenario))
}

/// Weighted comprehensive score; `weights` defaults to
/// (1/6, 1/6, 1/6, 1/4, 1/4) over (d, t, u, r, i).
#[pyfunction]
#[pyo3(signature = (s_d, s_t, s_u, s_r, s_i, weights = None))]
fn score_comprehensive(
    s_d: f64,
    s_t: f64,
    s_u: f64,
    s_r: f64,
    s_i: f64,
    weights: Option<(f64, f64, f64, f64, f64)>,
) -> PyResult<f64> {
    let w = match weights {
        Some((w_d, w_t, w_u, w_r, w_i)) => cefw::WeightVector {
            w_d,
            w_t,
            w_u,
            w_r,
            w_i,
        },
        None => cefw::WeightVector::default(),
    };
    cefw::score_comprehensive(s_d, s_t, s_u, s_r, s_i, &w).map_err(to_py)
}

/// Score the bundled reference measurements from a fixture directory and
/// return the full report as a JSON string.
#[pyfunction]
#[pyo3(signature = (dir, scenario = "a"))]
fn evaluate_fixtures(dir: &str, scenario: &str) -> PyResult<String> {
    let scenario: cefw::Scenario = scenario.parse().map_err(to_py)?;
    let report = cefw::evaluate_fixtures(Path::new(dir), &cefw::WeightVector::default(), scenario)
        .map_err(to_py)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn wmbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Watermark>()?;
    m.add_class::<SpoofTables>()?;
    m.add_function(wrap_pyfunction!(split_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(roc_points, m)?)?;
    m.add_function(wrap_pyfunction!(tpr_at_fpr, m)?)?;
    m.add_function(wrap_pyfunction!(scrub, m)?)?;
    m.add_function(wrap_pyfunction!(spoof_generate, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(score_detectability, m)?)?;
    m.add_function(wrap_pyfunction!(score_double_degradation, m)?)?;
    m.add_function(wrap_pyfunction!(score_detect_time, m)?)?;
    m.add_function(wrap_pyfunction!(score_usability, m)?)?;
    m.add_function(wrap_pyfunction!(score_robustness, m)?)?;
    m.add_function(wrap_pyfunction!(score_steal, m)?)?;
    m.add_function(wrap_pyfunction!(score_imperceptibility, m)?)?;
    m.add_function(wrap_pyfunction!(score_comprehensive, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_fixtures, m)?)?;
    Ok(())
}
