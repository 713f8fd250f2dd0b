//! Python bindings for the core analysis operations: text preparation,
//! award-ID extraction, topic-model fitting, investment accounting, and the
//! correlation test.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fundtail::invest;
use fundtail::lda::{self, LdaModel, LdaSettings};
use fundtail::stats;
use fundtail::textprep;

fn py_err(e: fundtail::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Lowercase alphabetic tokens of the text, shorter than two letters
/// dropped.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textprep::tokenize(text)
}

/// Tokenize, lemmatize with the built-in dictionary, and drop the built-in
/// stopwords.
#[pyfunction]
fn prepare(text: &str) -> Vec<String> {
    let stopwords = textprep::default_stopwords();
    let lemmas = textprep::default_lemmas();
    textprep::normalize_tokens(&textprep::tokenize(text), &stopwords, &lemmas)
}

/// Distinct seven-digit award numbers in the text, in order of first
/// occurrence.
#[pyfunction]
fn extract_award_ids(text: &str) -> Vec<String> {
    fundtail::ingest::extract_award_ids(text)
}

/// Per-topic investment: dollars of each document split by its topic
/// weights and summed per topic.
#[pyfunction]
fn topic_investment(dollars: Vec<u64>, gamma: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    invest::topic_investment(&dollars, &gamma).map_err(py_err)
}

/// 1-based ranks by descending investment, ties to the smaller index.
#[pyfunction]
fn rank_topics(ti: Vec<f64>) -> Vec<usize> {
    invest::rank_topics(&ti)
}

/// Head/tail segment ("head" or "tail") per topic. Mode is "count" or
/// "dollar-share".
#[pyfunction]
fn head_tail_partition(ti: Vec<f64>, mode: &str, fraction: f64) -> PyResult<Vec<String>> {
    let mode: invest::PartitionMode = mode.parse().map_err(py_err)?;
    let segments = invest::head_tail_partition(&ti, mode, fraction).map_err(py_err)?;
    Ok(segments.iter().map(|s| s.to_string()).collect())
}

/// Pearson correlation with a two-sided p-value: returns (r, t_stat,
/// p_two_sided, n).
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, f64, usize)> {
    let result = fundtail::analysis::pearson_with_p(&x, &y).map_err(py_err)?;
    Ok((result.r, result.t_stat, result.p_two_sided, result.n))
}

/// Natural log of the gamma function (Lanczos approximation).
#[pyfunction]
fn ln_gamma(x: f64) -> f64 {
    stats::ln_gamma(x)
}

/// A fitted topic model over token-list documents.
#[pyclass]
struct TopicModel {
    inner: LdaModel,
}

#[pymethods]
impl TopicModel {
    /// Fits a model on token-list documents. Vocabulary terms must appear
    /// in at least `min_df` documents and at most `max_df_ratio` of them.
    #[staticmethod]
    #[pyo3(signature = (
        docs, k, *, alpha=None, beta=0.1, iterations=200, burn_in=50,
        sample_lag=10, seed=0, chains=1, min_df=1, max_df_ratio=1.0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        docs: Vec<Vec<String>>,
        k: usize,
        alpha: Option<f64>,
        beta: f64,
        iterations: usize,
        burn_in: usize,
        sample_lag: usize,
        seed: u64,
        chains: usize,
        min_df: usize,
        max_df_ratio: f64,
    ) -> PyResult<Self> {
        let vocabulary = textprep::build_vocabulary(&docs, min_df, max_df_ratio).map_err(py_err)?;
        let dtm = textprep::to_bow(&docs, vocabulary);
        let settings = LdaSettings {
            alpha,
            beta,
            iterations,
            burn_in,
            sample_lag,
            seed,
            chains,
        };
        let model = lda::fit(&dtm, &settings.config_for(k)).map_err(py_err)?;
        Ok(TopicModel { inner: model })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let model = lda::load_model(std::path::Path::new(path)).map_err(py_err)?;
        Ok(TopicModel { inner: model })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        lda::save_model(&self.inner, std::path::Path::new(path)).map_err(py_err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.n_topics()
    }

    #[getter]
    fn n_docs(&self) -> usize {
        self.inner.n_docs()
    }

    #[getter]
    fn evidence(&self) -> f64 {
        self.inner.evidence
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.inner.vocabulary.terms().to_vec()
    }

    /// Topic-word distributions, one row per topic.
    fn phi(&self) -> Vec<Vec<f64>> {
        self.inner.phi.clone()
    }

    /// Document-topic distributions, one row per document.
    fn gamma(&self) -> Vec<Vec<f64>> {
        self.inner.gamma.clone()
    }

    fn loglik_trace(&self) -> Vec<f64> {
        self.inner.loglik_trace.clone()
    }

    /// The n highest-probability terms of one topic.
    fn top_terms(&self, topic: usize, n: usize) -> PyResult<Vec<String>> {
        if topic >= self.inner.n_topics() {
            return Err(PyValueError::new_err(format!(
                "topic {topic} out of range for k={}",
                self.inner.n_topics()
            )));
        }
        let row = &self.inner.phi[topic];
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| {
            row[b].partial_cmp(&row[a]).unwrap().then_with(|| a.cmp(&b))
        });
        Ok(order
            .into_iter()
            .take(n)
            .map(|i| self.inner.vocabulary.term(i).to_string())
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "TopicModel(k={}, docs={}, terms={}, evidence={:.4})",
            self.inner.n_topics(),
            self.inner.n_docs(),
            self.inner.n_terms(),
            self.inner.evidence
        )
    }
}

#[pymodule]
fn fundtail_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(prepare, m)?)?;
    m.add_function(wrap_pyfunction!(extract_award_ids, m)?)?;
    m.add_function(wrap_pyfunction!(topic_investment, m)?)?;
    m.add_function(wrap_pyfunction!(rank_topics, m)?)?;
    m.add_function(wrap_pyfunction!(head_tail_partition, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(ln_gamma, m)?)?;
    m.add_class::<TopicModel>()?;
    Ok(())
}
