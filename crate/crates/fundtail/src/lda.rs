//! Latent Dirichlet allocation by collapsed Gibbs sampling: fitting,
//! posterior-mean phi/gamma estimates, complete-data log-likelihood, and
//! harmonic-mean evidence for selecting the number of topics.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng, STAGE_FIT, STAGE_SELECT_K};
use crate::stats::ln_gamma;
use crate::textprep::{DocTermMatrix, Vocabulary};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Sampler configuration for one fit at a fixed topic count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
    pub seed: u64,
    pub chains: usize,
}

impl LdaConfig {
    /// Defaults: alpha = 50/K, beta = 0.1, 2000 iterations with 500 burn-in,
    /// a retained sample every 50 sweeps, one chain.
    pub fn new(k: usize) -> Self {
        LdaConfig {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.1,
            iterations: 2000,
            burn_in: 500,
            sample_lag: 50,
            seed: 0,
            chains: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::SamplerConfig(msg));
        if self.k < 1 {
            return fail("k must be at least 1".to_string());
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return fail(format!(
                "priors must be positive (alpha = {}, beta = {})",
                self.alpha, self.beta
            ));
        }
        if self.burn_in == 0 || self.burn_in >= self.iterations {
            return fail(format!(
                "need 0 < burn_in < iterations (burn_in = {}, iterations = {})",
                self.burn_in, self.iterations
            ));
        }
        if self.sample_lag < 1 {
            return fail("sample_lag must be at least 1".to_string());
        }
        if self.retained_samples() == 0 {
            return fail(format!(
                "no retained samples: iterations - burn_in = {} is below sample_lag = {}",
                self.iterations - self.burn_in,
                self.sample_lag
            ));
        }
        if self.chains < 1 {
            return fail("chains must be at least 1".to_string());
        }
        Ok(())
    }

    /// Number of post-burn-in samples the estimates will average over.
    pub fn retained_samples(&self) -> usize {
        (self.iterations - self.burn_in) / self.sample_lag
    }
}

/// Mutable sampler state: one topic assignment per token plus the three
/// count tables the full conditional needs. Tokens are laid out
/// document-major, within a document by ascending term index; sweeps visit
/// them in exactly that order, which is what makes runs reproducible.
#[derive(Debug, Clone)]
pub struct LdaState {
    k: usize,
    v: usize,
    doc_offsets: Vec<usize>,
    token_word: Vec<u32>,
    z: Vec<u32>,
    n_dk: Vec<u32>,
    n_kw: Vec<u32>,
    n_k: Vec<u32>,
}

impl LdaState {
    /// Expands the matrix into a token stream and assigns topics uniformly
    /// at random.
    pub fn init(dtm: &DocTermMatrix, k: usize, rng: &mut Rng) -> Self {
        let d = dtm.n_docs();
        let v = dtm.n_terms();
        let mut doc_offsets = Vec::with_capacity(d + 1);
        let mut token_word = Vec::new();
        doc_offsets.push(0);
        for doc in 0..d {
            for &(word, count) in dtm.row(doc) {
                for _ in 0..count {
                    token_word.push(word);
                }
            }
            doc_offsets.push(token_word.len());
        }
        let mut state = LdaState {
            k,
            v,
            doc_offsets,
            token_word,
            z: Vec::new(),
            n_dk: vec![0; d * k],
            n_kw: vec![0; k * v],
            n_k: vec![0; k],
        };
        state.z = Vec::with_capacity(state.token_word.len());
        for doc in 0..d {
            for t in state.doc_offsets[doc]..state.doc_offsets[doc + 1] {
                let topic = rng.next_index(k) as u32;
                state.z.push(topic);
                let word = state.token_word[t] as usize;
                state.n_dk[doc * k + topic as usize] += 1;
                state.n_kw[topic as usize * v + word] += 1;
                state.n_k[topic as usize] += 1;
            }
        }
        state
    }

    /// Builds state with explicit topic assignments, one per token in the
    /// document-major, ascending-term-index token order.
    pub fn from_assignments(dtm: &DocTermMatrix, k: usize, assignments: &[u32]) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidInput("need at least one topic".to_string()));
        }
        let mut rng = Rng::new(0);
        let mut state = LdaState::init(dtm, k, &mut rng);
        if assignments.len() != state.z.len() {
            return Err(Error::InvalidInput(format!(
                "{} assignments for {} tokens",
                assignments.len(),
                state.z.len()
            )));
        }
        if let Some(&bad) = assignments.iter().find(|&&t| t as usize >= k) {
            return Err(Error::InvalidInput(format!(
                "topic assignment {bad} out of range for k={k}"
            )));
        }
        state.n_dk.iter_mut().for_each(|c| *c = 0);
        state.n_kw.iter_mut().for_each(|c| *c = 0);
        state.n_k.iter_mut().for_each(|c| *c = 0);
        state.z.clear();
        for doc in 0..state.n_docs() {
            for t in state.doc_offsets[doc]..state.doc_offsets[doc + 1] {
                let topic = assignments[t] as usize;
                let word = state.token_word[t] as usize;
                state.z.push(topic as u32);
                state.n_dk[doc * k + topic] += 1;
                state.n_kw[topic * state.v + word] += 1;
                state.n_k[topic] += 1;
            }
        }
        Ok(state)
    }

    pub fn n_docs(&self) -> usize {
        self.doc_offsets.len() - 1
    }

    pub fn n_topics(&self) -> usize {
        self.k
    }

    pub fn n_terms(&self) -> usize {
        self.v
    }

    pub fn total_tokens(&self) -> usize {
        self.token_word.len()
    }

    pub fn doc_len(&self, doc: usize) -> usize {
        self.doc_offsets[doc + 1] - self.doc_offsets[doc]
    }

    pub fn doc_topic_count(&self, doc: usize, topic: usize) -> u32 {
        self.n_dk[doc * self.k + topic]
    }

    pub fn topic_word_count(&self, topic: usize, word: usize) -> u32 {
        self.n_kw[topic * self.v + word]
    }

    pub fn topic_count(&self, topic: usize) -> u32 {
        self.n_k[topic]
    }

    /// One Gibbs sweep: every token is resampled from its full conditional
    /// with that token's current assignment excluded from the counts.
    pub fn sweep(&mut self, alpha: f64, beta: f64, rng: &mut Rng, weights: &mut Vec<f64>) {
        weights.resize(self.k, 0.0);
        for doc in 0..self.n_docs() {
            let dk = doc * self.k;
            for t in self.doc_offsets[doc]..self.doc_offsets[doc + 1] {
                let word = self.token_word[t] as usize;
                let old = self.z[t] as usize;
                self.n_dk[dk + old] -= 1;
                self.n_kw[old * self.v + word] -= 1;
                self.n_k[old] -= 1;
                let total = fill_conditional(
                    weights,
                    &self.n_dk[dk..dk + self.k],
                    &self.n_kw,
                    &self.n_k,
                    word,
                    self.v,
                    alpha,
                    beta,
                );
                let new = rng.next_categorical(weights, total);
                self.z[t] = new as u32;
                self.n_dk[dk + new] += 1;
                self.n_kw[new * self.v + word] += 1;
                self.n_k[new] += 1;
            }
        }
    }

    /// Recomputes all count tables from the assignments and checks every
    /// structural invariant. Test support; returns a description of the
    /// first violation found.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let d = self.n_docs();
        let mut n_dk = vec![0u32; d * self.k];
        let mut n_kw = vec![0u32; self.k * self.v];
        let mut n_k = vec![0u32; self.k];
        for doc in 0..d {
            for t in self.doc_offsets[doc]..self.doc_offsets[doc + 1] {
                let topic = self.z[t] as usize;
                if topic >= self.k {
                    return Err(format!("token {t}: topic {topic} out of range"));
                }
                n_dk[doc * self.k + topic] += 1;
                n_kw[topic * self.v + self.token_word[t] as usize] += 1;
                n_k[topic] += 1;
            }
        }
        if n_dk != self.n_dk {
            return Err("doc-topic table disagrees with assignments".to_string());
        }
        if n_kw != self.n_kw {
            return Err("topic-word table disagrees with assignments".to_string());
        }
        if n_k != self.n_k {
            return Err("topic totals disagree with assignments".to_string());
        }
        for doc in 0..d {
            let row_sum: u32 = (0..self.k).map(|k| self.n_dk[doc * self.k + k]).sum();
            if row_sum as usize != self.doc_len(doc) {
                return Err(format!("doc {doc}: topic counts do not sum to its length"));
            }
        }
        for topic in 0..self.k {
            let row_sum: u32 = (0..self.v).map(|w| self.n_kw[topic * self.v + w]).sum();
            if row_sum != self.n_k[topic] {
                return Err(format!("topic {topic}: word counts do not sum to its total"));
            }
        }
        let total: u32 = self.n_k.iter().sum();
        if total as usize != self.total_tokens() {
            return Err("topic totals do not sum to the token count".to_string());
        }
        Ok(())
    }
}

/// Writes the unnormalized full-conditional weight for each topic into
/// `weights` and returns their sum. Counts must already exclude the token
/// being resampled.
#[inline]
fn fill_conditional(
    weights: &mut [f64],
    n_dk_row: &[u32],
    n_kw: &[u32],
    n_k: &[u32],
    word: usize,
    v: usize,
    alpha: f64,
    beta: f64,
) -> f64 {
    let v_beta = v as f64 * beta;
    let mut total = 0.0;
    for (topic, slot) in weights.iter_mut().enumerate() {
        let w = (n_dk_row[topic] as f64 + alpha) * (n_kw[topic * v + word] as f64 + beta)
            / (n_k[topic] as f64 + v_beta);
        *slot = w;
        total += w;
    }
    total
}

/// Full-conditional weights for assigning a token of `word` in `doc` to
/// each topic, given counts with that token already removed.
pub fn full_conditional_weights(
    state: &LdaState,
    doc: usize,
    word: usize,
    alpha: f64,
    beta: f64,
) -> Vec<f64> {
    let mut weights = vec![0.0; state.k];
    let dk = doc * state.k;
    fill_conditional(
        &mut weights,
        &state.n_dk[dk..dk + state.k],
        &state.n_kw,
        &state.n_k,
        word,
        state.v,
        alpha,
        beta,
    );
    weights
}

/// gamma[d][k] = (n_dk + alpha) / (len_d + K alpha). Rows sum to 1;
/// zero-length documents get the uniform prior row.
pub fn estimate_gamma(state: &LdaState, alpha: f64) -> Vec<Vec<f64>> {
    let k = state.n_topics();
    (0..state.n_docs())
        .map(|d| {
            let denom = state.doc_len(d) as f64 + k as f64 * alpha;
            (0..k)
                .map(|t| (state.doc_topic_count(d, t) as f64 + alpha) / denom)
                .collect()
        })
        .collect()
}

/// phi[k][w] = (n_kw + beta) / (n_k + V beta). Rows sum to 1; topics with no
/// assigned tokens get the uniform row.
pub fn estimate_phi(state: &LdaState, beta: f64) -> Vec<Vec<f64>> {
    let v = state.n_terms();
    (0..state.n_topics())
        .map(|t| {
            let denom = state.topic_count(t) as f64 + v as f64 * beta;
            (0..v)
                .map(|w| (state.topic_word_count(t, w) as f64 + beta) / denom)
                .collect()
        })
        .collect()
}

/// Complete-data log-likelihood log P(w|z) for the current assignments:
///
///   sum over topics of
///     ln G(V b) - V ln G(b) + sum_w ln G(n_kw + b) - ln G(n_k + V b)
///
/// Topics with no assigned tokens contribute exactly zero.
pub fn complete_log_likelihood(state: &LdaState, beta: f64) -> f64 {
    let v = state.n_terms();
    let v_beta = v as f64 * beta;
    let ln_gamma_beta = ln_gamma(beta);
    let ln_gamma_v_beta = ln_gamma(v_beta);
    let mut total = 0.0;
    for topic in 0..state.n_topics() {
        if state.topic_count(topic) == 0 {
            continue;
        }
        let mut topic_term = ln_gamma_v_beta - v as f64 * ln_gamma_beta;
        for word in 0..v {
            topic_term += ln_gamma(state.topic_word_count(topic, word) as f64 + beta);
        }
        topic_term -= ln_gamma(state.topic_count(topic) as f64 + v_beta);
        total += topic_term;
    }
    total
}

/// Log of the harmonic mean of the per-sample likelihoods:
/// log S - logsumexp(-l_1, ..., -l_S), the evidence estimate for one K.
pub fn evidence_for_k(loglik_samples: &[f64]) -> Result<f64> {
    if loglik_samples.is_empty() {
        return Err(Error::InsufficientData(
            "evidence requires at least one likelihood sample".to_string(),
        ));
    }
    let neg: Vec<f64> = loglik_samples.iter().map(|&l| -l).collect();
    let max = neg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = neg.iter().map(|&x| (x - max).exp()).sum();
    let log_sum_exp = max + sum_exp.ln();
    Ok((loglik_samples.len() as f64).ln() - log_sum_exp)
}

/// A fitted model: posterior-mean estimates plus the sample trace and the
/// evidence of the chain that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    pub vocabulary: Vocabulary,
    pub doc_keys: Vec<String>,
    pub phi: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub loglik_trace: Vec<f64>,
    pub evidence: f64,
}

impl LdaModel {
    pub fn n_topics(&self) -> usize {
        self.config.k
    }

    pub fn n_docs(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }
}

fn run_chain(dtm: &DocTermMatrix, config: &LdaConfig, chain: usize) -> LdaModel {
    let seed = derive_seed(config.seed, STAGE_FIT, config.k as u64, chain as u64);
    let mut rng = Rng::new(seed);
    let mut state = LdaState::init(dtm, config.k, &mut rng);
    let d = dtm.n_docs();
    let k = config.k;
    let v = dtm.n_terms();
    let mut weights = vec![0.0; k];
    let mut gamma_acc = vec![vec![0.0; k]; d];
    let mut phi_acc = vec![vec![0.0; v]; k];
    let mut trace = Vec::with_capacity(config.retained_samples());
    for sweep in 1..=config.iterations {
        state.sweep(config.alpha, config.beta, &mut rng, &mut weights);
        if sweep > config.burn_in && (sweep - config.burn_in) % config.sample_lag == 0 {
            trace.push(complete_log_likelihood(&state, config.beta));
            for (acc, row) in gamma_acc.iter_mut().zip(estimate_gamma(&state, config.alpha)) {
                for (slot, value) in acc.iter_mut().zip(row) {
                    *slot += value;
                }
            }
            for (acc, row) in phi_acc.iter_mut().zip(estimate_phi(&state, config.beta)) {
                for (slot, value) in acc.iter_mut().zip(row) {
                    *slot += value;
                }
            }
        }
    }
    let samples = trace.len() as f64;
    for row in &mut gamma_acc {
        for slot in row.iter_mut() {
            *slot /= samples;
        }
    }
    for row in &mut phi_acc {
        for slot in row.iter_mut() {
            *slot /= samples;
        }
    }
    let evidence = evidence_for_k(&trace).expect("validated config retains at least one sample");
    LdaModel {
        config: config.clone(),
        vocabulary: dtm.vocabulary.clone(),
        doc_keys: dtm.doc_keys.clone(),
        phi: phi_acc,
        gamma: gamma_acc,
        loglik_trace: trace,
        evidence,
    }
}

fn validate_fit_inputs(dtm: &DocTermMatrix, config: &LdaConfig) -> Result<()> {
    config.validate()?;
    if dtm.n_docs() == 0 {
        return Err(Error::EmptyCorpus);
    }
    if dtm.n_terms() == 0 {
        return Err(Error::EmptyVocabulary);
    }
    let total = dtm.total_tokens();
    if config.k > total {
        return Err(Error::TooManyTopics { k: config.k, total_tokens: total });
    }
    Ok(())
}

/// Runs every configured chain (in parallel, each on a seed derived from
/// the config seed, the topic count, and the chain index) and returns all
/// chain models plus the index of the best-evidence chain.
pub fn fit_chains(dtm: &DocTermMatrix, config: &LdaConfig) -> Result<(Vec<LdaModel>, usize)> {
    validate_fit_inputs(dtm, config)?;
    let models: Vec<LdaModel> = (0..config.chains)
        .into_par_iter()
        .map(|chain| run_chain(dtm, config, chain))
        .collect();
    let best = models
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.evidence
                .partial_cmp(&b.1.evidence)
                .expect("finite evidence")
                // On an exact tie prefer the lower chain index.
                .then(std::cmp::Ordering::Greater)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok((models, best))
}

/// Fits the model and returns the best-evidence chain. Deterministic for a
/// fixed config: the same inputs produce bit-identical estimates.
pub fn fit(dtm: &DocTermMatrix, config: &LdaConfig) -> Result<LdaModel> {
    let (mut models, best) = fit_chains(dtm, config)?;
    Ok(models.swap_remove(best))
}

/// Fit settings that are independent of the topic count; K-grid selection
/// instantiates one concrete config per candidate K. A missing alpha means
/// the 50/K default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaSettings {
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
    pub seed: u64,
    pub chains: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        LdaSettings {
            alpha: None,
            beta: 0.1,
            iterations: 2000,
            burn_in: 500,
            sample_lag: 50,
            seed: 0,
            chains: 1,
        }
    }
}

impl LdaSettings {
    pub fn config_for(&self, k: usize) -> LdaConfig {
        LdaConfig {
            k,
            alpha: self.alpha.unwrap_or(50.0 / k.max(1) as f64),
            beta: self.beta,
            iterations: self.iterations,
            burn_in: self.burn_in,
            sample_lag: self.sample_lag,
            seed: self.seed,
            chains: self.chains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEvidence {
    pub k: usize,
    pub evidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectKResult {
    pub selected_k: usize,
    pub table: Vec<KEvidence>,
    /// The fitted model for `selected_k`.
    pub model: LdaModel,
}

/// Fits one model per candidate K (in parallel, each K on its own derived
/// seed) and picks the evidence argmax, breaking ties toward the smaller K.
pub fn select_k(
    dtm: &DocTermMatrix,
    k_grid: &[usize],
    settings: &LdaSettings,
) -> Result<SelectKResult> {
    if k_grid.is_empty() {
        return Err(Error::InvalidInput("k grid is empty".to_string()));
    }
    if k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "k grid must be strictly ascending".to_string(),
        ));
    }
    let models: Vec<LdaModel> = k_grid
        .par_iter()
        .map(|&k| {
            let mut config = settings.config_for(k);
            config.seed = derive_seed(settings.seed, STAGE_SELECT_K, k as u64, 0);
            fit(dtm, &config).map_err(|e| Error::SelectK { k, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let table: Vec<KEvidence> = models
        .iter()
        .map(|m| KEvidence { k: m.config.k, evidence: m.evidence })
        .collect();
    let mut best = 0;
    for (i, entry) in table.iter().enumerate().skip(1) {
        if entry.evidence > table[best].evidence {
            best = i;
        }
    }
    let selected_k = table[best].k;
    let model = models.into_iter().nth(best).expect("index from enumerate");
    Ok(SelectKResult { selected_k, table, model })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: LdaModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// The model as versioned pretty-printed JSON, trailing newline included.
pub fn model_json(model: &LdaModel) -> Result<String> {
    let file = ModelFile { format_version: MODEL_FORMAT_VERSION, model: model.clone() };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::InvalidInput(format!("serializing model: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes the model as versioned pretty-printed JSON.
pub fn save_model(model: &LdaModel, path: &Path) -> Result<()> {
    fs::write(path, model_json(model)?).map_err(|e| Error::io(path, e))
}

/// Reads a model file, rejecting unknown format versions by name.
pub fn load_model(path: &Path) -> Result<LdaModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(file.model)
}
