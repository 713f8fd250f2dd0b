//! Deterministic synthetic corpora with planted topic structure. Each
//! document draws all its tokens from one topic's disjoint word block, so
//! recovery tests and benchmarks know the ground truth exactly.

use crate::rng::Rng;
use crate::textprep::{build_vocabulary, to_bow, DocTermMatrix};

const TOPIC_PREFIXES: [&str; 10] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
];

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    pub words_per_topic: usize,
    pub n_docs: usize,
    pub tokens_per_doc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dtm: DocTermMatrix,
    /// True topic-word rows aligned to the built vocabulary, uniform over
    /// each topic's observed block words.
    pub phi_true: Vec<Vec<f64>>,
    /// The raw term sequences, usable as document text.
    pub docs: Vec<Vec<String>>,
    /// The planted topic of each document.
    pub doc_topic: Vec<usize>,
}

/// The j-th word of a topic's block: a letter-only token that survives
/// tokenization unchanged and collides with no stopword or lemma entry.
pub fn topic_word(topic: usize, j: usize) -> String {
    assert!(topic < TOPIC_PREFIXES.len(), "at most 10 planted topics");
    let hi = (b'a' + (j / 26) as u8) as char;
    let lo = (b'a' + (j % 26) as u8) as char;
    format!("{}{}{}", TOPIC_PREFIXES[topic], hi, lo)
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.n_topics >= 1 && spec.n_topics <= TOPIC_PREFIXES.len());
    assert!(spec.words_per_topic >= 1 && spec.words_per_topic <= 26 * 26);
    assert!(spec.n_docs >= 1 && spec.tokens_per_doc >= 1);
    let blocks: Vec<Vec<String>> = (0..spec.n_topics)
        .map(|t| (0..spec.words_per_topic).map(|j| topic_word(t, j)).collect())
        .collect();
    let mut rng = Rng::new(spec.seed);
    let mut docs = Vec::with_capacity(spec.n_docs);
    let mut doc_topic = Vec::with_capacity(spec.n_docs);
    for _ in 0..spec.n_docs {
        let topic = rng.next_index(spec.n_topics);
        doc_topic.push(topic);
        let doc: Vec<String> = (0..spec.tokens_per_doc)
            .map(|_| blocks[topic][rng.next_index(spec.words_per_topic)].clone())
            .collect();
        docs.push(doc);
    }
    let vocab = build_vocabulary(&docs, 1, 1.0).expect("non-empty synthetic corpus");
    let mut phi_true = vec![vec![0.0; vocab.len()]; spec.n_topics];
    for (topic, block) in blocks.iter().enumerate() {
        let present: Vec<usize> = block.iter().filter_map(|w| vocab.index_of(w)).collect();
        let mass = 1.0 / present.len().max(1) as f64;
        for idx in present {
            phi_true[topic][idx] = mass;
        }
    }
    let dtm = to_bow(&docs, vocab);
    SyntheticCorpus { dtm, phi_true, docs, doc_topic }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for slot in 0..n {
            let mut perm = rest.clone();
            perm.insert(slot, n - 1);
            out.push(perm);
        }
    }
    out
}

/// Matches estimated topics to true topics by the permutation that
/// maximizes total cosine similarity; returns the per-true-topic cosines
/// under that matching. Topic labels are exchangeable in the model, so
/// recovery must be judged up to relabeling.
pub fn best_permutation_cosines(phi_est: &[Vec<f64>], phi_true: &[Vec<f64>]) -> Vec<f64> {
    let k = phi_true.len();
    assert_eq!(phi_est.len(), k);
    assert!(k <= 8, "exhaustive matching is factorial in k");
    let mut best_total = f64::NEG_INFINITY;
    let mut best = vec![0.0; k];
    for perm in permutations(k) {
        let cosines: Vec<f64> = (0..k)
            .map(|t| cosine(&phi_est[perm[t]], &phi_true[t]))
            .collect();
        let total: f64 = cosines.iter().sum();
        if total > best_total {
            best_total = total;
            best = cosines;
        }
    }
    best
}
