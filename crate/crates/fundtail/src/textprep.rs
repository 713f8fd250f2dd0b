//! Text preprocessing: tokenization, lemma and stopword normalization,
//! vocabulary construction, bag-of-words conversion, and bigram scoring for
//! topic labels.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default stopword list: a standard English list plus grant-boilerplate
/// terms (award, project, proposal, ...) that would otherwise dominate every
/// topic. Override with the stopwords flag.
pub const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

/// Default lemma dictionary (word TAB lemma), covering regular plurals and
/// frequent inflections in research-abstract English. Unknown words pass
/// through unchanged. Override with the lemmas flag.
pub const DEFAULT_LEMMAS: &str = include_str!("../assets/lemmas.tsv");

/// Fixed term space for a corpus: dense indices 0..V-1 with per-term
/// document frequencies from the build corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { terms, index, df }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_frequency(&self, i: usize) -> usize {
        self.df[i]
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyWire {
    terms: Vec<String>,
    df: Vec<usize>,
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        VocabularyWire { terms: self.terms.clone(), df: self.df.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = VocabularyWire::deserialize(deserializer)?;
        if wire.terms.len() != wire.df.len() {
            return Err(serde::de::Error::custom(
                "vocabulary terms and df lengths differ",
            ));
        }
        Ok(Vocabulary::from_parts(wire.terms, wire.df))
    }
}

/// Sparse bag-of-words counts over a fixed vocabulary. Rows hold strictly
/// positive counts sorted by term index; documents that lost every token to
/// vocabulary filtering keep an empty row and are tallied in
/// `empty_doc_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTermMatrix {
    pub vocabulary: Vocabulary,
    pub doc_keys: Vec<String>,
    rows: Vec<Vec<(u32, u32)>>,
    pub empty_doc_count: usize,
}

impl DocTermMatrix {
    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn row(&self, doc: usize) -> &[(u32, u32)] {
        &self.rows[doc]
    }

    pub fn rows(&self) -> &[Vec<(u32, u32)>] {
        &self.rows
    }

    pub fn doc_len(&self, doc: usize) -> usize {
        self.rows[doc].iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn total_tokens(&self) -> usize {
        (0..self.n_docs()).map(|d| self.doc_len(d)).sum()
    }

    pub fn with_doc_keys(mut self, doc_keys: Vec<String>) -> Result<Self> {
        if doc_keys.len() != self.rows.len() {
            return Err(Error::InvalidInput(format!(
                "{} doc keys for {} documents",
                doc_keys.len(),
                self.rows.len()
            )));
        }
        self.doc_keys = doc_keys;
        Ok(self)
    }
}

/// An adjacent term pair with its corpus count and association score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramScore {
    pub bigram: (String, String),
    pub count: usize,
    pub score: f64,
}

/// Splits text into lowercase alphabetic tokens. The text is lowercased
/// first; every non-alphabetic character (digits, punctuation, whitespace)
/// separates tokens, and tokens shorter than two characters are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

/// Replaces each token by its lemma when the dictionary knows it, then drops
/// stopwords. The stopword check runs on the lemma, so inflected forms of a
/// stopword are removed once their lemma is listed.
pub fn normalize_tokens(
    tokens: &[String],
    stopwords: &HashSet<String>,
    lemmas: &HashMap<String, String>,
) -> Vec<String> {
    tokens
        .iter()
        .map(|t| lemmas.get(t).unwrap_or(t))
        .filter(|t| !stopwords.contains(*t))
        .cloned()
        .collect()
}

/// Reads a stopword list, one word per line; blank lines ignored.
pub fn load_stopwords(reader: impl BufRead) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            context: format!("stopwords line {}", idx + 1),
            message: e.to_string(),
        })?;
        let word = line.trim();
        if !word.is_empty() {
            out.insert(word.to_lowercase());
        }
    }
    Ok(out)
}

/// Reads a lemma dictionary with one word TAB lemma pair per line.
pub fn load_lemmas(reader: impl BufRead) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let context = format!("lemmas line {}", idx + 1);
        let line = line.map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (word, lemma) = line.split_once('\t').ok_or_else(|| Error::Parse {
            context,
            message: "expected word TAB lemma".to_string(),
        })?;
        out.insert(word.trim().to_lowercase(), lemma.trim().to_lowercase());
    }
    Ok(out)
}

pub fn default_stopwords() -> HashSet<String> {
    load_stopwords(DEFAULT_STOPWORDS.as_bytes()).expect("embedded stopword list is well-formed")
}

pub fn default_lemmas() -> HashMap<String, String> {
    load_lemmas(DEFAULT_LEMMAS.as_bytes()).expect("embedded lemma table is well-formed")
}

/// Builds the vocabulary of terms whose document frequency lies in
/// [min_df, max_df_ratio * n_docs], ordered by descending document frequency
/// with ties broken lexicographically ascending.
pub fn build_vocabulary(
    docs: &[Vec<String>],
    min_df: usize,
    max_df_ratio: f64,
) -> Result<Vocabulary> {
    if min_df < 1 {
        return Err(Error::InvalidInput("min_df must be at least 1".to_string()));
    }
    if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
        return Err(Error::InvalidInput(
            "max_df_ratio must be in (0, 1]".to_string(),
        ));
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let max_df = max_df_ratio * docs.len() as f64;
    let mut kept: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df && n as f64 <= max_df)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let (terms, dfs): (Vec<String>, Vec<usize>) =
        kept.into_iter().map(|(t, n)| (t.to_string(), n)).unzip();
    Ok(Vocabulary::from_parts(terms, dfs))
}

/// Converts term-list documents to sparse counts over the vocabulary.
/// Out-of-vocabulary terms are dropped; documents left empty are retained as
/// empty rows and counted. Doc keys default to the document's position.
pub fn to_bow(docs: &[Vec<String>], vocabulary: Vocabulary) -> DocTermMatrix {
    let mut rows = Vec::with_capacity(docs.len());
    let mut empty_doc_count = 0;
    for doc in docs {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for term in doc {
            if let Some(i) = vocabulary.index_of(term) {
                *counts.entry(i as u32).or_insert(0) += 1;
            }
        }
        let mut row: Vec<(u32, u32)> = counts.into_iter().collect();
        row.sort_unstable();
        if row.is_empty() {
            empty_doc_count += 1;
        }
        rows.push(row);
    }
    let doc_keys = (0..docs.len()).map(|i| format!("doc-{i}")).collect();
    DocTermMatrix { vocabulary, doc_keys, rows, empty_doc_count }
}

/// Counts adjacent term pairs within documents (never across document
/// boundaries) and scores them by add-one-smoothed pointwise mutual
/// information:
///
///   score = ln( p(a,b) / (p(a) p(b)) )
///   p(a,b) = (count(a,b) + 1) / (P + T^2)
///   p(x)   = (count(x) + 1) / (N + T)
///
/// with N total tokens, P total adjacent positions, and T distinct terms.
/// Pairs below `min_count` are dropped; the top `top_n` are returned ordered
/// by (score, count, pair) descending.
pub fn extract_bigrams(
    docs: &[Vec<String>],
    min_count: usize,
    top_n: usize,
) -> Result<Vec<BigramScore>> {
    if min_count < 1 {
        return Err(Error::InvalidInput("min_count must be at least 1".to_string()));
    }
    let mut pair_counts: HashMap<(&str, &str), usize> = HashMap::new();
    let mut term_counts: HashMap<&str, usize> = HashMap::new();
    let mut total_tokens = 0usize;
    let mut total_pairs = 0usize;
    for doc in docs {
        for term in doc {
            *term_counts.entry(term).or_insert(0) += 1;
            total_tokens += 1;
        }
        for pair in doc.windows(2) {
            *pair_counts.entry((&pair[0], &pair[1])).or_insert(0) += 1;
            total_pairs += 1;
        }
    }
    let n_terms = term_counts.len();
    let pair_space = (total_pairs + n_terms * n_terms) as f64;
    let token_space = (total_tokens + n_terms) as f64;
    let mut scored: Vec<BigramScore> = pair_counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|((a, b), count)| {
            let p_ab = (count + 1) as f64 / pair_space;
            let p_a = (term_counts[a] + 1) as f64 / token_space;
            let p_b = (term_counts[b] + 1) as f64 / token_space;
            BigramScore {
                bigram: (a.to_string(), b.to_string()),
                count,
                score: (p_ab / (p_a * p_b)).ln(),
            }
        })
        .collect();
    scored.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .expect("finite bigram scores")
            .then_with(|| y.count.cmp(&x.count))
            .then_with(|| y.bigram.cmp(&x.bigram))
    });
    scored.truncate(top_n);
    Ok(scored)
}
