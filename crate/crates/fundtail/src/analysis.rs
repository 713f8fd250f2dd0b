//! Topic characterization and association tests: top documents per topic,
//! publication counts, objective-code composition, label suggestions, and
//! Pearson correlation with a Student-t p-value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LinkTable;
use crate::lda::LdaModel;
use crate::stats::student_t_two_sided_p;
use crate::textprep::{extract_bigrams, BigramScore};

/// Bigrams must recur at least this often across a topic's top documents
/// to be suggested as labels.
const LABEL_BIGRAM_MIN_COUNT: usize = 2;

/// Primary objective of a grant, assigned by human review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectiveCode {
    /// Research.
    R,
    /// Instrumentation.
    I,
    /// Major facility construction/operation.
    F,
    /// Education/training.
    E,
    /// Software/analysis techniques.
    ST,
}

impl FromStr for ObjectiveCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(ObjectiveCode::R),
            "I" => Ok(ObjectiveCode::I),
            "F" => Ok(ObjectiveCode::F),
            "E" => Ok(ObjectiveCode::E),
            "ST" => Ok(ObjectiveCode::ST),
            other => Err(Error::InvalidInput(format!(
                "unknown objective code '{other}' (expected R, I, F, E, or ST)"
            ))),
        }
    }
}

impl fmt::Display for ObjectiveCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveCode::R => write!(f, "R"),
            ObjectiveCode::I => write!(f, "I"),
            ObjectiveCode::F => write!(f, "F"),
            ObjectiveCode::E => write!(f, "E"),
            ObjectiveCode::ST => write!(f, "ST"),
        }
    }
}

/// Human objective judgments, one code per grant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectiveAnnotation {
    codes: BTreeMap<String, ObjectiveCode>,
}

impl ObjectiveAnnotation {
    pub fn insert(&mut self, grant_key: String, code: ObjectiveCode) {
        self.codes.insert(grant_key, code);
    }

    pub fn get(&self, grant_key: &str) -> Option<ObjectiveCode> {
        self.codes.get(grant_key).copied()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

fn column_index(headers: &csv::StringRecord, name: &str, what: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("{what} is missing a '{name}' column")))
}

/// Reads grant annotations from CSV with columns grant_key, code.
pub fn read_annotations(reader: impl Read) -> Result<ObjectiveAnnotation> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| Error::Parse {
            context: "annotations".to_string(),
            message: e.to_string(),
        })?
        .clone();
    let key_col = column_index(&headers, "grant_key", "annotations file")?;
    let code_col = column_index(&headers, "code", "annotations file")?;
    let mut annotations = ObjectiveAnnotation::default();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            context: format!("annotations record {}", i + 1),
            message: e.to_string(),
        })?;
        let key = record.get(key_col).unwrap_or("").to_string();
        let code: ObjectiveCode = record.get(code_col).unwrap_or("").parse()?;
        if annotations.codes.insert(key.clone(), code).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate annotation for grant '{key}'"
            )));
        }
    }
    Ok(annotations)
}

/// Reads human topic labels from CSV with columns topic_index, label.
pub fn read_labels(reader: impl Read) -> Result<BTreeMap<usize, String>> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| Error::Parse {
            context: "labels".to_string(),
            message: e.to_string(),
        })?
        .clone();
    let index_col = column_index(&headers, "topic_index", "labels file")?;
    let label_col = column_index(&headers, "label", "labels file")?;
    let mut labels = BTreeMap::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            context: format!("labels record {}", i + 1),
            message: e.to_string(),
        })?;
        let raw_index = record.get(index_col).unwrap_or("");
        let index: usize = raw_index.parse().map_err(|_| {
            Error::InvalidInput(format!(
                "labels record {}: bad topic_index '{raw_index}'",
                i + 1
            ))
        })?;
        let label = record.get(label_col).unwrap_or("").to_string();
        if labels.insert(index, label).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate label for topic index {index}"
            )));
        }
    }
    Ok(labels)
}

/// The n_top grants with the highest affinity for a topic, as
/// (grant_key, gamma) pairs in descending gamma order. Ties break by
/// descending dollars, then ascending grant key.
pub fn top_documents(
    gamma: &[Vec<f64>],
    grant_keys: &[String],
    dollars: &[u64],
    topic_index: usize,
    n_top: usize,
) -> Result<Vec<(String, f64)>> {
    let d = gamma.len();
    if grant_keys.len() != d || dollars.len() != d {
        return Err(Error::InvalidInput(format!(
            "{d} affinity rows but {} keys and {} dollar amounts",
            grant_keys.len(),
            dollars.len()
        )));
    }
    if n_top < 1 || n_top > d {
        return Err(Error::InvalidInput(format!(
            "n_top must be between 1 and {d}, got {n_top}"
        )));
    }
    if gamma.iter().any(|row| topic_index >= row.len()) {
        return Err(Error::InvalidInput(format!(
            "topic index {topic_index} out of range"
        )));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        gamma[b][topic_index]
            .partial_cmp(&gamma[a][topic_index])
            .expect("finite affinities")
            .then(dollars[b].cmp(&dollars[a]))
            .then(grant_keys[a].cmp(&grant_keys[b]))
    });
    Ok(order
        .into_iter()
        .take(n_top)
        .map(|i| (grant_keys[i].clone(), gamma[i][topic_index]))
        .collect())
}

/// Distinct publications linked to at least one of the given grants. A
/// publication acknowledging several of them counts once.
pub fn topic_publication_count(
    top_grants: &[(String, f64)],
    links: &LinkTable,
) -> Result<usize> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (key, _) in top_grants {
        let pubs = links.links.get(key).ok_or_else(|| {
            Error::InvalidInput(format!("grant '{key}' is not in the link table"))
        })?;
        seen.extend(pubs.iter().map(String::as_str));
    }
    Ok(seen.len())
}

/// W_i = sum over grants j of pubs_j * gamma[j][i]. With affinity rows
/// summing to 1 this conserves the total publication count.
pub fn gamma_weighted_publications(
    gamma: &[Vec<f64>],
    pubs_per_grant: &[usize],
) -> Result<Vec<f64>> {
    if gamma.len() != pubs_per_grant.len() {
        return Err(Error::InvalidInput(format!(
            "{} affinity rows but {} publication counts",
            gamma.len(),
            pubs_per_grant.len()
        )));
    }
    if gamma.is_empty() {
        return Err(Error::InvalidInput("no documents to weight".to_string()));
    }
    let width = gamma[0].len();
    if gamma.iter().any(|row| row.len() != width) {
        return Err(Error::InvalidInput("ragged affinity rows".to_string()));
    }
    let mut weighted = vec![0.0; width];
    for (row, &pubs) in gamma.iter().zip(pubs_per_grant) {
        for (slot, g) in weighted.iter_mut().zip(row) {
            *slot += pubs as f64 * g;
        }
    }
    Ok(weighted)
}

/// Percentage of top grants per objective code; values are multiples of
/// 100/n_top and sum to 100. Every top grant must be annotated.
pub fn composition(
    top_grants: &[(String, f64)],
    annotations: &ObjectiveAnnotation,
) -> Result<BTreeMap<ObjectiveCode, f64>> {
    let mut counts: BTreeMap<ObjectiveCode, usize> = BTreeMap::new();
    for (key, _) in top_grants {
        let code = annotations
            .get(key)
            .ok_or_else(|| Error::MissingAnnotation(key.clone()))?;
        *counts.entry(code).or_insert(0) += 1;
    }
    let n = top_grants.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(code, count)| (code, count as f64 * 100.0 / n))
        .collect())
}

/// Renders a composition map the way the topic table prints it:
/// percentages descending, ties in code order R, I, F, E, ST; an empty
/// map renders as an empty string.
pub fn format_composition(composition: &BTreeMap<ObjectiveCode, f64>) -> String {
    let mut entries: Vec<(&ObjectiveCode, &f64)> = composition.iter().collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(a.1)
            .expect("finite percentages")
            .then(a.0.cmp(b.0))
    });
    entries
        .iter()
        .map(|(code, pct)| format!("{}%{}", pct.round() as i64, code))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Pearson correlation with a two-sided Student-t p-value (df = n - 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub t_stat: f64,
    pub p_two_sided: f64,
}

/// Sample Pearson r with t = r * sqrt((n-2)/(1-r^2)) and the two-sided
/// tail probability of Student's t at n-2 degrees of freedom.
pub fn pearson_with_p(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "correlation inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 points, got {n}"
        )));
    }
    let mean_x: f64 = x.iter().sum::<f64>() / n as f64;
    let mean_y: f64 = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData(
            "correlation input has zero variance".to_string(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    let t_stat = if denom <= 0.0 {
        if r > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }
    } else {
        r * (df / denom).sqrt()
    };
    let p_two_sided = student_t_two_sided_p(t_stat, df);
    Ok(CorrelationResult { r, n, t_stat, p_two_sided })
}

/// Suggested labels for a topic: the strongest recurring bigrams across
/// its top documents only. Final labels remain a human decision.
pub fn label_candidates(
    model: &LdaModel,
    docs: &[Vec<String>],
    dollars: &[u64],
    topic_index: usize,
    n_top: usize,
    n_labels: usize,
) -> Result<Vec<BigramScore>> {
    if docs.len() != model.n_docs() {
        return Err(Error::InvalidInput(format!(
            "model was fitted on {} documents but {} were supplied",
            model.n_docs(),
            docs.len()
        )));
    }
    let top = top_documents(&model.gamma, &model.doc_keys, dollars, topic_index, n_top)?;
    let top_keys: BTreeSet<&str> = top.iter().map(|(k, _)| k.as_str()).collect();
    let top_docs: Vec<Vec<String>> = model
        .doc_keys
        .iter()
        .zip(docs)
        .filter(|(key, _)| top_keys.contains(key.as_str()))
        .map(|(_, doc)| doc.clone())
        .collect();
    extract_bigrams(&top_docs, LABEL_BIGRAM_MIN_COUNT, n_labels)
}

/// One topic's characterization row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicProfile {
    pub topic_index: usize,
    pub label: String,
    /// (grant_key, gamma), descending gamma.
    pub top_grants: Vec<(String, f64)>,
    /// Distinct publications acknowledging any top grant.
    pub pub_count_top: usize,
    /// Gamma-weighted share of all linked publications.
    pub pub_count_weighted: f64,
    pub composition: BTreeMap<ObjectiveCode, f64>,
}

/// Builds one profile per topic. Labels come from the human label map,
/// falling back to the strongest bigram suggestion, then to an empty
/// string. Composition is computed only when annotations are supplied.
#[allow(clippy::too_many_arguments)]
pub fn build_topic_profiles(
    model: &LdaModel,
    docs: &[Vec<String>],
    dollars: &[u64],
    links: &LinkTable,
    annotations: Option<&ObjectiveAnnotation>,
    labels: &BTreeMap<usize, String>,
    n_top: usize,
    n_labels: usize,
) -> Result<Vec<TopicProfile>> {
    let pubs_per_grant: Vec<usize> = model
        .doc_keys
        .iter()
        .map(|key| {
            links
                .links
                .get(key)
                .map(|pubs| pubs.len())
                .ok_or_else(|| {
                    Error::InvalidInput(format!("grant '{key}' is not in the link table"))
                })
        })
        .collect::<Result<_>>()?;
    let weighted = gamma_weighted_publications(&model.gamma, &pubs_per_grant)?;
    let mut profiles = Vec::with_capacity(model.n_topics());
    for topic in 0..model.n_topics() {
        let top_grants = top_documents(&model.gamma, &model.doc_keys, dollars, topic, n_top)?;
        let pub_count_top = topic_publication_count(&top_grants, links)?;
        let comp = match annotations {
            Some(ann) => composition(&top_grants, ann)?,
            None => BTreeMap::new(),
        };
        let label = match labels.get(&topic) {
            Some(label) => label.clone(),
            None => label_candidates(model, docs, dollars, topic, n_top, n_labels.max(1))?
                .first()
                .map(|b| format!("{} {}", b.bigram.0, b.bigram.1))
                .unwrap_or_default(),
        };
        profiles.push(TopicProfile {
            topic_index: topic,
            label,
            top_grants,
            pub_count_top,
            pub_count_weighted: weighted[topic],
            composition: comp,
        });
    }
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lda::LdaConfig;
    use crate::textprep::build_vocabulary;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn keys(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn link_table(pairs: &[(&str, &[&str])]) -> LinkTable {
        let mut links = LinkTable::default();
        for (grant, pubs) in pairs {
            links.links.insert(
                grant.to_string(),
                pubs.iter().map(|p| p.to_string()).collect(),
            );
        }
        links
    }

    #[test]
    fn top_documents_orders_by_gamma() {
        let gamma = vec![vec![0.2], vec![0.9], vec![0.5]];
        let top = top_documents(&gamma, &keys(&["g1", "g2", "g3"]), &[0, 0, 0], 0, 2).unwrap();
        assert_eq!(top, vec![("g2".to_string(), 0.9), ("g3".to_string(), 0.5)]);
        let all = top_documents(&gamma, &keys(&["g1", "g2", "g3"]), &[0, 0, 0], 0, 3).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[2].0, "g1");
    }

    #[test]
    fn top_documents_breaks_ties_by_dollars_then_key() {
        let gamma = vec![vec![0.4], vec![0.4], vec![0.1]];
        let top =
            top_documents(&gamma, &keys(&["small", "big", "rest"]), &[100, 200, 5], 0, 2)
                .unwrap();
        assert_eq!(top[0].0, "big");
        assert_eq!(top[1].0, "small");
        // Equal dollars: ascending key decides.
        let top =
            top_documents(&gamma, &keys(&["zeta", "alpha", "rest"]), &[100, 100, 5], 0, 2)
                .unwrap();
        assert_eq!(top[0].0, "alpha");
        assert_eq!(top[1].0, "zeta");
    }

    #[test]
    fn top_documents_validates_inputs() {
        let gamma = vec![vec![0.5, 0.5]];
        let k = keys(&["g1"]);
        assert!(top_documents(&gamma, &k, &[1], 0, 0).is_err());
        assert!(top_documents(&gamma, &k, &[1], 0, 2).is_err());
        assert!(top_documents(&gamma, &k, &[1], 2, 1).is_err());
        assert!(top_documents(&gamma, &k, &[1, 2], 0, 1).is_err());
    }

    #[test]
    fn publication_count_is_distinct() {
        let links = link_table(&[
            ("g1", &["p1", "p2"]),
            ("g2", &["p2"]),
            ("g3", &[]),
        ]);
        let top = vec![("g1".to_string(), 0.9), ("g2".to_string(), 0.8)];
        // p2 is shared; p1 unique: 2 distinct.
        assert_eq!(topic_publication_count(&top, &links).unwrap(), 2);
        let no_pubs = vec![("g3".to_string(), 0.5)];
        assert_eq!(topic_publication_count(&no_pubs, &links).unwrap(), 0);
        let unknown = vec![("nope".to_string(), 0.5)];
        let err = topic_publication_count(&unknown, &links).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn distinct_count_never_exceeds_sum_of_per_grant_counts() {
        let links = link_table(&[
            ("g1", &["p1", "p2", "p3"]),
            ("g2", &["p2", "p3", "p4"]),
        ]);
        let top = vec![("g1".to_string(), 0.9), ("g2".to_string(), 0.8)];
        let distinct = topic_publication_count(&top, &links).unwrap();
        let summed: usize = ["g1", "g2"].iter().map(|g| links.links[*g].len()).sum();
        assert_eq!(distinct, 4);
        assert!(distinct <= summed);
    }

    #[test]
    fn weighted_publications_follow_the_formula() {
        let gamma = vec![vec![0.3, 0.7], vec![0.9, 0.1]];
        let w = gamma_weighted_publications(&gamma, &[10, 0]).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-12);
        assert!((w[1] - 7.0).abs() < 1e-12);
        // Single topic: everything lands in it.
        let w = gamma_weighted_publications(&[vec![1.0], vec![1.0]], &[4, 5]).unwrap();
        assert!((w[0] - 9.0).abs() < 1e-12);
        assert!(gamma_weighted_publications(&gamma, &[1]).is_err());
        assert!(gamma_weighted_publications(&[], &[]).is_err());
    }

    #[test]
    fn composition_percentages_match_published_rows() {
        let mut ann = ObjectiveAnnotation::default();
        for (key, code) in [
            ("a", ObjectiveCode::F),
            ("b", ObjectiveCode::F),
            ("c", ObjectiveCode::F),
            ("d", ObjectiveCode::R),
            ("e", ObjectiveCode::I),
        ] {
            ann.insert(key.to_string(), code);
        }
        let top: Vec<(String, f64)> =
            ["a", "b", "c", "d", "e"].iter().map(|k| (k.to_string(), 0.5)).collect();
        let comp = composition(&top, &ann).unwrap();
        assert_eq!(comp[&ObjectiveCode::F], 60.0);
        assert_eq!(comp[&ObjectiveCode::R], 20.0);
        assert_eq!(comp[&ObjectiveCode::I], 20.0);
        assert_eq!(format_composition(&comp), "60%F; 20%R; 20%I");

        let mut ann = ObjectiveAnnotation::default();
        for key in ["a", "b", "c", "d"] {
            ann.insert(key.to_string(), ObjectiveCode::E);
        }
        ann.insert("e".to_string(), ObjectiveCode::R);
        let comp = composition(&top, &ann).unwrap();
        assert_eq!(format_composition(&comp), "80%E; 20%R");

        let mut ann = ObjectiveAnnotation::default();
        for key in ["a", "b", "c", "d", "e"] {
            ann.insert(key.to_string(), ObjectiveCode::R);
        }
        let comp = composition(&top, &ann).unwrap();
        assert_eq!(comp[&ObjectiveCode::R], 100.0);
        assert_eq!(format_composition(&comp), "100%R");
    }

    #[test]
    fn composition_requires_every_annotation() {
        let ann = ObjectiveAnnotation::default();
        let top = vec![("g7".to_string(), 0.5)];
        match composition(&top, &ann).unwrap_err() {
            Error::MissingAnnotation(key) => assert_eq!(key, "g7"),
            other => panic!("expected MissingAnnotation, got {other:?}"),
        }
    }

    #[test]
    fn format_composition_handles_empty_and_ties() {
        assert_eq!(format_composition(&BTreeMap::new()), "");
        let mut comp = BTreeMap::new();
        comp.insert(ObjectiveCode::ST, 40.0);
        comp.insert(ObjectiveCode::R, 40.0);
        comp.insert(ObjectiveCode::E, 20.0);
        assert_eq!(format_composition(&comp), "40%R; 40%ST; 20%E");
    }

    proptest! {
        #[test]
        fn composition_values_are_multiples_of_the_grain(
            codes in prop::collection::vec(0usize..5, 1..9)
        ) {
            let all = [
                ObjectiveCode::R,
                ObjectiveCode::I,
                ObjectiveCode::F,
                ObjectiveCode::E,
                ObjectiveCode::ST,
            ];
            let mut ann = ObjectiveAnnotation::default();
            let mut top = Vec::new();
            for (i, &c) in codes.iter().enumerate() {
                let key = format!("g{i}");
                ann.insert(key.clone(), all[c]);
                top.push((key, 0.5));
            }
            let comp = composition(&top, &ann).unwrap();
            let grain = 100.0 / codes.len() as f64;
            let mut total = 0.0;
            for &pct in comp.values() {
                prop_assert!(pct >= 0.0);
                let steps = pct / grain;
                prop_assert!((steps - steps.round()).abs() < 1e-9);
                total += pct;
            }
            prop_assert!((total - 100.0).abs() < 0.01);
        }
    }

    #[test]
    fn perfect_correlation_has_vanishing_p() {
        let result = pearson_with_p(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(result.r, 1.0);
        assert_eq!(result.p_two_sided, 0.0);
        assert_eq!(result.n, 3);
    }

    #[test]
    fn published_correlation_from_published_table() {
        // Investment column and publication column of the 22-topic table.
        let ti: Vec<f64> = [
            15849351u64, 7175474, 238285666, 8252839, 6445119, 11793068, 6808247, 7556216,
            10363471, 7740729, 7694161, 6463311, 8228472, 7145564, 5793256, 14034118, 8527815,
            10661390, 8488670, 13531286, 59085683, 8850868,
        ]
        .iter()
        .map(|&x| x as f64)
        .collect();
        let pubs: Vec<f64> = [
            15.0, 93.0, 3.0, 34.0, 39.0, 7.0, 11.0, 37.0, 43.0, 21.0, 19.0, 9.0, 26.0, 35.0,
            26.0, 11.0, 21.0, 52.0, 46.0, 115.0, 1.0, 45.0,
        ]
        .to_vec();
        let result = pearson_with_p(&ti, &pubs).unwrap();
        assert!((result.r - (-0.281)).abs() < 0.0005, "r = {}", result.r);
        assert!((result.p_two_sided - 0.205).abs() <= 0.001, "p = {}", result.p_two_sided);
        assert_eq!(result.n, 22);
    }

    #[test]
    fn eight_point_fixture_matches_reference_values() {
        let x = [1.2, 2.7, 3.1, 4.8, 5.0, 6.3, 7.9, 8.4];
        let y = [2.1, 1.9, 3.8, 3.2, 5.5, 4.9, 7.2, 6.8];
        let result = pearson_with_p(&x, &y).unwrap();
        assert!((result.r - 0.9180563608526190500194119311).abs() < 1e-10);
        assert!((result.t_stat - 5.672266973316625928).abs() < 1e-8);
        assert!((result.p_two_sided - 0.0012924251750365679868).abs() < 1e-8);
    }

    #[test]
    fn correlation_preconditions_are_enforced() {
        assert!(pearson_with_p(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson_with_p(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).is_err());
        assert!(pearson_with_p(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson_with_p(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn correlation_is_symmetric_and_scale_invariant(
            pairs in prop::collection::vec((-100i32..100, -100i32..100), 4..12),
            scale in prop::sample::select(vec![-3.0f64, -1.0, 0.5, 2.0, 10.0]),
            shift in -50i32..50,
        ) {
            let x: Vec<f64> = pairs.iter().map(|(a, _)| *a as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|(_, b)| *b as f64).collect();
            let base = match pearson_with_p(&x, &y) {
                Ok(result) => result,
                // Degenerate draws (zero variance) are outside the domain.
                Err(_) => return Ok(()),
            };
            let swapped = pearson_with_p(&y, &x).unwrap();
            prop_assert!((base.r - swapped.r).abs() < 1e-12);
            prop_assert!((base.p_two_sided - swapped.p_two_sided).abs() < 1e-12);
            let transformed: Vec<f64> =
                x.iter().map(|v| scale * v + shift as f64).collect();
            let scaled = pearson_with_p(&transformed, &y).unwrap();
            prop_assert!((scaled.r - scale.signum() * base.r).abs() < 1e-9);
            prop_assert!((scaled.p_two_sided - base.p_two_sided).abs() < 1e-9);
        }
    }

    fn toy_model(gamma: Vec<Vec<f64>>, doc_keys: Vec<String>, docs: &[Vec<String>]) -> LdaModel {
        let k = gamma[0].len();
        let vocabulary = build_vocabulary(docs, 1, 1.0).unwrap();
        let v = vocabulary.len();
        LdaModel {
            config: LdaConfig::new(k),
            vocabulary,
            doc_keys,
            phi: vec![vec![1.0 / v as f64; v]; k],
            gamma,
            loglik_trace: vec![-1.0],
            evidence: -1.0,
        }
    }

    fn words(text: &str) -> Vec<String> {
        text.split_whitespace().map(|s| s.to_string()).collect()
    }

    #[test]
    fn label_candidates_come_from_top_documents_only() {
        let docs = vec![
            words("dark energy survey measures dark energy"),
            words("dark energy drives cosmic acceleration"),
            words("stellar wind shapes stellar wind bubbles"),
        ];
        // Topic 0's top-2 documents are the first two.
        let gamma = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.1, 0.9],
        ];
        let model = toy_model(gamma, keys(&["g1", "g2", "g3"]), &docs);
        let candidates = label_candidates(&model, &docs, &[1, 1, 1], 0, 2, 3).unwrap();
        assert_eq!(
            candidates[0].bigram,
            ("dark".to_string(), "energy".to_string())
        );
        // "stellar wind" occurs only outside the top documents.
        assert!(candidates
            .iter()
            .all(|b| b.bigram != ("stellar".to_string(), "wind".to_string())));
    }

    #[test]
    fn label_candidates_empty_without_recurring_bigrams() {
        let docs = vec![words("alpha beta gamma"), words("delta epsilon zeta")];
        let gamma = vec![vec![0.9, 0.1], vec![0.8, 0.2]];
        let model = toy_model(gamma, keys(&["g1", "g2"]), &docs);
        let candidates = label_candidates(&model, &docs, &[1, 1], 0, 2, 5).unwrap();
        assert!(candidates.is_empty());
    }

    #[test]
    fn label_candidates_are_corpus_bigrams() {
        let docs = vec![
            words("radio survey maps radio survey fields"),
            words("radio survey catalog"),
        ];
        let gamma = vec![vec![1.0], vec![1.0]];
        let model = toy_model(gamma, keys(&["g1", "g2"]), &docs);
        let candidates = label_candidates(&model, &docs, &[1, 1], 0, 2, 10).unwrap();
        let corpus_bigrams: BTreeSet<(String, String)> =
            extract_bigrams(&docs, 1, usize::MAX).unwrap()
                .into_iter()
                .map(|b| b.bigram)
                .collect();
        assert!(!candidates.is_empty());
        for candidate in &candidates {
            assert!(corpus_bigrams.contains(&candidate.bigram));
        }
    }

    #[test]
    fn annotation_reader_parses_and_validates() {
        let csv = "grant_key,code\ng1,R\ng2,ST\n";
        let ann = read_annotations(csv.as_bytes()).unwrap();
        assert_eq!(ann.len(), 2);
        assert_eq!(ann.get("g2"), Some(ObjectiveCode::ST));

        let bad_code = "grant_key,code\ng1,X\n";
        assert!(read_annotations(bad_code.as_bytes()).is_err());
        let duplicate = "grant_key,code\ng1,R\ng1,I\n";
        assert!(read_annotations(duplicate.as_bytes()).is_err());
        let missing_column = "grant_key\ng1\n";
        assert!(read_annotations(missing_column.as_bytes()).is_err());
    }

    #[test]
    fn label_reader_parses_and_validates() {
        let csv = "topic_index,label\n0,Dark energy\n2,Observatory management\n";
        let labels = read_labels(csv.as_bytes()).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[&2], "Observatory management");

        assert!(read_labels("topic_index,label\nx,Bad\n".as_bytes()).is_err());
        assert!(read_labels("topic_index,label\n0,A\n0,B\n".as_bytes()).is_err());
        assert!(read_labels("label\nA\n".as_bytes()).is_err());
    }

    #[test]
    fn profiles_assemble_all_fields() {
        let docs = vec![
            words("dark energy survey measures dark energy"),
            words("dark energy drives cosmic acceleration"),
            words("stellar wind shapes stellar wind bubbles"),
        ];
        let gamma = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.1, 0.9],
        ];
        let model = toy_model(gamma, keys(&["g1", "g2", "g3"]), &docs);
        let links = link_table(&[
            ("g1", &["p1", "p2"]),
            ("g2", &["p2"]),
            ("g3", &["p3"]),
        ]);
        let mut ann = ObjectiveAnnotation::default();
        ann.insert("g1".to_string(), ObjectiveCode::F);
        ann.insert("g2".to_string(), ObjectiveCode::R);
        ann.insert("g3".to_string(), ObjectiveCode::R);
        let mut labels = BTreeMap::new();
        labels.insert(1usize, "Stellar winds".to_string());
        let profiles = build_topic_profiles(
            &model,
            &docs,
            &[100, 50, 10],
            &links,
            Some(&ann),
            &labels,
            2,
            3,
        )
        .unwrap();
        assert_eq!(profiles.len(), 2);
        // Topic 0: top grants g1, g2; distinct pubs p1, p2.
        assert_eq!(profiles[0].top_grants[0].0, "g1");
        assert_eq!(profiles[0].pub_count_top, 2);
        assert_eq!(profiles[0].label, "dark energy");
        assert_eq!(format_composition(&profiles[0].composition), "50%R; 50%F");
        // Topic 1 takes its human label and its top grants are g3, g2.
        assert_eq!(profiles[1].label, "Stellar winds");
        assert_eq!(profiles[1].top_grants[0].0, "g3");
        // Weighted counts conserve the 4 linked publications.
        let total: f64 = profiles.iter().map(|p| p.pub_count_weighted).sum();
        assert!((total - 4.0).abs() < 1e-9);
        // Without annotations the composition is empty.
        let bare = build_topic_profiles(
            &model,
            &docs,
            &[100, 50, 10],
            &links,
            None,
            &labels,
            2,
            3,
        )
        .unwrap();
        assert!(bare[0].composition.is_empty());
    }

    proptest! {
        #[test]
        fn weighted_publications_conserve_totals(
            rows in prop::collection::vec(
                (prop::collection::vec(1u32..100, 3), 0usize..50),
                1..10,
            )
        ) {
            let gamma: Vec<Vec<f64>> = rows
                .iter()
                .map(|(w, _)| {
                    let total: f64 = w.iter().map(|&x| x as f64).sum();
                    w.iter().map(|&x| x as f64 / total).collect()
                })
                .collect();
            let pubs: Vec<usize> = rows.iter().map(|(_, p)| *p).collect();
            let weighted = gamma_weighted_publications(&gamma, &pubs).unwrap();
            let total_weighted: f64 = weighted.iter().sum();
            let total_pubs: usize = pubs.iter().sum();
            let tol = 1e-9 * (total_pubs as f64).max(1.0);
            prop_assert!((total_weighted - total_pubs as f64).abs() <= tol);
        }
    }
}
