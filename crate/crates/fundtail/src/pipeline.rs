//! End-to-end run orchestration. Each stage writes its artifact into the
//! run directory; `run_pipeline` chains all of them and finishes with a
//! manifest recording the config and the hash of every input and output.
//! A failed stage removes everything it and earlier stages wrote.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    build_topic_profiles, pearson_with_p, read_annotations, read_labels, CorrelationResult,
    ObjectiveAnnotation, TopicProfile,
};
use crate::config::{ReportFormat, RunConfig};
use crate::error::{Error, Result};
use crate::ingest::{
    grant_to_canonical_line, link_publications, merge_collaborative, parse_grants,
    parse_publications, publication_to_canonical_line, GrantFormat, GrantRecord, LinkTable,
    PubFormat, PublicationRecord,
};
use crate::invest::{build_investment_table, TopicInvestmentTable};
use crate::lda::{fit, model_json, select_k, LdaModel, SelectKResult};
use crate::report;
use crate::textprep::{
    build_vocabulary, default_lemmas, default_stopwords, load_lemmas, load_stopwords,
    normalize_tokens, to_bow, tokenize, DocTermMatrix,
};

pub const DATA_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A run directory: files written through it are tracked with their hash,
/// so a manifest can be assembled and failures can clean up after
/// themselves.
#[derive(Debug)]
pub struct RunDir {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    created: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(RunDir { dir: dir.to_path_buf(), outputs: BTreeMap::new(), created: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// File name to content hash, for every file written so far.
    pub fn outputs(&self) -> &BTreeMap<String, String> {
        &self.outputs
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        self.created.push(path);
        Ok(())
    }

    /// Best-effort removal of every file this run wrote. The directory
    /// itself is kept: it may predate the run.
    pub fn remove_created(&self) {
        for path in &self.created {
            let _ = fs::remove_file(path);
        }
    }
}

#[derive(Deserialize)]
struct DtmFile {
    #[allow(dead_code)]
    format_version: u32,
    #[serde(flatten)]
    dtm: DocTermMatrix,
}

#[derive(Deserialize)]
struct LinksFile {
    #[allow(dead_code)]
    format_version: u32,
    #[serde(flatten)]
    table: LinkTable,
}

#[derive(Deserialize)]
struct ProfilesFile {
    #[allow(dead_code)]
    format_version: u32,
    profiles: Vec<TopicProfile>,
}

/// Serialization-side wrapper: the payload is flattened next to the
/// version field without being cloned.
#[derive(Serialize)]
struct VersionedRef<'a, T: Serialize> {
    format_version: u32,
    #[serde(flatten)]
    payload: &'a T,
}

#[derive(Serialize)]
struct ProfilesFileRef<'a> {
    format_version: u32,
    profiles: &'a [TopicProfile],
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn to_versioned_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serializing artifact: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn read_versioned<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: VersionProbe = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    if probe.format_version != DATA_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: probe.format_version,
            expected: DATA_FORMAT_VERSION,
        });
    }
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_dtm(path: &Path) -> Result<DocTermMatrix> {
    read_versioned::<DtmFile>(path).map(|f| f.dtm)
}

pub fn load_links(path: &Path) -> Result<LinkTable> {
    read_versioned::<LinksFile>(path).map(|f| f.table)
}

pub fn load_profiles(path: &Path) -> Result<Vec<TopicProfile>> {
    read_versioned::<ProfilesFile>(path).map(|f| f.profiles)
}

/// Reads already-merged grants back from a canonical grants.jsonl.
pub fn read_canonical_grants(path: &Path) -> Result<Vec<GrantRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_grants(BufReader::new(file), GrantFormat::CanonicalJsonl)
}

pub fn read_canonical_pubs(path: &Path) -> Result<Vec<PublicationRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_publications(BufReader::new(file), PubFormat::CanonicalJsonl, "FU")?.records)
}

/// The complete run record: normalized config plus content hashes of every
/// input read and artifact written. Byte-identical across reruns of the
/// same inputs, machines, and directory layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: RunConfig,
    /// Input role (grants, pubs, ...) to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to content hash.
    pub outputs: BTreeMap<String, String>,
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: VersionProbe = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    if probe.format_version != MANIFEST_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: probe.format_version,
            expected: MANIFEST_FORMAT_VERSION,
        });
    }
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn hash_inputs(config: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut inputs = BTreeMap::new();
    for (role, path) in [
        ("grants", &config.grants),
        ("pubs", &config.pubs),
        ("stopwords", &config.stopwords),
        ("lemmas", &config.lemmas),
        ("annotations", &config.annotations),
        ("labels", &config.labels),
    ] {
        if let Some(path) = path {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            inputs.insert(role.to_string(), sha256_hex(&bytes));
        }
    }
    Ok(inputs)
}

/// Parses, normalizes, and merges the raw inputs, leaving canonical
/// grants.jsonl and pubs.jsonl in the run directory.
pub fn stage_ingest(
    config: &RunConfig,
    run: &mut RunDir,
) -> Result<(Vec<GrantRecord>, Vec<PublicationRecord>)> {
    let grants_path = config
        .grants
        .as_ref()
        .ok_or_else(|| Error::Config("no grants path configured".to_string()))?;
    let file = fs::File::open(grants_path).map_err(|e| Error::io(grants_path, e))?;
    let raw = parse_grants(BufReader::new(file), config.grants_format)?;
    let grants = merge_collaborative(raw);

    let pubs_path = config
        .pubs
        .as_ref()
        .ok_or_else(|| Error::Config("no publications path configured".to_string()))?;
    let file = fs::File::open(pubs_path).map_err(|e| Error::io(pubs_path, e))?;
    let parsed = parse_publications(BufReader::new(file), config.pubs_format, &config.funding_column)?;

    let mut grants_out = String::new();
    for grant in &grants {
        grants_out.push_str(&grant_to_canonical_line(grant)?);
        grants_out.push('\n');
    }
    run.write("grants.jsonl", grants_out.as_bytes())?;

    let mut pubs_out = String::new();
    for publication in &parsed.records {
        pubs_out.push_str(&publication_to_canonical_line(publication)?);
        pubs_out.push('\n');
    }
    run.write("pubs.jsonl", pubs_out.as_bytes())?;

    Ok((grants, parsed.records))
}

/// Tokenizes and normalizes each grant abstract with the configured (or
/// default) stopword and lemma resources.
pub fn prepare_docs(config: &RunConfig, grants: &[GrantRecord]) -> Result<Vec<Vec<String>>> {
    let stopwords = match &config.stopwords {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            load_stopwords(BufReader::new(file))?
        }
        None => default_stopwords(),
    };
    let lemmas = match &config.lemmas {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            load_lemmas(BufReader::new(file))?
        }
        None => default_lemmas(),
    };
    Ok(grants
        .iter()
        .map(|g| normalize_tokens(&tokenize(&g.abstract_text), &stopwords, &lemmas))
        .collect())
}

/// Turns abstracts into the document-term matrix, keyed by grant.
pub fn stage_prep(
    config: &RunConfig,
    grants: &[GrantRecord],
    run: &mut RunDir,
) -> Result<(DocTermMatrix, Vec<Vec<String>>)> {
    let docs = prepare_docs(config, grants)?;
    let vocabulary = build_vocabulary(&docs, config.min_df, config.max_df_ratio)?;
    let dtm = to_bow(&docs, vocabulary)
        .with_doc_keys(grants.iter().map(|g| g.grant_key.clone()).collect())?;
    let text = to_versioned_json(&VersionedRef {
        format_version: DATA_FORMAT_VERSION,
        payload: &dtm,
    })?;
    run.write("dtm.json", text.as_bytes())?;
    Ok((dtm, docs))
}

/// Fits the model at the fixed topic count from the config.
pub fn stage_fit(config: &RunConfig, dtm: &DocTermMatrix, run: &mut RunDir) -> Result<LdaModel> {
    let k = config
        .k
        .ok_or_else(|| Error::Config("no fixed k configured".to_string()))?;
    let model = fit(dtm, &config.lda.config_for(k))?;
    run.write("model.json", model_json(&model)?.as_bytes())?;
    Ok(model)
}

/// Fits one model per candidate topic count and keeps the evidence argmax.
pub fn stage_select_k(
    config: &RunConfig,
    dtm: &DocTermMatrix,
    run: &mut RunDir,
) -> Result<SelectKResult> {
    let grid = config
        .k_candidates()
        .ok_or_else(|| Error::Config("no k_grid configured".to_string()))?;
    let result = select_k(dtm, &grid, &config.lda)?;
    let mut evidence = Vec::new();
    report::write_evidence_csv(&result.table, &mut evidence)?;
    run.write("evidence.csv", &evidence)?;
    run.write("model.json", model_json(&result.model)?.as_bytes())?;
    Ok(result)
}

/// Award dollars in model document order.
pub fn aligned_dollars(grants: &[GrantRecord], doc_keys: &[String]) -> Result<Vec<u64>> {
    let by_key: BTreeMap<&str, u64> = grants
        .iter()
        .map(|g| (g.grant_key.as_str(), g.dollars_awarded))
        .collect();
    doc_keys
        .iter()
        .map(|key| {
            by_key.get(key.as_str()).copied().ok_or_else(|| {
                Error::InvalidInput(format!("model document '{key}' has no grant record"))
            })
        })
        .collect()
}

/// Computes per-topic investments and the head/tail partition.
pub fn stage_invest(
    config: &RunConfig,
    grants: &[GrantRecord],
    model: &LdaModel,
    run: &mut RunDir,
) -> Result<TopicInvestmentTable> {
    let dollars = aligned_dollars(grants, &model.doc_keys)?;
    let table = build_investment_table(
        &dollars,
        &model.gamma,
        config.partition_mode,
        config.head_fraction,
    )?;
    let mut bytes = Vec::new();
    report::write_invest_csv(&table, &mut bytes)?;
    run.write("invest.csv", &bytes)?;
    Ok(table)
}

/// Links publications to grants through acknowledged award IDs.
pub fn stage_link(
    grants: &[GrantRecord],
    pubs: &[PublicationRecord],
    run: &mut RunDir,
) -> Result<LinkTable> {
    let table = link_publications(grants, pubs)?;
    let text = to_versioned_json(&VersionedRef {
        format_version: DATA_FORMAT_VERSION,
        payload: &table,
    })?;
    run.write("links.json", text.as_bytes())?;
    Ok(table)
}

/// Builds per-topic profiles and both correlation rows.
#[allow(clippy::too_many_arguments)]
pub fn stage_analyze(
    config: &RunConfig,
    model: &LdaModel,
    docs: &[Vec<String>],
    grants: &[GrantRecord],
    links: &LinkTable,
    table: &TopicInvestmentTable,
    run: &mut RunDir,
) -> Result<(Vec<TopicProfile>, Vec<(&'static str, CorrelationResult)>)> {
    let dollars = aligned_dollars(grants, &model.doc_keys)?;
    let annotations: Option<ObjectiveAnnotation> = match &config.annotations {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Some(read_annotations(file)?)
        }
        None => None,
    };
    let labels = match &config.labels {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_labels(file)?
        }
        None => BTreeMap::new(),
    };
    let profiles = build_topic_profiles(
        model,
        docs,
        &dollars,
        links,
        annotations.as_ref(),
        &labels,
        config.n_top,
        config.n_labels,
    )?;

    let ti: Vec<f64> = table.rows.iter().map(|r| r.ti_dollars).collect();
    let pub_counts: Vec<f64> = profiles.iter().map(|p| p.pub_count_top as f64).collect();
    let topic_level = pearson_with_p(&ti, &pub_counts)?;
    let grant_dollars: Vec<f64> = dollars.iter().map(|&d| d as f64).collect();
    let grant_pubs: Vec<f64> = model
        .doc_keys
        .iter()
        .map(|key| {
            links
                .links
                .get(key)
                .map(|pubs| pubs.len() as f64)
                .ok_or_else(|| {
                    Error::InvalidInput(format!("grant '{key}' is not in the link table"))
                })
        })
        .collect::<Result<_>>()?;
    let grant_level = pearson_with_p(&grant_dollars, &grant_pubs)?;
    let correlations = vec![("topic", topic_level), ("grant", grant_level)];

    let text = to_versioned_json(&ProfilesFileRef {
        format_version: DATA_FORMAT_VERSION,
        profiles: &profiles,
    })?;
    run.write("profiles.json", text.as_bytes())?;
    let mut bytes = Vec::new();
    report::write_correlations_csv(&correlations, &mut bytes)?;
    run.write("correlations.csv", &bytes)?;

    Ok((profiles, correlations))
}

/// Emits the topic table and both figure CSVs.
pub fn stage_report(
    config: &RunConfig,
    profiles: &[TopicProfile],
    table: &TopicInvestmentTable,
    grants: &[GrantRecord],
    links: &LinkTable,
    run: &mut RunDir,
) -> Result<()> {
    let mut bytes = Vec::new();
    report::emit_topic_table(profiles, table, config.format, &mut bytes)?;
    let name = match config.format {
        ReportFormat::Csv => "topics.csv",
        ReportFormat::Json => "topics.json",
    };
    run.write(name, &bytes)?;

    let mut bytes = Vec::new();
    report::write_fig1(profiles, table, &mut bytes)?;
    run.write("fig1.csv", &bytes)?;

    let mut bytes = Vec::new();
    report::write_fig2(grants, links, &mut bytes)?;
    run.write("fig2.csv", &bytes)?;
    Ok(())
}

/// What a completed run produced, for reporting back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub n_grants: usize,
    pub n_pubs: usize,
    pub n_linked_pubs: usize,
    pub selected_k: usize,
    pub evidence: f64,
    /// Artifact file names, manifest included, in directory order.
    pub outputs: Vec<String>,
}

fn in_stage<T>(stage: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Stage { stage, source: Box::new(e) })
}

fn run_stages(config: &RunConfig, run: &mut RunDir) -> Result<RunSummary> {
    let (grants, pubs) = in_stage("ingest", stage_ingest(config, run))?;
    let (dtm, docs) = in_stage("prep", stage_prep(config, &grants, run))?;
    let model = if config.k_grid.is_some() {
        in_stage("select-k", stage_select_k(config, &dtm, run))?.model
    } else {
        in_stage("fit", stage_fit(config, &dtm, run))?
    };
    let table = in_stage("invest", stage_invest(config, &grants, &model, run))?;
    let links = in_stage("link", stage_link(&grants, &pubs, run))?;
    let (profiles, _) = in_stage(
        "analyze",
        stage_analyze(config, &model, &docs, &grants, &links, &table, run),
    )?;
    in_stage(
        "report",
        stage_report(config, &profiles, &table, &grants, &links, run),
    )?;

    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        config: config.normalized_for_manifest(),
        inputs: in_stage("manifest", hash_inputs(config))?,
        outputs: run.outputs().clone(),
    };
    let text = to_versioned_json(&manifest)?;
    in_stage("manifest", run.write("manifest.json", text.as_bytes()))?;

    let mut outputs: Vec<String> = run.outputs().keys().cloned().collect();
    outputs.sort();
    Ok(RunSummary {
        out_dir: run.dir().to_path_buf(),
        n_grants: grants.len(),
        n_pubs: pubs.len(),
        n_linked_pubs: links.linked_pub_count(),
        selected_k: model.config.k,
        evidence: model.evidence,
        outputs,
    })
}

/// Runs every stage in order. Validation failures happen before anything
/// is written; a failure in stage S removes every artifact stages up to
/// and including S had written.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    in_stage("validate", config.validate_for_run())?;
    let mut run = RunDir::create(&config.out_dir)?;
    match run_stages(config, &mut run) {
        Ok(summary) => Ok(summary),
        Err(e) => {
            run.remove_created();
            Err(e)
        }
    }
}
