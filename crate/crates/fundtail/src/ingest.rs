//! Grant and publication ingestion: parsing the supported input formats,
//! normalizing and merging award records, and linking publications to the
//! grants they acknowledge.

pub mod nsf;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// NSF award numbers are fixed-width seven-digit strings.
pub const AWARD_ID_LEN: usize = 7;

/// One funded award, possibly the merger of several collaborative awards
/// that share a title and abstract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrantRecord {
    pub grant_key: String,
    pub award_ids: Vec<String>,
    pub title: String,
    pub abstract_text: String,
    pub dollars_awarded: u64,
    pub program_codes: Vec<String>,
    pub start_year: Option<i32>,
}

/// A published article with the award IDs it acknowledges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicationRecord {
    pub pub_key: String,
    pub title: String,
    pub year: Option<i32>,
    pub acknowledged_award_ids: Vec<String>,
}

/// Grant-to-publication linkage. Every grant key appears in `links`, with an
/// empty set when nothing acknowledges it; every ingested publication is
/// either in at least one grant's set or in `unmatched_pub_keys`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkTable {
    pub links: BTreeMap<String, BTreeSet<String>>,
    pub unmatched_pub_keys: BTreeSet<String>,
}

impl LinkTable {
    /// Number of distinct publications linked to at least one grant.
    pub fn linked_pub_count(&self) -> usize {
        let mut seen = BTreeSet::new();
        for pubs in self.links.values() {
            seen.extend(pubs.iter());
        }
        seen.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrantFormat {
    CanonicalJsonl,
    NsfApiJson,
    Csv,
}

impl FromStr for GrantFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical-jsonl" => Ok(GrantFormat::CanonicalJsonl),
            "nsf-api-json" => Ok(GrantFormat::NsfApiJson),
            "csv" => Ok(GrantFormat::Csv),
            other => Err(Error::InvalidInput(format!(
                "unknown grant format {other:?} (expected canonical-jsonl, nsf-api-json, or csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PubFormat {
    CanonicalJsonl,
    WosTabDelimited,
}

impl FromStr for PubFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical-jsonl" => Ok(PubFormat::CanonicalJsonl),
            "wos-tab-delimited" => Ok(PubFormat::WosTabDelimited),
            other => Err(Error::InvalidInput(format!(
                "unknown publication format {other:?} (expected canonical-jsonl or wos-tab-delimited)"
            ))),
        }
    }
}

/// Collapses all runs of whitespace to single spaces and trims the ends.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes an award ID to its canonical seven-digit form: non-digits are
/// stripped, shorter IDs are left-padded with zeros.
pub fn normalize_award_id(raw: &str) -> Result<String> {
    let digits: String = raw.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Err(Error::InvalidInput(format!(
            "award id {raw:?} contains no digits"
        )));
    }
    if digits.len() > AWARD_ID_LEN {
        return Err(Error::AwardIdTooLong { raw: raw.to_string() });
    }
    Ok(format!("{:0>width$}", digits, width = AWARD_ID_LEN))
}

fn normalize_award_ids(raw: &[String], context: &str) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in raw {
        let norm = normalize_award_id(id).map_err(|e| Error::Parse {
            context: context.to_string(),
            message: e.to_string(),
        })?;
        if seen.insert(norm.clone()) {
            out.push(norm);
        }
    }
    Ok(out)
}

fn dedup_preserving_order(items: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

/// Rounds a nonnegative dollar amount half-up to whole dollars.
fn round_dollars(x: f64, context: &str) -> Result<u64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Parse {
            context: context.to_string(),
            message: format!("invalid dollar amount {x}"),
        });
    }
    Ok((x + 0.5).floor() as u64)
}

/// Accepts integer, float, or numeric-string dollar values; rounds half-up.
fn parse_dollars(value: &serde_json::Value, context: &str) -> Result<u64> {
    match value {
        serde_json::Value::Null => Ok(0),
        serde_json::Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Ok(u)
            } else if let Some(f) = n.as_f64() {
                round_dollars(f, context)
            } else {
                Err(Error::Parse {
                    context: context.to_string(),
                    message: format!("invalid dollar amount {n}"),
                })
            }
        }
        serde_json::Value::String(s) => {
            let trimmed = s.trim();
            if trimmed.is_empty() {
                return Ok(0);
            }
            trimmed
                .parse::<u64>()
                .map(Ok)
                .unwrap_or_else(|_| match trimmed.parse::<f64>() {
                    Ok(f) => round_dollars(f, context),
                    Err(_) => Err(Error::Parse {
                        context: context.to_string(),
                        message: format!("field amount: cannot parse {s:?} as dollars"),
                    }),
                })
        }
        other => Err(Error::Parse {
            context: context.to_string(),
            message: format!("field amount: expected number or string, got {other}"),
        }),
    }
}

/// Canonical JSON-lines grant schema. `award_ids` appears on merged records
/// written back out by this tool; single-award inputs carry `award_id`.
#[derive(Deserialize)]
struct GrantLineIn {
    #[serde(default)]
    award_id: Option<String>,
    #[serde(default)]
    award_ids: Option<Vec<String>>,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    amount: serde_json::Value,
    #[serde(default)]
    program_codes: Vec<String>,
    #[serde(default)]
    start_year: Option<i32>,
}

#[derive(Serialize)]
struct GrantLineOut<'a> {
    award_id: &'a str,
    #[serde(skip_serializing_if = "skip_single_id")]
    award_ids: &'a [String],
    title: &'a str,
    #[serde(rename = "abstract")]
    abstract_text: &'a str,
    amount: u64,
    program_codes: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    start_year: &'a Option<i32>,
}

fn skip_single_id(ids: &&[String]) -> bool {
    ids.len() <= 1
}

/// Serializes one grant as a canonical JSON line (no trailing newline).
pub fn grant_to_canonical_line(g: &GrantRecord) -> Result<String> {
    let line = GrantLineOut {
        award_id: &g.grant_key,
        award_ids: &g.award_ids,
        title: &g.title,
        abstract_text: &g.abstract_text,
        amount: g.dollars_awarded,
        program_codes: &g.program_codes,
        start_year: &g.start_year,
    };
    serde_json::to_string(&line).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct PubLine {
    pub_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    award_ids: Vec<String>,
}

/// Serializes one publication as a canonical JSON line (no trailing newline).
pub fn publication_to_canonical_line(p: &PublicationRecord) -> Result<String> {
    let line = PubLine {
        pub_id: p.pub_key.clone(),
        title: p.title.clone(),
        year: p.year,
        award_ids: p.acknowledged_award_ids.clone(),
    };
    serde_json::to_string(&line).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Parses grant records from a byte stream in the declared format. Text
/// fields come out whitespace-collapsed and dollar amounts as whole dollars;
/// one record per input award (merging is a separate step).
pub fn parse_grants(source: impl BufRead, format: GrantFormat) -> Result<Vec<GrantRecord>> {
    match format {
        GrantFormat::CanonicalJsonl => parse_grants_jsonl(source),
        GrantFormat::NsfApiJson => parse_grants_nsf(source),
        GrantFormat::Csv => parse_grants_csv(source),
    }
}

fn parse_grants_jsonl(source: impl BufRead) -> Result<Vec<GrantRecord>> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let context = format!("grants line {}", idx + 1);
        let line = line.map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: GrantLineIn = serde_json::from_str(&line).map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        let raw_ids = match (&raw.award_ids, &raw.award_id) {
            (Some(ids), _) if !ids.is_empty() => ids.clone(),
            (_, Some(id)) => vec![id.clone()],
            _ => {
                return Err(Error::Parse {
                    context,
                    message: "field award_id: missing".to_string(),
                })
            }
        };
        let award_ids = normalize_award_ids(&raw_ids, &context)?;
        if award_ids.is_empty() {
            return Err(Error::Parse {
                context,
                message: "field award_id: empty after normalization".to_string(),
            });
        }
        let dollars = parse_dollars(&raw.amount, &context)?;
        out.push(GrantRecord {
            grant_key: award_ids[0].clone(),
            award_ids,
            title: normalize_text(&raw.title),
            abstract_text: normalize_text(&raw.abstract_text),
            dollars_awarded: dollars,
            program_codes: dedup_preserving_order(raw.program_codes),
            start_year: raw.start_year,
        });
    }
    Ok(out)
}

/// One award entry in an NSF API response page.
#[derive(Deserialize)]
struct NsfAward {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default, rename = "abstractText")]
    abstract_text: String,
    #[serde(default, rename = "fundsObligatedAmt")]
    funds_obligated_amt: serde_json::Value,
    #[serde(default, rename = "fundProgramName")]
    fund_program_name: Option<String>,
    #[serde(default, rename = "startDate")]
    start_date: Option<String>,
}

#[derive(Deserialize)]
struct NsfPage {
    response: NsfResponse,
}

#[derive(Deserialize)]
struct NsfResponse {
    #[serde(default)]
    award: Vec<serde_json::Value>,
}

fn year_from_mdy(date: &str) -> Option<i32> {
    // NSF dates are MM/DD/YYYY.
    let year = date.rsplit('/').next()?;
    year.parse().ok()
}

/// Parses one or more concatenated NSF API JSON documents, the exact bytes
/// the fetcher saves.
fn parse_grants_nsf(mut source: impl BufRead) -> Result<Vec<GrantRecord>> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Parse { context: "nsf-api-json".to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    let mut award_idx = 0usize;
    for (page_idx, page) in serde_json::Deserializer::from_str(&text)
        .into_iter::<NsfPage>()
        .enumerate()
    {
        let page = page.map_err(|e| Error::Parse {
            context: format!("nsf-api-json page {}", page_idx + 1),
            message: e.to_string(),
        })?;
        for value in page.response.award {
            award_idx += 1;
            let context = format!("nsf-api-json award {award_idx}");
            let award: NsfAward =
                serde_json::from_value(value).map_err(|e| Error::Parse {
                    context: context.clone(),
                    message: e.to_string(),
                })?;
            let id = normalize_award_id(&award.id).map_err(|e| Error::Parse {
                context: context.clone(),
                message: format!("field id: {e}"),
            })?;
            let dollars = parse_dollars(&award.funds_obligated_amt, &context)?;
            out.push(GrantRecord {
                grant_key: id.clone(),
                award_ids: vec![id],
                title: normalize_text(&award.title),
                abstract_text: normalize_text(&award.abstract_text),
                dollars_awarded: dollars,
                program_codes: award
                    .fund_program_name
                    .map(|p| vec![normalize_text(&p)])
                    .unwrap_or_default(),
                start_year: award.start_date.as_deref().and_then(year_from_mdy),
            });
        }
    }
    Ok(out)
}

fn parse_grants_csv(source: impl BufRead) -> Result<Vec<GrantRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { context: "csv header".to_string(), message: e.to_string() })?
        .clone();
    // A source with no bytes has no header row and holds zero records.
    if headers.len() == 0 || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Ok(Vec::new());
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::Parse {
            context: "csv header".to_string(),
            message: format!("missing required column {name:?}"),
        })
    };
    let idx_award = required("award_id")?;
    let idx_title = required("title")?;
    let idx_abstract = required("abstract")?;
    let idx_amount = required("amount")?;
    let idx_programs = col("program_codes");
    let idx_year = col("start_year");

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let context = format!("csv record {}", i + 1);
        let row = row.map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        let field = |idx: usize, name: &str| {
            row.get(idx).ok_or_else(|| Error::Parse {
                context: context.clone(),
                message: format!("missing field {name:?}"),
            })
        };
        let id = normalize_award_id(field(idx_award, "award_id")?).map_err(|e| Error::Parse {
            context: context.clone(),
            message: format!("field award_id: {e}"),
        })?;
        let amount_raw = field(idx_amount, "amount")?.trim();
        let dollars = parse_dollars(&serde_json::Value::String(amount_raw.to_string()), &context)?;
        let program_codes = match idx_programs.and_then(|i| row.get(i)) {
            Some(s) if !s.trim().is_empty() => dedup_preserving_order(
                s.split(';').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect(),
            ),
            _ => Vec::new(),
        };
        let start_year = match idx_year.and_then(|i| row.get(i)) {
            Some(s) if !s.trim().is_empty() => {
                Some(s.trim().parse::<i32>().map_err(|_| Error::Parse {
                    context: context.clone(),
                    message: format!("field start_year: cannot parse {s:?}"),
                })?)
            }
            _ => None,
        };
        out.push(GrantRecord {
            grant_key: id.clone(),
            award_ids: vec![id],
            title: normalize_text(field(idx_title, "title")?),
            abstract_text: normalize_text(field(idx_abstract, "abstract")?),
            dollars_awarded: dollars,
            program_codes,
            start_year,
        });
    }
    Ok(out)
}

/// Merges records that share a case-folded (title, abstract) pair into one
/// grant: dollars are summed, award IDs and program codes unioned in
/// first-appearance order. Total dollars are conserved and the output keeps
/// the relative order in which keys first appear. Idempotent.
pub fn merge_collaborative(grants: Vec<GrantRecord>) -> Vec<GrantRecord> {
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut merged: Vec<GrantRecord> = Vec::new();
    for grant in grants {
        let key = (
            grant.title.to_lowercase(),
            grant.abstract_text.to_lowercase(),
        );
        match index.get(&key) {
            Some(&i) => {
                let target = &mut merged[i];
                target.dollars_awarded += grant.dollars_awarded;
                for id in grant.award_ids {
                    if !target.award_ids.contains(&id) {
                        target.award_ids.push(id);
                    }
                }
                for code in grant.program_codes {
                    if !target.program_codes.contains(&code) {
                        target.program_codes.push(code);
                    }
                }
                target.start_year = match (target.start_year, grant.start_year) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            None => {
                index.insert(key, merged.len());
                merged.push(grant);
            }
        }
    }
    merged
}

/// Extracts all distinct seven-digit award numbers from free text, in order
/// of first occurrence. A "number" is a maximal run of ASCII digits, so
/// prefixes like "AST-", "NSF", or "#" and surrounding punctuation are
/// ignored; runs of any other length never match.
pub fn extract_award_ids(funding_text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut run_start: Option<usize> = None;
    let bytes = funding_text.as_bytes();
    for (i, &b) in bytes.iter().chain(std::iter::once(&b' ')).enumerate() {
        if b.is_ascii_digit() {
            run_start.get_or_insert(i);
        } else if let Some(start) = run_start.take() {
            if i - start == AWARD_ID_LEN {
                let id = &funding_text[start..i];
                if !out.iter().any(|x| x == id) {
                    out.push(id.to_string());
                }
            }
        }
    }
    out
}

/// Parsed publications plus the number of rows that lacked a funding field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPublications {
    pub records: Vec<PublicationRecord>,
    pub missing_funding_count: usize,
}

/// Parses publication records. For the tab-delimited export format the
/// funding column (default "FU") is run through [`extract_award_ids`]; rows
/// without that column are kept with no acknowledgments and counted.
pub fn parse_publications(
    source: impl BufRead,
    format: PubFormat,
    funding_column: &str,
) -> Result<ParsedPublications> {
    match format {
        PubFormat::CanonicalJsonl => parse_pubs_jsonl(source),
        PubFormat::WosTabDelimited => parse_pubs_wos(source, funding_column),
    }
}

fn parse_pubs_jsonl(source: impl BufRead) -> Result<ParsedPublications> {
    let mut records = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let context = format!("pubs line {}", idx + 1);
        let line = line.map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: PubLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        records.push(PublicationRecord {
            pub_key: raw.pub_id,
            title: normalize_text(&raw.title),
            year: raw.year,
            acknowledged_award_ids: normalize_award_ids(&raw.award_ids, &context)?,
        });
    }
    Ok(ParsedPublications { records, missing_funding_count: 0 })
}

/// Tab-delimited exports carry no quoting, so rows are split directly on
/// tabs. The header row is required; pub keys come from the "UT" column when
/// present, titles from "TI", years from "PY".
fn parse_pubs_wos(source: impl BufRead, funding_column: &str) -> Result<ParsedPublications> {
    let mut lines = source.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line.map_err(|e| Error::Parse {
                    context: format!("wos line {}", idx + 1),
                    message: e.to_string(),
                })?;
                let line = line.trim_start_matches('\u{feff}').to_string();
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Ok(ParsedPublications { records: Vec::new(), missing_funding_count: 0 })
            }
        }
    };
    let columns: Vec<&str> = header.split('\t').map(|c| c.trim()).collect();
    let col = |name: &str| columns.iter().position(|&c| c == name);
    let idx_funding = col(funding_column);
    let idx_key = col("UT");
    let idx_title = col("TI");
    let idx_year = col("PY");

    let mut records = Vec::new();
    let mut missing_funding_count = 0usize;
    for (idx, line) in lines {
        let context = format!("wos line {}", idx + 1);
        let line = line.map_err(|e| Error::Parse {
            context: context.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |i: Option<usize>| i.and_then(|i| fields.get(i)).map(|s| s.trim());
        let funding = get(idx_funding);
        let acknowledged_award_ids = match funding {
            Some(text) => extract_award_ids(text),
            None => {
                missing_funding_count += 1;
                Vec::new()
            }
        };
        let pub_key = get(idx_key)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("row-{}", records.len() + 1));
        records.push(PublicationRecord {
            pub_key,
            title: normalize_text(get(idx_title).unwrap_or("")),
            year: get(idx_year).and_then(|s| s.parse().ok()),
            acknowledged_award_ids,
        });
    }
    Ok(ParsedPublications { records, missing_funding_count })
}

/// Links publications to merged grants through acknowledged award IDs. A
/// publication acknowledging awards that belong to k distinct grants lands
/// in all k sets; publications matching no grant go to `unmatched_pub_keys`.
pub fn link_publications(
    grants: &[GrantRecord],
    pubs: &[PublicationRecord],
) -> Result<LinkTable> {
    let mut by_award: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut table = LinkTable::default();
    for grant in grants {
        if table
            .links
            .insert(grant.grant_key.clone(), BTreeSet::new())
            .is_some()
        {
            return Err(Error::DuplicateGrantKey(grant.grant_key.clone()));
        }
        for id in &grant.award_ids {
            by_award.entry(id).or_default().push(&grant.grant_key);
        }
    }
    for publication in pubs {
        let mut matched = false;
        for id in &publication.acknowledged_award_ids {
            if let Some(keys) = by_award.get(id.as_str()) {
                for key in keys {
                    table
                        .links
                        .get_mut(*key)
                        .expect("grant key registered above")
                        .insert(publication.pub_key.clone());
                    matched = true;
                }
            }
        }
        if !matched {
            table.unmatched_pub_keys.insert(publication.pub_key.clone());
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn grant(key: &str, title: &str, abs: &str, dollars: u64) -> GrantRecord {
        GrantRecord {
            grant_key: key.to_string(),
            award_ids: vec![key.to_string()],
            title: title.to_string(),
            abstract_text: abs.to_string(),
            dollars_awarded: dollars,
            program_codes: vec![],
            start_year: None,
        }
    }

    #[test]
    fn canonical_line_maps_fields_directly() {
        let src = r#"{"award_id":"1615960","title":"A Study","abstract":"We study.","amount":250000,"program_codes":["1257"],"start_year":2016}"#;
        let got = parse_grants(Cursor::new(src), GrantFormat::CanonicalJsonl).unwrap();
        assert_eq!(got.len(), 1);
        let g = &got[0];
        assert_eq!(g.award_ids, vec!["1615960"]);
        assert_eq!(g.dollars_awarded, 250000);
        assert_eq!(g.grant_key, "1615960");
        assert_eq!(g.title, "A Study");
        assert_eq!(g.program_codes, vec!["1257"]);
        assert_eq!(g.start_year, Some(2016));
    }

    #[test]
    fn empty_source_gives_empty_list() {
        for format in [GrantFormat::CanonicalJsonl, GrantFormat::NsfApiJson, GrantFormat::Csv] {
            assert!(parse_grants(Cursor::new(""), format).unwrap().is_empty());
        }
    }

    #[test]
    fn whitespace_and_padding_are_normalized() {
        let src = r#"{"award_id":"AST-41342","title":"  Wide   Field\tSurvey ","abstract":" a \n b ","amount":"1999.5"}"#;
        let g = &parse_grants(Cursor::new(src), GrantFormat::CanonicalJsonl).unwrap()[0];
        assert_eq!(g.award_ids, vec!["0041342"]);
        assert_eq!(g.title, "Wide Field Survey");
        assert_eq!(g.abstract_text, "a b");
        assert_eq!(g.dollars_awarded, 2000);
    }

    #[test]
    fn malformed_line_names_the_line() {
        let src = "{\"award_id\":\"1615960\",\"title\":\"t\",\"abstract\":\"a\",\"amount\":1}\n{\"title\":\"no id\"}";
        let err = parse_grants(Cursor::new(src), GrantFormat::CanonicalJsonl).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn eight_digit_award_id_is_rejected() {
        let err = normalize_award_id("12345678").unwrap_err();
        assert!(matches!(err, Error::AwardIdTooLong { .. }));
    }

    #[test]
    fn unknown_format_tag_is_an_error() {
        assert!("tsv".parse::<GrantFormat>().is_err());
        assert!("jsonl".parse::<PubFormat>().is_err());
        assert_eq!(
            "canonical-jsonl".parse::<GrantFormat>().unwrap(),
            GrantFormat::CanonicalJsonl
        );
    }

    const NSF_FIXTURE: &str = r#"{"response":{"award":[
        {"id":"1615960","title":"Survey One","abstractText":"First abstract.","fundsObligatedAmt":"250000","fundProgramName":"AST","startDate":"09/01/2016"},
        {"id":"1664342","title":"Survey Two","abstractText":"Second abstract.","fundsObligatedAmt":"1371647","fundProgramName":"AST"},
        {"id":"41342","title":"Survey Three","abstractText":"Third abstract.","fundsObligatedAmt":"98500"}
    ]}}"#;

    #[test]
    fn nsf_fixture_dollar_fields_match() {
        let got = parse_grants(Cursor::new(NSF_FIXTURE), GrantFormat::NsfApiJson).unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(
            got.iter().map(|g| g.dollars_awarded).collect::<Vec<_>>(),
            vec![250000, 1371647, 98500]
        );
        assert_eq!(got[0].start_year, Some(2016));
        assert_eq!(got[1].start_year, None);
        assert_eq!(got[2].award_ids, vec!["0041342"]);
        assert_eq!(got[0].program_codes, vec!["AST"]);
    }

    #[test]
    fn nsf_concatenated_pages_parse_as_one_stream() {
        let two_pages = format!("{NSF_FIXTURE}\n{NSF_FIXTURE}");
        let got = parse_grants(Cursor::new(two_pages), GrantFormat::NsfApiJson).unwrap();
        assert_eq!(got.len(), 6);
    }

    #[test]
    fn csv_grants_parse_with_optional_columns() {
        let src = "award_id,title,abstract,amount,program_codes,start_year\n\
                   1615960,Title A,Abstract A,250000,1257;121,2016\n\
                   1664342,Title B,Abstract B,50000.49,,\n";
        let got = parse_grants(Cursor::new(src), GrantFormat::Csv).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].program_codes, vec!["1257", "121"]);
        assert_eq!(got[0].start_year, Some(2016));
        assert_eq!(got[1].dollars_awarded, 50000);
        assert_eq!(got[1].program_codes, Vec::<String>::new());
    }

    #[test]
    fn csv_missing_required_column_is_an_error() {
        let src = "award_id,title,amount\n1615960,Title,100\n";
        let err = parse_grants(Cursor::new(src), GrantFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("abstract"), "{err}");
    }

    #[test]
    fn merge_sums_dollars_and_unions_ids() {
        let mut a = grant("1615960", "Shared Title", "Shared abstract.", 100000);
        a.program_codes = vec!["1257".to_string()];
        a.start_year = Some(2017);
        let mut b = grant("1664342", "Shared Title", "Shared abstract.", 50000);
        b.program_codes = vec!["1257".to_string(), "121".to_string()];
        b.start_year = Some(2016);
        let merged = merge_collaborative(vec![a, b]);
        assert_eq!(merged.len(), 1);
        let m = &merged[0];
        assert_eq!(m.dollars_awarded, 150000);
        assert_eq!(m.award_ids, vec!["1615960", "1664342"]);
        assert_eq!(m.grant_key, "1615960");
        assert_eq!(m.program_codes, vec!["1257", "121"]);
        assert_eq!(m.start_year, Some(2016));
    }

    #[test]
    fn merge_is_identity_on_distinct_records() {
        let input = vec![
            grant("0000001", "T1", "A1", 10),
            grant("0000002", "T2", "A2", 20),
        ];
        assert_eq!(merge_collaborative(input.clone()), input);
    }

    #[test]
    fn merge_key_ignores_case_and_keeps_first_appearance_order() {
        let records = vec![
            grant("0000001", "Alpha", "X", 1),
            grant("0000002", "Beta", "Y", 2),
            grant("0000003", "ALPHA", "x", 4),
        ];
        let merged = merge_collaborative(records);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].grant_key, "0000001");
        assert_eq!(merged[0].dollars_awarded, 5);
        assert_eq!(merged[0].title, "Alpha");
        assert_eq!(merged[1].grant_key, "0000002");
    }

    #[test]
    fn extract_single_prefixed_id() {
        assert_eq!(extract_award_ids("NSF grant AST-1615960"), vec!["1615960"]);
        assert_eq!(extract_award_ids(""), Vec::<String>::new());
        assert_eq!(
            extract_award_ids("grants 1615960 and #1664342"),
            vec!["1615960", "1664342"]
        );
    }

    #[test]
    fn extract_matches_hand_labeled_funding_strings() {
        // Real-style WoS funding strings with the expected extractions.
        let cases: Vec<(&str, Vec<&str>)> = vec![
            ("National Science Foundation [AST-1615960]", vec!["1615960"]),
            ("NSF AST1664342", vec!["1664342"]),
            ("NSF grant #1122334", vec!["1122334"]),
            ("NASA grant NNX-12345 and NSF 1234567", vec!["1234567"]),
            ("funded under awards 1111111, 2222222 and 3333333", vec!["1111111", "2222222", "3333333"]),
            ("NSF grant 1615960; NSF grant 1615960", vec!["1615960"]),
            ("DOE contract DE-AC02-06CH11357", vec![]),
            ("ERC advanced grant 12345678", vec![]),
            ("grant 123456", vec![]),
            ("NSF-1615960/AST", vec!["1615960"]),
            ("Grants AST 1122334 & AST 5566778", vec!["1122334", "5566778"]),
            ("award no. 0041342 (archival)", vec!["0041342"]),
            ("NSF (1615960)", vec!["1615960"]),
            ("10.13039/100000001 [1615960]", vec!["1615960"]),
            ("support from grants1664342and 1615960", vec!["1664342", "1615960"]),
            ("CONICYT Basal AFB-170002", vec![]),
            ("grant numbers 9876543 9876543", vec!["9876543"]),
            ("NSF REU site award AST-1659702.", vec!["1659702"]),
            ("the 2016 program (grant 1615960)", vec!["1615960"]),
            ("no funding acknowledged", vec![]),
        ];
        for (text, want) in cases {
            assert_eq!(extract_award_ids(text), want, "input {text:?}");
        }
    }

    proptest! {
        #[test]
        fn extraction_is_whitespace_invariant(ids in proptest::collection::vec(1_000_000u32..10_000_000, 1..5)) {
            let once = ids.iter().map(|i| format!("award {i}")).collect::<Vec<_>>().join(", ");
            let spaced = ids.iter().map(|i| format!("award   {i}")).collect::<Vec<_>>().join(" ,\t ");
            prop_assert_eq!(extract_award_ids(&once), extract_award_ids(&spaced));
        }

        #[test]
        fn extraction_returns_distinct_ids(text in ".{0,200}") {
            let ids = extract_award_ids(&text);
            let set: BTreeSet<_> = ids.iter().collect();
            prop_assert_eq!(set.len(), ids.len());
            for id in &ids {
                prop_assert_eq!(id.len(), AWARD_ID_LEN);
            }
        }

        #[test]
        fn merge_conserves_dollars_and_is_idempotent(
            seeds in proptest::collection::vec((0u8..5, 0u8..5, 0u64..1_000_000), 0..40)
        ) {
            let grants: Vec<GrantRecord> = seeds
                .iter()
                .enumerate()
                .map(|(i, (t, a, d))| {
                    let mut g = grant(
                        &format!("{:07}", i + 1),
                        &format!("title {t}"),
                        &format!("abstract {a}"),
                        *d,
                    );
                    g.program_codes = vec![format!("P{}", t)];
                    g
                })
                .collect();
            let total: u64 = grants.iter().map(|g| g.dollars_awarded).sum();
            let merged = merge_collaborative(grants);
            let merged_total: u64 = merged.iter().map(|g| g.dollars_awarded).sum();
            prop_assert_eq!(total, merged_total);
            let again = merge_collaborative(merged.clone());
            prop_assert_eq!(merged, again);
        }
    }

    #[test]
    fn pubs_canonical_jsonl_roundtrip() {
        let src = r#"{"pub_id":"WOS:123","title":"An article","year":2019,"award_ids":["1615960","41342"]}"#;
        let got = parse_publications(Cursor::new(src), PubFormat::CanonicalJsonl, "FU").unwrap();
        assert_eq!(got.missing_funding_count, 0);
        assert_eq!(got.records.len(), 1);
        let p = &got.records[0];
        assert_eq!(p.pub_key, "WOS:123");
        assert_eq!(p.year, Some(2019));
        assert_eq!(p.acknowledged_award_ids, vec!["1615960", "0041342"]);
        let line = publication_to_canonical_line(p).unwrap();
        let back = parse_publications(Cursor::new(line), PubFormat::CanonicalJsonl, "FU").unwrap();
        assert_eq!(back.records[0], *p);
    }

    const WOS_FIXTURE: &str = "UT\tTI\tPY\tFU\n\
        WOS:001\tGalaxies and dust\t2018\tNSF [AST-1615960]\n\
        WOS:002\tDeep survey\t2019\tNSF grant 1615960; DOE\n\
        WOS:003\tInstrument paper\t2019\tNSF [1664342]\n\
        WOS:004\tTheory of disks\t2020\tERC 789\n\
        WOS:005\tShort row\t2020\n";

    #[test]
    fn wos_fixture_parses_five_rows_with_shared_award() {
        let got =
            parse_publications(Cursor::new(WOS_FIXTURE), PubFormat::WosTabDelimited, "FU").unwrap();
        assert_eq!(got.records.len(), 5);
        assert_eq!(got.missing_funding_count, 1);
        let acked: Vec<_> = got
            .records
            .iter()
            .map(|p| p.acknowledged_award_ids.clone())
            .collect();
        assert_eq!(acked[0], vec!["1615960"]);
        assert_eq!(acked[1], vec!["1615960"]);
        assert_eq!(acked[2], vec!["1664342"]);
        assert!(acked[3].is_empty());
        assert!(acked[4].is_empty());
        assert_eq!(got.records[0].year, Some(2018));
        assert_eq!(got.records[0].title, "Galaxies and dust");
    }

    #[test]
    fn wos_missing_funding_column_keeps_records_and_counts() {
        let src = "UT\tTI\tPY\nWOS:001\tPaper\t2019\nWOS:002\tOther\t2020\n";
        let got = parse_publications(Cursor::new(src), PubFormat::WosTabDelimited, "FU").unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.missing_funding_count, 2);
        assert!(got.records.iter().all(|p| p.acknowledged_award_ids.is_empty()));
    }

    #[test]
    fn wos_funding_column_name_is_configurable() {
        let src = "UT\tFUNDING\nWOS:001\tNSF 1615960\n";
        let got =
            parse_publications(Cursor::new(src), PubFormat::WosTabDelimited, "FUNDING").unwrap();
        assert_eq!(got.records[0].acknowledged_award_ids, vec!["1615960"]);
    }

    fn pub_record(key: &str, ids: &[&str]) -> PublicationRecord {
        PublicationRecord {
            pub_key: key.to_string(),
            title: String::new(),
            year: None,
            acknowledged_award_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn link_single_grant_single_pub() {
        let grants = vec![grant("1615960", "T", "A", 1)];
        let pubs = vec![pub_record("WOS:1", &["1615960"])];
        let table = link_publications(&grants, &pubs).unwrap();
        assert_eq!(table.links["1615960"].len(), 1);
        assert!(table.unmatched_pub_keys.is_empty());
    }

    #[test]
    fn link_unmatched_pub_is_reported() {
        let grants = vec![grant("1615960", "T", "A", 1)];
        let pubs = vec![pub_record("WOS:1", &["9999999"])];
        let table = link_publications(&grants, &pubs).unwrap();
        assert!(table.links["1615960"].is_empty());
        assert!(table.unmatched_pub_keys.contains("WOS:1"));
    }

    #[test]
    fn link_merged_grant_collects_both_constituent_awards() {
        let mut g = grant("1615960", "T", "A", 1);
        g.award_ids = vec!["1615960".to_string(), "1664342".to_string()];
        let pubs = vec![
            pub_record("WOS:1", &["1615960"]),
            pub_record("WOS:2", &["1664342"]),
            pub_record("WOS:3", &["1615960", "1664342"]),
        ];
        let table = link_publications(&[g], &pubs).unwrap();
        assert_eq!(table.links["1615960"].len(), 3);
        assert_eq!(table.linked_pub_count(), 3);
    }

    #[test]
    fn link_duplicate_grant_keys_is_an_error() {
        let grants = vec![grant("1615960", "T", "A", 1), grant("1615960", "T2", "A2", 2)];
        let err = link_publications(&grants, &[]).unwrap_err();
        assert!(matches!(err, Error::DuplicateGrantKey(k) if k == "1615960"));
    }

    proptest! {
        #[test]
        fn every_pub_is_linked_or_unmatched(
            pub_awards in proptest::collection::vec(
                proptest::collection::vec(1_000_000u32..1_000_040, 0..3),
                0..30,
            )
        ) {
            let grants: Vec<GrantRecord> =
                (0..20).map(|i| grant(&format!("{:07}", 1_000_000 + i), &format!("T{i}"), "A", 1)).collect();
            let pubs: Vec<PublicationRecord> = pub_awards
                .iter()
                .enumerate()
                .map(|(i, ids)| PublicationRecord {
                    pub_key: format!("P{i}"),
                    title: String::new(),
                    year: None,
                    acknowledged_award_ids: ids.iter().map(|n| format!("{n:07}")).collect(),
                })
                .collect();
            let table = link_publications(&grants, &pubs).unwrap();
            prop_assert_eq!(table.linked_pub_count() + table.unmatched_pub_keys.len(), pubs.len());
            for publication in &pubs {
                let linked = table.links.values().any(|set| set.contains(&publication.pub_key));
                let unmatched = table.unmatched_pub_keys.contains(&publication.pub_key);
                prop_assert!(linked ^ unmatched);
            }
        }
    }

    #[test]
    fn grant_canonical_line_roundtrips_merged_records() {
        let mut g = grant("1615960", "T", "A", 150000);
        g.award_ids = vec!["1615960".to_string(), "1664342".to_string()];
        g.program_codes = vec!["1257".to_string()];
        g.start_year = Some(2016);
        let line = grant_to_canonical_line(&g).unwrap();
        let back = parse_grants(Cursor::new(line), GrantFormat::CanonicalJsonl).unwrap();
        assert_eq!(back[0], g);
    }
}
