//! Report artifacts: the six-column topic table, plot-ready CSVs, and the
//! small CSV files the pipeline stages leave behind.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{format_composition, CorrelationResult, TopicProfile};
use crate::config::ReportFormat;
use crate::error::{Error, Result};
use crate::ingest::{GrantRecord, LinkTable};
use crate::invest::TopicInvestmentTable;
use crate::lda::KEvidence;

/// One row of the published-style topic table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTableRow {
    /// 1-based, unlike the 0-based topic_index used internally.
    pub topic_number: usize,
    pub label: String,
    pub pub_count_top: usize,
    /// Whole dollars, rounded half-up from the underlying investment.
    pub ti_dollars: i64,
    pub ti_rank: usize,
    pub composition: String,
}

/// Rounds to the nearest integer, halves away from zero is not needed:
/// investments are nonnegative, so half-up and half-away coincide.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn io_error(e: std::io::Error) -> Error {
    Error::io("<writer>", e)
}

/// Joins profiles with the investment table into table rows, ordered by
/// topic number. The two sides must describe the same topics.
pub fn build_topic_rows(
    profiles: &[TopicProfile],
    table: &TopicInvestmentTable,
) -> Result<Vec<TopicTableRow>> {
    if profiles.len() != table.rows.len() {
        return Err(Error::InvalidInput(format!(
            "{} topic profiles but {} investment rows",
            profiles.len(),
            table.rows.len()
        )));
    }
    profiles
        .iter()
        .zip(&table.rows)
        .map(|(profile, invest)| {
            if profile.topic_index != invest.topic_index {
                return Err(Error::InvalidInput(format!(
                    "topic mismatch: profile {} next to investment row {}",
                    profile.topic_index, invest.topic_index
                )));
            }
            Ok(TopicTableRow {
                topic_number: profile.topic_index + 1,
                label: profile.label.clone(),
                pub_count_top: profile.pub_count_top,
                ti_dollars: round_half_up(invest.ti_dollars),
                ti_rank: invest.rank,
                composition: format_composition(&profile.composition),
            })
        })
        .collect()
}

fn write_topic_table_csv(rows: &[TopicTableRow], writer: impl Write) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record([
            "topic_number",
            "label",
            "pub_count_top",
            "ti_dollars",
            "ti_rank",
            "composition",
        ])
        .map_err(|e| Error::InvalidInput(format!("writing topic table: {e}")))?;
    for row in rows {
        csv_writer
            .write_record([
                row.topic_number.to_string(),
                row.label.clone(),
                row.pub_count_top.to_string(),
                row.ti_dollars.to_string(),
                row.ti_rank.to_string(),
                row.composition.clone(),
            ])
            .map_err(|e| Error::InvalidInput(format!("writing topic table: {e}")))?;
    }
    csv_writer
        .flush()
        .map_err(io_error)?;
    Ok(())
}

fn write_topic_table_json(rows: &[TopicTableRow], mut writer: impl Write) -> Result<()> {
    let mut text = serde_json::to_string_pretty(rows)
        .map_err(|e| Error::InvalidInput(format!("serializing topic table: {e}")))?;
    text.push('\n');
    writer.write_all(text.as_bytes()).map_err(io_error)
}

/// Emits the topic table in the requested format.
pub fn emit_topic_table(
    profiles: &[TopicProfile],
    table: &TopicInvestmentTable,
    format: ReportFormat,
    writer: impl Write,
) -> Result<()> {
    let rows = build_topic_rows(profiles, table)?;
    match format {
        ReportFormat::Csv => write_topic_table_csv(&rows, writer),
        ReportFormat::Json => write_topic_table_json(&rows, writer),
    }
}

/// fig1.csv: per-topic investment against publications from top grants,
/// highest investment first.
pub fn write_fig1(
    profiles: &[TopicProfile],
    table: &TopicInvestmentTable,
    writer: impl Write,
) -> Result<()> {
    let rows = build_topic_rows(profiles, table)?;
    let mut by_rank: Vec<&TopicTableRow> = rows.iter().collect();
    by_rank.sort_by_key(|row| row.ti_rank);
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["topic_number", "ti_dollars", "pub_count_top"])
        .map_err(|e| Error::InvalidInput(format!("writing fig1: {e}")))?;
    for row in by_rank {
        csv_writer
            .write_record([
                row.topic_number.to_string(),
                row.ti_dollars.to_string(),
                row.pub_count_top.to_string(),
            ])
            .map_err(|e| Error::InvalidInput(format!("writing fig1: {e}")))?;
    }
    csv_writer.flush().map_err(io_error)?;
    Ok(())
}

/// fig2.csv: per-grant dollars against linked publication count, highest
/// dollars first, ties by grant key.
pub fn write_fig2(
    grants: &[GrantRecord],
    links: &LinkTable,
    writer: impl Write,
) -> Result<()> {
    let mut order: Vec<&GrantRecord> = grants.iter().collect();
    order.sort_by(|a, b| {
        b.dollars_awarded
            .cmp(&a.dollars_awarded)
            .then_with(|| a.grant_key.cmp(&b.grant_key))
    });
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["grant_key", "dollars_awarded", "linked_pub_count"])
        .map_err(|e| Error::InvalidInput(format!("writing fig2: {e}")))?;
    for grant in order {
        let count = links.links.get(&grant.grant_key).map(|p| p.len()).unwrap_or(0);
        csv_writer
            .write_record([
                grant.grant_key.clone(),
                grant.dollars_awarded.to_string(),
                count.to_string(),
            ])
            .map_err(|e| Error::InvalidInput(format!("writing fig2: {e}")))?;
    }
    csv_writer.flush().map_err(io_error)?;
    Ok(())
}

/// invest.csv: the full investment table, one row per topic index.
pub fn write_invest_csv(table: &TopicInvestmentTable, writer: impl Write) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["topic_index", "ti_dollars", "rank", "cumulative_share", "segment"])
        .map_err(|e| Error::InvalidInput(format!("writing investments: {e}")))?;
    for row in &table.rows {
        csv_writer
            .write_record([
                row.topic_index.to_string(),
                row.ti_dollars.to_string(),
                row.rank.to_string(),
                row.cumulative_share.to_string(),
                row.segment.to_string(),
            ])
            .map_err(|e| Error::InvalidInput(format!("writing investments: {e}")))?;
    }
    csv_writer.flush().map_err(io_error)?;
    Ok(())
}

/// evidence.csv: model evidence per candidate topic count.
pub fn write_evidence_csv(table: &[KEvidence], writer: impl Write) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["k", "evidence"])
        .map_err(|e| Error::InvalidInput(format!("writing evidence: {e}")))?;
    for entry in table {
        csv_writer
            .write_record([entry.k.to_string(), entry.evidence.to_string()])
            .map_err(|e| Error::InvalidInput(format!("writing evidence: {e}")))?;
    }
    csv_writer.flush().map_err(io_error)?;
    Ok(())
}

/// correlations.csv: one row per correlation level (topic, grant).
pub fn write_correlations_csv(
    correlations: &[(&str, CorrelationResult)],
    writer: impl Write,
) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["level", "n", "r", "t_stat", "p_two_sided"])
        .map_err(|e| Error::InvalidInput(format!("writing correlations: {e}")))?;
    for (level, result) in correlations {
        csv_writer
            .write_record([
                level.to_string(),
                result.n.to_string(),
                result.r.to_string(),
                result.t_stat.to_string(),
                result.p_two_sided.to_string(),
            ])
            .map_err(|e| Error::InvalidInput(format!("writing correlations: {e}")))?;
    }
    csv_writer.flush().map_err(io_error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ObjectiveCode;
    use crate::invest::{Segment, TopicInvestmentRow};
    use std::collections::BTreeMap;

    fn profile(
        topic_index: usize,
        label: &str,
        pub_count_top: usize,
        composition: &[(ObjectiveCode, f64)],
    ) -> TopicProfile {
        TopicProfile {
            topic_index,
            label: label.to_string(),
            top_grants: vec![("g".to_string(), 0.5)],
            pub_count_top,
            pub_count_weighted: pub_count_top as f64,
            composition: composition.iter().cloned().collect::<BTreeMap<_, _>>(),
        }
    }

    fn invest_row(topic_index: usize, ti: f64, rank: usize) -> TopicInvestmentRow {
        TopicInvestmentRow {
            topic_index,
            ti_dollars: ti,
            rank,
            cumulative_share: 1.0,
            segment: if rank == 1 { Segment::Head } else { Segment::Tail },
        }
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(238285666.4), 238285666);
        assert_eq!(round_half_up(238285666.5), 238285667);
        assert_eq!(round_half_up(238285666.6), 238285667);
        assert_eq!(round_half_up(0.0), 0);
        assert_eq!(round_half_up(2.5), 3);
    }

    #[test]
    fn topic_table_row_matches_published_formatting() {
        let profiles = vec![
            profile(0, "Astronomical instrumentation", 15, &[]),
            profile(1, "Cosmology", 93, &[]),
            profile(
                2,
                "Observatory management",
                3,
                &[(ObjectiveCode::F, 100.0)],
            ),
        ];
        let table = TopicInvestmentTable {
            rows: vec![
                invest_row(0, 15849351.0, 3),
                invest_row(1, 7175474.0, 17),
                invest_row(2, 238285666.4, 1),
            ],
            aps_dollars: 261310491.4,
        };
        let mut out = Vec::new();
        emit_topic_table(&profiles, &table, ReportFormat::Csv, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "topic_number,label,pub_count_top,ti_dollars,ti_rank,composition"
        );
        assert_eq!(lines[3], "3,Observatory management,3,238285666,1,100%F");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn topic_table_rejects_mismatched_topics() {
        let profiles = vec![profile(0, "A", 1, &[])];
        let table = TopicInvestmentTable {
            rows: vec![invest_row(0, 1.0, 1), invest_row(1, 2.0, 2)],
            aps_dollars: 3.0,
        };
        assert!(build_topic_rows(&profiles, &table).is_err());
        let misnumbered = TopicInvestmentTable {
            rows: vec![invest_row(5, 1.0, 1)],
            aps_dollars: 1.0,
        };
        assert!(build_topic_rows(&profiles, &misnumbered).is_err());
    }

    #[test]
    fn dollars_column_sums_to_total_within_rounding() {
        // Fractional investments: each row may round by up to half a
        // dollar, so the column total stays within nt/2 of the true APS.
        let nt = 9;
        let profiles: Vec<TopicProfile> =
            (0..nt).map(|i| profile(i, "t", 0, &[])).collect();
        let rows: Vec<TopicInvestmentRow> = (0..nt)
            .map(|i| invest_row(i, 1000.0 + i as f64 + 0.4, nt - i))
            .collect();
        let aps: f64 = rows.iter().map(|r| r.ti_dollars).sum();
        let table = TopicInvestmentTable { rows, aps_dollars: aps };
        let built = build_topic_rows(&profiles, &table).unwrap();
        let column_sum: i64 = built.iter().map(|r| r.ti_dollars).sum();
        assert!((column_sum as f64 - aps).abs() <= nt as f64 / 2.0);
    }

    #[test]
    fn json_table_roundtrips() {
        let profiles = vec![profile(0, "Dark energy", 115, &[(ObjectiveCode::ST, 60.0), (ObjectiveCode::F, 20.0), (ObjectiveCode::R, 20.0)])];
        let table = TopicInvestmentTable {
            rows: vec![invest_row(0, 13531286.0, 1)],
            aps_dollars: 13531286.0,
        };
        let mut out = Vec::new();
        emit_topic_table(&profiles, &table, ReportFormat::Json, &mut out).unwrap();
        let rows: Vec<TopicTableRow> = serde_json::from_slice(&out).unwrap();
        assert_eq!(rows[0].topic_number, 1);
        assert_eq!(rows[0].ti_dollars, 13531286);
        assert_eq!(rows[0].composition, "60%ST; 20%R; 20%F");
    }

    #[test]
    fn fig1_sorts_by_descending_dollars() {
        let profiles = vec![
            profile(0, "A", 5, &[]),
            profile(1, "B", 9, &[]),
            profile(2, "C", 2, &[]),
        ];
        let table = TopicInvestmentTable {
            rows: vec![
                invest_row(0, 100.0, 2),
                invest_row(1, 50.0, 3),
                invest_row(2, 900.0, 1),
            ],
            aps_dollars: 1050.0,
        };
        let mut out = Vec::new();
        write_fig1(&profiles, &table, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "topic_number,ti_dollars,pub_count_top");
        assert_eq!(lines[1], "3,900,2");
        assert_eq!(lines[2], "1,100,5");
        assert_eq!(lines[3], "2,50,9");
    }

    #[test]
    fn fig2_sorts_by_dollars_and_counts_missing_grants_as_zero() {
        use std::collections::{BTreeMap, BTreeSet};
        let grants = vec![
            GrantRecord {
                grant_key: "g-small".to_string(),
                award_ids: vec!["0000001".to_string()],
                title: "t".to_string(),
                abstract_text: "a".to_string(),
                dollars_awarded: 10,
                program_codes: vec![],
                start_year: None,
            },
            GrantRecord {
                grant_key: "g-big".to_string(),
                award_ids: vec!["0000002".to_string()],
                title: "t".to_string(),
                abstract_text: "a".to_string(),
                dollars_awarded: 500,
                program_codes: vec![],
                start_year: None,
            },
        ];
        let mut links_map = BTreeMap::new();
        links_map.insert(
            "g-big".to_string(),
            ["p1", "p2"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
        );
        let links = LinkTable { links: links_map, unmatched_pub_keys: BTreeSet::new() };
        let mut out = Vec::new();
        write_fig2(&grants, &links, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "grant_key,dollars_awarded,linked_pub_count");
        assert_eq!(lines[1], "g-big,500,2");
        assert_eq!(lines[2], "g-small,10,0");
    }

    #[test]
    fn invest_csv_has_the_documented_columns() {
        let table = TopicInvestmentTable {
            rows: vec![invest_row(0, 180.0, 1), invest_row(1, 120.0, 2)],
            aps_dollars: 300.0,
        };
        let mut out = Vec::new();
        write_invest_csv(&table, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "topic_index,ti_dollars,rank,cumulative_share,segment");
        assert_eq!(lines[1], "0,180,1,1,head");
        assert_eq!(lines[2], "1,120,2,1,tail");
    }

    #[test]
    fn evidence_and_correlation_writers_are_stable() {
        let mut out = Vec::new();
        write_evidence_csv(
            &[
                KEvidence { k: 2, evidence: -100.5 },
                KEvidence { k: 3, evidence: -90.25 },
            ],
            &mut out,
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "2,-100.5");

        let mut out = Vec::new();
        write_correlations_csv(
            &[(
                "topic",
                CorrelationResult { r: -0.25, n: 22, t_stat: -1.5, p_two_sided: 0.125 },
            )],
            &mut out,
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "level,n,r,t_stat,p_two_sided");
        assert_eq!(text.lines().nth(1).unwrap(), "topic,22,-0.25,-1.5,0.125");
    }
}
