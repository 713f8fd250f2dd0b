//! Regenerates the committed end-to-end fixture under
//! tests/fixtures/pipeline/: a 50-grant corpus with three planted topics,
//! 120 publications, annotations, labels, a run config, and the golden
//! outputs of running the full pipeline on it. Idempotent: rerunning
//! produces byte-identical files.

use std::fs;
use std::path::Path;

use fundtail::config::RunConfig;
use fundtail::ingest::{grant_to_canonical_line, GrantRecord};
use fundtail::pipeline::run_pipeline;
use fundtail::rng::Rng;
use fundtail::synth::topic_word;

const N_GRANTS: usize = 50;
const N_COLLAB: usize = 4;
const WORDS_PER_TOPIC: usize = 8;
const TOKENS_PER_DOC: usize = 45;

fn planted_topic(i: usize) -> usize {
    i % 3
}

fn grant_dollars(i: usize) -> u64 {
    // One flagship grant per topic on top of a varied base.
    match i {
        2 => 2_500_000,
        17 => 1_400_000,
        33 => 900_000,
        _ => 50_000 + ((i as u64 * 37) % 23) * 17_000,
    }
}

fn abstract_tokens(i: usize) -> Vec<String> {
    let topic = planted_topic(i);
    let mut rng = Rng::new(9_000 + i as u64);
    (0..TOKENS_PER_DOC)
        .map(|_| topic_word(topic, rng.next_index(WORDS_PER_TOPIC)))
        .collect()
}

/// Publications acknowledging exactly one grant, count varying by grant.
fn single_pub_count(i: usize) -> usize {
    (i + i / 5) % 5
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline");
    fs::create_dir_all(&root).expect("create fixture dir");

    // Raw grants: 50 distinct awards plus 4 collaborative partners that
    // duplicate the title and abstract of grants 0..4 under another award
    // number. Ingest merges each pair into one grant with two award IDs.
    let mut lines = Vec::new();
    let mut records = Vec::new();
    for i in 0..N_GRANTS {
        let record = GrantRecord {
            grant_key: format!("{:07}", 1_000_000 + i),
            award_ids: vec![format!("{:07}", 1_000_000 + i)],
            title: format!("Study {} of field {}", i, planted_topic(i)),
            abstract_text: abstract_tokens(i).join(" "),
            dollars_awarded: grant_dollars(i),
            program_codes: vec![format!("12{:02}", planted_topic(i))],
            start_year: Some(2008 + (i % 5) as i32),
        };
        lines.push(grant_to_canonical_line(&record).expect("serialize grant"));
        records.push(record);
    }
    for i in 0..N_COLLAB {
        let base = &records[i];
        let partner = GrantRecord {
            grant_key: format!("{:07}", 2_000_000 + i),
            award_ids: vec![format!("{:07}", 2_000_000 + i)],
            title: base.title.clone(),
            abstract_text: base.abstract_text.clone(),
            dollars_awarded: 75_000,
            program_codes: base.program_codes.clone(),
            start_year: base.start_year,
        };
        lines.push(grant_to_canonical_line(&partner).expect("serialize partner"));
    }
    fs::write(root.join("grants.jsonl"), lines.join("\n") + "\n").expect("write grants");

    // Publications: singles per grant, a few acknowledging the partner
    // award of a merged grant, a few acknowledging two grants at once, and
    // unmatched ones (unknown award or no usable number at all).
    let mut pubs = Vec::new();
    let mut idx = 0usize;
    let mut push = |award_ids: &[String], idx: &mut usize| {
        let ids = award_ids
            .iter()
            .map(|s| format!("\"{s}\""))
            .collect::<Vec<_>>()
            .join(",");
        pubs.push(format!(
            r#"{{"pub_id":"p{:04}","title":"Result {}","year":{},"award_ids":[{}]}}"#,
            *idx,
            *idx,
            2011 + (*idx % 6),
            ids
        ));
        *idx += 1;
    };
    for i in 0..N_GRANTS {
        for _ in 0..single_pub_count(i) {
            push(&[format!("{:07}", 1_000_000 + i)], &mut idx);
        }
    }
    for i in 0..N_COLLAB {
        // Through the partner award number of a merged grant.
        push(&[format!("{:07}", 2_000_000 + i)], &mut idx);
    }
    for i in 0..6 {
        let a = 4 * i;
        let b = 4 * i + 2;
        push(
            &[format!("{:07}", 1_000_000 + a), format!("{:07}", 1_000_000 + b)],
            &mut idx,
        );
    }
    while idx < 115 {
        push(&[format!("{:07}", 1_000_000 + (idx * 13) % N_GRANTS)], &mut idx);
    }
    for j in 0..5 {
        // Unknown seven-digit awards: parsed but matching nothing.
        push(&[format!("{:07}", 9_999_990 + j)], &mut idx);
    }
    assert_eq!(idx, 120, "fixture is specified as 120 publications");
    fs::write(root.join("pubs.jsonl"), pubs.join("\n") + "\n").expect("write pubs");

    // Objective annotations for every grant.
    let codes = ["R", "R", "I", "F", "R", "ST", "I", "E", "R", "F"];
    let mut annotations = String::from("grant_key,code\n");
    for i in 0..N_GRANTS {
        annotations.push_str(&format!("{:07},{}\n", 1_000_000 + i, codes[i % codes.len()]));
    }
    fs::write(root.join("annotations.csv"), annotations).expect("write annotations");

    let labels = "topic_index,label\n0,Stellar dynamics\n1,Galactic surveys\n2,Instrument development\n";
    fs::write(root.join("labels.csv"), labels).expect("write labels");

    let config_json = r#"{
  "grants": "grants.jsonl",
  "pubs": "pubs.jsonl",
  "annotations": "annotations.csv",
  "labels": "labels.csv",
  "min_df": 2,
  "max_df_ratio": 0.95,
  "k": 3,
  "lda": {
    "alpha": null,
    "beta": 0.1,
    "iterations": 400,
    "burn_in": 100,
    "sample_lag": 30,
    "seed": 42,
    "chains": 1
  },
  "partition_mode": "count",
  "head_fraction": 0.2,
  "n_top": 5,
  "n_labels": 3,
  "out_dir": "golden",
  "format": "csv"
}
"#;
    fs::write(root.join("config.json"), config_json).expect("write config");

    let config = RunConfig::load(&root.join("config.json")).expect("load fixture config");
    let summary = run_pipeline(&config).expect("golden pipeline run");
    println!(
        "fixture regenerated: {} grants, {} pubs, k = {}, {} artifacts in {}",
        summary.n_grants,
        summary.n_pubs,
        summary.selected_k,
        summary.outputs.len(),
        summary.out_dir.display()
    );
}
