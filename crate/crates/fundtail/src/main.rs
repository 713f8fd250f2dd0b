//! Thin command-line shell over the library: every subcommand parses flags
//! into a RunConfig and calls the matching pipeline stage.

use std::env;
use std::fs;
use std::io::Cursor;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fundtail::analysis::CorrelationResult;
use fundtail::config::{parse_k_grid, RunConfig};
use fundtail::ingest::nsf::{fetch_nsf_awards, FetchConfig, DEFAULT_ENDPOINT};
use fundtail::ingest::{parse_grants, GrantFormat};
use fundtail::invest::build_investment_table;
use fundtail::lda::load_model;
use fundtail::pipeline::{
    aligned_dollars, load_dtm, load_links, load_profiles, prepare_docs, read_canonical_grants,
    read_canonical_pubs, run_pipeline, stage_analyze, stage_fit, stage_ingest, stage_invest,
    stage_link, stage_prep, stage_report, stage_select_k, RunDir,
};
use fundtail::{Error, Result};

const ENDPOINT_ENV: &str = "FUNDTAIL_NSF_ENDPOINT";

#[derive(Parser)]
#[command(
    name = "fundtail",
    version,
    about = "Topic-level analysis of where grant dollars go and what publications come back"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download one division-year of awards from the NSF search API
    Fetch(FetchArgs),
    /// Parse raw inputs, merge collaborative awards, write canonical files
    Ingest(Overrides),
    /// Tokenize canonical grants into the document-term matrix
    Prep(Overrides),
    /// Fit the topic model at a fixed topic count
    Fit(Overrides),
    /// Fit every candidate topic count and keep the best-evidence model
    SelectK(Overrides),
    /// Compute per-topic investments and the head/tail split
    Invest(Overrides),
    /// Link publications to grants through acknowledged award IDs
    Link(Overrides),
    /// Profile every topic and compute both correlations
    Analyze(Overrides),
    /// Emit the topic table and the figure CSVs
    Report(Overrides),
    /// Run every stage end to end and write the manifest
    Run(Overrides),
}

#[derive(Args)]
struct FetchArgs {
    /// Program/division name to query, e.g. ASTRONOMICAL SCIENCES
    #[arg(long)]
    division: String,
    /// Award start year to query
    #[arg(long)]
    year: i32,
    /// API endpoint; FUNDTAIL_NSF_ENDPOINT overrides the default too
    #[arg(long)]
    endpoint: Option<String>,
    /// Records per page
    #[arg(long, default_value_t = 25)]
    page_size: usize,
    /// File the raw response pages are written to
    #[arg(long, default_value = "nsf-awards.json")]
    out: PathBuf,
}

/// Config-file values these flags override; flags always win.
#[derive(Args, Default)]
struct Overrides {
    /// JSON run configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grants input file
    #[arg(long)]
    grants: Option<PathBuf>,
    /// Grants input format: canonical-jsonl, nsf-api-json, or csv
    #[arg(long)]
    grants_format: Option<String>,
    /// Publications input file
    #[arg(long)]
    pubs: Option<PathBuf>,
    /// Publications input format: canonical-jsonl or wos-tab-delimited
    #[arg(long)]
    pubs_format: Option<String>,
    /// Funding-acknowledgment column name in tab-delimited exports
    #[arg(long)]
    funding_column: Option<String>,
    /// Stopword list, one word per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Lemma dictionary, word TAB lemma per line
    #[arg(long)]
    lemmas: Option<PathBuf>,
    /// Grant objective annotations CSV
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Human topic labels CSV
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Drop terms appearing in fewer than this many documents
    #[arg(long)]
    min_df: Option<usize>,
    /// Drop terms appearing in more than this fraction of documents
    #[arg(long)]
    max_df_ratio: Option<f64>,
    /// Fixed topic count
    #[arg(long)]
    k: Option<usize>,
    /// Inclusive candidate range for topic-count selection
    #[arg(long, value_name = "A..B", conflicts_with = "k")]
    k_grid: Option<String>,
    /// Document-topic smoothing; defaults to 50/k
    #[arg(long)]
    alpha: Option<f64>,
    /// Topic-word smoothing
    #[arg(long)]
    beta: Option<f64>,
    /// Total Gibbs sweeps
    #[arg(long)]
    iters: Option<usize>,
    /// Sweeps discarded before sampling starts
    #[arg(long)]
    burn_in: Option<usize>,
    /// Sweeps between retained samples
    #[arg(long)]
    sample_lag: Option<usize>,
    /// Seed for every random choice in the run
    #[arg(long)]
    seed: Option<u64>,
    /// Independent sampler chains; the best-evidence chain wins
    #[arg(long)]
    chains: Option<usize>,
    /// Head/tail partition mode: count or dollar-share
    #[arg(long)]
    partition_mode: Option<String>,
    /// Fraction defining the head
    #[arg(long)]
    head_fraction: Option<f64>,
    /// Top grants examined per topic
    #[arg(long)]
    n_top: Option<usize>,
    /// Bigram label suggestions kept per topic
    #[arg(long)]
    n_labels: Option<usize>,
    /// Run directory artifacts are written to
    #[arg(long)]
    out: Option<PathBuf>,
    /// Topic table format: csv or json
    #[arg(long)]
    format: Option<String>,
}

fn build_config(ov: &Overrides) -> Result<RunConfig> {
    let mut config = match &ov.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &ov.grants {
        config.grants = Some(v.clone());
    }
    if let Some(v) = &ov.grants_format {
        config.grants_format = v.parse()?;
    }
    if let Some(v) = &ov.pubs {
        config.pubs = Some(v.clone());
    }
    if let Some(v) = &ov.pubs_format {
        config.pubs_format = v.parse()?;
    }
    if let Some(v) = &ov.funding_column {
        config.funding_column = v.clone();
    }
    if let Some(v) = &ov.stopwords {
        config.stopwords = Some(v.clone());
    }
    if let Some(v) = &ov.lemmas {
        config.lemmas = Some(v.clone());
    }
    if let Some(v) = &ov.annotations {
        config.annotations = Some(v.clone());
    }
    if let Some(v) = &ov.labels {
        config.labels = Some(v.clone());
    }
    if let Some(v) = ov.min_df {
        config.min_df = v;
    }
    if let Some(v) = ov.max_df_ratio {
        config.max_df_ratio = v;
    }
    if let Some(v) = ov.k {
        config.k = Some(v);
        config.k_grid = None;
    }
    if let Some(v) = &ov.k_grid {
        config.k_grid = Some(parse_k_grid(v)?);
        config.k = None;
    }
    if let Some(v) = ov.alpha {
        config.lda.alpha = Some(v);
    }
    if let Some(v) = ov.beta {
        config.lda.beta = v;
    }
    if let Some(v) = ov.iters {
        config.lda.iterations = v;
    }
    if let Some(v) = ov.burn_in {
        config.lda.burn_in = v;
    }
    if let Some(v) = ov.sample_lag {
        config.lda.sample_lag = v;
    }
    if let Some(v) = ov.seed {
        config.lda.seed = v;
    }
    if let Some(v) = ov.chains {
        config.lda.chains = v;
    }
    if let Some(v) = &ov.partition_mode {
        config.partition_mode = v.parse()?;
    }
    if let Some(v) = ov.head_fraction {
        config.head_fraction = v;
    }
    if let Some(v) = ov.n_top {
        config.n_top = v;
    }
    if let Some(v) = ov.n_labels {
        config.n_labels = v;
    }
    if let Some(v) = &ov.out {
        config.out_dir = v.clone();
    }
    if let Some(v) = &ov.format {
        config.format = v.parse()?;
    }
    Ok(config)
}

fn cmd_fetch(args: &FetchArgs) -> Result<()> {
    let endpoint = args
        .endpoint
        .clone()
        .or_else(|| env::var(ENDPOINT_ENV).ok())
        .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
    let mut fetch = FetchConfig::new(args.division.clone(), args.year);
    fetch.endpoint = endpoint;
    fetch.page_size = args.page_size;
    let raw = fetch_nsf_awards(&fetch)?;
    fs::write(&args.out, &raw).map_err(|e| Error::io(&args.out, e))?;
    let awards = parse_grants(Cursor::new(raw.as_bytes()), GrantFormat::NsfApiJson)?;
    println!("fetched {} awards to {}", awards.len(), args.out.display());
    Ok(())
}

fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let (grants, pubs) = stage_ingest(config, &mut run)?;
    println!(
        "ingested {} grants and {} publications into {}",
        grants.len(),
        pubs.len(),
        run.dir().display()
    );
    Ok(())
}

fn cmd_prep(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let grants = read_canonical_grants(&run.path("grants.jsonl"))?;
    let (dtm, _) = stage_prep(config, &grants, &mut run)?;
    println!(
        "matrix: {} documents, {} terms, {} tokens ({} empty documents)",
        dtm.n_docs(),
        dtm.n_terms(),
        dtm.total_tokens(),
        dtm.empty_doc_count
    );
    Ok(())
}

fn cmd_fit(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let dtm = load_dtm(&run.path("dtm.json"))?;
    let model = stage_fit(config, &dtm, &mut run)?;
    println!(
        "fitted k = {} ({} retained samples), evidence = {}",
        model.config.k,
        model.loglik_trace.len(),
        model.evidence
    );
    Ok(())
}

fn cmd_select_k(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let dtm = load_dtm(&run.path("dtm.json"))?;
    let result = stage_select_k(config, &dtm, &mut run)?;
    for entry in &result.table {
        println!("k = {}: evidence = {}", entry.k, entry.evidence);
    }
    println!("selected k = {}", result.selected_k);
    Ok(())
}

fn cmd_invest(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let grants = read_canonical_grants(&run.path("grants.jsonl"))?;
    let model = load_model(&run.path("model.json"))?;
    let table = stage_invest(config, &grants, &model, &mut run)?;
    let head = table
        .rows
        .iter()
        .filter(|r| r.segment == fundtail::invest::Segment::Head)
        .count();
    println!(
        "{} topics over {} total dollars; head = {} topics",
        table.rows.len(),
        table.aps_dollars,
        head
    );
    Ok(())
}

fn cmd_link(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let grants = read_canonical_grants(&run.path("grants.jsonl"))?;
    let pubs = read_canonical_pubs(&run.path("pubs.jsonl"))?;
    let links = stage_link(&grants, &pubs, &mut run)?;
    println!(
        "linked {} of {} publications to {} grants ({} unmatched)",
        links.linked_pub_count(),
        pubs.len(),
        grants.len(),
        links.unmatched_pub_keys.len()
    );
    Ok(())
}

fn print_correlations(correlations: &[(&str, CorrelationResult)]) {
    for (level, c) in correlations {
        println!(
            "{level}-level correlation: r = {:.4}, t = {:.4}, p = {:.4} (n = {})",
            c.r, c.t_stat, c.p_two_sided, c.n
        );
    }
}

fn cmd_analyze(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let grants = read_canonical_grants(&run.path("grants.jsonl"))?;
    let model = load_model(&run.path("model.json"))?;
    let links = load_links(&run.path("links.json"))?;
    let docs = prepare_docs(config, &grants)?;
    let dollars = aligned_dollars(&grants, &model.doc_keys)?;
    let table = build_investment_table(
        &dollars,
        &model.gamma,
        config.partition_mode,
        config.head_fraction,
    )?;
    let (profiles, correlations) =
        stage_analyze(config, &model, &docs, &grants, &links, &table, &mut run)?;
    println!("profiled {} topics", profiles.len());
    print_correlations(&correlations);
    Ok(())
}

fn cmd_report(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.out_dir)?;
    let grants = read_canonical_grants(&run.path("grants.jsonl"))?;
    let model = load_model(&run.path("model.json"))?;
    let links = load_links(&run.path("links.json"))?;
    let profiles = load_profiles(&run.path("profiles.json"))?;
    let dollars = aligned_dollars(&grants, &model.doc_keys)?;
    let table = build_investment_table(
        &dollars,
        &model.gamma,
        config.partition_mode,
        config.head_fraction,
    )?;
    stage_report(config, &profiles, &table, &grants, &links, &mut run)?;
    println!("wrote topic table and figure data to {}", run.dir().display());
    Ok(())
}

fn cmd_run(config: &RunConfig) -> Result<()> {
    let summary = run_pipeline(config)?;
    println!(
        "run complete: {} grants, {} publications ({} linked)",
        summary.n_grants, summary.n_pubs, summary.n_linked_pubs
    );
    println!("k = {}, evidence = {}", summary.selected_k, summary.evidence);
    println!(
        "wrote {} artifacts to {}",
        summary.outputs.len(),
        summary.out_dir.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Fetch(args) => cmd_fetch(args),
        Command::Ingest(ov) => cmd_ingest(&build_config(ov)?),
        Command::Prep(ov) => cmd_prep(&build_config(ov)?),
        Command::Fit(ov) => cmd_fit(&build_config(ov)?),
        Command::SelectK(ov) => cmd_select_k(&build_config(ov)?),
        Command::Invest(ov) => cmd_invest(&build_config(ov)?),
        Command::Link(ov) => cmd_link(&build_config(ov)?),
        Command::Analyze(ov) => cmd_analyze(&build_config(ov)?),
        Command::Report(ov) => cmd_report(&build_config(ov)?),
        Command::Run(ov) => cmd_run(&build_config(ov)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
