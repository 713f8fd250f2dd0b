//! Client for the NSF award search API. Pages through a year of awards for
//! one division and returns the raw response pages verbatim, so a fetch can
//! be replayed offline byte-for-byte.

use std::thread;
use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Public endpoint; override it via config, flag, or the
/// `FUNDTAIL_NSF_ENDPOINT` environment variable.
pub const DEFAULT_ENDPOINT: &str = "https://api.nsf.gov/services/v1/awards.json";

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub endpoint: String,
    pub division: String,
    pub year: i32,
    /// Records requested per page; the API stops short on the last page.
    pub page_size: usize,
    /// Pause between successive page requests.
    pub delay_ms: u64,
    /// Retries per request after the first attempt.
    pub max_retries: u32,
    /// First backoff pause; doubles per retry.
    pub retry_initial_ms: u64,
}

impl FetchConfig {
    pub fn new(division: impl Into<String>, year: i32) -> Self {
        FetchConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            division: division.into(),
            year,
            page_size: 25,
            delay_ms: 200,
            max_retries: 3,
            retry_initial_ms: 500,
        }
    }
}

#[derive(Deserialize)]
struct Page {
    response: PageResponse,
}

#[derive(Deserialize)]
struct PageResponse {
    #[serde(default)]
    award: Vec<serde_json::Value>,
}

fn awards_on_page(body: &str) -> Result<usize> {
    let page: Page = serde_json::from_str(body)
        .map_err(|e| Error::Network(format!("unparseable response page: {e}")))?;
    Ok(page.response.award.len())
}

/// Fetches every page of awards for the configured division and year and
/// returns the pages concatenated, separated by newlines. Offsets are
/// one-based per the API convention; pagination stops at the first page
/// shorter than `page_size`.
pub fn fetch_nsf_awards(config: &FetchConfig) -> Result<String> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .map_err(|e| Error::Network(e.to_string()))?;
    let mut pages: Vec<String> = Vec::new();
    let mut offset: usize = 1;
    loop {
        if !pages.is_empty() && config.delay_ms > 0 {
            thread::sleep(Duration::from_millis(config.delay_ms));
        }
        let body = get_with_retry(&client, config, offset)?;
        let count = awards_on_page(&body)?;
        pages.push(body);
        if count < config.page_size {
            break;
        }
        offset += config.page_size;
    }
    let mut out = pages.join("\n");
    out.push('\n');
    Ok(out)
}

fn get_with_retry(
    client: &reqwest::blocking::Client,
    config: &FetchConfig,
    offset: usize,
) -> Result<String> {
    let params = [
        ("agency", "NSF".to_string()),
        ("fundProgramName", config.division.clone()),
        ("dateStart", format!("01/01/{}", config.year)),
        ("dateEnd", format!("12/31/{}", config.year)),
        ("offset", offset.to_string()),
        ("rpp", config.page_size.to_string()),
    ];
    let mut backoff = config.retry_initial_ms;
    let mut last_failure = String::new();
    for attempt in 0..=config.max_retries {
        if attempt > 0 {
            thread::sleep(Duration::from_millis(backoff));
            backoff = backoff.saturating_mul(2);
        }
        match client.get(&config.endpoint).query(&params).send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp
                        .text()
                        .map_err(|e| Error::Network(format!("reading response body: {e}")));
                }
                last_failure = format!("HTTP status {status}");
            }
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(Error::Network(format!(
        "GET {} (offset {offset}) failed after {} attempts: {last_failure}",
        config.endpoint,
        config.max_retries + 1,
    )))
}
