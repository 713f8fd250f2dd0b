//! Topic Investment: distributes each grant's awarded dollars across
//! topics in proportion to its topic affinities, ranks topics by the
//! resulting investment, and splits the ranking into a head and a tail.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// Head = the top max(1, floor(fraction * nt)) topics by rank.
    Count,
    /// Head = the smallest rank prefix whose cumulative share of total
    /// investment reaches the fraction.
    DollarShare,
}

impl FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(PartitionMode::Count),
            "dollar-share" => Ok(PartitionMode::DollarShare),
            other => Err(Error::InvalidInput(format!(
                "unknown partition mode '{other}' (expected 'count' or 'dollar-share')"
            ))),
        }
    }
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionMode::Count => write!(f, "count"),
            PartitionMode::DollarShare => write!(f, "dollar-share"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Head,
    Tail,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Head => write!(f, "head"),
            Segment::Tail => write!(f, "tail"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicInvestmentRow {
    pub topic_index: usize,
    pub ti_dollars: f64,
    pub rank: usize,
    /// Share of total investment held by this topic and every topic
    /// ranked above it.
    pub cumulative_share: f64,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicInvestmentTable {
    /// One row per topic, in topic-index order.
    pub rows: Vec<TopicInvestmentRow>,
    pub aps_dollars: f64,
}

fn validate_gamma(dollars: &[u64], gamma: &[Vec<f64>]) -> Result<usize> {
    if dollars.len() != gamma.len() {
        return Err(Error::InvalidInput(format!(
            "{} dollar amounts but {} affinity rows",
            dollars.len(),
            gamma.len()
        )));
    }
    if gamma.is_empty() {
        return Err(Error::InvalidInput("no documents to invest over".to_string()));
    }
    let width = gamma[0].len();
    if width == 0 {
        return Err(Error::InvalidInput("affinity rows have no topics".to_string()));
    }
    for (i, row) in gamma.iter().enumerate() {
        if row.len() != width {
            return Err(Error::InvalidInput(format!(
                "affinity row {i} has {} topics, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidInput(format!(
                "affinity row {i} contains a negative or non-finite value"
            )));
        }
    }
    Ok(width)
}

/// TI_i = sum over grants j of dollars_j * gamma[j][i]. With affinity rows
/// that each sum to 1, total investment equals total dollars awarded.
pub fn topic_investment(dollars: &[u64], gamma: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = validate_gamma(dollars, gamma)?;
    let mut ti = vec![0.0; width];
    for (da, row) in dollars.iter().zip(gamma) {
        let da = *da as f64;
        for (slot, g) in ti.iter_mut().zip(row) {
            *slot += da * g;
        }
    }
    Ok(ti)
}

/// Indices of topics sorted by descending investment, ties broken by
/// ascending topic index.
fn rank_order(ti: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ti.len()).collect();
    order.sort_by(|&a, &b| {
        ti[b].partial_cmp(&ti[a])
            .expect("finite investment values")
            .then(a.cmp(&b))
    });
    order
}

/// 1-based rank per topic: 1 = highest investment; equal investments are
/// ranked in topic-index order.
pub fn rank_topics(ti: &[f64]) -> Vec<usize> {
    let order = rank_order(ti);
    let mut ranks = vec![0; ti.len()];
    for (pos, &topic) in order.iter().enumerate() {
        ranks[topic] = pos + 1;
    }
    ranks
}

/// Per-topic cumulative share of total investment, accumulated in rank
/// order. The bottom-ranked topic's share is exactly 1.
pub fn cumulative_share(ti: &[f64]) -> Result<Vec<f64>> {
    let order = rank_order(ti);
    let total: f64 = order.iter().map(|&i| ti[i]).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalInvestment);
    }
    let mut shares = vec![0.0; ti.len()];
    let mut acc = 0.0;
    for &topic in &order {
        acc += ti[topic];
        shares[topic] = acc / total;
    }
    Ok(shares)
}

fn validate_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "head fraction must be in (0, 1], got {fraction}"
        )));
    }
    Ok(())
}

/// Splits topics into head and tail. Count mode takes the top
/// max(1, floor(fraction * nt)) ranks; dollar-share mode takes the
/// smallest rank prefix whose cumulative investment share reaches the
/// fraction. The head is never empty.
pub fn head_tail_partition(
    ti: &[f64],
    mode: PartitionMode,
    fraction: f64,
) -> Result<Vec<Segment>> {
    validate_fraction(fraction)?;
    if ti.is_empty() {
        return Err(Error::InvalidInput("no topics to partition".to_string()));
    }
    let order = rank_order(ti);
    let head_size = match mode {
        PartitionMode::Count => ((fraction * ti.len() as f64).floor() as usize).max(1),
        PartitionMode::DollarShare => {
            let shares = cumulative_share(ti)?;
            order
                .iter()
                .position(|&topic| shares[topic] >= fraction)
                .map(|pos| pos + 1)
                .unwrap_or(ti.len())
        }
    };
    let mut segments = vec![Segment::Tail; ti.len()];
    for &topic in order.iter().take(head_size) {
        segments[topic] = Segment::Head;
    }
    Ok(segments)
}

/// Computes investments, ranks, cumulative shares, and the head/tail
/// split in one pass. Total dollars awarded must be positive.
pub fn build_investment_table(
    dollars: &[u64],
    gamma: &[Vec<f64>],
    mode: PartitionMode,
    fraction: f64,
) -> Result<TopicInvestmentTable> {
    validate_fraction(fraction)?;
    let ti = topic_investment(dollars, gamma)?;
    let aps: u64 = dollars.iter().sum();
    if aps == 0 {
        return Err(Error::ZeroTotalInvestment);
    }
    let ranks = rank_topics(&ti);
    let shares = cumulative_share(&ti)?;
    let segments = head_tail_partition(&ti, mode, fraction)?;
    let rows = (0..ti.len())
        .map(|i| TopicInvestmentRow {
            topic_index: i,
            ti_dollars: ti[i],
            rank: ranks[i],
            cumulative_share: shares[i],
            segment: segments[i],
        })
        .collect();
    Ok(TopicInvestmentTable { rows, aps_dollars: aps as f64 })
}
