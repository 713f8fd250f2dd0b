//! Run configuration: a JSON file merged with command-line overrides.
//! Flags win over file values; relative paths in the file resolve against
//! the file's own directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GrantFormat, PubFormat};
use crate::invest::PartitionMode;
use crate::lda::LdaSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidInput(format!(
                "unknown report format '{other}' (expected 'csv' or 'json')"
            ))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportFormat::Csv => write!(f, "csv"),
            ReportFormat::Json => write!(f, "json"),
        }
    }
}

/// Everything a full run needs. Optional paths switch their feature off
/// (no annotations file means no composition column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grants: Option<PathBuf>,
    pub grants_format: GrantFormat,
    pub pubs: Option<PathBuf>,
    pub pubs_format: PubFormat,
    pub funding_column: String,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub min_df: usize,
    pub max_df_ratio: f64,
    /// Fixed topic count; mutually exclusive with k_grid.
    pub k: Option<usize>,
    /// Inclusive candidate range for evidence-based selection.
    pub k_grid: Option<(usize, usize)>,
    pub lda: LdaSettings,
    pub partition_mode: PartitionMode,
    pub head_fraction: f64,
    /// Grants examined per topic (the "top n" of the characterization).
    pub n_top: usize,
    /// Bigram label suggestions kept per topic.
    pub n_labels: usize,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grants: None,
            grants_format: GrantFormat::CanonicalJsonl,
            pubs: None,
            pubs_format: PubFormat::CanonicalJsonl,
            funding_column: "FU".to_string(),
            stopwords: None,
            lemmas: None,
            annotations: None,
            labels: None,
            min_df: 2,
            max_df_ratio: 0.95,
            k: None,
            k_grid: None,
            lda: LdaSettings::default(),
            partition_mode: PartitionMode::Count,
            head_fraction: 0.2,
            n_top: 5,
            n_labels: 3,
            out_dir: PathBuf::from("out"),
            format: ReportFormat::Csv,
        }
    }
}

fn resolve(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&p);
        }
    }
}

impl RunConfig {
    /// Reads a JSON config file and resolves its relative paths against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Config(
            format!("{}: {e}", path.display()),
        ))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        resolve(base, &mut config.grants);
        resolve(base, &mut config.pubs);
        resolve(base, &mut config.stopwords);
        resolve(base, &mut config.lemmas);
        resolve(base, &mut config.annotations);
        resolve(base, &mut config.labels);
        if config.out_dir.is_relative() {
            config.out_dir = base.join(&config.out_dir);
        }
        Ok(config)
    }

    /// The inclusive k_grid expanded to a list.
    pub fn k_candidates(&self) -> Option<Vec<usize>> {
        self.k_grid.map(|(lo, hi)| (lo..=hi).collect())
    }

    /// Checks everything a full run needs before any work starts.
    pub fn validate_for_run(&self) -> Result<()> {
        let grants = self
            .grants
            .as_ref()
            .ok_or_else(|| Error::Config("no grants path configured".to_string()))?;
        require_exists(grants, "grants")?;
        let pubs = self
            .pubs
            .as_ref()
            .ok_or_else(|| Error::Config("no publications path configured".to_string()))?;
        require_exists(pubs, "publications")?;
        for (path, what) in [
            (&self.stopwords, "stopwords"),
            (&self.lemmas, "lemmas"),
            (&self.annotations, "annotations"),
            (&self.labels, "labels"),
        ] {
            if let Some(p) = path {
                require_exists(p, what)?;
            }
        }
        match (self.k, self.k_grid) {
            (None, None) => {
                return Err(Error::Config(
                    "set either k or k_grid to choose the topic count".to_string(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "k and k_grid are mutually exclusive".to_string(),
                ))
            }
            _ => {}
        }
        if let Some((lo, hi)) = self.k_grid {
            if lo < 1 || lo > hi {
                return Err(Error::Config(format!(
                    "k_grid {lo}..{hi} is not a valid ascending range"
                )));
            }
        }
        if self.min_df < 1 {
            return Err(Error::Config("min_df must be at least 1".to_string()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "max_df_ratio must be in (0, 1], got {}",
                self.max_df_ratio
            )));
        }
        if !(self.head_fraction > 0.0 && self.head_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "head_fraction must be in (0, 1], got {}",
                self.head_fraction
            )));
        }
        if self.n_top < 1 {
            return Err(Error::Config("n_top must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Copy with every path reduced to its file name and out_dir to ".",
    /// so manifests embedding it are machine-independent.
    pub fn normalized_for_manifest(&self) -> RunConfig {
        fn basename(path: &Option<PathBuf>) -> Option<PathBuf> {
            path.as_ref().map(|p| {
                PathBuf::from(p.file_name().map(|n| n.to_owned()).unwrap_or_default())
            })
        }
        RunConfig {
            grants: basename(&self.grants),
            pubs: basename(&self.pubs),
            stopwords: basename(&self.stopwords),
            lemmas: basename(&self.lemmas),
            annotations: basename(&self.annotations),
            labels: basename(&self.labels),
            out_dir: PathBuf::from("."),
            ..self.clone()
        }
    }
}

fn require_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what} file not found"),
            ),
        ));
    }
    Ok(())
}

/// Parses an inclusive "A..B" range, as given to --k-grid.
pub fn parse_k_grid(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| {
        Error::InvalidInput(format!("k grid '{s}' is not of the form A..B"))
    })?;
    let parse = |part: &str| {
        part.trim().parse::<usize>().map_err(|_| {
            Error::InvalidInput(format!("k grid bound '{part}' is not a positive integer"))
        })
    };
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    if lo < 1 || lo > hi {
        return Err(Error::InvalidInput(format!(
            "k grid {lo}..{hi} is not a valid ascending range"
        )));
    }
    Ok((lo, hi))
}
