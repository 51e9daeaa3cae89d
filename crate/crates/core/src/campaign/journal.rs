//! Append-only judgment journal: one JSON record per line.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::CampaignError;
use crate::tree::Target;

/// One evaluator's answer to one node for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentRecord {
    pub campaign_id: String,
    pub item_id: String,
    pub evaluator_id: String,
    pub tree_target: Target,
    pub node_id: String,
    pub answer: String,
    #[serde(serialize_with = "ser_seconds")]
    pub elapsed_seconds: f64,
    #[serde(serialize_with = "ser_time", deserialize_with = "de_time")]
    pub wall_time: DateTime<Utc>,
    pub sequence_no: u64,
}

impl JudgmentRecord {
    /// The record as a single journal line, without the newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("journal record serializes")
    }
}

// Fixed three decimals: never an exponent, always '.' as separator.
fn ser_seconds<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !v.is_finite() {
        return Err(S::Error::custom("elapsed_seconds must be finite"));
    }
    RawValue::from_string(format!("{v:.3}"))
        .map_err(S::Error::custom)?
        .serialize(s)
}

fn ser_time<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
}

fn de_time<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let s = String::deserialize(d)?;
    DateTime::parse_from_rfc3339(&s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(D::Error::custom)
}

/// Renders records as a journal document (newline-terminated lines).
pub fn format_journal(records: &[JudgmentRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayErrorKind {
    #[error("corrupt record: {0}")]
    Corrupt(String),
    #[error("record belongs to campaign '{found}'")]
    WrongCampaign { found: String },
    #[error("sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("sequence regression: {found} does not follow {previous}")]
    SequenceRegression { previous: u64, found: u64 },
    #[error(transparent)]
    Rejected(#[from] CampaignError),
}

/// A journal that cannot be replayed; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("journal line {line}: {kind}")]
pub struct ReplayError {
    pub line: usize,
    pub kind: ReplayErrorKind,
}

/// Parses a journal document. Sequence numbers are checked by replay, not here.
pub fn parse_journal(text: &str) -> Result<Vec<JudgmentRecord>, ReplayError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str::<JudgmentRecord>(line.strip_suffix('\r').unwrap_or(line)).map_err(
                |e| ReplayError {
                    line: i + 1,
                    kind: ReplayErrorKind::Corrupt(e.to_string()),
                },
            )
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("journal {path}: {source}")]
    Replay { path: PathBuf, source: ReplayError },
}

/// An open journal file holding an exclusive advisory lock until dropped.
#[derive(Debug)]
pub struct JournalFile {
    path: PathBuf,
    file: File,
}

impl JournalFile {
    /// Opens (creating if needed) and locks the journal, returning the
    /// records already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<JudgmentRecord>), JournalError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| JournalError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;
        file.lock().map_err(io_err)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err)?;
        let records = parse_journal(&text).map_err(|source| JournalError::Replay {
            path: path.clone(),
            source,
        })?;
        Ok((Self { path, file }, records))
    }

    /// Appends and syncs one record.
    pub fn append(&mut self, record: &JudgmentRecord) -> Result<(), JournalError> {
        let mut line = record.to_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|source| JournalError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
