//! On-disk campaign directories.
//!
//! A campaign directory holds `campaign.json` (definition, roster and
//! assignment) and `journal.jsonl` (one judgment record per line, append
//! only). Writers hold the journal's exclusive lock; readers replay a copy
//! of the file without locking, which is safe because records are only
//! ever appended.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;

use crate::campaign::{
    parse_journal, Campaign, CampaignError, CampaignLoadError, Engine, Evaluator, Item,
    JournalError, JournalFile, JudgmentRecord, ReplayError,
};

pub const CAMPAIGN_FILE: &str = "campaign.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Campaign {
        path: PathBuf,
        source: CampaignLoadError,
    },
    #[error("{path}: {source}")]
    Replay { path: PathBuf, source: ReplayError },
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    Rejected(#[from] CampaignError),
    #[error("{0} already holds a campaign")]
    Exists(PathBuf),
    #[error(
        "campaign already has {0} judgments; items can only be added before evaluation starts"
    )]
    EvaluationStarted(usize),
}

impl StoreError {
    /// Whether the failure is about file access rather than content.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            StoreError::Io { .. } | StoreError::Journal(JournalError::Io { .. })
        )
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(io_at(path))
}

/// Writes through a temporary file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_at(&tmp))?;
    fs::rename(&tmp, path).map_err(io_at(path))
}

#[derive(Debug, Clone)]
pub struct CampaignDir {
    root: PathBuf,
}

impl CampaignDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn campaign_path(&self) -> PathBuf {
        self.root.join(CAMPAIGN_FILE)
    }

    pub fn journal_path(&self) -> PathBuf {
        self.root.join(JOURNAL_FILE)
    }

    /// Writes a new campaign and an empty journal. Refuses to overwrite.
    pub fn create(&self, campaign: &Campaign) -> Result<(), StoreError> {
        fs::create_dir_all(&self.root).map_err(io_at(&self.root))?;
        if self.campaign_path().exists() {
            return Err(StoreError::Exists(self.root.clone()));
        }
        write_atomic(&self.campaign_path(), &campaign.to_json())?;
        let journal = self.journal_path();
        fs::write(&journal, "").map_err(io_at(&journal))
    }

    /// Writes a campaign together with an existing journal.
    pub fn create_with_journal(
        &self,
        campaign: &Campaign,
        records: &[JudgmentRecord],
    ) -> Result<(), StoreError> {
        self.create(campaign)?;
        let (mut journal, _) = JournalFile::open(self.journal_path())?;
        for r in records {
            journal.append(r)?;
        }
        Ok(())
    }

    pub fn load_campaign(&self) -> Result<Campaign, StoreError> {
        let path = self.campaign_path();
        Campaign::from_json(&read_text(&path)?)
            .map_err(|source| StoreError::Campaign { path, source })
    }

    /// Parsed journal records; a missing journal file is an empty journal.
    pub fn read_journal(&self) -> Result<Vec<JudgmentRecord>, StoreError> {
        let path = self.journal_path();
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        parse_journal(&text).map_err(|source| StoreError::Replay { path, source })
    }

    /// Replays the journal, optionally only up to `as_of` (inclusive).
    pub fn load_engine(&self, as_of: Option<u64>) -> Result<Engine, StoreError> {
        let campaign = Arc::new(self.load_campaign()?);
        let mut records = self.read_journal()?;
        if let Some(seq) = as_of {
            records.retain(|r| r.sequence_no <= seq);
        }
        let path = self.journal_path();
        Engine::replay(campaign, &records).map_err(|source| StoreError::Replay { path, source })
    }

    /// Opens the journal for writing (taking its lock) and replays it.
    pub fn open_for_writing(&self) -> Result<(Engine, JournalFile), StoreError> {
        let campaign = Arc::new(self.load_campaign()?);
        let (journal, records) = JournalFile::open(self.journal_path())?;
        let engine = Engine::replay(campaign, &records).map_err(|source| StoreError::Replay {
            path: self.journal_path(),
            source,
        })?;
        Ok((engine, journal))
    }

    /// Adds items to a campaign that has no judgments yet; the assignment
    /// is recomputed from the campaign's seed.
    pub fn import_items(&self, items: Vec<Item>) -> Result<Campaign, StoreError> {
        let (engine, _lock) = self.open_for_writing()?;
        if !engine.journal().is_empty() {
            return Err(StoreError::EvaluationStarted(engine.journal().len()));
        }
        let campaign = engine.campaign().with_items(items)?;
        write_atomic(&self.campaign_path(), &campaign.to_json())?;
        Ok(campaign)
    }
}

fn parse_err(path: &Path, message: impl ToString) -> StoreError {
    StoreError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Reads records from `.json` (array), `.jsonl` (one per line) or `.csv`
/// (header row naming the fields).
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    match ext.as_str() {
        "json" => serde_json::from_str(&read_text(path)?).map_err(|e| parse_err(path, e)),
        "jsonl" | "ndjson" => read_text(path)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| parse_err(path, format!("line {}: {e}", i + 1)))
            })
            .collect(),
        "csv" | "tsv" => {
            let delimiter = if ext == "tsv" { b'\t' } else { b',' };
            let file = fs::File::open(path).map_err(io_at(path))?;
            csv::ReaderBuilder::new()
                .delimiter(delimiter)
                .from_reader(file)
                .deserialize()
                .collect::<Result<Vec<T>, _>>()
                .map_err(|e| parse_err(path, e))
        }
        other => Err(parse_err(
            path,
            format!("unsupported extension '{other}' (use .json, .jsonl or .csv)"),
        )),
    }
}

pub fn read_items(path: &Path) -> Result<Vec<Item>, StoreError> {
    read_records(path)
}

pub fn read_evaluators(path: &Path) -> Result<Vec<Evaluator>, StoreError> {
    read_records(path)
}

/// Items as JSON lines, the format `read_items` reads back.
pub fn items_to_jsonl(items: &[Item]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("items serialize") + "\n")
        .collect()
}
