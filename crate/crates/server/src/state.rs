//! Per-campaign state: one ordered writer and shared read snapshots.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use chrono::Utc;
use hiereval::campaign::{Engine, JournalFile, Submission};
use hiereval::store::{CampaignDir, StoreError};
use hiereval::Target;
use serde::Serialize;
use serde_json::Value;
use tokio::sync::Mutex;

use crate::error::ApiError;
use crate::payload::{judgment_response, JudgmentRequest};

/// A response already sent for an idempotency key, with the request that
/// produced it so a reused key with a different body is caught.
#[derive(Debug, Clone)]
struct Sent {
    request: JudgmentRequest,
    response: Value,
}

struct Writer {
    engine: Engine,
    /// `None` for campaigns served from memory only.
    journal: Option<JournalFile>,
    /// Keyed by (evaluator, key); keys are only unique per client.
    sent: HashMap<(String, String), Sent>,
}

/// One campaign being served.
///
/// Every write goes through `writer`, which appends to the journal before
/// applying the record. Readers only take the `snapshot` lock long enough
/// to clone an `Arc`, so they never wait on a journal write.
pub struct CampaignHandle {
    id: String,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Engine>>,
}

impl CampaignHandle {
    pub fn in_memory(engine: Engine) -> Self {
        Self::build(engine, None)
    }

    /// Opens the directory's journal for writing; the advisory lock is held
    /// until the handle is dropped.
    pub fn open(dir: &CampaignDir) -> Result<Self, StoreError> {
        let (engine, journal) = dir.open_for_writing()?;
        Ok(Self::build(engine, Some(journal)))
    }

    fn build(engine: Engine, journal: Option<JournalFile>) -> Self {
        Self {
            id: engine.campaign().id().to_string(),
            snapshot: RwLock::new(Arc::new(engine.clone())),
            writer: Mutex::new(Writer {
                engine,
                journal,
                sent: HashMap::new(),
            }),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// The state as of the last committed judgment.
    pub fn snapshot(&self) -> Arc<Engine> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Records one judgment exactly once per (evaluator, idempotency key).
    pub async fn submit(
        &self,
        evaluator_id: &str,
        req: JudgmentRequest,
    ) -> Result<Value, ApiError> {
        let mut w = self.writer.lock().await;
        let key = (evaluator_id.to_string(), req.idempotency_key.clone());
        if let Some(sent) = w.sent.get(&key) {
            if sent.request != req {
                return Err(ApiError::new(
                    axum::http::StatusCode::CONFLICT,
                    "idempotency_key_reused",
                    format!(
                        "idempotency key '{}' was already used for a different judgment",
                        req.idempotency_key
                    ),
                )
                .with_field("idempotency_key"));
            }
            return Ok(sent.response.clone());
        }
        let sub = Submission {
            evaluator_id: evaluator_id.to_string(),
            item_id: req.item_id.clone(),
            tree_target: req.tree_target,
            node_id: req.node_id.clone(),
            answer: req.answer.clone(),
            elapsed_seconds: req.elapsed_seconds,
        };
        let record = w.engine.prepare(&sub, Utc::now())?;
        // durable first: a record that failed to reach disk is never applied
        if let Some(journal) = w.journal.as_mut() {
            journal
                .append(&record)
                .map_err(|e| ApiError::internal(format!("journal write failed: {e}")))?;
        }
        let sequence_no = record.sequence_no;
        let state = w.engine.commit(record).expect("prepared records commit");
        let response = judgment_response(state, sequence_no);
        tracing::debug!(campaign = %self.id, evaluator = evaluator_id, sequence_no, "judgment recorded");
        *self.snapshot.write().expect("snapshot lock") = Arc::new(w.engine.clone());
        w.sent.insert(
            key,
            Sent {
                request: req,
                response: response.clone(),
            },
        );
        Ok(response)
    }
}

/// Everything the router serves, keyed by campaign id.
#[derive(Clone, Default)]
pub struct AppState {
    campaigns: Arc<BTreeMap<String, Arc<CampaignHandle>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("campaign '{0}' is served twice")]
    DuplicateCampaign(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl AppState {
    pub fn new(handles: impl IntoIterator<Item = CampaignHandle>) -> Result<Self, ServeError> {
        let mut campaigns = BTreeMap::new();
        for h in handles {
            let id = h.id().to_string();
            if campaigns.insert(id.clone(), Arc::new(h)).is_some() {
                return Err(ServeError::DuplicateCampaign(id));
            }
        }
        Ok(Self {
            campaigns: Arc::new(campaigns),
        })
    }

    pub fn open(dirs: &[CampaignDir]) -> Result<Self, ServeError> {
        let handles = dirs
            .iter()
            .map(CampaignHandle::open)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(handles)
    }

    pub fn campaign(&self, id: &str) -> Result<&Arc<CampaignHandle>, ApiError> {
        self.campaigns
            .get(id)
            .ok_or_else(|| ApiError::campaign_not_found(id))
    }

    pub fn campaign_ids(&self) -> impl Iterator<Item = &str> {
        self.campaigns.keys().map(String::as_str)
    }
}

/// Progress counts for one evaluator, sent with every task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub items_done: usize,
    pub items_total: usize,
    pub traversals_done: usize,
    pub traversals_total: usize,
    pub traversals_remaining: usize,
    pub judgments_made: usize,
    /// Judgments already made on the item being presented.
    pub judgments_this_item: usize,
    /// Over all the evaluator's judgments; absent before the first one.
    pub mean_elapsed_seconds: Option<f64>,
}

pub fn progress(engine: &Engine, evaluator_id: &str, current_item: Option<&str>) -> Progress {
    let items = engine.campaign().assignment(evaluator_id).unwrap_or(&[]);
    let mut items_done = 0;
    let mut traversals_done = 0;
    let mut judgments = 0;
    let mut elapsed = 0.0;
    let mut this_item = 0;
    for item in items {
        let mut both = true;
        for target in Target::BOTH {
            let Some(t) = engine.traversal(item, evaluator_id, target) else {
                continue;
            };
            both &= t.is_terminated();
            traversals_done += usize::from(t.is_terminated());
            judgments += t.history.len();
            elapsed += t.total_elapsed();
            if current_item == Some(item.as_str()) {
                this_item += t.history.len();
            }
        }
        items_done += usize::from(both);
    }
    let traversals_total = items.len() * Target::BOTH.len();
    Progress {
        items_done,
        items_total: items.len(),
        traversals_done,
        traversals_total,
        traversals_remaining: traversals_total - traversals_done,
        judgments_made: judgments,
        judgments_this_item: this_item,
        mean_elapsed_seconds: (judgments > 0).then(|| elapsed / judgments as f64),
    }
}
