use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, SubsecRound, Utc};
use serde::Serialize;

use super::journal::{parse_journal, JudgmentRecord, ReplayError, ReplayErrorKind};
use super::{Campaign, CampaignError, Item};
use crate::tree::{CompositeOutcome, MetricNode, RouteTarget, Target, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TraversalKey {
    pub item_id: String,
    pub evaluator_id: String,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub node_id: String,
    pub answer: String,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraversalStatus {
    InProgress,
    Terminated,
}

/// Position of one evaluator in one tree for one item.
///
/// `current_node` is set exactly while in progress; `outcome` exactly once
/// terminated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraversalState {
    pub item_id: String,
    pub evaluator_id: String,
    pub tree_target: Target,
    pub current_node: Option<String>,
    pub history: Vec<HistoryEntry>,
    pub status: TraversalStatus,
    pub outcome: Option<CompositeOutcome>,
}

impl TraversalState {
    fn at_root(item_id: &str, evaluator_id: &str, target: Target, root: &str) -> Self {
        Self {
            item_id: item_id.to_string(),
            evaluator_id: evaluator_id.to_string(),
            tree_target: target,
            current_node: Some(root.to_string()),
            history: Vec::new(),
            status: TraversalStatus::InProgress,
            outcome: None,
        }
    }

    pub fn is_terminated(&self) -> bool {
        self.status == TraversalStatus::Terminated
    }

    /// Sum of elapsed seconds over all judgments so far.
    pub fn total_elapsed(&self) -> f64 {
        self.history.iter().map(|h| h.elapsed_seconds).sum()
    }

    /// Node the traversal ended on, if terminated.
    pub fn last_node(&self) -> Option<&str> {
        self.history.last().map(|h| h.node_id.as_str())
    }
}

/// A judgment as submitted by a client, before it is sequenced.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub evaluator_id: String,
    pub item_id: String,
    pub tree_target: Target,
    pub node_id: String,
    pub answer: String,
    pub elapsed_seconds: f64,
}

/// The next judgment an evaluator should make.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub item: &'a Item,
    pub target: Target,
    pub node: &'a MetricNode,
    pub traversal: &'a TraversalState,
}

/// Live campaign state: every traversal plus the journal that produced it.
///
/// The state is only ever changed by [`Engine::commit`], which is also what
/// replay uses, so replaying a journal reproduces the live state exactly.
#[derive(Debug, Clone)]
pub struct Engine {
    campaign: Arc<Campaign>,
    traversals: BTreeMap<TraversalKey, TraversalState>,
    journal: Vec<JudgmentRecord>,
}

impl Engine {
    /// Fresh state: every assigned traversal waiting at its tree's root.
    pub fn new(campaign: Arc<Campaign>) -> Self {
        let mut traversals = BTreeMap::new();
        for (ev, items) in campaign.assignments() {
            for item in items {
                for target in Target::BOTH {
                    let root = campaign.tree(target).root();
                    traversals.insert(
                        TraversalKey {
                            item_id: item.clone(),
                            evaluator_id: ev.clone(),
                            target,
                        },
                        TraversalState::at_root(item, ev, target, root),
                    );
                }
            }
        }
        Self {
            campaign,
            traversals,
            journal: Vec::new(),
        }
    }

    /// Rebuilds state from journal records. Sequence numbers must start at 1
    /// and increase by exactly one.
    pub fn replay(
        campaign: Arc<Campaign>,
        records: &[JudgmentRecord],
    ) -> Result<Self, ReplayError> {
        let mut engine = Self::new(campaign);
        for (i, record) in records.iter().enumerate() {
            let fail = |kind| ReplayError { line: i + 1, kind };
            if record.campaign_id != engine.campaign.id() {
                return Err(fail(ReplayErrorKind::WrongCampaign {
                    found: record.campaign_id.clone(),
                }));
            }
            let previous = engine.last_sequence_no();
            if record.sequence_no <= previous {
                return Err(fail(ReplayErrorKind::SequenceRegression {
                    previous,
                    found: record.sequence_no,
                }));
            }
            if record.sequence_no != previous + 1 {
                return Err(fail(ReplayErrorKind::SequenceGap {
                    expected: previous + 1,
                    found: record.sequence_no,
                }));
            }
            engine
                .commit(record.clone())
                .map_err(|e| fail(ReplayErrorKind::Rejected(e)))?;
        }
        Ok(engine)
    }

    pub fn replay_document(campaign: Arc<Campaign>, document: &str) -> Result<Self, ReplayError> {
        let records = parse_journal(document)?;
        Self::replay(campaign, &records)
    }

    /// State as it was right after `sequence_no` (inclusive).
    pub fn as_of(&self, sequence_no: u64) -> Self {
        let end = self
            .journal
            .partition_point(|r| r.sequence_no <= sequence_no);
        Self::replay(self.campaign.clone(), &self.journal[..end])
            .expect("prefix of a valid journal replays")
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    pub fn campaign_arc(&self) -> &Arc<Campaign> {
        &self.campaign
    }

    pub fn journal(&self) -> &[JudgmentRecord] {
        &self.journal
    }

    pub fn last_sequence_no(&self) -> u64 {
        self.journal.last().map_or(0, |r| r.sequence_no)
    }

    pub fn traversal(
        &self,
        item_id: &str,
        evaluator_id: &str,
        target: Target,
    ) -> Option<&TraversalState> {
        self.traversals.get(&TraversalKey {
            item_id: item_id.to_string(),
            evaluator_id: evaluator_id.to_string(),
            target,
        })
    }

    /// All traversals, ordered by (item, evaluator, target).
    pub fn traversals(&self) -> impl Iterator<Item = &TraversalState> {
        self.traversals.values()
    }

    pub fn traversal_map(&self) -> &BTreeMap<TraversalKey, TraversalState> {
        &self.traversals
    }

    /// The evaluator's earliest unfinished traversal in assignment order; an
    /// item's input is judged before its output.
    pub fn next_task(&self, evaluator_id: &str) -> Result<Option<Task<'_>>, CampaignError> {
        let items = self
            .campaign
            .assignment(evaluator_id)
            .ok_or_else(|| CampaignError::UnknownEvaluator(evaluator_id.to_string()))?;
        for item_id in items {
            for target in Target::BOTH {
                let state = self
                    .traversal(item_id, evaluator_id, target)
                    .expect("assigned traversal exists");
                if let Some(node_id) = &state.current_node {
                    return Ok(Some(Task {
                        item: self.campaign.item(item_id).expect("assigned item exists"),
                        target,
                        node: self
                            .campaign
                            .tree(target)
                            .node(node_id)
                            .expect("current node exists"),
                        traversal: state,
                    }));
                }
            }
        }
        Ok(None)
    }

    /// `(terminated, total)` traversal counts for one evaluator.
    pub fn progress(&self, evaluator_id: &str) -> Result<(usize, usize), CampaignError> {
        let items = self
            .campaign
            .assignment(evaluator_id)
            .ok_or_else(|| CampaignError::UnknownEvaluator(evaluator_id.to_string()))?;
        let done = items
            .iter()
            .flat_map(|i| Target::BOTH.map(|t| self.traversal(i, evaluator_id, t)))
            .filter(|s| s.is_some_and(TraversalState::is_terminated))
            .count();
        Ok((done, items.len() * 2))
    }

    /// Validates a submission and turns it into the record that would be
    /// appended next, without changing any state. Elapsed seconds and wall
    /// time are truncated to millisecond resolution, the journal's precision.
    pub fn prepare(
        &self,
        sub: &Submission,
        wall_time: DateTime<Utc>,
    ) -> Result<JudgmentRecord, CampaignError> {
        let record = JudgmentRecord {
            campaign_id: self.campaign.id().to_string(),
            item_id: sub.item_id.clone(),
            evaluator_id: sub.evaluator_id.clone(),
            tree_target: sub.tree_target,
            node_id: sub.node_id.clone(),
            answer: sub.answer.clone(),
            elapsed_seconds: (sub.elapsed_seconds * 1000.0).round() / 1000.0,
            wall_time: wall_time.trunc_subsecs(3),
            sequence_no: self.last_sequence_no() + 1,
        };
        if !sub.elapsed_seconds.is_finite() || sub.elapsed_seconds < 0.0 {
            return Err(CampaignError::InvalidElapsed(sub.elapsed_seconds));
        }
        self.check(&record)?;
        Ok(record)
    }

    /// Applies a sequenced record. This is the only state transition.
    pub fn commit(&mut self, record: JudgmentRecord) -> Result<&TraversalState, CampaignError> {
        if !record.elapsed_seconds.is_finite() || record.elapsed_seconds < 0.0 {
            return Err(CampaignError::InvalidElapsed(record.elapsed_seconds));
        }
        let next = self.check(&record)?;
        let key = TraversalKey {
            item_id: record.item_id.clone(),
            evaluator_id: record.evaluator_id.clone(),
            target: record.tree_target,
        };
        let state = self
            .traversals
            .get_mut(&key)
            .expect("checked traversal exists");
        state.history.push(HistoryEntry {
            node_id: record.node_id.clone(),
            answer: record.answer.clone(),
            elapsed_seconds: record.elapsed_seconds,
        });
        match next {
            RouteTarget::Node(id) => state.current_node = Some(id),
            RouteTarget::Terminal(outcome) => {
                state.current_node = None;
                state.status = TraversalStatus::Terminated;
                state.outcome = Some(outcome);
            }
        }
        self.journal.push(record);
        Ok(&self.traversals[&key])
    }

    /// Validates, sequences and applies a submission.
    pub fn submit(
        &mut self,
        sub: &Submission,
        wall_time: DateTime<Utc>,
    ) -> Result<&TraversalState, CampaignError> {
        let record = self.prepare(sub, wall_time)?;
        self.commit(record)
    }

    fn check(&self, record: &JudgmentRecord) -> Result<RouteTarget, CampaignError> {
        if self.campaign.evaluator(&record.evaluator_id).is_none() {
            return Err(CampaignError::UnknownEvaluator(record.evaluator_id.clone()));
        }
        let state = self
            .traversal(&record.item_id, &record.evaluator_id, record.tree_target)
            .ok_or_else(|| CampaignError::NoTraversal {
                item: record.item_id.clone(),
                evaluator: record.evaluator_id.clone(),
                target: record.tree_target,
            })?;
        let Some(current) = &state.current_node else {
            return Err(CampaignError::AlreadyTerminated {
                item: record.item_id.clone(),
                evaluator: record.evaluator_id.clone(),
                target: record.tree_target,
            });
        };
        if *current != record.node_id {
            return Err(CampaignError::StaleNode {
                item: record.item_id.clone(),
                evaluator: record.evaluator_id.clone(),
                target: record.tree_target,
                current: current.clone(),
                submitted: record.node_id.clone(),
            });
        }
        self.campaign
            .tree(record.tree_target)
            .route(current, &record.answer)
            .map_err(|e| match e {
                TreeError::UnknownAnswer { node, answer } => {
                    CampaignError::UnknownAnswer { node, answer }
                }
                other => unreachable!("current node is always valid: {other}"),
            })
    }
}
