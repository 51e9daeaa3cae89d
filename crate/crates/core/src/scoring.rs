//! Read-side reports derived from a replayed journal.
//!
//! Every function here takes an [`Engine`] snapshot and is a pure function
//! of its journal. Only terminated traversals are counted; a traversal that
//! is still in progress contributes nothing to funnels, distributions or
//! means.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::campaign::{Engine, TraversalKey, TraversalState};
use crate::stats::ContingencyTable;
use crate::tree::{CompositeOutcome, Label, Route, Target};

/// Characteristic name that marks the descriptive difficulty node.
pub const DIFFICULTY: &str = "difficulty";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("{in_progress} {target} traversals are still in progress")]
    Incomplete { target: Target, in_progress: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunnelEntry {
    pub node_id: String,
    pub characteristic: String,
    pub presented: u64,
    pub answer_counts: BTreeMap<String, u64>,
    /// Traversals whose last judgment was at this node, with either label.
    pub terminated_here: u64,
    pub terminated_good: u64,
    pub terminated_bad: u64,
    pub continued: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunnelReport {
    pub tree_id: String,
    pub target: Target,
    /// Terminated traversals counted (item x evaluator).
    pub traversals: u64,
    pub good: u64,
    pub bad: u64,
    /// Nodes in tree preorder.
    pub entries: Vec<FunnelEntry>,
}

impl FunnelReport {
    pub fn entry(&self, node_id: &str) -> Option<&FunnelEntry> {
        self.entries.iter().find(|e| e.node_id == node_id)
    }

    pub fn total_presented(&self) -> u64 {
        self.entries.iter().map(|e| e.presented).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelCount {
    pub level: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DifficultyDistribution {
    /// `None` when the input tree has no difficulty node.
    pub node_id: Option<String>,
    pub total: u64,
    /// Levels in the node's answer order; zero counts are kept.
    pub levels: Vec<LevelCount>,
}

impl DifficultyDistribution {
    pub fn count(&self, level: &str) -> Option<u64> {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .map(|l| l.count)
    }
}

/// Mean total elapsed seconds per terminated traversal. `mean_all` covers
/// every terminated traversal; `mean_completed_full_path` only those that
/// ended at a leaf node (no early termination).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanElapsed {
    pub mean_all: Option<f64>,
    pub mean_completed_full_path: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatorSummary {
    pub evaluator_id: String,
    pub items_judged_input: u64,
    pub items_judged_output: u64,
    pub mean_elapsed_input: MeanElapsed,
    pub mean_elapsed_output: MeanElapsed,
    /// Set when the evaluator has no terminated traversal at all.
    pub means_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSavingsReport {
    pub tree_id: String,
    pub target: Target,
    /// Traversals (item x evaluator); equals the item count at redundancy 1.
    pub items: u64,
    pub hierarchical_judgments: u64,
    pub flat_judgments: u64,
    pub saved: u64,
    /// saved / flat; 0 when there is nothing to judge.
    pub saved_fraction: f64,
}

fn terminated(engine: &Engine, target: Target) -> impl Iterator<Item = &TraversalState> {
    engine
        .traversals()
        .filter(move |t| t.tree_target == target && t.is_terminated())
}

/// One outcome per terminated traversal.
pub fn composite_outcomes(engine: &Engine) -> BTreeMap<TraversalKey, CompositeOutcome> {
    engine
        .traversal_map()
        .iter()
        .filter_map(|(k, t)| Some((k.clone(), t.outcome.clone()?)))
        .collect()
}

pub fn funnel(engine: &Engine, target: Target) -> FunnelReport {
    let tree = engine.campaign().tree(target);
    let mut entries: Vec<FunnelEntry> = tree
        .nodes_in_order()
        .map(|n| FunnelEntry {
            node_id: n.id.clone(),
            characteristic: n.characteristic.clone(),
            presented: 0,
            answer_counts: n.answers.iter().map(|a| (a.clone(), 0)).collect(),
            terminated_here: 0,
            terminated_good: 0,
            terminated_bad: 0,
            continued: 0,
        })
        .collect();
    let index: BTreeMap<String, usize> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.node_id.clone(), i))
        .collect();

    let (mut traversals, mut good, mut bad) = (0, 0, 0);
    for t in terminated(engine, target) {
        traversals += 1;
        let last = t.history.len() - 1;
        for (step, h) in t.history.iter().enumerate() {
            let e = &mut entries[index[&h.node_id]];
            e.presented += 1;
            *e.answer_counts
                .get_mut(&h.answer)
                .expect("replayed answers are valid") += 1;
            if step == last {
                e.terminated_here += 1;
                match t.outcome.as_ref().map(|o| o.label) {
                    Some(Label::Good) => e.terminated_good += 1,
                    _ => e.terminated_bad += 1,
                }
            } else {
                e.continued += 1;
            }
        }
        match t.outcome.as_ref().map(|o| o.label) {
            Some(Label::Good) => good += 1,
            _ => bad += 1,
        }
    }
    FunnelReport {
        tree_id: tree.id().to_string(),
        target,
        traversals,
        good,
        bad,
        entries,
    }
}

/// Level counts at the input tree's difficulty node, over traversals that
/// reached it.
pub fn difficulty_distribution(engine: &Engine) -> DifficultyDistribution {
    let tree = engine.campaign().input_tree();
    let Some(node) = tree
        .nodes_in_order()
        .find(|n| n.characteristic == DIFFICULTY)
    else {
        return DifficultyDistribution {
            node_id: None,
            total: 0,
            levels: Vec::new(),
        };
    };
    let mut levels: Vec<LevelCount> = node
        .answers
        .iter()
        .map(|a| LevelCount {
            level: a.clone(),
            count: 0,
        })
        .collect();
    for t in terminated(engine, Target::Input) {
        for h in t.history.iter().filter(|h| h.node_id == node.id) {
            if let Some(l) = levels.iter_mut().find(|l| l.level == h.answer) {
                l.count += 1;
            }
        }
    }
    let total = levels.iter().map(|l| l.count).sum();
    DifficultyDistribution {
        node_id: Some(node.id.clone()),
        total,
        levels,
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Summaries for every rostered evaluator, ordered by evaluator id.
pub fn evaluator_summaries(engine: &Engine) -> Vec<EvaluatorSummary> {
    let campaign = engine.campaign();
    let mut ids: Vec<&str> = campaign
        .evaluators()
        .iter()
        .map(|e| e.id.as_str())
        .collect();
    ids.sort_unstable();
    ids.into_iter()
        .map(|ev| {
            let side = |target: Target| {
                let tree = campaign.tree(target);
                let (mut all, mut full) = (Vec::new(), Vec::new());
                for t in terminated(engine, target).filter(|t| t.evaluator_id == ev) {
                    let secs = t.total_elapsed();
                    all.push(secs);
                    if t.last_node()
                        .and_then(|n| tree.node(n))
                        .is_some_and(|n| n.is_leaf())
                    {
                        full.push(secs);
                    }
                }
                (
                    all.len() as u64,
                    MeanElapsed {
                        mean_all: mean(&all),
                        mean_completed_full_path: mean(&full),
                    },
                )
            };
            let (items_judged_input, mean_elapsed_input) = side(Target::Input);
            let (items_judged_output, mean_elapsed_output) = side(Target::Output);
            EvaluatorSummary {
                evaluator_id: ev.to_string(),
                items_judged_input,
                items_judged_output,
                mean_elapsed_input,
                mean_elapsed_output,
                means_undefined: items_judged_input + items_judged_output == 0,
            }
        })
        .collect()
}

/// Judgments actually made versus judging every node of every traversal.
pub fn time_savings(engine: &Engine, target: Target) -> Result<TimeSavingsReport, ScoringError> {
    let tree = engine.campaign().tree(target);
    let mut items = 0u64;
    let mut in_progress = 0usize;
    let mut hierarchical = 0u64;
    for t in engine.traversals().filter(|t| t.tree_target == target) {
        if t.is_terminated() {
            items += 1;
            hierarchical += t.history.len() as u64;
        } else {
            in_progress += 1;
        }
    }
    if in_progress > 0 {
        return Err(ScoringError::Incomplete {
            target,
            in_progress,
        });
    }
    let flat = items * tree.flat_judgment_count() as u64;
    let saved = flat - hierarchical;
    let saved_fraction = if flat == 0 {
        0.0
    } else {
        saved as f64 / flat as f64
    };
    Ok(TimeSavingsReport {
        tree_id: tree.id().to_string(),
        target,
        items,
        hierarchical_judgments: hierarchical,
        flat_judgments: flat,
        saved,
        saved_fraction,
    })
}

/// Cross-count of output outcome (rows) by input outcome (columns), over
/// (item, evaluator) pairs where both traversals are terminated.
pub fn contingency_table(engine: &Engine) -> ContingencyTable {
    let mut table = ContingencyTable::new(0, 0, 0, 0);
    for (key, input) in engine
        .traversal_map()
        .iter()
        .filter(|(k, _)| k.target == Target::Input)
    {
        let Some(input) = input.outcome.as_ref() else {
            continue;
        };
        let Some(output) = engine
            .traversal(&key.item_id, &key.evaluator_id, Target::Output)
            .and_then(|t| t.outcome.as_ref())
        else {
            continue;
        };
        let cell = match (output.is_good(), input.is_good()) {
            (true, true) => &mut table.a,
            (true, false) => &mut table.b,
            (false, true) => &mut table.c,
            (false, false) => &mut table.d,
        };
        *cell += 1;
    }
    table
}

/// Sum over pass edges into `node_id` of the answers routed there; the
/// conservation check for non-root funnel entries.
pub fn routed_into(report: &FunnelReport, tree: &crate::MetricTree, node_id: &str) -> u64 {
    let mut total = 0;
    for parent in tree.nodes_in_order() {
        let Some(entry) = report.entry(&parent.id) else {
            continue;
        };
        for (answer, route) in &parent.routes {
            if matches!(route, Route::Node(n) if n == node_id) {
                total += entry.answer_counts.get(answer).copied().unwrap_or(0);
            }
        }
    }
    total
}
