//! Two-phase evaluation campaigns.
//!
//! Testers collect [`Item`]s (an input the system was given and the output it
//! produced). A [`Campaign`] then assigns every item to `redundancy`
//! evaluators, who judge the input with the input tree and the output with
//! the output tree. Judgments go to an append-only journal and the live
//! state is a pure function of that journal (see [`Engine`]).

mod engine;
mod journal;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tree::{MetricTree, Target, TreeDefinition, TreeError};

pub use engine::{
    Engine, HistoryEntry, Submission, Task, TraversalKey, TraversalState, TraversalStatus,
};
pub use journal::{
    format_journal, parse_journal, JournalError, JournalFile, JudgmentRecord, ReplayError,
    ReplayErrorKind,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub input_text: String,
    pub output_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluator {
    pub id: String,
    pub display_name: String,
    pub token: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum CampaignError {
    #[error("{role} tree '{tree}' has target {found}, expected {expected}")]
    TreeTarget {
        role: &'static str,
        tree: String,
        found: Target,
        expected: Target,
    },
    #[error("campaign has no items")]
    NoItems,
    #[error("campaign has no evaluators")]
    NoEvaluators,
    #[error("redundancy must be at least 1")]
    ZeroRedundancy,
    #[error("redundancy {redundancy} exceeds the number of evaluators ({evaluators})")]
    RedundancyTooHigh {
        redundancy: usize,
        evaluators: usize,
    },
    #[error("duplicate item id '{0}'")]
    DuplicateItem(String),
    #[error("duplicate evaluator id '{0}'")]
    DuplicateEvaluator(String),
    #[error("item '{item}' has an empty {field}")]
    EmptyItemText { item: String, field: &'static str },
    #[error("evaluator '{0}' has an empty token")]
    EmptyToken(String),
    #[error("empty {0} id")]
    EmptyId(&'static str),
    #[error("assignment table is inconsistent: {0}")]
    BadAssignment(String),
    #[error("unknown evaluator '{0}'")]
    UnknownEvaluator(String),
    #[error("evaluator '{evaluator}' has no {target} traversal for item '{item}'")]
    NoTraversal {
        item: String,
        evaluator: String,
        target: Target,
    },
    #[error("traversal ({item}, {evaluator}, {target}) is already terminated")]
    AlreadyTerminated {
        item: String,
        evaluator: String,
        target: Target,
    },
    #[error("stale node: traversal ({item}, {evaluator}, {target}) is at '{current}', got '{submitted}'")]
    StaleNode {
        item: String,
        evaluator: String,
        target: Target,
        current: String,
        submitted: String,
    },
    #[error("answer '{answer}' is not an option of node '{node}'")]
    UnknownAnswer { node: String, answer: String },
    #[error("elapsed_seconds must be finite and non-negative, got {0}")]
    InvalidElapsed(f64),
}

/// Everything needed to create a campaign.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub id: String,
    pub input_tree: MetricTree,
    pub output_tree: MetricTree,
    pub items: Vec<Item>,
    pub evaluators: Vec<Evaluator>,
    pub redundancy: usize,
    pub shuffle_seed: u64,
}

/// A validated campaign with its assignment table.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    id: String,
    input_tree: Arc<MetricTree>,
    output_tree: Arc<MetricTree>,
    items: Vec<Item>,
    item_index: BTreeMap<String, usize>,
    evaluators: Vec<Evaluator>,
    redundancy: usize,
    shuffle_seed: u64,
    assignments: BTreeMap<String, Vec<String>>,
}

/// Builds a campaign and its assignment table.
///
/// Assignment is a deterministic function of `shuffle_seed`:
///
/// 1. A ChaCha8 generator is seeded with `shuffle_seed` and shuffles the item
///    ids (in the order given).
/// 2. Walking the shuffled list, copy `k` of the `i`-th item goes to evaluator
///    number `(i * redundancy + k) mod E` in roster order. Because
///    `redundancy <= E` the copies of one item land on distinct evaluators,
///    and loads differ by at most one.
/// 3. The same generator then shuffles each evaluator's list, in roster order.
pub fn create_campaign(config: CampaignConfig) -> Result<Campaign, CampaignError> {
    check_config(&config)?;
    let assignments = assign(
        &config.items,
        &config.evaluators,
        config.redundancy,
        config.shuffle_seed,
    );
    Ok(Campaign::assemble(config, assignments))
}

fn check_config(config: &CampaignConfig) -> Result<(), CampaignError> {
    if config.id.is_empty() {
        return Err(CampaignError::EmptyId("campaign"));
    }
    for (role, tree, expected) in [
        ("input", &config.input_tree, Target::Input),
        ("output", &config.output_tree, Target::Output),
    ] {
        if tree.target() != expected {
            return Err(CampaignError::TreeTarget {
                role,
                tree: tree.id().to_string(),
                found: tree.target(),
                expected,
            });
        }
    }
    if config.items.is_empty() {
        return Err(CampaignError::NoItems);
    }
    if config.evaluators.is_empty() {
        return Err(CampaignError::NoEvaluators);
    }
    if config.redundancy == 0 {
        return Err(CampaignError::ZeroRedundancy);
    }
    if config.redundancy > config.evaluators.len() {
        return Err(CampaignError::RedundancyTooHigh {
            redundancy: config.redundancy,
            evaluators: config.evaluators.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for item in &config.items {
        if item.id.is_empty() {
            return Err(CampaignError::EmptyId("item"));
        }
        if !seen.insert(item.id.as_str()) {
            return Err(CampaignError::DuplicateItem(item.id.clone()));
        }
        if item.input_text.trim().is_empty() {
            return Err(CampaignError::EmptyItemText {
                item: item.id.clone(),
                field: "input_text",
            });
        }
        if item.output_text.trim().is_empty() {
            return Err(CampaignError::EmptyItemText {
                item: item.id.clone(),
                field: "output_text",
            });
        }
    }
    let mut seen = BTreeSet::new();
    for ev in &config.evaluators {
        if ev.id.is_empty() {
            return Err(CampaignError::EmptyId("evaluator"));
        }
        if !seen.insert(ev.id.as_str()) {
            return Err(CampaignError::DuplicateEvaluator(ev.id.clone()));
        }
        if ev.token.is_empty() {
            return Err(CampaignError::EmptyToken(ev.id.clone()));
        }
    }
    Ok(())
}

fn assign(
    items: &[Item],
    evaluators: &[Evaluator],
    redundancy: usize,
    seed: u64,
) -> BTreeMap<String, Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&str> = items.iter().map(|i| i.id.as_str()).collect();
    order.shuffle(&mut rng);

    let mut lists: Vec<Vec<String>> = vec![Vec::new(); evaluators.len()];
    for (i, item) in order.iter().enumerate() {
        for k in 0..redundancy {
            lists[(i * redundancy + k) % evaluators.len()].push(item.to_string());
        }
    }
    for list in &mut lists {
        list.shuffle(&mut rng);
    }
    evaluators.iter().map(|e| e.id.clone()).zip(lists).collect()
}

impl Campaign {
    fn assemble(config: CampaignConfig, assignments: BTreeMap<String, Vec<String>>) -> Self {
        let item_index = config
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.id.clone(), i))
            .collect();
        Self {
            id: config.id,
            input_tree: Arc::new(config.input_tree),
            output_tree: Arc::new(config.output_tree),
            items: config.items,
            item_index,
            evaluators: config.evaluators,
            redundancy: config.redundancy,
            shuffle_seed: config.shuffle_seed,
            assignments,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tree(&self, target: Target) -> &MetricTree {
        match target {
            Target::Input => &self.input_tree,
            Target::Output => &self.output_tree,
        }
    }

    pub fn input_tree(&self) -> &MetricTree {
        &self.input_tree
    }

    pub fn output_tree(&self) -> &MetricTree {
        &self.output_tree
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.item_index.get(id).map(|&i| &self.items[i])
    }

    pub fn evaluators(&self) -> &[Evaluator] {
        &self.evaluators
    }

    pub fn evaluator(&self, id: &str) -> Option<&Evaluator> {
        self.evaluators.iter().find(|e| e.id == id)
    }

    pub fn evaluator_by_token(&self, token: &str) -> Option<&Evaluator> {
        self.evaluators.iter().find(|e| e.token == token)
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed
    }

    /// Item ids assigned to an evaluator, in presentation order.
    pub fn assignment(&self, evaluator_id: &str) -> Option<&[String]> {
        self.assignments.get(evaluator_id).map(Vec::as_slice)
    }

    pub fn assignments(&self) -> &BTreeMap<String, Vec<String>> {
        &self.assignments
    }

    /// Returns a campaign with additional items, reassigning everything from
    /// the original seed. Only sensible before any judgment is recorded.
    pub fn with_items(&self, extra: Vec<Item>) -> Result<Campaign, CampaignError> {
        let mut items = self.items.clone();
        items.extend(extra);
        create_campaign(CampaignConfig {
            id: self.id.clone(),
            input_tree: (*self.input_tree).clone(),
            output_tree: (*self.output_tree).clone(),
            items,
            evaluators: self.evaluators.clone(),
            redundancy: self.redundancy,
            shuffle_seed: self.shuffle_seed,
        })
    }

    pub fn to_document(&self) -> CampaignDocument {
        CampaignDocument {
            id: self.id.clone(),
            redundancy: self.redundancy,
            shuffle_seed: self.shuffle_seed,
            input_tree: self.input_tree.to_definition(),
            output_tree: self.output_tree.to_definition(),
            evaluators: self.evaluators.clone(),
            items: self.items.clone(),
            assignments: self.assignments.clone(),
        }
    }

    /// Pretty JSON of [`CampaignDocument`], with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("campaign serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Campaign, CampaignLoadError> {
        let doc: CampaignDocument = serde_json::from_str(text)?;
        Campaign::from_document(doc)
    }

    /// Rebuilds a campaign from its stored form. The stored assignment table
    /// is kept as-is after a structural check, so campaigns stay stable even
    /// if the shuffling algorithm changes.
    pub fn from_document(doc: CampaignDocument) -> Result<Campaign, CampaignLoadError> {
        let config = CampaignConfig {
            id: doc.id,
            input_tree: MetricTree::from_definition(doc.input_tree)?,
            output_tree: MetricTree::from_definition(doc.output_tree)?,
            items: doc.items,
            evaluators: doc.evaluators,
            redundancy: doc.redundancy,
            shuffle_seed: doc.shuffle_seed,
        };
        check_config(&config)?;
        check_assignments(&config, &doc.assignments)?;
        Ok(Campaign::assemble(config, doc.assignments))
    }
}

fn check_assignments(
    config: &CampaignConfig,
    assignments: &BTreeMap<String, Vec<String>>,
) -> Result<(), CampaignError> {
    let roster: BTreeSet<&str> = config.evaluators.iter().map(|e| e.id.as_str()).collect();
    let mut copies: BTreeMap<&str, usize> =
        config.items.iter().map(|i| (i.id.as_str(), 0)).collect();
    for (ev, list) in assignments {
        if !roster.contains(ev.as_str()) {
            return Err(CampaignError::BadAssignment(format!(
                "unknown evaluator '{ev}'"
            )));
        }
        let mut own = BTreeSet::new();
        for item in list {
            let Some(n) = copies.get_mut(item.as_str()) else {
                return Err(CampaignError::BadAssignment(format!(
                    "unknown item '{item}'"
                )));
            };
            if !own.insert(item.as_str()) {
                return Err(CampaignError::BadAssignment(format!(
                    "item '{item}' assigned twice to '{ev}'"
                )));
            }
            *n += 1;
        }
    }
    if let Some((item, n)) = copies.iter().find(|(_, &n)| n != config.redundancy) {
        return Err(CampaignError::BadAssignment(format!(
            "item '{item}' has {n} evaluator(s), expected {}",
            config.redundancy
        )));
    }
    Ok(())
}

/// On-disk form of a campaign (`campaign.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignDocument {
    pub id: String,
    pub redundancy: usize,
    pub shuffle_seed: u64,
    pub input_tree: TreeDefinition,
    pub output_tree: TreeDefinition,
    pub evaluators: Vec<Evaluator>,
    pub items: Vec<Item>,
    pub assignments: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignLoadError {
    #[error("malformed campaign document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
}
