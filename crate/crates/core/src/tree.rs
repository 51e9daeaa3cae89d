//! Hierarchical evaluation metrics as validated decision trees.
//!
//! A [`MetricTree`] is a rooted graph of characteristics. Each node asks one
//! question, and every declared answer routes either to another node or to a
//! terminal composite outcome (`good` / `bad`). Evaluation of an item stops as
//! soon as a terminal is reached.
//!
//! Trees are read from JSON documents ([`TreeDefinition`]) and only become a
//! [`MetricTree`] after every structural invariant has been checked, so a
//! `MetricTree` value is immutable and always valid.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use petgraph::visit::Dfs;
use serde::{Deserialize, Serialize};

/// Bundled question (input) tree document.
pub const QUESTION_TREE: &str = include_str!("../trees/question_tree.json");
/// Bundled answer (output) tree document.
pub const ANSWER_TREE: &str = include_str!("../trees/answer_tree.json");

/// Which side of the evaluated system a tree judges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Input,
    Output,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Input, Target::Output];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Input => "input",
            Target::Output => "output",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" => Ok(Target::Input),
            "output" => Ok(Target::Output),
            other => Err(format!(
                "unknown tree target '{other}' (expected input or output)"
            )),
        }
    }
}

/// Binary composite verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Good => "good",
            Label::Bad => "bad",
        })
    }
}

/// Outcome of a finished traversal. `failed_at` and `failing_answer` are set
/// only for `bad` outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositeOutcome {
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_answer: Option<String>,
}

impl CompositeOutcome {
    pub fn good() -> Self {
        Self {
            label: Label::Good,
            failed_at: None,
            failing_answer: None,
        }
    }

    pub fn bad(node_id: impl Into<String>, answer: impl Into<String>) -> Self {
        Self {
            label: Label::Bad,
            failed_at: Some(node_id.into()),
            failing_answer: Some(answer.into()),
        }
    }

    pub fn is_good(&self) -> bool {
        self.label == Label::Good
    }
}

/// Routing entry as stored in a tree document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Node(String),
    Terminal(Label),
}

/// Result of [`MetricTree::route`]: the next node, or a terminal outcome with
/// the failing node filled in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteTarget {
    Node(String),
    Terminal(CompositeOutcome),
}

/// One node of a tree document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDefinition {
    pub id: String,
    pub characteristic: String,
    pub prompt: String,
    pub answers: Vec<String>,
    pub routes: BTreeMap<String, Route>,
    /// Rubric text per answer, shown to evaluators next to the options.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub help: BTreeMap<String, String>,
    /// Whether the item's explanation text is part of what is judged here.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub show_explanation: bool,
}

/// Unvalidated tree document, exactly as it appears on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDefinition {
    pub id: String,
    pub name: String,
    pub target: Target,
    pub root: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub nodes: Vec<NodeDefinition>,
}

/// A broken tree invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingRoot {
        root: String,
    },
    EmptyNodeId,
    DuplicateNode {
        node: String,
    },
    TooFewAnswers {
        node: String,
        count: usize,
    },
    EmptyAnswer {
        node: String,
    },
    DuplicateAnswer {
        node: String,
        answer: String,
    },
    IncompleteRouting {
        node: String,
        answer: String,
    },
    ExtraRoute {
        node: String,
        answer: String,
    },
    DanglingRoute {
        node: String,
        answer: String,
        target: String,
    },
    Cycle {
        nodes: Vec<String>,
    },
    Unreachable {
        node: String,
    },
}

impl Violation {
    /// Short name of the violated invariant.
    pub fn invariant(&self) -> &'static str {
        match self {
            Violation::MissingRoot { .. } => "missing root",
            Violation::EmptyNodeId => "empty node id",
            Violation::DuplicateNode { .. } => "duplicate node",
            Violation::TooFewAnswers { .. } => "too few answers",
            Violation::EmptyAnswer { .. } => "empty answer",
            Violation::DuplicateAnswer { .. } => "duplicate answer",
            Violation::IncompleteRouting { .. } => "incomplete routing",
            Violation::ExtraRoute { .. } => "extra route",
            Violation::DanglingRoute { .. } => "dangling route",
            Violation::Cycle { .. } => "cycle",
            Violation::Unreachable { .. } => "unreachable",
        }
    }

    /// Node ids implicated by this violation.
    pub fn nodes(&self) -> Vec<&str> {
        match self {
            Violation::MissingRoot { root } => vec![root.as_str()],
            Violation::EmptyNodeId => vec![],
            Violation::DuplicateNode { node }
            | Violation::TooFewAnswers { node, .. }
            | Violation::EmptyAnswer { node }
            | Violation::DuplicateAnswer { node, .. }
            | Violation::IncompleteRouting { node, .. }
            | Violation::ExtraRoute { node, .. }
            | Violation::DanglingRoute { node, .. }
            | Violation::Unreachable { node } => vec![node.as_str()],
            Violation::Cycle { nodes } => nodes.iter().map(String::as_str).collect(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.invariant())?;
        match self {
            Violation::MissingRoot { root } => write!(f, "root '{root}' is not a node"),
            Violation::EmptyNodeId => write!(f, "a node has an empty id"),
            Violation::DuplicateNode { node } => {
                write!(f, "node '{node}' is defined more than once")
            }
            Violation::TooFewAnswers { node, count } => {
                write!(
                    f,
                    "node '{node}' declares {count} answer(s), at least 2 required"
                )
            }
            Violation::EmptyAnswer { node } => write!(f, "node '{node}' declares an empty answer"),
            Violation::DuplicateAnswer { node, answer } => {
                write!(f, "node '{node}' declares answer '{answer}' twice")
            }
            Violation::IncompleteRouting { node, answer } => {
                write!(f, "node '{node}' has no route for answer '{answer}'")
            }
            Violation::ExtraRoute { node, answer } => {
                write!(f, "node '{node}' routes undeclared answer '{answer}'")
            }
            Violation::DanglingRoute {
                node,
                answer,
                target,
            } => {
                write!(
                    f,
                    "node '{node}' answer '{answer}' routes to unknown node '{target}'"
                )
            }
            Violation::Cycle { nodes } => write!(f, "nodes {} form a cycle", nodes.join(", ")),
            Violation::Unreachable { node } => {
                write!(f, "node '{node}' cannot be reached from the root")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid tree '{tree}': {}", join_violations(.violations))]
    Invalid {
        tree: String,
        violations: Vec<Violation>,
    },
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("answer '{answer}' is not an option of node '{node}'")]
    UnknownAnswer { node: String, answer: String },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks every structural invariant of a tree document. An empty result
/// means the document describes a valid [`MetricTree`].
pub fn validate_tree(def: &TreeDefinition) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut by_id: BTreeMap<&str, &NodeDefinition> = BTreeMap::new();
    for node in &def.nodes {
        if node.id.is_empty() {
            violations.push(Violation::EmptyNodeId);
            continue;
        }
        if by_id.insert(node.id.as_str(), node).is_some() {
            violations.push(Violation::DuplicateNode {
                node: node.id.clone(),
            });
        }
    }

    if !by_id.contains_key(def.root.as_str()) {
        violations.push(Violation::MissingRoot {
            root: def.root.clone(),
        });
    }

    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for id in by_id.keys() {
        graph.add_node(id);
    }

    for (id, node) in &by_id {
        if node.answers.len() < 2 {
            violations.push(Violation::TooFewAnswers {
                node: id.to_string(),
                count: node.answers.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for answer in &node.answers {
            if answer.is_empty() {
                violations.push(Violation::EmptyAnswer {
                    node: id.to_string(),
                });
            } else if !seen.insert(answer.as_str()) {
                violations.push(Violation::DuplicateAnswer {
                    node: id.to_string(),
                    answer: answer.clone(),
                });
            }
        }
        for answer in &node.answers {
            if !answer.is_empty() && !node.routes.contains_key(answer) {
                violations.push(Violation::IncompleteRouting {
                    node: id.to_string(),
                    answer: answer.clone(),
                });
            }
        }
        for (answer, route) in &node.routes {
            if !seen.contains(answer.as_str()) {
                violations.push(Violation::ExtraRoute {
                    node: id.to_string(),
                    answer: answer.clone(),
                });
            }
            if let Route::Node(target) = route {
                match by_id.get_key_value(target.as_str()) {
                    Some((target, _)) => {
                        graph.add_edge(id, target, ());
                    }
                    None => violations.push(Violation::DanglingRoute {
                        node: id.to_string(),
                        answer: answer.clone(),
                        target: target.clone(),
                    }),
                }
            }
        }
    }

    let mut cycles: Vec<Vec<String>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
        .map(|scc| {
            let mut ids: Vec<String> = scc.into_iter().map(str::to_string).collect();
            ids.sort();
            ids
        })
        .collect();
    cycles.sort();
    violations.extend(cycles.into_iter().map(|nodes| Violation::Cycle { nodes }));

    if let Some((root, _)) = by_id.get_key_value(def.root.as_str()) {
        let mut reached = BTreeSet::new();
        let mut dfs = Dfs::new(&graph, *root);
        while let Some(id) = dfs.next(&graph) {
            reached.insert(id);
        }
        for id in by_id.keys() {
            if !reached.contains(id) {
                violations.push(Violation::Unreachable {
                    node: id.to_string(),
                });
            }
        }
    }

    violations
}

/// A validated node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricNode {
    pub id: String,
    pub characteristic: String,
    pub prompt: String,
    pub answers: Vec<String>,
    pub routes: BTreeMap<String, Route>,
    pub help: BTreeMap<String, String>,
    pub show_explanation: bool,
}

impl MetricNode {
    pub fn route_for(&self, answer: &str) -> Option<&Route> {
        self.routes.get(answer)
    }

    /// True when every answer of this node ends the traversal.
    pub fn is_leaf(&self) -> bool {
        self.routes
            .values()
            .all(|r| matches!(r, Route::Terminal(_)))
    }
}

/// A validated, immutable evaluation metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricTree {
    id: String,
    name: String,
    target: Target,
    root: String,
    notes: Option<String>,
    nodes: BTreeMap<String, MetricNode>,
    order: Vec<String>,
}

/// A root-to-terminal path: the `(node, answer)` steps and where they end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePath {
    pub steps: Vec<(String, String)>,
    pub outcome: CompositeOutcome,
}

impl MetricTree {
    /// Parses a JSON tree document and validates it.
    pub fn parse(document: &str) -> Result<Self, TreeError> {
        let def: TreeDefinition =
            serde_json::from_str(document).map_err(|e| TreeError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        Self::from_definition(def)
    }

    pub fn from_definition(def: TreeDefinition) -> Result<Self, TreeError> {
        let violations = validate_tree(&def);
        if !violations.is_empty() {
            return Err(TreeError::Invalid {
                tree: def.id,
                violations,
            });
        }
        let nodes: BTreeMap<String, MetricNode> = def
            .nodes
            .into_iter()
            .map(|n| {
                (
                    n.id.clone(),
                    MetricNode {
                        id: n.id,
                        characteristic: n.characteristic,
                        prompt: n.prompt,
                        answers: n.answers,
                        routes: n.routes,
                        help: n.help,
                        show_explanation: n.show_explanation,
                    },
                )
            })
            .collect();
        let order = preorder(&def.root, &nodes);
        Ok(Self {
            id: def.id,
            name: def.name,
            target: def.target,
            root: def.root,
            notes: def.notes,
            nodes,
            order,
        })
    }

    pub fn question_tree() -> Self {
        Self::parse(QUESTION_TREE).expect("bundled question tree is valid")
    }

    pub fn answer_tree() -> Self {
        Self::parse(ANSWER_TREE).expect("bundled answer tree is valid")
    }

    /// Looks up a bundled tree by its document name.
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "question_tree" => Some(Self::question_tree()),
            "answer_tree" => Some(Self::answer_tree()),
            _ => None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn notes(&self) -> Option<&str> {
        self.notes.as_deref()
    }

    pub fn node(&self, id: &str) -> Option<&MetricNode> {
        self.nodes.get(id)
    }

    pub fn root_node(&self) -> &MetricNode {
        &self.nodes[&self.root]
    }

    /// Nodes in depth-first preorder from the root, following answers in
    /// their declared order. This is the presentation order of reports.
    pub fn nodes_in_order(&self) -> impl Iterator<Item = &MetricNode> {
        self.order.iter().map(|id| &self.nodes[id])
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Judgments needed per item when every characteristic is judged
    /// independently, without early termination.
    pub fn flat_judgment_count(&self) -> usize {
        self.nodes.len()
    }

    /// Where `answer` at `node_id` leads.
    pub fn route(&self, node_id: &str, answer: &str) -> Result<RouteTarget, TreeError> {
        let node = self
            .nodes
            .get(node_id)
            .ok_or_else(|| TreeError::UnknownNode(node_id.to_string()))?;
        match node.routes.get(answer) {
            Some(Route::Node(next)) => Ok(RouteTarget::Node(next.clone())),
            Some(Route::Terminal(Label::Good)) => {
                Ok(RouteTarget::Terminal(CompositeOutcome::good()))
            }
            Some(Route::Terminal(Label::Bad)) => Ok(RouteTarget::Terminal(CompositeOutcome::bad(
                node_id, answer,
            ))),
            None => Err(TreeError::UnknownAnswer {
                node: node_id.to_string(),
                answer: answer.to_string(),
            }),
        }
    }

    /// Every root-to-terminal path, answers taken in declared order.
    pub fn enumerate_paths(&self) -> Vec<TreePath> {
        let mut out = Vec::new();
        let mut steps = Vec::new();
        self.walk(&self.root, &mut steps, &mut out);
        out
    }

    fn walk(&self, node_id: &str, steps: &mut Vec<(String, String)>, out: &mut Vec<TreePath>) {
        let node = &self.nodes[node_id];
        for answer in &node.answers {
            steps.push((node_id.to_string(), answer.clone()));
            match &node.routes[answer] {
                Route::Node(next) => self.walk(next, steps, out),
                Route::Terminal(Label::Good) => out.push(TreePath {
                    steps: steps.clone(),
                    outcome: CompositeOutcome::good(),
                }),
                Route::Terminal(Label::Bad) => out.push(TreePath {
                    steps: steps.clone(),
                    outcome: CompositeOutcome::bad(node_id, answer.clone()),
                }),
            }
            steps.pop();
        }
    }

    /// Parents of each node: `(parent, answer)` pairs routing into it.
    pub fn incoming_routes(&self) -> HashMap<&str, Vec<(&str, &str)>> {
        let mut incoming: HashMap<&str, Vec<(&str, &str)>> = HashMap::new();
        for node in self.nodes.values() {
            for (answer, route) in &node.routes {
                if let Route::Node(target) = route {
                    incoming
                        .entry(target.as_str())
                        .or_default()
                        .push((node.id.as_str(), answer.as_str()));
                }
            }
        }
        incoming
    }

    pub fn to_definition(&self) -> TreeDefinition {
        TreeDefinition {
            id: self.id.clone(),
            name: self.name.clone(),
            target: self.target,
            root: self.root.clone(),
            notes: self.notes.clone(),
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDefinition {
                    id: n.id.clone(),
                    characteristic: n.characteristic.clone(),
                    prompt: n.prompt.clone(),
                    answers: n.answers.clone(),
                    routes: n.routes.clone(),
                    help: n.help.clone(),
                    show_explanation: n.show_explanation,
                })
                .collect(),
        }
    }

    /// Canonical JSON: nodes sorted by id, two-space indent, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_definition()).expect("tree serializes");
        s.push('\n');
        s
    }
}

fn preorder(root: &str, nodes: &BTreeMap<String, MetricNode>) -> Vec<String> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut seen = BTreeSet::new();
    let mut stack = vec![root.to_string()];
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let node = &nodes[&id];
        for answer in node.answers.iter().rev() {
            if let Some(Route::Node(next)) = node.routes.get(answer) {
                if !seen.contains(next) {
                    stack.push(next.clone());
                }
            }
        }
        order.push(id);
    }
    order
}
