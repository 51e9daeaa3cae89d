//! Request parsing and response bodies.

use std::collections::BTreeMap;

use hiereval::campaign::{Engine, TraversalState};
use hiereval::{CompositeOutcome, Target};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::ApiError;
use crate::state::{progress, Progress};

/// Body of `POST /campaigns/{id}/judgments`.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentRequest {
    pub idempotency_key: String,
    pub item_id: String,
    pub tree_target: Target,
    pub node_id: String,
    pub answer: String,
    pub elapsed_seconds: f64,
}

const FIELDS: [&str; 6] = [
    "idempotency_key",
    "item_id",
    "tree_target",
    "node_id",
    "answer",
    "elapsed_seconds",
];

impl JudgmentRequest {
    /// Parses by hand rather than through a derive so every error can name
    /// the field it is about.
    pub fn parse(body: &[u8]) -> Result<Self, ApiError> {
        let value: Value = serde_json::from_slice(body)
            .map_err(|e| ApiError::validation("body", format!("body is not JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(ApiError::validation("body", "body must be a JSON object"));
        };
        if let Some(extra) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(ApiError::validation(
                extra,
                format!("unknown field '{extra}'"),
            ));
        }
        let tree_target = match text(&obj, "tree_target")?.as_str() {
            "input" => Target::Input,
            "output" => Target::Output,
            other => {
                return Err(ApiError::validation(
                    "tree_target",
                    format!("tree_target must be 'input' or 'output', got '{other}'"),
                ))
            }
        };
        let elapsed_seconds = obj
            .get("elapsed_seconds")
            .ok_or_else(|| missing("elapsed_seconds"))?
            .as_f64()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| {
                ApiError::validation(
                    "elapsed_seconds",
                    "elapsed_seconds must be a non-negative number",
                )
            })?;
        let idempotency_key = text(&obj, "idempotency_key")?;
        if idempotency_key.len() > 200 {
            return Err(ApiError::validation(
                "idempotency_key",
                "idempotency_key is longer than 200 bytes",
            ));
        }
        Ok(Self {
            idempotency_key,
            item_id: text(&obj, "item_id")?,
            tree_target,
            node_id: text(&obj, "node_id")?,
            answer: text(&obj, "answer")?,
            elapsed_seconds,
        })
    }
}

fn missing(field: &str) -> ApiError {
    ApiError::validation(field, format!("missing field '{field}'"))
}

fn text(obj: &Map<String, Value>, field: &str) -> Result<String, ApiError> {
    match obj.get(field) {
        None => Err(missing(field)),
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(_) => Err(ApiError::validation(
            field,
            format!("{field} must be a non-empty string"),
        )),
    }
}

#[derive(Debug, Serialize)]
pub struct ItemView<'a> {
    pub id: &'a str,
    pub input_text: &'a str,
    pub output_text: &'a str,
    /// Only sent when the current node judges the explanation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation_text: Option<&'a str>,
}

#[derive(Debug, Serialize)]
pub struct NodeView<'a> {
    pub id: &'a str,
    pub characteristic: &'a str,
    pub prompt: &'a str,
    pub answers: &'a [String],
    /// Rubric text per answer, for nodes that have one.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub help: &'a BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextPayload<'a> {
    Task {
        campaign_id: &'a str,
        evaluator_id: &'a str,
        as_of_sequence_no: u64,
        tree_target: Target,
        item: ItemView<'a>,
        node: NodeView<'a>,
        progress: Progress,
    },
    Done {
        campaign_id: &'a str,
        evaluator_id: &'a str,
        as_of_sequence_no: u64,
        progress: Progress,
    },
}

pub fn next_payload<'a>(
    engine: &'a Engine,
    evaluator_id: &'a str,
) -> Result<NextPayload<'a>, ApiError> {
    let campaign_id = engine.campaign().id();
    let as_of_sequence_no = engine.last_sequence_no();
    let Some(task) = engine.next_task(evaluator_id)? else {
        return Ok(NextPayload::Done {
            campaign_id,
            evaluator_id,
            as_of_sequence_no,
            progress: progress(engine, evaluator_id, None),
        });
    };
    let node = task.node;
    Ok(NextPayload::Task {
        campaign_id,
        evaluator_id,
        as_of_sequence_no,
        tree_target: task.target,
        item: ItemView {
            id: &task.item.id,
            input_text: &task.item.input_text,
            output_text: &task.item.output_text,
            explanation_text: task
                .item
                .explanation_text
                .as_deref()
                .filter(|_| node.show_explanation),
        },
        node: NodeView {
            id: &node.id,
            characteristic: &node.characteristic,
            prompt: &node.prompt,
            answers: &node.answers,
            help: &node.help,
        },
        progress: progress(engine, evaluator_id, Some(&task.item.id)),
    })
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum JudgmentResponse<'a> {
    InProgress {
        sequence_no: u64,
        item_id: &'a str,
        tree_target: Target,
        next_node_id: &'a str,
    },
    Terminated {
        sequence_no: u64,
        item_id: &'a str,
        tree_target: Target,
        outcome: &'a CompositeOutcome,
    },
}

/// The traversal's status right after the judgment numbered `sequence_no`.
pub fn judgment_response(state: &TraversalState, sequence_no: u64) -> Value {
    let body = match (&state.current_node, &state.outcome) {
        (Some(next), _) => JudgmentResponse::InProgress {
            sequence_no,
            item_id: &state.item_id,
            tree_target: state.tree_target,
            next_node_id: next,
        },
        (None, Some(outcome)) => JudgmentResponse::Terminated {
            sequence_no,
            item_id: &state.item_id,
            tree_target: state.tree_target,
            outcome,
        },
        (None, None) => unreachable!("a traversal without a node is terminated"),
    };
    serde_json::to_value(body).expect("responses serialize")
}
