//! Report rendering shared by the command line and the server.
//!
//! A report is a scoring or statistics result wrapped in an envelope naming
//! the campaign, the report kind and the journal sequence number it was
//! computed at. The structured form is canonical JSON (two-space indent,
//! trailing newline), so equal snapshots render byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;

use crate::campaign::Engine;
use crate::scoring::{
    self, DifficultyDistribution, EvaluatorSummary, FunnelReport, MeanElapsed, ScoringError,
    TimeSavingsReport,
};
use crate::stats::{chi_square_2x2, ContingencyTable, TestResult};
use crate::tree::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    FunnelInput,
    FunnelOutput,
    Difficulty,
    Evaluators,
    TimeSavings,
    ChiSquare,
}

impl ReportKind {
    pub const ALL: [ReportKind; 6] = [
        ReportKind::FunnelInput,
        ReportKind::FunnelOutput,
        ReportKind::Difficulty,
        ReportKind::Evaluators,
        ReportKind::TimeSavings,
        ReportKind::ChiSquare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::FunnelInput => "funnel_input",
            ReportKind::FunnelOutput => "funnel_output",
            ReportKind::Difficulty => "difficulty",
            ReportKind::Evaluators => "evaluators",
            ReportKind::TimeSavings => "time_savings",
            ReportKind::ChiSquare => "chi_square",
        }
    }
}

impl std::fmt::Display for ReportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown report kind '{0}' (expected one of funnel_input, funnel_output, difficulty, evaluators, time_savings, chi_square)")]
pub struct UnknownReportKind(pub String);

impl std::str::FromStr for ReportKind {
    type Err = UnknownReportKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownReportKind(s.to_string()))
    }
}

/// Time savings for one tree; `report` is absent while traversals are open.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSavingsSide {
    pub target: Target,
    pub in_progress: usize,
    pub report: Option<TimeSavingsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub table: ContingencyTable,
    /// Absent when the table is degenerate; `error` says why.
    pub test: Option<TestResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportBody {
    Funnel(FunnelReport),
    Difficulty(DifficultyDistribution),
    Evaluators(Vec<EvaluatorSummary>),
    TimeSavings(Vec<TimeSavingsSide>),
    ChiSquare(ChiSquareReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub campaign_id: String,
    pub kind: ReportKind,
    pub as_of_sequence_no: u64,
    pub report: ReportBody,
}

pub fn build(engine: &Engine, kind: ReportKind) -> Report {
    let body = match kind {
        ReportKind::FunnelInput => ReportBody::Funnel(scoring::funnel(engine, Target::Input)),
        ReportKind::FunnelOutput => ReportBody::Funnel(scoring::funnel(engine, Target::Output)),
        ReportKind::Difficulty => ReportBody::Difficulty(scoring::difficulty_distribution(engine)),
        ReportKind::Evaluators => ReportBody::Evaluators(scoring::evaluator_summaries(engine)),
        ReportKind::TimeSavings => ReportBody::TimeSavings(
            Target::BOTH
                .into_iter()
                .map(|target| match scoring::time_savings(engine, target) {
                    Ok(r) => TimeSavingsSide {
                        target,
                        in_progress: 0,
                        report: Some(r),
                    },
                    Err(ScoringError::Incomplete { in_progress, .. }) => TimeSavingsSide {
                        target,
                        in_progress,
                        report: None,
                    },
                })
                .collect(),
        ),
        ReportKind::ChiSquare => {
            let table = scoring::contingency_table(engine);
            let (test, error) = match chi_square_2x2(&table, false) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ReportBody::ChiSquare(ChiSquareReport { table, test, error })
        }
    };
    Report {
        campaign_id: engine.campaign().id().to_string(),
        kind,
        as_of_sequence_no: engine.last_sequence_no(),
        report: body,
    }
}

impl Report {
    /// Canonical structured form.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} report for campaign {} as of sequence {}\n",
            self.kind, self.campaign_id, self.as_of_sequence_no
        );
        match &self.report {
            ReportBody::Funnel(f) => funnel_text(&mut out, f),
            ReportBody::Difficulty(d) => {
                let rows: Vec<Vec<String>> = d
                    .levels
                    .iter()
                    .map(|l| {
                        vec![
                            l.level.clone(),
                            l.count.to_string(),
                            percent(l.count, d.total),
                        ]
                    })
                    .collect();
                table(&mut out, &["level", "count", "share"], &rows);
                let _ = writeln!(out, "total {}", d.total);
            }
            ReportBody::Evaluators(list) => {
                let mean = |m: &MeanElapsed| {
                    format!(
                        "{} / {}",
                        seconds(m.mean_all),
                        seconds(m.mean_completed_full_path)
                    )
                };
                let rows: Vec<Vec<String>> = list
                    .iter()
                    .map(|s| {
                        vec![
                            s.evaluator_id.clone(),
                            s.items_judged_input.to_string(),
                            s.items_judged_output.to_string(),
                            mean(&s.mean_elapsed_input),
                            mean(&s.mean_elapsed_output),
                        ]
                    })
                    .collect();
                table(
                    &mut out,
                    &[
                        "evaluator",
                        "inputs",
                        "outputs",
                        "input s (all / full)",
                        "output s (all / full)",
                    ],
                    &rows,
                );
            }
            ReportBody::TimeSavings(sides) => {
                let rows: Vec<Vec<String>> = sides
                    .iter()
                    .map(|s| match &s.report {
                        Some(r) => vec![
                            r.target.to_string(),
                            r.tree_id.clone(),
                            r.items.to_string(),
                            r.hierarchical_judgments.to_string(),
                            r.flat_judgments.to_string(),
                            r.saved.to_string(),
                            format!("{:.1}%", r.saved_fraction * 100.0),
                        ],
                        None => vec![
                            s.target.to_string(),
                            format!("incomplete ({} open)", s.in_progress),
                            "-".into(),
                            "-".into(),
                            "-".into(),
                            "-".into(),
                            "-".into(),
                        ],
                    })
                    .collect();
                table(
                    &mut out,
                    &[
                        "target",
                        "tree",
                        "items",
                        "hierarchical",
                        "flat",
                        "saved",
                        "saved %",
                    ],
                    &rows,
                );
            }
            ReportBody::ChiSquare(c) => {
                let t = &c.table;
                let rows = vec![
                    vec!["output good".to_string(), t.a.to_string(), t.b.to_string()],
                    vec!["output bad".to_string(), t.c.to_string(), t.d.to_string()],
                ];
                table(&mut out, &["", "input good", "input bad"], &rows);
                match (&c.test, &c.error) {
                    (Some(r), _) => {
                        let _ = writeln!(
                            out,
                            "chi-square {:.4} (dof {}), p = {:.4}",
                            r.statistic, r.dof, r.p_value
                        );
                        if r.low_expected_warning {
                            let _ = writeln!(out, "warning: an expected count is below 5");
                        }
                    }
                    (None, Some(e)) => {
                        let _ = writeln!(out, "chi-square undefined: {e}");
                    }
                    (None, None) => {}
                }
            }
        }
        out
    }
}

fn funnel_text(out: &mut String, f: &FunnelReport) {
    let _ = writeln!(
        out,
        "tree {} ({}): {} terminated traversals, good {}, bad {}",
        f.tree_id, f.target, f.traversals, f.good, f.bad
    );
    let rows: Vec<Vec<String>> = f
        .entries
        .iter()
        .map(|e| {
            let answers: Vec<String> = e
                .answer_counts
                .iter()
                .map(|(a, n)| format!("{a}={n}"))
                .collect();
            vec![
                e.node_id.clone(),
                e.presented.to_string(),
                e.continued.to_string(),
                e.terminated_good.to_string(),
                e.terminated_bad.to_string(),
                answers.join(" "),
            ]
        })
        .collect();
    table(
        out,
        &["node", "presented", "continued", "good", "bad", "answers"],
        &rows,
    );
}

fn percent(n: u64, total: u64) -> String {
    if total == 0 {
        "-".into()
    } else {
        format!("{:.1}%", n as f64 * 100.0 / total as f64)
    }
}

fn seconds(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |s| format!("{s:.2}"))
}

/// Left-aligns the first column and right-aligns the rest.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{cell:<w$}");
            } else {
                let _ = write!(s, "  {cell:>w$}");
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for row in rows {
        let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
    }
}
