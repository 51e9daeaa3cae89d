//! Reconstruction of a published question-answering evaluation.
//!
//! Only aggregate counts were published, so the per-item dataset is
//! rebuilt: every item is given a question class and an answer path whose
//! totals match the published funnels, difficulty split and the 2x2
//! input/output cross-table simultaneously. Attributes are dealt out in
//! item-id order with [`spread`], a smooth weighted round-robin that hits
//! each quota exactly and interleaves classes evenly.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use serde::Serialize;

use crate::campaign::{
    create_campaign, Campaign, CampaignConfig, Engine, Evaluator, Item, Submission,
};
use crate::scoring;
use crate::stats::chi_square_2x2;
use crate::tree::{MetricTree, Target};

pub const CAMPAIGN_ID: &str = "mrc-sleep-qa";
pub const ITEMS: usize = 387;
pub const COACHES: usize = 10;
/// Only used to satisfy campaign creation; the stored assignment is
/// round-robin by item id.
pub const SEED: u64 = 20_240_304;

/// Published targets. Counts are traversals; with redundancy 1 they equal
/// item counts.
pub mod targets {
    /// Presented counts along relevant, factoid, answerable, spelling,
    /// grammar, difficulty.
    pub const QUESTION_FUNNEL: [u64; 6] = [387, 383, 335, 327, 321, 247];
    /// easy, medium, hard.
    pub const DIFFICULTY: [u64; 3] = [155, 74, 18];
    pub const CLEAR_YES: u64 = 230;
    pub const CLEAR_NO: u64 = 157;
    pub const CLEAR_RELEVANT: u64 = 146;
    pub const CLEAR_ACCURATE: u64 = 144;
    pub const EXPLANATION_RELEVANT: u64 = 116;
    /// Stated alongside 116 for the same quantity; cannot hold together
    /// with the 113/116 accuracy figure.
    pub const EXPLANATION_RELEVANT_ALT: u64 = 89;
    pub const EXPLANATION_ACCURATE: u64 = 113;
    pub const GOOD_QUESTIONS: u64 = 247;
    pub const GOOD_ANSWERS: u64 = 191;
    /// Rows output good/bad, columns input good/bad.
    pub const TABLE: [u64; 4] = [132, 59, 115, 81];
    pub const CHI_SQUARE: f64 = 4.56;
    pub const P_VALUE: f64 = 0.033;
    pub const HIERARCHICAL: u64 = 2000;
    pub const FLAT: u64 = 2322;
    pub const COACHES: u64 = 10;
}

/// Good answers come from the clear path (candidates 144) or the
/// explanation path (candidates 113); the split is proportional to those
/// pools.
pub const GOOD_VIA_CLEAR: usize = 107;
pub const GOOD_VIA_EXPLANATION: usize = 84;
/// Partially-accurate share of the accuracy passes on each path; the
/// published figures merge both levels.
pub const PARTIAL_CLEAR_PATH: usize = 24;
pub const PARTIAL_EXPLANATION_PATH: usize = 23;

/// Smooth weighted round-robin: a sequence of `Σ counts` category indices
/// in which category `k` occurs exactly `counts[k]` times, spread evenly.
/// Ties go to the lower index.
pub fn spread(counts: &[usize]) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let mut current = vec![0i64; counts.len()];
    (0..total)
        .map(|_| {
            for (c, w) in current.iter_mut().zip(counts) {
                *c += *w as i64;
            }
            let pick = (0..counts.len())
                .rev()
                .max_by_key(|&k| current[k])
                .expect("non-empty");
            current[pick] -= total as i64;
            pick
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QuestionClass {
    NotRelevant,
    NotFactoid,
    NotAnswerable,
    Spelling,
    Grammar,
    Easy,
    Medium,
    Hard,
}

impl QuestionClass {
    const ALL: [QuestionClass; 8] = [
        Self::NotRelevant,
        Self::NotFactoid,
        Self::NotAnswerable,
        Self::Spelling,
        Self::Grammar,
        Self::Easy,
        Self::Medium,
        Self::Hard,
    ];
    const COUNTS: [usize; 8] = [4, 48, 8, 6, 74, 155, 74, 18];

    fn is_good(self) -> bool {
        matches!(self, Self::Easy | Self::Medium | Self::Hard)
    }

    fn path(self) -> Vec<(&'static str, &'static str)> {
        let full = [
            ("relevant", "yes"),
            ("factoid", "yes"),
            ("answerable", "yes"),
            ("spelling_errors", "no"),
            ("grammar_errors", "no"),
        ];
        let (prefix, last) = match self {
            Self::NotRelevant => (0, ("relevant", "no")),
            Self::NotFactoid => (1, ("factoid", "no")),
            Self::NotAnswerable => (2, ("answerable", "no")),
            Self::Spelling => (3, ("spelling_errors", "yes")),
            Self::Grammar => (4, ("grammar_errors", "yes")),
            Self::Easy => (5, ("difficulty", "easy")),
            Self::Medium => (5, ("difficulty", "medium")),
            Self::Hard => (5, ("difficulty", "hard")),
        };
        full[..prefix].iter().copied().chain([last]).collect()
    }

    fn tag(self) -> &'static str {
        match self {
            Self::NotRelevant => "not_relevant",
            Self::NotFactoid => "not_factoid",
            Self::NotAnswerable => "not_answerable",
            Self::Spelling => "spelling_errors",
            Self::Grammar => "grammar_errors",
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
        }
    }

    fn exemplars(self) -> &'static [&'static str] {
        match self {
            Self::NotRelevant => &["Food nutrition tips"],
            Self::NotFactoid => &[
                "About REM sleep, is it the phase that I'm dreaming?",
                "Can you exercise before sleeping?",
                "I often run around campus for 3-5km at night 1-2h before sleeping. Is it good or bad for sleep?",
            ],
            Self::NotAnswerable => &[
                "How long should I be awake during sleep?",
                "How bad would you say is my sleep health like compared to the average?",
            ],
            Self::Spelling => &["How long before bedtime shld i stop screentime?"],
            Self::Grammar => &["How do ensure naps have good quality?", "Why wake up during night?"],
            _ => &[],
        }
    }
}

/// Answer-side paths. `Good*` end in a good composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AnswerPath {
    GoodViaClear,
    ClearInaccurate,
    ClearNotUseful,
    ClearIrrelevant,
    GoodViaExplanation,
    ExplanationInaccurate,
    ExplanationNotUseful,
    ExplanationIrrelevant,
}

impl AnswerPath {
    const GOOD: [AnswerPath; 2] = [Self::GoodViaClear, Self::GoodViaExplanation];
    const GOOD_COUNTS: [usize; 2] = [GOOD_VIA_CLEAR, GOOD_VIA_EXPLANATION];
    const BAD: [AnswerPath; 6] = [
        Self::ClearInaccurate,
        Self::ClearNotUseful,
        Self::ClearIrrelevant,
        Self::ExplanationInaccurate,
        Self::ExplanationNotUseful,
        Self::ExplanationIrrelevant,
    ];
    // 146 - 144; 144 - 107; 230 - 146; 116 - 113; 113 - 84; 157 - 116
    const BAD_COUNTS: [usize; 6] = [2, 37, 84, 3, 29, 41];

    fn clear_path_passes_accuracy(self) -> bool {
        matches!(self, Self::GoodViaClear | Self::ClearNotUseful)
    }

    fn explanation_path_passes_accuracy(self) -> bool {
        matches!(self, Self::GoodViaExplanation | Self::ExplanationNotUseful)
    }

    fn uses_explanation(self) -> bool {
        !matches!(
            self,
            Self::GoodViaClear | Self::ClearInaccurate | Self::ClearNotUseful
        )
    }

    fn path(self, partial: bool) -> Vec<(&'static str, &'static str)> {
        let accuracy = if partial {
            "partially_accurate"
        } else {
            "accurate"
        };
        match self {
            Self::GoodViaClear => vec![
                ("clear", "yes"),
                ("answer_relevant", "yes"),
                ("answer_accuracy", accuracy),
                ("answer_useful", "yes"),
            ],
            Self::ClearInaccurate => {
                vec![
                    ("clear", "yes"),
                    ("answer_relevant", "yes"),
                    ("answer_accuracy", "inaccurate"),
                ]
            }
            Self::ClearNotUseful => vec![
                ("clear", "yes"),
                ("answer_relevant", "yes"),
                ("answer_accuracy", accuracy),
                ("answer_useful", "no"),
            ],
            // relevance of the explanation is judged after an irrelevant
            // short answer and is always "no" on this path
            Self::ClearIrrelevant => {
                vec![
                    ("clear", "yes"),
                    ("answer_relevant", "no"),
                    ("explanation_relevant", "no"),
                ]
            }
            Self::GoodViaExplanation => vec![
                ("clear", "no"),
                ("explanation_relevant", "yes"),
                ("explanation_accuracy", accuracy),
                ("explanation_useful", "yes"),
            ],
            Self::ExplanationInaccurate => {
                vec![
                    ("clear", "no"),
                    ("explanation_relevant", "yes"),
                    ("explanation_accuracy", "inaccurate"),
                ]
            }
            Self::ExplanationNotUseful => vec![
                ("clear", "no"),
                ("explanation_relevant", "yes"),
                ("explanation_accuracy", accuracy),
                ("explanation_useful", "no"),
            ],
            Self::ExplanationIrrelevant => vec![("clear", "no"), ("explanation_relevant", "no")],
        }
    }
}

const MELATONIN: (&str, &str, &str) = (
    "When does melatonin peak?",
    "release of melatonin, the hormone that induces feelings of tiredness and relaxation.",
    "When the sun goes down, your eyes will perceive darkness and signal the scn accordingly. This triggers \
     the release of melatonin, the hormone that induces feelings of tiredness and relaxation. This also causes \
     your core temperature to dip.",
);

struct Plan {
    question: QuestionClass,
    answer: AnswerPath,
    partial: bool,
}

fn plan() -> Vec<Plan> {
    let questions: Vec<QuestionClass> = spread(&QuestionClass::COUNTS)
        .into_iter()
        .map(|k| QuestionClass::ALL[k])
        .collect();

    // output good/bad per input outcome, dealt in item-id order within
    // each input group
    let [a, b, c, d] = targets::TABLE.map(|x| x as usize);
    let mut good_in = spread(&[a, c]).into_iter();
    let mut bad_in = spread(&[b, d]).into_iter();
    let output_good: Vec<bool> = questions
        .iter()
        .map(|q| {
            if q.is_good() {
                good_in.next()
            } else {
                bad_in.next()
            }
            .expect("quota matches")
                == 0
        })
        .collect();

    let mut good_paths = spread(&AnswerPath::GOOD_COUNTS).into_iter();
    let mut bad_paths = spread(&AnswerPath::BAD_COUNTS).into_iter();
    let answers: Vec<AnswerPath> = output_good
        .iter()
        .map(|&g| {
            if g {
                AnswerPath::GOOD[good_paths.next().expect("quota matches")]
            } else {
                AnswerPath::BAD[bad_paths.next().expect("quota matches")]
            }
        })
        .collect();

    let clear_passes = answers
        .iter()
        .filter(|p| p.clear_path_passes_accuracy())
        .count();
    let explanation_passes = answers
        .iter()
        .filter(|p| p.explanation_path_passes_accuracy())
        .count();
    let mut clear_partial =
        spread(&[clear_passes - PARTIAL_CLEAR_PATH, PARTIAL_CLEAR_PATH]).into_iter();
    let mut expl_partial = spread(&[
        explanation_passes - PARTIAL_EXPLANATION_PATH,
        PARTIAL_EXPLANATION_PATH,
    ])
    .into_iter();

    questions
        .into_iter()
        .zip(answers)
        .map(|(question, answer)| {
            let partial = if answer.clear_path_passes_accuracy() {
                clear_partial.next() == Some(1)
            } else if answer.explanation_path_passes_accuracy() {
                expl_partial.next() == Some(1)
            } else {
                false
            };
            Plan {
                question,
                answer,
                partial,
            }
        })
        .collect()
}

fn item_id(i: usize) -> String {
    format!("q{:03}", i + 1)
}

fn coach_id(k: usize) -> String {
    format!("coach{:02}", k + 1)
}

fn items(plans: &[Plan]) -> Vec<Item> {
    let mut exemplar_used = [0usize; 8];
    let mut melatonin_used = false;
    plans
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let id = item_id(i);
            let mut item = Item {
                input_text: format!("Synthetic sleep-health question {id}"),
                output_text: format!("Synthetic short answer for {id}"),
                explanation_text: Some(format!("Synthetic supporting passage for {id}")),
                source_tag: Some(format!("question:{}", p.question.tag())),
                id,
            };
            let k = QuestionClass::ALL
                .iter()
                .position(|q| *q == p.question)
                .expect("listed");
            if let Some(text) = p.question.exemplars().get(exemplar_used[k]) {
                exemplar_used[k] += 1;
                item.input_text = text.to_string();
            } else if !melatonin_used
                && p.question.is_good()
                && p.answer.uses_explanation()
                && matches!(p.answer.path(false)[1], ("explanation_relevant", "yes"))
            {
                melatonin_used = true;
                item.input_text = MELATONIN.0.into();
                item.output_text = MELATONIN.1.into();
                item.explanation_text = Some(MELATONIN.2.into());
            }
            item
        })
        .collect()
}

fn campaign(items: Vec<Item>) -> Campaign {
    let evaluators: Vec<Evaluator> = (0..COACHES)
        .map(|k| Evaluator {
            id: coach_id(k),
            display_name: format!("Health coach {}", k + 1),
            token: format!("{}-token", coach_id(k)),
        })
        .collect();
    let seeded = create_campaign(CampaignConfig {
        id: CAMPAIGN_ID.into(),
        input_tree: MetricTree::question_tree(),
        output_tree: MetricTree::answer_tree(),
        items,
        evaluators,
        redundancy: 1,
        shuffle_seed: SEED,
    })
    .expect("reconstruction config is valid");
    // replace the seeded assignment with round-robin by item id
    let mut doc = seeded.to_document();
    for list in doc.assignments.values_mut() {
        list.clear();
    }
    for (i, item) in doc.items.iter().enumerate() {
        doc.assignments
            .get_mut(&coach_id(i % COACHES))
            .expect("rostered")
            .push(item.id.clone());
    }
    Campaign::from_document(doc).expect("round-robin assignment is valid")
}

/// Fixed synthetic per-judgment time: grows with depth, with a small
/// deterministic jitter.
fn elapsed(item: usize, step: usize) -> f64 {
    3.0 + 1.5 * step as f64 + ((item * 7 + step * 3) % 11) as f64 * 0.25
}

/// The reconstructed campaign and its fully replayed engine; the journal is
/// `engine.journal()`.
pub fn reconstruct_dataset() -> Engine {
    let plans = plan();
    let campaign = Arc::new(campaign(items(&plans)));
    let mut engine = Engine::new(campaign);
    let mut clock = Utc.with_ymd_and_hms(2024, 3, 4, 9, 0, 0).unwrap();
    for (i, p) in plans.iter().enumerate() {
        let sides = [
            (Target::Input, p.question.path()),
            (Target::Output, p.answer.path(p.partial)),
        ];
        for (target, path) in sides {
            for (step, (node, answer)) in path.into_iter().enumerate() {
                let secs = elapsed(i, step);
                clock += Duration::milliseconds((secs * 1000.0) as i64 + 1500);
                let sub = Submission {
                    evaluator_id: coach_id(i % COACHES),
                    item_id: item_id(i),
                    tree_target: target,
                    node_id: node.into(),
                    answer: answer.into(),
                    elapsed_seconds: secs,
                };
                engine
                    .submit(&sub, clock)
                    .expect("planned paths follow the bundled trees");
            }
        }
    }
    engine
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    /// The published figure as printed.
    pub published: String,
    pub expected: f64,
    /// Denominator for figures published as a fraction.
    pub expected_of: Option<u64>,
    pub tolerance: f64,
    pub computed: Option<f64>,
    pub computed_of: Option<u64>,
    pub matched: bool,
    /// Informational claims are reported but do not affect the overall flag.
    pub informational: bool,
}

impl Claim {
    fn count(name: &str, expected: u64, computed: Option<u64>) -> Self {
        Self::fraction(name, (expected, None), computed.map(|c| (c, None)))
    }

    /// A count, optionally with the denominator it was published against;
    /// both parts must match.
    fn fraction(
        name: &str,
        expected: (u64, Option<u64>),
        computed: Option<(u64, Option<u64>)>,
    ) -> Self {
        let published = match expected.1 {
            Some(of) => format!("{}/{of}", expected.0),
            None => expected.0.to_string(),
        };
        Claim {
            name: name.into(),
            published,
            expected: expected.0 as f64,
            expected_of: expected.1,
            tolerance: 0.0,
            computed: computed.map(|c| c.0 as f64),
            computed_of: computed.and_then(|c| c.1),
            matched: computed == Some(expected),
            informational: false,
        }
    }

    fn approx(
        name: &str,
        published: &str,
        expected: f64,
        tolerance: f64,
        computed: Option<f64>,
    ) -> Self {
        Claim {
            name: name.into(),
            published: published.into(),
            expected,
            expected_of: None,
            tolerance,
            computed,
            computed_of: None,
            matched: computed.is_some_and(|c| (c - expected).abs() <= tolerance),
            informational: false,
        }
    }

    fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    fn computed_text(&self) -> String {
        match (self.computed, self.computed_of) {
            (None, _) => "-".into(),
            (Some(v), Some(of)) => format!("{v:.0}/{of}"),
            (Some(v), None) if v.fract() == 0.0 => format!("{v:.0}"),
            (Some(v), None) => format!("{v:.4}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub claims: Vec<Claim>,
    pub overall_pass: bool,
}

impl VerificationReport {
    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Claim> {
        self.claims
            .iter()
            .filter(|c| !c.matched && !c.informational)
    }

    pub fn to_text(&self) -> String {
        let width = self.claims.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.claims {
            let status = match (c.matched, c.informational) {
                (true, _) => "PASS",
                (false, true) => "INFO",
                (false, false) => "FAIL",
            };
            let _ = writeln!(
                out,
                "{status}  {:<width$}  published {:<8}  computed {}",
                c.name,
                c.published,
                c.computed_text()
            );
        }
        let _ = writeln!(
            out,
            "overall: {} ({} of {} counted claims failed)",
            if self.overall_pass { "PASS" } else { "FAIL" },
            self.failed().count(),
            self.claims.iter().filter(|c| !c.informational).count()
        );
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Terminated traversals on `target` whose history contains, for every
/// listed node, one of the listed answers.
fn count_with(engine: &Engine, target: Target, steps: &[(&str, &[&str])]) -> u64 {
    engine
        .traversals()
        .filter(|t| t.tree_target == target && t.is_terminated())
        .filter(|t| {
            steps.iter().all(|(node, answers)| {
                t.history
                    .iter()
                    .any(|h| h.node_id == *node && answers.contains(&h.answer.as_str()))
            })
        })
        .count() as u64
}

/// Recomputes every published figure from the journal and compares. A
/// figure that cannot be computed (nothing judged yet) fails.
pub fn verify_against_paper(engine: &Engine) -> VerificationReport {
    use targets::*;
    let mut claims = Vec::new();

    let funnel_in = scoring::funnel(engine, Target::Input);
    let judged_in = funnel_in.traversals > 0;
    let node_in = |node: &str, answer: &str| {
        let e = funnel_in.entry(node)?;
        judged_in.then(|| {
            (
                e.answer_counts.get(answer).copied().unwrap_or(0),
                Some(e.presented),
            )
        })
    };
    let q_nodes = [
        "relevant",
        "factoid",
        "answerable",
        "spelling_errors",
        "grammar_errors",
        "difficulty",
    ];
    for (node, expected) in q_nodes.iter().zip(QUESTION_FUNNEL) {
        let presented = funnel_in
            .entry(node)
            .map(|e| e.presented)
            .filter(|_| judged_in);
        claims.push(Claim::count(
            &format!("presented.{node}"),
            expected,
            presented,
        ));
    }
    // the published fractions, in the direction they were quoted
    let [_, relevant, factoid, answerable, spelling_ok, good_q] = QUESTION_FUNNEL;
    claims.push(Claim::fraction(
        "relevant",
        (relevant, Some(387)),
        node_in("relevant", "yes"),
    ));
    claims.push(Claim::fraction(
        "factoid",
        (factoid, Some(relevant)),
        node_in("factoid", "yes"),
    ));
    claims.push(Claim::fraction(
        "not_answerable",
        (factoid - answerable, Some(factoid)),
        node_in("answerable", "no"),
    ));
    claims.push(Claim::fraction(
        "spelling_errors",
        (answerable - spelling_ok, Some(answerable)),
        node_in("spelling_errors", "yes"),
    ));
    claims.push(Claim::fraction(
        "grammar_errors",
        (spelling_ok - good_q, Some(spelling_ok)),
        node_in("grammar_errors", "yes"),
    ));

    let difficulty = scoring::difficulty_distribution(engine);
    for (level, expected) in ["easy", "medium", "hard"].iter().zip(DIFFICULTY) {
        let computed = difficulty
            .count(level)
            .filter(|_| difficulty.total > 0)
            .map(|c| (c, Some(difficulty.total)));
        claims.push(Claim::fraction(
            &format!("difficulty.{level}"),
            (expected, Some(GOOD_QUESTIONS)),
            computed,
        ));
    }
    let good_questions = judged_in.then_some((funnel_in.good, Some(funnel_in.traversals)));
    claims.push(Claim::fraction(
        "good_questions",
        (GOOD_QUESTIONS, Some(387)),
        good_questions,
    ));

    let funnel_out = scoring::funnel(engine, Target::Output);
    let judged_out = funnel_out.traversals > 0;
    let of = |n: u64, d: u64| judged_out.then_some((n, Some(d)));
    let count = |steps: &[(&str, &[&str])]| count_with(engine, Target::Output, steps);
    let pass: &[&str] = &["accurate", "partially_accurate"];
    let clear = count(&[("clear", &["yes"])]);
    let unclear = count(&[("clear", &["no"])]);
    let clear_relevant = count(&[("clear", &["yes"]), ("answer_relevant", &["yes"])]);
    let clear_accurate = count(&[("clear", &["yes"]), ("answer_accuracy", pass)]);
    let unclear_relevant = count(&[("clear", &["no"]), ("explanation_relevant", &["yes"])]);
    let unclear_accurate = count(&[("clear", &["no"]), ("explanation_accuracy", pass)]);
    claims.push(Claim::fraction(
        "clear",
        (CLEAR_YES, Some(387)),
        of(clear, funnel_out.traversals),
    ));
    claims.push(Claim::fraction(
        "not_clear",
        (CLEAR_NO, Some(387)),
        of(unclear, funnel_out.traversals),
    ));
    claims.push(Claim::fraction(
        "clear_relevant",
        (CLEAR_RELEVANT, Some(CLEAR_YES)),
        of(clear_relevant, clear),
    ));
    claims.push(Claim::fraction(
        "clear_accurate",
        (CLEAR_ACCURATE, Some(CLEAR_RELEVANT)),
        of(clear_accurate, clear_relevant),
    ));
    claims.push(Claim::count(
        "unclear_explanation_relevant",
        EXPLANATION_RELEVANT,
        judged_out.then_some(unclear_relevant),
    ));
    claims.push(
        Claim::fraction(
            "unclear_explanation_relevant_alt",
            (EXPLANATION_RELEVANT_ALT, Some(CLEAR_NO)),
            of(unclear_relevant, unclear),
        )
        .informational(),
    );
    claims.push(Claim::fraction(
        "unclear_explanation_accurate",
        (EXPLANATION_ACCURATE, Some(EXPLANATION_RELEVANT)),
        of(unclear_accurate, unclear_relevant),
    ));
    claims.push(Claim::fraction(
        "good_answers",
        (GOOD_ANSWERS, Some(387)),
        of(funnel_out.good, funnel_out.traversals),
    ));

    let table = scoring::contingency_table(engine);
    let cells = [
        ("a", table.a),
        ("b", table.b),
        ("c", table.c),
        ("d", table.d),
    ];
    for ((cell, value), expected) in cells.into_iter().zip(TABLE) {
        claims.push(Claim::count(
            &format!("table.{cell}"),
            expected,
            (table.n() > 0).then_some(value),
        ));
    }
    let test = chi_square_2x2(&table, false).ok();
    claims.push(Claim::approx(
        "chi_square.statistic",
        "4.56",
        CHI_SQUARE,
        0.01,
        test.as_ref().map(|t| t.statistic),
    ));
    claims.push(Claim::approx(
        "chi_square.p_value",
        "0.03",
        P_VALUE,
        0.002,
        test.as_ref().map(|t| t.p_value),
    ));

    let time = scoring::time_savings(engine, Target::Input)
        .ok()
        .filter(|t| t.items > 0);
    claims.push(Claim::count(
        "time_savings.hierarchical",
        HIERARCHICAL,
        time.as_ref().map(|t| t.hierarchical_judgments),
    ));
    claims.push(Claim::count(
        "time_savings.flat",
        FLAT,
        time.as_ref().map(|t| t.flat_judgments),
    ));

    let coaches: BTreeSet<&str> = engine
        .journal()
        .iter()
        .map(|r| r.evaluator_id.as_str())
        .collect();
    claims.push(Claim::count(
        "coaches",
        targets::COACHES,
        (!coaches.is_empty()).then_some(coaches.len() as u64),
    ));
    let judged: u64 = scoring::evaluator_summaries(engine)
        .iter()
        .map(|s| s.items_judged_input)
        .sum();
    claims.push(Claim::count(
        "items_judged",
        ITEMS as u64,
        (judged > 0).then_some(judged),
    ));

    let overall_pass = claims.iter().all(|c| c.matched || c.informational);
    VerificationReport {
        claims,
        overall_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::format_journal;

    #[test]
    fn spread_hits_quotas_and_interleaves() {
        let s = spread(&[3, 1]);
        assert_eq!(s, [0, 0, 1, 0]);
        let s = spread(&QuestionClass::COUNTS);
        for (k, want) in QuestionClass::COUNTS.iter().enumerate() {
            assert_eq!(s.iter().filter(|&&x| x == k).count(), *want);
        }
        assert!(spread(&[]).is_empty());
        assert_eq!(spread(&[0, 2]), [1, 1]);
    }

    #[test]
    fn published_arithmetic_is_consistent() {
        use targets::*;
        assert_eq!(QUESTION_FUNNEL[4] - 74, GOOD_QUESTIONS);
        assert_eq!(DIFFICULTY.iter().sum::<u64>(), GOOD_QUESTIONS);
        assert_eq!(TABLE[0] + TABLE[2], GOOD_QUESTIONS);
        assert_eq!(TABLE[0] + TABLE[1], GOOD_ANSWERS);
        assert_eq!(TABLE.iter().sum::<u64>(), ITEMS as u64);
        assert_eq!(CLEAR_YES + CLEAR_NO, ITEMS as u64);
        assert_eq!((GOOD_VIA_CLEAR + GOOD_VIA_EXPLANATION) as u64, GOOD_ANSWERS);
        assert_eq!(QUESTION_FUNNEL.iter().sum::<u64>(), HIERARCHICAL);
        assert_eq!(QuestionClass::COUNTS.iter().sum::<usize>(), ITEMS);
        assert_eq!(
            AnswerPath::BAD_COUNTS.iter().sum::<usize>() as u64,
            ITEMS as u64 - GOOD_ANSWERS
        );
    }

    #[test]
    fn reconstruction_passes_verification() {
        let engine = reconstruct_dataset();
        let report = verify_against_paper(&engine);
        assert!(report.overall_pass, "{}", report.to_text());
        let alt = report.claim("unclear_explanation_relevant_alt").unwrap();
        assert!(alt.informational && !alt.matched);
        assert_eq!(engine.journal().len(), 2000 + 1377);
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let a = reconstruct_dataset();
        let b = reconstruct_dataset();
        assert_eq!(format_journal(a.journal()), format_journal(b.journal()));
        assert_eq!(a.campaign().to_json(), b.campaign().to_json());
    }

    #[test]
    fn round_robin_assignment() {
        let engine = reconstruct_dataset();
        let c = engine.campaign();
        assert_eq!(
            c.assignment("coach01").unwrap()[..2],
            ["q001".to_string(), "q011".to_string()]
        );
        assert!(c
            .assignments()
            .values()
            .all(|v| v.len() == 38 || v.len() == 39));
    }

    #[test]
    fn exemplars_land_on_matching_classes() {
        let engine = reconstruct_dataset();
        let c = engine.campaign();
        let item = c
            .items()
            .iter()
            .find(|i| i.input_text.contains("shld"))
            .unwrap();
        assert_eq!(item.source_tag.as_deref(), Some("question:spelling_errors"));
        let item = c
            .items()
            .iter()
            .find(|i| i.input_text == MELATONIN.0)
            .unwrap();
        let t = engine
            .traversal(
                &item.id,
                &coach_id(c.items().iter().position(|x| x.id == item.id).unwrap() % 10),
                Target::Output,
            )
            .unwrap();
        assert_eq!(t.history[0].answer, "no");
        assert_eq!(t.history[1].answer, "yes");
    }

    #[test]
    fn empty_journal_fails_every_claim() {
        let engine = reconstruct_dataset();
        let empty = engine.as_of(0);
        let report = verify_against_paper(&empty);
        assert!(!report.overall_pass);
        assert!(
            report.claims.iter().all(|c| !c.matched),
            "{}",
            report.to_text()
        );
    }
}
