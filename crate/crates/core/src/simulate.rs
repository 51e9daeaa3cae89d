//! Synthetic evaluators that drive every open traversal to termination.

use std::collections::HashMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::campaign::{CampaignError, Engine, Submission};
use crate::tree::{Label, MetricTree, Route, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Reach a good terminal in as few judgments as possible.
    AllPass,
    /// Reach a bad terminal in as few judgments as possible.
    AllFailRoot,
    /// Uniformly random answer at every node.
    SeededRandom,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::AllPass, Policy::AllFailRoot, Policy::SeededRandom];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::AllPass => "all_pass",
            Policy::AllFailRoot => "all_fail_root",
            Policy::SeededRandom => "seeded_random",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                format!("unknown policy '{s}' (expected all_pass, all_fail_root or seeded_random)")
            })
    }
}

/// Simulated clock start when the journal is empty.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 9, 0, 0).unwrap()
}

/// Answer index per node for the deterministic policies.
struct Chooser {
    choices: HashMap<(Target, Label), HashMap<String, usize>>,
}

impl Chooser {
    fn new(engine: &Engine) -> Self {
        let campaign = engine.campaign();
        let mut choices = HashMap::new();
        for target in Target::BOTH {
            for label in [Label::Good, Label::Bad] {
                choices.insert(
                    (target, label),
                    shortest_paths(campaign.tree(target), label),
                );
            }
        }
        Self { choices }
    }

    fn pick(&self, target: Target, label: Label, node: &str) -> usize {
        self.choices[&(target, label)][node]
    }
}

type Memo = HashMap<String, ((bool, usize), usize)>;

/// For each node, the answer that starts the shortest path to a `goal`
/// terminal (or to any terminal when `goal` is unreachable), first in
/// answer order on ties.
fn shortest_paths(tree: &MetricTree, goal: Label) -> HashMap<String, usize> {
    // cost = (goal unreachable, judgments); trees are acyclic so the
    // memoized recursion terminates
    fn visit(tree: &MetricTree, goal: Label, id: &str, memo: &mut Memo) -> (bool, usize) {
        if let Some((c, _)) = memo.get(id) {
            return *c;
        }
        let node = tree.node(id).expect("validated tree");
        let mut best: Option<((bool, usize), usize)> = None;
        for (i, answer) in node.answers.iter().enumerate() {
            let c = match &node.routes[answer] {
                Route::Terminal(label) => (*label != goal, 1),
                Route::Node(next) => {
                    let (miss, len) = visit(tree, goal, next, memo);
                    (miss, len + 1)
                }
            };
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, i));
            }
        }
        let best = best.expect("nodes have at least two answers");
        memo.insert(id.to_string(), best);
        best.0
    }
    let mut memo = HashMap::new();
    for node in tree.nodes_in_order() {
        visit(tree, goal, &node.id, &mut memo);
    }
    memo.into_iter().map(|(k, (_, i))| (k, i)).collect()
}

/// Drives every evaluator's open traversals to termination, evaluator by
/// evaluator in roster order. Returns the number of judgments committed;
/// the new records are the tail of `engine.journal()`.
pub fn simulate(engine: &mut Engine, policy: Policy, seed: u64) -> Result<usize, CampaignError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chooser = Chooser::new(engine);
    let mut clock = engine
        .journal()
        .last()
        .map_or_else(epoch, |r| r.wall_time.max(epoch()));
    let before = engine.journal().len();
    let roster: Vec<String> = engine
        .campaign()
        .evaluators()
        .iter()
        .map(|e| e.id.clone())
        .collect();
    for ev in roster {
        while let Some(task) = engine.next_task(&ev)? {
            let node = task.node;
            let answer = match policy {
                Policy::AllPass => {
                    node.answers[chooser.pick(task.target, Label::Good, &node.id)].clone()
                }
                Policy::AllFailRoot => {
                    node.answers[chooser.pick(task.target, Label::Bad, &node.id)].clone()
                }
                Policy::SeededRandom => node.answers.choose(&mut rng).expect("non-empty").clone(),
            };
            let elapsed = rng.random_range(2_000u32..20_000) as f64 / 1000.0;
            let sub = Submission {
                evaluator_id: ev.clone(),
                item_id: task.item.id.clone(),
                tree_target: task.target,
                node_id: node.id.clone(),
                answer,
                elapsed_seconds: elapsed,
            };
            clock += Duration::milliseconds((elapsed * 1000.0) as i64);
            engine.submit(&sub, clock)?;
        }
    }
    Ok(engine.journal().len() - before)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{create_campaign, format_journal, CampaignConfig, Evaluator};
    use crate::{scoring, Campaign, Item};
    use std::sync::Arc;

    fn campaign(items: usize, output: MetricTree) -> Arc<Campaign> {
        Arc::new(
            create_campaign(CampaignConfig {
                id: "sim".into(),
                input_tree: MetricTree::question_tree(),
                output_tree: output,
                items: (0..items)
                    .map(|i| Item {
                        id: format!("i{i:02}"),
                        input_text: "q".into(),
                        output_text: "a".into(),
                        explanation_text: None,
                        source_tag: None,
                    })
                    .collect(),
                evaluators: ["a", "b", "c"]
                    .map(|e| Evaluator {
                        id: e.into(),
                        display_name: e.into(),
                        token: format!("tok-{e}"),
                    })
                    .into(),
                redundancy: 1,
                shuffle_seed: 11,
            })
            .unwrap(),
        )
    }

    #[test]
    fn all_pass_is_six_judgments_per_question() {
        let mut engine = Engine::new(campaign(10, MetricTree::answer_tree()));
        simulate(&mut engine, Policy::AllPass, 1).unwrap();
        let t = scoring::time_savings(&engine, Target::Input).unwrap();
        assert_eq!(t.hierarchical_judgments, 60);
        assert!(scoring::composite_outcomes(&engine)
            .values()
            .all(|o| o.is_good()));
    }

    #[test]
    fn all_fail_root_takes_the_shortest_failure() {
        let flat_output = MetricTree::parse(
            r#"{"id":"flat","name":"Flat","target":"output","root":"ok","nodes":[
                {"id":"ok","characteristic":"ok","prompt":"Ok?","answers":["yes","no"],
                 "routes":{"yes":{"terminal":"good"},"no":{"terminal":"bad"}}}]}"#,
        )
        .unwrap();
        let mut engine = Engine::new(campaign(10, flat_output));
        let n = simulate(&mut engine, Policy::AllFailRoot, 1).unwrap();
        assert_eq!(n, 20);
        assert!(scoring::composite_outcomes(&engine)
            .values()
            .all(|o| !o.is_good()));

        // the answer tree's root has no bad terminal: clear=no, then
        // explanation_relevant=no
        let mut engine = Engine::new(campaign(4, MetricTree::answer_tree()));
        simulate(&mut engine, Policy::AllFailRoot, 1).unwrap();
        assert_eq!(
            scoring::time_savings(&engine, Target::Output)
                .unwrap()
                .hierarchical_judgments,
            8
        );
    }

    #[test]
    fn seeded_random_is_deterministic() {
        let run = |seed| {
            let mut engine = Engine::new(campaign(12, MetricTree::answer_tree()));
            simulate(&mut engine, Policy::SeededRandom, seed).unwrap();
            format_journal(engine.journal())
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn resumes_after_partial_journal() {
        let mut engine = Engine::new(campaign(5, MetricTree::answer_tree()));
        simulate(&mut engine, Policy::SeededRandom, 3).unwrap();
        let full = engine.journal().len();
        let mut partial = engine.as_of(7);
        let added = simulate(&mut partial, Policy::SeededRandom, 3).unwrap();
        assert!(added > 0);
        assert!(partial.traversals().all(|t| t.is_terminated()));
        assert!(partial
            .journal()
            .windows(2)
            .all(|w| w[0].wall_time <= w[1].wall_time));
        assert!(full >= 7);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("random".parse::<Policy>().is_err());
    }
}
