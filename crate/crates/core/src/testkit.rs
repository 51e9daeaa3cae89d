//! Random valid trees and campaigns for property tests.
//!
//! Everything here is a deterministic function of its seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::campaign::{
    create_campaign, format_journal, Campaign, CampaignConfig, Engine, Evaluator, Item,
};
use crate::report::{self, ReportKind};
use crate::scoring;
use crate::tree::{Label, MetricTree, NodeDefinition, Route, RouteTarget, Target, TreeDefinition};

/// A random acyclic tree with 1 to `max_nodes` nodes, 2 to 5 answers per
/// node and every node reachable from the root. Routes only point forward
/// in node order, which rules out cycles.
pub fn random_tree(rng: &mut impl Rng, target: Target, max_nodes: usize) -> MetricTree {
    let n = rng.random_range(1..=max_nodes.max(1));
    let mut answers: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let mut routes: Vec<BTreeMap<usize, Route>> = vec![BTreeMap::new(); n];
    // spanning links first, so every node has a parent
    for child in 1..n {
        let parent = rng.random_range(0..child);
        if routes[parent].len() == answers[parent] {
            answers[parent] += 1;
        }
        let free = (0..answers[parent])
            .find(|a| !routes[parent].contains_key(a))
            .expect("a free slot");
        routes[parent].insert(free, Route::Node(format!("n{child}")));
    }
    for (i, node_routes) in routes.iter_mut().enumerate() {
        for a in 0..answers[i] {
            node_routes
                .entry(a)
                .or_insert_with(|| match rng.random_range(0..4) {
                    0 if i + 1 < n => Route::Node(format!("n{}", rng.random_range(i + 1..n))),
                    0 | 1 => Route::Terminal(Label::Good),
                    _ => Route::Terminal(Label::Bad),
                });
        }
    }
    let nodes = routes
        .into_iter()
        .enumerate()
        .map(|(i, r)| NodeDefinition {
            id: format!("n{i}"),
            characteristic: format!("characteristic {i}"),
            prompt: format!("Question {i}?"),
            answers: (0..r.len()).map(|a| format!("a{a}")).collect(),
            routes: r
                .into_iter()
                .map(|(a, route)| (format!("a{a}"), route))
                .collect(),
            help: BTreeMap::new(),
            show_explanation: false,
        })
        .collect();
    MetricTree::from_definition(TreeDefinition {
        id: format!("random_{target}"),
        name: "Random tree".into(),
        target,
        root: "n0".into(),
        notes: None,
        nodes,
    })
    .expect("generated trees are valid")
}

/// A random campaign of 1 to `max_items` items. Trees are the bundled ones
/// or random, evaluators 1 to 4, redundancy up to 2.
pub fn random_campaign(seed: u64, max_items: usize) -> Campaign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input_tree, output_tree) = if rng.random_bool(0.5) {
        (MetricTree::question_tree(), MetricTree::answer_tree())
    } else {
        (
            random_tree(&mut rng, Target::Input, 7),
            random_tree(&mut rng, Target::Output, 7),
        )
    };
    let items = rng.random_range(1..=max_items.max(1));
    let evaluators = rng.random_range(1..=4usize);
    let redundancy = rng.random_range(1..=evaluators.min(2));
    create_campaign(CampaignConfig {
        id: format!("random-{seed}"),
        input_tree,
        output_tree,
        items: (0..items)
            .map(|i| Item {
                id: format!("item{i:03}"),
                input_text: format!("input {i}"),
                output_text: format!("output {i}"),
                explanation_text: Some(format!("explanation {i}")),
                source_tag: None,
            })
            .collect(),
        evaluators: (0..evaluators)
            .map(|e| Evaluator {
                id: format!("ev{e}"),
                display_name: format!("Evaluator {e}"),
                token: format!("token-{e}"),
            })
            .collect(),
        redundancy,
        shuffle_seed: seed,
    })
    .expect("generated campaigns are valid")
}

/// Replaying any prefix of the journal reproduces the snapshot at that
/// sequence number, down to the rendered reports.
pub fn check_replay_prefixes(engine: &Engine, prefixes: &[usize]) -> Result<(), String> {
    let journal = engine.journal();
    let full = Engine::replay(engine.campaign_arc().clone(), journal)
        .map_err(|e| format!("full replay failed: {e}"))?;
    if format_journal(full.journal()) != format_journal(journal)
        || full.traversal_map() != engine.traversal_map()
    {
        return Err("full replay differs from the live engine".into());
    }
    for &k in prefixes {
        let k = k.min(journal.len());
        let replayed = Engine::replay(engine.campaign_arc().clone(), &journal[..k])
            .map_err(|e| format!("prefix {k} failed to replay: {e}"))?;
        let snapshot = engine.as_of(k as u64);
        if replayed.traversal_map() != snapshot.traversal_map() {
            return Err(format!("prefix {k}: traversal states differ"));
        }
        for kind in ReportKind::ALL {
            if report::build(&replayed, kind).to_json() != report::build(&snapshot, kind).to_json()
            {
                return Err(format!("prefix {k}: {kind} report differs"));
            }
        }
    }
    Ok(())
}

/// Funnel bookkeeping: per-node sums, flow along pass edges, and agreement
/// with composite outcomes and time savings.
pub fn check_funnel_conservation(engine: &Engine) -> Result<(), String> {
    let outcomes = scoring::composite_outcomes(engine);
    for target in Target::BOTH {
        let tree = engine.campaign().tree(target);
        let f = scoring::funnel(engine, target);
        for e in &f.entries {
            let answered: u64 = e.answer_counts.values().sum();
            if e.presented != answered || e.presented != e.terminated_here + e.continued {
                return Err(format!(
                    "{target} {}: presented {} does not balance",
                    e.node_id, e.presented
                ));
            }
            if e.node_id != tree.root() {
                let routed = scoring::routed_into(&f, tree, &e.node_id);
                if routed != e.presented {
                    return Err(format!(
                        "{target} {}: presented {} but {routed} routed in",
                        e.node_id, e.presented
                    ));
                }
            }
        }
        let root = f.entry(tree.root()).map_or(0, |e| e.presented);
        let ended: u64 = f.entries.iter().map(|e| e.terminated_here).sum();
        if root != f.traversals || ended != f.traversals {
            return Err(format!(
                "{target}: root {root}, terminations {ended}, traversals {}",
                f.traversals
            ));
        }
        let good = outcomes
            .iter()
            .filter(|(k, o)| k.target == target && o.is_good())
            .count() as u64;
        let good_terminals: u64 = f.entries.iter().map(|e| e.terminated_good).sum();
        if good != f.good || good != good_terminals {
            return Err(format!(
                "{target}: good {good} vs funnel {} vs terminals {good_terminals}",
                f.good
            ));
        }
        if let Ok(t) = scoring::time_savings(engine, target) {
            if t.hierarchical_judgments != f.total_presented()
                || t.hierarchical_judgments > t.flat_judgments
            {
                return Err(format!("{target}: time savings disagree with the funnel"));
            }
        }
    }
    Ok(())
}

/// Every traversal follows the tree from the root, stops at the first
/// terminal, and nothing is recorded after it stops.
pub fn check_early_termination(engine: &Engine) -> Result<(), String> {
    let mut per_traversal: BTreeMap<(String, String, Target), usize> = BTreeMap::new();
    for r in engine.journal() {
        *per_traversal
            .entry((r.item_id.clone(), r.evaluator_id.clone(), r.tree_target))
            .or_default() += 1;
    }
    for t in engine.traversals() {
        let tree = engine.campaign().tree(t.tree_target);
        let key = (t.item_id.clone(), t.evaluator_id.clone(), t.tree_target);
        if per_traversal.get(&key).copied().unwrap_or(0) != t.history.len() {
            return Err(format!("{key:?}: journal and history lengths differ"));
        }
        let mut expected = Some(tree.root().to_string());
        let mut ended = None;
        for h in &t.history {
            let Some(node) = expected.take() else {
                return Err(format!(
                    "{key:?}: judgment at {} after termination",
                    h.node_id
                ));
            };
            if h.node_id != node {
                return Err(format!(
                    "{key:?}: judged {} where {node} was due",
                    h.node_id
                ));
            }
            match tree
                .route(&h.node_id, &h.answer)
                .map_err(|e| e.to_string())?
            {
                RouteTarget::Node(next) => expected = Some(next),
                RouteTarget::Terminal(outcome) => ended = Some(outcome),
            }
        }
        if ended != t.outcome || t.is_terminated() != ended.is_some() {
            return Err(format!("{key:?}: outcome does not match the last route"));
        }
        if !t.is_terminated() && t.current_node != expected {
            return Err(format!("{key:?}: current node is not the routed node"));
        }
    }
    Ok(())
}

/// Every terminated traversal is one of the tree's enumerated paths, and
/// enumerated paths use every (node, answer) pair.
pub fn check_path_coverage(engine: &Engine) -> Result<(), String> {
    // (steps, failed_at) identifies a path
    type PathKey = (Vec<(String, String)>, Option<String>);
    for target in Target::BOTH {
        let tree = engine.campaign().tree(target);
        let paths = tree.enumerate_paths();
        let known: BTreeSet<PathKey> = paths
            .iter()
            .map(|p| (p.steps.clone(), p.outcome.failed_at.clone()))
            .collect();
        let used: BTreeSet<(&str, &str)> = paths
            .iter()
            .flat_map(|p| p.steps.iter().map(|(n, a)| (n.as_str(), a.as_str())))
            .collect();
        let pairs: usize = tree.nodes_in_order().map(|n| n.answers.len()).sum();
        if used.len() != pairs {
            return Err(format!(
                "{target}: paths use {} of {pairs} answers",
                used.len()
            ));
        }
        for t in engine
            .traversals()
            .filter(|t| t.tree_target == target && t.is_terminated())
        {
            let steps: Vec<(String, String)> = t
                .history
                .iter()
                .map(|h| (h.node_id.clone(), h.answer.clone()))
                .collect();
            let failed = t.outcome.as_ref().and_then(|o| o.failed_at.clone());
            if !known.contains(&(steps, failed)) {
                return Err(format!(
                    "{target}: traversal of {} is not an enumerated path",
                    t.item_id
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_trees_are_valid_and_varied() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sizes: Vec<usize> = (0..50)
            .map(|_| random_tree(&mut rng, Target::Input, 8).node_count())
            .collect();
        assert!(sizes.contains(&1));
        assert!(sizes.iter().any(|&s| s >= 5));
    }

    #[test]
    fn checks_pass_on_the_case_study() {
        let engine = crate::casestudy::reconstruct_dataset();
        check_replay_prefixes(&engine, &[0, 1, 1000]).unwrap();
        check_funnel_conservation(&engine).unwrap();
        check_early_termination(&engine).unwrap();
        check_path_coverage(&engine).unwrap();
    }

    #[test]
    fn campaigns_are_deterministic() {
        assert_eq!(
            random_campaign(4, 50).to_json(),
            random_campaign(4, 50).to_json()
        );
    }
}
