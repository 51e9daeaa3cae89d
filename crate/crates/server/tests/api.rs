use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use hiereval::campaign::{create_campaign, CampaignConfig, Engine, Evaluator, Item};
use hiereval::report::{self, ReportKind};
use hiereval::store::CampaignDir;
use hiereval::MetricTree;
use hiereval_server::{router, AppState, CampaignHandle};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

fn config(items: usize, evaluators: usize) -> CampaignConfig {
    CampaignConfig {
        id: "demo".into(),
        input_tree: MetricTree::question_tree(),
        output_tree: MetricTree::answer_tree(),
        items: (0..items)
            .map(|i| Item {
                id: format!("q{i:03}"),
                input_text: format!("question {i}"),
                output_text: format!("answer {i}"),
                explanation_text: Some(format!("because {i}")),
                source_tag: None,
            })
            .collect(),
        evaluators: (0..evaluators)
            .map(|e| Evaluator {
                id: format!("ev{e}"),
                display_name: format!("Evaluator {e}"),
                token: format!("tok{e}"),
            })
            .collect(),
        redundancy: 1,
        shuffle_seed: 7,
    }
}

/// A served campaign backed by a directory, so the journal file can be
/// inspected afterwards.
fn served(items: usize, evaluators: usize) -> (tempfile::TempDir, CampaignDir, Router) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = CampaignDir::new(tmp.path().join("demo"));
    dir.create(&create_campaign(config(items, evaluators)).unwrap())
        .unwrap();
    let state = AppState::open(std::slice::from_ref(&dir)).unwrap();
    (tmp, dir, router(state))
}

async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Bytes) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes())
}

fn json_of(bytes: &Bytes) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn next(app: &Router, token: &str) -> Value {
    let (status, body) = call(app, "GET", "/campaigns/demo/next", Some(token), None).await;
    assert_eq!(status, StatusCode::OK);
    json_of(&body)
}

fn judgment(key: &str, task: &Value, answer: &str) -> Value {
    json!({
        "idempotency_key": key,
        "item_id": task["item"]["id"],
        "tree_target": task["tree_target"],
        "node_id": task["node"]["id"],
        "answer": answer,
        "elapsed_seconds": 4.25,
    })
}

async fn post(app: &Router, token: &str, body: Value) -> (StatusCode, Bytes) {
    call(
        app,
        "POST",
        "/campaigns/demo/judgments",
        Some(token),
        Some(body),
    )
    .await
}

fn journal_lines(dir: &CampaignDir) -> usize {
    dir.read_journal().unwrap().len()
}

#[tokio::test]
async fn fresh_campaign_starts_at_relevance() {
    let (_tmp, _dir, app) = served(3, 1);
    let task = next(&app, "tok0").await;
    assert_eq!(task["status"], "task");
    assert_eq!(task["tree_target"], "input");
    assert_eq!(task["node"]["id"], "relevant");
    assert_eq!(task["node"]["answers"], json!(["yes", "no"]));
    assert!(task["item"].get("explanation_text").is_none());
    assert_eq!(task["progress"]["traversals_remaining"], 6);
    assert_eq!(task["progress"]["items_total"], 3);
}

#[tokio::test]
async fn tokens_and_campaigns_are_checked() {
    let (_tmp, _dir, app) = served(1, 1);
    let (status, body) = call(&app, "GET", "/campaigns/demo/next", Some("nope"), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(json_of(&body)["error"]["code"], "unauthorized");
    let (status, _) = call(&app, "GET", "/campaigns/demo/next", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, body) = call(&app, "GET", "/campaigns/other/next", Some("tok0"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["error"]["code"], "campaign_not_found");
    let (status, _) = call(
        &app,
        "GET",
        "/campaigns/demo/reports/funnel_input",
        Some("x"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn no_at_the_root_terminates_bad() {
    let (_tmp, dir, app) = served(2, 1);
    let task = next(&app, "tok0").await;
    let (status, body) = post(&app, "tok0", judgment("k1", &task, "no")).await;
    assert_eq!(status, StatusCode::OK);
    let res = json_of(&body);
    assert_eq!(res["status"], "terminated");
    assert_eq!(res["outcome"]["label"], "bad");
    assert_eq!(res["outcome"]["failed_at"], "relevant");
    assert_eq!(res["sequence_no"], 1);
    assert_eq!(journal_lines(&dir), 1);
    // the same item's output side is next
    let task2 = next(&app, "tok0").await;
    assert_eq!(task2["item"]["id"], task["item"]["id"]);
    assert_eq!(task2["tree_target"], "output");
    assert_eq!(task2["progress"]["judgments_this_item"], 1);
}

#[tokio::test]
async fn duplicate_retry_returns_the_same_response_once() {
    let (_tmp, dir, app) = served(2, 1);
    let task = next(&app, "tok0").await;
    let first = post(&app, "tok0", judgment("k1", &task, "yes")).await;
    let again = post(&app, "tok0", judgment("k1", &task, "yes")).await;
    assert_eq!(first, again);
    assert_eq!(json_of(&first.1)["next_node_id"], "factoid");
    assert_eq!(journal_lines(&dir), 1);

    // the same key for a different judgment is refused
    let (status, body) = post(&app, "tok0", judgment("k1", &task, "no")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"]["code"], "idempotency_key_reused");
}

#[tokio::test]
async fn validation_errors_name_the_field() {
    let (_tmp, dir, app) = served(1, 1);
    let task = next(&app, "tok0").await;
    let (status, body) = post(&app, "tok0", judgment("k1", &task, "maybe")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let err = json_of(&body);
    assert_eq!(err["error"]["code"], "validation");
    assert_eq!(err["error"]["field"], "answer");

    let mut missing = judgment("k2", &task, "yes");
    missing.as_object_mut().unwrap().remove("elapsed_seconds");
    let (status, body) = post(&app, "tok0", missing).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["error"]["field"], "elapsed_seconds");

    let mut other = judgment("k3", &task, "yes");
    other["item_id"] = "q999".into();
    let (status, body) = post(&app, "tok0", other).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["error"]["field"], "item_id");
    assert_eq!(journal_lines(&dir), 0);
}

#[tokio::test]
async fn stale_and_finished_traversals_conflict() {
    let (_tmp, dir, app) = served(1, 1);
    let task = next(&app, "tok0").await;
    post(&app, "tok0", judgment("k1", &task, "yes")).await;
    // a second tab still showing the root
    let (status, body) = post(&app, "tok0", judgment("k2", &task, "yes")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"]["code"], "stale_node");

    let task = next(&app, "tok0").await;
    post(&app, "tok0", judgment("k3", &task, "no")).await;
    let (status, body) = post(&app, "tok0", judgment("k4", &task, "no")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["error"]["code"], "already_terminated");
    assert_eq!(journal_lines(&dir), 2);
}

#[tokio::test]
async fn explanation_text_only_on_explanation_nodes() {
    let (_tmp, _dir, app) = served(1, 1);
    let task = next(&app, "tok0").await;
    post(&app, "tok0", judgment("k1", &task, "no")).await;
    let clear = next(&app, "tok0").await;
    assert_eq!(clear["node"]["id"], "clear");
    assert!(clear["item"].get("explanation_text").is_none());
    post(&app, "tok0", judgment("k2", &clear, "no")).await;
    let explanation = next(&app, "tok0").await;
    assert_eq!(explanation["node"]["id"], "explanation_relevant");
    assert_eq!(explanation["item"]["explanation_text"], "because 0");
}

#[tokio::test]
async fn finished_evaluator_gets_done() {
    let (_tmp, _dir, app) = served(1, 1);
    for (i, answer) in ["no", "no", "no"].into_iter().enumerate() {
        let task = next(&app, "tok0").await;
        post(&app, "tok0", judgment(&format!("k{i}"), &task, answer)).await;
    }
    let done = next(&app, "tok0").await;
    assert_eq!(done["status"], "done");
    assert_eq!(done["progress"]["items_done"], 1);
    assert_eq!(done["progress"]["traversals_remaining"], 0);
    assert_eq!(done["progress"]["judgments_made"], 3);
    assert_eq!(done["progress"]["mean_elapsed_seconds"], 4.25);
}

#[tokio::test]
async fn reports_match_the_offline_rendering() {
    let (_tmp, dir, app) = served(4, 2);
    for (i, answer) in ["yes", "yes", "no"].into_iter().enumerate() {
        let task = next(&app, "tok1").await;
        post(&app, "tok1", judgment(&format!("k{i}"), &task, answer)).await;
    }
    let offline = dir.load_engine(None).unwrap();
    for kind in ReportKind::ALL {
        let uri = format!("/campaigns/demo/reports/{kind}");
        let (status, body) = call(&app, "GET", &uri, Some("tok0"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(
            body,
            report::build(&offline, kind).to_json().as_bytes(),
            "{kind}"
        );
    }
    let (status, body) = call(
        &app,
        "GET",
        "/campaigns/demo/reports/foo",
        Some("tok0"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"]["code"], "unknown_report_kind");
}

#[tokio::test]
async fn unknown_paths_get_structured_errors() {
    let (_tmp, _dir, app) = served(1, 1);
    let (status, body) = call(&app, "GET", "/nowhere", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["error"]["code"], "not_found");
}

/// A client on a bad network: every request may be sent twice, and old
/// requests are replayed late, after later ones went through.
async fn flaky_session(app: Router, token: String, seed: u64) -> BTreeMap<String, Bytes> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sent: Vec<(String, Value)> = Vec::new();
    let mut responses: BTreeMap<String, Bytes> = BTreeMap::new();
    for n in 0.. {
        let task = next(&app, &token).await;
        if task["status"] == "done" {
            break;
        }
        let answers = task["node"]["answers"].as_array().unwrap().clone();
        let answer = answers[rng.random_range(0..answers.len())]
            .as_str()
            .unwrap()
            .to_string();
        let key = format!("{token}-{n}");
        let body = judgment(&key, &task, &answer);
        let (status, bytes) = post(&app, &token, body.clone()).await;
        assert_eq!(
            status,
            StatusCode::OK,
            "{}",
            String::from_utf8_lossy(&bytes)
        );
        if rng.random_bool(0.3) {
            assert_eq!(
                post(&app, &token, body.clone()).await,
                (status, bytes.clone())
            );
        }
        if !sent.is_empty() && rng.random_bool(0.3) {
            let (old_key, old_body) = &sent[rng.random_range(0..sent.len())];
            let (status, late) = post(&app, &token, old_body.clone()).await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(&late, &responses[old_key]);
        }
        responses.insert(key.clone(), bytes);
        sent.push((key, body));
    }
    responses
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn retries_under_concurrency_leave_one_record_per_judgment() {
    for seed in 0..4u64 {
        let (_tmp, dir, app) = served(12, 3);
        let sessions: Vec<_> = (0..3)
            .map(|e| tokio::spawn(flaky_session(app.clone(), format!("tok{e}"), seed * 10 + e)))
            .collect();
        let mut keys = 0;
        for s in sessions {
            keys += s.await.unwrap().len();
        }
        let records = dir.read_journal().unwrap();
        assert_eq!(records.len(), keys);
        assert!(records
            .iter()
            .enumerate()
            .all(|(i, r)| r.sequence_no == i as u64 + 1));

        // the file alone reproduces what was served
        let replayed = Engine::replay(Arc::new(dir.load_campaign().unwrap()), &records).unwrap();
        assert!(replayed.traversals().all(|t| t.is_terminated()));
        for kind in ReportKind::ALL {
            let uri = format!("/campaigns/demo/reports/{kind}");
            let (_, body) = call(&app, "GET", &uri, Some("tok0"), None).await;
            assert_eq!(body, report::build(&replayed, kind).to_json().as_bytes());
        }
    }
}

#[tokio::test]
async fn mid_campaign_funnel_balances() {
    let engine = Engine::new(Arc::new(create_campaign(config(5, 1)).unwrap()));
    let app = router(AppState::new([CampaignHandle::in_memory(engine)]).unwrap());
    for (i, answer) in ["yes", "yes", "yes", "no", "yes"].into_iter().enumerate() {
        let task = next(&app, "tok0").await;
        post(&app, "tok0", judgment(&format!("k{i}"), &task, answer)).await;
    }
    let (_, body) = call(
        &app,
        "GET",
        "/campaigns/demo/reports/funnel_input",
        Some("tok0"),
        None,
    )
    .await;
    let report = json_of(&body);
    assert_eq!(report["as_of_sequence_no"], 5);
    for e in report["report"]["entries"].as_array().unwrap() {
        let answered: u64 = e["answer_counts"]
            .as_object()
            .unwrap()
            .values()
            .map(|v| v.as_u64().unwrap())
            .sum();
        let presented = e["presented"].as_u64().unwrap();
        assert_eq!(presented, answered);
        assert_eq!(
            presented,
            e["terminated_here"].as_u64().unwrap() + e["continued"].as_u64().unwrap()
        );
    }
}
