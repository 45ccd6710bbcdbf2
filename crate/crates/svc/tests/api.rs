use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use seurat_svc::api::{router, AppState};
use seurat_svc::store::Store;
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    router(AppState::new(Store::open(dir).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn colour(c: usize, side: &str, vs: &[usize]) -> Value {
    json!({ "move": { "type": "colour", "colour": c, "side": side, "vertices": vs } })
}

fn without_events(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("events");
    v
}

#[tokio::test]
async fn session_round_trip_and_replay_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let (s, v) = call(
        &a,
        "POST",
        "/v1/sessions",
        Some(json!({ "g": "K3", "h": "K3", "colours": 2, "human": "forall",
                     "engine": { "kind": "heuristic", "name": "mirror" } })),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["id"].as_str().unwrap().to_string();
    assert_eq!(v["status"]["state"], "live");
    assert_eq!(v["to_move"], "forall");
    assert_eq!(v["round"], 0);

    let mut last_round = 0;
    for (i, vs) in [[0usize].as_slice(), &[1, 2], &[0, 2]].iter().enumerate() {
        let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(i % 2, "G", vs))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        let events = v["events"].as_array().unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0]["actor"], "human");
        assert_eq!(events[1]["actor"], "engine");
        let round = v["round"].as_u64().unwrap();
        assert!(round > last_round);
        last_round = round;
    }

    let (s, hint) = call(&a, "GET", &format!("/v1/sessions/{id}/hint?depth=2"), None).await;
    assert_eq!(s, StatusCode::OK, "{hint}");
    assert_eq!(hint["to_move"], "forall");
    assert!(!hint["hints"].as_array().unwrap().is_empty());

    let (_, before) = call(&a, "GET", &format!("/v1/sessions/{id}"), None).await;
    let restarted = app(dir.path());
    let (s, after) = call(&restarted, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(without_events(before), without_events(after.clone()));
    assert_eq!(after["history"].as_array().unwrap().len(), 3);

    let (s, v) = call(&restarted, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(1, "H", &[1]))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["round"], 4);
}

#[tokio::test]
async fn fig1_strong_engine_opens_on_the_two_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let (s, v) = call(
        &a,
        "POST",
        "/v1/sessions",
        Some(json!({ "g": "fig1#0", "h": "fig1#1", "colours": 1, "variant": { "kind": "strong" },
                     "human": "exists", "engine": { "kind": "solver" } })),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["events"][0]["actor"], "engine");
    assert_eq!(v["events"][0]["move"], json!({ "type": "colour", "colour": 0, "side": "H", "vertices": [6, 7] }));
    assert_eq!(v["pending"], v["events"][0]["move"]);
    assert_eq!(v["to_move"], "exists");
}

#[tokio::test]
async fn invalid_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let base = json!({ "g": "K3", "h": "K3", "colours": 0, "human": "both", "engine": { "kind": "solver" } });
    let (s, v) = call(&a, "POST", "/v1/sessions", Some(base.clone())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert!(v["error"]["message"].as_str().unwrap().contains("colour"));

    let mut extra = base.clone();
    extra["colours"] = json!(1);
    extra["bogus"] = json!(true);
    let (s, _) = call(&a, "POST", "/v1/sessions", Some(extra)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut bad_graph = base.clone();
    bad_graph["colours"] = json!(1);
    bad_graph["g"] = json!({ "format": "seurat-graph-v1", "directed": true, "n": 2, "edges": [[0, 5]] });
    let (s, _) = call(&a, "POST", "/v1/sessions", Some(bad_graph)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, _) = call(&a, "GET", "/v1/sessions/doesnotexist", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let mut ok = base;
    ok["colours"] = json!(1);
    let (_, v) = call(&a, "POST", "/v1/sessions", Some(ok)).await;
    let id = v["id"].as_str().unwrap();
    let (s, _) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(json!({ "answer": [0] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let mut m = colour(0, "G", &[0]);
    m["extra"] = json!(1);
    let (s, _) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(m)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(3, "G", &[0]))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&a, "GET", &format!("/v1/sessions/{id}/hint?depth=2&x=1"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (_, v) = call(&a, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(v["round"], 0);
    assert!(v["pending"].is_null());
}

#[tokio::test]
async fn not_your_turn_and_finished_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let (_, v) = call(
        &a,
        "POST",
        "/v1/sessions",
        Some(json!({ "g": "K2", "h": "K3", "colours": 1, "human": "both", "engine": { "kind": "solver" } })),
    )
    .await;
    let id = v["id"].as_str().unwrap().to_string();
    let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(json!({ "answer": [] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(0, "H", &[0, 1, 2]))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["to_move"], "exists");
    let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(json!({ "answer": [] }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"]["state"], "won_by_forall");
    assert_eq!(v["status"]["round"], 1);
    assert!(!v["events"][0]["triggers"].as_array().unwrap().is_empty());
    let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(0, "G", &[0]))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "session_finished");
    let (s, _) = call(&a, "GET", &format!("/v1/sessions/{id}/hint"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (_, v) = call(
        &a,
        "POST",
        "/v1/sessions",
        Some(json!({ "g": "K3", "h": "K3", "colours": 1, "human": "exists",
                     "engine": { "kind": "heuristic", "name": "greedy_spectrum" } })),
    )
    .await;
    let id = v["id"].as_str().unwrap().to_string();
    assert_eq!(v["to_move"], "exists");
    let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(0, "G", &[0]))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "not_your_turn");
}

#[tokio::test]
async fn engine_punishes_size_mismatched_answers() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let path = json!({ "format": "seurat-graph-v1", "directed": true, "n": 3, "edges": [[0, 1], [1, 2]] });
    let (s, v) = call(
        &a,
        "POST",
        "/v1/sessions",
        Some(json!({ "g": path, "h": "C3", "colours": 2, "human": "exists", "engine": { "kind": "solver" } })),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["id"].as_str().unwrap().to_string();
    let mut state = v;
    for _ in 0..10 {
        if state["status"]["state"] != "live" {
            break;
        }
        let mv = &state["pending"];
        let size = mv["vertices"].as_array().unwrap().len();
        let answer: Vec<usize> = if size == 0 { vec![0] } else { (0..3).take(size - 1).collect() };
        let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(json!({ "answer": answer }))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        state = v;
    }
    assert_eq!(state["status"]["state"], "won_by_forall", "{state}");
}

#[tokio::test]
async fn ramachandran_hint_ranks_blue_v4_on_top() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let (_, v) = call(
        &a,
        "POST",
        "/v1/sessions",
        Some(json!({ "g": "ramachandran#0", "h": "ramachandran#1", "colours": 2, "human": "both",
                     "engine": { "kind": "solver" } })),
    )
    .await;
    let id = v["id"].as_str().unwrap().to_string();
    call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(colour(0, "G", &[5]))).await;
    let (s, v) = call(&a, "POST", &format!("/v1/sessions/{id}/moves"), Some(json!({ "answer": [3] }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"]["state"], "live");
    let (s, hint) = call(&a, "GET", &format!("/v1/sessions/{id}/hint"), None).await;
    assert_eq!(s, StatusCode::OK, "{hint}");
    assert_eq!(hint["source"], "attractor");
    let hints = hint["hints"].as_array().unwrap();
    let blue_v4 = json!({ "type": "colour", "colour": 1, "side": "G", "vertices": [4] });
    let h = hints.iter().find(|h| h["mv"] == blue_v4).expect("blue v4 ranked");
    assert_eq!(h["rank"], 1);
    assert_eq!(h["evaluation"], json!({ "kind": "wins", "rounds": 1 }));
    assert_eq!(h["certified"], true);
}

async fn poll(a: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (s, v) = call(a, "GET", &format!("/v1/analyses/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if v["state"] == "done" || v["state"] == "failed" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("analysis {id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn analyses_are_cached_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let reqs = [
        json!({ "kind": "spectra", "graph": "fig6" }),
        json!({ "kind": "wl", "g": "cfi:3", "h": "cfi~:3", "k": 1 }),
        json!({ "kind": "iso", "g": "stars#0", "h": "stars#1" }),
        json!({ "kind": "deck", "g": "fig6", "h": "fig7" }),
        json!({ "kind": "solve", "g": "stockmeyer:D:2:1", "h": "stockmeyer*:D:2:1", "colours": 2 }),
        json!({ "kind": "verify", "g": "stars#0", "h": "stars#1", "colours": 2, "strategy": "stars",
                "adversary": { "mode": "filtered_exhaustive", "filter": { "rules": ["S1", "S4"] }, "depth": 3 } }),
        json!({ "kind": "search", "scope": { "max_n": 2, "colours": 1, "loops": true,
                                              "variant": { "kind": "plain" } } }),
    ];
    for r in reqs {
        let (s, first) = call(&a, "POST", "/v1/analyses", Some(r.clone())).await;
        assert!(s == StatusCode::ACCEPTED || s == StatusCode::OK, "{first}");
        let id = first["id"].as_str().unwrap().to_string();
        let done = poll(&a, &id).await;
        assert_eq!(done["state"], "done", "{done}");

        let fresh = app(dir.path());
        let (s, again) = call(&fresh, "POST", "/v1/analyses", Some(r.clone())).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(again["id"], id);
        assert_eq!(again["cached"], true);
        assert_eq!(
            serde_json::to_vec(&again["result"]).unwrap(),
            serde_json::to_vec(&done["result"]).unwrap(),
            "{r}"
        );
        if r["kind"] == "solve" {
            assert_eq!(done["result"]["summary"]["winner"], "forall");
        }
    }
    let (s, _) = call(&a, "POST", "/v1/analyses", Some(json!({ "kind": "wl", "g": "K3", "k": 0 }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&a, "POST", "/v1/analyses", Some(json!({ "kind": "nope" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&a, "GET", "/v1/analyses/unknown", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
