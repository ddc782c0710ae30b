mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn train_inline(app: &axum::Router, d: &ppforest_core::Dataset, name: &str, trees: usize) -> String {
    let req = json!({ "name": name, "label": "class", "csv": common::to_csv(d), "trees": trees, "seed": 3, "baseline": true });
    let (s, body) = common::call(app, "POST", "/models", Some(req)).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    common::assert_valid("registryEntry", &body);
    body["model_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn fish_like_model_has_seven_roc_curves() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let d = common::fish_like();
    assert_eq!((d.n(), d.p(), d.n_classes()), (159, 6, 7));
    let id = train_inline(&app, &d, "fish", 100).await;
    let (s, diag) = common::call(&app, "GET", &format!("/models/{id}/diagnostics"), None).await;
    assert_eq!(s, StatusCode::OK);
    common::assert_valid("diagnostics", &diag);
    assert_eq!(diag["roc"].as_array().unwrap().len(), 7);
    let (_, roc) = common::call(&app, "GET", &format!("/models/{id}/roc?class=3"), None).await;
    common::assert_valid("rocResponse", &roc);
    assert_eq!(roc["curves"][0]["class"], 3);
    let (s, _) = common::call(&app, "GET", &format!("/models/{id}/roc?class=trout"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn crab_tree_detail_has_three_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let id = train_inline(&app, &common::crabs(), "crabs", 20).await;
    for k in [0, 7, 19] {
        let (s, t) = common::call(&app, "GET", &format!("/models/{id}/trees/{k}"), None).await;
        assert_eq!(s, StatusCode::OK);
        common::assert_valid("treeDetail", &t);
        let nodes = t["nodes"].as_array().unwrap();
        assert_eq!(nodes.len(), 3);
        for node in nodes {
            let values = node["projection"]["values"].as_array().unwrap();
            assert!(!values.is_empty());
            assert_eq!(values.len(), node["labels"].as_array().unwrap().len());
            let conf = &node["confusion"];
            let total: u64 = conf["left"].as_array().unwrap().iter().chain(conf["right"].as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
            assert_eq!(total as usize, values.len());
        }
        // the root sees every distinct in-bag case
        assert_eq!(nodes[0]["projection"]["case_ids"], t["in_bag"]);
    }
    let (s, e) = common::call(&app, "GET", &format!("/models/{id}/trees/abc"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    common::assert_valid("error", &e);
}

#[tokio::test]
async fn unknown_ids_and_routes_are_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    for uri in ["/models/nope", "/models/nope/diagnostics", "/models/nope/trees/0", "/models/nope/compare", "/models/../x/roc", "/elsewhere"] {
        let (s, body) = common::call(&app, "GET", uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        common::assert_valid("error", &body);
        assert_eq!(body["error"]["code"], "not_found");
    }
}

#[tokio::test]
async fn invalid_train_requests_are_422() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let csv = common::to_csv(&common::crabs());
    let bad = [
        json!({"name": "x", "label": "class"}),
        json!({"name": "x", "label": "class", "csv": csv, "path": "/tmp/y.csv"}),
        json!({"name": "x", "label": "class", "csv": csv, "trees": 0}),
        json!({"name": "x", "label": "class", "csv": csv, "vars_per_node": 6}),
        json!({"name": "x", "label": "class", "csv": csv, "baseline": true, "mtry": 7}),
        json!({"name": "../x", "label": "class", "csv": csv}),
        json!({"name": "x", "label": "nope", "csv": csv}),
        json!({"name": "x", "label": "class", "csv": "a,class\n1,u\n2,u\n"}),
        json!({"name": "x", "label": "class", "csv": csv, "unknown": 1}),
        json!("not an object"),
    ];
    for req in bad {
        let (s, body) = common::call(&app, "POST", "/models", Some(req.clone())).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{req}: {body}");
        common::assert_valid("error", &body);
    }
    let (_, list) = common::call(&app, "GET", "/models", None).await;
    assert_eq!(list["models"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn oversized_training_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let mut csv = String::from("x,class\n");
    for i in 0..50_001 {
        csv.push_str(&format!("{},{}\n", i % 97, if i % 2 == 0 { "a" } else { "b" }));
    }
    let (s, body) = common::call(&app, "POST", "/models", Some(json!({"name": "big", "label": "class", "csv": csv}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "too_large");
}

#[tokio::test]
async fn mds_and_proximity_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let id = train_inline(&app, &common::crabs(), "crabs", 30).await;
    let (_, m) = common::call(&app, "GET", &format!("/models/{id}/mds"), None).await;
    common::assert_valid("mdsResponse", &m);
    assert_eq!(m["mds"]["coords"][0].as_array().unwrap().len(), 3);
    let (_, m) = common::call(&app, "GET", &format!("/models/{id}/mds?d=2&dissimilarity=sqrt_one_minus&mode=oob_only"), None).await;
    common::assert_valid("mdsResponse", &m);
    assert_eq!(m["proximity_mode"], "oob_only");
    for q in ["d=0", "d=200", "d=x", "dissimilarity=bad", "mode=bad"] {
        let (s, body) = common::call(&app, "GET", &format!("/models/{id}/mds?{q}"), None).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{q}");
        common::assert_valid("error", &body);
    }
    // the default MDS matches the one in the diagnostics bundle
    let (_, diag) = common::call(&app, "GET", &format!("/models/{id}/diagnostics"), None).await;
    let (_, m) = common::call(&app, "GET", &format!("/models/{id}/mds?d=3"), None).await;
    assert_eq!(m["mds"], diag["mds"]);

    let req = Request::builder()
        .uri(format!("/models/{id}/proximity"))
        .header("accept-encoding", "gzip")
        .body(Body::empty())
        .unwrap();
    let state = std::sync::Arc::new(ppforest::server::AppState::new(
        ppforest::registry::Registry::open(dir.path()).unwrap(),
        1,
    ));
    let full = ppforest::server::app(state, None).unwrap();
    let resp = full.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-encoding"], "gzip");
}

#[tokio::test]
async fn cors_headers_are_sent() {
    let dir = tempfile::tempdir().unwrap();
    let state = std::sync::Arc::new(ppforest::server::AppState::new(
        ppforest::registry::Registry::open(dir.path()).unwrap(),
        1,
    ));
    let app = ppforest::server::app(state, Some("http://localhost:5173")).unwrap();
    let req = Request::builder().uri("/models").header("origin", "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
}

#[tokio::test]
async fn schema_is_served() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let (s, schema) = common::call(&app, "GET", "/schema", None).await;
    assert_eq!(s, StatusCode::OK);
    let defs = schema["$defs"].as_object().unwrap();
    for def in ["diagnostics", "treeDetail", "registryEntry", "error", "tree"] {
        assert!(defs.contains_key(def));
    }
    let _: Value = schema;
}

#[tokio::test]
async fn models_without_baseline_compare_to_null() {
    let dir = tempfile::tempdir().unwrap();
    let app = common::app(dir.path());
    let req = json!({"name": "solo", "label": "class", "path": common::crabs_path(), "trees": 10});
    let (s, entry) = common::call(&app, "POST", "/models", Some(req)).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = entry["model_id"].as_str().unwrap();
    let (_, cmp) = common::call(&app, "GET", &format!("/models/{id}/compare"), None).await;
    common::assert_valid("compareResponse", &cmp);
    assert!(cmp["rf"].is_null());
}
