#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ppforest::registry::Registry;
use ppforest::schema::schema_for;
use ppforest::server::{router, AppState};
use ppforest_core::{Dataset, Matrix};
use serde_json::Value;
use tower::ServiceExt;

pub fn crabs_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/crabs.csv")
}

pub fn crabs() -> Dataset {
    ppforest::io::load_csv(crabs_path(), "class").expect("crabs.csv loads")
}

/// Synthetic 159 × 6 data with 7 unevenly sized classes.
pub fn fish_like() -> Dataset {
    use rand::{Rng, SeedableRng};
    let sizes = [35, 11, 20, 14, 56, 17, 6];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(159);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &m) in sizes.iter().enumerate() {
        let centre: Vec<f64> = (0..6).map(|j| ((c * 7 + j * 3) % 11) as f64 * 1.5).collect();
        for _ in 0..m {
            rows.push(centre.iter().map(|mu| mu + rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
            labels.push(format!("species{c}"));
        }
    }
    let names = ["Weight", "Length1", "Length2", "Length3", "Height", "Width"].map(String::from).to_vec();
    Dataset::from_labels(Matrix::from_rows(&rows).unwrap(), &labels, names).unwrap()
}

pub fn to_csv(d: &Dataset) -> String {
    let mut s = d.var_names().join(",");
    s.push_str(",class\n");
    for i in 0..d.n() {
        for v in d.row(i) {
            s.push_str(&format!("{v},"));
        }
        s.push_str(&d.class_names()[d.labels()[i]]);
        s.push('\n');
    }
    s
}

/// Schema errors of `instance` against payload type `def`; empty when valid.
pub fn schema_errors(def: &str, instance: &Value) -> Vec<String> {
    let schema = schema_for(def).unwrap_or_else(|| panic!("no schema definition `{def}`"));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}

pub fn assert_valid(def: &str, instance: &Value) {
    let errors = schema_errors(def, instance);
    assert!(errors.is_empty(), "{def}: {errors:?}");
}

pub fn app(registry: &std::path::Path) -> Router {
    let state = Arc::new(AppState::new(Registry::open(registry).unwrap(), 2));
    router(state)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}
