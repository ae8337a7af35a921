#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use geosieve::scenario::{generate_synthetic, load_scenario, write_scenario, GroundTruth, Scenario, SyntheticParams};
use geosieve_service::api::{router, AppState};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const PARITY_EXPRS: [&str; 5] = [
    "within_polygon(park)",
    "near(red > 0.3, min=10, max=60) & grad(elevation) > 0.2",
    "near(red > 0.6, min=10, max=60, metric=chebyshev) & !within_polygon(park)",
    "bearing(grad(elevation) > 0.5, min=270, max=90) | blue < 0.2",
    "(green >= 0.5 | red > 0.7) & near(grad(elevation) > 0.3, max=100, close=20)",
];

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub scenario: Scenario,
    pub truth: GroundTruth,
}

pub fn fixture(seed: u64, size: usize) -> Fixture {
    let (s, truth) = generate_synthetic(seed, size, &SyntheticParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_scenario(dir.path(), &s).unwrap();
    let scenario = load_scenario(&manifest).unwrap();
    Fixture {
        dir,
        manifest,
        scenario,
        truth,
    }
}

pub fn app(f: &Fixture) -> Router {
    router(AppState::new(Some(f.scenario.clone())))
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Bytes) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Bytes) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: &serde_json::Value) -> (StatusCode, Bytes) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

pub fn json(bytes: &Bytes) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geosieve"))
        .args(args)
        .output()
        .unwrap()
}

/// Runs `eval` through the binary and returns the report file contents.
pub fn cli_report(manifest: &Path, expr: &str, extra: &[&str], out: &Path) -> String {
    let m = manifest.to_str().unwrap();
    let o = out.to_str().unwrap();
    let mut args = vec!["eval", "--scenario", m, "--expr", expr, "--out-report", o];
    args.extend_from_slice(extra);
    let res = cli(&args);
    assert!(res.status.success(), "{expr}: {}", String::from_utf8_lossy(&res.stderr));
    std::fs::read_to_string(out).unwrap()
}

/// All numbers anywhere in a JSON value.
pub fn numbers(v: &serde_json::Value, out: &mut Vec<f64>) {
    match v {
        serde_json::Value::Number(n) => out.extend(n.as_f64()),
        serde_json::Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        serde_json::Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

/// Panics if a body mentions the point: by key, as adjacent numbers in
/// the JSON, or as an `e, n` pair in text (as inside an expression).
pub fn assert_hides(body: &Bytes, secret: (f64, f64)) {
    let text = String::from_utf8_lossy(body);
    assert!(!text.contains("true_location") && !text.contains("\"true\""), "{text}");
    let (e, n) = secret;
    for pair in [
        format!("{e}, {n}"),
        format!("{e},{n}"),
        format!("{e:?}, {n:?}"),
        format!("{e:?},{n:?}"),
    ] {
        assert!(!text.contains(&pair), "{text}");
    }
    if let Ok(v) = serde_json::from_slice::<serde_json::Value>(body) {
        let mut nums = Vec::new();
        numbers(&v, &mut nums);
        for w in nums.windows(2) {
            assert!((w[0] - e).abs() > 1e-6 || (w[1] - n).abs() > 1e-6, "leaked {w:?}");
        }
    }
}
