//! Runs the session service over HTTP on a free local port and drives one
//! reading session with the fixture layout, gaze log and model.

use std::path::Path;
use std::sync::Arc;

use gazeread::gaze::load_gaze_log;
use gazeread::layout::LayoutDocument;
use gazeread::service::{spawn, GazeBatch, Service, ServiceConfig};
use serde_json::{json, Value};

fn call(base: &str, method: &str, path: &str, body: Value) -> Value {
    let url = format!("{base}{path}");
    let response = match method {
        "GET" => ureq::get(&url).call(),
        _ => ureq::post(&url).send_json(body),
    };
    let value: Value = match response {
        Ok(r) => r.into_json().expect("json body"),
        Err(ureq::Error::Status(code, r)) => {
            let body: Value = r.into_json().unwrap_or(Value::Null);
            panic!("{method} {path} -> {code}: {body}");
        }
        Err(e) => panic!("{method} {path}: {e}"),
    };
    println!("{method} {path}\n  {value}");
    value
}

fn main() -> gazeread::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session");
    let store = tempfile::tempdir().expect("temp dir");
    let user_dir = store.path().join("users/reader");
    std::fs::create_dir_all(&user_dir).expect("user dir");
    std::fs::copy(fixtures.join("model.json"), user_dir.join("model.json")).expect("model copy");

    let service = Arc::new(Service::open(store.path(), ServiceConfig::default())?);
    let server = spawn(service, "127.0.0.1:0", 2)?;
    let base = format!("http://{}", server.addr());

    let layout = LayoutDocument::load(&fixtures.join("layout.json"))?;
    let created = call(&base, "POST", "/sessions", json!({ "user_id": "reader", "layout": layout }));
    let id = created["session_id"].as_str().expect("session id").to_string();
    let gaze = load_gaze_log(&fixtures.join("gaze.csv"))?;
    for chunk in gaze.chunks(50) {
        call(&base, "POST", &format!("/sessions/{id}/gaze"), json!(GazeBatch::from_samples(chunk)));
    }
    call(&base, "POST", &format!("/sessions/{id}/score"), Value::Null);
    call(&base, "POST", &format!("/sessions/{id}/simplify"), Value::Null);
    call(&base, "GET", &format!("/sessions/{id}/document"), Value::Null);
    server.shutdown();
    Ok(())
}
