//! JSON request routing plus a small HTTP front end.
//!
//! | verb | path | body | reply |
//! |------|------|------|-------|
//! | POST | /sessions | `{user_id, layout}` | `{session_id}` |
//! | POST | /sessions/{id}/gaze | `{samples: [...]}` | `{accepted}` |
//! | POST | /sessions/{id}/score | | scores and flagged indices |
//! | POST | /sessions/{id}/simplify | | results, failures, document |
//! | POST | /sessions/{id}/marks | `{marks: [...]}` | `{accepted}` |
//! | GET | /sessions/{id}/document | | document view |
//! | POST | /users/{id}/train | `{seed}` (optional) | user report |
//! | GET | /users/{id}/report | | user report |
//!
//! Errors come back as `{"error": message}`.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Service;
use crate::error::{Error, Result};
use crate::gaze::GazeSample;
use crate::layout::LayoutDocument;

/// Gaze sample on the wire; mirrors the gaze log columns. Coordinates may be
/// null for invalid samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSampleWire {
    pub timestamp_ms: f64,
    pub x_px: Option<f64>,
    pub y_px: Option<f64>,
    #[serde(default = "valid_default")]
    pub valid: bool,
}

fn valid_default() -> bool {
    true
}

impl From<&GazeSample> for GazeSampleWire {
    fn from(s: &GazeSample) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        GazeSampleWire {
            timestamp_ms: s.timestamp,
            x_px: finite(s.x),
            y_px: finite(s.y),
            valid: s.valid,
        }
    }
}

impl From<GazeSampleWire> for GazeSample {
    fn from(w: GazeSampleWire) -> Self {
        GazeSample {
            timestamp: w.timestamp_ms,
            x: w.x_px.unwrap_or(f64::NAN),
            y: w.y_px.unwrap_or(f64::NAN),
            valid: w.valid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeBatch {
    pub samples: Vec<GazeSampleWire>,
}

impl GazeBatch {
    pub fn from_samples(samples: &[GazeSample]) -> Self {
        GazeBatch {
            samples: samples.iter().map(GazeSampleWire::from).collect(),
        }
    }
}

#[derive(Deserialize)]
struct CreateSession {
    user_id: String,
    layout: LayoutDocument,
}

#[derive(Deserialize)]
struct Marks {
    marks: Vec<bool>,
}

#[derive(Deserialize, Default)]
struct Train {
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
}

impl ApiResponse {
    fn ok(body: impl Serialize) -> Self {
        Self::with_status(200, body)
    }

    fn with_status(status: u16, body: impl Serialize) -> Self {
        match serde_json::to_value(body) {
            Ok(body) => ApiResponse { status, body },
            Err(e) => Self::from_error(&Error::Json(e)),
        }
    }

    pub fn from_error(e: &Error) -> Self {
        let status = match e {
            Error::NotFound(_) => 404,
            Error::UntrainedUser(_) | Error::InvalidState(_) | Error::NonMonotone { .. } => 409,
            Error::InsufficientData(_) | Error::DegenerateLabels(_) => 422,
            Error::Io { .. } | Error::Client { .. } => 500,
            _ => 400,
        };
        ApiResponse {
            status,
            body: json!({ "error": e.to_string() }),
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

fn parse<T: serde::de::DeserializeOwned>(body: &str) -> Result<T> {
    let body = if body.trim().is_empty() { "{}" } else { body };
    Ok(serde_json::from_str(body)?)
}

fn route(service: &Service, method: &str, path: &str, body: &str) -> Result<ApiResponse> {
    let path = path.split('?').next().unwrap_or_default();
    let parts: Vec<&str> = path.trim_matches('/').split('/').collect();
    let not_found = || Error::NotFound(format!("{method} {path}"));
    Ok(match (method, parts.as_slice()) {
        ("POST", ["sessions"]) => {
            let req: CreateSession = parse(body)?;
            let id = service.create_session(&req.user_id, req.layout)?;
            ApiResponse::with_status(201, json!({ "session_id": id }))
        }
        ("POST", ["sessions", id, "gaze"]) => {
            let batch: GazeBatch = parse(body)?;
            let samples: Vec<GazeSample> = batch.samples.into_iter().map(GazeSample::from).collect();
            ApiResponse::ok(json!({ "accepted": service.ingest_gaze(id, &samples)? }))
        }
        ("POST", ["sessions", id, "score"]) => ApiResponse::ok(service.finalize_and_score(id)?),
        ("POST", ["sessions", id, "simplify"]) => ApiResponse::ok(service.simplify_flagged(id)?),
        ("POST", ["sessions", id, "marks"]) => {
            let req: Marks = parse(body)?;
            ApiResponse::ok(json!({ "accepted": service.submit_marks(id, &req.marks)? }))
        }
        ("GET", ["sessions", id, "document"]) => ApiResponse::ok(service.document(id)?),
        ("POST", ["users", id, "train"]) => {
            let req: Train = parse(body)?;
            ApiResponse::ok(service.train_user(id, req.seed)?)
        }
        ("GET", ["users", id, "report"]) => ApiResponse::ok(service.user_report(id)?),
        _ => return Err(not_found()),
    })
}

/// Routes one request. Never panics on bad input; failures map to 4xx/5xx.
pub fn handle(service: &Service, method: &str, path: &str, body: &str) -> ApiResponse {
    route(service, method, path, body).unwrap_or_else(|e| ApiResponse::from_error(&e))
}

fn respond(service: &Service, mut request: tiny_http::Request) {
    let mut body = String::new();
    let reply = match request.as_reader().read_to_string(&mut body) {
        Ok(_) => handle(service, request.method().as_str(), request.url(), &body),
        Err(e) => ApiResponse::from_error(&Error::io("<request body>", e)),
    };
    let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
        .expect("static header is valid");
    let response = tiny_http::Response::from_string(reply.body.to_string())
        .with_status_code(reply.status)
        .with_header(header);
    // The client may have gone away; nothing useful to do about it here.
    let _ = request.respond(response);
}

/// A running HTTP server. Dropping the handle does not stop it; call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Blocks until the server stops.
    pub fn wait(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

/// Starts serving on `addr` (port 0 picks a free port) with `workers`
/// request threads.
pub fn spawn(service: Arc<Service>, addr: &str, workers: usize) -> Result<ServerHandle> {
    let server = tiny_http::Server::http(addr).map_err(|e| {
        Error::io(
            addr,
            std::io::Error::new(std::io::ErrorKind::AddrNotAvailable, e.to_string()),
        )
    })?;
    let server = Arc::new(server);
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| Error::InvalidParam {
            name: "addr",
            reason: format!("{addr} is not an IP address"),
        })?;
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = server.clone();
            let service = service.clone();
            std::thread::spawn(move || {
                while let Ok(request) = server.recv() {
                    respond(&service, request);
                }
            })
        })
        .collect();
    Ok(ServerHandle {
        server,
        addr: bound,
        workers,
    })
}

/// Serves until the process is killed.
pub fn serve(service: Arc<Service>, addr: &str, workers: usize) -> Result<()> {
    spawn(service, addr, workers)?.wait();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::ServiceConfig;
    use crate::synth::{generate_user, SynthConfig};
    use crate::linguistics::Lexicons;

    fn layout() -> LayoutDocument {
        let cfg = SynthConfig {
            sentences: 3,
            ..Default::default()
        };
        generate_user("u", 1, &cfg, &Lexicons::bundled()).unwrap().layout
    }

    #[test]
    fn wire_sample_round_trip() {
        let samples = [GazeSample::new(1.0, 2.0, 3.0), GazeSample::invalid(17.0)];
        let text = serde_json::to_string(&GazeBatch::from_samples(&samples)).unwrap();
        assert!(text.contains(r#""x_px":null"#));
        let back: GazeBatch = serde_json::from_str(&text).unwrap();
        let back: Vec<GazeSample> = back.samples.into_iter().map(GazeSample::from).collect();
        assert_eq!(back[0], samples[0]);
        assert!(!back[1].valid && back[1].x.is_nan() && back[1].timestamp == 17.0);
        let implicit: GazeSampleWire = serde_json::from_str(r#"{"timestamp_ms": 1, "x_px": 2, "y_px": 3}"#).unwrap();
        assert!(implicit.valid);
    }

    #[test]
    fn routing_and_status_codes() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::open(dir.path(), ServiceConfig::default()).unwrap();
        let body = json!({ "user_id": "u", "layout": layout() }).to_string();
        let created = handle(&service, "POST", "/sessions", &body);
        assert_eq!(created.status, 201);
        let id = created.body["session_id"].as_str().unwrap().to_string();

        let batch = json!({ "samples": [
            { "timestamp_ms": 0.0, "x_px": 60.0, "y_px": 60.0, "valid": true },
            { "timestamp_ms": 16.0, "x_px": null, "y_px": null, "valid": false }
        ]})
        .to_string();
        let r = handle(&service, "POST", &format!("/sessions/{id}/gaze"), &batch);
        assert_eq!((r.status, r.body["accepted"].as_u64()), (200, Some(2)));
        assert_eq!(handle(&service, "POST", &format!("/sessions/{id}/gaze"), &batch).status, 409);
        assert_eq!(handle(&service, "POST", &format!("/sessions/{id}/score"), "").status, 409);
        assert_eq!(handle(&service, "POST", &format!("/sessions/{id}/marks"), r#"{"marks": [true]}"#).status, 400);
        let r = handle(&service, "POST", &format!("/sessions/{id}/marks"), r#"{"marks": [true, false, false]}"#);
        assert_eq!(r.body["accepted"].as_u64(), Some(3));
        assert_eq!(handle(&service, "POST", "/users/u/train", "").status, 422);
        assert_eq!(handle(&service, "GET", "/users/u/report", "").status, 404);
        assert_eq!(handle(&service, "GET", "/sessions/nope/document", "").status, 404);
        assert_eq!(handle(&service, "DELETE", "/sessions", "").status, 404);
        assert_eq!(handle(&service, "POST", "/sessions", "{not json").status, 400);
        let doc = handle(&service, "GET", &format!("/sessions/{id}/document"), "");
        assert_eq!(doc.body["state"], "reading");
        assert_eq!(doc.body["slots"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn http_front_end() {
        let dir = tempfile::tempdir().unwrap();
        let service = Arc::new(Service::open(dir.path(), ServiceConfig::default()).unwrap());
        let server = spawn(service, "127.0.0.1:0", 2).unwrap();
        let base = format!("http://{}", server.addr());
        let created: Value = ureq::post(&format!("{base}/sessions"))
            .send_json(json!({ "user_id": "u", "layout": layout() }))
            .unwrap()
            .into_json()
            .unwrap();
        let id = created["session_id"].as_str().unwrap();
        let doc: Value = ureq::get(&format!("{base}/sessions/{id}/document"))
            .call()
            .unwrap()
            .into_json()
            .unwrap();
        assert_eq!(doc["session_id"], id);
        match ureq::post(&format!("{base}/sessions/{id}/score")).call() {
            Err(ureq::Error::Status(409, resp)) => {
                let body: Value = resp.into_json().unwrap();
                assert!(body["error"].as_str().unwrap().contains("untrained"));
            }
            other => panic!("expected 409, got {other:?}"),
        }
        server.shutdown();
    }
}
