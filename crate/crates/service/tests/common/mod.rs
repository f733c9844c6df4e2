#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};
use tokensteer_core::config::Config;
use tokio::sync::oneshot;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub struct Server {
    pub base: String,
    pub client: reqwest::Client,
    pub log_dir: tempfile::TempDir,
    _stop: oneshot::Sender<()>,
}

/// Starts the service on an ephemeral port with the heuristic analyzer
/// and traces from `scripted`.
pub async fn spawn_with(scripted: &Path) -> Server {
    let log_dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.service.listen = "127.0.0.1:0".into();
    cfg.service.log_dir = Some(log_dir.path().to_path_buf());
    let mgr = tokensteer_service::build_manager(&cfg, Some(scripted)).unwrap();
    let (stop, stopped) = oneshot::channel::<()>();
    let (bound_tx, bound_rx) = oneshot::channel();
    tokio::spawn(async move {
        tokensteer_service::serve(
            mgr,
            cfg.listen_addr().unwrap(),
            move |addr| {
                let _ = bound_tx.send(addr);
            },
            async move {
                let _ = stopped.await;
            },
        )
        .await
        .unwrap();
    });
    let addr = bound_rx.await.unwrap();
    Server {
        base: format!("http://{addr}"),
        client: reqwest::Client::new(),
        log_dir,
        _stop: stop,
    }
}

pub async fn spawn() -> Server {
    spawn_with(&fixtures().join("traces")).await
}

pub fn login_document() -> (String, usize) {
    let t: Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("traces/login.json")).unwrap())
            .unwrap();
    let prefix = t["context"]["prefix"].as_str().unwrap();
    let suffix = t["context"]["suffix"].as_str().unwrap();
    (format!("{prefix}{suffix}"), prefix.chars().count())
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let resp = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn create_login(&self) -> String {
        let (doc, offset) = login_document();
        let (status, v) = self
            .post("/sessions", json!({"document": doc, "cursor_offset": offset, "language_hint": "python"}))
            .await;
        assert_eq!(status, 201, "{v}");
        v["session_id"].as_str().unwrap().to_string()
    }

    /// Polls until no alternative at any step is still pending.
    pub async fn settle(&self, id: &str) -> Value {
        for _ in 0..500 {
            let (_, v) = self.get(&format!("/sessions/{id}")).await;
            let steps = v["completion"]["steps"].as_array().cloned().unwrap_or_default();
            let pending = |s: &Value| {
                s["alternatives"]["pending"].as_u64().unwrap() > 0
            };
            if !steps.iter().any(pending) {
                return v;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("session {id} did not settle");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub id: u64,
    pub event: String,
    pub data: Value,
}

/// Reads server-sent events until the stream closes or `limit` events
/// have arrived.
pub async fn read_events(mut resp: reqwest::Response, limit: usize) -> Vec<SseEvent> {
    let mut out = Vec::new();
    let mut buf = String::new();
    while out.len() < limit {
        let chunk = match tokio::time::timeout(Duration::from_secs(10), resp.chunk()).await {
            Ok(Ok(Some(c))) => c,
            Ok(Ok(None)) => break,
            Ok(Err(e)) => panic!("stream error: {e}"),
            Err(_) => panic!("timed out waiting for events"),
        };
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(pos) = buf.find("\n\n") {
            let block: String = buf.drain(..pos + 2).collect();
            let (mut id, mut event, mut data) = (None, String::new(), String::new());
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = Some(v.trim().parse().unwrap());
                } else if let Some(v) = line.strip_prefix("event:") {
                    event = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if let Some(id) = id {
                out.push(SseEvent {
                    id,
                    event,
                    data: serde_json::from_str(&data).unwrap(),
                });
            }
        }
    }
    out
}
