//! Interaction log and push-event fan-out.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::broadcast;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    SessionCreated,
    CompletionRequested,
    AlternativesOpened,
    AlternativeSelected,
    HighlightHidden,
    Back,
    Forward,
    Accepted,
    Dismissed,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SessionCreated => "session-created",
            EventKind::CompletionRequested => "completion-requested",
            EventKind::AlternativesOpened => "alternatives-opened",
            EventKind::AlternativeSelected => "alternative-selected",
            EventKind::HighlightHidden => "highlight-hidden",
            EventKind::Back => "back",
            EventKind::Forward => "forward",
            EventKind::Accepted => "accepted",
            EventKind::Dismissed => "dismissed",
        }
    }
}

/// One line of `logs/<session_id>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionEvent {
    pub seq: u64,
    /// Milliseconds since the Unix epoch; never decreases within a session.
    pub ts_ms: u64,
    pub session_id: String,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot read event log {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("event log line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Parses one log line.
pub fn parse_event_line(line: &str) -> Result<InteractionEvent, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

/// Parses a whole JSONL log, checking sequence numbers and timestamps.
pub fn parse_event_log(src: &str) -> Result<Vec<InteractionEvent>, LogError> {
    let mut out: Vec<InteractionEvent> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let ev = parse_event_line(line).map_err(|reason| LogError::Parse {
            line: line_no,
            reason,
        })?;
        if let Some(prev) = out.last() {
            let reason = if ev.seq != prev.seq + 1 {
                Some(format!("seq {} follows {}", ev.seq, prev.seq))
            } else if ev.ts_ms < prev.ts_ms {
                Some(format!("timestamp {} goes backwards", ev.ts_ms))
            } else if ev.session_id != prev.session_id {
                Some(format!("session id changes to {:?}", ev.session_id))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(LogError::Parse {
                    line: line_no,
                    reason,
                });
            }
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn read_event_log(path: &Path) -> Result<Vec<InteractionEvent>, LogError> {
    let src = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_event_log(&src)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct LogInner {
    events: Vec<InteractionEvent>,
    file: Option<File>,
    path: Option<PathBuf>,
}

/// Append-only per-session log, kept in memory and mirrored to disk when a
/// directory is configured.
pub struct EventLog {
    session_id: String,
    inner: Mutex<LogInner>,
}

impl EventLog {
    pub fn new(session_id: &str, dir: Option<&Path>) -> std::io::Result<Self> {
        let (file, path) = match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{session_id}.jsonl"));
                let file = OpenOptions::new().create(true).append(true).open(&path)?;
                (Some(file), Some(path))
            }
            None => (None, None),
        };
        Ok(EventLog {
            session_id: session_id.to_string(),
            inner: Mutex::new(LogInner {
                events: Vec::new(),
                file,
                path,
            }),
        })
    }

    pub fn append(&self, kind: EventKind, payload: Value) -> InteractionEvent {
        let mut inner = self.inner.lock();
        let (seq, floor) = match inner.events.last() {
            Some(prev) => (prev.seq + 1, prev.ts_ms),
            None => (0, 0),
        };
        let ev = InteractionEvent {
            seq,
            ts_ms: now_ms().max(floor),
            session_id: self.session_id.clone(),
            kind,
            payload,
        };
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_string(&ev).expect("event serializes");
            line.push('\n');
            if let Err(e) = file.write_all(line.as_bytes()) {
                tracing::warn!(session = %self.session_id, error = %e, "event log write failed");
            }
        }
        inner.events.push(ev.clone());
        ev
    }

    pub fn events(&self) -> Vec<InteractionEvent> {
        self.inner.lock().events.clone()
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.inner.lock().path.clone()
    }
}

/// Capacity of the per-session resend buffer.
pub const RING_CAPACITY: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushEvent {
    pub id: u64,
    /// `preview-ready`, `assessment-ready`, `highlight-updated` or `end`.
    pub event: String,
    pub data: Value,
}

struct HubInner {
    next_id: u64,
    ring: VecDeque<PushEvent>,
    closed: bool,
}

/// Server-push fan-out with a bounded resend buffer for reconnects.
pub struct EventHub {
    inner: Mutex<HubInner>,
    tx: broadcast::Sender<PushEvent>,
}

impl Default for EventHub {
    fn default() -> Self {
        EventHub::new()
    }
}

pub struct Subscription {
    /// Buffered events after the requested id, oldest first.
    pub missed: Vec<PushEvent>,
    pub live: broadcast::Receiver<PushEvent>,
    /// The hub was already closed; `missed` ends with the `end` event.
    pub closed: bool,
}

impl EventHub {
    pub fn new() -> Self {
        let (tx, _) = broadcast::channel(RING_CAPACITY * 4);
        EventHub {
            inner: Mutex::new(HubInner {
                next_id: 1,
                ring: VecDeque::with_capacity(RING_CAPACITY),
                closed: false,
            }),
            tx,
        }
    }

    /// Publishes an event; ignored once the hub is closed.
    pub fn publish(&self, event: &str, data: Value) -> Option<u64> {
        let mut inner = self.inner.lock();
        if inner.closed {
            return None;
        }
        let ev = PushEvent {
            id: inner.next_id,
            event: event.to_string(),
            data,
        };
        inner.next_id += 1;
        if event == "end" {
            inner.closed = true;
        }
        if inner.ring.len() == RING_CAPACITY {
            inner.ring.pop_front();
        }
        inner.ring.push_back(ev.clone());
        let _ = self.tx.send(ev.clone());
        Some(ev.id)
    }

    pub fn close(&self, data: Value) {
        self.publish("end", data);
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().closed
    }

    /// Subscribes, replaying buffered events with ids above `after`.
    pub fn subscribe(&self, after: Option<u64>) -> Subscription {
        let inner = self.inner.lock();
        let missed = match after {
            Some(after) => inner.ring.iter().filter(|e| e.id > after).cloned().collect(),
            None => Vec::new(),
        };
        Subscription {
            missed,
            live: self.tx.subscribe(),
            closed: inner.closed,
        }
    }

    pub fn buffered(&self) -> Vec<PushEvent> {
        self.inner.lock().ring.iter().cloned().collect()
    }
}
