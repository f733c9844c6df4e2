//! Per-session state: the current annotated completion, highlight
//! visibility, a linear edit history with back/forward, and the
//! accept/dismiss lifecycle.
//!
//! Every snapshot in the history is stored whole, including its expanded
//! alternatives, so navigating never queries a backend. Commands on one
//! session are serialized; reads take a consistent copy under a short lock.
//! Previews and assessments arrive in the background and are pushed to
//! subscribers through the session's [`EventHub`].

pub mod events;

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{mpsc, Mutex as AsyncMutex, Notify};
use tokio_util::sync::CancellationToken;

use crate::backend::{request_base_completion, BaseCompletion, CompletionContext, FinishReason};
use crate::decoding::{classify_step, HighlightAnnotation, HighlightConfig, TokenCandidate};
use crate::expander::{
    profile_of, skeleton, AlternativePreview, AssessmentState, ExpansionUpdate, Expander,
    PreviewState, SelectionError,
};

pub use events::{
    parse_event_line, parse_event_log, read_event_log, EventHub, EventKind, EventLog,
    InteractionEvent, LogError, PushEvent, Subscription, RING_CAPACITY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Accepted,
    Dismissed,
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SessionStatus::Active => "active",
            SessionStatus::Accepted => "accepted",
            SessionStatus::Dismissed => "dismissed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Back,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalizeAction {
    Accept,
    Dismiss,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("session {0} already exists")]
    DuplicateSession(String),
    #[error("cursor offset {offset} is beyond the document ({len} characters)")]
    BadOffset { offset: usize, len: usize },
    #[error("session is {0}")]
    NotActive(SessionStatus),
    #[error("session has no completion yet")]
    NoCompletion,
    #[error("step {step} does not exist (completion has {len} steps)")]
    UnknownStep { step: usize, len: usize },
    #[error("rank {rank} is not an alternative at step {step}")]
    InvalidAlternative { step: usize, rank: usize },
    #[error("regeneration failed: {0}")]
    SelectionFailed(String),
    #[error("completion backend failed: {0}")]
    Backend(String),
    #[error("cannot open event log: {0}")]
    Log(String),
    #[error("replay diverged at event {seq}: {reason}")]
    ReplayMismatch { seq: u64, reason: String },
}

pub type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, Default)]
pub struct ManagerConfig {
    pub highlight: HighlightConfig,
    /// Directory for `<session_id>.jsonl` interaction logs.
    pub log_dir: Option<PathBuf>,
}

/// One replacement: the completion before and after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EditRecord {
    pub step_index: usize,
    pub alt_rank: usize,
    pub prior: Arc<BaseCompletion>,
    pub new: Arc<BaseCompletion>,
    pub ts_ms: u64,
    pub chosen_sample_index: usize,
    pub distance_to_base: usize,
}

#[derive(Debug, Clone)]
struct Snapshot {
    revision: u64,
    completion: Arc<BaseCompletion>,
    alternatives: Vec<Vec<AlternativePreview>>,
    annotations: Vec<HighlightAnnotation>,
    hidden: BTreeSet<usize>,
    choice_points: BTreeSet<usize>,
    cancel: CancellationToken,
}

impl Snapshot {
    fn new(
        revision: u64,
        completion: Arc<BaseCompletion>,
        alternatives: Vec<Vec<AlternativePreview>>,
        hidden: BTreeSet<usize>,
        choice_points: BTreeSet<usize>,
        cfg: &HighlightConfig,
    ) -> Self {
        let mut s = Snapshot {
            revision,
            completion,
            alternatives,
            annotations: Vec::new(),
            hidden,
            choice_points,
            cancel: CancellationToken::new(),
        };
        s.annotations = (0..s.completion.steps.len())
            .map(|i| s.annotate(i, cfg))
            .collect();
        s
    }

    fn annotate(&self, step: usize, cfg: &HighlightConfig) -> HighlightAnnotation {
        let profile = profile_of(&self.alternatives[step]);
        let mut a = classify_step(&self.completion.steps[step], &profile, cfg)
            .unwrap_or_else(|_| HighlightAnnotation::unscored(step));
        a.step_index = step;
        a.visible = !self.hidden.contains(&step);
        a
    }

    fn unsettled_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.alternatives
            .iter()
            .enumerate()
            .filter(|(_, l)| l.iter().any(|e| !e.assessment.is_settled()))
            .map(|(i, _)| i)
    }

    fn is_settled(&self) -> bool {
        self.cancel.is_cancelled() || self.unsettled_steps().next().is_none()
    }
}

#[derive(Debug)]
struct SessionState {
    context: CompletionContext,
    cursor_offset: usize,
    status: SessionStatus,
    snapshots: Vec<Snapshot>,
    history: Vec<EditRecord>,
    cursor: usize,
    next_revision: u64,
    final_text: Option<String>,
}

impl SessionState {
    fn current(&self) -> Option<&Snapshot> {
        self.snapshots.get(self.cursor)
    }

    fn require_active(&self) -> Result<()> {
        match self.status {
            SessionStatus::Active => Ok(()),
            s => Err(SessionError::NotActive(s)),
        }
    }

    fn snapshot_mut(&mut self, revision: u64) -> Option<&mut Snapshot> {
        self.snapshots.iter_mut().find(|s| s.revision == revision)
    }

    fn take_revision(&mut self) -> u64 {
        self.next_revision += 1;
        self.next_revision
    }

    /// Folding the edit records over the base snapshot must reproduce every
    /// later snapshot, in particular the current one.
    fn verify_history(&self) -> std::result::Result<(), String> {
        if self.snapshots.is_empty() {
            return if self.history.is_empty() && self.cursor == 0 {
                Ok(())
            } else {
                Err("history without a completion".into())
            };
        }
        if self.snapshots.len() != self.history.len() + 1 {
            return Err(format!(
                "{} snapshots for {} records",
                self.snapshots.len(),
                self.history.len()
            ));
        }
        if self.cursor > self.history.len() {
            return Err(format!("cursor {} past {} records", self.cursor, self.history.len()));
        }
        let mut current = self.snapshots[0].completion.clone();
        for (i, rec) in self.history.iter().enumerate() {
            if rec.prior != current {
                return Err(format!("record {i} does not start from the previous completion"));
            }
            let step = rec.new.steps.get(rec.step_index).ok_or("edited step missing")?;
            let prior_step = &rec.prior.steps[rec.step_index];
            if step.chosen != rec.alt_rank || step.candidates != prior_step.candidates {
                return Err(format!("record {i} does not apply its alternative"));
            }
            if rec.new.steps[..rec.step_index] != rec.prior.steps[..rec.step_index] {
                return Err(format!("record {i} changes text before the edited step"));
            }
            current = rec.new.clone();
            if *self.snapshots[i + 1].completion != *current {
                return Err(format!("snapshot {} differs from replayed record {i}", i + 1));
            }
        }
        Ok(())
    }

    fn view(&self, id: &str) -> SessionView {
        SessionView {
            session_id: id.to_string(),
            status: self.status,
            context: self.context.clone(),
            cursor_offset: self.cursor_offset,
            completion: self.current().map(CompletionView::of),
            history: HistoryView {
                cursor: self.cursor,
                length: self.history.len(),
                can_back: self.cursor > 0,
                can_forward: self.cursor < self.history.len(),
                records: self
                    .history
                    .iter()
                    .map(|r| EditRecordView {
                        step_index: r.step_index,
                        alt_rank: r.alt_rank,
                        chosen_sample_index: r.chosen_sample_index,
                        distance_to_base: r.distance_to_base,
                        ts_ms: r.ts_ms,
                    })
                    .collect(),
            },
            final_text: self.final_text.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativeCounts {
    pub total: usize,
    pub pending: usize,
    pub ready: usize,
    pub unavailable: usize,
    pub incorrect: usize,
}

impl AlternativeCounts {
    fn of(entries: &[AlternativePreview]) -> Self {
        let mut c = AlternativeCounts {
            total: entries.len(),
            ..Default::default()
        };
        for e in entries {
            match e.assessment {
                AssessmentState::Pending => c.pending += 1,
                AssessmentState::Ready { .. } => c.ready += 1,
                AssessmentState::Unavailable { .. } => c.unavailable += 1,
            }
            if e.is_incorrect() {
                c.incorrect += 1;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub index: usize,
    /// Byte offset of the step's token within the completion text.
    pub offset: usize,
    pub text: String,
    pub chosen_rank: usize,
    pub candidates: Vec<TokenCandidate>,
    pub annotation: HighlightAnnotation,
    pub choice_point: bool,
    pub alternatives: AlternativeCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionView {
    pub revision: u64,
    pub text: String,
    pub finish_reason: FinishReason,
    /// Steps that are highlighted and not hidden.
    pub highlighted_steps: Vec<usize>,
    pub steps: Vec<StepView>,
}

impl CompletionView {
    fn of(s: &Snapshot) -> Self {
        let offsets = s.completion.step_offsets();
        let steps: Vec<StepView> = s
            .completion
            .steps
            .iter()
            .enumerate()
            .map(|(i, d)| StepView {
                index: i,
                offset: offsets[i],
                text: d.chosen_text().to_string(),
                chosen_rank: d.chosen,
                candidates: d.candidates.clone(),
                annotation: s.annotations[i].clone(),
                choice_point: s.choice_points.contains(&i),
                alternatives: AlternativeCounts::of(&s.alternatives[i]),
            })
            .collect();
        CompletionView {
            revision: s.revision,
            text: s.completion.text.clone(),
            finish_reason: s.completion.finish_reason,
            highlighted_steps: steps
                .iter()
                .filter(|v| v.annotation.highlighted && v.annotation.visible)
                .map(|v| v.index)
                .collect(),
            steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecordView {
    pub step_index: usize,
    pub alt_rank: usize,
    pub chosen_sample_index: usize,
    pub distance_to_base: usize,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub cursor: usize,
    pub length: usize,
    pub can_back: bool,
    pub can_forward: bool,
    pub records: Vec<EditRecordView>,
}

/// Serializable state of one session, as returned by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: SessionStatus,
    pub context: CompletionContext,
    pub cursor_offset: usize,
    pub completion: Option<CompletionView>,
    pub history: HistoryView,
    pub final_text: Option<String>,
}

impl SessionView {
    /// Copy with wall-clock times and revision counters zeroed, for
    /// comparing two runs of the same interaction.
    pub fn normalized(&self) -> SessionView {
        let mut v = self.clone();
        for r in &mut v.history.records {
            r.ts_ms = 0;
        }
        if let Some(c) = v.completion.as_mut() {
            c.revision = 0;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigateOutcome {
    pub moved: bool,
    pub session: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizeOutcome {
    pub final_text: Option<String>,
    pub session: SessionView,
}

pub struct Session {
    id: String,
    command: AsyncMutex<()>,
    state: RwLock<SessionState>,
    log: EventLog,
    hub: EventHub,
    changed: Notify,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn hub(&self) -> &EventHub {
        &self.hub
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn view(&self) -> SessionView {
        self.state.read().view(&self.id)
    }

    fn apply_update(&self, revision: u64, update: ExpansionUpdate, cfg: &HighlightConfig) {
        let mut st = self.state.write();
        let Some(snap) = st.snapshot_mut(revision) else {
            return;
        };
        if !update.apply(&mut snap.alternatives) {
            return;
        }
        match &update {
            ExpansionUpdate::Preview { step, rank, state } => {
                let status = match state {
                    PreviewState::Ready { .. } => "ready",
                    PreviewState::Unavailable { .. } => "unavailable",
                    PreviewState::Pending => "pending",
                };
                self.hub.publish(
                    "preview-ready",
                    json!({"revision": revision, "step": step, "rank": rank, "status": status}),
                );
            }
            ExpansionUpdate::Assessment { step, rank, state } => {
                let mut data = json!({"revision": revision, "step": step, "rank": rank});
                match state {
                    AssessmentState::Ready { assessment, .. } => {
                        data["status"] = json!("ready");
                        data["category"] = json!(assessment.category);
                        data["importance_score"] = json!(assessment.importance_score);
                    }
                    _ => data["status"] = json!("unavailable"),
                }
                self.hub.publish("assessment-ready", data);
                let fresh = snap.annotate(*step, cfg);
                if fresh != snap.annotations[*step] {
                    snap.annotations[*step] = fresh.clone();
                    self.hub.publish(
                        "highlight-updated",
                        json!({"revision": revision, "step": step, "annotation": fresh}),
                    );
                }
            }
        }
        drop(st);
        self.changed.notify_waiters();
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub struct SessionManager {
    expander: Arc<Expander>,
    cfg: ManagerConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl SessionManager {
    pub fn new(expander: Arc<Expander>, cfg: ManagerConfig) -> Self {
        SessionManager {
            expander,
            cfg,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.cfg
    }

    pub fn expander(&self) -> &Arc<Expander> {
        &self.expander
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<SessionView> {
        Ok(self.session(id)?.view())
    }

    /// Splits `document` at `cursor_offset`, counted in characters.
    pub fn create_session(
        &self,
        document: &str,
        cursor_offset: usize,
        language_hint: &str,
    ) -> Result<SessionView> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.create_session_with_id(&id, document, cursor_offset, language_hint)
    }

    pub fn create_session_with_id(
        &self,
        id: &str,
        document: &str,
        cursor_offset: usize,
        language_hint: &str,
    ) -> Result<SessionView> {
        if !valid_id(id) {
            return Err(SessionError::InvalidId(id.to_string()));
        }
        let len = document.chars().count();
        if cursor_offset > len {
            return Err(SessionError::BadOffset {
                offset: cursor_offset,
                len,
            });
        }
        let split = document
            .char_indices()
            .nth(cursor_offset)
            .map_or(document.len(), |(b, _)| b);
        let (prefix, suffix) = document.split_at(split);
        let mut sessions = self.sessions.write();
        if sessions.contains_key(id) {
            return Err(SessionError::DuplicateSession(id.to_string()));
        }
        let log = EventLog::new(id, self.cfg.log_dir.as_deref())
            .map_err(|e| SessionError::Log(e.to_string()))?;
        let session = Arc::new(Session {
            id: id.to_string(),
            command: AsyncMutex::new(()),
            state: RwLock::new(SessionState {
                context: CompletionContext::new(prefix, suffix, language_hint),
                cursor_offset,
                status: SessionStatus::Active,
                snapshots: Vec::new(),
                history: Vec::new(),
                cursor: 0,
                next_revision: 0,
                final_text: None,
            }),
            log,
            hub: EventHub::new(),
            changed: Notify::new(),
        });
        session.log.append(
            EventKind::SessionCreated,
            json!({
                "document": document,
                "cursor_offset": cursor_offset,
                "language_hint": language_hint,
            }),
        );
        let view = session.view();
        sessions.insert(id.to_string(), session);
        Ok(view)
    }

    fn spawn_expansion(
        &self,
        session: &Arc<Session>,
        revision: u64,
        ctx: CompletionContext,
        completion: Arc<BaseCompletion>,
        steps: Vec<usize>,
        cancel: CancellationToken,
    ) {
        let expander = self.expander.clone();
        let session = session.clone();
        let cfg = self.cfg.highlight;
        tokio::spawn(async move {
            let (tx, mut rx) = mpsc::unbounded_channel();
            let work = expander.expand(&session.id, &ctx, &completion, &steps, tx, cancel);
            let apply = async {
                while let Some(u) = rx.recv().await {
                    session.apply_update(revision, u, &cfg);
                }
            };
            tokio::join!(work, apply);
            session.changed.notify_waiters();
        });
    }

    /// Fetches a fresh completion, replacing the current one and clearing
    /// history. Previews and assessments continue in the background.
    pub async fn run_completion(&self, id: &str) -> Result<SessionView> {
        let session = self.session(id)?;
        let _cmd = session.command.lock().await;
        let ctx = {
            let st = session.state.read();
            st.require_active()?;
            st.context.clone()
        };
        let completion = request_base_completion(
            self.expander.backend().as_ref(),
            &ctx,
            self.expander.params(),
        )
        .await
        .map_err(|e| SessionError::Backend(e.to_string()))?;
        let completion = Arc::new(completion);

        let (revision, cancel) = {
            let mut st = session.state.write();
            for s in &st.snapshots {
                s.cancel.cancel();
            }
            let revision = st.take_revision();
            let alternatives = completion.steps.iter().map(skeleton).collect();
            let snap = Snapshot::new(
                revision,
                completion.clone(),
                alternatives,
                BTreeSet::new(),
                BTreeSet::new(),
                &self.cfg.highlight,
            );
            let cancel = snap.cancel.clone();
            st.snapshots = vec![snap];
            st.history.clear();
            st.cursor = 0;
            debug_assert_eq!(st.verify_history(), Ok(()));
            (revision, cancel)
        };
        let steps = (0..completion.steps.len()).collect();
        self.spawn_expansion(&session, revision, ctx, completion.clone(), steps, cancel);
        session.log.append(
            EventKind::CompletionRequested,
            json!({"revision": revision, "text": completion.text, "steps": completion.steps.len()}),
        );
        Ok(session.view())
    }

    /// Waits until every live snapshot has all of its assessments settled.
    pub async fn wait_settled(&self, id: &str) -> Result<SessionView> {
        let session = self.session(id)?;
        loop {
            let notified = session.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            {
                let st = session.state.read();
                if st.status != SessionStatus::Active || st.snapshots.iter().all(Snapshot::is_settled)
                {
                    return Ok(st.view(&session.id));
                }
            }
            notified.await;
        }
    }

    /// Alternatives of one step of the current completion, most likely first.
    pub fn list_alternatives(&self, id: &str, step: usize) -> Result<Vec<AlternativePreview>> {
        let session = self.session(id)?;
        let list = {
            let st = session.state.read();
            let snap = st.current().ok_or(SessionError::NoCompletion)?;
            snap.alternatives
                .get(step)
                .cloned()
                .ok_or(SessionError::UnknownStep {
                    step,
                    len: snap.alternatives.len(),
                })?
        };
        session
            .log
            .append(EventKind::AlternativesOpened, json!({"step_index": step}));
        Ok(list)
    }

    pub async fn hide_highlight(&self, id: &str, step: usize) -> Result<SessionView> {
        let session = self.session(id)?;
        let _cmd = session.command.lock().await;
        {
            let mut st = session.state.write();
            st.require_active()?;
            let cursor = st.cursor;
            let snap = st.snapshots.get_mut(cursor).ok_or(SessionError::NoCompletion)?;
            let len = snap.completion.steps.len();
            if step >= len {
                return Err(SessionError::UnknownStep { step, len });
            }
            if snap.hidden.insert(step) {
                snap.annotations[step].visible = false;
                session.hub.publish(
                    "highlight-updated",
                    json!({
                        "revision": snap.revision,
                        "step": step,
                        "annotation": snap.annotations[step],
                    }),
                );
            }
        }
        session
            .log
            .append(EventKind::HighlightHidden, json!({"step_index": step}));
        Ok(session.view())
    }

    /// Replaces the token at `step` with candidate `rank` and regenerates
    /// the rest. Any forward history is discarded.
    pub async fn select_alternative(&self, id: &str, step: usize, rank: usize) -> Result<SessionView> {
        let session = self.session(id)?;
        let _cmd = session.command.lock().await;
        let (ctx, current) = {
            let st = session.state.read();
            st.require_active()?;
            let snap = st.current().ok_or(SessionError::NoCompletion)?;
            (st.context.clone(), snap.completion.clone())
        };
        let result = self
            .expander
            .apply_selection(&ctx, &current, step, rank)
            .await
            .map_err(|e| match e {
                SelectionError::InvalidStep { step, len } => SessionError::UnknownStep { step, len },
                SelectionError::InvalidAlternative { step, rank } => {
                    SessionError::InvalidAlternative { step, rank }
                }
                SelectionError::Failed(msg) => SessionError::SelectionFailed(msg),
            })?;
        let new = Arc::new(result.new_completion);

        let (revision, cancel, steps) = {
            let mut st = session.state.write();
            let revision = st.take_revision();
            let cursor = st.cursor;
            let cur = &st.snapshots[cursor];
            let mut alternatives: Vec<Vec<AlternativePreview>> =
                cur.alternatives[..step].to_vec();
            alternatives.extend(new.steps[step..].iter().map(skeleton));
            let hidden = cur.hidden.iter().copied().filter(|&s| s < step).collect();
            let mut choice_points: BTreeSet<usize> =
                cur.choice_points.iter().copied().filter(|&s| s < step).collect();
            choice_points.insert(step);
            let snap = Snapshot::new(
                revision,
                new.clone(),
                alternatives,
                hidden,
                choice_points,
                &self.cfg.highlight,
            );
            // Copied entries still waiting on the old revision are redone.
            let steps: Vec<usize> = snap
                .unsettled_steps()
                .filter(|&s| s < step)
                .chain(step..new.steps.len())
                .collect();
            let cancel = snap.cancel.clone();

            for dropped in st.snapshots.drain(cursor + 1..) {
                dropped.cancel.cancel();
            }
            st.history.truncate(cursor);
            st.history.push(EditRecord {
                step_index: step,
                alt_rank: rank,
                prior: current.clone(),
                new: new.clone(),
                ts_ms: 0,
                chosen_sample_index: result.chosen_sample_index,
                distance_to_base: result.distance_to_base,
            });
            st.snapshots.push(snap);
            st.cursor += 1;
            debug_assert_eq!(st.verify_history(), Ok(()));
            (revision, cancel, steps)
        };
        self.spawn_expansion(&session, revision, ctx, new.clone(), steps, cancel);
        let ev = session.log.append(
            EventKind::AlternativeSelected,
            json!({
                "step_index": step,
                "alt_rank": rank,
                "chosen_sample_index": result.chosen_sample_index,
                "distance_to_base": result.distance_to_base,
                "revision": revision,
                "text": new.text,
            }),
        );
        {
            let mut st = session.state.write();
            if let Some(r) = st.history.last_mut() {
                r.ts_ms = ev.ts_ms;
            }
        }
        Ok(session.view())
    }

    /// Moves one record back or forward. Moving past either end is a no-op
    /// reported through `moved`.
    pub async fn navigate(&self, id: &str, direction: Direction) -> Result<NavigateOutcome> {
        let session = self.session(id)?;
        let _cmd = session.command.lock().await;
        let moved = {
            let mut st = session.state.write();
            st.require_active()?;
            let moved = match direction {
                Direction::Back if st.cursor > 0 => {
                    st.cursor -= 1;
                    true
                }
                Direction::Forward if st.cursor < st.history.len() => {
                    st.cursor += 1;
                    true
                }
                _ => false,
            };
            debug_assert_eq!(st.verify_history(), Ok(()));
            moved
        };
        let kind = match direction {
            Direction::Back => EventKind::Back,
            Direction::Forward => EventKind::Forward,
        };
        session.log.append(kind, json!({"moved": moved}));
        Ok(NavigateOutcome {
            moved,
            session: session.view(),
        })
    }

    pub async fn finalize(&self, id: &str, action: FinalizeAction) -> Result<FinalizeOutcome> {
        let session = self.session(id)?;
        let _cmd = session.command.lock().await;
        let final_text = {
            let mut st = session.state.write();
            st.require_active()?;
            for s in &st.snapshots {
                s.cancel.cancel();
            }
            match action {
                FinalizeAction::Accept => {
                    let completion = st.current().map_or("", |s| s.completion.text.as_str());
                    let text = format!("{}{}{}", st.context.prefix, completion, st.context.suffix);
                    st.status = SessionStatus::Accepted;
                    st.final_text = Some(text.clone());
                    Some(text)
                }
                FinalizeAction::Dismiss => {
                    st.status = SessionStatus::Dismissed;
                    None
                }
            }
        };
        self.expander.analyzer().forget_session(id);
        let (kind, status) = match action {
            FinalizeAction::Accept => (EventKind::Accepted, SessionStatus::Accepted),
            FinalizeAction::Dismiss => (EventKind::Dismissed, SessionStatus::Dismissed),
        };
        session.log.append(kind, json!({"final_text": final_text}));
        session.hub.close(json!({"status": status}));
        session.changed.notify_waiters();
        Ok(FinalizeOutcome {
            final_text,
            session: session.view(),
        })
    }

    pub fn events(&self, id: &str) -> Result<Vec<InteractionEvent>> {
        Ok(self.session(id)?.log.events())
    }

    pub fn verify_history(&self, id: &str) -> Result<std::result::Result<(), String>> {
        Ok(self.session(id)?.state.read().verify_history())
    }

    /// Re-runs a logged session against this manager's backend and returns
    /// the resulting state. Logged completion texts must be reproduced.
    pub async fn replay(&self, events: &[InteractionEvent]) -> Result<SessionView> {
        let first = events.first().ok_or(SessionError::ReplayMismatch {
            seq: 0,
            reason: "empty log".into(),
        })?;
        let mismatch = |ev: &InteractionEvent, reason: String| SessionError::ReplayMismatch {
            seq: ev.seq,
            reason,
        };
        if first.kind != EventKind::SessionCreated {
            return Err(mismatch(first, "log must start with session-created".into()));
        }
        let p = &first.payload;
        let document = p["document"].as_str().ok_or_else(|| mismatch(first, "no document".into()))?;
        let offset = p["cursor_offset"]
            .as_u64()
            .ok_or_else(|| mismatch(first, "no cursor_offset".into()))? as usize;
        let hint = p["language_hint"].as_str().unwrap_or("");
        let id = first.session_id.clone();
        self.create_session_with_id(&id, document, offset, hint)?;

        let field = |ev: &InteractionEvent, name: &str| -> Result<usize> {
            ev.payload[name]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| mismatch(ev, format!("payload lacks `{name}`")))
        };
        let check_text = |ev: &InteractionEvent, view: &SessionView| -> Result<()> {
            let got = view.completion.as_ref().map(|c| c.text.as_str());
            match ev.payload.get("text").and_then(Value::as_str) {
                Some(want) if Some(want) != got => {
                    Err(mismatch(ev, format!("completion {got:?} differs from logged {want:?}")))
                }
                _ => Ok(()),
            }
        };
        for ev in &events[1..] {
            match ev.kind {
                EventKind::SessionCreated => {
                    return Err(mismatch(ev, "second session-created".into()));
                }
                EventKind::CompletionRequested => {
                    self.run_completion(&id).await?;
                    check_text(ev, &self.wait_settled(&id).await?)?;
                }
                EventKind::AlternativeSelected => {
                    let (step, rank) = (field(ev, "step_index")?, field(ev, "alt_rank")?);
                    self.select_alternative(&id, step, rank).await?;
                    check_text(ev, &self.wait_settled(&id).await?)?;
                }
                EventKind::AlternativesOpened => {
                    self.list_alternatives(&id, field(ev, "step_index")?)?;
                }
                EventKind::HighlightHidden => {
                    self.hide_highlight(&id, field(ev, "step_index")?).await?;
                }
                EventKind::Back | EventKind::Forward => {
                    let dir = if ev.kind == EventKind::Back {
                        Direction::Back
                    } else {
                        Direction::Forward
                    };
                    let out = self.navigate(&id, dir).await?;
                    if let Some(want) = ev.payload.get("moved").and_then(Value::as_bool) {
                        if want != out.moved {
                            return Err(mismatch(ev, "navigation outcome differs".into()));
                        }
                    }
                }
                EventKind::Accepted => {
                    self.finalize(&id, FinalizeAction::Accept).await?;
                }
                EventKind::Dismissed => {
                    self.finalize(&id, FinalizeAction::Dismiss).await?;
                }
            }
        }
        self.get(&id)
    }
}
