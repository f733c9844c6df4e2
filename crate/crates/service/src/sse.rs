use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::HeaderMap;
use axum::response::sse::{Event, KeepAlive, Sse};
use futures::stream::{self, Stream};
use serde::Deserialize;
use tokensteer_core::session::{PushEvent, Session};
use tokio::sync::broadcast;

use crate::api::{AppState, PathArgs};
use crate::error::ApiError;

#[derive(Debug, Default, Deserialize)]
pub struct Resume {
    last_event_id: Option<u64>,
}

struct Feed {
    session: Arc<Session>,
    pending: std::vec::IntoIter<PushEvent>,
    live: broadcast::Receiver<PushEvent>,
    last: u64,
    done: bool,
}

fn to_sse(ev: &PushEvent) -> Event {
    Event::default()
        .id(ev.id.to_string())
        .event(ev.event.clone())
        .data(ev.data.to_string())
}

impl Feed {
    async fn next(&mut self) -> Option<PushEvent> {
        if self.done {
            return None;
        }
        loop {
            let ev = match self.pending.next() {
                Some(ev) => ev,
                None => match self.live.recv().await {
                    Ok(ev) => ev,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::debug!(skipped = n, "subscriber lagged, resending from buffer");
                        let last = self.last;
                        self.pending = self
                            .session
                            .hub()
                            .buffered()
                            .into_iter()
                            .filter(|e| e.id > last)
                            .collect::<Vec<_>>()
                            .into_iter();
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => return None,
                },
            };
            if ev.id <= self.last {
                continue;
            }
            self.last = ev.id;
            if ev.event == "end" {
                self.done = true;
            }
            return Some(ev);
        }
    }
}

/// `GET /sessions/{id}/events`. Without a `Last-Event-ID` header (or
/// `last_event_id` query parameter) the whole resend buffer is sent first.
pub async fn events(
    State(mgr): State<AppState>,
    PathArgs(id): PathArgs<String>,
    Query(resume): Query<Resume>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let session = mgr.session(&id)?;
    let header = match headers.get("last-event-id") {
        Some(v) => Some(
            v.to_str()
                .ok()
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| ApiError::bad_request("Last-Event-ID must be an integer"))?,
        ),
        None => None,
    };
    let after = header.or(resume.last_event_id).unwrap_or(0);
    let sub = session.hub().subscribe(Some(after));
    let done = sub.closed && sub.missed.is_empty();
    let feed = Feed {
        session,
        pending: sub.missed.into_iter(),
        live: sub.live,
        last: after,
        done,
    };
    let stream = stream::unfold(feed, |mut feed| async move {
        let ev = feed.next().await?;
        Some((Ok(to_sse(&ev)), feed))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}
