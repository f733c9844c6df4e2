mod common;

use std::collections::BTreeMap;

use common::*;
use serde_json::json;

async fn open(s: &Server, id: &str, last: Option<u64>) -> reqwest::Response {
    let mut req = s.client.get(s.url(&format!("/sessions/{id}/events")));
    if let Some(last) = last {
        req = req.header("Last-Event-ID", last.to_string());
    }
    let resp = req.send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
    resp
}

#[tokio::test]
async fn one_assessment_per_alternative_then_end() {
    let s = spawn().await;
    let id = s.create_login().await;
    let stream = open(&s, &id, None).await;
    let reader = tokio::spawn(read_events(stream, usize::MAX));
    s.post(&format!("/sessions/{id}/complete"), json!({})).await;
    let view = s.settle(&id).await;
    s.post(&format!("/sessions/{id}/dismiss"), json!({})).await;
    let events = reader.await.unwrap();

    let expected: usize = view["completion"]["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|st| st["candidates"].as_array().unwrap().len() - 1)
        .sum();
    assert_eq!(expected, 10);
    let mut per_alt: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for e in events.iter().filter(|e| e.event == "assessment-ready") {
        *per_alt
            .entry((e.data["step"].as_u64().unwrap(), e.data["rank"].as_u64().unwrap()))
            .or_default() += 1;
    }
    assert_eq!(per_alt.len(), expected);
    assert!(per_alt.values().all(|&n| n == 1));
    assert_eq!(events.iter().filter(|e| e.event == "preview-ready").count(), expected);
    for e in &events {
        assert!(["preview-ready", "assessment-ready", "highlight-updated", "end"].contains(&e.event.as_str()));
    }
    assert!(events.windows(2).all(|w| w[1].id == w[0].id + 1));
    assert_eq!(events.last().unwrap().event, "end");
    assert_eq!(events.iter().filter(|e| e.event == "end").count(), 1);
}

#[tokio::test]
async fn reconnect_resends_missed_events() {
    let s = spawn().await;
    let id = s.create_login().await;
    s.post(&format!("/sessions/{id}/complete"), json!({})).await;
    s.settle(&id).await;

    let first = read_events(open(&s, &id, None).await, 5).await;
    assert_eq!(first.iter().map(|e| e.id).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);

    s.post(&format!("/sessions/{id}/accept"), json!({})).await;
    let rest = read_events(open(&s, &id, Some(5)).await, usize::MAX).await;
    assert_eq!(rest[0].id, 6);
    assert_eq!(rest.last().unwrap().event, "end");

    let all = read_events(open(&s, &id, None).await, usize::MAX).await;
    assert_eq!(all.len(), 5 + rest.len());
    assert_eq!(&all[..5], &first[..]);

    let after_end = read_events(open(&s, &id, Some(all.last().unwrap().id)).await, usize::MAX).await;
    assert!(after_end.is_empty());

    let resp = s
        .client
        .get(s.url(&format!("/sessions/{id}/events?last_event_id=3")))
        .send()
        .await
        .unwrap();
    assert_eq!(read_events(resp, 1).await[0].id, 4);
}

#[tokio::test]
async fn stream_errors() {
    let s = spawn().await;
    let (status, _) = s.get("/sessions/nope/events").await;
    assert_eq!(status, 404);
    let id = s.create_login().await;
    let resp = s
        .client
        .get(s.url(&format!("/sessions/{id}/events")))
        .header("Last-Event-ID", "abc")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
}
