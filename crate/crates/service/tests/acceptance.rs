//! Acceptance run: one PASS/FAIL line per criterion, each checked at its
//! stated tolerance and time budget. Exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

mod common;

use std::collections::{BTreeSet, HashMap};
use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tokensteer_core::analysis::{DedupAnalyzer, HeuristicAnalyzer};
use tokensteer_core::backend::wire::parse_completion_response;
use tokensteer_core::backend::{
    BaseCompletion, CompletionBackend, CompletionContext, GenerationParams, ScriptedBackend, Trace,
};
use tokensteer_core::decoding::{
    corrected_entropy, corrected_weights, shannon_entropy, Category, HighlightConfig,
    ImportanceProfile, StepDistribution,
};
use tokensteer_core::expander::distance::edit_distance;
use tokensteer_core::expander::{Expander, ExpanderConfig};
use tokensteer_core::session::{
    read_event_log, Direction, ManagerConfig, SessionError, SessionManager, SessionView,
};

type Outcome = Result<String, String>;
type Check = Pin<Box<dyn Future<Output = Outcome> + Send>>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    common::fixtures()
}

fn trace(name: &str) -> Trace {
    Trace::load(fixtures().join("traces").join(name)).unwrap()
}

fn expander(backend: Arc<dyn CompletionBackend>) -> Arc<Expander> {
    Arc::new(Expander::new(
        backend,
        Arc::new(DedupAnalyzer::new(Arc::new(HeuristicAnalyzer))),
        GenerationParams::default(),
        ExpanderConfig::default(),
    ))
}

fn dist(probs: &[f64]) -> StepDistribution {
    StepDistribution::new(0, probs.iter().enumerate().map(|(i, &p)| (format!("t{i}"), p)).collect()).unwrap()
}

fn cfg(alpha: f64, beta: f64) -> HighlightConfig {
    HighlightConfig {
        alpha,
        beta,
        ..Default::default()
    }
}

fn random_probs(rng: &mut StdRng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

async fn entropy_suite() -> Outcome {
    for k in 2..=16usize {
        let h = shannon_entropy(&vec![1.0 / k as f64; k]).map_err(|e| e.to_string())?;
        ensure!((h - (k as f64).ln()).abs() <= 1e-9, "uniform k={k}: {h}");
    }
    ensure!(shannon_entropy(&[1.0]).unwrap() == 0.0, "point mass");
    ensure!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap() == 0.0, "padded point mass");
    let mut rng = StdRng::seed_from_u64(1);
    for i in 0..1000 {
        let k = rng.random_range(1..=16);
        let mut p = random_probs(&mut rng, k);
        let h = shannon_entropy(&p).unwrap();
        p.shuffle(&mut rng);
        let h2 = shannon_entropy(&p).unwrap();
        ensure!((h - h2).abs() <= 1e-12, "permutation draw {i}: {h} vs {h2}");
        ensure!(h >= 0.0 && h <= (k as f64).ln() + 1e-9, "bounds draw {i}");
    }
    Ok("ln k for k=2..16, point mass 0, 1000 permutations".into())
}

async fn corrected_entropy_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    for i in 0..1000 {
        let k = rng.random_range(2..=10);
        let p = random_probs(&mut rng, k);
        let profile = ImportanceProfile::new((1..k).map(|_| {
            if rng.random_bool(0.5) {
                (Category::Minor, 0.0)
            } else {
                (Category::Incorrect, rng.random_range(0.0..=1.0))
            }
        }));
        let beta = rng.random_range(0.05..=1.0);
        let h = corrected_entropy(&dist(&p), &profile, &cfg(0.0, beta)).unwrap();
        ensure!(h == 0.0, "zero case draw {i}: {h}");
    }

    // Brute-force evaluation done outside the crate: w = (0.9^0.5, 0.1^0.5)
    // normalizes to (0.75, 0.25), whose entropy is 0.5623351446 nats.
    let h = corrected_entropy(
        &dist(&[0.9, 0.1]),
        &ImportanceProfile::new([(Category::Significant, 1.0)]),
        &cfg(0.0, 0.5),
    )
    .unwrap();
    ensure!((h - 0.562_335_144_6).abs() <= 1e-3, "worked example: {h}");

    let mut checked = 0;
    for i in 0..10_000 {
        let p0: f64 = rng.random_range(0.05..0.999);
        let p1 = rng.random_range(0.0001..=(1.0 - p0));
        let beta = rng.random_range(0.05..=1.0);
        let alpha = rng.random_range(0.0..=0.5);
        let mut s = [rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)];
        s.sort_by(f64::total_cmp);
        let d = dist(&[p0, p1]);
        let c = cfg(alpha, beta);
        let at = |score: f64| {
            let prof = ImportanceProfile::new([(Category::Significant, score)]);
            (
                corrected_entropy(&d, &prof, &c).unwrap(),
                corrected_weights(&d, &prof, &c).unwrap()[1],
            )
        };
        let (h_lo, _) = at(s[0]);
        let (h_hi, mass_hi) = at(s[1]);
        if mass_hi <= 0.5 {
            checked += 1;
            ensure!(h_lo <= h_hi + 1e-12, "monotonicity draw {i}: {h_lo} > {h_hi}");
        }
    }
    ensure!(checked > 5_000, "only {checked} draws inside the monotone region");
    Ok(format!("zero case x1000, worked example {h:.6}, monotone on {checked}/10000 draws in range"))
}

/// Highlighted steps per bundled trace, computed by an independent script.
const BUDGET: [(&str, &[usize]); 8] = [
    ("budget_01", &[0, 8, 18]),
    ("budget_02", &[9, 29]),
    ("budget_03", &[2, 26, 35]),
    ("budget_04", &[8]),
    ("budget_05", &[0, 5, 36]),
    ("budget_06", &[2, 13, 36]),
    ("budget_07", &[11]),
    ("budget_08", &[2, 8, 37]),
];

async fn highlight_budget() -> Outcome {
    let dir = fixtures().join("traces/budget");
    let backend = Arc::new(ScriptedBackend::from_dir(&dir).map_err(|e| e.to_string())?);
    let mgr = SessionManager::new(expander(backend), ManagerConfig::default());
    let mut counts = Vec::new();
    for (name, expected) in BUDGET {
        let t = trace(&format!("budget/{name}.json"));
        ensure!(t.root.steps.len() == 40, "{name} has {} steps", t.root.steps.len());
        let c = t.context.as_ref().unwrap();
        let doc = format!("{}{}", c.prefix, c.suffix);
        let id = mgr.create_session(&doc, c.prefix.chars().count(), "python").unwrap().session_id;
        mgr.run_completion(&id).await.map_err(|e| e.to_string())?;
        let view = mgr.wait_settled(&id).await.unwrap();
        let steps = view.completion.unwrap();
        let significant = steps
            .steps
            .iter()
            .filter(|s| {
                mgr.list_alternatives(&id, s.index)
                    .unwrap()
                    .iter()
                    .any(|a| a.assessment.assessment().map(|x| x.category) == Some(Category::Significant))
            })
            .count();
        ensure!(significant <= 3, "{name} has {significant} Significant steps");
        let n = steps.highlighted_steps.len();
        ensure!((1..=5).contains(&n), "{name} highlights {n} steps");
        ensure!(steps.highlighted_steps == expected, "{name}: {:?} != {expected:?}", steps.highlighted_steps);
        counts.push(n);
    }
    Ok(format!("highlights per trace {counts:?}"))
}

fn oracle_distance(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&d) = memo.get(&(a.len(), b.len())) {
        return d;
    }
    let cost = usize::from(a[0] != b[0]);
    let d = (oracle_distance(&a[1..], b, memo) + 1)
        .min(oracle_distance(a, &b[1..], memo) + 1)
        .min(oracle_distance(&a[1..], &b[1..], memo) + cost);
    memo.insert((a.len(), b.len()), d);
    d
}

fn all_strings(max: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|s| ['a', 'b', 'c'].map(|c| format!("{s}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

async fn edit_distance_suite() -> Outcome {
    let words = all_strings(5);
    let mut pairs = 0usize;
    for a in &words {
        for b in &words {
            let want = oracle_distance(a.as_bytes(), b.as_bytes(), &mut HashMap::new());
            let got = edit_distance(a, b);
            ensure!(got == want, "d({a:?}, {b:?}) = {got}, oracle {want}");
            pairs += 1;
        }
    }
    let mut rng = StdRng::seed_from_u64(4);
    let alphabet: Vec<char> = "abcdé漢 \n".chars().collect();
    let word = |rng: &mut StdRng| -> String {
        let n = rng.random_range(0..=24);
        (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    for i in 0..10_000 {
        let (a, b, c) = (word(&mut rng), word(&mut rng), word(&mut rng));
        let ab = edit_distance(&a, &b);
        ensure!(edit_distance(&a, &a) == 0, "identity {i}");
        ensure!((ab == 0) == (a == b), "indiscernibles {i}");
        ensure!(ab == edit_distance(&b, &a), "symmetry {i}");
        ensure!(ab <= edit_distance(&a, &c) + edit_distance(&c, &b), "triangle {i}");
    }
    ensure!(edit_distance("kitten", "sitting") == 3, "kitten/sitting");
    Ok(format!("{pairs} exhaustive pairs, 10000 metric draws, kitten/sitting = 3"))
}

fn changed_lines(a: &str, b: &str) -> Vec<usize> {
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    (0..la.len().max(lb.len())).filter(|&i| la.get(i) != lb.get(i)).collect()
}

async fn regeneration_suite() -> Outcome {
    let exp = expander(Arc::new(ScriptedBackend::for_any_context(trace("regen.json"))));
    let ctx = CompletionContext::new("def mean(values):\n", "", "python");
    let base = exp.backend().base_completion(&ctx, exp.params()).await.map_err(|e| e.to_string())?;
    let r = exp.apply_selection(&ctx, &base, 2, 1).await.map_err(|e| e.to_string())?;
    ensure!(r.distance_to_base == 0, "distance {}", r.distance_to_base);
    ensure!(r.samples_received == 10, "received {}", r.samples_received);
    let lines = changed_lines(&base.text, &r.new_completion.text);
    ensure!(lines == [0], "changed lines {lines:?}");
    for run in 0..10 {
        let again = exp.apply_selection(&ctx, &base, 2, 1).await.map_err(|e| e.to_string())?;
        ensure!(again == r, "run {run} differs");
    }
    Ok(format!("sample {} at distance 0, only line 0 changed, 10 identical reruns", r.chosen_sample_index))
}

#[derive(Debug, Clone)]
struct Snap {
    completion: BaseCompletion,
    hidden: BTreeSet<usize>,
    choice_points: BTreeSet<usize>,
}

fn check_model(view: &SessionView, snaps: &[Snap], index: usize) -> Result<(), String> {
    let cur = &snaps[index];
    let c = view.completion.as_ref().ok_or("no completion")?;
    ensure!(c.text == cur.completion.text, "text differs");
    ensure!(view.history.cursor == index, "cursor {} vs {index}", view.history.cursor);
    ensure!(view.history.length == snaps.len() - 1, "history length");
    for s in &c.steps {
        ensure!(s.annotation.visible != cur.hidden.contains(&s.index), "visibility at {}", s.index);
        ensure!(s.choice_point == cur.choice_points.contains(&s.index), "choice point at {}", s.index);
    }
    Ok(())
}

async fn session_model() -> Outcome {
    let backend = Arc::new(ScriptedBackend::for_any_context(trace("regen.json")));
    let exp = expander(backend.clone());
    let mgr = SessionManager::new(expander(backend), ManagerConfig::default());
    let doc = "def mean(values):\n";
    let ctx = CompletionContext::new(doc, "", "python");
    let base = exp.backend().base_completion(&ctx, exp.params()).await.unwrap();
    let mut rng = StdRng::seed_from_u64(6);
    let mut ops = 0usize;
    for seq in 0..1000 {
        let id = mgr.create_session(doc, doc.len(), "python").unwrap().session_id;
        let view = mgr.run_completion(&id).await.map_err(|e| e.to_string())?;
        let mut snaps = vec![Snap {
            completion: base.clone(),
            hidden: BTreeSet::new(),
            choice_points: BTreeSet::new(),
        }];
        let mut index = 0usize;
        check_model(&view, &snaps, index).map_err(|e| format!("seq {seq} start: {e}"))?;
        let len = rng.random_range(1..=20);
        let mut last = view;
        for op in 0..len {
            let cur = snaps[index].clone();
            let n = cur.completion.steps.len();
            last = match rng.random_range(0..9) {
                0..=2 => {
                    let step = rng.random_range(0..n);
                    let d = &cur.completion.steps[step];
                    let rank = rng.random_range(0..d.candidates.len());
                    let got = mgr.select_alternative(&id, step, rank).await;
                    if rank == d.chosen {
                        ensure!(
                            got == Err(SessionError::InvalidAlternative { step, rank }),
                            "seq {seq} op {op}: select of chosen token accepted"
                        );
                        mgr.get(&id).unwrap()
                    } else {
                        let want = exp.apply_selection(&ctx, &cur.completion, step, rank).await.unwrap();
                        let mut choice_points: BTreeSet<usize> =
                            cur.choice_points.iter().copied().filter(|&p| p < step).collect();
                        choice_points.insert(step);
                        snaps.truncate(index + 1);
                        snaps.push(Snap {
                            completion: want.new_completion,
                            hidden: cur.hidden.iter().copied().filter(|&h| h < step).collect(),
                            choice_points,
                        });
                        index += 1;
                        got.map_err(|e| format!("seq {seq} op {op}: {e}"))?
                    }
                }
                3 | 4 => {
                    let out = mgr.navigate(&id, Direction::Back).await.unwrap();
                    ensure!(out.moved == (index > 0), "seq {seq} op {op}: back moved={}", out.moved);
                    index = index.saturating_sub(1);
                    out.session
                }
                5 | 6 => {
                    let out = mgr.navigate(&id, Direction::Forward).await.unwrap();
                    let can = index + 1 < snaps.len();
                    ensure!(out.moved == can, "seq {seq} op {op}: forward moved={}", out.moved);
                    if can {
                        index += 1;
                    }
                    out.session
                }
                _ => {
                    let step = rng.random_range(0..n);
                    snaps[index].hidden.insert(step);
                    mgr.hide_highlight(&id, step).await.unwrap()
                }
            };
            ops += 1;
            check_model(&last, &snaps, index).map_err(|e| format!("seq {seq} op {op}: {e}"))?;
            mgr.verify_history(&id)
                .unwrap()
                .map_err(|e| format!("seq {seq} op {op}: history replay: {e}"))?;
        }
        let fin = mgr.get(&id).unwrap();
        ensure!(fin.history == last.history, "seq {seq}: final history drifted");
        check_model(&fin, &snaps, index).map_err(|e| format!("seq {seq} final: {e}"))?;
        mgr.finalize(&id, tokensteer_core::session::FinalizeAction::Dismiss).await.unwrap();
    }
    Ok(format!("1000 sequences, {ops} operations"))
}

async fn end_to_end_login() -> Outcome {
    let s = common::spawn().await;
    let id = s.create_login().await;
    let (status, view) = s.post(&format!("/sessions/{id}/complete"), json!({})).await;
    ensure!(status == 200, "complete: {status} {view}");
    let view = s.settle(&id).await;
    let highlighted = view["completion"]["highlighted_steps"].clone();
    ensure!(highlighted[0] == json!(0), "hash step not highlighted: {highlighted}");

    let (_, alts) = s.get(&format!("/sessions/{id}/steps/0/alternatives")).await;
    let tokens: Vec<&str> = alts["alternatives"].as_array().unwrap().iter().map(|a| a["token_text"].as_str().unwrap()).collect();
    ensure!(tokens == ["md5", "pbkdf2_hmac", "scrypt", "blake2b"], "alternatives {tokens:?}");
    let probs: Vec<f64> = alts["alternatives"].as_array().unwrap().iter().map(|a| a["probability"].as_f64().unwrap()).collect();
    ensure!(probs.windows(2).all(|w| w[0] >= w[1]), "not probability-ordered: {probs:?}");
    ensure!(
        alts["alternatives"][2]["assessment"]["assessment"]["category"] == json!("Significant"),
        "scrypt not Significant"
    );

    let (status, sel) = s.post(&format!("/sessions/{id}/select"), json!({"step_index": 0, "alt_rank": 3})).await;
    ensure!(status == 200, "select: {status} {sel}");
    let text = sel["completion"]["text"].as_str().unwrap().to_string();
    ensure!(text.starts_with("scrypt(password.encode(), salt=os.urandom(16)"), "regenerated {text:?}");
    ensure!(sel["history"]["records"][0]["distance_to_base"] == json!(43), "distance {}", sel["history"]["records"][0]);

    let settled = s.settle(&id).await;
    let encode = settled["completion"]["steps"]
        .as_array()
        .unwrap()
        .iter()
        .find(|st| st["candidates"].as_array().unwrap().iter().any(|c| c["text"] == json!("\"utf-8\"")))
        .cloned()
        .ok_or("no encode step")?;
    let encode_step = encode["index"].as_u64().unwrap();
    ensure!(encode["annotation"]["highlighted"] == json!(true), "encode step not highlighted");
    let (_, hidden) = s.post(&format!("/sessions/{id}/hide"), json!({"step_index": encode_step})).await;
    let still: Vec<u64> = hidden["completion"]["highlighted_steps"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    ensure!(!still.contains(&encode_step), "encode step still highlighted");
    ensure!(hidden["completion"]["text"] == json!(text), "hide changed the text");

    let (status, fin) = s.post(&format!("/sessions/{id}/accept"), json!({})).await;
    ensure!(status == 200, "accept: {status}");
    let (doc, offset) = common::login_document();
    let prefix: String = doc.chars().take(offset).collect();
    let suffix: String = doc.chars().skip(offset).collect();
    let spliced = format!("{prefix}{text}{suffix}");
    ensure!(fin["final_text"] == json!(spliced), "final text is not the splice");

    let events = read_event_log(&s.log_dir.path().join(format!("{id}.jsonl"))).map_err(|e| e.to_string())?;
    let backend = Arc::new(ScriptedBackend::from_dir(fixtures().join("traces")).unwrap());
    let fresh = SessionManager::new(expander(backend), ManagerConfig::default());
    let replayed = fresh.replay(&events).await.map_err(|e| e.to_string())?;
    let live: SessionView = serde_json::from_value(fin["session"].clone()).map_err(|e| e.to_string())?;
    ensure!(replayed.normalized() == live.normalized(), "replayed state differs");
    Ok(format!("{} logged events replay to the identical final state", events.len()))
}

async fn wire_conformance() -> Outcome {
    let dir = fixtures().join("wire");
    let mut ok = 0;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.join("ok")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for path in paths {
        let body = std::fs::read(&path).unwrap();
        let raw: Value = serde_json::from_slice(&body).unwrap();
        let parsed = parse_completion_response(&body, 10).map_err(|e| format!("{}: {e}", path.display()))?;
        for (c, rc) in parsed.iter().zip(raw["choices"].as_array().unwrap()) {
            for (j, step) in c.steps.iter().enumerate() {
                let top = rc["logprobs"]["top_logprobs"][j].as_object().unwrap();
                let emitted = rc["logprobs"]["token_logprobs"][j].as_f64().unwrap();
                for cand in &step.candidates {
                    let lp = top.get(&cand.text).and_then(Value::as_f64).unwrap_or(emitted);
                    ensure!((cand.prob - lp.exp()).abs() <= 1e-9, "{}: step {j}", path.display());
                }
            }
        }
        ok += 1;
    }
    let expected: HashMap<String, String> = serde_json::from_str(
        &std::fs::read_to_string(dir.join("malformed/expected_errors.json")).unwrap(),
    )
    .unwrap();
    for (name, want) in &expected {
        let body = std::fs::read(dir.join("malformed").join(name)).unwrap();
        match parse_completion_response(&body, 10) {
            Ok(_) => return Err(format!("{name} parsed")),
            Err(e) => ensure!(&e.to_string() == want, "{name}: {e}"),
        }
    }
    Ok(format!("{ok} recorded responses, {} malformed with exact errors", expected.len()))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Check>)> = vec![
        ("entropy-suite", Duration::from_secs(1), Box::new(|| Box::pin(entropy_suite()))),
        ("corrected-entropy-suite", Duration::from_secs(5), Box::new(|| Box::pin(corrected_entropy_suite()))),
        ("highlight-budget", Duration::from_secs(1), Box::new(|| Box::pin(highlight_budget()))),
        ("edit-distance-suite", Duration::from_secs(30), Box::new(|| Box::pin(edit_distance_suite()))),
        ("regeneration-suite", Duration::from_secs(5), Box::new(|| Box::pin(regeneration_suite()))),
        ("session-model", Duration::from_secs(60), Box::new(|| Box::pin(session_model()))),
        ("end-to-end-login", Duration::from_secs(10), Box::new(|| Box::pin(end_to_end_login()))),
        ("wire-conformance", Duration::from_secs(5), Box::new(|| Box::pin(wire_conformance()))),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = rt.block_on(async {
            match tokio::time::timeout(budget, tokio::spawn(run())).await {
                Ok(Ok(r)) => r,
                Ok(Err(panic)) => Err(format!("panicked: {panic}")),
                Err(_) => Err(format!("exceeded {budget:?}")),
            }
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > budget => Err(format!("took {elapsed:?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({:.2}s): {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({:.2}s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
