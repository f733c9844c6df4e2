#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use tokensteer_core::analysis::{DedupAnalyzer, HeuristicAnalyzer};
use tokensteer_core::backend::{CompletionBackend, GenerationParams, ScriptedBackend, Trace};
use tokensteer_core::expander::{Expander, ExpanderConfig};
use tokensteer_core::session::{ManagerConfig, SessionManager};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn trace(name: &str) -> Trace {
    Trace::load(fixtures().join("traces").join(name)).unwrap()
}

pub fn expander(backend: Arc<dyn CompletionBackend>) -> Arc<Expander> {
    Arc::new(Expander::new(
        backend,
        Arc::new(DedupAnalyzer::new(Arc::new(HeuristicAnalyzer))),
        GenerationParams::default(),
        ExpanderConfig::default(),
    ))
}

pub fn manager(backend: ScriptedBackend) -> SessionManager {
    SessionManager::new(expander(Arc::new(backend)), ManagerConfig::default())
}

/// Document and cursor offset reproducing a trace's recorded context.
pub fn document_of(trace: &Trace) -> (String, usize) {
    let c = trace.context.as_ref().expect("trace has a context");
    (format!("{}{}", c.prefix, c.suffix), c.prefix.chars().count())
}
