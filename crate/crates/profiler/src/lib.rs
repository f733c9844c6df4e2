//! Runs prompt corpora through the steering pipeline and reports how many
//! decision points get highlighted, for tuning and regression checks.

pub mod corpus;
pub mod report;
pub mod run;
pub mod sweep;

pub use corpus::{load_corpus, parse_corpus, CorpusEntry, CorpusError};
pub use report::{build_report, write_csv, ProfileReport, CSV_COLUMNS};
