use serde::{Deserialize, Serialize};
use tokensteer_core::decoding::{
    classify_step, shannon_entropy, HighlightConfig, ImportanceProfile, StepDistribution,
};

/// Backend-derived data for one entry; independent of highlight
/// parameters, so a sweep reuses it for every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryData {
    pub id: String,
    pub steps: Vec<StepDistribution>,
    pub profiles: Vec<ImportanceProfile>,
    pub categories: CategoryHistogram,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryHistogram {
    pub significant: usize,
    pub minor: usize,
    pub incorrect: usize,
    /// Alternatives whose assessment could not be obtained.
    pub unavailable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRow {
    pub id: String,
    pub step_count: usize,
    pub raw_entropies: Vec<f64>,
    pub corrected_entropies: Vec<f64>,
    pub highlighted_steps: Vec<usize>,
    pub highlighted_count: usize,
    pub categories: CategoryHistogram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    pub id: String,
    pub error: String,
}

/// Order statistics over one column. Median averages the two middle values
/// for even counts; p90 is the nearest-rank value at ceil(0.9·n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        let rank = (0.9 * n as f64).ceil() as usize;
        Some(Summary {
            count: n,
            min: v[0],
            median,
            p90: v[rank.max(1) - 1],
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub entries: usize,
    pub errors: usize,
    pub step_count: Option<Summary>,
    pub highlighted_count: Option<Summary>,
    /// Over every step of every entry.
    pub raw_entropy: Option<Summary>,
    pub corrected_entropy: Option<Summary>,
    pub categories: CategoryHistogram,
}

impl Aggregates {
    pub fn from_rows(rows: &[EntryRow], errors: usize) -> Aggregates {
        let col = |f: fn(&EntryRow) -> usize| rows.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
        let flat = |f: fn(&EntryRow) -> &Vec<f64>| rows.iter().flat_map(|r| f(r).iter().copied()).collect::<Vec<_>>();
        let mut categories = CategoryHistogram::default();
        for r in rows {
            categories.significant += r.categories.significant;
            categories.minor += r.categories.minor;
            categories.incorrect += r.categories.incorrect;
            categories.unavailable += r.categories.unavailable;
        }
        Aggregates {
            entries: rows.len(),
            errors,
            step_count: Summary::of(&col(|r| r.step_count)),
            highlighted_count: Summary::of(&col(|r| r.highlighted_count)),
            raw_entropy: Summary::of(&flat(|r| &r.raw_entropies)),
            corrected_entropy: Summary::of(&flat(|r| &r.corrected_entropies)),
            categories,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub highlight: HighlightConfig,
    pub entries: Vec<EntryRow>,
    pub errors: Vec<EntryError>,
    pub aggregates: Aggregates,
}

pub fn entry_row(data: &EntryData, cfg: &HighlightConfig) -> EntryRow {
    let mut raw = Vec::with_capacity(data.steps.len());
    let mut corrected = Vec::with_capacity(data.steps.len());
    let mut highlighted = Vec::new();
    for (i, (dist, profile)) in data.steps.iter().zip(&data.profiles).enumerate() {
        let probs: Vec<f64> = dist.candidates.iter().map(|c| c.prob).collect();
        raw.push(shannon_entropy(&probs).unwrap_or(0.0));
        let a = classify_step(dist, profile, cfg).expect("profile built from the same step");
        corrected.push(a.corrected_entropy);
        if a.highlighted {
            highlighted.push(i);
        }
    }
    EntryRow {
        id: data.id.clone(),
        step_count: data.steps.len(),
        raw_entropies: raw,
        corrected_entropies: corrected,
        highlighted_count: highlighted.len(),
        highlighted_steps: highlighted,
        categories: data.categories,
    }
}

/// Assembles a report; rows and errors are sorted by entry id.
pub fn build_report(data: &[EntryData], errors: &[EntryError], cfg: &HighlightConfig) -> ProfileReport {
    let mut entries: Vec<EntryRow> = data.iter().map(|d| entry_row(d, cfg)).collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let mut errors = errors.to_vec();
    errors.sort_by(|a, b| a.id.cmp(&b.id));
    let aggregates = Aggregates::from_rows(&entries, errors.len());
    ProfileReport {
        highlight: *cfg,
        entries,
        errors,
        aggregates,
    }
}

/// CSV header; one row per entry, error rows carry `status = error`.
pub const CSV_COLUMNS: [&str; 13] = [
    "id",
    "status",
    "step_count",
    "highlighted_count",
    "highlighted_steps",
    "significant",
    "minor",
    "incorrect",
    "unavailable",
    "max_raw_entropy",
    "max_corrected_entropy",
    "mean_corrected_entropy",
    "error",
];

fn max(v: &[f64]) -> String {
    v.iter().copied().reduce(f64::max).map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn mean(v: &[f64]) -> String {
    if v.is_empty() {
        return String::new();
    }
    format!("{:.6}", v.iter().sum::<f64>() / v.len() as f64)
}

pub fn write_csv<W: std::io::Write>(report: &ProfileReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &report.entries {
        let steps: Vec<String> = r.highlighted_steps.iter().map(usize::to_string).collect();
        w.write_record([
            r.id.clone(),
            "ok".into(),
            r.step_count.to_string(),
            r.highlighted_count.to_string(),
            steps.join(" "),
            r.categories.significant.to_string(),
            r.categories.minor.to_string(),
            r.categories.incorrect.to_string(),
            r.categories.unavailable.to_string(),
            max(&r.raw_entropies),
            max(&r.corrected_entropies),
            mean(&r.corrected_entropies),
            String::new(),
        ])?;
    }
    for e in &report.errors {
        let mut rec = vec![String::new(); CSV_COLUMNS.len()];
        rec[0] = e.id.clone();
        rec[1] = "error".into();
        rec[12] = e.error.clone();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        assert_eq!(Summary::of(&[]), None);
        let s = Summary::of(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.min, s.median, s.p90, s.max, s.mean), (1.0, 2.5, 4.0, 4.0, 2.5));
        let s = Summary::of(&(1..=10).map(f64::from).collect::<Vec<_>>()).unwrap();
        assert_eq!((s.median, s.p90), (5.5, 9.0));
        assert_eq!(Summary::of(&[7.0]).unwrap().p90, 7.0);
    }

    #[test]
    fn empty_report_has_empty_aggregates() {
        let r = build_report(&[], &[], &HighlightConfig::default());
        assert_eq!(r.aggregates.entries, 0);
        assert_eq!(r.aggregates.highlighted_count, None);
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }
}
