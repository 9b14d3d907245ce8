//! File formats: DAG specs and schedules as TOML, per-case metrics as CSV,
//! traces as one event per line.

use std::io::Write;
use std::path::Path;

use fusched_core::dag::DagSpec;
use fusched_core::eval::MetricsReport;
use fusched_core::metrics::Metric;
use fusched_core::replay::TraceEvent;
use fusched_core::schedule::Schedule;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{what}: {source}")]
    Parse { what: String, source: toml::de::Error },
    #[error("serialising {what}: {source}")]
    Emit { what: &'static str, source: toml::ser::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let file = |source| IoError::File { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(file)?;
    }
    std::fs::write(path, text).map_err(file)
}

pub fn parse_spec(text: &str, what: &str) -> Result<DagSpec, IoError> {
    toml::from_str(text).map_err(|source| IoError::Parse { what: what.into(), source })
}

pub fn read_spec(path: &Path) -> Result<DagSpec, IoError> {
    parse_spec(&read_text(path)?, &path.display().to_string())
}

pub fn spec_to_toml(spec: &DagSpec) -> Result<String, IoError> {
    toml::to_string(spec).map_err(|source| IoError::Emit { what: "DAG spec", source })
}

pub fn parse_schedule(text: &str, what: &str) -> Result<Schedule, IoError> {
    toml::from_str(text).map_err(|source| IoError::Parse { what: what.into(), source })
}

pub fn schedule_to_toml(schedule: &Schedule) -> Result<String, IoError> {
    toml::to_string(schedule).map_err(|source| IoError::Emit { what: "schedule", source })
}

/// Column order of every metrics CSV. Frozen: tools downstream index by
/// position as well as by name.
pub const METRICS_COLUMNS: [&str; 10] =
    ["case", "status", "objective", "mrt", "mtd", "paoi", "wcrt", "ms", "wall_s", "seed"];

/// The metric columns of [`METRICS_COLUMNS`], in order.
pub const METRIC_ORDER: [Metric; 5] = [Metric::Mrt, Metric::Mtd, Metric::Paoi, Metric::Wcrt, Metric::Ms];

/// One line of a metrics CSV. Metric cells are empty without a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub case: String,
    pub status: String,
    /// Objective levels joined by `;`, highest priority first.
    pub objective: Vec<f64>,
    pub metrics: Option<[i64; 5]>,
    pub wall_s: f64,
    pub seed: Option<u64>,
}

impl MetricsRow {
    pub fn new(case: &str, status: &str, report: Option<&MetricsReport>, wall_s: f64) -> Self {
        MetricsRow {
            case: case.into(),
            status: status.into(),
            objective: report.map(|r| r.objective.clone()).unwrap_or_default(),
            metrics: report.map(|r| METRIC_ORDER.map(|m| r.get(m))),
            wall_s,
            seed: None,
        }
    }

    fn record(&self) -> Vec<String> {
        let objective = self.objective.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";");
        let mut rec = vec![self.case.clone(), self.status.clone(), objective];
        match self.metrics {
            Some(m) => rec.extend(m.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        rec.push(format!("{:.3}", self.wall_s));
        rec.push(self.seed.map(|s| s.to_string()).unwrap_or_default());
        rec
    }

    fn from_record(rec: &csv::StringRecord) -> Option<Self> {
        if rec.len() != METRICS_COLUMNS.len() {
            return None;
        }
        let objective = if rec[2].is_empty() {
            Vec::new()
        } else {
            rec[2].split(';').map(|v| v.parse().ok()).collect::<Option<Vec<f64>>>()?
        };
        let metrics = if rec[3].is_empty() {
            None
        } else {
            let mut m = [0; 5];
            for (k, slot) in m.iter_mut().enumerate() {
                *slot = rec[3 + k].parse().ok()?;
            }
            Some(m)
        };
        Some(MetricsRow {
            case: rec[0].into(),
            status: rec[1].into(),
            objective,
            metrics,
            wall_s: rec[8].parse().ok()?,
            seed: if rec[9].is_empty() { None } else { Some(rec[9].parse().ok()?) },
        })
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Rows of a metrics CSV; `None` when the header differs from
/// [`METRICS_COLUMNS`] or a row is malformed.
pub fn parse_metrics_csv(text: &str) -> Result<Option<Vec<MetricsRow>>, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(METRICS_COLUMNS) {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        match MetricsRow::from_record(&rec?) {
            Some(row) => rows.push(row),
            None => return Ok(None),
        }
    }
    Ok(Some(rows))
}

/// One event per line: `time task instance core event`.
pub fn trace_text(events: &[TraceEvent]) -> String {
    let mut out = Vec::new();
    for e in events {
        writeln!(out, "{e}").expect("writing to a Vec");
    }
    String::from_utf8(out).expect("trace is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusched_core::presets;

    #[test]
    fn spec_round_trips() {
        for p in presets::catalog() {
            let text = spec_to_toml(&p.dag).unwrap();
            assert_eq!(parse_spec(&text, &p.name).unwrap(), p.dag, "{}", p.name);
        }
    }

    #[test]
    fn hand_written_spec_parses() {
        let text = r#"
            cores = 2
            [[tasks]]
            id = "cam"
            wcet = 2
            period = 10
            type = "sensor"
            [[tasks]]
            id = "act"
            wcet = 1
            type = "sub"
            preds = ["cam"]
        "#;
        let spec = parse_spec(text, "inline").unwrap();
        assert_eq!(spec.cores, 2);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn bad_spec_names_its_source() {
        let err = parse_spec("tasks = 3", "broken.toml").unwrap_err();
        assert!(err.to_string().starts_with("broken.toml"));
    }

    #[test]
    fn metrics_csv_round_trips() {
        let rows = vec![
            MetricsRow {
                case: "a".into(),
                status: "optimal".into(),
                objective: vec![15.0, 2.5],
                metrics: Some([9, 6, 5, 3, 20]),
                wall_s: 0.25,
                seed: Some(7),
            },
            MetricsRow::new("b", "infeasible", None, 1.0),
        ];
        let text = metrics_csv(&rows).unwrap();
        assert!(text.starts_with("case,status,objective,mrt,mtd,paoi,wcrt,ms,wall_s,seed\n"));
        assert_eq!(parse_metrics_csv(&text).unwrap(), Some(rows));
    }

    #[test]
    fn foreign_header_is_rejected() {
        assert_eq!(parse_metrics_csv("x,y\n1,2\n").unwrap(), None);
    }
}
