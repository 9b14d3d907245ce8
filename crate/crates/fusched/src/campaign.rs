//! Random-DAG campaigns: generate, solve in a bounded worker pool, aggregate.
//!
//! Layout under the output directory:
//! `manifest.toml` (generator settings and per-case seeds),
//! `cases/<name>/` (per-case artifacts), `campaign.csv` (one metrics row per
//! case), `distribution.csv` (metric statistics over schedulable cases) and
//! `summary.csv` (status counts and schedulability ratio). A rerun with the
//! same manifest reuses every case that already has a non-error result.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};

use fusched_core::generator::{GenConfig, generate};
use serde::{Deserialize, Serialize};

use crate::backend::MilpBackend;
use crate::case::{CaseOptions, run_case, write_artifacts};
use crate::io::{self, IoError, METRIC_ORDER, MetricsRow};
use crate::solve::SolveStatus;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub name: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: GenConfig,
    pub cases: Vec<ManifestCase>,
}

impl Manifest {
    /// Case `k` uses seed `generator.seed + k`.
    pub fn new(generator: &GenConfig, cases: usize) -> Self {
        let cases = (0..cases)
            .map(|k| ManifestCase { name: format!("case-{k:04}"), seed: generator.seed.wrapping_add(k as u64) })
            .collect();
        Manifest { generator: generator.clone(), cases }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignConfig {
    pub generator: GenConfig,
    pub cases: usize,
    pub workers: usize,
    pub case: CaseOptions,
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0} holds a manifest for a different campaign")]
    ManifestMismatch(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResult {
    /// One row per case, in manifest order.
    pub rows: Vec<MetricsRow>,
    /// Cases answered from a previous run.
    pub reused: usize,
}

impl CampaignResult {
    fn count(&self, status: SolveStatus) -> usize {
        self.rows.iter().filter(|r| r.status == status.name()).count()
    }

    /// Cases with a schedule (optimal or feasible at the time limit) over
    /// all cases.
    pub fn schedulability_ratio(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let ok = self.count(SolveStatus::Optimal) + self.count(SolveStatus::FeasibleTimeout);
        ok as f64 / self.rows.len() as f64
    }

    pub fn summary_csv(&self) -> Result<String, IoError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cases",
            "optimal",
            "feasible_timeout",
            "timeout",
            "infeasible",
            "error",
            "schedulability_ratio",
        ])?;
        let mut rec = vec![self.rows.len().to_string()];
        for s in [
            SolveStatus::Optimal,
            SolveStatus::FeasibleTimeout,
            SolveStatus::Timeout,
            SolveStatus::Infeasible,
            SolveStatus::Error,
        ] {
            rec.push(self.count(s).to_string());
        }
        rec.push(format!("{:.4}", self.schedulability_ratio()));
        w.write_record(rec)?;
        finish(w)
    }

    /// Count, quartiles, extremes and mean of each metric over the cases
    /// that have a schedule.
    pub fn distribution_csv(&self) -> Result<String, IoError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "count", "min", "p25", "median", "p75", "max", "mean"])?;
        for (k, m) in METRIC_ORDER.iter().enumerate() {
            let mut v: Vec<i64> = self.rows.iter().filter_map(|r| r.metrics.map(|x| x[k])).collect();
            v.sort_unstable();
            let mut rec = vec![m.name().to_string(), v.len().to_string()];
            if v.is_empty() {
                rec.extend(std::iter::repeat_n(String::new(), 6));
            } else {
                let q = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1].to_string();
                let mean = v.iter().sum::<i64>() as f64 / v.len() as f64;
                rec.extend([q(0.0), q(0.25), q(0.5), q(0.75), q(1.0), format!("{mean:.3}")]);
            }
            w.write_record(rec)?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, IoError> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn previous_row(dir: &Path) -> Option<MetricsRow> {
    let text = std::fs::read_to_string(dir.join("metrics.csv")).ok()?;
    let mut rows = io::parse_metrics_csv(&text).ok()??;
    let row = rows.pop()?;
    (rows.is_empty() && row.status != SolveStatus::Error.name()).then_some(row)
}

fn run_one(
    case: &ManifestCase,
    generator: &GenConfig,
    opts: &CaseOptions,
    backend: &dyn MilpBackend,
    dir: &Path,
) -> MetricsRow {
    let failed = |msg: String| {
        let _ = io::write_text(&dir.join("error.txt"), &format!("{msg}\n"));
        MetricsRow::new(&case.name, SolveStatus::Error.name(), None, 0.0)
    };
    let spec = match generate(&GenConfig { seed: case.seed, ..generator.clone() }) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let mut row = match run_case(&case.name, &spec, opts, backend) {
        Ok(res) => match write_artifacts(&res, dir, opts.write_lp) {
            Ok(()) => res.metrics_row(),
            Err(e) => failed(e.to_string()),
        },
        Err(e) => failed(e.to_string()),
    };
    row.seed = Some(case.seed);
    // rewrite so that the stored row carries the seed too
    if let Ok(text) = io::metrics_csv(std::slice::from_ref(&row)) {
        let _ = io::write_text(&dir.join("metrics.csv"), &text);
    }
    row
}

pub fn run_campaign(
    cfg: &CampaignConfig,
    backend: &dyn MilpBackend,
    out: &Path,
) -> Result<CampaignResult, CampaignError> {
    let manifest = Manifest::new(&cfg.generator, cfg.cases);
    let path = out.join("manifest.toml");
    if path.exists() {
        let text = io::read_text(&path)?;
        let old: Option<Manifest> = toml::from_str(&text).ok();
        if old.as_ref() != Some(&manifest) {
            return Err(CampaignError::ManifestMismatch(path));
        }
    } else {
        let text = toml::to_string(&manifest).map_err(|source| IoError::Emit { what: "manifest", source })?;
        io::write_text(&path, &text)?;
    }

    let dirs: Vec<PathBuf> = manifest.cases.iter().map(|c| out.join("cases").join(&c.name)).collect();
    let mut rows: Vec<Option<MetricsRow>> = dirs.iter().map(|d| previous_row(d)).collect();
    let reused = rows.iter().flatten().count();
    let todo: Vec<usize> = (0..rows.len()).filter(|&k| rows[k].is_none()).collect();

    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(todo.len()));
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.clamp(1, todo.len().max(1)) {
            scope.spawn(|| {
                while let Some(&k) = todo.get(next.fetch_add(1, Ordering::Relaxed)) {
                    let row = run_one(&manifest.cases[k], &manifest.generator, &cfg.case, backend, &dirs[k]);
                    done.lock().expect("no worker panics while holding the lock").push((k, row));
                }
            });
        }
    });
    for (k, row) in done.into_inner().expect("workers have joined") {
        rows[k] = Some(row);
    }

    let result = CampaignResult { rows: rows.into_iter().map(|r| r.expect("every case ran")).collect(), reused };
    io::write_text(&out.join("campaign.csv"), &io::metrics_csv(&result.rows)?)?;
    io::write_text(&out.join("distribution.csv"), &result.distribution_csv()?)?;
    io::write_text(&out.join("summary.csv"), &result.summary_csv()?)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(status: SolveStatus, mrt: i64) -> MetricsRow {
        MetricsRow {
            case: "c".into(),
            status: status.name().into(),
            objective: vec![],
            metrics: status.has_schedule().then_some([mrt, 0, 0, 0, 0]),
            wall_s: 0.0,
            seed: None,
        }
    }

    #[test]
    fn ratio_counts_incumbents_as_schedulable() {
        let r = CampaignResult {
            rows: vec![
                row(SolveStatus::Optimal, 1),
                row(SolveStatus::FeasibleTimeout, 2),
                row(SolveStatus::Infeasible, 0),
                row(SolveStatus::Timeout, 0),
            ],
            reused: 0,
        };
        assert_eq!(r.schedulability_ratio(), 0.5);
        assert!(r.summary_csv().unwrap().ends_with("4,1,1,1,1,0,0.5000\n"));
    }

    #[test]
    fn quartiles_use_nearest_rank() {
        let rows = (1..=8).map(|v| row(SolveStatus::Optimal, v)).collect();
        let r = CampaignResult { rows, reused: 0 };
        let text = r.distribution_csv().unwrap();
        assert!(text.contains("\nmrt,8,1,2,4,6,8,4.500\n"), "{text}");
    }

    #[test]
    fn manifest_seeds_follow_the_base_seed() {
        let m = Manifest::new(&GenConfig { seed: 40, ..GenConfig::default() }, 3);
        assert_eq!(m.cases.iter().map(|c| c.seed).collect::<Vec<_>>(), [40, 41, 42]);
        assert_eq!(m.cases[2].name, "case-0002");
        let text = toml::to_string(&m).unwrap();
        assert_eq!(toml::from_str::<Manifest>(&text).unwrap(), m);
    }
}
