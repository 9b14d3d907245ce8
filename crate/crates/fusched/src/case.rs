//! One scheduling case end to end: validate, model, solve, check, replay and
//! write the artifacts.

use std::path::Path;

use fusched_core::dag::{DagErrors, DagSpec};
use fusched_core::model::{ModelError, ModelOptions, Problem};
use fusched_core::replay::{Replay, ReplayError, replay, trace};

use crate::backend::{Limits, MilpBackend};
use crate::io::{self, IoError, MetricsRow};
use crate::solve::{CaseError, SolveStatus, Solved, solve_problem};
use crate::svg::emit_gantt;

/// Exit code for unusable input: bad spec, unknown preset, unreadable file.
pub const EXIT_INPUT: i32 = 4;
/// Exit code for engine failures and internal inconsistencies.
pub const EXIT_SOLVER: i32 = 5;

#[derive(Clone, Debug)]
pub struct CaseOptions {
    pub model: ModelOptions,
    pub limits: Limits,
    /// Hyperperiods replayed after solving; 0 skips the replay.
    pub replay_hps: usize,
    /// Also write the model in LP format.
    pub write_lp: bool,
}

impl Default for CaseOptions {
    fn default() -> Self {
        CaseOptions { model: ModelOptions::default(), limits: Limits::default(), replay_hps: 100, write_lp: false }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid DAG spec:\n{0}")]
    Spec(#[from] DagErrors),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] CaseError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) | RunError::Model(_) | RunError::Io(_) | RunError::Input(_) => EXIT_INPUT,
            RunError::Solve(_) | RunError::Replay(_) => EXIT_SOLVER,
        }
    }
}

pub struct CaseResult {
    pub name: String,
    pub problem: Problem,
    pub solved: Solved,
    pub replay: Option<Replay>,
}

impl CaseResult {
    pub fn status(&self) -> SolveStatus {
        let s = self.solved.outcome.status;
        // a schedule the independent checks reject is an engine failure
        if s.has_schedule() && !self.solved.validation.as_ref().is_some_and(|v| v.is_valid()) {
            SolveStatus::Error
        } else {
            s
        }
    }

    pub fn metrics_row(&self) -> MetricsRow {
        let wall = self.solved.outcome.wall_time.as_secs_f64();
        MetricsRow::new(&self.name, self.status().name(), self.solved.report.as_ref(), wall)
    }
}

pub fn run_case(
    name: &str,
    spec: &DagSpec,
    opts: &CaseOptions,
    backend: &dyn MilpBackend,
) -> Result<CaseResult, RunError> {
    let dag = spec.validate()?;
    let problem = Problem::new(&dag, &opts.model)?;
    let solved = solve_problem(&problem, backend, &opts.limits)?;
    let replay = match &solved.schedule {
        Some(s) if opts.replay_hps > 0 && solved.validation.as_ref().is_some_and(|v| v.is_valid()) => {
            Some(replay(s, &problem.dag, &problem.config, opts.replay_hps)?)
        }
        _ => None,
    };
    Ok(CaseResult { name: name.into(), problem, solved, replay })
}

/// Writes `spec.toml`, `metrics.csv` and, with a schedule, `schedule.toml`,
/// `trace.txt`, `gantt.svg`, `replay.csv` and `replay-trace.txt`.
pub fn write_artifacts(res: &CaseResult, dir: &Path, write_lp: bool) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.display().to_string(), source })?;
    io::write_text(&dir.join("spec.toml"), &io::spec_to_toml(res.problem.dag.spec())?)?;
    io::write_text(&dir.join("metrics.csv"), &io::metrics_csv(&[res.metrics_row()])?)?;
    if write_lp {
        io::write_text(&dir.join("model.lp"), &res.problem.model.to_lp())?;
    }
    if let Some(s) = &res.solved.schedule {
        io::write_text(&dir.join("schedule.toml"), &io::schedule_to_toml(s)?)?;
        io::write_text(&dir.join("trace.txt"), &io::trace_text(&trace(s, &res.problem.dag)))?;
        io::write_text(&dir.join("gantt.svg"), &emit_gantt(s, &res.problem.dag))?;
    }
    if let Some(r) = &res.replay {
        let row = MetricsRow::new(&res.name, "replay", Some(&r.report), 0.0);
        io::write_text(&dir.join("replay.csv"), &io::metrics_csv(&[row])?)?;
        io::write_text(&dir.join("replay-trace.txt"), &io::trace_text(&r.trace))?;
    }
    Ok(())
}
