//! Lexicographic solving of an [`IlpModel`] and decoding of the result.

use std::fmt;
use std::time::{Duration, Instant};

use fusched_core::eval::{MetricsReport, eval_metrics};
use fusched_core::lp::{Cmp, Group, LinearModel, VarKind};
use fusched_core::metrics::MetricError;
use fusched_core::model::{IlpModel, Problem};
use fusched_core::schedule::{ExtractError, Schedule, ValidationReport, extract_schedule, validate};

use crate::backend::{BackendError, Limits, MilpBackend, RawStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    /// The time limit hit with an incumbent schedule.
    FeasibleTimeout,
    /// The time limit hit before any schedule was found.
    Timeout,
    Infeasible,
    Error,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeout => "feasible-timeout",
            SolveStatus::Timeout => "timeout",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Error => "error",
        }
    }

    pub fn has_schedule(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeout)
    }

    /// Process exit code of a run ending in this status.
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Optimal => 0,
            SolveStatus::FeasibleTimeout | SolveStatus::Timeout => 2,
            SolveStatus::Infeasible => 3,
            SolveStatus::Error => 5,
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// One value per model variable; empty without a schedule.
    pub assignment: Vec<f64>,
    /// Value of every objective level at `assignment`.
    pub objective: Vec<f64>,
    pub wall_time: Duration,
    pub message: Option<String>,
}

impl SolveOutcome {
    fn without(status: SolveStatus, wall_time: Duration, message: Option<String>) -> Self {
        SolveOutcome { status, assignment: Vec::new(), objective: Vec::new(), wall_time, message }
    }
}

/// Slack allowed when a solved level is frozen for the next one. Metrics are
/// integral, so this only absorbs floating point noise.
fn level_slack(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Solves the levels in priority order, freezing each optimum before the
/// next. The returned assignment is re-checked row by row.
pub fn solve(model: &IlpModel, backend: &dyn MilpBackend, limits: &Limits) -> SolveOutcome {
    let t0 = Instant::now();
    if let Some(why) = &model.infeasible {
        return SolveOutcome::without(SolveStatus::Infeasible, t0.elapsed(), Some(why.clone()));
    }
    let mut lp = model.lp.clone();
    let mut x: Option<Vec<f64>> = None;
    let mut status = SolveStatus::Optimal;
    for (level, obj) in model.objective.iter().enumerate() {
        let mut lim = limits.clone();
        if let Some(t) = limits.time_limit {
            let left = t.saturating_sub(t0.elapsed());
            if left.is_zero() {
                status = if x.is_some() { SolveStatus::FeasibleTimeout } else { SolveStatus::Timeout };
                break;
            }
            lim.time_limit = Some(left);
        }
        let raw = match backend.solve(&lp, obj, x.as_deref(), &lim) {
            Ok(r) => r,
            Err(e) => return SolveOutcome::without(SolveStatus::Error, t0.elapsed(), Some(e.to_string())),
        };
        match (raw.status, raw.x) {
            (RawStatus::Infeasible, _) if level == 0 => {
                return SolveOutcome::without(SolveStatus::Infeasible, t0.elapsed(), None);
            }
            (RawStatus::Infeasible, _) => {
                let msg = format!("level {level} infeasible after freezing level {}", level - 1);
                return SolveOutcome::without(SolveStatus::Error, t0.elapsed(), Some(msg));
            }
            (RawStatus::TimeLimit, None) => {
                status = if x.is_some() { SolveStatus::FeasibleTimeout } else { SolveStatus::Timeout };
                break;
            }
            (RawStatus::TimeLimit, Some(v)) => {
                x = Some(polish(&lp, obj, v, backend, limits));
                status = SolveStatus::FeasibleTimeout;
                break;
            }
            (RawStatus::Optimal, None) => {
                let msg = String::from("engine reported optimal without a solution");
                return SolveOutcome::without(SolveStatus::Error, t0.elapsed(), Some(msg));
            }
            (RawStatus::Optimal, Some(v)) => {
                let v = polish(&lp, obj, v, backend, limits);
                let val = obj.iter().map(|&(k, c)| c * v[k]).sum::<f64>();
                lp.add(Group::Fix, obj.clone(), Cmp::Le, val + level_slack(val));
                x = Some(v);
            }
        }
    }
    let Some(mut x) = x else {
        return SolveOutcome::without(status, t0.elapsed(), None);
    };
    if model.objective.len() > 1 {
        // later levels leave earlier epigraphs anywhere up to their frozen
        // value plus slack; pull them all down to the metrics they bound
        let all: Vec<(usize, f64)> = model.objective.iter().flatten().copied().collect();
        x = polish(&lp, &all, x, backend, limits);
    }
    let wall_time = t0.elapsed();
    let broken = model.check_assignment(&x);
    if !broken.is_empty() {
        let msg = format!("{} broken rows or bounds, first {:?}", broken.len(), broken[0]);
        return SolveOutcome::without(SolveStatus::Error, wall_time, Some(msg));
    }
    let objective = (0..model.objective.len()).map(|l| model.level_value(l, &x)).collect();
    SolveOutcome { status, assignment: x, objective, wall_time, message: None }
}

/// Rounds integer variables and re-solves the continuous rest with those
/// fixed, so that big-M rows hold exactly instead of within the engine's
/// integrality tolerance. Falls back to `x` if that fails.
fn polish(lp: &LinearModel, obj: &[(usize, f64)], x: Vec<f64>, backend: &dyn MilpBackend, limits: &Limits) -> Vec<f64> {
    let mut fixed = lp.clone();
    for (k, v) in fixed.vars.iter_mut().enumerate() {
        if v.kind != VarKind::Continuous {
            let r = x[k].round();
            v.lb = r;
            v.ub = r;
        }
    }
    let lim = Limits { time_limit: None, log_file: None, ..limits.clone() };
    match backend.solve(&fixed, obj, None, &lim) {
        Ok(r) if r.status == RawStatus::Optimal => {
            let mut y = r.x.unwrap_or(x);
            for (k, v) in fixed.vars.iter().enumerate() {
                if v.kind != VarKind::Continuous {
                    y[k] = v.lb;
                }
            }
            y
        }
        _ => x,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A solved problem with its decoded schedule, independent validation and
/// independently evaluated metrics.
#[derive(Clone, Debug)]
pub struct Solved {
    pub outcome: SolveOutcome,
    pub schedule: Option<Schedule>,
    pub validation: Option<ValidationReport>,
    pub report: Option<MetricsReport>,
}

pub fn solve_problem(problem: &Problem, backend: &dyn MilpBackend, limits: &Limits) -> Result<Solved, CaseError> {
    let outcome = solve(&problem.model, backend, limits);
    if !outcome.status.has_schedule() {
        return Ok(Solved { outcome, schedule: None, validation: None, report: None });
    }
    let schedule = extract_schedule(problem, &outcome.assignment)?;
    let validation = validate(&schedule, &problem.dag, &problem.table);
    let report = eval_metrics(&schedule, &problem.dag, &problem.table, &problem.config)?;
    Ok(Solved { outcome, schedule: Some(schedule), validation: Some(validation), report: Some(report) })
}
