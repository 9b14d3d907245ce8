//! Ideal-time replay: the warm-up hyperperiod followed by repeated copies of
//! the steady one, with every fusion read re-derived from the unit buffers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dag::{Dag, TaskType};
use crate::eval::{MetricsReport, eval_metrics};
use crate::expansion::{ExpansionError, build_instance_table};
use crate::metrics::{Metric, MetricConfig, MetricError};
use crate::schedule::{Job, Schedule, TaskJobs};
use crate::time::Time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Trigger,
    Start,
    Finish,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Trigger => "trigger",
            EventKind::Start => "start",
            EventKind::Finish => "finish",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Time,
    pub task: String,
    pub instance: usize,
    pub core: usize,
    pub kind: EventKind,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.time, self.task, self.instance, self.core, self.kind.name())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("replay needs at least one steady hyperperiod")]
    NoRepetition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    /// The unrolled timeline with observed reads.
    pub schedule: Schedule,
    pub report: MetricsReport,
    pub trace: Vec<TraceEvent>,
}

/// Runs the warm-up hyperperiod and then `n + 1` copies of the steady one,
/// so that `n = 1` covers the same span as the optimisation window.
/// Metrics are taken over all steady copies; makespan is reported relative
/// to the first two steady hyperperiods. `dag` is the branch-adjusted
/// graph of `schedule`.
pub fn replay(schedule: &Schedule, dag: &Dag, config: &MetricConfig, n: usize) -> Result<Replay, ReplayError> {
    if n == 0 {
        return Err(ReplayError::NoRepetition);
    }
    let table = build_instance_table(dag, n as u32 + 2)?;
    let hp = schedule.hp;
    let mut tasks: Vec<TaskJobs> = Vec::with_capacity(dag.len());
    for i in 0..dag.len() {
        let warm = table.count_at(i, 1);
        let c = table.steady(i);
        let src = &schedule.tasks[i].jobs;
        let mut jobs: Vec<Job> = src[..warm].to_vec();
        for b in 0..=n {
            for o in 0..c {
                let base = &src[warm + o];
                let shift = hp * b as Time;
                jobs.push(Job {
                    start: base.start + shift,
                    finish: base.finish + shift,
                    core: base.core,
                    phase: b + 2,
                    used: Vec::new(),
                });
            }
        }
        tasks.push(TaskJobs { id: dag.id(i).into(), jobs });
    }
    // last-is-best reads at each start, in topological order so that
    // upstream finishes are final
    for &i in dag.topo() {
        if !dag.kind(i).is_fusion() {
            continue;
        }
        for j in 0..tasks[i].jobs.len() {
            let t = tasks[i].jobs[j].start;
            let used = dag
                .preds(i)
                .iter()
                .map(|&p| tasks[p].jobs.iter().rposition(|q| q.finish <= t).map_or(1, |k| k + 1))
                .collect();
            tasks[i].jobs[j].used = used;
        }
    }
    let unrolled = Schedule { hp, delta: table.delta(), cores: schedule.cores, tasks };
    let mut report = eval_metrics(&unrolled, dag, &table, config)?;
    // makespan is absolute; fold every copy back onto the first steady pair
    for sm in &mut report.sinks {
        let k = dag.index_of(&sm.sink).unwrap();
        sm.ms = unrolled.tasks[k]
            .jobs
            .iter()
            .filter(|j| j.phase >= 2)
            .map(|j| j.finish - hp * (j.phase.max(3) - 3) as Time)
            .max()
            .unwrap_or(0);
    }
    let ms = report.sinks.iter().map(|s| s.ms).max().unwrap_or(0);
    report.totals.insert(Metric::Ms, ms);
    report.objective =
        config.levels()?.iter().map(|lvl| lvl.iter().map(|&(m, w)| w * report.totals[&m] as f64).sum()).collect();
    let trace = trace(&unrolled, dag);
    Ok(Replay { schedule: unrolled, report, trace })
}

/// Start, finish and trigger events of every job, ordered by time.
pub fn trace(schedule: &Schedule, dag: &Dag) -> Vec<TraceEvent> {
    let mut ev = Vec::new();
    for (i, t) in schedule.tasks.iter().enumerate() {
        for (k, job) in t.jobs.iter().enumerate() {
            let j = k + 1;
            let trig = match dag.kind(i) {
                TaskType::Sensor | TaskType::TFusion => Some(dag.period(i) * (j as Time - 1)),
                TaskType::Subscription => Some(schedule.job(dag.preds(i)[0], j).finish),
                _ => dag.preds(i).iter().zip(&job.used).map(|(&p, &u)| schedule.job(p, u).finish).max(),
            };
            let mk = |time, kind| TraceEvent { time, task: t.id.clone(), instance: j, core: job.core, kind };
            if let Some(tt) = trig {
                ev.push(mk(tt, EventKind::Trigger));
            }
            ev.push(mk(job.start, EventKind::Start));
            ev.push(mk(job.finish, EventKind::Finish));
        }
    }
    ev.sort_by(|a, b| (a.time, a.kind, &a.task, a.instance).cmp(&(b.time, b.kind, &b.task, b.instance)));
    ev
}
