//! Solved schedules: extraction from a model assignment and independent
//! validation against the triggering semantics.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dag::{Dag, TaskType};
use crate::expansion::InstanceTable;
use crate::model::Problem;
use crate::time::{Time, integral};

/// One executed instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub start: Time,
    pub finish: Time,
    pub core: usize,
    pub phase: usize,
    /// Producer index read on each incoming edge (fusion tasks only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub used: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskJobs {
    pub id: String,
    pub jobs: Vec<Job>,
}

/// Start, finish and core of every instance over Δ, plus the data-flow
/// choices of fusion instances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub hp: Time,
    pub delta: Time,
    pub cores: usize,
    pub tasks: Vec<TaskJobs>,
}

impl Schedule {
    pub fn job(&self, task: usize, j: usize) -> &Job {
        &self.tasks[task].jobs[j - 1]
    }

    pub fn job_count(&self) -> usize {
        self.tasks.iter().map(|t| t.jobs.len()).sum()
    }

    /// Jobs of the whole window as (task, index, job), sorted by start time.
    pub fn timeline(&self) -> Vec<(usize, usize, &Job)> {
        let mut v: Vec<(usize, usize, &Job)> = self
            .tasks
            .iter()
            .enumerate()
            .flat_map(|(i, t)| t.jobs.iter().enumerate().map(move |(k, job)| (i, k + 1, job)))
            .collect();
        v.sort_by_key(|&(i, j, job)| (job.start, job.core, i, j));
        v
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("no assignment to decode")]
    NoAssignment,
    #[error("assignment has {got} values, model has {want} variables")]
    Length { got: usize, want: usize },
    #[error("variable `{name}` has non-integral value {value}")]
    Fractional { name: String, value: f64 },
}

/// Decodes a model assignment. Times must be integral within 1e-6.
pub fn extract_schedule(problem: &Problem, x: &[f64]) -> Result<Schedule, ExtractError> {
    let m = &problem.model;
    if x.is_empty() {
        return Err(ExtractError::NoAssignment);
    }
    if x.len() != m.lp.vars.len() {
        return Err(ExtractError::Length { got: x.len(), want: m.lp.vars.len() });
    }
    let int = |v: usize| {
        integral(x[v], 1e-6).ok_or_else(|| ExtractError::Fractional { name: m.lp.vars[v].name.clone(), value: x[v] })
    };
    let dag = &problem.dag;
    let table = &problem.table;
    let mut tasks = Vec::with_capacity(dag.len());
    for i in 0..dag.len() {
        let mut jobs = Vec::with_capacity(table.count(i));
        for j in 1..=table.count(i) {
            let start = int(m.index.s[i][j - 1])?;
            let finish = int(m.index.f[i][j - 1])?;
            let core = if m.cores >= 2 { m.index.core_of(x, i, j) } else { 0 };
            let used = if dag.kind(i).is_fusion() {
                (0..dag.preds(i).len()).map(|k| m.index.used(x, i, k, j)).collect()
            } else {
                Vec::new()
            };
            jobs.push(Job { start, finish, core, phase: table.phase(i, j), used });
        }
        tasks.push(TaskJobs { id: dag.id(i).into(), jobs });
    }
    Ok(Schedule { hp: table.hp(), delta: table.delta(), cores: m.cores, tasks })
}

/// A broken scheduling rule, identified by task index and 1-based instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Shape { detail: String },
    Duration { task: usize, j: usize },
    Core { task: usize, j: usize },
    Overlap { a: (usize, usize), b: (usize, usize) },
    Release { task: usize, j: usize },
    Order { task: usize, j: usize },
    Precedence { task: usize, j: usize, pred: usize, pj: usize },
    UsedRange { task: usize, j: usize, edge: usize },
    NonMonotone { task: usize, j: usize, edge: usize },
    Reused { task: usize, edge: usize, pj: usize },
    NotFresh { task: usize, j: usize },
    Deadline { task: usize, j: usize, finish: Time, deadline: Time },
    Copy { task: usize, j: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A fusion instance read an input older than the newest one finished
/// before it started.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaleRead {
    pub task: usize,
    pub j: usize,
    pub edge: usize,
    pub used: usize,
    pub latest: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<StaleRead>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks every scheduling rule by arithmetic on the schedule alone.
/// `dag` is the branch-adjusted graph the schedule was built for.
pub fn validate(schedule: &Schedule, dag: &Dag, table: &InstanceTable) -> ValidationReport {
    let mut r = ValidationReport::default();
    let v = &mut r.violations;
    if schedule.tasks.len() != dag.len() {
        v.push(Violation::Shape { detail: alloc::format!("{} tasks, expected {}", schedule.tasks.len(), dag.len()) });
        return r;
    }
    for i in 0..dag.len() {
        let n = schedule.tasks[i].jobs.len();
        if n != table.count(i) {
            v.push(Violation::Shape {
                detail: alloc::format!("`{}` has {n} instances, expected {}", dag.id(i), table.count(i)),
            });
            return r;
        }
        for (k, job) in schedule.tasks[i].jobs.iter().enumerate() {
            let want = if dag.kind(i).is_fusion() { dag.preds(i).len() } else { 0 };
            if job.used.len() != want {
                v.push(Violation::Shape {
                    detail: alloc::format!("instance {} of `{}` lists {} reads", k + 1, dag.id(i), job.used.len()),
                });
                return r;
            }
        }
    }

    let job = |i: usize, j: usize| schedule.job(i, j);
    for i in 0..dag.len() {
        let e = dag.wcet(i);
        let d = dag.deadline(i);
        let n = table.count(i);
        for j in 1..=n {
            let jb = job(i, j);
            if jb.finish - jb.start != e {
                v.push(Violation::Duration { task: i, j });
            }
            if jb.core >= schedule.cores.max(1) {
                v.push(Violation::Core { task: i, j });
            }
            if j > 1 && jb.start < job(i, j - 1).finish {
                v.push(Violation::Order { task: i, j });
            }
            let release = match dag.kind(i) {
                TaskType::Sensor | TaskType::TFusion => {
                    let rel = table.release(i, j).unwrap();
                    if jb.start < rel {
                        v.push(Violation::Release { task: i, j });
                    }
                    Some(rel)
                }
                TaskType::Subscription => {
                    let p = dag.preds(i)[0];
                    if jb.start < job(p, j).finish {
                        v.push(Violation::Precedence { task: i, j, pred: p, pj: j });
                    }
                    Some(job(p, j).finish)
                }
                _ => None,
            };
            let mut latest_read = Time::MIN;
            if dag.kind(i).is_fusion() {
                for (k, &p) in dag.preds(i).iter().enumerate() {
                    let pj = jb.used[k];
                    if pj < 1 || pj > table.count(p) {
                        v.push(Violation::UsedRange { task: i, j, edge: k });
                        continue;
                    }
                    let pf = job(p, pj).finish;
                    latest_read = latest_read.max(pf);
                    if jb.start < pf {
                        v.push(Violation::Precedence { task: i, j, pred: p, pj });
                    }
                    if j > 1 && job(i, j - 1).used[k] > pj {
                        v.push(Violation::NonMonotone { task: i, j, edge: k });
                    }
                    let newest = (1..=table.count(p)).rev().find(|&q| job(p, q).finish <= jb.start).unwrap_or(0);
                    if newest > pj {
                        r.warnings.push(StaleRead { task: i, j, edge: k, used: pj, latest: newest });
                    }
                }
                if dag.kind(i) == TaskType::IFusion && j > 1 {
                    let inc: isize =
                        (0..dag.preds(i).len()).map(|k| jb.used[k] as isize - job(i, j - 1).used[k] as isize).sum();
                    if inc < 1 {
                        v.push(Violation::NotFresh { task: i, j });
                    }
                }
            }
            let abs_deadline = release.unwrap_or(latest_read) + d;
            if jb.finish > abs_deadline {
                v.push(Violation::Deadline { task: i, j, finish: jb.finish, deadline: abs_deadline });
            }
        }
        if dag.kind(i) == TaskType::WFusion {
            for k in 0..dag.preds(i).len() {
                for j in 2..=n {
                    if job(i, j).used[k] == job(i, j - 1).used[k] {
                        v.push(Violation::Reused { task: i, edge: k, pj: job(i, j).used[k] });
                    }
                }
            }
        }
        // later hyperperiods repeat the second one
        let c = table.steady(i);
        for p in 3..=table.k() as usize {
            let shift = (p - 2) * c;
            for j in table.steady_block(i) {
                let (a, b) = (job(i, j), job(i, j + shift));
                let hp_shift = table.hp() * (p - 2) as Time;
                let reads_shift = dag
                    .preds(i)
                    .iter()
                    .enumerate()
                    .all(|(k, &q)| b.used.get(k) == a.used.get(k).map(|u| u + (p - 2) * table.steady(q)).as_ref());
                if b.start != a.start + hp_shift || b.core != a.core || !reads_shift {
                    v.push(Violation::Copy { task: i, j: j + shift });
                }
            }
        }
    }

    let mut jobs: Vec<(usize, usize, &Job)> = schedule.timeline();
    jobs.sort_by_key(|&(i, j, jb)| (jb.core, jb.start, jb.finish, i, j));
    let mut busy: Option<(usize, Time, (usize, usize))> = None;
    for (i, j, jb) in jobs {
        match busy {
            Some((core, until, who)) if core == jb.core && jb.start < until => {
                v.push(Violation::Overlap { a: who, b: (i, j) });
                if jb.finish > until {
                    busy = Some((core, jb.finish, (i, j)));
                }
            }
            _ => busy = Some((jb.core, jb.finish, (i, j))),
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{DagSpec, TaskSpec};
    use alloc::vec;

    fn tiny() -> (Dag, InstanceTable) {
        let dag = DagSpec::new(
            1,
            vec![
                TaskSpec::new("a", 1, 4, TaskType::Sensor, &[]),
                TaskSpec::new("b", 1, 4, TaskType::Sensor, &[]),
                TaskSpec::new("w", 1, 0, TaskType::WFusion, &["a", "b"]),
            ],
        )
        .validate()
        .unwrap();
        let table = crate::expansion::build_instance_table(&dag, 3).unwrap();
        (dag, table)
    }

    fn job(start: Time, phase: usize, used: Vec<usize>) -> Job {
        Job { start, finish: start + 1, core: 0, phase, used }
    }

    fn good() -> Schedule {
        let mk = |off: Time, used: bool| {
            (1..=3)
                .map(|j| {
                    let u = if used { vec![j, j] } else { vec![] };
                    job(4 * (j as Time - 1) + off, j, u)
                })
                .collect()
        };
        Schedule {
            hp: 4,
            delta: 12,
            cores: 1,
            tasks: vec![
                TaskJobs { id: "a".into(), jobs: mk(0, false) },
                TaskJobs { id: "b".into(), jobs: mk(1, false) },
                TaskJobs { id: "w".into(), jobs: mk(2, true) },
            ],
        }
    }

    #[test]
    fn hand_schedule_is_valid() {
        let (dag, table) = tiny();
        let r = validate(&good(), &dag, &table);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn shifted_start_overlaps() {
        let (dag, table) = tiny();
        let mut s = good();
        s.tasks[1].jobs[1].start -= 1;
        s.tasks[1].jobs[1].finish -= 1;
        let r = validate(&s, &dag, &table);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Overlap { .. })), "{:?}", r.violations);
    }

    #[test]
    fn reused_input_breaks_single_use() {
        let (dag, table) = tiny();
        let mut s = good();
        s.tasks[2].jobs[1].used = vec![1, 2];
        let r = validate(&s, &dag, &table);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Reused { task: 2, edge: 0, pj: 1 })));
        // reading instance 1 of `a` at time 6 while instance 2 is done is stale
        assert!(r.warnings.iter().any(|w| w.task == 2 && w.j == 2 && w.latest == 2));
    }

    #[test]
    fn broken_copy_detected() {
        let (dag, table) = tiny();
        let mut s = good();
        s.tasks[2].jobs[2].start += 1;
        s.tasks[2].jobs[2].finish += 1;
        let r = validate(&s, &dag, &table);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Copy { task: 2, j: 3 })));
    }
}
