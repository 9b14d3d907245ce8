//! Hyperperiod, analysis window and per-task instance counts.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::dag::{Dag, TaskType};
use crate::time::{Time, lcm};

/// A task instance. `index` is 1-based, as in the schedule tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId {
    pub task: usize,
    pub index: usize,
}

impl InstanceId {
    pub fn new(task: usize, index: usize) -> Self {
        InstanceId { task, index }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExpansionError {
    #[error("no timer-triggered task, hyperperiod undefined")]
    NoTimerTask,
    #[error("window multiplier must be at least 3, got {0}")]
    Multiplier(u32),
    #[error("task `{task}` has {first} instances in one hyperperiod but {later} in a later one")]
    SteadyCount { task: String, first: usize, later: usize },
}

/// Least common multiple of all sensor and t-fusion periods.
pub fn hyperperiod(dag: &Dag) -> Result<Time, ExpansionError> {
    (0..dag.len())
        .filter(|&i| dag.kind(i).is_timer())
        .map(|i| dag.period(i))
        .reduce(lcm)
        .ok_or(ExpansionError::NoTimerTask)
}

/// Instance count of `task` over `window`, given the counts of its
/// predecessors over the same window.
pub fn n_ins(dag: &Dag, task: usize, window: Time, pred_counts: &[usize]) -> usize {
    match dag.kind(task) {
        TaskType::Sensor | TaskType::TFusion => (window / dag.period(task)) as usize,
        TaskType::Subscription => pred_counts[0],
        TaskType::WFusion => pred_counts.iter().copied().min().unwrap_or(0),
        TaskType::IFusion => {
            let sum: usize = pred_counts.iter().sum();
            (sum + 1).saturating_sub(pred_counts.len())
        }
    }
}

/// Counts of every task over `window`, evaluated in topological order.
pub fn counts_over(dag: &Dag, window: Time) -> Vec<usize> {
    let mut counts = vec![0usize; dag.len()];
    for &i in dag.topo() {
        let pc: Vec<usize> = dag.preds(i).iter().map(|&p| counts[p]).collect();
        counts[i] = n_ins(dag, i, window, &pc);
    }
    counts
}

/// Instance counts for the window `k * hp` and its hyperperiod boundaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceTable {
    hp: Time,
    k: u32,
    /// `bounds[i][p]` = n-ins(task i, p * hp) for p in 0..=k.
    bounds: Vec<Vec<usize>>,
    periods: Vec<Time>,
}

/// Builds the table for `dag`, which must already be branch-adjusted.
/// `k` is the window multiplier (three by default).
pub fn build_instance_table(dag: &Dag, k: u32) -> Result<InstanceTable, ExpansionError> {
    if k < 3 {
        return Err(ExpansionError::Multiplier(k));
    }
    let hp = hyperperiod(dag)?;
    let mut bounds = vec![vec![0usize; k as usize + 1]; dag.len()];
    for p in 1..=k as usize {
        let c = counts_over(dag, hp * p as Time);
        for (i, n) in c.into_iter().enumerate() {
            bounds[i][p] = n;
        }
    }
    for (i, b) in bounds.iter().enumerate() {
        let first = b[2] - b[1];
        for p in 3..=k as usize {
            let later = b[p] - b[p - 1];
            if later != first {
                return Err(ExpansionError::SteadyCount { task: dag.id(i).into(), first, later });
            }
        }
    }
    let periods = (0..dag.len()).map(|i| dag.period(i)).collect();
    Ok(InstanceTable { hp, k, bounds, periods })
}

impl InstanceTable {
    pub fn hp(&self) -> Time {
        self.hp
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn delta(&self) -> Time {
        self.hp * self.k as Time
    }

    pub fn tasks(&self) -> usize {
        self.bounds.len()
    }

    /// Instances of `task` over the whole window.
    pub fn count(&self, task: usize) -> usize {
        self.bounds[task][self.k as usize]
    }

    /// n-ins(task, p * hp).
    pub fn count_at(&self, task: usize, p: usize) -> usize {
        self.bounds[task][p]
    }

    /// Instances per hyperperiod once the warm-up is over.
    pub fn steady(&self, task: usize) -> usize {
        self.bounds[task][2] - self.bounds[task][1]
    }

    pub fn total(&self) -> usize {
        (0..self.tasks()).map(|i| self.count(i)).sum()
    }

    /// Phase (1-based hyperperiod) an instance belongs to.
    pub fn phase(&self, task: usize, index: usize) -> usize {
        let b = &self.bounds[task];
        (1..=self.k as usize).find(|&p| index <= b[p]).unwrap_or(self.k as usize)
    }

    /// Phase 1 is warm-up; metrics are taken over everything after it.
    pub fn in_eval_window(&self, task: usize, index: usize) -> bool {
        self.phase(task, index) >= 2
    }

    /// Static release of a timer-triggered instance.
    pub fn release(&self, task: usize, index: usize) -> Option<Time> {
        let t = self.periods[task];
        (t > 0).then(|| t * (index as Time - 1))
    }

    /// Instances of `task` in phase 2, the block every later phase copies.
    pub fn steady_block(&self, task: usize) -> core::ops::RangeInclusive<usize> {
        self.bounds[task][1] + 1..=self.bounds[task][2]
    }

    pub fn instances(&self) -> impl Iterator<Item = InstanceId> + '_ {
        (0..self.tasks()).flat_map(move |i| (1..=self.count(i)).map(move |j| InstanceId::new(i, j)))
    }

    /// One row per instance: task, index, phase, release (blank for event
    /// tasks).
    pub fn to_table(&self, dag: &Dag) -> String {
        let mut out = String::from("task\tindex\tphase\trelease\n");
        for id in self.instances() {
            let rel = self.release(id.task, id.index).map(|r| alloc::format!("{r}")).unwrap_or_default();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", dag.id(id.task), id.index, self.phase(id.task, id.index), rel);
        }
        out
    }
}
