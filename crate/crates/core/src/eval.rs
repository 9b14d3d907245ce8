//! Metric evaluation from a schedule alone: provenance is recomputed by
//! walking the recorded fusion reads through the graph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dag::{Dag, TaskType};
use crate::expansion::InstanceTable;
use crate::metrics::{Metric, MetricConfig, MetricError};
use crate::schedule::Schedule;
use crate::time::Time;

/// Sensor instances (task, index) whose data reached an instance.
pub type Provenance = BTreeSet<(usize, usize)>;

/// `prov[task][j-1]` for every instance, following the recorded reads.
pub fn provenance(schedule: &Schedule, dag: &Dag) -> Vec<Vec<Provenance>> {
    let mut prov: Vec<Vec<Provenance>> = vec![Vec::new(); dag.len()];
    for &i in dag.topo() {
        let n = schedule.tasks[i].jobs.len();
        let mut out = Vec::with_capacity(n);
        for j in 1..=n {
            let set = match dag.kind(i) {
                TaskType::Sensor => [(i, j)].into_iter().collect(),
                TaskType::Subscription => prov[dag.preds(i)[0]][j - 1].clone(),
                _ => {
                    let mut s = Provenance::new();
                    for (k, &p) in dag.preds(i).iter().enumerate() {
                        s.extend(prov[p][schedule.job(i, j).used[k] - 1].iter().copied());
                    }
                    s
                }
            };
            out.push(set);
        }
        prov[i] = out;
    }
    prov
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SinkMetrics {
    pub sink: String,
    pub mrt: Time,
    pub mtd: Time,
    pub paoi: Time,
    pub ms: Time,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairWcrt {
    pub sensor: String,
    pub sink: String,
    pub wcrt: Time,
}

/// Metric values of one schedule: per sink, per WCRT pair, and the maxima
/// the objective sees.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub sinks: Vec<SinkMetrics>,
    pub wcrt: Vec<PairWcrt>,
    pub totals: BTreeMap<Metric, Time>,
    /// Weighted sum per objective level, highest priority first.
    pub objective: Vec<f64>,
}

impl MetricsReport {
    pub fn get(&self, m: Metric) -> Time {
        self.totals.get(&m).copied().unwrap_or(0)
    }

    /// Objective value if every level were collapsed into one blend.
    pub fn blended(&self) -> f64 {
        self.objective.iter().sum()
    }
}

/// Selection of instances a metric is taken over, per sink: `(sink, j)` with
/// `j` in the evaluation window.
pub(crate) fn window(table: &InstanceTable, sink: usize) -> impl Iterator<Item = usize> + '_ {
    (1..=table.count(sink)).filter(move |&j| table.in_eval_window(sink, j))
}

/// Recomputes every metric from `schedule`. Independent of the model's
/// provenance variables.
pub fn eval_metrics(
    schedule: &Schedule,
    dag: &Dag,
    table: &InstanceTable,
    config: &MetricConfig,
) -> Result<MetricsReport, MetricError> {
    let prov = provenance(schedule, dag);
    let release = |s: usize, js: usize| table.release(s, js).unwrap();
    let start = |s: usize, js: usize| schedule.job(s, js).start;
    let sinks = config.eval_sinks(dag);
    let pairs = config.wcrt_pairs(dag)?;
    let mut out = MetricsReport { sinks: Vec::new(), wcrt: Vec::new(), totals: BTreeMap::new(), objective: Vec::new() };
    for &k in &sinks {
        let ots = |j: usize| prov[k][j - 1].iter().map(|&(s, js)| release(s, js)).min().unwrap_or(0);
        let nts = |j: usize| prov[k][j - 1].iter().map(|&(s, js)| release(s, js)).max().unwrap_or(0);
        let mut sm = SinkMetrics { sink: dag.id(k).into(), mrt: 0, mtd: 0, paoi: 0, ms: 0 };
        for j in window(table, k) {
            let f = schedule.job(k, j).finish;
            if j >= 2 {
                sm.mrt = sm.mrt.max(f - ots(j - 1));
            }
            sm.mtd = sm.mtd.max(nts(j) - ots(j));
            sm.ms = sm.ms.max(f);
            for &(s, js) in &prov[k][j - 1] {
                if js >= 2 {
                    sm.paoi = sm.paoi.max(start(s, js) - start(s, js - 1));
                }
            }
        }
        out.sinks.push(sm);
    }
    for &(s, k) in &pairs {
        let mut w = 0;
        for j in window(table, k) {
            let f = schedule.job(k, j).finish;
            for &(s2, js) in &prov[k][j - 1] {
                if s2 == s {
                    w = w.max(f - release(s, js));
                }
            }
        }
        out.wcrt.push(PairWcrt { sensor: dag.id(s).into(), sink: dag.id(k).into(), wcrt: w });
    }
    let max_of = |f: fn(&SinkMetrics) -> Time| out.sinks.iter().map(f).max().unwrap_or(0);
    let totals = [
        (Metric::Mrt, max_of(|s| s.mrt)),
        (Metric::Mtd, max_of(|s| s.mtd)),
        (Metric::Paoi, max_of(|s| s.paoi)),
        (Metric::Wcrt, out.wcrt.iter().map(|p| p.wcrt).max().unwrap_or(0)),
        (Metric::Ms, max_of(|s| s.ms)),
    ];
    out.totals = totals.into_iter().collect();
    out.objective =
        config.levels()?.iter().map(|lvl| lvl.iter().map(|&(m, w)| w * out.totals[&m] as f64).sum()).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{DagSpec, TaskSpec};
    use crate::expansion::build_instance_table;
    use crate::schedule::{Job, TaskJobs};

    /// Sensor (period 10, wcet 2) followed by a subscription sink (wcet 3),
    /// both run back to back at every release.
    #[test]
    fn chain_metrics_by_hand() {
        let dag = DagSpec::new(
            1,
            vec![
                TaskSpec::new("s", 2, 10, TaskType::Sensor, &[]),
                TaskSpec::new("k", 3, 0, TaskType::Subscription, &["s"]),
            ],
        )
        .validate()
        .unwrap();
        let table = build_instance_table(&dag, 3).unwrap();
        let jobs = |off: Time, e: Time| {
            (1..=3)
                .map(|j| {
                    let st = 10 * (j as Time - 1) + off;
                    Job { start: st, finish: st + e, core: 0, phase: j, used: vec![] }
                })
                .collect()
        };
        let sched = Schedule {
            hp: 10,
            delta: 30,
            cores: 1,
            tasks: vec![TaskJobs { id: "s".into(), jobs: jobs(0, 2) }, TaskJobs { id: "k".into(), jobs: jobs(2, 3) }],
        };
        let r = eval_metrics(&sched, &dag, &table, &MetricConfig::default()).unwrap();
        // reaction: sample at 0 is the oldest input before the output at 15
        assert_eq!(r.get(Metric::Mrt), 15);
        assert_eq!(r.get(Metric::Mtd), 0);
        assert_eq!(r.get(Metric::Paoi), 10);
        assert_eq!(r.get(Metric::Wcrt), 5);
        assert_eq!(r.get(Metric::Ms), 25);
        assert_eq!(r.objective, vec![55.0]);
    }

    #[test]
    fn provenance_follows_reads() {
        let dag = DagSpec::new(
            1,
            vec![
                TaskSpec::new("a", 1, 4, TaskType::Sensor, &[]),
                TaskSpec::new("b", 1, 4, TaskType::Sensor, &[]),
                TaskSpec::new("w", 1, 0, TaskType::TFusion, &["a", "b"]),
            ],
        );
        let mut dag = dag;
        dag.tasks[2].period = 4;
        let dag = dag.validate().unwrap();
        let job = |st: Time, used: Vec<usize>| Job { start: st, finish: st + 1, core: 0, phase: 1, used };
        let sched = Schedule {
            hp: 4,
            delta: 12,
            cores: 1,
            tasks: vec![
                TaskJobs { id: "a".into(), jobs: vec![job(0, vec![]), job(4, vec![]), job(8, vec![])] },
                TaskJobs { id: "b".into(), jobs: vec![job(1, vec![]), job(5, vec![]), job(9, vec![])] },
                TaskJobs { id: "w".into(), jobs: vec![job(2, vec![1, 1]), job(6, vec![2, 1]), job(10, vec![3, 2])] },
            ],
        };
        let p = provenance(&sched, &dag);
        assert_eq!(p[2][1], [(0, 2), (1, 1)].into_iter().collect());
    }
}
