//! Task graph definition, validation and normalisation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricConfig;
use crate::time::Time;

/// How a task is triggered and how many inputs it fuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    /// Periodic source.
    #[serde(rename = "sensor", alias = "sen")]
    Sensor,
    /// Event-triggered task with exactly one input.
    #[serde(rename = "subscription", alias = "sub")]
    Subscription,
    /// Timer-triggered fusion.
    #[serde(rename = "t-fusion", alias = "t-fus")]
    TFusion,
    /// Fusion released once every input has produced fresh data.
    #[serde(rename = "w-fusion", alias = "w-fus")]
    WFusion,
    /// Fusion released by any fresh input.
    #[serde(rename = "i-fusion", alias = "i-fus")]
    IFusion,
}

impl TaskType {
    pub fn is_timer(self) -> bool {
        matches!(self, TaskType::Sensor | TaskType::TFusion)
    }

    pub fn is_fusion(self) -> bool {
        matches!(self, TaskType::TFusion | TaskType::WFusion | TaskType::IFusion)
    }

    /// Sensors and fusion tasks start a new instance numbering.
    pub fn is_producer(self) -> bool {
        !matches!(self, TaskType::Subscription)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            TaskType::Sensor => "sen",
            TaskType::Subscription => "sub",
            TaskType::TFusion => "t-fus",
            TaskType::WFusion => "w-fus",
            TaskType::IFusion => "i-fus",
        }
    }

    pub fn parse(s: &str) -> Option<TaskType> {
        Some(match s {
            "sensor" | "sen" => TaskType::Sensor,
            "subscription" | "sub" => TaskType::Subscription,
            "t-fusion" | "t-fus" => TaskType::TFusion,
            "w-fusion" | "w-fus" => TaskType::WFusion,
            "i-fusion" | "i-fus" => TaskType::IFusion,
            _ => return None,
        })
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// One vertex of the task graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub wcet: Time,
    /// Zero for event-triggered tasks.
    #[serde(default)]
    pub period: Time,
    /// Relative deadline. Filled in by [`DagSpec::validate`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<Time>,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    #[serde(default)]
    pub preds: Vec<String>,
}

impl TaskSpec {
    pub fn new(id: &str, wcet: Time, period: Time, task_type: TaskType, preds: &[&str]) -> Self {
        TaskSpec {
            id: id.into(),
            wcet,
            period,
            deadline: None,
            task_type,
            preds: preds.iter().map(|p| String::from(*p)).collect(),
        }
    }
}

fn one() -> u32 {
    1
}

/// A task graph plus the platform and metric configuration it is scheduled
/// against. Task order is significant: it defines task indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DagSpec {
    #[serde(default = "one")]
    pub cores: u32,
    #[serde(default)]
    pub metrics: MetricConfig,
    pub tasks: Vec<TaskSpec>,
}

impl DagSpec {
    pub fn new(cores: u32, tasks: Vec<TaskSpec>) -> Self {
        DagSpec { cores, metrics: MetricConfig::default(), tasks }
    }

    pub fn with_metrics(mut self, metrics: MetricConfig) -> Self {
        self.metrics = metrics;
        self
    }

    /// Checks every structural invariant and returns the indexed, normalised
    /// graph. All violations are reported, not only the first.
    pub fn validate(&self) -> Result<Dag, DagErrors> {
        let mut errors = Vec::new();
        let n = self.tasks.len();
        if n == 0 {
            errors.push(DagError::Empty);
            return Err(DagErrors(errors));
        }
        if self.cores == 0 {
            errors.push(DagError::NoCores);
        }

        let mut index = BTreeMap::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if index.insert(t.id.as_str(), i).is_some() {
                errors.push(DagError::DuplicateId(t.id.clone()));
            }
        }

        let mut preds = vec![Vec::new(); n];
        for (i, t) in self.tasks.iter().enumerate() {
            for p in &t.preds {
                match index.get(p.as_str()) {
                    Some(&j) if preds[i].contains(&j) => {
                        errors.push(DagError::DuplicateEdge { task: t.id.clone(), pred: p.clone() })
                    }
                    Some(&j) => preds[i].push(j),
                    None => errors.push(DagError::DanglingPred { task: t.id.clone(), pred: p.clone() }),
                }
            }
            if t.wcet < 1 {
                errors.push(DagError::NonPositiveWcet(t.id.clone()));
            }
            let timer = t.task_type.is_timer();
            if timer && t.period < 1 || !timer && t.period != 0 {
                errors.push(DagError::PeriodMismatch { task: t.id.clone(), task_type: t.task_type, period: t.period });
            }
            let np = t.preds.len();
            let arity_ok = match t.task_type {
                TaskType::Sensor => np == 0,
                TaskType::Subscription => np == 1,
                _ => np >= 1,
            };
            if !arity_ok {
                errors.push(DagError::PredCount { task: t.id.clone(), task_type: t.task_type, count: np });
            }
        }

        if !self.tasks.iter().any(|t| t.task_type == TaskType::Sensor) {
            errors.push(DagError::NoSensor);
        }

        let mut succs = vec![Vec::new(); n];
        for (i, ps) in preds.iter().enumerate() {
            for &p in ps {
                succs[p].push(i);
            }
        }

        let topo = match topo_order(&preds, &succs) {
            Ok(t) => t,
            Err(cycle) => {
                errors.push(DagError::Cycle(cycle.iter().map(|&i| self.tasks[i].id.clone()).collect()));
                Vec::new()
            }
        };

        let max_timer_period =
            self.tasks.iter().filter(|t| t.task_type.is_timer()).map(|t| t.period).max().unwrap_or(0);
        let mut spec = self.clone();
        for t in &mut spec.tasks {
            let d = match t.deadline {
                Some(d) => d,
                None if t.task_type.is_timer() => t.period,
                None => max_timer_period,
            };
            if d < t.wcet {
                errors.push(DagError::DeadlineBelowWcet { task: t.id.clone(), deadline: d, wcet: t.wcet });
            }
            t.deadline = Some(d);
        }

        errors.extend(self.metrics.check_ids(
            &index,
            |i| succs[i].is_empty(),
            |i| self.tasks[i].task_type == TaskType::Sensor,
        ));

        if !errors.is_empty() {
            return Err(DagErrors(errors));
        }
        Ok(Dag { spec, preds, succs, topo })
    }
}

/// Kahn's algorithm; on failure returns the tasks left on a cycle.
fn topo_order(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let n = preds.len();
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &s in succs[i].iter().rev() {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push(s);
            }
        }
    }
    if order.len() == n { Ok(order) } else { Err((0..n).filter(|&i| indeg[i] > 0).collect()) }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DagError {
    #[error("the graph has no tasks")]
    Empty,
    #[error("core count must be positive")]
    NoCores,
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("task `{task}` lists `{pred}` as predecessor twice")]
    DuplicateEdge { task: String, pred: String },
    #[error("task `{task}` references unknown predecessor `{pred}`")]
    DanglingPred { task: String, pred: String },
    #[error("task `{0}` must have a WCET of at least one tick")]
    NonPositiveWcet(String),
    #[error("task `{task}` of type {task_type} cannot have period {period}")]
    PeriodMismatch { task: String, task_type: TaskType, period: Time },
    #[error("task `{task}` of type {task_type} cannot have {count} predecessors")]
    PredCount { task: String, task_type: TaskType, count: usize },
    #[error("relative deadline {deadline} of `{task}` is below its WCET {wcet}")]
    DeadlineBelowWcet { task: String, deadline: Time, wcet: Time },
    #[error("the graph has no sensor task")]
    NoSensor,
    #[error("cycle through tasks {0:?}")]
    Cycle(Vec<String>),
    #[error("metric configuration names unknown task `{0}`")]
    UnknownMetricTask(String),
    #[error("metric configuration names `{0}`, which is not a sink")]
    NotASink(String),
    #[error("metric configuration names `{0}`, which is not a sensor")]
    NotASensor(String),
}

/// Every violation found by [`DagSpec::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagErrors(pub Vec<DagError>);

impl fmt::Display for DagErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl core::error::Error for DagErrors {}

impl DagErrors {
    pub fn contains(&self, pred: impl Fn(&DagError) -> bool) -> bool {
        self.0.iter().any(pred)
    }
}

/// A validated graph with deadlines filled in and adjacency indexed by task
/// position.
#[derive(Clone, Debug, PartialEq)]
pub struct Dag {
    spec: DagSpec,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    pub fn spec(&self) -> &DagSpec {
        &self.spec
    }

    pub fn into_spec(self) -> DagSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.tasks.is_empty()
    }

    pub fn cores(&self) -> u32 {
        self.spec.cores
    }

    pub fn metrics(&self) -> &MetricConfig {
        &self.spec.metrics
    }

    pub fn task(&self, i: usize) -> &TaskSpec {
        &self.spec.tasks[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.spec.tasks[i].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.spec.tasks.iter().position(|t| t.id == id)
    }

    pub fn kind(&self, i: usize) -> TaskType {
        self.spec.tasks[i].task_type
    }

    pub fn wcet(&self, i: usize) -> Time {
        self.spec.tasks[i].wcet
    }

    pub fn period(&self, i: usize) -> Time {
        self.spec.tasks[i].period
    }

    pub fn deadline(&self, i: usize) -> Time {
        self.spec.tasks[i].deadline.unwrap_or(0)
    }

    pub fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn succs(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    /// Task indices in a topological order (ties broken by input order).
    pub fn topo(&self) -> &[usize] {
        &self.topo
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.succs[i].is_empty()).collect()
    }

    pub fn sensors(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.kind(i) == TaskType::Sensor).collect()
    }

    pub fn max_deadline(&self) -> Time {
        (0..self.len()).map(|i| self.deadline(i)).max().unwrap_or(0)
    }

    /// `true` when `to` is reachable from `from` (a task reaches itself).
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        while let Some(i) = stack.pop() {
            if i == to {
                return true;
            }
            if core::mem::replace(&mut seen[i], true) {
                continue;
            }
            stack.extend(self.succs[i].iter().copied());
        }
        false
    }

    /// Sensors with a path to `task`, in task order.
    pub fn sensors_reaching(&self, task: usize) -> Vec<usize> {
        self.sensors().into_iter().filter(|&s| self.has_path(s, task)).collect()
    }

    /// Retypes every subscription that directly follows a branch node as a
    /// single-input immediate fusion, so that each branch gets its own instance
    /// numbering. Idempotent.
    pub fn adjust_branch_successors(&self) -> Dag {
        let mut out = self.clone();
        for i in 0..self.len() {
            if self.kind(i) == TaskType::Subscription && self.succs[self.preds[i][0]].len() > 1 {
                out.spec.tasks[i].task_type = TaskType::IFusion;
            }
        }
        out
    }

    pub fn has_branch_subscriptions(&self) -> bool {
        (0..self.len()).any(|i| self.kind(i) == TaskType::Subscription && self.succs[self.preds[i][0]].len() > 1)
    }

    pub fn producers(&self) -> ProducerMap {
        let n = self.len();
        let mut producer_of = vec![usize::MAX; n];
        for &i in &self.topo {
            producer_of[i] = if self.kind(i).is_producer() { i } else { producer_of[self.preds[i][0]] };
        }
        let pred_producers = (0..n).map(|i| self.preds[i].iter().map(|&p| producer_of[p]).collect()).collect();
        ProducerMap { producer_of, pred_producers }
    }
}

/// Which task defines the instance numbering of each task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProducerMap {
    producer_of: Vec<usize>,
    pred_producers: Vec<Vec<usize>>,
}

impl ProducerMap {
    /// The nearest sensor or fusion task at or above `task`.
    pub fn producer_of(&self, task: usize) -> usize {
        self.producer_of[task]
    }

    /// Producers of the predecessors of `task`, one entry per incoming edge in
    /// predecessor order.
    pub fn pred_producers(&self, task: usize) -> &[usize] {
        &self.pred_producers[task]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use TaskType::*;

    fn t(id: &str, wcet: Time, period: Time, ty: TaskType, preds: &[&str]) -> TaskSpec {
        TaskSpec::new(id, wcet, period, ty, preds)
    }

    #[test]
    fn minimal_sensor_is_source_and_sink() {
        let dag = DagSpec::new(1, vec![t("s", 2, 10, Sensor, &[])]).validate().unwrap();
        assert_eq!(dag.sinks(), vec![0]);
        assert_eq!(dag.sensors(), vec![0]);
        assert_eq!(dag.deadline(0), 10);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let spec = DagSpec::new(
            1,
            vec![t("s", 1, 10, Sensor, &[]), t("a", 1, 0, WFusion, &["b", "s"]), t("b", 1, 0, Subscription, &["a"])],
        );
        let err = spec.validate().unwrap_err();
        assert!(err.contains(|e| matches!(e, DagError::Cycle(c) if c.len() == 2)), "{err}");
    }

    #[test]
    fn each_error_kind_is_reported() {
        let spec = DagSpec::new(
            1,
            vec![
                t("a", 1, 0, Subscription, &["ghost"]),
                t("b", 0, 5, WFusion, &["a", "a"]),
                t("c", 3, 0, Subscription, &[]),
            ],
        );
        let err = spec.validate().unwrap_err();
        assert!(err.contains(|e| matches!(e, DagError::DanglingPred { .. })));
        assert!(err.contains(|e| matches!(e, DagError::DuplicateEdge { .. })));
        assert!(err.contains(|e| matches!(e, DagError::NonPositiveWcet(_))));
        assert!(err.contains(|e| matches!(e, DagError::PeriodMismatch { .. })));
        assert!(err.contains(|e| matches!(e, DagError::PredCount { .. })));
        assert!(err.contains(|e| matches!(e, DagError::NoSensor)));
    }

    #[test]
    fn default_deadlines_follow_case_study_policy() {
        let dag = presets::fusion_two_chains(presets::FusionConfig::WT).dag.validate().unwrap();
        // timer tasks: own period; event tasks: largest timer period
        assert_eq!(dag.deadline(0), 420);
        assert_eq!(dag.deadline(6), 840);
        assert_eq!(dag.deadline(4), 840);
        assert_eq!(dag.deadline(2), 840);
    }

    #[test]
    fn fusion_system_ws_is_valid() {
        let dag = presets::fusion_two_chains(presets::FusionConfig::WS).dag.validate().unwrap();
        assert_eq!(dag.len(), 7);
        assert_eq!(dag.kind(4), WFusion);
        assert_eq!(dag.kind(6), Subscription);
        assert_eq!(dag.sinks(), vec![6]);
    }

    #[test]
    fn producers_of_prediction_dag() {
        let dag = presets::prediction_example(TFusion).validate().unwrap();
        let pm = dag.producers();
        let p9 = dag.index_of("t9").unwrap();
        let names: Vec<&str> = pm.pred_producers(p9).iter().map(|&i| dag.id(i)).collect();
        assert_eq!(names, ["t1", "t2", "t3"]);
        assert_eq!(pm.producer_of(p9), p9);
    }

    #[test]
    fn producer_walks_subscription_chains() {
        let dag = DagSpec::new(
            1,
            vec![t("s", 1, 10, Sensor, &[]), t("a", 1, 0, Subscription, &["s"]), t("b", 1, 0, Subscription, &["a"])],
        )
        .validate()
        .unwrap();
        assert_eq!(dag.producers().producer_of(2), 0);

        let dag = DagSpec::new(
            1,
            vec![t("s", 1, 10, Sensor, &[]), t("f", 1, 0, WFusion, &["s"]), t("g", 1, 0, Subscription, &["f"])],
        )
        .validate()
        .unwrap();
        assert_eq!(dag.producers().producer_of(2), 1);
    }

    #[test]
    fn branch_successors_become_immediate_fusions() {
        let dag = presets::instance_count_example().validate().unwrap();
        let adj = dag.adjust_branch_successors();
        for id in ["t6", "t7"] {
            assert_eq!(adj.kind(adj.index_of(id).unwrap()), IFusion, "{id}");
        }
        assert_eq!(adj.kind(adj.index_of("t5").unwrap()), Subscription);
        assert_eq!(adj.kind(adj.index_of("t9").unwrap()), Subscription);
        assert_eq!(adj.adjust_branch_successors(), adj);
    }

    #[test]
    fn branch_case_keeps_single_input_immediate_fusion() {
        let dag = presets::branch(presets::BranchConfig::A).dag.validate().unwrap();
        let adj = dag.adjust_branch_successors();
        assert_eq!(adj.kind(2), IFusion);
        assert_eq!(adj.preds(2), &[0]);
    }

    #[test]
    fn no_branch_no_change() {
        let dag = presets::navigation(3).dag.validate().unwrap();
        assert_eq!(dag.adjust_branch_successors(), dag);
    }
}

#[cfg(test)]
mod proptests {
    use crate::generator::{GenConfig, generate};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn branch_adjustment_is_idempotent(seed in 0u64..5000, nodes in 2usize..9) {
            let sensors = (nodes / 2).max(1);
            let mut cfg = GenConfig { node_count: nodes, sensor_count: sensors, seed, ..GenConfig::default() };
            cfg.edge_count = (2 * nodes).clamp(nodes - 1, cfg.max_edges());
            let spec = generate(&cfg).unwrap();
            let dag = spec.validate().unwrap();
            let once = dag.adjust_branch_successors();
            prop_assert_eq!(once.adjust_branch_successors(), once.clone());
            // every subscription now inherits numbering along a branch-free walk
            let pm = once.producers();
            for i in 0..once.len() {
                let p = pm.producer_of(i);
                prop_assert!(once.kind(p).is_producer());
                prop_assert!(once.has_path(p, i));
            }
        }
    }
}
