//! Metric selection and objective configuration.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dag::{Dag, DagError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Maximum reaction time.
    Mrt,
    /// Maximum time disparity between fused sensor samples.
    Mtd,
    /// Peak age of information.
    Paoi,
    /// Worst-case response time of a sensor-to-sink path.
    Wcrt,
    /// Makespan: latest sink finish.
    Ms,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Mrt, Metric::Mtd, Metric::Paoi, Metric::Wcrt, Metric::Ms];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mrt => "mrt",
            Metric::Mtd => "mtd",
            Metric::Paoi => "paoi",
            Metric::Wcrt => "wcrt",
            Metric::Ms => "ms",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One weighted metric in the objective. Terms sharing a priority are summed;
/// higher priorities are optimized first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerm {
    pub metric: Metric,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    #[serde(default = "unit_priority")]
    pub priority: i32,
}

fn unit_weight() -> f64 {
    1.0
}

fn unit_priority() -> i32 {
    1
}

impl ObjectiveTerm {
    pub fn new(metric: Metric) -> Self {
        ObjectiveTerm { metric, weight: 1.0, priority: 1 }
    }
}

/// Which sinks enter the metric maxima.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkSelection {
    #[default]
    All,
    /// The sink with the largest task index.
    Last,
    Ids(Vec<String>),
}

/// Which sensors WCRT is measured from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorSelection {
    /// The lowest-indexed sensor with a path to the sink.
    #[default]
    First,
    All,
    Ids(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(default = "default_objective")]
    pub objective: Vec<ObjectiveTerm>,
    #[serde(default)]
    pub sinks: SinkSelection,
    #[serde(default)]
    pub wcrt_sensors: SensorSelection,
}

fn default_objective() -> Vec<ObjectiveTerm> {
    Metric::ALL.into_iter().map(ObjectiveTerm::new).collect()
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { objective: default_objective(), sinks: SinkSelection::All, wcrt_sensors: SensorSelection::First }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("objective has no metric terms")]
    EmptyObjective,
    #[error("objective weight for {0} must be finite and non-negative")]
    BadWeight(Metric),
    #[error("sensor `{sensor}` has no path to sink `{sink}`")]
    NoPath { sensor: String, sink: String },
    #[error("sink selection is empty")]
    NoSink,
}

impl MetricConfig {
    /// Blended sum of the given metrics at a single priority level.
    pub fn blended(metrics: &[Metric]) -> Self {
        MetricConfig { objective: metrics.iter().copied().map(ObjectiveTerm::new).collect(), ..Self::default() }
    }

    /// One level per metric, in the given order of precedence.
    pub fn lexicographic(metrics: &[Metric]) -> Self {
        let n = metrics.len() as i32;
        let objective = metrics
            .iter()
            .enumerate()
            .map(|(k, &m)| ObjectiveTerm { metric: m, weight: 1.0, priority: n - k as i32 })
            .collect();
        MetricConfig { objective, ..Self::default() }
    }

    pub fn with_sinks(mut self, sinks: SinkSelection) -> Self {
        self.sinks = sinks;
        self
    }

    pub fn with_wcrt_sensors(mut self, sensors: SensorSelection) -> Self {
        self.wcrt_sensors = sensors;
        self
    }

    /// Objective terms grouped by priority, highest first. Within a level a
    /// metric appearing twice has its weights summed.
    pub fn levels(&self) -> Result<Vec<Vec<(Metric, f64)>>, MetricError> {
        if self.objective.is_empty() {
            return Err(MetricError::EmptyObjective);
        }
        let mut by_prio: BTreeMap<i32, BTreeMap<Metric, f64>> = BTreeMap::new();
        for t in &self.objective {
            if !t.weight.is_finite() || t.weight < 0.0 {
                return Err(MetricError::BadWeight(t.metric));
            }
            *by_prio.entry(t.priority).or_default().entry(t.metric).or_insert(0.0) += t.weight;
        }
        Ok(by_prio.into_values().rev().map(|m| m.into_iter().collect()).collect())
    }

    /// Metrics that appear anywhere in the objective.
    pub fn used_metrics(&self) -> Vec<Metric> {
        let mut v: Vec<Metric> = self.objective.iter().map(|t| t.metric).collect();
        v.sort();
        v.dedup();
        v
    }

    pub(crate) fn check_ids(
        &self,
        index: &BTreeMap<&str, usize>,
        is_sink: impl Fn(usize) -> bool,
        is_sensor: impl Fn(usize) -> bool,
    ) -> Vec<DagError> {
        let mut errs = Vec::new();
        if let SinkSelection::Ids(ids) = &self.sinks {
            for id in ids {
                match index.get(id.as_str()) {
                    None => errs.push(DagError::UnknownMetricTask(id.clone())),
                    Some(&i) if !is_sink(i) => errs.push(DagError::NotASink(id.clone())),
                    _ => {}
                }
            }
        }
        if let SensorSelection::Ids(ids) = &self.wcrt_sensors {
            for id in ids {
                match index.get(id.as_str()) {
                    None => errs.push(DagError::UnknownMetricTask(id.clone())),
                    Some(&i) if !is_sensor(i) => errs.push(DagError::NotASensor(id.clone())),
                    _ => {}
                }
            }
        }
        errs
    }

    /// Sinks that enter the metric maxima, in task order.
    pub fn eval_sinks(&self, dag: &Dag) -> Vec<usize> {
        let sinks = dag.sinks();
        match &self.sinks {
            SinkSelection::All => sinks,
            SinkSelection::Last => sinks.last().copied().into_iter().collect(),
            SinkSelection::Ids(ids) => sinks.into_iter().filter(|&i| ids.iter().any(|id| id == dag.id(i))).collect(),
        }
    }

    /// (sensor, sink) pairs over which WCRT is taken.
    pub fn wcrt_pairs(&self, dag: &Dag) -> Result<Vec<(usize, usize)>, MetricError> {
        let mut pairs = Vec::new();
        for sink in self.eval_sinks(dag) {
            let reaching = dag.sensors_reaching(sink);
            match &self.wcrt_sensors {
                SensorSelection::First => pairs.extend(reaching.first().map(|&s| (s, sink))),
                SensorSelection::All => pairs.extend(reaching.iter().map(|&s| (s, sink))),
                SensorSelection::Ids(ids) => {
                    for id in ids {
                        let s = dag.index_of(id).unwrap_or(usize::MAX);
                        if !reaching.contains(&s) {
                            return Err(MetricError::NoPath { sensor: id.clone(), sink: dag.id(sink).into() });
                        }
                        pairs.push((s, sink));
                    }
                }
            }
        }
        Ok(pairs)
    }
}

/// Convenience for building objective term lists in tests and presets.
pub fn terms(metrics: &[Metric]) -> Vec<ObjectiveTerm> {
    metrics.iter().copied().map(ObjectiveTerm::new).collect()
}
