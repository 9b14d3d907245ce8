//! Seeded random DAG generation for scheduling campaigns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{DagSpec, TaskSpec, TaskType};
use crate::metrics::{MetricConfig, SinkSelection};
use crate::time::Time;

/// How fusion nodes pick their type from [`GenConfig::fusion_types`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// One type, drawn once per graph, for every fusion node.
    #[default]
    Same,
    /// Independent draw per fusion node.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub node_count: usize,
    pub sensor_count: usize,
    pub edge_count: usize,
    pub fusion_types: Vec<TaskType>,
    #[serde(default)]
    pub fusion_mode: FusionMode,
    pub core_count: u32,
    pub seed: u64,
    /// Inclusive WCET range of event-triggered tasks.
    pub event_wcet: (Time, Time),
    /// Utilization range of timer-triggered tasks.
    pub utilization: (f64, f64),
    pub periods: Vec<Time>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            node_count: 6,
            sensor_count: 3,
            edge_count: 7,
            fusion_types: vec![TaskType::WFusion],
            fusion_mode: FusionMode::Same,
            core_count: 2,
            seed: 0,
            event_wcet: (1, 5),
            utilization: (0.1, 0.4),
            periods: vec![20, 40, 50, 100],
        }
    }
}

impl GenConfig {
    /// Half the nodes are sensors and there are twice as many edges as nodes.
    pub fn sized(nodes: usize, seed: u64) -> Self {
        let sensors = (nodes / 2).max(1);
        GenConfig { node_count: nodes, sensor_count: sensors, edge_count: 2 * nodes, seed, ..Self::default() }
    }

    /// Forward pairs that may carry an edge: any node into a later
    /// non-sensor.
    pub fn max_edges(&self) -> usize {
        let (n, s) = (self.node_count, self.sensor_count);
        (s..n).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("need at least one sensor and one other node, got {nodes} nodes with {sensors} sensors")]
    Sizes { nodes: usize, sensors: usize },
    #[error("edge count {edges} outside [{min}, {max}]")]
    EdgeCount { edges: usize, min: usize, max: usize },
    #[error("no fusion type allowed")]
    NoFusionType,
    #[error("no period to draw from")]
    NoPeriod,
    #[error("could not draw a connected graph with {0} edges")]
    Exhausted(usize),
}

fn round(x: f64) -> Time {
    (x + 0.5) as Time
}

/// Draws a connected DAG. Sensors are the first `sensor_count` tasks and the
/// only sources; a node with one input becomes a subscription (or an
/// immediate fusion after a branch), a node with several inputs a fusion.
pub fn generate(cfg: &GenConfig) -> Result<DagSpec, GenError> {
    let (n, s) = (cfg.node_count, cfg.sensor_count);
    if s == 0 || s >= n {
        return Err(GenError::Sizes { nodes: n, sensors: s });
    }
    let max = cfg.max_edges();
    if cfg.edge_count < n - 1 || cfg.edge_count > max.min(n * (n - 1) / 2) {
        return Err(GenError::EdgeCount { edges: cfg.edge_count, min: n - 1, max });
    }
    if cfg.fusion_types.iter().all(|t| !t.is_fusion()) {
        return Err(GenError::NoFusionType);
    }
    if cfg.periods.is_empty() {
        return Err(GenError::NoPeriod);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let preds = draw_edges(cfg, &mut rng)?;

    let fusion_pool: Vec<TaskType> = cfg.fusion_types.iter().copied().filter(|t| t.is_fusion()).collect();
    let same = *fusion_pool.choose(&mut rng).unwrap();
    let timer = |rng: &mut ChaCha8Rng| {
        let period = *cfg.periods.choose(rng).unwrap();
        let u = rng.random_range(cfg.utilization.0..=cfg.utilization.1);
        (round(u * period as f64).max(1), period)
    };
    let mut tasks = Vec::with_capacity(n);
    for (v, ps) in preds.iter().enumerate() {
        let id = format!("t{}", v + 1);
        let pred_ids: Vec<_> = ps.iter().map(|p| format!("t{}", p + 1)).collect();
        let (ty, wcet, period) = if v < s {
            let (e, t) = timer(&mut rng);
            (TaskType::Sensor, e, t)
        } else {
            let ty = if ps.len() == 1 {
                TaskType::Subscription
            } else if cfg.fusion_mode == FusionMode::Same {
                same
            } else {
                *fusion_pool.choose(&mut rng).unwrap()
            };
            if ty == TaskType::TFusion {
                let (e, t) = timer(&mut rng);
                (ty, e, t)
            } else {
                (ty, rng.random_range(cfg.event_wcet.0..=cfg.event_wcet.1), 0)
            }
        };
        tasks.push(TaskSpec { id, wcet, period, deadline: None, task_type: ty, preds: pred_ids });
    }
    let metrics = MetricConfig::default().with_sinks(SinkSelection::Last);
    let spec = DagSpec::new(cfg.core_count, tasks).with_metrics(metrics);
    let dag = spec.validate().expect("generator emits valid graphs");
    Ok(dag.adjust_branch_successors().into_spec())
}

/// Spanning structure first (every non-sensor gets an input, every sensor an
/// output, components joined), then uniform fill over the unused forward
/// pairs. Retries when the repair already needs more edges than requested.
fn draw_edges(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>, GenError> {
    let (n, s) = (cfg.node_count, cfg.sensor_count);
    for _ in 0..256 {
        let mut adj = vec![vec![false; n]; n];
        let mut edges = 0usize;
        let mut add = |adj: &mut Vec<Vec<bool>>, a: usize, b: usize| {
            if !adj[a][b] {
                adj[a][b] = true;
                edges += 1;
            }
        };
        // sensors each feed a random later non-sensor, in shuffled order so
        // that no node collects them all
        let mut targets: Vec<usize> = (s..n).collect();
        targets.shuffle(rng);
        for a in 0..s {
            let b = targets[a % targets.len()];
            add(&mut adj, a, b);
        }
        for b in s..n {
            if (0..b).all(|a| !adj[a][b]) {
                let a = rng.random_range(0..b);
                add(&mut adj, a, b);
            }
        }
        // join weak components
        loop {
            let comp = components(&adj);
            let Some(other) = (0..n).find(|&v| comp[v] != comp[0]) else { break };
            let (c0, c1) = (comp[0], comp[other]);
            let hi = (s..n).rev().find(|&v| comp[v] == c0 || comp[v] == c1).unwrap();
            let want = if comp[hi] == c0 { c1 } else { c0 };
            let lows: Vec<usize> = (0..hi).filter(|&v| comp[v] == want).collect();
            let a = *lows.choose(rng).unwrap();
            add(&mut adj, a, hi);
        }
        if edges > cfg.edge_count {
            continue;
        }
        let mut free: Vec<(usize, usize)> =
            (s..n).flat_map(|b| (0..b).map(move |a| (a, b))).filter(|&(a, b)| !adj[a][b]).collect();
        free.shuffle(rng);
        for &(a, b) in free.iter().take(cfg.edge_count - edges) {
            adj[a][b] = true;
        }
        let preds = (0..n).map(|b| (0..b).filter(|&a| adj[a][b]).collect()).collect();
        return Ok(preds);
    }
    Err(GenError::Exhausted(cfg.edge_count))
}

fn components(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], v: usize) -> usize {
        let mut r = v;
        while c[r] != r {
            r = c[r];
        }
        c[v] = r;
        r
    }
    for a in 0..n {
        for b in 0..n {
            if adj[a][b] {
                let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                comp[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    (0..n).map(|v| find(&mut comp, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_wfusion_shape() {
        let cfg = GenConfig { fusion_types: vec![TaskType::WFusion], ..GenConfig::default() };
        let spec = generate(&cfg).unwrap();
        assert_eq!(spec.tasks.len(), 6);
        assert_eq!(spec.tasks.iter().filter(|t| t.task_type == TaskType::Sensor).count(), 3);
        assert_eq!(spec.tasks.iter().map(|t| t.preds.len()).sum::<usize>(), 7);
        for t in &spec.tasks {
            assert!(t.preds.len() < 2 || t.task_type == TaskType::WFusion);
        }
    }

    #[test]
    fn minimal_chain() {
        let cfg = GenConfig { node_count: 2, sensor_count: 1, edge_count: 1, ..GenConfig::default() };
        let spec = generate(&cfg).unwrap();
        assert_eq!(spec.tasks[0].task_type, TaskType::Sensor);
        assert_eq!(spec.tasks[1].task_type, TaskType::Subscription);
        assert_eq!(spec.tasks[1].preds, ["t1"]);
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = GenConfig { seed: 42, ..GenConfig::default() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn bad_configs() {
        let c = GenConfig { edge_count: 40, ..GenConfig::default() };
        assert!(matches!(generate(&c), Err(GenError::EdgeCount { .. })));
        let c = GenConfig { fusion_types: vec![], ..GenConfig::default() };
        assert_eq!(generate(&c), Err(GenError::NoFusionType));
        let c = GenConfig { sensor_count: 0, ..GenConfig::default() };
        assert!(matches!(generate(&c), Err(GenError::Sizes { .. })));
    }

    proptest! {
        #[test]
        fn generated_graphs_validate(seed in 0u64..10_000, nodes in 2usize..15, mode in 0u8..2) {
            let sensors = (nodes / 2).max(1);
            let max = GenConfig { node_count: nodes, sensor_count: sensors, ..GenConfig::default() }.max_edges();
            let edges = (2 * nodes).clamp(nodes - 1, max);
            let cfg = GenConfig {
                node_count: nodes,
                sensor_count: sensors,
                edge_count: edges,
                seed,
                fusion_types: vec![TaskType::WFusion, TaskType::IFusion, TaskType::TFusion],
                fusion_mode: if mode == 0 { FusionMode::Same } else { FusionMode::Uniform },
                ..GenConfig::default()
            };
            let spec = generate(&cfg).unwrap();
            prop_assert_eq!(spec.tasks.iter().map(|t| t.preds.len()).sum::<usize>(), edges);
            let dag = spec.validate().unwrap();
            prop_assert_eq!(dag.adjust_branch_successors(), dag.clone());
            let fus: Vec<TaskType> = (0..dag.len()).map(|i| dag.kind(i)).filter(|k| k.is_fusion() && *k != TaskType::IFusion).collect();
            if mode == 0 {
                prop_assert!(fus.windows(2).all(|w| w[0] == w[1]));
            }
            for i in dag.sensors() {
                prop_assert!(!dag.succs(i).is_empty() || dag.len() == 1);
            }
        }
    }
}
