//! Tiny random cases shared by the property and acceptance suites.
#![allow(dead_code)]

use fusched::brute::BruteCaps;
use fusched_core::dag::{DagSpec, TaskType};
use fusched_core::expansion::build_instance_table;
use fusched_core::generator::{FusionMode, GenConfig, generate};
use fusched_core::metrics::{Metric, ObjectiveTerm};

/// A generated DAG small enough for the exhaustive oracle, solved over
/// three hyperperiods.
#[derive(Clone, Debug)]
pub struct TinyCase {
    pub seed: u64,
    pub spec: DagSpec,
}

/// SplitMix64 step, for reproducible per-seed choices.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws a case from `seed`: 2 to 4 tasks, 1 or 2 cores, a random blended or
/// lexicographic objective. `None` when the draw exceeds the oracle caps.
pub fn tiny_case(seed: u64, caps: &BruteCaps) -> Option<TinyCase> {
    let r = |salt| mix(seed, salt);
    let nodes = 2 + (r(1) % 3) as usize;
    let sensors = 1 + (r(2) % (nodes as u64 - 1)) as usize;
    let mut cfg = GenConfig {
        node_count: nodes,
        sensor_count: sensors,
        fusion_types: vec![TaskType::TFusion, TaskType::WFusion, TaskType::IFusion],
        fusion_mode: FusionMode::Uniform,
        core_count: 1 + (r(3) % 2) as u32,
        seed: r(4),
        event_wcet: (1, 2),
        utilization: (0.1, 0.5),
        periods: vec![2, 3, 4, 5, 6, 10, 12],
        ..GenConfig::default()
    };
    let max = cfg.max_edges().min(nodes * (nodes - 1) / 2);
    cfg.edge_count = nodes - 1 + (r(5) % (max - (nodes - 1) + 1) as u64) as usize;
    let mut spec = generate(&cfg).ok()?;

    let mask = 1 + r(6) % 31;
    let metrics: Vec<Metric> =
        Metric::ALL.into_iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, m)| m).collect();
    let lexicographic = r(7) % 4 == 0;
    spec.metrics.objective = metrics
        .iter()
        .enumerate()
        .map(|(n, &metric)| ObjectiveTerm {
            metric,
            weight: 1.0 + (r(8 + n as u64) % 3) as f64,
            priority: if lexicographic { n as i32 } else { 1 },
        })
        .collect();

    let dag = spec.validate().ok()?;
    let table = build_instance_table(&dag, 3).ok()?;
    (table.total() <= caps.max_instances && table.delta() <= caps.max_delta).then_some(TinyCase { seed, spec })
}

/// The first `count` accepted cases at or after `from`.
pub fn tiny_cases(from: u64, count: usize, caps: &BruteCaps) -> Vec<TinyCase> {
    (from..).filter_map(|s| tiny_case(s, caps)).take(count).collect()
}
