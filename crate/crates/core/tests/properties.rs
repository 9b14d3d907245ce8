use std::collections::VecDeque;

use fusched_core::dag::{Dag, TaskType};
use fusched_core::expansion::{build_instance_table, counts_over, hyperperiod};
use fusched_core::generator::{FusionMode, GenConfig, generate};
use fusched_core::lp::VarKind;
use fusched_core::model::{ModelOptions, Problem};
use fusched_core::time::Time;
use proptest::prelude::*;

fn random_dag(seed: u64, nodes: usize) -> Dag {
    let sensors = (nodes / 2).max(1);
    let mut cfg = GenConfig {
        node_count: nodes,
        sensor_count: sensors,
        seed,
        fusion_types: vec![TaskType::TFusion, TaskType::WFusion, TaskType::IFusion],
        fusion_mode: FusionMode::Uniform,
        ..GenConfig::default()
    };
    cfg.edge_count = (2 * nodes).clamp(nodes - 1, cfg.max_edges());
    generate(&cfg).unwrap().validate().unwrap().adjust_branch_successors()
}

/// Counts instances by simulating the triggers over `[0, window)` with every
/// task finishing the moment it starts. Arrivals are processed one at a time.
fn simulate_counts(dag: &Dag, window: Time) -> Vec<usize> {
    let n = dag.len();
    let mut count = vec![0usize; n];
    // per task and input edge: has a message arrived since the last firing
    let mut fresh: Vec<Vec<bool>> = (0..n).map(|i| vec![false; dag.preds(i).len()]).collect();
    let mut seen: Vec<Vec<bool>> = fresh.clone();
    let mut timers: Vec<(Time, usize)> = Vec::new();
    for i in (0..n).filter(|&i| dag.kind(i).is_timer()) {
        let mut t = 0;
        while t < window {
            timers.push((t, i));
            t += dag.period(i);
        }
    }
    timers.sort();
    for (_, task) in timers {
        let mut queue = VecDeque::from([task]);
        while let Some(i) = queue.pop_front() {
            count[i] += 1;
            for &s in dag.succs(i) {
                let edge = dag.preds(s).iter().position(|&p| p == i).unwrap();
                fresh[s][edge] = true;
                seen[s][edge] = true;
                let fire = match dag.kind(s) {
                    TaskType::Sensor | TaskType::TFusion => false,
                    TaskType::Subscription => true,
                    TaskType::WFusion => fresh[s].iter().all(|&f| f),
                    TaskType::IFusion => seen[s].iter().all(|&f| f),
                };
                if fire {
                    fresh[s].iter_mut().for_each(|f| *f = false);
                    queue.push_back(s);
                }
            }
        }
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn event_counts_match_trigger_simulation(seed in 0u64..100_000, nodes in 2usize..11) {
        let dag = random_dag(seed, nodes);
        let hp = hyperperiod(&dag).unwrap();
        for k in [1, 3] {
            prop_assert_eq!(counts_over(&dag, k * hp), simulate_counts(&dag, k * hp), "k = {}", k);
        }
    }

    #[test]
    fn timer_counts_scale_with_the_window(seed in 0u64..100_000, nodes in 2usize..11, k in 1i64..6) {
        let dag = random_dag(seed, nodes);
        let hp = hyperperiod(&dag).unwrap();
        let (one, many) = (counts_over(&dag, hp), counts_over(&dag, k * hp));
        for i in (0..dag.len()).filter(|&i| dag.kind(i).is_timer()) {
            prop_assert_eq!(many[i], k as usize * one[i]);
        }
    }

    #[test]
    fn subscriptions_inherit_producer_counts(seed in 0u64..100_000, nodes in 2usize..11) {
        let dag = random_dag(seed, nodes);
        let table = build_instance_table(&dag, 3).unwrap();
        let pm = dag.producers();
        for i in 0..dag.len() {
            prop_assert_eq!(table.count(i), table.count(pm.producer_of(i)));
        }
    }

    #[test]
    fn instance_table_shape(seed in 0u64..100_000, nodes in 2usize..11) {
        let dag = random_dag(seed, nodes);
        let table = build_instance_table(&dag, 3).unwrap();
        prop_assert_eq!(table.delta(), 3 * table.hp());
        for i in 0..dag.len() {
            let b: Vec<usize> = (0..=3).map(|p| table.count_at(i, p)).collect();
            prop_assert!(b.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(b[2] - b[1], b[3] - b[2]);
            if dag.kind(i) == TaskType::Sensor {
                prop_assert_eq!(table.release(i, 1), Some(0));
                prop_assert_eq!(table.release(i, 2), Some(dag.period(i)));
            }
            for j in 1..=table.count(i) {
                let p = table.phase(i, j);
                prop_assert!(b[p - 1] < j && j <= b[p]);
            }
        }
    }

    #[test]
    fn models_are_well_formed(seed in 0u64..100_000, nodes in 2usize..7) {
        let dag = random_dag(seed, nodes);
        let pb = Problem::new(&dag, &ModelOptions::default()).unwrap();
        let lp = &pb.model.lp;
        for v in &lp.vars {
            prop_assert!(v.lb <= v.ub);
            if v.kind == VarKind::Binary {
                // pruned gates are fixed through their bounds
                prop_assert!(0.0 <= v.lb && v.ub <= 1.0 && v.lb.fract() == 0.0 && v.ub.fract() == 0.0);
            }
        }
        for r in &lp.rows {
            prop_assert!(r.rhs.is_finite());
            for &(v, c) in &r.terms {
                prop_assert!(v < lp.vars.len());
                prop_assert!(c.is_finite());
            }
        }
        prop_assert!(pb.model.big_m > pb.table.delta() as f64);
        // every read has a candidate unless the model was flagged infeasible
        let flagged = pb.model.infeasible.is_some();
        for i in (0..dag.len()).filter(|&i| dag.kind(i).is_fusion() && !flagged) {
            for e in 0..dag.preds(i).len() {
                for j in 1..=pb.table.count(i) {
                    prop_assert!(!pb.model.index.u[i][e][j - 1].vars.is_empty());
                }
            }
        }
    }
}

#[test]
fn simulation_agrees_on_the_worked_example() {
    let dag = fusched_core::presets::instance_count_example().validate().unwrap();
    let hp = hyperperiod(&dag).unwrap();
    assert_eq!(hp, 60);
    assert_eq!(simulate_counts(&dag, hp), [6, 3, 4, 2, 6, 3, 3, 5, 3, 3, 3]);
}
