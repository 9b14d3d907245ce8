//! Built-in case-study graphs with their published metric values.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dag::{DagSpec, TaskSpec, TaskType};
use crate::metrics::{Metric, MetricConfig, SinkSelection};
use crate::time::Time;

use TaskType::*;

/// A named case study: the graph, its platform, and the reference values
/// an optimal schedule must reach.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: String,
    pub dag: DagSpec,
    pub expected: Vec<(Metric, Time)>,
}

impl Preset {
    pub fn expected(&self, m: Metric) -> Option<Time> {
        self.expected.iter().find(|(k, _)| *k == m).map(|&(_, v)| v)
    }
}

fn task(id: usize, wcet: Time, period: Time, ty: TaskType, preds: &[usize]) -> TaskSpec {
    TaskSpec {
        id: format!("t{id}"),
        wcet,
        period,
        deadline: None,
        task_type: ty,
        preds: preds.iter().map(|p| format!("t{p}")).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FusionConfig {
    WS,
    WT,
    TS,
    TT,
    NH,
}

impl FusionConfig {
    pub const ALL: [FusionConfig; 5] =
        [FusionConfig::WS, FusionConfig::WT, FusionConfig::TS, FusionConfig::TT, FusionConfig::NH];

    pub fn name(self) -> &'static str {
        match self {
            FusionConfig::WS => "WS",
            FusionConfig::WT => "WT",
            FusionConfig::TS => "TS",
            FusionConfig::TT => "TT",
            FusionConfig::NH => "NH",
        }
    }
}

/// Two sensor chains joined by a fusion task and followed by a two-task tail
/// ending in the actuator `t7`. Single core; objective MRT+MTD+PAoI+WCRT with
/// WCRT along the chain from `t1`.
pub fn fusion_two_chains(cfg: FusionConfig) -> Preset {
    // (T1, T2, fusion type and period, actuator type and period)
    let (t1, t2, (ty5, p5), (ty7, p7)) = match cfg {
        FusionConfig::WS => (360, 360, (WFusion, 0), (Subscription, 0)),
        FusionConfig::WT => (420, 420, (WFusion, 0), (TFusion, 840)),
        FusionConfig::TS => (420, 420, (TFusion, 840), (Subscription, 0)),
        FusionConfig::TT => (480, 480, (TFusion, 960), (TFusion, 960)),
        FusionConfig::NH => (480, 360, (TFusion, 960), (TFusion, 960)),
    };
    let tasks = vec![
        task(1, 10, t1, Sensor, &[]),
        task(2, 20, t2, Sensor, &[]),
        task(3, 10, 0, Subscription, &[1]),
        task(4, 20, 0, Subscription, &[2]),
        task(5, 30, p5, ty5, &[3, 4]),
        task(6, 30, 0, Subscription, &[5]),
        task(7, 30, p7, ty7, &[6]),
    ];
    let metrics = MetricConfig::blended(&[Metric::Mrt, Metric::Mtd, Metric::Paoi, Metric::Wcrt]);
    let (mrt, paoi, wcrt, mtd) = match cfg {
        FusionConfig::WS => (510, 360, 150, 0),
        FusionConfig::WT => (990, 120, 150, 0),
        FusionConfig::TS => (990, 60, 150, 0),
        FusionConfig::TT => (1110, 60, 150, 0),
        FusionConfig::NH => (1250, 40, 250, 120),
    };
    Preset {
        name: format!("fusion-two-chains:{}", cfg.name()),
        dag: DagSpec::new(1, tasks).with_metrics(metrics),
        expected: vec![(Metric::Mrt, mrt), (Metric::Paoi, paoi), (Metric::Wcrt, wcrt), (Metric::Mtd, mtd)],
    }
}

/// `m` cameras (period 100) feeding a wait-for-all fusion, followed by
/// perception, planning, control and the actuator.
pub fn navigation(m: usize) -> Preset {
    let mut tasks: Vec<TaskSpec> = (1..=m).map(|c| task(c, 5, 100, Sensor, &[])).collect();
    let cams: Vec<usize> = (1..=m).collect();
    let f = m + 1;
    tasks.push(task(f, 10, 0, WFusion, &cams));
    for k in 1..=4 {
        tasks.push(task(f + k, 10, 0, Subscription, &[f + k - 1]));
    }
    let w = 50 + 5 * m as Time;
    Preset {
        name: format!("navigation:m={m}"),
        dag: DagSpec::new(1, tasks),
        expected: vec![
            (Metric::Mrt, 100 + w),
            (Metric::Mtd, 0),
            (Metric::Paoi, 100),
            (Metric::Wcrt, w),
            (Metric::Ms, 200 + w),
        ],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BranchConfig {
    A,
    B,
}

/// Sensor `t1` branches into a single-input immediate fusion `t3` and a
/// fusion `t4` with sensor `t2`; both meet in the wait-for-all sink `t5`.
/// Two cores; objective MRT+MTD+PAoI.
pub fn branch(cfg: BranchConfig) -> Preset {
    let (t1, t4) = match cfg {
        BranchConfig::A => (20, task(4, 5, 0, WFusion, &[1, 2])),
        BranchConfig::B => (15, task(4, 5, 30, TFusion, &[1, 2])),
    };
    let tasks = vec![
        task(1, 5, t1, Sensor, &[]),
        task(2, 7, 20, Sensor, &[]),
        task(3, 5, 0, IFusion, &[1]),
        t4,
        task(5, 5, 0, WFusion, &[3, 4]),
    ];
    let (mrt, mtd, paoi, name) = match cfg {
        BranchConfig::A => (37, 0, 20, "A"),
        BranchConfig::B => (60, 5, 17, "B"),
    };
    Preset {
        name: format!("branch:{name}"),
        dag: DagSpec::new(2, tasks).with_metrics(MetricConfig::blended(&[Metric::Mrt, Metric::Mtd, Metric::Paoi])),
        expected: vec![(Metric::Mrt, mrt), (Metric::Mtd, mtd), (Metric::Paoi, paoi)],
    }
}

/// Two sensors fused by a single sink task. Setting 1: periods 5 and 7 on
/// one core; setting 2: periods 3 and 4 on two cores. The sink is either an
/// immediate or a wait-for-all fusion.
pub fn two_sensor_fusion(setting: u8, fusion: TaskType) -> Option<Preset> {
    let (p1, p2, cores) = match setting {
        1 => (5, 7, 1),
        2 => (3, 4, 2),
        _ => return None,
    };
    let (mrt, mtd) = match (setting, fusion) {
        (1, IFusion) => (9, 6),
        (1, WFusion) => (12, 2),
        (2, IFusion) => (6, 3),
        (2, WFusion) => (8, 1),
        _ => return None,
    };
    let tasks = vec![task(1, 1, p1, Sensor, &[]), task(2, 1, p2, Sensor, &[]), task(3, 1, 0, fusion, &[1, 2])];
    Some(Preset {
        name: format!("two-sensor:{setting}:{}", fusion.short_name()),
        dag: DagSpec::new(cores, tasks).with_metrics(MetricConfig::blended(&[Metric::Mrt, Metric::Mtd])),
        expected: vec![(Metric::Mrt, mrt), (Metric::Mtd, mtd)],
    })
}

/// The eleven-task graph used to illustrate instance counting (HP = 60).
/// `t10` is a t-fusion with period 20; its inputs are not pinned down by the
/// count example and are taken as `t5` and `t9`.
pub fn instance_count_example() -> DagSpec {
    let tasks = vec![
        task(1, 1, 10, Sensor, &[]),
        task(2, 1, 20, Sensor, &[]),
        task(3, 1, 15, Sensor, &[]),
        task(4, 1, 30, Sensor, &[]),
        task(5, 1, 0, Subscription, &[1]),
        task(6, 1, 0, Subscription, &[2]),
        task(7, 1, 0, Subscription, &[2]),
        task(8, 1, 0, IFusion, &[3, 4]),
        task(9, 1, 0, Subscription, &[6]),
        task(10, 1, 20, TFusion, &[5, 9]),
        task(11, 1, 0, WFusion, &[7, 8]),
    ];
    DagSpec::new(1, tasks)
}

/// Radar, lidar and GPS chains meeting in a prediction task `t9` of the
/// given fusion type (t-fusion runs with period 15).
pub fn prediction_example(fusion: TaskType) -> DagSpec {
    let p9 = if fusion == TFusion { 15 } else { 0 };
    let tasks = vec![
        task(1, 2, 20, Sensor, &[]),
        task(2, 2, 20, Sensor, &[]),
        task(3, 2, 20, Sensor, &[]),
        task(4, 2, 0, Subscription, &[1]),
        task(5, 2, 0, Subscription, &[2]),
        task(6, 2, 0, Subscription, &[4]),
        task(7, 2, 0, Subscription, &[5]),
        task(8, 2, 0, Subscription, &[3]),
        task(9, 4, p9, fusion, &[6, 7, 8]),
    ];
    DagSpec::new(1, tasks).with_metrics(MetricConfig::default().with_sinks(SinkSelection::All))
}

/// Every preset with reference values.
pub fn catalog() -> Vec<Preset> {
    let mut v: Vec<Preset> = FusionConfig::ALL.into_iter().map(fusion_two_chains).collect();
    v.extend((1..=10).map(navigation));
    v.push(branch(BranchConfig::A));
    v.push(branch(BranchConfig::B));
    for s in [1, 2] {
        for ty in [IFusion, WFusion] {
            v.extend(two_sensor_fusion(s, ty));
        }
    }
    v
}

/// Resolves a preset by name, e.g. `fusion-two-chains:TT`, `navigation:m=3`,
/// `branch:A`, `two-sensor:2:i-fus`. Graph-only examples (`count-example`,
/// `prediction:<type>`) come back with no reference values.
pub fn lookup(name: &str) -> Option<Preset> {
    if let Some(p) = catalog().into_iter().find(|p| p.name.eq_ignore_ascii_case(name)) {
        return Some(p);
    }
    if name == "count-example" {
        return Some(Preset { name: name.into(), dag: instance_count_example(), expected: vec![] });
    }
    if let Some(ty) = name.strip_prefix("prediction:").and_then(TaskType::parse)
        && ty.is_fusion()
    {
        return Some(Preset { name: name.into(), dag: prediction_example(ty), expected: vec![] });
    }
    if let Some(m) = name.strip_prefix("navigation:m=").and_then(|m| m.parse::<usize>().ok())
        && m >= 1
    {
        return Some(navigation(m));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_validates() {
        for p in catalog() {
            p.dag.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn lookup_names() {
        assert_eq!(lookup("fusion-two-chains:tt").unwrap().expected(Metric::Mrt), Some(1110));
        assert_eq!(lookup("navigation:m=3").unwrap().expected(Metric::Mrt), Some(165));
        assert_eq!(lookup("navigation:m=12").unwrap().dag.tasks.len(), 17);
        assert_eq!(lookup("branch:A").unwrap().expected(Metric::Paoi), Some(20));
        assert!(lookup("prediction:w-fus").is_some());
        assert!(lookup("nope").is_none());
    }

    #[test]
    fn navigation_reference_values_step_by_five() {
        let mrt: Vec<Time> = (1..=10).map(|m| navigation(m).expected(Metric::Mrt).unwrap()).collect();
        assert_eq!(mrt, [155, 160, 165, 170, 175, 180, 185, 190, 195, 200]);
        assert_eq!(navigation(1).expected(Metric::Ms), Some(255));
        assert_eq!(navigation(10).expected(Metric::Wcrt), Some(100));
    }
}
