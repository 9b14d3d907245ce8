//! Instance-pair MILP for static multi-core schedules of fusion DAGs.
//!
//! Variables per instance: start `s`, finish `f`, core assignment `y`
//! (only with two or more cores). Ordering binaries `z` for every instance
//! pair that may share a core and overlap in time. Per fusion instance and
//! incoming edge, binaries `u` select the producer instance that is read.
//! Sensor provenance `U` is derived from `u` through linearized products, and
//! the five metrics are epigraph variables over the evaluation window.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dag::{Dag, TaskType};
use crate::expansion::{ExpansionError, InstanceTable, build_instance_table};
use crate::lp::{Cmp, Group, LinearModel, VarId, VarKind};
use crate::metrics::{Metric, MetricConfig, MetricError};
use crate::time::Time;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOptions {
    /// Window multiplier: Δ = k · HP.
    pub k: u32,
    /// Keep all instances of a task on one core.
    pub pin_tasks: bool,
    /// Emit ordering binaries only for pairs whose feasible windows intersect.
    pub prune_pairs: bool,
    /// Restrict the k-th instance to the first k cores.
    pub break_symmetry: bool,
    /// Override for the big-M constant.
    pub big_m: Option<f64>,
    /// Lower-bound each fusion start by the work its inputs need first.
    pub workload_cuts: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            k: 3,
            pin_tasks: false,
            prune_pairs: true,
            break_symmetry: true,
            big_m: None,
            workload_cuts: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One provenance term: constant true or a 0/1 model variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prov {
    One,
    Var(VarId),
}

impl Prov {
    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            Prov::One => 1.0,
            Prov::Var(v) => x[v],
        }
    }
}

/// Sensor instance (task, index) paired with the indicator that it reaches a
/// given instance.
pub type ProvList = Vec<((usize, usize), Prov)>;

/// `u` variables of one (fusion instance, incoming edge): producer index
/// `lo + k` maps to `vars[k]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UDomain {
    pub lo: usize,
    pub vars: Vec<VarId>,
}

impl UDomain {
    pub fn hi(&self) -> usize {
        self.lo + self.vars.len() - 1
    }

    pub fn get(&self, jp: usize) -> Option<VarId> {
        jp.checked_sub(self.lo).and_then(|k| self.vars.get(k).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, VarId)> + '_ {
        self.vars.iter().enumerate().map(move |(k, &v)| (self.lo + k, v))
    }
}

/// Where each modelling symbol lives in the flat variable vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelIndex {
    /// `s[task][j-1]`
    pub s: Vec<Vec<VarId>>,
    pub f: Vec<Vec<VarId>>,
    /// `y[task][j-1][core]`; empty on a single core.
    pub y: Vec<Vec<Vec<VarId>>>,
    /// `u[task][edge][j-1]`; empty for non-fusion tasks.
    pub u: Vec<Vec<Vec<UDomain>>>,
    /// Provenance of every fusion instance, `prov[task][j-1]`.
    pub prov: Vec<Vec<ProvList>>,
    pub ots: BTreeMap<(usize, usize), VarId>,
    pub nts: BTreeMap<(usize, usize), VarId>,
    pub metric: BTreeMap<Metric, VarId>,
}

impl ModelIndex {
    pub fn core_of(&self, x: &[f64], task: usize, j: usize) -> usize {
        let ys = &self.y[task][j - 1];
        (0..ys.len()).max_by(|&a, &b| x[ys[a]].total_cmp(&x[ys[b]])).unwrap_or(0)
    }

    /// Producer index read on `edge` by instance `j` of fusion `task`.
    pub fn used(&self, x: &[f64], task: usize, edge: usize, j: usize) -> usize {
        let d = &self.u[task][edge][j - 1];
        d.iter().max_by(|a, b| x[a.1].total_cmp(&x[b.1])).map(|(jp, _)| jp).unwrap_or(0)
    }
}

/// Earliest start and latest finish of every instance implied by the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Windows {
    pub es: Vec<Vec<Time>>,
    pub lf: Vec<Vec<Time>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IlpModel {
    pub lp: LinearModel,
    pub index: ModelIndex,
    pub windows: Windows,
    /// Objective levels, highest priority first.
    pub levels: Vec<Vec<(Metric, f64)>>,
    pub objective: Vec<Vec<(VarId, f64)>>,
    pub big_m: f64,
    pub horizon: Time,
    pub cores: usize,
    pub eval_sinks: Vec<usize>,
    pub wcrt_pairs: Vec<(usize, usize)>,
    /// Set when bounds alone already rule out any schedule.
    pub infeasible: Option<String>,
}

impl IlpModel {
    pub fn check_assignment(&self, x: &[f64]) -> Vec<crate::lp::Violation> {
        self.lp.check(x, 1e-6)
    }

    pub fn level_value(&self, level: usize, x: &[f64]) -> f64 {
        self.objective[level].iter().map(|&(v, c)| c * x[v]).sum()
    }

    pub fn to_lp(&self) -> String {
        let obj: Vec<(VarId, f64)> = self.objective.iter().flatten().copied().collect();
        self.lp.to_lp(&obj)
    }
}

/// Everything needed to solve and interpret one case: the branch-adjusted
/// graph, its instance table and the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub dag: Dag,
    pub table: InstanceTable,
    pub config: MetricConfig,
    pub model: IlpModel,
}

impl Problem {
    pub fn new(dag: &Dag, opts: &ModelOptions) -> Result<Problem, ModelError> {
        Self::with_config(dag, dag.metrics(), opts)
    }

    pub fn with_config(dag: &Dag, config: &MetricConfig, opts: &ModelOptions) -> Result<Problem, ModelError> {
        let dag = dag.adjust_branch_successors();
        let table = build_instance_table(&dag, opts.k)?;
        let model = build(&dag, &table, config, opts)?;
        Ok(Problem { dag, table, config: config.clone(), model })
    }
}

/// Producer-index range an edge may read, from instance counts alone.
pub fn count_domain(dag: &Dag, table: &InstanceTable, task: usize, edge: usize, j: usize) -> (usize, usize) {
    let pred = dag.preds(task)[edge];
    let np = table.count(pred);
    let ni = table.count(task);
    match dag.kind(task) {
        TaskType::WFusion => (j, np.saturating_sub(ni - j)),
        TaskType::IFusion => {
            let e = dag.preds(task).len();
            let others: usize =
                dag.preds(task).iter().enumerate().filter(|&(o, _)| o != edge).map(|(_, &p)| table.count(p)).sum();
            ((j + e - 1).saturating_sub(others).max(1), j.min(np))
        }
        _ => (1, np),
    }
}

/// Forward/backward propagation of releases, precedences and deadlines, with
/// `u` domains pruned to producer instances that can finish in time.
pub fn windows(dag: &Dag, table: &InstanceTable, horizon: Time) -> (Windows, Vec<Vec<Vec<(usize, usize)>>>) {
    let n = dag.len();
    let mut es = vec![Vec::new(); n];
    let mut lf = vec![Vec::new(); n];
    let mut dom: Vec<Vec<Vec<(usize, usize)>>> = vec![Vec::new(); n];
    for &i in dag.topo() {
        let ni = table.count(i);
        let e = dag.wcet(i);
        let d = dag.deadline(i);
        let kind = dag.kind(i);
        let mut es_i = vec![0; ni];
        let mut lf_i = vec![0; ni];
        let mut dom_i = vec![vec![(1, 0); ni]; dag.preds(i).len()];
        for j in 1..=ni {
            let mut lo_t = if j > 1 { es_i[j - 2] + e } else { 0 };
            let hi_t;
            match kind {
                TaskType::Sensor => {
                    lo_t = lo_t.max(table.release(i, j).unwrap());
                    hi_t = table.release(i, j).unwrap() + d;
                }
                TaskType::Subscription => {
                    let p = dag.preds(i)[0];
                    lo_t = lo_t.max(es[p][j - 1] + dag.wcet(p));
                    hi_t = lf[p][j - 1] + d;
                }
                _ => {
                    let mut latest_in = 0;
                    for (k, &p) in dag.preds(i).iter().enumerate() {
                        let (lo, hi) = count_domain(dag, table, i, k, j);
                        dom_i[k][j - 1] = (lo, hi);
                        if lo > hi {
                            continue;
                        }
                        lo_t = lo_t.max(es[p][lo - 1] + dag.wcet(p));
                        latest_in = latest_in.max((lo..=hi).map(|jp| lf[p][jp - 1]).max().unwrap());
                    }
                    if kind == TaskType::TFusion {
                        lo_t = lo_t.max(table.release(i, j).unwrap());
                        hi_t = table.release(i, j).unwrap() + d;
                    } else {
                        hi_t = latest_in + d;
                    }
                }
            }
            es_i[j - 1] = lo_t;
            lf_i[j - 1] = hi_t.min(horizon);
        }
        for j in (1..ni).rev() {
            lf_i[j - 1] = lf_i[j - 1].min(lf_i[j] - e);
        }
        // drop producer instances that cannot finish before this instance's
        // latest start
        for (k, &p) in dag.preds(i).iter().enumerate() {
            for j in 1..=ni {
                let (lo, hi) = &mut dom_i[k][j - 1];
                while *hi >= *lo && *hi >= 1 && es[p][*hi - 1] + dag.wcet(p) > lf_i[j - 1] - e {
                    *hi -= 1;
                }
            }
        }
        es[i] = es_i;
        lf[i] = lf_i;
        dom[i] = dom_i;
    }
    (Windows { es, lf }, dom)
}

fn single_paths(dag: &Dag) -> Vec<Vec<bool>> {
    let n = dag.len();
    let mut out = vec![vec![false; n]; n];
    for s in dag.sensors() {
        // path counts saturate at two
        let mut count = vec![0u8; n];
        count[s] = 1;
        for &t in dag.topo() {
            if t != s {
                count[t] = dag.preds(t).iter().map(|&p| count[p]).fold(0u8, |a, c| a.saturating_add(c).min(2));
            }
        }
        for t in 0..n {
            out[s][t] = count[t] == 1;
        }
    }
    out
}

struct Builder<'a> {
    dag: &'a Dag,
    table: &'a InstanceTable,
    lp: LinearModel,
    ix: ModelIndex,
    m: f64,
    cores: usize,
    /// `single[s][t]`: exactly one path leads from sensor `s` to `t`, so
    /// every instance of `t` carries exactly one sample of `s`.
    single: Vec<Vec<bool>>,
}

/// Assembles the full model. `dag` must already be branch-adjusted and
/// `table` built from it.
pub fn build(
    dag: &Dag,
    table: &InstanceTable,
    config: &MetricConfig,
    opts: &ModelOptions,
) -> Result<IlpModel, ModelError> {
    let levels = config.levels()?;
    let eval_sinks = config.eval_sinks(dag);
    if eval_sinks.is_empty() {
        return Err(MetricError::NoSink.into());
    }
    let wcrt_pairs = config.wcrt_pairs(dag)?;
    // deadlines alone bound every finish; the latest one is the horizon
    let (win, dom) = windows(dag, table, Time::MAX / 4);
    let horizon = win.lf.iter().flatten().copied().max().unwrap_or(0);
    let big_m = opts.big_m.unwrap_or((horizon + 1) as f64);
    let mut b = Builder {
        dag,
        table,
        lp: LinearModel::default(),
        ix: ModelIndex::default(),
        m: big_m,
        cores: dag.cores() as usize,
        single: single_paths(dag),
    };
    let infeasible = b.timing_vars(&win, &dom);
    b.core_constraints(&win, opts);
    b.trigger_constraints();
    b.fusion_constraints();
    b.provenance_constraints();
    b.metric_constraints(config, &eval_sinks, &wcrt_pairs);
    b.hp_copy_constraints();
    if opts.workload_cuts {
        b.workload_cuts(&win);
    }
    let objective = levels.iter().map(|lvl| lvl.iter().map(|&(m, w)| (b.ix.metric[&m], w)).collect()).collect();
    Ok(IlpModel {
        lp: b.lp,
        index: b.ix,
        windows: win,
        levels,
        objective,
        big_m,
        horizon,
        cores: dag.cores() as usize,
        eval_sinks,
        wcrt_pairs,
        infeasible,
    })
}

impl Builder<'_> {
    fn name(&self, prefix: &str, i: usize, j: usize) -> String {
        format!("{prefix}_{}_{j}", self.dag.id(i))
    }

    fn timing_vars(&mut self, win: &Windows, dom: &[Vec<Vec<(usize, usize)>>]) -> Option<String> {
        let mut infeasible = None;
        let n = self.dag.len();
        self.ix.s = vec![Vec::new(); n];
        self.ix.f = vec![Vec::new(); n];
        self.ix.u = vec![Vec::new(); n];
        for i in 0..n {
            let e = self.dag.wcet(i);
            for j in 1..=self.table.count(i) {
                let es = win.es[i][j - 1];
                let mut lf = win.lf[i][j - 1];
                if es + e > lf {
                    infeasible.get_or_insert_with(|| {
                        format!("instance {} of `{}` cannot meet its deadline", j, self.dag.id(i))
                    });
                    lf = es + e;
                }
                let s = self.lp.add_var(self.name("s", i, j), VarKind::Integer, es as f64, (lf - e) as f64);
                let f = self.lp.add_var(self.name("f", i, j), VarKind::Continuous, (es + e) as f64, lf as f64);
                self.ix.s[i].push(s);
                self.ix.f[i].push(f);
            }
            if self.dag.kind(i).is_fusion() {
                let mut per_edge = Vec::new();
                for (k, _) in self.dag.preds(i).iter().enumerate() {
                    let mut per_j = Vec::new();
                    for j in 1..=self.table.count(i) {
                        let (lo, hi) = dom[i][k][j - 1];
                        if lo > hi {
                            infeasible.get_or_insert_with(|| {
                                format!("instance {} of `{}` has no usable input on edge {}", j, self.dag.id(i), k)
                            });
                        }
                        let vars =
                            (lo..=hi).map(|jp| self.lp.binary(format!("u_{}_e{k}_{j}_{jp}", self.dag.id(i)))).collect();
                        per_j.push(UDomain { lo, vars });
                    }
                    per_edge.push(per_j);
                }
                self.ix.u[i] = per_edge;
            }
        }
        infeasible
    }

    /// Core assignment, finish-time identity and pairwise non-overlap.
    fn core_constraints(&mut self, win: &Windows, opts: &ModelOptions) {
        let dag = self.dag;
        let n = dag.len();
        let cores = self.cores;
        let m = self.m;
        self.ix.y = vec![Vec::new(); n];
        let mut order = 0usize;
        for i in 0..n {
            for j in 1..=self.table.count(i) {
                let (s, f) = (self.ix.s[i][j - 1], self.ix.f[i][j - 1]);
                self.lp.add(Group::Finish, vec![(f, 1.0), (s, -1.0)], Cmp::Eq, dag.wcet(i) as f64);
                if cores >= 2 {
                    let ys: Vec<VarId> = (0..cores)
                        .map(|c| {
                            let ub = if opts.break_symmetry && c > order { 0.0 } else { 1.0 };
                            let name = format!("y_{}_{j}_c{c}", dag.id(i));
                            self.lp.add_var(name, VarKind::Binary, 0.0, ub)
                        })
                        .collect();
                    self.lp.add(Group::Assignment, ys.iter().map(|&y| (y, 1.0)).collect(), Cmp::Eq, 1.0);
                    self.ix.y[i].push(ys);
                }
                order += 1;
            }
        }
        if cores >= 2 && opts.pin_tasks {
            for i in 0..n {
                for j in 2..=self.table.count(i) {
                    for c in 0..cores {
                        let (a, b) = (self.ix.y[i][j - 1][c], self.ix.y[i][0][c]);
                        self.lp.add(Group::Pin, vec![(a, 1.0), (b, -1.0)], Cmp::Eq, 0.0);
                    }
                }
            }
        }

        let all: Vec<(usize, usize)> = self.table.instances().map(|id| (id.task, id.index)).collect();
        for (ka, &(ia, ja)) in all.iter().enumerate() {
            for &(ib, jb) in &all[ka + 1..] {
                if ia == ib {
                    // ordered by the sequence constraint
                    continue;
                }
                let chained = ja == jb
                    && ((dag.kind(ib) == TaskType::Subscription && dag.preds(ib)[0] == ia)
                        || (dag.kind(ia) == TaskType::Subscription && dag.preds(ia)[0] == ib));
                if chained {
                    continue;
                }
                if opts.prune_pairs {
                    let (esa, lfa) = (win.es[ia][ja - 1], win.lf[ia][ja - 1]);
                    let (esb, lfb) = (win.es[ib][jb - 1], win.lf[ib][jb - 1]);
                    if lfa <= esb || lfb <= esa {
                        continue;
                    }
                }
                let z = self.lp.binary(format!("z_{}_{ja}_{}_{jb}", dag.id(ia), dag.id(ib)));
                let (sa, fa) = (self.ix.s[ia][ja - 1], self.ix.f[ia][ja - 1]);
                let (sb, fb) = (self.ix.s[ib][jb - 1], self.ix.f[ib][jb - 1]);
                if cores < 2 {
                    // z = 1: b after a; z = 0: a after b
                    self.lp.add(Group::Overlap, vec![(sb, 1.0), (fa, -1.0), (z, -m)], Cmp::Ge, -m);
                    self.lp.add(Group::Overlap, vec![(sa, 1.0), (fb, -1.0), (z, m)], Cmp::Ge, 0.0);
                } else {
                    for c in 0..cores {
                        let (ya, yb) = (self.ix.y[ia][ja - 1][c], self.ix.y[ib][jb - 1][c]);
                        if self.lp.vars[ya].ub == 0.0 || self.lp.vars[yb].ub == 0.0 {
                            continue;
                        }
                        self.lp.add(
                            Group::Overlap,
                            vec![(sb, 1.0), (fa, -1.0), (z, -m), (ya, -m), (yb, -m)],
                            Cmp::Ge,
                            -3.0 * m,
                        );
                        self.lp.add(
                            Group::Overlap,
                            vec![(sa, 1.0), (fb, -1.0), (z, m), (ya, -m), (yb, -m)],
                            Cmp::Ge,
                            -2.0 * m,
                        );
                    }
                }
            }
        }
    }

    /// Timer releases, per-task instance order, subscription precedence and
    /// the deadlines of timer and subscription tasks.
    fn trigger_constraints(&mut self) {
        let dag = self.dag;
        for i in 0..dag.len() {
            let d = dag.deadline(i) as f64;
            for j in 1..=self.table.count(i) {
                let (s, f) = (self.ix.s[i][j - 1], self.ix.f[i][j - 1]);
                if j > 1 {
                    let fprev = self.ix.f[i][j - 2];
                    self.lp.add(Group::Sequence, vec![(s, 1.0), (fprev, -1.0)], Cmp::Ge, 0.0);
                }
                match dag.kind(i) {
                    TaskType::Sensor | TaskType::TFusion => {
                        let r = self.table.release(i, j).unwrap() as f64;
                        self.lp.add(Group::Timer, vec![(s, 1.0)], Cmp::Ge, r);
                        self.lp.add(Group::Deadline, vec![(f, 1.0)], Cmp::Le, r + d);
                    }
                    TaskType::Subscription => {
                        let fp = self.ix.f[dag.preds(i)[0]][j - 1];
                        self.lp.add(Group::Subscription, vec![(s, 1.0), (fp, -1.0)], Cmp::Ge, 0.0);
                        self.lp.add(Group::Deadline, vec![(f, 1.0), (fp, -1.0)], Cmp::Le, d);
                    }
                    _ => {}
                }
            }
        }
    }

    /// Gated start precedence, one read per edge, monotone reads, W-fusion
    /// single use, I-fusion freshness and event-fusion deadlines.
    /// Whatever a fusion instance reads, the read instances and the
    /// subscription chains feeding them all start no earlier than the
    /// earliest candidate and finish before the fusion starts, so the
    /// fusion start is at least that point plus their work spread over the
    /// cores. Chain tasks shared by two edges are left out.
    fn workload_cuts(&mut self, win: &Windows) {
        let dag = self.dag;
        for i in (0..dag.len()).filter(|&i| dag.kind(i).is_fusion()) {
            let chains: Vec<Vec<usize>> = dag
                .preds(i)
                .iter()
                .map(|&q| {
                    let mut c = vec![q];
                    while dag.kind(*c.last().unwrap()) == TaskType::Subscription {
                        c.push(dag.preds(*c.last().unwrap())[0]);
                    }
                    c
                })
                .collect();
            let shared = |t: usize| chains.iter().filter(|c| c.contains(&t)).count() > 1;
            let work: Time = chains.iter().flatten().filter(|&&t| !shared(t)).map(|&t| dag.wcet(t)).sum();
            if work == 0 {
                continue;
            }
            for j in 1..=self.table.count(i) {
                let mut r = Time::MAX;
                for (k, c) in chains.iter().enumerate() {
                    let Some(lo) = self.ix.u[i][k][j - 1].iter().map(|(jp, _)| jp).min() else { continue };
                    // a subscription chain runs at the index it reads
                    for &t in c.iter().filter(|&&t| !shared(t)) {
                        r = r.min(win.es[t][lo - 1]);
                    }
                }
                if r == Time::MAX {
                    continue;
                }
                let bound = r as f64 + work as f64 / self.cores.max(1) as f64;
                self.lp.add(Group::Workload, vec![(self.ix.s[i][j - 1], 1.0)], Cmp::Ge, bound);
            }
        }
    }

    fn fusion_constraints(&mut self) {
        let dag = self.dag;
        let m = self.m;
        for i in 0..dag.len() {
            let kind = dag.kind(i);
            if !kind.is_fusion() {
                continue;
            }
            let ni = self.table.count(i);
            let preds = dag.preds(i).to_vec();
            for (k, &p) in preds.iter().enumerate() {
                for j in 1..=ni {
                    let s = self.ix.s[i][j - 1];
                    let d = self.ix.u[i][k][j - 1].clone();
                    for (jp, u) in d.iter() {
                        let fp = self.ix.f[p][jp - 1];
                        self.lp.add(Group::FusionStart, vec![(s, 1.0), (fp, -1.0), (u, -m)], Cmp::Ge, -m);
                    }
                    self.lp.add(Group::UseOnce, d.vars.iter().map(|&u| (u, 1.0)).collect(), Cmp::Eq, 1.0);
                    if j < ni {
                        let next = &self.ix.u[i][k][j];
                        let mut t: Vec<(VarId, f64)> = next.iter().map(|(jp, u)| (u, jp as f64)).collect();
                        t.extend(d.iter().map(|(jp, u)| (u, -(jp as f64))));
                        self.lp.add(Group::Monotone, t, Cmp::Ge, 0.0);
                    }
                }
                if kind == TaskType::WFusion {
                    let mut cols: BTreeMap<usize, Vec<(VarId, f64)>> = BTreeMap::new();
                    for j in 1..=ni {
                        for (jp, u) in self.ix.u[i][k][j - 1].iter() {
                            cols.entry(jp).or_default().push((u, 1.0));
                        }
                    }
                    for (_, col) in cols {
                        if col.len() > 1 {
                            self.lp.add(Group::WfusOnce, col, Cmp::Le, 1.0);
                        }
                    }
                }
            }
            if kind == TaskType::IFusion {
                for j in 1..ni {
                    let mut t = Vec::new();
                    for k in 0..preds.len() {
                        t.extend(self.ix.u[i][k][j].iter().map(|(jp, u)| (u, jp as f64)));
                        t.extend(self.ix.u[i][k][j - 1].iter().map(|(jp, u)| (u, -(jp as f64))));
                    }
                    self.lp.add(Group::IfusFresh, t, Cmp::Ge, 1.0);
                }
            }
            if kind == TaskType::TFusion {
                continue;
            }
            // release = latest finish among the inputs read; a selects the edge
            // attaining it
            let dl = dag.deadline(i) as f64;
            for j in 1..=ni {
                let f = self.ix.f[i][j - 1];
                let sel: Vec<Option<VarId>> = if preds.len() > 1 {
                    let a: Vec<VarId> =
                        (0..preds.len()).map(|k| self.lp.binary(format!("a_{}_{j}_e{k}", dag.id(i)))).collect();
                    self.lp.add(Group::Deadline, a.iter().map(|&v| (v, 1.0)).collect(), Cmp::Eq, 1.0);
                    a.into_iter().map(Some).collect()
                } else {
                    vec![None]
                };
                for (k, &p) in preds.iter().enumerate() {
                    let d = self.ix.u[i][k][j - 1].clone();
                    for (jp, u) in d.iter() {
                        let fp = self.ix.f[p][jp - 1];
                        let mut t = vec![(f, 1.0), (fp, -1.0), (u, m)];
                        let mut rhs = dl + m;
                        if let Some(a) = sel[k] {
                            t.push((a, m));
                            rhs += m;
                        }
                        self.lp.add(Group::Deadline, t, Cmp::Le, rhs);
                    }
                }
            }
        }
    }

    /// Provenance of an arbitrary instance from sensor identities, fusion
    /// lists and subscription inheritance.
    fn prov_of(&self, task: usize, j: usize) -> ProvList {
        let p = self.dag.producers().producer_of(task);
        match self.dag.kind(p) {
            TaskType::Sensor => vec![((p, j), Prov::One)],
            _ => self.ix.prov[p][j - 1].clone(),
        }
    }

    fn provenance_constraints(&mut self) {
        let dag = self.dag;
        let pm = dag.producers();
        self.ix.prov = vec![Vec::new(); dag.len()];
        for &i in dag.topo() {
            if !dag.kind(i).is_fusion() {
                continue;
            }
            let mut per_j = Vec::new();
            for j in 1..=self.table.count(i) {
                let mut terms: BTreeMap<(usize, usize), Vec<VarId>> = BTreeMap::new();
                for (k, &pred) in dag.preds(i).iter().enumerate() {
                    let p = pm.producer_of(pred);
                    let d = self.ix.u[i][k][j - 1].clone();
                    for (jp, u) in d.iter() {
                        if dag.kind(p) == TaskType::Sensor {
                            terms.entry((p, jp)).or_default().push(u);
                            continue;
                        }
                        for (key, up) in self.prov_of(p, jp) {
                            let Prov::Var(uv) = up else {
                                terms.entry(key).or_default().push(u);
                                continue;
                            };
                            let w = self.lp.add_var(
                                format!("w_{}_{j}_{}_{}", dag.id(i), dag.id(key.0), key.1),
                                VarKind::Continuous,
                                0.0,
                                1.0,
                            );
                            self.lp.add(Group::Provenance, vec![(w, 1.0), (u, -1.0)], Cmp::Le, 0.0);
                            self.lp.add(Group::Provenance, vec![(w, 1.0), (uv, -1.0)], Cmp::Le, 0.0);
                            self.lp.add(Group::Provenance, vec![(w, 1.0), (u, -1.0), (uv, -1.0)], Cmp::Ge, -1.0);
                            terms.entry(key).or_default().push(w);
                        }
                    }
                }
                let mut list = Vec::new();
                for (key, ts) in terms {
                    if ts.len() == 1 && self.lp.vars[ts[0]].kind == VarKind::Binary {
                        list.push((key, Prov::Var(ts[0])));
                        continue;
                    }
                    let uvar = self.lp.add_var(
                        format!("U_{}_{j}_{}_{}", dag.id(i), dag.id(key.0), key.1),
                        VarKind::Continuous,
                        0.0,
                        1.0,
                    );
                    let mut sum = vec![(uvar, 1.0)];
                    sum.extend(ts.iter().map(|&t| (t, -1.0)));
                    self.lp.add(Group::Provenance, sum, Cmp::Le, 0.0);
                    // any active path makes the sample active; an aggregate
                    // lower bound would leave fractional room under big-M
                    for &t in &ts {
                        self.lp.add(Group::Provenance, vec![(uvar, 1.0), (t, -1.0)], Cmp::Ge, 0.0);
                    }
                    list.push((key, Prov::Var(uvar)));
                }
                for s in dag.sensors().into_iter().filter(|&s| self.single[s][i]) {
                    let vars: Vec<(VarId, f64)> = list
                        .iter()
                        .filter(|(key, _)| key.0 == s)
                        .filter_map(|&(_, t)| if let Prov::Var(v) = t { Some((v, 1.0)) } else { None })
                        .collect();
                    if vars.len() > 1 {
                        self.lp.add(Group::Provenance, vars, Cmp::Eq, 1.0);
                    }
                }
                per_j.push(list);
            }
            self.ix.prov[i] = per_j;
        }
    }

    fn release(&self, sensor: usize, js: usize) -> f64 {
        self.table.release(sensor, js).unwrap() as f64
    }

    /// Release of the one sample of `s` behind `(task, j)` as a linear
    /// expression `terms + constant`, when exactly one path leads there.
    fn sample_release(&self, task: usize, j: usize, s: usize) -> Option<(Vec<(VarId, f64)>, f64)> {
        if !self.single[s][task] {
            return None;
        }
        let mut terms = Vec::new();
        for ((s2, js), t) in self.prov_of(task, j) {
            if s2 != s {
                continue;
            }
            match t {
                Prov::One => return None,
                Prov::Var(u) => terms.push((u, self.release(s, js))),
            }
        }
        (!terms.is_empty()).then_some((terms, 0.0))
    }

    /// Sensors with samples behind `(task, j)`.
    fn sources(&self, task: usize, j: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.prov_of(task, j).iter().map(|&((s, _), _)| s).collect();
        v.dedup();
        v
    }

    fn ots(&mut self, sink: usize, j: usize) -> VarId {
        if let Some(&v) = self.ix.ots.get(&(sink, j)) {
            return v;
        }
        let ub = self.table.delta() as f64;
        let v = self.lp.add_var(self.name("OTS", sink, j), VarKind::Continuous, 0.0, ub);
        for ((s, js), t) in self.prov_of(sink, j) {
            let r = self.release(s, js);
            match t {
                Prov::One => self.lp.add(Group::Metric, vec![(v, 1.0)], Cmp::Le, r),
                Prov::Var(u) => self.lp.add(Group::Metric, vec![(v, 1.0), (u, self.m)], Cmp::Le, r + self.m),
            }
        }
        for s in self.sources(sink, j) {
            if let Some((mut terms, c)) = self.sample_release(sink, j, s) {
                terms.iter_mut().for_each(|t| t.1 = -t.1);
                terms.push((v, 1.0));
                self.lp.add(Group::Metric, terms, Cmp::Le, c);
            }
        }
        self.ix.ots.insert((sink, j), v);
        v
    }

    fn nts(&mut self, sink: usize, j: usize) -> VarId {
        if let Some(&v) = self.ix.nts.get(&(sink, j)) {
            return v;
        }
        let ub = self.table.delta() as f64;
        let v = self.lp.add_var(self.name("NTS", sink, j), VarKind::Continuous, 0.0, ub);
        for ((s, js), t) in self.prov_of(sink, j) {
            let r = self.release(s, js);
            match t {
                Prov::One => self.lp.add(Group::Metric, vec![(v, 1.0)], Cmp::Ge, r),
                Prov::Var(u) => self.lp.add(Group::Metric, vec![(v, 1.0), (u, -self.m)], Cmp::Ge, r - self.m),
            }
        }
        for s in self.sources(sink, j) {
            if let Some((mut terms, c)) = self.sample_release(sink, j, s) {
                terms.iter_mut().for_each(|t| t.1 = -t.1);
                terms.push((v, 1.0));
                self.lp.add(Group::Metric, terms, Cmp::Ge, c);
            }
        }
        self.ix.nts.insert((sink, j), v);
        v
    }

    fn metric_constraints(&mut self, config: &MetricConfig, sinks: &[usize], pairs: &[(usize, usize)]) {
        let used = config.used_metrics();
        let m = self.m;
        for &mt in &used {
            let v = self.lp.add_var(String::from(mt.name()), VarKind::Continuous, 0.0, f64::INFINITY);
            self.ix.metric.insert(mt, v);
        }
        let var = |mt: Metric, ix: &ModelIndex| ix.metric.get(&mt).copied();
        for &k in sinks {
            for j in 1..=self.table.count(k) {
                if !self.table.in_eval_window(k, j) {
                    continue;
                }
                let f = self.ix.f[k][j - 1];
                if let (Some(mrt), true) = (var(Metric::Mrt, &self.ix), j >= 2) {
                    let o = self.ots(k, j - 1);
                    self.lp.add(Group::Metric, vec![(mrt, 1.0), (f, -1.0), (o, 1.0)], Cmp::Ge, 0.0);
                }
                if let Some(mtd) = var(Metric::Mtd, &self.ix) {
                    let o = self.ots(k, j);
                    let nn = self.nts(k, j);
                    self.lp.add(Group::Metric, vec![(mtd, 1.0), (nn, -1.0), (o, 1.0)], Cmp::Ge, 0.0);
                }
                if let Some(ms) = var(Metric::Ms, &self.ix) {
                    self.lp.add(Group::Metric, vec![(ms, 1.0), (f, -1.0)], Cmp::Ge, 0.0);
                }
                let prov = self.prov_of(k, j);
                if let Some(paoi) = var(Metric::Paoi, &self.ix) {
                    for &((s, js), t) in &prov {
                        if js < 2 {
                            continue;
                        }
                        let mut terms = vec![(paoi, 1.0), (self.ix.s[s][js - 1], -1.0), (self.ix.s[s][js - 2], 1.0)];
                        let mut rhs = 0.0;
                        if let Prov::Var(u) = t {
                            terms.push((u, -m));
                            rhs = -m;
                        }
                        self.lp.add(Group::Metric, terms, Cmp::Ge, rhs);
                    }
                }
                if let Some(wcrt) = var(Metric::Wcrt, &self.ix) {
                    for &((s, js), t) in &prov {
                        if !pairs.contains(&(s, k)) {
                            continue;
                        }
                        let r = self.release(s, js);
                        let mut terms = vec![(wcrt, 1.0), (f, -1.0)];
                        let mut rhs = -r;
                        if let Prov::Var(u) = t {
                            terms.push((u, -m));
                            rhs -= m;
                        }
                        self.lp.add(Group::Metric, terms, Cmp::Ge, rhs);
                    }
                    for &(s, _) in pairs.iter().filter(|p| p.1 == k) {
                        if let Some((mut terms, c)) = self.sample_release(k, j, s) {
                            terms.extend([(wcrt, 1.0), (f, -1.0)]);
                            self.lp.add(Group::Metric, terms, Cmp::Ge, -c);
                        }
                    }
                }
            }
        }
    }

    /// Every hyperperiod after the second repeats the second one verbatim.
    fn hp_copy_constraints(&mut self) {
        let dag = self.dag;
        let hp = self.table.hp() as f64;
        for i in 0..dag.len() {
            let c = self.table.steady(i);
            for p in 3..=self.table.k() as usize {
                let shift = (p - 2) * c;
                for j in self.table.steady_block(i) {
                    let j2 = j + shift;
                    let (s, s2) = (self.ix.s[i][j - 1], self.ix.s[i][j2 - 1]);
                    self.lp.add(Group::HpCopy, vec![(s2, 1.0), (s, -1.0)], Cmp::Eq, hp * (p - 2) as f64);
                    if self.cores >= 2 {
                        for core in 0..self.cores {
                            let (y, y2) = (self.ix.y[i][j - 1][core], self.ix.y[i][j2 - 1][core]);
                            self.lp.add(Group::HpCopy, vec![(y2, 1.0), (y, -1.0)], Cmp::Eq, 0.0);
                        }
                    }
                    if !dag.kind(i).is_fusion() {
                        continue;
                    }
                    for (k, &pred) in dag.preds(i).iter().enumerate() {
                        let ce = (p - 2) * self.table.steady(pred);
                        let src = self.ix.u[i][k][j - 1].clone();
                        let dst = self.ix.u[i][k][j2 - 1].clone();
                        for (jp, u) in src.iter() {
                            match dst.get(jp + ce) {
                                Some(u2) => self.lp.add(Group::HpCopy, vec![(u2, 1.0), (u, -1.0)], Cmp::Eq, 0.0),
                                None => self.lp.add(Group::Fix, vec![(u, 1.0)], Cmp::Eq, 0.0),
                            }
                        }
                        for (jp2, u2) in dst.iter() {
                            if jp2 < ce + 1 || src.get(jp2 - ce).is_none() {
                                self.lp.add(Group::Fix, vec![(u2, 1.0)], Cmp::Eq, 0.0);
                            }
                        }
                    }
                }
            }
        }
    }
}
