//! Exhaustive optimality oracle for tiny instances.
//!
//! Every discrete choice is enumerated: the producer instance read on every
//! fusion edge, which input carries a fusion's deadline, the core of every
//! free instance and the order of every pair of instances sharing a core.
//! Each choice is a difference constraint between start times, so partial
//! choices are pruned by a closure over the difference graph. At a leaf only
//! start times remain free; the metrics are minimised exactly as a small
//! integer program over those. The resulting schedule is then re-validated
//! and re-evaluated from scratch, and the best evaluation wins.
//!
//! Nothing here reads the MILP model.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use fusched_core::dag::{Dag, TaskType};
use fusched_core::eval::{MetricsReport, eval_metrics};
use fusched_core::expansion::InstanceTable;
use fusched_core::metrics::{Metric, MetricConfig, MetricError};
use fusched_core::schedule::{Job, Schedule, TaskJobs, validate};
use fusched_core::time::Time;
use microlp::{ComparisonOp, OptimizationDirection, Problem as Ip, Variable};

use crate::solve::SolveStatus;

const INF: Time = Time::MAX / 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BruteCaps {
    pub max_instances: usize,
    pub max_delta: Time,
}

impl Default for BruteCaps {
    fn default() -> Self {
        BruteCaps { max_instances: 10, max_delta: 60 }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BruteError {
    #[error("{got} instances exceed the cap of {cap}")]
    TooManyInstances { got: usize, cap: usize },
    #[error("window of {got} ticks exceeds the cap of {cap}")]
    WindowTooLong { got: Time, cap: Time },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("starting schedule is invalid: {0}")]
    BadStart(String),
    #[error("oracle inconsistency: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Debug)]
pub struct BruteOutcome {
    /// `Optimal` or `Infeasible`.
    pub status: SolveStatus,
    /// Per objective level, highest priority first.
    pub objective: Vec<f64>,
    pub schedule: Option<Schedule>,
    pub report: Option<MetricsReport>,
    /// Fully specified discrete choices that were timed.
    pub leaves: u64,
    pub wall_time: Duration,
}

/// Start time of an instance as a free node plus a fixed offset. Node 0 is
/// the constant zero; instances of later hyperperiods share the node of the
/// instance they copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct At {
    node: usize,
    off: Time,
}

/// Tightest known upper bounds `d[u][v] >= x_v - x_u`.
#[derive(Clone)]
struct Closure {
    n: usize,
    d: Vec<Time>,
}

impl Closure {
    fn new(n: usize) -> Self {
        let mut d = vec![INF; n * n];
        for v in 0..n {
            d[v * n + v] = 0;
        }
        Closure { n, d }
    }

    fn bound(&self, u: usize, v: usize) -> Time {
        self.d[u * self.n + v]
    }

    /// Adds `x_v - x_u <= w`; false when that closes a negative cycle.
    fn add(&mut self, u: usize, v: usize, w: Time) -> bool {
        if self.bound(u, v) <= w {
            return true;
        }
        if self.bound(v, u) < INF && self.bound(v, u) + w < 0 {
            return false;
        }
        let n = self.n;
        let into_u: Vec<Time> = (0..n).map(|a| self.d[a * n + u]).collect();
        let from_v: Vec<Time> = (0..n).map(|b| self.d[v * n + b]).collect();
        for a in 0..n {
            if into_u[a] >= INF {
                continue;
            }
            for b in 0..n {
                if from_v[b] >= INF {
                    continue;
                }
                let c = into_u[a] + w + from_v[b];
                if c < self.d[a * n + b] {
                    self.d[a * n + b] = c;
                }
            }
        }
        true
    }

    /// Upper bound of `s_a - s_b`.
    fn diff(&self, a: At, b: At) -> Time {
        let d = self.bound(b.node, a.node);
        if d >= INF { INF } else { d + a.off - b.off }
    }

    /// Adds `s_a - s_b <= c`.
    fn le(&mut self, a: At, b: At, c: Time) -> bool {
        self.add(b.node, a.node, c - a.off + b.off)
    }
}

/// An added constraint `s_a - s_b <= c`, kept for the leaf program.
type Row = (At, At, Time);

/// `metric >= s_pos - s_neg + c`, with `s_neg = 0` when absent.
type Term = (Metric, At, Option<At>, Time);

struct Search<'a> {
    dag: &'a Dag,
    table: &'a InstanceTable,
    config: &'a MetricConfig,
    levels: Vec<Vec<(Metric, f64)>>,
    sinks: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    at: Vec<Vec<At>>,
    nodes: usize,
    cores: usize,
    /// Fusion instances in decision order: steady and copy instances first,
    /// then warm-up instances latest first.
    fusions: Vec<(usize, usize)>,
    /// Position of each fusion instance in `fusions`.
    pos: Vec<Vec<usize>>,
    /// Number of leading `fusions` entries that can carry metric terms.
    boundary: usize,
    used: Vec<Vec<Vec<usize>>>,
    core: Vec<usize>,
    rows: Vec<Row>,
    /// Metric epigraph terms for the current read choice.
    terms: Vec<Term>,
    /// Disparity is fixed once the reads are.
    mtd: Time,
    best: Option<(Vec<f64>, Schedule, MetricsReport)>,
    /// Bound of the enclosing warm-up subtree; reaching it ends the subtree.
    goal: Option<Vec<f64>>,
    leaves: u64,
    error: Option<BruteError>,
}

/// Exact optimum of the configured objective over every valid schedule of
/// `dag` on the instance table `table`, at integer tick resolution.
pub fn brute_force_solve(
    dag: &Dag,
    table: &InstanceTable,
    config: &MetricConfig,
    caps: &BruteCaps,
) -> Result<BruteOutcome, BruteError> {
    brute_force_solve_from(dag, table, config, caps, None)
}

/// As [`brute_force_solve`], with `start` as the first incumbent. The start
/// is validated and evaluated like any other schedule and only prunes the
/// search, so the result is the same optimum; a better schedule replaces it.
pub fn brute_force_solve_from(
    dag: &Dag,
    table: &InstanceTable,
    config: &MetricConfig,
    caps: &BruteCaps,
    start: Option<&Schedule>,
) -> Result<BruteOutcome, BruteError> {
    let t0 = Instant::now();
    if table.total() > caps.max_instances {
        return Err(BruteError::TooManyInstances { got: table.total(), cap: caps.max_instances });
    }
    if table.delta() > caps.max_delta {
        return Err(BruteError::WindowTooLong { got: table.delta(), cap: caps.max_delta });
    }
    let dag = dag.adjust_branch_successors();
    let levels = config.levels()?;
    let sinks = config.eval_sinks(&dag);
    let pairs = config.wcrt_pairs(&dag)?;

    let mut at = Vec::with_capacity(dag.len());
    let mut nodes = 1;
    for i in 0..dag.len() {
        let c = table.steady(i);
        let mut v: Vec<At> = Vec::with_capacity(table.count(i));
        for j in 1..=table.count(i) {
            let p = table.phase(i, j);
            if p >= 3 {
                let orig = v[j - 1 - (p - 2) * c];
                v.push(At { node: orig.node, off: orig.off + table.hp() * (p - 2) as Time });
            } else {
                v.push(At { node: nodes, off: 0 });
                nodes += 1;
            }
        }
        at.push(v);
    }
    let mut fusions = Vec::new();
    for &i in dag.topo() {
        if dag.kind(i).is_fusion() {
            fusions.extend((1..=table.count(i)).filter(|&j| table.phase(i, j) >= 2).map(|j| (i, j)));
        }
    }
    let boundary = fusions.len();
    for &i in dag.topo() {
        if dag.kind(i).is_fusion() {
            fusions.extend((1..=table.count(i)).rev().filter(|&j| table.phase(i, j) < 2).map(|j| (i, j)));
        }
    }
    let mut pos: Vec<Vec<usize>> = (0..dag.len()).map(|i| vec![usize::MAX; table.count(i)]).collect();
    for (n, &(i, j)) in fusions.iter().enumerate() {
        pos[i][j - 1] = n;
    }
    let used = (0..dag.len())
        .map(|i| {
            let k = if dag.kind(i).is_fusion() { dag.preds(i).len() } else { 0 };
            vec![vec![0; k]; table.count(i)]
        })
        .collect();
    let mut s = Search {
        dag: &dag,
        table,
        config,
        levels,
        sinks,
        pairs,
        at,
        nodes,
        cores: dag.cores().max(1) as usize,
        fusions,
        pos,
        boundary,
        used,
        core: vec![0; nodes],
        rows: Vec::new(),
        terms: Vec::new(),
        mtd: 0,
        best: None,
        goal: None,
        leaves: 0,
        error: None,
    };
    if let Some(sched) = start {
        let rep = validate(sched, &dag, table);
        if let Some(v) = rep.violations.first() {
            return Err(BruteError::BadStart(format!("{v:?}")));
        }
        let report = eval_metrics(sched, &dag, table, config)?;
        s.best = Some((report.objective.clone(), sched.clone(), report));
    }
    let mut cl = Closure::new(nodes);
    if s.base(&mut cl) {
        s.fusion_step(0, &cl);
    }
    if let Some(e) = s.error {
        return Err(e);
    }
    let wall_time = t0.elapsed();
    Ok(match s.best {
        Some((objective, schedule, report)) => BruteOutcome {
            status: SolveStatus::Optimal,
            objective,
            schedule: Some(schedule),
            report: Some(report),
            leaves: s.leaves,
            wall_time,
        },
        None => BruteOutcome {
            status: SolveStatus::Infeasible,
            objective: Vec::new(),
            schedule: None,
            report: None,
            leaves: s.leaves,
            wall_time,
        },
    })
}

const ZERO: At = At { node: 0, off: 0 };

/// Combines repeated variables; microlp rejects duplicate row entries.
fn merge(mut e: Vec<(Variable, f64)>) -> Vec<(Variable, f64)> {
    e.sort_by_key(|t| t.0.idx());
    e.dedup_by(|b, a| {
        let same = a.0 == b.0;
        if same {
            a.1 += b.1;
        }
        same
    });
    e.retain(|t| t.1 != 0.0);
    e
}

fn node_pair(a: At, b: At) -> (usize, usize) {
    (a.node.min(b.node), a.node.max(b.node))
}

/// Read rule between consecutive instances of one fusion task.
fn step_ok(kind: TaskType, prev: &[usize], next: &[usize]) -> bool {
    let mut inc = 0;
    for (&a, &b) in prev.iter().zip(next) {
        if b < a || (kind == TaskType::WFusion && a == b) {
            return false;
        }
        inc += b - a;
    }
    kind != TaskType::IFusion || inc >= 1
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < &(y - 1e-9) {
            return true;
        }
        if x > &(y + 1e-9) {
            return false;
        }
    }
    false
}

impl Search<'_> {
    fn push(&mut self, cl: &mut Closure, a: At, b: At, c: Time) -> bool {
        self.rows.push((a, b, c));
        cl.le(a, b, c)
    }

    /// Releases, deadlines, instance order and subscription precedence.
    fn base(&mut self, cl: &mut Closure) -> bool {
        let dag = self.dag;
        for i in 0..dag.len() {
            let (e, d) = (dag.wcet(i), dag.deadline(i));
            for j in 1..=self.table.count(i) {
                let a = self.at[i][j - 1];
                let mut ok = true;
                if let Some(rel) = self.table.release(i, j) {
                    ok &= self.push(cl, ZERO, a, -rel);
                    ok &= self.push(cl, a, ZERO, rel + d - e);
                }
                if j > 1 {
                    ok &= self.push(cl, self.at[i][j - 2], a, -e);
                }
                if dag.kind(i) == TaskType::Subscription {
                    let p = dag.preds(i)[0];
                    let b = self.at[p][j - 1];
                    ok &= self.push(cl, b, a, -dag.wcet(p));
                    ok &= self.push(cl, a, b, d + dag.wcet(p) - e);
                }
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// Read rules of one fusion instance against the previous one. The
    /// count-based bounds follow from the instance counts: a wait-for-all
    /// fusion reads strictly increasing indices ending no later than the
    /// producer's last instance, and an immediate fusion has exactly as many
    /// instances as input arrivals after the first full set, so every step
    /// advances exactly one edge by one.
    fn reads_ok(&self, i: usize, j: usize, tuple: &[usize], idx: usize) -> bool {
        let dag = self.dag;
        let ni = self.table.count(i);
        for (k, &p) in dag.preds(i).iter().enumerate() {
            let np = self.table.count(p);
            if tuple[k] < 1 || tuple[k] > np {
                return false;
            }
            if dag.kind(i) == TaskType::WFusion && (tuple[k] < j || tuple[k] + (ni - j) > np) {
                return false;
            }
        }
        let total: usize = tuple.iter().sum();
        if dag.kind(i) == TaskType::IFusion && total != dag.preds(i).len() + j - 1 {
            return false;
        }
        // a decided steady instance fixes the reads of its copy one
        // hyperperiod later, which must stay reachable from here
        let c = self.table.steady(i);
        if self.table.phase(i, j) <= 2 {
            for j1 in self.table.steady_block(i).filter(|&j1| j1 < j && j1 + c <= ni && self.pos[i][j1 - 1] < idx) {
                for (k, &q) in dag.preds(i).iter().enumerate() {
                    let target = self.used[i][j1 - 1][k] + self.table.steady(q);
                    let gap = if dag.kind(i) == TaskType::WFusion { j1 + c - j } else { 0 };
                    if tuple[k] + gap > target {
                        return false;
                    }
                }
            }
        }
        let kind = dag.kind(i);
        if j > 1 && self.pos[i][j - 2] < idx && !step_ok(kind, &self.used[i][j - 2], tuple) {
            return false;
        }
        if j < ni && self.pos[i][j] < idx && !step_ok(kind, tuple, &self.used[i][j]) {
            return false;
        }
        true
    }

    fn candidates(&self, i: usize, j: usize, idx: usize) -> Vec<Vec<usize>> {
        let dag = self.dag;
        let p = self.table.phase(i, j);
        if p >= 3 {
            let orig = j - (p - 2) * self.table.steady(i);
            let t: Vec<usize> = dag
                .preds(i)
                .iter()
                .enumerate()
                .map(|(k, &q)| self.used[i][orig - 1][k] + (p - 2) * self.table.steady(q))
                .collect();
            return if self.reads_ok(i, j, &t, idx) { vec![t] } else { Vec::new() };
        }
        let ranges: Vec<(usize, usize)> = dag.preds(i).iter().map(|&q| (1, self.table.count(q))).collect();
        let mut out = Vec::new();
        let mut t: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            if self.reads_ok(i, j, &t, idx) {
                out.push(t.clone());
            }
            let mut k = 0;
            loop {
                if k == t.len() {
                    return out;
                }
                if t[k] < ranges[k].1 {
                    t[k] += 1;
                    break;
                }
                t[k] = ranges[k].0;
                k += 1;
            }
        }
    }

    fn fusion_step(&mut self, idx: usize, cl: &Closure) {
        if self.error.is_some() {
            return;
        }
        if idx == self.fusions.len() {
            (self.terms, self.mtd) = self.metric_terms(idx);
            if !self.dominated(cl, &self.terms, self.mtd) {
                self.branch(cl, &mut Vec::new());
            }
            return;
        }
        if idx == self.boundary && idx > 0 {
            // warm-up reads carry no metric terms: bound the whole subtree
            // once and stop as soon as a completion attains the bound
            (self.terms, self.mtd) = self.metric_terms(idx);
            if self.dominated(cl, &self.terms, self.mtd) {
                return;
            }
            let value = match self.time_program(cl) {
                Ok(Some((v, _))) => v,
                Ok(None) => return,
                Err(e) => {
                    self.error = Some(e);
                    return;
                }
            };
            if self.best.as_ref().is_some_and(|b| !lex_less(&value, &b.0)) {
                return;
            }
            let outer = self.goal.replace(value);
            self.choose(idx, cl);
            self.goal = outer;
            return;
        }
        if self.best.is_some() {
            let (terms, mtd) = self.metric_terms(idx);
            if self.dominated(cl, &terms, mtd) {
                return;
            }
        }
        self.choose(idx, cl);
    }

    fn goal_met(&self) -> bool {
        match (&self.goal, &self.best) {
            (Some(g), Some(b)) => !lex_less(g, &b.0),
            _ => false,
        }
    }

    fn choose(&mut self, idx: usize, cl: &Closure) {
        let (i, j) = self.fusions[idx];
        let dag = self.dag;
        let a = self.at[i][j - 1];
        let (e, d) = (dag.wcet(i), dag.deadline(i));
        let mut cands = self.candidates(i, j, idx);
        // chronological reads first, for an early incumbent
        let est = |q: usize, u: usize| -cl.diff(ZERO, self.at[q][u - 1]);
        cands.sort_by_cached_key(|t| {
            let e: Vec<Time> = dag.preds(i).iter().zip(t).map(|(&q, &u)| est(q, u)).collect();
            (e.iter().copied().max(), e.iter().sum::<Time>())
        });
        for t in cands {
            if self.error.is_some() || self.goal_met() {
                return;
            }
            let mark = self.rows.len();
            let mut c2 = cl.clone();
            let mut ok = true;
            let mut inputs = Vec::new();
            for (k, &q) in dag.preds(i).iter().enumerate() {
                let b = self.at[q][t[k] - 1];
                ok &= self.push(&mut c2, b, a, -dag.wcet(q));
                inputs.push((b, dag.wcet(q)));
            }
            if ok {
                self.used[i][j - 1] = t;
                if dag.kind(i) == TaskType::TFusion {
                    self.fusion_step(idx + 1, &c2);
                } else {
                    // finish within the deadline of the latest input read
                    let implied = inputs.iter().any(|&(b, eq)| c2.diff(a, b) <= d + eq - e);
                    if implied {
                        self.fusion_step(idx + 1, &c2);
                    } else {
                        for &(b, eq) in &inputs {
                            if self.goal_met() {
                                break;
                            }
                            let m2 = self.rows.len();
                            let mut c3 = c2.clone();
                            if self.push(&mut c3, a, b, d + eq - e) {
                                self.fusion_step(idx + 1, &c3);
                            }
                            self.rows.truncate(m2);
                        }
                    }
                }
            }
            self.rows.truncate(mark);
        }
    }

    /// Branch and bound over the remaining disjunctions. The timing program
    /// without them bounds the subtree from below; when its optimum has no
    /// same-core overlap it is the subtree optimum. Otherwise one overlapping
    /// pair is split into: first before second, second before first, or
    /// (with several cores) on different cores.
    fn branch(&mut self, cl: &Closure, apart: &mut Vec<(usize, usize)>) {
        if self.error.is_some() || self.goal_met() {
            return;
        }
        if self.dominated(cl, &self.terms, self.mtd) {
            return;
        }
        self.leaves += 1;
        let (value, x) = match self.time_program(cl) {
            Ok(Some(r)) => r,
            Ok(None) => return,
            Err(e) => {
                self.error = Some(e);
                return;
            }
        };
        if self.best.as_ref().is_some_and(|b| !lex_less(&value, &b.0)) {
            return;
        }
        let overlaps = self.overlaps(&x);
        let pick = if self.cores == 1 {
            overlaps.first().copied()
        } else {
            match self.colouring(&overlaps, apart) {
                Some(core) => {
                    self.accept(&value, &x, core);
                    return;
                }
                None => overlaps.iter().copied().find(|&(a, _, b, _)| !apart.contains(&node_pair(a, b))),
            }
        };
        let Some((a, ea, b, eb)) = pick else {
            if self.cores == 1 {
                self.accept(&value, &x, vec![0; self.nodes]);
            }
            return;
        };
        for (p, q, ep) in [(a, b, ea), (b, a, eb)] {
            let mark = self.rows.len();
            let mut c2 = cl.clone();
            if self.push(&mut c2, p, q, -ep) {
                self.branch(&c2, apart);
            }
            self.rows.truncate(mark);
        }
        if self.cores > 1 && a.node != b.node {
            apart.push(node_pair(a, b));
            self.branch(cl, apart);
            apart.pop();
        }
    }

    /// Instance pairs running at the same time under `x`, earliest first.
    fn overlaps(&self, x: &[Time]) -> Vec<(At, Time, At, Time)> {
        let mut flat: Vec<(Time, At, Time)> = (0..self.dag.len())
            .flat_map(|i| self.at[i].iter().map(move |&a| (a, self.dag.wcet(i))))
            .map(|(a, e)| (x[a.node] + a.off, a, e))
            .collect();
        flat.sort_by_key(|t| t.0);
        let mut out = Vec::new();
        for (k, &(sa, a, ea)) in flat.iter().enumerate() {
            for &(sb, b, eb) in &flat[k + 1..] {
                if sb >= sa + ea {
                    break;
                }
                if ea > 0 && eb > 0 {
                    out.push((a, ea, b, eb));
                }
            }
        }
        out
    }

    /// Cores for every free node such that overlapping instances and the
    /// `apart` pairs sit on different cores, or `None`.
    fn colouring(&self, overlaps: &[(At, Time, At, Time)], apart: &[(usize, usize)]) -> Option<Vec<usize>> {
        let n = self.nodes;
        let mut adj = vec![vec![false; n]; n];
        for &(a, _, b, _) in overlaps {
            if a.node == b.node {
                return None;
            }
            adj[a.node][b.node] = true;
            adj[b.node][a.node] = true;
        }
        for &(u, v) in apart {
            adj[u][v] = true;
            adj[v][u] = true;
        }
        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(adj[v].iter().filter(|&&e| e).count()));
        let mut core = vec![usize::MAX; n];
        core[0] = 0;
        fn go(k: usize, order: &[usize], adj: &[Vec<bool>], core: &mut [usize], cores: usize, opened: usize) -> bool {
            let Some(&v) = order.get(k) else { return true };
            for c in 0..(opened + 1).min(cores) {
                if order[..k].iter().all(|&w| !(adj[v][w] && core[w] == c)) {
                    core[v] = c;
                    if go(k + 1, order, adj, core, cores, opened.max(c + 1)) {
                        return true;
                    }
                }
            }
            core[v] = usize::MAX;
            false
        }
        go(0, &order, &adj, &mut core, self.cores, 0).then_some(core)
    }

    /// Records a fully feasible timing after checking it from scratch.
    fn accept(&mut self, value: &[f64], x: &[Time], core: Vec<usize>) {
        self.core = core;
        let skeleton = self.schedule_with(x);
        let rep = validate(&skeleton, self.dag, self.table);
        if !rep.is_valid() {
            let msg = format!("timed schedule breaks {:?}", rep.violations[0]);
            self.error = Some(BruteError::Inconsistent(msg));
            return;
        }
        let report = match eval_metrics(&skeleton, self.dag, self.table, self.config) {
            Ok(r) => r,
            Err(e) => {
                self.error = Some(e.into());
                return;
            }
        };
        for (l, (&a, &b)) in report.objective.iter().zip(value).enumerate() {
            if (a - b).abs() > 1e-6 * b.abs().max(1.0) {
                self.error = Some(BruteError::Inconsistent(format!("level {l}: evaluated {a}, timed {b}")));
                return;
            }
        }
        self.best = Some((report.objective.clone(), skeleton, report));
    }

    /// True when no completion of the current choices can beat the incumbent
    /// on the first objective level.
    fn dominated(&self, cl: &Closure, terms: &[Term], mtd: Time) -> bool {
        let Some((best, ..)) = &self.best else { return false };
        let level = &self.levels[0];
        if level.iter().any(|t| t.1 < 0.0) {
            return false;
        }
        let mut lb = 0.0;
        for &(m, w) in level {
            let v = if m == Metric::Mtd {
                mtd
            } else {
                terms
                    .iter()
                    .filter(|t| t.0 == m)
                    .map(|&(_, pos, neg, c)| {
                        let d = cl.diff(neg.unwrap_or(ZERO), pos);
                        if d >= INF { Time::MIN } else { c - d }
                    })
                    .fold(0, Time::max)
            };
            lb += w * v as f64;
        }
        // with one level a tie cannot improve the incumbent
        let tol = 1e-6 * best[0].abs().max(1.0);
        if self.levels.len() == 1 { lb > best[0] - tol } else { lb > best[0] + tol }
    }

    /// Epigraph terms and the disparity, which depend on the reads only.
    /// Only sink instances whose reads are among the first `decided`
    /// fusion choices contribute.
    fn metric_terms(&self, decided: usize) -> (Vec<Term>, Time) {
        let dag = self.dag;
        let prov = self.provenance(decided);
        let release = |s: usize, js: usize| self.table.release(s, js).unwrap();

        // metric terms: (metric, instance whose start counts positively,
        // optional instance subtracted, constant)
        let mut terms: Vec<Term> = Vec::new();
        let mut mtd: Time = 0;
        let ots = |k: usize, j: usize| {
            prov[k][j - 1].as_ref().map(|p| p.iter().map(|&(s, js)| release(s, js)).min().unwrap_or(0))
        };
        for &k in &self.sinks {
            let ek = dag.wcet(k);
            for j in (1..=self.table.count(k)).filter(|&j| self.table.in_eval_window(k, j)) {
                let a = self.at[k][j - 1];
                let Some(pj) = &prov[k][j - 1] else { continue };
                let nts = pj.iter().map(|&(s, js)| release(s, js)).max().unwrap_or(0);
                if j >= 2
                    && let Some(o) = ots(k, j - 1)
                {
                    terms.push((Metric::Mrt, a, None, ek - o));
                }
                mtd = mtd.max(nts - ots(k, j).unwrap_or(0));
                terms.push((Metric::Ms, a, None, ek));
                for &(s, js) in pj {
                    if js >= 2 {
                        terms.push((Metric::Paoi, self.at[s][js - 1], Some(self.at[s][js - 2]), 0));
                    }
                }
            }
        }
        for &(s, k) in &self.pairs {
            let ek = dag.wcet(k);
            for j in (1..=self.table.count(k)).filter(|&j| self.table.in_eval_window(k, j)) {
                for &(s2, js) in prov[k][j - 1].iter().flatten() {
                    if s2 == s {
                        terms.push((Metric::Wcrt, self.at[k][j - 1], None, ek - release(s, js)));
                    }
                }
            }
        }

        (terms, mtd)
    }

    /// Sensor instances behind every instance, `None` where a read among
    /// fusion choices `decided..` is still open.
    fn provenance(&self, decided: usize) -> Vec<Vec<Option<BTreeSet<(usize, usize)>>>> {
        let dag = self.dag;
        let open: BTreeSet<(usize, usize)> = self.fusions[decided..].iter().copied().collect();
        let mut prov: Vec<Vec<Option<BTreeSet<(usize, usize)>>>> = vec![Vec::new(); dag.len()];
        for &i in dag.topo() {
            prov[i] = (1..=self.table.count(i))
                .map(|j| match dag.kind(i) {
                    TaskType::Sensor => Some(BTreeSet::from([(i, j)])),
                    TaskType::Subscription => prov[dag.preds(i)[0]][j - 1].clone(),
                    _ if open.contains(&(i, j)) => None,
                    _ => {
                        let mut set = BTreeSet::new();
                        for (k, &q) in dag.preds(i).iter().enumerate() {
                            set.extend(prov[q][self.used[i][j - 1][k] - 1].as_ref()?.iter().copied());
                        }
                        Some(set)
                    }
                })
                .collect();
        }
        prov
    }

    /// Lexicographically optimal start times under the rows chosen so far.
    fn time_program(&self, cl: &Closure) -> Result<Option<(Vec<f64>, Vec<Time>)>, BruteError> {
        let (terms, mtd) = (&self.terms, self.mtd);
        let mut fixed: Vec<f64> = Vec::new();
        let mut x: Vec<Time> = Vec::new();
        for lvl in 0..self.levels.len() {
            let mut ip = Ip::new(OptimizationDirection::Minimize);
            let mut node_var: Vec<Option<Variable>> = vec![None];
            for v in 1..self.nodes {
                // open warm-up reads can leave a node unconstrained
                let lo = (-cl.bound(v, 0)).max(0);
                let hi = cl.bound(0, v);
                node_var.push(Some(if hi >= INF {
                    ip.add_var(0.0, (lo as f64, f64::INFINITY))
                } else {
                    ip.add_integer_var(0.0, (lo as i32, hi as i32))
                }));
            }
            let weight = |m: Metric| self.levels[lvl].iter().filter(|t| t.0 == m).map(|t| t.1).sum::<f64>();
            let mvar: Vec<(Metric, Variable)> = [Metric::Mrt, Metric::Paoi, Metric::Wcrt, Metric::Ms]
                .into_iter()
                .map(|m| (m, ip.add_var(weight(m), (0.0, f64::INFINITY))))
                .collect();
            let mv = |m: Metric| mvar.iter().find(|t| t.0 == m).unwrap().1;
            // s_a - s_b <= c, with the zero node folded into the constant
            let expr = |pos: At, neg: Option<At>, c: Time| {
                let mut e: Vec<(Variable, f64)> = Vec::new();
                let mut rhs = c as f64 - pos.off as f64;
                if let Some(v) = node_var[pos.node] {
                    e.push((v, 1.0));
                }
                if let Some(n) = neg {
                    rhs += n.off as f64;
                    if let Some(v) = node_var[n.node] {
                        e.push((v, -1.0));
                    }
                }
                (merge(e), rhs)
            };
            for &(a, b, c) in &self.rows {
                let (e, rhs) = expr(a, Some(b), c);
                if e.is_empty() {
                    continue;
                }
                ip.add_constraint(e, ComparisonOp::Le, rhs);
            }
            // metric >= s_pos - s_neg + c
            for &(m, pos, neg, c) in terms {
                let (mut e, rhs) = expr(pos, neg, 0);
                e.push((mv(m), -1.0));
                ip.add_constraint(e, ComparisonOp::Le, rhs - c as f64);
            }
            for (l, &val) in fixed.iter().enumerate() {
                let mut e: Vec<(Variable, f64)> = Vec::new();
                let mut konst = 0.0;
                for &(m, w) in &self.levels[l] {
                    if m == Metric::Mtd {
                        konst += w * mtd as f64;
                    } else {
                        e.push((mv(m), w));
                    }
                }
                if !e.is_empty() {
                    ip.add_constraint(e, ComparisonOp::Le, val - konst + 1e-6 * val.abs().max(1.0));
                }
            }
            let sol = match ip.solve() {
                Ok(o) => match o.into_solution() {
                    Ok(s) => s,
                    Err(_) => return Err(BruteError::Inconsistent("leaf program interrupted".into())),
                },
                Err(microlp::Error::Infeasible) => return Ok(None),
                Err(e) => return Err(BruteError::Inconsistent(format!("leaf program: {e}"))),
            };
            let konst: f64 = self.levels[lvl].iter().filter(|t| t.0 == Metric::Mtd).map(|t| t.1 * mtd as f64).sum();
            fixed.push(sol.objective() + konst);
            x = (0..self.nodes).map(|v| node_var[v].map_or(0, |var| sol.var_value(var).round() as Time)).collect();
        }
        Ok(Some((fixed, x)))
    }

    fn schedule_with(&self, x: &[Time]) -> Schedule {
        let dag = self.dag;
        let tasks = (0..dag.len())
            .map(|i| TaskJobs {
                id: dag.id(i).into(),
                jobs: (1..=self.table.count(i))
                    .map(|j| {
                        let a = self.at[i][j - 1];
                        let start = x[a.node] + a.off;
                        Job {
                            start,
                            finish: start + dag.wcet(i),
                            core: self.core[a.node],
                            phase: self.table.phase(i, j),
                            used: self.used[i][j - 1].clone(),
                        }
                    })
                    .collect(),
            })
            .collect();
        Schedule { hp: self.table.hp(), delta: self.table.delta(), cores: self.cores, tasks }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusched_core::dag::{DagSpec, TaskSpec};
    use fusched_core::expansion::build_instance_table;

    #[test]
    fn closure_detects_cycles() {
        let mut c = Closure::new(3);
        assert!(c.add(0, 1, 5));
        assert!(c.add(1, 2, 3));
        assert_eq!(c.bound(0, 2), 8);
        assert!(!c.add(2, 0, -9));
        assert!(c.add(2, 0, -8));
    }

    #[test]
    fn single_sensor_starts_at_release() {
        let dag = DagSpec::new(1, vec![TaskSpec::new("s", 3, 10, TaskType::Sensor, &[])]).validate().unwrap();
        let table = build_instance_table(&dag, 3).unwrap();
        let config = MetricConfig::blended(&[Metric::Ms]);
        let out = brute_force_solve(&dag, &table, &config, &BruteCaps::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let s = out.schedule.unwrap();
        // only the evaluation window counts: instance 3 finishes at 23
        assert_eq!(out.objective, vec![23.0]);
        assert_eq!(s.job(0, 1).start, 0);
    }

    #[test]
    fn caps_are_enforced() {
        let dag = DagSpec::new(1, vec![TaskSpec::new("s", 1, 2, TaskType::Sensor, &[])]).validate().unwrap();
        let table = build_instance_table(&dag, 11).unwrap();
        let err = brute_force_solve(&dag, &table, &MetricConfig::default(), &BruteCaps::default()).unwrap_err();
        assert_eq!(err, BruteError::TooManyInstances { got: 11, cap: 10 });
        let caps = BruteCaps { max_instances: 20, max_delta: 20 };
        let err = brute_force_solve(&dag, &table, &MetricConfig::default(), &caps).unwrap_err();
        assert_eq!(err, BruteError::WindowTooLong { got: 22, cap: 20 });
    }
}
