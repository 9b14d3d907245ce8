//! MILP engines behind one small trait.

use std::collections::BTreeMap;
use std::num::NonZeroU32;
use std::path::PathBuf;
use std::time::Duration;

use fusched_core::lp::{Cmp, LinearModel, VarId, VarKind};

/// Environment variable naming the backend (`highs` or `microlp`).
pub const BACKEND_ENV: &str = "FUSCHED_BACKEND";

#[derive(Clone, Debug, PartialEq)]
pub struct Limits {
    /// Wall-clock budget for one whole solve (all objective levels).
    pub time_limit: Option<Duration>,
    /// Relative MIP gap at which the engine may stop.
    pub gap: f64,
    /// Single thread and a fixed seed.
    pub deterministic: bool,
    /// Engine log destination.
    pub log_file: Option<PathBuf>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { time_limit: None, gap: 0.0, deterministic: true, log_file: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawStatus {
    Optimal,
    TimeLimit,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSolution {
    pub status: RawStatus,
    /// Present for `Optimal`, and for `TimeLimit` when an incumbent exists.
    pub x: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("unknown backend `{0}` (expected `highs` or `microlp`)")]
    Unknown(String),
    #[error("{backend}: {detail}")]
    Failed { backend: &'static str, detail: String },
}

pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Minimises `objective` over `lp`, optionally starting from `warm`.
    fn solve(
        &self,
        lp: &LinearModel,
        objective: &[(VarId, f64)],
        warm: Option<&[f64]>,
        limits: &Limits,
    ) -> Result<RawSolution, BackendError>;
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn MilpBackend>, BackendError> {
    match name.to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(Highs)),
        "microlp" => Ok(Box::new(Microlp)),
        other => Err(BackendError::Unknown(other.into())),
    }
}

/// The backend named by [`BACKEND_ENV`], HiGHS when unset.
pub fn backend_from_env() -> Result<Box<dyn MilpBackend>, BackendError> {
    backend_by_name(&std::env::var(BACKEND_ENV).unwrap_or_else(|_| "highs".into()))
}

fn costs(n: usize, objective: &[(VarId, f64)]) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for &(v, w) in objective {
        c[v] += w;
    }
    c
}

/// Row terms with repeated variables merged.
fn merged(terms: &[(VarId, f64)]) -> Vec<(VarId, f64)> {
    let mut m: BTreeMap<VarId, f64> = BTreeMap::new();
    for &(v, c) in terms {
        *m.entry(v).or_default() += c;
    }
    m.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

pub struct Highs;

impl MilpBackend for Highs {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(
        &self,
        lp: &LinearModel,
        objective: &[(VarId, f64)],
        warm: Option<&[f64]>,
        limits: &Limits,
    ) -> Result<RawSolution, BackendError> {
        let fail = |detail: String| BackendError::Failed { backend: "highs", detail };
        let mut pb = highs::RowProblem::default();
        let cost = costs(lp.vars.len(), objective);
        let cols: Vec<highs::Col> = lp
            .vars
            .iter()
            .zip(&cost)
            .map(|(v, &c)| pb.add_column_with_integrality(c, v.lb..=v.ub, v.kind != VarKind::Continuous))
            .collect();
        for r in &lp.rows {
            let t: Vec<(highs::Col, f64)> = merged(&r.terms).into_iter().map(|(v, c)| (cols[v], c)).collect();
            match r.cmp {
                Cmp::Le => pb.add_row(..=r.rhs, t),
                Cmp::Ge => pb.add_row(r.rhs.., t),
                Cmp::Eq => pb.add_row(r.rhs..=r.rhs, t),
            }
        }
        let mut model = pb.try_optimise(highs::Sense::Minimise).map_err(|e| fail(format!("{e:?}")))?;
        model.set_option("mip_rel_gap", limits.gap);
        if let Some(t) = limits.time_limit {
            model.set_option("time_limit", t.as_secs_f64().max(1e-3));
        }
        if limits.deterministic {
            model.set_threads(NonZeroU32::MIN);
            model.set_option("random_seed", 0);
        }
        if let Some(path) = &limits.log_file {
            model.set_option("output_flag", true);
            model.set_option("log_to_console", false);
            model.set_option("log_file", path.to_string_lossy().as_ref());
        }
        if let Some(x) = warm {
            model.try_set_solution(Some(x), None, None, None).map_err(|e| fail(format!("warm start: {e:?}")))?;
        }
        let solved = model.try_solve().map_err(|e| fail(format!("{e:?}")))?;
        use highs::HighsModelStatus as S;
        let has_x = solved.primal_solution_status() == highs::HighsSolutionStatus::Feasible;
        let x = || Some(solved.get_solution().columns().to_vec());
        match solved.status() {
            S::Optimal => Ok(RawSolution { status: RawStatus::Optimal, x: x() }),
            S::ModelEmpty => Ok(RawSolution { status: RawStatus::Optimal, x: Some(Vec::new()) }),
            S::Infeasible | S::UnboundedOrInfeasible => Ok(RawSolution { status: RawStatus::Infeasible, x: None }),
            S::ReachedTimeLimit | S::ReachedIterationLimit | S::ReachedSolutionLimit => {
                Ok(RawSolution { status: RawStatus::TimeLimit, x: if has_x { x() } else { None } })
            }
            other => Err(fail(format!("model status {other:?}"))),
        }
    }
}

/// Pure-Rust branch and bound; slow, but needs no native library.
pub struct Microlp;

impl MilpBackend for Microlp {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve(
        &self,
        lp: &LinearModel,
        objective: &[(VarId, f64)],
        warm: Option<&[f64]>,
        limits: &Limits,
    ) -> Result<RawSolution, BackendError> {
        use microlp::{ComparisonOp, OptimizationDirection, SolutionStatus};
        let fail = |detail: String| BackendError::Failed { backend: "microlp", detail };
        let mut pb = microlp::Problem::new(OptimizationDirection::Minimize);
        let cost = costs(lp.vars.len(), objective);
        let vars: Vec<microlp::Variable> = lp
            .vars
            .iter()
            .zip(&cost)
            .map(|(v, &c)| match v.kind {
                VarKind::Continuous => pb.add_var(c, (v.lb, v.ub)),
                VarKind::Binary => pb.add_binary_var(c),
                VarKind::Integer => pb.add_integer_var(c, (v.lb as i32, v.ub.min(i32::MAX as f64) as i32)),
            })
            .collect();
        for r in &lp.rows {
            let t: Vec<(microlp::Variable, f64)> = merged(&r.terms).into_iter().map(|(v, c)| (vars[v], c)).collect();
            let op = match r.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            pb.add_constraint(t, op, r.rhs);
        }
        let mut opts = microlp::SolveOptions::default();
        opts.time_limit = limits.time_limit;
        opts.mip_gap = limits.gap;
        opts.warm_start = warm.map(|x| vars.iter().copied().zip(x.iter().copied()).collect());
        match pb.solve_with(opts) {
            Ok(out) => {
                let optimal = out.is_optimal();
                match out.solution() {
                    Some(sol) => {
                        let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
                        let status = if optimal || sol.status() == SolutionStatus::Optimal {
                            RawStatus::Optimal
                        } else {
                            RawStatus::TimeLimit
                        };
                        Ok(RawSolution { status, x: Some(x) })
                    }
                    None => Ok(RawSolution { status: RawStatus::TimeLimit, x: None }),
                }
            }
            Err(microlp::Error::Infeasible) => Ok(RawSolution { status: RawStatus::Infeasible, x: None }),
            Err(e) => Err(fail(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusched_core::lp::Group;

    /// min x + y with x + 2y >= 3, x integer in [0, 10], y binary.
    fn tiny() -> (LinearModel, Vec<(VarId, f64)>) {
        let mut m = LinearModel::default();
        let x = m.add_var("x".into(), VarKind::Integer, 0.0, 10.0);
        let y = m.binary("y".into());
        m.add(Group::Fix, vec![(x, 1.0), (y, 2.0)], Cmp::Ge, 3.0);
        (m, vec![(x, 1.0), (y, 1.0)])
    }

    #[test]
    fn both_backends_agree() {
        let (m, obj) = tiny();
        for b in [backend_by_name("highs").unwrap(), backend_by_name("microlp").unwrap()] {
            let r = b.solve(&m, &obj, None, &Limits::default()).unwrap();
            assert_eq!(r.status, RawStatus::Optimal, "{}", b.name());
            let x = r.x.unwrap();
            assert!((x[0] + x[1] - 2.0).abs() < 1e-9, "{}: {x:?}", b.name());
        }
    }

    #[test]
    fn infeasible_is_reported() {
        let (mut m, obj) = tiny();
        m.add(Group::Fix, vec![(0, 1.0)], Cmp::Le, -1.0);
        for b in [backend_by_name("highs").unwrap(), backend_by_name("microlp").unwrap()] {
            let r = b.solve(&m, &obj, None, &Limits::default()).unwrap();
            assert_eq!(r.status, RawStatus::Infeasible, "{}", b.name());
        }
    }

    #[test]
    fn unknown_backend() {
        assert!(matches!(backend_by_name("gurobi"), Err(BackendError::Unknown(_))));
    }
}
