//! Solver-neutral container for a mixed-integer linear program.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// Named constraint families. Every row of an [`crate::model::IlpModel`] is
/// tagged with one of these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Assignment,
    Finish,
    Overlap,
    Timer,
    Sequence,
    Subscription,
    FusionStart,
    UseOnce,
    Monotone,
    WfusOnce,
    IfusFresh,
    Deadline,
    Provenance,
    Metric,
    HpCopy,
    Pin,
    Workload,
    Fix,
}

impl Group {
    pub const ALL: [Group; 18] = [
        Group::Assignment,
        Group::Finish,
        Group::Overlap,
        Group::Timer,
        Group::Sequence,
        Group::Subscription,
        Group::FusionStart,
        Group::UseOnce,
        Group::Monotone,
        Group::WfusOnce,
        Group::IfusFresh,
        Group::Deadline,
        Group::Provenance,
        Group::Metric,
        Group::HpCopy,
        Group::Pin,
        Group::Workload,
        Group::Fix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Assignment => "assignment",
            Group::Finish => "finish",
            Group::Overlap => "overlap",
            Group::Timer => "timer",
            Group::Sequence => "sequence",
            Group::Subscription => "subscription",
            Group::FusionStart => "fusion-start",
            Group::UseOnce => "use-once",
            Group::Monotone => "monotone",
            Group::WfusOnce => "wfus-once",
            Group::IfusFresh => "ifus-fresh",
            Group::Deadline => "deadline",
            Group::Provenance => "provenance",
            Group::Metric => "metric",
            Group::HpCopy => "hp-copy",
            Group::Pin => "pin",
            Group::Workload => "workload",
            Group::Fix => "fix",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub group: Group,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum()
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        let l = self.lhs(x);
        match self.cmp {
            Cmp::Le => l <= self.rhs + tol,
            Cmp::Ge => l >= self.rhs - tol,
            Cmp::Eq => (l - self.rhs).abs() <= tol,
        }
    }
}

/// A broken row or bound found by [`LinearModel::check`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Bound { var: VarId, value: f64 },
    Integrality { var: VarId, value: f64 },
    Row { row: usize, group: Group, lhs: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

impl LinearModel {
    pub fn add_var(&mut self, name: String, kind: VarKind, lb: f64, ub: f64) -> VarId {
        self.vars.push(Variable { name, kind, lb, ub });
        self.vars.len() - 1
    }

    pub fn binary(&mut self, name: String) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add(&mut self, group: Group, terms: Vec<(VarId, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Constraint { group, terms, cmp, rhs });
    }

    pub fn count(&self, group: Group) -> usize {
        self.rows.iter().filter(|r| r.group == group).count()
    }

    /// Substitutes `x` into every bound and row.
    pub fn check(&self, x: &[f64], tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for (v, var) in self.vars.iter().enumerate() {
            let val = x[v];
            if val < var.lb - tol || val > var.ub + tol {
                out.push(Violation::Bound { var: v, value: val });
            }
            if var.kind != VarKind::Continuous && crate::time::integral(val, tol).is_none() {
                out.push(Violation::Integrality { var: v, value: val });
            }
        }
        for (k, r) in self.rows.iter().enumerate() {
            if !r.satisfied(x, tol) {
                out.push(Violation::Row { row: k, group: r.group, lhs: r.lhs(x) });
            }
        }
        out
    }

    /// CPLEX LP text. Variables are written as `x<k>`; the original names and
    /// the row groups travel as comments.
    pub fn to_lp(&self, objective: &[(VarId, f64)]) -> String {
        let mut s = String::new();
        s.push_str("\\ variables:\n");
        for (k, v) in self.vars.iter().enumerate() {
            let _ = writeln!(s, "\\   x{k} = {}", v.name);
        }
        s.push_str("Minimize\n obj:");
        write_terms(&mut s, objective);
        s.push_str("\nSubject To\n");
        let mut last = None;
        for (k, r) in self.rows.iter().enumerate() {
            if last != Some(r.group) {
                let _ = writeln!(s, "\\ group {}", r.group);
                last = Some(r.group);
            }
            let _ = write!(s, " r{k}:");
            write_terms(&mut s, &r.terms);
            let op = match r.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", r.rhs);
        }
        s.push_str("Bounds\n");
        for (k, v) in self.vars.iter().enumerate() {
            if v.kind != VarKind::Binary {
                let _ = writeln!(s, " {} <= x{k} <= {}", v.lb, v.ub);
            }
        }
        let ints: Vec<usize> = (0..self.vars.len()).filter(|&k| self.vars[k].kind == VarKind::Integer).collect();
        if !ints.is_empty() {
            s.push_str("General\n");
            for k in ints {
                let _ = writeln!(s, " x{k}");
            }
        }
        let bins: Vec<usize> = (0..self.vars.len()).filter(|&k| self.vars[k].kind == VarKind::Binary).collect();
        if !bins.is_empty() {
            s.push_str("Binary\n");
            for k in bins {
                let _ = writeln!(s, " x{k}");
            }
        }
        s.push_str("End\n");
        s
    }
}

fn write_terms(s: &mut String, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        s.push_str(" 0 x0");
    }
    for &(v, c) in terms {
        if c < 0.0 {
            let _ = write!(s, " - {} x{v}", -c);
        } else {
            let _ = write!(s, " + {c} x{v}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn check_reports_rows_bounds_and_integrality() {
        let mut m = LinearModel::default();
        let a = m.add_var("a".into(), VarKind::Continuous, 0.0, 10.0);
        let b = m.binary("b".into());
        m.add(Group::Fix, vec![(a, 1.0), (b, 1.0)], Cmp::Le, 5.0);
        assert!(m.check(&[4.0, 1.0], 1e-9).is_empty());
        let v = m.check(&[11.0, 0.5], 1e-9);
        assert!(v.iter().any(|x| matches!(x, Violation::Bound { var: 0, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::Integrality { var: 1, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::Row { row: 0, .. })));
    }

    #[test]
    fn lp_text_has_sections() {
        let mut m = LinearModel::default();
        let a = m.add_var("s_t1_1".into(), VarKind::Continuous, 0.0, 3.0);
        let b = m.binary("y".into());
        m.add(Group::Overlap, vec![(a, 1.0), (b, -2.0)], Cmp::Ge, -1.0);
        let lp = m.to_lp(&[(a, 1.0)]);
        for needle in ["Minimize", "Subject To", "\\ group overlap", "r0: + 1 x0 - 2 x1 >= -1", "Binary", "End"] {
            assert!(lp.contains(needle), "{needle} missing from\n{lp}");
        }
    }
}
