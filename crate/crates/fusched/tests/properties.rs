mod common;

use std::time::Duration;

use common::{TinyCase, tiny_case};
use fusched::backend::{Highs, Limits};
use fusched::brute::{BruteCaps, brute_force_solve};
use fusched::solve::{SolveStatus, Solved, solve_problem};
use fusched_core::dag::TaskType;
use fusched_core::eval::eval_metrics;
use fusched_core::model::{ModelOptions, Problem};
use fusched_core::replay::replay;
use fusched_core::schedule::validate;
use proptest::prelude::*;

fn limits(secs: u64) -> Limits {
    Limits { time_limit: Some(Duration::from_secs(secs)), ..Limits::default() }
}

fn problem(case: &TinyCase, opts: ModelOptions) -> Problem {
    let dag = case.spec.validate().unwrap();
    Problem::new(&dag, &opts).unwrap()
}

fn solved(pb: &Problem, secs: u64) -> Solved {
    let s = solve_problem(pb, &Highs, &limits(secs)).unwrap();
    assert_ne!(s.outcome.status, SolveStatus::Error, "{:?}", s.outcome.message);
    s
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6 * y.abs().max(1.0))
}

fn draw() -> impl Strategy<Value = TinyCase> {
    any::<u64>().prop_filter_map("over the oracle caps", |s| tiny_case(s, &BruteCaps::default()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn solved_schedules_check_out(case in draw()) {
        let pb = problem(&case, ModelOptions::default());
        let s = solved(&pb, 60);
        prop_assume!(s.outcome.status == SolveStatus::Optimal);
        let x = &s.outcome.assignment;
        let sched = s.schedule.as_ref().unwrap();

        let v = validate(sched, &pb.dag, &pb.table);
        prop_assert!(v.is_valid(), "{:?}", v.violations);

        // evaluated metrics equal the epigraph variables and the objective
        let rep = eval_metrics(sched, &pb.dag, &pb.table, &pb.config).unwrap();
        for (m, &var) in &pb.model.index.metric {
            prop_assert_eq!(x[var].round() as i64, rep.get(*m), "{}", m.name());
            prop_assert!((x[var] - x[var].round()).abs() < 1e-6);
        }
        prop_assert!(same(&rep.objective, &s.outcome.objective));

        for i in (0..pb.dag.len()).filter(|&i| pb.dag.kind(i).is_fusion()) {
            for e in 0..pb.dag.preds(i).len() {
                // one read per instance and edge
                for j in 1..=pb.table.count(i) {
                    let total: f64 = pb.model.index.u[i][e][j - 1].iter().map(|(_, v)| x[v]).sum();
                    prop_assert!((total - 1.0).abs() < 1e-6);
                }
                // reads move forward; a wait-for-all fusion never reuses one
                let used: Vec<usize> = sched.tasks[i].jobs.iter().map(|jb| jb.used[e]).collect();
                if pb.dag.kind(i) == TaskType::WFusion {
                    prop_assert!(used.windows(2).all(|w| w[0] < w[1]), "{:?}", used);
                } else {
                    prop_assert!(used.windows(2).all(|w| w[0] <= w[1]), "{:?}", used);
                }
            }
        }
    }

    #[test]
    fn replay_is_steady(case in draw()) {
        let pb = problem(&case, ModelOptions::default());
        let s = solved(&pb, 60);
        prop_assume!(s.outcome.status == SolveStatus::Optimal);
        let sched = s.schedule.as_ref().unwrap();
        let two = replay(sched, &pb.dag, &pb.config, 2).unwrap();
        for n in [3, 7] {
            let r = replay(sched, &pb.dag, &pb.config, n).unwrap();
            prop_assert_eq!(&r.report.totals, &two.report.totals, "n = {}", n);
        }
    }

    #[test]
    fn objective_ignores_big_m(case in draw()) {
        let base = problem(&case, ModelOptions::default());
        let big = problem(&case, ModelOptions { big_m: Some(2.0 * base.model.big_m), ..ModelOptions::default() });
        let (a, b) = (solved(&base, 60), solved(&big, 60));
        prop_assume!(a.outcome.status == SolveStatus::Optimal && b.outcome.status == SolveStatus::Optimal);
        prop_assert!(same(&a.outcome.objective, &b.outcome.objective));
    }

    #[test]
    fn optimal_survives_a_longer_limit(case in draw()) {
        let pb = problem(&case, ModelOptions::default());
        let a = solved(&pb, 30);
        prop_assume!(a.outcome.status == SolveStatus::Optimal);
        let b = solved(&pb, 60);
        prop_assert_eq!(b.outcome.status, SolveStatus::Optimal);
        prop_assert!(same(&a.outcome.objective, &b.outcome.objective));
    }

    #[test]
    fn solver_matches_the_oracle(case in draw()) {
        let pb = problem(&case, ModelOptions::default());
        let s = solved(&pb, 60);
        let o = brute_force_solve(&pb.dag, &pb.table, &pb.config, &BruteCaps::default()).unwrap();
        prop_assert_eq!(s.outcome.status, o.status, "seed {}", case.seed);
        if o.status == SolveStatus::Optimal {
            prop_assert!(same(&s.outcome.objective, &o.objective), "seed {}: {:?} vs {:?}", case.seed, s.outcome.objective, o.objective);
        }
    }
}

#[test]
fn pinned_tasks_stay_on_one_core() {
    let case = (0..).find_map(|s| tiny_case(s, &BruteCaps::default()).filter(|c| c.spec.cores == 2)).unwrap();
    let pb = problem(&case, ModelOptions { pin_tasks: true, ..ModelOptions::default() });
    let s = solved(&pb, 60);
    if let Some(sched) = &s.schedule {
        for t in &sched.tasks {
            assert!(t.jobs.windows(2).all(|w| w[0].core == w[1].core), "{}", t.id);
        }
    }
}
