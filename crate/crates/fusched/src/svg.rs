//! Gantt chart of a schedule as a standalone SVG document.

use std::fmt::Write;

use fusched_core::dag::Dag;
use fusched_core::replay::{EventKind, trace};
use fusched_core::schedule::Schedule;
use fusched_core::time::Time;

const LEFT: f64 = 70.0;
const TOP: f64 = 30.0;
const LANE: f64 = 46.0;
const BAR: f64 = 26.0;
const PLOT_WIDTH: f64 = 1000.0;

const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick spacing giving roughly ten labels over `span`.
fn tick_step(span: Time) -> Time {
    let raw = (span.max(1) as f64 / 10.0).max(1.0);
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    step as Time
}

/// One lane per core and one bar per instance, labelled `task.index`.
/// Fusion instances get an arrow at their triggering time. `dag` is the
/// graph the schedule was solved for. Output depends only on the inputs.
pub fn emit_gantt(schedule: &Schedule, dag: &Dag) -> String {
    let lanes = schedule.cores.max(1);
    let span = schedule.delta.max(schedule.tasks.iter().flat_map(|t| &t.jobs).map(|j| j.finish).max().unwrap_or(0));
    let scale = PLOT_WIDTH / span.max(1) as f64;
    let x = |t: Time| LEFT + t as f64 * scale;
    let height = TOP + LANE * lanes as f64 + 30.0;
    let width = LEFT + PLOT_WIDTH + 20.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="monospace" font-size="10">"#
    );
    s.push_str(r##"<defs><marker id="arrow" viewBox="0 0 6 6" refX="3" refY="6" markerWidth="6" markerHeight="6" orient="auto-start-reverse"><path d="M0,0 L3,6 L6,0 z" fill="#222"/></marker></defs>"##);
    s.push('\n');
    for c in 0..lanes {
        let y = TOP + LANE * c as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{y:.1}" width="{PLOT_WIDTH}" height="{LANE}" fill="{}" stroke="#ccc"/>"##,
            if c % 2 == 0 { "#fafafa" } else { "#f0f0f0" }
        );
        let _ = writeln!(s, r#"<text x="8" y="{:.1}">core {c}</text>"#, y + LANE / 2.0 + 3.0);
    }
    let axis = TOP + LANE * lanes as f64;
    let step = tick_step(span);
    let mut t = 0;
    while t <= span {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{axis:.1}" x2="{0:.2}" y2="{1:.1}" stroke="#888"/><text x="{0:.2}" y="{2:.1}" text-anchor="middle">{t}</text>"##,
            x(t),
            axis + 4.0,
            axis + 15.0
        );
        t += step;
    }
    if schedule.hp > 0 {
        let mut h = schedule.hp;
        while h < span {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{TOP}" x2="{0:.2}" y2="{axis:.1}" stroke="#999" stroke-dasharray="4,3"/>"##,
                x(h)
            );
            h += schedule.hp;
        }
    }
    for (i, (task, j, job)) in schedule.timeline().into_iter().enumerate() {
        let id = escape(&schedule.tasks[task].id);
        let y = TOP + LANE * job.core as f64 + (LANE - BAR) / 2.0;
        let w = (x(job.finish) - x(job.start)).max(0.5);
        let _ = writeln!(
            s,
            r##"<g id="bar{i}"><title>{id}.{j} [{}, {}) phase {}</title><rect x="{:.2}" y="{y:.1}" width="{w:.2}" height="{BAR}" fill="{}" stroke="#333" stroke-width="0.5"/><text x="{:.2}" y="{:.1}" text-anchor="middle">{id}.{j}</text></g>"##,
            job.start,
            job.finish,
            job.phase,
            x(job.start),
            PALETTE[task % PALETTE.len()],
            x(job.start) + w / 2.0,
            y + BAR / 2.0 + 3.0,
        );
    }
    for e in trace(schedule, dag).iter().filter(|e| e.kind == EventKind::Trigger) {
        let fusion = dag.index_of(&e.task).is_some_and(|i| dag.kind(i).is_fusion());
        if !fusion {
            continue;
        }
        let y = TOP + LANE * e.core as f64 + (LANE - BAR) / 2.0;
        let _ = writeln!(
            s,
            r##"<line class="trigger" x1="{0:.2}" y1="{1:.1}" x2="{0:.2}" y2="{y:.1}" stroke="#222" marker-end="url(#arrow)"/>"##,
            x(e.time),
            y - 10.0,
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusched_core::dag::{DagSpec, TaskSpec, TaskType};
    use fusched_core::schedule::{Job, TaskJobs};

    fn fused() -> (Dag, Schedule) {
        let dag = DagSpec::new(
            2,
            vec![
                TaskSpec::new("a", 1, 10, TaskType::Sensor, &[]),
                TaskSpec::new("b", 2, 10, TaskType::Sensor, &[]),
                TaskSpec::new("f", 1, 0, TaskType::WFusion, &["a", "b"]),
            ],
        )
        .validate()
        .unwrap();
        let job = |start, e, core, used: Vec<usize>| Job { start, finish: start + e, core, phase: 1, used };
        let sched = Schedule {
            hp: 10,
            delta: 10,
            cores: 2,
            tasks: vec![
                TaskJobs { id: "a".into(), jobs: vec![job(0, 1, 0, vec![])] },
                TaskJobs { id: "b".into(), jobs: vec![job(0, 2, 1, vec![])] },
                TaskJobs { id: "f".into(), jobs: vec![job(2, 1, 0, vec![1, 1])] },
            ],
        };
        (dag, sched)
    }

    #[test]
    fn bars_lanes_and_arrows() {
        let (dag, sched) = fused();
        let svg = emit_gantt(&sched, &dag);
        assert_eq!(svg.matches("<g id=\"bar").count(), 3);
        assert_eq!(svg.matches("class=\"trigger\"").count(), 1);
        assert!(svg.contains(">core 1<"));
        assert!(svg.contains(">f.1<"));
        assert_eq!(svg, emit_gantt(&sched, &dag));
    }

    #[test]
    fn empty_schedule_has_one_empty_lane() {
        let (dag, _) = fused();
        let sched = Schedule { hp: 0, delta: 0, cores: 0, tasks: Vec::new() };
        let svg = emit_gantt(&sched, &dag);
        assert!(svg.contains(">core 0<"));
        assert!(!svg.contains("<g id=\"bar"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(60), 10);
        assert_eq!(tick_step(2880), 500);
        assert_eq!(tick_step(0), 1);
    }
}
