use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fusched::io::parse_metrics_csv;

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fusched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusched")).args(args).env_remove("FUSCHED_BACKEND").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn row_metrics(path: &Path) -> [i64; 5] {
    let rows = parse_metrics_csv(&std::fs::read_to_string(path).unwrap()).unwrap().unwrap();
    rows[0].metrics.expect("a schedule was found")
}

const INFEASIBLE: &str = r#"
cores = 1

[[tasks]]
id = "a"
wcet = 2
period = 3
type = "sensor"

[[tasks]]
id = "b"
wcet = 2
period = 3
type = "sensor"

[[tasks]]
id = "f"
wcet = 1
type = "w-fusion"
preds = ["a", "b"]
"#;

#[test]
fn preset_run_writes_artifacts() {
    let dir = scratch("preset");
    let out =
        fusched(&["run", "--preset", "two-sensor:2:w-fus", "--deterministic", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let case = dir.join("two-sensor_2_w-fus");
    for f in ["spec.toml", "metrics.csv", "schedule.toml", "trace.txt", "gantt.svg", "replay.csv", "replay-trace.txt"] {
        assert!(case.join(f).is_file(), "{f} missing");
    }
    let [mrt, mtd, ..] = row_metrics(&case.join("metrics.csv"));
    assert_eq!((mrt, mtd), (8, 1));
    assert_eq!(row_metrics(&case.join("replay.csv"))[0], 8);
}

#[test]
fn generated_spec_round_trips_through_check_and_run() {
    let dir = scratch("generated");
    let out = fusched(&["gen", "--nodes", "3", "--sensors", "1", "--edges", "2", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    let spec = dir.join("g.toml");
    std::fs::write(&spec, &out.stdout).unwrap();

    let check = fusched(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&check), 0);
    assert!(String::from_utf8_lossy(&check.stdout).starts_with("valid: 3 tasks"));

    let run = fusched(&[
        "run",
        "--spec",
        spec.to_str().unwrap(),
        "--metrics",
        "mrt",
        "--write-lp",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(std::fs::read_to_string(dir.join("g").join("model.lp")).unwrap().contains("Subject To"));
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = scratch("codes");
    let d = dir.to_str().unwrap();
    let spec = dir.join("overloaded.toml");
    std::fs::write(&spec, INFEASIBLE).unwrap();
    assert_eq!(code(&fusched(&["run", "--spec", spec.to_str().unwrap(), "--out-dir", d])), 3);
    assert_eq!(code(&fusched(&["run", "--preset", "two-sensor:2:w-fus", "--time-limit", "0", "--out-dir", d])), 2);
    assert_eq!(code(&fusched(&["run", "--preset", "no-such-preset", "--out-dir", d])), 4);
    std::fs::write(&spec, "cores = \"two\"").unwrap();
    assert_eq!(code(&fusched(&["run", "--spec", spec.to_str().unwrap(), "--out-dir", d])), 4);
    assert_eq!(code(&fusched(&["run", "--preset", "branch:A", "--metrics", "speed", "--out-dir", d])), 4);
}

#[test]
fn campaign_reruns_reuse_finished_cases() {
    let dir = scratch("campaign");
    let d = dir.to_str().unwrap();
    let args =
        ["campaign", "--cases", "2", "--nodes", "4", "--sensors", "2", "--edges", "4", "--replay", "2", "--out-dir", d];
    let first = fusched(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    for f in ["manifest.toml", "campaign.csv", "distribution.csv", "summary.csv"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let second = fusched(&args);
    assert!(String::from_utf8_lossy(&second.stdout).contains("cases 2 (reused 2)"));

    // a different generator setup must not silently mix with old results
    let mut other = args.to_vec();
    other[2] = "3";
    assert_eq!(code(&fusched(&other)), 4);
}
