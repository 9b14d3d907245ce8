use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fusched::backend::{BACKEND_ENV, Limits, backend_by_name};
use fusched::campaign::{CampaignConfig, run_campaign};
use fusched::case::{CaseOptions, EXIT_INPUT, RunError, run_case, write_artifacts};
use fusched::cli::{parse_metrics, parse_types};
use fusched::io;
use fusched_core::dag::DagSpec;
use fusched_core::expansion::build_instance_table;
use fusched_core::generator::{FusionMode, GenConfig, generate};
use fusched_core::model::ModelOptions;
use fusched_core::presets;

#[derive(Parser)]
#[command(name = "fusched", version, about = "Optimal static schedules for fusion-aware task DAGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one DAG spec or preset and write its artifacts.
    Run(RunArgs),
    /// Generate random DAGs and solve them all.
    Campaign(CampaignArgs),
    /// Validate a spec and print its instance counts.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 3)]
        delta_multiplier: u32,
    },
    /// List the built-in presets with their reference metrics.
    Presets,
    /// Print one generated DAG spec.
    Gen {
        #[command(flatten)]
        generator: GenArgs,
        #[arg(long, default_value_t = 2)]
        cores: u32,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Override the core count of the DAG spec.
    #[arg(long)]
    cores: Option<u32>,
    /// Wall-clock limit per case, in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    /// Objective terms `metric[:weight[:priority]]`, comma separated,
    /// e.g. `mrt,mtd:2` or `mrt:1:2,paoi:1:1`.
    #[arg(long)]
    metrics: Option<String>,
    /// Analysis window in hyperperiods.
    #[arg(long, default_value_t = 3)]
    delta_multiplier: u32,
    /// Keep every instance of a task on one core.
    #[arg(long)]
    pin_tasks: bool,
    /// Single-threaded engine with a fixed seed.
    #[arg(long)]
    deterministic: bool,
    /// Engine log file.
    #[arg(long)]
    solver_log: Option<PathBuf>,
    /// MILP engine: `highs` or `microlp`.
    #[arg(long, env = BACKEND_ENV, default_value = "highs")]
    backend: String,
    /// Hyperperiods to replay the steady schedule for.
    #[arg(long, default_value_t = 100)]
    replay: usize,
    /// Also write the model in LP format.
    #[arg(long)]
    write_lp: bool,
}

impl SolveArgs {
    fn case_options(&self) -> CaseOptions {
        CaseOptions {
            model: ModelOptions { k: self.delta_multiplier, pin_tasks: self.pin_tasks, ..ModelOptions::default() },
            limits: Limits {
                time_limit: self.time_limit.map(Duration::from_secs_f64),
                gap: self.gap,
                deterministic: self.deterministic,
                log_file: self.solver_log.clone(),
            },
            replay_hps: self.replay,
            write_lp: self.write_lp,
        }
    }

    fn apply(&self, spec: &mut DagSpec) -> Result<(), RunError> {
        if let Some(c) = self.cores {
            spec.cores = c;
        }
        if let Some(m) = &self.metrics {
            spec.metrics.objective = parse_metrics(m).map_err(RunError::Input)?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct RunArgs {
    /// DAG spec file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in preset, e.g. `fusion-two-chains:TT`, `navigation:m=3`, `branch:A`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 6)]
    nodes: usize,
    #[arg(long, default_value_t = 3)]
    sensors: usize,
    #[arg(long, default_value_t = 7)]
    edges: usize,
    /// Allowed fusion types, comma separated.
    #[arg(long, default_value = "w-fusion")]
    fusion_types: String,
    /// Draw one fusion type per graph instead of one per node.
    #[arg(long)]
    uniform_types: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GenArgs {
    fn config(&self, cores: u32) -> Result<GenConfig, RunError> {
        Ok(GenConfig {
            node_count: self.nodes,
            sensor_count: self.sensors,
            edge_count: self.edges,
            fusion_types: parse_types(&self.fusion_types).map_err(RunError::Input)?,
            fusion_mode: if self.uniform_types { FusionMode::Uniform } else { FusionMode::Same },
            core_count: cores,
            seed: self.seed,
            ..GenConfig::default()
        })
    }
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "campaign")]
    out_dir: PathBuf,
    #[command(flatten)]
    generator: GenArgs,
    #[command(flatten)]
    solve: SolveArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cmd: Command) -> Result<i32, RunError> {
    match cmd {
        Command::Run(a) => run_one(a),
        Command::Campaign(a) => campaign(a),
        Command::Check { spec, delta_multiplier } => {
            let dag = io::read_spec(&spec)?.validate()?.adjust_branch_successors();
            let table = build_instance_table(&dag, delta_multiplier).map_err(|e| RunError::Input(e.to_string()))?;
            println!("valid: {} tasks, {} cores, HP {}, delta {}", dag.len(), dag.cores(), table.hp(), table.delta());
            for i in 0..dag.len() {
                println!("  {:<12} {:<6} {} instances", dag.id(i), dag.kind(i).short_name(), table.count(i));
            }
            Ok(0)
        }
        Command::Presets => {
            for p in presets::catalog() {
                let exp: Vec<String> = p.expected.iter().map(|(m, v)| format!("{}={v}", m.name())).collect();
                println!("{:<28} {}", p.name, exp.join(" "));
            }
            Ok(0)
        }
        Command::Gen { generator, cores } => {
            let spec = generate(&generator.config(cores)?).map_err(|e| RunError::Input(e.to_string()))?;
            print!("{}", io::spec_to_toml(&spec)?);
            Ok(0)
        }
    }
}

fn run_one(a: RunArgs) -> Result<i32, RunError> {
    let (name, mut spec, expected) = match (&a.spec, &a.preset) {
        (Some(path), _) => {
            let name = path.file_stem().map_or("case".into(), |s| s.to_string_lossy().into_owned());
            (name, io::read_spec(path)?, Vec::new())
        }
        (None, Some(p)) => {
            let preset = presets::lookup(p).ok_or_else(|| RunError::Input(format!("unknown preset `{p}`")))?;
            (preset.name.clone(), preset.dag, preset.expected)
        }
        (None, None) => return Err(RunError::Input("either --spec or --preset is required".into())),
    };
    a.solve.apply(&mut spec)?;
    let backend = backend_by_name(&a.solve.backend).map_err(|e| RunError::Input(e.to_string()))?;
    let res = run_case(&name, &spec, &a.solve.case_options(), backend.as_ref())?;
    let dir = a.out_dir.join(name.replace([':', '='], "_"));
    write_artifacts(&res, &dir, a.solve.write_lp)?;

    let status = res.status();
    println!("case      {name}");
    println!("status    {status}");
    if let Some(m) = &res.solved.outcome.message {
        println!("note      {m}");
    }
    println!("wall      {:.2}s", res.solved.outcome.wall_time.as_secs_f64());
    if let Some(r) = &res.solved.report {
        println!("objective {:?}", r.objective);
        for (m, v) in &r.totals {
            let exp = expected.iter().find(|(k, _)| k == m).map(|(_, e)| format!("  (reference {e})"));
            println!("{:<9} {v}{}", m.name(), exp.unwrap_or_default());
        }
    }
    if let Some(r) = &res.replay {
        println!("replay    {} HPs, MRT {}", a.solve.replay, r.report.get(fusched_core::metrics::Metric::Mrt));
    }
    println!("artifacts {}", dir.display());
    Ok(status.exit_code())
}

fn campaign(a: CampaignArgs) -> Result<i32, RunError> {
    let backend = backend_by_name(&a.solve.backend).map_err(|e| RunError::Input(e.to_string()))?;
    if a.solve.metrics.is_some() {
        return Err(RunError::Input("--metrics is not supported for campaigns".into()));
    }
    let cores = a.solve.cores.unwrap_or(2);
    let cfg = CampaignConfig {
        generator: a.generator.config(cores)?,
        cases: a.cases,
        workers: a.workers,
        case: a.solve.case_options(),
    };
    let res = run_campaign(&cfg, backend.as_ref(), &a.out_dir).map_err(|e| match e {
        fusched::campaign::CampaignError::Io(e) => RunError::Io(e),
        other => RunError::Input(other.to_string()),
    })?;
    println!("cases {} (reused {})", res.rows.len(), res.reused);
    println!("schedulability ratio {:.4}", res.schedulability_ratio());
    println!("results in {}", a.out_dir.display());
    Ok(if res.rows.is_empty() { EXIT_INPUT } else { 0 })
}
