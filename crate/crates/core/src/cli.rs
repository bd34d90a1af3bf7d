//! Command-line front end.
//!
//! Exit codes: `0` schedulable / no deadline miss, `1` not schedulable,
//! horizon overflow or deadline miss, `2` bad input or usage.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::assign::semi_partition;
use crate::demand::{hyperperiod, load};
use crate::experiment::{
    fraction_label, generate_task_system, parse_fraction, run_sweep, standard_fractions, trial_seed, write_csv,
    Generator, Strategy, SweepConfig, DEFAULT_SEED,
};
use crate::format::{document, load_str, to_json, Loaded};
use crate::model::{total_utilization, Witness};
use crate::sim::{run_simulation, ReleaseModel, SimConfig, SimReport};
use crate::{AnalysisConfig, AssignmentPlan, TaskSystem, TestMode, Ticks, Verdict, DEFAULT_HORIZON_CAP};

/// `K` used when neither the file nor `--k` sets one.
pub const DEFAULT_K: usize = 20;
/// Longest default simulation.
pub const DEFAULT_SIM_LIMIT: Ticks = 1_000_000;
/// Per-CPU load is only reported when the fixed tasks' hyperperiod fits here.
pub const LOAD_LIMIT: Ticks = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "semipart", version, about = "Semi-partitioned EDF analysis with restricted migrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random implicit-deadline task system.
    Gen(GenArgs),
    /// Assign tasks to CPUs and check every CPU.
    Analyze(AnalyzeArgs),
    /// Simulate per-CPU EDF under an assignment plan.
    Simulate(SimulateArgs),
    /// Success-ratio sweep over CPU counts, utilizations, K and modes.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Packed,
    Pattern,
}

impl From<ModeArg> for TestMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Packed => TestMode::Packed,
            ModeArg::Pattern => TestMode::Pattern,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReleaseArg {
    Sync,
    Sporadic,
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_util(s: &str) -> Result<Ratio<u64>, String> {
    let f = parse_fraction(s)?;
    if f > Ratio::new(1, 1) {
        return Err(format!("fraction must be in [0, 1], got {s}"));
    }
    Ok(f)
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of CPUs.
    #[arg(long, default_value_t = 2, value_parser = parse_positive)]
    pub cpus: usize,
    /// Total utilization per CPU, in [0, 1].
    #[arg(long, value_parser = parse_util)]
    pub util: Ratio<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// `K` recorded in the file.
    #[arg(long, default_value_t = DEFAULT_K, value_parser = parse_positive)]
    pub k: usize,
    /// Utilization generator: sequential or uunifast.
    #[arg(long, default_value = "sequential")]
    pub generator: Generator,
    /// Output file; the system is printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Task-system file.
    #[arg(long)]
    pub input: PathBuf,
    /// Frame count `K`; overrides the file's value.
    #[arg(long, value_parser = parse_positive)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Pattern)]
    pub mode: ModeArg,
    /// Cap on the analysis horizon in ticks (10^8).
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP)]
    pub cap: Ticks,
    /// Write the plan here when the system is schedulable.
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Task-system file; a `plan` member in it is used when no other plan is given.
    #[arg(long)]
    pub input: PathBuf,
    /// Plan file as written by `analyze --plan-out`.
    #[arg(long, conflicts_with = "auto")]
    pub plan: Option<PathBuf>,
    /// Build the plan with `analyze` first.
    #[arg(long)]
    pub auto: bool,
    /// `K` for `--auto`; defaults to the file's value.
    #[arg(long, value_parser = parse_positive)]
    pub k: Option<usize>,
    /// Test mode for `--auto`.
    #[arg(long, value_enum, default_value_t = ModeArg::Pattern)]
    pub mode: ModeArg,
    /// Cap on the analysis horizon in ticks (10^8).
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP)]
    pub cap: Ticks,
    /// Simulated ticks [default: min(2 * analysis horizon, 10^6)].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: Option<Ticks>,
    #[arg(long, value_enum, default_value_t = ReleaseArg::Sync)]
    pub release: ReleaseArg,
    /// Seed for sporadic releases.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Largest extra delay between sporadic releases.
    #[arg(long, default_value_t = 100)]
    pub max_jitter: Ticks,
    /// Write the event trace (`time event task job cpu`) here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4")]
    pub cpus: Vec<usize>,
    /// Utilization fractions [default: 0.50,0.55,...,0.95].
    #[arg(long, value_delimiter = ',', value_parser = parse_fraction)]
    pub fractions: Vec<Ratio<u64>>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,20")]
    pub k_values: Vec<usize>,
    /// Any of ffd, packed, pattern.
    #[arg(long, value_delimiter = ',', default_value = "ffd,packed,pattern")]
    pub modes: Vec<Strategy>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Cap on the analysis horizon in ticks (10^8).
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP)]
    pub cap: Ticks,
    /// Utilization generator: sequential or uunifast.
    #[arg(long, default_value = "sequential")]
    pub generator: Generator,
    /// Output file; the table is printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit rows as JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Outcome = Result<i32, InputError>;

fn read_input(path: &Path) -> Result<Loaded, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let loaded = load_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(loaded)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), InputError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| InputError(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn decimal(r: &BigRational) -> String {
    format!("{:.4}", r.to_f64().unwrap_or(f64::NAN))
}

fn cpu_name(cpu: usize) -> String {
    format!("π{}", cpu + 1)
}

/// `(π1,π2,π1)`
pub fn sequence_label(seq: &[usize]) -> String {
    let names: Vec<String> = seq.iter().map(|&c| cpu_name(c)).collect();
    format!("({})", names.join(","))
}

fn tuple<T: ToString>(items: &[T]) -> String {
    let s: Vec<String> = items.iter().map(ToString::to_string).collect();
    format!("({})", s.join(","))
}

fn gen(args: &GenArgs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(args.seed, args.cpus, args.util, 0));
    let system = generate_task_system(args.cpus, args.util, args.generator, &mut rng);
    let text = to_json(&document(&system, args.k, None));
    let Some(out) = args.out.as_deref() else {
        write_output(None, &text)?;
        return Ok(0);
    };
    write_output(Some(out), &text)?;
    let total = total_utilization(&system.tasks);
    if args.json {
        let summary = json!({
            "out": out.display().to_string(),
            "tasks": system.tasks.len(),
            "cpus": system.cpu_count,
            "K": args.k,
            "utilization": total.to_f64(),
        });
        println!("{summary}");
    } else {
        println!(
            "wrote {} tasks on {} CPUs to {} (total utilization {})",
            system.tasks.len(),
            system.cpu_count,
            out.display(),
            decimal(&total)
        );
    }
    Ok(0)
}

fn witness_value(w: &Option<Witness<Ticks>>) -> Value {
    match w {
        None => Value::Null,
        Some(Witness::Density(d)) => json!({ "density": d.to_string() }),
        Some(Witness::Violation { time, demand }) => json!({ "time": time, "demand": demand }),
    }
}

fn witness_text(w: &Option<Witness<Ticks>>) -> String {
    match w {
        None => "none".into(),
        Some(Witness::Density(d)) => format!("density {d} > 1"),
        Some(Witness::Violation { time, demand }) => format!("demand {demand} > {time} at t = {time}"),
    }
}

fn cpu_loads(system: &TaskSystem, plan: &AssignmentPlan) -> Vec<Option<Ratio<Ticks>>> {
    plan.workloads(system).iter().map(|w| load(&w.fixed, LOAD_LIMIT).ok()).collect()
}

fn analysis_report(system: &TaskSystem, config: &AnalysisConfig, plan: &AssignmentPlan, verdict: &Verdict) -> Value {
    let loads = cpu_loads(system, plan);
    let matrix = plan.matrix(system);
    let tasks: Vec<Value> = system
        .tasks
        .iter()
        .zip(&matrix)
        .map(|(t, row)| {
            let mut v = json!({ "id": t.id, "C": t.wcet, "D": t.deadline, "T": t.period, "row": row });
            if let Some(&cpu) = plan.fixed.get(&t.id) {
                v["cpu"] = json!(cpu);
            } else if let Some(seq) = plan.sequences.get(&t.id) {
                v["sequence"] = json!(seq);
            }
            v
        })
        .collect();
    let cpus: Vec<Value> = verdict
        .per_cpu
        .iter()
        .enumerate()
        .map(|(cpu, v)| {
            let images: Vec<Value> =
                plan.per_cpu[cpu].iter().map(|mf| json!({ "task": mf.source, "frames": mf.frames })).collect();
            json!({
                "cpu": cpu,
                "status": v.status.as_str(),
                "density": v.density.to_string(),
                "load": loads[cpu].map(|l| l.to_string()),
                "horizon": v.horizon,
                "truncated": v.truncated,
                "witness": witness_value(&v.witness),
                "multiframes": images,
            })
        })
        .collect();
    json!({
        "status": verdict.status.as_str(),
        "K": config.k,
        "mode": config.mode.as_str(),
        "cap": config.cap,
        "unassigned": verdict.unassigned,
        "tasks": tasks,
        "cpus": cpus,
    })
}

fn print_analysis(system: &TaskSystem, config: &AnalysisConfig, plan: &AssignmentPlan, verdict: &Verdict) {
    let total = total_utilization(&system.tasks);
    println!(
        "system: {} tasks on {} CPUs, K = {}, mode {}, total utilization {}",
        system.tasks.len(),
        system.cpu_count,
        config.k,
        config.mode.as_str(),
        decimal(&total)
    );
    println!("placement:");
    for t in &system.tasks {
        let place = if let Some(&cpu) = plan.fixed.get(&t.id) {
            format!("fixed on {}", cpu_name(cpu))
        } else if let Some(seq) = plan.sequences.get(&t.id) {
            format!("migrating, A row {}, σ = {}", tuple(&plan.rows[&t.id]), sequence_label(seq))
        } else {
            "unassigned".into()
        };
        println!("  task {} (C={} D={} T={}): {place}", t.id, t.wcet, t.deadline, t.period);
    }
    println!("matrix A:");
    for (t, row) in system.tasks.iter().zip(plan.matrix(system)) {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>3}")).collect();
        println!("  task {:<4}{}", t.id, cells.join(""));
    }
    let loads = cpu_loads(system, plan);
    for (cpu, v) in verdict.per_cpu.iter().enumerate() {
        let load = loads[cpu].map_or("n/a".to_string(), |l| format!("{l}"));
        println!(
            "{}: {}, density {}, load {}, horizon {}{}, first violation {}",
            cpu_name(cpu),
            v.status.as_str(),
            decimal(&v.density),
            load,
            v.horizon,
            if v.truncated { " (truncated)" } else { "" },
            witness_text(&v.witness)
        );
        for mf in &plan.per_cpu[cpu] {
            println!("  task {} frames {}", mf.source, tuple(&mf.frames));
        }
    }
    match verdict.unassigned {
        Some(id) => println!("verdict: {} (task {id} could not be placed)", verdict.status.as_str()),
        None => println!("verdict: {}", verdict.status.as_str()),
    }
}

fn analyze(args: &AnalyzeArgs) -> Outcome {
    let loaded = read_input(&args.input)?;
    let config = AnalysisConfig { k: args.k.unwrap_or(loaded.k), mode: args.mode.into(), cap: args.cap };
    let (plan, verdict) = semi_partition(&loaded.system, &config);
    if args.json {
        println!("{}", analysis_report(&loaded.system, &config, &plan, &verdict));
    } else {
        print_analysis(&loaded.system, &config, &plan, &verdict);
    }
    if let Some(path) = &args.plan_out {
        if verdict.unassigned.is_none() {
            write_output(Some(path), &to_json(&document(&loaded.system, config.k, Some(&plan))))?;
        } else {
            eprintln!("no plan written: task {} is unassigned", verdict.unassigned.unwrap_or_default());
        }
    }
    Ok(if verdict.is_schedulable() { 0 } else { 1 })
}

fn simulation_report(report: &SimReport, horizon: Ticks) -> Value {
    let misses: Vec<Value> = report
        .misses
        .iter()
        .map(|m| json!({ "task": m.task, "job": m.job, "cpu": m.cpu, "deadline": m.deadline, "completion": m.completion }))
        .collect();
    json!({
        "horizon": horizon,
        "released": report.released,
        "completed": report.completed,
        "migrations": report.migrations,
        "preemptions": report.preemptions,
        "first_miss": report.first_miss().map(|m| m.deadline),
        "misses": misses,
    })
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let input = read_input(&args.input)?;
    let system = &input.system;
    let plan = if let Some(path) = &args.plan {
        let planned = read_input(path)?;
        if planned.system != *system {
            return Err(InputError(format!("{}: task system differs from {}", path.display(), args.input.display())));
        }
        planned.plan.ok_or_else(|| InputError(format!("{}: no plan member", path.display())))?
    } else if args.auto {
        let config = AnalysisConfig { k: args.k.unwrap_or(input.k), mode: args.mode.into(), cap: args.cap };
        let (plan, verdict) = semi_partition(system, &config);
        if let Some(id) = verdict.unassigned {
            return Err(InputError(format!("analysis could not place task {id}; nothing to simulate")));
        }
        plan
    } else {
        input
            .plan
            .clone()
            .ok_or_else(|| InputError("no plan: pass --plan or --auto, or add a plan to the input".into()))?
    };
    let horizon = args.horizon.unwrap_or_else(|| {
        let analysis = plan
            .workloads(system)
            .iter()
            .map(|w| hyperperiod(w).map_or(args.cap, |h| h.min(args.cap)))
            .max()
            .unwrap_or(1);
        analysis.saturating_mul(2).clamp(1, DEFAULT_SIM_LIMIT)
    });
    let release_model = match args.release {
        ReleaseArg::Sync => ReleaseModel::SynchronousPeriodic,
        ReleaseArg::Sporadic => ReleaseModel::SporadicSeeded { seed: args.seed, max_jitter: args.max_jitter },
    };
    let cfg = SimConfig { system, plan: &plan, horizon, release_model, record_trace: args.trace.is_some() };
    let report = run_simulation(&cfg)?;
    if let (Some(path), Some(trace)) = (&args.trace, &report.trace) {
        let mut text = String::new();
        for e in trace {
            text.push_str(&e.to_string());
            text.push('\n');
        }
        write_output(Some(path), &text)?;
    }
    if args.json {
        println!("{}", simulation_report(&report, horizon));
    } else {
        println!(
            "simulated {horizon} ticks: {} jobs released, {} completed, {} migrations, {} preemptions, {} deadline misses",
            report.released,
            report.completed,
            report.migrations,
            report.preemptions,
            report.misses.len()
        );
        for m in &report.misses {
            let done = m.completion.map_or("unfinished at horizon".to_string(), |c| format!("completed at {c}"));
            println!("  miss: task {} job {} on {}, deadline {}, {done}", m.task, m.job, cpu_name(m.cpu), m.deadline);
        }
        if let Some(m) = report.first_miss() {
            println!("first miss at {} (task {} job {})", m.deadline, m.task, m.job);
        }
    }
    Ok(if report.misses.is_empty() { 0 } else { 1 })
}

fn experiment(args: &ExperimentArgs) -> Outcome {
    let cfg = SweepConfig {
        cpu_counts: args.cpus.clone(),
        fractions: if args.fractions.is_empty() { standard_fractions() } else { args.fractions.clone() },
        k_values: args.k_values.clone(),
        modes: args.modes.clone(),
        trials: args.trials,
        seed: args.seed,
        cap: args.cap,
        generator: args.generator,
    };
    let rows = run_sweep(&cfg)?;
    let text = if args.json {
        let mut s = serde_json::to_string_pretty(&rows)?;
        s.push('\n');
        s
    } else {
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf)?;
        String::from_utf8(buf)?
    };
    write_output(args.out.as_deref(), &text)?;
    if args.out.is_some() {
        eprintln!(
            "{} rows over {} fractions ({} .. {})",
            rows.len(),
            cfg.fractions.len(),
            fraction_label(cfg.fractions[0]),
            fraction_label(cfg.fractions[cfg.fractions.len() - 1])
        );
    }
    Ok(0)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
