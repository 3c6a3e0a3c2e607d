//! `spatial-bandit` command line. Exit codes: 0 success, 1 usage or input
//! error, 2 method-level failure (epoch cap, planner infeasibility, failed
//! runs, violated plan).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::assignment::detect_conflicts;
use crate::bandit::BanditState;
use crate::bounds::p_max;
use crate::environment::{generate_scenario, CellIndex, GeneratorParams, ScenarioFile, TeamState, SCHEMA_VERSION};
use crate::error::{domain, Error, Result};
use crate::harness::{sweep_with, SweepSpec};
use crate::ip_model::{build_ip, validate_plan, write_text, PlanningProblem, SolutionFile, TeamPlan};
use crate::simulation::{estimate_kmax, MeasurementModel, RunParams, Simulation};
use crate::solver::{plan, Backend, ExternalCommand, SolveOptions, SolveStatus};

pub const DEFAULT_SEED: u64 = 1;
/// Output directory used when `--out` is absent.
pub const OUT_ENV: &str = "SPATIAL_BANDIT_OUT";

#[derive(Debug, Parser)]
#[command(name = "spatial-bandit", version, about = "Bandit-driven spatial classification with sensors and mobile charging stations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random scenario file.
    Generate(GenerateArgs),
    /// Run one classification to termination.
    Run(RunArgs),
    /// Monte-Carlo sweep over one parameter.
    Sweep(SweepArgs),
    /// Finite-time epoch bound for a scenario.
    Bounds(BoundsArgs),
    /// Check a plan file against its scenario.
    Validate(ValidateArgs),
    /// Estimate the worst cycles-per-epoch K^max.
    EstimateKmax(KmaxArgs),
    /// Write the 0/1 program of one epoch in the text format.
    ExportIp(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    BuiltIn,
    External,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "built-in")]
    pub solver: SolverKind,
    /// External solver, run as `<cmd...> <instance> <solution>`.
    #[arg(long, value_name = "CMD")]
    pub external_cmd: Option<String>,
    /// Also solve with the built-in backend and require equal optima.
    #[arg(long)]
    pub cross_check: bool,
    /// Wall-clock limit per solve. Setting it makes results machine dependent.
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    /// Search-node budget per solve.
    #[arg(long)]
    pub node_limit: Option<u64>,
}

impl SolverArgs {
    fn options(&self, base: SolveOptions) -> Result<SolveOptions> {
        let mut o = base;
        if let Some(t) = self.time_limit_s {
            o.time_limit_s = t;
            o.deterministic = false;
        }
        if let Some(n) = self.node_limit {
            o.node_limit = n;
        }
        match (self.solver, &self.external_cmd) {
            (SolverKind::BuiltIn, None) => {}
            (SolverKind::BuiltIn, Some(_)) => return domain("--external-cmd needs --solver external"),
            (SolverKind::External, None) => return domain("--solver external needs --external-cmd"),
            (SolverKind::External, Some(cmd)) => {
                let mut parts = cmd.split_whitespace().map(String::from);
                let program = parts.next().ok_or_else(|| Error::Domain("empty --external-cmd".into()))?;
                o.backend = Backend::External(ExternalCommand { program, args: parts.collect(), cross_check: self.cross_check });
            }
        }
        o.validate()?;
        Ok(o)
    }

    /// Flag defaults overridden by a spec file only when given explicitly.
    fn explicit(&self) -> bool {
        self.solver != SolverKind::BuiltIn || self.time_limit_s.is_some() || self.node_limit.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Full,
    Hardware,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    /// Generator parameters as JSON, replacing the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub mu_worst: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sensing noise seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Samples per cell visit (B).
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    /// Epoch goals (D).
    #[arg(long, default_value_t = 6)]
    pub d_goals: usize,
    #[arg(long)]
    pub epoch_cap: Option<u64>,
    /// Probability that a degraded sensor flips each sample.
    #[arg(long, default_value_t = 0.0)]
    pub degraded_flip: f64,
    /// Apply collision repair to station paths too.
    #[arg(long)]
    pub deconflict_stations: bool,
    /// Keep wall-clock solver times in the outputs.
    #[arg(long)]
    pub record_timings: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep specification JSON.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the spec's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub epoch_cap: Option<u64>,
    #[arg(long)]
    pub degraded_flip: Option<f64>,
    #[arg(long)]
    pub record_timings: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub d_goals: usize,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Plan file written by `export-ip --solve`.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmaxArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub d_goals: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated goal cells; defaults to the first epoch's goals.
    #[arg(long, value_delimiter = ',')]
    pub goals: Option<Vec<usize>>,
    #[arg(long, default_value_t = 6)]
    pub d_goals: usize,
    /// Overrides the scenario's cycle cap K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Also solve and write the plan and solution.
    #[arg(long)]
    pub solve: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// One epoch's plan with the request it answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema_version: u32,
    pub goals: BTreeSet<CellIndex>,
    pub k_max_cycles: usize,
    pub start: TeamState,
    pub status: SolveStatus,
    pub objective: Option<i64>,
    pub plan: TeamPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub valid: bool,
    pub violations: Vec<String>,
    /// Swap, crossing and vertex conflicts between sensors.
    pub conflicts: Vec<String>,
}

#[derive(Serialize)]
struct FinalSets<'a> {
    schema_version: u32,
    terminated: bool,
    keep: &'a BTreeSet<CellIndex>,
    reject: &'a BTreeSet<CellIndex>,
    unclassified: Vec<CellIndex>,
}

#[derive(Serialize)]
struct BanditSnapshot<'a> {
    schema_version: u32,
    state: &'a BanditState,
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Whether a command met its goal; `Failed` maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed(String),
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(Status::Ok) => 0,
        Ok(Status::Failed(msg)) => {
            eprintln!("{msg}");
            2
        }
        Err(Error::Infeasible(msg)) => {
            eprintln!("planning problem is infeasible: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Status> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Validate(a) => cmd_validate(a),
        Command::EstimateKmax(a) => cmd_estimate_kmax(a),
        Command::ExportIp(a) => cmd_export_ip(a),
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    ScenarioFile::load(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<Status> {
    let mut params = match &a.spec {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => match a.preset {
            Preset::Desk => GeneratorParams::desk_scale(),
            Preset::Full => GeneratorParams::full_scale(),
            Preset::Hardware => GeneratorParams::hardware_like(),
        },
    };
    if let Some(m) = a.mu_worst {
        params.mu_worst = m;
    }
    let g = generate_scenario(&params, a.seed)?;
    let dir = out_dir(&a.out)?;
    g.file.save(&dir.join("scenario.json"))?;
    println!("{}", g.file.scenario.ascii_map(Some(&g.file.initial)));
    println!("interesting: {:?}", g.designated_interesting.iter().map(|c| c.0).collect::<Vec<_>>());
    Ok(Status::Ok)
}

pub fn cmd_run(a: &RunArgs) -> Result<Status> {
    let file = load_scenario(&a.scenario)?;
    let model = MeasurementModel::new(a.batch_size, a.degraded_flip, a.seed)?;
    let params = RunParams {
        d_goals: a.d_goals,
        epoch_cap: a.epoch_cap,
        solver: a.solver.options(SolveOptions::default())?,
        deconflict_stations: a.deconflict_stations,
    };
    let mut sim = Simulation::new(Arc::new(file.scenario), file.team, file.initial, model, params, 0)?;
    while !sim.is_done() {
        sim.run_epoch()?;
    }
    let bandit = sim.bandit().clone();
    let mut record = sim.finish();
    if !a.record_timings {
        record = record.without_timings();
    }
    let dir = out_dir(&a.out)?;
    std::fs::write(dir.join("run.json"), record.to_json() + "\n")?;
    let mut w = csv::Writer::from_path(dir.join("epochs.csv"))?;
    record.write_csv(&mut w)?;
    w.flush()?;
    let unclassified = bandit.unclassified().collect();
    write_json(
        &dir.join("final_sets.json"),
        &FinalSets { schema_version: SCHEMA_VERSION, terminated: record.terminated, keep: &bandit.keep, reject: &bandit.reject, unclassified },
    )?;
    write_json(&dir.join("bandit.json"), &BanditSnapshot { schema_version: SCHEMA_VERSION, state: &bandit })?;
    println!(
        "epochs={} terminated={} keep={:?} reject={}",
        record.epochs.len(),
        record.terminated,
        bandit.keep.iter().map(|c| c.0).collect::<Vec<_>>(),
        bandit.reject.len()
    );
    Ok(match (&record.aborted, record.capped) {
        (Some(msg), _) => Status::Failed(format!("run aborted at epoch {}: {msg}", record.epochs.len())),
        (None, true) => Status::Failed(format!("epoch cap {} reached before termination", record.epoch_cap)),
        _ => Status::Ok,
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Status> {
    let mut spec = SweepSpec::from_json(&std::fs::read_to_string(&a.spec)?)?;
    if let Some(s) = a.seed {
        spec.master_seed = s;
    }
    if a.workers.is_some() {
        spec.workers = a.workers;
    }
    if a.epoch_cap.is_some() {
        spec.epoch_cap = a.epoch_cap;
    }
    if let Some(f) = a.degraded_flip {
        spec.degraded_flip_prob = f;
    }
    if a.solver.explicit() {
        spec.solver = a.solver.options(spec.solver.clone())?;
    }
    let total = spec.axis.len();
    let result = sweep_with(&spec, |i, _| eprintln!("{} = {} done ({}/{total})", spec.axis.name(), spec.axis.label(i), i + 1))?;
    let result = if a.record_timings { result } else { result.without_timings() };
    let dir = out_dir(&a.out)?;
    result.write_outputs(&dir)?;
    for r in &result.rows {
        println!(
            "{}={} runs={} failed={} capped={} median_epochs_all={:?}",
            spec.axis.name(),
            r.axis_value,
            r.n_runs,
            r.n_failed,
            r.n_capped,
            r.epochs_all.map(|q| q.median)
        );
    }
    let bad: usize = result.rows.iter().map(|r| r.n_failed + r.n_capped).sum();
    Ok(if bad == 0 { Status::Ok } else { Status::Failed(format!("{bad} runs failed or hit the epoch cap")) })
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<Status> {
    let file = load_scenario(&a.scenario)?;
    let report = p_max(&file.scenario, a.d_goals, a.batch_size)?;
    let dir = out_dir(&a.out)?;
    write_json(&dir.join("bounds.json"), &Versioned { schema_version: SCHEMA_VERSION, body: &report })?;
    print!("{}", report.table());
    Ok(if report.p_max.is_finite() {
        Status::Ok
    } else {
        Status::Failed("P_max is unbounded: some candidate cell sits exactly on the threshold".into())
    })
}

pub fn cmd_validate(a: &ValidateArgs) -> Result<Status> {
    let file = load_scenario(&a.scenario)?;
    let pf: PlanFile = serde_json::from_str(&std::fs::read_to_string(&a.plan)?)?;
    let mut team = file.team;
    team.k_max_cycles = pf.k_max_cycles;
    let grid = file.scenario.grid();
    let problem = PlanningProblem::new(Arc::new(file.scenario), team, pf.start.clone(), pf.goals.clone())?;
    let violations: Vec<String> = validate_plan(&pf.plan, &problem).iter().map(|v| v.to_string()).collect();
    let mut conflicts = Vec::new();
    for k in 0..pf.plan.cycles_used.min(pf.plan.sensor_paths.first().map_or(0, Vec::len)) {
        for c in detect_conflicts(grid, k, &pf.plan.sensor_steps(k))? {
            conflicts.push(c.to_string());
        }
    }
    let report = ValidationReport { schema_version: SCHEMA_VERSION, valid: violations.is_empty(), violations, conflicts };
    let dir = out_dir(&a.out)?;
    write_json(&dir.join("validation.json"), &report)?;
    for v in &report.violations {
        println!("violation: {v}");
    }
    for c in &report.conflicts {
        println!("conflict: {c}");
    }
    println!("valid={} violations={} conflicts={}", report.valid, report.violations.len(), report.conflicts.len());
    Ok(if report.valid { Status::Ok } else { Status::Failed(format!("{} violations", report.violations.len())) })
}

pub fn cmd_estimate_kmax(a: &KmaxArgs) -> Result<Status> {
    let file = load_scenario(&a.scenario)?;
    let options = a.solver.options(SolveOptions::default())?;
    let est = estimate_kmax(Arc::new(file.scenario), file.team, a.d_goals, a.trials, a.seed, &options)?;
    let dir = out_dir(&a.out)?;
    write_json(&dir.join("kmax.json"), &Versioned { schema_version: SCHEMA_VERSION, body: &est })?;
    println!("k_max={:?} trials={} failures={}", est.k_max, est.trials, est.failures.len());
    Ok(match est.k_max {
        Some(_) => Status::Ok,
        None => Status::Failed("no trial produced a plan".into()),
    })
}

pub fn cmd_export_ip(a: &ExportArgs) -> Result<Status> {
    let file = load_scenario(&a.scenario)?;
    let goals: BTreeSet<CellIndex> = match &a.goals {
        Some(g) => g.iter().map(|&c| CellIndex(c)).collect(),
        None => BanditState::for_scenario(&file.scenario)
            .select_epoch_goals(a.d_goals, file.scenario.delta())?
            .into_iter()
            .collect(),
    };
    let mut team = file.team;
    if let Some(k) = a.k {
        team.k_max_cycles = k;
    }
    let problem = PlanningProblem::new(Arc::new(file.scenario), team, file.initial.clone(), goals.clone())?;
    let instance = build_ip(&problem)?;
    let dir = out_dir(&a.out)?;
    std::fs::write(dir.join("instance.bip"), write_text(&instance))?;
    println!("vars={} rows={} goals={:?}", instance.num_vars, instance.constraints.len(), goals.iter().map(|c| c.0).collect::<Vec<_>>());
    if !a.solve {
        return Ok(Status::Ok);
    }
    let out = plan(&problem, &a.solver.options(SolveOptions::default())?)?;
    let values = out.result.assignment.clone().expect("plan carries an assignment");
    let status = serde_json::to_value(out.result.status)?.as_str().map(String::from);
    let sol = SolutionFile { status, values };
    std::fs::write(dir.join("solution.sol"), sol.to_text())?;
    let pf = PlanFile {
        schema_version: SCHEMA_VERSION,
        goals,
        k_max_cycles: team.k_max_cycles,
        start: file.initial,
        status: out.result.status,
        objective: out.result.objective,
        plan: out.plan,
    };
    write_json(&dir.join("plan.json"), &pf)?;
    println!("status={:?} cycles={}", pf.status, pf.plan.cycles_used);
    Ok(Status::Ok)
}
