//! Solvers for [`IpInstance`]s: the built-in exact search and an adapter for
//! external 0/1 solvers that exchange the text format of [`crate::ip_model`].

mod family;
mod search;

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ip_model::{
    build_ip, encode_plan, extract_plan, parse_solution, validate_plan, write_text, IpInstance, PlanningProblem,
    TeamPlan,
};
use search::{Budget, Outcome, Search};

pub const DEFAULT_NODE_LIMIT: u64 = 2_000_000;

/// How an external solver is launched: `program args... <instance> <solution>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Also solve with the built-in backend and require equal optima.
    #[serde(default)]
    pub cross_check: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    BuiltIn,
    External(ExternalCommand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub time_limit_s: f64,
    pub backend: Backend,
    /// Ignore the wall clock and stop only on the node budget, so results do
    /// not depend on machine speed.
    pub deterministic: bool,
    pub node_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { time_limit_s: 60.0, backend: Backend::BuiltIn, deterministic: true, node_limit: DEFAULT_NODE_LIMIT }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit_s > 0.0) {
            return domain(format!("time limit must be positive, got {}", self.time_limit_s));
        }
        if self.node_limit == 0 {
            return domain("node limit must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub status: SolveStatus,
    /// Present for optimal and feasible results, and for timeouts with an incumbent.
    pub assignment: Option<Vec<bool>>,
    pub objective: Option<i64>,
    pub solve_time: Duration,
    /// Search nodes expanded by the built-in backend.
    pub nodes: u64,
}

pub trait SolverBackend {
    fn solve(&self, instance: &IpInstance, options: &SolveOptions) -> Result<SolverResult>;
}

/// The cycle-ladder search. Needs an instance built by [`build_ip`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltIn;

impl SolverBackend for BuiltIn {
    fn solve(&self, instance: &IpInstance, options: &SolveOptions) -> Result<SolverResult> {
        options.validate()?;
        let problem = instance.origin().ok_or_else(|| {
            Error::Backend("built-in solver needs an instance built from a planning problem".into())
        })?;
        let started = Instant::now();
        let limit = Duration::from_secs_f64(options.time_limit_s);
        let deadline = (!options.deterministic).then(|| started + limit);
        let mut search = Search::new(problem, Budget::new(options.node_limit, deadline));
        let outcome = search.run(&problem.start.sensor_cells, &problem.start.station_cells);
        let solve_time = started.elapsed();
        let nodes = search.budget.nodes;
        let (status, plan) = match outcome {
            Outcome::Found { plan, proven } => {
                (if proven { SolveStatus::Optimal } else { SolveStatus::Feasible }, Some(plan))
            }
            Outcome::Infeasible { proven: true } => (SolveStatus::Infeasible, None),
            Outcome::Infeasible { proven: false } => (SolveStatus::Timeout, None),
            Outcome::Exhausted { incumbent } => (SolveStatus::Timeout, incumbent),
        };
        let assignment = match &plan {
            Some(p) => {
                let values = encode_plan(instance, p)?;
                let bad = instance.violated_rows(&values);
                if !bad.is_empty() {
                    return Err(Error::InvalidPlan(format!(
                        "built-in plan violates {} rows, first {:?}",
                        bad.len(),
                        instance.constraints[bad[0]].kind
                    )));
                }
                Some(values)
            }
            None => None,
        };
        let objective = assignment.as_ref().map(|v| instance.objective_value(v));
        Ok(SolverResult { status, assignment, objective, solve_time, nodes })
    }
}

static SCRATCH: AtomicU64 = AtomicU64::new(0);

/// Runs an external program on the text export and re-checks what it returns.
#[derive(Debug, Clone)]
pub struct External(pub ExternalCommand);

impl SolverBackend for External {
    fn solve(&self, instance: &IpInstance, options: &SolveOptions) -> Result<SolverResult> {
        options.validate()?;
        let cmd = &self.0;
        let dir: PathBuf = std::env::temp_dir().join(format!(
            "spatial-bandit-{}-{}",
            std::process::id(),
            SCRATCH.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir)?;
        let inst_path = dir.join("instance.bip");
        let sol_path = dir.join("solution.sol");
        std::fs::write(&inst_path, write_text(instance))?;
        let started = Instant::now();
        let output = Command::new(&cmd.program).args(&cmd.args).arg(&inst_path).arg(&sol_path).output();
        let solve_time = started.elapsed();
        let result = (|| {
            let output = output.map_err(|e| Error::Backend(format!("cannot run {}: {e}", cmd.program)))?;
            if !output.status.success() {
                return Err(Error::Backend(format!(
                    "{} exited with {}: {}",
                    cmd.program,
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                )));
            }
            let text = std::fs::read_to_string(&sol_path)
                .map_err(|e| Error::Backend(format!("no solution file from {}: {e}", cmd.program)))?;
            parse_solution(&text, instance.num_vars)
        })();
        let _ = std::fs::remove_dir_all(&dir);
        let sol = result?;

        let status = match sol.status.as_deref() {
            None | Some("optimal") => SolveStatus::Optimal,
            Some("feasible") => SolveStatus::Feasible,
            Some("infeasible") => SolveStatus::Infeasible,
            Some("timeout") => SolveStatus::Timeout,
            Some(other) => return Err(Error::Backend(format!("unknown solution status '{other}'"))),
        };
        let any_on = sol.values.iter().any(|&v| v);
        let assignment = if status == SolveStatus::Infeasible || (status == SolveStatus::Timeout && !any_on) {
            None
        } else {
            let bad = instance.violated_rows(&sol.values);
            if !bad.is_empty() {
                return Err(Error::Backend(format!("external solution violates {} rows", bad.len())));
            }
            if let Some(problem) = instance.origin() {
                let plan = extract_plan(instance, &sol.values)?;
                let violations = validate_plan(&plan, problem);
                if let Some(v) = violations.first() {
                    return Err(Error::Backend(format!("external plan rejected: {v}")));
                }
            }
            Some(sol.values)
        };
        let objective = assignment.as_ref().map(|v| instance.objective_value(v));
        if cmd.cross_check && status == SolveStatus::Optimal && instance.origin().is_some() {
            let reference = BuiltIn.solve(instance, options)?;
            if reference.status == SolveStatus::Optimal && reference.objective != objective {
                return Err(Error::Backend(format!(
                    "external optimum {objective:?} differs from built-in optimum {:?}",
                    reference.objective
                )));
            }
        }
        Ok(SolverResult { status, assignment, objective, solve_time, nodes: 0 })
    }
}

/// Solves with the backend named in `options`.
pub fn solve(instance: &IpInstance, options: &SolveOptions) -> Result<SolverResult> {
    match &options.backend {
        Backend::BuiltIn => BuiltIn.solve(instance, options),
        Backend::External(cmd) => External(cmd.clone()).solve(instance, options),
    }
}

/// A validated plan together with the raw solver result.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: TeamPlan,
    pub result: SolverResult,
}

/// Builds, solves and extracts a plan, failing on infeasibility and on any
/// validation violation.
pub fn plan(problem: &PlanningProblem, options: &SolveOptions) -> Result<PlanOutcome> {
    let instance = build_ip(problem)?;
    let result = solve(&instance, options)?;
    let Some(values) = &result.assignment else {
        return Err(Error::Infeasible(match result.status {
            SolveStatus::Timeout => "no plan found within the search budget".into(),
            _ => format!(
                "goals cannot be covered within {} cycles",
                problem.team.k_max_cycles
            ),
        }));
    };
    let plan = extract_plan(&instance, values)?;
    if let Some(v) = validate_plan(&plan, problem).first() {
        return Err(Error::InvalidPlan(v.to_string()));
    }
    Ok(PlanOutcome { plan, result })
}

/// Fewest sensing cycles that cover the goals of `problem`.
pub fn min_cycles(problem: &PlanningProblem, options: &SolveOptions) -> Result<usize> {
    Ok(plan(problem, options)?.plan.cycles_used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{CellIndex, GridSpec, Scenario, StationRegion, TeamConfig, TeamState};
    use std::collections::{BTreeMap, BTreeSet};
    use std::sync::Arc;

    fn open(rows: usize, cols: usize, obstacles: &[usize]) -> Arc<Scenario> {
        let grid = GridSpec::new(rows, cols).unwrap();
        let obs: BTreeSet<CellIndex> = obstacles.iter().map(|&i| CellIndex(i)).collect();
        let mu: BTreeMap<_, _> =
            (0..rows * cols).map(CellIndex).filter(|c| !obs.contains(c)).map(|c| (c, 0.3)).collect();
        Arc::new(Scenario::new(grid, obs, StationRegion::All, mu, 0.5, 0.05, 0.1, false).unwrap())
    }

    fn problem(
        s: Arc<Scenario>,
        team: TeamConfig,
        sensors: &[usize],
        stations: &[usize],
        goals: &[usize],
    ) -> PlanningProblem {
        let start = TeamState {
            sensor_cells: sensors.iter().map(|&c| CellIndex(c)).collect(),
            station_cells: stations.iter().map(|&c| CellIndex(c)).collect(),
        };
        PlanningProblem::new(s, team, start, goals.iter().map(|&g| CellIndex(g)).collect()).unwrap()
    }

    fn team(nd: usize, nc: usize, td: usize, tc: usize, k: usize) -> TeamConfig {
        TeamConfig { n_sensors: nd, n_stations: nc, t_d: td, t_c: tc, k_max_cycles: k, charger_cap: None }
    }

    #[test]
    fn line_instance_solves_in_one_cycle() {
        let p = problem(open(1, 3, &[]), team(1, 1, 3, 1, 2), &[0], &[0], &[1]);
        let inst = build_ip(&p).unwrap();
        let r = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(1));
        let plan = extract_plan(&inst, r.assignment.as_ref().unwrap()).unwrap();
        assert_eq!(plan.sensor_paths[0], vec![vec![CellIndex(0), CellIndex(1), CellIndex(0)]]);
    }

    #[test]
    fn empty_goals_need_one_cycle() {
        let p = problem(open(3, 3, &[]), team(2, 1, 4, 2, 3), &[0, 0], &[0], &[]);
        assert_eq!(min_cycles(&p, &SolveOptions::default()).unwrap(), 1);
    }

    #[test]
    fn far_goal_needs_station_to_drive() {
        // Goal in the far corner of 4x4; a 2-move cycle cannot reach it from
        // the corner dock, so the station has to move first.
        let s = open(4, 4, &[]);
        let one = problem(s.clone(), team(1, 1, 3, 2, 1), &[0], &[0], &[15]);
        let r = solve(&build_ip(&one).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        let more = problem(s, team(1, 1, 3, 2, 4), &[0], &[0], &[15]);
        let cycles = min_cycles(&more, &SolveOptions::default()).unwrap();
        // Reaching a goal three cells out needs the dock within one cell of it
        // after the second cycle.
        assert_eq!(cycles, 3);
    }

    #[test]
    fn walled_off_goal_is_infeasible() {
        // Column 1 blocked: cell 2 unreachable from cell 0 on a 3x3 grid.
        let p = problem(open(3, 3, &[1, 4, 7]), team(1, 1, 6, 2, 3), &[0], &[0], &[2]);
        assert!(matches!(min_cycles(&p, &SolveOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn two_sensors_on_one_dock_must_split_mid_cycle() {
        // A 1x2 strip with T_d = 3 forces both sensors through one middle step;
        // only one of them can stay on the dock.
        let p = problem(open(1, 2, &[]), team(2, 1, 3, 1, 2), &[0, 0], &[0], &[1]);
        let out = plan(&p, &SolveOptions::default()).unwrap();
        assert_eq!(out.plan.cycles_used, 1);
        let mid: Vec<CellIndex> = out.plan.sensor_paths.iter().map(|p| p[0][1]).collect();
        assert_ne!(mid[0], mid[1]);
        let p3 = problem(open(1, 1, &[]), team(2, 1, 3, 1, 2), &[0, 0], &[0], &[]);
        assert!(min_cycles(&p3, &SolveOptions::default()).is_err());
    }

    #[test]
    fn diagonal_goals_around_the_dock() {
        // Both sensors can end on cell 8 after one cycle: 12-6-7-8 and 12-16-12-8.
        let s = open(5, 5, &[]);
        let p = problem(s.clone(), team(2, 1, 4, 2, 3), &[12, 12], &[12], &[6, 8, 16]);
        assert_eq!(min_cycles(&p, &SolveOptions::default()).unwrap(), 1);
        let p = problem(s, team(2, 1, 4, 2, 3), &[12, 12], &[12], &[6, 8, 16, 18]);
        assert_eq!(min_cycles(&p, &SolveOptions::default()).unwrap(), 2);
    }

    #[test]
    fn charger_cap_is_respected() {
        let s = open(3, 3, &[]);
        let mut t = team(2, 2, 4, 2, 2);
        t.charger_cap = Some(1);
        let p = problem(s, t, &[0, 2], &[0, 2], &[4]);
        let out = plan(&p, &SolveOptions::default()).unwrap();
        let ends: Vec<CellIndex> = out.plan.sensor_paths.iter().map(|p| p[0][3]).collect();
        assert_ne!(ends[0], ends[1]);
    }

    #[test]
    fn tiny_node_budget_times_out() {
        let s = open(6, 6, &[]);
        let p = problem(s, team(2, 1, 6, 3, 4), &[0, 0], &[0], &[35, 5, 30, 20]);
        let opts = SolveOptions { node_limit: 3, ..SolveOptions::default() };
        let r = solve(&build_ip(&p).unwrap(), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Timeout);
    }

    #[test]
    fn solve_is_deterministic() {
        let s = open(5, 5, &[7]);
        let p = problem(s, team(3, 2, 6, 3, 3), &[0, 0, 1], &[0, 1], &[24, 4, 20, 12]);
        let inst = build_ip(&p).unwrap();
        let a = solve(&inst, &SolveOptions::default()).unwrap();
        let b = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn imported_instance_needs_external_backend() {
        let p = problem(open(1, 3, &[]), team(1, 1, 3, 1, 1), &[0], &[0], &[1]);
        let inst = crate::ip_model::parse_text(&write_text(&build_ip(&p).unwrap())).unwrap();
        assert!(matches!(solve(&inst, &SolveOptions::default()), Err(Error::Backend(_))));
    }

    #[cfg(unix)]
    #[test]
    fn external_backend_result_is_revalidated() {
        let p = problem(open(1, 3, &[]), team(1, 1, 3, 1, 2), &[0], &[0], &[1]);
        let inst = build_ip(&p).unwrap();
        let good = solve(&inst, &SolveOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sol = dir.path().join("stored.sol");
        let file = crate::ip_model::SolutionFile { status: Some("optimal".into()), values: good.assignment.unwrap() };
        std::fs::write(&sol, file.to_text()).unwrap();
        let ext = |source: &std::path::Path, cross_check| SolveOptions {
            backend: Backend::External(ExternalCommand {
                program: "sh".into(),
                args: vec!["-c".into(), format!("cp {} \"$2\"", source.display()), "solver".into()],
                cross_check,
            }),
            ..SolveOptions::default()
        };
        let r = solve(&inst, &ext(&sol, true)).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(1));

        let bogus = dir.path().join("bogus.sol");
        std::fs::write(&bogus, "status optimal\n0 1\n").unwrap();
        assert!(matches!(solve(&inst, &ext(&bogus, false)), Err(Error::Backend(_))));
    }
}
