//! Direct, encoding-free feasibility check of a [`TeamPlan`].

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{PlanningProblem, TeamPlan};
use crate::environment::CellIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Agent {
    Sensor(usize),
    Station(usize),
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agent::Sensor(i) => write!(f, "sensor {i}"),
            Agent::Station(a) => write!(f, "station {a}"),
        }
    }
}

/// One reason a plan is infeasible. `k` is the cycle, `j` the step in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    CycleCount { used: usize, cap: usize },
    AgentCount { agent: Agent, expected: usize, got: usize },
    CycleMissing { agent: Agent, expected: usize, got: usize },
    PathLength { agent: Agent, k: usize, expected: usize, got: usize },
    OutOfGrid { agent: Agent, k: usize, j: usize, cell: CellIndex },
    InitialPlacement { agent: Agent, expected: CellIndex, got: CellIndex },
    Movement { agent: Agent, k: usize, j: usize, from: CellIndex, to: CellIndex },
    Obstacle { agent: Agent, k: usize, j: usize, cell: CellIndex },
    OffRegion { agent: Agent, k: usize, j: usize, cell: CellIndex },
    NotDocked { sensor: usize, k: usize, j: usize, cell: CellIndex },
    Continuity { agent: Agent, k: usize, from: CellIndex, to: CellIndex },
    Coverage { cell: CellIndex },
    StationCollision { k: usize, j: usize, cell: CellIndex, agents: (usize, usize) },
    SensorCollision { k: usize, j: usize, cell: CellIndex, agents: (usize, usize) },
    ChargerCap { k: usize, j: usize, cell: CellIndex, count: usize, cap: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            CycleCount { used, cap } => write!(f, "plan uses {used} cycles, allowed 1..={cap}"),
            AgentCount { agent, expected, got } => write!(f, "expected {expected} paths like {agent}, got {got}"),
            CycleMissing { agent, expected, got } => write!(f, "{agent} has {got} cycles, plan declares {expected}"),
            PathLength { agent, k, expected, got } => {
                write!(f, "{agent} cycle {k} has {got} positions, expected {expected}")
            }
            OutOfGrid { agent, k, j, cell } => write!(f, "{agent} at ({k},{j}) leaves the grid: {cell}"),
            InitialPlacement { agent, expected, got } => write!(f, "{agent} starts at {got}, expected {expected}"),
            Movement { agent, k, j, from, to } => write!(f, "{agent} jumps {from}->{to} into step {j} of cycle {k}"),
            Obstacle { agent, k, j, cell } => write!(f, "{agent} on obstacle {cell} at ({k},{j})"),
            OffRegion { agent, k, j, cell } => write!(f, "{agent} off the station region at {cell} ({k},{j})"),
            NotDocked { sensor, k, j, cell } => write!(f, "sensor {sensor} not on a station at {cell} ({k},{j})"),
            Continuity { agent, k, from, to } => write!(f, "{agent} ends cycle {k} at {from} but resumes at {to}"),
            Coverage { cell } => write!(f, "goal {cell} never visited"),
            StationCollision { k, j, cell, agents } => {
                write!(f, "stations {} and {} share {cell} at ({k},{j})", agents.0, agents.1)
            }
            SensorCollision { k, j, cell, agents } => {
                write!(f, "sensors {} and {} share {cell} at ({k},{j})", agents.0, agents.1)
            }
            ChargerCap { k, j, cell, count, cap } => {
                write!(f, "{count} sensors docked at {cell} ({k},{j}), cap {cap}")
            }
        }
    }
}

/// Lists every way `plan` breaks the routing rules for `problem`. Empty means
/// feasible.
pub fn validate_plan(plan: &TeamPlan, problem: &PlanningProblem) -> Vec<Violation> {
    use Violation::*;
    let s = &*problem.scenario;
    let g = s.grid();
    let team = &problem.team;
    let kc = plan.cycles_used;
    let mut out = Vec::new();

    if kc == 0 || kc > team.k_max_cycles {
        out.push(CycleCount { used: kc, cap: team.k_max_cycles });
    }
    if plan.sensor_paths.len() != team.n_sensors {
        out.push(AgentCount { agent: Agent::Sensor(0), expected: team.n_sensors, got: plan.sensor_paths.len() });
    }
    if plan.station_paths.len() != team.n_stations {
        out.push(AgentCount { agent: Agent::Station(0), expected: team.n_stations, got: plan.station_paths.len() });
    }
    if !out.is_empty() {
        return out;
    }

    // Shape first; later checks only look at well-formed paths.
    let mut shaped = true;
    let groups = [
        (&plan.sensor_paths, team.t_d, Agent::Sensor as fn(usize) -> Agent),
        (&plan.station_paths, team.t_c, Agent::Station as fn(usize) -> Agent),
    ];
    for (paths, len, mk) in groups {
        for (n, cycles) in paths.iter().enumerate() {
            if cycles.len() != kc {
                out.push(CycleMissing { agent: mk(n), expected: kc, got: cycles.len() });
                shaped = false;
                continue;
            }
            for (k, path) in cycles.iter().enumerate() {
                if path.len() != len {
                    out.push(PathLength { agent: mk(n), k, expected: len, got: path.len() });
                    shaped = false;
                }
                for (j, &c) in path.iter().enumerate() {
                    if !g.contains(c) {
                        out.push(OutOfGrid { agent: mk(n), k, j, cell: c });
                        shaped = false;
                    }
                }
            }
        }
    }
    if !shaped {
        return out;
    }

    for (i, &start) in problem.start.sensor_cells.iter().enumerate() {
        let got = plan.sensor_paths[i][0][0];
        if got != start {
            out.push(InitialPlacement { agent: Agent::Sensor(i), expected: start, got });
        }
    }
    for (a, &start) in problem.start.station_cells.iter().enumerate() {
        let got = plan.station_paths[a][0][0];
        if got != start {
            out.push(InitialPlacement { agent: Agent::Station(a), expected: start, got });
        }
    }

    for (i, cycles) in plan.sensor_paths.iter().enumerate() {
        let agent = Agent::Sensor(i);
        for (k, path) in cycles.iter().enumerate() {
            for (j, &c) in path.iter().enumerate() {
                if s.is_obstacle(c) {
                    out.push(Obstacle { agent, k, j, cell: c });
                }
                if j > 0 && g.chebyshev(path[j - 1], c) > 1 {
                    out.push(Movement { agent, k, j, from: path[j - 1], to: c });
                }
            }
            if k + 1 < kc && cycles[k + 1][0] != path[path.len() - 1] {
                out.push(Continuity { agent, k, from: path[path.len() - 1], to: cycles[k + 1][0] });
            }
        }
    }
    for (a, cycles) in plan.station_paths.iter().enumerate() {
        let agent = Agent::Station(a);
        for (k, path) in cycles.iter().enumerate() {
            for (j, &c) in path.iter().enumerate() {
                if s.is_obstacle(c) {
                    out.push(Obstacle { agent, k, j, cell: c });
                } else if !s.is_admissible(c) {
                    out.push(OffRegion { agent, k, j, cell: c });
                }
                if j > 0 && g.chebyshev(path[j - 1], c) > 1 {
                    out.push(Movement { agent, k, j, from: path[j - 1], to: c });
                }
            }
            if k + 1 < kc && cycles[k + 1][0] != path[path.len() - 1] {
                out.push(Continuity { agent, k, from: path[path.len() - 1], to: cycles[k + 1][0] });
            }
        }
    }

    for k in 0..kc {
        let stations_at = |b: usize| -> Vec<CellIndex> { plan.station_paths.iter().map(|p| p[k][b]).collect() };
        let first = stations_at(0);
        let last = stations_at(team.t_c - 1);
        for (i, cycles) in plan.sensor_paths.iter().enumerate() {
            let path = &cycles[k];
            if !first.contains(&path[0]) {
                out.push(NotDocked { sensor: i, k, j: 0, cell: path[0] });
            }
            let end = path[team.t_d - 1];
            if !last.contains(&end) {
                out.push(NotDocked { sensor: i, k, j: team.t_d - 1, cell: end });
            }
        }
        for b in 0..team.t_c {
            for (cell, agents) in shared_cells(&stations_at(b)) {
                out.push(StationCollision { k, j: b, cell, agents });
            }
        }
        for j in 1..team.t_d.saturating_sub(1) {
            let at: Vec<CellIndex> = plan.sensor_paths.iter().map(|p| p[k][j]).collect();
            for (cell, agents) in shared_cells(&at) {
                out.push(SensorCollision { k, j, cell, agents });
            }
        }
        if let Some(cap) = team.charger_cap {
            for j in [0, team.t_d - 1] {
                let mut count: BTreeMap<CellIndex, usize> = BTreeMap::new();
                for p in &plan.sensor_paths {
                    *count.entry(p[k][j]).or_default() += 1;
                }
                for (cell, n) in count {
                    if n > cap {
                        out.push(ChargerCap { k, j, cell, count: n, cap });
                    }
                }
            }
        }
    }

    for &goal in &problem.goals {
        let seen = plan.sensor_paths.iter().flatten().flatten().any(|&c| c == goal);
        if !seen {
            out.push(Coverage { cell: goal });
        }
    }
    out
}

/// First pair of agents sharing each cell.
fn shared_cells(cells: &[CellIndex]) -> Vec<(CellIndex, (usize, usize))> {
    let mut first: BTreeMap<CellIndex, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (n, &c) in cells.iter().enumerate() {
        match first.get(&c) {
            Some(&m) => out.push((c, (m, n))),
            None => {
                first.insert(c, n);
            }
        }
    }
    out
}
