//! The binary program for one epoch's routing problem: model construction,
//! plan extraction from 0/1 assignments, and an independent plan validator.
//!
//! Variables are `x(i,j,k,l)` (sensor `i` at cell `l` on step `j` of cycle
//! `k`), `y(a,b,k,l)` (station `a`, step `b`) and `lambda(k)` (cycle `k` is
//! used). Ids are dense and ordered: the lambda block, then `x` in
//! `(i,j,k,l)` order, then `y` in `(a,b,k,l)` order. Variables that can never
//! be 1 (sensors on obstacles, stations off the admissible region) are left out
//! unless pruning is disabled, in which case explicit rows pin them to zero.

mod text;
mod validate;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::environment::{CellIndex, Scenario, TeamConfig, TeamState};
use crate::error::{domain, Error, Result};

pub use text::{parse_solution, parse_text, write_text, SolutionFile};
pub use validate::{validate_plan, Agent, Violation};

/// One epoch's routing request.
#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub scenario: Arc<Scenario>,
    pub team: TeamConfig,
    pub start: TeamState,
    pub goals: BTreeSet<CellIndex>,
}

impl PlanningProblem {
    pub fn new(
        scenario: Arc<Scenario>,
        team: TeamConfig,
        start: TeamState,
        goals: BTreeSet<CellIndex>,
    ) -> Result<Self> {
        team.validate()?;
        start.validate(&scenario, &team)?;
        if let Some(g) = goals.iter().find(|g| !scenario.is_candidate(**g)) {
            return domain(format!("goal {g} is not a candidate cell"));
        }
        Ok(Self { scenario, team, start, goals })
    }

    /// Same problem with a different cycle cap.
    pub fn with_cycle_cap(&self, k: usize) -> Self {
        let mut p = self.clone();
        p.team.k_max_cycles = k;
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Meaning of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarTag {
    Lambda { k: usize },
    X { i: usize, j: usize, k: usize, l: CellIndex },
    Y { a: usize, b: usize, k: usize, l: CellIndex },
}

impl fmt::Display for VarTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarTag::Lambda { k } => write!(f, "lambda({k})"),
            VarTag::X { i, j, k, l } => write!(f, "x({i},{j},{k},{l})"),
            VarTag::Y { a, b, k, l } => write!(f, "y({a},{b},{k},{l})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Relation::Le => "le",
            Relation::Eq => "eq",
            Relation::Ge => "ge",
        }
    }
}

/// Which family of the model a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    InitialPlacement,
    SensorMove,
    StationMove,
    StationCollision,
    SensorCollision,
    SensorOccupancy,
    StationOccupancy,
    CycleOrder,
    FirstCycle,
    Coverage,
    Forbidden,
    SensorContinuity,
    StationContinuity,
    Rendezvous,
    ChargerCap,
    /// Rows read from a text file carry no family information.
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub terms: Vec<(VarId, i64)>,
    pub relation: Relation,
    pub rhs: i64,
    pub kind: RowKind,
}

impl Constraint {
    pub fn lhs(&self, values: &[bool]) -> i64 {
        self.terms.iter().filter(|(v, _)| values[v.0]).map(|(_, c)| c).sum()
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        self.relation.holds(self.lhs(values), self.rhs)
    }
}

/// Model construction switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOptions {
    /// Omit variables that the visit constraints force to zero.
    pub prune_forbidden: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { prune_forbidden: true }
    }
}

const ABSENT: u32 = u32::MAX;

/// Dense lookup from `(agent, step, cycle, cell)` to variable id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarIndex {
    n_sensors: usize,
    n_stations: usize,
    t_d: usize,
    t_c: usize,
    k: usize,
    n_cells: usize,
    x: Vec<u32>,
    y: Vec<u32>,
    omitted: usize,
}

impl VarIndex {
    fn x_slot(&self, i: usize, j: usize, k: usize, l: CellIndex) -> usize {
        ((i * self.t_d + j) * self.k + k) * self.n_cells + l.0
    }

    fn y_slot(&self, a: usize, b: usize, k: usize, l: CellIndex) -> usize {
        ((a * self.t_c + b) * self.k + k) * self.n_cells + l.0
    }

    pub fn lambda(&self, k: usize) -> VarId {
        debug_assert!(k < self.k);
        VarId(k)
    }

    pub fn x(&self, i: usize, j: usize, k: usize, l: CellIndex) -> Option<VarId> {
        let id = self.x[self.x_slot(i, j, k, l)];
        (id != ABSENT).then_some(VarId(id as usize))
    }

    pub fn y(&self, a: usize, b: usize, k: usize, l: CellIndex) -> Option<VarId> {
        let id = self.y[self.y_slot(a, b, k, l)];
        (id != ABSENT).then_some(VarId(id as usize))
    }

    pub fn cycles(&self) -> usize {
        self.k
    }

    /// Number of variables the full model would have without pruning.
    pub fn unpruned_count(&self) -> usize {
        self.k * (1 + self.n_cells * (self.n_sensors * self.t_d + self.n_stations * self.t_c))
    }

    /// Variables left out of the instance by pruning.
    pub fn omitted(&self) -> usize {
        self.omitted
    }
}

/// A 0/1 program in canonical sparse form.
#[derive(Debug, Clone)]
pub struct IpInstance {
    pub num_vars: usize,
    /// Minimized.
    pub objective: Vec<(VarId, i64)>,
    pub constraints: Vec<Constraint>,
    /// Variable meanings, when known.
    pub tags: Vec<Option<VarTag>>,
    var_index: Option<VarIndex>,
    origin: Option<PlanningProblem>,
}

impl IpInstance {
    /// Structure-free instance, as read from a text file.
    pub fn from_parts(
        num_vars: usize,
        objective: Vec<(VarId, i64)>,
        constraints: Vec<Constraint>,
        tags: Vec<Option<VarTag>>,
    ) -> Result<Self> {
        let in_range = |v: &VarId| v.0 < num_vars;
        if !objective.iter().all(|(v, _)| in_range(v))
            || !constraints.iter().all(|c| c.terms.iter().all(|(v, _)| in_range(v)))
        {
            return domain("variable id out of range");
        }
        if tags.len() != num_vars {
            return domain("tag table length differs from variable count");
        }
        Ok(Self { num_vars, objective, constraints, tags, var_index: None, origin: None })
    }

    pub fn var_index(&self) -> Option<&VarIndex> {
        self.var_index.as_ref()
    }

    /// The planning problem this instance was built from, if any.
    pub fn origin(&self) -> Option<&PlanningProblem> {
        self.origin.as_ref()
    }

    pub fn objective_value(&self, values: &[bool]) -> i64 {
        self.objective.iter().filter(|(v, _)| values[v.0]).map(|(_, c)| c).sum()
    }

    /// Indices of rows the assignment violates.
    pub fn violated_rows(&self, values: &[bool]) -> Vec<usize> {
        if values.len() != self.num_vars {
            return (0..self.constraints.len()).collect();
        }
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_satisfied(values))
            .map(|(r, _)| r)
            .collect()
    }

    pub fn count_rows(&self, kind: RowKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }
}

/// Routes of every agent for every used cycle.
///
/// `sensor_paths[i][k]` has `t_d` cells, `station_paths[a][k]` has `t_c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamPlan {
    pub cycles_used: usize,
    pub sensor_paths: Vec<Vec<Vec<CellIndex>>>,
    pub station_paths: Vec<Vec<Vec<CellIndex>>>,
}

impl TeamPlan {
    /// Team position after the last cycle.
    pub fn final_state(&self) -> TeamState {
        let last = |paths: &Vec<Vec<Vec<CellIndex>>>| {
            paths.iter().map(|p| *p.last().and_then(|c| c.last()).expect("nonempty path")).collect()
        };
        TeamState { sensor_cells: last(&self.sensor_paths), station_cells: last(&self.station_paths) }
    }

    /// Sensor positions of cycle `k` grouped by step: `steps[j][i]`.
    pub fn sensor_steps(&self, k: usize) -> Vec<Vec<CellIndex>> {
        steps_of(&self.sensor_paths, k)
    }

    pub fn station_steps(&self, k: usize) -> Vec<Vec<CellIndex>> {
        steps_of(&self.station_paths, k)
    }

    /// Replaces cycle `k` of every sensor from step-major positions.
    pub fn set_sensor_steps(&mut self, k: usize, steps: &[Vec<CellIndex>]) {
        set_steps(&mut self.sensor_paths, k, steps)
    }

    pub fn set_station_steps(&mut self, k: usize, steps: &[Vec<CellIndex>]) {
        set_steps(&mut self.station_paths, k, steps)
    }
}

fn steps_of(paths: &[Vec<Vec<CellIndex>>], k: usize) -> Vec<Vec<CellIndex>> {
    let len = paths.first().map_or(0, |p| p[k].len());
    (0..len).map(|j| paths.iter().map(|p| p[k][j]).collect()).collect()
}

fn set_steps(paths: &mut [Vec<Vec<CellIndex>>], k: usize, steps: &[Vec<CellIndex>]) {
    for (agent, path) in paths.iter_mut().enumerate() {
        path[k] = steps.iter().map(|s| s[agent]).collect();
    }
}

struct Builder {
    rows: Vec<Constraint>,
}

impl Builder {
    fn push(&mut self, kind: RowKind, terms: Vec<(VarId, i64)>, relation: Relation, rhs: i64) {
        self.rows.push(Constraint { terms, relation, rhs, kind });
    }
}

/// Builds the program for `problem` with default options.
pub fn build_ip(problem: &PlanningProblem) -> Result<IpInstance> {
    build_ip_with(problem, ModelOptions::default())
}

pub fn build_ip_with(problem: &PlanningProblem, opts: ModelOptions) -> Result<IpInstance> {
    let team = &problem.team;
    team.validate()?;
    let s = &*problem.scenario;
    let n = s.cell_count();
    let (nd, nc, td, tc, kk) = (team.n_sensors, team.n_stations, team.t_d, team.t_c, team.k_max_cycles);
    if kk < 1 {
        return domain("cycle cap K must be at least 1");
    }
    let cells: Vec<CellIndex> = (0..n).map(CellIndex).collect();
    let sensor_ok = |l: CellIndex| !s.is_obstacle(l);
    let station_ok = |l: CellIndex| s.is_admissible(l);

    let mut tags: Vec<Option<VarTag>> = (0..kk).map(|k| Some(VarTag::Lambda { k })).collect();
    let mut idx = VarIndex {
        n_sensors: nd,
        n_stations: nc,
        t_d: td,
        t_c: tc,
        k: kk,
        n_cells: n,
        x: vec![ABSENT; nd * td * kk * n],
        y: vec![ABSENT; nc * tc * kk * n],
        omitted: 0,
    };
    let mut forbidden = Vec::new();
    for i in 0..nd {
        for j in 0..td {
            for k in 0..kk {
                for &l in &cells {
                    if opts.prune_forbidden && !sensor_ok(l) {
                        idx.omitted += 1;
                        continue;
                    }
                    let slot = idx.x_slot(i, j, k, l);
                    idx.x[slot] = tags.len() as u32;
                    if !sensor_ok(l) {
                        forbidden.push(VarId(tags.len()));
                    }
                    tags.push(Some(VarTag::X { i, j, k, l }));
                }
            }
        }
    }
    for a in 0..nc {
        for b in 0..tc {
            for k in 0..kk {
                for &l in &cells {
                    if opts.prune_forbidden && !station_ok(l) {
                        idx.omitted += 1;
                        continue;
                    }
                    let slot = idx.y_slot(a, b, k, l);
                    idx.y[slot] = tags.len() as u32;
                    if !station_ok(l) {
                        forbidden.push(VarId(tags.len()));
                    }
                    tags.push(Some(VarTag::Y { a, b, k, l }));
                }
            }
        }
    }

    let mut bld = Builder { rows: Vec::new() };
    let lam = |k: usize| VarId(k);

    // Initial placement.
    for (i, &l) in problem.start.sensor_cells.iter().enumerate() {
        let v = idx.x(i, 0, 0, l).ok_or_else(|| Error::Domain(format!("sensor {i} starts on obstacle {l}")))?;
        bld.push(RowKind::InitialPlacement, vec![(v, 1)], Relation::Eq, 1);
    }
    for (a, &l) in problem.start.station_cells.iter().enumerate() {
        let v = idx.y(a, 0, 0, l).ok_or_else(|| Error::Domain(format!("station {a} starts off region at {l}")))?;
        bld.push(RowKind::InitialPlacement, vec![(v, 1)], Relation::Eq, 1);
    }

    // Moves to a neighbor or stay.
    let sensor_moves = |l: CellIndex| -> Vec<CellIndex> {
        let mut m: Vec<CellIndex> = cells_around(s, l, false);
        m.retain(|c| !opts.prune_forbidden || sensor_ok(*c));
        m
    };
    let station_moves = |l: CellIndex| -> Vec<CellIndex> {
        let mut m: Vec<CellIndex> = cells_around(s, l, true);
        m.retain(|c| !opts.prune_forbidden || station_ok(*c));
        m
    };
    for i in 0..nd {
        for k in 0..kk {
            for j in 1..td {
                for &l in &cells {
                    let Some(v) = idx.x(i, j, k, l) else { continue };
                    let mut terms = vec![(v, 1)];
                    terms.extend(sensor_moves(l).into_iter().filter_map(|m| idx.x(i, j - 1, k, m)).map(|u| (u, -1)));
                    bld.push(RowKind::SensorMove, terms, Relation::Le, 0);
                }
            }
        }
    }
    for a in 0..nc {
        for k in 0..kk {
            for b in 1..tc {
                for &l in &cells {
                    let Some(v) = idx.y(a, b, k, l) else { continue };
                    let mut terms = vec![(v, 1)];
                    terms.extend(station_moves(l).into_iter().filter_map(|m| idx.y(a, b - 1, k, m)).map(|u| (u, -1)));
                    bld.push(RowKind::StationMove, terms, Relation::Le, 0);
                }
            }
        }
    }

    // Vertex collisions; single-agent rows are vacuous and skipped.
    if nc >= 2 {
        for k in 0..kk {
            for b in 0..tc {
                for &l in &cells {
                    let terms: Vec<_> = (0..nc).filter_map(|a| idx.y(a, b, k, l)).map(|v| (v, 1)).collect();
                    if terms.len() >= 2 {
                        bld.push(RowKind::StationCollision, terms, Relation::Le, 1);
                    }
                }
            }
        }
    }
    if nd >= 2 && td >= 3 {
        for k in 0..kk {
            for j in 1..td - 1 {
                for &l in &cells {
                    let terms: Vec<_> = (0..nd).filter_map(|i| idx.x(i, j, k, l)).map(|v| (v, 1)).collect();
                    if terms.len() >= 2 {
                        bld.push(RowKind::SensorCollision, terms, Relation::Le, 1);
                    }
                }
            }
        }
    }

    // One cell per agent per step in used cycles, none otherwise.
    for i in 0..nd {
        for j in 0..td {
            for k in 0..kk {
                let mut terms: Vec<_> = cells.iter().filter_map(|&l| idx.x(i, j, k, l)).map(|v| (v, 1)).collect();
                terms.push((lam(k), -1));
                bld.push(RowKind::SensorOccupancy, terms, Relation::Eq, 0);
            }
        }
    }
    for a in 0..nc {
        for b in 0..tc {
            for k in 0..kk {
                let mut terms: Vec<_> = cells.iter().filter_map(|&l| idx.y(a, b, k, l)).map(|v| (v, 1)).collect();
                terms.push((lam(k), -1));
                bld.push(RowKind::StationOccupancy, terms, Relation::Eq, 0);
            }
        }
    }
    for k in 0..kk.saturating_sub(1) {
        bld.push(RowKind::CycleOrder, vec![(lam(k), 1), (lam(k + 1), -1)], Relation::Ge, 0);
    }
    bld.push(RowKind::FirstCycle, vec![(lam(0), 1)], Relation::Eq, 1);

    // Goal coverage.
    for &g in &problem.goals {
        let mut terms = Vec::new();
        for i in 0..nd {
            for j in 0..td {
                for k in 0..kk {
                    if let Some(v) = idx.x(i, j, k, g) {
                        terms.push((v, 1));
                    }
                }
            }
        }
        bld.push(RowKind::Coverage, terms, Relation::Ge, 1);
    }
    for v in forbidden {
        bld.push(RowKind::Forbidden, vec![(v, 1)], Relation::Eq, 0);
    }

    // Continuity across cycle boundaries, active only when cycle k+1 is used.
    for k in 0..kk.saturating_sub(1) {
        for i in 0..nd {
            for &l in &cells {
                let (Some(next), Some(last)) = (idx.x(i, 0, k + 1, l), idx.x(i, td - 1, k, l)) else { continue };
                bld.push(RowKind::SensorContinuity, vec![(next, 1), (last, -1), (lam(k + 1), 2)], Relation::Le, 2);
                bld.push(RowKind::SensorContinuity, vec![(next, -1), (last, 1), (lam(k + 1), 2)], Relation::Le, 2);
            }
        }
        for a in 0..nc {
            for &l in &cells {
                let (Some(next), Some(last)) = (idx.y(a, 0, k + 1, l), idx.y(a, tc - 1, k, l)) else { continue };
                bld.push(RowKind::StationContinuity, vec![(next, 1), (last, -1), (lam(k + 1), 2)], Relation::Le, 2);
                bld.push(RowKind::StationContinuity, vec![(next, -1), (last, 1), (lam(k + 1), 2)], Relation::Le, 2);
            }
        }
    }

    // Sensors start and end each cycle on a station.
    for k in 0..kk {
        for i in 0..nd {
            for &l in &cells {
                for (j, b) in [(0, 0), (td - 1, tc - 1)] {
                    let Some(v) = idx.x(i, j, k, l) else { continue };
                    let mut terms = vec![(v, 1)];
                    terms.extend((0..nc).filter_map(|a| idx.y(a, b, k, l)).map(|u| (u, -1)));
                    bld.push(RowKind::Rendezvous, terms, Relation::Le, 0);
                }
            }
        }
    }

    if let Some(cap) = team.charger_cap {
        if cap < nd {
            for k in 0..kk {
                for &l in &cells {
                    for j in [0, td - 1] {
                        let terms: Vec<_> = (0..nd).filter_map(|i| idx.x(i, j, k, l)).map(|v| (v, 1)).collect();
                        if terms.len() > cap {
                            bld.push(RowKind::ChargerCap, terms, Relation::Le, cap as i64);
                        }
                    }
                }
            }
        }
    }

    Ok(IpInstance {
        num_vars: tags.len(),
        objective: (0..kk).map(|k| (lam(k), 1)).collect(),
        constraints: bld.rows,
        tags,
        var_index: Some(idx),
        origin: Some(problem.clone()),
    })
}

/// `l` together with the cells one king move away, optionally restricted to
/// the station region. Obstacles are kept; callers filter.
fn cells_around(s: &Scenario, l: CellIndex, stations: bool) -> Vec<CellIndex> {
    let g = s.grid();
    let (r, c) = g.coords(l);
    let mut out = Vec::with_capacity(9);
    for nr in r.saturating_sub(1)..=(r + 1).min(g.rows - 1) {
        for ncol in c.saturating_sub(1)..=(c + 1).min(g.cols - 1) {
            let m = g.cell(nr, ncol);
            if !stations || s.is_admissible(m) || m == l {
                out.push(m);
            }
        }
    }
    out
}

/// Reads the plan encoded by a feasible 0/1 assignment.
pub fn extract_plan(instance: &IpInstance, values: &[bool]) -> Result<TeamPlan> {
    let idx = instance
        .var_index
        .as_ref()
        .ok_or_else(|| Error::Extraction("instance carries no variable index".into()))?;
    if values.len() != instance.num_vars {
        return Err(Error::Extraction(format!(
            "assignment has {} values for {} variables",
            values.len(),
            instance.num_vars
        )));
    }
    let active: Vec<bool> = (0..idx.k).map(|k| values[idx.lambda(k).0]).collect();
    if !active[0] {
        return Err(Error::Extraction("lambda(0) is zero".into()));
    }
    let cycles_used = active.iter().take_while(|&&a| a).count();
    if active[cycles_used..].iter().any(|&a| a) {
        return Err(Error::Extraction("used cycles are not a prefix".into()));
    }
    let cells: Vec<CellIndex> = (0..idx.n_cells).map(CellIndex).collect();
    let pick = |lookup: &dyn Fn(CellIndex) -> Option<VarId>, what: String, want: bool| -> Result<Option<CellIndex>> {
        let on: Vec<CellIndex> = cells.iter().copied().filter(|&l| lookup(l).is_some_and(|v| values[v.0])).collect();
        match (want, on.as_slice()) {
            (true, [one]) => Ok(Some(*one)),
            (false, []) => Ok(None),
            _ => Err(Error::Extraction(format!("{what} occupies {} cells", on.len()))),
        }
    };
    let mut sensor_paths = vec![Vec::with_capacity(cycles_used); idx.n_sensors];
    for (i, paths) in sensor_paths.iter_mut().enumerate() {
        for k in 0..idx.k {
            let mut path = Vec::new();
            for j in 0..idx.t_d {
                let cell = pick(&|l| idx.x(i, j, k, l), format!("sensor {i} at step {j} of cycle {k}"), active[k])?;
                path.extend(cell);
            }
            if active[k] {
                paths.push(path);
            }
        }
    }
    let mut station_paths = vec![Vec::with_capacity(cycles_used); idx.n_stations];
    for (a, paths) in station_paths.iter_mut().enumerate() {
        for k in 0..idx.k {
            let mut path = Vec::new();
            for b in 0..idx.t_c {
                let cell = pick(&|l| idx.y(a, b, k, l), format!("station {a} at step {b} of cycle {k}"), active[k])?;
                path.extend(cell);
            }
            if active[k] {
                paths.push(path);
            }
        }
    }
    Ok(TeamPlan { cycles_used, sensor_paths, station_paths })
}

/// Inverse of [`extract_plan`]: the assignment that encodes `plan`.
pub fn encode_plan(instance: &IpInstance, plan: &TeamPlan) -> Result<Vec<bool>> {
    let idx = instance
        .var_index
        .as_ref()
        .ok_or_else(|| Error::Domain("instance carries no variable index".into()))?;
    if plan.cycles_used == 0 || plan.cycles_used > idx.k {
        return domain(format!("plan uses {} cycles, model allows 1..={}", plan.cycles_used, idx.k));
    }
    let mut values = vec![false; instance.num_vars];
    for k in 0..plan.cycles_used {
        values[idx.lambda(k).0] = true;
    }
    let missing = |what: &str, l: CellIndex| Error::Domain(format!("{what} on cell {l} has no variable"));
    for (i, paths) in plan.sensor_paths.iter().enumerate() {
        for (k, path) in paths.iter().enumerate() {
            for (j, &l) in path.iter().enumerate() {
                values[idx.x(i, j, k, l).ok_or_else(|| missing("sensor", l))?.0] = true;
            }
        }
    }
    for (a, paths) in plan.station_paths.iter().enumerate() {
        for (k, path) in paths.iter().enumerate() {
            for (b, &l) in path.iter().enumerate() {
                values[idx.y(a, b, k, l).ok_or_else(|| missing("station", l))?.0] = true;
            }
        }
    }
    Ok(values)
}
