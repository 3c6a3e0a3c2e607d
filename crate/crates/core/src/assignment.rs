//! Collision repair by linear assignment.
//!
//! Agents of one kind are interchangeable, so between two consecutive steps we
//! may re-decide which agent moves to which of the next step's cells. Solving
//! that bijection for minimum total Euclidean length removes swaps and
//! crossing diagonals while leaving every step's set of occupied cells intact.

use serde::{Deserialize, Serialize};

use crate::environment::{CellIndex, GridSpec, Scenario};
use crate::error::{domain, Error, Result};
use crate::ip_model::TeamPlan;

/// Added to the cost of a transition that is not a legal move.
pub const ILLEGAL_MOVE_PENALTY: f64 = 1e6;

const TIE_TOL: f64 = 1e-9;

/// Square matrix of finite nonnegative costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != n * n {
            return domain(format!("cost matrix needs {} entries, got {}", n * n, costs.len()));
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return domain(format!("cost {c} is not a finite nonnegative number"));
        }
        Ok(Self { n, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return domain("cost matrix must be square");
        }
        Self::new(n, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }
}

/// A perfect matching: row `i` is matched to column `perm[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total: f64,
}

/// Minimum cost of matching `rows` to `cols` (equal lengths) with the
/// shortest augmenting path method.
fn min_cost(m: &CostMatrix, rows: &[usize], cols: &[usize]) -> (f64, Vec<usize>) {
    let n = rows.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let a = |i: usize, j: usize| m.get(rows[i - 1], cols[j - 1]);
    // 1-based potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| m.get(rows[i], cols[perm[i]])).sum();
    (total, perm)
}

/// Minimum-cost perfect matching. Among optimal matchings (costs equal up to
/// a relative 1e-9) the lexicographically smallest `perm` is returned.
pub fn hungarian(m: &CostMatrix) -> Assignment {
    let n = m.n;
    let all: Vec<usize> = (0..n).collect();
    let (best, _) = min_cost(m, &all, &all);
    let tol = TIE_TOL * (1.0 + best.abs());
    let mut perm = Vec::with_capacity(n);
    let mut free: Vec<usize> = all.clone();
    let mut spent = 0.0;
    for i in 0..n {
        let rows: Vec<usize> = (i + 1..n).collect();
        let mut chosen = None;
        for (pos, &j) in free.iter().enumerate() {
            let rest: Vec<usize> = free.iter().copied().filter(|&c| c != j).collect();
            let (tail, _) = min_cost(m, &rows, &rest);
            if spent + m.get(i, j) + tail <= best + tol {
                chosen = Some((pos, j));
                break;
            }
        }
        let (pos, j) = chosen.expect("some column extends an optimal matching");
        spent += m.get(i, j);
        perm.push(j);
        free.remove(pos);
    }
    let total = (0..n).map(|i| m.get(i, perm[i])).sum();
    Assignment { perm, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictKind {
    /// Two agents in one cell at one time.
    Vertex,
    /// Two agents exchanging cells across a step.
    Swap,
    /// Straight transitions between cell centers that properly intersect.
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionConflict {
    pub kind: ConflictKind,
    pub agents: (usize, usize),
    pub cycle: usize,
    /// Step index; for transitions, the step the move starts from.
    pub step: usize,
}

impl std::fmt::Display for TransitionConflict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            ConflictKind::Vertex => "vertex",
            ConflictKind::Swap => "swap",
            ConflictKind::Crossing => "crossing",
        };
        write!(f, "{kind} conflict between agents {} and {} at cycle {} step {}", self.agents.0, self.agents.1, self.cycle, self.step)
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Whether segments `ab` and `cd` cross at a single interior point of both.
fn properly_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn check_steps(steps: &[Vec<CellIndex>]) -> Result<usize> {
    let agents = steps.first().map_or(0, |s| s.len());
    if steps.iter().any(|s| s.len() != agents) {
        return domain("every step must list the same number of agents");
    }
    Ok(agents)
}

/// Conflicts within one cycle given step-major positions `steps[j][agent]`.
/// Shared cells at the first and last step are rendezvous and not reported.
pub fn detect_conflicts(grid: GridSpec, cycle: usize, steps: &[Vec<CellIndex>]) -> Result<Vec<TransitionConflict>> {
    let agents = check_steps(steps)?;
    let t = steps.len();
    let mut out = Vec::new();
    let push = |out: &mut Vec<TransitionConflict>, kind, a, b, step| {
        out.push(TransitionConflict { kind, agents: (a, b), cycle, step })
    };
    for j in 1..t.saturating_sub(1) {
        for a in 0..agents {
            for b in a + 1..agents {
                if steps[j][a] == steps[j][b] {
                    push(&mut out, ConflictKind::Vertex, a, b, j);
                }
            }
        }
    }
    for j in 0..t.saturating_sub(1) {
        for a in 0..agents {
            for b in a + 1..agents {
                let (pa, qa) = (steps[j][a], steps[j + 1][a]);
                let (pb, qb) = (steps[j][b], steps[j + 1][b]);
                if pa != qa && pa == qb && pb == qa {
                    push(&mut out, ConflictKind::Swap, a, b, j);
                } else if properly_intersect(grid.center(pa), grid.center(qa), grid.center(pb), grid.center(qb)) {
                    push(&mut out, ConflictKind::Crossing, a, b, j);
                }
            }
        }
    }
    Ok(out)
}

/// Re-pairs agents step by step: at each step the agents' current cells are
/// matched to the next step's original cells by minimum Euclidean length.
/// `legal(from, to)` says whether a transition is an allowed move; if the best
/// matching still needs an illegal move the original pairing is kept.
pub fn deconflict_cycle(
    grid: GridSpec,
    steps: &[Vec<CellIndex>],
    legal: impl Fn(CellIndex, CellIndex) -> bool,
) -> Result<Vec<Vec<CellIndex>>> {
    let agents = check_steps(steps)?;
    let Some(first) = steps.first() else { return Ok(Vec::new()) };
    let mut out = vec![first.clone()];
    // follow[i]: which original trajectory agent i occupies at the current step.
    let mut follow: Vec<usize> = (0..agents).collect();
    for j in 0..steps.len() - 1 {
        let cur = &out[j];
        let next = &steps[j + 1];
        let mut costs = Vec::with_capacity(agents * agents);
        for &from in cur {
            for &to in next {
                let pen = if legal(from, to) { 0.0 } else { ILLEGAL_MOVE_PENALTY };
                costs.push(grid.euclidean(from, to) + pen);
            }
        }
        let m = CostMatrix::new(agents, costs)?;
        let a = hungarian(&m);
        // Otherwise each agent keeps following its trajectory.
        if (0..agents).all(|i| legal(cur[i], next[a.perm[i]])) {
            follow = a.perm;
        }
        let row: Vec<CellIndex> = follow.iter().map(|&o| next[o]).collect();
        debug_assert!((0..agents).all(|i| legal(cur[i], row[i])));
        out.push(row);
    }
    Ok(out)
}

fn multiset(cells: &[CellIndex]) -> Vec<CellIndex> {
    let mut v = cells.to_vec();
    v.sort();
    v
}

/// Gives each agent the original cycle path that starts on its current cell.
fn rethread(current: &[CellIndex], steps: &[Vec<CellIndex>]) -> Result<Vec<Vec<CellIndex>>> {
    let n = current.len();
    let mut taken = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &c in current {
        let Some(o) = (0..n).find(|&o| !taken[o] && steps[0][o] == c) else {
            return Err(Error::InvalidPlan("cycle start does not match previous cycle end".into()));
        };
        taken[o] = true;
        order.push(o);
    }
    Ok(steps.iter().map(|row| order.iter().map(|&o| row[o]).collect()).collect())
}

/// De-conflicts every cycle of `plan`, sensors always and stations when
/// `stations` is set.
pub fn deconflict_plan(scenario: &Scenario, plan: &TeamPlan, stations: bool) -> Result<TeamPlan> {
    let grid = scenario.grid();
    let mut out = plan.clone();
    let sensor_legal = |a: CellIndex, b: CellIndex| {
        a == b || scenario.neighbors(a).is_ok_and(|nb| nb.contains(&b))
    };
    let station_legal = |a: CellIndex, b: CellIndex| {
        a == b || scenario.station_neighbors(a).is_ok_and(|nb| nb.contains(&b))
    };
    let mut sensors_at: Option<Vec<CellIndex>> = None;
    let mut stations_at: Option<Vec<CellIndex>> = None;
    for k in 0..plan.cycles_used {
        let mut steps = plan.sensor_steps(k);
        if let Some(cur) = &sensors_at {
            steps = rethread(cur, &steps)?;
        }
        let fixed = deconflict_cycle(grid, &steps, sensor_legal)?;
        debug_assert!(fixed.iter().zip(&steps).all(|(a, b)| multiset(a) == multiset(b)));
        sensors_at = fixed.last().cloned();
        out.set_sensor_steps(k, &fixed);
        if stations {
            let mut steps = plan.station_steps(k);
            if let Some(cur) = &stations_at {
                steps = rethread(cur, &steps)?;
            }
            let fixed = deconflict_cycle(grid, &steps, station_legal)?;
            stations_at = fixed.last().cloned();
            out.set_station_steps(k, &fixed);
        }
    }
    Ok(out)
}
