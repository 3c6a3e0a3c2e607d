//! Built-in exact search for the routing program.
//!
//! The objective counts used cycles, so the search walks a ladder of cycle
//! counts from a reachability lower bound upward and asks, at each rung,
//! whether some plan uses exactly that many cycles. Each rung is a depth-first
//! search over cycle boundaries. A boundary state is the sensor and station
//! cells plus the goals still unvisited; a transition chooses station end
//! cells, the station each sensor docks on, and concrete sensor paths.
//!
//! Pruning uses per-end-cell tables of the goal sets one sensor can visit in
//! `r` remaining moves from a given cell, reduced to maximal sets. Combining
//! one set per sensor gives a relaxation that ignores collisions; a state is
//! abandoned when the relaxation cannot cover what remains.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;
use std::time::Instant;

use super::family::{covers, insert_max, insert_min, union_family};
use crate::environment::{CellIndex, Scenario, TeamConfig};
use crate::ip_model::{PlanningProblem, TeamPlan};

/// Combined station end configurations considered per boundary state.
const MAX_END_CONFIGS: usize = 20_000;

/// Limits of the greedy incumbent: station end sets scanned per cycle, dock
/// assignments per end set, goal masks per assignment and nodes per attempt.
const GREEDY_END_CONFIGS: usize = 40;
const GREEDY_SIGMAS: usize = 4;
const GREEDY_MASKS: usize = 8;
/// Exact cover attempts per greedy cycle, over all end sets and dock assignments.
const GREEDY_DFS_ATTEMPTS: usize = 24;
const GREEDY_COVER_NODES: u64 = 4_000;
/// Goal sets a sensor tries to claim in the prioritized cover.
const GREEDY_CLAIMS: usize = 4;
/// Largest claim routed by the visited-set search.
const GREEDY_CLAIM_BITS: u32 = 8;

#[derive(Debug)]
pub(crate) struct Exhausted;

type Step<T> = Result<T, Exhausted>;

pub(crate) struct Budget {
    pub nodes: u64,
    limit: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Budget {
    pub fn new(limit: u64, deadline: Option<Instant>) -> Self {
        Self { nodes: 0, limit, deadline, timed_out: false }
    }

    fn remaining(&self) -> u64 {
        self.limit.saturating_sub(self.nodes)
    }

    fn tick(&mut self) -> Step<()> {
        self.nodes += 1;
        if self.nodes > self.limit || self.timed_out {
            return Err(Exhausted);
        }
        if self.nodes.is_multiple_of(512) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                    return Err(Exhausted);
                }
            }
        }
        Ok(())
    }
}

/// Goal sets coverable on the way to one fixed end cell: `fam[r * n + pos]`
/// lists the maximal goal masks a sensor at `pos` can visit in exactly `r`
/// more moves while finishing on the end cell. Empty means unreachable.
struct Table {
    fam: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
struct Cycle {
    sensors: Vec<Vec<CellIndex>>,
    stations: Vec<Vec<CellIndex>>,
}

pub(crate) enum Outcome {
    /// Plan found; `proven` is false when some search space was truncated.
    Found { plan: TeamPlan, proven: bool },
    Infeasible { proven: bool },
    /// Budget ran out before the ladder finished; carries the greedy plan if
    /// one was found.
    Exhausted { incumbent: Option<TeamPlan> },
}

pub(crate) struct Search<'a> {
    s: &'a Scenario,
    team: TeamConfig,
    n: usize,
    /// Sensor moves per cycle.
    l: usize,
    /// Station moves per cycle.
    lc: usize,
    goals: Vec<CellIndex>,
    goal_bit: Vec<u32>,
    sensor_moves: Vec<Vec<CellIndex>>,
    station_moves: Vec<Vec<CellIndex>>,
    tables: Vec<Option<Rc<Table>>>,
    station_cache: HashMap<(Vec<CellIndex>, Vec<CellIndex>), Option<Vec<Vec<CellIndex>>>>,
    failed: HashMap<(usize, Vec<CellIndex>, Vec<CellIndex>), Vec<u32>>,
    truncated: bool,
    pub budget: Budget,
}

impl<'a> Search<'a> {
    pub fn new(problem: &'a PlanningProblem, budget: Budget) -> Self {
        let s = &*problem.scenario;
        let n = s.cell_count();
        let goals: Vec<CellIndex> = problem.goals.iter().copied().collect();
        assert!(goals.len() <= 32, "at most 32 goals per epoch");
        let mut goal_bit = vec![0u32; n];
        for (b, g) in goals.iter().enumerate() {
            goal_bit[g.0] = 1 << b;
        }
        let mut sensor_moves = vec![Vec::new(); n];
        let mut station_moves = vec![Vec::new(); n];
        for c in 0..n {
            let cell = CellIndex(c);
            if let Ok(nb) = s.neighbors(cell) {
                let mut m = nb.to_vec();
                m.push(cell);
                m.sort();
                sensor_moves[c] = m;
            }
            if let Ok(nb) = s.station_neighbors(cell) {
                let mut m = nb.to_vec();
                m.push(cell);
                m.sort();
                station_moves[c] = m;
            }
        }
        Self {
            s,
            team: problem.team,
            n,
            l: problem.team.t_d - 1,
            lc: problem.team.t_c - 1,
            goals,
            goal_bit,
            sensor_moves,
            station_moves,
            tables: vec![None; n],
            station_cache: HashMap::new(),
            failed: HashMap::new(),
            truncated: false,
            budget,
        }
    }

    fn all_goals(&self) -> u32 {
        if self.goals.len() == 32 {
            u32::MAX
        } else {
            (1u32 << self.goals.len()) - 1
        }
    }

    fn sd(&self, a: CellIndex, b: CellIndex) -> usize {
        self.s.sensor_distance(a, b).unwrap_or(usize::MAX / 4)
    }

    fn cd(&self, a: CellIndex, b: CellIndex) -> usize {
        self.s.station_distance(a, b).unwrap_or(usize::MAX / 4)
    }

    fn table(&mut self, e: CellIndex) -> Rc<Table> {
        if let Some(t) = &self.tables[e.0] {
            return t.clone();
        }
        let n = self.n;
        let mut fam: Vec<Vec<u32>> = vec![Vec::new(); (self.l + 1) * n];
        if !self.s.is_obstacle(e) {
            fam[e.0] = vec![self.goal_bit[e.0]];
        }
        for r in 1..=self.l {
            for pos in 0..n {
                if self.s.is_obstacle(CellIndex(pos)) {
                    continue;
                }
                let here = self.goal_bit[pos];
                let mut out = Vec::new();
                for &m in &self.sensor_moves[pos] {
                    for &f in &fam[(r - 1) * n + m.0] {
                        insert_max(&mut out, f | here);
                    }
                }
                fam[r * n + pos] = out;
            }
        }
        let t = Rc::new(Table { fam });
        self.tables[e.0] = Some(t.clone());
        t
    }

    fn family(&mut self, end: CellIndex, r: usize, pos: CellIndex) -> Vec<u32> {
        let t = self.table(end);
        t.fam[r * self.n + pos.0].clone()
    }

    /// Maximal masks coverable from `pos` in `r` moves ending on any of `ends`.
    fn family_any(&mut self, ends: &[CellIndex], r: usize, pos: CellIndex) -> Vec<u32> {
        let mut out = Vec::new();
        for &e in ends {
            let t = self.table(e);
            for &f in &t.fam[r * self.n + pos.0] {
                insert_max(&mut out, f);
            }
        }
        out
    }

    /// Cells some station can reach from `stations` within `moves` moves.
    fn station_reach(&self, stations: &[CellIndex], moves: usize) -> Vec<CellIndex> {
        (0..self.n)
            .map(CellIndex)
            .filter(|&c| self.s.is_admissible(c) && stations.iter().any(|&p| self.cd(p, c) <= moves))
            .collect()
    }

    /// Necessary condition: each remaining goal is individually reachable by
    /// some sensor in some cycle when station motion is relaxed.
    fn reach_ok(&self, c: usize, sensors: &[CellIndex], stations: &[CellIndex], r: u32) -> bool {
        let from: Vec<CellIndex> =
            if c == 1 { sensors.to_vec() } else { self.station_reach(stations, (c - 1) * self.lc) };
        let to = self.station_reach(stations, c * self.lc);
        for (b, &g) in self.goals.iter().enumerate() {
            if r >> b & 1 == 0 {
                continue;
            }
            let a = from.iter().map(|&u| self.sd(u, g)).min().unwrap_or(usize::MAX / 4);
            let z = to.iter().map(|&v| self.sd(g, v)).min().unwrap_or(usize::MAX / 4);
            if a + z > self.l {
                return false;
            }
        }
        true
    }

    /// Smallest cycle count passing [`Self::reach_ok`], if any up to `cap`.
    pub fn lower_bound(&self, sensors: &[CellIndex], stations: &[CellIndex], cap: usize) -> Option<usize> {
        (1..=cap).find(|&c| self.reach_ok(c, sensors, stations, self.all_goals()))
    }

    /// One-cycle relaxation with ends anywhere stations can reach.
    fn last_cycle_relaxed(&mut self, sensors: &[CellIndex], stations: &[CellIndex], r: u32) -> bool {
        let ends = self.station_reach(stations, self.lc);
        let fams: Vec<Vec<u32>> = sensors.iter().map(|&s| self.family_any(&ends, self.l, s)).collect();
        let refs: Vec<&[u32]> = fams.iter().map(|f| f.as_slice()).collect();
        covers(&refs, r)
    }

    fn known_failed(&self, key: &(usize, Vec<CellIndex>, Vec<CellIndex>), r: u32) -> bool {
        self.failed.get(key).is_some_and(|fs| fs.iter().any(|&f| f & !r == 0))
    }

    fn record_failure(&mut self, key: (usize, Vec<CellIndex>, Vec<CellIndex>), r: u32) {
        insert_min(self.failed.entry(key).or_default(), r);
    }

    fn key(c: usize, sensors: &[CellIndex], stations: &[CellIndex]) -> (usize, Vec<CellIndex>, Vec<CellIndex>) {
        let mut a = sensors.to_vec();
        a.sort();
        let mut b = stations.to_vec();
        b.sort();
        (c, a, b)
    }

    fn min_goal_distance(&self, cell: CellIndex, r: u32) -> usize {
        self.goals
            .iter()
            .enumerate()
            .filter(|(b, _)| r >> b & 1 == 1)
            .map(|(_, &g)| self.sd(cell, g))
            .min()
            .unwrap_or(0)
    }

    /// Sum over open goals of the sensor distance to the nearest of `docks`.
    fn dock_distance(&self, docks: &[CellIndex], r: u32) -> usize {
        self.goals
            .iter()
            .enumerate()
            .filter(|(b, _)| r >> b & 1 == 1)
            .map(|(_, &g)| docks.iter().map(|&c| self.sd(g, c)).min().unwrap_or(0))
            .sum()
    }

    /// Station end tuples on distinct cells, best first.
    fn end_configs(&mut self, stations: &[CellIndex], r: u32) -> Vec<Vec<CellIndex>> {
        let nc = stations.len();
        let per_station_cap = if nc == 1 {
            usize::MAX
        } else {
            (MAX_END_CONFIGS as f64).powf(1.0 / nc as f64).floor().max(1.0) as usize
        };
        let mut lists: Vec<Vec<CellIndex>> = Vec::with_capacity(nc);
        for &p in stations {
            let mut reach: Vec<CellIndex> = (0..self.n)
                .map(CellIndex)
                .filter(|&c| self.s.is_admissible(c) && self.cd(p, c) <= self.lc)
                .collect();
            reach.sort_by_key(|&c| (self.min_goal_distance(c, r), self.cd(p, c), c));
            if reach.len() > per_station_cap {
                reach.truncate(per_station_cap);
                self.truncated = true;
            }
            lists.push(reach);
        }
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(nc);
        fn product(lists: &[Vec<CellIndex>], cur: &mut Vec<CellIndex>, out: &mut Vec<Vec<CellIndex>>) {
            if cur.len() == lists.len() {
                out.push(cur.clone());
                return;
            }
            for &c in &lists[cur.len()] {
                if !cur.contains(&c) {
                    cur.push(c);
                    product(lists, cur, out);
                    cur.pop();
                }
            }
        }
        product(&lists, &mut cur, &mut out);
        let score = |e: &Vec<CellIndex>| -> (usize, usize) {
            let cover = self.dock_distance(e, r);
            let moved: usize = stations.iter().zip(e).map(|(&p, &c)| self.cd(p, c)).sum();
            (cover, moved)
        };
        let mut keyed: Vec<((usize, usize), Vec<CellIndex>)> = out.into_iter().map(|e| (score(&e), e)).collect();
        keyed.sort();
        keyed.into_iter().map(|(_, e)| e).collect()
    }

    /// Joint station paths to `ends` with no two stations sharing a cell.
    fn station_paths(&mut self, stations: &[CellIndex], ends: &[CellIndex]) -> Step<Option<Vec<Vec<CellIndex>>>> {
        let key = (stations.to_vec(), ends.to_vec());
        if let Some(hit) = self.station_cache.get(&key) {
            return Ok(hit.clone());
        }
        let steps = self.lc + 1;
        let mut reserved = vec![false; steps * self.n];
        let mut paths: Vec<Vec<CellIndex>> = Vec::new();
        let found = self.station_dfs(stations, ends, 0, &mut reserved, &mut paths)?;
        let result = found.then_some(paths);
        self.station_cache.insert(key, result.clone());
        Ok(result)
    }

    fn station_dfs(
        &mut self,
        stations: &[CellIndex],
        ends: &[CellIndex],
        a: usize,
        reserved: &mut [bool],
        paths: &mut Vec<Vec<CellIndex>>,
    ) -> Step<bool> {
        if a == stations.len() {
            return Ok(true);
        }
        let mut path = vec![stations[a]];
        if self.station_walk(stations, ends, a, &mut path, reserved, paths)? {
            return Ok(true);
        }
        Ok(false)
    }

    fn station_walk(
        &mut self,
        stations: &[CellIndex],
        ends: &[CellIndex],
        a: usize,
        path: &mut Vec<CellIndex>,
        reserved: &mut [bool],
        paths: &mut Vec<Vec<CellIndex>>,
    ) -> Step<bool> {
        self.budget.tick()?;
        let b = path.len() - 1;
        let pos = path[b];
        let n = self.n;
        if b == self.lc {
            for (bb, c) in path.iter().enumerate() {
                reserved[bb * n + c.0] = true;
            }
            paths.push(path.clone());
            if self.station_dfs(stations, ends, a + 1, reserved, paths)? {
                return Ok(true);
            }
            paths.pop();
            for (bb, c) in path.iter().enumerate() {
                reserved[bb * n + c.0] = false;
            }
            return Ok(false);
        }
        if b == 0 && reserved[pos.0] {
            return Ok(false);
        }
        let target = ends[a];
        let left = self.lc - b - 1;
        let mut moves: Vec<CellIndex> = self.station_moves[pos.0]
            .iter()
            .copied()
            .filter(|&m| self.cd(m, target) <= left && !reserved[(b + 1) * n + m.0])
            .collect();
        moves.sort_by_key(|&m| (self.cd(m, target), m != pos, m));
        for m in moves {
            path.push(m);
            if self.station_walk(stations, ends, a, path, reserved, paths)? {
                return Ok(true);
            }
            path.pop();
        }
        Ok(false)
    }

    /// Dock assignments: sensor `i` ends on cell `sigma[i]` of `ends`. Sensors
    /// sharing a start cell are interchangeable, so their choices are taken in
    /// non-decreasing order.
    fn sigmas(&mut self, sensors: &[CellIndex], ends: &[CellIndex]) -> Vec<Vec<CellIndex>> {
        let nd = sensors.len();
        let cap = self.team.charger_cap.unwrap_or(usize::MAX);
        let reach: Vec<Vec<bool>> = sensors
            .iter()
            .map(|&s| ends.iter().map(|&e| self.sd(s, e) <= self.l).collect())
            .collect();
        let mut out = Vec::new();
        let mut choice = vec![0usize; nd];
        let mut load = vec![0usize; ends.len()];
        fn rec(
            i: usize,
            sensors: &[CellIndex],
            reach: &[Vec<bool>],
            cap: usize,
            choice: &mut Vec<usize>,
            load: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if i == sensors.len() {
                out.push(choice.clone());
                return;
            }
            let floor = (0..i).rev().find(|&p| sensors[p] == sensors[i]).map_or(0, |p| choice[p]);
            for e in floor..load.len() {
                if reach[i][e] && load[e] < cap {
                    load[e] += 1;
                    choice[i] = e;
                    rec(i + 1, sensors, reach, cap, choice, load, out);
                    load[e] -= 1;
                }
            }
        }
        let mut raw = Vec::new();
        rec(0, sensors, &reach, cap, &mut choice, &mut load, &mut raw);
        for c in raw {
            out.push(c.into_iter().map(|e| ends[e]).collect());
        }
        out
    }

    /// Cells a sensor travelling `start -> end` can occupy at each step.
    fn windows(&self, start: CellIndex, end: CellIndex) -> Vec<Vec<u16>> {
        (0..=self.l)
            .map(|j| {
                (0..self.n)
                    .filter(|&c| {
                        let c = CellIndex(c);
                        !self.s.is_obstacle(c) && self.sd(start, c) <= j && self.sd(c, end) <= self.l - j
                    })
                    .map(|c| c as u16)
                    .collect()
            })
            .collect()
    }

    /// Whether the sensors `from..` can hold distinct free cells at mid-cycle
    /// step `j`, with `extra` also taken.
    fn step_matching(&self, win: &[Vec<Vec<u16>>], from: usize, j: usize, reserved: &[bool], extra: Option<CellIndex>) -> bool {
        let n = self.n;
        let free = |c: u16| !reserved[j * n + c as usize] && Some(CellIndex(c as usize)) != extra;
        fn augment(
            i: usize,
            opts: &[&[u16]],
            free: &dyn Fn(u16) -> bool,
            seen: &mut [bool],
            owner: &mut [usize],
        ) -> bool {
            for &c in opts[i] {
                let c = c as usize;
                if seen[c] || !free(c as u16) {
                    continue;
                }
                seen[c] = true;
                if owner[c] == usize::MAX || augment(owner[c], opts, free, seen, owner) {
                    owner[c] = i;
                    return true;
                }
            }
            false
        }
        let opts: Vec<&[u16]> = win[from..].iter().map(|w| w[j].as_slice()).collect();
        let mut owner = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        for i in 0..opts.len() {
            seen.iter_mut().for_each(|v| *v = false);
            if !augment(i, &opts, &free, &mut seen, &mut owner) {
                return false;
            }
        }
        true
    }

    fn all_steps_match(&self, win: &[Vec<Vec<u16>>], from: usize, reserved: &[bool]) -> bool {
        win.len() - from < 2 || (1..self.l).all(|j| self.step_matching(win, from, j, reserved, None))
    }

    /// Exact single-cycle search: sensor paths from `sensors` to `sigma` that
    /// visit every goal in `target` without mid-cycle vertex conflicts.
    /// Returns the paths and every goal they visit.
    fn cover_search(
        &mut self,
        sensors: &[CellIndex],
        sigma: &[CellIndex],
        target: u32,
    ) -> Step<Option<(Vec<Vec<CellIndex>>, u32)>> {
        let tables: Vec<Rc<Table>> = sigma.iter().map(|&e| self.table(e)).collect();
        let mut st = CoverState {
            reserved: vec![false; (self.l + 1) * self.n],
            paths: Vec::with_capacity(sensors.len()),
            sigma: sigma.to_vec(),
            windows: sensors.iter().zip(sigma).map(|(&s, &e)| self.windows(s, e)).collect(),
        };
        let found = self.cover_sensor(0, sensors, &tables, target, 0, &mut st)?;
        Ok(found.map(|covered| (st.paths, covered)))
    }

    fn static_families<'t>(&self, from: usize, sensors: &[CellIndex], tables: &'t [Rc<Table>]) -> Vec<&'t [u32]> {
        (from..sensors.len()).map(|i| tables[i].fam[self.l * self.n + sensors[i].0].as_slice()).collect()
    }

    fn cover_sensor(
        &mut self,
        i: usize,
        sensors: &[CellIndex],
        tables: &[Rc<Table>],
        target: u32,
        covered: u32,
        st: &mut CoverState,
    ) -> Step<Option<u32>> {
        if i == sensors.len() {
            return Ok((target & !covered == 0).then_some(covered));
        }
        if target & !covered == 0 {
            if let Some(more) = self.route_rest(i, sensors, st)? {
                return Ok(Some(covered | more));
            }
        }
        if !covers(&self.static_families(i, sensors, tables), target & !covered) {
            return Ok(None);
        }
        if !self.all_steps_match(&st.windows, i, &st.reserved) {
            return Ok(None);
        }
        let start = sensors[i];
        let mut path = vec![start];
        self.cover_walk(i, sensors, tables, target, covered | self.goal_bit[start.0], &mut path, st)
    }

    /// With the target already covered, routes sensors `i..` one at a time
    /// along the first collision-free space-time path. Incomplete: on failure
    /// `st` is restored and the caller falls back to the full search.
    fn route_rest(&mut self, i: usize, sensors: &[CellIndex], st: &mut CoverState) -> Step<Option<u32>> {
        let base = st.paths.len();
        let mut covered = 0;
        for k in i..sensors.len() {
            match self.free_path(k, sensors[k], st)? {
                Some(p) => {
                    self.reserve(&p, st, true);
                    covered |= p.iter().fold(0, |acc, c| acc | self.goal_bit[c.0]);
                    st.paths.push(p);
                }
                None => {
                    for p in st.paths.split_off(base) {
                        self.reserve(&p, st, false);
                    }
                    return Ok(None);
                }
            }
        }
        Ok(Some(covered))
    }

    fn reserve(&self, path: &[CellIndex], st: &mut CoverState, on: bool) {
        for (j, c) in path.iter().enumerate().take(self.l).skip(1) {
            st.reserved[j * self.n + c.0] = on;
        }
    }

    /// Breadth-first search over (step, cell) for sensor `k` inside its
    /// windows, avoiding reserved mid-cycle cells.
    fn free_path(&mut self, k: usize, start: CellIndex, st: &CoverState) -> Step<Option<Vec<CellIndex>>> {
        let (n, l) = (self.n, self.l);
        let mut parent = vec![usize::MAX; (l + 1) * n];
        let mut layer = vec![start];
        for j in 1..=l {
            let win = &st.windows[k][j];
            let mut next = Vec::new();
            for &c in &layer {
                self.budget.tick()?;
                for &m in &self.sensor_moves[c.0] {
                    let slot = j * n + m.0;
                    if parent[slot] == usize::MAX
                        && win.binary_search(&(m.0 as u16)).is_ok()
                        && (j == l || !st.reserved[slot])
                    {
                        parent[slot] = c.0;
                        next.push(m);
                    }
                }
            }
            if next.is_empty() {
                return Ok(None);
            }
            layer = next;
        }
        let end = st.sigma[k];
        if parent[l * n + end.0] == usize::MAX {
            return Ok(None);
        }
        let mut path = vec![end];
        for j in (1..=l).rev() {
            let prev = parent[j * n + path.last().unwrap().0];
            path.push(CellIndex(prev));
        }
        path.reverse();
        Ok(Some(path))
    }

    #[allow(clippy::too_many_arguments)]
    fn cover_walk(
        &mut self,
        i: usize,
        sensors: &[CellIndex],
        tables: &[Rc<Table>],
        target: u32,
        covered: u32,
        path: &mut Vec<CellIndex>,
        st: &mut CoverState,
    ) -> Step<Option<u32>> {
        self.budget.tick()?;
        let j = path.len() - 1;
        let n = self.n;
        if j == self.l {
            for (jj, c) in path.iter().enumerate() {
                if jj >= 1 && jj < self.l {
                    st.reserved[jj * n + c.0] = true;
                }
            }
            st.paths.push(path.clone());
            let res = self.cover_sensor(i + 1, sensors, tables, target, covered, st)?;
            if res.is_some() {
                return Ok(res);
            }
            st.paths.pop();
            for (jj, c) in path.iter().enumerate() {
                if jj >= 1 && jj < self.l {
                    st.reserved[jj * n + c.0] = false;
                }
            }
            return Ok(None);
        }
        let pos = path[j];
        let left = self.l - j - 1;
        let need = target & !covered;
        let rest = self.static_families(i + 1, sensors, tables);
        let later = sensors.len() - i - 1;
        let mut moves: Vec<(usize, bool, usize, CellIndex)> = Vec::new();
        for &m in &self.sensor_moves[pos.0] {
            let slot = &tables[i].fam[left * n + m.0];
            if slot.is_empty() {
                continue;
            }
            if j + 1 < self.l
                && (st.reserved[(j + 1) * n + m.0]
                    || (later > 0 && !self.step_matching(&st.windows, i + 1, j + 1, &st.reserved, Some(m))))
            {
                continue;
            }
            let after = need & !self.goal_bit[m.0];
            if after != 0 {
                let mut fams = rest.clone();
                fams.push(slot.as_slice());
                if !covers(&fams, after) {
                    continue;
                }
            }
            moves.push((self.min_goal_distance(m, after), m != pos, self.sd(m, st.sigma[i]), m));
        }
        moves.sort();
        for (_, _, _, m) in moves {
            path.push(m);
            let res = self.cover_walk(i, sensors, tables, target, covered | self.goal_bit[m.0], path, st)?;
            if res.is_some() {
                return Ok(res);
            }
            path.pop();
        }
        Ok(None)
    }

    /// One rung of the ladder: plans using exactly `c` more cycles.
    fn cycle_dfs(&mut self, c: usize, sensors: &[CellIndex], stations: &[CellIndex], r: u32) -> Step<Option<Vec<Cycle>>> {
        self.budget.tick()?;
        let key = Self::key(c, sensors, stations);
        if self.known_failed(&key, r) {
            return Ok(None);
        }
        if !self.reach_ok(c, sensors, stations, r) || (c == 1 && !self.last_cycle_relaxed(sensors, stations, r)) {
            self.record_failure(key, r);
            return Ok(None);
        }
        // Stations are interchangeable: once one ordering of an end set is
        // realized, the other orderings lead to the same boundary states.
        let mut realized: BTreeSet<Vec<CellIndex>> = BTreeSet::new();
        for ends in self.end_configs(stations, r) {
            self.budget.tick()?;
            let mut end_set = ends.clone();
            end_set.sort();
            if realized.contains(&end_set) {
                continue;
            }
            if c == 1 {
                let fams: Vec<Vec<u32>> = sensors.iter().map(|&s| self.family_any(&ends, self.l, s)).collect();
                let refs: Vec<&[u32]> = fams.iter().map(|f| f.as_slice()).collect();
                if !covers(&refs, r) {
                    continue;
                }
            }
            let Some(station_paths) = self.station_paths(stations, &ends)? else { continue };
            realized.insert(end_set);
            let mut sigmas: Vec<(Reverse<u32>, Vec<CellIndex>, Vec<u32>)> = Vec::new();
            let free = vec![false; (self.l + 1) * self.n];
            for sigma in self.sigmas(sensors, &ends) {
                let win: Vec<_> = sensors.iter().zip(&sigma).map(|(&s, &e)| self.windows(s, e)).collect();
                if !self.all_steps_match(&win, 0, &free) {
                    continue;
                }
                let fams: Vec<Vec<u32>> =
                    sensors.iter().zip(&sigma).map(|(&s, &e)| self.family(e, self.l, s)).collect();
                let refs: Vec<&[u32]> = fams.iter().map(|f| f.as_slice()).collect();
                if c == 1 {
                    if covers(&refs, r) {
                        sigmas.push((Reverse(0), sigma, vec![r]));
                    }
                } else {
                    let u = union_family(&refs, r);
                    if let Some(best) = u.iter().map(|m| m.count_ones()).max() {
                        sigmas.push((Reverse(best), sigma, u));
                    }
                }
            }
            sigmas.sort_by_key(|s| s.0);
            for (_, sigma, seeds) in sigmas {
                if c == 1 {
                    if let Some((paths, _)) = self.cover_search(sensors, &sigma, r)? {
                        return Ok(Some(vec![Cycle { sensors: paths, stations: station_paths.clone() }]));
                    }
                    continue;
                }
                let next_key = Self::key(c - 1, &sigma, &ends);
                let mut queue: BTreeSet<(Reverse<u32>, u32)> =
                    seeds.iter().map(|&m| (Reverse(m.count_ones()), m)).collect();
                let mut done: Vec<u32> = Vec::new();
                while let Some((_, m)) = queue.pop_first() {
                    if done.iter().any(|&d| m & !d == 0) {
                        continue;
                    }
                    self.budget.tick()?;
                    let rest = r & !m;
                    if self.known_failed(&next_key, rest)
                        || !self.reach_ok(c - 1, &sigma, &ends, rest)
                        || (c == 2 && !self.last_cycle_relaxed(&sigma, &ends, rest))
                    {
                        done.push(m);
                        continue;
                    }
                    match self.cover_search(sensors, &sigma, m)? {
                        Some((paths, got)) => {
                            insert_max(&mut done, got);
                            if let Some(mut later) = self.cycle_dfs(c - 1, &sigma, &ends, r & !got)? {
                                later.insert(0, Cycle { sensors: paths, stations: station_paths.clone() });
                                return Ok(Some(later));
                            }
                        }
                        None => {
                            for b in 0..32 {
                                if m >> b & 1 == 1 {
                                    let sub = m & !(1 << b);
                                    queue.insert((Reverse(sub.count_ones()), sub));
                                }
                            }
                        }
                    }
                }
            }
        }
        self.record_failure(key, r);
        Ok(None)
    }

    fn assemble(&self, cycles: Vec<Cycle>) -> TeamPlan {
        let nd = self.team.n_sensors;
        let nc = self.team.n_stations;
        let mut plan = TeamPlan {
            cycles_used: cycles.len(),
            sensor_paths: vec![Vec::new(); nd],
            station_paths: vec![Vec::new(); nc],
        };
        for cyc in cycles {
            for (i, p) in cyc.sensors.into_iter().enumerate() {
                plan.sensor_paths[i].push(p);
            }
            for (a, p) in cyc.stations.into_iter().enumerate() {
                plan.station_paths[a].push(p);
            }
        }
        plan
    }

    /// Runs `f` with at most `cap` more nodes. `Ok(None)` means the local cap
    /// ran out while the overall budget did not.
    fn local<T>(&mut self, cap: u64, f: impl FnOnce(&mut Self) -> Step<T>) -> Step<Option<T>> {
        let saved = self.budget.limit;
        self.budget.limit = saved.min(self.budget.nodes.saturating_add(cap));
        let out = f(self);
        self.budget.limit = saved;
        match out {
            Ok(v) => Ok(Some(v)),
            Err(Exhausted) if self.budget.nodes <= saved && !self.budget.timed_out => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Best single cycle found by a bounded scan: the station end sets and
    /// dock assignments are tried in the exact search's order and each cover
    /// attempt gets a small node cap.
    fn greedy_cycle(&mut self, sensors: &[CellIndex], stations: &[CellIndex], r: u32) -> Step<Option<(Cycle, u32, Vec<CellIndex>, Vec<CellIndex>)>> {
        let mut best: Option<(Cycle, u32, Vec<CellIndex>, Vec<CellIndex>)> = None;
        let mut best_count = 0;
        let free = vec![false; (self.l + 1) * self.n];
        let mut tried = 0;
        let mut dfs_left = GREEDY_DFS_ATTEMPTS;
        for ends in self.end_configs(stations, r) {
            if tried >= GREEDY_END_CONFIGS {
                break;
            }
            let Some(station_paths) = self.station_paths(stations, &ends)? else { continue };
            tried += 1;
            let mut sigmas: Vec<(u32, Vec<CellIndex>, Vec<u32>)> = Vec::new();
            for sigma in self.sigmas(sensors, &ends) {
                let win: Vec<_> = sensors.iter().zip(&sigma).map(|(&s, &e)| self.windows(s, e)).collect();
                if !self.all_steps_match(&win, 0, &free) {
                    continue;
                }
                let fams: Vec<Vec<u32>> =
                    sensors.iter().zip(&sigma).map(|(&s, &e)| self.family(e, self.l, s)).collect();
                let refs: Vec<&[u32]> = fams.iter().map(|f| f.as_slice()).collect();
                let u = union_family(&refs, r);
                if let Some(top) = u.iter().map(|m| m.count_ones()).max() {
                    sigmas.push((top, sigma, u));
                }
            }
            sigmas.sort_by_key(|s| std::cmp::Reverse(s.0));
            for (top, sigma, seeds) in sigmas.into_iter().take(GREEDY_SIGMAS) {
                if best.is_some() && top <= best_count {
                    break;
                }
                let forward: Vec<usize> = (0..sensors.len()).collect();
                let backward: Vec<usize> = forward.iter().rev().copied().collect();
                for order in [forward, backward] {
                    if let Some((paths, got)) = self.prioritized_cover(sensors, &sigma, r, &order)? {
                        let got = got & r;
                        if got != 0 && (best.is_none() || got.count_ones() > best_count) {
                            best_count = got.count_ones();
                            best = Some((
                                Cycle { sensors: paths, stations: station_paths.clone() },
                                got,
                                sigma.clone(),
                                ends.clone(),
                            ));
                        }
                    }
                }
                let mut masks: Vec<u32> = seeds;
                masks.sort_by_key(|m| (Reverse(m.count_ones()), *m));
                let mut attempts = 0;
                while let Some(m) = (!masks.is_empty()).then(|| masks.remove(0)) {
                    if (best.is_some() && m.count_ones() <= best_count) || attempts >= GREEDY_MASKS || dfs_left == 0 {
                        break;
                    }
                    attempts += 1;
                    dfs_left -= 1;
                    let found = self.local(GREEDY_COVER_NODES, |me| me.cover_search(sensors, &sigma, m))?;
                    match found.flatten().map(|(p, got)| (p, got & r)).filter(|(_, got)| *got != 0) {
                        Some((paths, got)) => {
                            best_count = got.count_ones();
                            best = Some((
                                Cycle { sensors: paths, stations: station_paths.clone() },
                                got,
                                sigma.clone(),
                                ends.clone(),
                            ));
                            break;
                        }
                        None => {
                            for b in 0..32 {
                                if m >> b & 1 == 1 {
                                    let sub = m & !(1 << b);
                                    if !masks.contains(&sub) {
                                        masks.push(sub);
                                    }
                                }
                            }
                            masks.sort_by_key(|m| (Reverse(m.count_ones()), *m));
                        }
                    }
                }
            }
            if best.is_some() && best_count == r.count_ones() {
                break;
            }
        }
        if best.is_none() {
            return self.reposition_cycle(sensors, stations, r);
        }
        Ok(best)
    }

    /// A cycle covering nothing that brings the stations closer to the open
    /// goals, for when no cycle from here makes progress.
    fn reposition_cycle(&mut self, sensors: &[CellIndex], stations: &[CellIndex], r: u32) -> Step<Option<(Cycle, u32, Vec<CellIndex>, Vec<CellIndex>)>> {
        let now = self.dock_distance(stations, r);
        let order: Vec<usize> = (0..sensors.len()).collect();
        for ends in self.end_configs(stations, r).into_iter().take(GREEDY_END_CONFIGS) {
            if self.dock_distance(&ends, r) >= now {
                break;
            }
            let Some(station_paths) = self.station_paths(stations, &ends)? else { continue };
            for sigma in self.sigmas(sensors, &ends).into_iter().take(GREEDY_SIGMAS) {
                if let Some((paths, _)) = self.prioritized_cover(sensors, &sigma, 0, &order)? {
                    return Ok(Some((Cycle { sensors: paths, stations: station_paths }, 0, sigma, ends)));
                }
            }
        }
        Ok(None)
    }

    /// Incomplete cover for the greedy: sensors take turns in `order`, each
    /// claiming the largest open goal set its tables allow and routing through
    /// it around the cells taken by earlier sensors.
    fn prioritized_cover(
        &mut self,
        sensors: &[CellIndex],
        sigma: &[CellIndex],
        target: u32,
        order: &[usize],
    ) -> Step<Option<(Vec<Vec<CellIndex>>, u32)>> {
        let mut st = CoverState {
            reserved: vec![false; (self.l + 1) * self.n],
            paths: Vec::new(),
            sigma: sigma.to_vec(),
            windows: sensors.iter().zip(sigma).map(|(&s, &e)| self.windows(s, e)).collect(),
        };
        let mut paths = vec![Vec::new(); sensors.len()];
        let mut open = target;
        let mut covered = 0;
        for &k in order {
            let mut claims: Vec<u32> = self.family(sigma[k], self.l, sensors[k]).iter().map(|m| m & open).collect();
            claims.push(0);
            claims.sort_by_key(|m| (Reverse(m.count_ones()), *m));
            claims.dedup();
            let mut routed = None;
            for claim in claims.into_iter().filter(|m| m.count_ones() <= GREEDY_CLAIM_BITS).take(GREEDY_CLAIMS) {
                if let Some(p) = self.goal_path(k, sensors[k], claim, &st)? {
                    routed = Some(p);
                    break;
                }
            }
            let Some(p) = routed else { return Ok(None) };
            self.reserve(&p, &mut st, true);
            let got = p.iter().fold(0, |acc, c| acc | self.goal_bit[c.0]);
            covered |= got;
            open &= !got;
            paths[k] = p;
        }
        Ok(Some((paths, covered)))
    }

    /// Breadth-first search over (step, cell, claimed goals visited) for a
    /// path of sensor `k` through every goal of `claim`.
    fn goal_path(&mut self, k: usize, start: CellIndex, claim: u32, st: &CoverState) -> Step<Option<Vec<CellIndex>>> {
        let (n, l) = (self.n, self.l);
        let bits: Vec<u32> = (0..32).filter(|b| claim >> b & 1 == 1).collect();
        let local = |c: CellIndex| -> usize {
            bits.iter().enumerate().filter(|(_, &b)| self.goal_bit[c.0] >> b & 1 == 1).map(|(i, _)| 1 << i).sum()
        };
        let width = 1usize << bits.len();
        let idx = |j: usize, c: usize, v: usize| (j * n + c) * width + v;
        let mut parent = vec![usize::MAX; (l + 1) * n * width];
        let mut layer = vec![(start, local(start))];
        for j in 1..=l {
            let win = &st.windows[k][j];
            let mut next = Vec::new();
            for &(c, v) in &layer {
                self.budget.tick()?;
                for &m in &self.sensor_moves[c.0] {
                    if win.binary_search(&(m.0 as u16)).is_err() || (j < l && st.reserved[j * n + m.0]) {
                        continue;
                    }
                    let v2 = v | local(m);
                    let slot = idx(j, m.0, v2);
                    if parent[slot] == usize::MAX {
                        parent[slot] = idx(j - 1, c.0, v);
                        next.push((m, v2));
                    }
                }
            }
            if next.is_empty() {
                return Ok(None);
            }
            layer = next;
        }
        let mut cur = idx(l, st.sigma[k].0, width - 1);
        if parent[cur] == usize::MAX {
            return Ok(None);
        }
        let mut path = Vec::with_capacity(l + 1);
        for j in (0..=l).rev() {
            path.push(CellIndex(cur / width % n));
            if j > 0 {
                cur = parent[cur];
            }
        }
        path.reverse();
        Ok(Some(path))
    }

    /// Cycle-by-cycle greedy plan within the cycle cap.
    fn greedy(&mut self, sensors: &[CellIndex], stations: &[CellIndex]) -> Step<Option<Vec<Cycle>>> {
        let mut r = self.all_goals();
        let mut cur_s = sensors.to_vec();
        let mut cur_c = stations.to_vec();
        let mut cycles = Vec::new();
        while cycles.len() < self.team.k_max_cycles {
            let res = self.greedy_cycle(&cur_s, &cur_c, r);
            let Some((cycle, got, sigma, ends)) = res? else { return Ok(None) };
            cycles.push(cycle);
            r &= !got;
            cur_s = sigma;
            cur_c = ends;
            if r == 0 {
                return Ok(Some(cycles));
            }
        }
        Ok(None)
    }

    /// Runs the ladder from the reachability bound up to the cycle cap, using
    /// a greedy plan as the upper end.
    pub fn run(&mut self, sensors: &[CellIndex], stations: &[CellIndex]) -> Outcome {
        let cap = self.team.k_max_cycles;
        if let Some(limit) = self.team.charger_cap {
            let mut load: HashMap<CellIndex, usize> = HashMap::new();
            for &s in sensors {
                *load.entry(s).or_default() += 1;
            }
            if load.values().any(|&v| v > limit) {
                return Outcome::Infeasible { proven: true };
            }
        }
        let all = self.all_goals();
        let Some(lb) = self.lower_bound(sensors, stations, cap) else {
            return Outcome::Infeasible { proven: true };
        };
        let greedy_cap = self.budget.remaining() / 4;
        let truncated = self.truncated;
        let incumbent = match self.local(greedy_cap, |me| me.greedy(sensors, stations)) {
            Ok(found) => found.flatten(),
            Err(Exhausted) => None,
        };
        self.truncated = truncated;
        let ub = incumbent.as_ref().map_or(cap, |c| c.len() - 1);
        for k in lb..=ub {
            match self.cycle_dfs(k, sensors, stations, all) {
                Ok(Some(cycles)) => {
                    return Outcome::Found { plan: self.assemble(cycles), proven: !self.truncated };
                }
                Ok(None) => {}
                Err(Exhausted) => {
                    return Outcome::Exhausted { incumbent: incumbent.map(|c| self.assemble(c)) };
                }
            }
        }
        match incumbent {
            Some(c) => Outcome::Found { plan: self.assemble(c), proven: !self.truncated },
            None => Outcome::Infeasible { proven: !self.truncated },
        }
    }
}

struct CoverState {
    /// Mid-cycle cells taken by sensors already routed, indexed `j * n + cell`.
    reserved: Vec<bool>,
    paths: Vec<Vec<CellIndex>>,
    sigma: Vec<CellIndex>,
    /// `windows[i][j]`: cells sensor `i` may occupy at step `j`.
    windows: Vec<Vec<Vec<u16>>>,
}
