//! Grid world: cells, king-move neighborhoods, obstacles, the station-admissible
//! region, the ground-truth Bernoulli field and randomized scenario generation.
//!
//! Cells are indexed 0-based in row-major order: `index = row * cols + col`.
//! That bijection is the only one used anywhere in the crate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Maximum number of obstacle draws before [`generate_scenario`] gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Sentinel for "no path" in the distance tables.
const UNREACHABLE: u16 = u16::MAX;

/// Current version tag written into every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Index of a grid cell in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellIndex(pub usize);

impl CellIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain(format!("grid must be at least 1x1, got {rows}x{cols}"));
        }
        Ok(Self { rows, cols })
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell.0 < self.cell_count()
    }

    pub fn cell(&self, row: usize, col: usize) -> CellIndex {
        debug_assert!(row < self.rows && col < self.cols);
        CellIndex(row * self.cols + col)
    }

    pub fn coords(&self, cell: CellIndex) -> (usize, usize) {
        (cell.0 / self.cols, cell.0 % self.cols)
    }

    /// Cell center in (x, y) = (col, row) units.
    pub fn center(&self, cell: CellIndex) -> (f64, f64) {
        let (r, c) = self.coords(cell);
        (c as f64, r as f64)
    }

    pub fn chebyshev(&self, a: CellIndex, b: CellIndex) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }

    pub fn euclidean(&self, a: CellIndex, b: CellIndex) -> f64 {
        let (xa, ya) = self.center(a);
        let (xb, yb) = self.center(b);
        (xa - xb).hypot(ya - yb)
    }

    /// In-grid cells at Chebyshev distance exactly 1, ascending.
    fn king_ring(&self, cell: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (r, c) = self.coords(cell);
        let (r, c) = (r as isize, c as isize);
        (-1isize..=1)
            .flat_map(move |dr| (-1isize..=1).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| dr != 0 || dc != 0)
            .filter_map(move |(dr, dc)| {
                let (nr, nc) = (r + dr, c + dc);
                (nr >= 0 && nc >= 0 && (nr as usize) < self.rows && (nc as usize) < self.cols)
                    .then(|| CellIndex(nr as usize * self.cols + nc as usize))
            })
    }
}

/// Cells where charging stations may travel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr", into = "RegionRepr")]
pub enum StationRegion {
    /// Every non-obstacle cell.
    All,
    Cells(BTreeSet<CellIndex>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RegionRepr {
    Keyword(String),
    Cells(Vec<CellIndex>),
}

impl TryFrom<RegionRepr> for StationRegion {
    type Error = String;

    fn try_from(repr: RegionRepr) -> std::result::Result<Self, String> {
        match repr {
            RegionRepr::Keyword(k) if k == "all" => Ok(StationRegion::All),
            RegionRepr::Keyword(k) => Err(format!("expected \"all\" or a cell list, got \"{k}\"")),
            RegionRepr::Cells(cells) => Ok(StationRegion::Cells(cells.into_iter().collect())),
        }
    }
}

impl From<StationRegion> for RegionRepr {
    fn from(region: StationRegion) -> Self {
        match region {
            StationRegion::All => RegionRepr::Keyword("all".into()),
            StationRegion::Cells(cells) => RegionRepr::Cells(cells.into_iter().collect()),
        }
    }
}

/// Ground truth for one experiment: geometry, obstacles, station region,
/// per-cell Bernoulli means and the classification thresholds.
///
/// Construction validates every invariant and precomputes neighbor lists and
/// all-pairs move distances for both agent classes, so the value is immutable
/// and cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    grid: GridSpec,
    obstacles: BTreeSet<CellIndex>,
    region: StationRegion,
    mu: BTreeMap<CellIndex, f64>,
    theta: f64,
    epsilon: f64,
    delta: f64,
    exclude_admissible_from_candidates: bool,

    obstacle_mask: Vec<bool>,
    admissible_mask: Vec<bool>,
    candidate_mask: Vec<bool>,
    candidates: Vec<CellIndex>,
    sensor_adj: Vec<Vec<CellIndex>>,
    station_adj: Vec<Vec<CellIndex>>,
    sensor_dist: Vec<u16>,
    station_dist: Vec<u16>,
}

impl Scenario {
    /// Builds a scenario, checking that `mu` is defined on exactly the
    /// candidate cells and that the thresholds leave a nonempty tolerance band
    /// inside (0, 1).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: GridSpec,
        obstacles: BTreeSet<CellIndex>,
        region: StationRegion,
        mu: BTreeMap<CellIndex, f64>,
        theta: f64,
        epsilon: f64,
        delta: f64,
        exclude_admissible_from_candidates: bool,
    ) -> Result<Self> {
        let grid = GridSpec::new(grid.rows, grid.cols)?;
        let n = grid.cell_count();
        if !(theta > 0.0 && theta < 1.0) {
            return domain(format!("theta must lie in (0,1), got {theta}"));
        }
        if !(epsilon > 0.0 && theta - epsilon > 0.0 && theta + epsilon < 1.0) {
            return domain(format!(
                "epsilon must be positive with theta-epsilon > 0 and theta+epsilon < 1 (theta={theta}, epsilon={epsilon})"
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return domain(format!("delta must lie in (0,1), got {delta}"));
        }

        let mut obstacle_mask = vec![false; n];
        for &o in &obstacles {
            if !grid.contains(o) {
                return domain(format!("obstacle {o} outside {}x{} grid", grid.rows, grid.cols));
            }
            obstacle_mask[o.0] = true;
        }

        let admissible_mask: Vec<bool> = match &region {
            StationRegion::All => obstacle_mask.iter().map(|&o| !o).collect(),
            StationRegion::Cells(cells) => {
                let mut mask = vec![false; n];
                for &c in cells {
                    if !grid.contains(c) {
                        return domain(format!("station-admissible cell {c} outside grid"));
                    }
                    if obstacle_mask[c.0] {
                        return domain(format!("station-admissible cell {c} is an obstacle"));
                    }
                    mask[c.0] = true;
                }
                mask
            }
        };

        let candidate_mask: Vec<bool> = (0..n)
            .map(|i| !obstacle_mask[i] && !(exclude_admissible_from_candidates && admissible_mask[i]))
            .collect();
        let candidates: Vec<CellIndex> =
            (0..n).filter(|&i| candidate_mask[i]).map(CellIndex).collect();

        for (&cell, &p) in &mu {
            if !grid.contains(cell) || !candidate_mask[cell.0] {
                return domain(format!("mu defined on non-candidate cell {cell}"));
            }
            if !(0.0..=1.0).contains(&p) {
                return domain(format!("mu[{cell}] = {p} is not a probability"));
            }
        }
        if let Some(missing) = candidates.iter().find(|c| !mu.contains_key(c)) {
            return domain(format!("mu missing for candidate cell {missing}"));
        }

        let sensor_adj: Vec<Vec<CellIndex>> = (0..n)
            .map(|i| {
                if obstacle_mask[i] {
                    Vec::new()
                } else {
                    grid.king_ring(CellIndex(i)).filter(|m| !obstacle_mask[m.0]).collect()
                }
            })
            .collect();
        let station_adj: Vec<Vec<CellIndex>> = (0..n)
            .map(|i| {
                if admissible_mask[i] {
                    sensor_adj[i].iter().copied().filter(|m| admissible_mask[m.0]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let sensor_dist = all_pairs_bfs(&sensor_adj, |i| !obstacle_mask[i]);
        let station_dist = all_pairs_bfs(&station_adj, |i| admissible_mask[i]);

        Ok(Self {
            grid,
            obstacles,
            region,
            mu,
            theta,
            epsilon,
            delta,
            exclude_admissible_from_candidates,
            obstacle_mask,
            admissible_mask,
            candidate_mask,
            candidates,
            sensor_adj,
            station_adj,
            sensor_dist,
            station_dist,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn obstacles(&self) -> &BTreeSet<CellIndex> {
        &self.obstacles
    }

    pub fn station_region(&self) -> &StationRegion {
        &self.region
    }

    pub fn mu(&self) -> &BTreeMap<CellIndex, f64> {
        &self.mu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn excludes_admissible_from_candidates(&self) -> bool {
        self.exclude_admissible_from_candidates
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    /// Candidate cells, ascending.
    pub fn candidates(&self) -> &[CellIndex] {
        &self.candidates
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_obstacle(&self, cell: CellIndex) -> bool {
        self.obstacle_mask.get(cell.0).copied().unwrap_or(false)
    }

    pub fn is_admissible(&self, cell: CellIndex) -> bool {
        self.admissible_mask.get(cell.0).copied().unwrap_or(false)
    }

    pub fn is_candidate(&self, cell: CellIndex) -> bool {
        self.candidate_mask.get(cell.0).copied().unwrap_or(false)
    }

    /// Station-admissible cells, ascending.
    pub fn admissible_cells(&self) -> Vec<CellIndex> {
        (0..self.cell_count()).filter(|&i| self.admissible_mask[i]).map(CellIndex).collect()
    }

    /// Non-obstacle king neighbors of `l`, ascending. Never contains `l`.
    pub fn neighbors(&self, l: CellIndex) -> Result<&[CellIndex]> {
        if !self.grid.contains(l) {
            return domain(format!("cell {l} outside grid"));
        }
        if self.obstacle_mask[l.0] {
            return domain(format!("cell {l} is an obstacle"));
        }
        Ok(&self.sensor_adj[l.0])
    }

    /// Neighbors of an admissible cell that stations may move to.
    pub fn station_neighbors(&self, l: CellIndex) -> Result<&[CellIndex]> {
        if !self.is_admissible(l) {
            return domain(format!("cell {l} is not station-admissible"));
        }
        Ok(&self.station_adj[l.0])
    }

    /// Fewest sensor moves from `a` to `b`, or `None` when disconnected.
    pub fn sensor_distance(&self, a: CellIndex, b: CellIndex) -> Option<usize> {
        let d = self.sensor_dist[a.0 * self.cell_count() + b.0];
        (d != UNREACHABLE).then_some(d as usize)
    }

    /// Fewest station moves from `a` to `b` inside the admissible region.
    pub fn station_distance(&self, a: CellIndex, b: CellIndex) -> Option<usize> {
        let d = self.station_dist[a.0 * self.cell_count() + b.0];
        (d != UNREACHABLE).then_some(d as usize)
    }

    /// `{l in candidates : mu_l >= threshold}`. Ground truth; planners never call this.
    pub fn true_interesting_set(&self, threshold: f64) -> BTreeSet<CellIndex> {
        self.mu.iter().filter(|(_, &p)| p >= threshold).map(|(&c, _)| c).collect()
    }

    /// One character per cell: `#` obstacle, `=` admissible non-candidate,
    /// `*` mu >= theta, `.` otherwise. Stations `S` and sensors `d` override.
    pub fn ascii_map(&self, team: Option<&TeamState>) -> String {
        let mut out = String::new();
        for r in 0..self.grid.rows {
            for c in 0..self.grid.cols {
                let cell = self.grid.cell(r, c);
                let ch = match team {
                    Some(t) if t.station_cells.contains(&cell) => 'S',
                    Some(t) if t.sensor_cells.contains(&cell) => 'd',
                    _ if self.is_obstacle(cell) => '#',
                    _ if !self.is_candidate(cell) => '=',
                    _ if self.mu[&cell] >= self.theta => '*',
                    _ => '.',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

fn all_pairs_bfs(adj: &[Vec<CellIndex>], usable: impl Fn(usize) -> bool) -> Vec<u16> {
    let n = adj.len();
    let mut dist = vec![UNREACHABLE; n * n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        if !usable(src) {
            continue;
        }
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &m in &adj[u] {
                if row[m.0] == UNREACHABLE {
                    row[m.0] = du + 1;
                    queue.push_back(m.0);
                }
            }
        }
    }
    dist
}

/// Team sizes and motion/energy limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamConfig {
    pub n_sensors: usize,
    pub n_stations: usize,
    /// Sensor positions per sensing cycle (time steps `0..t_d`).
    pub t_d: usize,
    /// Station positions per sensing cycle.
    pub t_c: usize,
    /// Cap on sensing cycles per epoch.
    pub k_max_cycles: usize,
    /// Maximum sensors docked on one station at a cycle boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charger_cap: Option<usize>,
}

impl TeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 || self.n_stations == 0 {
            return domain("team needs at least one sensor and one station");
        }
        if self.t_c == 0 || self.t_c >= self.t_d {
            return domain(format!("need 1 <= t_c < t_d, got t_c={} t_d={}", self.t_c, self.t_d));
        }
        if self.k_max_cycles == 0 {
            return domain("k_max_cycles must be at least 1");
        }
        if self.charger_cap == Some(0) {
            return domain("charger_cap must be positive when set");
        }
        Ok(())
    }
}

/// Positions of every sensor and station at an epoch boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamState {
    #[serde(rename = "sensors")]
    pub sensor_cells: Vec<CellIndex>,
    #[serde(rename = "stations")]
    pub station_cells: Vec<CellIndex>,
}

impl TeamState {
    /// Stations on distinct admissible cells, sensors docked on stations.
    pub fn validate(&self, scenario: &Scenario, team: &TeamConfig) -> Result<()> {
        if self.sensor_cells.len() != team.n_sensors {
            return domain(format!(
                "expected {} sensor cells, got {}",
                team.n_sensors,
                self.sensor_cells.len()
            ));
        }
        if self.station_cells.len() != team.n_stations {
            return domain(format!(
                "expected {} station cells, got {}",
                team.n_stations,
                self.station_cells.len()
            ));
        }
        let mut seen = BTreeSet::new();
        for &s in &self.station_cells {
            if !scenario.is_admissible(s) {
                return domain(format!("station at {s} is not on an admissible cell"));
            }
            if !seen.insert(s) {
                return domain(format!("two stations share cell {s}"));
            }
        }
        for &d in &self.sensor_cells {
            if !scenario.grid().contains(d) || scenario.is_obstacle(d) {
                return domain(format!("sensor at {d} is not on a free cell"));
            }
            if !seen.contains(&d) {
                return domain(format!("sensor at {d} is not docked on a station"));
            }
        }
        Ok(())
    }

    /// Stations on the given cells with sensor `i` docked on station `i mod n_stations`.
    pub fn docked(stations: Vec<CellIndex>, n_sensors: usize) -> Self {
        let sensor_cells = (0..n_sensors).map(|i| stations[i % stations.len()]).collect();
        Self { sensor_cells, station_cells: stations }
    }
}

/// Scenario plus team description: the complete input of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub team: TeamConfig,
    pub initial: TeamState,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    #[serde(default = "default_schema_version")]
    schema_version: u32,
    grid: GridSpec,
    obstacles: Vec<CellIndex>,
    station_admissible: StationRegion,
    mu: BTreeMap<CellIndex, f64>,
    theta: f64,
    epsilon: f64,
    delta: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    exclude_admissible_from_candidates: bool,
    team: TeamConfig,
    initial: TeamState,
}

impl ScenarioFile {
    pub fn new(scenario: Scenario, team: TeamConfig, initial: TeamState) -> Result<Self> {
        team.validate()?;
        initial.validate(&scenario, &team)?;
        Ok(Self { scenario, team, initial })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return domain(format!("unsupported scenario schema_version {}", doc.schema_version));
        }
        let scenario = Scenario::new(
            doc.grid,
            doc.obstacles.into_iter().collect(),
            doc.station_admissible,
            doc.mu,
            doc.theta,
            doc.epsilon,
            doc.delta,
            doc.exclude_admissible_from_candidates,
        )?;
        Self::new(scenario, doc.team, doc.initial)
    }

    pub fn to_json(&self) -> String {
        let s = &self.scenario;
        let doc = ScenarioDoc {
            schema_version: SCHEMA_VERSION,
            grid: s.grid,
            obstacles: s.obstacles.iter().copied().collect(),
            station_admissible: s.region.clone(),
            mu: s.mu.clone(),
            theta: s.theta,
            epsilon: s.epsilon,
            delta: s.delta,
            exclude_admissible_from_candidates: s.exclude_admissible_from_candidates,
            team: self.team,
            initial: self.initial.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("scenario document serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Parameters of the randomized scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub rows: usize,
    pub cols: usize,
    pub n_obstacles: usize,
    pub n_interesting: usize,
    /// Interesting cells draw mu from `[mu_worst, 1]`, the rest from `[0, 1 - mu_worst]`.
    pub mu_worst: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub team: TeamConfig,
    #[serde(default = "all_region")]
    pub station_region: StationRegion,
    #[serde(default)]
    pub exclude_admissible_from_candidates: bool,
    /// Explicit initial station cells; otherwise the smallest admissible cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station_start: Option<Vec<CellIndex>>,
}

fn all_region() -> StationRegion {
    StationRegion::All
}

impl GeneratorParams {
    /// Desk-scale defaults: 6x6 grid, 5 obstacles, 4 interesting cells,
    /// four sensors and two stations with `T_d = 8`, `T_c = 4`.
    pub fn desk_scale() -> Self {
        Self {
            rows: 6,
            cols: 6,
            n_obstacles: 5,
            n_interesting: 4,
            mu_worst: 0.8,
            theta: 0.5,
            epsilon: 0.05,
            delta: 0.1,
            team: TeamConfig {
                n_sensors: 4,
                n_stations: 2,
                t_d: 8,
                t_c: 4,
                k_max_cycles: 4,
                charger_cap: None,
            },
            station_region: StationRegion::All,
            exclude_admissible_from_candidates: false,
            station_start: None,
        }
    }

    /// Full-size simulation setup: 10x10 grid with 16 obstacles, 10 interesting
    /// cells, ten sensors and five stations.
    pub fn full_scale() -> Self {
        Self {
            rows: 10,
            cols: 10,
            n_obstacles: 16,
            n_interesting: 10,
            team: TeamConfig {
                n_sensors: 10,
                n_stations: 5,
                t_d: 8,
                t_c: 4,
                k_max_cycles: 4,
                charger_cap: None,
            },
            ..Self::desk_scale()
        }
    }

    /// Hardware-experiment layout: 6x6 grid whose second column and third
    /// row are roads (the station region, excluded from classification),
    /// 11 obstacles and 4 interesting cells.
    pub fn hardware_like() -> Self {
        let grid = GridSpec { rows: 6, cols: 6 };
        let roads = (0..6).flat_map(|i| [grid.cell(i, 1), grid.cell(2, i)]).collect();
        Self {
            n_obstacles: 11,
            station_region: StationRegion::Cells(roads),
            exclude_admissible_from_candidates: true,
            ..Self::desk_scale()
        }
    }
}

/// Output of [`generate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub file: ScenarioFile,
    /// Cells whose mu was drawn from the interesting interval.
    pub designated_interesting: BTreeSet<CellIndex>,
    /// Obstacle draws rejected before this one was accepted.
    pub rejected_draws: usize,
}

/// Draws a random scenario, deterministic in `seed`.
///
/// Obstacles are sampled without replacement. A draw is rejected and redrawn
/// when some candidate cell cannot be reached from the initial team cells or
/// when the admissible region cannot host every station on distinct cells.
pub fn generate_scenario(params: &GeneratorParams, seed: u64) -> Result<GeneratedScenario> {
    let grid = GridSpec::new(params.rows, params.cols)?;
    params.team.validate()?;
    let n = grid.cell_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut reserved = vec![false; n];
    if let StationRegion::Cells(cells) = &params.station_region {
        for c in cells {
            if !grid.contains(*c) {
                return Err(Error::Generation(format!("admissible cell {c} outside grid")));
            }
            reserved[c.0] = true;
        }
    }
    if let Some(start) = &params.station_start {
        for c in start {
            if !grid.contains(*c) {
                return Err(Error::Generation(format!("station start {c} outside grid")));
            }
            reserved[c.0] = true;
        }
    }
    let obstacle_pool: Vec<usize> = (0..n).filter(|&i| !reserved[i]).collect();
    if params.n_obstacles > obstacle_pool.len() {
        return Err(Error::Generation(format!(
            "cannot place {} obstacles on {} free cells",
            params.n_obstacles,
            obstacle_pool.len()
        )));
    }

    let mut last_reason = String::new();
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let obstacles: BTreeSet<CellIndex> = sample(&mut rng, obstacle_pool.len(), params.n_obstacles)
            .into_iter()
            .map(|k| CellIndex(obstacle_pool[k]))
            .collect();
        let is_obstacle = |c: usize| obstacles.contains(&CellIndex(c));
        let admissible: Vec<CellIndex> = match &params.station_region {
            StationRegion::All => (0..n).filter(|&i| !is_obstacle(i)).map(CellIndex).collect(),
            StationRegion::Cells(cells) => cells.iter().copied().collect(),
        };
        let stations: Vec<CellIndex> = match &params.station_start {
            Some(start) => start.clone(),
            None => admissible.iter().copied().take(params.team.n_stations).collect(),
        };
        if stations.len() < params.team.n_stations {
            last_reason = format!("admissible region holds fewer than {} stations", params.team.n_stations);
            continue;
        }
        let admissible_set: BTreeSet<CellIndex> = admissible.iter().copied().collect();
        let candidates: Vec<CellIndex> = (0..n)
            .filter(|&i| !is_obstacle(i))
            .map(CellIndex)
            .filter(|c| !(params.exclude_admissible_from_candidates && admissible_set.contains(c)))
            .collect();
        if candidates.len() < params.n_interesting {
            last_reason = format!(
                "only {} candidate cells for {} interesting ones",
                candidates.len(),
                params.n_interesting
            );
            continue;
        }
        let reach = flood_fill(grid, &obstacles, &stations);
        if let Some(c) = candidates.iter().find(|c| !reach[c.0]) {
            last_reason = format!("candidate cell {c} unreachable (attempt {attempt})");
            continue;
        }

        let designated: BTreeSet<CellIndex> = sample(&mut rng, candidates.len(), params.n_interesting)
            .into_iter()
            .map(|k| candidates[k])
            .collect();
        let mut mu = BTreeMap::new();
        for &c in &candidates {
            let p = if designated.contains(&c) {
                rng.gen_range(params.mu_worst..=1.0)
            } else {
                rng.gen_range(0.0..=1.0 - params.mu_worst)
            };
            mu.insert(c, p);
        }
        let scenario = Scenario::new(
            grid,
            obstacles,
            params.station_region.clone(),
            mu,
            params.theta,
            params.epsilon,
            params.delta,
            params.exclude_admissible_from_candidates,
        )?;
        if let Some(c) = out_of_cycle_range(&scenario, &stations, params.team.t_d) {
            last_reason = format!("candidate cell {c} not coverable within one sensing cycle (attempt {attempt})");
            continue;
        }
        let initial = TeamState::docked(stations, params.team.n_sensors);
        let file = ScenarioFile::new(scenario, params.team, initial)?;
        return Ok(GeneratedScenario { file, designated_interesting: designated, rejected_draws: attempt });
    }
    Err(Error::Generation(format!(
        "no valid scenario after {MAX_GENERATION_ATTEMPTS} draws: {last_reason}"
    )))
}

/// First candidate that no sensor can visit and leave again within one cycle
/// from a dock the stations can reach.
fn out_of_cycle_range(s: &Scenario, stations: &[CellIndex], t_d: usize) -> Option<CellIndex> {
    let docks: Vec<CellIndex> = s
        .admissible_cells()
        .into_iter()
        .filter(|&a| stations.iter().any(|&st| s.station_distance(st, a).is_some()))
        .collect();
    s.candidates().iter().copied().find(|&c| {
        let near = docks.iter().filter_map(|&a| s.sensor_distance(a, c)).min();
        !near.is_some_and(|d| 2 * d < t_d)
    })
}

fn flood_fill(grid: GridSpec, obstacles: &BTreeSet<CellIndex>, seeds: &[CellIndex]) -> Vec<bool> {
    let mut seen = vec![false; grid.cell_count()];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if !obstacles.contains(&s) && !seen[s.0] {
            seen[s.0] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for m in grid.king_ring(u) {
            if !seen[m.0] && !obstacles.contains(&m) {
                seen[m.0] = true;
                queue.push_back(m);
            }
        }
    }
    seen
}
