//! Oracles and instance builders shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spatial_bandit::environment::{CellIndex, GridSpec, Scenario, StationRegion, TeamConfig, TeamState};
use spatial_bandit::ip_model::PlanningProblem;

/// A single-station instance small enough for exhaustive search.
#[derive(Debug, Clone)]
pub struct Tiny {
    pub rows: usize,
    pub cols: usize,
    pub obstacles: BTreeSet<usize>,
    /// Station region; `None` means every free cell.
    pub region: Option<BTreeSet<usize>>,
    pub n_sensors: usize,
    pub t_d: usize,
    pub t_c: usize,
    pub k: usize,
    pub station: usize,
    pub goals: Vec<usize>,
}

impl Tiny {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let rows = rng.gen_range(1..=4);
        let cols = rng.gen_range(if rows == 1 { 3 } else { 2 }..=4);
        let n = rows * cols;
        let station = rng.gen_range(0..n);
        let others: Vec<usize> = (0..n).filter(|&c| c != station).collect();
        let n_obs = rng.gen_range(0..=3.min(n - 2));
        let obstacles: BTreeSet<usize> = others.choose_multiple(rng, n_obs).copied().collect();
        let free: Vec<usize> = (0..n).filter(|c| !obstacles.contains(c)).collect();
        let region = rng.gen_bool(0.4).then(|| {
            let mut r: BTreeSet<usize> = free.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            r.insert(station);
            r
        });
        let t_d = rng.gen_range(3..=6);
        let t_c = rng.gen_range(1..t_d);
        let n_goals = rng.gen_range(1..=3.min(free.len()));
        let goals = free.choose_multiple(rng, n_goals).copied().collect();
        Tiny {
            rows,
            cols,
            obstacles,
            region,
            n_sensors: rng.gen_range(1..=2),
            t_d,
            t_c,
            k: rng.gen_range(1..=2),
            station,
            goals,
        }
    }

    pub fn scenario(&self) -> Arc<Scenario> {
        let grid = GridSpec::new(self.rows, self.cols).unwrap();
        let obstacles: BTreeSet<CellIndex> = self.obstacles.iter().map(|&c| CellIndex(c)).collect();
        let region = match &self.region {
            None => StationRegion::All,
            Some(r) => StationRegion::Cells(r.iter().map(|&c| CellIndex(c)).collect()),
        };
        let mu: BTreeMap<CellIndex, f64> =
            (0..self.rows * self.cols).filter(|c| !self.obstacles.contains(c)).map(|c| (CellIndex(c), 0.3)).collect();
        Arc::new(Scenario::new(grid, obstacles, region, mu, 0.5, 0.05, 0.1, false).unwrap())
    }

    pub fn problem(&self) -> PlanningProblem {
        let team = TeamConfig {
            n_sensors: self.n_sensors,
            n_stations: 1,
            t_d: self.t_d,
            t_c: self.t_c,
            k_max_cycles: self.k,
            charger_cap: None,
        };
        let start = TeamState::docked(vec![CellIndex(self.station)], self.n_sensors);
        let goals = self.goals.iter().map(|&g| CellIndex(g)).collect();
        PlanningProblem::new(self.scenario(), team, start, goals).unwrap()
    }

    fn free(&self, c: usize) -> bool {
        !self.obstacles.contains(&c)
    }

    fn admissible(&self, c: usize) -> bool {
        self.free(c) && self.region.as_ref().is_none_or(|r| r.contains(&c))
    }

    /// Cells one king move away or the same cell, read off row/column offsets.
    fn moves(&self, c: usize) -> Vec<usize> {
        let (r, q) = ((c / self.cols) as i64, (c % self.cols) as i64);
        let mut out = Vec::new();
        for dr in -1..=1 {
            for dq in -1..=1 {
                let (nr, nq) = (r + dr, q + dq);
                if nr >= 0 && nq >= 0 && nr < self.rows as i64 && nq < self.cols as i64 {
                    out.push((nr * self.cols as i64 + nq) as usize);
                }
            }
        }
        out
    }

    fn goal_bits(&self, cells: &[usize]) -> u32 {
        self.goals.iter().enumerate().filter(|(_, g)| cells.contains(g)).fold(0, |m, (b, _)| m | 1 << b)
    }

    /// Every cell a station path of `t_c` positions can end on.
    fn station_ends(&self, start: usize) -> BTreeSet<usize> {
        fn walk(t: &Tiny, at: usize, left: usize, out: &mut BTreeSet<usize>) {
            if left == 0 {
                out.insert(at);
                return;
            }
            for m in t.moves(at).into_iter().filter(|&m| t.admissible(m)) {
                walk(t, m, left - 1, out);
            }
        }
        let mut out = BTreeSet::new();
        walk(self, start, self.t_c - 1, &mut out);
        out
    }

    /// Goal masks of every joint sensor route from `from` to `to`, stepping
    /// all sensors together and rejecting shared cells at inner steps.
    fn sensor_masks(&self, from: usize, to: usize) -> HashSet<u32> {
        let start = vec![from; self.n_sensors];
        let mut layer: HashSet<(Vec<usize>, u32)> = HashSet::from([(start.clone(), self.goal_bits(&start))]);
        for j in 1..self.t_d {
            let inner = j < self.t_d - 1;
            let mut next = HashSet::new();
            for (cells, mask) in &layer {
                let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
                for &c in cells {
                    let opts: Vec<usize> = self.moves(c).into_iter().filter(|&m| self.free(m)).collect();
                    tuples = tuples
                        .into_iter()
                        .flat_map(|t| opts.iter().map(move |&m| [t.clone(), vec![m]].concat()))
                        .collect();
                }
                for t in tuples {
                    if inner && (1..t.len()).any(|a| t[..a].contains(&t[a])) {
                        continue;
                    }
                    if !inner && t.iter().any(|&c| c != to) {
                        continue;
                    }
                    let m = mask | self.goal_bits(&t);
                    next.insert((t, m));
                }
            }
            layer = next;
        }
        layer.into_iter().map(|(_, m)| m).collect()
    }

    /// Fewest cycles covering every goal within `k`, by breadth-first search
    /// over (station cell, covered goals) at cycle boundaries.
    pub fn oracle_min_cycles(&self) -> Option<usize> {
        let full = (1u32 << self.goals.len()) - 1;
        let mut frontier: BTreeSet<(usize, u32)> = BTreeSet::from([(self.station, 0)]);
        for k in 1..=self.k {
            let mut next = BTreeSet::new();
            for &(s, covered) in &frontier {
                for e in self.station_ends(s) {
                    for m in self.sensor_masks(s, e) {
                        next.insert((e, covered | m));
                    }
                }
            }
            if next.iter().any(|&(_, m)| m == full) {
                return Some(k);
            }
            frontier = next;
        }
        None
    }
}

/// Minimum cost over all permutations and the lexicographically first
/// permutation reaching it.
pub fn brute_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> (f64, Vec<usize>) {
    fn rec(i: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, acc: f64, cost: &dyn Fn(usize, usize) -> f64, best: &mut (f64, Vec<usize>)) {
        if i == n {
            if acc < best.0 - 1e-12 {
                *best = (acc, cur.clone());
            }
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(i + 1, n, used, cur, acc + cost(i, j), cost, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(0, n, &mut vec![false; n], &mut Vec::new(), 0.0, &cost, &mut best);
    best
}

/// Arbitrary-precision evaluation of the bound formulas.
pub struct Precise {
    cc: Consts,
}

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

impl Precise {
    pub fn new() -> Self {
        Self { cc: Consts::new().expect("constants cache") }
    }

    pub fn f(x: f64) -> BigFloat {
        BigFloat::from_f64(x, P)
    }

    fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(P, RM, &mut self.cc)
    }

    pub fn radius(&mut self, n: u64, c: usize, delta: f64) -> BigFloat {
        let nn = BigFloat::from_u64(n, P);
        let two = Self::f(2.0);
        let lg = two.mul(&nn, P, RM).log2(P, RM, &mut self.cc);
        let iterated = self.ln(&lg);
        let union = self.ln(&Self::f(12.0).mul(&BigFloat::from_u64(c as u64, P), P, RM).div(&Self::f(delta), P, RM));
        let num = two.mul(&iterated, P, RM).add(&union, P, RM);
        two.mul(&num.div(&two.mul(&nn, P, RM), P, RM).sqrt(P, RM), P, RM)
    }

    pub fn gap(&mut self, mu: f64, theta: f64, eps: f64) -> BigFloat {
        Self::f(mu).sub(&Self::f(theta), P, RM).abs().add(&Self::f(eps), P, RM)
    }

    pub fn visits(&mut self, gap: &BigFloat, b: usize, c: usize, delta: f64) -> BigFloat {
        let g2 = gap.mul(gap, P, RM);
        let root = Self::f(3.0).mul(&BigFloat::from_u64(c as u64, P), P, RM).div(&Self::f(delta), P, RM).sqrt(P, RM);
        let inner = self.ln(&Self::f(192.0).div(&g2, P, RM).mul(&root, P, RM));
        let outer = self.ln(&Self::f(4.0).mul(&root, P, RM).mul(&inner, P, RM));
        Self::f(16.0).div(&BigFloat::from_u64(b as u64, P).mul(&g2, P, RM), P, RM).mul(&outer, P, RM)
    }

    /// Epoch bound over the candidate cells of `s`.
    pub fn epoch_bound(&mut self, s: &Scenario, d: usize, b: usize) -> BigFloat {
        let c = s.n_candidates();
        let mut cells: Vec<(f64, BigFloat)> = s
            .mu()
            .values()
            .map(|&mu| {
                let g = self.gap(mu, s.theta(), s.epsilon());
                let v = self.visits(&g, b, c, s.delta());
                ((mu - s.theta()).abs() + s.epsilon(), v)
            })
            .collect();
        // Smallest gap first, then the largest gaps.
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut set = vec![cells.remove(0)];
        let take = (d - 1).min(cells.len());
        let cut = cells.len() - take;
        set.extend(cells.split_off(cut));
        let mut outside = Self::f(0.0);
        for (_, v) in &cells {
            outside = outside.add(v, P, RM);
        }
        let mut inside = Self::f(0.0);
        for (_, v) in &set {
            if v.cmp(&inside) == Some(1) {
                inside = v.clone();
            }
        }
        outside.div(&BigFloat::from_u64(d as u64, P), P, RM).add(&inside, P, RM)
    }

    /// Relative error of `got` against `want`.
    pub fn rel_err_ok(got: f64, want: &BigFloat, tol: f64) -> bool {
        let diff = Self::f(got).sub(want, P, RM).abs();
        let bound = want.abs().mul(&Self::f(tol), P, RM);
        diff.cmp(&bound).is_some_and(|o| o <= 0)
    }
}

/// Deterministic RNG for test instance streams.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
