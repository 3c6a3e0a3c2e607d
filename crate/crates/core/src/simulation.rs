//! End-to-end classification runs: goal selection, routing, collision repair,
//! measurement along the sensor paths and keep/reject updates, epoch after
//! epoch until every candidate cell is classified.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::deconflict_plan;
use crate::bandit::{BanditState, Thresholds};
use crate::bounds;
use crate::environment::{CellIndex, Scenario, TeamConfig, TeamState, SCHEMA_VERSION};
use crate::error::{domain, Error, Result};
use crate::ip_model::{validate_plan, PlanningProblem};
use crate::solver::{self, SolveOptions, SolveStatus};

/// Epoch cap used when none is given, in multiples of `ceil(P_max)`.
pub const DEFAULT_EPOCH_CAP_FACTOR: u64 = 10;

/// Sensor model: `batch_size` Bernoulli draws per visit, each flipped with
/// probability `degraded_flip_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub batch_size: usize,
    #[serde(default)]
    pub degraded_flip_prob: f64,
    pub rng_seed: u64,
}

impl MeasurementModel {
    pub fn new(batch_size: usize, degraded_flip_prob: f64, rng_seed: u64) -> Result<Self> {
        let m = Self { batch_size, degraded_flip_prob, rng_seed };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return domain("batch size must be at least 1");
        }
        if !(0.0..0.5).contains(&self.degraded_flip_prob) {
            return domain(format!("flip probability must lie in [0, 0.5), got {}", self.degraded_flip_prob));
        }
        Ok(())
    }

    /// Independent stream for the `visit`-th measurement of `cell`, so that a
    /// change of route does not shift the draws seen at other cells.
    pub fn stream(&self, cell: CellIndex, visit: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.rng_seed.to_le_bytes());
        key[8..16].copy_from_slice(&(cell.0 as u64).to_le_bytes());
        key[16..24].copy_from_slice(&visit.to_le_bytes());
        key[24..].copy_from_slice(b"sensing\0");
        ChaCha8Rng::from_seed(key)
    }
}

/// One batch of measurements at `l`: the base draws come first, then the flips.
pub fn sample_cell(model: &MeasurementModel, scenario: &Scenario, l: CellIndex, rng: &mut impl RngCore) -> Result<Vec<bool>> {
    let Some(&mu) = scenario.mu().get(&l) else {
        return domain(format!("cell {l} is not a candidate"));
    };
    let mut out: Vec<bool> = (0..model.batch_size).map(|_| rng.gen_bool(mu)).collect();
    if model.degraded_flip_prob > 0.0 {
        for v in &mut out {
            if rng.gen_bool(model.degraded_flip_prob) {
                *v = !*v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    /// Epoch goals per epoch (D).
    pub d_goals: usize,
    /// Stop after this many epochs; defaults to a multiple of `ceil(P_max)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_cap: Option<u64>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub deconflict_stations: bool,
}

impl RunParams {
    pub fn new(d_goals: usize) -> Self {
        Self { d_goals, epoch_cap: None, solver: SolveOptions::default(), deconflict_stations: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub goals: Vec<CellIndex>,
    pub cycles_used: usize,
    pub solver_status: SolveStatus,
    pub solver_time_s: f64,
    pub solver_nodes: u64,
    /// Binary outcomes collected this epoch.
    pub samples_drawn: u64,
    /// Cells classified at the end of this epoch.
    pub kept: Vec<CellIndex>,
    pub rejected: Vec<CellIndex>,
    pub keep_size: usize,
    pub reject_size: usize,
    pub unclassified: usize,
    /// Cells with `mu >= theta + epsilon` already kept (ground-truth telemetry).
    pub interesting_kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: usize,
    pub seed: u64,
    pub d_goals: usize,
    pub batch_size: usize,
    pub degraded_flip_prob: f64,
    pub t_d: usize,
    pub n_candidates: usize,
    /// Size of the set of cells with `mu >= theta + epsilon`.
    pub n_interesting: usize,
    pub epoch_cap: u64,
    pub epochs: Vec<EpochRecord>,
    pub terminated: bool,
    pub capped: bool,
    /// Planner failure that stopped the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub p_term: Option<u64>,
    /// First epoch after which every cell with `mu >= theta + epsilon` is kept.
    pub epochs_to_interesting: Option<u64>,
    pub total_cycles: u64,
    /// Sensing cycles times cycle length.
    pub total_time_steps: u64,
    pub final_keep: BTreeSet<CellIndex>,
    pub final_reject: BTreeSet<CellIndex>,
    pub final_state: TeamState,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return domain(format!("unsupported run record schema_version {}", r.schema_version));
        }
        Ok(r)
    }

    /// Same record with wall-clock fields zeroed, for byte-stable output.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.solver_time_s = 0.0;
        }
        r
    }

    /// Per-epoch CSV rows.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for e in &self.epochs {
            w.serialize(EpochCsvRow {
                run_id: self.run_id,
                epoch: e.epoch,
                goals_count: e.goals.len(),
                cycles_used: e.cycles_used,
                solver_time_s: e.solver_time_s,
                keep_size: e.keep_size,
                reject_size: e.reject_size,
                unclassified: e.unclassified,
            })?;
        }
        Ok(())
    }

    /// Fraction of candidate cells classified after each epoch, starting with epoch 0.
    pub fn progress(&self) -> Vec<(u64, f64, f64)> {
        let frac = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let mut out = vec![(0, frac(0, self.n_candidates), frac(0, self.n_interesting))];
        for e in &self.epochs {
            out.push((
                e.epoch,
                frac(e.keep_size + e.reject_size, self.n_candidates),
                frac(e.interesting_kept, self.n_interesting),
            ));
        }
        out
    }
}

#[derive(Serialize)]
struct EpochCsvRow {
    run_id: usize,
    epoch: u64,
    goals_count: usize,
    cycles_used: usize,
    solver_time_s: f64,
    keep_size: usize,
    reject_size: usize,
    unclassified: usize,
}

/// Writes the per-epoch CSV of several records.
pub fn records_csv<W: std::io::Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        r.write_csv(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

/// A classification run in progress.
pub struct Simulation {
    scenario: Arc<Scenario>,
    team: TeamConfig,
    model: MeasurementModel,
    params: RunParams,
    bandit: BanditState,
    state: TeamState,
    visits: BTreeMap<CellIndex, u64>,
    interesting: BTreeSet<CellIndex>,
    record: RunRecord,
}

impl Simulation {
    pub fn new(
        scenario: Arc<Scenario>,
        team: TeamConfig,
        initial: TeamState,
        model: MeasurementModel,
        params: RunParams,
        run_id: usize,
    ) -> Result<Self> {
        model.validate()?;
        params.solver.validate()?;
        team.validate()?;
        initial.validate(&scenario, &team)?;
        if params.d_goals == 0 {
            return domain("epoch goal count D must be at least 1");
        }
        let epoch_cap = match params.epoch_cap {
            Some(c) => c,
            None => {
                let b = bounds::p_max(&scenario, params.d_goals, model.batch_size)?;
                (DEFAULT_EPOCH_CAP_FACTOR * b.p_max_epochs).max(1)
            }
        };
        let interesting = scenario.true_interesting_set(scenario.theta() + scenario.epsilon());
        let bandit = BanditState::for_scenario(&scenario);
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            run_id,
            seed: model.rng_seed,
            d_goals: params.d_goals,
            batch_size: model.batch_size,
            degraded_flip_prob: model.degraded_flip_prob,
            t_d: team.t_d,
            n_candidates: scenario.n_candidates(),
            n_interesting: interesting.len(),
            epoch_cap,
            epochs: Vec::new(),
            terminated: bandit.is_terminated(),
            capped: false,
            aborted: None,
            p_term: bandit.is_terminated().then_some(0),
            epochs_to_interesting: interesting.is_empty().then_some(0),
            total_cycles: 0,
            total_time_steps: 0,
            final_keep: BTreeSet::new(),
            final_reject: BTreeSet::new(),
            final_state: initial.clone(),
        };
        Ok(Self { scenario, team, model, params, bandit, state: initial, visits: BTreeMap::new(), interesting, record })
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    pub fn team_state(&self) -> &TeamState {
        &self.state
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn is_done(&self) -> bool {
        self.record.terminated || self.record.capped || self.record.aborted.is_some()
    }

    /// Plans and executes one epoch. A planner failure ends the run with the
    /// reason stored in the record; an invalid plan is an error.
    pub fn run_epoch(&mut self) -> Result<()> {
        if self.is_done() {
            return domain("run has already finished");
        }
        let goals = self.bandit.select_epoch_goals(self.params.d_goals, self.scenario.delta())?;
        let problem = PlanningProblem::new(
            self.scenario.clone(),
            self.team,
            self.state.clone(),
            goals.iter().copied().collect(),
        )?;
        let outcome = match solver::plan(&problem, &self.params.solver) {
            Ok(o) => o,
            Err(Error::Infeasible(msg)) => {
                self.record.aborted = Some(format!("epoch {}: {msg}", self.bandit.epoch + 1));
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let plan = deconflict_plan(&self.scenario, &outcome.plan, self.params.deconflict_stations)?;
        if let Some(v) = validate_plan(&plan, &problem).first() {
            return Err(Error::InvalidPlan(format!("after collision repair: {v}")));
        }

        let mut samples = 0u64;
        for k in 0..plan.cycles_used {
            // Step 0 is the same instant as the previous step `T_d - 1`.
            for j in 1..self.team.t_d {
                for path in &plan.sensor_paths {
                    let cell = path[k][j];
                    if !self.scenario.is_candidate(cell) || self.bandit.is_classified(cell) {
                        continue;
                    }
                    let visit = self.visits.entry(cell).or_default();
                    let mut rng = self.model.stream(cell, *visit);
                    *visit += 1;
                    let batch = sample_cell(&self.model, &self.scenario, cell, &mut rng)?;
                    samples += batch.len() as u64;
                    self.bandit.record_samples(cell, &batch)?;
                }
            }
        }
        let before_keep = self.bandit.keep.clone();
        let before_reject = self.bandit.reject.clone();
        self.bandit.update_sets(Thresholds::of(&self.scenario));
        self.state = plan.final_state();

        let p = self.bandit.epoch;
        let interesting_kept = self.interesting.iter().filter(|c| self.bandit.keep.contains(c)).count();
        let r = &mut self.record;
        r.epochs.push(EpochRecord {
            epoch: p,
            goals,
            cycles_used: plan.cycles_used,
            solver_status: outcome.result.status,
            solver_time_s: outcome.result.solve_time.as_secs_f64(),
            solver_nodes: outcome.result.nodes,
            samples_drawn: samples,
            kept: self.bandit.keep.difference(&before_keep).copied().collect(),
            rejected: self.bandit.reject.difference(&before_reject).copied().collect(),
            keep_size: self.bandit.keep.len(),
            reject_size: self.bandit.reject.len(),
            unclassified: self.bandit.n_candidates() - self.bandit.keep.len() - self.bandit.reject.len(),
            interesting_kept,
        });
        r.total_cycles += plan.cycles_used as u64;
        r.total_time_steps += (plan.cycles_used * self.team.t_d) as u64;
        if r.epochs_to_interesting.is_none() && interesting_kept == self.interesting.len() {
            r.epochs_to_interesting = Some(p);
        }
        if self.bandit.is_terminated() {
            r.terminated = true;
            r.p_term = Some(p);
        } else if p >= r.epoch_cap {
            r.capped = true;
        }
        Ok(())
    }

    pub fn finish(mut self) -> RunRecord {
        self.record.final_keep = self.bandit.keep.clone();
        self.record.final_reject = self.bandit.reject.clone();
        self.record.final_state = self.state.clone();
        self.record
    }
}

/// Runs epochs until termination, the epoch cap, or a planner failure.
pub fn run(
    scenario: Arc<Scenario>,
    team: TeamConfig,
    initial: TeamState,
    model: MeasurementModel,
    params: RunParams,
    run_id: usize,
) -> Result<RunRecord> {
    let mut sim = Simulation::new(scenario, team, initial, model, params, run_id)?;
    while !sim.is_done() {
        sim.run_epoch()?;
    }
    Ok(sim.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmaxEstimate {
    /// Largest cycle count over the solved trials.
    pub k_max: Option<usize>,
    pub trials: usize,
    /// Cycles used per trial, `None` where the trial failed.
    pub cycles: Vec<Option<usize>>,
    pub failures: Vec<TrialFailure>,
}

/// Redraws of a trial's docked configuration before it is used as is.
const MAX_START_DRAWS: usize = 100;

/// Whether the docked sensors can take distinct cells one move later, which
/// every cycle requires and every reachable boundary state allows.
fn can_leave_docks(scenario: &Scenario, sensors: &[CellIndex]) -> bool {
    let opts: Vec<Vec<CellIndex>> = sensors
        .iter()
        .map(|&s| {
            let mut v = scenario.neighbors(s).map(|n| n.to_vec()).unwrap_or_default();
            if !v.contains(&s) {
                v.push(s);
            }
            v
        })
        .collect();
    fn augment(i: usize, opts: &[Vec<CellIndex>], seen: &mut BTreeSet<CellIndex>, owner: &mut BTreeMap<CellIndex, usize>) -> bool {
        for &c in &opts[i] {
            if !seen.insert(c) {
                continue;
            }
            let free = match owner.get(&c) {
                None => true,
                Some(&o) => augment(o, opts, seen, owner),
            };
            if free {
                owner.insert(c, i);
                return true;
            }
        }
        false
    }
    let mut owner = BTreeMap::new();
    (0..sensors.len()).all(|i| augment(i, &opts, &mut BTreeSet::new(), &mut owner))
}

/// Monte-Carlo estimate of the worst cycles-per-epoch: random goal sets of
/// size `d_goals` from random docked team configurations.
pub fn estimate_kmax(
    scenario: Arc<Scenario>,
    team: TeamConfig,
    d_goals: usize,
    trials: usize,
    seed: u64,
    options: &SolveOptions,
) -> Result<KmaxEstimate> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    if d_goals == 0 {
        return domain("epoch goal count D must be at least 1");
    }
    team.validate()?;
    let admissible = scenario.admissible_cells();
    if admissible.len() < team.n_stations {
        return domain("admissible region cannot host every station");
    }
    let cap = team.charger_cap.unwrap_or(usize::MAX);
    if cap.saturating_mul(team.n_stations) < team.n_sensors {
        return domain("charger capacity cannot dock every sensor");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut est = KmaxEstimate { k_max: None, trials, cycles: Vec::with_capacity(trials), failures: Vec::new() };
    for trial in 0..trials {
        let mut draw = || {
            let stations: Vec<CellIndex> = admissible.choose_multiple(&mut rng, team.n_stations).copied().collect();
            let mut load = vec![0usize; stations.len()];
            let sensors: Vec<CellIndex> = (0..team.n_sensors)
                .map(|_| {
                    let open: Vec<usize> = (0..stations.len()).filter(|&a| load[a] < cap).collect();
                    let a = *open.choose(&mut rng).expect("capacity checked above");
                    load[a] += 1;
                    stations[a]
                })
                .collect();
            (stations, sensors)
        };
        let mut config = draw();
        for _ in 1..MAX_START_DRAWS {
            if can_leave_docks(&scenario, &config.1) {
                break;
            }
            config = draw();
        }
        let (stations, sensors) = config;
        let goals: BTreeSet<CellIndex> =
            scenario.candidates().choose_multiple(&mut rng, d_goals).copied().collect();
        let start = TeamState { sensor_cells: sensors, station_cells: stations };
        let result = PlanningProblem::new(scenario.clone(), team, start, goals)
            .and_then(|p| solver::plan(&p, options));
        match result {
            Ok(o) => {
                let c = o.plan.cycles_used;
                est.k_max = Some(est.k_max.map_or(c, |m| m.max(c)));
                est.cycles.push(Some(c));
            }
            Err(e @ (Error::Infeasible(_) | Error::Domain(_))) => {
                est.cycles.push(None);
                est.failures.push(TrialFailure { trial, message: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate_scenario, GeneratorParams, GridSpec, StationRegion};

    fn line(mus: &[f64]) -> Arc<Scenario> {
        let grid = GridSpec::new(1, mus.len()).unwrap();
        let mu = mus.iter().enumerate().map(|(i, &m)| (CellIndex(i), m)).collect();
        Arc::new(Scenario::new(grid, BTreeSet::new(), StationRegion::All, mu, 0.5, 0.05, 0.1, false).unwrap())
    }

    fn mean_of(model: MeasurementModel, s: &Scenario, batches: u64) -> f64 {
        let mut ones = 0usize;
        for v in 0..batches {
            let mut rng = model.stream(CellIndex(0), v);
            ones += sample_cell(&model, s, CellIndex(0), &mut rng).unwrap().iter().filter(|&&b| b).count();
        }
        ones as f64 / (batches as usize * model.batch_size) as f64
    }

    #[test]
    fn certain_cell_always_reads_one() {
        let s = line(&[1.0]);
        let m = MeasurementModel::new(30, 0.0, 7).unwrap();
        let mut rng = m.stream(CellIndex(0), 0);
        assert!(sample_cell(&m, &s, CellIndex(0), &mut rng).unwrap().iter().all(|&b| b));
        assert!(sample_cell(&m, &line(&[1.0]), CellIndex(3), &mut rng).is_err());
    }

    #[test]
    fn empirical_means_match_model() {
        // 10^5 draws; three standard deviations of a Bernoulli mean.
        let tol = |p: f64| 3.0 * (p * (1.0 - p) / 1e5).sqrt();
        let m = MeasurementModel::new(10, 0.05, 11).unwrap();
        assert!((mean_of(m, &line(&[1.0]), 10_000) - 0.95).abs() < tol(0.95));
        let m = MeasurementModel::new(10, 0.0, 12).unwrap();
        assert!((mean_of(m, &line(&[0.5]), 10_000) - 0.5).abs() < tol(0.5));
    }

    #[test]
    fn model_rejects_bad_parameters() {
        assert!(MeasurementModel::new(0, 0.0, 0).is_err());
        assert!(MeasurementModel::new(1, 0.5, 0).is_err());
        assert!(MeasurementModel::new(1, -0.1, 0).is_err());
    }

    #[test]
    fn streams_are_independent_of_visit_order() {
        let m = MeasurementModel::new(5, 0.0, 3).unwrap();
        let s = line(&[0.5, 0.5]);
        let a = sample_cell(&m, &s, CellIndex(1), &mut m.stream(CellIndex(1), 2)).unwrap();
        let _ = sample_cell(&m, &s, CellIndex(0), &mut m.stream(CellIndex(0), 0)).unwrap();
        let b = sample_cell(&m, &s, CellIndex(1), &mut m.stream(CellIndex(1), 2)).unwrap();
        assert_eq!(a, b);
    }

    fn team(nd: usize, nc: usize, td: usize, tc: usize, k: usize) -> TeamConfig {
        TeamConfig { n_sensors: nd, n_stations: nc, t_d: td, t_c: tc, k_max_cycles: k, charger_cap: None }
    }

    #[test]
    fn extreme_field_classifies_visited_cells_at_once() {
        // With mu in {0, 1} and B = 200 the radius after one visit is about
        // 0.31, well inside both margins.
        let s = line(&[1.0, 0.0, 1.0]);
        let u = crate::bandit::confidence_radius(200, 3, 0.1);
        assert!(u <= 0.45);
        let initial = TeamState::docked(vec![CellIndex(1)], 1);
        let model = MeasurementModel::new(200, 0.0, 1).unwrap();
        let rec = run(s, team(1, 1, 3, 1, 2), initial, model, RunParams::new(3), 0).unwrap();
        assert!(rec.terminated);
        assert_eq!(rec.final_keep, [CellIndex(0), CellIndex(2)].into());
        assert_eq!(rec.final_reject, [CellIndex(1)].into());
        assert_eq!(rec.epochs_to_interesting, rec.p_term);
    }

    #[test]
    fn empty_candidate_set_terminates_immediately() {
        let grid = GridSpec::new(1, 2).unwrap();
        let mu = BTreeMap::new();
        let s = Arc::new(
            Scenario::new(
                grid,
                [CellIndex(1)].into(),
                StationRegion::Cells([CellIndex(0)].into()),
                mu,
                0.5,
                0.05,
                0.1,
                true,
            )
            .unwrap(),
        );
        let model = MeasurementModel::new(10, 0.0, 0).unwrap();
        let rec =
            run(s, team(1, 1, 3, 1, 1), TeamState::docked(vec![CellIndex(0)], 1), model, RunParams::new(2), 0).unwrap();
        assert!(rec.terminated);
        assert_eq!(rec.p_term, Some(0));
        assert!(rec.epochs.is_empty() && rec.final_keep.is_empty());
    }

    #[test]
    fn desk_run_is_deterministic_and_monotone() {
        let g = generate_scenario(&GeneratorParams::desk_scale(), 5).unwrap();
        let f = &g.file;
        let s = Arc::new(f.scenario.clone());
        let model = MeasurementModel::new(10, 0.0, 5).unwrap();
        let go = || run(s.clone(), f.team, f.initial.clone(), model, RunParams::new(6), 0).unwrap();
        let a = go();
        let b = go();
        assert_eq!(a.without_timings(), b.without_timings());
        assert!(a.terminated);
        let prog = a.progress();
        assert!(prog.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(RunRecord::from_json(&a.to_json()).unwrap(), a);
        let mut buf = Vec::new();
        records_csv(std::slice::from_ref(&a), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("run_id,epoch,goals_count,cycles_used,solver_time_s,keep_size,reject_size,unclassified\n"));
        assert_eq!(text.lines().count(), a.epochs.len() + 1);
    }

    #[test]
    fn cap_stops_a_run() {
        let s = line(&[0.7, 0.3, 0.6]);
        let model = MeasurementModel::new(1, 0.0, 0).unwrap();
        let params = RunParams { epoch_cap: Some(2), ..RunParams::new(1) };
        let rec = run(s, team(1, 1, 3, 1, 2), TeamState::docked(vec![CellIndex(0)], 1), model, params, 0).unwrap();
        assert!(rec.capped && !rec.terminated);
        assert_eq!(rec.epochs.len(), 2);
        assert_eq!(rec.p_term, None);
    }

    #[test]
    fn kmax_estimates() {
        let s = line(&[0.2, 0.8]);
        let opts = SolveOptions::default();
        let est = estimate_kmax(s.clone(), team(1, 1, 3, 1, 3), 1, 5, 0, &opts).unwrap();
        assert_eq!(est.k_max, Some(1));
        assert!(estimate_kmax(s, team(1, 1, 3, 1, 3), 1, 0, 0, &opts).is_err());

        // Opposite corners of 6x6 with a single sensor and short cycles.
        let grid = GridSpec::new(6, 6).unwrap();
        let mu = (0..36).map(|c| (CellIndex(c), 0.2)).collect();
        let big = Arc::new(Scenario::new(grid, BTreeSet::new(), StationRegion::All, mu, 0.5, 0.05, 0.1, false).unwrap());
        let p = PlanningProblem::new(
            big,
            team(1, 1, 3, 2, 8),
            TeamState::docked(vec![CellIndex(0)], 1),
            [CellIndex(0), CellIndex(35)].into(),
        )
        .unwrap();
        assert!(solver::min_cycles(&p, &opts).unwrap() > 1);
    }
}
