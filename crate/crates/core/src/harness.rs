//! Monte-Carlo sweeps: batches of seeded runs per parameter value, quantile
//! tables, classification progress curves and the goal-count tradeoff data.

use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{generate_scenario, GeneratorParams, Scenario, SCHEMA_VERSION};
use crate::error::{domain, Error, Result};
use crate::simulation::{run, MeasurementModel, RunParams, RunRecord};
use crate::solver::SolveOptions;

/// Swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "values", rename_all = "snake_case")]
pub enum Axis {
    MuWorst(Vec<f64>),
    DGoals(Vec<usize>),
    /// `(T_d, T_c)` pairs.
    Motion(Vec<(usize, usize)>),
    /// `(N_d, N_c)` pairs.
    Team(Vec<(usize, usize)>),
    DegradedFlip(Vec<f64>),
    BatchSize(Vec<usize>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::MuWorst(_) => "mu_worst",
            Axis::DGoals(_) => "d_goals",
            Axis::Motion(_) => "motion",
            Axis::Team(_) => "team",
            Axis::DegradedFlip(_) => "degraded_flip",
            Axis::BatchSize(_) => "batch_size",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::MuWorst(v) | Axis::DegradedFlip(v) => v.len(),
            Axis::DGoals(v) | Axis::BatchSize(v) => v.len(),
            Axis::Motion(v) | Axis::Team(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize) -> String {
        match self {
            Axis::MuWorst(v) | Axis::DegradedFlip(v) => v[i].to_string(),
            Axis::DGoals(v) | Axis::BatchSize(v) => v[i].to_string(),
            Axis::Motion(v) | Axis::Team(v) => format!("{}/{}", v[i].0, v[i].1),
        }
    }
}

/// Everything one run needs besides its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub generator: GeneratorParams,
    pub batch_size: usize,
    pub d_goals: usize,
    pub degraded_flip_prob: f64,
    pub solver: SolveOptions,
    pub epoch_cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: GeneratorParams,
    pub batch_size: usize,
    pub d_goals: usize,
    #[serde(default)]
    pub degraded_flip_prob: f64,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_cap: Option<u64>,
    pub axis: Axis,
    pub runs_per_point: usize,
    pub master_seed: u64,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl SweepSpec {
    /// Desk-scale defaults with `B = 10`, `D = 6` and 20 runs per point.
    pub fn desk(axis: Axis) -> Self {
        Self {
            base: GeneratorParams::desk_scale(),
            batch_size: 10,
            d_goals: 6,
            degraded_flip_prob: 0.0,
            solver: SolveOptions::default(),
            epoch_cap: None,
            axis,
            runs_per_point: 20,
            master_seed: 1,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_point == 0 {
            return domain("runs_per_point must be at least 1");
        }
        if self.axis.is_empty() {
            return domain("sweep axis has no values");
        }
        if self.workers == Some(0) {
            return domain("worker count must be positive");
        }
        for i in 0..self.axis.len() {
            let p = self.point(i)?;
            p.generator.team.validate()?;
            MeasurementModel::new(p.batch_size, p.degraded_flip_prob, 0)?;
            if p.d_goals == 0 {
                return domain("epoch goal count D must be at least 1");
            }
            if !(0.0..=1.0).contains(&p.generator.mu_worst) {
                return domain(format!("mu_worst {} outside [0, 1]", p.generator.mu_worst));
            }
            p.solver.validate()?;
        }
        Ok(())
    }

    /// Configuration at axis value `i`.
    pub fn point(&self, i: usize) -> Result<PointConfig> {
        if i >= self.axis.len() {
            return domain(format!("axis has {} values, asked for {i}", self.axis.len()));
        }
        let mut p = PointConfig {
            generator: self.base.clone(),
            batch_size: self.batch_size,
            d_goals: self.d_goals,
            degraded_flip_prob: self.degraded_flip_prob,
            solver: self.solver.clone(),
            epoch_cap: self.epoch_cap,
        };
        match &self.axis {
            Axis::MuWorst(v) => p.generator.mu_worst = v[i],
            Axis::DGoals(v) => p.d_goals = v[i],
            Axis::Motion(v) => {
                p.generator.team.t_d = v[i].0;
                p.generator.team.t_c = v[i].1;
            }
            Axis::Team(v) => {
                p.generator.team.n_sensors = v[i].0;
                p.generator.team.n_stations = v[i].1;
                p.generator.station_start = None;
            }
            Axis::DegradedFlip(v) => p.degraded_flip_prob = v[i],
            Axis::BatchSize(v) => p.batch_size = v[i],
        }
        Ok(p)
    }

    /// `(scenario seed, sensing seed)` per run index, shared by every axis
    /// value so points are compared on matched seeds.
    pub fn run_seeds(&self) -> Vec<(u64, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        (0..self.runs_per_point).map(|_| (rng.next_u64(), rng.next_u64())).collect()
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))
    }
}

/// One run of a batch. Exactly one of `record` and `error` is set.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub run_id: usize,
    pub scenario_seed: u64,
    pub sensing_seed: u64,
    pub scenario: Option<Arc<Scenario>>,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

impl BatchRun {
    /// Ran to completion without a planner abort.
    pub fn completed(&self) -> Option<&RunRecord> {
        self.record.as_ref().filter(|r| r.aborted.is_none())
    }
}

/// Runs one seeded classification with the given configuration.
pub fn run_one(p: &PointConfig, run_id: usize, scenario_seed: u64, sensing_seed: u64) -> BatchRun {
    let mut out = BatchRun { run_id, scenario_seed, sensing_seed, scenario: None, record: None, error: None };
    let result = generate_scenario(&p.generator, scenario_seed).and_then(|g| {
        let s = Arc::new(g.file.scenario);
        out.scenario = Some(s.clone());
        let model = MeasurementModel::new(p.batch_size, p.degraded_flip_prob, sensing_seed)?;
        let params = RunParams {
            d_goals: p.d_goals,
            epoch_cap: p.epoch_cap,
            solver: p.solver.clone(),
            deconflict_stations: false,
        };
        run(s, g.file.team, g.file.initial, model, params, run_id)
    });
    match result {
        Ok(r) => out.record = Some(r),
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// All runs at axis value `point`. Fails only when every run failed.
pub fn run_batch(spec: &SweepSpec, point: usize) -> Result<Vec<BatchRun>> {
    spec.validate()?;
    let p = spec.point(point)?;
    let seeds = spec.run_seeds();
    let runs: Vec<BatchRun> = spec.pool()?.install(|| {
        seeds.par_iter().enumerate().map(|(r, &(a, b))| run_one(&p, r, a, b)).collect()
    });
    if runs.iter().all(|r| r.record.is_none()) {
        let first = runs.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Domain(format!("every run at {} = {} failed: {first}", spec.axis.name(), spec.axis.label(point))));
    }
    Ok(runs)
}

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

impl Quantiles {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        Some(Self { q10: nearest_rank(&v, 0.1)?, median: nearest_rank(&v, 0.5)?, q90: nearest_rank(&v, 0.9)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis_value: String,
    pub n_runs: usize,
    /// Runs that errored or whose planner gave up.
    pub n_failed: usize,
    pub n_capped: usize,
    /// Per-epoch solver wall time, pooled over runs.
    pub solve_s: Option<Quantiles>,
    /// Per-epoch solver nodes, pooled over runs.
    pub solve_nodes: Option<Quantiles>,
    /// First epoch with every cell of `mu >= theta + epsilon` kept.
    pub epochs_interesting: Option<Quantiles>,
    /// Epochs to classify every candidate cell, over terminated runs.
    pub epochs_all: Option<Quantiles>,
    pub total_cycles: Option<Quantiles>,
}

/// Quantile summary of one batch.
pub fn aggregate(axis_value: &str, runs: &[BatchRun]) -> Result<AggregateRow> {
    if runs.is_empty() {
        return domain("cannot aggregate an empty batch");
    }
    let done: Vec<&RunRecord> = runs.iter().filter_map(|r| r.completed()).collect();
    let epochs = || done.iter().flat_map(|r| r.epochs.iter());
    Ok(AggregateRow {
        axis_value: axis_value.to_string(),
        n_runs: runs.len(),
        n_failed: runs.len() - done.len(),
        n_capped: done.iter().filter(|r| r.capped).count(),
        solve_s: Quantiles::of(epochs().map(|e| e.solver_time_s)),
        solve_nodes: Quantiles::of(epochs().map(|e| e.solver_nodes as f64)),
        epochs_interesting: Quantiles::of(done.iter().filter_map(|r| r.epochs_to_interesting).map(|p| p as f64)),
        epochs_all: Quantiles::of(done.iter().filter_map(|r| r.p_term).map(|p| p as f64)),
        total_cycles: Quantiles::of(done.iter().filter(|r| r.terminated).map(|r| r.total_cycles as f64)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub axis_value: String,
    pub run_id: usize,
    pub epoch: u64,
    pub frac_classified: f64,
    pub frac_interesting_classified: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub axis_value: String,
    pub run_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub spec: SweepSpec,
    pub rows: Vec<AggregateRow>,
    pub progress: Vec<ProgressRow>,
    pub failures: Vec<RunFailure>,
}

/// One batch per axis value, aggregated.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    sweep_with(spec, |_, _| {})
}

/// [`sweep`] with a callback receiving each finished batch.
pub fn sweep_with(spec: &SweepSpec, mut on_batch: impl FnMut(usize, &[BatchRun])) -> Result<SweepResult> {
    spec.validate()?;
    let mut result =
        SweepResult { schema_version: SCHEMA_VERSION, spec: spec.clone(), rows: Vec::new(), progress: Vec::new(), failures: Vec::new() };
    for i in 0..spec.axis.len() {
        let label = spec.axis.label(i);
        let runs = run_batch(spec, i)?;
        result.rows.push(aggregate(&label, &runs)?);
        for r in &runs {
            let message = r.error.clone().or_else(|| r.record.as_ref().and_then(|rec| rec.aborted.clone()));
            if let Some(message) = message {
                result.failures.push(RunFailure { axis_value: label.clone(), run_id: r.run_id, message });
            }
            if let Some(rec) = r.completed() {
                for (epoch, f, fi) in rec.progress() {
                    result.progress.push(ProgressRow {
                        axis_value: label.clone(),
                        run_id: r.run_id,
                        epoch,
                        frac_classified: f,
                        frac_interesting_classified: fi,
                    });
                }
            }
        }
        on_batch(i, &runs);
    }
    Ok(result)
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    axis_value: &'a str,
    n_runs: usize,
    n_failed: usize,
    n_capped: usize,
    median_solve_s: Option<f64>,
    q10_solve_s: Option<f64>,
    q90_solve_s: Option<f64>,
    median_solve_nodes: Option<f64>,
    med_epochs_interesting: Option<f64>,
    q10_epochs_interesting: Option<f64>,
    q90_epochs_interesting: Option<f64>,
    med_epochs_all: Option<f64>,
    q10_epochs_all: Option<f64>,
    q90_epochs_all: Option<f64>,
}

#[derive(Serialize)]
struct TradeoffCsvRow<'a> {
    axis_value: &'a str,
    median_solve_s: Option<f64>,
    median_solve_nodes: Option<f64>,
    med_epochs_all: Option<f64>,
    med_total_cycles: Option<f64>,
}

impl SweepResult {
    /// Same result with wall-clock quantiles removed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.solve_s = None;
        }
        r
    }

    /// Writes `sweep.csv`, `sweep.json`, `progress.csv` and `tradeoff.csv`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let m = |q: &Option<Quantiles>| q.map(|q| q.median);
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        for r in &self.rows {
            w.serialize(SweepCsvRow {
                axis_value: &r.axis_value,
                n_runs: r.n_runs,
                n_failed: r.n_failed,
                n_capped: r.n_capped,
                median_solve_s: m(&r.solve_s),
                q10_solve_s: r.solve_s.map(|q| q.q10),
                q90_solve_s: r.solve_s.map(|q| q.q90),
                median_solve_nodes: m(&r.solve_nodes),
                med_epochs_interesting: m(&r.epochs_interesting),
                q10_epochs_interesting: r.epochs_interesting.map(|q| q.q10),
                q90_epochs_interesting: r.epochs_interesting.map(|q| q.q90),
                med_epochs_all: m(&r.epochs_all),
                q10_epochs_all: r.epochs_all.map(|q| q.q10),
                q90_epochs_all: r.epochs_all.map(|q| q.q90),
            })?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("progress.csv"))?;
        for p in &self.progress {
            w.serialize(p)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("tradeoff.csv"))?;
        for r in &self.rows {
            w.serialize(TradeoffCsvRow {
                axis_value: &r.axis_value,
                median_solve_s: m(&r.solve_s),
                median_solve_nodes: m(&r.solve_nodes),
                med_epochs_all: m(&r.epochs_all),
                med_total_cycles: m(&r.total_cycles),
            })?;
        }
        w.flush()?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::EpochRecord;

    #[test]
    fn nearest_rank_examples() {
        let v = [15.0, 26.0, 30.0];
        assert_eq!(nearest_rank(&v, 0.5), Some(26.0));
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&hundred, 0.1), Some(10.0));
        assert_eq!(nearest_rank(&hundred, 0.9), Some(90.0));
        assert_eq!(nearest_rank(&[], 0.5), None);
        let q = Quantiles::of([4.0; 7]).unwrap();
        assert_eq!((q.q10, q.median, q.q90), (4.0, 4.0, 4.0));
        let one = Quantiles::of([3.0]).unwrap();
        assert_eq!((one.q10, one.median, one.q90), (3.0, 3.0, 3.0));
    }

    fn fake(run_id: usize, p_term: u64) -> BatchRun {
        let e = EpochRecord {
            epoch: 1,
            goals: vec![],
            cycles_used: 1,
            solver_status: crate::solver::SolveStatus::Optimal,
            solver_time_s: 0.5,
            solver_nodes: 10,
            samples_drawn: 0,
            kept: vec![],
            rejected: vec![],
            keep_size: 0,
            reject_size: 0,
            unclassified: 0,
            interesting_kept: 0,
        };
        let rec = RunRecord {
            schema_version: SCHEMA_VERSION,
            run_id,
            seed: 0,
            d_goals: 1,
            batch_size: 1,
            degraded_flip_prob: 0.0,
            t_d: 3,
            n_candidates: 0,
            n_interesting: 0,
            epoch_cap: 100,
            epochs: vec![e],
            terminated: true,
            capped: false,
            aborted: None,
            p_term: Some(p_term),
            epochs_to_interesting: Some(1),
            total_cycles: 1,
            total_time_steps: 3,
            final_keep: Default::default(),
            final_reject: Default::default(),
            final_state: crate::environment::TeamState { sensor_cells: vec![], station_cells: vec![] },
        };
        BatchRun { run_id, scenario_seed: 0, sensing_seed: 0, scenario: None, record: Some(rec), error: None }
    }

    #[test]
    fn aggregate_is_order_free_and_counts_failures() {
        let mut runs = vec![fake(0, 30), fake(1, 15), fake(2, 26)];
        runs.push(BatchRun { run_id: 3, scenario_seed: 0, sensing_seed: 0, scenario: None, record: None, error: Some("x".into()) });
        let a = aggregate("v", &runs).unwrap();
        runs.reverse();
        let b = aggregate("v", &runs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epochs_all.unwrap().median, 26.0);
        assert_eq!(a.n_failed, 1);
        assert!(aggregate("v", &[]).is_err());
    }

    #[test]
    fn spec_round_trips_and_validates() {
        let spec = SweepSpec::desk(Axis::Motion(vec![(6, 3), (8, 4)]));
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"name\":\"motion\""));
        assert_eq!(SweepSpec::from_json(&text).unwrap(), spec);
        let bad = SweepSpec { runs_per_point: 0, ..spec.clone() };
        assert!(bad.validate().is_err());
        let bad = SweepSpec::desk(Axis::Motion(vec![(4, 4)]));
        assert!(bad.validate().is_err());
        assert_eq!(spec.point(1).unwrap().generator.team.t_d, 8);
    }

    #[test]
    fn small_batches_are_deterministic() {
        let spec = SweepSpec { runs_per_point: 2, ..SweepSpec::desk(Axis::MuWorst(vec![1.0])) };
        let a = run_batch(&spec, 0).unwrap();
        let b = run_batch(&SweepSpec { workers: Some(1), ..spec }, 0).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.record.as_ref().unwrap().without_timings(), y.record.as_ref().unwrap().without_timings());
        }
    }
}
