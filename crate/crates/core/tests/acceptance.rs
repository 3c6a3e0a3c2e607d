//! Acceptance suite: one line per criterion. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 4 5`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use spatial_bandit::assignment::{deconflict_plan, detect_conflicts, hungarian, ConflictKind, CostMatrix};
use spatial_bandit::bandit::confidence_radius;
use spatial_bandit::bounds::{self, binomial_slack, delta_l, p_l, verify_guarantees};
use spatial_bandit::environment::{generate_scenario, CellIndex, GeneratorParams, Scenario};
use spatial_bandit::harness::{run_batch, sweep, Axis, SweepResult, SweepSpec};
use spatial_bandit::ip_model::{build_ip, extract_plan, validate_plan, PlanningProblem};
use spatial_bandit::simulation::RunRecord;
use spatial_bandit::solver::{self, SolveOptions, SolveStatus};

use common::{brute_assignment, rng, Precise, Tiny};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    spatial_bandit::harness::nearest_rank(&v, 0.5).unwrap_or(f64::NAN)
}

type Batch = Result<(Vec<RunRecord>, Vec<Scenario>), String>;

/// The 100-run batch behind the guarantee criteria.
fn guarantee_batch() -> &'static Batch {
    static BATCH: OnceLock<Batch> = OnceLock::new();
    BATCH.get_or_init(|| {
        let mut spec = SweepSpec::desk(Axis::MuWorst(vec![0.8]));
        spec.runs_per_point = 100;
        let runs = run_batch(&spec, 0).map_err(|e| e.to_string())?;
        let mut records = Vec::new();
        let mut scenarios = Vec::new();
        for r in &runs {
            match (r.completed(), &r.scenario) {
                (Some(rec), Some(s)) => {
                    records.push(rec.clone());
                    scenarios.push((**s).clone());
                }
                _ => return Err(format!("run {} did not complete: {:?}", r.run_id, r.error.as_ref().or(r.record.as_ref().and_then(|x| x.aborted.as_ref())))),
            }
        }
        Ok((records, scenarios))
    })
}

fn anytime() -> Outcome {
    let (records, scenarios) = match guarantee_batch() {
        Ok(b) => b,
        Err(e) => return outcome(false, e.clone()),
    };
    let rep = verify_guarantees(records, scenarios).unwrap();
    let c = rep.anytime_violations;
    outcome(c.pass, format!("{} of {} runs violated, rate {:.3} <= {:.3}", c.count, rep.runs, c.rate, c.threshold))
}

fn finite_time() -> Outcome {
    let (records, scenarios) = match guarantee_batch() {
        Ok(b) => b,
        Err(e) => return outcome(false, e.clone()),
    };
    let rep = verify_guarantees(records, scenarios).unwrap();
    let w = rep.within_p_max;
    let bounds: Vec<f64> =
        records.iter().zip(scenarios).map(|(r, s)| bounds::p_max(s, r.d_goals, r.batch_size).unwrap().p_max).collect();
    let finite = bounds.iter().all(|b| b.is_finite());
    let min_bound = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let med_term = median(records.iter().filter_map(|r| r.p_term).map(|p| p as f64).collect());
    let pass = w.pass && finite && min_bound > med_term;
    outcome(
        pass,
        format!(
            "{} of {} within ceil(P_max), rate {:.3} >= {:.3}; smallest P_max {:.1} vs median p_term {}",
            w.count, rep.runs, w.rate, w.threshold, min_bound, med_term
        ),
    )
}

fn labeling() -> Outcome {
    let (records, scenarios) = match guarantee_batch() {
        Ok(b) => b,
        Err(e) => return outcome(false, e.clone()),
    };
    let rep = verify_guarantees(records, scenarios).unwrap();
    let c = rep.labeling_errors;
    let ok = rep.runs - c.count;
    let need = 1.0 - rep.delta - binomial_slack(rep.delta, rep.runs);
    outcome(c.pass, format!("{ok} of {} runs labeled correctly, rate {:.3} >= {need:.3}", rep.runs, ok as f64 / rep.runs as f64))
}

fn solver_exactness() -> Outcome {
    let mut r = rng(4);
    let opts = SolveOptions::default();
    let (mut feasible, mut infeasible, mut bad) = (0, 0, Vec::new());
    for n in 0..300 {
        let t = Tiny::random(&mut r);
        let problem = t.problem();
        let want = t.oracle_min_cycles();
        let inst = build_ip(&problem).unwrap();
        let got = solver::solve(&inst, &opts).unwrap();
        match (want, got.status, &got.assignment) {
            (None, SolveStatus::Infeasible, None) => infeasible += 1,
            (Some(k), SolveStatus::Optimal, Some(values)) if got.objective == Some(k as i64) => {
                let plan = extract_plan(&inst, values).unwrap();
                if validate_plan(&plan, &problem).is_empty() {
                    feasible += 1;
                } else {
                    bad.push(format!("instance {n}: plan fails validation"));
                }
            }
            _ => bad.push(format!("instance {n}: oracle {want:?}, solver {:?} {:?}", got.status, got.objective)),
        }
    }
    outcome(
        bad.is_empty(),
        format!("{feasible} feasible and {infeasible} infeasible instances agree; {} disagree {:?}", bad.len(), bad.first()),
    )
}

fn hungarian_correctness() -> Outcome {
    let mut r = rng(5);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = r.gen_range(1..=7);
        let costs: Vec<f64> = (0..n * n).map(|_| r.gen_range(0.0..10.0)).collect();
        let got = hungarian(&CostMatrix::new(n, costs.clone()).unwrap());
        let (best, _) = brute_assignment(n, |i, j| costs[i * n + j]);
        if (got.total - best).abs() > 1e-9 * best.max(1.0) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{} of 1000 matrices match the permutation minimum", 1000 - bad))
}

fn deconfliction() -> Outcome {
    let mut r = rng(6);
    let opts = SolveOptions::default();
    let (mut plans, mut repaired, mut bad) = (0, 0, Vec::new());
    let mut seed = 0;
    while plans < 200 {
        seed += 1;
        let g = generate_scenario(&GeneratorParams::desk_scale(), seed).unwrap();
        let s = Arc::new(g.file.scenario);
        let mut start = g.file.initial;
        for _ in 0..10 {
            let d = r.gen_range(1..=6);
            let goals: BTreeSet<CellIndex> = s.candidates().choose_multiple(&mut r, d).copied().collect();
            let problem = PlanningProblem::new(s.clone(), g.file.team, start.clone(), goals).unwrap();
            let Ok(out) = solver::plan(&problem, &opts) else { continue };
            plans += 1;
            let before: usize = (0..out.plan.cycles_used)
                .map(|k| detect_conflicts(s.grid(), k, &out.plan.sensor_steps(k)).unwrap().len())
                .sum();
            repaired += usize::from(before > 0);
            let fixed = deconflict_plan(&s, &out.plan, false).unwrap();
            for k in 0..out.plan.cycles_used {
                let (a, b) = (out.plan.sensor_steps(k), fixed.sensor_steps(k));
                let sorted = |v: &Vec<CellIndex>| {
                    let mut v = v.clone();
                    v.sort();
                    v
                };
                if a.iter().zip(&b).any(|(x, y)| sorted(x) != sorted(y)) {
                    bad.push(format!("scenario {seed}: occupancy changed in cycle {k}"));
                }
                let left = detect_conflicts(s.grid(), k, &b).unwrap();
                if let Some(c) = left.iter().find(|c| matches!(c.kind, ConflictKind::Swap | ConflictKind::Crossing)) {
                    bad.push(format!("scenario {seed}: {c}"));
                }
            }
            if !validate_plan(&fixed, &problem).is_empty() {
                bad.push(format!("scenario {seed}: repaired plan fails validation"));
            }
            start = fixed.final_state();
        }
    }
    outcome(
        bad.is_empty(),
        format!("{plans} plans ({repaired} with conflicts before repair), {} failures {:?}", bad.len(), bad.first()),
    )
}

fn run_sweep(axis: Axis, workers: Option<usize>) -> Result<SweepResult, Outcome> {
    let mut spec = SweepSpec::desk(axis);
    spec.workers = workers;
    sweep(&spec).map_err(|e| outcome(false, e.to_string()))
}

/// Median epochs to classify every cell per axis value, with failed or capped
/// runs noted.
fn epochs_row(res: &SweepResult) -> (Vec<f64>, String) {
    let mut meds = Vec::new();
    let mut parts = Vec::new();
    for row in &res.rows {
        let m = row.epochs_all.map_or(f64::NAN, |q| q.median);
        meds.push(m);
        let mut part = format!("{}: {m}", row.axis_value);
        if row.n_failed + row.n_capped > 0 {
            part += &format!(" ({} failed, {} capped)", row.n_failed, row.n_capped);
        }
        parts.push(part);
    }
    (meds, parts.join(", "))
}

fn clean(res: &SweepResult) -> bool {
    res.rows.iter().all(|r| r.n_failed == 0 && r.n_capped == 0)
}

fn table_mu() -> Outcome {
    let res = match run_sweep(Axis::MuWorst(vec![0.6, 0.8, 1.0]), None) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let (m, text) = epochs_row(&res);
    outcome(clean(&res) && m.windows(2).all(|w| w[0] > w[1]), format!("median epochs {text}"))
}

fn table_d() -> Outcome {
    // One worker so solve times are not inflated by contention.
    let res = match run_sweep(Axis::DGoals(vec![4, 6, 10]), Some(1)) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let (m, text) = epochs_row(&res);
    let times: Vec<f64> = res.rows.iter().map(|r| r.solve_s.map_or(f64::NAN, |q| q.median)).collect();
    let pass = clean(&res) && m.windows(2).all(|w| w[0] >= w[1]) && times.windows(2).all(|w| w[0] <= w[1]);
    let t: Vec<String> = times.iter().map(|t| format!("{:.3}ms", t * 1e3)).collect();
    outcome(pass, format!("median epochs {text}; median solve time {}", t.join(" / ")))
}

fn table_motion() -> Outcome {
    let res = match run_sweep(Axis::Motion(vec![(6, 3), (8, 4), (12, 6)]), None) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let (m, text) = epochs_row(&res);
    outcome(clean(&res) && m.windows(2).all(|w| w[0] >= w[1]), format!("median epochs {text}"))
}

fn table_team() -> Outcome {
    let res = match run_sweep(Axis::Team(vec![(2, 1), (4, 2)]), None) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let (m, text) = epochs_row(&res);
    outcome(clean(&res) && m.windows(2).all(|w| w[0] >= w[1]), format!("median epochs {text}"))
}

fn degraded() -> Outcome {
    let res = match run_sweep(Axis::DegradedFlip(vec![0.0, 0.05]), None) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let (m, text) = epochs_row(&res);
    outcome(clean(&res) && m[1] > m[0], format!("median epochs {text}"))
}

fn formulas() -> Outcome {
    let mut p = Precise::new();
    let mut r = rng(12);
    let mut worst = [0usize; 4];
    let points = 50;
    for i in 0..points {
        let n = [1u64, 2, 3, 7, 10, 64, 100, 999, 12_345, 1_000_000][i % 10] * (1 + i as u64 / 10);
        let c = r.gen_range(1..=400);
        let delta = r.gen_range(0.001..0.5);
        if !Precise::rel_err_ok(confidence_radius(n, c, delta), &p.radius(n, c, delta), 1e-12) {
            worst[0] += 1;
        }
        let (mu, theta, eps) = (r.gen_range(0.0..=1.0), r.gen_range(0.1..0.9), r.gen_range(0.001..0.09));
        if !Precise::rel_err_ok(delta_l(mu, theta, eps), &p.gap(mu, theta, eps), 1e-12) {
            worst[1] += 1;
        }
        let gap = r.gen_range(0.001..1.1);
        let b = r.gen_range(1..=50);
        let got = p_l(gap, b, c, delta).unwrap().value;
        if !Precise::rel_err_ok(got, &p.visits(&Precise::f(gap), b, c, delta), 1e-12) {
            worst[2] += 1;
        }
        let g = generate_scenario(&GeneratorParams::desk_scale(), i as u64 + 1).unwrap();
        let d = r.gen_range(1..=12);
        let got = bounds::p_max(&g.file.scenario, d, b).unwrap().p_max;
        if !Precise::rel_err_ok(got, &p.epoch_bound(&g.file.scenario, d, b), 1e-12) {
            worst[3] += 1;
        }
    }
    let names = ["confidence_radius", "delta_l", "p_l", "p_max"];
    let text: Vec<String> = names.iter().zip(worst).map(|(n, w)| format!("{n} {}/{points}", points - w)).collect();
    outcome(worst.iter().all(|&w| w == 0), format!("within 1e-12: {}", text.join(", ")))
}

fn bin(args: &[&str], cwd: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_spatial-bandit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            for (k, v) in read_tree(&p) {
                out.insert(format!("{}/{k}", p.file_name().unwrap().to_string_lossy()), v);
            }
        } else {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    out
}

/// Every subcommand once, writing under `out/` in `dir`.
fn cli_pass(dir: &Path) -> Vec<(String, i32)> {
    let mut spec = SweepSpec::desk(Axis::MuWorst(vec![0.8, 1.0]));
    spec.runs_per_point = 3;
    std::fs::write(dir.join("sweep_spec.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let steps: [&[&str]; 7] = [
        &["generate", "--seed", "3", "--out", "out/gen"],
        &["run", "--scenario", "out/gen/scenario.json", "--seed", "4", "--out", "out/run"],
        &["sweep", "--spec", "sweep_spec.json", "--out", "out/sweep"],
        &["bounds", "--scenario", "out/gen/scenario.json", "--out", "out/bounds"],
        &["estimate-kmax", "--scenario", "out/gen/scenario.json", "--trials", "10", "--out", "out/kmax"],
        &["export-ip", "--scenario", "out/gen/scenario.json", "--solve", "--out", "out/ip"],
        &["validate", "--scenario", "out/gen/scenario.json", "--plan", "out/ip/plan.json", "--out", "out/validate"],
    ];
    steps.iter().map(|a| (a[0].to_string(), bin(a, dir))).collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let first = cli_pass(tmp.path());
    let a = read_tree(&tmp.path().join("out"));
    std::fs::remove_dir_all(tmp.path().join("out")).unwrap();
    let second = cli_pass(tmp.path());
    let b = read_tree(&tmp.path().join("out"));
    let codes_ok = first.iter().chain(&second).all(|(_, c)| *c == 0);
    let differ: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let pass = codes_ok && a.len() == b.len() && differ.is_empty();
    let failed: Vec<&(String, i32)> = first.iter().filter(|(_, c)| *c != 0).collect();
    outcome(
        pass,
        format!("{} files from 7 subcommands, {} differ {:?}; nonzero exits {:?}", a.len(), differ.len(), differ, failed),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 13] = [
        ("anytime guarantee", anytime),
        ("finite-time bound", finite_time),
        ("labeling criterion", labeling),
        ("solver exactness", solver_exactness),
        ("hungarian correctness", hungarian_correctness),
        ("de-confliction", deconfliction),
        ("epochs fall with sensor accuracy", table_mu),
        ("solve time rises and epochs fall with D", table_d),
        ("epochs fall with agility", table_motion),
        ("epochs fall with team size", table_team),
        ("degraded sensors need more epochs", degraded),
        ("formula regression", formulas),
        ("CLI determinism", determinism),
    ];
    let only: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let mark = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {mark} {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
