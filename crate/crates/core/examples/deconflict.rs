//! Finds a solver plan whose sensors swap or cross, then repairs it by
//! per-step reassignment.

use std::sync::Arc;

use spatial_bandit::assignment::{deconflict_plan, detect_conflicts};
use spatial_bandit::bandit::BanditState;
use spatial_bandit::environment::{generate_scenario, GeneratorParams};
use spatial_bandit::ip_model::{validate_plan, PlanningProblem, TeamPlan};
use spatial_bandit::solver::{plan, SolveOptions};

fn conflicts(grid: spatial_bandit::environment::GridSpec, p: &TeamPlan) -> spatial_bandit::Result<Vec<String>> {
    let mut out = Vec::new();
    for k in 0..p.cycles_used {
        out.extend(detect_conflicts(grid, k, &p.sensor_steps(k))?.iter().map(|c| c.to_string()));
    }
    Ok(out)
}

fn main() -> spatial_bandit::Result<()> {
    for seed in 0..200 {
        let g = generate_scenario(&GeneratorParams::desk_scale(), seed)?;
        let scenario = Arc::new(g.file.scenario);
        let goals = BanditState::for_scenario(&scenario).select_epoch_goals(6, scenario.delta())?;
        let problem =
            PlanningProblem::new(scenario.clone(), g.file.team, g.file.initial, goals.into_iter().collect())?;
        let raw = plan(&problem, &SolveOptions::default())?.plan;
        let before = conflicts(scenario.grid(), &raw)?;
        if before.is_empty() {
            continue;
        }
        let fixed = deconflict_plan(&scenario, &raw, false)?;
        let after = conflicts(scenario.grid(), &fixed)?;
        println!("scenario seed {seed}");
        for c in &before {
            println!("  before: {c}");
        }
        for c in &after {
            println!("  after:  {c}");
        }
        for k in 0..raw.cycles_used {
            println!("cycle {k}");
            for (j, (a, b)) in raw.sensor_steps(k).iter().zip(fixed.sensor_steps(k)).enumerate() {
                let a: Vec<usize> = a.iter().map(|c| c.0).collect();
                let b: Vec<usize> = b.iter().map(|c| c.0).collect();
                println!("  step {j}: {a:?} -> {b:?}");
            }
        }
        println!("violations after repair: {}", validate_plan(&fixed, &problem).len());
        return Ok(());
    }
    println!("no conflicting plan among the first 200 scenarios");
    Ok(())
}
