//! Plans one epoch for a docked team and prints every agent's path.

use std::sync::Arc;

use spatial_bandit::bandit::BanditState;
use spatial_bandit::environment::{generate_scenario, GeneratorParams};
use spatial_bandit::ip_model::{build_ip, PlanningProblem, RowKind};
use spatial_bandit::solver::{plan, SolveOptions};

fn main() -> spatial_bandit::Result<()> {
    let g = generate_scenario(&GeneratorParams::desk_scale(), 3)?;
    let scenario = Arc::new(g.file.scenario);
    let goals = BanditState::for_scenario(&scenario).select_epoch_goals(6, scenario.delta())?;
    let problem = PlanningProblem::new(scenario.clone(), g.file.team, g.file.initial, goals.iter().copied().collect())?;

    let instance = build_ip(&problem)?;
    println!(
        "0/1 program: {} variables, {} rows ({} coverage, {} sensor collision)",
        instance.num_vars,
        instance.constraints.len(),
        instance.count_rows(RowKind::Coverage),
        instance.count_rows(RowKind::SensorCollision)
    );

    let out = plan(&problem, &SolveOptions::default())?;
    println!("status {:?}, {} cycles, {} search nodes", out.result.status, out.plan.cycles_used, out.result.nodes);
    println!("goals {:?}", goals.iter().map(|c| c.0).collect::<Vec<_>>());
    for (i, cycles) in out.plan.sensor_paths.iter().enumerate() {
        for (k, path) in cycles.iter().enumerate().take(out.plan.cycles_used) {
            println!("sensor {i} cycle {k}: {:?}", path.iter().map(|c| c.0).collect::<Vec<_>>());
        }
    }
    for (a, cycles) in out.plan.station_paths.iter().enumerate() {
        for (k, path) in cycles.iter().enumerate().take(out.plan.cycles_used) {
            println!("station {a} cycle {k}: {:?}", path.iter().map(|c| c.0).collect::<Vec<_>>());
        }
    }
    println!("\n{}", scenario.ascii_map(Some(&out.plan.final_state())));
    Ok(())
}
