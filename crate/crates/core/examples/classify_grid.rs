//! One desk-scale classification, epoch by epoch.
//!
//! cargo run --release --example classify_grid -- [scenario_seed] [sensing_seed]

use std::sync::Arc;

use spatial_bandit::environment::{generate_scenario, GeneratorParams};
use spatial_bandit::simulation::{MeasurementModel, RunParams, Simulation};

fn main() -> spatial_bandit::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("seed must be an integer"));
    let scenario_seed = args.next().unwrap_or(7);
    let sensing_seed = args.next().unwrap_or(1);

    let g = generate_scenario(&GeneratorParams::desk_scale(), scenario_seed)?;
    let scenario = Arc::new(g.file.scenario);
    println!("{}", scenario.ascii_map(Some(&g.file.initial)));
    println!("designated interesting: {:?}", g.designated_interesting.iter().map(|c| c.0).collect::<Vec<_>>());

    let model = MeasurementModel::new(10, 0.0, sensing_seed)?;
    let mut sim = Simulation::new(scenario.clone(), g.file.team, g.file.initial, model, RunParams::new(6), 0)?;
    println!("epoch  goals         cycles  keep  reject  open");
    while !sim.is_done() {
        sim.run_epoch()?;
        let e = sim.record().epochs.last().expect("epoch recorded");
        let goals: Vec<usize> = e.goals.iter().map(|c| c.0).collect();
        println!(
            "{:>5}  {:<12}  {:>6}  {:>4}  {:>6}  {:>4}",
            e.epoch,
            format!("{goals:?}"),
            e.cycles_used,
            e.keep_size,
            e.reject_size,
            e.unclassified
        );
    }
    let state = sim.team_state().clone();
    let record = sim.finish();
    println!("\n{}", scenario.ascii_map(Some(&state)));
    println!(
        "terminated={} after {} epochs, {} cycles; keep = {:?}",
        record.terminated,
        record.epochs.len(),
        record.total_cycles,
        record.final_keep.iter().map(|c| c.0).collect::<Vec<_>>()
    );
    Ok(())
}
