//! Hardware-experiment layout: roads for the stations, B = 30, D = 6, with
//! clean and degraded sensors on matched seeds.

use std::sync::Arc;

use spatial_bandit::environment::{generate_scenario, GeneratorParams};
use spatial_bandit::simulation::{run, MeasurementModel, RunParams};

fn main() -> spatial_bandit::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|a| a.parse().expect("seed")).unwrap_or(4);
    let g = generate_scenario(&GeneratorParams::hardware_like(), seed)?;
    let scenario = Arc::new(g.file.scenario);
    println!("{}", scenario.ascii_map(Some(&g.file.initial)));
    println!("{} candidate cells, {} interesting", scenario.n_candidates(), g.designated_interesting.len());

    for flip in [0.0, 0.05] {
        let model = MeasurementModel::new(30, flip, seed)?;
        let rec = run(scenario.clone(), g.file.team, g.file.initial.clone(), model, RunParams::new(6), 0)?;
        println!("\nflip probability {flip}: terminated={} after {} epochs", rec.terminated, rec.epochs.len());
        for (epoch, frac, frac_int) in rec.progress() {
            let bar = "#".repeat((frac * 40.0).round() as usize);
            println!("  {epoch:>3} {:>5.1}% {:<40} interesting {:>5.1}%", 100.0 * frac, bar, 100.0 * frac_int);
        }
        println!("  keep = {:?}", rec.final_keep.iter().map(|c| c.0).collect::<Vec<_>>());
    }
    Ok(())
}
