//! Monte-Carlo estimate of the cycles needed per epoch.

use std::sync::Arc;

use spatial_bandit::bounds::p_max;
use spatial_bandit::environment::{generate_scenario, GeneratorParams};
use spatial_bandit::simulation::estimate_kmax;
use spatial_bandit::solver::SolveOptions;

fn main() -> spatial_bandit::Result<()> {
    let g = generate_scenario(&GeneratorParams::desk_scale(), 5)?;
    let scenario = Arc::new(g.file.scenario);
    for d in [2, 4, 6, 10] {
        let est = estimate_kmax(scenario.clone(), g.file.team, d, 50, 9, &SolveOptions::default())?;
        let mut hist = std::collections::BTreeMap::new();
        for c in est.cycles.iter().flatten() {
            *hist.entry(*c).or_insert(0) += 1;
        }
        for f in &est.failures {
            println!("        trial {}: {}", f.trial, f.message);
        }
        println!("D = {d:>2}: K^max = {:?}, cycles histogram {hist:?}, {} failed trials", est.k_max, est.failures.len());
        if d == 6 {
            let b = p_max(&scenario, d, 10)?;
            if let Some(k) = est.k_max {
                println!("        P_max = {:.1} epochs, at most {:.0} sensing cycles", b.p_max, b.p_max * k as f64);
            }
        }
    }
    Ok(())
}
