//! Finite-time epoch bound for a generated scenario, with the per-cell table.
//!
//! cargo run --release --example bounds_report -- [seed] [D] [B]

use spatial_bandit::bandit::confidence_radius;
use spatial_bandit::bounds::p_max;
use spatial_bandit::environment::{generate_scenario, GeneratorParams};

fn main() -> spatial_bandit::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let seed = args.first().copied().unwrap_or(1) as u64;
    let d = args.get(1).copied().unwrap_or(6);
    let b = args.get(2).copied().unwrap_or(10);

    let g = generate_scenario(&GeneratorParams::desk_scale(), seed)?;
    let s = &g.file.scenario;
    let report = p_max(s, d, b)?;
    print!("{}", report.table());
    println!("cells in the final phase: {:?}", report.d_delta_set.iter().map(|c| c.0).collect::<Vec<_>>());

    println!("\nconfidence radius with |C| = {}, delta = {}", s.n_candidates(), s.delta());
    for n in [1u64, 10, 100, 1000, 10_000] {
        println!("  n = {n:>6}: U = {:.4}", confidence_radius(n, s.n_candidates(), s.delta()));
    }
    Ok(())
}
