//! Desk-scale sweep over sensor accuracy; writes the sweep tables.
//!
//! cargo run --release --example sweep_mu -- [runs_per_point] [out_dir]

use std::path::PathBuf;

use spatial_bandit::harness::{sweep, Axis, SweepSpec};

fn main() -> spatial_bandit::Result<()> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().map(|a| a.parse().expect("run count")).unwrap_or(10);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sweep-mu".into()));

    let spec = SweepSpec { runs_per_point: runs, ..SweepSpec::desk(Axis::MuWorst(vec![0.6, 0.8, 1.0])) };
    let result = sweep(&spec)?;
    println!("mu_worst  runs  failed  epochs to all cells (q10, median, q90)  interesting found");
    for r in &result.rows {
        let all = r.epochs_all.map(|q| format!("{:>4} {:>4} {:>4}", q.q10, q.median, q.q90)).unwrap_or_default();
        let int = r.epochs_interesting.map(|q| q.median.to_string()).unwrap_or_default();
        println!("{:>8}  {:>4}  {:>6}  {all:>38}  {int:>17}", r.axis_value, r.n_runs, r.n_failed);
    }
    result.without_timings().write_outputs(&out)?;
    println!("tables written to {}", out.display());
    Ok(())
}
