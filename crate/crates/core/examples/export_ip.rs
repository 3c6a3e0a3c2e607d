//! Writes one epoch's 0/1 program in the text format, reads it back and
//! checks the built-in solution against the parsed rows.

use std::sync::Arc;

use spatial_bandit::environment::{generate_scenario, GeneratorParams};
use spatial_bandit::ip_model::{build_ip, parse_solution, parse_text, write_text, PlanningProblem, SolutionFile};
use spatial_bandit::solver::{solve, SolveOptions};

fn main() -> spatial_bandit::Result<()> {
    let g = generate_scenario(&GeneratorParams::desk_scale(), 2)?;
    let scenario = Arc::new(g.file.scenario);
    let goals = scenario.candidates().iter().copied().step_by(7).take(3).collect();
    let mut team = g.file.team;
    team.k_max_cycles = 2;
    let problem = PlanningProblem::new(scenario, team, g.file.initial, goals)?;
    let instance = build_ip(&problem)?;

    let text = write_text(&instance);
    println!("{}", text.lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("... {} lines, {} bytes", text.lines().count(), text.len());

    let parsed = parse_text(&text)?;
    assert_eq!(parsed.num_vars, instance.num_vars);
    assert_eq!(parsed.constraints.len(), instance.constraints.len());

    let result = solve(&instance, &SolveOptions::default())?;
    let values = result.assignment.expect("small instance solves");
    let sol = SolutionFile { status: Some("optimal".into()), values };
    let back = parse_solution(&sol.to_text(), parsed.num_vars)?;
    println!(
        "objective {} on the parsed program, {} violated rows",
        parsed.objective_value(&back.values),
        parsed.violated_rows(&back.values).len()
    );
    let on: Vec<String> = (0..back.values.len())
        .filter(|&v| back.values[v])
        .filter_map(|v| instance.tags[v].map(|t| t.to_string()))
        .take(8)
        .collect();
    println!("first variables set: {}", on.join(" "));
    Ok(())
}
