//! Ground states of the regional problem for a well scope and for the
//! constant scope at its limit, next to the full-form level.

use rfl_lab::model::{GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use rfl_lab::solver::{solve_ground_state, solve_limit_ground_state, SolverConfig};

fn main() -> rfl_lab::Result<()> {
    let params = ProblemParams::desk_default();
    let grid = GridSpec::new(1, 8.0, 256)?;
    let config = SolverConfig::default();
    let well: ScopeFunction = ScopeFamily::well(1.0, 2.0, 1.0).into();
    let flat: ScopeFunction = ScopeFamily::constant(2.0, 2.0, 2.0).into();

    let a = solve_ground_state(&params, &grid, &well, &config, 0)?;
    let b = solve_ground_state(&params, &grid, &flat, &config, 0)?;
    let c = solve_limit_ground_state(&params, &grid, &config, 0)?;
    for (name, r) in [("well", &a), ("rho_inf", &b), ("full", &c)] {
        println!(
            "{name:8} C = {:.10}  |grad| = {:.1e}  max at {:?}  mass {:.4}  noise {:.1e}",
            r.c_value, r.grad_norm, r.maximizer, r.mass, r.noise
        );
        for s in &r.seeds {
            println!("         seed {} ({}): {:.10} after {} iterations", s.index, s.kind, s.c_value, s.iters);
        }
    }
    println!("ordering holds: {}", a.c_value < b.c_value && b.c_value < c.c_value);
    Ok(())
}
