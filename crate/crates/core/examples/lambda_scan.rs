//! Ground-state level against the critical bound as the subcritical
//! coefficient grows.

use rfl_lab::functionals::estimate_sobolev_constant;
use rfl_lab::model::{GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use rfl_lab::solver::{lambda_scan, SolverConfig};

fn main() -> rfl_lab::Result<()> {
    let params = ProblemParams::desk_default();
    let grid = GridSpec::new(1, 8.0, 128)?;
    let s_est = estimate_sobolev_constant(&params, &grid, 1.0, 200)?.s_est;
    let well: ScopeFunction = ScopeFamily::well(1.0, 2.0, 1.0).into();
    let lambdas = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
    for (name, rho) in [("full", None), ("well", Some(&well))] {
        let scan = lambda_scan(&params, &grid, rho, &lambdas, s_est, &SolverConfig::default(), 0)?;
        println!("{name}: bound {:.5}, lambda0 {:?}, monotone {}", scan.bound, scan.lambda0, scan.monotone);
        for row in &scan.rows {
            println!("  lambda {:5} C {:.6} below {}", row.lambda, row.c_value, row.satisfied);
        }
    }
    Ok(())
}
