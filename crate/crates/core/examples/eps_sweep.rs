//! Rescaled problems over a list of eps: levels, maxima and their rescaled
//! positions against the minimum of H.

use rfl_lab::concentration::{run_eps_sweep, SweepConfig};
use rfl_lab::model::{GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use rfl_lab::solver::SolverConfig;

fn main() -> rfl_lab::Result<()> {
    let params = ProblemParams::desk_default();
    let grid = GridSpec::new(1, 32.0, 512)?;
    let rho: ScopeFunction = ScopeFamily::shifted_well(1.0, 2.0, 1.0, vec![0.5]).into();
    let config = SolverConfig {
        scatter: 4,
        ..SolverConfig::default()
    };
    let report = run_eps_sweep(&params, &grid, &rho, &SweepConfig::default(), &config, 0)?;
    println!("limit C = {:.8}, S_est = {:.5}", report.limit_c, report.s_est);
    let x0 = report.field.as_ref().map(|f| f.x0.clone()).unwrap_or_else(|| vec![0.0]);
    let dist = report.distances(&x0);
    for ((row, gap), d) in report.rows.iter().zip(report.gaps()).zip(dist) {
        println!(
            "eps {:5}: C {:.8} gap {:.5}  eps*y {:+.4}  |eps*y - x0| {:.4}  ratio {:.4} predicted {:.4}",
            row.eps, row.c_value, gap, row.eps_y_eps[0], d, row.ratio, row.prediction
        );
    }
    Ok(())
}
