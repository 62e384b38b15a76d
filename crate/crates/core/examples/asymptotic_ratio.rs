//! Energy difference of a fixed profile under the rescaled scope and its
//! limit, divided by eps^{2 alpha}, against the mass times H.

use rfl_lab::concentration::{asymptotic_ratio_check, limit_profile, HQuadrature};
use rfl_lab::model::{GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use rfl_lab::solver::SolverConfig;

fn main() -> rfl_lab::Result<()> {
    let params = ProblemParams::desk_default();
    let grid = GridSpec::new(1, 16.0, 321)?;
    let w = limit_profile(&params, &grid, &SolverConfig::default(), 0)?;
    let rho: ScopeFunction = ScopeFamily::well(1.0, 2.0, 1.0).into();
    let quad = HQuadrature::default();
    for xbar in [0.0, 0.7, 20.0] {
        println!("xbar = {xbar}");
        for eps in [0.5, 0.25, 0.125, 0.0625] {
            let c = asymptotic_ratio_check(&w, &rho, params.alpha, eps, &[xbar / eps], &quad)?;
            println!(
                "  eps {eps:6}: ratio {:+.6}  prediction {:+.6}  gap {:.6}",
                c.ratio, c.prediction, c.gap
            );
        }
    }
    Ok(())
}
