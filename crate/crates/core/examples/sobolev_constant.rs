//! Discrete Sobolev constant: quotient of the sampled extremal, then the
//! minimised quotient, and the critical bound it implies.

use rfl_lab::functionals::estimate_sobolev_constant;
use rfl_lab::model::{GridSpec, ProblemParams};

fn main() -> rfl_lab::Result<()> {
    let params = ProblemParams::desk_default();
    for m in [128, 256, 512] {
        let grid = GridSpec::new(1, 8.0, m)?;
        let raw = estimate_sobolev_constant(&params, &grid, 1.0, 0)?;
        let min = estimate_sobolev_constant(&params, &grid, 1.0, 200)?;
        let expo = params.n as f64 / (2.0 * params.alpha);
        let bound = params.alpha / params.n as f64 * min.s_est.powf(expo);
        println!(
            "m = {m:4}: extremal {:.5}, minimised {:.5} ({} iterations), bound {bound:.5}",
            raw.s_est, min.s_est, min.iterations
        );
    }
    Ok(())
}
