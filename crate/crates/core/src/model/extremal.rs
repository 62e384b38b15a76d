use crate::error::{Error, Result};
use crate::forms::lp_norm;
use crate::model::grid::{GridFunction, GridSpec};
use crate::model::params::ProblemParams;

/// Samples `c / (θ² + |x - x0|²)^{(n-2α)/2}` on `grid`.
pub fn talenti_extremal(
    params: &ProblemParams,
    grid: &GridSpec,
    c: f64,
    theta: f64,
    x0: &[f64],
) -> Result<GridFunction> {
    if !(theta > 0.0) {
        return Err(Error::domain(format!("extremal width theta = {theta} must be positive")));
    }
    let power = (params.n as f64 - 2.0 * params.alpha) / 2.0;
    Ok(GridFunction::from_fn(grid, |x| {
        let r2: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let d = xi - x0.get(i).copied().unwrap_or(0.0);
                d * d
            })
            .sum();
        c / (theta * theta + r2).powf(power)
    }))
}

/// `U_ε(x) = ε^{-(n-2α)/2} ũ(x / (ε S^{1/(2α)}))` with `ũ = u0 / ‖u0‖_{L^{2*}}`,
/// resampled on the grid of `u0` by multilinear interpolation.
pub fn rescale_u_eps(
    u0: &GridFunction,
    params: &ProblemParams,
    eps: f64,
    s_est: f64,
) -> Result<GridFunction> {
    if !(eps > 0.0) || !(s_est > 0.0) {
        return Err(Error::domain("eps and S must be positive"));
    }
    let norm = lp_norm(u0, params.crit_exp())?;
    if norm == 0.0 {
        return Err(Error::domain("cannot normalise the zero function"));
    }
    let stretch = eps * s_est.powf(1.0 / (2.0 * params.alpha));
    let amplitude = eps.powf(-(params.n as f64 - 2.0 * params.alpha) / 2.0) / norm;
    let unit = stretch == 1.0;
    Ok(GridFunction::from_fn(&u0.spec, |x| {
        let v = if unit {
            let idx = nearest_node(u0, x);
            u0.values[idx]
        } else {
            let y: Vec<f64> = x.iter().map(|xi| xi / stretch).collect();
            u0.interpolate(&y)
        };
        amplitude * v
    }))
}

fn nearest_node(u: &GridFunction, x: &[f64]) -> usize {
    let h = u.spec.spacing();
    let idx: Vec<i64> = x
        .iter()
        .enumerate()
        .map(|(a, &xa)| ((xa - u.spec.coord(a, 0)) / h).round() as i64)
        .collect();
    u.spec.linear_index(&idx).expect("grid node")
}
