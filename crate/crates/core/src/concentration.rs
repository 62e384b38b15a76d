//! The concentration function `H`, rescaled scopes and `ε`-sweeps.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{FormMode, NonlocalForm};
use crate::functionals::{estimate_sobolev_constant, EnergyFunctional};
use crate::model::{sphere_measure, GridFunction, GridSpec, ProblemParams, ScopeFunction};
use crate::solver::{solve, solve_ground_state, solve_limit_ground_state, SolverConfig};

/// Radial and angular resolution of the polar quadrature for `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HQuadrature {
    /// Nodes of the radial scan for sign changes of `ρ(x + r e) - r`.
    pub radial: usize,
    /// Directions on the unit circle (2-D only).
    pub angular: usize,
    /// Bisection steps per located crossing.
    pub bisection: usize,
}

impl Default for HQuadrature {
    fn default() -> Self {
        HQuadrature {
            radial: 400,
            angular: 64,
            bisection: 60,
        }
    }
}

fn directions(dim: usize, angular: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match dim {
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => {
            let w = 2.0 * std::f64::consts::PI / angular as f64;
            Ok((0..angular)
                .map(|k| {
                    let t = (k as f64 + 0.5) * w;
                    (vec![t.cos(), t.sin()], w)
                })
                .collect())
        }
        _ => Err(Error::domain(format!("H is implemented for n = 1, 2, not n = {dim}"))),
    }
}

/// `∫_a^b r^{-1-2α} dr`.
fn radial_integral(a: f64, b: f64, alpha: f64) -> f64 {
    let t = |r: f64| if r.is_infinite() { 0.0 } else { r.powf(-2.0 * alpha) };
    (t(a) - t(b)) / (2.0 * alpha)
}

/// `∫_{ρ0}^{R} 1(r < ρ(x + r e)) r^{-1-2α} dr` by locating every crossing of
/// `ρ(x + r e) = r` on a radial grid graded towards `ρ(x)`.
fn inside_measure(rho: &ScopeFunction, x: &[f64], e: &[f64], lo: f64, hi: f64, alpha: f64, quad: &HQuadrature) -> f64 {
    let gap = |r: f64| {
        let p: Vec<f64> = x.iter().zip(e).map(|(xi, ei)| xi + r * ei).collect();
        rho.eval(&p) - r
    };
    let rx = rho.eval(x).clamp(lo, hi);
    // graded nodes: half of them packed into the tenth of the range around ρ(x)
    let n = quad.radial.max(8);
    let mut nodes: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let band = 0.05 * (hi - lo);
    let (blo, bhi) = ((rx - band).max(lo), (rx + band).min(hi));
    nodes.extend((0..=n / 2).map(|k| blo + (bhi - blo) * k as f64 / (n / 2) as f64));
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes.dedup();

    let mut total = 0.0;
    let mut start = lo;
    let mut inside = gap(lo) > 0.0;
    let mut prev = lo;
    for &r in &nodes[1..] {
        let now = gap(r) > 0.0;
        if now != inside {
            let (mut a, mut b) = (prev, r);
            for _ in 0..quad.bisection {
                let m = 0.5 * (a + b);
                if (gap(m) > 0.0) == inside {
                    a = m;
                } else {
                    b = m;
                }
            }
            let cross = 0.5 * (a + b);
            if inside {
                total += radial_integral(start, cross, alpha);
            }
            start = cross;
            inside = now;
        }
        prev = r;
    }
    if inside {
        total += radial_integral(start, hi, alpha);
    }
    total
}

/// `H(x) = -(|S^{n-1}|/2α)(ρ(x)^{-2α} - ρ∞^{-2α}) + ½∫_{C⁺(x)} |y|^{-n-2α} - ½∫_{C⁻(x)} |y|^{-n-2α}`.
pub fn eval_h(x: &[f64], rho: &ScopeFunction, alpha: f64, quad: &HQuadrature) -> Result<f64> {
    let dim = x.len();
    let rx = rho.eval(x);
    let rinf = rho.rho_inf();
    let far = if rinf.is_infinite() { 0.0 } else { rinf.powf(-2.0 * alpha) };
    let local = -sphere_measure(dim)? / (2.0 * alpha) * (rx.powf(-2.0 * alpha) - far);
    if rho.is_constant() {
        return Ok(local);
    }
    let lo = rho.rho0().min(rx);
    let mut angular = 0.0;
    for (e, w) in directions(dim, quad.angular)? {
        let hi = match rho.reach(x) {
            Some(r) => r.max(rx),
            None => return Err(Error::domain("scope grows too fast for H to be finite")),
        };
        // ∫ [1(r < ρ(x + r e)) - 1(r < ρ(x))] r^{-1-2α} dr over r ≥ lo
        let inner = inside_measure(rho, x, &e, lo, hi, alpha, quad) - radial_integral(lo, rx, alpha);
        angular += w * inner;
    }
    Ok(local + 0.5 * angular)
}

/// Search box for the minimum of `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HSearch {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
    pub half_width: f64,
    /// Coarse samples per axis (forced odd so the center is sampled).
    pub samples: usize,
    pub levels: usize,
    pub quadrature: HQuadrature,
}

impl Default for HSearch {
    fn default() -> Self {
        HSearch {
            center: Vec::new(),
            half_width: 6.0,
            samples: 61,
            levels: 4,
            quadrature: HQuadrature::default(),
        }
    }
}

impl HSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) {
            return Err(Error::validation("concentration.half_width", "must be positive"));
        }
        if self.samples < 3 {
            return Err(Error::validation("concentration.samples", "need at least 3 samples per axis"));
        }
        if self.quadrature.radial < 8 || self.quadrature.angular < 4 {
            return Err(Error::validation(
                "concentration.quadrature",
                "need at least 8 radial nodes and 4 directions",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationField {
    /// Coarse sample points, row-major.
    pub points: Vec<Vec<f64>>,
    pub h_values: Vec<f64>,
    pub x0: Vec<f64>,
    pub min_value: f64,
    /// `max |H|` over the boundary of the search box.
    pub boundary_max: f64,
    /// Spacing of the last refinement level.
    pub cell: f64,
}

fn lattice(center: &[f64], half: f64, samples: usize) -> Vec<Vec<f64>> {
    let dim = center.len();
    let step = 2.0 * half / (samples - 1) as f64;
    let total = samples.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut p = vec![0.0; dim];
            for a in (0..dim).rev() {
                p[a] = center[a] - half + step * (k % samples) as f64;
                k /= samples;
            }
            p
        })
        .collect()
}

fn lexicographic_min(points: &[Vec<f64>], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let better = values[i] < values[best]
            || (values[i] == values[best]
                && points[i].partial_cmp(&points[best]) == Some(std::cmp::Ordering::Less));
        if better {
            best = i;
        }
    }
    best
}

/// Coarse scan of the box, then local rescans around the best sample.
pub fn find_h_minimum(rho: &ScopeFunction, dim: usize, alpha: f64, search: &HSearch) -> Result<ConcentrationField> {
    search.validate()?;
    let center = if search.center.is_empty() {
        vec![0.0; dim]
    } else if search.center.len() == dim {
        search.center.clone()
    } else {
        return Err(Error::Shape("search center has the wrong dimension".into()));
    };
    let samples = search.samples | 1;
    let quad = &search.quadrature;
    let eval_all = |pts: &[Vec<f64>]| -> Result<Vec<f64>> {
        pts.par_iter().map(|p| eval_h(p, rho, alpha, quad)).collect()
    };

    let points = lattice(&center, search.half_width, samples);
    let h_values = eval_all(&points)?;
    let mut best = lexicographic_min(&points, &h_values);
    let mut x0 = points[best].clone();
    let mut min_value = h_values[best];
    let mut cell = 2.0 * search.half_width / (samples - 1) as f64;
    for _ in 0..search.levels {
        let local = lattice(&x0, cell, 11);
        let vals = eval_all(&local)?;
        best = lexicographic_min(&local, &vals);
        if vals[best] < min_value {
            min_value = vals[best];
            x0 = local[best].clone();
        }
        cell /= 5.0;
    }

    let on_boundary = |p: &[f64]| {
        p.iter()
            .zip(&center)
            .any(|(pi, ci)| ((pi - ci).abs() - search.half_width).abs() < 1e-9 * search.half_width.max(1.0))
    };
    let boundary_max = points
        .iter()
        .zip(&h_values)
        .filter(|(p, _)| on_boundary(p))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    if !(min_value < 0.0) {
        return Err(Error::domain(format!(
            "H has no negative values in the search box (minimum {min_value:.3e}); the scope never drops below its limit"
        )));
    }
    if boundary_max >= 0.1 * min_value.abs() {
        return Err(Error::DecayCheck {
            boundary: boundary_max,
            minimum: min_value.abs(),
        });
    }
    Ok(ConcentrationField {
        points,
        h_values,
        x0,
        min_value,
        boundary_max,
        cell,
    })
}

/// `x ↦ ρ(εx + εz)/ε`.
pub fn rescale_scope(rho: &ScopeFunction, eps: f64, z: &[f64]) -> Result<ScopeFunction> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::validation("eps", "must be positive and finite"));
    }
    Ok(rho.rescale(eps, z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    /// `(I_{ρ̄}(w) - I_{ρ∞/ε}(w)) / ε^{2α}`
    pub ratio: f64,
    /// `‖w‖²_{L²} H(εz)`
    pub prediction: f64,
    pub gap: f64,
    pub point: Vec<f64>,
    pub h_value: f64,
    pub mass: f64,
}

/// Compares the rescaled energy difference with its predicted limit.
///
/// The difference of the two functionals is `-½` of the complement form
/// between `ρ̄` and `ρ∞/ε`; the kernel table reaches past `ρ∞/ε` so the
/// whole annulus is seen.
pub fn asymptotic_ratio_check(
    w: &GridFunction,
    rho: &ScopeFunction,
    alpha: f64,
    eps: f64,
    z: &[f64],
    quad: &HQuadrature,
) -> Result<RatioCheck> {
    let rinf = rho.rho_inf();
    if rinf.is_infinite() {
        return Err(Error::domain("the ratio check needs a finite limit radius"));
    }
    let bar = rescale_scope(rho, eps, z)?;
    let outer = rinf / eps;
    let point: Vec<f64> = z.iter().map(|zi| eps * zi).collect();
    let h_value = eval_h(&point, rho, alpha, quad)?;
    let mass = w.mass();
    let ratio = if rho.is_constant() && rho.eval(&point) == rinf {
        0.0
    } else {
        let grid = &w.spec;
        let far = (2.0 * grid.extent).max(outer + grid.spacing());
        let form = NonlocalForm::with_far_radius(
            grid,
            alpha,
            FormMode::Complement {
                inner: bar,
                outer,
            },
            far,
        )?;
        -0.5 * form.eval(w, w)? / eps.powf(2.0 * alpha)
    };
    let prediction = mass * h_value;
    Ok(RatioCheck {
        ratio,
        prediction,
        gap: (ratio - prediction).abs(),
        point,
        h_value,
        mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub search: HSearch,
    /// Width of the extremal used for the Sobolev estimate.
    pub sobolev_theta: f64,
    pub sobolev_iters: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: vec![0.5, 0.35, 0.25, 0.18, 0.125],
            search: HSearch::default(),
            sobolev_theta: 1.0,
            sobolev_iters: 200,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self, rho: &ScopeFunction, grid: &GridSpec) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::validation("sweep.eps", "empty list"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::validation("sweep.eps", "values must be positive"));
        }
        if self.eps.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::validation("sweep.eps", "must be strictly decreasing"));
        }
        let smallest = *self.eps.last().unwrap();
        if rho.rho0() / smallest > grid.extent {
            return Err(Error::validation(
                "sweep.eps",
                format!(
                    "rho0/eps = {} exceeds the box half-width {}",
                    rho.rho0() / smallest,
                    grid.extent
                ),
            ));
        }
        self.search.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    /// `C_{ρ_ε}`
    pub c_value: f64,
    pub y_eps: Vec<f64>,
    pub eps_y_eps: Vec<f64>,
    /// `‖v_ε‖²_{L²}`
    pub mass: f64,
    /// `∫_{B(y_ε, R)} v_ε²`
    pub local_mass: f64,
    pub nondegenerate: bool,
    pub ratio: f64,
    pub prediction: f64,
    pub grad_norm: f64,
    pub noise: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// Level `C` of the limit problem on the same grid.
    pub limit_c: f64,
    pub limit_noise: f64,
    pub s_est: f64,
    pub field: Option<ConcentrationField>,
    /// Nondegeneracy radius `R` and threshold `β`.
    pub radius: f64,
    pub beta: f64,
    pub complete: bool,
}

impl SweepReport {
    /// `|C_{ρ_ε} - C|` per row.
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| (r.c_value - self.limit_c).abs()).collect()
    }

    /// `|ε y_ε - x0|` per row.
    pub fn distances(&self, x0: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| crate::model::grid::dist(&r.eps_y_eps, x0))
            .collect()
    }
}

fn sweep_point(
    params: &ProblemParams,
    grid: &GridSpec,
    rho: &ScopeFunction,
    eps: f64,
    config: &SolverConfig,
    rng_seed: u64,
    quad: &HQuadrature,
) -> Result<(SweepRow, GridFunction)> {
    let scoped = rescale_scope(rho, eps, &[])?;
    let report = solve_ground_state(params, grid, &scoped, config, rng_seed)?;
    let y = report.maximizer.clone();
    let eps_y: Vec<f64> = y.iter().map(|v| eps * v).collect();
    let (ratio, prediction) = if rho.rho_inf().is_finite() {
        let w = report.u_star.recentre(&y);
        let check = asymptotic_ratio_check(&w, rho, params.alpha, eps, &y, quad)?;
        (check.ratio, check.prediction)
    } else {
        (f64::NAN, f64::NAN)
    };
    let row = SweepRow {
        eps,
        c_value: report.c_value,
        y_eps: y,
        eps_y_eps: eps_y,
        mass: report.mass,
        local_mass: 0.0,
        nondegenerate: false,
        ratio,
        prediction,
        grad_norm: report.grad_norm,
        noise: report.noise,
        converged: report.converged,
    };
    Ok((row, report.u_star))
}

/// Solves the rescaled problems with scope `ρ_ε(x) = ρ(εx)/ε` for every `ε`.
pub fn run_eps_sweep(
    params: &ProblemParams,
    grid: &GridSpec,
    rho: &ScopeFunction,
    sweep: &SweepConfig,
    config: &SolverConfig,
    rng_seed: u64,
) -> Result<SweepReport> {
    sweep.validate(rho, grid)?;
    let limit = solve_limit_ground_state(params, grid, config, rng_seed)?;
    let s_est = estimate_sobolev_constant(params, grid, sweep.sobolev_theta, sweep.sobolev_iters)?.s_est;
    let field = match find_h_minimum(rho, grid.dim, params.alpha, &sweep.search) {
        Ok(f) => Some(f),
        Err(e) => {
            warn!("no concentration field for the sweep: {e}");
            None
        }
    };
    let quad = &sweep.search.quadrature;
    let results: Vec<Result<(SweepRow, GridFunction)>> = sweep
        .eps
        .par_iter()
        .map(|&eps| sweep_point(params, grid, rho, eps, config, rng_seed, quad))
        .collect();

    let radius = 2.0 * rho.rho0();
    let mut report = SweepReport {
        eps: sweep.eps.clone(),
        rows: Vec::new(),
        limit_c: limit.c_value,
        limit_noise: limit.noise,
        s_est,
        field,
        radius,
        beta: 0.0,
        complete: false,
    };
    for (eps, result) in sweep.eps.iter().zip(results) {
        match result {
            Ok((mut row, v)) => {
                row.local_mass = v.local_mass(&row.y_eps, radius);
                if report.rows.is_empty() {
                    report.beta = 0.5 * row.local_mass;
                }
                row.nondegenerate = row.local_mass >= report.beta;
                info!(
                    "eps = {eps}: C = {:.10}, y = {:?}, eps*y = {:?}",
                    row.c_value, row.y_eps, row.eps_y_eps
                );
                report.rows.push(row);
            }
            Err(e) => {
                return Err(Error::Sweep {
                    eps: *eps,
                    source: Box::new(e),
                    partial: Box::new(report),
                })
            }
        }
    }
    report.complete = true;
    Ok(report)
}

/// Ground state of the limit functional, used as the fixed profile of the ratio check.
pub fn limit_profile(params: &ProblemParams, grid: &GridSpec, config: &SolverConfig, rng_seed: u64) -> Result<GridFunction> {
    let f = EnergyFunctional::full(*params, grid)?;
    Ok(solve(&f, config, rng_seed)?.u_star)
}
