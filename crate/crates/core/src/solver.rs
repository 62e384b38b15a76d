//! Ground states by Nehari-projected descent.

use log::{debug, info, warn};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{EnergyBreakdown, EnergyFunctional, Preconditioner};
use crate::model::{check_hypotheses, talenti_extremal, GridFunction, GridSpec, ProblemParams, ScopeFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Seed {
    /// Talenti bubble of width `theta` at the origin.
    Talenti { theta: f64 },
    /// `exp(-|x|²/w²)` at the origin.
    Gaussian { width: f64 },
    /// `exp(-|x - c|²/w²)`; `center` is padded with zeros.
    ShiftedGaussian { width: f64, center: Vec<f64> },
}

impl Seed {
    pub fn label(&self) -> &'static str {
        match self {
            Seed::Talenti { .. } => "talenti",
            Seed::Gaussian { .. } => "gaussian",
            Seed::ShiftedGaussian { .. } => "shifted-gaussian",
        }
    }

    fn sample(&self, params: &ProblemParams, grid: &GridSpec) -> Result<GridFunction> {
        let gaussian = |width: f64, center: &[f64]| {
            GridFunction::from_fn(grid, |x| {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| (xi - center.get(i).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                (-r2 / (width * width)).exp()
            })
        };
        match self {
            Seed::Talenti { theta } => talenti_extremal(params, grid, 1.0, *theta, &vec![0.0; grid.dim]),
            Seed::Gaussian { width } => Ok(gaussian(*width, &[])),
            Seed::ShiftedGaussian { width, center } => Ok(gaussian(*width, center)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmijoConfig {
    pub initial_step: f64,
    pub shrink: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    pub min_step: f64,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        ArmijoConfig {
            initial_step: 1.0,
            shrink: 0.5,
            c1: 1e-4,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Threshold on `‖I'(u)‖_{L²}`.
    pub grad_tol: f64,
    pub nehari_tol: f64,
    pub armijo: ArmijoConfig,
    pub seeds: Vec<Seed>,
    /// Extra Gaussian seeds spread evenly over the middle half of the first axis.
    pub scatter: usize,
    /// Relative amplitude of the multiplicative seed jitter.
    pub jitter: f64,
    /// Descend along `(A + I)^{-1} g` instead of `g`.
    pub precondition: bool,
    /// Try Newton steps on `I' = 0` once `‖I'(u)‖_{L²}` drops below this;
    /// zero disables them.
    pub newton_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 2000,
            grad_tol: 1e-7,
            nehari_tol: 1e-10,
            armijo: ArmijoConfig::default(),
            seeds: vec![
                Seed::Talenti { theta: 1.0 },
                Seed::Gaussian { width: 1.0 },
                Seed::ShiftedGaussian {
                    width: 1.0,
                    center: vec![1.5],
                },
            ],
            scatter: 0,
            jitter: 0.01,
            precondition: true,
            newton_threshold: 1e-2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::validation("solver.grad_tol", "must be positive"));
        }
        if !(self.nehari_tol > 0.0) {
            return Err(Error::validation("solver.nehari_tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("solver.max_iters", "must be at least 1"));
        }
        if self.seeds.is_empty() && self.scatter == 0 {
            return Err(Error::validation("solver.seeds", "at least one seed is required"));
        }
        let a = &self.armijo;
        if !(a.initial_step > 0.0) || !(a.shrink > 0.0 && a.shrink < 1.0) || !(a.c1 > 0.0 && a.c1 < 1.0) {
            return Err(Error::validation(
                "solver.armijo",
                "need initial_step > 0, 0 < shrink < 1, 0 < c1 < 1",
            ));
        }
        if !(self.newton_threshold >= 0.0) {
            return Err(Error::validation("solver.newton_threshold", "must be nonnegative"));
        }
        if !(self.jitter >= 0.0 && self.jitter < 1.0) {
            return Err(Error::validation("solver.jitter", "must lie in [0, 1)"));
        }
        for s in &self.seeds {
            let ok = match s {
                Seed::Talenti { theta } => *theta > 0.0,
                Seed::Gaussian { width } | Seed::ShiftedGaussian { width, .. } => *width > 0.0,
            };
            if !ok {
                return Err(Error::validation("solver.seeds", "seed widths must be positive"));
            }
        }
        Ok(())
    }

    fn all_seeds(&self, grid: &GridSpec) -> Vec<Seed> {
        let mut seeds = self.seeds.clone();
        for k in 0..self.scatter {
            let frac = if self.scatter == 1 {
                0.0
            } else {
                -0.5 + k as f64 / (self.scatter - 1) as f64
            };
            seeds.push(Seed::ShiftedGaussian {
                width: 1.0,
                center: vec![frac * grid.extent],
            });
        }
        seeds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub index: usize,
    pub kind: String,
    pub c_value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    pub maximizer: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub u_star: GridFunction,
    /// `I_ρ(u*)`, the estimate of the ground-state level.
    pub c_value: f64,
    pub energy: EnergyBreakdown,
    pub grad_norm: f64,
    pub iters: usize,
    /// Grid argmax of `u*`.
    pub maximizer: Vec<f64>,
    /// `‖u*‖²_{L²}`
    pub mass: f64,
    pub positivity_violation: f64,
    /// `|I'(u*)u*|`
    pub nehari_residual: f64,
    pub converged: bool,
    pub clamp_events: usize,
    /// Spread of `c_value` across converged seeds.
    pub noise: f64,
    pub seeds: Vec<SeedOutcome>,
}

struct Run {
    u: GridFunction,
    energy: f64,
    grad_norm: f64,
    iters: usize,
    converged: bool,
}

fn jittered(u: GridFunction, amplitude: f64, seed: u64, index: usize) -> GridFunction {
    if amplitude == 0.0 {
        return u;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let values = u
        .values
        .iter()
        .map(|v| v * (1.0 + amplitude * rng.gen_range(-1.0..1.0)))
        .collect();
    GridFunction { spec: u.spec, values }
}

fn l2_norm(g: &GridFunction) -> f64 {
    g.dot(g).sqrt()
}

/// Damped Newton step on `I'(u) = 0`, retracted to the Nehari set. A trial
/// is kept when it lowers the energy by a sufficient amount, or when it
/// halves the gradient without raising the energy beyond rounding.
fn newton_step(f: &EnergyFunctional, u: &GridFunction, g: &GridFunction, grad_norm: f64) -> Result<Option<GridFunction>> {
    let hess = f.hessian(u)?;
    let Some(delta) = hess.lu().solve(&DVector::from_column_slice(&g.values)) else {
        return Ok(None);
    };
    let predicted = g.values.iter().zip(delta.iter()).map(|(a, b)| a * b).sum::<f64>().abs() * f.grid().cell_volume();
    let slack = 1e-13 * f.energy(u)?.total.abs().max(1.0);
    let mut tau = 1.0;
    for _ in 0..8 {
        let trial = GridFunction {
            spec: u.spec.clone(),
            values: u.values.iter().zip(delta.iter()).map(|(v, d)| (v - tau * d).max(0.0)).collect(),
        };
        if let Ok((v, _)) = f.project(&trial) {
            let change = f.energy_change(u, &v)?;
            if change <= -1e-4 * tau * predicted {
                return Ok(Some(v));
            }
            if change <= slack && l2_norm(&f.gradient(&v)?) < 0.5 * grad_norm {
                return Ok(Some(v));
            }
        }
        tau *= 0.5;
    }
    Ok(None)
}

fn descend(
    f: &EnergyFunctional,
    precond: Option<&Preconditioner>,
    start: GridFunction,
    config: &SolverConfig,
) -> Result<Run> {
    let (mut u, _) = f.project(&start.positive_part())?;
    let mut step = config.armijo.initial_step;
    let vol = f.grid().cell_volume();
    let mut iters = config.max_iters;
    let mut grad_norm = f64::INFINITY;
    for it in 0..config.max_iters {
        let g = f.gradient(&u)?;
        grad_norm = l2_norm(&g);
        if grad_norm <= config.grad_tol {
            iters = it;
            break;
        }
        if grad_norm <= config.newton_threshold {
            if let Some(v) = newton_step(f, &u, &g, grad_norm)? {
                u = v;
                continue;
            }
        }
        let d = match precond {
            Some(p) => p.solve(&g.values),
            None => g.values.clone(),
        };
        let slope: f64 = g.values.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() * vol;
        let mut accepted = None;
        while step >= config.armijo.min_step {
            let trial = GridFunction {
                spec: u.spec.clone(),
                values: u.values.iter().zip(&d).map(|(v, di)| (v - step * di).max(0.0)).collect(),
            };
            if let Ok((v, _)) = f.project(&trial) {
                if f.energy_change(&u, &v)? <= -config.armijo.c1 * step * slope {
                    accepted = Some(v);
                    break;
                }
            }
            step *= config.armijo.shrink;
        }
        let Some(v) = accepted else {
            debug!("line search stalled at iteration {it}, gradient norm {grad_norm:.3e}");
            iters = it;
            break;
        };
        u = v;
        step = (step / config.armijo.shrink).min(config.armijo.initial_step);
    }
    if iters == config.max_iters {
        grad_norm = l2_norm(&f.gradient(&u)?);
    }
    Ok(Run {
        energy: f.energy(&u)?.total,
        converged: grad_norm <= config.grad_tol,
        grad_norm,
        u,
        iters,
    })
}

/// Minimises `f` over its Nehari set from every configured seed and keeps
/// the lowest converged level.
pub fn solve(f: &EnergyFunctional, config: &SolverConfig, rng_seed: u64) -> Result<SolveReport> {
    config.validate()?;
    let grid = f.grid().clone();
    let params = *f.params();
    let precond = if config.precondition {
        Some(Preconditioner::new(f.form())?)
    } else {
        None
    };
    let seeds = config.all_seeds(&grid);
    let clamps_before = f.clamp_events();
    let runs: Vec<Result<Run>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| {
            let start = jittered(seed.sample(&params, &grid)?, config.jitter, rng_seed, i);
            descend(f, precond.as_ref(), start, config)
        })
        .collect();

    let mut outcomes = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, Run)> = None;
    let mut best_failed = (f64::INFINITY, 0usize);
    for (i, run) in runs.into_iter().enumerate() {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                warn!("seed {i} ({}) failed: {e}", seeds[i].label());
                continue;
            }
        };
        debug!(
            "seed {i} ({}): energy {:.12}, |g| {:.3e}, {} iterations, converged {}",
            seeds[i].label(),
            run.energy,
            run.grad_norm,
            run.iters,
            run.converged
        );
        outcomes.push(SeedOutcome {
            index: i,
            kind: seeds[i].label().to_string(),
            c_value: run.energy,
            grad_norm: run.grad_norm,
            iters: run.iters,
            converged: run.converged,
            maximizer: run.u.argmax(),
        });
        if !run.converged {
            if run.grad_norm < best_failed.0 {
                best_failed = (run.grad_norm, run.iters);
            }
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => run.energy < b.energy || (run.energy == b.energy && run.grad_norm < b.grad_norm),
        };
        if better {
            best = Some((i, run));
        }
    }
    let Some((_, run)) = best else {
        return Err(Error::Convergence {
            seeds: seeds.len(),
            best_grad_norm: best_failed.0,
            iters: best_failed.1,
        });
    };
    let converged_levels: Vec<f64> = outcomes.iter().filter(|o| o.converged).map(|o| o.c_value).collect();
    let noise = converged_levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - converged_levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let clamp_events = f.clamp_events() - clamps_before;
    if clamp_events > 0 {
        warn!("{clamp_events} clamp events during the solve; convergence is not claimed");
    }
    let energy = f.energy(&run.u)?;
    let residual = f.nehari_energy_identity(&run.u, config.nehari_tol)?.residual.abs();
    info!(
        "ground state level {:.12} (|g| = {:.3e}, {} iterations)",
        energy.total, run.grad_norm, run.iters
    );
    Ok(SolveReport {
        c_value: energy.total,
        energy,
        grad_norm: run.grad_norm,
        iters: run.iters,
        maximizer: run.u.argmax(),
        mass: run.u.mass(),
        positivity_violation: (-run.u.min_value()).max(0.0),
        nehari_residual: residual,
        converged: clamp_events == 0,
        clamp_events,
        noise,
        seeds: outcomes,
        u_star: run.u,
    })
}

/// Ground state of `I_ρ` after checking the scope hypotheses on the grid.
/// Constant scopes skip the strict `ρ < ρ∞` test.
pub fn solve_ground_state(
    params: &ProblemParams,
    grid: &GridSpec,
    rho: &ScopeFunction,
    config: &SolverConfig,
    rng_seed: u64,
) -> Result<SolveReport> {
    rho.family.validate()?;
    let hyp = check_hypotheses(rho, grid);
    if (!hyp.rho1 && !rho.is_constant()) || !hyp.continuous || hyp.rho3 == Some(false) {
        return Err(Error::domain(format!(
            "scope {} fails its hypotheses on this grid: {hyp:?}",
            rho.family.name()
        )));
    }
    let f = EnergyFunctional::regional(*params, grid, rho)?;
    solve(&f, config, rng_seed)
}

/// Ground state of the limit functional `I` (full form).
pub fn solve_limit_ground_state(
    params: &ProblemParams,
    grid: &GridSpec,
    config: &SolverConfig,
    rng_seed: u64,
) -> Result<SolveReport> {
    let f = EnergyFunctional::full(*params, grid)?;
    solve(&f, config, rng_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub c_value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub rows: Vec<LambdaRow>,
    /// Smallest scanned `λ` with `c_value < bound`.
    pub lambda0: Option<f64>,
    /// `c_value` nonincreasing along the scan.
    pub monotone: bool,
    pub s_est: f64,
    pub bound: f64,
}

/// Solves for each `λ` and compares the level with `(α/n) S^{n/2α}`.
/// `rho = None` selects the limit functional.
pub fn lambda_scan(
    params: &ProblemParams,
    grid: &GridSpec,
    rho: Option<&ScopeFunction>,
    lambdas: &[f64],
    s_est: f64,
    config: &SolverConfig,
    rng_seed: u64,
) -> Result<LambdaScan> {
    if lambdas.is_empty() {
        return Err(Error::validation("lambdas", "empty list"));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("lambdas", "must be strictly increasing"));
    }
    if !(s_est > 0.0) {
        return Err(Error::domain("Sobolev estimate must be positive"));
    }
    let bound = params.critical_level(s_est);
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let p = params.with_lambda(lambda);
        p.validate()?;
        let report = match rho {
            Some(r) => solve_ground_state(&p, grid, r, config, rng_seed)?,
            None => solve_limit_ground_state(&p, grid, config, rng_seed)?,
        };
        rows.push(LambdaRow {
            lambda,
            c_value: report.c_value,
            bound,
            satisfied: report.c_value < bound,
        });
    }
    let lambda0 = rows.iter().find(|r| r.satisfied).map(|r| r.lambda);
    let monotone = rows.windows(2).all(|w| w[1].c_value <= w[0].c_value + 1e-9 * w[0].c_value.abs());
    Ok(LambdaScan {
        rows,
        lambda0,
        monotone,
        s_est,
        bound,
    })
}
