//! Energy functionals `I_ρ` and `I`, their derivatives, Nehari algebra and
//! the discrete Sobolev constant.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{lp_norm, FormMode, NonlocalForm};
use crate::model::{talenti_extremal, GridFunction, GridSpec, ProblemParams, ScopeFunction};

/// Values above this magnitude are clamped before the critical power is taken.
pub const CLAMP_LIMIT: f64 = 1e6;

/// Relative tolerance of the Nehari root finder.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½‖u‖²_ρ`
    pub quad: f64,
    /// `λ/(q+1) ∫ u₊^{q+1}`
    pub sub: f64,
    /// `1/2* ∫ u₊^{2*}`
    pub crit: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariProjection {
    pub t_u: f64,
    /// `|I'(t u)(t u)|`
    pub residual: f64,
    /// Size of the largest of the three terms at `t_u`.
    pub scale: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariIdentity {
    /// `I_ρ(u)`
    pub lhs: f64,
    /// `λ(1/2 - 1/(q+1)) ∫u₊^{q+1} + (α/n) ∫u₊^{2*}`
    pub rhs: f64,
    pub gap: f64,
    /// `I'_ρ(u) u`
    pub residual: f64,
    pub precondition_met: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayMax {
    pub t_star: f64,
    pub value: f64,
    /// `value ≥ I(t u)` on 50 log-spaced `t ∈ [1e-3 t*, 1e3 t*]`.
    pub dominates: bool,
}

/// The three scalars `Q = ‖u‖²_ρ`, `A = ∫u₊^{q+1}`, `B = ∫u₊^{2*}` that fix
/// the functional along the ray through `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayScalars {
    pub quad: f64,
    pub sub: f64,
    pub crit: f64,
}

impl RayScalars {
    /// `I(t u)`.
    pub fn energy(&self, t: f64, params: &ProblemParams) -> f64 {
        let p = params.crit_exp();
        0.5 * t * t * self.quad
            - params.lambda / (params.q + 1.0) * t.powf(params.q + 1.0) * self.sub
            - t.powf(p) * self.crit / p
    }

    /// `I'(t u)(t u)`.
    pub fn derivative(&self, t: f64, params: &ProblemParams) -> f64 {
        t * t * self.quad - params.lambda * t.powf(params.q + 1.0) * self.sub - t.powf(params.crit_exp()) * self.crit
    }
}

/// Solves `Q = λ t^{q-1} A + t^{2*-2} B` for the unique `t > 0`.
///
/// The right side increases strictly from 0 to ∞, so doubling gives a
/// bracket and bisection cannot fail.
pub fn nehari_scalar(scalars: RayScalars, lambda: f64, q: f64, crit_exp: f64) -> Result<NehariProjection> {
    let RayScalars { quad, sub, crit } = scalars;
    let a = lambda * sub;
    if !(a > 0.0 || crit > 0.0) || !(quad > 0.0) {
        return Err(Error::NoProjection);
    }
    let phi = |t: f64| a * t.powf(q - 1.0) + crit * t.powf(crit_exp - 2.0);
    let dphi = |t: f64| a * (q - 1.0) * t.powf(q - 2.0) + crit * (crit_exp - 2.0) * t.powf(crit_exp - 3.0);

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if phi(1.0) < quad {
        while phi(hi) < quad {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        while phi(lo) > quad {
            hi = lo;
            lo *= 0.5;
        }
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    while hi - lo > 1e-15 * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < quad {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut t = 0.5 * (lo + hi);
    // Newton polish, kept only when it improves the residual
    for _ in 0..3 {
        let next = t - (phi(t) - quad) / dphi(t);
        if next > 0.0 && (phi(next) - quad).abs() < (phi(t) - quad).abs() {
            t = next;
        } else {
            break;
        }
    }
    let residual = t * t * (quad - phi(t)).abs();
    let scale = (t * t * quad)
        .max(a * t.powf(q + 1.0))
        .max(crit * t.powf(crit_exp))
        .max(1.0);
    Ok(NehariProjection {
        t_u: t,
        residual,
        scale,
        bracket,
        iterations,
    })
}

/// `I_ρ` (or `I` when the form is the full one) on a fixed grid.
#[derive(Debug)]
pub struct EnergyFunctional {
    params: ProblemParams,
    form: NonlocalForm,
    clamp_events: AtomicUsize,
}

impl Clone for EnergyFunctional {
    fn clone(&self) -> Self {
        EnergyFunctional {
            params: self.params,
            form: self.form.clone(),
            clamp_events: AtomicUsize::new(self.clamp_events.load(Ordering::Relaxed)),
        }
    }
}

impl EnergyFunctional {
    pub fn new(params: ProblemParams, form: NonlocalForm) -> Result<Self> {
        params.validate()?;
        if form.grid().dim != params.n {
            return Err(Error::Shape(format!(
                "grid dimension {} differs from n = {}",
                form.grid().dim,
                params.n
            )));
        }
        if form.alpha() != params.alpha {
            return Err(Error::domain("form and parameters use different alpha"));
        }
        Ok(EnergyFunctional {
            params,
            form,
            clamp_events: AtomicUsize::new(0),
        })
    }

    pub fn regional(params: ProblemParams, grid: &GridSpec, rho: &ScopeFunction) -> Result<Self> {
        Self::new(params, NonlocalForm::regional(grid, params.alpha, rho)?)
    }

    /// The limit functional `I` with the full form.
    pub fn full(params: ProblemParams, grid: &GridSpec) -> Result<Self> {
        Self::new(params, NonlocalForm::full(grid, params.alpha)?)
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn form(&self) -> &NonlocalForm {
        &self.form
    }

    pub fn grid(&self) -> &GridSpec {
        self.form.grid()
    }

    pub fn is_full(&self) -> bool {
        matches!(self.form.mode(), FormMode::Full)
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events.load(Ordering::Relaxed)
    }

    fn positive(&self, v: f64) -> f64 {
        if v > CLAMP_LIMIT {
            self.clamp_events.fetch_add(1, Ordering::Relaxed);
            warn!("clamping grid value {v:.3e} to {CLAMP_LIMIT:.0e}");
            CLAMP_LIMIT
        } else {
            v.max(0.0)
        }
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if self.grid().same_lattice(&u.spec) {
            Ok(())
        } else {
            Err(Error::Shape("function and functional use different grids".into()))
        }
    }

    pub fn ray_scalars(&self, u: &GridFunction) -> Result<RayScalars> {
        self.check(u)?;
        let vol = self.grid().cell_volume();
        let p = self.params.crit_exp();
        let q1 = self.params.q + 1.0;
        let (mut sub, mut crit) = (0.0, 0.0);
        for &v in &u.values {
            let vp = self.positive(v);
            if vp > 0.0 {
                sub += vp.powf(q1);
                crit += vp.powf(p);
            }
        }
        let quad = self.form.eval_values(&u.values, &u.values) + u.mass();
        Ok(RayScalars {
            quad,
            sub: sub * vol,
            crit: crit * vol,
        })
    }

    pub fn energy(&self, u: &GridFunction) -> Result<EnergyBreakdown> {
        let s = self.ray_scalars(u)?;
        let p = self.params.crit_exp();
        let quad = 0.5 * s.quad;
        let sub = self.params.lambda / (self.params.q + 1.0) * s.sub;
        let crit = s.crit / p;
        Ok(EnergyBreakdown {
            quad,
            sub,
            crit,
            total: quad - sub - crit,
        })
    }

    /// `I(v) - I(u)`, evaluated from `v - u` so that small changes keep
    /// their relative accuracy.
    pub fn energy_change(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let delta: Vec<f64> = v.values.iter().zip(&u.values).map(|(a, b)| a - b).collect();
        let sum: Vec<f64> = v.values.iter().zip(&u.values).map(|(a, b)| a + b).collect();
        let vol = self.grid().cell_volume();
        let quad = self.form.eval_values(&delta, &sum) + delta.iter().zip(&sum).map(|(d, s)| d * s).sum::<f64>() * vol;
        let p = self.params.crit_exp();
        let q1 = self.params.q + 1.0;
        let (mut sub, mut crit) = (0.0, 0.0);
        for (&a, &b) in u.values.iter().zip(&v.values) {
            let (a, b) = (self.positive(a), self.positive(b));
            if a > 0.0 && (b - a).abs() <= 0.5 * a {
                // b^k - a^k = a^k expm1(k ln1p((b - a)/a))
                let l = ((b - a) / a).ln_1p();
                sub += a.powf(q1) * (q1 * l).exp_m1();
                crit += a.powf(p) * (p * l).exp_m1();
            } else {
                sub += b.powf(q1) - a.powf(q1);
                crit += b.powf(p) - a.powf(p);
            }
        }
        Ok(0.5 * quad - self.params.lambda / q1 * sub * vol - crit * vol / p)
    }

    /// Riesz representative of `I'_ρ(u)` in the discrete `L²` pairing:
    /// `g = A u + u - λ u₊^q - u₊^{2*-1}`.
    pub fn gradient(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let au = self.form.apply_values(&u.values);
        let p = self.params.crit_exp();
        let values = u
            .values
            .iter()
            .zip(&au)
            .map(|(&v, &a)| {
                let vp = self.positive(v);
                let nonlinear = if vp > 0.0 {
                    self.params.lambda * vp.powf(self.params.q) + vp.powf(p - 1.0)
                } else {
                    0.0
                };
                a + v - nonlinear
            })
            .collect();
        Ok(GridFunction {
            spec: u.spec.clone(),
            values,
        })
    }

    /// Matrix of `I''_ρ(u)` in the discrete `L²` pairing:
    /// `A + I - diag(λ q u₊^{q-1} + (2*-1) u₊^{2*-2})`.
    pub fn hessian(&self, u: &GridFunction) -> Result<DMatrix<f64>> {
        self.check(u)?;
        let n = u.len();
        let p = self.params.crit_exp();
        let q = self.params.q;
        let mut h = self.form.matrix() + DMatrix::<f64>::identity(n, n);
        for (i, &v) in u.values.iter().enumerate() {
            let vp = self.positive(v);
            if vp > 0.0 {
                h[(i, i)] -= self.params.lambda * q * vp.powf(q - 1.0) + (p - 1.0) * vp.powf(p - 2.0);
            }
        }
        Ok(h)
    }

    /// `I'_ρ(u) v`.
    pub fn derivative(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        Ok(self.gradient(u)?.dot(v))
    }

    pub fn nehari_project(&self, u: &GridFunction) -> Result<NehariProjection> {
        let s = self.ray_scalars(u)?;
        nehari_scalar(s, self.params.lambda, self.params.q, self.params.crit_exp())
    }

    /// `t_u u` on the Nehari set.
    pub fn project(&self, u: &GridFunction) -> Result<(GridFunction, NehariProjection)> {
        let proj = self.nehari_project(u)?;
        Ok((u.scale(proj.t_u), proj))
    }

    /// Both sides of `I(u) = I(u) - ½ I'(u)u` for `u` on the Nehari set.
    pub fn nehari_energy_identity(&self, u: &GridFunction, tol: f64) -> Result<NehariIdentity> {
        let s = self.ray_scalars(u)?;
        let lhs = s.energy(1.0, &self.params);
        let q = self.params.q;
        let rhs = self.params.lambda * (0.5 - 1.0 / (q + 1.0)) * s.sub + self.params.nehari_coefficient() * s.crit;
        let residual = s.derivative(1.0, &self.params);
        Ok(NehariIdentity {
            lhs,
            rhs,
            gap: (lhs - rhs).abs(),
            residual,
            precondition_met: residual.abs() <= tol,
        })
    }

    /// `max_{t ≥ 0} I(t u)`, attained at the Nehari scalar.
    pub fn ray_max_energy(&self, u: &GridFunction) -> Result<RayMax> {
        let s = self.ray_scalars(u)?;
        let proj = nehari_scalar(s, self.params.lambda, self.params.q, self.params.crit_exp())?;
        let t_star = proj.t_u;
        let value = s.energy(t_star, &self.params);
        let slack = 1e-12 * value.abs().max(1.0);
        let dominates = (0..50).all(|k| {
            let t = t_star * 10f64.powf(-3.0 + 6.0 * k as f64 / 49.0);
            s.energy(t, &self.params) <= value + slack
        });
        Ok(RayMax {
            t_star,
            value,
            dominates,
        })
    }
}

/// Cholesky factor of `A + I`, the Gram matrix of `‖·‖_ρ` on the grid.
pub struct Preconditioner {
    factor: Cholesky<f64, Dyn>,
}

impl Preconditioner {
    pub fn new(form: &NonlocalForm) -> Result<Self> {
        let n = form.matrix().nrows();
        let gram: DMatrix<f64> = form.matrix() + DMatrix::<f64>::identity(n, n);
        let factor = Cholesky::new(gram).ok_or_else(|| Error::domain("form Gram matrix is not positive definite"))?;
        Ok(Preconditioner { factor })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.factor.solve(&b).as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SobolevMethod {
    ExtremalEval,
    Minimized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub s_est: f64,
    pub method: SobolevMethod,
    /// Quotient at the extremal itself.
    pub extremal_value: f64,
    pub minimizer: GridFunction,
    pub iterations: usize,
}

/// `E(u, u) / ‖u‖²_{L^{2*}}` for the full form.
pub fn sobolev_quotient(form: &NonlocalForm, u: &GridFunction, crit_exp: f64) -> Result<f64> {
    let norm = lp_norm(u, crit_exp)?;
    if norm == 0.0 {
        return Err(Error::domain("Sobolev quotient of the zero function"));
    }
    Ok(form.eval(u, u)? / (norm * norm))
}

/// Discrete best Sobolev constant: the Rayleigh quotient at the extremal of
/// width `theta`, then preconditioned gradient descent on the quotient.
pub fn estimate_sobolev_constant(
    params: &ProblemParams,
    grid: &GridSpec,
    theta: f64,
    max_iters: usize,
) -> Result<SobolevEstimate> {
    if theta < 4.0 * grid.spacing() {
        return Err(Error::domain(format!(
            "extremal width {theta} is below 4h = {}; the grid does not resolve it",
            4.0 * grid.spacing()
        )));
    }
    if grid.dim != params.n {
        return Err(Error::Shape("grid dimension differs from n".into()));
    }
    let form = NonlocalForm::full(grid, params.alpha)?;
    let p = params.crit_exp();
    let u0 = talenti_extremal(params, grid, 1.0, theta, &vec![0.0; grid.dim])?;
    let extremal_value = sobolev_quotient(&form, &u0, p)?;
    if max_iters == 0 {
        return Ok(SobolevEstimate {
            s_est: extremal_value,
            method: SobolevMethod::ExtremalEval,
            extremal_value,
            minimizer: u0,
            iterations: 0,
        });
    }

    let precond = Preconditioner::new(&form)?;
    let vol = grid.cell_volume();
    let normalise = |u: &GridFunction| -> Result<GridFunction> {
        let n = lp_norm(u, p)?;
        Ok(u.scale(1.0 / n))
    };
    let mut u = normalise(&u0)?;
    let mut value = extremal_value;
    let mut step = 1.0;
    let mut iterations = 0;
    let mut stalls = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        // L² gradient at ‖u‖_{2*} = 1: 2 A u - 2 E(u) |u|^{p-2} u
        let au = form.apply_values(&u.values);
        let grad: Vec<f64> = u
            .values
            .iter()
            .zip(&au)
            .map(|(&v, &a)| 2.0 * a - 2.0 * value * v.abs().powf(p - 2.0) * v)
            .collect();
        let dir = precond.solve(&grad);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>() * vol;
        if slope <= 0.0 {
            break;
        }
        let mut accepted = None;
        while step > 1e-12 {
            let trial = GridFunction {
                spec: u.spec.clone(),
                values: u.values.iter().zip(&dir).map(|(v, d)| v - step * d).collect(),
            };
            if lp_norm(&trial, p)? > 0.0 {
                let trial = normalise(&trial)?;
                let tv = form.eval(&trial, &trial)?;
                if tv <= value - 1e-4 * step * slope {
                    accepted = Some((trial, tv));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, next_value)) = accepted else { break };
        let decrease = value - next_value;
        u = next;
        value = next_value;
        step = (step * 2.0).min(1.0);
        if decrease <= 1e-12 * value {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ok(SobolevEstimate {
        s_est: value.min(extremal_value),
        method: SobolevMethod::Minimized,
        extremal_value,
        minimizer: u,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScopeFamily;

    fn setup() -> (ProblemParams, GridSpec, EnergyFunctional) {
        let params = ProblemParams::desk_default();
        let grid = GridSpec::new(1, 6.0, 48).unwrap();
        let rho = ScopeFunction::from(ScopeFamily::well(1.0, 2.0, 1.0));
        let f = EnergyFunctional::regional(params, &grid, &rho).unwrap();
        (params, grid, f)
    }

    #[test]
    fn zero_function() {
        let (_, grid, f) = setup();
        let z = GridFunction::zeros(&grid);
        let e = f.energy(&z).unwrap();
        assert_eq!((e.quad, e.sub, e.crit, e.total), (0.0, 0.0, 0.0, 0.0));
        assert!(f.gradient(&z).unwrap().is_zero());
        assert!(matches!(f.nehari_project(&z), Err(Error::NoProjection)));
        let id = f.nehari_energy_identity(&z, 1e-12).unwrap();
        assert_eq!((id.lhs, id.rhs), (0.0, 0.0));
    }

    #[test]
    fn nonpositive_function_has_only_quadratic_energy() {
        let (_, grid, f) = setup();
        let u = GridFunction::from_fn(&grid, |x| -(-x[0] * x[0]).exp());
        let e = f.energy(&u).unwrap();
        assert_eq!(e.sub, 0.0);
        assert_eq!(e.crit, 0.0);
        assert_eq!(e.total, e.quad);
        assert!(matches!(f.nehari_project(&u), Err(Error::NoProjection)));
    }

    #[test]
    fn lambda_zero_closed_form() {
        let s = RayScalars {
            quad: 3.0,
            sub: 5.0,
            crit: 0.7,
        };
        let p = 10.0;
        let proj = nehari_scalar(s, 0.0, 3.0, p).unwrap();
        let exact = (3.0f64 / 0.7).powf(1.0 / (p - 2.0));
        assert!((proj.t_u - exact).abs() < 1e-13 * exact);
    }

    #[test]
    fn already_on_nehari_gives_unit_scalar() {
        let s = RayScalars {
            quad: 2.0 * 1.5 + 0.25,
            sub: 1.5,
            crit: 0.25,
        };
        let proj = nehari_scalar(s, 2.0, 3.0, 4.0).unwrap();
        assert!((proj.t_u - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coefficient_matches_critical_exponent() {
        let p = ProblemParams::new(2, 0.5, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(p.nehari_coefficient(), 0.25);
        assert_eq!(0.5 - 1.0 / p.crit_exp(), 0.25);
    }

    #[test]
    fn energy_change_matches_difference() {
        let (_, grid, f) = setup();
        let u = GridFunction::from_fn(&grid, |x| (-x[0] * x[0]).exp() - 0.1);
        let v = GridFunction::from_fn(&grid, |x| 1.1 * (-x[0] * x[0] / 1.2).exp() - 0.05);
        let direct = f.energy(&v).unwrap().total - f.energy(&u).unwrap().total;
        assert!((f.energy_change(&u, &v).unwrap() - direct).abs() < 1e-12);
        assert_eq!(f.energy_change(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let (_, grid, f) = setup();
        let u = GridFunction::from_fn(&grid, |x| 0.8 * (-x[0] * x[0]).exp());
        let v = GridFunction::from_fn(&grid, |x| (x[0] * 1.3).sin() * (-x[0] * x[0] / 4.0).exp());
        let hv = f.hessian(&u).unwrap() * DVector::from_column_slice(&v.values);
        let s = 1e-5;
        let gp = f.gradient(&(&u + &v.scale(s))).unwrap();
        let gm = f.gradient(&(&u - &v.scale(s))).unwrap();
        for i in 0..u.len() {
            let fd = (gp.values[i] - gm.values[i]) / (2.0 * s);
            assert!((fd - hv[i]).abs() < 1e-5 * (1.0 + hv[i].abs()), "{i}: {fd} vs {}", hv[i]);
        }
    }

    #[test]
    fn ray_max_is_scale_free() {
        let (_, grid, f) = setup();
        let u = GridFunction::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        let a = f.ray_max_energy(&u).unwrap();
        let b = f.ray_max_energy(&u.scale(3.7)).unwrap();
        assert!(a.dominates && b.dominates);
        assert!(a.value > 0.0);
        assert!((a.value - b.value).abs() < 1e-10 * a.value);
        assert!((a.t_star / 3.7 - b.t_star).abs() < 1e-10 * a.t_star);
    }

    #[test]
    fn sobolev_preconditions() {
        let params = ProblemParams::desk_default();
        let grid = GridSpec::new(1, 4.0, 16).unwrap();
        assert!(estimate_sobolev_constant(&params, &grid, 0.5, 0).is_err());
        let est = estimate_sobolev_constant(&params, &grid, 2.5, 20).unwrap();
        assert!(est.s_est <= est.extremal_value);
        assert!(est.s_est > 0.0);
    }
}
