mod common;

use common::{random_function, rel, rng};
use proptest::prelude::*;
use rand::Rng;
use rfl_lab::forms::complement_form;
use rfl_lab::functionals::{estimate_sobolev_constant, sobolev_quotient, EnergyFunctional};
use rfl_lab::model::{talenti_extremal, GridFunction, GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use rfl_lab::Error;

fn well() -> ScopeFunction {
    ScopeFunction::from(ScopeFamily::well(1.0, 2.0, 1.0))
}

fn setup(m: usize) -> (ProblemParams, GridSpec) {
    (ProblemParams::desk_default(), GridSpec::new(1, 8.0, m).unwrap())
}

/// `(I(u + s v) - I(u - s v)) / 2s` against `⟨g, v⟩`.
fn fd_error(f: &EnergyFunctional, u: &GridFunction, v: &GridFunction) -> f64 {
    let s = 1e-4;
    let plus = f.energy(&(u + &v.scale(s))).unwrap().total;
    let minus = f.energy(&(u - &v.scale(s))).unwrap().total;
    let fd = (plus - minus) / (2.0 * s);
    let exact = f.gradient(u).unwrap().dot(v);
    rel(fd, exact)
}

#[test]
fn gradient_matches_finite_differences() {
    let (params, grid) = setup(64);
    let regional = EnergyFunctional::regional(params, &grid, &well()).unwrap();
    let full = EnergyFunctional::full(params, &grid).unwrap();
    let mut r = rng(11);
    for _ in 0..10 {
        let u = random_function(&grid, &mut r, -0.3, 1.0);
        let v = random_function(&grid, &mut r, -1.0, 1.0);
        assert!(fd_error(&regional, &u, &v) < 1e-5);
        assert!(fd_error(&full, &u, &v) < 1e-5);
    }
}

#[test]
fn energy_splits_through_the_complement() {
    let (params, grid) = setup(64);
    let regional = EnergyFunctional::regional(params, &grid, &well()).unwrap();
    let limit = ScopeFunction::from(ScopeFamily::constant(2.0, 2.0, 2.0));
    let at_limit = EnergyFunctional::regional(params, &grid, &limit).unwrap();
    let mut r = rng(12);
    for _ in 0..10 {
        let u = random_function(&grid, &mut r, -0.5, 1.0);
        let lhs = regional.energy(&u).unwrap().total;
        let rhs = at_limit.energy(&u).unwrap().total - 0.5 * complement_form(&u, &well(), 2.0, params.alpha).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

#[test]
fn regional_energy_is_below_limit_energy() {
    let (params, grid) = setup(64);
    let regional = EnergyFunctional::regional(params, &grid, &well()).unwrap();
    let full = EnergyFunctional::full(params, &grid).unwrap();
    let mut r = rng(13);
    for _ in 0..10 {
        let u = random_function(&grid, &mut r, -1.0, 1.0);
        assert!(regional.energy(&u).unwrap().total <= full.energy(&u).unwrap().total);
    }
}

#[test]
fn nehari_projection_and_identity() {
    let (params, grid) = setup(64);
    let f = EnergyFunctional::regional(params, &grid, &well()).unwrap();
    let mut r = rng(14);
    for _ in 0..20 {
        let u = random_function(&grid, &mut r, -0.2, 2.0);
        let proj = f.nehari_project(&u).unwrap();
        assert!(proj.residual <= 1e-12 * proj.scale);
        let s: f64 = r.gen_range(0.1..10.0);
        let scaled = f.nehari_project(&u.scale(s)).unwrap();
        assert!(rel(scaled.t_u, proj.t_u / s) < 1e-10);
        let on = u.scale(proj.t_u);
        let id = f.nehari_energy_identity(&on, 1e-9 * proj.scale).unwrap();
        assert!(id.precondition_met);
        assert!(id.gap <= 1e-10 * proj.scale);
    }
}

#[test]
fn projection_needs_a_positive_part() {
    let (params, grid) = setup(32);
    let f = EnergyFunctional::full(params, &grid).unwrap();
    let u = GridFunction::constant(&grid, -1.0);
    assert!(matches!(f.nehari_project(&u), Err(Error::NoProjection)));
    assert!(matches!(f.ray_max_energy(&u), Err(Error::NoProjection)));
}

#[test]
fn mountain_pass_geometry() {
    let (params, grid) = setup(64);
    let f = EnergyFunctional::regional(params, &grid, &well()).unwrap();
    let mut r = rng(15);
    // small sphere: energy bounded below by a positive constant
    let delta = 1e-2;
    let mut lowest = f64::INFINITY;
    for _ in 0..50 {
        let u = random_function(&grid, &mut r, -1.0, 1.0);
        let norm = f.ray_scalars(&u).unwrap().quad.sqrt();
        lowest = lowest.min(f.energy(&u.scale(delta / norm)).unwrap().total);
    }
    assert!(lowest > 0.0);
    let bump = GridFunction::from_fn(&grid, |x| (-x[0] * x[0]).exp());
    assert!(f.energy(&bump.scale(10.0)).unwrap().total < 0.0);
    let max = f.ray_max_energy(&bump).unwrap();
    assert!(max.value > 0.0 && max.dominates);
}

#[test]
fn sobolev_quotient_properties() {
    let (params, grid) = setup(128);
    let form = rfl_lab::forms::NonlocalForm::full(&grid, params.alpha).unwrap();
    let u0 = talenti_extremal(&params, &grid, 1.0, 1.0, &[0.0]).unwrap();
    let p = params.crit_exp();
    let a = sobolev_quotient(&form, &u0, p).unwrap();
    let b = sobolev_quotient(&form, &u0.scale(7.3), p).unwrap();
    assert!(rel(a, b) < 1e-12);
    let est = estimate_sobolev_constant(&params, &grid, 1.0, 100).unwrap();
    assert!(est.s_est > 0.0);
    assert!(est.s_est <= est.extremal_value);
    assert!(rel(est.extremal_value, a) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nehari_scaling_law(seed in 0u64..10_000, s in 0.01f64..100.0) {
        let (params, grid) = setup(32);
        let f = EnergyFunctional::full(params, &grid).unwrap();
        let mut r = rng(seed);
        let u = random_function(&grid, &mut r, 0.0, 1.0);
        let t = f.nehari_project(&u).unwrap().t_u;
        let ts = f.nehari_project(&u.scale(s)).unwrap().t_u;
        prop_assert!(rel(ts, t / s) < 1e-10);
        let a = f.ray_max_energy(&u).unwrap().value;
        let b = f.ray_max_energy(&u.scale(s)).unwrap().value;
        prop_assert!(rel(a, b) < 1e-10);
    }

    #[test]
    fn lambda_lowers_the_energy(seed in 0u64..10_000, l1 in 0.1f64..5.0, extra in 0.1f64..5.0) {
        let (params, grid) = setup(32);
        let mut r = rng(seed);
        let u = random_function(&grid, &mut r, 0.01, 1.0);
        let f1 = EnergyFunctional::full(params.with_lambda(l1), &grid).unwrap();
        let f2 = EnergyFunctional::full(params.with_lambda(l1 + extra), &grid).unwrap();
        prop_assert!(f2.energy(&u).unwrap().total < f1.energy(&u).unwrap().total);
    }
}
