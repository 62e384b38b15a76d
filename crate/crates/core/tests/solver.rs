use rfl_lab::functionals::EnergyFunctional;
use rfl_lab::model::{GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use rfl_lab::solver::{lambda_scan, solve, solve_ground_state, solve_limit_ground_state, Seed, SolverConfig};

fn params() -> ProblemParams {
    ProblemParams::desk_default()
}

#[test]
fn ground_state_post_conditions() {
    let grid = GridSpec::new(1, 8.0, 128).unwrap();
    let rho = ScopeFunction::from(ScopeFamily::well(1.0, 2.0, 1.0));
    let config = SolverConfig::default();
    let r = solve_ground_state(&params(), &grid, &rho, &config, 3).unwrap();
    assert!(r.converged);
    assert!(r.grad_norm <= config.grad_tol);
    assert!(r.positivity_violation <= 1e-12);
    assert!(r.u_star.min_value() >= 0.0);
    let f = EnergyFunctional::regional(params(), &grid, &rho).unwrap();
    let ray = f.ray_max_energy(&r.u_star).unwrap();
    assert!((ray.value - r.c_value).abs() <= config.nehari_tol);
    let proj = f.nehari_project(&r.u_star).unwrap();
    assert!(r.nehari_residual <= config.nehari_tol * proj.scale);
    assert_eq!(r.seeds.len(), config.seeds.len());
    assert!((r.mass - r.u_star.mass()).abs() == 0.0);
}

#[test]
fn translating_box_and_seed_translates_the_solution() {
    let rho = ScopeFunction::from(ScopeFamily::constant(2.0, 2.0, 2.0));
    let grid = GridSpec::new(1, 6.0, 97).unwrap();
    let shift = 8.0 * grid.spacing();
    let moved = grid.centered_at(&[shift]);
    let config = |c: f64| SolverConfig {
        seeds: vec![Seed::ShiftedGaussian {
            width: 1.0,
            center: vec![c],
        }],
        jitter: 0.0,
        ..SolverConfig::default()
    };
    let a = solve_ground_state(&params(), &grid, &rho, &config(0.3), 0).unwrap();
    let b = solve_ground_state(&params(), &moved, &rho, &config(0.3 + shift), 0).unwrap();
    assert!((a.c_value - b.c_value).abs() < 1e-10);
    assert!((a.maximizer[0] + shift - b.maximizer[0]).abs() < 1e-9);
    for (x, y) in a.u_star.values.iter().zip(&b.u_star.values) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn limit_level_is_stable_under_refinement() {
    let config = SolverConfig::default();
    let coarse = solve_limit_ground_state(&params(), &GridSpec::new(1, 8.0, 128).unwrap(), &config, 0).unwrap();
    let fine = solve_limit_ground_state(&params(), &GridSpec::new(1, 8.0, 256).unwrap(), &config, 0).unwrap();
    assert!(coarse.c_value > 0.0);
    assert!((coarse.c_value - fine.c_value).abs() <= 0.05 * fine.c_value);
}

#[test]
fn lambda_scan_is_monotone_and_reproducible() {
    let grid = GridSpec::new(1, 6.0, 64).unwrap();
    let config = SolverConfig::default();
    let lambdas = [1.0, 2.0, 5.0, 10.0];
    let a = lambda_scan(&params(), &grid, None, &lambdas, 3.8, &config, 1).unwrap();
    let b = lambda_scan(&params(), &grid, None, &lambdas, 3.8, &config, 1).unwrap();
    assert!(a.monotone);
    assert_eq!(a, b);
    for w in a.rows.windows(2) {
        assert!(w[0].c_value >= w[1].c_value);
    }
    assert!(a.lambda0.is_some());
}

#[test]
fn unpreconditioned_descent_agrees() {
    let grid = GridSpec::new(1, 6.0, 48).unwrap();
    let f = EnergyFunctional::full(params(), &grid).unwrap();
    let pre = solve(&f, &SolverConfig::default(), 0).unwrap();
    let plain = solve(
        &f,
        &SolverConfig {
            precondition: false,
            newton_threshold: 0.0,
            max_iters: 200_000,
            grad_tol: 1e-6,
            seeds: vec![Seed::Gaussian { width: 1.0 }],
            armijo: rfl_lab::solver::ArmijoConfig {
                initial_step: 0.05,
                ..Default::default()
            },
            ..SolverConfig::default()
        },
        0,
    )
    .unwrap();
    assert!((pre.c_value - plain.c_value).abs() < 1e-8);
}
