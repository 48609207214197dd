use super::*;
use crate::catalog::scenario;
use crate::error::BsvieError;
use crate::generator::{FreeTerm, FreeTermNode};
use crate::solver::SolverConfig;
use crate::stochastic::{BrownianEnsemble, PathProcess, TimeGrid};

fn ensemble(t: f64, n: usize, paths: usize, seed: u64) -> BrownianEnsemble {
    BrownianEnsemble::simulate(TimeGrid::new(t, n).unwrap(), paths, seed).unwrap()
}

fn rms(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
    (a.iter().enumerate().map(|(p, v)| (v - b(p)).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn terminal_w() -> FreeTerm {
    FreeTerm::new(1, FreeTermNode::Terminal, |_, e, out| out.copy_from_slice(e.w(e.grid().n_steps())))
}

/// `Y_i = c_i W_i` for the grid scheme of the lagged generator.
fn lagged_coefficient(grid: &TimeGrid, i: usize) -> f64 {
    let n = grid.n_steps();
    let c = |j: usize| if j >= n / 2 { 3.0 - grid.time(j) } else { f64::NAN };
    1.0 + (i..n).map(|k| c((k + n / 2).min(n)) * grid.dt()).sum::<f64>()
}

#[test]
fn lagged_generator_matches_grid_scheme_and_continuum() {
    let sc = scenario("example-4.2", None).unwrap();
    let ens = ensemble(2.0, 40, 4000, 3);
    let sol = sc.solve(&ens, &SolverConfig::default()).unwrap();
    let grid = *ens.grid();
    let exact = sc.exact.as_ref().unwrap();
    for i in [0, 7, 19, 20, 31, 39] {
        let w = ens.w(i);
        let c = lagged_coefficient(&grid, i);
        assert!(rms(sol.y.at(i), |p| c * w[p]) < 1e-5, "node {i}");
        // left sums of a linear integrand: O(dt) from the continuum
        let e = rms(sol.y.at(i), |p| exact.y(grid.time(i), w[p]));
        assert!(e < 0.06 * (grid.time(i).max(0.05)).sqrt() * 2.0, "node {i}: {e}");
    }
    for i in [20, 25, 35] {
        let z = sol.z.triangle().get(i, 38).unwrap().eval_vec(&ens, 37, 1);
        let t = grid.time(i);
        assert!(rms(&z, |_| 3.0 - t) < 1e-5, "row {i}");
    }
    assert!(sol.max_residual_rms() < 1e-5);
}

#[test]
fn lag_longer_than_window_needs_two_sweeps_per_window() {
    let sc = scenario("example-4.2", None).unwrap();
    let ens = ensemble(2.0, 20, 500, 4);
    let cfg = SolverConfig {
        delta_steps: Some(5),
        ..SolverConfig::default()
    };
    let sol = sc.solve(&ens, &cfg).unwrap();
    assert_eq!(sol.picard_history.len(), 8);
    assert!(sol.picard_history.iter().skip(1).step_by(2).all(|h| h.delta < 1e-12));
}

#[test]
fn window_violating_contraction_bound_is_refused() {
    let g = PathGeneratorSpec::new("fast", 1, 10.0, |inp: &PathInput<'_>, out| {
        out.copy_from_slice(inp.segment.at(inp.s_node))
    });
    let ens = ensemble(1.0, 10, 200, 1);
    let cfg = SolverConfig {
        delta_steps: Some(5),
        ..SolverConfig::default()
    };
    assert!(matches!(
        solve_path_dependent(&ens, &terminal_w(), &g, &cfg),
        Err(BsvieError::SolverDivergence(_))
    ));
    assert_eq!(default_path_delta_steps(&g, ens.grid()), 1);
}

#[test]
fn current_value_generator_matches_exponential() {
    // g = -Y(s): Y_i = a_i W_i on the grid with the implicit-in-window fixed point.
    let g = PathGeneratorSpec::new("minus-current", 1, 1.0, |inp: &PathInput<'_>, out| {
        for (o, v) in out.iter_mut().zip(inp.segment.at(inp.s_node)) {
            *o = -v;
        }
    })
    .with_lookahead(|s, _| s);
    let ens = ensemble(1.0, 50, 4000, 5);
    let sol = solve_path_dependent(&ens, &terminal_w(), &g, &SolverConfig::default()).unwrap();
    let w0 = ens.w(25);
    // continuum: Y(t) = exp(-(T - t)) W(t)... up to O(dt)
    let e = rms(sol.y.at(25), |p| (-0.5f64).exp() * w0[p]);
    assert!(e < 0.02, "{e}");
    assert!(sol.max_residual_rms() < 1e-4);
}

#[test]
fn z_variant_requires_declared_condition() {
    let g = PathGeneratorSpec::new("kz", 1, 0.0, |inp: &PathInput<'_>, out| out.copy_from_slice(inp.z.unwrap()))
        .with_z(0.2)
        .with_lookahead(|s, _| s);
    let ens = ensemble(1.0, 10, 500, 1);
    assert!(matches!(
        solve_path_dependent_with_z(&ens, &terminal_w(), &g, &SolverConfig::default()),
        Err(BsvieError::Refused(_))
    ));
    assert!(solve_path_dependent(&ens, &terminal_w(), &g, &SolverConfig::default()).is_err());
}

#[test]
fn z_variant_refuses_generator_reading_brownian_future() {
    let g = PathGeneratorSpec::new("peek", 1, 0.0, |inp: &PathInput<'_>, out| {
        let e = inp.ensemble;
        out.copy_from_slice(e.w(e.grid().n_steps()))
    })
    .with_z(0.0)
    .with_adaptedness_condition();
    let ens = ensemble(1.0, 10, 500, 1);
    assert!(matches!(
        solve_path_dependent_with_z(&ens, &terminal_w(), &g, &SolverConfig::default()),
        Err(BsvieError::Refused(_))
    ));
}

#[test]
fn z_variant_solves_linear_z_generator() {
    let kappa = 0.3;
    let g = PathGeneratorSpec::new("kz", 1, 0.0, move |inp: &PathInput<'_>, out| {
        for (o, z) in out.iter_mut().zip(inp.z.unwrap()) {
            *o = kappa * z;
        }
    })
    .with_z(kappa)
    .with_adaptedness_condition()
    .with_lookahead(|s, _| s);
    let ens = ensemble(1.0, 20, 4000, 8);
    let sol = solve_path_dependent_with_z(&ens, &terminal_w(), &g, &SolverConfig::default()).unwrap();
    let grid = *ens.grid();
    for i in [0, 10, 19] {
        let w = ens.w(i);
        let t = grid.time(i);
        assert!(rms(sol.y.at(i), |p| w[p] + kappa * (1.0 - t)) < 1e-5, "node {i}");
    }
}

/// Grid oracle of `dY = -E_s[Y(s + d)] ds + Z dW` with `Y = W` after `T`.
fn anticipated_coefficients(n: usize, d: usize, dt: f64) -> Vec<f64> {
    let mut a = vec![1.0; n + d + 1];
    for k in (0..n).rev() {
        a[k] = a[k + 1] + dt * a[k + d];
    }
    a
}

#[test]
fn anticipated_bsde_matches_delay_equation() {
    let (n, d) = (20, 5);
    let grid = TimeGrid::new(1.0, n).unwrap().extended(d);
    let ens = BrownianEnsemble::simulate(grid, 4000, 12).unwrap();
    let eta = PathProcess::brownian(&ens);
    let mut zeta = PathProcess::zeros(grid, ens.n_paths(), 1);
    for k in 0..grid.n_steps() {
        zeta.at_mut(k).fill(1.0);
    }
    let f = AnticipatedGenerator::new("delay", 1, FutureForm::Conditioned, |inp, out| {
        out.copy_from_slice(inp.y_future)
    });
    let sol = solve_anticipated_bsde(&ens, n, &eta, &zeta, &f, &SolverConfig::default()).unwrap();
    let a = anticipated_coefficients(n, d, grid.dt());
    // node 0 sees only the sample mean of the next step
    assert!(sol.y.at(0)[0].abs() < 0.02);
    for k in [1, 5, 14, 19] {
        let w = ens.w(k);
        // E_s[Y(s + d)] is a plain regression, so sampling noise enters
        let e = rms(sol.y.at(k), |p| a[k] * w[p]);
        assert!(e < 0.02, "node {k}: {e}");
        let e = rms(sol.z.at(k), |_| a[k + 1]);
        assert!(e < 0.05, "step {k}: {e}");
    }
    // continuum a' = -a(t + delta) with a = 1 on [T, T + delta]: a(T - s) = 1 + s for s <= delta
    assert!((a[15] - (1.0 + 5.0 * grid.dt())).abs() < 1e-12);
}

#[test]
fn raw_future_driver_is_refused_with_pointer() {
    let grid = TimeGrid::new(1.0, 10).unwrap().extended(2);
    let ens = BrownianEnsemble::simulate(grid, 100, 1).unwrap();
    let eta = PathProcess::brownian(&ens);
    let f = AnticipatedGenerator::new("raw", 1, FutureForm::Raw, |inp, out| out.copy_from_slice(inp.y_future));
    match solve_anticipated_bsde(&ens, 10, &eta, &eta, &f, &SolverConfig::default()) {
        Err(BsvieError::Refused(msg)) => assert!(msg.contains("--case 4.2")),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn flat_integrand_fails_for_example_1_1() {
    let ens = ensemble(1.0, 50, 4000, 21);
    let rep = demo_no_adapted_solution(DemoCase::Example11, &ens, &SolverConfig::default()).unwrap();
    assert!(rep.holds(), "{}", rep.verdict);
    assert!((-1.2..=-0.8).contains(&rep.z_t_slope), "{}", rep.z_t_slope);
    // best flat fit leaves about sqrt(T^3 / 48)
    assert!((rep.flat_residual - (1.0f64 / 48.0).sqrt()).abs() < 0.02, "{}", rep.flat_residual);
    assert!(rep.bsvie_residual < 1e-5);
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(DEMO_HEADER));
    assert_eq!(text.lines().count(), 1 + 50 * 51 / 2);
}

#[test]
fn flat_integrand_fails_for_example_4_2_region() {
    let ens = ensemble(2.0, 40, 4000, 22);
    let rep = demo_no_adapted_solution(DemoCase::Example42, &ens, &SolverConfig::default()).unwrap();
    assert_eq!(rep.region_start, 20);
    assert!(rep.holds(), "{}", rep.verdict);
    assert!((-1.2..=-0.8).contains(&rep.z_t_slope), "{}", rep.z_t_slope);
    assert!(rep.flat_residual > 0.1);
}

#[test]
fn demo_case_parsing() {
    assert_eq!(DemoCase::parse("1.1").unwrap(), DemoCase::Example11);
    assert_eq!(DemoCase::parse("example-4.2").unwrap(), DemoCase::Example42);
    assert!(DemoCase::parse("2.3").is_err());
}
