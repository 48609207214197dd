//! Property checks on invariants that hold for every input, not just fixtures.

mod common;

use bsvie::catalog::log_log_fit;
use bsvie::cli::RunManifest;
use bsvie::constants::{alpha, certify, compute_hat_kp, Hypothesis, LipschitzProfile};
use bsvie::generator::{FreeTerm, FreeTermNode, GeneratorSpec};
use bsvie::par;
use bsvie::regression::{BasisConfig, Regressor};
use bsvie::solver::{solve_type1, weighted_norm, BetaPolicy, SolverConfig};
use bsvie::stochastic::{ito_integral, PathProcess, TimeGrid};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_nodes_round_trip(t in 0.1f64..10.0, n in 2usize..400) {
        let g = TimeGrid::new(t, n).unwrap();
        for k in [0, n / 3, n / 2, n] {
            prop_assert_eq!(g.node_of(g.time(k)), Some(k));
        }
        prop_assert!((g.time(n) - t).abs() < 1e-12 * t);
    }

    #[test]
    fn coarse_grid_shares_fine_nodes(t in 0.1f64..5.0, m in 2usize..40, f in 1usize..6) {
        let fine = TimeGrid::new(t, m * f).unwrap();
        let coarse = fine.coarsen(f).unwrap();
        prop_assert_eq!(coarse.n_steps(), m);
        for k in 0..=m {
            prop_assert!((coarse.time(k) - fine.time(k * f)).abs() < 1e-12 * t);
        }
    }

    #[test]
    fn coarsened_paths_agree_on_shared_nodes(m in 2usize..12, f in 1usize..5, seed in any::<u64>()) {
        let ens = common::ensemble(1.0, m * f, 50, seed);
        let c = ens.coarsen(f).unwrap();
        for k in 0..=m {
            for (a, b) in c.w(k).iter().zip(ens.w(k * f)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resampling_keeps_the_past(n in 2usize..20, node_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let ens = common::ensemble(1.0, n, 40, seed);
        let node = (node_frac * n as f64) as usize;
        let r = ens.resample_after(node, seed.wrapping_add(1));
        for k in 0..=node {
            prop_assert_eq!(r.w(k), ens.w(k));
        }
    }

    #[test]
    fn chunked_sum_ignores_thread_count(len in 1usize..9000, salt in 0u32..1000) {
        let data: Vec<f64> = (0..len).map(|i| ((i as u32 ^ salt) as f64).sin() * 1e4).collect();
        let run = |t| par::with_threads(Some(t), || par::chunked_sum(len, 1, |r, acc| {
            for i in r { acc[0] += data[i]; }
        }));
        prop_assert_eq!(run(1)[0].to_bits(), run(3)[0].to_bits());
    }

    #[test]
    fn power_law_slope_recovered(c in 0.01f64..100.0, slope in -3.0f64..3.0) {
        let x = [10.0, 20.0, 40.0, 80.0, 160.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| c * v.powf(slope)).collect();
        let (s, r2) = log_log_fit(&x, &y).unwrap();
        prop_assert!((s - slope).abs() < 1e-9);
        prop_assert!(r2 > 1.0 - 1e-9 || slope.abs() < 1e-6);
    }

    #[test]
    fn manifest_hash_ignores_insertion_order(vals in proptest::collection::vec(-1e6f64..1e6, 1..8), rot in 0usize..8) {
        let keys: Vec<String> = (0..vals.len()).map(|i| format!("k{i}")).collect();
        let mut a = RunManifest::new("solve");
        for (k, v) in keys.iter().zip(&vals) {
            a.set(k, *v);
        }
        let mut b = RunManifest::new("solve");
        let r = rot % vals.len();
        for i in 0..vals.len() {
            let j = (i + r) % vals.len();
            b.set(&keys[j], vals[j]);
        }
        b.threads = a.threads + 7;
        b.timings.push(("solve".into(), 1.5));
        prop_assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn alpha_exceeds_one_and_falls_with_n(bar_k in 0.0f64..50.0, extra in 1usize..200) {
        let n = bar_k.floor() as usize + extra;
        let a = alpha(n, bar_k);
        prop_assert!(a >= 1.0);
        prop_assert!(alpha(n + 1, bar_k) <= a);
    }

    #[test]
    fn hat_k_is_monotone_in_bar_k(bar_k in 0.0f64..20.0, bump in 0.0f64..5.0) {
        let lo = compute_hat_kp(2.0, 1.0, bar_k).unwrap();
        let hi = compute_hat_kp(2.0, 1.0, bar_k + bump).unwrap();
        prop_assert!(lo.n_p as f64 > bar_k);
        prop_assert!(lo.value >= 1.0);
        prop_assert!(hi.value >= lo.value * (1.0 - 1e-12));
    }

    #[test]
    fn certificate_margin_falls_as_lz0_grows(lz0 in 0.0f64..2.0, bump in 0.0f64..1.0, lz1 in 0.0f64..1.0) {
        let mk = |l| LipschitzProfile::constant(1.0, [0.0, 0.0, l, 0.0], [0.0, 0.5, lz1, 0.0]);
        let a = certify(&mk(lz0), Hypothesis::TypeOne).unwrap();
        let b = certify(&mk(lz0 + bump), Hypothesis::TypeOne).unwrap();
        prop_assert!(b.margin <= a.margin + 1e-12);
        prop_assert_eq!(a.certified, a.margin > 0.0 && a.integrability.finite);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ito_isometry_for_deterministic_integrands(c in proptest::collection::vec(-2.0f64..2.0, 8), seed in any::<u64>()) {
        let paths = 20_000;
        let ens = common::ensemble(1.0, 8, paths, seed);
        let z = PathProcess::from_fn(&ens, 1, |k, _, out| out.fill(c[k.min(7)]));
        let i = ito_integral(&z, &ens, 0, 8).unwrap();
        let second: f64 = i.iter().map(|x| x * x).sum::<f64>() / paths as f64;
        let exact: f64 = c.iter().map(|v| v * v).sum::<f64>() / 8.0;
        // chi-square fluctuation: sd of the sample second moment is exact * sqrt(2 / paths)
        prop_assert!((second - exact).abs() <= 6.0 * exact * (2.0 / paths as f64).sqrt() + 1e-12);
    }

    #[test]
    fn regression_reproduces_polynomials(a in proptest::collection::vec(-3.0f64..3.0, 4), degree in 1usize..4, seed in any::<u64>()) {
        let ens = common::ensemble(1.0, 6, 3000, seed);
        let reg = Regressor::new(&ens, BasisConfig { degree, ridge: 0.0 }).unwrap();
        let k = 4;
        let data: Vec<f64> = ens.w(k).iter().map(|w| (0..=degree).map(|j| a[j] * w.powi(j as i32)).sum()).collect();
        let fit = reg.fitted(k, &data, 1);
        let scale = 1.0 + data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (f, d) in fit.iter().zip(&data) {
            prop_assert!((f - d).abs() < 1e-7 * scale);
        }
        let again = reg.fitted(k, &fit, 1);
        for (x, y) in again.iter().zip(&fit) {
            prop_assert!((x - y).abs() < 1e-7 * scale);
        }
    }

    #[test]
    fn zero_generator_solution_is_linear_in_the_free_term(c in -5.0f64..5.0, seed in 0u64..1000) {
        let ens = common::ensemble(1.0, 6, 2000, seed);
        let g = GeneratorSpec::zero(1, 1.0);
        let psi = |scale: f64| FreeTerm::new(1, FreeTermNode::Terminal, move |_, e, out| {
            let n = e.grid().n_steps();
            for (o, w) in out.iter_mut().zip(e.w(n)) {
                *o = scale * (w.sin() + 0.5);
            }
        });
        let cfg = SolverConfig { beta: BetaPolicy::Fixed(0.0), ..SolverConfig::default() };
        let one = solve_type1(&ens, &psi(1.0), &g, &cfg).unwrap();
        let many = solve_type1(&ens, &psi(c), &g, &cfg).unwrap();
        for (a, b) in many.y.values().iter().zip(one.y.values()) {
            prop_assert!((a - c * b).abs() < 1e-9 * (1.0 + c.abs()));
        }
        let n1 = weighted_norm(&one.y, one.z.triangle(), &ens, 0.0, 2.0).unwrap();
        let nc = weighted_norm(&many.y, many.z.triangle(), &ens, 0.0, 2.0).unwrap();
        prop_assert!((nc - c.abs() * n1).abs() < 1e-8 * (1.0 + n1 * c.abs()));
    }
}

#[test]
fn zero_scenario_has_zero_solution() {
    let sc = bsvie::catalog::Scenario::zero(1.0);
    let ens = common::ensemble(1.0, 8, 500, 3);
    let sol = sc.solve(&ens, &SolverConfig::default()).unwrap();
    assert!(sol.y.values().iter().all(|v| *v == 0.0));
    assert_eq!(sol.max_residual_rms(), 0.0);
}
