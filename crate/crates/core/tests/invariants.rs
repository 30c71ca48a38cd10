use ordexp::bounds::x_constants;
use ordexp::evaluator::segmented_apply;
use ordexp::harness::{fig1_grid, fit_slope, log_grid, order_study, OrderStudy};
use ordexp::matrix::{distance, spectral_norm, ComplexMatrix};
use ordexp::operator::{estimate_lambda, evaluate_term, DerivativeMode, LambdaOptions, OperatorTerm, TermSet};
use ordexp::oracle::ordered_exp;
use ordexp::schedule::{lts_schedule, q_k};
use ordexp::systems;

/// Built-ins on intervals where they are smooth to every order.
fn smooth_builtins() -> Vec<(&'static str, TermSet, f64, f64)> {
    vec![
        ("fig1a", systems::fig1a(), 0.5, 0.3),
        ("fig1b", systems::fig1b(), 0.0, 0.3),
        ("pauli-flip", systems::pauli_flip(0.5), 0.0, 0.3),
        ("random-hermitian", systems::random_hermitian(4, 3, 2).unwrap(), 0.0, 0.3),
        ("random-antihermitian", systems::random_antihermitian(4, 3, 2).unwrap(), 0.0, 0.3),
    ]
}

#[test]
fn finite_differences_match_analytic_derivatives() {
    for (name, ts, _, _) in smooth_builtins() {
        let fd = ts.clone().with_mode(DerivativeMode::FiniteDifference);
        for u in [0.15, 0.3, 0.7, 1.2] {
            if ts.singular_points().iter().any(|s| (s - u).abs() < 0.1) {
                continue;
            }
            for p in 0..=2 {
                for j in 0..ts.m() {
                    let exact = ts.term(j).evaluate(u, p).unwrap();
                    let approx = fd.term(j).evaluate(u, p).unwrap();
                    // a vanishing derivative is compared against the term's size
                    let scale = spectral_norm(&exact).max(spectral_norm(&ts.term(j).evaluate(u, 0).unwrap()));
                    assert!(distance(&exact, &approx) <= 1e-6 * scale, "{name} u={u} p={p}");
                }
            }
        }
    }
}

#[test]
fn sum_at_is_the_term_sum() {
    for (_, ts, mu, dt) in smooth_builtins() {
        for i in 0..=8 {
            let u = mu + dt * i as f64 / 8.0;
            let mut acc = ComplexMatrix::zeros(ts.dim());
            for t in ts.terms() {
                acc += &evaluate_term(t, u, 0).unwrap();
            }
            assert_eq!(ts.sum_at(u).unwrap(), acc);
        }
    }
}

#[test]
fn strang_splitting_error_falls_as_inverse_square_of_segments() {
    let a = ComplexMatrix::pauli_x();
    let b = ComplexMatrix::pauli_z().scale(0.7);
    let ts = TermSet::new(vec![
        OperatorTerm::from_profile(ordexp::ScalarProfile::constant(1.0), a.scale_complex(ordexp::matrix::I)),
        OperatorTerm::from_profile(ordexp::ScalarProfile::constant(1.0), b.scale_complex(ordexp::matrix::I)),
    ])
    .unwrap();
    let s = lts_schedule(2, 1).unwrap();
    let exact = ordered_exp(&ts, 0.0, 1.0, 1e-13).unwrap().u;
    let points: Vec<(f64, f64)> = [2usize, 4, 8, 16, 32, 64]
        .iter()
        .map(|&r| (r as f64, distance(&segmented_apply(&s, &ts, 0.0, 1.0, r).unwrap(), &exact)))
        .collect();
    let fit = fit_slope(&points).unwrap();
    assert!((fit.slope + 2.0).abs() < 0.05, "slope {}", fit.slope);
}

#[test]
fn second_order_taylor_remainder_is_cubic() {
    for (name, ts, mu, _) in smooth_builtins() {
        let h = ts.derivative_sum(mu, 0).unwrap();
        let dh = ts.derivative_sum(mu, 1).unwrap();
        let second = &(&h * &h) + &dh;
        let id = ComplexMatrix::identity(ts.dim());
        let ratio = |dt: f64| {
            let u = ordered_exp(&ts, mu, dt, 1e-14 / dt.min(1.0)).unwrap().u;
            let approx = &(&id + &h.scale(dt)) + &second.scale(dt * dt / 2.0);
            distance(&u, &approx) / dt.powi(3)
        };
        let values: Vec<f64> = [0.1, 0.03, 0.01].iter().map(|&dt| ratio(dt)).collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        assert!(values[2] <= 2.0 * values[0] + 1e-6 && max < 1e3, "{name}: {values:?}");
    }
}

#[test]
fn gamma_is_bounded_by_lambda() {
    for (name, ts, mu, dt) in smooth_builtins() {
        for k in 1..=2u32 {
            let s = lts_schedule(ts.m(), k).unwrap();
            let x = x_constants(&s, &ts, mu, dt).unwrap();
            let lambda = estimate_lambda(&ts, mu, dt, 2 * k as usize, LambdaOptions::default()).unwrap().lambda;
            let limit = 2.0 * 5f64.powi(k as i32 - 1) * q_k(k) * lambda;
            assert!(x.x.iter().all(|v| *v >= 0.0));
            assert!(x.gamma <= limit, "{name} k={k}: gamma {} > {limit}", x.gamma);
        }
    }
}

#[test]
fn order_study_csv_is_deterministic() {
    let ts = systems::fig1b();
    let study = OrderStudy::new(2, fig1_grid());
    let a = order_study(&ts, "fig1b", &study).unwrap().to_csv();
    let b = order_study(&ts, "fig1b", &study).unwrap().to_csv();
    assert_eq!(a, b);
    assert!(a.starts_with("dt,error,zeta,excluded\n"));
    assert!(a.contains("\n# slope=") && a.contains("\n# k=2\n") && a.contains("\n# system=fig1b\n"));
}

#[test]
fn lowering_the_noise_floor_barely_moves_the_slope() {
    let ts = systems::fig1b();
    let study = OrderStudy::new(2, fig1_grid());
    let base = order_study(&ts, "fig1b", &study).unwrap();
    let mut lower = study.clone();
    lower.noise_floor = Some(base.noise_floor / 10.0);
    let lowered = order_study(&ts, "fig1b", &lower).unwrap();
    assert!((lowered.fitted_slope - base.fitted_slope).abs() <= base.slope_std_error.max(lowered.slope_std_error));
}

#[test]
fn slope_rises_with_order() {
    let ts = systems::fig1b();
    let grid = log_grid(-1.5, 0.3, 12);
    let slopes: Vec<f64> = (1..=3)
        .map(|k| {
            let mut study = OrderStudy::new(k, grid.clone());
            study.oracle_tol = 1e-14 * 3.0;
            order_study(&ts, "fig1b", &study).unwrap().fitted_slope
        })
        .collect();
    assert!(slopes[0] < slopes[1] && slopes[1] < slopes[2], "{slopes:?}");
}
