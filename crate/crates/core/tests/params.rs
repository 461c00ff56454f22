use htsp::params::{delta_at, optimize, solve_exact, DecreaseCase, ReductionParams, SearchConfig};
use htsp::rational::{from_f64_rounded, ratio, to_f64};
use proptest::prelude::*;

/// The eleven worst-case decreases written out by hand, with the reduction
/// probabilities mixed from the per-sampler even-at-last bounds.
fn decreases(lambda: f64, tau: f64, gamma: f64, beta: f64) -> [f64; 11] {
    let mix = |me: f64, mi: f64| lambda * me + (1.0 - lambda) * mi;
    let p = mix(1.0 / 12.0, 1.0 / 18.0);
    let p_hs = mix(1.0 / 12.0, 1.0 / 21.0);
    let p_sp = mix(128.0 / 6561.0, 1.0 / 36.0);
    [
        p * beta / 4.0,
        0.75 * p * beta - 1.25 * p * gamma,
        p * beta / 2.0,
        p * beta - 2.0 * p * tau,
        p_hs * tau - p * tau / 2.0,
        p_hs * tau - p * gamma / 2.0,
        p_hs * tau - p * beta / 4.0,
        p_sp * tau,
        p * gamma - p * tau / 3.0,
        p * gamma - p * gamma / 3.0,
        p * gamma - p * beta / 3.0,
    ]
}

fn worst(lambda: f64, tau: f64, gamma: f64, beta: f64) -> f64 {
    decreases(lambda, tau, gamma, beta).into_iter().fold(f64::INFINITY, f64::min)
}

/// Best grid point with `tau <= gamma`, `2 gamma <= beta <= 1/12`.
fn grid_optimum(lambda: f64, step: f64) -> (f64, [f64; 3]) {
    let steps = (1.0 / 12.0 / step).floor() as usize;
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for b in 0..=steps {
        let beta = b as f64 * step;
        for g in 0..=b / 2 {
            let gamma = g as f64 * step;
            for t in 0..=g {
                let tau = t as f64 * step;
                let d = worst(lambda, tau, gamma, beta);
                if d > best.0 {
                    best = (d, [tau, gamma, beta]);
                }
            }
        }
    }
    best
}

#[test]
fn hand_written_cases_match_the_library_ledger() {
    let lambda = 0.3;
    let exact = from_f64_rounded(lambda, 1000);
    let params = ReductionParams::new(exact, ratio(3, 100), ratio(7, 200), ratio(1, 12)).unwrap();
    let probs = params.probabilities();
    let ours = decreases(lambda, 0.03, 0.035, 1.0 / 12.0);
    for (case, expected) in DecreaseCase::ALL.iter().zip(ours) {
        assert!((to_f64(&params.decrease(*case, &probs)) - expected).abs() < 1e-15, "{}", case.name());
    }
}

#[test]
fn optimum_reproduces_the_published_parameters() {
    let start = std::time::Instant::now();
    let optimum = optimize(SearchConfig::default());
    let elapsed = start.elapsed();
    let p = &optimum.params;
    let close = |x: f64, target: f64, tol: f64| (x - target).abs() <= tol;
    assert!(close(to_f64(&p.lambda), 0.4715, 1e-4));
    assert_eq!(p.beta, ratio(1, 12));
    assert!(close(to_f64(&p.gamma), 0.0401, 1e-4));
    assert!(close(to_f64(&p.tau), 0.0355, 1e-4));
    assert!(close(to_f64(&optimum.delta), 0.0008475, 1e-4));
    assert!(close(to_f64(&optimum.epsilon()), 0.001695, 2e-4));
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    assert_eq!(optimum.delta, p.delta());
}

#[test]
fn dense_grid_agrees_with_the_lp() {
    let star = to_f64(&optimize(SearchConfig::default()).params.lambda);
    for lambda in [0.0, 1.0, star] {
        let (grid, point) = grid_optimum(lambda, 1e-4);
        let exact = solve_exact(&from_f64_rounded(lambda, 1_000_000));
        let lp = to_f64(&exact.delta);
        // The LP dominates every feasible point and the grid gets within
        // one step of its maximiser.
        assert!(grid <= lp + 1e-12, "lambda {lambda}: grid {grid} above lp {lp}");
        assert!(lp - grid < 3e-5, "lambda {lambda}: grid {grid} far below lp {lp}");
        let found = [&exact.params.tau, &exact.params.gamma, &exact.params.beta].map(to_f64);
        assert!((worst(lambda, found[0], found[1], found[2]) - lp).abs() < 1e-12);
        // Only the mixed optimum is a unique vertex; at the pure samplers
        // gamma has slack.
        if lambda == star {
            for (a, b) in found.iter().zip(point) {
                assert!((a - b).abs() <= 1e-3, "lp {found:?} grid {point:?}");
            }
        }
    }
}

#[test]
fn pure_samplers_do_worse_than_the_mix() {
    let star = optimize(SearchConfig::default()).delta;
    assert!(delta_at(0.0) < to_f64(&star));
    assert!(delta_at(1.0) < to_f64(&star));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_value_dominates_feasible_points(
        lambda in 0.0f64..=1.0,
        beta in 0.0f64..=1.0 / 12.0,
        g in 0.0f64..=1.0,
        t in 0.0f64..=1.0,
    ) {
        let gamma = g * beta / 2.0;
        let tau = t * gamma;
        prop_assert!(worst(lambda, tau, gamma, beta) <= delta_at(lambda) + 1e-12);
    }

    #[test]
    fn exact_solution_is_feasible_and_binding(num in 0i64..=1000) {
        let lambda = ratio(num, 1000);
        let optimum = solve_exact(&lambda);
        let p = &optimum.params;
        prop_assert!(ReductionParams::new(lambda, p.tau.clone(), p.gamma.clone(), p.beta.clone()).is_ok());
        let probs = p.probabilities();
        for case in DecreaseCase::ALL {
            let d = p.decrease(case, &probs);
            prop_assert!(d >= optimum.delta);
            prop_assert_eq!(optimum.binding.contains(&case), d == optimum.delta);
        }
        prop_assert!((to_f64(&optimum.delta) - delta_at(num as f64 / 1000.0)).abs() < 1e-12);
    }
}
