use proptest::prelude::*;

use tagcast::sim::{
    coupled_simulate, embedded_chain_stats, monte_carlo, simulate, InitialState, StopRule,
};
use tagcast::{limit_summary, solve_beta_star, DegreeModel, ModelParams, WarningPolicy};

fn config(alpha: f64, eta: f64) -> ModelParams {
    ModelParams::new(0.1, alpha, 0.5 * alpha, eta, DegreeModel::constant(30)).unwrap()
}

#[test]
fn identical_seed_gives_identical_trace() {
    let params = config(0.9, 0.3);
    let policy = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
    let init = InitialState::new(3, 2).unwrap();
    let run = |seed| simulate(&params, &policy, init, StopRule::MaxEvents(20_000), seed).unwrap();
    let (a, b) = (run(11), run(11));
    assert_eq!(a, b);
    assert_ne!(a.events, run(12).events);
}

#[test]
fn sample_mean_concentrates() {
    let eta = 0.3;
    let params = config(0.9, eta);
    let policy = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
    let sigma = (30.0 * eta * (1.0 - eta)).sqrt();
    let m = 30.0 * eta;
    let init = InitialState::new(1, 0).unwrap();
    let mut checked = 0;
    for seed in 0..10 {
        let trace = simulate(&params, &policy, init, StopRule::MaxEvents(100_000), seed).unwrap();
        if !trace.survived() {
            continue;
        }
        let stats = embedded_chain_stats(&trace).unwrap();
        for n in [1_000usize, 10_000, 100_000] {
            let s_bar = stats.sample_mean[n - 1];
            assert!(
                (s_bar - (m - 1.0)).abs() <= 5.0 * sigma / (n as f64).sqrt(),
                "seed {seed}, n = {n}: S_bar = {s_bar}"
            );
        }
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} surviving paths");
}

/// Every surviving path of Configs 1 and 2 ends within 0.01 of `beta*`
/// after 1e5 events when seeded with 100 real-tagged copies.
#[test]
fn surviving_paths_near_fixed_point() {
    let policy = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
    let init = InitialState::new(0, 100).unwrap();
    for (alpha, eta) in [(0.9, 0.3), (0.5, 0.15)] {
        let params = config(alpha, eta);
        let beta_star = solve_beta_star(&params, &policy).unwrap();
        let summary =
            monte_carlo(&params, &policy, 20, init, StopRule::MaxEvents(100_000), 1).unwrap();
        for path in summary.paths.iter().filter(|p| p.survived) {
            let beta = path.beta.unwrap();
            assert!(
                (beta - beta_star).abs() <= 0.01,
                "alpha {alpha}, stream {}: beta {beta} vs {beta_star}",
                path.stream
            );
        }
    }
}

#[test]
fn terminal_psi_matches_limits() {
    let policy = WarningPolicy::new(1.0, 1.0, 0.05).unwrap();
    let init = InitialState::new(1, 0).unwrap();
    let base = config(0.9, 0.3);
    let reluctant = base.clone().with_reluctance(0.3).unwrap();
    for params in [base, reluctant] {
        let psi_star = limit_summary(&params, &policy).unwrap().psi_star;
        let summary =
            monte_carlo(&params, &policy, 20, init, StopRule::MaxEvents(100_000), 5).unwrap();
        let psi = summary.psi.unwrap();
        assert!(
            (psi.mean - psi_star).abs() <= 0.2,
            "eta_c {}: psi {} vs {psi_star}",
            params.eta_c(),
            psi.mean
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recursion_holds_for_random_setups(
        alpha in 0.2f64..0.9,
        ratio in 0.1f64..0.9,
        eta in 0.05f64..0.5,
        eta_c in 0.2f64..=1.0,
        w in 0.0f64..0.9,
        b in 0.05f64..2.0,
        x0 in 0u64..5,
        y0 in 1u64..5,
        seed in any::<u64>(),
    ) {
        let params = ModelParams::new(0.1, alpha, ratio * alpha, eta, DegreeModel::constant(30))
            .unwrap()
            .with_reluctance(eta_c)
            .unwrap();
        let policy = WarningPolicy::new(w, b, 0.05).unwrap();
        let init = InitialState::new(x0, y0).unwrap();
        let trace = simulate(&params, &policy, init, StopRule::MaxEvents(5_000), seed).unwrap();
        let stats = embedded_chain_stats(&trace).unwrap();
        prop_assert!(stats.max_recursion_error <= 1e-9 * stats.psi.iter().fold(1.0, |a, &b| f64::max(a, b)));
    }

    #[test]
    fn coupled_paths_stay_ordered(
        alpha in 0.2f64..0.9,
        ratio in 0.1f64..0.95,
        w2 in 0.0f64..0.9,
        dw in 0.0f64..0.1,
        b1 in 0.05f64..2.0,
        db in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let params = ModelParams::new(0.1, alpha, ratio * alpha, 0.3, DegreeModel::constant(30)).unwrap();
        let p1 = WarningPolicy::new(w2 + dw, b1, 0.05).unwrap();
        let p2 = WarningPolicy::new(w2, b1 + db, 0.05).unwrap();
        let init = InitialState::new(1, 1).unwrap();
        let pair = coupled_simulate(&params, &p1, &p2, init, StopRule::MaxEvents(10_000), seed).unwrap();
        prop_assert_eq!(pair.first.events.len(), pair.second.events.len());
        for (a, b) in pair.first.events.iter().zip(&pair.second.events) {
            prop_assert!(a.x >= b.x && a.y <= b.y && a.x + a.y == b.x + b.y);
        }
    }
}
