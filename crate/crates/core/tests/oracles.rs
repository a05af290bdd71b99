use mechlab::atwill::{d2_profit, solve_d2, D2Solution};
use mechlab::buyer_side::solve_buyer;
use mechlab::montecarlo::{
    brute_force_price, build_buyer_rule, build_rule, draw_uniforms, simulate, OutcomeRule, Stage,
};
use mechlab::{Distribution, Market, MechanismKind};

fn power2() -> Market {
    Market::new(Distribution::power(2.0).unwrap(), Distribution::uniform())
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn power2_frozen_values() {
    let m = power2();
    let d = m.solve_dynamic(0.5).unwrap().solution;
    close(d.theta_bar.unwrap(), 0.826671710430850, 1e-6);
    close(d.price0.unwrap(), 0.749672229455553, 1e-6);
    close(d.profit, 0.111116579021706, 1e-9);
    let d = m.solve_dynamic(0.9).unwrap().solution;
    close(d.theta_bar.unwrap(), 0.935178505582046, 1e-6);
    close(d.profit, 0.126870815646232, 1e-9);

    close(m.solve_eao().unwrap().profit, 0.125, 1e-12);
    let t = m.regime_thresholds().unwrap();
    close(t.delta_star, 0.800482350155809, 1e-8);
    close(t.delta_bar, 0.910239226626837, 1e-8);
    close(t.delta_double_star, 0.875390830554764, 1e-5);
}

#[test]
fn brute_force_agrees_with_solvers() {
    let tab = Distribution::tabulate(|x| (x + x * x * x) / 2.0, 201).unwrap();
    let markets = [
        Market::uniform(),
        power2(),
        Market::new(Distribution::power(3.0).unwrap(), Distribution::uniform()),
        Market::new(tab, Distribution::uniform()),
        Market::new(
            Distribution::power(2.0).unwrap(),
            Distribution::power(3.0).unwrap(),
        ),
    ];
    for m in &markets {
        let (p, _) = brute_force_price(m, MechanismKind::Eafp, 10_000).unwrap();
        assert!((p - m.solve_eafp().unwrap().price0.unwrap()).abs() <= 1e-4);
        let (p, _) = brute_force_price(m, MechanismKind::Eao, 10_000).unwrap();
        assert!((p - m.solve_eao().unwrap().price0.unwrap()).abs() <= 1e-4);
    }
}

#[test]
fn simulated_seller_profits() {
    for m in [Market::uniform(), power2()] {
        for d in [0.5, 0.9] {
            let sols = [
                m.solve_eafp().unwrap(),
                m.solve_epo(d).unwrap().0,
                m.solve_eao().unwrap(),
                m.solve_dynamic(d).unwrap().solution,
            ];
            for s in sols {
                let rule = build_rule(&s, &m).unwrap();
                let est = simulate(&rule, &m, d, 1_000_000, 42).unwrap();
                assert!(
                    est.profit_agrees(s.profit, 3.0),
                    "{} at {d}: {est:?} vs {}",
                    s.kind,
                    s.profit
                );
            }
        }
    }
}

#[test]
fn simulated_buyer_utilities() {
    let m = Market::uniform();
    for d in [0.5, 0.9] {
        for kind in MechanismKind::ALL {
            let s = solve_buyer(&m, kind, Some(d)).unwrap();
            let rule = build_buyer_rule(&s).unwrap();
            let est = simulate(&rule, &m, d, 1_000_000, 42).unwrap();
            assert!(est.surplus_agrees(s.utility, 3.0), "{kind} at {d}: {est:?}");
        }
    }
}

#[test]
fn individual_rationality_and_at_will_consistency() {
    for m in [Market::uniform(), power2()] {
        let d = 0.9;
        let rules = [
            build_rule(&m.solve_eafp().unwrap(), &m).unwrap(),
            build_rule(&m.solve_epo(d).unwrap().0, &m).unwrap(),
            build_rule(&m.solve_eao().unwrap(), &m).unwrap(),
            build_rule(&m.solve_dynamic(d).unwrap().solution, &m).unwrap(),
        ];
        let eao_price = m.solve_eao().unwrap().price0.unwrap();
        for i in 0..20_000 {
            let (u, v) = draw_uniforms(7, i);
            let (theta, omega) = (m.value().quantile(u), m.cost().quantile(v));
            for rule in &rules {
                let out = rule.evaluate(theta, omega);
                if out.traded {
                    assert!(
                        theta - out.transfer >= -1e-12,
                        "{rule:?} at ({theta}, {omega})"
                    );
                }
            }
            let out = rules[2].evaluate(theta, omega);
            assert!(!(out.traded && omega > eao_price));
        }
    }
}

#[test]
fn simulation_is_reproducible_at_small_n() {
    let m = Market::uniform();
    let rule = build_rule(&m.solve_dynamic(0.9).unwrap().solution, &m).unwrap();
    let a = simulate(&rule, &m, 0.9, 1000, 42).unwrap();
    let b = simulate(&rule, &m, 0.9, 1000, 42).unwrap();
    assert_eq!(a, b);
    let c = simulate(&rule, &m, 0.9, 1000, 43).unwrap();
    assert_ne!(a.profit_mean, c.profit_mean);
    assert!(matches!(rule, OutcomeRule::Dynamic { .. }));
}

/// Plays the renegotiating at-will mechanism forward from its strategies:
/// types above `theta_bar` accept `p0`; the seller cancels when the cost
/// exceeds `omega_bar` and re-offers `max((1 + omega) / 2, theta_bar)` to the
/// accepting types; everyone else faces `(theta_bar + omega) / 2` at time 1.
fn play_d2(theta_bar: f64, omega_bar: f64, p0: f64, delta: f64, n: u64) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for i in 0..n {
        let (theta, omega) = draw_uniforms(2024, i);
        let payoff = if theta >= theta_bar {
            if omega <= omega_bar {
                p0 - omega
            } else {
                let offer = (0.5 * (1.0 + omega)).max(theta_bar);
                if theta >= offer {
                    delta * (offer - omega)
                } else {
                    0.0
                }
            }
        } else {
            let offer = 0.5 * (theta_bar + omega);
            if omega <= theta_bar && theta >= offer {
                delta * (offer - omega)
            } else {
                0.0
            }
        };
        sum += payoff;
        sq += payoff * payoff;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn renegotiation_profit_matches_play_out() {
    let m = Market::uniform();
    let D2Solution::Interior(c) = solve_d2(&m, 0.3).unwrap() else {
        panic!("expected an interior solution at 0.3");
    };
    let (mean, se) = play_d2(c.theta_bar, c.omega_bar, c.p0, 0.3, 1_000_000);
    assert!(
        (mean - c.profit).abs() <= 3.0 * se,
        "{mean} ± {se} vs {}",
        c.profit
    );

    // Off the constraint curve, on the low branch.
    let (t, w, d) = (0.8, 0.3, 0.4);
    let p0 = t - d * t * t / (4.0 * w);
    let (mean, se) = play_d2(t, w, p0, d, 1_000_000);
    assert!((mean - d2_profit(t, w, d)).abs() <= 3.0 * se);
}

#[test]
fn buyer_rules_trade_at_the_right_stage() {
    let s = solve_buyer(&Market::uniform(), MechanismKind::D, Some(0.9)).unwrap();
    let rule = build_buyer_rule(&s).unwrap();
    assert_eq!(rule.evaluate(0.5, 0.01).stage, Stage::T0);
    assert_eq!(rule.evaluate(0.9, 0.3).stage, Stage::T1);
    assert_eq!(rule.evaluate(0.1, 0.3).stage, Stage::None);
}
