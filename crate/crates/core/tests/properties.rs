use mechlab::atwill::{solve_d1, solve_d2};
use mechlab::buyer_side::solve_buyer;
use mechlab::numerics::{find_root, integrate, integrate_piecewise, maximize_1d, ROOT_TOL};
use mechlab::{Distribution, Market, MechanismKind};
use proptest::prelude::*;

fn families() -> Vec<(&'static str, Distribution)> {
    vec![
        ("uniform", Distribution::uniform()),
        ("power2", Distribution::power(2.0).unwrap()),
        ("power3", Distribution::power(3.0).unwrap()),
        (
            "tabulated",
            Distribution::tabulate(|x| (x + x * x * x) / 2.0, 201).unwrap(),
        ),
    ]
}

fn markets() -> Vec<(&'static str, Market)> {
    families()
        .into_iter()
        .map(|(name, f)| (name, Market::new(f, Distribution::uniform())))
        .collect()
}

#[test]
fn left_integral_matches_quadrature_and_mean() {
    for (name, d) in families() {
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let q =
                integrate_piecewise(|w| d.cdf(w).unwrap(), 0.0, x, &d.breakpoints(), 1e-12).value;
            let g = d.left_integral(x).unwrap();
            assert!((g - q).abs() < 1e-9, "{name} at {x}: {g} vs {q}");
        }
        assert!((d.left_integral(1.0).unwrap() + d.mean() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn cdf_pdf_consistency_for_smooth_families() {
    let h = 1e-6;
    for (name, d) in families().into_iter().take(3) {
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let fd = (d.cdf(x + h).unwrap() - d.cdf(x - h).unwrap()) / (2.0 * h);
            assert!((fd - d.pdf(x).unwrap()).abs() < 1e-6, "{name} at {x}");
        }
    }
}

#[test]
fn fixed_price_orderings() {
    for (name, m) in markets() {
        let eafp = m.solve_eafp().unwrap();
        let eao = m.solve_eao().unwrap();
        assert!(eao.profit > eafp.profit + 1e-9, "{name}");
        assert!(eao.price0.unwrap() < eafp.price0.unwrap() - 1e-9, "{name}");
    }
}

#[test]
fn dynamic_beats_ex_post() {
    for (name, m) in markets() {
        for i in 1..=9 {
            let d = i as f64 / 10.0;
            let pi_d = m.solve_dynamic(d).unwrap().solution.profit;
            let pi_epo = m.solve_epo(d).unwrap().0.profit;
            assert!(pi_d > pi_epo + 1e-9, "{name} at {d}: {pi_d} vs {pi_epo}");
        }
    }
}

#[test]
fn dynamic_converges_to_ex_post_near_one() {
    let m = Market::uniform();
    let d = 0.9999;
    let gap = m.solve_dynamic(d).unwrap().solution.profit - m.solve_epo(d).unwrap().0.profit;
    assert!((0.0..1e-3).contains(&gap));
}

#[test]
fn threshold_increases_and_exceeds_fixed_price() {
    for (name, m) in markets().into_iter().take(2) {
        let p_eafp = m.solve_eafp().unwrap().price0.unwrap();
        let mut prev = 0.0;
        for i in 1..=50 {
            let d = i as f64 / 51.0;
            let s = m.solve_dynamic(d).unwrap().solution;
            let t = s.theta_bar.unwrap();
            assert!(t > prev, "{name}: not increasing at {d}");
            assert!(t > p_eafp, "{name}: {t} <= {p_eafp} at {d}");
            assert!(s.price0.unwrap() < t, "{name}: no Coasian gap at {d}");
            prev = t;
        }
    }
}

#[test]
fn accepting_weakly_dominates_waiting() {
    for (name, m) in markets().into_iter().take(2) {
        for d in [0.5, 0.9] {
            let sol = m.solve_dynamic(d).unwrap();
            let (tb, p0) = (
                sol.solution.theta_bar.unwrap(),
                sol.solution.price0.unwrap(),
            );
            for k in 0..20 {
                let theta = tb + (1.0 - tb) * k as f64 / 19.0;
                let waiting = d * integrate(
                    |w| {
                        let p1 = sol.price_rule.price(w).unwrap();
                        (theta - p1).max(0.0) * m.cost().pdf(w).unwrap()
                    },
                    0.0,
                    tb,
                    1e-11,
                )
                .value;
                let accept = theta - p0;
                assert!(
                    accept >= waiting - 1e-8,
                    "{name} {d} {theta}: {accept} < {waiting}"
                );
                if k == 0 {
                    assert!(
                        (accept - waiting).abs() < 1e-8,
                        "{name}: marginal type not indifferent"
                    );
                }
            }
        }
    }
}

#[test]
fn d1_and_d2_against_benchmarks() {
    let m = Market::uniform();
    let eao = m.solve_eao().unwrap().profit;
    for i in 1..=50 {
        let d = i as f64 / 51.0;
        let epo = d / 12.0;
        let d1 = solve_d1(&m, d).unwrap();
        assert!(d1.profit <= eao.max(epo) + 1e-15);
        if d >= 8.0 / 9.0 {
            assert_eq!(d1.profit, epo);
        } else {
            assert!(d1.profit < eao && d1.profit != epo);
        }
    }
    for i in 1..=12 {
        let d = i as f64 / 25.0;
        let d2 = solve_d2(&m, d).unwrap().profit();
        if d >= 0.5 {
            assert_eq!(d2, d / 12.0);
        } else {
            assert!(d2 < eao, "{d}: {d2}");
        }
    }
}

#[test]
fn buyer_duality_and_mirror() {
    let m = Market::uniform();
    for d in [0.2, 0.5, 0.9] {
        let seller = [
            m.solve_eafp().unwrap().profit,
            m.solve_epo(d).unwrap().0.profit,
            m.solve_eao().unwrap().profit,
            m.solve_dynamic(d).unwrap().solution.profit,
        ];
        for (kind, pi) in MechanismKind::ALL.into_iter().zip(seller) {
            let u = solve_buyer(&m, kind, Some(d)).unwrap().utility;
            assert!((u - pi).abs() < 1e-8, "{kind} at {d}: {u} vs {pi}");
        }
        let w = solve_buyer(&m, MechanismKind::D, Some(d))
            .unwrap()
            .omega_bar
            .unwrap();
        let t = m.solve_dynamic(d).unwrap().solution.theta_bar.unwrap();
        assert!((w - (1.0 - t)).abs() < 1e-8);
    }
}

#[test]
fn maximize_is_reproducible() {
    let f = |x: f64| (7.0 * x).sin() * x;
    let a = maximize_1d(f, 0.0, 1.0);
    let b = maximize_1d(f, 0.0, 1.0);
    assert_eq!(a.argmax.to_bits(), b.argmax.to_bits());
    for i in 0..1025 {
        assert!(a.value >= f(i as f64 / 1024.0));
    }
}

/// `Φ(x)` from the public transforms with a fixed-order composite Simpson
/// rule, independent of the solver's adaptive quadrature.
fn phi_by_quadrature(m: &Market, x: f64) -> f64 {
    let lo = m.theta_star_star(x).unwrap();
    let n = 4000;
    let h = (x - lo) / n as f64;
    let simpson = |g: &dyn Fn(f64) -> f64| {
        let mut s = g(lo) + g(x);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(lo + i as f64 * h);
        }
        s * h / 3.0
    };
    let psi = |t: f64| m.value().virtual_valuation(t, x).unwrap().clamp(0.0, 1.0);
    let cont = simpson(&|t| m.cost().left_integral(psi(t)).unwrap() * m.value().pdf(t).unwrap());
    let wait = simpson(&|t| m.cost().cdf(psi(t)).unwrap());
    cont - (1.0 - m.value().cdf(x).unwrap()) * wait
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn decomposition_identity(x in 0.01f64..=1.0, d in 0.0f64..=1.0, pow2 in any::<bool>()) {
        let m = if pow2 {
            Market::new(Distribution::power(2.0).unwrap(), Distribution::uniform())
        } else {
            Market::uniform()
        };
        let lhs = m.dynamic_profit(x, d).unwrap();
        let rhs = m.eafp_profit_at(x) + d * m.phi_cap(x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8);
        let independent = phi_by_quadrature(&m, x);
        prop_assert!((m.phi_cap(x).unwrap() - independent).abs() < 1e-8);
    }

    #[test]
    fn epo_linear_in_delta(d in 0.0f64..=1.0, k in 1.0f64..4.0) {
        let m = Market::new(Distribution::power(k).unwrap(), Distribution::uniform());
        let full = m.solve_epo(1.0).unwrap().0.profit;
        prop_assert!((m.solve_epo(d).unwrap().0.profit - d * full).abs() < 1e-10);
    }

    #[test]
    fn truncated_mean_below_point(x in 1e-6f64..=1.0, k in 0.3f64..5.0) {
        let d = Distribution::power(k).unwrap();
        prop_assert!(d.truncated_mean_below(x).unwrap() < x);
        let u = Distribution::uniform();
        prop_assert!((u.truncated_mean_below(x).unwrap() - x / 2.0).abs() < 1e-15);
    }

    #[test]
    fn virtual_valuation_below_value(theta in 0.01f64..1.0, k in 1.0f64..5.0) {
        let d = Distribution::power(k).unwrap();
        prop_assert!(d.virtual_valuation(theta, 1.0).unwrap() < theta);
        prop_assert_eq!(d.virtual_valuation(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn root_brackets_or_vanishes(c in 0.05f64..0.95, p in 1.0f64..5.0) {
        let f = |x: f64| x.powf(p) - c;
        let r = find_root(f, 0.0, 1.0, ROOT_TOL).unwrap();
        let tol = ROOT_TOL;
        prop_assert!(f(r.x).abs() <= tol || f(r.x - tol) * f(r.x + tol) <= 0.0);
    }

    #[test]
    fn simpson_exact_on_cubics(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, e in -2.0f64..2.0) {
        let q = integrate(|x| a * x * x * x + b * x * x + c * x + e, 0.0, 1.0, 1e-9);
        prop_assert!((q.value - (a / 4.0 + b / 3.0 + c / 2.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn d1_indifference(d in 0.001f64..0.88) {
        let s = solve_d1(&Market::uniform(), d).unwrap();
        prop_assert!((s.p0 * (s.theta_bar - s.p0) - d * s.theta_bar * s.theta_bar / 4.0).abs() < 1e-10);
    }
}
