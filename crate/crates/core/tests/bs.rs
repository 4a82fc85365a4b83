use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortfall_core::bs::{
    convex_tangency, decomposition_price, price_call, price_digital, solve, BsCase, BsConstants, BsMarket, Instrument,
    Interval, Leg, PriceSet,
};
use shortfall_core::normal;
use shortfall_core::verify::{mc_success_probability, quadrature_budget, quadrature_probability, McConfig};
use shortfall_core::{Error, LossSpec};

type Q = BigRational;

fn quantile() -> LossSpec<f64> {
    LossSpec::quantile()
}

fn exact(x: f64) -> Q {
    Q::from_f64(x).expect("finite")
}

/// Random market and budget for the requested case.
fn random_instance(rng: &mut ChaCha8Rng, convex: bool) -> (BsMarket, f64, f64) {
    let sigma = rng.gen_range(0.1..0.4);
    let var = sigma * sigma;
    let mu = if convex {
        var * rng.gen_range(1.1..3.0)
    } else {
        var * rng.gen_range(0.1..1.0)
    };
    let horizon = rng.gen_range(0.25..2.0);
    let market = BsMarket::new(100.0, mu, sigma, horizon).unwrap();
    let strike = rng.gen_range(70.0..130.0);
    let x0 = price_call(&market, strike) * rng.gen_range(0.05..0.95);
    (market, strike, x0)
}

#[test]
fn call_and_digital_prices_match_quadrature() {
    let market = BsMarket::new(100.0, 0.05, 0.25, 1.5).unwrap();
    for k in [0.0, 40.0, 80.0, 100.0, 125.0, 250.0] {
        let closed = price_call(&market, k);
        let quad = quadrature_budget(&market, &PriceSet::everything(), k);
        assert!((closed - quad).abs() <= 1e-9 * closed.max(1.0), "call {k}: {closed} vs {quad}");
    }
    // a digital is the limit of a call spread
    for k in [50.0, 100.0, 150.0] {
        let h = 1e-4;
        let spread = (price_call(&market, k - h) - price_call(&market, k + h)) / (2.0 * h);
        assert!((spread - price_digital(&market, k)).abs() < 1e-6);
    }
}

#[test]
fn reference_set_probability() {
    // P(S_T <= s exp(-sigma^2 T / 2)) = Phi(-mu sqrt(T) / sigma)
    let market = BsMarket::new(100.0, 0.06, 0.3, 2.0).unwrap();
    let set = PriceSet::below(100.0 * (-0.5 * 0.09 * 2.0f64).exp());
    let closed = normal::cdf(-0.06 * 2.0f64.sqrt() / 0.3);
    assert!((set.probability(&market) - closed).abs() < 1e-14);
    let mc = mc_success_probability(&market, &set, &McConfig { paths: 200_000, seed: 3, batch: 8192 }).unwrap();
    assert!(mc.z_score(closed) < 3.0, "{mc:?} vs {closed}");
}

#[test]
fn concave_solutions_bind_the_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let (market, strike, x0) = random_instance(&mut rng, false);
        let sol = solve(&market, strike, &quantile(), x0).unwrap();
        assert_eq!(sol.case, BsCase::Concave);
        assert!(sol.diagnostics.is_empty(), "{:?}", sol.diagnostics);
        assert!((sol.budget_used - x0).abs() <= 1e-8 * x0);
        assert!(sol.budget_used <= x0 * (1.0 + 1e-12));
        let quad = quadrature_budget(&market, &sol.success_set, sol.modified_strike);
        assert!((quad - x0).abs() <= 1e-6 * x0.max(1.0), "{quad} vs {x0}");
        assert!((decomposition_price(&sol.decomposition, &market) - sol.budget_used).abs() <= 1e-9 * x0.max(1.0));
        let prob = quadrature_probability(&market, &sol.success_set);
        assert!((prob - sol.success_probability).abs() < 1e-9);
        let BsConstants::Concave { c3, c4 } = sol.constants else { panic!() };
        assert!((market.price_at(c4) - c3).abs() <= 1e-12 * c3);
        assert!(c3 > sol.modified_strike);
    }
}

#[test]
fn convex_solutions_bind_the_budget_and_solve_the_root_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let (market, strike, x0) = random_instance(&mut rng, true);
        let sol = solve(&market, strike, &quantile(), x0).unwrap();
        assert_eq!(sol.case, BsCase::Convex);
        assert!((sol.budget_used - x0).abs() <= 1e-8 * x0, "{} vs {x0}", sol.budget_used);
        let (r5, r6) = sol.root_residuals.unwrap();
        assert!(r5 <= 1e-9 && r6 <= 1e-9, "{r5} {r6}");
        let BsConstants::Convex { c5, c6, c_bar, .. } = sol.constants else { panic!() };
        let (x_star, _) = convex_tangency(&market, sol.modified_strike);
        assert!(sol.modified_strike < c5 && c5 <= x_star && x_star <= c6);
        // independent residual in log form
        let theta = market.density_exponent();
        for x in [c5, c6] {
            let lhs = theta * x.ln();
            let rhs = c_bar.ln() + (x - sol.modified_strike).ln();
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
        let quad = quadrature_budget(&market, &sol.success_set, sol.modified_strike);
        assert!((quad - x0).abs() <= 1e-6 * x0.max(1.0), "{quad} vs {x0}");
        let prob = quadrature_probability(&market, &sol.success_set);
        assert!((prob - sol.success_probability).abs() < 1e-9);
    }
}

/// Checks `sum legs = 1_A (x - K_bar)^+` in rational arithmetic on a grid.
fn assert_decomposition_exact(legs: &[Leg], set: &PriceSet, strike_bar: f64, top: f64) {
    let kbar = exact(strike_bar);
    for i in 0..10_000 {
        let x = exact(top * i as f64 / 9_999.0);
        let mut total = Q::zero();
        for leg in legs {
            let w = exact(leg.weight);
            total += match leg.instrument {
                Instrument::Call { strike } => {
                    let k = exact(strike);
                    if x > k {
                        w * (x.clone() - k)
                    } else {
                        Q::zero()
                    }
                }
                Instrument::Digital { strike, cash } => {
                    if x > exact(strike) {
                        w * exact(cash)
                    } else {
                        Q::zero()
                    }
                }
            };
        }
        let inside = set
            .intervals
            .iter()
            .any(|iv| exact(iv.lo) < x && (iv.hi == f64::INFINITY || x <= exact(iv.hi)));
        let target = if inside && x > kbar { x.clone() - kbar.clone() } else { Q::zero() };
        assert_eq!(total, target, "grid point {i}");
    }
}

#[test]
fn decomposition_identity_is_exact() {
    let concave = BsMarket::new(100.0, 0.02, 0.2, 1.0).unwrap();
    let convex = BsMarket::new(100.0, 0.08, 0.2, 1.0).unwrap();
    for market in [concave, convex] {
        let x0 = 0.5 * price_call(&market, 100.0);
        let sol = solve(&market, 100.0, &quantile(), x0).unwrap();
        let top = match sol.constants {
            BsConstants::Concave { c3, .. } => 2.0 * c3,
            BsConstants::Convex { c6, .. } => 2.0 * c6,
            BsConstants::None => unreachable!(),
        };
        assert_decomposition_exact(&sol.decomposition, &sol.success_set, sol.modified_strike, top);
    }
}

#[test]
fn concave_optimum_beats_two_sided_sets() {
    // every set {S <= a} u {S > b} with the same budget has lower probability
    let market = BsMarket::new(100.0, 0.03, 0.25, 1.0).unwrap();
    let kbar = 100.0;
    let x0 = 0.4 * price_call(&market, kbar);
    let sol = solve(&market, kbar, &quantile(), x0).unwrap();
    let BsConstants::Concave { c3, .. } = sol.constants else { panic!() };
    for factor in [1.2, 1.5, 2.0, 3.0] {
        let b = c3 * factor;
        let upper = price_call(&market, b) + (b - kbar) * price_digital(&market, b);
        if upper >= x0 {
            continue;
        }
        // bisection on a with the budget of {kbar < S <= a} equal to x0 - upper
        let budget_low = |a: f64| price_call(&market, kbar) - price_call(&market, a) - (a - kbar) * price_digital(&market, a);
        let (mut lo, mut hi) = (kbar, c3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if budget_low(mid) > x0 - upper {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let alt = PriceSet {
            intervals: vec![Interval { lo: 0.0, hi: lo }, Interval { lo: b, hi: f64::INFINITY }],
        };
        assert!(alt.probability(&market) < sol.success_probability, "b = {b}");
    }
}

#[test]
fn convex_optimum_beats_one_sided_sets() {
    let market = BsMarket::new(100.0, 0.12, 0.2, 1.0).unwrap();
    let kbar = 110.0;
    for frac in [0.1, 0.3, 0.6, 0.9] {
        let x0 = frac * price_call(&market, kbar);
        let sol = solve(&market, kbar, &quantile(), x0).unwrap();
        // the concave-shaped set {S <= c} with the same budget
        let budget = |c: f64| price_call(&market, kbar) - price_call(&market, c) - (c - kbar) * price_digital(&market, c);
        let (mut lo, mut hi) = (kbar, 1e4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if budget(mid) > x0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let alt = PriceSet::below(lo).probability(&market);
        assert!(alt <= sol.success_probability + 1e-12, "{alt} > {}", sol.success_probability);
    }
}

#[test]
fn probability_nondecreasing_in_budget_and_alpha() {
    for mu in [0.02, 0.08] {
        let market = BsMarket::new(100.0, mu, 0.2, 1.0).unwrap();
        let full = price_call(&market, 100.0);
        let mut last = 0.0;
        for step in 0..=10 {
            let p = solve(&market, 100.0, &quantile(), full * step as f64 / 10.0).unwrap().success_probability;
            assert!(p >= last - 1e-12, "mu {mu} step {step}: {p} < {last}");
            last = p;
        }
        let mut last = 0.0;
        for step in 0..=10 {
            let loss = LossSpec::power(0.5, step as f64).unwrap();
            let p = solve(&market, 100.0, &loss, 0.3 * full).unwrap().success_probability;
            assert!(p >= last - 1e-12, "mu {mu} alpha {step}: {p} < {last}");
            last = p;
        }
    }
}

#[test]
fn zero_alpha_matches_plain_strike() {
    for mu in [0.02, 0.08] {
        let market = BsMarket::new(100.0, mu, 0.2, 1.0).unwrap();
        let x0 = 0.5 * price_call(&market, 100.0);
        let a = solve(&market, 100.0, &LossSpec::power(0.7, 0.0).unwrap(), x0).unwrap();
        let b = solve(&market, 100.0, &quantile(), x0).unwrap();
        assert!((a.success_probability - b.success_probability).abs() <= 1e-10);
        assert!((a.budget_used - b.budget_used).abs() <= 1e-10 * x0);
    }
}

#[test]
fn edge_cases() {
    let market = BsMarket::new(100.0, 0.05, 0.2, 1.0).unwrap();
    let full = price_call(&market, 100.0);
    let sol = solve(&market, 100.0, &quantile(), full * 2.0).unwrap();
    assert_eq!(sol.case, BsCase::FullHedge);
    assert_eq!(sol.success_probability, 1.0);
    let sol = solve(&market, 100.0, &quantile(), 0.0).unwrap();
    assert_eq!(sol.case, BsCase::Degenerate);
    assert!((sol.success_probability - PriceSet::below(100.0).probability(&market)).abs() < 1e-15);
    let down = BsMarket::new(100.0, -0.01, 0.2, 1.0).unwrap();
    assert!(matches!(solve(&down, 100.0, &quantile(), 1.0), Err(Error::Capability(_))));
    assert!(matches!(solve(&market, 100.0, &quantile(), -1.0), Err(Error::Domain(_))));
    assert!(BsMarket::new(100.0, 0.05, 0.0, 1.0).is_err());
    assert!(BsMarket::new(-1.0, 0.05, 0.2, 1.0).is_err());
}
