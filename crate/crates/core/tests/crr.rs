use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortfall_core::crr::{
    self, check_monotone_case, enumerate_paths, optimal_candidates, path_id, price_claim, replicate, solve_crr, CrrMarket,
    MonotoneLemma, QbarShape,
};
use shortfall_core::optimizer::{solve_exact, Certificate};
use shortfall_core::verify::enumerate_check;
use shortfall_core::{ClaimSpec, LossSpec};

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

fn example() -> (CrrMarket<Q>, ClaimSpec<Q>, LossSpec<Q>) {
    (
        CrrMarket::new(q(1000, 1), q(1, 10), q(-1, 5), q(1, 4), 3).unwrap(),
        ClaimSpec::call(q(600, 1)).unwrap(),
        LossSpec::power(q(1, 2), q(5, 1)).unwrap(),
    )
}

/// Random rational market with small denominators.
fn random_market(rng: &mut ChaCha8Rng, periods: usize) -> (CrrMarket<Q>, ClaimSpec<Q>, LossSpec<Q>, Q) {
    let up = q(rng.gen_range(1..=40), 100);
    let down = q(-rng.gen_range(1..=40), 100);
    let p = q(rng.gen_range(1..=19), 20);
    let market = CrrMarket::new(q(100, 1), up, down, p, periods).unwrap();
    let strike = q(rng.gen_range(60..=130), 1);
    let alpha = q(rng.gen_range(0..=4), 1);
    let loss = LossSpec::power(q(1, 2), alpha).unwrap();
    let claim = ClaimSpec::call(strike).unwrap();
    let paths = enumerate_paths(&market, &claim, &loss).unwrap();
    let full: Q = paths.iter().map(|p| p.qbar_mass.clone()).sum();
    let x0 = full * q(rng.gen_range(0..=100), 100);
    (market, claim, loss, x0)
}

/// Best probability over all subsets of paths, walking `2^(2^N)` masks in
/// Gray-code order so each step adds or removes one path.
fn brute_force(market: &CrrMarket<Q>, claim: &ClaimSpec<Q>, loss: &LossSpec<Q>, x0: &Q) -> Q {
    let paths = enumerate_paths(market, claim, loss).unwrap();
    let mut best = Q::zero();
    let mut cost = Q::zero();
    let mut p = Q::zero();
    let mut mask = 0u64;
    for step in 1u64..1 << paths.len() {
        let bit = step.trailing_zeros() as usize;
        mask ^= 1 << bit;
        if mask >> bit & 1 == 1 {
            cost += &paths[bit].qbar_mass;
            p += &paths[bit].p_mass;
        } else {
            cost -= &paths[bit].qbar_mass;
            p -= &paths[bit].p_mass;
        }
        if p > best && cost <= *x0 {
            best = p.clone();
        }
    }
    best
}

#[test]
fn worked_example_in_exact_arithmetic() {
    let (market, claim, loss) = example();
    let sol = solve_crr(&market, &claim, &loss, &q(150, 1)).unwrap();
    // 731 * 8/27 + 368 * 3 * 4/27 + 104 * 3 * 2/27
    assert_eq!(sol.claim_price, q(10888, 27));
    assert_eq!(*sol.probability(), q(15, 16));
    assert_eq!(sol.modified_strike, Some(q(625, 1)));
    assert_eq!(sol.candidate_count, Some(3));

    let candidates = optimal_candidates(&market, &claim, &loss, &q(150, 1)).unwrap();
    assert_eq!(candidates.len(), 3);
    let value = |h: &Vec<Q>, moves: &str| h[path_id(moves).unwrap()].clone();
    let mut pairs = Vec::new();
    for (_, h) in &candidates {
        assert_eq!(value(h, "uuu"), Q::zero());
        assert_eq!(value(h, "ddd"), Q::zero());
        for m in ["ddu", "dud", "udd"] {
            assert_eq!(value(h, m), q(79, 1));
        }
        let chosen: Vec<&str> = ["uud", "udu", "duu"]
            .into_iter()
            .filter(|m| value(h, m) == q(343, 1))
            .collect();
        assert_eq!(chosen.len(), 2);
        pairs.push(chosen);
    }
    pairs.sort();
    assert_eq!(pairs, vec![vec!["udu", "duu"], vec!["uud", "duu"], vec!["uud", "udu"]]);

    // the replicating plan of the modified claim reaches the success set exactly
    let masses: Vec<Q> = sol.paths.iter().map(|p| p.p_mass.clone()).collect();
    let claims: Vec<Q> = sol.paths.iter().map(|p| p.payoff.clone()).collect();
    let wealth = sol.hedge.terminal_wealth(&market);
    let p = enumerate_check(&masses, &wealth, &claims, &loss, &Q::zero()).unwrap();
    assert_eq!(p, q(15, 16));
    assert!(sol.hedge.initial_capital <= q(150, 1));
}

#[test]
fn worked_example_in_floats() {
    let market = CrrMarket::new(1000.0, 0.1, -0.2, 0.25, 3).unwrap();
    let claim = ClaimSpec::call(600.0).unwrap();
    let loss = LossSpec::power(0.5, 5.0).unwrap();
    let sol = solve_crr(&market, &claim, &loss, &150.0).unwrap();
    assert!((sol.probability() - 15.0f64 / 16.0).abs() < 1e-12);
    assert!((sol.claim_price - 10888.0f64 / 27.0).abs() < 1e-9);
    let f32_market = CrrMarket::new(1000.0f32, 0.1, -0.2, 0.25, 3).unwrap();
    let sol = solve_crr(&f32_market, &ClaimSpec::call(600.0f32).unwrap(), &LossSpec::power(0.5f32, 5.0).unwrap(), &150.0).unwrap();
    assert!((sol.probability() - 0.9375).abs() < 1e-5);
}

#[test]
fn path_masses_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for periods in 1..=8 {
        let (market, claim, loss, _) = random_market(&mut rng, periods);
        let paths = enumerate_paths(&market, &claim, &loss).unwrap();
        let p: Q = paths.iter().map(|p| p.p_mass.clone()).sum();
        let qs: Q = paths.iter().map(|p| p.qstar_mass.clone()).sum();
        assert!(p.is_one() && qs.is_one());
    }
    let market = CrrMarket::new(1.0, 0.03, -0.02, 0.55, 16).unwrap();
    let paths = enumerate_paths(&market, &ClaimSpec::call(1.0).unwrap(), &LossSpec::quantile()).unwrap();
    let p: f64 = paths.iter().map(|p| p.p_mass).sum();
    let qs: f64 = paths.iter().map(|p| p.qstar_mass).sum();
    assert!((p - 1.0).abs() < 1e-12 && (qs - 1.0).abs() < 1e-12);
}

#[test]
fn martingale_and_constant_prices() {
    let (market, _, _) = example();
    let stock: Vec<Q> = (0..8usize).map(|id| market.terminal_price(id.count_ones() as usize)).collect();
    assert_eq!(price_claim(&market, &stock).unwrap(), q(1000, 1));
    assert_eq!(price_claim(&market, &vec![Q::zero(); 8]).unwrap(), Q::zero());
}

#[test]
fn layer_greedy_matches_brute_force_on_small_lattices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for draw in 0..500 {
        let periods = 1 + draw % 3;
        let (market, claim, loss, x0) = random_market(&mut rng, periods);
        let sol = solve_crr(&market, &claim, &loss, &x0).unwrap();
        let best = brute_force(&market, &claim, &loss, &x0);
        assert_eq!(*sol.probability(), best, "draw {draw}");
        assert!(*sol.budget_used() <= x0);
        if sol.monotone.lemma.is_some() {
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} monotone draws");
}

#[test]
fn four_period_lattices_match_direct_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for draw in 0..40 {
        let (market, claim, loss, x0) = random_market(&mut rng, 4);
        let sol = solve_crr(&market, &claim, &loss, &x0).unwrap();
        assert_eq!(*sol.probability(), brute_force(&market, &claim, &loss, &x0), "draw {draw}");
    }
}

#[test]
fn replication_is_exact_in_rationals() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for periods in 1..=6 {
        let (market, _, _, _) = random_market(&mut rng, periods);
        let payoffs: Vec<Q> = (0..market.path_count()).map(|_| q(rng.gen_range(0..50), rng.gen_range(1..5))).collect();
        let plan = replicate(&market, &payoffs).unwrap();
        assert_eq!(plan.terminal_wealth(&market), payoffs);
        assert!(plan.self_financing_gap().is_zero());
        assert_eq!(plan.initial_capital, price_claim(&market, &payoffs).unwrap());
    }
}

#[test]
fn replication_in_floats_is_tight() {
    let market = CrrMarket::new(100.0, 0.05, -0.04, 0.5, 10).unwrap();
    let claim = ClaimSpec::call(100.0).unwrap();
    let loss = LossSpec::quantile();
    let price = price_claim(&market, &enumerate_paths(&market, &claim, &loss).unwrap().iter().map(|p| p.payoff).collect::<Vec<_>>()).unwrap();
    let sol = solve_crr(&market, &claim, &loss, &(0.4 * price)).unwrap();
    let wealth = sol.hedge.terminal_wealth(&market);
    let worst = wealth
        .iter()
        .zip(&sol.modified_claim)
        .map(|(w, h): (&f64, &f64)| (w - h).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-9 * 100.0, "{worst}");
    assert!(sol.hedge.self_financing_gap() <= 1e-9 * 100.0);
}

#[test]
fn b_ratios_decrease() {
    // b_{k+1} / b_k <= 1 whenever both are finite
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let up: f64 = rng.gen_range(0.01..0.5);
        let down: f64 = -rng.gen_range(0.01..0.5);
        let n = rng.gen_range(2..12);
        let strike: f64 = rng.gen_range(0.0..150.0);
        let price = |k: i32| 100.0 * (1.0 + up).powi(k) * (1.0 + down).powi(n - k);
        let b = |k: i32| {
            let den = (price(k) - strike).max(0.0);
            (den > 0.0).then(|| (price(k + 1) - strike).max(0.0) / den)
        };
        for k in 0..n - 1 {
            if let (Some(b0), Some(b1)) = (b(k), b(k + 1)) {
                assert!(b1 <= b0 * (1.0 + 1e-12), "{b1} > {b0}");
            }
        }
    }
}

#[test]
fn monotone_case_examples() {
    let (market, claim, loss) = example();
    assert_eq!(check_monotone_case(&market, &claim, &loss).shape, QbarShape::IncreasingQbar);
    // p* >= 1/2 forces increasing Q_bar
    let market = CrrMarket::new(q(100, 1), q(1, 10), q(-3, 10), q(3, 5), 5).unwrap();
    assert!(market.risk_neutral_p() >= q(1, 2));
    let case = check_monotone_case(&market, &ClaimSpec::call(q(90, 1)).unwrap(), &LossSpec::quantile());
    assert_eq!(case.shape, QbarShape::IncreasingQbar);
    assert_eq!(case.lemma, None);
    // small p*, deep in the money: Q_bar decreasing, p >= 1/2 gives the other layer order
    let market = CrrMarket::new(q(100, 1), q(1, 2), q(-1, 20), q(3, 4), 4).unwrap();
    let case = check_monotone_case(&market, &ClaimSpec::call(q(10, 1)).unwrap(), &LossSpec::quantile());
    assert_eq!(case.shape, QbarShape::DecreasingQbar);
    assert_eq!(case.lemma, Some(MonotoneLemma::HighLayersFirst));
}

#[test]
fn layer_shape_under_increasing_qbar() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut seen = 0;
    for _ in 0..300 {
        let (market, claim, loss, x0) = random_market(&mut rng, 5);
        let sol = solve_crr(&market, &claim, &loss, &x0).unwrap();
        if sol.monotone.lemma != Some(MonotoneLemma::LowLayersFirst) || sol.success.certificate != Certificate::MonotoneGreedy {
            continue;
        }
        seen += 1;
        let paths = &sol.paths;
        let layer_full = |k: usize| paths.iter().filter(|p| p.ups == k).all(|p| sol.success.contains(p.id));
        let layer_any = |k: usize| paths.iter().filter(|p| p.ups == k).any(|p| sol.success.contains(p.id));
        // costly layers: a prefix of full layers, at most one partial layer, then nothing
        let costly: Vec<usize> = (0..=5).filter(|&k| paths.iter().any(|p| p.ups == k && !p.qbar_mass.is_zero())).collect();
        let mut state = 0;
        for k in costly {
            match (layer_full(k), layer_any(k)) {
                (true, _) => assert_eq!(state, 0),
                (false, true) => {
                    assert_eq!(state, 0);
                    state = 1;
                }
                (false, false) => state = 2,
            }
        }
    }
    assert!(seen > 20);
}

#[test]
fn larger_lattices_solve_quickly() {
    let market = CrrMarket::new(100.0, 0.02, -0.02, 0.45, 16).unwrap();
    let claim = ClaimSpec::call(100.0).unwrap();
    let loss = LossSpec::quantile();
    let paths = enumerate_paths(&market, &claim, &loss).unwrap();
    let full: f64 = paths.iter().map(|p| p.qbar_mass).sum();
    let sol = solve_crr(&market, &claim, &loss, &(0.5 * full)).unwrap();
    assert_eq!(sol.verified, Some(true));
    let table = crr::build_atoms(&market, &claim, &loss).unwrap();
    let exact = solve_exact(&table, &[0.5 * full]).unwrap();
    assert!((exact.probability - sol.probability()).abs() < 1e-12);
    assert!(sol.probability().to_f64().unwrap() > 0.5);
}

#[test]
fn probability_monotone_in_budget_and_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let (market, claim, _, _) = random_market(&mut rng, 3);
        let loss = LossSpec::power(q(1, 1), q(0, 1)).unwrap();
        let full = price_claim(&market, &enumerate_paths(&market, &claim, &loss).unwrap().iter().map(|p| p.payoff.clone()).collect::<Vec<_>>()).unwrap();
        let mut last = Q::zero();
        for step in 0..10 {
            let x0 = full.clone() * q(step, 9);
            let p = solve_crr(&market, &claim, &loss, &x0).unwrap().probability().clone();
            assert!(p >= last);
            last = p;
        }
        let x0 = full * q(1, 3);
        let mut last = Q::zero();
        for step in 0..10 {
            let loss = LossSpec::power(q(1, 1), q(step * 3, 1)).unwrap();
            let p = solve_crr(&market, &claim, &loss, &x0).unwrap().probability().clone();
            assert!(p >= last);
            last = p;
        }
    }
}
