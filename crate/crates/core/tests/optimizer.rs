use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use shortfall_core::optimizer::{
    count_optimal_sets, neyman_pearson_threshold, solve_exact, solve_exact_all, solve_monotone_greedy, solve_naive_ratio, Atom,
    AtomTable, Certificate,
};

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

/// Probabilities `w_i / sum(w)` and integer costs.
fn table(weights: &[i64], costs: &[Vec<i64>]) -> AtomTable<Q> {
    let total: i64 = weights.iter().sum();
    AtomTable::new(
        weights
            .iter()
            .zip(costs)
            .enumerate()
            .map(|(id, (w, c))| Atom::new(id, q(*w, total), c.iter().map(|c| q(*c, 1)).collect()))
            .collect(),
    )
    .unwrap()
}

/// Best probability over every subset, by bitmask.
fn brute_force(table: &AtomTable<Q>, budgets: &[Q]) -> (Q, usize) {
    let atoms = table.atoms();
    let mut best = Q::zero();
    let mut count = 0;
    for mask in 0u32..1 << atoms.len() {
        let mut p = Q::zero();
        let mut costs = vec![Q::zero(); budgets.len()];
        for (i, atom) in atoms.iter().enumerate() {
            if mask >> i & 1 == 1 {
                p += &atom.p;
                for (acc, c) in costs.iter_mut().zip(&atom.costs) {
                    *acc += c;
                }
            }
        }
        if costs.iter().zip(budgets).all(|(c, b)| c <= b) {
            if p > best {
                best = p;
                count = 1;
            } else if p == best {
                count += 1;
            }
        }
    }
    (best, count)
}

fn instance(max_atoms: usize, constraints: usize) -> impl Strategy<Value = (Vec<i64>, Vec<Vec<i64>>, Vec<i64>)> {
    (1..=max_atoms).prop_flat_map(move |n| {
        (
            prop::collection::vec(1i64..20, n),
            prop::collection::vec(prop::collection::vec(0i64..30, constraints), n),
            prop::collection::vec(0i64..120, constraints),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_matches_brute_force((w, c, b) in instance(12, 1)) {
        let t = table(&w, &c);
        let budgets: Vec<Q> = b.iter().map(|b| q(*b, 1)).collect();
        let (best, count) = brute_force(&t, &budgets);
        let sol = solve_exact(&t, &budgets).unwrap();
        prop_assert_eq!(&sol.probability, &best);
        prop_assert!(sol.costs_used[0] <= budgets[0]);
        prop_assert_eq!(solve_exact_all(&t, &budgets).unwrap().len(), count);
        prop_assert_eq!(count_optimal_sets(&t, &budgets).unwrap(), Some(count as u64));
    }

    #[test]
    fn exact_matches_brute_force_two_constraints((w, c, b) in instance(10, 2)) {
        let t = table(&w, &c);
        let budgets: Vec<Q> = b.iter().map(|b| q(*b, 1)).collect();
        let (best, _) = brute_force(&t, &budgets);
        let sol = solve_exact(&t, &budgets).unwrap();
        prop_assert_eq!(&sol.probability, &best);
        for (used, budget) in sol.costs_used.iter().zip(&budgets) {
            prop_assert!(used <= budget);
        }
    }

    #[test]
    fn naive_never_beats_exact((w, c, b) in instance(10, 1)) {
        let t = table(&w, &c);
        let budget = q(b[0], 1);
        let naive = solve_naive_ratio(&t, &budget).unwrap();
        let exact = solve_exact(&t, &[budget.clone()]).unwrap();
        prop_assert!(naive.probability <= exact.probability);
        prop_assert!(naive.costs_used[0] <= budget);
        prop_assert_eq!(naive.certificate, Certificate::NaiveDiagnostic);
    }

    #[test]
    fn probability_nondecreasing_in_budget((w, c, b) in instance(10, 1), extra in 0i64..40) {
        let t = table(&w, &c);
        let low = solve_exact(&t, &[q(b[0], 1)]).unwrap();
        let high = solve_exact(&t, &[q(b[0] + extra, 1)]).unwrap();
        prop_assert!(low.probability <= high.probability);
    }

    #[test]
    fn float_solver_agrees_with_rational((w, c, b) in instance(10, 1)) {
        let total: i64 = w.iter().sum();
        let tf = AtomTable::from_vectors(
            w.iter().map(|w| *w as f64 / total as f64).collect(),
            c.iter().map(|c| c[0] as f64).collect(),
        ).unwrap();
        let tq = table(&w, &c);
        let pf = solve_exact(&tf, &[b[0] as f64]).unwrap().probability;
        let pq = solve_exact(&tq, &[q(b[0], 1)]).unwrap().probability;
        prop_assert!((pf - num_traits::ToPrimitive::to_f64(&pq).unwrap()).abs() < 1e-12);
    }
}

/// Tables sorted by nonincreasing probability and nondecreasing cost.
fn monotone_instance() -> impl Strategy<Value = (Vec<i64>, Vec<i64>, i64)> {
    (1usize..=10).prop_flat_map(|n| {
        (
            prop::collection::vec(1i64..20, n).prop_map(|mut w| {
                w.sort_unstable_by(|a, b| b.cmp(a));
                w
            }),
            prop::collection::vec(0i64..30, n).prop_map(|mut c| {
                c.sort_unstable();
                c
            }),
            0i64..150,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn greedy_prefix_is_optimal_on_monotone_tables((w, c, b) in monotone_instance()) {
        let costs: Vec<Vec<i64>> = c.iter().map(|c| vec![*c]).collect();
        let t = table(&w, &costs);
        let budget = q(b, 1);
        let greedy = solve_monotone_greedy(&t, &budget).unwrap();
        let (best, _) = brute_force(&t, &[budget]);
        prop_assert_eq!(greedy.probability, best);
    }
}

#[test]
fn counterexample_to_the_naive_level_set() {
    let t = AtomTable::from_vectors(vec![q(7, 15), q(4, 15), q(4, 15)], vec![q(4, 10), q(3, 10), q(3, 10)]).unwrap();
    let budget = q(6, 10);
    let naive = solve_naive_ratio(&t, &budget).unwrap();
    assert_eq!(naive.member_ids, vec![0]);
    assert_eq!(naive.probability, q(7, 15));
    let exact = solve_exact(&t, &[budget]).unwrap();
    assert_eq!(exact.member_ids, vec![1, 2]);
    assert_eq!(exact.probability, q(8, 15));
}

#[test]
fn greedy_rejects_unsorted_tables() {
    let t = AtomTable::from_vectors(vec![0.2, 0.5], vec![1.0, 1.0]).unwrap();
    assert!(solve_monotone_greedy(&t, &1.0).is_err());
    let t = AtomTable::from_vectors(vec![0.5, 0.2], vec![2.0, 1.0]).unwrap();
    assert!(solve_monotone_greedy(&t, &1.0).is_err());
}

#[test]
fn neyman_pearson_level_sets() {
    // ratios 3, 2, 2, 1 with measure 1/4 each
    let ratio = vec![q(3, 1), q(2, 1), q(2, 1), q(1, 1)];
    let measure = vec![q(1, 4); 4];
    let level = neyman_pearson_threshold(&ratio, &measure, &q(3, 4)).unwrap();
    assert_eq!(level.beta, Some(q(2, 1)));
    assert_eq!(level.members, vec![0, 1, 2]);
    assert!(level.certified);
    // gamma between levels: the ratio-2 level does not fit as a whole
    let level = neyman_pearson_threshold(&ratio, &measure, &q(1, 2)).unwrap();
    assert_eq!(level.beta, Some(q(3, 1)));
    assert_eq!(level.mass, q(1, 4));
    assert!(!level.certified);
    let level = neyman_pearson_threshold(&ratio, &measure, &q(1, 8)).unwrap();
    assert_eq!(level.beta, None);
    assert!(level.members.is_empty());
    let level = neyman_pearson_threshold(&ratio, &measure, &Q::one()).unwrap();
    assert_eq!(level.members.len(), 4);
    assert!(level.certified);
}

#[test]
fn branch_and_bound_matches_class_brute_force() {
    // 24 atoms in four classes of six identical atoms. The optimum over
    // class counts is computed independently.
    let classes = [(3i64, 7i64), (2, 4), (1, 3), (1, 1)];
    let mut weights = Vec::new();
    let mut costs = Vec::new();
    for (w, c) in classes {
        for _ in 0..6 {
            weights.push(w);
            costs.push(vec![c]);
        }
    }
    let t = table(&weights, &costs);
    let total: i64 = weights.iter().sum();
    for budget in [0i64, 5, 17, 30, 44, 60, 90] {
        let mut best = -1i64;
        let mut count = 0u64;
        let choose = |n: u64, k: u64| (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1));
        for a in 0..=6i64 {
            for b in 0..=6i64 {
                for c in 0..=6i64 {
                    for d in 0..=6i64 {
                        let cost = a * 7 + b * 4 + c * 3 + d;
                        if cost > budget {
                            continue;
                        }
                        let w = a * 3 + b * 2 + c + d;
                        let ways = choose(6, a as u64) * choose(6, b as u64) * choose(6, c as u64) * choose(6, d as u64);
                        if w > best {
                            best = w;
                            count = ways;
                        } else if w == best {
                            count += ways;
                        }
                    }
                }
            }
        }
        let sol = solve_exact(&t, &[q(budget, 1)]).unwrap();
        assert_eq!(sol.probability, q(best, total), "budget {budget}");
        assert_eq!(sol.certificate, Certificate::BranchBoundOptimal);
        assert_eq!(count_optimal_sets(&t, &[q(budget, 1)]).unwrap(), Some(count), "budget {budget}");
    }
}

#[test]
fn f32_instantiation_runs() {
    let t = AtomTable::from_vectors(vec![0.4f32, 0.3, 0.3], vec![0.4, 0.3, 0.3]).unwrap();
    let sol = solve_exact(&t, &[0.6f32]).unwrap();
    assert!((sol.probability - 0.6).abs() < 1e-6);
}
