//! One-period trinomial market. The martingale measures form an open
//! segment parametrized by `q1`; budget constraints only need its two
//! endpoints because expectations are affine in `q1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::optimizer::{self, Atom, AtomTable, Certificate, SuccessSet};
use crate::scalar::{fits, max_of, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrinomialMarket<T> {
    pub s: T,
    /// Returns `a > b > c` with `a > 0 > c`.
    pub a: T,
    pub b: T,
    pub c: T,
    /// Objective probabilities of the three returns.
    pub p: [T; 3],
}

impl<T: Scalar> TrinomialMarket<T> {
    pub fn new(s: T, a: T, b: T, c: T, p: [T; 3]) -> Result<Self> {
        if s <= T::zero() {
            return Err(Error::Domain(format!("initial price must be positive, got {s}")));
        }
        if !(a > b && b > c) {
            return Err(Error::Domain(format!("returns must satisfy a > b > c, got {a}, {b}, {c}")));
        }
        if !(a > T::zero() && c < T::zero()) {
            return Err(Error::Domain(format!("returns must satisfy a > 0 > c, got a = {a}, c = {c}")));
        }
        if c <= -T::one() {
            return Err(Error::Domain(format!("lowest return must exceed -1, got {c}")));
        }
        if p.iter().any(|pi| *pi <= T::zero()) {
            return Err(Error::Domain("probabilities must be positive".into()));
        }
        let total = p.iter().fold(T::zero(), |acc, pi| acc + pi.clone());
        if !crate::scalar::approx_eq(&total, &T::one()) {
            return Err(Error::Domain(format!("probabilities must sum to 1, got {total}")));
        }
        Ok(Self { s, a, b, c, p })
    }

    fn returns(&self) -> [T; 3] {
        [self.a.clone(), self.b.clone(), self.c.clone()]
    }

    pub fn terminal_prices(&self) -> [T; 3] {
        self.returns().map(|r| self.s.clone() * (T::one() + r))
    }

    /// Martingale measure with first component `q1`.
    pub fn measure_at(&self, q1: &T) -> [T; 3] {
        let (a, b, c) = (self.a.clone(), self.b.clone(), self.c.clone());
        [
            q1.clone(),
            (c.clone() - a.clone()) / (b.clone() - c.clone()) * q1.clone() + c.clone() / (c.clone() - b.clone()),
            (a - b.clone()) / (b.clone() - c.clone()) * q1.clone() + b.clone() / (b - c),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexMeasures<T> {
    pub q_low: T,
    pub q_high: T,
    pub q1: [T; 3],
    pub q2: [T; 3],
}

pub fn vertex_measures<T: Scalar>(market: &TrinomialMarket<T>) -> VertexMeasures<T> {
    let (a, b, c) = (market.a.clone(), market.b.clone(), market.c.clone());
    let q_low = max_of(T::zero(), b.clone() / (b - a.clone()));
    let q_high = c.clone() / (c - a);
    VertexMeasures {
        q1: market.measure_at(&q_low),
        q2: market.measure_at(&q_high),
        q_low,
        q_high,
    }
}

pub fn expectation<T: Scalar>(measure: &[T; 3], values: &[T; 3]) -> T {
    measure
        .iter()
        .zip(values)
        .fold(T::zero(), |acc, (q, v)| acc + q.clone() * v.clone())
}

/// `sup_Q E^Q[values]`, attained at an endpoint.
pub fn superhedging_price<T: Scalar>(market: &TrinomialMarket<T>, values: &[T; 3]) -> T {
    let v = vertex_measures(market);
    max_of(expectation(&v.q1, values), expectation(&v.q2, values))
}

fn shifted_claim<T: Scalar>(claim: &[T; 3], loss: &LossSpec<T>) -> [T; 3] {
    claim.clone().map(|h| loss.shifted(&h))
}

fn check_claim<T: Scalar>(claim: &[T; 3]) -> Result<()> {
    if claim.iter().any(|h| *h < T::zero()) {
        return Err(Error::Domain("claim payoffs must be nonnegative".into()));
    }
    Ok(())
}

/// Atoms `omega_1..omega_3` (ids 0..2) with costs under both endpoint measures.
pub fn build_atoms<T: Scalar>(market: &TrinomialMarket<T>, claim: &[T; 3], loss: &LossSpec<T>) -> Result<AtomTable<T>> {
    check_claim(claim)?;
    let v = vertex_measures(market);
    let shifted = shifted_claim(claim, loss);
    AtomTable::new(
        (0..3)
            .map(|i| {
                Atom::new(
                    i,
                    market.p[i].clone(),
                    vec![v.q1[i].clone() * shifted[i].clone(), v.q2[i].clone() * shifted[i].clone()],
                )
            })
            .collect(),
    )
}

/// Cheapest one-period superhedge of a payoff: capital `x` and stock
/// holding `delta` with `x + delta * S * r_i >= payoff_i` for all `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superhedge<T> {
    pub capital: T,
    pub stock_units: T,
    pub cash: T,
}

impl<T: Scalar> Superhedge<T> {
    pub fn terminal_wealth(&self, market: &TrinomialMarket<T>) -> [T; 3] {
        market
            .terminal_prices()
            .map(|price| self.stock_units.clone() * price + self.cash.clone())
    }
}

/// Solves the two-variable linear program by checking the vertices where
/// two payoff constraints bind.
pub fn superhedge<T: Scalar>(market: &TrinomialMarket<T>, payoffs: &[T; 3]) -> Superhedge<T> {
    let gains = market.returns().map(|r| market.s.clone() * r);
    let mut best: Option<(T, T)> = None;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let delta = (payoffs[i].clone() - payoffs[j].clone()) / (gains[i].clone() - gains[j].clone());
        let x = payoffs[i].clone() - delta.clone() * gains[i].clone();
        let covers = (0..3).all(|k| {
            let wealth = x.clone() + delta.clone() * gains[k].clone();
            fits(&payoffs[k], &wealth)
        });
        if covers && best.as_ref().is_none_or(|(bx, _)| x < *bx) {
            best = Some((x, delta));
        }
    }
    let (capital, stock_units) = best.expect("the outer pair of constraints always yields a superhedge");
    let cash = capital.clone() - stock_units.clone() * market.s.clone();
    Superhedge {
        capital,
        stock_units,
        cash,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrinomialSolution<T> {
    pub success: SuccessSet<T>,
    pub vertices: VertexMeasures<T>,
    pub shifted_claim: [T; 3],
    /// `1_A * H_bar`
    pub modified_claim: [T; 3],
    pub hedge: Superhedge<T>,
    /// `sup_Q E^Q[H]`
    pub claim_price: T,
    /// `sup_Q E^Q[H_bar]`
    pub shifted_claim_price: T,
    /// `sup_Q E^Q[1_A H_bar]`
    pub budget_used: T,
}

/// Exact search over all eight outcome subsets with one budget per
/// endpoint measure.
pub fn solve_trinomial<T: Scalar>(market: &TrinomialMarket<T>, claim: &[T; 3], loss: &LossSpec<T>, x0: &T) -> Result<TrinomialSolution<T>> {
    if *x0 < T::zero() {
        return Err(Error::Domain(format!("budget must be nonnegative, got {x0}")));
    }
    let table = build_atoms(market, claim, loss)?;
    let success = optimizer::solve_exact(&table, &[x0.clone(), x0.clone()])?;
    let shifted = shifted_claim(claim, loss);
    let modified_claim: [T; 3] = std::array::from_fn(|i| {
        if success.contains(i) {
            shifted[i].clone()
        } else {
            T::zero()
        }
    });
    Ok(TrinomialSolution {
        vertices: vertex_measures(market),
        hedge: superhedge(market, &modified_claim),
        claim_price: superhedging_price(market, claim),
        shifted_claim_price: superhedging_price(market, &shifted),
        budget_used: superhedging_price(market, &modified_claim),
        shifted_claim: shifted,
        modified_claim,
        success,
    })
}

/// Branch of the closed-form case table for `b > 0` that fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableBranch {
    /// Both endpoint budgets cover the whole claim.
    Case1,
    /// No atom with positive cost fits one of the endpoint budgets and no
    /// free singleton fits either.
    Case2,
    /// Same condition as `Case2`, but an atom that is free under the tight
    /// measure still fits the other budget, so a singleton beats the empty set.
    Case2Singleton,
    Case3a,
    Case3b,
    Case4a,
    Case4b,
    Case5a,
    Case5b,
    Case5c,
    Case5d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableOutcome<T> {
    pub success: SuccessSet<T>,
    pub branch: TableBranch,
}

/// Case analysis for `b > 0`, where the endpoints are
/// `Q1 = (0, c/(c-b), b/(b-c))` and `Q2 = (c/(c-a), 0, a/(a-c))`.
pub fn decision_table_b_positive<T: Scalar>(market: &TrinomialMarket<T>, claim: &[T; 3], loss: &LossSpec<T>, x0: &T) -> Result<TableOutcome<T>> {
    if market.b <= T::zero() {
        return Err(Error::Capability(format!("the case table needs b > 0, got b = {}", market.b)));
    }
    if *x0 < T::zero() {
        return Err(Error::Domain(format!("budget must be nonnegative, got {x0}")));
    }
    check_claim(claim)?;
    let (a, b, c) = (market.a.clone(), market.b.clone(), market.c.clone());
    let [h1, h2, h3] = shifted_claim(claim, loss);
    // Q1 costs of omega_2, omega_3 and Q2 costs of omega_1, omega_3.
    let alpha2 = c.clone() / (c.clone() - b.clone()) * h2;
    let alpha3 = b.clone() / (b - c.clone()) * h3.clone();
    let beta1 = c.clone() / (c.clone() - a.clone()) * h1;
    let beta3 = a.clone() / (a - c) * h3;
    let l1 = alpha2.clone() + alpha3.clone();
    let l2 = beta1.clone() + beta3.clone();
    let ok = |v: &T| fits(v, x0);
    let min = |x: &T, y: &T| if x <= y { x.clone() } else { y.clone() };
    let max = |x: &T, y: &T| max_of(x.clone(), y.clone());
    let [p1, p2, p3] = market.p.clone();

    use TableBranch::*;
    let (ids, branch): (Vec<usize>, TableBranch) = if ok(&l1) && ok(&l2) {
        (vec![0, 1, 2], Case1)
    } else if !ok(&min(&alpha2, &alpha3)) || !ok(&min(&beta1, &beta3)) {
        if !ok(&min(&alpha2, &alpha3)) && ok(&beta1) {
            (vec![0], Case2Singleton)
        } else if !ok(&min(&beta1, &beta3)) && ok(&alpha2) {
            (vec![1], Case2Singleton)
        } else {
            (vec![], Case2)
        }
    } else if ok(&l1) && !ok(&l2) {
        if !ok(&max(&beta1, &beta3)) {
            if beta1 >= beta3 {
                (vec![1, 2], Case3a)
            } else {
                (vec![0, 1], Case3a)
            }
        } else if p1 >= p3 {
            (vec![0, 1], Case3b)
        } else {
            (vec![1, 2], Case3b)
        }
    } else if !ok(&l1) && ok(&l2) {
        if !ok(&max(&alpha2, &alpha3)) {
            if alpha2 >= alpha3 {
                (vec![0, 2], Case4a)
            } else {
                (vec![0, 1], Case4a)
            }
        } else if p2 >= p3 {
            (vec![0, 1], Case4b)
        } else {
            (vec![0, 2], Case4b)
        }
    } else {
        let alpha_tight = !ok(&max(&alpha2, &alpha3));
        let beta_tight = !ok(&max(&beta1, &beta3));
        match (alpha_tight, beta_tight) {
            (true, true) => {
                let ids = match (alpha2 <= alpha3, beta1 <= beta3) {
                    (true, true) => vec![0, 1],
                    (true, false) => vec![1],
                    (false, true) => vec![0],
                    (false, false) => vec![2],
                };
                (ids, Case5a)
            }
            (true, false) => {
                if alpha2 <= alpha3 {
                    (vec![0, 1], Case5b)
                } else if p3 >= p1 {
                    (vec![2], Case5b)
                } else {
                    (vec![0], Case5b)
                }
            }
            (false, true) => {
                if beta1 <= beta3 {
                    (vec![0, 1], Case5c)
                } else if p2 >= p3 {
                    (vec![1], Case5c)
                } else {
                    (vec![2], Case5c)
                }
            }
            (false, false) => {
                if p1 + p2 >= p3 {
                    (vec![0, 1], Case5d)
                } else {
                    (vec![2], Case5d)
                }
            }
        }
    };
    let table = build_atoms(market, claim, loss)?;
    Ok(TableOutcome {
        success: SuccessSet::from_ids(&table, ids, Certificate::ExhaustiveOptimal),
        branch,
    })
}

/// The case table with the empty-set branch taken literally, kept to show
/// where it loses to the exact search.
pub fn literal_case_two<T: Scalar>(market: &TrinomialMarket<T>, claim: &[T; 3], loss: &LossSpec<T>, x0: &T) -> Result<TableOutcome<T>> {
    let mut outcome = decision_table_b_positive(market, claim, loss, x0)?;
    if outcome.branch == TableBranch::Case2Singleton {
        let table = build_atoms(market, claim, loss)?;
        outcome = TableOutcome {
            success: SuccessSet::from_ids(&table, Vec::new(), Certificate::ExhaustiveOptimal),
            branch: TableBranch::Case2,
        };
    }
    Ok(outcome)
}
