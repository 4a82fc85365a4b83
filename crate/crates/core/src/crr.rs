//! Shortfall hedging on the Cox-Ross-Rubinstein binomial lattice.
//!
//! Outcomes are the `2^N` move sequences. Path `id` encodes the moves in its
//! bits, most significant bit first, with `1` for an up move, so numeric id
//! order is the lexicographic order of move strings with `d < u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{ClaimSpec, LossSpec};
use crate::optimizer::{self, Atom, AtomTable, Certificate, SuccessSet};
use crate::scalar::{approx_eq, fits, max_of, Scalar};

/// Path enumeration bound.
pub const MAX_PERIODS: usize = 24;
/// Above this many periods the exact cross-check is skipped.
pub const VERIFY_MAX_PERIODS: usize = 20;
/// Largest lattice for which reports carry the per-path table.
pub const PATH_TABLE_MAX_PERIODS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrrMarket<T> {
    pub s0: T,
    /// Up return `u > 0`: `S_{n+1} = S_n (1 + u)`.
    pub up: T,
    /// Down return `d` in `(-1, 0)`.
    pub down: T,
    /// Objective probability of an up move.
    pub p: T,
    pub periods: usize,
}

impl<T: Scalar> CrrMarket<T> {
    pub fn new(s0: T, up: T, down: T, p: T, periods: usize) -> Result<Self> {
        if s0 <= T::zero() {
            return Err(Error::Domain(format!("initial price must be positive, got {s0}")));
        }
        if up <= T::zero() {
            return Err(Error::Domain(format!("up return must be positive, got {up}")));
        }
        if !(down > -T::one() && down < T::zero()) {
            return Err(Error::Domain(format!("down return must lie in (-1, 0), got {down}")));
        }
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::Domain(format!("up probability must lie in (0, 1), got {p}")));
        }
        if periods == 0 {
            return Err(Error::Domain("at least one period is required".into()));
        }
        Ok(Self { s0, up, down, p, periods })
    }

    /// `p* = -d / (u - d)`
    pub fn risk_neutral_p(&self) -> T {
        -self.down.clone() / (self.up.clone() - self.down.clone())
    }

    pub fn price_after(&self, ups: usize, downs: usize) -> T {
        self.s0.clone()
            * num_traits::pow(T::one() + self.up.clone(), ups)
            * num_traits::pow(T::one() + self.down.clone(), downs)
    }

    pub fn terminal_price(&self, ups: usize) -> T {
        self.price_after(ups, self.periods - ups)
    }

    /// `P` mass of a single path with `ups` up moves.
    pub fn path_p_mass(&self, ups: usize) -> T {
        layer_mass(&self.p, ups, self.periods)
    }

    /// `Q*` mass of a single path with `ups` up moves.
    pub fn path_q_mass(&self, ups: usize) -> T {
        layer_mass(&self.risk_neutral_p(), ups, self.periods)
    }

    pub fn path_count(&self) -> usize {
        1usize << self.periods
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.periods > MAX_PERIODS {
            return Err(Error::Capability(format!(
                "{} periods exceed the path enumeration bound of {MAX_PERIODS}",
                self.periods
            )));
        }
        Ok(())
    }
}

fn layer_mass<T: Scalar>(p: &T, ups: usize, periods: usize) -> T {
    num_traits::pow(p.clone(), ups) * num_traits::pow(T::one() - p.clone(), periods - ups)
}

/// Move string of a path, `u` for up and `d` for down.
pub fn path_moves(id: usize, periods: usize) -> String {
    (0..periods)
        .map(|t| if id >> (periods - 1 - t) & 1 == 1 { 'u' } else { 'd' })
        .collect()
}

/// Inverse of [`path_moves`].
pub fn path_id(moves: &str) -> Option<usize> {
    moves.chars().try_fold(0usize, |acc, c| match c {
        'u' => Some(acc << 1 | 1),
        'd' => Some(acc << 1),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePath<T> {
    pub id: usize,
    pub ups: usize,
    pub terminal_price: T,
    pub p_mass: T,
    pub qstar_mass: T,
    /// `H`
    pub payoff: T,
    /// `(H - u^{-1}(alpha))^+`
    pub shifted: T,
    /// `shifted * qstar_mass`
    pub qbar_mass: T,
}

impl<T> LatticePath<T> {
    pub fn moves(&self, periods: usize) -> String {
        path_moves(self.id, periods)
    }
}

struct Layer<T> {
    price: T,
    p_mass: T,
    q_mass: T,
}

fn layers<T: Scalar>(market: &CrrMarket<T>) -> Vec<Layer<T>> {
    (0..=market.periods)
        .map(|k| Layer {
            price: market.terminal_price(k),
            p_mass: market.path_p_mass(k),
            q_mass: market.path_q_mass(k),
        })
        .collect()
}

pub fn enumerate_paths<T: Scalar>(market: &CrrMarket<T>, claim: &ClaimSpec<T>, loss: &LossSpec<T>) -> Result<Vec<LatticePath<T>>> {
    market.check_enumerable()?;
    claim.check_outcomes(market.path_count())?;
    let layers = layers(market);
    let threshold = loss.inverse_threshold();
    Ok((0..market.path_count())
        .map(|id| {
            let ups = id.count_ones() as usize;
            let layer = &layers[ups];
            let payoff = claim.payoff(id, &layer.price);
            let shifted = crate::scalar::positive_part(payoff.clone() - threshold.clone());
            LatticePath {
                id,
                ups,
                terminal_price: layer.price.clone(),
                p_mass: layer.p_mass.clone(),
                qstar_mass: layer.q_mass.clone(),
                qbar_mass: shifted.clone() * layer.q_mass.clone(),
                payoff,
                shifted,
            }
        })
        .collect())
}

fn atoms_of<T: Scalar>(paths: &[LatticePath<T>]) -> Result<AtomTable<T>> {
    AtomTable::new(
        paths
            .iter()
            .map(|path| Atom::new(path.id, path.p_mass.clone(), vec![path.qbar_mass.clone()]))
            .collect(),
    )
}

/// One atom per path with `P` mass and the single cost `H_bar * Q*` mass.
pub fn build_atoms<T: Scalar>(market: &CrrMarket<T>, claim: &ClaimSpec<T>, loss: &LossSpec<T>) -> Result<AtomTable<T>> {
    atoms_of(&enumerate_paths(market, claim, loss)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QbarShape {
    /// Path `Q_bar` mass nondecreasing in the number of up moves.
    IncreasingQbar,
    /// Path `Q_bar` mass decreasing in the number of up moves on its support.
    DecreasingQbar,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonotoneLemma {
    /// `p >= 1/2` with decreasing `Q_bar`: fill layers from `A_N` down.
    HighLayersFirst,
    /// `p <= 1/2` with increasing `Q_bar`: fill layers from `A_0` up.
    LowLayersFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneCase {
    pub shape: QbarShape,
    pub lemma: Option<MonotoneLemma>,
}

/// `b_k = (S_{k+1} - K_bar)^+ / (S_k - K_bar)^+` with `a / 0 = inf`.
/// `None` stands for infinity.
fn ratio_b<T: Scalar>(market: &CrrMarket<T>, strike_bar: &T, k: usize) -> Option<T> {
    let num = crate::scalar::positive_part(market.terminal_price(k + 1) - strike_bar.clone());
    let den = crate::scalar::positive_part(market.terminal_price(k) - strike_bar.clone());
    (!den.is_zero()).then(|| num / den)
}

fn at_least<T: Scalar>(b: &Option<T>, level: &T) -> bool {
    b.as_ref().is_none_or(|b| b >= level)
}

/// Classifies the monotonicity of `Q_bar` along the layers and reports which
/// layer-greedy construction applies. Only call claims are classified.
pub fn check_monotone_case<T: Scalar>(market: &CrrMarket<T>, claim: &ClaimSpec<T>, loss: &LossSpec<T>) -> MonotoneCase {
    let Some(strike) = claim.strike() else {
        return MonotoneCase {
            shape: QbarShape::Neither,
            lemma: None,
        };
    };
    let strike_bar = strike.clone() + loss.inverse_threshold();
    let q = market.risk_neutral_p();
    let level = (T::one() - q.clone()) / q;
    let n = market.periods;
    let shape = if at_least(&ratio_b(market, &strike_bar, n - 1), &level) {
        QbarShape::IncreasingQbar
    } else {
        match (0..n).find_map(|k| ratio_b(market, &strike_bar, k)) {
            Some(b) if b <= level => QbarShape::DecreasingQbar,
            _ => QbarShape::Neither,
        }
    };
    let half = T::one() / (T::one() + T::one());
    let lemma = match shape {
        QbarShape::IncreasingQbar if market.p <= half => Some(MonotoneLemma::LowLayersFirst),
        QbarShape::DecreasingQbar if market.p >= half => Some(MonotoneLemma::HighLayersFirst),
        _ => None,
    };
    MonotoneCase { shape, lemma }
}

/// Full layers in the lemma's order plus the lexicographically smallest
/// paths of the boundary layer that still fit. Zero-cost paths are always in.
pub fn solve_layer_greedy<T: Scalar>(market: &CrrMarket<T>, paths: &[LatticePath<T>], lemma: MonotoneLemma, x0: &T) -> Result<SuccessSet<T>> {
    if *x0 < T::zero() {
        return Err(Error::Domain(format!("budget must be nonnegative, got {x0}")));
    }
    let n = market.periods;
    let mut by_layer: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for path in paths {
        by_layer[path.ups].push(path.id);
    }
    let cost_of = |k: usize| by_layer[k].first().map(|&id| paths[id].qbar_mass.clone());
    let order: Vec<usize> = match lemma {
        MonotoneLemma::LowLayersFirst => (0..=n).collect(),
        MonotoneLemma::HighLayersFirst => (0..=n).rev().collect(),
    };
    let mut ids = Vec::new();
    for k in 0..=n {
        if cost_of(k).is_some_and(|c| c.is_zero()) {
            ids.extend_from_slice(&by_layer[k]);
        }
    }
    let mut remaining = x0.clone();
    for k in order {
        let Some(cost) = cost_of(k) else { continue };
        if cost.is_zero() {
            continue;
        }
        let members = &by_layer[k];
        let take = optimizer::max_count_fitting(&cost, &remaining, members.len());
        ids.extend_from_slice(&members[..take]);
        remaining = remaining - cost * T::from_usize(take).expect("count fits the scalar type");
        if take < members.len() {
            break;
        }
    }
    let table = atoms_of(paths)?;
    Ok(SuccessSet::from_ids(&table, ids, Certificate::MonotoneGreedy))
}

/// `E^{Q*}[payoff]` for per-path payoffs.
pub fn price_claim<T: Scalar>(market: &CrrMarket<T>, payoffs: &[T]) -> Result<T> {
    market.check_enumerable()?;
    if payoffs.len() != market.path_count() {
        return Err(Error::Domain(format!(
            "{} payoffs given for {} paths",
            payoffs.len(),
            market.path_count()
        )));
    }
    let masses: Vec<T> = (0..=market.periods).map(|k| market.path_q_mass(k)).collect();
    Ok(payoffs
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (id, h)| acc + h.clone() * masses[id.count_ones() as usize].clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeNode<T> {
    /// Moves so far, encoded like path ids.
    pub prefix: usize,
    pub stock_price: T,
    /// Claim value at the node before rebalancing.
    pub value: T,
    pub stock_units: T,
    pub cash: T,
}

/// Replicating strategy on the non-recombining path tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgePlan<T> {
    pub initial_capital: T,
    /// `nodes[t]` holds the `2^t` nodes after `t` moves, `t < N`.
    pub nodes: Vec<Vec<HedgeNode<T>>>,
}

impl<T: Scalar> HedgePlan<T> {
    /// Value of the final holdings on every path.
    pub fn terminal_wealth(&self, market: &CrrMarket<T>) -> Vec<T> {
        let last = &self.nodes[market.periods - 1];
        (0..market.path_count())
            .map(|id| {
                let node = &last[id >> 1];
                let ups = id.count_ones() as usize;
                node.stock_units.clone() * market.terminal_price(ups) + node.cash.clone()
            })
            .collect()
    }

    /// Largest gap between the value of the inherited holdings and the
    /// value of the new holdings at any rebalancing date.
    pub fn self_financing_gap(&self) -> T {
        let mut gap = T::zero();
        for t in 1..self.nodes.len() {
            for node in &self.nodes[t] {
                let parent = &self.nodes[t - 1][node.prefix >> 1];
                let before = parent.stock_units.clone() * node.stock_price.clone() + parent.cash.clone();
                let after = node.stock_units.clone() * node.stock_price.clone() + node.cash.clone();
                gap = max_of(gap, (before - after).abs());
            }
        }
        gap
    }
}

/// Backward induction for an arbitrary path-dependent payoff.
pub fn replicate<T: Scalar>(market: &CrrMarket<T>, payoffs: &[T]) -> Result<HedgePlan<T>> {
    market.check_enumerable()?;
    if payoffs.len() != market.path_count() {
        return Err(Error::Domain(format!(
            "{} payoffs given for {} paths",
            payoffs.len(),
            market.path_count()
        )));
    }
    let spread = market.up.clone() - market.down.clone();
    let n = market.periods;
    let mut values: Vec<T> = payoffs.to_vec();
    let mut nodes: Vec<Vec<HedgeNode<T>>> = vec![Vec::new(); n];
    for t in (0..n).rev() {
        let prices: Vec<T> = (0..=t).map(|j| market.price_after(j, t - j)).collect();
        let level: Vec<HedgeNode<T>> = (0..1usize << t)
            .map(|prefix| {
                let down = &values[prefix << 1];
                let up = &values[prefix << 1 | 1];
                let stock_price = prices[prefix.count_ones() as usize].clone();
                let stock_units = (up.clone() - down.clone()) / (stock_price.clone() * spread.clone());
                let s_up = stock_price.clone() * (T::one() + market.up.clone());
                let cash = up.clone() - stock_units.clone() * s_up;
                let value = stock_units.clone() * stock_price.clone() + cash.clone();
                HedgeNode {
                    prefix,
                    stock_price,
                    value,
                    stock_units,
                    cash,
                }
            })
            .collect();
        values = level.iter().map(|node| node.value.clone()).collect();
        nodes[t] = level;
    }
    Ok(HedgePlan {
        initial_capital: values[0].clone(),
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrrSolution<T> {
    pub success: SuccessSet<T>,
    pub monotone: MonotoneCase,
    pub paths: Vec<LatticePath<T>>,
    /// `H_tilde = 1_A * H_bar` per path.
    pub modified_claim: Vec<T>,
    pub hedge: HedgePlan<T>,
    /// `E^{Q*}[H]`
    pub claim_price: T,
    /// `E^{Q*}[H_bar]`
    pub shifted_claim_price: T,
    /// `K + u^{-1}(alpha)` for call claims.
    pub modified_strike: Option<T>,
    /// Outcome of the exact cross-check, when run.
    pub verified: Option<bool>,
    /// Number of distinct optimal sets, when countable.
    pub candidate_count: Option<u64>,
    pub notes: Vec<String>,
}

impl<T: Scalar> CrrSolution<T> {
    pub fn probability(&self) -> &T {
        &self.success.probability
    }

    pub fn budget_used(&self) -> &T {
        &self.success.costs_used[0]
    }
}

/// Solves the shortfall problem on the lattice, replicates the modified
/// claim and cross-checks the set against the exact optimizer.
pub fn solve_crr<T: Scalar>(market: &CrrMarket<T>, claim: &ClaimSpec<T>, loss: &LossSpec<T>, x0: &T) -> Result<CrrSolution<T>> {
    if *x0 < T::zero() {
        return Err(Error::Domain(format!("budget must be nonnegative, got {x0}")));
    }
    let paths = enumerate_paths(market, claim, loss)?;
    let table = atoms_of(&paths)?;
    let shifted_payoffs: Vec<T> = paths.iter().map(|p| p.shifted.clone()).collect();
    let payoffs: Vec<T> = paths.iter().map(|p| p.payoff.clone()).collect();
    let claim_price = price_claim(market, &payoffs)?;
    let shifted_claim_price = price_claim(market, &shifted_payoffs)?;
    let monotone = check_monotone_case(market, claim, loss);
    let budgets = std::slice::from_ref(x0);
    let mut notes = Vec::new();
    let verify = market.periods <= VERIFY_MAX_PERIODS;

    let (success, verified) = if fits(&shifted_claim_price, x0) {
        let ids = paths.iter().map(|p| p.id).collect();
        (SuccessSet::from_ids(&table, ids, Certificate::FullHedge), None)
    } else if let Some(lemma) = monotone.lemma {
        let greedy = solve_layer_greedy(market, &paths, lemma, x0)?;
        if verify {
            let exact = optimizer::solve_exact(&table, budgets)?;
            let agree = approx_eq(&greedy.probability, &exact.probability);
            if agree {
                (greedy, Some(true))
            } else {
                notes.push(format!(
                    "layer greedy reached {} but the exact optimum is {}; using the exact set",
                    greedy.probability, exact.probability
                ));
                (exact, Some(false))
            }
        } else {
            (greedy, None)
        }
    } else {
        notes.push("no monotone layer structure; solved by exact search".into());
        (optimizer::solve_exact(&table, budgets)?, None)
    };
    if !verify {
        notes.push(format!("exact cross-check skipped above {VERIFY_MAX_PERIODS} periods"));
    }

    let candidate_count = if verify {
        optimizer::count_optimal_sets(&table, budgets)?
    } else {
        None
    };
    let modified_claim: Vec<T> = paths
        .iter()
        .map(|p| if success.contains(p.id) { p.shifted.clone() } else { T::zero() })
        .collect();
    let hedge = replicate(market, &modified_claim)?;
    let modified_strike = claim.strike().map(|k| k.clone() + loss.inverse_threshold());
    Ok(CrrSolution {
        success,
        monotone,
        paths,
        modified_claim,
        hedge,
        claim_price,
        shifted_claim_price,
        modified_strike,
        verified,
        candidate_count,
        notes,
    })
}

/// Every optimal success set with its modified claim, for lattices small
/// enough to enumerate.
pub fn optimal_candidates<T: Scalar>(
    market: &CrrMarket<T>,
    claim: &ClaimSpec<T>,
    loss: &LossSpec<T>,
    x0: &T,
) -> Result<Vec<(SuccessSet<T>, Vec<T>)>> {
    let paths = enumerate_paths(market, claim, loss)?;
    let table = atoms_of(&paths)?;
    let sets = optimizer::solve_exact_all(&table, std::slice::from_ref(x0))?;
    Ok(sets
        .into_iter()
        .map(|set| {
            let h = paths
                .iter()
                .map(|p| if set.contains(p.id) { p.shifted.clone() } else { T::zero() })
                .collect();
            (set, h)
        })
        .collect())
}
