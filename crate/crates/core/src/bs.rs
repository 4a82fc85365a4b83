//! Closed-form shortfall hedging of a call in the Black-Scholes model with
//! zero interest rate.
//!
//! The density `dQ/dP` is a constant times `S_T^{-mu/sigma^2}`, so the
//! optimal success set compares `S_T^{mu/sigma^2}` with a multiple of the
//! shifted payoff `(S_T - K_bar)^+`. When `x -> x^{mu/sigma^2}` is concave
//! the set is a lower interval `{S_T <= c3}`; when it is convex the set is
//! `{S_T < c5} u {S_T > c6}`. The constants are pinned down by requiring the
//! modified claim to cost exactly the available capital.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::normal;

/// Bracket tolerance on the scalar unknown (`c4` or `ln c_bar`).
const BRACKET_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
/// Required agreement between the modified claim's price and the budget.
pub const BUDGET_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsMarket {
    pub s: f64,
    pub mu: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl BsMarket {
    pub fn new(s: f64, mu: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("initial price must be positive, got {s}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("volatility must be positive, got {sigma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if !mu.is_finite() {
            return Err(Error::Domain(format!("drift must be finite, got {mu}")));
        }
        Ok(Self { s, mu, sigma, horizon })
    }

    fn sqrt_t(&self) -> f64 {
        self.horizon.sqrt()
    }

    /// `mu / sigma^2`: exponent of `S_T` in the density `dP/dQ`.
    pub fn density_exponent(&self) -> f64 {
        self.mu / (self.sigma * self.sigma)
    }

    /// `S_T` as a function of the Q-Brownian motion `W*_T`.
    pub fn price_at(&self, w_star: f64) -> f64 {
        self.s * (self.sigma * w_star - 0.5 * self.sigma * self.sigma * self.horizon).exp()
    }

    /// Inverse of [`price_at`](Self::price_at).
    pub fn w_star_at(&self, price: f64) -> f64 {
        ((price / self.s).ln() + 0.5 * self.sigma * self.sigma * self.horizon) / self.sigma
    }

    /// `P(S_T <= price)` under the objective measure.
    pub fn prob_below(&self, price: f64) -> f64 {
        if price <= 0.0 {
            return 0.0;
        }
        if price == f64::INFINITY {
            return 1.0;
        }
        let w = self.w_star_at(price);
        normal::cdf((w - self.mu / self.sigma * self.horizon) / self.sqrt_t())
    }
}

/// `E^Q[(S_T - strike)^+]` at zero rate.
pub fn price_call(market: &BsMarket, strike: f64) -> f64 {
    if strike <= 0.0 {
        return market.s;
    }
    if strike == f64::INFINITY {
        return 0.0;
    }
    let vol = market.sigma * market.sqrt_t();
    let d_plus = -(strike / market.s).ln() / vol + 0.5 * vol;
    let d_minus = d_plus - vol;
    market.s * normal::cdf(d_plus) - strike * normal::cdf(d_minus)
}

/// `Q(S_T > strike)`: price of a digital paying one unit.
pub fn price_digital(market: &BsMarket, strike: f64) -> f64 {
    if strike <= 0.0 {
        return 1.0;
    }
    if strike == f64::INFINITY {
        return 0.0;
    }
    normal::cdf(-market.w_star_at(strike) / market.sqrt_t())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BsCase {
    /// `0 < mu <= sigma^2`: success set `{S_T <= c3}`.
    Concave,
    /// `mu > sigma^2`: success set `{S_T < c5} u {S_T > c6}`.
    Convex,
    /// Capital covers the whole shifted claim.
    FullHedge,
    /// Zero capital: success exactly where the shifted claim vanishes.
    Degenerate,
}

pub fn classify(market: &BsMarket, strike_bar: f64, x0: f64) -> Result<BsCase> {
    if market.mu <= 0.0 {
        return Err(Error::Capability(format!(
            "drift must be positive for the closed-form solution, got {}",
            market.mu
        )));
    }
    if !(x0 >= 0.0) {
        return Err(Error::Domain(format!("budget must be nonnegative, got {x0}")));
    }
    if x0 >= price_call(market, strike_bar) {
        return Ok(BsCase::FullHedge);
    }
    if x0 == 0.0 {
        return Ok(BsCase::Degenerate);
    }
    Ok(if market.mu <= market.sigma * market.sigma {
        BsCase::Concave
    } else {
        BsCase::Convex
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instrument {
    Call { strike: f64 },
    /// Pays `cash` when `S_T > strike`.
    Digital { strike: f64, cash: f64 },
}

impl Instrument {
    pub fn payoff(&self, terminal: f64) -> f64 {
        match *self {
            Instrument::Call { strike } => (terminal - strike).max(0.0),
            Instrument::Digital { strike, cash } => {
                if terminal > strike {
                    cash
                } else {
                    0.0
                }
            }
        }
    }

    pub fn price(&self, market: &BsMarket) -> f64 {
        match *self {
            Instrument::Call { strike } => price_call(market, strike),
            Instrument::Digital { strike, cash } => cash * price_digital(market, strike),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub instrument: Instrument,
    pub weight: f64,
}

impl Leg {
    fn new(instrument: Instrument, weight: f64) -> Self {
        Self { instrument, weight }
    }
}

pub fn decomposition_payoff(legs: &[Leg], terminal: f64) -> f64 {
    legs.iter().map(|l| l.weight * l.instrument.payoff(terminal)).sum()
}

pub fn decomposition_price(legs: &[Leg], market: &BsMarket) -> f64 {
    legs.iter().map(|l| l.weight * l.instrument.price(market)).sum()
}

/// Price interval `(lo, hi]`; `hi` may be infinite. Boundaries carry no
/// mass under the lognormal law, so lower pieces are reported closed and
/// upper pieces open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceSet {
    pub intervals: Vec<Interval>,
}

impl PriceSet {
    pub fn everything() -> Self {
        Self::below(f64::INFINITY)
    }

    pub fn below(hi: f64) -> Self {
        Self {
            intervals: vec![Interval { lo: 0.0, hi }],
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// `P(S_T in set)` in closed form.
    pub fn probability(&self, market: &BsMarket) -> f64 {
        self.intervals
            .iter()
            .map(|i| market.prob_below(i.hi) - market.prob_below(i.lo))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BsConstants {
    None,
    Concave { c3: f64, c4: f64 },
    Convex { c5: f64, c6: f64, c7: f64, c8: f64, c_bar: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsSolution {
    pub case: BsCase,
    pub constants: BsConstants,
    /// `K_bar = K + u^{-1}(alpha)`
    pub modified_strike: f64,
    pub success_probability: f64,
    pub budget_used: f64,
    pub success_set: PriceSet,
    pub decomposition: Vec<Leg>,
    /// Relative residuals of `c5, c6` in `x^{mu/sigma^2} = c_bar (x - K_bar)`.
    pub root_residuals: Option<(f64, f64)>,
    pub diagnostics: Vec<String>,
}

fn check_budget(x0: f64) -> Result<()> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("budget must be a nonnegative number, got {x0}")));
    }
    Ok(())
}

/// Solves for the optimal success set, dispatching on the case.
pub fn solve(market: &BsMarket, strike: f64, loss: &LossSpec<f64>, x0: f64) -> Result<BsSolution> {
    if !(strike >= 0.0) {
        return Err(Error::Domain(format!("strike must be nonnegative, got {strike}")));
    }
    check_budget(x0)?;
    let strike_bar = strike + loss.inverse_threshold();
    match classify(market, strike_bar, x0)? {
        BsCase::FullHedge => Ok(full_hedge(market, strike_bar)),
        BsCase::Degenerate => Ok(degenerate(market, strike_bar)),
        BsCase::Concave => solve_concave(market, strike, loss, x0),
        BsCase::Convex => solve_convex(market, strike, loss, x0),
    }
}

fn full_hedge(market: &BsMarket, strike_bar: f64) -> BsSolution {
    BsSolution {
        case: BsCase::FullHedge,
        constants: BsConstants::None,
        modified_strike: strike_bar,
        success_probability: 1.0,
        budget_used: price_call(market, strike_bar),
        success_set: PriceSet::everything(),
        decomposition: vec![Leg::new(Instrument::Call { strike: strike_bar }, 1.0)],
        root_residuals: None,
        diagnostics: Vec::new(),
    }
}

fn degenerate(market: &BsMarket, strike_bar: f64) -> BsSolution {
    let success_set = PriceSet::below(strike_bar);
    BsSolution {
        case: BsCase::Degenerate,
        constants: BsConstants::None,
        modified_strike: strike_bar,
        success_probability: success_set.probability(market),
        budget_used: 0.0,
        success_set,
        decomposition: Vec::new(),
        root_residuals: None,
        diagnostics: Vec::new(),
    }
}

fn check_interior(market: &BsMarket, strike_bar: f64, x0: f64) -> Result<()> {
    let full = price_call(market, strike_bar);
    if !(x0 > 0.0 && x0 < full) {
        return Err(Error::Domain(format!(
            "budget {x0} must lie strictly between 0 and the shifted claim price {full}"
        )));
    }
    Ok(())
}

/// Moves a breakpoint `c` by a few ulps, in the direction that shrinks the
/// success set, until `c - K_bar` is exact in floating point. Digital cash
/// amounts then match their strikes exactly.
fn exact_gap(strike_bar: f64, c: f64, upward: bool) -> f64 {
    let mut c = c;
    for _ in 0..64 {
        // two-sum error of c + (-K_bar)
        let d = c - strike_bar;
        let b = d - c;
        let err = (c - (d - b)) + (-strike_bar - b);
        if err == 0.0 {
            return c;
        }
        c = if upward { c.next_up() } else { c.next_down() };
    }
    c
}

/// `E^Q[1_{S_T <= c3} (S_T - K_bar)^+]` with `c3 = price_at(c4)`.
pub fn concave_budget(market: &BsMarket, strike_bar: f64, c4: f64) -> f64 {
    let c3 = market.price_at(c4);
    if c3 <= strike_bar {
        return 0.0;
    }
    let sqrt_t = market.sqrt_t();
    price_call(market, strike_bar) - market.s * normal::cdf((-c4 + market.sigma * market.horizon) / sqrt_t)
        + strike_bar * normal::cdf(-c4 / sqrt_t)
}

/// Bisection for an increasing function crossing `target` inside `[lo, hi]`.
/// Returns the final bracket.
fn bisect_increasing(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= BRACKET_TOL * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Concave case: the success set is `{S_T <= c3} = {W*_T <= c4}`.
pub fn solve_concave(market: &BsMarket, strike: f64, loss: &LossSpec<f64>, x0: f64) -> Result<BsSolution> {
    let strike_bar = strike + loss.inverse_threshold();
    if classify(market, strike_bar, x0)? != BsCase::Concave {
        return Err(Error::Precondition(format!(
            "concave solve needs 0 < mu <= sigma^2 and an interior budget (mu = {}, sigma^2 = {}, x0 = {x0})",
            market.mu,
            market.sigma * market.sigma
        )));
    }
    check_interior(market, strike_bar, x0)?;
    let sqrt_t = market.sqrt_t();
    let budget = |c4: f64| concave_budget(market, strike_bar, c4);

    let mut lo = if strike_bar > 0.0 {
        market.w_star_at(strike_bar)
    } else {
        -sqrt_t
    };
    let mut step = sqrt_t;
    while budget(lo) > x0 {
        lo -= step;
        step *= 2.0;
        if !lo.is_finite() {
            return Err(Error::Numeric("could not bracket c4 from below".into()));
        }
    }
    let mut hi = lo + sqrt_t;
    let mut step = sqrt_t;
    let mut guard = 0;
    while budget(hi) < x0 {
        hi += step;
        step *= 2.0;
        guard += 1;
        if guard > MAX_ITERATIONS || !hi.is_finite() {
            return Err(Error::Numeric(format!(
                "could not bracket c4 from above: budget {x0} is within rounding of the full hedge price {}",
                price_call(market, strike_bar)
            )));
        }
    }
    let (c4, _) = bisect_increasing(lo, hi, x0, budget);
    let c3 = exact_gap(strike_bar, market.price_at(c4), false);
    let budget_used = budget(c4);
    let mut diagnostics = Vec::new();
    if (budget_used - x0).abs() > BUDGET_REL_TOL * x0 {
        diagnostics.push(format!("budget binding missed: used {budget_used}, target {x0}"));
    }
    let success_probability = normal::cdf((c4 - market.mu / market.sigma * market.horizon) / sqrt_t);
    Ok(BsSolution {
        case: BsCase::Concave,
        constants: BsConstants::Concave { c3, c4 },
        modified_strike: strike_bar,
        success_probability,
        budget_used,
        success_set: PriceSet::below(c3),
        decomposition: vec![
            Leg::new(Instrument::Call { strike: strike_bar }, 1.0),
            Leg::new(Instrument::Call { strike: c3 }, -1.0),
            Leg::new(
                Instrument::Digital {
                    strike: c3,
                    cash: c3 - strike_bar,
                },
                -1.0,
            ),
        ],
        root_residuals: None,
        diagnostics,
    })
}

/// Tangency point of `x^theta = c (x - K_bar)` on `(K_bar, inf)`: the point
/// `x*` minimizing `x^theta / (x - K_bar)` and the log of that minimum.
/// Below this `c` the equation has no root.
pub fn convex_tangency(market: &BsMarket, strike_bar: f64) -> (f64, f64) {
    let theta = market.density_exponent();
    if strike_bar <= 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let x_star = theta * strike_bar / (theta - 1.0);
    let log_c = theta * x_star.ln() - (x_star - strike_bar).ln();
    (x_star, log_c)
}

/// `theta ln x - ln(x - K_bar) - ln c_bar`
fn root_gap(theta: f64, strike_bar: f64, log_c_bar: f64, x: f64) -> f64 {
    theta * x.ln() - (x - strike_bar).ln() - log_c_bar
}

/// Relative residual of `x^theta = c_bar (x - K_bar)`.
pub fn root_residual(market: &BsMarket, strike_bar: f64, c_bar: f64, x: f64) -> f64 {
    let lhs = market.density_exponent() * x.ln();
    let rhs = c_bar.ln() + (x - strike_bar).ln();
    (lhs - rhs).exp_m1().abs()
}

/// Bisection on a monotone function given a sign change; runs until the
/// bracket stops shrinking.
fn bisect_sign(mut below: f64, mut above: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(below) <= 0 < f(above); the two ends may be in either order.
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (below + above);
        if mid == below || mid == above {
            break;
        }
        if f(mid) <= 0.0 {
            below = mid;
        } else {
            above = mid;
        }
    }
    below
}

/// Both roots `c5 < c6` of `x^{mu/sigma^2} = c_bar (x - K_bar)` for
/// `ln c_bar >= ln c_bar*`. With `K_bar = 0` the lower root degenerates to 0.
pub fn convex_roots(market: &BsMarket, strike_bar: f64, log_c_bar: f64) -> Result<(f64, f64)> {
    let theta = market.density_exponent();
    if theta <= 1.0 {
        return Err(Error::Precondition("convex roots need mu > sigma^2".into()));
    }
    let (x_star, log_tangent) = convex_tangency(market, strike_bar);
    if log_c_bar < log_tangent {
        return Err(Error::Domain(format!(
            "ln c_bar = {log_c_bar} lies below the tangency value {log_tangent}"
        )));
    }
    let gap = |x: f64| root_gap(theta, strike_bar, log_c_bar, x);

    let lower = if strike_bar > 0.0 {
        // Branch (K_bar, x*): parametrize by t = ln(x - K_bar); the gap falls in t.
        let at = |t: f64| gap(strike_bar + t.exp());
        let t_top = (x_star - strike_bar).ln();
        let mut t_low = t_top - 1.0;
        let mut step = 1.0;
        while at(t_low) <= 0.0 {
            t_low -= step;
            step *= 2.0;
            if t_low < -1e4 {
                return Err(Error::Numeric("could not bracket the lower root".into()));
            }
        }
        let t = bisect_sign(t_top, t_low, at);
        strike_bar + t.exp()
    } else {
        0.0
    };

    // Branch (x*, inf): parametrize by y = ln x; the gap rises in y.
    let at = |y: f64| gap(y.exp());
    let mut y_low = if x_star > 0.0 { x_star.ln() } else { 0.0 };
    let mut step = 1.0;
    while at(y_low) > 0.0 {
        y_low -= step;
        step *= 2.0;
        if y_low < -1e4 {
            return Err(Error::Numeric("could not bracket the upper root from below".into()));
        }
    }
    let mut y_high = y_low + 1.0;
    let mut step = 1.0;
    while at(y_high) <= 0.0 {
        y_high += step;
        step *= 2.0;
        if y_high > 700.0 {
            return Err(Error::Numeric("could not bracket the upper root from above".into()));
        }
    }
    let upper = bisect_sign(y_low, y_high, at).exp();
    Ok((lower, upper))
}

/// `E^Q[1_{S_T < c5 or S_T > c6} (S_T - K_bar)^+]` in closed form.
pub fn convex_budget(market: &BsMarket, strike_bar: f64, c5: f64, c6: f64) -> f64 {
    let sqrt_t = market.sqrt_t();
    let vol = market.sigma * sqrt_t;
    // c7, c8 in W* coordinates; c5 = 0 maps to -inf.
    let c7 = if c5 > 0.0 { market.w_star_at(c5) } else { f64::NEG_INFINITY };
    let c8 = market.w_star_at(c6);
    let tail = |c: f64| normal::cdf(-c / sqrt_t);
    let tail_shift = |c: f64| normal::cdf(-c / sqrt_t + vol);
    price_call(market, strike_bar) - market.s * tail_shift(c7) + market.s * tail_shift(c8)
        + strike_bar * (tail(c7) - tail(c8))
}

/// Convex case: the success set is `{S_T < c5} u {S_T > c6}`.
pub fn solve_convex(market: &BsMarket, strike: f64, loss: &LossSpec<f64>, x0: f64) -> Result<BsSolution> {
    let strike_bar = strike + loss.inverse_threshold();
    if classify(market, strike_bar, x0)? != BsCase::Convex {
        return Err(Error::Precondition(format!(
            "convex solve needs mu > sigma^2 and an interior budget (mu = {}, sigma^2 = {}, x0 = {x0})",
            market.mu,
            market.sigma * market.sigma
        )));
    }
    check_interior(market, strike_bar, x0)?;
    let budget_at = |log_c: f64| -> Result<(f64, f64, f64)> {
        let (c5, c6) = convex_roots(market, strike_bar, log_c)?;
        Ok((c5, c6, convex_budget(market, strike_bar, c5, c6)))
    };

    // The budget falls as c_bar grows: at the tangency it is the full price.
    let (_, log_tangent) = convex_tangency(market, strike_bar);
    let mut lo = if log_tangent.is_finite() {
        log_tangent
    } else {
        let mut lo = 0.0;
        let mut step = 1.0;
        while budget_at(lo)?.2 <= x0 {
            lo -= step;
            step *= 2.0;
            if lo < -1e4 {
                return Err(Error::Numeric("could not bracket c_bar from below".into()));
            }
        }
        lo
    };
    let mut hi = lo + 1.0;
    let mut step = 1.0;
    while budget_at(hi)?.2 > x0 {
        hi += step;
        step *= 2.0;
        if hi > 1e4 {
            return Err(Error::Numeric("could not bracket c_bar from above".into()));
        }
    }

    let mut diagnostics = Vec::new();
    let mut b_lo = budget_at(lo)?.2;
    let mut b_hi = budget_at(hi)?.2;
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= BRACKET_TOL * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let b_mid = budget_at(mid)?.2;
        if b_mid > b_lo || b_mid < b_hi {
            diagnostics.push(format!(
                "budget not monotone in c_bar near ln c_bar = {mid}: {b_hi} <= {b_mid} <= {b_lo} fails"
            ));
        }
        if b_mid > x0 {
            lo = mid;
            b_lo = b_mid;
        } else {
            hi = mid;
            b_hi = b_mid;
        }
    }
    lo = hi;
    let (c5, c6, budget_used) = budget_at(lo)?;
    let (c5, c6) = (exact_gap(strike_bar, c5, false), exact_gap(strike_bar, c6, true));
    let c_bar = lo.exp();
    if (budget_used - x0).abs() > BUDGET_REL_TOL * x0 {
        diagnostics.push(format!("budget binding missed: used {budget_used}, target {x0}"));
    }
    let c7 = if c5 > 0.0 { market.w_star_at(c5) } else { f64::NEG_INFINITY };
    let c8 = market.w_star_at(c6);
    let drift = market.mu / market.sigma * market.horizon;
    let sqrt_t = market.sqrt_t();
    let success_probability = normal::cdf((c7 - drift) / sqrt_t) + normal::cdf(-(c8 - drift) / sqrt_t);
    let residual_low = if c5 > 0.0 {
        root_residual(market, strike_bar, c_bar, c5)
    } else {
        0.0
    };
    let residual_high = root_residual(market, strike_bar, c_bar, c6);
    Ok(BsSolution {
        case: BsCase::Convex,
        constants: BsConstants::Convex { c5, c6, c7, c8, c_bar },
        modified_strike: strike_bar,
        success_probability,
        budget_used,
        success_set: PriceSet {
            intervals: vec![Interval { lo: 0.0, hi: c5 }, Interval { lo: c6, hi: f64::INFINITY }],
        },
        decomposition: vec![
            Leg::new(Instrument::Call { strike: strike_bar }, 1.0),
            Leg::new(Instrument::Call { strike: c5 }, -1.0),
            Leg::new(
                Instrument::Digital {
                    strike: c5,
                    cash: c5 - strike_bar,
                },
                -1.0,
            ),
            Leg::new(Instrument::Call { strike: c6 }, 1.0),
            Leg::new(
                Instrument::Digital {
                    strike: c6,
                    cash: c6 - strike_bar,
                },
                1.0,
            ),
        ],
        root_residuals: Some((residual_low, residual_high)),
        diagnostics,
    })
}
