//! Independent checks of solver output: Gauss-Legendre quadrature and Monte
//! Carlo for the Black-Scholes sets, direct enumeration for finite models.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs::{BsMarket, PriceSet};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::normal;
use crate::scalar::{fits, Scalar};

pub const QUADRATURE_NODES: usize = 201;
/// Truncation of the Gaussian variable, in standard deviations.
pub const TRUNCATION: f64 = 10.0;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero")))
}

/// Standard-normal coordinate `z` of a terminal price when
/// `S_T = s exp(drift T - sigma^2 T / 2 + sigma sqrt(T) z)`.
fn z_of(market: &BsMarket, drift: f64, price: f64) -> f64 {
    if price <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if price == f64::INFINITY {
        return f64::INFINITY;
    }
    let vol = market.sigma * market.horizon.sqrt();
    ((price / market.s).ln() - (drift - 0.5 * market.sigma * market.sigma) * market.horizon) / vol
}

fn price_of(market: &BsMarket, drift: f64, z: f64) -> f64 {
    let vol = market.sigma * market.horizon.sqrt();
    market.s * ((drift - 0.5 * market.sigma * market.sigma) * market.horizon + vol * z).exp()
}

/// `E^Q[1_set (S_T - K_bar)^+]` by quadrature in the Gaussian coordinate.
pub fn quadrature_budget(market: &BsMarket, set: &PriceSet, strike_bar: f64) -> f64 {
    let vol = market.sigma * market.horizon.sqrt();
    // The integrand peaks near z = vol, so the window is shifted by it.
    let (window_lo, window_hi) = (-TRUNCATION, TRUNCATION + vol);
    set.intervals
        .iter()
        .map(|interval| {
            let lo = z_of(market, 0.0, interval.lo.max(strike_bar)).max(window_lo);
            let hi = z_of(market, 0.0, interval.hi).min(window_hi);
            if lo >= hi {
                return 0.0;
            }
            rule().integrate(lo, hi, |z| normal::pdf(z) * (price_of(market, 0.0, z) - strike_bar).max(0.0))
        })
        .sum()
}

/// `P(S_T in set)` by quadrature.
pub fn quadrature_probability(market: &BsMarket, set: &PriceSet) -> f64 {
    set.intervals
        .iter()
        .map(|interval| {
            let lo = z_of(market, market.mu, interval.lo).max(-TRUNCATION);
            let hi = z_of(market, market.mu, interval.hi).min(TRUNCATION);
            if lo >= hi {
                return 0.0;
            }
            rule().integrate(lo, hi, normal::pdf)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    pub batch: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 1_000_000,
            seed: 0,
            batch: 65_536,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub paths: u64,
}

impl McEstimate {
    /// `|estimate - target|` in standard errors; infinite when the error is
    /// zero and the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.estimate - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// Standard normal draw for path `index`: each path owns a ChaCha stream,
/// so chunking and thread count do not affect results.
fn gaussian(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.sample(StandardNormal)
}

fn check_config(cfg: &McConfig) -> Result<()> {
    if cfg.paths == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one path".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::Domain("Monte Carlo batch size must be positive".into()));
    }
    Ok(())
}

fn batches(cfg: &McConfig) -> impl ParallelIterator<Item = std::ops::Range<u64>> + '_ {
    let count = cfg.paths.div_ceil(cfg.batch);
    (0..count)
        .into_par_iter()
        .map(move |b| b * cfg.batch..((b + 1) * cfg.batch).min(cfg.paths))
}

/// Fraction of simulated `S_T` under `P` that land in `set`, with the
/// binomial standard error.
pub fn mc_success_probability(market: &BsMarket, set: &PriceSet, cfg: &McConfig) -> Result<McEstimate> {
    check_config(cfg)?;
    let hits: u64 = batches(cfg)
        .map(|range| {
            range
                .filter(|&i| set.contains(price_of(market, market.mu, gaussian(cfg.seed, i))))
                .count() as u64
        })
        .sum();
    let n = cfg.paths as f64;
    let estimate = hits as f64 / n;
    Ok(McEstimate {
        estimate,
        std_error: (estimate * (1.0 - estimate) / n).sqrt(),
        paths: cfg.paths,
    })
}

/// Monte Carlo estimate of `E^Q[1_set (S_T - K_bar)^+]`.
pub fn mc_budget(market: &BsMarket, set: &PriceSet, strike_bar: f64, cfg: &McConfig) -> Result<McEstimate> {
    check_config(cfg)?;
    let payoff = |i: u64| {
        let price = price_of(market, 0.0, gaussian(cfg.seed, i));
        if set.contains(price) {
            (price - strike_bar).max(0.0)
        } else {
            0.0
        }
    };
    // Per-batch sums come back in batch order, so the total is reproducible.
    let sums: Vec<(f64, f64)> = batches(cfg)
        .map(|range| {
            range.fold((0.0, 0.0), |(s, s2), i| {
                let v = payoff(i);
                (s + v, s2 + v * v)
            })
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |(a, b), (s, s2)| (a + s, b + s2));
    let n = cfg.paths as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (variance / n).sqrt(),
        paths: cfg.paths,
    })
}

/// `P[u((H - X_T)^+) <= alpha]` over a finite outcome list, evaluated as
/// `P[X_T >= (H - u^{-1}(alpha))^+]`. `slack` absorbs rounding in `X_T`.
pub fn enumerate_check<T: Scalar>(masses: &[T], wealth: &[T], claim: &[T], loss: &LossSpec<T>, slack: &T) -> Result<T> {
    if masses.len() != wealth.len() || masses.len() != claim.len() {
        return Err(Error::Domain(format!(
            "outcome lists differ in length: {} masses, {} wealth values, {} payoffs",
            masses.len(),
            wealth.len(),
            claim.len()
        )));
    }
    Ok(masses
        .iter()
        .zip(wealth)
        .zip(claim)
        .filter(|((_, x), h)| fits(&loss.shifted(h), &((*x).clone() + slack.clone())))
        .fold(T::zero(), |acc, ((m, _), _)| acc + m.clone()))
}
