//! Loss functions, acceptance thresholds and the shifted claim.
//!
//! A hedge succeeds on an outcome when `u((H - X_T)^+) <= alpha`, which is
//! the same as `X_T >= (H - u^{-1}(alpha))^+`. Every solver therefore only
//! needs the threshold `u^{-1}(alpha)` and the shifted payoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{positive_part, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossFamily<T> {
    /// `u(x) = x^gamma`
    Power { gamma: T },
    /// `u(x) = lambda * x^gamma`
    Scaled { lambda: T, gamma: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec<T> {
    family: LossFamily<T>,
    alpha: T,
}

impl<T: Scalar> LossSpec<T> {
    pub fn new(family: LossFamily<T>, alpha: T) -> Result<Self> {
        match &family {
            LossFamily::Power { gamma } => {
                if *gamma <= T::zero() {
                    return Err(Error::Domain(format!("loss exponent must be positive, got {gamma}")));
                }
            }
            LossFamily::Scaled { lambda, gamma } => {
                if *gamma <= T::zero() {
                    return Err(Error::Domain(format!("loss exponent must be positive, got {gamma}")));
                }
                if *lambda <= T::zero() {
                    return Err(Error::Domain(format!("loss scale must be positive, got {lambda}")));
                }
            }
        }
        if alpha < T::zero() {
            return Err(Error::Domain(format!("acceptance level must be nonnegative, got {alpha}")));
        }
        Ok(Self { family, alpha })
    }

    pub fn power(gamma: T, alpha: T) -> Result<Self> {
        Self::new(LossFamily::Power { gamma }, alpha)
    }

    pub fn scaled(lambda: T, gamma: T, alpha: T) -> Result<Self> {
        Self::new(LossFamily::Scaled { lambda, gamma }, alpha)
    }

    /// Identity loss with zero tolerance: plain quantile hedging.
    pub fn quantile() -> Self {
        Self {
            family: LossFamily::Power { gamma: T::one() },
            alpha: T::zero(),
        }
    }

    pub fn family(&self) -> &LossFamily<T> {
        &self.family
    }

    pub fn alpha(&self) -> &T {
        &self.alpha
    }

    pub fn with_alpha(&self, alpha: T) -> Result<Self> {
        Self::new(self.family.clone(), alpha)
    }

    /// `u(x)`
    pub fn eval(&self, x: &T) -> Result<T> {
        if *x < T::zero() {
            return Err(Error::Domain(format!("loss argument must be nonnegative, got {x}")));
        }
        Ok(match &self.family {
            LossFamily::Power { gamma } => x.powr(gamma),
            LossFamily::Scaled { lambda, gamma } => lambda.clone() * x.powr(gamma),
        })
    }

    /// `u^{-1}(alpha)`, in closed form for every family.
    pub fn inverse_threshold(&self) -> T {
        if self.alpha.is_zero() {
            return T::zero();
        }
        match &self.family {
            LossFamily::Power { gamma } => self.alpha.powr(&(T::one() / gamma.clone())),
            LossFamily::Scaled { lambda, gamma } => {
                (self.alpha.clone() / lambda.clone()).powr(&(T::one() / gamma.clone()))
            }
        }
    }

    /// `(H - u^{-1}(alpha))^+` for a single payoff value.
    pub fn shifted(&self, payoff: &T) -> T {
        positive_part(payoff.clone() - self.inverse_threshold())
    }
}

pub fn eval_loss<T: Scalar>(spec: &LossSpec<T>, x: &T) -> Result<T> {
    spec.eval(x)
}

pub fn inverse_threshold<T: Scalar>(spec: &LossSpec<T>) -> T {
    spec.inverse_threshold()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClaimSpec<T> {
    /// European call `(S - strike)^+` on the terminal price.
    Call { strike: T },
    /// One nonnegative payoff per model outcome.
    Table(Vec<T>),
}

impl<T: Scalar> ClaimSpec<T> {
    pub fn call(strike: T) -> Result<Self> {
        if strike < T::zero() {
            return Err(Error::Domain(format!("strike must be nonnegative, got {strike}")));
        }
        Ok(ClaimSpec::Call { strike })
    }

    pub fn table(payoffs: Vec<T>) -> Result<Self> {
        if let Some(bad) = payoffs.iter().find(|h| **h < T::zero()) {
            return Err(Error::Domain(format!("claim payoffs must be nonnegative, got {bad}")));
        }
        Ok(ClaimSpec::Table(payoffs))
    }

    /// Checks a table claim against the number of model outcomes.
    pub fn check_outcomes(&self, outcomes: usize) -> Result<()> {
        match self {
            ClaimSpec::Table(h) if h.len() != outcomes => Err(Error::Domain(format!(
                "claim table has {} payoffs but the model has {outcomes} outcomes",
                h.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Payoff on outcome `index` whose terminal price is `price`.
    pub fn payoff(&self, index: usize, price: &T) -> T {
        match self {
            ClaimSpec::Call { strike } => positive_part(price.clone() - strike.clone()),
            ClaimSpec::Table(h) => h[index].clone(),
        }
    }

    pub fn strike(&self) -> Option<&T> {
        match self {
            ClaimSpec::Call { strike } => Some(strike),
            ClaimSpec::Table(_) => None,
        }
    }
}

/// Shifted payoff `(H - u^{-1}(alpha))^+` where `outcome_value = H(omega)`.
/// For a call this equals `(S - K - u^{-1}(alpha))^+`.
pub fn shifted_payoff<T: Scalar>(_claim: &ClaimSpec<T>, spec: &LossSpec<T>, outcome_value: &T) -> T {
    spec.shifted(outcome_value)
}
