//! Shortfall-risk minimization and quantile hedging.
//!
//! A hedger with capital `x0` below the price of a claim `H` maximizes the
//! probability that the loss `u((H - X_T)^+)` stays within a level `alpha`.
//! The optimal strategy superhedges `1_A (H - u^{-1}(alpha))^+` for a success
//! set `A`, so every model reduces to choosing `A` under a budget:
//!
//! * [`bs`]: closed-form sets for a call in the Black-Scholes model,
//! * [`crr`]: path-level sets on the binomial lattice with replication,
//! * [`trinomial`]: the one-period incomplete market with two endpoint
//!   martingale measures,
//! * [`optimizer`]: the underlying 0/1 knapsack search,
//! * [`verify`]: quadrature, Monte Carlo and enumeration cross-checks.
//!
//! The discrete solvers are generic over [`Scalar`]; the aliases below name
//! the float and exact-rational instantiations.

pub mod bs;
pub mod crr;
pub mod error;
pub mod loss;
pub mod normal;
pub mod optimizer;
pub mod report;
pub mod scalar;
pub mod trinomial;
pub mod verify;

pub use error::{Error, Result};
pub use loss::{ClaimSpec, LossFamily, LossSpec};
pub use report::SolveReport;
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type LossSpecF64 = LossSpec<f64>;
pub type LossSpecExact = LossSpec<Exact>;
pub type ClaimSpecF64 = ClaimSpec<f64>;
pub type ClaimSpecExact = ClaimSpec<Exact>;
pub type AtomTableF64 = optimizer::AtomTable<f64>;
pub type AtomTableExact = optimizer::AtomTable<Exact>;
pub type CrrMarketF64 = crr::CrrMarket<f64>;
pub type CrrMarketExact = crr::CrrMarket<Exact>;
pub type TrinomialMarketF64 = trinomial::TrinomialMarket<f64>;
pub type TrinomialMarketExact = trinomial::TrinomialMarket<Exact>;
