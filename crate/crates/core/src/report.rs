//! Serializable summary of a solve, shared by every model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bs::{BsConstants, BsMarket, BsSolution, Instrument};
use crate::crr::{self, CrrMarket, CrrSolution, MonotoneLemma, QbarShape};
use crate::optimizer::Certificate;
use crate::scalar::Scalar;
use crate::trinomial::{TableOutcome, TrinomialMarket, TrinomialSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    BlackScholes,
    Crr,
    Trinomial,
}

/// A number with its exact fraction when the solve ran in exact arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

impl Value {
    pub fn of<T: Scalar>(x: &T) -> Self {
        Self {
            value: x.to_f64_lossy(),
            exact: x.exact_text(),
        }
    }

    pub fn float(value: f64) -> Self {
        Self { value, exact: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveCertificate {
    ExhaustiveOptimal,
    BranchBoundOptimal,
    MonotoneGreedy,
    NaiveDiagnostic,
    FullHedge,
    ClosedForm,
    Degenerate,
}

impl From<Certificate> for SolveCertificate {
    fn from(c: Certificate) -> Self {
        match c {
            Certificate::ExhaustiveOptimal => Self::ExhaustiveOptimal,
            Certificate::BranchBoundOptimal => Self::BranchBoundOptimal,
            Certificate::MonotoneGreedy => Self::MonotoneGreedy,
            Certificate::NaiveDiagnostic => Self::NaiveDiagnostic,
            Certificate::FullHedge => Self::FullHedge,
        }
    }
}

/// Price interval `(lo, hi]`; `hi = None` is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub lo: f64,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    /// `call` or `digital`
    pub instrument: String,
    pub strike: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash: Option<f64>,
    pub weight: f64,
}

/// One outcome of a finite model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub label: String,
    pub terminal_price: Value,
    pub payoff: Value,
    pub shifted_payoff: Value,
    pub in_success_set: bool,
    pub modified_payoff: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub model: Model,
    /// `f64`, `f32` or `rational`
    pub arithmetic: String,
    /// Case label: closed-form branch, monotone structure or table branch.
    pub case: String,
    pub certificate: SolveCertificate,
    /// Market parameters by config key.
    pub market: BTreeMap<String, f64>,
    pub budget: Value,
    pub success_probability: Value,
    pub budget_used: Value,
    /// Price of the original claim (superhedging price in incomplete markets).
    pub claim_price: Value,
    /// Price of `(H - u^{-1}(alpha))^+`.
    pub shifted_claim_price: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified_strike: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
    /// Named solver constants (`c3`, `c_bar`, ...), finite values only.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    /// Outcome labels of the success set for finite models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_set: Option<Vec<String>>,
    /// Success set as price intervals for the continuous model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub success_intervals: Vec<IntervalReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decomposition: Vec<LegReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<OutcomeRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn arithmetic<T: Scalar>() -> String {
    if T::is_exact() {
        "rational".into()
    } else if std::mem::size_of::<T>() == 4 {
        "f32".into()
    } else {
        "f64".into()
    }
}

fn finite_constants(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs
        .iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

impl SolveReport {
    pub fn from_bs(market: &BsMarket, strike: f64, x0: f64, sol: &BsSolution) -> Self {
        let constants = match sol.constants {
            BsConstants::None => BTreeMap::new(),
            BsConstants::Concave { c3, c4 } => finite_constants(&[("c3", c3), ("c4", c4)]),
            BsConstants::Convex { c5, c6, c7, c8, c_bar } => {
                finite_constants(&[("c5", c5), ("c6", c6), ("c7", c7), ("c8", c8), ("c_bar", c_bar)])
            }
        };
        let certificate = match sol.case {
            crate::bs::BsCase::FullHedge => SolveCertificate::FullHedge,
            crate::bs::BsCase::Degenerate => SolveCertificate::Degenerate,
            _ => SolveCertificate::ClosedForm,
        };
        let mut notes = vec!["success set boundaries carry no mass; lower pieces are closed, upper pieces open".to_string()];
        if let Some((r5, r6)) = sol.root_residuals {
            notes.push(format!("root residuals: c5 {r5:.3e}, c6 {r6:.3e}"));
        }
        notes.extend(sol.diagnostics.iter().cloned());
        Self {
            model: Model::BlackScholes,
            arithmetic: "f64".into(),
            case: format!("{:?}", sol.case),
            certificate,
            market: finite_constants(&[("s", market.s), ("mu", market.mu), ("sigma", market.sigma), ("T", market.horizon)]),
            budget: Value::float(x0),
            success_probability: Value::float(sol.success_probability),
            budget_used: Value::float(sol.budget_used),
            claim_price: Value::float(crate::bs::price_call(market, strike)),
            shifted_claim_price: Value::float(crate::bs::price_call(market, sol.modified_strike)),
            modified_strike: Some(Value::float(sol.modified_strike)),
            candidate_count: None,
            verified: None,
            constants,
            success_set: None,
            success_intervals: sol
                .success_set
                .intervals
                .iter()
                .map(|i| IntervalReport {
                    lo: i.lo,
                    hi: i.hi.is_finite().then_some(i.hi),
                })
                .collect(),
            decomposition: sol
                .decomposition
                .iter()
                .map(|leg| match leg.instrument {
                    Instrument::Call { strike } => LegReport {
                        instrument: "call".into(),
                        strike,
                        cash: None,
                        weight: leg.weight,
                    },
                    Instrument::Digital { strike, cash } => LegReport {
                        instrument: "digital".into(),
                        strike,
                        cash: Some(cash),
                        weight: leg.weight,
                    },
                })
                .collect(),
            outcomes: Vec::new(),
            notes,
        }
    }

    pub fn from_crr<T: Scalar>(market: &CrrMarket<T>, x0: &T, sol: &CrrSolution<T>) -> Self {
        let n = market.periods;
        let case = match (sol.monotone.shape, sol.monotone.lemma) {
            (_, Some(MonotoneLemma::LowLayersFirst)) => "IncreasingQbar, low layers first".to_string(),
            (_, Some(MonotoneLemma::HighLayersFirst)) => "DecreasingQbar, high layers first".to_string(),
            (QbarShape::Neither, None) => "Neither".to_string(),
            (shape, None) => format!("{shape:?}, layer order does not match p"),
        };
        let outcomes = if n <= crr::PATH_TABLE_MAX_PERIODS {
            sol.paths
                .iter()
                .map(|p| OutcomeRow {
                    label: p.moves(n),
                    terminal_price: Value::of(&p.terminal_price),
                    payoff: Value::of(&p.payoff),
                    shifted_payoff: Value::of(&p.shifted),
                    in_success_set: sol.success.contains(p.id),
                    modified_payoff: Value::of(&sol.modified_claim[p.id]),
                })
                .collect()
        } else {
            Vec::new()
        };
        let success_set = (n <= crr::PATH_TABLE_MAX_PERIODS)
            .then(|| sol.success.member_ids.iter().map(|&id| crr::path_moves(id, n)).collect());
        let mut notes = sol.notes.clone();
        notes.push(format!(
            "replication: initial capital {}, self-financing gap {}",
            sol.hedge.initial_capital,
            sol.hedge.self_financing_gap()
        ));
        Self {
            model: Model::Crr,
            arithmetic: arithmetic::<T>(),
            case,
            certificate: sol.success.certificate.into(),
            market: finite_constants(&[
                ("s0", market.s0.to_f64_lossy()),
                ("u", market.up.to_f64_lossy()),
                ("d", market.down.to_f64_lossy()),
                ("p", market.p.to_f64_lossy()),
                ("n", n as f64),
            ]),
            budget: Value::of(x0),
            success_probability: Value::of(sol.probability()),
            budget_used: Value::of(sol.budget_used()),
            claim_price: Value::of(&sol.claim_price),
            shifted_claim_price: Value::of(&sol.shifted_claim_price),
            modified_strike: sol.modified_strike.as_ref().map(Value::of),
            candidate_count: sol.candidate_count,
            verified: sol.verified,
            constants: finite_constants(&[("p_star", market.risk_neutral_p().to_f64_lossy())]),
            success_set,
            success_intervals: Vec::new(),
            decomposition: Vec::new(),
            outcomes,
            notes,
        }
    }

    pub fn from_trinomial<T: Scalar>(
        market: &TrinomialMarket<T>,
        claim: &[T; 3],
        x0: &T,
        sol: &TrinomialSolution<T>,
        table: Option<&TableOutcome<T>>,
    ) -> Self {
        let labels = ["omega1", "omega2", "omega3"];
        let prices = market.terminal_prices();
        let outcomes = (0..3)
            .map(|i| OutcomeRow {
                label: labels[i].into(),
                terminal_price: Value::of(&prices[i]),
                payoff: Value::of(&claim[i]),
                shifted_payoff: Value::of(&sol.shifted_claim[i]),
                in_success_set: sol.success.contains(i),
                modified_payoff: Value::of(&sol.modified_claim[i]),
            })
            .collect();
        let mut notes = vec![format!(
            "superhedge: capital {}, stock units {}, cash {}",
            sol.hedge.capital, sol.hedge.stock_units, sol.hedge.cash
        )];
        let (case, verified) = match table {
            Some(t) => {
                let agree = t.success.probability == sol.success.probability
                    || crate::scalar::approx_eq(&t.success.probability, &sol.success.probability);
                if !agree {
                    notes.push(format!(
                        "case table gives probability {} against the exact {}",
                        t.success.probability, sol.success.probability
                    ));
                }
                (format!("{:?}", t.branch), Some(agree))
            }
            None => ("exact search".to_string(), None),
        };
        let v = &sol.vertices;
        Self {
            model: Model::Trinomial,
            arithmetic: arithmetic::<T>(),
            case,
            certificate: sol.success.certificate.into(),
            market: finite_constants(&[
                ("s", market.s.to_f64_lossy()),
                ("a", market.a.to_f64_lossy()),
                ("b", market.b.to_f64_lossy()),
                ("c", market.c.to_f64_lossy()),
                ("p1", market.p[0].to_f64_lossy()),
                ("p2", market.p[1].to_f64_lossy()),
                ("p3", market.p[2].to_f64_lossy()),
            ]),
            budget: Value::of(x0),
            success_probability: Value::of(&sol.success.probability),
            budget_used: Value::of(&sol.budget_used),
            claim_price: Value::of(&sol.claim_price),
            shifted_claim_price: Value::of(&sol.shifted_claim_price),
            modified_strike: None,
            candidate_count: None,
            verified,
            constants: finite_constants(&[
                ("q_low", v.q_low.to_f64_lossy()),
                ("q_high", v.q_high.to_f64_lossy()),
                ("cost_q1", sol.success.costs_used[0].to_f64_lossy()),
                ("cost_q2", sol.success.costs_used[1].to_f64_lossy()),
            ]),
            success_set: Some(sol.success.member_ids.iter().map(|&i| labels[i].to_string()).collect()),
            success_intervals: Vec::new(),
            decomposition: Vec::new(),
            outcomes,
            notes,
        }
    }
}
