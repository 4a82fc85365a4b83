use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use shortfall_core::report::{SolveReport, Value};
use shortfall_core::scalar::fits;
use shortfall_core::{bs, crr, optimizer, trinomial, Error, Exact, Scalar};

use crate::config::{ModelKind, RawConfig};
use crate::{read_config, render, write_json, CliError, SolveArgs, EXIT_OK};

/// A finished solve and anything its own checks flagged.
#[derive(Debug, Clone)]
pub struct Solved {
    pub report: SolveReport,
    pub problems: Vec<String>,
}

pub fn expect_model(raw: &RawConfig, want: ModelKind) -> Result<(), CliError> {
    let got = raw.model()?;
    if got != want {
        return Err(CliError::Usage(format!(
            "the config describes a {} market; run `shortfall {}`",
            got.name(),
            got.name()
        )));
    }
    Ok(())
}

fn invariants(report: &SolveReport) -> Vec<String> {
    let mut problems = Vec::new();
    let p = report.success_probability.value;
    if !(0.0..=1.0).contains(&p) {
        problems.push(format!("success probability {p} outside [0, 1]"));
    }
    let x0 = report.budget.value;
    if report.budget_used.value > x0 * (1.0 + 1e-12) + f64::MIN_POSITIVE {
        problems.push(format!("budget used {} exceeds x0 = {x0}", report.budget_used.value));
    }
    problems
}

pub fn solve_bs(raw: &RawConfig) -> Result<Solved, CliError> {
    let spec = raw.bs_problem()?;
    let strike = *spec.claim.strike().expect("checked by the config");
    let sol = bs::solve(&spec.market, strike, &spec.loss, spec.x0)?;
    let report = SolveReport::from_bs(&spec.market, strike, spec.x0, &sol);
    let mut problems = sol.diagnostics.clone();
    problems.extend(invariants(&report));
    Ok(Solved { report, problems })
}

pub fn solve_crr<T: Scalar>(raw: &RawConfig) -> Result<Solved, CliError> {
    let spec = raw.crr_problem::<T>()?;
    let sol = crr::solve_crr(&spec.market, &spec.claim, &spec.loss, &spec.x0)?;
    let report = SolveReport::from_crr(&spec.market, &spec.x0, &sol);
    let mut problems = invariants(&report);
    if sol.verified == Some(false) {
        problems.push("layer greedy disagrees with the exact search".into());
    }
    if !fits(&sol.hedge.initial_capital, &spec.x0) {
        problems.push(format!("replication needs {} above the budget {}", sol.hedge.initial_capital, spec.x0));
    }
    Ok(Solved { report, problems })
}

fn table_payoffs<T: Scalar>(claim: &shortfall_core::ClaimSpec<T>, market: &trinomial::TrinomialMarket<T>) -> [T; 3] {
    let prices = market.terminal_prices();
    std::array::from_fn(|i| claim.payoff(i, &prices[i]))
}

pub fn solve_tri<T: Scalar>(raw: &RawConfig) -> Result<Solved, CliError> {
    let spec = raw.tri_problem::<T>()?;
    let claim = table_payoffs(&spec.claim, &spec.market);
    let sol = trinomial::solve_trinomial(&spec.market, &claim, &spec.loss, &spec.x0)?;
    let table = if spec.market.b > T::zero() {
        Some(trinomial::decision_table_b_positive(&spec.market, &claim, &spec.loss, &spec.x0)?)
    } else {
        None
    };
    let report = SolveReport::from_trinomial(&spec.market, &claim, &spec.x0, &sol, table.as_ref());
    let mut problems = invariants(&report);
    if report.verified == Some(false) {
        problems.push("case table disagrees with the exact search".into());
    }
    Ok(Solved { report, problems })
}

/// Solves the config with the model it describes.
pub fn solve_any(raw: &RawConfig, rational: bool) -> Result<Solved, CliError> {
    match (raw.model()?, rational) {
        (ModelKind::Bs, false) => solve_bs(raw),
        (ModelKind::Bs, true) => Err(Error::Capability("the Black-Scholes solver runs in floating point only".into()).into()),
        (ModelKind::Crr, false) => solve_crr::<f64>(raw),
        (ModelKind::Crr, true) => solve_crr::<Exact>(raw),
        (ModelKind::Tri, false) => solve_tri::<f64>(raw),
        (ModelKind::Tri, true) => solve_tri::<Exact>(raw),
    }
}

fn finish(solved: Solved, args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    write!(out, "{}", render::report(&solved.report, args.table)).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = &args.json {
        write_json(path, &solved.report)?;
    }
    if solved.problems.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Numeric(solved.problems.join("; ")))
    }
}

fn run_model(args: &SolveArgs, kind: ModelKind, out: &mut dyn Write) -> Result<i32, CliError> {
    let raw = read_config(&args.config)?;
    expect_model(&raw, kind)?;
    let solved = solve_any(&raw, args.rational)?;
    finish(solved, args, out)
}

pub fn run_bs(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    run_model(args, ModelKind::Bs, out)
}

pub fn run_crr(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    run_model(args, ModelKind::Crr, out)
}

pub fn run_tri(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    run_model(args, ModelKind::Tri, out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub members: Vec<String>,
    /// Largest cost over the pricing measures.
    pub budget_used: Value,
    /// `H_tilde` by outcome label.
    pub modified_claim: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesReport {
    pub model: String,
    pub arithmetic: String,
    pub success_probability: Value,
    pub candidates: Vec<Candidate>,
}

fn arithmetic<T: Scalar>() -> String {
    if T::is_exact() { "rational" } else { "f64" }.to_string()
}

fn candidate<T: Scalar>(set: &optimizer::SuccessSet<T>, h: &[T], label: impl Fn(usize) -> String) -> Candidate {
    let cost = set
        .costs_used
        .iter()
        .cloned()
        .fold(T::zero(), |acc, c| if c > acc { c } else { acc });
    Candidate {
        members: set.member_ids.iter().map(|&i| label(i)).collect(),
        budget_used: Value::of(&cost),
        modified_claim: h.iter().enumerate().map(|(i, v)| (label(i), Value::of(v))).collect(),
    }
}

fn crr_candidates<T: Scalar>(raw: &RawConfig) -> Result<CandidatesReport, CliError> {
    let spec = raw.crr_problem::<T>()?;
    let n = spec.market.periods;
    let sets = crr::optimal_candidates(&spec.market, &spec.claim, &spec.loss, &spec.x0)?;
    let best = sets.first().map(|(s, _)| s.probability.clone()).unwrap_or_else(T::zero);
    Ok(CandidatesReport {
        model: "crr".into(),
        arithmetic: arithmetic::<T>(),
        success_probability: Value::of(&best),
        candidates: sets.iter().map(|(s, h)| candidate(s, h, |i| crr::path_moves(i, n))).collect(),
    })
}

fn tri_candidates<T: Scalar>(raw: &RawConfig) -> Result<CandidatesReport, CliError> {
    let spec = raw.tri_problem::<T>()?;
    let claim = table_payoffs(&spec.claim, &spec.market);
    let table = trinomial::build_atoms(&spec.market, &claim, &spec.loss)?;
    let sets = optimizer::solve_exact_all(&table, &[spec.x0.clone(), spec.x0.clone()])?;
    let shifted = claim.map(|h| spec.loss.shifted(&h));
    let best = sets.first().map(|s| s.probability.clone()).unwrap_or_else(T::zero);
    let label = |i: usize| format!("omega{}", i + 1);
    Ok(CandidatesReport {
        model: "tri".into(),
        arithmetic: arithmetic::<T>(),
        success_probability: Value::of(&best),
        candidates: sets
            .iter()
            .map(|s| {
                let h: Vec<T> = (0..3).map(|i| if s.contains(i) { shifted[i].clone() } else { T::zero() }).collect();
                candidate(s, &h, label)
            })
            .collect(),
    })
}

pub fn candidates(raw: &RawConfig, rational: bool) -> Result<CandidatesReport, CliError> {
    match (raw.model()?, rational) {
        (ModelKind::Bs, _) => Err(Error::Capability("candidate listing needs a discrete model (crr or tri)".into()).into()),
        (ModelKind::Crr, false) => crr_candidates::<f64>(raw),
        (ModelKind::Crr, true) => crr_candidates::<Exact>(raw),
        (ModelKind::Tri, false) => tri_candidates::<f64>(raw),
        (ModelKind::Tri, true) => tri_candidates::<Exact>(raw),
    }
}

pub fn run_candidates(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let raw = read_config(&args.config)?;
    let report = candidates(&raw, args.rational)?;
    write!(out, "{}", render::candidates(&report)).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    Ok(EXIT_OK)
}
