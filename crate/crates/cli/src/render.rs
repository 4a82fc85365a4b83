//! Plain `key = value` rendering of reports.

use std::fmt::Write;

use shortfall_core::report::{SolveReport, Value};

use crate::solve::CandidatesReport;
use crate::verify::VerifyReport;

/// Decimal, followed by the fraction when it says more.
pub fn value(v: &Value) -> String {
    match &v.exact {
        Some(exact) if exact.contains('/') => format!("{} ({exact})", v.value),
        _ => format!("{}", v.value),
    }
}

fn snake<S: serde::Serialize>(x: &S) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::from("?"),
    }
}

pub fn report(r: &SolveReport, table: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model = {}", snake(&r.model));
    let _ = writeln!(s, "arithmetic = {}", r.arithmetic);
    let _ = writeln!(s, "case = {}", r.case);
    let _ = writeln!(s, "certificate = {}", snake(&r.certificate));
    for (k, v) in &r.market {
        let _ = writeln!(s, "market.{k} = {v}");
    }
    let _ = writeln!(s, "budget.x0 = {}", value(&r.budget));
    let _ = writeln!(s, "claim_price = {}", value(&r.claim_price));
    let _ = writeln!(s, "shifted_claim_price = {}", value(&r.shifted_claim_price));
    if let Some(k) = &r.modified_strike {
        let _ = writeln!(s, "modified_strike = {}", value(k));
    }
    let _ = writeln!(s, "success_probability = {}", value(&r.success_probability));
    let _ = writeln!(s, "budget_used = {}", value(&r.budget_used));
    if let Some(n) = r.candidate_count {
        let _ = writeln!(s, "candidate_count = {n}");
    }
    if let Some(v) = r.verified {
        let _ = writeln!(s, "verified = {v}");
    }
    for (k, v) in &r.constants {
        let _ = writeln!(s, "constants.{k} = {v}");
    }
    if let Some(set) = &r.success_set {
        let _ = writeln!(s, "success_set = [{}]", set.join(", "));
    }
    for (i, iv) in r.success_intervals.iter().enumerate() {
        let hi = iv.hi.map_or("inf)".to_string(), |h| format!("{h}]"));
        let _ = writeln!(s, "success_interval.{i} = ({}, {hi}", iv.lo);
    }
    for (i, leg) in r.decomposition.iter().enumerate() {
        let cash = leg.cash.map(|c| format!(" cash {c}")).unwrap_or_default();
        let _ = writeln!(s, "decomposition.{i} = {:+} x {} strike {}{cash}", leg.weight, leg.instrument, leg.strike);
    }
    for note in &r.notes {
        let _ = writeln!(s, "note = {note}");
    }
    if table && !r.outcomes.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<8} {:>14} {:>14} {:>14} {:>5} {:>14}", "outcome", "S_T", "H", "H_bar", "in_A", "H_tilde");
        for row in &r.outcomes {
            let _ = writeln!(
                s,
                "{:<8} {:>14} {:>14} {:>14} {:>5} {:>14}",
                row.label,
                row.terminal_price.value,
                row.payoff.value,
                row.shifted_payoff.value,
                if row.in_success_set { "yes" } else { "no" },
                row.modified_payoff.value
            );
        }
    }
    s
}

pub fn candidates(r: &CandidatesReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model = {}", r.model);
    let _ = writeln!(s, "arithmetic = {}", r.arithmetic);
    let _ = writeln!(s, "success_probability = {}", value(&r.success_probability));
    let _ = writeln!(s, "candidate_count = {}", r.candidates.len());
    for (i, c) in r.candidates.iter().enumerate() {
        let _ = writeln!(s, "candidate.{i}.members = [{}]", c.members.join(", "));
        let _ = writeln!(s, "candidate.{i}.budget_used = {}", value(&c.budget_used));
        let support: Vec<String> = c
            .modified_claim
            .iter()
            .filter(|(_, v)| v.value != 0.0)
            .map(|(k, v)| format!("{k}: {}", value(v)))
            .collect();
        let _ = writeln!(s, "candidate.{i}.modified_claim = {{{}}}", support.join(", "));
    }
    s
}

pub fn verification(r: &VerifyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model = {}", r.model);
    for c in &r.checks {
        let _ = writeln!(s, "check.{} = {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }
    let _ = writeln!(s, "verified = {}", r.passed);
    s
}
