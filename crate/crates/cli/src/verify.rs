use std::io::Write;

use serde::{Deserialize, Serialize};
use shortfall_core::bs::{Interval, PriceSet};
use shortfall_core::report::{Model, SolveReport, Value};
use shortfall_core::scalar::fits;
use shortfall_core::verify::{enumerate_check, mc_budget, mc_success_probability, quadrature_budget, quadrature_probability, McConfig};
use shortfall_core::{crr, trinomial, Error, Exact, Scalar};

use crate::config::{ModelKind, RawConfig};
use crate::solve::{solve_any, solve_bs};
use crate::{read_config, render, write_json, CliError, VerifyArgs, EXIT_MISMATCH, EXIT_OK};

/// Standard errors allowed between a Monte Carlo estimate and its target.
pub const MC_Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub model: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn reported<T: Scalar>(v: &Value) -> T {
    v.exact
        .as_deref()
        .and_then(T::parse_decimal)
        .unwrap_or_else(|| T::from_f64_lossy(v.value))
}

fn same<T: Scalar>(a: &T, b: &T) -> bool {
    if T::is_exact() {
        a == b
    } else {
        let scale = if a.abs() > b.abs() { a.abs() } else { b.abs() };
        (a.clone() - b.clone()).abs() <= scale * T::from_f64_lossy(1e-9) + T::from_f64_lossy(1e-12)
    }
}

pub fn verify_bs(raw: &RawConfig, report: &SolveReport, cfg: &McConfig) -> Result<Vec<Check>, CliError> {
    let spec = raw.bs_problem()?;
    let market = spec.market;
    let x0 = spec.x0;
    let kbar = report
        .modified_strike
        .as_ref()
        .map(|v| v.value)
        .ok_or_else(|| CliError::Usage("report has no modified strike".into()))?;
    let set = PriceSet {
        intervals: report
            .success_intervals
            .iter()
            .map(|i| Interval {
                lo: i.lo,
                hi: i.hi.unwrap_or(f64::INFINITY),
            })
            .collect(),
    };
    let used = report.budget_used.value;
    let prob = report.success_probability.value;
    let mut checks = Vec::new();

    let quad = quadrature_budget(&market, &set, kbar);
    checks.push(check(
        "budget_quadrature",
        (quad - used).abs() <= 1e-6 * x0.max(1.0),
        format!("quadrature {quad}, reported {used}"),
    ));
    checks.push(check("budget_within_x0", quad <= x0 * (1.0 + 1e-6), format!("quadrature {quad}, x0 {x0}")));
    let quad_p = quadrature_probability(&market, &set);
    checks.push(check(
        "probability_quadrature",
        (quad_p - prob).abs() <= 1e-9,
        format!("quadrature {quad_p}, reported {prob}"),
    ));
    let mc = mc_success_probability(&market, &set, cfg)?;
    checks.push(check(
        "probability_monte_carlo",
        mc.z_score(prob) <= MC_Z_LIMIT,
        format!("estimate {} +- {} over {} paths, {:.2} SE", mc.estimate, mc.std_error, mc.paths, mc.z_score(prob)),
    ));
    let mcb = mc_budget(&market, &set, kbar, cfg)?;
    checks.push(check(
        "budget_monte_carlo",
        mcb.z_score(used) <= MC_Z_LIMIT,
        format!("estimate {} +- {}, {:.2} SE", mcb.estimate, mcb.std_error, mcb.z_score(used)),
    ));
    let fresh = solve_bs(raw)?.report.success_probability.value;
    checks.push(check("optimality", (fresh - prob).abs() <= 1e-9, format!("fresh solve {fresh}, reported {prob}")));
    Ok(checks)
}

fn labels_or_fresh(report: &SolveReport, fresh: &SolveReport) -> (Vec<String>, Option<Check>) {
    match &report.success_set {
        Some(set) => (set.clone(), None),
        None => (
            fresh.success_set.clone().unwrap_or_default(),
            Some(check("success_set_listed", false, "report lists no success set".into())),
        ),
    }
}

pub fn verify_crr<T: Scalar>(raw: &RawConfig, report: &SolveReport) -> Result<Vec<Check>, CliError> {
    let spec = raw.crr_problem::<T>()?;
    let market = &spec.market;
    let n = market.periods;
    let paths = crr::enumerate_paths(market, &spec.claim, &spec.loss)?;
    let mut checks = Vec::new();
    let ids: Vec<usize> = match &report.success_set {
        Some(labels) => labels
            .iter()
            .map(|l| crr::path_id(l).filter(|_| l.len() == n).ok_or_else(|| CliError::Usage(format!("`{l}` is not a path of this lattice"))))
            .collect::<Result<_, _>>()?,
        None => {
            // Long lattices omit the path list; fall back to a fresh solve.
            let sol = crr::solve_crr(market, &spec.claim, &spec.loss, &spec.x0)?;
            checks.push(check("success_set_listed", true, "report omits paths; checking a fresh solve".into()));
            sol.success.member_ids
        }
    };
    let modified: Vec<T> = paths
        .iter()
        .map(|p| if ids.contains(&p.id) { p.shifted.clone() } else { T::zero() })
        .collect();
    let plan = crr::replicate(market, &modified)?;
    checks.push(check(
        "affordable",
        fits(&plan.initial_capital, &spec.x0),
        format!("replication cost {}, x0 {}", plan.initial_capital, spec.x0),
    ));
    let wealth = plan.terminal_wealth(market);
    let tol = market.s0.clone() * T::from_f64_lossy(1e-9);
    let worst = wealth
        .iter()
        .zip(&modified)
        .map(|(w, h)| (w.clone() - h.clone()).abs())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    checks.push(check(
        "replication",
        if T::is_exact() { worst.is_zero() } else { worst <= tol },
        format!("largest terminal gap {worst}, self-financing gap {}", plan.self_financing_gap()),
    ));
    let masses: Vec<T> = paths.iter().map(|p| p.p_mass.clone()).collect();
    let payoffs: Vec<T> = paths.iter().map(|p| p.payoff.clone()).collect();
    let slack = if T::is_exact() { T::zero() } else { tol };
    let p = enumerate_check(&masses, &wealth, &payoffs, &spec.loss, &slack)?;
    let claimed: T = reported(&report.success_probability);
    checks.push(check("success_probability", same(&p, &claimed), format!("enumerated {p}, reported {claimed}")));
    let fresh = crr::solve_crr(market, &spec.claim, &spec.loss, &spec.x0)?;
    checks.push(check(
        "optimality",
        same(fresh.probability(), &claimed),
        format!("fresh solve {}, reported {claimed}", fresh.probability()),
    ));
    Ok(checks)
}

pub fn verify_tri<T: Scalar>(raw: &RawConfig, report: &SolveReport) -> Result<Vec<Check>, CliError> {
    let spec = raw.tri_problem::<T>()?;
    let market = &spec.market;
    let prices = market.terminal_prices();
    let claim: [T; 3] = std::array::from_fn(|i| spec.claim.payoff(i, &prices[i]));
    let fresh = trinomial::solve_trinomial(market, &claim, &spec.loss, &spec.x0)?;
    let fresh_report = SolveReport::from_trinomial(market, &claim, &spec.x0, &fresh, None);
    let (labels, missing) = labels_or_fresh(report, &fresh_report);
    let mut checks: Vec<Check> = missing.into_iter().collect();
    let mut in_set = [false; 3];
    for l in &labels {
        let i = match l.as_str() {
            "omega1" => 0,
            "omega2" => 1,
            "omega3" => 2,
            other => return Err(CliError::Usage(format!("`{other}` is not an outcome of the trinomial model"))),
        };
        in_set[i] = true;
    }
    let modified: [T; 3] = std::array::from_fn(|i| if in_set[i] { spec.loss.shifted(&claim[i]) } else { T::zero() });
    let hedge = trinomial::superhedge(market, &modified);
    checks.push(check(
        "affordable",
        fits(&hedge.capital, &spec.x0),
        format!("superhedging cost {}, x0 {}", hedge.capital, spec.x0),
    ));
    let wealth = hedge.terminal_wealth(market);
    checks.push(check(
        "superhedge",
        wealth.iter().zip(&modified).all(|(w, h)| fits(h, w)),
        format!("terminal wealth {:?}", wealth.iter().map(|w| w.to_string()).collect::<Vec<_>>()),
    ));
    let p = enumerate_check(&market.p, &wealth, &claim, &spec.loss, &T::zero())?;
    let claimed: T = reported(&report.success_probability);
    checks.push(check("success_probability", same(&p, &claimed), format!("enumerated {p}, reported {claimed}")));
    checks.push(check(
        "optimality",
        same(&fresh.success.probability, &claimed),
        format!("fresh solve {}, reported {claimed}", fresh.success.probability),
    ));
    if market.b > T::zero() {
        let table = trinomial::decision_table_b_positive(market, &claim, &spec.loss, &spec.x0)?;
        checks.push(check(
            "case_table",
            same(&table.success.probability, &fresh.success.probability),
            format!("{:?} gives {}", table.branch, table.success.probability),
        ));
    }
    Ok(checks)
}

pub fn verify(raw: &RawConfig, report: &SolveReport, rational: bool, cfg: &McConfig) -> Result<VerifyReport, CliError> {
    let kind = raw.model()?;
    let expected = match kind {
        ModelKind::Bs => Model::BlackScholes,
        ModelKind::Crr => Model::Crr,
        ModelKind::Tri => Model::Trinomial,
    };
    if report.model != expected {
        return Err(CliError::Usage(format!("the report is for a different model than the {} config", kind.name())));
    }
    let exact = rational || report.arithmetic == "rational";
    let checks = match (kind, exact) {
        (ModelKind::Bs, _) => verify_bs(raw, report, cfg)?,
        (ModelKind::Crr, false) => verify_crr::<f64>(raw, report)?,
        (ModelKind::Crr, true) => verify_crr::<Exact>(raw, report)?,
        (ModelKind::Tri, false) => verify_tri::<f64>(raw, report)?,
        (ModelKind::Tri, true) => verify_tri::<Exact>(raw, report)?,
    };
    Ok(VerifyReport {
        model: kind.name().into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

pub fn run_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let raw = read_config(&args.solve.config)?;
    if args.solve.rational && raw.model()? == ModelKind::Bs {
        return Err(Error::Capability("the Black-Scholes solver runs in floating point only".into()).into());
    }
    let report = match &args.report {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SolveReport>(&text).map_err(|e| CliError::Io(format!("{} is not a report: {e}", path.display())))?
        }
        None => solve_any(&raw, args.solve.rational)?.report,
    };
    let cfg = McConfig {
        paths: args.paths,
        seed: args.seed,
        ..McConfig::default()
    };
    let result = verify(&raw, &report, args.solve.rational, &cfg)?;
    write!(out, "{}", render::verification(&result)).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = &args.solve.json {
        write_json(path, &result)?;
    }
    Ok(if result.passed { EXIT_OK } else { EXIT_MISMATCH })
}
