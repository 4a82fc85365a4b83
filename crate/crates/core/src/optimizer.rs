//! Success-set search over finitely many outcomes.
//!
//! Every discrete model reduces to the same problem: choose a set of atoms
//! maximizing objective probability while each constraint measure of the
//! set stays within its budget. This is a multi-constraint 0/1 knapsack.
//! Small tables are enumerated exhaustively, larger ones go through a
//! branch-and-bound over classes of interchangeable atoms.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{approx_eq, definitely_less, fits, Scalar};

/// Tables up to this size are enumerated subset by subset.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub id: usize,
    /// Objective probability mass.
    pub p: T,
    /// One cost per constraint measure.
    pub costs: Vec<T>,
}

impl<T: Scalar> Atom<T> {
    pub fn new(id: usize, p: T, costs: Vec<T>) -> Self {
        Self { id, p, costs }
    }

    fn is_free(&self) -> bool {
        self.costs.iter().all(|c| c.is_zero())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomTable<T> {
    atoms: Vec<Atom<T>>,
    constraints: usize,
}

impl<T: Scalar> AtomTable<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let constraints = atoms.first().map_or(1, |a| a.costs.len());
        let mut ids: Vec<usize> = atoms.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("atom ids must be unique".into()));
        }
        let mut total = T::zero();
        for atom in &atoms {
            if atom.p <= T::zero() {
                return Err(Error::Domain(format!("atom {} has nonpositive probability {}", atom.id, atom.p)));
            }
            if atom.costs.len() != constraints {
                return Err(Error::Domain(format!(
                    "atom {} has {} costs, expected {constraints}",
                    atom.id,
                    atom.costs.len()
                )));
            }
            if let Some(c) = atom.costs.iter().find(|c| **c < T::zero()) {
                return Err(Error::Domain(format!("atom {} has negative cost {c}", atom.id)));
            }
            total = total + atom.p.clone();
        }
        if !fits(&total, &T::one()) {
            return Err(Error::Domain(format!("atom probabilities sum to {total} > 1")));
        }
        Ok(Self { atoms, constraints })
    }

    /// Single-constraint table from parallel probability and cost vectors.
    pub fn from_vectors(p: Vec<T>, costs: Vec<T>) -> Result<Self> {
        if p.len() != costs.len() {
            return Err(Error::Domain("probability and cost vectors differ in length".into()));
        }
        Self::new(
            p.into_iter()
                .zip(costs)
                .enumerate()
                .map(|(id, (p, c))| Atom::new(id, p, vec![c]))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn constraints(&self) -> usize {
        self.constraints
    }

    /// Probability and costs of an arbitrary id set.
    pub fn measure(&self, ids: &[usize]) -> (T, Vec<T>) {
        let mut p = T::zero();
        let mut costs = vec![T::zero(); self.constraints];
        let wanted: std::collections::HashSet<usize> = ids.iter().copied().collect();
        for atom in self.atoms.iter().filter(|a| wanted.contains(&a.id)) {
            p = p + atom.p.clone();
            for (acc, c) in costs.iter_mut().zip(&atom.costs) {
                *acc = acc.clone() + c.clone();
            }
        }
        (p, costs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Certificate {
    ExhaustiveOptimal,
    BranchBoundOptimal,
    MonotoneGreedy,
    NaiveDiagnostic,
    /// The budget covers every atom.
    FullHedge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessSet<T> {
    pub member_ids: Vec<usize>,
    pub probability: T,
    pub costs_used: Vec<T>,
    pub certificate: Certificate,
}

impl<T: Scalar> SuccessSet<T> {
    pub fn contains(&self, id: usize) -> bool {
        self.member_ids.binary_search(&id).is_ok()
    }

    pub fn from_ids(table: &AtomTable<T>, mut ids: Vec<usize>, certificate: Certificate) -> Self {
        ids.sort_unstable();
        let (probability, costs_used) = table.measure(&ids);
        Self {
            member_ids: ids,
            probability,
            costs_used,
            certificate,
        }
    }
}

fn check_budgets<T: Scalar>(table: &AtomTable<T>, budgets: &[T]) -> Result<()> {
    if budgets.len() != table.constraints() {
        return Err(Error::Domain(format!(
            "{} budgets given for {} constraints",
            budgets.len(),
            table.constraints()
        )));
    }
    if let Some(b) = budgets.iter().find(|b| **b < T::zero()) {
        return Err(Error::Domain(format!("budget must be nonnegative, got {b}")));
    }
    Ok(())
}

fn total<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, v| acc + v.clone())
}

/// Tie-break order: larger probability, then smaller total cost, then the
/// lexicographically smaller sorted id list.
fn compare_candidates<T: Scalar>(a: (&T, &T, &[usize]), b: (&T, &T, &[usize])) -> Ordering {
    if definitely_less(b.0, a.0) {
        return Ordering::Less;
    }
    if definitely_less(a.0, b.0) {
        return Ordering::Greater;
    }
    if definitely_less(a.1, b.1) {
        return Ordering::Less;
    }
    if definitely_less(b.1, a.1) {
        return Ordering::Greater;
    }
    a.2.cmp(b.2)
}

/// Atoms that are always selected, and those that could fit at all.
fn partition<'a, T: Scalar>(table: &'a AtomTable<T>, budgets: &[T]) -> (Vec<usize>, Vec<&'a Atom<T>>) {
    let mut forced = Vec::new();
    let mut open = Vec::new();
    for atom in table.atoms() {
        if atom.is_free() {
            forced.push(atom.id);
        } else if atom.costs.iter().zip(budgets).all(|(c, b)| fits(c, b)) {
            open.push(atom);
        }
    }
    (forced, open)
}

struct Enumeration<'a, T> {
    open: &'a [&'a Atom<T>],
    budgets: &'a [T],
    chosen: Vec<usize>,
    /// Best probability seen so far with every set reaching it.
    best_p: Option<T>,
    optima: Vec<(T, T, Vec<usize>)>,
    keep_all: bool,
}

impl<'a, T: Scalar> Enumeration<'a, T> {
    fn visit(&mut self, index: usize, p: T, costs: Vec<T>) {
        if index == self.open.len() {
            self.record(p, &costs);
            return;
        }
        let atom = self.open[index];
        let with: Vec<T> = costs.iter().zip(&atom.costs).map(|(a, c)| a.clone() + c.clone()).collect();
        if with.iter().zip(self.budgets).all(|(c, b)| fits(c, b)) {
            self.chosen.push(atom.id);
            self.visit(index + 1, p.clone() + atom.p.clone(), with);
            self.chosen.pop();
        }
        self.visit(index + 1, p, costs);
    }

    fn record(&mut self, p: T, costs: &[T]) {
        let mut ids = self.chosen.clone();
        ids.sort_unstable();
        let cost = total(costs);
        match &self.best_p {
            Some(best) if definitely_less(&p, best) => {}
            Some(best) if approx_eq(&p, best) => {
                if self.keep_all {
                    self.optima.push((p, cost, ids));
                } else {
                    let current = &self.optima[0];
                    if compare_candidates((&p, &cost, &ids), (&current.0, &current.1, &current.2)) == Ordering::Less {
                        self.optima[0] = (p, cost, ids);
                    }
                }
            }
            _ => {
                self.best_p = Some(p.clone());
                self.optima.retain(|o| approx_eq(&o.0, &p));
                if self.keep_all {
                    self.optima.push((p, cost, ids));
                } else {
                    self.optima = vec![(p, cost, ids)];
                }
            }
        }
    }
}

fn enumerate<T: Scalar>(table: &AtomTable<T>, budgets: &[T], keep_all: bool) -> Vec<Vec<usize>> {
    let (forced, open) = partition(table, budgets);
    let mut search = Enumeration {
        open: &open,
        budgets,
        chosen: forced,
        best_p: None,
        optima: Vec::new(),
        keep_all,
    };
    search.visit(0, T::zero(), vec![T::zero(); table.constraints()]);
    let best = search.best_p.clone();
    let mut optima: Vec<Vec<usize>> = search
        .optima
        .into_iter()
        .filter(|o| best.as_ref().is_none_or(|b| approx_eq(&o.0, b)))
        .map(|o| o.2)
        .collect();
    optima.sort();
    optima.dedup();
    optima
}

/// Interchangeable atoms: identical probability and costs.
struct AtomClass<T> {
    ids: Vec<usize>,
    p: T,
    costs: Vec<T>,
}

fn group_classes<T: Scalar>(open: &[&Atom<T>]) -> Vec<AtomClass<T>> {
    let mut sorted: Vec<&Atom<T>> = open.to_vec();
    sorted.sort_by(|a, b| {
        a.p.partial_cmp(&b.p)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                a.costs
                    .iter()
                    .zip(&b.costs)
                    .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
            .then(a.id.cmp(&b.id))
    });
    let mut classes: Vec<AtomClass<T>> = Vec::new();
    for atom in sorted {
        match classes.last_mut() {
            Some(last) if last.p == atom.p && last.costs == atom.costs => last.ids.push(atom.id),
            _ => classes.push(AtomClass {
                ids: vec![atom.id],
                p: atom.p.clone(),
                costs: atom.costs.clone(),
            }),
        }
    }
    for class in &mut classes {
        class.ids.sort_unstable();
    }
    classes
}

/// Largest `count <= limit` with `count * cost` within `budget`.
pub(crate) fn max_count_fitting<T: Scalar>(cost: &T, budget: &T, limit: usize) -> usize {
    if cost.is_zero() {
        return limit;
    }
    if !fits(cost, budget) {
        return 0;
    }
    let guess = (budget.to_f64_lossy() / cost.to_f64_lossy()).floor();
    let mut count = if guess.is_finite() && guess >= 0.0 {
        (guess as usize).min(limit)
    } else {
        limit
    };
    let scaled = |n: usize| cost.clone() * T::from_usize(n).expect("count fits the scalar type");
    while count < limit && fits(&scaled(count + 1), budget) {
        count += 1;
    }
    while count > 0 && !fits(&scaled(count), budget) {
        count -= 1;
    }
    count
}

fn efficiency_order<T: Scalar>(classes: &[AtomClass<T>], j: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..classes.len()).collect();
    // p_a / c_a > p_b / c_b  <=>  p_a c_b > p_b c_a, with zero costs first.
    order.sort_by(|&a, &b| {
        let lhs = classes[a].p.clone() * classes[b].costs[j].clone();
        let rhs = classes[b].p.clone() * classes[a].costs[j].clone();
        rhs.partial_cmp(&lhs).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    order
}

struct BranchBound<'a, T> {
    classes: &'a [AtomClass<T>],
    /// Per constraint, class indices by decreasing efficiency.
    orders: Vec<Vec<usize>>,
    counts: Vec<usize>,
    best_p: Option<T>,
    best: Option<(T, T, Vec<usize>)>,
    all_counts: Vec<(T, Vec<usize>)>,
    keep_all: bool,
}

impl<'a, T: Scalar> BranchBound<'a, T> {
    /// Fractional-relaxation bound on the probability still obtainable from
    /// classes `depth..`, taken as the tightest single-constraint bound.
    fn bound(&self, depth: usize, remaining: &[T]) -> T {
        let mut best: Option<T> = None;
        for (j, order) in self.orders.iter().enumerate() {
            let mut cap = remaining[j].clone();
            let mut gain = T::zero();
            for &idx in order.iter().filter(|&&idx| idx >= depth) {
                let class = &self.classes[idx];
                let size = T::from_usize(class.ids.len()).expect("class size fits the scalar type");
                let cost = class.costs[j].clone() * size.clone();
                let mass = class.p.clone() * size;
                if cost <= cap {
                    cap = cap - cost;
                    gain = gain + mass;
                } else {
                    if cap > T::zero() {
                        gain = gain + mass * cap.clone() / cost;
                    }
                    break;
                }
            }
            best = Some(match best {
                Some(b) if b <= gain => b,
                _ => gain,
            });
        }
        best.unwrap_or_else(T::zero)
    }

    fn visit(&mut self, depth: usize, p: T, remaining: Vec<T>) {
        if depth == self.classes.len() {
            self.record(p);
            return;
        }
        if let Some(best) = &self.best_p {
            let bound = p.clone() + self.bound(depth, &remaining);
            if definitely_less(&bound, best) {
                return;
            }
        }
        let class = &self.classes[depth];
        let limit = class
            .costs
            .iter()
            .zip(&remaining)
            .map(|(c, r)| max_count_fitting(c, r, class.ids.len()))
            .min()
            .unwrap_or(class.ids.len());
        let single = self.orders.len() == 1;
        for count in (0..=limit).rev() {
            let n = T::from_usize(count).expect("count fits the scalar type");
            let rest: Vec<T> = remaining
                .iter()
                .zip(&class.costs)
                .map(|(r, c)| r.clone() - c.clone() * n.clone())
                .collect();
            let next_p = p.clone() + class.p.clone() * n;
            if let Some(best) = &self.best_p {
                let bound = next_p.clone() + self.bound(depth + 1, &rest);
                if definitely_less(&bound, best) {
                    // With one constraint the bound only shrinks as the count drops.
                    if single {
                        break;
                    }
                    continue;
                }
            }
            self.counts[depth] = count;
            self.visit(depth + 1, next_p, rest);
        }
        self.counts[depth] = 0;
    }

    fn ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .classes
            .iter()
            .zip(&self.counts)
            .flat_map(|(class, &count)| class.ids[..count].iter().copied())
            .collect();
        ids.sort_unstable();
        ids
    }

    fn record(&mut self, p: T) {
        let cost = self
            .classes
            .iter()
            .zip(&self.counts)
            .fold(T::zero(), |acc, (class, &count)| {
                acc + total(&class.costs) * T::from_usize(count).expect("count fits the scalar type")
            });
        let improves = match &self.best_p {
            None => true,
            Some(best) => !definitely_less(&p, best),
        };
        if !improves {
            return;
        }
        if self.best_p.as_ref().is_none_or(|best| definitely_less(best, &p)) {
            self.best_p = Some(p.clone());
            let kept = p.clone();
            self.all_counts.retain(|(q, _)| approx_eq(q, &kept));
        }
        if self.keep_all {
            self.all_counts.push((p.clone(), self.counts.clone()));
        }
        let ids = self.ids();
        let replace = match &self.best {
            None => true,
            Some((bp, bc, bids)) => compare_candidates((&p, &cost, &ids), (bp, bc, bids)) == Ordering::Less,
        };
        if replace {
            self.best = Some((p, cost, ids));
        }
    }
}

fn branch_and_bound<'a, T: Scalar>(
    classes: &'a [AtomClass<T>],
    budgets: &[T],
    keep_all: bool,
) -> BranchBound<'a, T> {
    let constraints = budgets.len();
    let mut search = BranchBound {
        classes,
        orders: (0..constraints).map(|j| efficiency_order(classes, j)).collect(),
        counts: vec![0; classes.len()],
        best_p: None,
        best: None,
        all_counts: Vec::new(),
        keep_all,
    };
    search.visit(0, T::zero(), budgets.to_vec());
    search
}

fn sort_classes_for_search<T: Scalar>(mut classes: Vec<AtomClass<T>>) -> Vec<AtomClass<T>> {
    let order = efficiency_order(&classes, 0);
    let mut slots: Vec<Option<AtomClass<T>>> = classes.drain(..).map(Some).collect();
    order.into_iter().filter_map(|i| slots[i].take()).collect()
}

/// Maximizes `P(A)` subject to every cost constraint of `A` within its budget.
///
/// Atoms with zero cost are always included. Ties in probability go to the
/// smaller total cost, then to the lexicographically smaller id list.
pub fn solve_exact<T: Scalar>(table: &AtomTable<T>, budgets: &[T]) -> Result<SuccessSet<T>> {
    check_budgets(table, budgets)?;
    if table.is_empty() {
        return Ok(SuccessSet {
            member_ids: Vec::new(),
            probability: T::zero(),
            costs_used: vec![T::zero(); table.constraints()],
            certificate: Certificate::ExhaustiveOptimal,
        });
    }
    if table.len() <= EXHAUSTIVE_LIMIT {
        let best = enumerate(table, budgets, false);
        let ids = best.into_iter().next().unwrap_or_default();
        return Ok(SuccessSet::from_ids(table, ids, Certificate::ExhaustiveOptimal));
    }
    let (forced, open) = partition(table, budgets);
    let classes = sort_classes_for_search(group_classes(&open));
    let search = branch_and_bound(&classes, budgets, false);
    let mut ids = forced;
    if let Some((_, _, chosen)) = search.best {
        ids.extend(chosen);
    }
    Ok(SuccessSet::from_ids(table, ids, Certificate::BranchBoundOptimal))
}

/// Every subset reaching the optimal probability, sorted lexicographically.
pub fn solve_exact_all<T: Scalar>(table: &AtomTable<T>, budgets: &[T]) -> Result<Vec<SuccessSet<T>>> {
    check_budgets(table, budgets)?;
    if table.len() > EXHAUSTIVE_LIMIT {
        return Err(Error::Capability(format!(
            "listing all optimal sets needs at most {EXHAUSTIVE_LIMIT} atoms, table has {}",
            table.len()
        )));
    }
    Ok(enumerate(table, budgets, true)
        .into_iter()
        .map(|ids| SuccessSet::from_ids(table, ids, Certificate::ExhaustiveOptimal))
        .collect())
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Number of distinct optimal sets. Works beyond the enumeration limit by
/// counting selections inside classes of interchangeable atoms. `None` when
/// the count overflows `u64`.
pub fn count_optimal_sets<T: Scalar>(table: &AtomTable<T>, budgets: &[T]) -> Result<Option<u64>> {
    check_budgets(table, budgets)?;
    if table.len() <= EXHAUSTIVE_LIMIT {
        return Ok(Some(solve_exact_all(table, budgets)?.len() as u64));
    }
    let (_, open) = partition(table, budgets);
    let classes = sort_classes_for_search(group_classes(&open));
    let search = branch_and_bound(&classes, budgets, true);
    let best = search.best_p.clone();
    let mut seen: Vec<&Vec<usize>> = Vec::new();
    let mut count = BigUint::zero();
    for (p, counts) in &search.all_counts {
        if best.as_ref().is_some_and(|b| !approx_eq(p, b)) || seen.contains(&counts) {
            continue;
        }
        seen.push(counts);
        count += classes
            .iter()
            .zip(counts)
            .fold(BigUint::from(1u32), |acc, (class, &c)| acc * binomial(class.ids.len(), c));
    }
    Ok(count.to_u64())
}

/// Maximal prefix of a table sorted by nonincreasing probability and
/// nondecreasing cost. Under that ordering the prefix is optimal among all
/// subsets within the budget.
pub fn solve_monotone_greedy<T: Scalar>(table: &AtomTable<T>, budget: &T) -> Result<SuccessSet<T>> {
    if table.constraints() != 1 {
        return Err(Error::Precondition("monotone greedy needs exactly one constraint".into()));
    }
    check_budgets(table, std::slice::from_ref(budget))?;
    for (i, pair) in table.atoms().windows(2).enumerate() {
        if definitely_less(&pair[0].p, &pair[1].p) {
            return Err(Error::Precondition(format!("probabilities increase at position {}", i + 1)));
        }
        if definitely_less(&pair[1].costs[0], &pair[0].costs[0]) {
            return Err(Error::Precondition(format!("costs decrease at position {}", i + 1)));
        }
    }
    let mut spent = T::zero();
    let mut ids = Vec::new();
    for atom in table.atoms() {
        let next = spent.clone() + atom.costs[0].clone();
        if !fits(&next, budget) {
            break;
        }
        spent = next;
        ids.push(atom.id);
    }
    Ok(SuccessSet::from_ids(table, ids, Certificate::MonotoneGreedy))
}

/// Groups atom indices into levels of equal `weight / cost`, highest first.
/// Zero-cost atoms form the top level.
fn ratio_levels<T: Scalar>(weights: &[T], costs: &[T]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let cmp = |a: usize, b: usize| -> Ordering {
        match (costs[a].is_zero(), costs[b].is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => {
                let lhs = weights[a].clone() * costs[b].clone();
                let rhs = weights[b].clone() * costs[a].clone();
                rhs.partial_cmp(&lhs).unwrap_or(Ordering::Equal)
            }
        }
    };
    order.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
    let mut levels: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match levels.last_mut() {
            Some(level) if cmp(level[0], idx) == Ordering::Equal => level.push(idx),
            _ => levels.push(vec![idx]),
        }
    }
    levels
}

/// Level-set construction `{dP/dQ >= a * H}` with the smallest level whose
/// set fits the budget. Not optimal on discrete outcome spaces; kept as a
/// diagnostic next to [`solve_exact`].
pub fn solve_naive_ratio<T: Scalar>(table: &AtomTable<T>, budget: &T) -> Result<SuccessSet<T>> {
    if table.constraints() != 1 {
        return Err(Error::Precondition("naive level set needs exactly one constraint".into()));
    }
    check_budgets(table, std::slice::from_ref(budget))?;
    let weights: Vec<T> = table.atoms().iter().map(|a| a.p.clone()).collect();
    let costs: Vec<T> = table.atoms().iter().map(|a| a.costs[0].clone()).collect();
    let mut spent = T::zero();
    let mut ids = Vec::new();
    for level in ratio_levels(&weights, &costs) {
        let next = level.iter().fold(spent.clone(), |acc, &i| acc + costs[i].clone());
        if !fits(&next, budget) {
            break;
        }
        spent = next;
        ids.extend(level.iter().map(|&i| table.atoms()[i].id));
    }
    Ok(SuccessSet::from_ids(table, ids, Certificate::NaiveDiagnostic))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeymanPearsonLevel<T> {
    /// Threshold on the density ratio; `None` stands for `+inf` (empty set).
    pub beta: Option<T>,
    /// Indices of atoms with ratio `>= beta`.
    pub members: Vec<usize>,
    pub mass: T,
    /// The level set is provably optimal: its mass hits `gamma` exactly or
    /// it already contains every atom.
    pub certified: bool,
}

/// Smallest ratio level `beta` with `P2{ratio >= beta} <= gamma`.
pub fn neyman_pearson_threshold<T: Scalar>(density_ratio: &[T], constraint_measure: &[T], gamma: &T) -> Result<NeymanPearsonLevel<T>> {
    if density_ratio.len() != constraint_measure.len() {
        return Err(Error::Domain("ratio and measure vectors differ in length".into()));
    }
    // Ratio levels are ordered by the ratio itself: use unit costs.
    let ones = vec![T::one(); density_ratio.len()];
    let mut members = Vec::new();
    let mut mass = T::zero();
    let mut beta = None;
    for level in ratio_levels(density_ratio, &ones) {
        let next = level.iter().fold(mass.clone(), |acc, &i| acc + constraint_measure[i].clone());
        if !fits(&next, gamma) {
            break;
        }
        mass = next;
        beta = Some(density_ratio[level[0]].clone());
        members.extend(level);
    }
    members.sort_unstable();
    let certified = approx_eq(&mass, gamma) || members.len() == density_ratio.len();
    Ok(NeymanPearsonLevel {
        beta,
        members,
        mass,
        certified,
    })
}
