//! Exact policy evaluation under the discounted and total-reward objectives,
//! value iteration, greedy extraction, and the brute-force enumeration oracle.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chain::policy_matrix;
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, Matrix};
use crate::mdp::Mdp;
use crate::policy::{enumerate_policies, DeterministicPolicy};

/// Codomain of total-reward evaluation: a real number, a diverging sum of
/// definite sign, or an oscillating sum with no principled value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    MinusInf,
    Finite(f64),
    PlusInf,
    Undefined,
}

impl ExtendedValue {
    pub fn is_defined(&self) -> bool {
        !matches!(self, ExtendedValue::Undefined)
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            ExtendedValue::Finite(x) => Some(*x),
            _ => None,
        }
    }

    /// Total order on defined values; `None` if either side is undefined.
    pub fn cmp_defined(&self, other: &ExtendedValue) -> Option<Ordering> {
        use ExtendedValue::*;
        match (self, other) {
            (Undefined, _) | (_, Undefined) => None,
            (MinusInf, MinusInf) | (PlusInf, PlusInf) => Some(Ordering::Equal),
            (MinusInf, _) => Some(Ordering::Less),
            (_, MinusInf) => Some(Ordering::Greater),
            (PlusInf, _) => Some(Ordering::Greater),
            (_, PlusInf) => Some(Ordering::Less),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }

    /// `self >= other - tol`, for tolerant argmax membership. Infinite values
    /// compare exactly; only finite-vs-finite uses the tolerance.
    fn ge_within(&self, other: &ExtendedValue, tol: f64) -> bool {
        use ExtendedValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => *a >= *b - tol,
            _ => !matches!(self.cmp_defined(other), Some(Ordering::Less) | None),
        }
    }

    fn le_within(&self, other: &ExtendedValue, tol: f64) -> bool {
        use ExtendedValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => *a <= *b + tol,
            _ => !matches!(self.cmp_defined(other), Some(Ordering::Greater) | None),
        }
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.cmp_defined(other)
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(x) => write!(f, "{x}"),
            ExtendedValue::PlusInf => write!(f, "+inf"),
            ExtendedValue::MinusInf => write!(f, "-inf"),
            ExtendedValue::Undefined => write!(f, "undefined"),
        }
    }
}

impl Serialize for ExtendedValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedValue::Finite(x) => s.serialize_f64(*x),
            ExtendedValue::PlusInf => s.serialize_str("+inf"),
            ExtendedValue::MinusInf => s.serialize_str("-inf"),
            ExtendedValue::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ExtendedValue;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or one of \"+inf\", \"-inf\", \"undefined\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<ExtendedValue, E> {
                Ok(ExtendedValue::Finite(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<ExtendedValue, E> {
                Ok(ExtendedValue::Finite(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<ExtendedValue, E> {
                Ok(ExtendedValue::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<ExtendedValue, E> {
                match s {
                    "+inf" => Ok(ExtendedValue::PlusInf),
                    "-inf" => Ok(ExtendedValue::MinusInf),
                    "undefined" => Ok(ExtendedValue::Undefined),
                    other => Err(E::custom(format!("unknown extended value {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// A state-action value table together with the discount that produced it.
/// Terminal rows hold the terminal state value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    /// `q[s][a]` over the full state set.
    pub q: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl QTable {
    pub fn state_max(&self, s: usize) -> f64 {
        self.q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which objective a policy-set report ranks policies by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Discounted,
    Total,
}

/// Outcome of evaluating every deterministic policy under one objective.
///
/// A policy is in `argmax` only if it attains the per-state maximum at every
/// non-terminal state simultaneously; `argmin` likewise. When no policy
/// dominates uniformly, the corresponding flag is set and the per-state
/// optimizer sets (indices into `policies`) are reported instead. Policies
/// with an undefined value at some non-terminal state are excluded from the
/// ordering and listed in `undefined_policies`.
#[derive(Debug, Clone, Serialize)]
pub struct PolicySetReport {
    pub objective: Objective,
    pub argmax: Vec<DeterministicPolicy>,
    pub argmin: Vec<DeterministicPolicy>,
    /// Every enumerated policy, in lexicographic order.
    pub policies: Vec<DeterministicPolicy>,
    /// `values[i][s]` is the state value of `policies[i]` at state `s`.
    pub values: Vec<Vec<ExtendedValue>>,
    pub undefined_policies: Vec<DeterministicPolicy>,
    pub no_uniform_argmax: bool,
    pub no_uniform_argmin: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_state_argmax: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_state_argmin: Option<Vec<Vec<usize>>>,
}

/// Tolerance for treating two finite state values as tied: exact solver
/// output is accurate to machine precision, so this only absorbs rounding.
fn tie_tol(reference: f64) -> f64 {
    1e-9 * reference.abs().max(1.0)
}

/// Exact discounted state values of `pi`: the solution of
/// `(I - gamma P^pi) V = r^pi` by direct linear solve. Terminal states take
/// the value `C` exactly.
pub fn eval_discounted(mdp: &Mdp, pi: &DeterministicPolicy) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    let interior = mdp.nonterminal();
    let m = interior.len();
    let gamma = mdp.gamma();
    let c = mdp.terminal_value();
    let p = policy_matrix(mdp, pi);

    // Terminal values are pinned at C; solve the non-terminal block of
    // (I - gamma P) V = r with the terminal contribution moved to the RHS.
    let mut a = Matrix::zeros(m, m);
    let mut b = vec![0.0; m];
    for (i, &s) in interior.iter().enumerate() {
        let act = pi.action_for(mdp, s).expect("non-terminal");
        let prow = p.row(s);
        let rrow = mdp.reward_row(s, act);
        let mut rhs: f64 = prow.iter().zip(rrow).map(|(pp, rr)| pp * rr).sum();
        for s2 in 0..n {
            let pr = prow[s2];
            if pr == 0.0 {
                continue;
            }
            match mdp.nonterminal_pos(s2) {
                Some(j) => {
                    let cur = a.get(i, j);
                    a.set(i, j, cur - gamma * pr);
                }
                None => rhs += gamma * pr * c,
            }
        }
        let cur = a.get(i, i);
        a.set(i, i, cur + 1.0);
        b[i] = rhs;
    }
    let v_interior = lu_solve(&a, &b, "eval_discounted")?;
    let mut v = vec![c; n];
    for (i, &s) in interior.iter().enumerate() {
        v[s] = v_interior[i];
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClassKind {
    /// A terminal state's self-loop.
    Terminal,
    /// Closed interior class whose transition rewards are all exactly zero.
    Neutral,
    /// Closed interior class with positive stationary mean reward.
    Positive,
    /// Closed interior class with negative stationary mean reward.
    Negative,
    /// Closed interior class with zero mean but non-zero rewards: partial
    /// sums oscillate and the total reward has no principled value.
    Oscillating,
}

/// Strongly connected components by Kosaraju's algorithm (iterative).
/// Returns `(component id per node, component count)`.
fn strongly_connected_components(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut radj = vec![Vec::new(); n];
    for (u, out) in adj.iter().enumerate() {
        for &v in out {
            radj[v].push(u);
        }
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (node, ref mut edge)) = stack.last_mut() {
            if *edge < adj[node].len() {
                let next = adj[node][*edge];
                *edge += 1;
                if !visited[next] {
                    visited[next] = true;
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let mut stack = vec![root];
        comp[root] = count;
        while let Some(u) = stack.pop() {
            for &v in &radj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// Exact total-reward state values of `pi`.
///
/// Rewards are counted up to absorption only: terminal self-loop rewards are
/// excluded, and terminal states evaluate to zero. States absorbed with
/// probability one get a finite value from the fundamental-matrix solve over
/// the transient block. A state that can reach a closed class inside the
/// non-terminal set diverges to `PlusInf` (every reachable class has positive
/// stationary mean reward) or `MinusInf` (all negative); mixed signs or a
/// zero-mean class with non-zero rewards give `Undefined`. Closed classes
/// whose rewards are all exactly zero contribute zero and force nothing.
pub fn eval_total(mdp: &Mdp, pi: &DeterministicPolicy) -> Result<Vec<ExtendedValue>> {
    let n = mdp.n_states();
    let p = policy_matrix(mdp, pi);
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|s| (0..n).filter(|&t| p.get(s, t) > 0.0).collect())
        .collect();

    let (comp, n_comp) = strongly_connected_components(&adj);
    let mut members = vec![Vec::new(); n_comp];
    for s in 0..n {
        members[comp[s]].push(s);
    }
    let mut closed = vec![true; n_comp];
    for s in 0..n {
        for &t in &adj[s] {
            if comp[t] != comp[s] {
                closed[comp[s]] = false;
            }
        }
    }

    // Expected one-step reward under the policy; zero at terminal states by
    // the exclusion convention.
    let mut r_pi = vec![0.0; n];
    for &s in mdp.nonterminal() {
        let act = pi.action_for(mdp, s).expect("non-terminal");
        r_pi[s] = p
            .row(s)
            .iter()
            .zip(mdp.reward_row(s, act))
            .map(|(pp, rr)| pp * rr)
            .sum();
    }

    let mut kind = vec![None; n_comp];
    for c in 0..n_comp {
        if !closed[c] {
            continue;
        }
        let states = &members[c];
        if states.iter().any(|&s| mdp.is_terminal(s)) {
            kind[c] = Some(ClassKind::Terminal);
            continue;
        }
        let mut all_zero = true;
        let mut max_abs: f64 = 0.0;
        for &s in states {
            let act = pi.action_for(mdp, s).expect("non-terminal");
            for &t in &adj[s] {
                let r = mdp.reward(s, act, t);
                max_abs = max_abs.max(r.abs());
                if r != 0.0 {
                    all_zero = false;
                }
            }
        }
        if all_zero {
            kind[c] = Some(ClassKind::Neutral);
            continue;
        }
        let mean = stationary_mean(&p, states, &r_pi)?;
        let tol = 1e-12 * max_abs.max(1.0);
        kind[c] = Some(if mean > tol {
            ClassKind::Positive
        } else if mean < -tol {
            ClassKind::Negative
        } else {
            ClassKind::Oscillating
        });
    }

    // Which closed classes each state can reach.
    let mut out = vec![ExtendedValue::Undefined; n];
    let mut finite_flag = vec![false; n];
    for s in 0..n {
        let mut seen = vec![false; n];
        let mut stack = vec![s];
        seen[s] = true;
        let (mut pos, mut neg, mut osc) = (false, false, false);
        while let Some(u) = stack.pop() {
            if closed[comp[u]] {
                match kind[comp[u]].expect("closed class classified") {
                    ClassKind::Positive => pos = true,
                    ClassKind::Negative => neg = true,
                    ClassKind::Oscillating => osc = true,
                    ClassKind::Terminal | ClassKind::Neutral => {}
                }
            }
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        out[s] = match (pos, neg, osc) {
            (_, _, true) => ExtendedValue::Undefined,
            (true, true, _) => ExtendedValue::Undefined,
            (true, false, false) => ExtendedValue::PlusInf,
            (false, true, false) => ExtendedValue::MinusInf,
            (false, false, false) => {
                finite_flag[s] = true;
                ExtendedValue::Finite(0.0)
            }
        };
    }

    // Finite values: states inside terminal or neutral classes are exactly
    // zero; the remaining finite states are transient, and their values solve
    // (I - P_TT) V = r over the transient block with zero continuation at
    // every closed class.
    let transient: Vec<usize> = (0..n)
        .filter(|&s| finite_flag[s] && !closed[comp[s]])
        .collect();
    if !transient.is_empty() {
        let m = transient.len();
        let mut pos_of = vec![None; n];
        for (i, &s) in transient.iter().enumerate() {
            pos_of[s] = Some(i);
        }
        let mut a = Matrix::zeros(m, m);
        let mut b = vec![0.0; m];
        for (i, &s) in transient.iter().enumerate() {
            b[i] = r_pi[s];
            for s2 in 0..n {
                let pr = p.get(s, s2);
                if pr == 0.0 {
                    continue;
                }
                if let Some(j) = pos_of[s2] {
                    let cur = a.get(i, j);
                    a.set(i, j, cur - pr);
                }
            }
            let cur = a.get(i, i);
            a.set(i, i, cur + 1.0);
        }
        let v = lu_solve(&a, &b, "eval_total fundamental system")?;
        for (i, &s) in transient.iter().enumerate() {
            out[s] = ExtendedValue::Finite(v[i]);
        }
    }
    Ok(out)
}

/// Stationary mean reward of a closed irreducible class: solve
/// `mu P = mu, sum mu = 1` restricted to the class and average `r_pi`.
fn stationary_mean(p: &Matrix, states: &[usize], r_pi: &[f64]) -> Result<f64> {
    let c = states.len();
    if c == 1 {
        return Ok(r_pi[states[0]]);
    }
    let mut a = Matrix::zeros(c, c);
    for (j, &sj) in states.iter().enumerate() {
        for (i, &si) in states.iter().enumerate() {
            // (P^T - I) mu = 0
            let mut v = p.get(sj, si);
            if i == j {
                v -= 1.0;
            }
            a.set(i, j, v);
        }
    }
    // Replace the last balance equation with normalization.
    for j in 0..c {
        a.set(c - 1, j, 1.0);
    }
    let mut b = vec![0.0; c];
    b[c - 1] = 1.0;
    let mu = lu_solve(&a, &b, "stationary distribution")?;
    Ok(states.iter().zip(&mu).map(|(&s, &w)| w * r_pi[s]).sum())
}

/// Value iteration for the optimal discounted Q-table.
///
/// Iterates `Q_{t+1}(s,a) = sum_s' P (R + gamma max_a' Q_t(s',a'))` from zero
/// on non-terminal rows, terminal rows pinned to the terminal value. Stops
/// when the max-norm change drops to `tol (1-gamma) / (2 gamma)`, which
/// certifies a sup-error of at most `tol` against the fixed point.
pub fn value_iteration(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<QTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let gamma = mdp.gamma();
    let c = mdp.terminal_value();
    let stop = tol * (1.0 - gamma) / (2.0 * gamma);

    let mut q = vec![vec![0.0; na]; n];
    for &t in mdp.terminal() {
        q[t] = vec![c; na];
    }
    let mut state_max: Vec<f64> = (0..n)
        .map(|s| q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut diff: f64 = 0.0;
        for &s in mdp.nonterminal() {
            for a in 0..na {
                let prow = mdp.transition_row(s, a);
                let rrow = mdp.reward_row(s, a);
                let mut backup = 0.0;
                for s2 in 0..n {
                    let p = prow[s2];
                    if p != 0.0 {
                        backup += p * (rrow[s2] + gamma * state_max[s2]);
                    }
                }
                diff = diff.max((backup - q[s][a]).abs());
                q[s][a] = backup;
            }
        }
        for &s in mdp.nonterminal() {
            state_max[s] = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        residual = diff;
        if diff <= stop {
            return Ok(QTable { q, gamma });
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

/// Per-state argmax over actions, ties broken by the smallest action index.
pub fn greedy_policy(mdp: &Mdp, q: &QTable) -> DeterministicPolicy {
    let actions = mdp
        .nonterminal()
        .iter()
        .map(|&s| {
            let row = &q.q[s];
            let mut best = 0;
            for (a, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    DeterministicPolicy::new(mdp, actions).expect("greedy actions are in range")
}

/// Evaluate every deterministic policy under `objective` and compute the
/// uniform argmax/argmin sets.
pub fn enumerate_policy_report(
    mdp: &Mdp,
    objective: Objective,
    cap: u64,
) -> Result<PolicySetReport> {
    let mut policies = Vec::new();
    let mut values: Vec<Vec<ExtendedValue>> = Vec::new();
    for pi in enumerate_policies(mdp, cap)? {
        let v = match objective {
            Objective::Discounted => eval_discounted(mdp, &pi)?
                .into_iter()
                .map(ExtendedValue::Finite)
                .collect(),
            Objective::Total => eval_total(mdp, &pi)?,
        };
        policies.push(pi);
        values.push(v);
    }

    let interior = mdp.nonterminal();
    let defined: Vec<bool> = values
        .iter()
        .map(|v| interior.iter().all(|&s| v[s].is_defined()))
        .collect();
    let undefined_policies: Vec<DeterministicPolicy> = policies
        .iter()
        .zip(&defined)
        .filter(|(_, &d)| !d)
        .map(|(p, _)| p.clone())
        .collect();

    let mut best: Vec<ExtendedValue> = Vec::with_capacity(interior.len());
    let mut worst: Vec<ExtendedValue> = Vec::with_capacity(interior.len());
    for &s in interior {
        let mut lo: Option<ExtendedValue> = None;
        let mut hi: Option<ExtendedValue> = None;
        for (v, &d) in values.iter().zip(&defined) {
            if !d {
                continue;
            }
            let x = v[s];
            if hi.is_none_or(|h| x.cmp_defined(&h) == Some(Ordering::Greater)) {
                hi = Some(x);
            }
            if lo.is_none_or(|l| x.cmp_defined(&l) == Some(Ordering::Less)) {
                lo = Some(x);
            }
        }
        // At least one defined policy is guaranteed only informally; fall
        // back to Undefined sentinels that nothing can match.
        best.push(hi.unwrap_or(ExtendedValue::Undefined));
        worst.push(lo.unwrap_or(ExtendedValue::Undefined));
    }

    let in_argmax = |v: &[ExtendedValue]| {
        interior.iter().enumerate().all(|(i, &s)| {
            let tol = best[i].as_finite().map_or(0.0, tie_tol);
            best[i].is_defined() && v[s].ge_within(&best[i], tol)
        })
    };
    let in_argmin = |v: &[ExtendedValue]| {
        interior.iter().enumerate().all(|(i, &s)| {
            let tol = worst[i].as_finite().map_or(0.0, tie_tol);
            worst[i].is_defined() && v[s].le_within(&worst[i], tol)
        })
    };

    let mut argmax = Vec::new();
    let mut argmin = Vec::new();
    for ((pi, v), &d) in policies.iter().zip(&values).zip(&defined) {
        if !d {
            continue;
        }
        if in_argmax(v) {
            argmax.push(pi.clone());
        }
        if in_argmin(v) {
            argmin.push(pi.clone());
        }
    }

    let no_uniform_argmax = argmax.is_empty();
    let no_uniform_argmin = argmin.is_empty();
    let per_state = |extremum: &[ExtendedValue], maximize: bool| -> Vec<Vec<usize>> {
        interior
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let tol = extremum[i].as_finite().map_or(0.0, tie_tol);
                values
                    .iter()
                    .enumerate()
                    .filter(|(p, v)| {
                        defined[*p]
                            && if maximize {
                                v[s].ge_within(&extremum[i], tol)
                            } else {
                                v[s].le_within(&extremum[i], tol)
                            }
                    })
                    .map(|(p, _)| p)
                    .collect()
            })
            .collect()
    };
    let per_state_argmax = no_uniform_argmax.then(|| per_state(&best, true));
    let per_state_argmin = no_uniform_argmin.then(|| per_state(&worst, false));

    Ok(PolicySetReport {
        objective,
        argmax,
        argmin,
        policies,
        values,
        undefined_policies,
        no_uniform_argmax,
        no_uniform_argmin,
        per_state_argmax,
        per_state_argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_example1, set_terminal_value, Mdp};
    use crate::policy::DEFAULT_ENUM_CAP;

    fn pi(mdp: &Mdp, actions: &[usize]) -> DeterministicPolicy {
        DeterministicPolicy::new(mdp, actions.to_vec()).unwrap()
    }

    #[test]
    fn discounted_values_match_closed_forms_at_zero_terminal() {
        for gamma in [0.5, 0.9, 0.99] {
            let mdp = build_example1(gamma, 0.0).unwrap();
            let check = |actions: &[usize], v1: f64, v2: f64| {
                let v = eval_discounted(&mdp, &pi(&mdp, actions)).unwrap();
                assert!(
                    (v[0] - v1).abs() < 1e-9,
                    "gamma={gamma} {actions:?} s1: {} vs {v1}",
                    v[0]
                );
                assert!(
                    (v[1] - v2).abs() < 1e-9,
                    "gamma={gamma} {actions:?} s2: {} vs {v2}",
                    v[1]
                );
            };
            check(
                &[0, 0],
                -1.0 / (1.0 - gamma),
                -gamma * gamma / (1.0 - gamma),
            );
            check(&[0, 1], -1.0 / (1.0 - gamma), -1.0);
            check(&[1, 0], -1.0, 0.0);
            check(&[1, 1], -1.0 - gamma, -1.0);
        }
    }

    #[test]
    fn discounted_values_shift_with_terminal_value() {
        let gamma = 0.9;
        let mdp = build_example1(gamma, 2.0 / gamma).unwrap();
        let v = eval_discounted(&mdp, &pi(&mdp, &[1, 1])).unwrap();
        assert!((v[0] - (-1.0 + gamma)).abs() < 1e-9);
        assert!((v[1] - 1.0).abs() < 1e-9);
        // Terminal state value is exactly C.
        assert_eq!(v[2], 2.0 / gamma);
    }

    #[test]
    fn total_values_match_example_tables() {
        use ExtendedValue::*;
        let mdp = build_example1(0.9, 0.0).unwrap();
        let v = eval_total(&mdp, &pi(&mdp, &[1, 1])).unwrap();
        assert_eq!(v[0], Finite(-2.0));
        assert_eq!(v[1], Finite(-1.0));

        let v = eval_total(&mdp, &pi(&mdp, &[0, 1])).unwrap();
        assert_eq!(v[0], MinusInf);
        assert_eq!(v[1], Finite(-1.0));

        let v = eval_total(&mdp, &pi(&mdp, &[1, 0])).unwrap();
        assert_eq!(v[0], MinusInf);
        assert_eq!(v[1], MinusInf);

        let v = eval_total(&mdp, &pi(&mdp, &[0, 0])).unwrap();
        assert_eq!(v[0], MinusInf);
        assert_eq!(v[1], MinusInf);
    }

    #[test]
    fn total_value_is_independent_of_terminal_value() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let shifted = set_terminal_value(&mdp, 2.0 / 0.9).unwrap();
        for actions in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let a = eval_total(&mdp, &pi(&mdp, &actions)).unwrap();
            let b = eval_total(&shifted, &pi(&shifted, &actions)).unwrap();
            assert_eq!(a[0], b[0]);
            assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn zero_reward_self_loop_is_finite_zero() {
        // One non-terminal state that loops on itself with zero reward.
        let n = 2;
        let mut p = vec![0.0; n * n];
        p[0] = 1.0;
        p[3] = 1.0;
        let mdp = Mdp::new(n, 1, vec![1], 0.9, 0.0, p, vec![0.0; n * n]).unwrap();
        let v = eval_total(&mdp, &pi(&mdp, &[0])).unwrap();
        assert_eq!(v[0], ExtendedValue::Finite(0.0));
    }

    #[test]
    fn oscillating_class_is_undefined() {
        // Two states swapping with rewards +1 and -1: zero mean, diverging
        // partial sums.
        let n = 3;
        let idx = |s: usize, s2: usize| s * n + s2;
        let mut p = vec![0.0; n * n];
        let mut r = vec![0.0; n * n];
        p[idx(0, 1)] = 1.0;
        r[idx(0, 1)] = 1.0;
        p[idx(1, 0)] = 1.0;
        r[idx(1, 0)] = -1.0;
        p[idx(2, 2)] = 1.0;
        let mdp = Mdp::new(n, 1, vec![2], 0.9, 0.0, p, r).unwrap();
        let v = eval_total(&mdp, &pi(&mdp, &[0, 0])).unwrap();
        assert_eq!(v[0], ExtendedValue::Undefined);
        assert_eq!(v[1], ExtendedValue::Undefined);
    }

    #[test]
    fn positive_loop_is_plus_inf() {
        let n = 2;
        let mut p = vec![0.0; n * n];
        let mut r = vec![0.0; n * n];
        p[0] = 1.0;
        r[0] = 0.25;
        p[3] = 1.0;
        let mdp = Mdp::new(n, 1, vec![1], 0.9, 0.0, p, r).unwrap();
        let v = eval_total(&mdp, &pi(&mdp, &[0])).unwrap();
        assert_eq!(v[0], ExtendedValue::PlusInf);
    }

    #[test]
    fn value_iteration_single_backup() {
        // One non-terminal state, one action, reward 1 into the terminal.
        let n = 2;
        let mut p = vec![0.0; n * n];
        let mut r = vec![0.0; n * n];
        p[1] = 1.0;
        r[1] = 1.0;
        p[3] = 1.0;
        let mdp = Mdp::new(n, 1, vec![1], 0.9, 0.0, p, r).unwrap();
        let q = value_iteration(&mdp, 1e-10, 10_000).unwrap();
        assert!((q.q[0][0] - 1.0).abs() < 1e-10);
        assert_eq!(q.q[1][0], 0.0);
    }

    #[test]
    fn value_iteration_matches_example_optimum() {
        let gamma = 0.9;
        let mdp = build_example1(gamma, 0.0).unwrap();
        let q = value_iteration(&mdp, 1e-10, 100_000).unwrap();
        assert!((q.q[0][1] - (-1.0)).abs() < 1e-9, "Q(s1,a2)={}", q.q[0][1]);
        assert!(q.q[1][0].abs() < 1e-9, "Q(s2,a1)={}", q.q[1][0]);
        assert_eq!(greedy_policy(&mdp, &q).actions(), &[1, 0]);
    }

    #[test]
    fn value_iteration_with_lifted_terminal_value() {
        let gamma = 0.9;
        let mdp = build_example1(gamma, 2.0 / gamma).unwrap();
        let q = value_iteration(&mdp, 1e-10, 100_000).unwrap();
        assert_eq!(greedy_policy(&mdp, &q).actions(), &[1, 1]);
    }

    #[test]
    fn value_iteration_reports_non_convergence() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        assert!(matches!(
            value_iteration(&mdp, 1e-12, 3),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn greedy_breaks_ties_toward_smaller_action() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let q = QTable {
            q: vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.0, 0.0]],
            gamma: 0.9,
        };
        let g = greedy_policy(&mdp, &q);
        assert_eq!(g.actions(), &[1, 0]);
    }

    #[test]
    fn enumeration_on_example1_discounted() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let report =
            enumerate_policy_report(&mdp, Objective::Discounted, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(report.argmax.len(), 1);
        assert_eq!(report.argmax[0].actions(), &[1, 0]);
        assert!(!report.no_uniform_argmax);
    }

    #[test]
    fn enumeration_on_example1_total() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let report = enumerate_policy_report(&mdp, Objective::Total, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(report.argmax.len(), 1);
        assert_eq!(report.argmax[0].actions(), &[1, 1]);
        // The discounted optimum (a2, a1) is among the total-reward worst.
        assert!(report.argmin.iter().any(|p| p.actions() == [1, 0]));
        assert!(report.argmin.iter().any(|p| p.actions() == [0, 0]));
        assert_eq!(report.argmin.len(), 2);
    }

    #[test]
    fn all_undefined_policies_leave_no_uniform_optimum() {
        // Single policy, single oscillating cycle: excluded from the
        // ordering, so no argmax exists and the flag is raised.
        let n = 3;
        let idx = |s: usize, s2: usize| s * n + s2;
        let mut p = vec![0.0; n * n];
        let mut r = vec![0.0; n * n];
        p[idx(0, 1)] = 1.0;
        r[idx(0, 1)] = 1.0;
        p[idx(1, 0)] = 1.0;
        r[idx(1, 0)] = -1.0;
        p[idx(2, 2)] = 1.0;
        let mdp = Mdp::new(n, 1, vec![2], 0.9, 0.0, p, r).unwrap();
        let report = enumerate_policy_report(&mdp, Objective::Total, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(report.undefined_policies.len(), 1);
        assert!(report.argmax.is_empty());
        assert!(report.no_uniform_argmax);
        assert!(report.no_uniform_argmin);
        let per_state = report.per_state_argmax.unwrap();
        assert!(per_state.iter().all(|set| set.is_empty()));
    }

    #[test]
    fn extended_value_ordering() {
        use ExtendedValue::*;
        assert!(MinusInf < Finite(-1e300));
        assert!(Finite(1e300) < PlusInf);
        assert!(Finite(1.0) < Finite(2.0));
        assert_eq!(Undefined.partial_cmp(&Finite(0.0)), None);
        assert_eq!(Undefined.partial_cmp(&Undefined), None);
    }

    #[test]
    fn extended_value_serialization() {
        use ExtendedValue::*;
        let vals = vec![Finite(-2.0), PlusInf, MinusInf, Undefined];
        let json = serde_json::to_string(&vals).unwrap();
        assert_eq!(json, r#"[-2.0,"+inf","-inf","undefined"]"#);
        let back: Vec<ExtendedValue> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vals);
    }
}
