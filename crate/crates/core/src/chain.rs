//! Markov-chain structure under a fixed policy: k-step transition and
//! absorption probabilities, episodicity, terminal accessibility, and the
//! minimum positive absorption probability `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::Mdp;
use crate::policy::{enumerate_policies, DeterministicPolicy};

/// Entries of a matrix power below this threshold count as zero when deciding
/// positivity; repeated multiplication can leave denormal noise where the
/// exact value is zero.
pub const POSITIVITY_TOL: f64 = 1e-15;

/// Terminal accessibility, checked in two parts: (1) some non-terminal state
/// can reach a terminal state under some policy; (2) every non-terminal state
/// has an action with zero one-step probability of entering a terminal state,
/// so a single policy can avoid terminals everywhere. `witness_policy` is
/// present exactly when part 2 holds and satisfies
/// `P(s -> s', 1, pi) = 0` for all non-terminal `s` and terminal `s'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityReport {
    pub part1: bool,
    pub part2: bool,
    pub witness_policy: Option<DeterministicPolicy>,
}

/// Whether every policy is sure to be absorbed within a fixed horizon.
///
/// `episodic` is decided on the union graph over non-terminal states with an
/// edge `s -> s'` whenever some action moves `s` to `s'` with positive
/// probability: any cycle there is realizable by a deterministic policy
/// (one action per distinct cycle state) and gives positive probability of
/// staying out of the terminal set forever; conversely acyclicity bounds
/// every sojourn by the longest path. If episodic, `horizon` is one more than
/// the longest path length in that DAG; otherwise `witness_cycle` holds a
/// loop (first and last states equal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodicityReport {
    pub episodic: bool,
    pub horizon: Option<usize>,
    pub witness_cycle: Option<Vec<usize>>,
}

/// The minimum positive `(|S|-1)`-step absorption probability over all
/// deterministic policies, with every `(policy, state, terminal)` triple that
/// attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: f64,
    pub witnesses: Vec<(DeterministicPolicy, usize, usize)>,
}

/// Transition matrix of the chain induced by `pi`: row `s` is `P[s][pi(s)][·]`
/// for non-terminal `s`, and an identity row for terminal `s`.
pub fn policy_matrix(mdp: &Mdp, pi: &DeterministicPolicy) -> Matrix {
    let n = mdp.n_states();
    let mut m = Matrix::zeros(n, n);
    for s in 0..n {
        match pi.action_for(mdp, s) {
            Some(a) => m.row_mut(s).copy_from_slice(mdp.transition_row(s, a)),
            None => m.set(s, s, 1.0),
        }
    }
    m
}

/// `k`-step transition probabilities `(P^pi)^k`; `k = 0` is the identity.
pub fn k_step(mdp: &Mdp, pi: &DeterministicPolicy, k: usize) -> Matrix {
    policy_matrix(mdp, pi).pow(k)
}

/// Columns of [`k_step`] restricted to terminal states, in the order given by
/// [`Mdp::terminal`]. Entry `(s, j)` is the probability of occupying the j-th
/// terminal state after exactly `k` steps from `s`.
pub fn absorption_prob(mdp: &Mdp, pi: &DeterministicPolicy, k: usize) -> Matrix {
    let full = k_step(mdp, pi, k);
    let terminal = mdp.terminal();
    let mut out = Matrix::zeros(mdp.n_states(), terminal.len());
    for s in 0..mdp.n_states() {
        for (j, &t) in terminal.iter().enumerate() {
            out.set(s, j, full.get(s, t));
        }
    }
    out
}

/// Adjacency over non-terminal states: `adj[i]` lists positions (within the
/// non-terminal ordering) reachable in one step under some action.
fn interior_union_graph(mdp: &Mdp) -> Vec<Vec<usize>> {
    let interior = mdp.nonterminal();
    let mut adj = vec![Vec::new(); interior.len()];
    for (i, &s) in interior.iter().enumerate() {
        let mut seen = vec![false; interior.len()];
        for a in 0..mdp.n_actions() {
            for (s2, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p > 0.0 {
                    if let Some(j) = mdp.nonterminal_pos(s2) {
                        if !seen[j] {
                            seen[j] = true;
                            adj[i].push(j);
                        }
                    }
                }
            }
        }
    }
    adj
}

/// Decide episodicity and, when it holds, the exact horizon.
pub fn is_episodic(mdp: &Mdp) -> EpisodicityReport {
    let interior = mdp.nonterminal();
    let adj = interior_union_graph(mdp);
    let m = interior.len();

    // Iterative DFS with colors; a back edge yields a witness cycle.
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; m];
    let mut parent = vec![usize::MAX; m];
    for root in 0..m {
        if color[root] != WHITE {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = GRAY;
        while let Some(&mut (node, ref mut edge)) = stack.last_mut() {
            if *edge < adj[node].len() {
                let next = adj[node][*edge];
                *edge += 1;
                match color[next] {
                    WHITE => {
                        color[next] = GRAY;
                        parent[next] = node;
                        stack.push((next, 0));
                    }
                    GRAY => {
                        // Walk parents from `node` back to `next` to recover
                        // the cycle, then report it in forward order.
                        let mut cycle = vec![interior[next]];
                        let mut cur = node;
                        let mut tail = Vec::new();
                        while cur != next {
                            tail.push(interior[cur]);
                            cur = parent[cur];
                        }
                        tail.reverse();
                        cycle.extend(tail);
                        cycle.push(interior[next]);
                        return EpisodicityReport {
                            episodic: false,
                            horizon: None,
                            witness_cycle: Some(cycle),
                        };
                    }
                    _ => {}
                }
            } else {
                color[node] = BLACK;
                stack.pop();
            }
        }
    }

    // Acyclic: longest path via DFS-free DP over a topological order.
    let mut indeg = vec![0usize; m];
    for out in &adj {
        for &j in out {
            indeg[j] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..m).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(i) = queue.pop() {
        order.push(i);
        for &j in &adj[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push(j);
            }
        }
    }
    let mut longest = vec![0usize; m];
    for &i in order.iter().rev() {
        for &j in &adj[i] {
            longest[i] = longest[i].max(longest[j] + 1);
        }
    }
    let horizon = 1 + longest.iter().copied().max().unwrap_or(0);
    EpisodicityReport {
        episodic: true,
        horizon: Some(horizon),
        witness_cycle: None,
    }
}

/// Check both parts of terminal accessibility.
pub fn check_accessibility(mdp: &Mdp) -> AccessibilityReport {
    let interior = mdp.nonterminal();
    let m = interior.len();

    // Part 1: on the union graph (any action), can some non-terminal state
    // reach a terminal state? Any walk can be shortened to a simple path, and
    // a simple path is realizable by a deterministic policy, so union-graph
    // reachability is exact.
    let adj = interior_union_graph(mdp);
    let mut enters_terminal = vec![false; m];
    for (i, &s) in interior.iter().enumerate() {
        'outer: for a in 0..mdp.n_actions() {
            for &t in mdp.terminal() {
                if mdp.transition(s, a, t) > 0.0 {
                    enters_terminal[i] = true;
                    break 'outer;
                }
            }
        }
    }
    // Reverse reachability from states that can enter a terminal directly.
    let mut radj = vec![Vec::new(); m];
    for (i, out) in adj.iter().enumerate() {
        for &j in out {
            radj[j].push(i);
        }
    }
    let mut can_reach = enters_terminal.clone();
    let mut stack: Vec<usize> = (0..m).filter(|&i| can_reach[i]).collect();
    while let Some(i) = stack.pop() {
        for &j in &radj[i] {
            if !can_reach[j] {
                can_reach[j] = true;
                stack.push(j);
            }
        }
    }
    let part1 = can_reach.iter().any(|&b| b);

    // Part 2: per state, an action whose one-step terminal mass is zero.
    // Assembling those choices state by state yields a single policy with
    // zero one-step absorption everywhere.
    let mut witness_actions = Vec::with_capacity(m);
    let mut part2 = true;
    for &s in interior {
        let avoiding = (0..mdp.n_actions()).find(|&a| {
            mdp.terminal()
                .iter()
                .all(|&t| mdp.transition(s, a, t) == 0.0)
        });
        match avoiding {
            Some(a) => witness_actions.push(a),
            None => {
                part2 = false;
                break;
            }
        }
    }
    let witness_policy = if part2 {
        Some(DeterministicPolicy::new(mdp, witness_actions).expect("witness actions are in range"))
    } else {
        None
    };
    AccessibilityReport {
        part1,
        part2,
        witness_policy,
    }
}

/// Minimum positive `(|S|-1)`-step absorption probability over all
/// deterministic policies, taken over non-terminal source states.
///
/// Entries are counted as positive when they exceed [`POSITIVITY_TOL`].
/// Requires part 1 of [`check_accessibility`]; otherwise no positive entry
/// exists and [`Error::DeltaEmpty`] is returned. Witness triples are reported
/// in lexicographic `(policy, state, terminal)` order.
pub fn compute_delta(mdp: &Mdp, cap: u64) -> Result<DeltaResult> {
    let k = mdp.n_states() - 1;
    let terminal = mdp.terminal();
    let n = mdp.n_states();

    // Only the terminal columns of (P^pi)^k are needed: push each terminal
    // indicator column through k mat-vec products instead of forming powers.
    // Witnesses collect in lexicographic (policy, state, terminal) order
    // because enumeration is lexicographic and the scan is row-major.
    let mut delta = f64::INFINITY;
    let mut witnesses: Vec<(DeterministicPolicy, usize, usize)> = Vec::new();
    let mut cols = Matrix::zeros(n, terminal.len());
    let mut next = vec![0.0f64; n];
    for pi in enumerate_policies(mdp, cap)? {
        let p = policy_matrix(mdp, &pi);
        for (j, &t) in terminal.iter().enumerate() {
            let mut col = vec![0.0f64; n];
            col[t] = 1.0;
            for _ in 0..k {
                for s in 0..n {
                    next[s] = p.row(s).iter().zip(&col).map(|(a, b)| a * b).sum();
                }
                std::mem::swap(&mut col, &mut next);
            }
            for s in 0..n {
                cols.set(s, j, col[s]);
            }
        }
        for &s in mdp.nonterminal() {
            for (j, &t) in terminal.iter().enumerate() {
                let v = cols.get(s, j);
                if v > POSITIVITY_TOL {
                    if v < delta {
                        delta = v;
                        witnesses.clear();
                        witnesses.push((pi.clone(), s, t));
                    } else if v == delta {
                        witnesses.push((pi.clone(), s, t));
                    }
                }
            }
        }
    }
    if witnesses.is_empty() {
        return Err(Error::DeltaEmpty);
    }
    Ok(DeltaResult { delta, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_example1, Mdp};
    use crate::policy::DEFAULT_ENUM_CAP;

    fn example1() -> Mdp {
        build_example1(0.9, 0.0).unwrap()
    }

    fn pi(mdp: &Mdp, actions: &[usize]) -> DeterministicPolicy {
        DeterministicPolicy::new(mdp, actions.to_vec()).unwrap()
    }

    /// Two non-terminal states chained into one terminal state:
    /// 0 -> 1 -> 2 under the single action.
    fn three_chain() -> Mdp {
        let n = 3;
        let idx = |s: usize, s2: usize| s * n + s2;
        let mut p = vec![0.0; n * n];
        let r = vec![0.0; n * n];
        p[idx(0, 1)] = 1.0;
        p[idx(1, 2)] = 1.0;
        p[idx(2, 2)] = 1.0;
        Mdp::new(n, 1, vec![2], 0.9, 0.0, p, r).unwrap()
    }

    #[test]
    fn policy_matrix_matches_transitions() {
        let mdp = example1();
        let m = policy_matrix(&mdp, &pi(&mdp, &[1, 0]));
        assert_eq!(m.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(m.row(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn policy_matrix_rows_are_stochastic() {
        let mdp = example1();
        for actions in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let m = policy_matrix(&mdp, &pi(&mdp, &actions));
            for s in 0..3 {
                let sum: f64 = m.row(s).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn k_step_zero_is_identity() {
        let mdp = example1();
        let m = k_step(&mdp, &pi(&mdp, &[1, 1]), 0);
        assert_eq!(m, Matrix::identity(3));
    }

    #[test]
    fn k_step_two_reaches_terminal_on_example1() {
        let mdp = example1();
        let m = k_step(&mdp, &pi(&mdp, &[1, 1]), 2);
        assert_eq!(m.get(0, 2), 1.0);
    }

    #[test]
    fn absorption_zero_for_looping_policy() {
        let mdp = example1();
        for k in 0..10 {
            let a = absorption_prob(&mdp, &pi(&mdp, &[1, 0]), k);
            assert_eq!(a.get(0, 0), 0.0);
            assert_eq!(a.get(1, 0), 0.0);
        }
    }

    #[test]
    fn absorption_after_two_steps_on_example1() {
        let mdp = example1();
        let a = absorption_prob(&mdp, &pi(&mdp, &[1, 1]), 2);
        assert_eq!(a.get(0, 0), 1.0);
    }

    #[test]
    fn example1_is_not_episodic() {
        let mdp = example1();
        let report = is_episodic(&mdp);
        assert!(!report.episodic);
        let cycle = report.witness_cycle.unwrap();
        assert!(cycle.len() >= 2);
        assert_eq!(cycle.first(), cycle.last());
        // Every consecutive hop must exist under some action.
        for w in cycle.windows(2) {
            let possible = (0..mdp.n_actions()).any(|a| mdp.transition(w[0], a, w[1]) > 0.0);
            assert!(possible, "cycle edge {} -> {} not realizable", w[0], w[1]);
        }
    }

    #[test]
    fn two_state_chain_has_horizon_one() {
        let mut p = vec![0.0; 4];
        p[1] = 1.0; // 0 -> 1
        p[3] = 1.0; // terminal self-loop
        let mdp = Mdp::new(2, 1, vec![1], 0.9, 0.0, p, vec![0.0; 4]).unwrap();
        let report = is_episodic(&mdp);
        assert!(report.episodic);
        assert_eq!(report.horizon, Some(1));
    }

    #[test]
    fn three_state_chain_has_horizon_two() {
        let report = is_episodic(&three_chain());
        assert!(report.episodic);
        assert_eq!(report.horizon, Some(2));
    }

    #[test]
    fn accessibility_on_example1() {
        let mdp = example1();
        let report = check_accessibility(&mdp);
        assert!(report.part1);
        assert!(report.part2);
        let w = report.witness_policy.unwrap();
        // At s2 the witness must pick the action that returns to s1.
        assert_eq!(w.action_for(&mdp, 1), Some(0));
        for &s in mdp.nonterminal() {
            let a = w.action_for(&mdp, s).unwrap();
            for &t in mdp.terminal() {
                assert_eq!(mdp.transition(s, a, t), 0.0);
            }
        }
    }

    #[test]
    fn part2_false_when_all_actions_absorb() {
        // Single non-terminal state, both actions enter the terminal state.
        let n = 2;
        let idx = |s: usize, a: usize, s2: usize| (s * 2 + a) * n + s2;
        let mut p = vec![0.0; n * 2 * n];
        p[idx(0, 0, 1)] = 1.0;
        p[idx(0, 1, 1)] = 0.5;
        p[idx(0, 1, 0)] = 0.5;
        p[idx(1, 0, 1)] = 1.0;
        p[idx(1, 1, 1)] = 1.0;
        let mdp = Mdp::new(n, 2, vec![1], 0.9, 0.0, p, vec![0.0; n * 2 * n]).unwrap();
        let report = check_accessibility(&mdp);
        assert!(report.part1);
        assert!(!report.part2);
        assert!(report.witness_policy.is_none());
    }

    #[test]
    fn part1_false_when_terminal_unreachable() {
        // Non-terminal states loop among themselves only.
        let n = 3;
        let idx = |s: usize, s2: usize| s * n + s2;
        let mut p = vec![0.0; n * n];
        p[idx(0, 1)] = 1.0;
        p[idx(1, 0)] = 1.0;
        p[idx(2, 2)] = 1.0;
        let mdp = Mdp::new(n, 1, vec![2], 0.9, 0.0, p, vec![0.0; n * n]).unwrap();
        let report = check_accessibility(&mdp);
        assert!(!report.part1);
        assert!(report.part2);
    }

    #[test]
    fn delta_is_one_on_deterministic_example1() {
        let mdp = example1();
        let result = compute_delta(&mdp, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(result.delta, 1.0);
        assert!(!result.witnesses.is_empty());
    }

    #[test]
    fn delta_single_positive_entry() {
        // One non-terminal state, single action, 0.3 into the terminal state.
        let n = 2;
        let mut p = vec![0.0; n * n];
        p[1] = 0.3;
        p[0] = 0.7;
        p[3] = 1.0;
        let mdp = Mdp::new(n, 1, vec![1], 0.9, 0.0, p, vec![0.0; n * n]).unwrap();
        let result = compute_delta(&mdp, DEFAULT_ENUM_CAP).unwrap();
        assert!((result.delta - 0.3).abs() < 1e-15);
        assert_eq!(result.witnesses.len(), 1);
        assert_eq!(result.witnesses[0].1, 0);
        assert_eq!(result.witnesses[0].2, 1);
    }

    #[test]
    fn delta_empty_when_unreachable() {
        let n = 2;
        let mut p = vec![0.0; n * n];
        p[0] = 1.0;
        p[3] = 1.0;
        let mdp = Mdp::new(n, 1, vec![1], 0.9, 0.0, p, vec![0.0; n * n]).unwrap();
        assert!(matches!(
            compute_delta(&mdp, DEFAULT_ENUM_CAP),
            Err(Error::DeltaEmpty)
        ));
    }

    #[test]
    fn delta_respects_enumeration_cap() {
        let mdp = example1();
        assert!(matches!(
            compute_delta(&mdp, 2),
            Err(Error::EnumerationInfeasible { .. })
        ));
    }
}
