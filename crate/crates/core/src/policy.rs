//! Deterministic stationary policies and exhaustive enumeration over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Default cap on `|A|^|S°|` for exhaustive enumeration.
pub const DEFAULT_ENUM_CAP: u64 = 100_000_000;

/// One action index per non-terminal state.
///
/// `actions[i]` is the action taken at the i-th non-terminal state in
/// ascending state order (see [`Mdp::nonterminal`]). Policies are compared and
/// enumerated in lexicographic order of this vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    /// Build a policy for `mdp`, checking coverage and action ranges.
    pub fn new(mdp: &Mdp, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != mdp.nonterminal().len() {
            return Err(Error::Shape(format!(
                "policy covers {} states, need {}",
                actions.len(),
                mdp.nonterminal().len()
            )));
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= mdp.n_actions()) {
            return Err(Error::Shape(format!(
                "action index {bad} out of range (|A| = {})",
                mdp.n_actions()
            )));
        }
        Ok(DeterministicPolicy { actions })
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Action at state `s`; `None` if `s` is terminal.
    pub fn action_for(&self, mdp: &Mdp, s: usize) -> Option<usize> {
        mdp.nonterminal_pos(s).map(|i| self.actions[i])
    }
}

/// Number of deterministic policies, saturating at infinity-as-f64 to keep
/// cap comparisons simple.
pub fn policy_count(mdp: &Mdp) -> f64 {
    (mdp.n_actions() as f64).powi(mdp.nonterminal().len() as i32)
}

/// Iterator over every deterministic policy in lexicographic order.
#[derive(Debug)]
pub struct PolicyIter {
    n_actions: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for PolicyIter {
    type Item = DeterministicPolicy;

    fn next(&mut self) -> Option<DeterministicPolicy> {
        let current = self.current.as_mut()?;
        let out = DeterministicPolicy {
            actions: current.clone(),
        };
        // Odometer increment, last coordinate fastest.
        let mut pos = current.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < self.n_actions {
                break;
            }
            current[pos] = 0;
        }
        Some(out)
    }
}

/// Enumerate all `|A|^|S°|` deterministic policies, refusing to start when the
/// count exceeds `cap`.
pub fn enumerate_policies(mdp: &Mdp, cap: u64) -> Result<PolicyIter> {
    let count = policy_count(mdp);
    if count > cap as f64 {
        return Err(Error::EnumerationInfeasible {
            policies: count,
            cap,
        });
    }
    Ok(PolicyIter {
        n_actions: mdp.n_actions(),
        current: Some(vec![0; mdp.nonterminal().len()]),
    })
}
