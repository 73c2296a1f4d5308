//! Finite MDP representation, validation, the built-in three-state example,
//! terminal-value application, and JSON persistence.
//!
//! States and actions are dense integer indices. Terminal states carry the
//! convention that every action self-loops with reward `(1 - gamma) * C`,
//! where `C` is the terminal state value; this makes the discounted value of
//! every terminal state exactly `C`. The reward entries of terminal rows are
//! owned by that convention: [`validate`] rejects anything else rather than
//! silently rewriting it.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for row-stochasticity checks. Loaded matrices are never
/// renormalized; generator bugs should surface, not hide.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MDP with dense transition and reward tensors.
///
/// Tensors are stored flat in `[state][action][next_state]` order. Values are
/// immutable after construction; mutators return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    terminal_value: f64,
    /// Sorted, deduplicated terminal state indices.
    terminal: Vec<usize>,
    /// Sorted non-terminal state indices (complement of `terminal`).
    nonterminal: Vec<usize>,
    /// `nonterminal_pos[s]` is the position of `s` within `nonterminal`.
    nonterminal_pos: Vec<Option<usize>>,
    transition: Vec<f64>,
    reward: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Mdp {
    /// Build an MDP from dense tensors, checking structural well-formedness
    /// (shapes, index ranges, gamma) but not the numeric invariants; those are
    /// the job of [`validate`].
    pub fn new(
        n_states: usize,
        n_actions: usize,
        terminal: Vec<usize>,
        gamma: f64,
        terminal_value: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::Shape("n_states must be positive".into()));
        }
        if n_actions == 0 {
            return Err(Error::Shape("n_actions must be positive".into()));
        }
        if !(gamma.is_finite() && 0.0 < gamma && gamma < 1.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        if !terminal_value.is_finite() {
            return Err(Error::NonFinite {
                what: "terminal_value",
                value: terminal_value,
            });
        }
        let mut terminal = terminal;
        terminal.sort_unstable();
        terminal.dedup();
        if terminal.is_empty() || terminal.len() >= n_states {
            return Err(Error::Shape(format!(
                "terminal set must be a non-empty proper subset of states; got {} of {}",
                terminal.len(),
                n_states
            )));
        }
        if terminal.iter().any(|&s| s >= n_states) {
            return Err(Error::Shape("terminal state index out of range".into()));
        }
        let len = n_states * n_actions * n_states;
        if transition.len() != len {
            return Err(Error::Shape(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                len
            )));
        }
        if reward.len() != len {
            return Err(Error::Shape(format!(
                "reward tensor has {} entries, expected {}",
                reward.len(),
                len
            )));
        }
        let mut nonterminal_pos = vec![None; n_states];
        let mut nonterminal = Vec::with_capacity(n_states - terminal.len());
        for s in 0..n_states {
            if terminal.binary_search(&s).is_err() {
                nonterminal_pos[s] = Some(nonterminal.len());
                nonterminal.push(s);
            }
        }
        Ok(Mdp {
            n_states,
            n_actions,
            gamma,
            terminal_value,
            terminal,
            nonterminal,
            nonterminal_pos,
            transition,
            reward,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_states {
            return Err(Error::Shape(format!(
                "{} labels for {} states",
                labels.len(),
                self.n_states
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn terminal_value(&self) -> f64 {
        self.terminal_value
    }

    pub fn terminal(&self) -> &[usize] {
        &self.terminal
    }

    pub fn nonterminal(&self) -> &[usize] {
        &self.nonterminal
    }

    /// Position of `s` in the non-terminal ordering, `None` for terminal states.
    pub fn nonterminal_pos(&self, s: usize) -> Option<usize> {
        self.nonterminal_pos[s]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.nonterminal_pos[s].is_none()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    fn idx(&self, s: usize, a: usize) -> usize {
        (s * self.n_actions + a) * self.n_states
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[self.idx(s, a) + s2]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.reward[self.idx(s, a) + s2]
    }

    /// Probability row `P[s][a][·]` as a slice over next states.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let i = self.idx(s, a);
        &self.transition[i..i + self.n_states]
    }

    #[inline]
    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let i = self.idx(s, a);
        &self.reward[i..i + self.n_states]
    }

    /// Minimum and maximum reward over entries reachable with positive
    /// probability from a non-terminal state. Entries with `P[s][a][s'] = 0`
    /// cannot influence any value and are ignored.
    pub fn supported_reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &s in &self.nonterminal {
            for a in 0..self.n_actions {
                let p = self.transition_row(s, a);
                let r = self.reward_row(s, a);
                for s2 in 0..self.n_states {
                    if p[s2] > 0.0 {
                        lo = lo.min(r[s2]);
                        hi = hi.max(r[s2]);
                    }
                }
            }
        }
        (lo, hi)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        save(self, path)
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Stable rule identifier, e.g. `row-stochastic`.
    pub rule: String,
    /// Where the violation occurred, e.g. `P[2][0]`.
    pub location: String,
    pub message: String,
}

/// Result of checking every MDP invariant. `ok` holds exactly when no
/// violations were found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    /// Turn a failed report into an error, passing a clean report through.
    pub fn into_result(self) -> Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            write!(f, "ok")
        } else {
            write!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                write!(f, " [{} at {}: {}]", v.rule, v.location, v.message)?;
            }
            Ok(())
        }
    }
}

/// Check every numeric invariant of an MDP and report all violations.
///
/// Rules checked:
/// - `prob-range`: every transition probability lies in `[0, 1]`;
/// - `row-stochastic`: every `P[s][a][·]` sums to 1 within `1e-12`;
/// - `terminal-self-loop`: `P[s][a][s] = 1` for terminal `s` and every `a`;
/// - `terminal-reward`: `R[s][a][s] = (1 - gamma) * C` exactly for terminal `s`;
/// - `reward-finite`: every reward entry is finite.
pub fn validate(mdp: &Mdp) -> ValidationReport {
    let mut violations = Vec::new();
    let n = mdp.n_states();
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let row = mdp.transition_row(s, a);
            let mut sum = 0.0;
            for (s2, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    violations.push(Violation {
                        rule: "prob-range".into(),
                        location: format!("P[{s}][{a}][{s2}]"),
                        message: format!("probability {p} outside [0, 1]"),
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                violations.push(Violation {
                    rule: "row-stochastic".into(),
                    location: format!("P[{s}][{a}]"),
                    message: format!("row sums to {sum}, expected 1 within {ROW_SUM_TOL:e}"),
                });
            }
            for (s2, &r) in mdp.reward_row(s, a).iter().enumerate() {
                if !r.is_finite() {
                    violations.push(Violation {
                        rule: "reward-finite".into(),
                        location: format!("R[{s}][{a}][{s2}]"),
                        message: format!("reward {r} is not finite"),
                    });
                }
            }
        }
    }
    let expected = (1.0 - mdp.gamma()) * mdp.terminal_value();
    for &s in mdp.terminal() {
        for a in 0..mdp.n_actions() {
            let p = mdp.transition(s, a, s);
            if p != 1.0 {
                violations.push(Violation {
                    rule: "terminal-self-loop".into(),
                    location: format!("P[{s}][{a}][{s}]"),
                    message: format!("terminal state must self-loop with probability 1, got {p}"),
                });
            }
            let r = mdp.reward(s, a, s);
            if r != expected {
                violations.push(Violation {
                    rule: "terminal-reward".into(),
                    location: format!("R[{s}][{a}][{s}]"),
                    message: format!(
                        "terminal reward must equal (1-gamma)*C = {expected}, got {r}"
                    ),
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// The three-state MDP used throughout the crate's documentation and tests.
///
/// States `{s1, s2, s3}` are indices `{0, 1, 2}`; state 2 is terminal; the two
/// actions are indices `{0, 1}`. Action 0 at s1 self-loops (reward -1), action
/// 1 moves to s2 (reward -1); action 0 at s2 returns to s1 (reward `gamma`),
/// action 1 enters the terminal state (reward -1). The loop s1 -> s2 -> s1 has
/// discounted gain exactly zero, which is what makes the discounted and
/// total-reward objectives disagree at a terminal value of zero.
pub fn build_example1(gamma: f64, terminal_value: f64) -> Result<Mdp> {
    if !(gamma.is_finite() && 0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let n = 3;
    let a = 2;
    let mut p = vec![0.0; n * a * n];
    let mut r = vec![0.0; n * a * n];
    let idx = |s: usize, ac: usize, s2: usize| (s * a + ac) * n + s2;

    p[idx(0, 0, 0)] = 1.0;
    r[idx(0, 0, 0)] = -1.0;
    p[idx(0, 1, 1)] = 1.0;
    r[idx(0, 1, 1)] = -1.0;
    p[idx(1, 0, 0)] = 1.0;
    r[idx(1, 0, 0)] = gamma;
    p[idx(1, 1, 2)] = 1.0;
    r[idx(1, 1, 2)] = -1.0;
    for ac in 0..a {
        p[idx(2, ac, 2)] = 1.0;
        r[idx(2, ac, 2)] = (1.0 - gamma) * terminal_value;
    }
    Mdp::new(n, a, vec![2], gamma, terminal_value, p, r)
}

/// Return a copy of `mdp` with terminal value `c`: the `terminal_value` field
/// and every terminal self-loop reward are rewritten to the `(1-gamma)*c`
/// convention. The input is left untouched.
pub fn set_terminal_value(mdp: &Mdp, c: f64) -> Result<Mdp> {
    if !c.is_finite() {
        return Err(Error::NonFinite {
            what: "terminal_value",
            value: c,
        });
    }
    let mut out = mdp.clone();
    out.terminal_value = c;
    let r = (1.0 - out.gamma) * c;
    for &s in &mdp.terminal {
        for a in 0..mdp.n_actions {
            let i = (s * mdp.n_actions + a) * mdp.n_states + s;
            out.reward[i] = r;
        }
    }
    Ok(out)
}

/// On-disk JSON schema. Tensors are nested `[state][action][next_state]`
/// arrays; unknown fields are rejected.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    n_states: usize,
    terminal: Vec<usize>,
    n_actions: usize,
    gamma: f64,
    terminal_value: f64,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

fn nest(flat: &[f64], n_states: usize, n_actions: usize) -> Vec<Vec<Vec<f64>>> {
    (0..n_states)
        .map(|s| {
            (0..n_actions)
                .map(|a| {
                    let i = (s * n_actions + a) * n_states;
                    flat[i..i + n_states].to_vec()
                })
                .collect()
        })
        .collect()
}

fn flatten(nested: Vec<Vec<Vec<f64>>>, n_states: usize, n_actions: usize) -> Result<Vec<f64>> {
    if nested.len() != n_states {
        return Err(Error::Shape(format!(
            "tensor has {} state slices, expected {n_states}",
            nested.len()
        )));
    }
    let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
    for (s, per_action) in nested.into_iter().enumerate() {
        if per_action.len() != n_actions {
            return Err(Error::Shape(format!(
                "tensor slice {s} has {} action rows, expected {n_actions}",
                per_action.len()
            )));
        }
        for (a, row) in per_action.into_iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::Shape(format!(
                    "tensor row [{s}][{a}] has {} entries, expected {n_states}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
    }
    Ok(flat)
}

/// Serialize an MDP to pretty-printed JSON. Floats round-trip exactly.
pub fn to_json_string(mdp: &Mdp) -> Result<String> {
    let file = MdpFile {
        n_states: mdp.n_states,
        terminal: mdp.terminal.clone(),
        n_actions: mdp.n_actions,
        gamma: mdp.gamma,
        terminal_value: mdp.terminal_value,
        transition: nest(&mdp.transition, mdp.n_states, mdp.n_actions),
        reward: nest(&mdp.reward, mdp.n_states, mdp.n_actions),
        labels: mdp.labels.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save<P: AsRef<Path>>(mdp: &Mdp, path: P) -> Result<()> {
    std::fs::write(path, to_json_string(mdp)?)?;
    Ok(())
}

/// Parse, structurally check, and validate an MDP file. A file that parses
/// but violates the invariants is rejected with the full report.
pub fn load<P: AsRef<Path>>(path: P) -> Result<Mdp> {
    let text = std::fs::read_to_string(path)?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Mdp> {
    let file: MdpFile = serde_json::from_str(text)?;
    let transition = flatten(file.transition, file.n_states, file.n_actions)?;
    let reward = flatten(file.reward, file.n_states, file.n_actions)?;
    let mut mdp = Mdp::new(
        file.n_states,
        file.n_actions,
        file.terminal,
        file.gamma,
        file.terminal_value,
        transition,
        reward,
    )?;
    if let Some(labels) = file.labels {
        mdp = mdp.with_labels(labels)?;
    }
    mdp.validate().into_result()?;
    Ok(mdp)
}
