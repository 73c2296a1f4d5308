//! Seeded generators for the benchmark environments.
//!
//! Two stochastic families and one deterministic family:
//!
//! - [`gen_lure_mdp`]: positive rewards with a large bonus on transitions
//!   into the terminal set, and exactly one terminal-avoiding action per
//!   state. The reward structure lures a discount-greedy agent into ending
//!   episodes even though endless interior rewards dominate in total.
//! - [`gen_deterrent_mdp`]: negative rewards with a large penalty on the
//!   single state-action pair that can reach the terminal set, deterring a
//!   discount-greedy agent from ever ending an episode.
//! - [`gen_constant_chain`]: a deterministic line with constant reward, the
//!   minimal environment where the `r_C / (1 - gamma)` threshold is sharp.
//!
//! Reproducibility contract: every generator consumes a single SplitMix64
//! stream seeded with `cfg.seed`, in the exact draw order documented on each
//! function. Same config, same bytes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::Mdp;
use crate::rng::Prng;

/// Generator configuration. Defaults: 10 states with 1 terminal, 3 actions,
/// discount 0.99, trajectory cap 500.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_states: usize,
    pub n_terminal: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub seed: u64,
    pub max_traj: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_states: 10,
            n_terminal: 1,
            n_actions: 3,
            gamma: 0.99,
            seed: 0,
            max_traj: 500,
        }
    }
}

impl GenConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn interior(&self) -> usize {
        self.n_states - self.n_terminal
    }

    fn terminal_indices(&self) -> Vec<usize> {
        (self.interior()..self.n_states).collect()
    }
}

/// Index helper for flat `[s][a][s']` tensors.
#[inline]
fn at(n_states: usize, n_actions: usize, s: usize, a: usize, s2: usize) -> usize {
    (s * n_actions + a) * n_states + s2
}

/// Positive-reward environment where ending the episode pays best per step.
///
/// Interior indices are `0..m` with `m = n_states - n_terminal`; terminal
/// indices follow. Draw order from the seed:
///
/// 1. interior-to-interior transition weights, uniform `[1, 2)`, loop order
///    `(s, a, s')`;
/// 2. interior-to-terminal transition weights, uniform `[1, 2)`, loop order
///    `(s, a, t)`;
/// 3. one avoided action per interior state, `choice(n_actions)` in state
///    order; its terminal weights are zeroed;
/// 4. interior-to-interior rewards, uniform `[0.1, 0.2)`;
/// 5. interior-to-terminal rewards, uniform `[19.9, 20.0)`.
///
/// Rows are normalized per `(s, a)`; terminal rows self-loop with terminal
/// value 0.
pub fn gen_lure_mdp(cfg: &GenConfig) -> Result<Mdp> {
    let m = cfg.interior();
    let n = cfg.n_states;
    let na = cfg.n_actions;
    let mut rng = Prng::new(cfg.seed);

    let mut weights = vec![0.0; n * na * n];
    for s in 0..m {
        for a in 0..na {
            for s2 in 0..m {
                weights[at(n, na, s, a, s2)] = rng.uniform(1.0, 2.0);
            }
        }
    }
    for s in 0..m {
        for a in 0..na {
            for t in m..n {
                weights[at(n, na, s, a, t)] = rng.uniform(1.0, 2.0);
            }
        }
    }
    for s in 0..m {
        let avoided = rng.choice(na);
        for t in m..n {
            weights[at(n, na, s, avoided, t)] = 0.0;
        }
    }

    let mut reward = vec![0.0; n * na * n];
    for s in 0..m {
        for a in 0..na {
            for s2 in 0..m {
                reward[at(n, na, s, a, s2)] = rng.uniform(0.1, 0.2);
            }
        }
    }
    for s in 0..m {
        for a in 0..na {
            for t in m..n {
                reward[at(n, na, s, a, t)] = rng.uniform(19.9, 20.0);
            }
        }
    }

    finish_stochastic(cfg, weights, reward)
}

/// Negative-reward environment where ending the episode costs most.
///
/// Draw order from the seed:
///
/// 1. interior-to-interior transition weights, uniform `[1, 2)`, loop order
///    `(s, a, s')`;
/// 2. the single absorbing pair: `s* = choice(m)`, then `a* = choice(n_actions)`;
/// 3. terminal weights of `(s*, a*)`, uniform `[0, 1)` per terminal state;
/// 4. interior-to-interior rewards, uniform `[-0.2, -0.1)`;
/// 5. interior-to-terminal rewards, uniform `[-20, -19.9)`.
pub fn gen_deterrent_mdp(cfg: &GenConfig) -> Result<Mdp> {
    let m = cfg.interior();
    let n = cfg.n_states;
    let na = cfg.n_actions;
    let mut rng = Prng::new(cfg.seed);

    let mut weights = vec![0.0; n * na * n];
    for s in 0..m {
        for a in 0..na {
            for s2 in 0..m {
                weights[at(n, na, s, a, s2)] = rng.uniform(1.0, 2.0);
            }
        }
    }
    let absorbing_state = rng.choice(m);
    let absorbing_action = rng.choice(na);
    for t in m..n {
        weights[at(n, na, absorbing_state, absorbing_action, t)] = rng.uniform(0.0, 1.0);
    }

    let mut reward = vec![0.0; n * na * n];
    for s in 0..m {
        for a in 0..na {
            for s2 in 0..m {
                reward[at(n, na, s, a, s2)] = rng.uniform(-0.2, -0.1);
            }
        }
    }
    for s in 0..m {
        for a in 0..na {
            for t in m..n {
                reward[at(n, na, s, a, t)] = rng.uniform(-20.0, -19.9);
            }
        }
    }

    finish_stochastic(cfg, weights, reward)
}

/// Normalize interior rows, add terminal self-loops, and build the MDP with
/// terminal value 0.
fn finish_stochastic(cfg: &GenConfig, mut weights: Vec<f64>, reward: Vec<f64>) -> Result<Mdp> {
    let m = cfg.interior();
    let n = cfg.n_states;
    let na = cfg.n_actions;
    for s in 0..m {
        for a in 0..na {
            let base = at(n, na, s, a, 0);
            let sum: f64 = weights[base..base + n].iter().sum();
            for v in &mut weights[base..base + n] {
                *v /= sum;
            }
        }
    }
    for t in m..n {
        for a in 0..na {
            weights[at(n, na, t, a, t)] = 1.0;
        }
    }
    Mdp::new(
        n,
        na,
        cfg.terminal_indices(),
        cfg.gamma,
        0.0,
        weights,
        reward,
    )
}

/// Deterministic line of `n` states with constant reward `r_c` on every
/// non-terminal transition. Action 0 advances toward the terminal state
/// `n - 1`; action 1 self-loops when `branch` is true and steps back
/// (clamped at state 0) otherwise. Terminal value starts at 0.
pub fn gen_constant_chain(n: usize, r_c: f64, gamma: f64, branch: bool) -> Result<Mdp> {
    assert!(n >= 3, "chain needs at least 3 states");
    assert!(r_c != 0.0, "constant reward must be non-zero");
    let na = 2;
    let terminal = n - 1;
    let mut p = vec![0.0; n * na * n];
    let mut r = vec![r_c; n * na * n];
    for s in 0..terminal {
        p[at(n, na, s, 0, s + 1)] = 1.0;
        let alt = if branch { s } else { s.saturating_sub(1) };
        p[at(n, na, s, 1, alt)] = 1.0;
    }
    for a in 0..na {
        for s2 in 0..n {
            r[at(n, na, terminal, a, s2)] = 0.0;
        }
        p[at(n, na, terminal, a, terminal)] = 1.0;
    }
    Mdp::new(n, na, vec![terminal], gamma, 0.0, p, r)
}
