//! Episode simulation and a tabular Q-learning agent whose terminal
//! bootstrap target is the terminal state value.
//!
//! The agent never updates from a terminal state: an episode ends the moment
//! it enters the terminal set (or hits the cap), and the backup for a
//! transition into a terminal state uses the constant `terminal_value`
//! instead of `max_a' Q(s', a')`. That constant is the single lever through
//! which the terminal value shapes the learned policy.

use serde::{Deserialize, Serialize};

use crate::alignment::{
    negative_reward_nonopposition_bound, positive_reward_alignment_bound, AlignmentBound,
};
use crate::error::Result;
use crate::generators::{gen_deterrent_mdp, gen_lure_mdp, GenConfig};
use crate::mdp::{set_terminal_value, Mdp};
use crate::policy::DeterministicPolicy;
use crate::rng::Prng;
use crate::solver::{greedy_policy, QTable};

/// One sampled episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Visited states, starting at the initial state; one longer than
    /// `actions` and `rewards`.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Undiscounted reward sum; terminal self-loop rewards never appear
    /// because episodes stop on terminal entry.
    pub total_reward: f64,
    pub length: usize,
    /// True exactly when the cap was hit before reaching a terminal state.
    pub capped: bool,
}

/// Q-learning hyperparameters. `gamma` and `terminal_value` default to the
/// MDP's own values via [`AgentConfig::for_mdp`]; the exploration probability
/// halves every `eps_halve_every` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub eps_halve_every: usize,
    pub episodes: usize,
    pub cap: usize,
    /// Bootstrap value for transitions into the terminal set.
    pub terminal_value: f64,
    pub seed: u64,
}

impl AgentConfig {
    pub fn for_mdp(mdp: &Mdp) -> Self {
        AgentConfig {
            alpha: 0.1,
            gamma: mdp.gamma(),
            eps0: 0.5,
            eps_halve_every: 300,
            episodes: 400,
            cap: 500,
            terminal_value: mdp.terminal_value(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_terminal_value(mut self, c: f64) -> Self {
        self.terminal_value = c;
        self
    }

    pub fn with_eps_halve_every(mut self, steps: usize) -> Self {
        self.eps_halve_every = steps;
        self
    }
}

/// Per-episode reward and length series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub total_rewards: Vec<f64>,
    pub lengths: Vec<usize>,
    /// Exploration probability at the end of each episode (zero when the
    /// series comes from plain policy evaluation).
    pub epsilons: Vec<f64>,
}

impl EpisodeStats {
    pub fn episodes(&self) -> usize {
        self.lengths.len()
    }

    pub fn mean_reward(&self) -> f64 {
        mean(&self.total_rewards)
    }

    pub fn mean_length(&self) -> f64 {
        mean(&self.lengths.iter().map(|&l| l as f64).collect::<Vec<_>>())
    }

    /// Trailing moving average with the window clipped at the start.
    pub fn smoothed_rewards(&self, window: usize) -> Vec<f64> {
        moving_average(&self.total_rewards, window)
    }

    pub fn smoothed_lengths(&self, window: usize) -> Vec<f64> {
        let as_f64: Vec<f64> = self.lengths.iter().map(|&l| l as f64).collect();
        moving_average(&as_f64, window)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    xs.iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = i.saturating_sub(w - 1);
            mean(&xs[lo..=i])
        })
        .collect()
}

/// Sample a successor from `P[s][a][·]` by inverse CDF.
fn sample_next(mdp: &Mdp, s: usize, a: usize, rng: &mut Prng) -> usize {
    let u = rng.uniform01();
    let row = mdp.transition_row(s, a);
    let mut cum = 0.0;
    for (s2, &p) in row.iter().enumerate() {
        cum += p;
        if u < cum {
            return s2;
        }
    }
    // Rounding can leave cum marginally below 1; fall back to the last
    // state with positive probability.
    row.iter().rposition(|&p| p > 0.0).expect("stochastic row")
}

/// Smallest non-terminal state; the conventional start state.
pub fn start_state(mdp: &Mdp) -> usize {
    mdp.nonterminal()[0]
}

/// Sample one episode under a fixed policy, stopping on terminal entry or
/// after `cap` steps.
pub fn rollout(
    mdp: &Mdp,
    pi: &DeterministicPolicy,
    s0: usize,
    cap: usize,
    seed: u64,
) -> Trajectory {
    let mut rng = Prng::new(seed);
    rollout_with(mdp, pi, s0, cap, &mut rng)
}

fn rollout_with(
    mdp: &Mdp,
    pi: &DeterministicPolicy,
    s0: usize,
    cap: usize,
    rng: &mut Prng,
) -> Trajectory {
    assert!(
        !mdp.is_terminal(s0),
        "rollout must start from a non-terminal state"
    );
    let mut states = vec![s0];
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut s = s0;
    let mut total = 0.0;
    while actions.len() < cap {
        let a = pi.action_for(mdp, s).expect("non-terminal");
        let s2 = sample_next(mdp, s, a, rng);
        let r = mdp.reward(s, a, s2);
        actions.push(a);
        rewards.push(r);
        states.push(s2);
        total += r;
        if mdp.is_terminal(s2) {
            break;
        }
        s = s2;
    }
    let length = actions.len();
    let capped = length == cap && !mdp.is_terminal(*states.last().unwrap());
    Trajectory {
        states,
        actions,
        rewards,
        total_reward: total,
        length,
        capped,
    }
}

/// Tabular Q-learning with epsilon-greedy behavior.
///
/// Update rule: `Q(s,a) += alpha (r + gamma B(s') - Q(s,a))` where `B(s')` is
/// `terminal_value` when `s'` is terminal and `max_a' Q(s',a')` otherwise.
/// Epsilon starts at `eps0` and is halved every `eps_halve_every` environment
/// steps (counted across episodes). Episodes start from [`start_state`].
/// Per step the generator is consumed in a fixed order: one draw for the
/// explore decision, one more for the action when exploring, then one for
/// the transition.
pub fn q_learning(mdp: &Mdp, cfg: &AgentConfig) -> (QTable, EpisodeStats) {
    assert!(
        cfg.alpha > 0.0 && cfg.alpha <= 1.0,
        "learning rate must lie in (0, 1], got {}",
        cfg.alpha
    );
    assert!(
        (0.0..=1.0).contains(&cfg.eps0),
        "initial exploration must lie in [0, 1], got {}",
        cfg.eps0
    );
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut q = vec![vec![0.0; na]; n];
    let mut rng = Prng::new(cfg.seed);
    let mut steps = 0usize;
    let mut stats = EpisodeStats {
        total_rewards: Vec::with_capacity(cfg.episodes),
        lengths: Vec::with_capacity(cfg.episodes),
        epsilons: Vec::with_capacity(cfg.episodes),
    };
    let s0 = start_state(mdp);

    for _ in 0..cfg.episodes {
        let mut s = s0;
        let mut total = 0.0;
        let mut len = 0usize;
        let mut eps = cfg.eps0;
        while len < cfg.cap {
            eps = cfg.eps0 * 0.5f64.powi((steps / cfg.eps_halve_every.max(1)) as i32);
            let a = if rng.uniform01() < eps {
                rng.choice(na)
            } else {
                greedy_action(&q[s])
            };
            let s2 = sample_next(mdp, s, a, &mut rng);
            let r = mdp.reward(s, a, s2);
            let bootstrap = if mdp.is_terminal(s2) {
                cfg.terminal_value
            } else {
                q[s2].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            q[s][a] += cfg.alpha * (r + cfg.gamma * bootstrap - q[s][a]);
            total += r;
            len += 1;
            steps += 1;
            if mdp.is_terminal(s2) {
                break;
            }
            s = s2;
        }
        stats.total_rewards.push(total);
        stats.lengths.push(len);
        stats.epsilons.push(eps);
    }

    for &t in mdp.terminal() {
        q[t] = vec![cfg.terminal_value; na];
    }
    (
        QTable {
            q,
            gamma: cfg.gamma,
        },
        stats,
    )
}

#[inline]
fn greedy_action(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Repeated rollouts of a fixed policy from the conventional start state.
pub fn evaluate_policy(
    mdp: &Mdp,
    pi: &DeterministicPolicy,
    episodes: usize,
    cap: usize,
    seed: u64,
) -> EpisodeStats {
    let mut rng = Prng::new(seed);
    let s0 = start_state(mdp);
    let mut stats = EpisodeStats {
        total_rewards: Vec::with_capacity(episodes),
        lengths: Vec::with_capacity(episodes),
        epsilons: vec![0.0; episodes],
    };
    for _ in 0..episodes {
        let t = rollout_with(mdp, pi, s0, cap, &mut rng);
        stats.total_rewards.push(t.total_reward);
        stats.lengths.push(t.length);
    }
    stats
}

/// Which benchmark family a reproduction run draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Positive rewards, terminal bonus; the aligned terminal value makes the
    /// agent avoid termination entirely.
    Lure,
    /// Negative rewards, terminal penalty; the aligned terminal value makes
    /// the agent seek termination.
    Deterrent,
}

/// One training-plus-evaluation run at a fixed terminal value.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub terminal_value: f64,
    pub greedy: DeterministicPolicy,
    /// Learning curves from training.
    pub training: EpisodeStats,
    /// Rollout statistics of the final greedy policy.
    pub eval: EpisodeStats,
}

/// Outcome of one seed of a scenario: the same environment trained once with
/// terminal value zero and once with the aligned terminal value.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub bound: AlignmentBound,
    pub aligned_terminal_value: f64,
    pub zero: RunOutcome,
    pub aligned: RunOutcome,
}

/// The benchmark protocol this simulator stands in for trains a batched
/// value learner: its exploration probability halves every 300 *gradient*
/// steps, and each gradient step averages a replayed batch of 128
/// transitions. A tabular agent performs one single-transition update per
/// environment step, so the equivalent tabular schedule halves every
/// `300 * 128` environment steps, and the equivalent constant step size is
/// smaller by roughly the square root of the batch size (the batch averaging
/// that suppresses target noise has no tabular counterpart otherwise).
const SCENARIO_EPS_HALVE_EVERY: usize = 300 * 128;
const SCENARIO_ALPHA: f64 = 0.02;

/// Generate the scenario MDP for `seed`, compute the sufficient terminal
/// value (threshold scaled by `factor`), and run Q-learning plus greedy
/// evaluation at terminal values zero and aligned.
pub fn run_scenario(
    kind: ScenarioKind,
    base: &GenConfig,
    seed: u64,
    episodes: usize,
    eval_episodes: usize,
    factor: f64,
    enum_cap: u64,
) -> Result<ScenarioOutcome> {
    let cfg = base.with_seed(seed);
    let (mdp, bound, eps0) = match kind {
        ScenarioKind::Lure => {
            let mdp = gen_lure_mdp(&cfg)?;
            let bound = positive_reward_alignment_bound(&mdp, enum_cap)?;
            (mdp, bound, 0.5)
        }
        ScenarioKind::Deterrent => {
            let mdp = gen_deterrent_mdp(&cfg)?;
            let bound = negative_reward_nonopposition_bound(&mdp, enum_cap)?;
            (mdp, bound, 0.2)
        }
    };
    let aligned_c = factor * bound.threshold;

    let run_at = |c: f64| -> Result<RunOutcome> {
        let env = set_terminal_value(&mdp, c)?;
        let agent = AgentConfig::for_mdp(&env)
            .with_seed(seed)
            .with_episodes(episodes)
            .with_eps0(eps0)
            .with_cap(cfg.max_traj)
            .with_alpha(SCENARIO_ALPHA)
            .with_eps_halve_every(SCENARIO_EPS_HALVE_EVERY);
        let (q, training) = q_learning(&env, &agent);
        let greedy = greedy_policy(&env, &q);
        let eval = evaluate_policy(&env, &greedy, eval_episodes, cfg.max_traj, seed);
        Ok(RunOutcome {
            terminal_value: c,
            greedy,
            training,
            eval,
        })
    };

    let zero = run_at(0.0)?;
    let aligned = run_at(aligned_c)?;
    Ok(ScenarioOutcome {
        kind,
        seed,
        bound,
        aligned_terminal_value: aligned_c,
        zero,
        aligned,
    })
}
