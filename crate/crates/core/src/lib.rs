//! Exact analysis of finite Markov decision processes under two objectives:
//! the discounted return `V_gamma` and the undiscounted total return `V`.
//!
//! The crate provides:
//!
//! - a validated tabular MDP representation with JSON persistence ([`Mdp`]),
//! - Markov-chain structure under a fixed policy: k-step transition and
//!   absorption probabilities, episodicity, terminal accessibility, and the
//!   minimum positive absorption probability `delta` ([`chain`]),
//! - exact policy evaluation for both objectives, value iteration, and a
//!   brute-force enumeration oracle over all deterministic policies
//!   ([`solver`]),
//! - terminal-state-value thresholds that make the discounted-optimal policy
//!   total-reward optimal (or at least not total-reward worst), plus
//!   brute-force alignment verdicts ([`alignment`]),
//! - the discounted Bellman loss, its exact polynomial structure in the
//!   discount factor, and a closed-form suboptimality bound evaluator
//!   ([`bellman`]),
//! - seeded environment generators and a tabular Q-learning simulator that
//!   reproduces the alignment phenomenon end to end ([`generators`], [`sim`]).
//!
//! All operations are pure functions over immutable values; nothing in the
//! crate holds global state, so everything is safe to call concurrently.
//!
//! The built-in three-state example shows the whole story in a few lines:
//! at terminal value zero the discounted optimum is the total-reward worst
//! policy, and lifting the terminal value to `2 / gamma` re-aligns the two
//! objectives.
//!
//! ```
//! use mdpalign::{build_example1, check_alignment, DEFAULT_ENUM_CAP};
//!
//! let gamma = 0.9;
//! let mdp = build_example1(gamma, 0.0)?;
//!
//! let at_zero = check_alignment(&mdp, 0.0, DEFAULT_ENUM_CAP)?;
//! assert!(at_zero.opposed && !at_zero.aligned);
//!
//! let lifted = check_alignment(&mdp, 2.0 / gamma, DEFAULT_ENUM_CAP)?;
//! assert!(lifted.aligned && !lifted.opposed);
//! # Ok::<(), mdpalign::Error>(())
//! ```

pub mod alignment;
pub mod bellman;
pub mod chain;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod mdp;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod solver;

pub use alignment::{
    check_alignment, constant_reward_case, constant_reward_threshold,
    negative_reward_nonopposition_bound, positive_reward_alignment_bound, AlignmentBound,
    AlignmentVerdict, BoundKind, ConstantRewardCase, PolicyValueDetail, ThresholdSide,
};
pub use bellman::{
    bellman_loss, bellman_loss_with_form, loss_gamma_derivatives, loss_gamma_derivatives_with_form,
    suboptimality_bound, taylor_residual, taylor_residual_with_form, BoundInputs, ResidualForm,
    StateActionDistribution,
};
pub use chain::{
    absorption_prob, check_accessibility, compute_delta, is_episodic, k_step, policy_matrix,
    AccessibilityReport, DeltaResult, EpisodicityReport, POSITIVITY_TOL,
};
pub use error::{Error, Result};
pub use generators::{gen_constant_chain, gen_deterrent_mdp, gen_lure_mdp, GenConfig};
pub use linalg::Matrix;
pub use mdp::{
    build_example1, load, load_str, save, set_terminal_value, to_json_string, validate, Mdp,
    ValidationReport, Violation,
};
pub use policy::{enumerate_policies, DeterministicPolicy, PolicyIter, DEFAULT_ENUM_CAP};
pub use rng::Prng;
pub use sim::{
    evaluate_policy, q_learning, rollout, run_scenario, start_state, AgentConfig, EpisodeStats,
    RunOutcome, ScenarioKind, ScenarioOutcome, Trajectory,
};
pub use solver::{
    enumerate_policy_report, eval_discounted, eval_total, greedy_policy, value_iteration,
    ExtendedValue, Objective, PolicySetReport, QTable,
};
