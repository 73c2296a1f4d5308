//! Terminal-value thresholds that control whether the discounted-optimal
//! policy is also total-reward optimal, and brute-force alignment verdicts.
//!
//! Three sufficient conditions are implemented:
//!
//! - with all supported rewards positive, any terminal value below
//!   `(r_min - r_max) / (delta gamma^{|S|-1} (1 - gamma))` makes every
//!   discounted-optimal policy total-reward optimal;
//! - with all supported rewards negative, any terminal value above
//!   `(r_max - r_min) / (delta gamma^{|S|-1} (1 - gamma))` keeps the
//!   discounted-optimal policy out of the total-reward worst set;
//! - with a constant reward `r_C`, the threshold `r_C / (1 - gamma)`
//!   separates alignment with the total-reward best set from alignment with
//!   the worst set, on either side depending on the sign of `r_C`.

use serde::{Deserialize, Serialize};

use crate::chain::{check_accessibility, compute_delta};
use crate::error::{Error, Result};
use crate::mdp::{set_terminal_value, Mdp};
use crate::policy::DeterministicPolicy;
use crate::solver::{
    enumerate_policy_report, eval_discounted, eval_total, ExtendedValue, Objective,
};

/// Which sufficient condition produced a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Upper bound on `C` for alignment under positive rewards.
    PositiveRewardAlignment,
    /// Lower bound on `C` for non-opposition under negative rewards.
    NegativeRewardNonOpposition,
    /// Two-sided threshold for constant rewards.
    ConstantReward,
}

/// Whether a bound is an upper or lower limit on the terminal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSide {
    Below,
    Above,
}

/// A terminal-value threshold with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBound {
    pub kind: BoundKind,
    /// Sufficient values of `C` lie strictly on this side of `threshold`.
    pub side: ThresholdSide,
    pub threshold: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub gamma: f64,
    pub n_states: usize,
    pub delta: f64,
}

/// Verdict relating the discounted argmax set to the total-reward argmax and
/// argmin sets, computed by exhaustive enumeration.
#[derive(Debug, Clone, Serialize)]
pub struct AlignmentVerdict {
    /// Every discounted-optimal policy is total-reward optimal.
    pub aligned: bool,
    /// Some discounted-optimal policy is total-reward worst.
    pub opposed: bool,
    pub terminal_value: f64,
    pub discounted_optimal: Vec<DeterministicPolicy>,
    pub total_argmax: Vec<DeterministicPolicy>,
    pub total_argmin: Vec<DeterministicPolicy>,
    pub no_uniform_total_argmax: bool,
    pub no_uniform_total_argmin: bool,
    /// Per-state values of the distinguished policies under both objectives.
    pub detail: Vec<PolicyValueDetail>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyValueDetail {
    pub policy: DeterministicPolicy,
    pub discounted: Vec<f64>,
    pub total: Vec<ExtendedValue>,
}

fn delta_and_access(mdp: &Mdp, cap: u64) -> Result<f64> {
    let access = check_accessibility(mdp);
    if !access.part1 {
        return Err(Error::BoundPrecondition(
            "no non-terminal state can reach a terminal state under any policy".into(),
        ));
    }
    if !access.part2 {
        return Err(Error::BoundPrecondition(
            "some non-terminal state enters the terminal set under every action".into(),
        ));
    }
    Ok(compute_delta(mdp, cap)?.delta)
}

/// Threshold below which the discounted-optimal policy is guaranteed
/// total-reward optimal. Requires every supported reward to be positive and
/// terminal accessibility in both directions.
pub fn positive_reward_alignment_bound(mdp: &Mdp, cap: u64) -> Result<AlignmentBound> {
    let (r_min, r_max) = mdp.supported_reward_range();
    if r_min.is_nan() || r_min <= 0.0 {
        return Err(Error::BoundPrecondition(format!(
            "requires r_min > 0 over supported rewards, got r_min = {r_min}"
        )));
    }
    let delta = delta_and_access(mdp, cap)?;
    let gamma = mdp.gamma();
    let n = mdp.n_states();
    let threshold = (r_min - r_max) / (delta * gamma.powi(n as i32 - 1) * (1.0 - gamma));
    Ok(AlignmentBound {
        kind: BoundKind::PositiveRewardAlignment,
        side: ThresholdSide::Below,
        threshold,
        r_min,
        r_max,
        gamma,
        n_states: n,
        delta,
    })
}

/// Threshold above which the discounted-optimal policy is guaranteed not to
/// be total-reward worst. Requires every supported reward to be negative and
/// terminal accessibility in both directions.
pub fn negative_reward_nonopposition_bound(mdp: &Mdp, cap: u64) -> Result<AlignmentBound> {
    let (r_min, r_max) = mdp.supported_reward_range();
    if r_max.is_nan() || r_max >= 0.0 {
        return Err(Error::BoundPrecondition(format!(
            "requires r_max < 0 over supported rewards, got r_max = {r_max}"
        )));
    }
    let delta = delta_and_access(mdp, cap)?;
    let gamma = mdp.gamma();
    let n = mdp.n_states();
    let threshold = (r_max - r_min) / (delta * gamma.powi(n as i32 - 1) * (1.0 - gamma));
    Ok(AlignmentBound {
        kind: BoundKind::NegativeRewardNonOpposition,
        side: ThresholdSide::Above,
        threshold,
        r_min,
        r_max,
        gamma,
        n_states: n,
        delta,
    })
}

/// The constant-reward threshold `r_C / (1 - gamma)`.
///
/// For `r_C > 0`, terminal values below the threshold align the discounted
/// optimum with the total-reward best set and values above align it with the
/// worst set; for `r_C < 0` the sides swap. `r_C = 0` has no meaningful
/// threshold and is rejected.
pub fn constant_reward_threshold(r_c: f64, gamma: f64) -> Result<f64> {
    if !r_c.is_finite() {
        return Err(Error::NonFinite {
            what: "r_C",
            value: r_c,
        });
    }
    if r_c == 0.0 {
        return Err(Error::BoundPrecondition(
            "constant reward r_C must be non-zero".into(),
        ));
    }
    if !(gamma.is_finite() && 0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(r_c / (1.0 - gamma))
}

/// Side-of-threshold case analysis for the constant-reward condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantRewardCase {
    /// The discounted optimum lands in the total-reward argmax.
    AlignsWithBest,
    /// The discounted optimum lands in the total-reward argmin.
    AlignsWithWorst,
    /// Exactly on the threshold: no verdict.
    Boundary,
}

pub fn constant_reward_case(r_c: f64, gamma: f64, c: f64) -> Result<ConstantRewardCase> {
    let threshold = constant_reward_threshold(r_c, gamma)?;
    if c == threshold {
        return Ok(ConstantRewardCase::Boundary);
    }
    let below = c < threshold;
    Ok(if (r_c > 0.0) == below {
        ConstantRewardCase::AlignsWithBest
    } else {
        ConstantRewardCase::AlignsWithWorst
    })
}

/// Set the terminal value to `c` and compare the brute-force discounted
/// argmax set against the total-reward argmax/argmin sets.
pub fn check_alignment(mdp: &Mdp, c: f64, cap: u64) -> Result<AlignmentVerdict> {
    let mdp = set_terminal_value(mdp, c)?;
    let disc = enumerate_policy_report(&mdp, Objective::Discounted, cap)?;
    let total = enumerate_policy_report(&mdp, Objective::Total, cap)?;

    let aligned = !disc.argmax.is_empty() && disc.argmax.iter().all(|p| total.argmax.contains(p));
    let opposed = disc.argmax.iter().any(|p| total.argmin.contains(p));

    let mut distinguished: Vec<DeterministicPolicy> = Vec::new();
    for p in disc.argmax.iter().chain(&total.argmax).chain(&total.argmin) {
        if !distinguished.contains(p) {
            distinguished.push(p.clone());
        }
    }
    let detail = distinguished
        .into_iter()
        .map(|policy| {
            let discounted = eval_discounted(&mdp, &policy)?;
            let total = eval_total(&mdp, &policy)?;
            Ok(PolicyValueDetail {
                policy,
                discounted,
                total,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AlignmentVerdict {
        aligned,
        opposed,
        terminal_value: c,
        discounted_optimal: disc.argmax,
        total_argmax: total.argmax,
        total_argmin: total.argmin,
        no_uniform_total_argmax: total.no_uniform_argmax,
        no_uniform_total_argmin: total.no_uniform_argmin,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::build_example1;
    use crate::policy::DEFAULT_ENUM_CAP;

    /// Deterministic 3-state MDP where each state also has a terminal-avoiding
    /// action. Rewards are offset by `shift` so both signed variants exist.
    fn two_action_chain(reward_shift: f64, gamma: f64) -> Mdp {
        let n = 3;
        let a = 2;
        let idx = |s: usize, ac: usize, s2: usize| (s * a + ac) * n + s2;
        let mut p = vec![0.0; n * a * n];
        let mut r = vec![0.0; n * a * n];
        // State 0: action 0 advances (reward 2), action 1 self-loops (reward 1).
        p[idx(0, 0, 1)] = 1.0;
        r[idx(0, 0, 1)] = 2.0 + reward_shift;
        p[idx(0, 1, 0)] = 1.0;
        r[idx(0, 1, 0)] = 1.0 + reward_shift;
        // State 1: action 0 absorbs (reward 1), action 1 returns (reward 1).
        p[idx(1, 0, 2)] = 1.0;
        r[idx(1, 0, 2)] = 1.0 + reward_shift;
        p[idx(1, 1, 0)] = 1.0;
        r[idx(1, 1, 0)] = 1.0 + reward_shift;
        for ac in 0..a {
            p[idx(2, ac, 2)] = 1.0;
        }
        Mdp::new(n, a, vec![2], gamma, 0.0, p, r).unwrap()
    }

    #[test]
    fn positive_bound_formula() {
        // delta = 1, r_min = 1, r_max = 2, gamma = 0.5, |S| = 3:
        // (1 - 2) / (1 * 0.25 * 0.5) = -8.
        let mdp = two_action_chain(0.0, 0.5);
        let bound = positive_reward_alignment_bound(&mdp, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(bound.delta, 1.0);
        assert_eq!(bound.r_min, 1.0);
        assert_eq!(bound.r_max, 2.0);
        assert!((bound.threshold - (-8.0)).abs() < 1e-12);
        assert_eq!(bound.side, ThresholdSide::Below);
    }

    #[test]
    fn negative_bound_formula() {
        // Shift rewards to [-2, -1]: (r_max - r_min) / (0.25 * 0.5) = 8.
        let mdp = two_action_chain(-3.0, 0.5);
        let bound = negative_reward_nonopposition_bound(&mdp, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(bound.r_min, -2.0);
        assert_eq!(bound.r_max, -1.0);
        assert!((bound.threshold - 8.0).abs() < 1e-12);
        assert_eq!(bound.side, ThresholdSide::Above);
    }

    #[test]
    fn bounds_are_antisymmetric_under_reward_sign_flip() {
        let pos =
            positive_reward_alignment_bound(&two_action_chain(0.0, 0.5), DEFAULT_ENUM_CAP).unwrap();
        let neg =
            negative_reward_nonopposition_bound(&two_action_chain(-3.0, 0.5), DEFAULT_ENUM_CAP)
                .unwrap();
        assert!((pos.threshold + neg.threshold).abs() < 1e-12);
    }

    #[test]
    fn positive_bound_diverges_as_gamma_approaches_one() {
        let mut last = 0.0;
        for gamma in [0.9, 0.99, 0.999] {
            let bound =
                positive_reward_alignment_bound(&two_action_chain(0.0, gamma), DEFAULT_ENUM_CAP)
                    .unwrap();
            assert!(bound.threshold < last);
            last = bound.threshold;
        }
        assert!(last < -1e3);
    }

    #[test]
    fn positive_bound_rejects_nonpositive_rewards() {
        let mdp = two_action_chain(-3.0, 0.5);
        assert!(matches!(
            positive_reward_alignment_bound(&mdp, DEFAULT_ENUM_CAP),
            Err(Error::BoundPrecondition(_))
        ));
    }

    #[test]
    fn negative_bound_rejects_nonnegative_rewards() {
        let mdp = two_action_chain(0.0, 0.5);
        assert!(matches!(
            negative_reward_nonopposition_bound(&mdp, DEFAULT_ENUM_CAP),
            Err(Error::BoundPrecondition(_))
        ));
    }

    #[test]
    fn constant_threshold_values() {
        assert!((constant_reward_threshold(1.0, 0.99).unwrap() - 100.0).abs() < 1e-9);
        assert!((constant_reward_threshold(-1.0, 0.99).unwrap() + 100.0).abs() < 1e-9);
        assert_eq!(constant_reward_threshold(1.0, 0.5).unwrap(), 2.0);
        assert!(constant_reward_threshold(0.0, 0.9).is_err());
        assert!(constant_reward_threshold(1.0, 1.0).is_err());
    }

    #[test]
    fn constant_reward_cases() {
        use ConstantRewardCase::*;
        assert_eq!(
            constant_reward_case(1.0, 0.99, 0.0).unwrap(),
            AlignsWithBest
        );
        assert_eq!(
            constant_reward_case(1.0, 0.99, 200.0).unwrap(),
            AlignsWithWorst
        );
        assert_eq!(
            constant_reward_case(-1.0, 0.99, 0.0).unwrap(),
            AlignsWithBest
        );
        assert_eq!(
            constant_reward_case(-1.0, 0.99, -200.0).unwrap(),
            AlignsWithWorst
        );
        // gamma = 0.5 keeps the threshold exactly representable.
        assert_eq!(constant_reward_case(1.0, 0.5, 2.0).unwrap(), Boundary);
    }

    #[test]
    fn example1_opposed_at_zero_terminal_value() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let verdict = check_alignment(&mdp, 0.0, DEFAULT_ENUM_CAP).unwrap();
        assert!(!verdict.aligned);
        assert!(verdict.opposed);
        assert_eq!(verdict.discounted_optimal.len(), 1);
        assert_eq!(verdict.discounted_optimal[0].actions(), &[1, 0]);
    }

    #[test]
    fn example1_aligned_at_lifted_terminal_value() {
        let gamma = 0.9;
        let mdp = build_example1(gamma, 0.0).unwrap();
        let verdict = check_alignment(&mdp, 2.0 / gamma, DEFAULT_ENUM_CAP).unwrap();
        assert!(verdict.aligned);
        assert!(!verdict.opposed);
        assert_eq!(verdict.discounted_optimal.len(), 1);
        assert_eq!(verdict.discounted_optimal[0].actions(), &[1, 1]);
    }

    #[test]
    fn example1_total_argmax_ignores_terminal_value() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        for c in [-5.0, 0.0, 2.0 / 0.9, 42.0] {
            let verdict = check_alignment(&mdp, c, DEFAULT_ENUM_CAP).unwrap();
            assert_eq!(verdict.total_argmax.len(), 1);
            assert_eq!(verdict.total_argmax[0].actions(), &[1, 1]);
        }
    }

    #[test]
    fn example1_policy_switch_located_by_bisection() {
        // The discounted optimum flips from (a2, a1) to (a2, a2) at a finite
        // terminal value; closed-form comparison of the two value functions
        // puts the switch exactly at 1/gamma.
        let gamma = 0.9;
        let mdp = build_example1(gamma, 0.0).unwrap();
        let switched = |c: f64| -> bool {
            let verdict = check_alignment(&mdp, c, DEFAULT_ENUM_CAP).unwrap();
            verdict
                .discounted_optimal
                .iter()
                .any(|p| p.actions() == [1, 1])
        };
        assert!(!switched(0.0));
        assert!(switched(10.0));
        let (mut lo, mut hi) = (0.0, 10.0);
        while hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if switched(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((hi - 1.0 / gamma).abs() < 1e-6, "switch at {hi}");
    }
}
