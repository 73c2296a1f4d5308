//! The discounted Bellman optimality loss, its exact quadratic structure in
//! the discount factor, and a closed-form suboptimality bound evaluator.
//!
//! For a fixed Q-table the loss is a degree-2 polynomial in the evaluation
//! discount, so its first two derivatives are analytic and the second-order
//! Taylor expansion around any point is exact. [`taylor_residual`] checks
//! that identity numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::solver::QTable;

/// How the expectation over the successor state interacts with the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualForm {
    /// The squared residual is averaged over `(s, a, s')` triples
    /// (double-sampling form). This is the default.
    PerSuccessor,
    /// The expectation over `s'` is taken inside the square, so each `(s, a)`
    /// contributes one squared mean residual.
    MeanInside,
}

/// A weighting over non-terminal state-action pairs, non-negative and
/// summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateActionDistribution {
    /// `weights[i][a]` for the i-th non-terminal state (ascending order).
    weights: Vec<Vec<f64>>,
}

impl StateActionDistribution {
    pub fn new(mdp: &Mdp, weights: Vec<Vec<f64>>) -> Result<Self> {
        let m = mdp.nonterminal().len();
        if weights.len() != m || weights.iter().any(|row| row.len() != mdp.n_actions()) {
            return Err(Error::Shape(format!(
                "distribution must be {m} x {}",
                mdp.n_actions()
            )));
        }
        let mut sum = 0.0;
        for row in &weights {
            for &w in row {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "distribution weight {w} must be finite and non-negative"
                    )));
                }
                sum += w;
            }
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "distribution weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(StateActionDistribution { weights })
    }

    /// Uniform weighting over all non-terminal state-action pairs.
    pub fn uniform(mdp: &Mdp) -> Self {
        let m = mdp.nonterminal().len();
        let w = 1.0 / (m * mdp.n_actions()) as f64;
        StateActionDistribution {
            weights: vec![vec![w; mdp.n_actions()]; m],
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }
}

fn check_shapes(mdp: &Mdp, q: &QTable, dist: &StateActionDistribution) -> Result<()> {
    if q.q.len() != mdp.n_states() || q.q.iter().any(|row| row.len() != mdp.n_actions()) {
        return Err(Error::Shape(format!(
            "Q-table must be {} x {}",
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    if dist.weights.len() != mdp.nonterminal().len() {
        return Err(Error::Shape("distribution does not match the MDP".into()));
    }
    Ok(())
}

fn check_gamma_eval(gamma_eval: f64) -> Result<()> {
    if !(gamma_eval.is_finite() && 0.0 < gamma_eval && gamma_eval <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma_eval must lie in (0, 1], got {gamma_eval}"
        )));
    }
    Ok(())
}

/// Squared Bellman residual of `q` under `dist`, evaluated at discount
/// `gamma_eval` over the exact finite support. `gamma_eval = 1` gives the
/// undiscounted Bellman loss. Uses the per-successor residual form.
pub fn bellman_loss(
    mdp: &Mdp,
    q: &QTable,
    dist: &StateActionDistribution,
    gamma_eval: f64,
) -> Result<f64> {
    bellman_loss_with_form(mdp, q, dist, gamma_eval, ResidualForm::PerSuccessor)
}

pub fn bellman_loss_with_form(
    mdp: &Mdp,
    q: &QTable,
    dist: &StateActionDistribution,
    gamma_eval: f64,
    form: ResidualForm,
) -> Result<f64> {
    check_shapes(mdp, q, dist)?;
    check_gamma_eval(gamma_eval)?;
    let state_max: Vec<f64> = (0..mdp.n_states()).map(|s| q.state_max(s)).collect();
    let mut loss = 0.0;
    for (i, &s) in mdp.nonterminal().iter().enumerate() {
        for a in 0..mdp.n_actions() {
            let w = dist.weights[i][a];
            if w == 0.0 {
                continue;
            }
            let prow = mdp.transition_row(s, a);
            let rrow = mdp.reward_row(s, a);
            match form {
                ResidualForm::PerSuccessor => {
                    let mut acc = 0.0;
                    for s2 in 0..mdp.n_states() {
                        let p = prow[s2];
                        if p == 0.0 {
                            continue;
                        }
                        let e = q.q[s][a] - rrow[s2] - gamma_eval * state_max[s2];
                        acc += p * e * e;
                    }
                    loss += w * acc;
                }
                ResidualForm::MeanInside => {
                    let mut mean = 0.0;
                    for s2 in 0..mdp.n_states() {
                        let p = prow[s2];
                        if p == 0.0 {
                            continue;
                        }
                        mean += p * (rrow[s2] + gamma_eval * state_max[s2]);
                    }
                    let e = q.q[s][a] - mean;
                    loss += w * e * e;
                }
            }
        }
    }
    Ok(loss)
}

/// First and second derivatives of the loss with respect to the evaluation
/// discount, computed analytically from the quadratic structure: with
/// residual `e = q(s,a) - r - gamma M(s')` and `M(s') = max_a' q(s',a')`,
/// the first derivative is `-2 E[M e]` and the second is the constant
/// `2 E[M^2]`. Uses the per-successor residual form.
pub fn loss_gamma_derivatives(
    mdp: &Mdp,
    q: &QTable,
    dist: &StateActionDistribution,
    gamma: f64,
) -> Result<(f64, f64)> {
    loss_gamma_derivatives_with_form(mdp, q, dist, gamma, ResidualForm::PerSuccessor)
}

pub fn loss_gamma_derivatives_with_form(
    mdp: &Mdp,
    q: &QTable,
    dist: &StateActionDistribution,
    gamma: f64,
    form: ResidualForm,
) -> Result<(f64, f64)> {
    check_shapes(mdp, q, dist)?;
    check_gamma_eval(gamma)?;
    let state_max: Vec<f64> = (0..mdp.n_states()).map(|s| q.state_max(s)).collect();
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (i, &s) in mdp.nonterminal().iter().enumerate() {
        for a in 0..mdp.n_actions() {
            let w = dist.weights[i][a];
            if w == 0.0 {
                continue;
            }
            let prow = mdp.transition_row(s, a);
            let rrow = mdp.reward_row(s, a);
            match form {
                ResidualForm::PerSuccessor => {
                    for s2 in 0..mdp.n_states() {
                        let p = prow[s2];
                        if p == 0.0 {
                            continue;
                        }
                        let m = state_max[s2];
                        let e = q.q[s][a] - rrow[s2] - gamma * m;
                        d1 += w * p * (-2.0) * m * e;
                        d2 += w * p * 2.0 * m * m;
                    }
                }
                ResidualForm::MeanInside => {
                    let mut mean_m = 0.0;
                    let mut mean_r = 0.0;
                    for s2 in 0..mdp.n_states() {
                        let p = prow[s2];
                        if p == 0.0 {
                            continue;
                        }
                        mean_m += p * state_max[s2];
                        mean_r += p * rrow[s2];
                    }
                    let e = q.q[s][a] - mean_r - gamma * mean_m;
                    d1 += w * (-2.0) * mean_m * e;
                    d2 += w * 2.0 * mean_m * mean_m;
                }
            }
        }
    }
    Ok((d1, d2))
}

/// Absolute defect of the second-order Taylor identity
/// `L(q, 1) = L(q, gamma) + d1 (1-gamma) + d2 (1-gamma)^2 / 2`.
/// The loss is exactly quadratic in the discount, so this is zero up to
/// rounding.
pub fn taylor_residual(
    mdp: &Mdp,
    q: &QTable,
    dist: &StateActionDistribution,
    gamma: f64,
) -> Result<f64> {
    taylor_residual_with_form(mdp, q, dist, gamma, ResidualForm::PerSuccessor)
}

pub fn taylor_residual_with_form(
    mdp: &Mdp,
    q: &QTable,
    dist: &StateActionDistribution,
    gamma: f64,
    form: ResidualForm,
) -> Result<f64> {
    let at_one = bellman_loss_with_form(mdp, q, dist, 1.0, form)?;
    let at_gamma = bellman_loss_with_form(mdp, q, dist, gamma, form)?;
    let (d1, d2) = loss_gamma_derivatives_with_form(mdp, q, dist, gamma, form)?;
    let h = 1.0 - gamma;
    Ok((at_one - at_gamma - d1 * h - 0.5 * d2 * h * h).abs())
}

/// Inputs to the closed-form suboptimality bound. The Barron norm of the
/// optimal Q-table and the concentrability constant are caller-supplied;
/// nothing here estimates them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Network width per action.
    pub m: usize,
    /// Discount factor in `(0, 1]`.
    pub gamma: f64,
    /// Sup-norm bound on state embeddings.
    pub z: f64,
    /// Horizon within which every policy is absorbed.
    pub horizon: usize,
    /// Concentrability constant (at least 1).
    pub concentrability: f64,
    /// Barron norm of the optimal Q-table.
    pub barron_norm: f64,
}

impl BoundInputs {
    pub fn new(
        m: usize,
        gamma: f64,
        z: f64,
        horizon: usize,
        concentrability: f64,
        barron_norm: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("width m must be at least 1".into()));
        }
        if !(gamma.is_finite() && 0.0 < gamma && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        if !(z.is_finite() && z >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Z must be finite and >= 0, got {z}"
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if !(concentrability.is_finite() && concentrability >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "concentrability must be >= 1, got {concentrability}"
            )));
        }
        if !(barron_norm.is_finite() && barron_norm >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "barron_norm must be finite and >= 0, got {barron_norm}"
            )));
        }
        Ok(BoundInputs {
            m,
            gamma,
            z,
            horizon,
            concentrability,
            barron_norm,
        })
    }
}

/// Evaluate `2 H sqrt(C (12/m + 2 (1-gamma) Z sqrt(12/m) + (1-gamma)^2 Z)) B`
/// exactly as written.
pub fn suboptimality_bound(b: &BoundInputs) -> f64 {
    let m = b.m as f64;
    let one_minus = 1.0 - b.gamma;
    let bracket =
        12.0 / m + 2.0 * one_minus * b.z * (12.0 / m).sqrt() + one_minus * one_minus * b.z;
    2.0 * b.horizon as f64 * (b.concentrability * bracket).sqrt() * b.barron_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::build_example1;
    use crate::rng::Prng;
    use crate::solver::value_iteration;

    fn constant_q(mdp: &Mdp, c: f64) -> QTable {
        QTable {
            q: vec![vec![c; mdp.n_actions()]; mdp.n_states()],
            gamma: mdp.gamma(),
        }
    }

    /// Dense random MDP plus random Q-table and distribution; used as fodder
    /// for the structural identities.
    fn random_setup(seed: u64, n: usize, na: usize) -> (Mdp, QTable, StateActionDistribution) {
        let mut rng = Prng::new(seed);
        let mut p = vec![0.0; n * na * n];
        let mut r = vec![0.0; n * na * n];
        let terminal = n - 1;
        for s in 0..n {
            for a in 0..na {
                let base = (s * na + a) * n;
                if s == terminal {
                    p[base + terminal] = 1.0;
                } else {
                    let mut sum = 0.0;
                    for s2 in 0..n {
                        let w = rng.uniform(0.05, 1.0);
                        p[base + s2] = w;
                        sum += w;
                    }
                    for s2 in 0..n {
                        p[base + s2] /= sum;
                        r[base + s2] = rng.uniform(-2.0, 2.0);
                    }
                }
            }
        }
        let mdp = Mdp::new(n, na, vec![terminal], 0.9, 0.0, p, r).unwrap();
        let q = QTable {
            q: (0..n)
                .map(|_| (0..na).map(|_| rng.uniform(-3.0, 3.0)).collect())
                .collect(),
            gamma: 0.9,
        };
        let m = mdp.nonterminal().len();
        let mut weights = vec![vec![0.0; na]; m];
        let mut sum = 0.0;
        for row in weights.iter_mut() {
            for w in row.iter_mut() {
                *w = rng.uniform(0.0, 1.0);
                sum += *w;
            }
        }
        for row in weights.iter_mut() {
            for w in row.iter_mut() {
                *w /= sum;
            }
        }
        // Exact renormalization so the 1e-12 sum check cannot trip.
        let total: f64 = weights.iter().flatten().sum();
        weights[0][0] += 1.0 - total;
        let dist = StateActionDistribution::new(&mdp, weights).unwrap();
        (mdp, q, dist)
    }

    #[test]
    fn loss_vanishes_at_the_fixed_point_of_a_deterministic_mdp() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let q = value_iteration(&mdp, 1e-10, 100_000).unwrap();
        let dist = StateActionDistribution::uniform(&mdp);
        let loss = bellman_loss(&mdp, &q, &dist, 0.9).unwrap();
        assert!(loss <= 1e-16, "loss = {loss:e}");
    }

    #[test]
    fn constant_q_closed_form() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        // Zero out rewards so the closed form c^2 (1-gamma)^2 applies.
        let zero_r = Mdp::new(
            3,
            2,
            vec![2],
            0.9,
            0.0,
            (0..18)
                .map(|i| mdp.transition(i / 6, (i / 3) % 2, i % 3))
                .collect(),
            vec![0.0; 18],
        )
        .unwrap();
        let c = 1.75;
        let q = constant_q(&zero_r, c);
        let dist = StateActionDistribution::uniform(&zero_r);
        for gamma_eval in [0.3, 0.8, 1.0] {
            let expect = c * c * (1.0 - gamma_eval) * (1.0 - gamma_eval);
            for form in [ResidualForm::PerSuccessor, ResidualForm::MeanInside] {
                let loss = bellman_loss_with_form(&zero_r, &q, &dist, gamma_eval, form).unwrap();
                assert!((loss - expect).abs() < 1e-14);
            }
            let (d1, d2) = loss_gamma_derivatives(&zero_r, &q, &dist, gamma_eval).unwrap();
            assert!((d1 - (-2.0 * c * c * (1.0 - gamma_eval))).abs() < 1e-14);
            assert!((d2 - 2.0 * c * c).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_matches_naive_triple_loop() {
        for seed in 0..20 {
            let (mdp, q, dist) = random_setup(seed, 4, 3);
            let gamma_eval = 0.7;
            // Independent re-computation, straight from the definition.
            let mut naive = 0.0;
            for (i, &s) in mdp.nonterminal().iter().enumerate() {
                for a in 0..mdp.n_actions() {
                    for s2 in 0..mdp.n_states() {
                        let mut m = f64::NEG_INFINITY;
                        for a2 in 0..mdp.n_actions() {
                            m = m.max(q.q[s2][a2]);
                        }
                        let e = q.q[s][a] - mdp.reward(s, a, s2) - gamma_eval * m;
                        naive += dist.weights()[i][a] * mdp.transition(s, a, s2) * e * e;
                    }
                }
            }
            let loss = bellman_loss(&mdp, &q, &dist, gamma_eval).unwrap();
            assert!(
                (loss - naive).abs() < 1e-12,
                "seed {seed}: {loss} vs {naive}"
            );
        }
    }

    #[test]
    fn first_derivative_matches_central_difference() {
        for seed in 0..10 {
            let (mdp, q, dist) = random_setup(seed, 4, 2);
            let gamma = 0.8;
            let h = 1e-6;
            for form in [ResidualForm::PerSuccessor, ResidualForm::MeanInside] {
                let (d1, _) =
                    loss_gamma_derivatives_with_form(&mdp, &q, &dist, gamma, form).unwrap();
                let up = bellman_loss_with_form(&mdp, &q, &dist, gamma + h, form).unwrap();
                let down = bellman_loss_with_form(&mdp, &q, &dist, gamma - h, form).unwrap();
                let fd = (up - down) / (2.0 * h);
                assert!(
                    (d1 - fd).abs() <= 1e-6 * d1.abs().max(1e-3),
                    "seed {seed}: analytic {d1} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_is_constant_in_gamma() {
        let (mdp, q, dist) = random_setup(3, 5, 2);
        let (_, d2_a) = loss_gamma_derivatives(&mdp, &q, &dist, 0.3).unwrap();
        let (_, d2_b) = loss_gamma_derivatives(&mdp, &q, &dist, 0.95).unwrap();
        assert!((d2_a - d2_b).abs() < 1e-12);
    }

    #[test]
    fn taylor_identity_is_exact() {
        for seed in 0..20 {
            let (mdp, q, dist) = random_setup(seed, 4, 3);
            let loss_at_one = bellman_loss(&mdp, &q, &dist, 1.0).unwrap();
            let residual = taylor_residual(&mdp, &q, &dist, 0.9).unwrap();
            assert!(
                residual <= 1e-10 * (1.0 + loss_at_one.abs()),
                "seed {seed}: {residual:e}"
            );
        }
    }

    #[test]
    fn taylor_residual_zero_for_zero_q() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        let q = constant_q(&mdp, 0.0);
        let dist = StateActionDistribution::uniform(&mdp);
        // With M = 0 the loss is constant in gamma, so the defect is exactly 0.
        assert_eq!(taylor_residual(&mdp, &q, &dist, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn loss_is_quadratic_in_gamma() {
        // Fit a parabola through three evaluations and reproduce a fourth.
        let (mdp, q, dist) = random_setup(11, 5, 3);
        let at = |g: f64| bellman_loss(&mdp, &q, &dist, g).unwrap();
        let (x0, x1, x2, x3) = (0.2, 0.5, 0.8, 0.95);
        let (y0, y1, y2) = (at(x0), at(x1), at(x2));
        // Lagrange interpolation at x3.
        let l0 = (x3 - x1) * (x3 - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (x3 - x0) * (x3 - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (x3 - x0) * (x3 - x1) / ((x2 - x0) * (x2 - x1));
        let predicted = y0 * l0 + y1 * l1 + y2 * l2;
        assert!((predicted - at(x3)).abs() < 1e-10 * (1.0 + at(x3).abs()));
    }

    #[test]
    fn bound_hand_value() {
        let b = BoundInputs::new(12, 1.0, 5.0, 10, 1.0, 1.0).unwrap();
        assert_eq!(suboptimality_bound(&b), 20.0);
    }

    #[test]
    fn bound_monotone_in_width_and_discount() {
        let mut last = f64::INFINITY;
        let mut m = 12;
        while m <= 12288 {
            let b = BoundInputs::new(m, 0.9, 2.0, 10, 2.0, 1.5).unwrap();
            let v = suboptimality_bound(&b);
            assert!(v <= last);
            last = v;
            m *= 2;
        }
        let mut last = f64::INFINITY;
        for gamma in [0.9, 0.99, 0.999, 1.0] {
            let b = BoundInputs::new(64, gamma, 2.0, 10, 2.0, 1.5).unwrap();
            let v = suboptimality_bound(&b);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn bound_vanishes_for_infinite_width_at_gamma_one() {
        let b = BoundInputs::new(1_000_000_000_000, 1.0, 100.0, 1, 1.0, 1.0).unwrap();
        assert!(suboptimality_bound(&b) < 1e-3);
    }

    #[test]
    fn horizon_from_episodicity_analysis_fits_the_bound() {
        // Deterministic single-action chain: the detected horizon is at most
        // the state count and plugs straight into the bound inputs.
        let n = 5;
        let mut p = vec![0.0; n * n];
        let mut r = vec![0.0; n * n];
        for s in 0..n - 1 {
            p[s * n + s + 1] = 1.0;
            r[s * n + s + 1] = 1.0;
        }
        p[(n - 1) * n + n - 1] = 1.0;
        let mdp = Mdp::new(n, 1, vec![n - 1], 0.9, 0.0, p, r).unwrap();
        let report = crate::chain::is_episodic(&mdp);
        assert!(report.episodic);
        let h = report.horizon.unwrap();
        assert!(h <= mdp.n_states());
        let b = BoundInputs::new(64, mdp.gamma(), 1.0, h, 1.0, 1.0).unwrap();
        assert!(suboptimality_bound(&b).is_finite());
    }

    #[test]
    fn bound_inputs_validation() {
        assert!(BoundInputs::new(0, 0.9, 1.0, 1, 1.0, 1.0).is_err());
        assert!(BoundInputs::new(1, 0.0, 1.0, 1, 1.0, 1.0).is_err());
        assert!(BoundInputs::new(1, 1.1, 1.0, 1, 1.0, 1.0).is_err());
        assert!(BoundInputs::new(1, 0.9, -1.0, 1, 1.0, 1.0).is_err());
        assert!(BoundInputs::new(1, 0.9, 1.0, 0, 1.0, 1.0).is_err());
        assert!(BoundInputs::new(1, 0.9, 1.0, 1, 0.5, 1.0).is_err());
        assert!(BoundInputs::new(1, 0.9, 1.0, 1, 1.0, -0.1).is_err());
    }

    #[test]
    fn distribution_validation() {
        let mdp = build_example1(0.9, 0.0).unwrap();
        assert!(StateActionDistribution::new(&mdp, vec![vec![0.5, 0.5]]).is_err());
        assert!(
            StateActionDistribution::new(&mdp, vec![vec![0.5, 0.5], vec![0.25, 0.25]]).is_err()
        );
        assert!(
            StateActionDistribution::new(&mdp, vec![vec![0.25, 0.25], vec![0.25, 0.25]]).is_ok()
        );
    }
}
