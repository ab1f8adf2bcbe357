//! Variational imitation training: alternate discriminator ascent on the
//! sampled bound `E_p[g(V)] - E_q[f*(g(V))]` with a REINFORCE descent step
//! on the policy, treating `f*(g(V(s, a)))` as a per-step cost.
//!
//! The score-function step uses suffix costs: for a rollout with actions
//! `a_0..a_{H-1}`, the return-to-go at step `t` is
//! `Q_t = -sum_{i >= t} f*(g(V(s_i, a_i)))` and the update direction is the
//! mean over rollouts of `sum_t grad log pi(a_t | s_t) * Q_t`. Sums over
//! batches are means here; the difference is a constant factor the
//! learning rates absorb.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::divergence::{state_action_divergence, Divergence};
use crate::envs::{EnvBundle, EnvKind, ParametricPolicy};
use crate::error::{FilabError, Result};
use crate::estimation::{
    fit_discriminator, variational_estimate, Discriminator, SampleSet, SampleSource,
};
use crate::mdp::{sample_trajectory_with_rng, TabularPolicy, Trajectory};

/// Route masses below this total are treated as "never reached the goal"
/// and yield zero collapse and cover scores.
const ROUTE_MASS_FLOOR: f64 = 1e-12;

/// Knobs for a variational imitation run.
#[derive(Debug, Clone)]
pub struct VimConfig {
    pub divergence: Divergence,
    /// Outer iterations; zero returns the initial policy untouched.
    pub iterations: usize,
    /// Discriminator ascent steps per iteration (warm-started).
    pub estimator_steps: usize,
    /// Discriminator learning rate.
    pub eta_w: f64,
    /// Policy learning rate.
    pub eta_theta: f64,
    /// Learner rollouts per iteration.
    pub batch_size: usize,
    /// Expert demonstrations, sampled once up front.
    pub demo_count: usize,
    pub seed: u64,
}

impl VimConfig {
    pub fn new(divergence: Divergence, seed: u64) -> Self {
        Self {
            divergence,
            iterations: 300,
            estimator_steps: 5,
            eta_w: 0.05,
            eta_theta: 0.05,
            batch_size: 256,
            demo_count: 500,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.demo_count == 0 {
            return Err(FilabError::Input(
                "batch size and demo count must be positive".into(),
            ));
        }
        if !(self.eta_w > 0.0) || !(self.eta_theta >= 0.0) || !self.eta_theta.is_finite() {
            return Err(FilabError::Input(format!(
                "learning rates out of range: eta_w={}, eta_theta={}",
                self.eta_w, self.eta_theta
            )));
        }
        Ok(())
    }
}

/// Interpretable summaries of where a policy's mass goes.
///
/// Bandit: collapse and cover are the larger and smaller of the two expert
/// arms' probabilities; the unsafe mass is the third arm's. Grid: collapse
/// and cover are the larger and smaller of the two around-center route
/// shares among goal-reaching mass, and the unsafe mass is the probability
/// of ever standing on the center cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMetrics {
    pub collapse: f64,
    pub cover: f64,
    pub unsafe_mass: f64,
}

/// One training iteration's record, taken after the policy update.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sampled variational objective after the discriminator update.
    pub objective: f64,
    /// Exact state-action divergence between expert and current policy.
    pub exact_divergence: f64,
    /// Order-sensitive hash of the policy parameters' bit patterns.
    pub params_digest: u64,
    pub metrics: ModeMetrics,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingHistory {
    pub records: Vec<IterationRecord>,
}

/// Final policy plus the per-iteration trace.
#[derive(Debug, Clone)]
pub struct VimOutcome {
    pub policy: ParametricPolicy,
    pub history: TrainingHistory,
}

/// Order-sensitive hash of a policy's parameter bit patterns, for cheap
/// run-to-run determinism checks.
pub fn params_digest(policy: &ParametricPolicy) -> u64 {
    let mut h = DefaultHasher::new();
    for t in policy.theta() {
        t.to_bits().hash(&mut h);
    }
    h.finish()
}

/// One REINFORCE update from a batch of rollouts: returns the policy moved
/// by `rate` along the negative mean score-function gradient of the suffix
/// costs induced by `v`. An empty batch or zero rate returns a clone.
pub fn policy_gradient_step(
    policy: &ParametricPolicy,
    rollouts: &[Trajectory],
    v: &Discriminator,
    div: Divergence,
    rate: f64,
) -> ParametricPolicy {
    let mut updated = policy.clone();
    if rollouts.is_empty() || rate == 0.0 {
        return updated;
    }
    let mut grad = vec![0.0; policy.theta().len()];
    let weight = 1.0 / rollouts.len() as f64;
    for traj in rollouts {
        let steps = traj.actions.len();
        let mut togo = 0.0;
        let mut q = vec![0.0; steps];
        for t in (0..steps).rev() {
            togo += div.conjugate_of_activation(v.value(traj.states[t], traj.actions[t]));
            q[t] = -togo;
        }
        for t in 0..steps {
            policy.accumulate_grad_log_prob(traj.states[t], traj.actions[t], weight * q[t], &mut grad);
        }
    }
    for (th, g) in updated.theta_mut().iter_mut().zip(&grad) {
        *th -= rate * g;
    }
    updated
}

/// Runs variational imitation from `init` in the given environment. One
/// seeded stream drives everything: expert demonstrations first, then each
/// iteration's learner rollouts. The discriminator is tabular and
/// warm-started across iterations. Records are taken after each policy
/// update, so the last record describes the returned policy.
pub fn run_f_vim(env: &EnvBundle, init: &ParametricPolicy, config: &VimConfig) -> Result<VimOutcome> {
    config.validate()?;
    let mdp = &env.mdp;
    let expert = &env.expert.policy;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let demos: Vec<Trajectory> = (0..config.demo_count)
        .map(|_| sample_trajectory_with_rng(mdp, expert, &mut rng))
        .collect();
    let expert_samples = SampleSet::from_trajectories(
        &demos,
        mdp.n_states(),
        mdp.n_actions(),
        SampleSource::Expert,
    );

    let mut policy = init.clone();
    let mut v = Discriminator::zeros(mdp.n_states(), mdp.n_actions());
    let mut history = TrainingHistory::default();
    for iteration in 0..config.iterations {
        let acting = policy.to_tabular();
        let rollouts: Vec<Trajectory> = (0..config.batch_size)
            .map(|_| sample_trajectory_with_rng(mdp, &acting, &mut rng))
            .collect();
        let learner_samples = SampleSet::from_trajectories(
            &rollouts,
            mdp.n_states(),
            mdp.n_actions(),
            SampleSource::Learner,
        );
        v = fit_discriminator(
            &expert_samples,
            &learner_samples,
            config.divergence,
            config.estimator_steps,
            config.eta_w,
            v,
        )?;
        let objective =
            variational_estimate(&expert_samples, &learner_samples, &v, config.divergence)?;
        policy = policy_gradient_step(&policy, &rollouts, &v, config.divergence, config.eta_theta);
        if !policy.theta().iter().all(|t| t.is_finite()) {
            return Err(FilabError::Numerical(format!(
                "policy parameters left the finite range at iteration {iteration}"
            )));
        }
        let snapshot = policy.to_tabular();
        history.records.push(IterationRecord {
            iteration,
            objective,
            exact_divergence: state_action_divergence(config.divergence, mdp, expert, &snapshot)?,
            params_digest: params_digest(&policy),
            metrics: mode_metrics(env, &snapshot),
        });
    }
    Ok(VimOutcome { policy, history })
}

/// Fits a parametric policy to demonstrations by gradient ascent on the
/// mean log-likelihood of the demonstrated pairs. The starting angles are
/// drawn from the seed exactly as a fresh training policy's would be.
pub fn behavior_cloning(
    env: &EnvBundle,
    demos: &[Trajectory],
    steps: usize,
    rate: f64,
    seed: u64,
) -> Result<ParametricPolicy> {
    if demos.is_empty() {
        return Err(FilabError::Input(
            "behavior cloning needs at least one demonstration".into(),
        ));
    }
    if !(rate > 0.0) {
        return Err(FilabError::Input(format!(
            "learning rate must be positive, got {rate}"
        )));
    }
    let pair_count: usize = demos.iter().map(|t| t.actions.len()).sum();
    if pair_count == 0 {
        return Err(FilabError::Input(
            "demonstrations contain no state-action pairs".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = env.fresh_policy(&mut rng);
    let weight = 1.0 / pair_count as f64;
    let mut grad = vec![0.0; policy.theta().len()];
    for step in 0..steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for traj in demos {
            for t in 0..traj.actions.len() {
                policy.accumulate_grad_log_prob(traj.states[t], traj.actions[t], weight, &mut grad);
            }
        }
        for (th, g) in policy.theta_mut().iter_mut().zip(&grad) {
            *th += rate * g;
        }
        if !policy.theta().iter().all(|t| t.is_finite()) {
            return Err(FilabError::Numerical(format!(
                "policy parameters left the finite range at ascent step {step}"
            )));
        }
    }
    Ok(policy)
}

/// Maximum-likelihood tabular policy from demonstrated pairs: each visited
/// state's row is the empirical action frequency; unvisited states get the
/// uniform row.
pub fn behavior_cloning_mle(
    demos: &[Trajectory],
    n_states: usize,
    n_actions: usize,
) -> TabularPolicy {
    let pairs: Vec<(usize, usize)> = demos
        .iter()
        .flat_map(|t| t.states.iter().copied().zip(t.actions.iter().copied()))
        .collect();
    mle_from_pairs(&pairs, n_states, n_actions)
}

/// The same maximum-likelihood fit from bare `(state, action)` pairs.
pub fn mle_from_pairs(
    pairs: &[(usize, usize)],
    n_states: usize,
    n_actions: usize,
) -> TabularPolicy {
    let mut counts = vec![0.0_f64; n_states * n_actions];
    for &(s, a) in pairs {
        counts[s * n_actions + a] += 1.0;
    }
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for s in 0..n_states {
        let row = &counts[s * n_actions..(s + 1) * n_actions];
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            probs.extend(row.iter().map(|c| c / total));
        } else {
            probs.extend(std::iter::repeat(1.0 / n_actions as f64).take(n_actions));
        }
    }
    TabularPolicy::new(n_states, n_actions, probs)
        .expect("empirical frequencies form valid rows")
}

/// Mode statistics of a tabular policy in its environment; see
/// [`ModeMetrics`] for the per-environment meanings.
pub fn mode_metrics(env: &EnvBundle, policy: &TabularPolicy) -> ModeMetrics {
    match &env.kind {
        EnvKind::Bandit(_) => {
            let row = policy.row(0);
            ModeMetrics {
                collapse: row[0].max(row[1]),
                cover: row[0].min(row[1]),
                unsafe_mass: row[2],
            }
        }
        EnvKind::Grid(spec) => grid_mode_metrics(env, spec.center_cell, spec.terminal_cell, policy),
    }
}

fn grid_mode_metrics(
    env: &EnvBundle,
    center: usize,
    terminal: usize,
    policy: &TabularPolicy,
) -> ModeMetrics {
    let mdp = &env.mdp;
    let n = mdp.n_states();
    let spec = match &env.kind {
        EnvKind::Grid(spec) => spec,
        EnvKind::Bandit(_) => unreachable!("grid metrics on a bandit bundle"),
    };
    let left_gate = spec.cell_index(0, 2);
    let right_gate = spec.cell_index(2, 2);

    // Unsafe mass: split the state distribution by whether the center has
    // been visited yet and push both halves forward.
    let mut clean = vec![0.0; n];
    let mut tainted = vec![0.0; n];
    for s in 0..n {
        let mass = mdp.initial_dist()[s];
        if s == center {
            tainted[s] = mass;
        } else {
            clean[s] = mass;
        }
    }
    for _ in 0..mdp.horizon() {
        let mut next_clean = vec![0.0; n];
        let mut next_tainted = vec![0.0; n];
        for s in 0..n {
            for a in 0..mdp.n_actions() {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (next, &pt) in mdp.transition_row(s, a).iter().enumerate() {
                    if pt == 0.0 {
                        continue;
                    }
                    next_tainted[next] += tainted[s] * pa * pt;
                    if next == center {
                        next_tainted[next] += clean[s] * pa * pt;
                    } else {
                        next_clean[next] += clean[s] * pa * pt;
                    }
                }
            }
        }
        clean = next_clean;
        tainted = next_tainted;
    }
    let unsafe_mass = tainted.iter().sum::<f64>();

    // Route masses: first-entry flow into the terminal, attributed to the
    // predecessor cell. Only the two top corners and the center border it.
    let mut alive: Vec<f64> = mdp.initial_dist().to_vec();
    alive[terminal] = 0.0;
    let mut inflow = vec![0.0; n];
    for _ in 0..mdp.horizon() {
        let mut next_alive = vec![0.0; n];
        for s in 0..n {
            if alive[s] == 0.0 {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (next, &pt) in mdp.transition_row(s, a).iter().enumerate() {
                    let mass = alive[s] * pa * pt;
                    if next == terminal {
                        inflow[s] += mass;
                    } else {
                        next_alive[next] += mass;
                    }
                }
            }
        }
        alive = next_alive;
    }
    let (left, right, through) = (inflow[left_gate], inflow[right_gate], inflow[center]);
    let total = left + right + through;
    if total < ROUTE_MASS_FLOOR {
        ModeMetrics {
            collapse: 0.0,
            cover: 0.0,
            unsafe_mass,
        }
    } else {
        ModeMetrics {
            collapse: left.max(right) / total,
            cover: left.min(right) / total,
            unsafe_mass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::exact_f_divergence;
    use crate::envs::{bandit_policy_from_theta, make_bandit, make_gridworld, UP};
    use crate::estimation::optimal_discriminator;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn bandit_env() -> EnvBundle {
        make_bandit(0.28).unwrap().0
    }

    #[test]
    fn zero_iterations_returns_the_initial_policy() {
        let env = bandit_env();
        let init = bandit_policy_from_theta(0.7);
        let mut config = VimConfig::new(Divergence::Kl, 5);
        config.iterations = 0;
        let out = run_f_vim(&env, &init, &config).unwrap();
        assert_eq!(out.policy.theta(), init.theta());
        assert!(out.history.records.is_empty());
    }

    #[test]
    fn zero_rate_step_leaves_the_policy_unchanged() {
        let env = bandit_env();
        let policy = bandit_policy_from_theta(0.3);
        let tab = policy.to_tabular();
        let rollouts: Vec<Trajectory> = (0..32)
            .map(|i| crate::mdp::sample_trajectory(&env.mdp, &tab, i))
            .collect();
        let v = Discriminator::zeros(1, 3);
        let stepped = policy_gradient_step(&policy, &rollouts, &v, Divergence::Kl, 0.0);
        assert_eq!(stepped.theta(), policy.theta());
        let empty = policy_gradient_step(&policy, &[], &v, Divergence::Kl, 0.5);
        assert_eq!(empty.theta(), policy.theta());
    }

    #[test]
    fn constant_discriminator_gives_a_statistically_null_update() {
        let env = bandit_env();
        let policy = bandit_policy_from_theta(0.3);
        let tab = policy.to_tabular();
        let v = Discriminator::Tabular {
            n_states: 1,
            n_actions: 3,
            values: vec![0.7; 3],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let mut per_traj = Vec::with_capacity(n);
        for _ in 0..n {
            let traj = sample_trajectory_with_rng(&env.mdp, &tab, &mut rng);
            let q = -Divergence::Kl.conjugate_of_activation(v.value(0, traj.actions[0]));
            let mut g = [0.0];
            policy.accumulate_grad_log_prob(0, traj.actions[0], q, &mut g);
            per_traj.push(g[0]);
        }
        let mean = per_traj.iter().sum::<f64>() / n as f64;
        let var = per_traj.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * se + 1e-12,
            "constant costs should not move the policy in expectation: mean {mean}, se {se}"
        );
    }

    #[test]
    fn step_matches_a_finite_difference_of_the_surrogate() {
        // With trajectories and costs held fixed, the update direction is
        // the exact gradient of mean_traj sum_t log pi(a_t|s_t) Q_t.
        let (env, _) = make_gridworld(0.14, 0.15, 4).unwrap();
        let uniform = TabularPolicy::uniform(9, 4);
        let rollouts: Vec<Trajectory> = (0..6)
            .map(|i| crate::mdp::sample_trajectory(&env.mdp, &uniform, 100 + i))
            .collect();
        let values: Vec<f64> = (0..36).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect();
        let v = Discriminator::Tabular {
            n_states: 9,
            n_actions: 4,
            values,
        };
        let div = Divergence::Js;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let policy = env.fresh_policy(&mut rng);

        let surrogate = |theta: &[f64]| -> f64 {
            let p = crate::envs::grid_policy_from_theta(theta).unwrap();
            let mut total = 0.0;
            for traj in &rollouts {
                let steps = traj.actions.len();
                let mut togo = 0.0;
                let mut q = vec![0.0; steps];
                for t in (0..steps).rev() {
                    togo += div.conjugate_of_activation(v.value(traj.states[t], traj.actions[t]));
                    q[t] = -togo;
                }
                for t in 0..steps {
                    total += p.action_probs(traj.states[t])[traj.actions[t]].ln() * q[t];
                }
            }
            total / rollouts.len() as f64
        };

        let eta = 1.0;
        let stepped = policy_gradient_step(&policy, &rollouts, &v, div, eta);
        let h = 1e-5;
        for i in 0..policy.theta().len() {
            let implied = (policy.theta()[i] - stepped.theta()[i]) / eta;
            let mut up = policy.theta().to_vec();
            let mut down = up.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (surrogate(&up) - surrogate(&down)) / (2.0 * h);
            assert_abs_diff_eq!(implied, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn optimal_discriminator_step_descends_the_true_reverse_kl() {
        // Full-support target so the exact reverse KL is finite; with the
        // bound tight, the expected update is an exact gradient step on it.
        let target = [0.5, 0.3, 0.2];
        for theta0 in [-2.0, -0.5, 0.4, 1.3, 2.8] {
            let policy = bandit_policy_from_theta(theta0);
            let q = policy.action_probs(0);
            let before = exact_f_divergence(Divergence::Rkl, &target, &q).unwrap();
            let vstar = optimal_discriminator(Divergence::Rkl, &target, &q).unwrap();
            let mut grad = [0.0];
            for a in 0..3 {
                let cost = -Divergence::Rkl.conjugate_of_activation(vstar.value(0, a));
                policy.accumulate_grad_log_prob(0, a, q[a] * cost, &mut grad);
            }
            let stepped = bandit_policy_from_theta(theta0 - 0.01 * grad[0]);
            let after =
                exact_f_divergence(Divergence::Rkl, &target, &stepped.action_probs(0)).unwrap();
            assert!(
                after < before,
                "theta {theta0}: reverse KL rose {before} -> {after}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let env = bandit_env();
        let init = bandit_policy_from_theta(1.1);
        let mut config = VimConfig::new(Divergence::Js, 17);
        config.iterations = 20;
        let a = run_f_vim(&env, &init, &config).unwrap();
        let b = run_f_vim(&env, &init, &config).unwrap();
        assert_eq!(a.policy.theta(), b.policy.theta());
        let digests = |o: &VimOutcome| -> Vec<u64> {
            o.history.records.iter().map(|r| r.params_digest).collect()
        };
        assert_eq!(digests(&a), digests(&b));
        assert_eq!(a.history.records.len(), 20);
    }

    #[test]
    fn kl_training_improves_the_exact_divergence() {
        let env = bandit_env();
        let init = bandit_policy_from_theta(2.0);
        let before = state_action_divergence(
            Divergence::Kl,
            &env.mdp,
            &env.expert.policy,
            &init.to_tabular(),
        )
        .unwrap();
        let mut config = VimConfig::new(Divergence::Kl, 7);
        config.iterations = 150;
        let out = run_f_vim(&env, &init, &config).unwrap();
        let after = state_action_divergence(
            Divergence::Kl,
            &env.mdp,
            &env.expert.policy,
            &out.policy.to_tabular(),
        )
        .unwrap();
        assert!(
            after < before * 0.5,
            "forward KL should drop substantially: {before} -> {after}"
        );
        let last = out.history.records.last().unwrap();
        assert_abs_diff_eq!(last.exact_divergence, after, epsilon = 1e-12);
    }

    #[test]
    fn behavior_cloning_recovers_bandit_arm_frequencies() {
        let env = bandit_env();
        let demos: Vec<Trajectory> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..400)
                .map(|_| sample_trajectory_with_rng(&env.mdp, &env.expert.policy, &mut rng))
                .collect()
        };
        let policy = behavior_cloning(&env, &demos, 400, 0.5, 3).unwrap();
        let probs = policy.action_probs(0);
        // The class cannot put zero mass on the third arm, but likelihood
        // ascent should still concentrate on the demonstrated two.
        assert!(probs[2] < 0.12, "unused arm kept mass {}", probs[2]);
        assert!(probs[0] > 0.3 && probs[1] > 0.3);
    }

    #[test]
    fn mle_counts_actions_and_defaults_unseen_states_to_uniform() {
        let demos = vec![
            Trajectory {
                states: vec![0, 1, 0],
                actions: vec![1, 0],
            },
            Trajectory {
                states: vec![0, 2, 2],
                actions: vec![1, 1],
            },
        ];
        let policy = behavior_cloning_mle(&demos, 4, 2);
        assert_abs_diff_eq!(policy.prob(0, 1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(policy.prob(1, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(policy.prob(2, 1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(policy.prob(3, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(policy.prob(3, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bandit_metrics_read_off_the_action_row() {
        let env = bandit_env();
        let policy = TabularPolicy::new(1, 3, vec![0.3, 0.5, 0.2]).unwrap();
        let m = mode_metrics(&env, &policy);
        assert_eq!(m.collapse, 0.5);
        assert_eq!(m.cover, 0.3);
        assert_eq!(m.unsafe_mass, 0.2);
    }

    #[test]
    fn noiseless_expert_splits_the_routes_and_avoids_the_center() {
        let (env, _) = make_gridworld(0.0, 0.0, 8).unwrap();
        let m = mode_metrics(&env, &env.expert.policy);
        assert_abs_diff_eq!(m.collapse, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cover, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.unsafe_mass, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn noiseless_straight_up_policy_cuts_through_the_center() {
        let (env, _) = make_gridworld(0.0, 0.0, 8).unwrap();
        let mut probs = vec![0.0; 36];
        for s in 0..9 {
            probs[s * 4 + UP] = 1.0;
        }
        let policy = TabularPolicy::new(9, 4, probs).unwrap();
        let m = mode_metrics(&env, &policy);
        assert_abs_diff_eq!(m.unsafe_mass, 1.0, epsilon = 1e-12);
        assert_eq!(m.collapse, 0.0);
        assert_eq!(m.cover, 0.0);
    }

    #[test]
    fn stuck_policy_scores_zero_on_route_metrics() {
        let (env, _) = make_gridworld(0.0, 0.0, 8).unwrap();
        let mut probs = vec![0.0; 36];
        for s in 0..9 {
            probs[s * 4 + crate::envs::DOWN] = 1.0;
        }
        let policy = TabularPolicy::new(9, 4, probs).unwrap();
        let m = mode_metrics(&env, &policy);
        assert_eq!(m.collapse, 0.0);
        assert_eq!(m.cover, 0.0);
        assert_eq!(m.unsafe_mass, 0.0);
    }

    #[test]
    fn noisy_grid_metrics_stay_in_range_and_conserve_mass() {
        let (env, _) = make_gridworld(0.14, 0.15, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let policy = env.fresh_policy(&mut rng).to_tabular();
            let m = mode_metrics(&env, &policy);
            for value in [m.collapse, m.cover, m.unsafe_mass] {
                assert!((0.0..=1.0 + 1e-12).contains(&value));
            }
            assert!(m.cover <= m.collapse + 1e-15);
        }
    }

    #[test]
    fn unsafe_mass_matches_a_monte_carlo_tally() {
        let (env, _) = make_gridworld(0.14, 0.15, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let policy = env.fresh_policy(&mut rng).to_tabular();
        let exact = mode_metrics(&env, &policy).unsafe_mass;
        let n = 40_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let traj = sample_trajectory_with_rng(&env.mdp, &policy, &mut rng);
            if traj.states.iter().any(|&s| s == 4) {
                hits += 1;
            }
        }
        let est = hits as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!(
            (est - exact).abs() <= 4.0 * se + 1e-9,
            "tally {est} vs exact {exact}"
        );
    }

    #[test]
    fn bad_configs_are_rejected() {
        let env = bandit_env();
        let init = bandit_policy_from_theta(0.0);
        let mut config = VimConfig::new(Divergence::Kl, 1);
        config.batch_size = 0;
        assert!(run_f_vim(&env, &init, &config).is_err());
        let mut config = VimConfig::new(Divergence::Kl, 1);
        config.eta_w = 0.0;
        assert!(run_f_vim(&env, &init, &config).is_err());
    }
}


