//! Interactive-expert algorithms: DAgger, the interactive reverse-KL
//! variational trainer, and interactive density-ratio minimization with
//! dataset aggregation.
//!
//! All three query the expert on the learner's own state distribution.
//! DAgger turns the labels into a supervised refit. The reverse-KL trainer
//! fits a score `V` by ascending `mean[-exp(V(s, a*))] + mean[V(s, a)]`
//! over expert-labeled and learner pairs, whose fixed point is
//! `V(s, a) = ln(pi(a|s) / pi*(a|s))`, and descends the policy along suffix
//! sums of `V`. The density-ratio variant estimates the same ratio by least
//! squares, aggregates per-state cost vectors, and refits the policy by
//! cost-sensitive classification, a follow-the-leader scheme whose regret
//! terms this module's report makes measurable.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::divergence::{expected_action_divergence, state_action_divergence, Divergence};
use crate::envs::{EnvBundle, ExpertModel};
use crate::error::{FilabError, Result};
use crate::estimation::{lsq_density_ratio, Discriminator, RatioEstimate, SampleSet, SampleSource};
use crate::mdp::{
    occupancy, sample_categorical, sample_trajectory_with_rng, TabularPolicy, Trajectory,
};
use crate::vim::{
    mle_from_pairs, mode_metrics, params_digest, IterationRecord, TrainingHistory, VimConfig,
    VimOutcome,
};

/// One aggregated cost vector: the per-action costs observed at a state
/// visit, tagged with the iteration that produced it.
#[derive(Debug, Clone)]
pub struct CostEntry {
    pub state: usize,
    pub costs: Vec<f64>,
    pub iteration: usize,
}

/// Append-only aggregate of per-state cost vectors across iterations.
#[derive(Debug, Clone)]
pub struct CostDataset {
    pub n_states: usize,
    pub n_actions: usize,
    pub entries: Vec<CostEntry>,
}

impl CostDataset {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            entries: Vec::new(),
        }
    }

    /// Appends one cost vector; the vector must be finite and cover every
    /// action.
    pub fn push(&mut self, state: usize, costs: Vec<f64>, iteration: usize) {
        assert_eq!(costs.len(), self.n_actions, "cost vector length mismatch");
        debug_assert!(costs.iter().all(|c| c.is_finite()));
        debug_assert!(state < self.n_states);
        self.entries.push(CostEntry {
            state,
            costs,
            iteration,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-iteration trace of an interactive run. Divergences compare the
/// iteration's newly fit policy against the queried expert and may be
/// `+inf`; the cost fields are only present for the density-ratio runs.
#[derive(Debug, Clone)]
pub struct InteractiveRecord {
    pub iteration: usize,
    /// Exact expected action reverse KL of the newly fit policy.
    pub exact_rkl: f64,
    /// Exact expected action forward KL of the newly fit policy.
    pub exact_kl: f64,
    /// Mean aggregate cost of the newly fit classifier.
    pub classification_cost: Option<f64>,
    /// Mean cost of the acting policy on the data it generated.
    pub own_cost: Option<f64>,
    /// Exact expected absolute error of the fitted ratio against the true
    /// ratio, over the acting policy's states and the expert's actions.
    pub ratio_error: Option<f64>,
}

/// Full trace of an interactive run: per-iteration records, which iterate
/// won, the last iterate itself, and (for density-ratio runs) the
/// aggregated cost dataset.
#[derive(Debug, Clone)]
pub struct InteractiveRunReport {
    pub records: Vec<InteractiveRecord>,
    pub best_iteration: usize,
    pub final_policy: TabularPolicy,
    pub dataset: Option<CostDataset>,
}

/// Deterministic tabular policy minimizing the summed aggregated cost per
/// state: ties break toward the lowest action index, and states absent
/// from the dataset get action 0.
pub fn cost_sensitive_classify(dataset: &CostDataset) -> TabularPolicy {
    let (ns, na) = (dataset.n_states, dataset.n_actions);
    let mut sums = vec![0.0_f64; ns * na];
    let mut seen = vec![false; ns];
    for entry in &dataset.entries {
        seen[entry.state] = true;
        for (a, c) in entry.costs.iter().enumerate() {
            sums[entry.state * na + a] += c;
        }
    }
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let best = if seen[s] {
            let row = &sums[s * na..(s + 1) * na];
            let mut arg = 0;
            for (a, &c) in row.iter().enumerate().skip(1) {
                if c < row[arg] {
                    arg = a;
                }
            }
            arg
        } else {
            0
        };
        probs[s * na + best] = 1.0;
    }
    TabularPolicy::new(ns, na, probs).expect("one-hot rows are valid")
}

/// Mean cost of a policy over the dataset's entries, restricted to one
/// iteration when given. `None` when no entry matches.
pub fn mean_policy_cost(
    dataset: &CostDataset,
    policy: &TabularPolicy,
    iteration: Option<usize>,
) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for entry in &dataset.entries {
        if iteration.is_some_and(|n| n != entry.iteration) {
            continue;
        }
        total += entry
            .costs
            .iter()
            .enumerate()
            .map(|(a, c)| policy.prob(entry.state, a) * c)
            .sum::<f64>();
        count += 1;
    }
    (count > 0).then(|| total / count as f64)
}

/// The hindsight-minimal average per-iteration cost: the smallest value of
/// `mean_n [ mean cost of pi on iteration n's entries ]` over all policies.
/// The objective separates per state, so the minimum is exact. `None` for
/// an empty dataset.
pub fn hindsight_min_cost(dataset: &CostDataset) -> Option<f64> {
    if dataset.is_empty() {
        return None;
    }
    let na = dataset.n_actions;
    let mut per_iter_counts: HashMap<usize, f64> = HashMap::new();
    for entry in &dataset.entries {
        *per_iter_counts.entry(entry.iteration).or_insert(0.0) += 1.0;
    }
    let n_iters = per_iter_counts.len() as f64;
    // Weighted cost of playing action a at state s across the aggregate,
    // each iteration's entries normalized by that iteration's entry count.
    let mut weighted = vec![0.0_f64; dataset.n_states * na];
    for entry in &dataset.entries {
        let w = 1.0 / (n_iters * per_iter_counts[&entry.iteration]);
        for (a, &c) in entry.costs.iter().enumerate() {
            weighted[entry.state * na + a] += w * c;
        }
    }
    let mut best = 0.0;
    for s in 0..dataset.n_states {
        let row = &weighted[s * na..(s + 1) * na];
        if row.iter().any(|&c| c != 0.0) {
            best += row.iter().cloned().fold(f64::INFINITY, f64::min);
        }
    }
    Some(best)
}

fn pick_best(best: &mut Option<(f64, usize, TabularPolicy)>, value: f64, n: usize, p: &TabularPolicy) {
    let better = match best {
        None => true,
        Some((bv, _, _)) => value.total_cmp(bv).is_lt(),
    };
    if better {
        *best = Some((value, n, p.clone()));
    }
}

/// DAgger with pure learner rollouts: starting from the uniform policy,
/// each iteration rolls out the current policy, asks the expert for a label
/// at every visited state, aggregates all labels ever collected, and refits
/// the maximum-likelihood tabular policy. Returns the iterate with the
/// smallest exact expected action forward KL against the expert.
pub fn run_dagger(
    env: &EnvBundle,
    expert: &ExpertModel,
    iterations: usize,
    rollouts_per_iter: usize,
    seed: u64,
) -> Result<(TabularPolicy, InteractiveRunReport)> {
    if rollouts_per_iter == 0 {
        return Err(FilabError::Input(
            "dagger needs at least one rollout per iteration".into(),
        ));
    }
    let mdp = &env.mdp;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = TabularPolicy::uniform(ns, na);
    let mut labels: Vec<(usize, usize)> = Vec::new();
    let mut records = Vec::with_capacity(iterations);
    let mut best: Option<(f64, usize, TabularPolicy)> = None;
    for n in 0..iterations {
        for _ in 0..rollouts_per_iter {
            let traj = sample_trajectory_with_rng(mdp, &current, &mut rng);
            for t in 0..traj.actions.len() {
                let s = traj.states[t];
                labels.push((s, sample_categorical(&mut rng, expert.query(s))));
            }
        }
        let next = mle_from_pairs(&labels, ns, na);
        let exact_kl = expected_action_divergence(Divergence::Kl, mdp, &expert.policy, &next)?;
        let exact_rkl = expected_action_divergence(Divergence::Rkl, mdp, &expert.policy, &next)?;
        pick_best(&mut best, exact_kl, n, &next);
        records.push(InteractiveRecord {
            iteration: n,
            exact_rkl,
            exact_kl,
            classification_cost: None,
            own_cost: None,
            ratio_error: None,
        });
        current = next;
    }
    let (best_iteration, best_policy) = match best {
        Some((_, n, p)) => (n, p),
        None => (0, current.clone()),
    };
    Ok((
        best_policy,
        InteractiveRunReport {
            records,
            best_iteration,
            final_policy: current,
            dataset: None,
        },
    ))
}

/// One gradient-ascent pass of the interactive reverse-KL estimator: the
/// objective is `mean_expert[-exp(V)] + mean_learner[V]`, whose fixed point
/// is `V(s, a) = ln(pi(a|s) / pi*(a|s))` at exact frequencies.
pub fn fit_irkl_discriminator(
    learner_samples: &SampleSet,
    expert_samples: &SampleSet,
    steps: usize,
    learning_rate: f64,
    init: Discriminator,
) -> Result<Discriminator> {
    if learner_samples.is_empty() || expert_samples.is_empty() {
        return Err(FilabError::Input(
            "estimator fitting needs non-empty sample sets".into(),
        ));
    }
    if !(learning_rate > 0.0) {
        return Err(FilabError::Input(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let expert_freq = frequencies(expert_samples);
    let learner_freq = frequencies(learner_samples);
    let mut v = init;
    match &mut v {
        Discriminator::Tabular { values, .. } => {
            for step in 0..steps {
                for (i, value) in values.iter_mut().enumerate() {
                    let grad = learner_freq[i] - expert_freq[i] * value.exp();
                    *value += learning_rate * grad;
                }
                if values.iter().any(|x| !x.is_finite()) {
                    return Err(FilabError::Numerical(format!(
                        "estimator weights left the finite range at ascent step {step}"
                    )));
                }
            }
        }
        _ => {
            return Err(FilabError::Input(
                "the interactive reverse-KL estimator is tabular".into(),
            ));
        }
    }
    Ok(v)
}

fn frequencies(samples: &SampleSet) -> Vec<f64> {
    let mut counts = samples.cell_counts();
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        for c in &mut counts {
            *c /= total;
        }
    }
    counts
}

/// Interactive reverse-KL variational imitation. Each iteration draws
/// fresh learner rollouts, queries the expert for one label per visited
/// state, ascends the estimator on those samples, and descends the policy
/// along suffix sums `Q_t = sum_{i >= t} V(s_i, a_i)` of the fitted score.
/// The initial policy is drawn from the seeded stream; `demo_count` is
/// unused because the expert is queried online.
pub fn run_irkl_vim(
    env: &EnvBundle,
    expert: &ExpertModel,
    config: &VimConfig,
) -> Result<VimOutcome> {
    if config.batch_size == 0 {
        return Err(FilabError::Input("batch size must be positive".into()));
    }
    if !(config.eta_w > 0.0) || !(config.eta_theta >= 0.0) || !config.eta_theta.is_finite() {
        return Err(FilabError::Input(format!(
            "learning rates out of range: eta_w={}, eta_theta={}",
            config.eta_w, config.eta_theta
        )));
    }
    let mdp = &env.mdp;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = env.fresh_policy(&mut rng);
    let mut v = Discriminator::zeros(ns, na);
    let mut history = TrainingHistory::default();
    for iteration in 0..config.iterations {
        let acting = policy.to_tabular();
        let mut rollouts = Vec::with_capacity(config.batch_size);
        let mut learner_set = SampleSet::new(ns, na, SampleSource::Learner);
        let mut expert_set = SampleSet::new(ns, na, SampleSource::Expert);
        for _ in 0..config.batch_size {
            let traj = sample_trajectory_with_rng(mdp, &acting, &mut rng);
            for t in 0..traj.actions.len() {
                let s = traj.states[t];
                learner_set.push(s, traj.actions[t]);
                expert_set.push(s, sample_categorical(&mut rng, expert.query(s)));
            }
            rollouts.push(traj);
        }
        v = fit_irkl_discriminator(
            &learner_set,
            &expert_set,
            config.estimator_steps,
            config.eta_w,
            v,
        )?;
        let objective = irkl_objective(&learner_set, &expert_set, &v);
        policy = irkl_policy_step(&policy, &rollouts, &v, config.eta_theta);
        if !policy.theta().iter().all(|t| t.is_finite()) {
            return Err(FilabError::Numerical(format!(
                "policy parameters left the finite range at iteration {iteration}"
            )));
        }
        let snapshot = policy.to_tabular();
        history.records.push(IterationRecord {
            iteration,
            objective,
            exact_divergence: state_action_divergence(
                Divergence::Rkl,
                mdp,
                &expert.policy,
                &snapshot,
            )?,
            params_digest: params_digest(&policy),
            metrics: mode_metrics(env, &snapshot),
        });
    }
    Ok(VimOutcome { policy, history })
}

fn irkl_objective(learner: &SampleSet, expert: &SampleSet, v: &Discriminator) -> f64 {
    let expert_term: f64 = expert
        .pairs
        .iter()
        .map(|&(s, a)| -v.value(s, a).exp())
        .sum::<f64>()
        / expert.len() as f64;
    let learner_term: f64 = learner
        .pairs
        .iter()
        .map(|&(s, a)| v.value(s, a))
        .sum::<f64>()
        / learner.len() as f64;
    expert_term + learner_term
}

fn irkl_policy_step(
    policy: &crate::envs::ParametricPolicy,
    rollouts: &[Trajectory],
    v: &Discriminator,
    rate: f64,
) -> crate::envs::ParametricPolicy {
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
            togo += v.value(traj.states[t], traj.actions[t]);
            q[t] = togo;
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

/// Exact expected absolute error of a fitted ratio against the true ratio
/// `pi(a|s) / pi*(a|s)`: states weighted by the acting policy's average
/// occupancy, actions by the expert's row.
pub fn ratio_oracle_error(
    env: &EnvBundle,
    acting: &TabularPolicy,
    expert: &ExpertModel,
    ratio: &RatioEstimate,
) -> f64 {
    let occ = occupancy(&env.mdp, acting);
    let mut total = 0.0;
    for s in 0..env.mdp.n_states() {
        if occ.avg[s] == 0.0 {
            continue;
        }
        for (a, &pe) in expert.query(s).iter().enumerate() {
            if pe == 0.0 {
                continue;
            }
            let truth = acting.prob(s, a) / pe;
            total += occ.avg[s] * pe * (ratio.value(s, a) - truth).abs();
        }
    }
    total
}

/// Interactive density-ratio minimization with dataset aggregation.
/// Starting from the uniform policy, each iteration collects learner pairs
/// and expert labels on the learner's states, fits the clipped
/// least-squares ratio (learner as numerator), appends one cost vector per
/// state visit, and refits by [`cost_sensitive_classify`]. Actions the
/// learner never took at a state cost the floor `c`, since their true
/// ratio is near zero. Returns the iterate with the smallest exact
/// expected action reverse KL.
pub fn run_interactive_dre(
    env: &EnvBundle,
    expert: &ExpertModel,
    iterations: usize,
    episodes_per_iter: usize,
    clip_floor: f64,
    seed: u64,
) -> Result<(TabularPolicy, InteractiveRunReport)> {
    if episodes_per_iter == 0 {
        return Err(FilabError::Input(
            "need at least one episode per iteration".into(),
        ));
    }
    if !(0.0..=1.0).contains(&clip_floor) || clip_floor == 0.0 {
        return Err(FilabError::Input(format!(
            "clip floor must lie in (0, 1], got {clip_floor}"
        )));
    }
    let mdp = &env.mdp;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = TabularPolicy::uniform(ns, na);
    let mut dataset = CostDataset::new(ns, na);
    let mut records = Vec::with_capacity(iterations);
    let mut best: Option<(f64, usize, TabularPolicy)> = None;
    for n in 0..iterations {
        let mut learner_set = SampleSet::new(ns, na, SampleSource::Learner);
        let mut expert_set = SampleSet::new(ns, na, SampleSource::Expert);
        let mut visits: Vec<usize> = Vec::new();
        for _ in 0..episodes_per_iter {
            let traj = sample_trajectory_with_rng(mdp, &current, &mut rng);
            for t in 0..traj.actions.len() {
                let s = traj.states[t];
                learner_set.push(s, traj.actions[t]);
                expert_set.push(s, sample_categorical(&mut rng, expert.query(s)));
                visits.push(s);
            }
        }
        let ratio = lsq_density_ratio(&learner_set, &expert_set, clip_floor)?;
        let learner_counts = learner_set.cell_counts();
        let mut cost_cache: HashMap<usize, Vec<f64>> = HashMap::new();
        for &s in &visits {
            let costs = cost_cache.entry(s).or_insert_with(|| {
                (0..na)
                    .map(|a| {
                        if learner_counts[s * na + a] == 0.0 {
                            clip_floor
                        } else {
                            ratio.value(s, a)
                        }
                    })
                    .collect()
            });
            dataset.push(s, costs.clone(), n);
        }
        let own_cost = mean_policy_cost(&dataset, &current, Some(n));
        let ratio_error = ratio_oracle_error(env, &current, expert, &ratio);
        let next = cost_sensitive_classify(&dataset);
        let classification_cost = mean_policy_cost(&dataset, &next, None);
        let exact_rkl = expected_action_divergence(Divergence::Rkl, mdp, &expert.policy, &next)?;
        let exact_kl = expected_action_divergence(Divergence::Kl, mdp, &expert.policy, &next)?;
        pick_best(&mut best, exact_rkl, n, &next);
        records.push(InteractiveRecord {
            iteration: n,
            exact_rkl,
            exact_kl,
            classification_cost,
            own_cost,
            ratio_error: Some(ratio_error),
        });
        current = next;
    }
    let (best_iteration, best_policy) = match best {
        Some((_, n, p)) => (n, p),
        None => (0, current.clone()),
    };
    Ok((
        best_policy,
        InteractiveRunReport {
            records,
            best_iteration,
            final_policy: current,
            dataset: Some(dataset),
        },
    ))
}
