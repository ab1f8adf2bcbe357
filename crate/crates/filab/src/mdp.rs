//! Finite-horizon MDP primitives: tabular models, policies, trajectories,
//! and exact occupancy measures.
//!
//! Everything here is exact arithmetic over explicit probability tables.
//! Occupancy follows the finite-horizon convention: `rho_0` is the initial
//! state distribution, `rho_t` is the law of `s_t` for `t = 0..H-1`, and the
//! average occupancy is the arithmetic mean of those `H` rows. Trajectories
//! carry `H+1` states and `H` actions.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FilabError, Result};

/// Row-sum / distribution-sum tolerance used by all constructors.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Node budget for exhaustive trajectory enumeration. The depth-first walk
/// counts every positive-probability `(state, action, next state)` expansion
/// and refuses to continue past this many.
pub const MAX_ENUM_NODES: usize = 10_000_000;

fn validate_distribution(label: &str, row: &[f64], expected_len: usize) -> Result<()> {
    if row.len() != expected_len {
        return Err(FilabError::Input(format!(
            "{label}: expected {expected_len} entries, got {}",
            row.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &p) in row.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(FilabError::Input(format!(
                "{label}: entry {i} is {p}, probabilities must be finite and nonnegative"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(FilabError::Input(format!(
            "{label}: entries sum to {sum}, expected 1 within {ROW_SUM_TOL:e}"
        )));
    }
    Ok(())
}

/// Tabular finite-horizon MDP without rewards: state and action counts, an
/// initial state distribution, a transition table, and a horizon.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    initial_dist: Vec<f64>,
    /// `P(s' | s, a)` stored row-major as `[s][a][s']`.
    transition: Vec<f64>,
}

impl FiniteMdp {
    /// Builds a model after validating every distribution row.
    ///
    /// `transition` is indexed `[s * n_actions * n_states + a * n_states + s']`
    /// and each `(s, a)` row must be a probability distribution over next
    /// states. `initial_dist` must be a distribution over states. The horizon
    /// must be at least one step.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        initial_dist: Vec<f64>,
        transition: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(FilabError::Input(
                "state and action counts must be positive".into(),
            ));
        }
        if horizon == 0 {
            return Err(FilabError::Input("horizon must be at least 1".into()));
        }
        validate_distribution("initial distribution", &initial_dist, n_states)?;
        if transition.len() != n_states * n_actions * n_states {
            return Err(FilabError::Input(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let base = (s * n_actions + a) * n_states;
                validate_distribution(
                    &format!("transition row (s={s}, a={a})"),
                    &transition[base..base + n_states],
                    n_states,
                )?;
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            horizon,
            initial_dist,
            transition,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// `P(s' | s, a)`.
    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    /// The next-state distribution for `(s, a)` as a slice of length
    /// `n_states`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    /// Same model with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(FilabError::Input("horizon must be at least 1".into()));
        }
        let mut m = self.clone();
        m.horizon = horizon;
        Ok(m)
    }
}

/// Stationary stochastic policy over a finite state and action space,
/// stored as a row-major `(s, a)` probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    /// Validates that every state's row is a distribution over actions.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(FilabError::Input(
                "state and action counts must be positive".into(),
            ));
        }
        if probs.len() != n_states * n_actions {
            return Err(FilabError::Input(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        for s in 0..n_states {
            validate_distribution(
                &format!("policy row (s={s})"),
                &probs[s * n_actions..(s + 1) * n_actions],
                n_actions,
            )?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Uniform policy: every action equally likely in every state.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `pi(a | s)`.
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    /// The action distribution at `s` as a slice of length `n_actions`.
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

/// One finite-horizon rollout: `H+1` states and the `H` actions taken
/// between them. `states[t]` is `s_t`; `actions[t]` is the action chosen in
/// `states[t]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    /// Number of steps, i.e. the horizon this rollout was drawn under.
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.states[0])?;
        for t in 0..self.actions.len() {
            write!(f, " -a{}-> s{}", self.actions[t], self.states[t + 1])?;
        }
        Ok(())
    }
}

/// Probability of `traj` under `policy` in `mdp`:
/// `rho0(s_0) * prod_t pi(a_t | s_t) P(s_{t+1} | s_t, a_t)`.
///
/// The trajectory may have any length; it is scored as written, so passing a
/// shorter or longer rollout than `mdp.horizon()` scores that many steps.
pub fn traj_probability(mdp: &FiniteMdp, policy: &TabularPolicy, traj: &Trajectory) -> f64 {
    debug_assert_eq!(traj.states.len(), traj.actions.len() + 1);
    let mut p = mdp.initial_dist()[traj.states[0]];
    for t in 0..traj.actions.len() {
        let (s, a, next) = (traj.states[t], traj.actions[t], traj.states[t + 1]);
        p *= policy.prob(s, a) * mdp.transition_prob(s, a, next);
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

/// Exact occupancy measures of a policy: the law of `s_t` for each
/// `t = 0..H-1`, their arithmetic mean, and the induced state-action
/// occupancy `avg(s) * pi(a|s)`.
#[derive(Debug, Clone)]
pub struct OccupancyMeasures {
    /// `per_time[t][s] = P(s_t = s)` for `t = 0..H-1`.
    pub per_time: Vec<Vec<f64>>,
    /// `avg[s] = (1/H) sum_t per_time[t][s]`.
    pub avg: Vec<f64>,
    /// `state_action[s * n_actions + a] = avg[s] * pi(a|s)`.
    pub state_action: Vec<f64>,
    pub n_actions: usize,
}

impl OccupancyMeasures {
    /// `avg(s) * pi(a|s)` by index.
    pub fn state_action(&self, s: usize, a: usize) -> f64 {
        self.state_action[s * self.n_actions + a]
    }
}

/// Computes occupancy measures by the forward recursion
/// `rho_{t+1}(s') = sum_{s,a} rho_t(s) pi(a|s) P(s'|s,a)`, seeded with the
/// initial distribution.
pub fn occupancy(mdp: &FiniteMdp, policy: &TabularPolicy) -> OccupancyMeasures {
    let (ns, na, h) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let mut per_time = Vec::with_capacity(h);
    let mut current = mdp.initial_dist().to_vec();
    for _ in 0..h {
        per_time.push(current.clone());
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if current[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                let w = current[s] * policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let row = mdp.transition_row(s, a);
                for (sp, &p) in row.iter().enumerate() {
                    next[sp] += w * p;
                }
            }
        }
        current = next;
    }
    let mut avg = vec![0.0; ns];
    for row in &per_time {
        for (s, &p) in row.iter().enumerate() {
            avg[s] += p;
        }
    }
    for v in &mut avg {
        *v /= h as f64;
    }
    let mut state_action = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            state_action[s * na + a] = avg[s] * policy.prob(s, a);
        }
    }
    OccupancyMeasures {
        per_time,
        avg,
        state_action,
        n_actions: na,
    }
}

/// Enumerates every positive-probability trajectory of length
/// `mdp.horizon()` under `policy`, returning `(trajectory, probability)`
/// pairs. Zero-probability branches are pruned during the walk.
///
/// Fails with a resource error if the walk would expand more than
/// [`MAX_ENUM_NODES`] nodes.
pub fn enumerate_trajectories(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
) -> Result<Vec<(Trajectory, f64)>> {
    let mut out = Vec::new();
    let mut nodes = 0_usize;
    let mut states = Vec::with_capacity(mdp.horizon() + 1);
    let mut actions = Vec::with_capacity(mdp.horizon());
    for (s0, &p0) in mdp.initial_dist().iter().enumerate() {
        if p0 == 0.0 {
            continue;
        }
        states.push(s0);
        walk(mdp, policy, p0, &mut states, &mut actions, &mut nodes, &mut out)?;
        states.pop();
    }
    return Ok(out);

    fn walk(
        mdp: &FiniteMdp,
        policy: &TabularPolicy,
        prob: f64,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        nodes: &mut usize,
        out: &mut Vec<(Trajectory, f64)>,
    ) -> Result<()> {
        if actions.len() == mdp.horizon() {
            out.push((
                Trajectory {
                    states: states.clone(),
                    actions: actions.clone(),
                },
                prob,
            ));
            return Ok(());
        }
        let s = *states.last().expect("walk starts with an initial state");
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let row = mdp.transition_row(s, a);
            for (sp, &pt) in row.iter().enumerate() {
                if pt == 0.0 {
                    continue;
                }
                *nodes += 1;
                if *nodes > MAX_ENUM_NODES {
                    return Err(FilabError::Resource(format!(
                        "trajectory enumeration exceeded {MAX_ENUM_NODES} nodes"
                    )));
                }
                states.push(sp);
                actions.push(a);
                walk(mdp, policy, prob * pa * pt, states, actions, nodes, out)?;
                actions.pop();
                states.pop();
            }
        }
        Ok(())
    }
}

/// Draws one index from a probability row using a single uniform variate and
/// a cumulative scan. Falls back to the last positive-probability entry if
/// rounding pushes the cumulative sum fractionally below one.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("categorical row must have positive mass")
}

/// Rolls out one trajectory with a caller-supplied generator.
pub fn sample_trajectory_with_rng<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    rng: &mut R,
) -> Trajectory {
    let mut states = Vec::with_capacity(mdp.horizon() + 1);
    let mut actions = Vec::with_capacity(mdp.horizon());
    let mut s = sample_categorical(rng, mdp.initial_dist());
    states.push(s);
    for _ in 0..mdp.horizon() {
        let a = sample_categorical(rng, policy.row(s));
        s = sample_categorical(rng, mdp.transition_row(s, a));
        actions.push(a);
        states.push(s);
    }
    Trajectory { states, actions }
}

/// Rolls out one trajectory from a fixed seed. Identical seeds give
/// identical rollouts on every platform.
pub fn sample_trajectory(mdp: &FiniteMdp, policy: &TabularPolicy, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trajectory_with_rng(mdp, policy, &mut rng)
}
