//! Sample-based divergence estimation: the variational lower bound
//! `E_p[g(V)] - E_q[f*(g(V))]`, discriminator fitting by gradient ascent,
//! the closed-form optimal discriminator, and a least-squares density
//! ratio estimator.
//!
//! A discriminator `V` scores state-action pairs; its activation `g(V)`
//! lands in `dom f*`, so the bound above is valid for any weights and
//! tight at `g(V) = f'(p/q)`. Fitting maximizes the bound, which is a
//! discriminative two-sample problem between expert and learner samples.
//! With finite samples the bound can never certify an infinite divergence,
//! a blind spot [`estimator_blindness_demo`] makes concrete.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::divergence::Divergence;
use crate::envs::{
    bandit_cosine_grads, bandit_cosines, grid_cosine_grads, grid_cosines, SHARPNESS,
};
use crate::error::{FilabError, Result};
use crate::mdp::{sample_categorical, Trajectory};

/// Steps and rate used by [`estimator_blindness_demo`]'s internal fit.
const BLINDNESS_FIT_STEPS: usize = 400;
const BLINDNESS_FIT_RATE: f64 = 0.1;

/// Who generated a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Expert,
    Learner,
}

/// A multiset of `(state, action)` observations over a known shape.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub n_states: usize,
    pub n_actions: usize,
    pub pairs: Vec<(usize, usize)>,
    pub source: SampleSource,
}

impl SampleSet {
    pub fn new(n_states: usize, n_actions: usize, source: SampleSource) -> Self {
        Self {
            n_states,
            n_actions,
            pairs: Vec::new(),
            source,
        }
    }

    /// Collects every `(s_t, a_t)` pair from the given rollouts.
    pub fn from_trajectories(
        trajectories: &[Trajectory],
        n_states: usize,
        n_actions: usize,
        source: SampleSource,
    ) -> Self {
        let mut set = Self::new(n_states, n_actions, source);
        for traj in trajectories {
            for t in 0..traj.actions.len() {
                set.push(traj.states[t], traj.actions[t]);
            }
        }
        set
    }

    pub fn push(&mut self, state: usize, action: usize) {
        debug_assert!(state < self.n_states && action < self.n_actions);
        self.pairs.push((state, action));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Dense per-cell counts, indexed `s * n_actions + a`.
    pub fn cell_counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_states * self.n_actions];
        for &(s, a) in &self.pairs {
            counts[s * self.n_actions + a] += 1.0;
        }
        counts
    }
}

/// A state-action score function. The tabular kind stores one weight per
/// cell; the two parametric kinds mirror the environments' cosine policy
/// parameterizations, scoring `V(s, a) = A * cos(angle_a - theta_s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Discriminator {
    Tabular {
        n_states: usize,
        n_actions: usize,
        values: Vec<f64>,
    },
    /// Single-angle cosine scores for the three-armed bandit.
    BanditScalar { theta: f64 },
    /// One angle per grid cell, scoring the four grid actions.
    GridAngular { theta: Vec<f64> },
}

impl Discriminator {
    /// All-zero tabular discriminator of the given shape.
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Discriminator::Tabular {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            Discriminator::Tabular { n_states, .. } => *n_states,
            Discriminator::BanditScalar { .. } => 1,
            Discriminator::GridAngular { theta } => theta.len(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Discriminator::Tabular { n_actions, .. } => *n_actions,
            Discriminator::BanditScalar { .. } => 3,
            Discriminator::GridAngular { .. } => 4,
        }
    }

    /// Score `V(s, a)`.
    pub fn value(&self, state: usize, action: usize) -> f64 {
        match self {
            Discriminator::Tabular {
                n_actions, values, ..
            } => values[state * n_actions + action],
            Discriminator::BanditScalar { theta } => SHARPNESS * bandit_cosines(*theta)[action],
            Discriminator::GridAngular { theta } => {
                SHARPNESS * grid_cosines(theta[state])[action]
            }
        }
    }

    /// True when every weight is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Discriminator::Tabular { values, .. } => values.iter().all(|v| v.is_finite()),
            Discriminator::BanditScalar { theta } => theta.is_finite(),
            Discriminator::GridAngular { theta } => theta.iter().all(|t| t.is_finite()),
        }
    }

    /// Number of parameters (cells for tabular, angles otherwise).
    fn n_params(&self) -> usize {
        match self {
            Discriminator::Tabular { values, .. } => values.len(),
            Discriminator::BanditScalar { .. } => 1,
            Discriminator::GridAngular { theta } => theta.len(),
        }
    }

    /// Adds `scale * dV(s,a)/dparams` into `grad`.
    fn accumulate_value_grad(&self, state: usize, action: usize, scale: f64, grad: &mut [f64]) {
        match self {
            Discriminator::Tabular { n_actions, .. } => {
                grad[state * n_actions + action] += scale;
            }
            Discriminator::BanditScalar { theta } => {
                grad[0] += scale * SHARPNESS * bandit_cosine_grads(*theta)[action];
            }
            Discriminator::GridAngular { theta } => {
                grad[state] += scale * SHARPNESS * grid_cosine_grads(theta[state])[action];
            }
        }
    }

    fn apply_step(&mut self, rate: f64, grad: &[f64]) {
        match self {
            Discriminator::Tabular { values, .. } => {
                for (v, g) in values.iter_mut().zip(grad) {
                    *v += rate * g;
                }
            }
            Discriminator::BanditScalar { theta } => *theta += rate * grad[0],
            Discriminator::GridAngular { theta } => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t += rate * g;
                }
            }
        }
    }
}

/// Sample estimate of the variational lower bound: the mean of `g(V)` over
/// expert samples minus the mean of `f*(g(V))` over learner samples.
pub fn variational_estimate(
    expert_samples: &SampleSet,
    learner_samples: &SampleSet,
    v: &Discriminator,
    div: Divergence,
) -> Result<f64> {
    if expert_samples.is_empty() || learner_samples.is_empty() {
        return Err(FilabError::Input(
            "variational estimate needs non-empty sample sets".into(),
        ));
    }
    let mut expert_term = 0.0;
    for &(s, a) in &expert_samples.pairs {
        expert_term += div.activation(v.value(s, a));
    }
    let mut learner_term = 0.0;
    for &(s, a) in &learner_samples.pairs {
        learner_term += div.conjugate_of_activation(v.value(s, a));
    }
    Ok(expert_term / expert_samples.len() as f64 - learner_term / learner_samples.len() as f64)
}

/// The same objective with exact expectations over flat distributions:
/// `sum_i p_i g(V_i) - sum_i q_i f*(g(V_i))`, with `V_i` read in row-major
/// cell order. Never exceeds the exact divergence.
pub fn exact_variational_objective(
    div: Divergence,
    p: &[f64],
    q: &[f64],
    v: &Discriminator,
) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    debug_assert_eq!(p.len(), v.n_states() * v.n_actions());
    let na = v.n_actions();
    let mut total = 0.0;
    for i in 0..p.len() {
        let score = v.value(i / na, i % na);
        total += p[i] * div.activation(score) - q[i] * div.conjugate_of_activation(score);
    }
    total
}

/// Closed-form maximizer of the variational bound for a full-support pair:
/// a tabular discriminator with `g(V_i) = f'(p_i / q_i)`.
pub fn optimal_discriminator(div: Divergence, p: &[f64], q: &[f64]) -> Result<Discriminator> {
    if p.len() != q.len() || p.is_empty() {
        return Err(FilabError::Input(
            "optimal discriminator needs equal-length nonempty distributions".into(),
        ));
    }
    let mut values = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 || qi <= 0.0 {
            return Err(FilabError::Domain(format!(
                "optimal discriminator needs full support, got cell (p={pi}, q={qi})"
            )));
        }
        values.push(div.optimal_score(pi / qi));
    }
    Ok(Discriminator::Tabular {
        n_states: 1,
        n_actions: values.len(),
        values,
    })
}

/// Fits a discriminator by `steps` full-batch gradient-ascent updates on
/// the sample-mean variational objective. Deterministic; warm-starts from
/// `init`. Fails with a numerical error (naming the step) if any weight
/// leaves the finite range.
pub fn fit_discriminator(
    expert_samples: &SampleSet,
    learner_samples: &SampleSet,
    div: Divergence,
    steps: usize,
    learning_rate: f64,
    init: Discriminator,
) -> Result<Discriminator> {
    if expert_samples.is_empty() || learner_samples.is_empty() {
        return Err(FilabError::Input(
            "discriminator fitting needs non-empty sample sets".into(),
        ));
    }
    if learning_rate <= 0.0 {
        return Err(FilabError::Input(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let expert_freq = normalized(expert_samples.cell_counts());
    let learner_freq = normalized(learner_samples.cell_counts());
    let na = expert_samples.n_actions;
    let mut v = init;
    let mut grad = vec![0.0; v.n_params()];
    for step in 0..steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..expert_freq.len() {
            let (fp, fq) = (expert_freq[i], learner_freq[i]);
            if fp == 0.0 && fq == 0.0 {
                continue;
            }
            let (s, a) = (i / na, i % na);
            let score = v.value(s, a);
            let scale = fp * div.activation_derivative(score)
                - fq * div.conjugate_of_activation_derivative(score);
            if scale != 0.0 {
                v.accumulate_value_grad(s, a, scale, &mut grad);
            }
        }
        v.apply_step(learning_rate, &grad);
        if !v.is_finite() {
            return Err(FilabError::Numerical(format!(
                "discriminator weights left the finite range at ascent step {step}"
            )));
        }
    }
    Ok(v)
}

fn normalized(mut counts: Vec<f64>) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        for c in &mut counts {
            *c /= total;
        }
    }
    counts
}

/// A clipped tabular density-ratio estimate over `(state, action)` cells.
#[derive(Debug, Clone)]
pub struct RatioEstimate {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
    pub clip_floor: f64,
}

impl RatioEstimate {
    /// Estimated ratio at a cell, always within `[c, 1/c]`.
    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }
}

/// Least-squares density-ratio fit over the tabular class: minimizing the
/// empirical `mean_den[g^2] - 2 mean_num[g]` objective cell by cell gives
/// the frequency ratio (the count ratio when both sets have equal size).
/// Cells the denominator never visits get `1/c`; everything is clipped to
/// `[c, 1/c]`.
pub fn lsq_density_ratio(
    numerator_samples: &SampleSet,
    denominator_samples: &SampleSet,
    clip_floor: f64,
) -> Result<RatioEstimate> {
    if numerator_samples.is_empty() || denominator_samples.is_empty() {
        return Err(FilabError::Input(
            "density-ratio fit needs non-empty sample sets".into(),
        ));
    }
    if !(0.0..=1.0).contains(&clip_floor) || clip_floor == 0.0 {
        return Err(FilabError::Input(format!(
            "clip floor must lie in (0, 1], got {clip_floor}"
        )));
    }
    if numerator_samples.n_states != denominator_samples.n_states
        || numerator_samples.n_actions != denominator_samples.n_actions
    {
        return Err(FilabError::Input(
            "sample sets for the ratio fit have mismatched shapes".into(),
        ));
    }
    let num = numerator_samples.cell_counts();
    let den = denominator_samples.cell_counts();
    let n_num = numerator_samples.len() as f64;
    let n_den = denominator_samples.len() as f64;
    let cap = 1.0 / clip_floor;
    let values = num
        .iter()
        .zip(&den)
        .map(|(&cn, &cd)| {
            if cd == 0.0 {
                cap
            } else {
                ((cn / n_num) / (cd / n_den)).clamp(clip_floor, cap)
            }
        })
        .collect();
    Ok(RatioEstimate {
        n_states: numerator_samples.n_states,
        n_actions: numerator_samples.n_actions,
        values,
        clip_floor,
    })
}

/// Draws `n_samples` from each distribution, fits a tabular discriminator,
/// and returns `(exact divergence, sample-based estimate)`. The exact value
/// may be `+inf`; the estimate is always finite, demonstrating that the
/// variational route cannot certify infinite divergences from samples.
pub fn estimator_blindness_demo(
    div: Divergence,
    expert_dist: &[f64],
    learner_dist: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(FilabError::Input("need at least one sample".into()));
    }
    let true_value = crate::divergence::exact_f_divergence(div, expert_dist, learner_dist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = expert_dist.len();
    let mut expert = SampleSet::new(1, k, SampleSource::Expert);
    let mut learner = SampleSet::new(1, k, SampleSource::Learner);
    for _ in 0..n_samples {
        expert.push(0, sample_categorical(&mut rng, expert_dist));
    }
    for _ in 0..n_samples {
        learner.push(0, sample_categorical(&mut rng, learner_dist));
    }
    let fitted = fit_discriminator(
        &expert,
        &learner,
        div,
        BLINDNESS_FIT_STEPS,
        BLINDNESS_FIT_RATE,
        Discriminator::zeros(1, k),
    )?;
    let estimate = variational_estimate(&expert, &learner, &fitted, div)?;
    Ok((true_value, estimate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::exact_f_divergence;
    use approx::assert_abs_diff_eq;

    fn set_from(pairs: &[(usize, usize)], k: usize, source: SampleSource) -> SampleSet {
        let mut s = SampleSet::new(1, k, source);
        for &(st, a) in pairs {
            s.push(st, a);
        }
        s
    }

    #[test]
    fn constant_one_discriminator_scores_zero_on_identical_samples() {
        let pairs = [(0, 0), (0, 1), (0, 1), (0, 2)];
        let expert = set_from(&pairs, 3, SampleSource::Expert);
        let learner = set_from(&pairs, 3, SampleSource::Learner);
        let v = Discriminator::Tabular {
            n_states: 1,
            n_actions: 3,
            values: vec![1.0; 3],
        };
        let est = variational_estimate(&expert, &learner, &v, Divergence::Kl).unwrap();
        assert_abs_diff_eq!(est, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_sets_are_rejected() {
        let expert = SampleSet::new(1, 3, SampleSource::Expert);
        let learner = set_from(&[(0, 0)], 3, SampleSource::Learner);
        let v = Discriminator::zeros(1, 3);
        assert!(matches!(
            variational_estimate(&expert, &learner, &v, Divergence::Kl),
            Err(FilabError::Input(_))
        ));
        assert!(matches!(
            fit_discriminator(&expert, &learner, Divergence::Kl, 1, 0.1, v),
            Err(FilabError::Input(_))
        ));
    }

    #[test]
    fn optimal_discriminator_reference_values() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        // Forward KL at p = q: ratio 1 everywhere, score 1 + ln 1 = 1.
        let v = optimal_discriminator(Divergence::Kl, &p, &p).unwrap();
        assert_eq!(v.value(0, 0), 1.0);
        assert_eq!(v.value(0, 1), 1.0);
        // Total variation tie convention: score 0.
        let v = optimal_discriminator(Divergence::Tv, &p, &p).unwrap();
        assert_eq!(v.value(0, 0), 0.0);
        // Reverse KL: V = ln(p/q), and g(V) recovers f'(p/q) = -q/p.
        let v = optimal_discriminator(Divergence::Rkl, &p, &q).unwrap();
        assert_abs_diff_eq!(v.value(0, 0), 2.0_f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.value(0, 1), (2.0_f64 / 3.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            Divergence::Rkl.activation(v.value(0, 0)),
            -0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            Divergence::Rkl.activation(v.value(0, 1)),
            -1.5,
            epsilon = 1e-12
        );
        assert!(matches!(
            optimal_discriminator(Divergence::Kl, &[1.0, 0.0], &[0.5, 0.5]),
            Err(FilabError::Domain(_))
        ));
    }

    #[test]
    fn exact_objective_is_tight_at_the_optimum_and_lower_elsewhere() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.5, 0.3];
        for div in Divergence::ALL {
            let exact = exact_f_divergence(div, &p, &q).unwrap();
            let vstar = optimal_discriminator(div, &p, &q).unwrap();
            let at_opt = exact_variational_objective(div, &p, &q, &vstar);
            assert_abs_diff_eq!(at_opt, exact, epsilon = 1e-9);
            for values in [vec![0.0; 3], vec![-0.4, 0.2, 0.9], vec![2.0, -2.0, 0.5]] {
                let v = Discriminator::Tabular {
                    n_states: 1,
                    n_actions: 3,
                    values,
                };
                assert!(exact_variational_objective(div, &p, &q, &v) <= exact + 1e-9);
            }
        }
    }

    #[test]
    fn fitting_identical_samples_approaches_zero_objective() {
        let pairs: Vec<(usize, usize)> = (0..60).map(|i| (0, i % 3)).collect();
        let expert = set_from(&pairs, 3, SampleSource::Expert);
        let learner = set_from(&pairs, 3, SampleSource::Learner);
        let v = fit_discriminator(
            &expert,
            &learner,
            Divergence::Kl,
            500,
            0.2,
            Discriminator::zeros(1, 3),
        )
        .unwrap();
        let obj = variational_estimate(&expert, &learner, &v, Divergence::Kl).unwrap();
        assert_abs_diff_eq!(obj, 0.0, epsilon = 0.05);
    }

    #[test]
    fn expert_only_cell_grows_monotonically_under_kl() {
        let expert = set_from(&[(0, 0), (0, 1)], 2, SampleSource::Expert);
        let learner = set_from(&[(0, 0), (0, 0)], 2, SampleSource::Learner);
        let mut v = Discriminator::zeros(1, 2);
        let mut last = v.value(0, 1);
        for _ in 0..10 {
            v = fit_discriminator(&expert, &learner, Divergence::Kl, 1, 0.1, v).unwrap();
            let now = v.value(0, 1);
            assert!(now > last, "expert-only cell should keep rising");
            last = now;
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let expert = set_from(&[(0, 0), (0, 1), (0, 1)], 3, SampleSource::Expert);
        let learner = set_from(&[(0, 2), (0, 0), (0, 2)], 3, SampleSource::Learner);
        let run = || {
            fit_discriminator(
                &expert,
                &learner,
                Divergence::Js,
                200,
                0.05,
                Discriminator::zeros(1, 3),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn objective_is_nondecreasing_at_small_rate() {
        let expert = set_from(&[(0, 0), (0, 0), (0, 1)], 3, SampleSource::Expert);
        let learner = set_from(&[(0, 1), (0, 2), (0, 2)], 3, SampleSource::Learner);
        for div in Divergence::ALL {
            let mut v = Discriminator::zeros(1, 3);
            let mut last = variational_estimate(&expert, &learner, &v, div).unwrap();
            for _ in 0..200 {
                v = fit_discriminator(&expert, &learner, div, 1, 1e-3, v).unwrap();
                let now = variational_estimate(&expert, &learner, &v, div).unwrap();
                assert!(now >= last - 1e-12, "{div}: objective fell {last} -> {now}");
                last = now;
            }
        }
    }

    #[test]
    fn runaway_rate_reports_the_failing_step() {
        let expert = set_from(&[(0, 0), (0, 1)], 2, SampleSource::Expert);
        let learner = set_from(&[(0, 0), (0, 0)], 2, SampleSource::Learner);
        let err = fit_discriminator(
            &expert,
            &learner,
            Divergence::Kl,
            50,
            1e300,
            Discriminator::zeros(1, 2),
        );
        match err {
            Err(FilabError::Numerical(msg)) => assert!(msg.contains("step")),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn parametric_discriminators_fit_too() {
        let expert = set_from(&[(0, 0), (0, 0), (0, 1)], 3, SampleSource::Expert);
        let learner = set_from(&[(0, 1), (0, 2), (0, 2)], 3, SampleSource::Learner);
        let init = Discriminator::BanditScalar { theta: 0.3 };
        let before = variational_estimate(&expert, &learner, &init, Divergence::Rkl).unwrap();
        let v = fit_discriminator(&expert, &learner, Divergence::Rkl, 300, 0.01, init).unwrap();
        let after = variational_estimate(&expert, &learner, &v, Divergence::Rkl).unwrap();
        assert!(after > before);
        assert!(v.is_finite());
    }

    #[test]
    fn lsq_matches_the_worked_example() {
        let num = set_from(
            &[(0, 0); 6]
                .iter()
                .chain(&[(0, 1); 4])
                .copied()
                .collect::<Vec<_>>(),
            2,
            SampleSource::Learner,
        );
        let den = set_from(
            &[(0, 0); 5]
                .iter()
                .chain(&[(0, 1); 5])
                .copied()
                .collect::<Vec<_>>(),
            2,
            SampleSource::Expert,
        );
        let r = lsq_density_ratio(&num, &den, 0.1).unwrap();
        assert_abs_diff_eq!(r.value(0, 0), 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.value(0, 1), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn lsq_identical_sets_give_unit_ratio() {
        let pairs: Vec<(usize, usize)> = (0..30).map(|i| (0, i % 3)).collect();
        let a = set_from(&pairs, 3, SampleSource::Learner);
        let b = set_from(&pairs, 3, SampleSource::Expert);
        let r = lsq_density_ratio(&a, &b, 0.05).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(r.value(0, k), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lsq_clips_and_caps_empty_denominator_cells() {
        let num = set_from(&[(0, 0), (0, 0), (0, 1)], 3, SampleSource::Learner);
        let den = set_from(&[(0, 1), (0, 1), (0, 2)], 3, SampleSource::Expert);
        let c = 0.2;
        let r = lsq_density_ratio(&num, &den, c).unwrap();
        // Cell 0: denominator empty, capped at 1/c.
        assert_eq!(r.value(0, 0), 5.0);
        // Cell 1: raw ratio (1/3)/(2/3) = 1/2, inside the clip range.
        assert_abs_diff_eq!(r.value(0, 1), 0.5, epsilon = 1e-12);
        // Cell 2: raw ratio 0, clipped up to c.
        assert_eq!(r.value(0, 2), c);
        for v in &r.values {
            assert!((c..=1.0 / c).contains(v));
        }
        assert!(lsq_density_ratio(&num, &den, 0.0).is_err());
        assert!(lsq_density_ratio(&num, &den, 1.5).is_err());
    }

    #[test]
    fn lsq_closed_form_matches_gradient_solve() {
        // Plain gradient descent on mean_den[g^2] - 2 mean_num[g], then the
        // same clipping as the closed form.
        let num = set_from(
            &[(0, 0), (0, 0), (0, 0), (0, 1), (0, 2), (0, 2)],
            3,
            SampleSource::Learner,
        );
        let den = set_from(
            &[(0, 0), (0, 1), (0, 1), (0, 1), (0, 2), (0, 2)],
            3,
            SampleSource::Expert,
        );
        let c = 0.1;
        let closed = lsq_density_ratio(&num, &den, c).unwrap();
        let fn_num = normalized(num.cell_counts());
        let fn_den = normalized(den.cell_counts());
        let mut g = vec![1.0; 3];
        for _ in 0..4000 {
            for i in 0..3 {
                let grad = 2.0 * fn_den[i] * g[i] - 2.0 * fn_num[i];
                g[i] -= 0.1 * grad;
            }
        }
        for i in 0..3 {
            let clipped = g[i].clamp(c, 1.0 / c);
            assert_abs_diff_eq!(clipped, closed.values[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn blindness_demo_reports_finite_estimates_of_infinite_divergences() {
        let expert = [0.5, 0.5, 0.0];
        let a_only = [1.0, 0.0, 0.0];
        let (truth, est) =
            estimator_blindness_demo(Divergence::Kl, &expert, &a_only, 500, 11).unwrap();
        assert_eq!(truth, f64::INFINITY);
        assert!(est.is_finite());
        // Reverse KL blows up when the learner puts mass off expert support.
        let c_only = [0.0, 0.0, 1.0];
        let (truth, est) =
            estimator_blindness_demo(Divergence::Rkl, &expert, &c_only, 500, 12).unwrap();
        assert_eq!(truth, f64::INFINITY);
        assert!(est.is_finite());
    }

    #[test]
    fn blindness_demo_is_consistent_when_supports_match() {
        let p = [0.4, 0.35, 0.25];
        let (truth, est) = estimator_blindness_demo(Divergence::Kl, &p, &p, 10_000, 3).unwrap();
        assert_eq!(truth, 0.0);
        assert!(est.abs() <= 0.05, "estimate {est} should be near zero");
    }
}
