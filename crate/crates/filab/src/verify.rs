//! Property checks that re-derive the library's core inequalities on random
//! instances, plus deliberately broken variants proving each check can fail.
//!
//! Every check draws its own instances from a seeded generator, compares the
//! two sides of one inequality (or equality) with a small fixed slack, and
//! returns a [`CheckReport`] whose `failures` list serialized
//! counterexamples. A check passes exactly when that list is empty. The
//! checks cover:
//!
//! * `log_sum`: grouping terms cannot raise `sum_i q_i f(p_i / q_i)`.
//! * `information_loss`: pushing both distributions through a shared channel
//!   cannot raise `D_f`, with equality under an injective channel.
//! * `trajectory_lower_bound`: `D_f(trajectory) >= D_f(state-action)`.
//! * `rkl_equality`: trajectory reverse KL equals `H` times the expected
//!   per-state action reverse KL under the learner's average occupancy.
//! * `tv_chain`: `D_TV(trajectory) <= H E[D_TV(rows)] <= H sqrt(E[KL] / 2)`.
//! * `variational_tightness`: the variational objective never exceeds the
//!   exact divergence and meets it at the closed-form discriminator.
//! * `dre_bound`: empirical density-ratio error stays inside the
//!   `(2/c) sqrt(ln(2|G|/delta)) N^(-1/4)` envelope and shrinks with `N`.
//! * `blindness`: sample-based estimates stay finite on support-mismatched
//!   pairs whose exact divergence is infinite, growing only with fit budget.
//!
//! [`run_all_mutations`] runs the same checks with a known bug injected into
//! each (a flipped inequality, a dropped horizon factor, a swapped-pair
//! discriminator, and so on); a healthy suite sees every mutant fail.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::divergence::{
    exact_f_divergence, expected_action_divergence, state_action_divergence, traj_divergence,
    Divergence, V_CLAMP,
};
use crate::estimation::{
    estimator_blindness_demo, exact_variational_objective, fit_discriminator, lsq_density_ratio,
    optimal_discriminator, variational_estimate, Discriminator, SampleSet, SampleSource,
};
use crate::mdp::{occupancy, sample_categorical, FiniteMdp, TabularPolicy};

/// Slack granted to every exact inequality before it counts as violated.
pub const INEQUALITY_TOL: f64 = 1e-9;

/// Names of the checks in [`run_all_checks`] order.
pub const CHECK_NAMES: [&str; 8] = [
    "log_sum",
    "information_loss",
    "trajectory_lower_bound",
    "rkl_equality",
    "tv_chain",
    "variational_tightness",
    "dre_bound",
    "blindness",
];

/// Outcome of one property check over many sampled instances.
///
/// `failures` holds one serialized counterexample per violated instance, so
/// the check passed exactly when it is empty. `max_violation` is the largest
/// amount by which any instance broke the claimed bound (zero when none did),
/// which stays useful for judging how close a passing run came to the slack.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub failures: Vec<String>,
    pub max_violation: f64,
}

impl CheckReport {
    fn new(name: &str, mutated: bool) -> Self {
        let name = if mutated {
            format!("{name} (mutated)")
        } else {
            name.to_string()
        };
        Self {
            name,
            instances: 0,
            failures: Vec::new(),
            max_violation: 0.0,
        }
    }

    /// True when no instance violated the check beyond its tolerance.
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Records one instance with the amount by which it broke the bound
    /// (clamped to zero when satisfied) and a lazily built counterexample.
    fn observe(&mut self, violation: f64, tol: f64, detail: impl FnOnce() -> String) {
        self.instances += 1;
        if violation > self.max_violation {
            self.max_violation = violation;
        }
        if violation > tol {
            self.failures.push(detail());
        }
    }
}

/// Amount by which `lhs >= rhs` fails, zero when it holds. Infinite sides
/// compare the usual way, so the result is never NaN.
fn shortfall(lhs: f64, rhs: f64) -> f64 {
    if rhs <= lhs {
        0.0
    } else {
        rhs - lhs
    }
}

/// Absolute difference that treats two infinite sides of the same sign as
/// equal instead of NaN.
fn abs_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// A randomly drawn finite MDP with full-support expert and learner
/// policies. Small enough (2..=4 states, 2..=3 actions, horizon 1..=4) that
/// exhaustive trajectory enumeration stays cheap.
pub struct RandomInstance {
    pub mdp: FiniteMdp,
    pub expert: TabularPolicy,
    pub learner: TabularPolicy,
}

/// Draws a full-support probability vector: unit-exponential weights
/// normalized, floored at 1e-3, and renormalized. The floor keeps ratios
/// and logs comfortably finite in every downstream formula.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    assert!(len >= 1, "distribution needs at least one cell");
    let mut v: Vec<f64> = (0..len)
        .map(|_| -rng.gen::<f64>().max(1e-300).ln())
        .collect();
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x = (*x / sum).max(1e-3));
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

/// Draws a policy whose every row comes from [`random_distribution`].
pub fn random_policy<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
) -> TabularPolicy {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        probs.extend(random_distribution(rng, n_actions));
    }
    TabularPolicy::new(n_states, n_actions, probs).expect("random rows are valid distributions")
}

/// Draws a full random instance: sizes, initial distribution, transition
/// rows, and both policies all from the supplied generator.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> RandomInstance {
    let n_states = rng.gen_range(2..=4);
    let n_actions = rng.gen_range(2..=3);
    let horizon = rng.gen_range(1..=4);
    let initial = random_distribution(rng, n_states);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(random_distribution(rng, n_states));
    }
    let mdp = FiniteMdp::new(n_states, n_actions, horizon, initial, transition)
        .expect("random rows are valid distributions");
    let expert = random_policy(rng, n_states, n_actions);
    let learner = random_policy(rng, n_states, n_actions);
    RandomInstance {
        mdp,
        expert,
        learner,
    }
}

/// Two states, two actions, horizon two, with action 1 swapping states and
/// visibly different policy rows per state. Both the trajectory-over-
/// occupancy gap and the mismatch between expert- and learner-weighted
/// action divergences are strictly positive here, so it serves as a
/// deterministic witness for the mutated checks.
fn gapped_instance() -> RandomInstance {
    let transition = vec![
        1.0, 0.0, // s0, a0 -> s0
        0.0, 1.0, // s0, a1 -> s1
        0.0, 1.0, // s1, a0 -> s1
        1.0, 0.0, // s1, a1 -> s0
    ];
    let mdp = FiniteMdp::new(2, 2, 2, vec![1.0, 0.0], transition).expect("hand-built rows");
    let expert = TabularPolicy::new(2, 2, vec![0.9, 0.1, 0.2, 0.8]).expect("hand-built rows");
    let learner = TabularPolicy::new(2, 2, vec![0.5, 0.5, 0.5, 0.5]).expect("hand-built rows");
    RandomInstance {
        mdp,
        expert,
        learner,
    }
}

/// One state, two actions: every trajectory is an action string, so the
/// trajectory distribution is the `horizon`-fold product of the single
/// policy row. With rows `(0.5, 0.5)` versus `(0.9, 0.1)` and horizon 3 the
/// trajectory total variation is 0.604 while the per-step value is 0.4,
/// which separates the chained bound from its horizon-free corruption.
fn product_instance(horizon: usize) -> RandomInstance {
    let mdp = FiniteMdp::new(1, 2, horizon, vec![1.0], vec![1.0, 1.0]).expect("hand-built rows");
    let expert = TabularPolicy::new(1, 2, vec![0.5, 0.5]).expect("hand-built rows");
    let learner = TabularPolicy::new(1, 2, vec![0.9, 0.1]).expect("hand-built rows");
    RandomInstance {
        mdp,
        expert,
        learner,
    }
}

/// Checks the generalized log-sum inequality
/// `sum_i q_i f(p_i / q_i) >= (sum q) f(sum p / sum q)` on nonnegative
/// vectors, including cells sent to zero. The mutated variant demands a
/// strict gap of 0.05, which equal-ratio vectors refuse.
pub fn check_log_sum(seed: u64) -> CheckReport {
    log_sum_report(seed, false)
}

fn log_sum_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("log_sum", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (vec![1.0, 1.0], vec![1.0, 1.0]),
        (vec![0.2, 0.8], vec![0.5, 0.5]),
    ];
    for _ in 0..10_000 {
        let len = rng.gen_range(2..=5);
        let p: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    0.0
                } else {
                    rng.gen_range(0.05..2.0)
                }
            })
            .collect();
        let q: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..2.0)).collect();
        cases.push((p, q));
    }
    for (p, q) in &cases {
        let p_sum: f64 = p.iter().sum();
        let q_sum: f64 = q.iter().sum();
        for div in Divergence::ALL {
            let lhs: f64 = p.iter().zip(q).map(|(&pi, &qi)| div.cell(pi, qi)).sum();
            let grouped = q_sum * div.generator(p_sum / q_sum);
            let rhs = if mutated { grouped + 0.05 } else { grouped };
            report.observe(shortfall(lhs, rhs), INEQUALITY_TOL, || {
                format!("{div}: termwise sum {lhs} fell below grouped value {rhs} for p={p:?}, q={q:?}")
            });
        }
    }
    report
}

/// Checks that applying one shared channel `K(b|a)` to both distributions
/// never increases `D_f`, that an injective channel preserves it exactly,
/// and that a channel merging unequal-ratio cells strictly loses some. The
/// mutated variant claims processing loses nothing.
pub fn check_information_loss(seed: u64) -> CheckReport {
    information_loss_report(seed, false)
}

fn push_channel(p: &[f64], channel: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; channel[0].len()];
    for (a, &mass) in p.iter().enumerate() {
        for (b, &k) in channel[a].iter().enumerate() {
            out[b] += mass * k;
        }
    }
    out
}

fn information_loss_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("information_loss", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mu_p = vec![0.2, 0.3, 0.5];
    let mu_q = vec![0.5, 0.3, 0.2];
    let identity: Vec<Vec<f64>> = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    // Merging the outer cells makes the images coincide, so every divergence
    // drops to zero while the originals stay apart.
    let merge_outer: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];

    let run_case = |report: &mut CheckReport, p: &[f64], q: &[f64], channel: &[Vec<f64>]| {
        let vp = push_channel(p, channel);
        let vq = push_channel(q, channel);
        for div in Divergence::ALL {
            let before = exact_f_divergence(div, p, q).expect("full-support inputs");
            let after = exact_f_divergence(div, &vp, &vq).expect("pushed distributions");
            let violation = if mutated {
                shortfall(after, before)
            } else {
                shortfall(before, after)
            };
            report.observe(violation, INEQUALITY_TOL, || {
                format!("{div}: D over a = {before}, D over channel output = {after} for p={p:?}, q={q:?}")
            });
        }
    };

    run_case(&mut report, &mu_p, &mu_q, &merge_outer);
    if !mutated {
        // Injective channels relabel outcomes, so the divergence is exact.
        for div in Divergence::ALL {
            let before = exact_f_divergence(div, &mu_p, &mu_q).expect("full-support inputs");
            let after = exact_f_divergence(
                div,
                &push_channel(&mu_p, &identity),
                &push_channel(&mu_q, &identity),
            )
            .expect("pushed distributions");
            report.observe(abs_gap(before, after), INEQUALITY_TOL, || {
                format!("{div}: injective channel moved the divergence from {before} to {after}")
            });
            // The merging channel must strictly lose information here.
            let merged = exact_f_divergence(
                div,
                &push_channel(&mu_p, &merge_outer),
                &push_channel(&mu_q, &merge_outer),
            )
            .expect("pushed distributions");
            report.observe(shortfall(before - merged, 1e-6), 0.0, || {
                format!("{div}: merging unequal-ratio cells kept the divergence at {merged} of {before}")
            });
        }
    }

    for _ in 0..1_000 {
        let la = rng.gen_range(2..=4);
        let lb = rng.gen_range(2..=4);
        let p = random_distribution(&mut rng, la);
        let q = random_distribution(&mut rng, la);
        let channel: Vec<Vec<f64>> = (0..la).map(|_| random_distribution(&mut rng, lb)).collect();
        run_case(&mut report, &p, &q, &channel);
    }
    report
}

/// Checks `D_f(trajectory) >= D_f(state-action)` across random instances,
/// with equality when the policies coincide and when the horizon is one.
/// The mutated variant claims the state-action view never loses anything.
pub fn check_trajectory_lower_bound(seed: u64) -> CheckReport {
    trajectory_lower_bound_report(seed, false)
}

fn trajectory_lower_bound_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("trajectory_lower_bound", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = vec![gapped_instance()];
    for _ in 0..200 {
        instances.push(random_instance(&mut rng));
    }
    for inst in &instances {
        for div in Divergence::ALL {
            let traj =
                traj_divergence(div, &inst.mdp, &inst.expert, &inst.learner).expect("valid MDP");
            let flat = state_action_divergence(div, &inst.mdp, &inst.expert, &inst.learner)
                .expect("valid MDP");
            let violation = if mutated {
                shortfall(flat, traj)
            } else {
                shortfall(traj, flat)
            };
            report.observe(violation, INEQUALITY_TOL, || {
                format!(
                    "{div}: trajectory value {traj} against state-action value {flat} \
                     (S={}, A={}, H={})",
                    inst.mdp.n_states(),
                    inst.mdp.n_actions(),
                    inst.mdp.horizon()
                )
            });
        }
    }
    if !mutated {
        // Identical policies collapse both sides to zero.
        let inst = random_instance(&mut rng);
        for div in Divergence::ALL {
            let traj = traj_divergence(div, &inst.mdp, &inst.expert, &inst.expert)
                .expect("valid MDP");
            let flat = state_action_divergence(div, &inst.mdp, &inst.expert, &inst.expert)
                .expect("valid MDP");
            report.observe(traj.abs().max(flat.abs()), INEQUALITY_TOL, || {
                format!("{div}: identical policies gave trajectory {traj}, state-action {flat}")
            });
        }
        // At horizon one a trajectory is exactly one state-action pair.
        for _ in 0..20 {
            let mut inst = random_instance(&mut rng);
            inst.mdp = inst.mdp.with_horizon(1).expect("positive horizon");
            for div in Divergence::ALL {
                let traj = traj_divergence(div, &inst.mdp, &inst.expert, &inst.learner)
                    .expect("valid MDP");
                let flat = state_action_divergence(div, &inst.mdp, &inst.expert, &inst.learner)
                    .expect("valid MDP");
                report.observe(abs_gap(traj, flat), INEQUALITY_TOL, || {
                    format!("{div}: horizon-one trajectory {traj} differs from state-action {flat}")
                });
            }
        }
    }
    report
}

/// Expected per-state action divergence weighted by the expert's average
/// occupancy instead of the learner's. Only the mutated reverse KL check
/// wants this, precisely because it breaks the factorization.
fn expert_weighted_action_divergence(
    div: Divergence,
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    learner: &TabularPolicy,
) -> f64 {
    let occ = occupancy(mdp, expert);
    let mut total = 0.0;
    for s in 0..mdp.n_states() {
        let w = occ.avg[s];
        if w == 0.0 {
            continue;
        }
        total += w * exact_f_divergence(div, expert.row(s), learner.row(s)).expect("policy rows");
        if total.is_infinite() {
            return f64::INFINITY;
        }
    }
    total
}

/// Checks the reverse KL factorization `D_RKL(trajectory) = H * E_rho[D_RKL
/// (rows)]` with the learner's average occupancy supplying the weights. The
/// mutated variant weights by the expert's occupancy instead.
pub fn check_rkl_equality(seed: u64) -> CheckReport {
    rkl_equality_report(seed, false)
}

fn rkl_equality_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("rkl_equality", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = vec![gapped_instance()];
    for _ in 0..100 {
        instances.push(random_instance(&mut rng));
    }
    for inst in &instances {
        let traj = traj_divergence(Divergence::Rkl, &inst.mdp, &inst.expert, &inst.learner)
            .expect("valid MDP");
        let per_step = if mutated {
            expert_weighted_action_divergence(
                Divergence::Rkl,
                &inst.mdp,
                &inst.expert,
                &inst.learner,
            )
        } else {
            expected_action_divergence(Divergence::Rkl, &inst.mdp, &inst.expert, &inst.learner)
                .expect("valid MDP")
        };
        let scaled = inst.mdp.horizon() as f64 * per_step;
        report.observe(abs_gap(traj, scaled), INEQUALITY_TOL, || {
            format!(
                "trajectory reverse KL {traj} against H * per-step value {scaled} \
                 (S={}, A={}, H={})",
                inst.mdp.n_states(),
                inst.mdp.n_actions(),
                inst.mdp.horizon()
            )
        });
    }
    if !mutated {
        let inst = random_instance(&mut rng);
        let traj = traj_divergence(Divergence::Rkl, &inst.mdp, &inst.expert, &inst.expert)
            .expect("valid MDP");
        report.observe(traj.abs(), INEQUALITY_TOL, || {
            format!("identical policies gave trajectory reverse KL {traj}")
        });
    }
    report
}

/// Checks the chained total variation bound `D_TV(trajectory) <= H *
/// E_rho[D_TV(rows)] <= H * sqrt(E_rho[KL(rows)] / 2)`, where `rho` is the
/// learner's average state occupancy, with the middle term tight at horizon
/// one. The mutated variant drops the horizon factor from the first bound.
pub fn check_tv_chain(seed: u64) -> CheckReport {
    tv_chain_report(seed, false)
}

fn tv_chain_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("tv_chain", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = vec![product_instance(3)];
    for _ in 0..100 {
        instances.push(random_instance(&mut rng));
    }
    for inst in &instances {
        let traj = traj_divergence(Divergence::Tv, &inst.mdp, &inst.expert, &inst.learner)
            .expect("valid MDP");
        let per_tv =
            expected_action_divergence(Divergence::Tv, &inst.mdp, &inst.expert, &inst.learner)
                .expect("valid MDP");
        let per_kl =
            expected_action_divergence(Divergence::Kl, &inst.mdp, &inst.expert, &inst.learner)
                .expect("valid MDP");
        let h = inst.mdp.horizon() as f64;
        let chained = if mutated { per_tv } else { h * per_tv };
        report.observe(shortfall(chained, traj), INEQUALITY_TOL, || {
            format!(
                "trajectory TV {traj} exceeded chained bound {chained} (per-step {per_tv}, H={h})"
            )
        });
        let pinsker = h * (per_kl / 2.0).sqrt();
        report.observe(shortfall(pinsker, h * per_tv), INEQUALITY_TOL, || {
            format!("chained TV {} exceeded Pinsker bound {pinsker}", h * per_tv)
        });
    }
    if !mutated {
        // At horizon one with a single start state the chained bound is the
        // trajectory divergence itself.
        let inst = product_instance(1);
        let traj = traj_divergence(Divergence::Tv, &inst.mdp, &inst.expert, &inst.learner)
            .expect("valid MDP");
        let per_tv =
            expected_action_divergence(Divergence::Tv, &inst.mdp, &inst.expert, &inst.learner)
                .expect("valid MDP");
        report.observe(abs_gap(traj, per_tv), INEQUALITY_TOL, || {
            format!("horizon-one trajectory TV {traj} differs from per-step value {per_tv}")
        });
    }
    report
}

/// Checks that the exact variational objective never exceeds the true
/// divergence over random discriminators (including clamp-saturated ones
/// for total variation) and meets it at the closed-form optimum. The
/// mutated variant evaluates the optimum fitted to the swapped pair and
/// still claims tightness.
pub fn check_variational_tightness(seed: u64) -> CheckReport {
    variational_tightness_report(seed, false)
}

fn variational_tightness_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("variational_tightness", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> =
        vec![(vec![0.5, 0.5], vec![0.25, 0.75])];
    for _ in 0..5 {
        let len = rng.gen_range(4..=6);
        pairs.push((
            random_distribution(&mut rng, len),
            random_distribution(&mut rng, len),
        ));
    }
    for (p, q) in &pairs {
        for div in Divergence::ALL {
            let exact = exact_f_divergence(div, p, q).expect("full-support pair");
            let fitted_pair = if mutated { (q, p) } else { (p, q) };
            let opt = optimal_discriminator(div, fitted_pair.0, fitted_pair.1)
                .expect("full-support pair");
            let at_opt = exact_variational_objective(div, p, q, &opt);
            report.observe(abs_gap(exact, at_opt), INEQUALITY_TOL, || {
                format!("{div}: objective at closed-form optimum {at_opt} misses exact {exact}")
            });
            if mutated {
                continue;
            }
            for _ in 0..1_000 {
                let values: Vec<f64> = (0..p.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let v = Discriminator::Tabular {
                    n_states: 1,
                    n_actions: p.len(),
                    values,
                };
                let objective = exact_variational_objective(div, p, q, &v);
                report.observe(shortfall(exact, objective), INEQUALITY_TOL, || {
                    format!("{div}: random discriminator objective {objective} beat exact {exact}")
                });
            }
            // Scores at the clamp push the total variation activation onto
            // the boundary of the conjugate's domain; the bound must hold
            // there too.
            for bound_value in [-V_CLAMP, V_CLAMP] {
                let v = Discriminator::Tabular {
                    n_states: 1,
                    n_actions: p.len(),
                    values: vec![bound_value; p.len()],
                };
                let objective = exact_variational_objective(div, p, q, &v);
                report.observe(shortfall(exact, objective), INEQUALITY_TOL, || {
                    format!("{div}: clamped discriminator objective {objective} beat exact {exact}")
                });
            }
        }
    }
    report
}

/// Checks the density-ratio error envelope: with clip floor `c` set to the
/// smallest cell mass, the `q`-weighted mean absolute error of the
/// frequency-ratio estimate stays within `(2/c) sqrt(ln(2|G|/delta)) *
/// N^(-1/4)` for at least a `1 - delta` share of trials at every sample
/// size, and the mean error strictly shrinks as `N` grows. `|G|` counts a
/// ratio table grid of 401 values per cell. The mutated variant shrinks the
/// envelope a thousandfold.
pub fn check_dre_bound(seed: u64) -> CheckReport {
    dre_bound_report(seed, false)
}

fn dre_bound_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("dre_bound", mutated);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = 4;
    let sample_sizes = [100usize, 1_000, 10_000];
    let trials = 100;
    let delta = 0.1;
    let class_size = 401f64.powi(cells as i32);
    let log_factor = (2.0 * class_size / delta).ln().sqrt();
    let scale = if mutated { 1e-3 } else { 1.0 };

    let mut mean_err = [0.0f64; 3];
    let mut inside = [0usize; 3];
    for _ in 0..trials {
        let p = random_distribution(&mut rng, cells);
        let q = random_distribution(&mut rng, cells);
        let c = p
            .iter()
            .chain(q.iter())
            .fold(f64::INFINITY, |acc, &x| acc.min(x));
        for (k, &n) in sample_sizes.iter().enumerate() {
            let mut num = SampleSet::new(1, cells, SampleSource::Learner);
            let mut den = SampleSet::new(1, cells, SampleSource::Expert);
            for _ in 0..n {
                num.push(0, sample_categorical(&mut rng, &p));
                den.push(0, sample_categorical(&mut rng, &q));
            }
            let estimate = lsq_density_ratio(&num, &den, c).expect("non-empty samples");
            let err: f64 = (0..cells)
                .map(|i| q[i] * (estimate.value(0, i) - p[i] / q[i]).abs())
                .sum();
            mean_err[k] += err / trials as f64;
            let envelope = scale * (2.0 / c) * log_factor * (n as f64).powf(-0.25);
            if err <= envelope {
                inside[k] += 1;
            }
            if err - envelope > report.max_violation {
                report.max_violation = err - envelope;
            }
        }
    }
    let needed = ((1.0 - delta) * trials as f64).ceil() as usize;
    for (k, &n) in sample_sizes.iter().enumerate() {
        report.instances += trials;
        if inside[k] < needed {
            report.failures.push(format!(
                "N={n}: only {}/{} trials inside the envelope, needed {needed}",
                inside[k], trials
            ));
        }
    }
    report.observe(
        shortfall(mean_err[0], mean_err[1]).max(shortfall(mean_err[1], mean_err[2])),
        0.0,
        || {
            format!(
                "mean error failed to shrink with N: {:.6} at 1e2, {:.6} at 1e3, {:.6} at 1e4",
                mean_err[0], mean_err[1], mean_err[2]
            )
        },
    );
    if !mutated {
        // Identical distributions should sit far inside the envelope.
        let p = random_distribution(&mut rng, cells);
        let c = p.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
        let n = 10_000;
        let mut num = SampleSet::new(1, cells, SampleSource::Learner);
        let mut den = SampleSet::new(1, cells, SampleSource::Expert);
        for _ in 0..n {
            num.push(0, sample_categorical(&mut rng, &p));
            den.push(0, sample_categorical(&mut rng, &p));
        }
        let estimate = lsq_density_ratio(&num, &den, c).expect("non-empty samples");
        let err: f64 = (0..cells)
            .map(|i| p[i] * (estimate.value(0, i) - 1.0).abs())
            .sum();
        let envelope = (2.0 / c) * log_factor * (n as f64).powf(-0.25) / 10.0;
        report.observe(shortfall(envelope, err), 0.0, || {
            format!("identical distributions gave ratio error {err}, outside even {envelope}")
        });
    }
    report
}

/// Checks that sample-based variational estimates stay finite on pairs
/// whose exact divergence is infinite, vanish when the distributions agree,
/// and grow without bound in the fitting budget when the learner parks mass
/// off the expert's support. The mutated variant claims a fixed 400-step
/// fit already drives the estimate past 1e3.
pub fn check_blindness(seed: u64) -> CheckReport {
    blindness_report(seed, false)
}

fn blindness_report(seed: u64, mutated: bool) -> CheckReport {
    let mut report = CheckReport::new("blindness", mutated);
    let expert = [0.5, 0.5, 0.0];
    let mismatched = [
        (Divergence::Kl, [1.0, 0.0, 0.0]),
        (Divergence::Rkl, [0.0, 0.0, 1.0]),
    ];
    for (div, learner) in &mismatched {
        let (exact, estimate) = estimator_blindness_demo(*div, &expert, learner, 4_000, seed)
            .expect("valid demo inputs");
        if mutated {
            report.observe(shortfall(estimate, 1e3), INEQUALITY_TOL, || {
                format!("{div}: finite-sample estimate {estimate} stayed below 1e3")
            });
            continue;
        }
        let violation = if exact.is_infinite() && estimate.is_finite() {
            0.0
        } else {
            f64::INFINITY
        };
        report.observe(violation, INEQUALITY_TOL, || {
            format!("{div}: exact {exact} with estimate {estimate}, wanted infinite vs finite")
        });
    }
    if mutated {
        return report;
    }

    let uniform = [1.0 / 3.0; 3];
    let (exact, estimate) =
        estimator_blindness_demo(Divergence::Kl, &uniform, &uniform, 4_000, seed)
            .expect("valid demo inputs");
    report.observe(exact.abs().max(estimate.abs()), 0.05, || {
        format!("identical distributions gave exact {exact}, estimate {estimate}")
    });

    // With learner mass off the expert's support the fitted reverse KL score
    // has no stationary point, so longer fits must report larger estimates.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut expert_set = SampleSet::new(1, 3, SampleSource::Expert);
    let mut learner_set = SampleSet::new(1, 3, SampleSource::Learner);
    let learner = [0.0, 0.0, 1.0];
    for _ in 0..4_000 {
        expert_set.push(0, sample_categorical(&mut rng, &expert));
        learner_set.push(0, sample_categorical(&mut rng, &learner));
    }
    let mut previous = f64::NEG_INFINITY;
    for steps in [100usize, 200, 400] {
        let fitted = fit_discriminator(
            &expert_set,
            &learner_set,
            Divergence::Rkl,
            steps,
            0.1,
            Discriminator::zeros(1, 3),
        )
        .expect("finite fit");
        let estimate = variational_estimate(&expert_set, &learner_set, &fitted, Divergence::Rkl)
            .expect("non-empty samples");
        report.observe(shortfall(estimate, previous + 1e-6), INEQUALITY_TOL, || {
            format!("estimate {estimate} after {steps} steps did not exceed {previous}")
        });
        previous = estimate;
    }
    report
}

/// Runs every check at the given seed, in a fixed order.
pub fn run_all_checks(seed: u64) -> Vec<CheckReport> {
    vec![
        check_log_sum(seed),
        check_information_loss(seed),
        check_trajectory_lower_bound(seed),
        check_rkl_equality(seed),
        check_tv_chain(seed),
        check_variational_tightness(seed),
        check_dre_bound(seed),
        check_blindness(seed),
    ]
}

/// Runs every check with its known bug injected. A healthy library makes
/// all of these fail, which guards the checks themselves against silently
/// passing everything.
pub fn run_all_mutations(seed: u64) -> Vec<CheckReport> {
    vec![
        log_sum_report(seed, true),
        information_loss_report(seed, true),
        trajectory_lower_bound_report(seed, true),
        rkl_equality_report(seed, true),
        tv_chain_report(seed, true),
        variational_tightness_report(seed, true),
        dre_bound_report(seed, true),
        blindness_report(seed, true),
    ]
}
