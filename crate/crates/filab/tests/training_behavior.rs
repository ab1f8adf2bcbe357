//! Behavioral tests for the min-max trainer and the cloning baseline:
//! determinism, bounded metrics, and measurable progress over the init.

use filab::divergence::{state_action_divergence, Divergence};
use filab::envs::{make_bandit, make_gridworld, DEFAULT_EPS1, DEFAULT_EPS2, DEFAULT_HORIZON};
use filab::mdp::{sample_trajectory_with_rng, Trajectory};
use filab::vim::{behavior_cloning, run_f_vim, VimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn every_divergence_trains_on_the_gridworld() {
    let (env, _) = make_gridworld(DEFAULT_EPS1, DEFAULT_EPS2, DEFAULT_HORIZON).unwrap();
    for div in Divergence::ALL {
        let mut config = VimConfig::new(div, 7);
        config.iterations = 20;
        let init = env.fresh_policy(&mut ChaCha8Rng::seed_from_u64(7));
        let outcome = run_f_vim(&env, &init, &config).unwrap();
        assert_eq!(outcome.history.records.len(), 20, "{}", div.name());
        for record in &outcome.history.records {
            assert!(
                record.objective.is_finite(),
                "{} objective {} at iteration {}",
                div.name(),
                record.objective,
                record.iteration
            );
            let m = record.metrics;
            for (label, v) in [
                ("collapse", m.collapse),
                ("cover", m.cover),
                ("unsafe", m.unsafe_mass),
            ] {
                assert!(
                    (0.0..=1.0).contains(&v),
                    "{} {label} {v} out of range",
                    div.name()
                );
            }
        }
    }
}

#[test]
fn identical_configs_reproduce_the_same_parameter_digests() {
    let (env, _) = make_bandit(0.28).unwrap();
    let mut config = VimConfig::new(Divergence::Kl, 11);
    config.iterations = 40;
    let run = || {
        let init = env.fresh_policy(&mut ChaCha8Rng::seed_from_u64(11));
        run_f_vim(&env, &init, &config).unwrap()
    };
    let first = run();
    let second = run();
    let digests = |outcome: &filab::vim::VimOutcome| {
        outcome
            .history
            .records
            .iter()
            .map(|r| r.params_digest)
            .collect::<Vec<u64>>()
    };
    assert_eq!(digests(&first), digests(&second));
    assert_eq!(first.policy.to_tabular(), second.policy.to_tabular());
}

#[test]
fn kl_training_improves_on_the_init_for_most_seeds() {
    let (env, _) = make_gridworld(DEFAULT_EPS1, DEFAULT_EPS2, DEFAULT_HORIZON).unwrap();
    let mut wins = 0;
    for seed in 0..5u64 {
        let init = env.fresh_policy(&mut ChaCha8Rng::seed_from_u64(seed));
        let config = VimConfig::new(Divergence::Kl, seed);
        let before = state_action_divergence(
            Divergence::Kl,
            &env.mdp,
            &env.expert.policy,
            &init.to_tabular(),
        )
        .unwrap();
        let outcome = run_f_vim(&env, &init, &config).unwrap();
        let after = state_action_divergence(
            Divergence::Kl,
            &env.mdp,
            &env.expert.policy,
            &outcome.policy.to_tabular(),
        )
        .unwrap();
        if after < before {
            wins += 1;
        }
    }
    assert!(wins >= 4, "training beat the init on only {wins}/5 seeds");
}

#[test]
fn behavior_cloning_reduces_demo_negative_log_likelihood() {
    let (env, _) = make_gridworld(DEFAULT_EPS1, DEFAULT_EPS2, DEFAULT_HORIZON).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let demos: Vec<Trajectory> = (0..200)
        .map(|_| sample_trajectory_with_rng(&env.mdp, &env.expert.policy, &mut rng))
        .collect();
    let mean_nll = |policy: &filab::envs::ParametricPolicy| -> f64 {
        let tab = policy.to_tabular();
        let mut total = 0.0;
        let mut count = 0usize;
        for traj in &demos {
            for t in 0..traj.actions.len() {
                total -= tab.prob(traj.states[t], traj.actions[t]).ln();
                count += 1;
            }
        }
        total / count as f64
    };
    let init = env.fresh_policy(&mut ChaCha8Rng::seed_from_u64(5));
    let before = mean_nll(&init);
    let cloned = behavior_cloning(&env, &demos, 300, 0.1, 5).unwrap();
    let after = mean_nll(&cloned);
    assert!(
        after < before,
        "cloning did not reduce the demo NLL: {after} vs {before}"
    );
}
