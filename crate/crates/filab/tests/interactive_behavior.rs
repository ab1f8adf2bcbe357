//! Behavioral tests for the interactive algorithms on the bandit: expert
//! recovery, mode selection, history completeness, and determinism.

use filab::divergence::{expected_action_divergence, Divergence};
use filab::envs::make_bandit;
use filab::interactive::{run_dagger, run_interactive_dre, run_irkl_vim, InteractiveRunReport};
use filab::vim::{mode_metrics, VimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dagger_recovers_the_expert_mixture_on_the_bandit() {
    let (env, _) = make_bandit(0.28).unwrap();
    let (policy, report) = run_dagger(&env, &env.expert, 8, 200, 0).unwrap();
    assert_eq!(report.records.len(), 8);
    assert!(report.best_iteration < 8);
    let row = policy.row(0);
    assert!((row[0] - 0.5).abs() <= 0.05, "arm a probability {}", row[0]);
    assert!((row[1] - 0.5).abs() <= 0.05, "arm b probability {}", row[1]);
    // The expert never pulls the third arm, so no aggregated pair can either.
    assert_eq!(row[2], 0.0);
}

#[test]
fn interactive_dre_locks_onto_a_single_expert_mode() {
    let (env, _) = make_bandit(0.28).unwrap();
    let (policy, _) = run_interactive_dre(&env, &env.expert, 10, 30, 0.05, 0).unwrap();
    let m = mode_metrics(&env, &policy);
    assert_eq!(m.collapse, 1.0);
    assert_eq!(m.unsafe_mass, 0.0);
    let row = policy.row(0);
    assert!(
        (row[0] == 1.0) ^ (row[1] == 1.0),
        "expected a one-hot mode, got {row:?}"
    );
    // A one-hot policy on either expert mode sits at exactly ln 2 in
    // expected action reverse KL against the 50/50 expert.
    let rkl = expected_action_divergence(Divergence::Rkl, &env.mdp, &env.expert.policy, &policy)
        .unwrap();
    assert!((rkl - 2f64.ln()).abs() <= 1e-12, "reverse KL {rkl}");
}

#[test]
fn irkl_history_is_complete_and_collapse_improves() {
    let (env, _) = make_bandit(0.28).unwrap();
    let mut config = VimConfig::new(Divergence::Rkl, 0);
    config.iterations = 60;
    let init = env
        .fresh_policy(&mut ChaCha8Rng::seed_from_u64(config.seed))
        .to_tabular();
    let outcome = run_irkl_vim(&env, &env.expert, &config).unwrap();
    assert_eq!(outcome.history.records.len(), 60);
    for record in &outcome.history.records {
        assert!(record.objective.is_finite(), "iteration {}", record.iteration);
    }
    let before = mode_metrics(&env, &init).collapse;
    let after = mode_metrics(&env, &outcome.policy.to_tabular()).collapse;
    assert!(
        after > before,
        "collapse did not improve: {after} vs {before}"
    );
}

#[test]
fn same_seed_interactive_reruns_are_bitwise_identical() {
    let (env, _) = make_bandit(0.28).unwrap();
    let record_bits = |report: &InteractiveRunReport| -> Vec<(u64, u64, Option<u64>)> {
        report
            .records
            .iter()
            .map(|r| {
                (
                    r.exact_rkl.to_bits(),
                    r.exact_kl.to_bits(),
                    r.ratio_error.map(f64::to_bits),
                )
            })
            .collect()
    };
    let (dag_a, rep_a) = run_dagger(&env, &env.expert, 8, 200, 3).unwrap();
    let (dag_b, rep_b) = run_dagger(&env, &env.expert, 8, 200, 3).unwrap();
    assert_eq!(dag_a, dag_b);
    assert_eq!(record_bits(&rep_a), record_bits(&rep_b));
    let (dre_a, drep_a) = run_interactive_dre(&env, &env.expert, 10, 30, 0.05, 3).unwrap();
    let (dre_b, drep_b) = run_interactive_dre(&env, &env.expert, 10, 30, 0.05, 3).unwrap();
    assert_eq!(dre_a, dre_b);
    assert_eq!(record_bits(&drep_a), record_bits(&drep_b));
}
