use std::collections::{BTreeMap, BTreeSet};

use decoy_game::adversary::AdversaryState;
use decoy_game::config::{AdversaryMode, ChallengerMode, GameConfig};
use decoy_game::domain::{IntervalLedger, Origin, Post, PostId};
use decoy_game::engine::{evaluate_cumulative, run_game, run_game_detailed};
use decoy_game::model::{ClassifierParams, Role};
use decoy_game::stats::std_dev;

fn cfg(adv: AdversaryMode, chal: ChallengerMode, seed: u64) -> GameConfig {
    GameConfig {
        adversary_mode: adv,
        challenger_mode: chal,
        seed,
        intervals: 6,
        ..GameConfig::default()
    }
}

const ALL_CHALLENGERS: [ChallengerMode; 4] = [
    ChallengerMode::None,
    ChallengerMode::Random,
    ChallengerMode::Oracle,
    ChallengerMode::D2,
];

#[test]
fn every_post_ends_in_exactly_one_place() {
    for mode in ALL_CHALLENGERS {
        let run = run_game_detailed(&cfg(AdversaryMode::Adaptive, mode, 3)).unwrap();
        let mut generated = BTreeSet::new();
        let mut user_deleted = BTreeSet::new();
        let mut decoy_deleted = BTreeSet::new();
        for l in &run.ledgers {
            for p in &l.deleted {
                if p.origin == Origin::Decoy {
                    assert!(decoy_deleted.insert(p.id), "decoy {} reused", p.id);
                } else {
                    generated.insert(p.id);
                    assert!(user_deleted.insert(p.id));
                }
            }
            generated.extend(l.volunteered_new.iter().map(|p| p.id));
        }
        let pool: BTreeSet<PostId> = run.final_pool.iter().copied().collect();
        assert!(pool.is_disjoint(&user_deleted));
        assert!(pool.is_disjoint(&decoy_deleted));
        assert!(user_deleted.is_disjoint(&decoy_deleted));
        let union: BTreeSet<PostId> = pool
            .iter()
            .chain(&user_deleted)
            .chain(&decoy_deleted)
            .copied()
            .collect();
        assert_eq!(union, generated, "{mode}");
    }
}

#[test]
fn decoys_come_from_earlier_volunteers_one_interval_late() {
    for mode in [ChallengerMode::Random, ChallengerMode::Oracle, ChallengerMode::D2] {
        let run = run_game_detailed(&cfg(AdversaryMode::Adaptive, mode, 4)).unwrap();
        let volunteered_at: BTreeMap<PostId, usize> = run
            .ledgers
            .iter()
            .flat_map(|l| l.volunteered_new.iter().map(move |p| (p.id, l.t)))
            .collect();
        assert!(run.ledgers[0].decoys_injected.is_empty());
        for (i, l) in run.ledgers.iter().enumerate() {
            for p in l.deleted.iter().filter(|p| p.origin == Origin::Decoy) {
                assert_eq!(p.true_label, 0);
                assert_eq!(p.interval_deleted, Some(l.t));
                assert!(volunteered_at[&p.id] < l.t);
                assert!(l.decoys_injected.contains(&p.id));
            }
            if i > 0 {
                assert_eq!(l.decoys_injected.len(), run.diagnostics[i - 1].decoys_selected);
            }
            l.check_invariants().unwrap();
        }
        // nothing is selected at the last interval
        assert_eq!(run.diagnostics.last().unwrap().decoys_selected, 0);
    }
}

#[test]
fn decoy_count_follows_k_times_damaging() {
    let c = GameConfig {
        k: 2,
        ..cfg(AdversaryMode::Adaptive, ChallengerMode::Random, 5)
    };
    let run = run_game_detailed(&c).unwrap();
    for w in run.ledgers.windows(2) {
        assert_eq!(w[1].decoys_injected.len(), 2 * w[0].damaging.len());
    }
}

#[test]
fn reruns_are_identical() {
    for mode in ALL_CHALLENGERS {
        let c = cfg(AdversaryMode::Adaptive, mode, 9);
        assert_eq!(run_game(&c).unwrap(), run_game(&c).unwrap());
    }
}

#[test]
fn challenger_mode_does_not_perturb_user_stream() {
    let ids = |mode| {
        let run = run_game_detailed(&cfg(AdversaryMode::Adaptive, mode, 6)).unwrap();
        run.ledgers
            .iter()
            .map(|l| {
                l.deleted
                    .iter()
                    .filter(|p| p.origin != Origin::Decoy)
                    .map(|p| (p.id, p.features.clone()))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let base = ids(ChallengerMode::None);
    for mode in [ChallengerMode::Random, ChallengerMode::Oracle, ChallengerMode::D2] {
        assert_eq!(ids(mode), base);
    }
}

#[test]
fn training_samples_never_enter_the_test_set() {
    let c = cfg(AdversaryMode::Adaptive, ChallengerMode::Oracle, 7);
    let run = run_game_detailed(&c).unwrap();
    let mut expected = 0;
    for (l, d) in run.ledgers.iter().zip(&run.diagnostics) {
        expected += l.deleted.len() - l.adversary_train_sample.len();
        assert_eq!(d.test_size, expected);
        assert!(!d.degenerate);
    }
    // rescoring from the ledgers reproduces the final record
    let mut adv = AdversaryState::from_config(&c);
    adv.params = run.final_adversary.clone();
    let (m, hits) = evaluate_cumulative(&adv, &run.ledgers, 0).unwrap();
    assert_eq!(hits, 0);
    assert_eq!(m, run.trace.final_metrics());
}

fn post(id: PostId, label: u8, origin: Origin) -> Post {
    Post::new(id, vec![0.0, 0.0], label, origin, 1, Some(1)).unwrap()
}

#[test]
fn flagging_every_decoy_gives_one_over_k_plus_one_precision() {
    let c = GameConfig {
        adversary_hidden: vec![],
        ..GameConfig::default()
    };
    let mut adv = AdversaryState::from_config(&c);
    adv.params = ClassifierParams::zeros(Role::AdversaryTheta, 2, &[]);
    adv.params.layers[0].bias[0] = 5.0;
    for k in [1usize, 2, 5] {
        let mut l = IntervalLedger::new(1);
        for i in 0..10u64 {
            l.deleted.push(post(i + 1, 1, Origin::UserDeletedDamaging));
            l.damaging.insert(i + 1);
        }
        for i in 0..(10 * k as u64) {
            l.deleted.push(post(100 + i, 0, Origin::Decoy));
            l.decoys_injected.insert(100 + i);
        }
        let (m, _) = evaluate_cumulative(&adv, &[l], 0).unwrap();
        assert!((m.precision - 1.0 / (k as f64 + 1.0)).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
    }
    // flag nothing: recall zero
    adv.params.layers[0].bias[0] = -5.0;
    let mut l = IntervalLedger::new(1);
    l.deleted.push(post(1, 1, Origin::UserDeletedDamaging));
    l.damaging.insert(1);
    let (m, _) = evaluate_cumulative(&adv, &[l], 0).unwrap();
    assert_eq!(m.recall, 0.0);
}

#[test]
fn fully_sampled_interval_is_degenerate() {
    let c = GameConfig {
        sample_size: 1000,
        budget_adapt: 1000,
        intervals: 1,
        ..GameConfig::default()
    };
    let run = run_game_detailed(&c).unwrap();
    assert!(run.diagnostics[0].degenerate);
    assert_eq!(run.trace.final_metrics().total(), 0);
    assert_eq!(run.trace.final_metrics().f_score, 0.0);
}

#[test]
fn pool_shrinks_by_exactly_the_decoys_taken() {
    for mode in ALL_CHALLENGERS {
        let run = run_game_detailed(&cfg(AdversaryMode::Adaptive, mode, 8)).unwrap();
        let mut volunteered = 0;
        let mut taken = 0;
        for ((l, d), r) in run.ledgers.iter().zip(&run.diagnostics).zip(&run.trace.records) {
            volunteered += l.volunteered_new.len();
            taken += d.decoys_selected;
            assert_eq!(r.pool_size, volunteered - taken, "{mode} t={}", l.t);
        }
    }
}

#[test]
fn monitored_d2_never_triggers_the_countermeasure() {
    for seed in 1..=3 {
        let c = GameConfig {
            monitored: true,
            ..cfg(AdversaryMode::Adaptive, ChallengerMode::D2, seed)
        };
        let run = run_game_detailed(&c).unwrap();
        let decoys: BTreeSet<PostId> = run
            .ledgers
            .iter()
            .flat_map(|l| l.decoys_injected.iter().copied())
            .collect();
        assert!(decoys.is_disjoint(&run.queried_ids));
        for d in &run.diagnostics {
            assert_eq!(d.queried_decoy_overlap, 0);
            assert_eq!(d.countermeasure_hits, 0);
            assert!(d.queried <= c.budget_con);
        }
        assert!(!run.queried_ids.is_empty());
    }
}

#[test]
fn static_adversary_freezes_after_its_budget() {
    let c = GameConfig {
        intervals: 10,
        ..cfg(AdversaryMode::Static, ChallengerMode::None, 2)
    };
    let run = run_game_detailed(&c).unwrap();
    let tau = c.tau();
    assert_eq!(tau, 1);
    let fp: BTreeSet<u64> = run.diagnostics[tau - 1..]
        .iter()
        .map(|d| d.adversary_fingerprint)
        .collect();
    assert_eq!(fp.len(), 1);
    assert!(run.diagnostics[tau..].iter().all(|d| !d.trained));
    assert!(run.trace.records.iter().all(|r| r.budget_spent == c.budget_static));
    let f: Vec<f64> = run.trace.records[tau..].iter().map(|r| r.metrics.f_score).collect();
    assert!(std_dev(&f) < 0.05, "{f:?}");
}

#[test]
fn adaptive_budget_recurs() {
    let run = run_game_detailed(&cfg(AdversaryMode::Adaptive, ChallengerMode::None, 2)).unwrap();
    for (i, r) in run.trace.records.iter().enumerate() {
        assert_eq!(r.budget_spent, 40 * (i + 1));
    }
}

#[test]
fn random_adversary_is_flat_and_never_trains() {
    let run = run_game_detailed(&GameConfig {
        intervals: 10,
        ..cfg(AdversaryMode::Random, ChallengerMode::None, 2)
    })
    .unwrap();
    assert!(run.diagnostics.iter().all(|d| !d.trained));
    assert!(run.trace.records.iter().all(|r| r.budget_spent == 0));
    let f: Vec<f64> = run.trace.records.iter().map(|r| r.metrics.f_score).collect();
    assert!(std_dev(&f) < 0.05, "{f:?}");
}

#[test]
fn oracle_challenger_lowers_adaptive_f_score() {
    let mut none = 0.0;
    let mut oracle = 0.0;
    for seed in 1..=3 {
        let base = GameConfig {
            seed,
            ..GameConfig::default()
        };
        none += run_game(&base).unwrap().final_metrics().f_score;
        oracle += run_game(&GameConfig {
            challenger_mode: ChallengerMode::Oracle,
            ..base
        })
        .unwrap()
        .final_metrics()
        .f_score;
    }
    assert!(oracle < none, "{oracle} vs {none}");
}

#[test]
fn exhausted_pool_is_logged_not_fatal() {
    let c = GameConfig {
        k: 5,
        counts: decoy_game::datagen::PlanCounts::Constant(decoy_game::datagen::IntervalCounts {
            n_damaging: 20,
            n_nondamaging: 20,
            n_volunteered: 10,
        }),
        ..cfg(AdversaryMode::Adaptive, ChallengerMode::Random, 1)
    };
    let run = run_game_detailed(&c).unwrap();
    assert!(run.diagnostics[0].pool_exhausted);
    assert_eq!(run.diagnostics[0].decoys_selected, 10);
}
