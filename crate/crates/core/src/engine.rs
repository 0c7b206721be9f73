//! The interval loop tying users, adversary and challenger together.
//!
//! Per interval `t`:
//! 1. users delete posts and volunteer new ones;
//! 2. decoys chosen at `t - 1` are deleted alongside the user deletions;
//! 3. the adversary samples, labels and retrains if its budget allows;
//! 4. the new volunteers join the challenger's pool;
//! 5. the challenger picks decoys for `t + 1` against the adversary's new model;
//! 6. the adversary relabels every deleted post so far, minus its training
//!    samples, and the result is scored.

use std::collections::BTreeSet;

use log::info;

use crate::adversary::{adversary_step, classify, query_probability, AdversaryState};
use crate::challenger::ChallengerState;
use crate::config::{AdversaryMode, ChallengerMode, GameConfig};
use crate::datagen::{build_stream, ScenarioKind};
use crate::domain::{IntervalLedger, Metrics, Post, PostId};
use crate::error::Result;
use crate::model::ClassifierParams;
use crate::rng::{derive_seed, Stream};

/// Scores and counts for one interval; exactly the CSV columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub interval: usize,
    pub metrics: Metrics,
    pub pool_size: usize,
    /// Labels bought by the adversary up to and including this interval.
    pub budget_spent: usize,
    /// Decoys deleted during this interval.
    pub decoys_injected: usize,
}

/// Per-interval results of one game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace {
    pub run_id: String,
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub adversary_mode: AdversaryMode,
    pub challenger_mode: ChallengerMode,
    pub k: usize,
    pub records: Vec<IntervalRecord>,
}

impl GameTrace {
    pub fn last(&self) -> &IntervalRecord {
        self.records.last().expect("trace has at least one interval")
    }

    pub fn final_metrics(&self) -> Metrics {
        self.last().metrics
    }
}

/// Extra per-interval bookkeeping that does not go to CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalDiagnostics {
    pub interval: usize,
    pub deleted: usize,
    pub damaging: usize,
    pub test_size: usize,
    /// The cumulative test set was empty; metrics are all zero.
    pub degenerate: bool,
    pub pool_exhausted: bool,
    pub trained: bool,
    /// Decoys chosen for the next interval.
    pub decoys_selected: usize,
    /// Ids revealed to the adversary by challenger queries this interval.
    pub queried: usize,
    /// |queried ids so far| ∩ |decoy ids so far|.
    pub queried_decoy_overlap: usize,
    /// Test posts whose label the monitoring countermeasure forced.
    pub countermeasure_hits: usize,
    pub adversary_fingerprint: u64,
}

/// A finished game with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct GameRun {
    pub trace: GameTrace,
    pub diagnostics: Vec<IntervalDiagnostics>,
    pub ledgers: Vec<IntervalLedger>,
    /// Volunteered posts never deleted.
    pub final_pool: Vec<PostId>,
    pub final_adversary: ClassifierParams,
    pub final_challenger: ClassifierParams,
    pub queried_ids: BTreeSet<PostId>,
}

pub fn run_id(cfg: &GameConfig) -> String {
    format!(
        "{}-{}-{}-k{}-s{}",
        cfg.scenario.kind().as_str(),
        cfg.adversary_mode,
        cfg.challenger_mode,
        cfg.k,
        cfg.seed
    )
}

/// Score the adversary on `∪ (D_t \ A_t)`. Decoys carry label 0, so flagging
/// one is a false positive.
pub fn evaluate_cumulative(
    adversary: &AdversaryState,
    ledgers: &[IntervalLedger],
    seed: u64,
) -> Result<(Metrics, usize)> {
    let test: Vec<Post> = ledgers
        .iter()
        .flat_map(|l| {
            l.deleted
                .iter()
                .filter(|p| !l.adversary_train_sample.contains(&p.id))
                .cloned()
        })
        .collect();
    score(adversary, &test, seed)
}

fn score(adversary: &AdversaryState, test: &[Post], seed: u64) -> Result<(Metrics, usize)> {
    if test.is_empty() {
        return Ok((Metrics::default(), 0));
    }
    let preds = classify(adversary, test, seed)?;
    let hits = preds.iter().filter(|p| p.countermeasure).count();
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (post, pred) in test.iter().zip(&preds) {
        match (pred.label == 1, post.is_damaging()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok((Metrics::from_counts(tp, fp, fn_, tn), hits))
}

pub fn run_game(cfg: &GameConfig) -> Result<GameTrace> {
    Ok(run_game_detailed(cfg)?.trace)
}

pub fn run_game_detailed(cfg: &GameConfig) -> Result<GameRun> {
    cfg.validate()?;
    let stream = build_stream(&cfg.scenario, &cfg.stream_plan())?;
    let mut adversary = AdversaryState::from_config(cfg);
    let mut challenger = ChallengerState::from_config(cfg);

    let mut ledgers: Vec<IntervalLedger> = Vec::with_capacity(cfg.intervals);
    let mut records = Vec::with_capacity(cfg.intervals);
    let mut diagnostics = Vec::with_capacity(cfg.intervals);
    let mut pending: Vec<Post> = Vec::new();
    let mut test_posts: Vec<Post> = Vec::new();
    let mut all_decoys: BTreeSet<PostId> = BTreeSet::new();

    for (t, user) in (1..=cfg.intervals).zip(stream) {
        let mut ledger = user;
        for d in pending.drain(..) {
            ledger.decoys_injected.insert(d.id);
            all_decoys.insert(d.id);
            ledger.deleted.push(d.as_decoy(t));
        }
        let decoys_injected = ledger.decoys_injected.len();

        let step = adversary_step(
            &mut adversary,
            &ledger.deleted,
            &cfg.adversary_train,
            cfg.label_noise,
            derive_seed(cfg.seed, Stream::AdversarySample, t as u64),
        )?;
        ledger.adversary_train_sample = step.sample;

        challenger.add_volunteers(&ledger.volunteered_new);

        // Decoys picked at T would be deleted at T + 1, which never happens.
        let mut selection = Default::default();
        if t < cfg.intervals {
            let k_next = cfg.k * ledger.damaging.len();
            selection = challenger.select(
                k_next,
                derive_seed(cfg.seed, Stream::ChallengerSelect, t as u64),
                |p: &Post| query_probability(&adversary, &p.features),
            )?;
        }
        let crate::challenger::Selection {
            decoys,
            exhausted,
            queried,
        } = selection;
        if cfg.challenger_mode == ChallengerMode::D2 {
            adversary.monitored_ids.extend(queried.iter().copied());
        }
        pending = decoys;

        test_posts.extend(
            ledger
                .deleted
                .iter()
                .filter(|p| !ledger.adversary_train_sample.contains(&p.id))
                .cloned(),
        );
        let (metrics, hits) = score(
            &adversary,
            &test_posts,
            derive_seed(cfg.seed, Stream::AdversaryClassify, t as u64),
        )?;

        let overlap_ids: BTreeSet<PostId> = pending.iter().map(|p| p.id).chain(all_decoys.iter().copied()).collect();
        diagnostics.push(IntervalDiagnostics {
            interval: t,
            deleted: ledger.deleted.len(),
            damaging: ledger.damaging.len(),
            test_size: test_posts.len(),
            degenerate: test_posts.is_empty(),
            pool_exhausted: exhausted,
            trained: step.trained,
            decoys_selected: pending.len(),
            queried: queried.len(),
            queried_decoy_overlap: overlap_ids.intersection(&challenger.queried_ids).count(),
            countermeasure_hits: hits,
            adversary_fingerprint: adversary.params.fingerprint(),
        });
        records.push(IntervalRecord {
            interval: t,
            metrics,
            pool_size: challenger.pool.len(),
            budget_spent: adversary.budget_spent,
            decoys_injected,
        });
        ledger.check_invariants()?;
        ledgers.push(ledger);
    }

    let trace = GameTrace {
        run_id: run_id(cfg),
        seed: cfg.seed,
        scenario: cfg.scenario.kind(),
        adversary_mode: cfg.adversary_mode,
        challenger_mode: cfg.challenger_mode,
        k: cfg.k,
        records,
    };
    info!(
        "{}: final F = {:.4}",
        trace.run_id,
        trace.final_metrics().f_score
    );
    Ok(GameRun {
        trace,
        diagnostics,
        ledgers,
        final_pool: challenger.pool.keys().copied().collect(),
        final_adversary: adversary.params.clone(),
        final_challenger: challenger.phi.clone(),
        queried_ids: challenger.queried_ids.clone(),
    })
}
