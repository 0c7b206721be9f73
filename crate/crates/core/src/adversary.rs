//! The deletion-hunting adversary: sample deleted posts, buy (possibly noisy)
//! labels, retrain, and relabel everything deleted so far.

use std::collections::BTreeSet;

use log::debug;
use rand::seq::index;
use rand::Rng;

use crate::config::{AdversaryMode, GameConfig};
use crate::domain::{Post, PostId, DAMAGING, NON_DAMAGING};
use crate::error::Result;
use crate::model::{forward_prob, train, ClassifierParams, Role, Sample, TrainHyper};
use crate::rng::{derive_seed, rng_from_seed, Stream};

#[derive(Debug, Clone)]
pub struct AdversaryState {
    pub params: ClassifierParams,
    pub mode: AdversaryMode,
    /// Labels still purchasable in the current budget window.
    pub budget_remaining: usize,
    /// Labels purchased over the whole game.
    pub budget_spent: usize,
    pub intervals_trained: usize,
    pub prior_positive: f64,
    /// Ids the adversary has seen queried by a monitored challenger.
    pub monitored_ids: BTreeSet<PostId>,
    /// Whether to treat monitored ids as non-damaging when classifying.
    pub countermeasure: bool,
    pub decision_threshold: f64,
    /// Static: p per trained interval. Adaptive: B_adapt per interval.
    pub sample_size: usize,
    /// Static adversary's training horizon.
    pub tau: usize,
    recurring_budget: usize,
    warm_start: bool,
    hidden: Vec<usize>,
    init_seed: u64,
}

impl AdversaryState {
    pub fn from_config(cfg: &GameConfig) -> Self {
        let init_seed = derive_seed(cfg.seed, Stream::AdversaryInit, 0);
        let params = ClassifierParams::init(
            Role::AdversaryTheta,
            cfg.dim(),
            &cfg.adversary_hidden,
            init_seed,
        );
        let (budget_remaining, sample_size, recurring_budget) = match cfg.adversary_mode {
            AdversaryMode::Random => (0, 0, 0),
            AdversaryMode::Static => (cfg.budget_static, cfg.sample_size, 0),
            AdversaryMode::Adaptive => (cfg.budget_adapt, cfg.budget_adapt, cfg.budget_adapt),
        };
        AdversaryState {
            params,
            mode: cfg.adversary_mode,
            budget_remaining,
            budget_spent: 0,
            intervals_trained: 0,
            prior_positive: cfg.random_prior,
            monitored_ids: BTreeSet::new(),
            countermeasure: cfg.monitored,
            decision_threshold: cfg.decision_threshold,
            sample_size,
            tau: cfg.tau(),
            recurring_budget,
            warm_start: cfg.warm_start,
            hidden: cfg.adversary_hidden.clone(),
            init_seed,
        }
    }

    /// Whether the next step would buy labels and train.
    pub fn will_train(&self) -> bool {
        match self.mode {
            AdversaryMode::Random => false,
            AdversaryMode::Static => {
                self.intervals_trained < self.tau && self.budget_remaining > 0
            }
            AdversaryMode::Adaptive => self.recurring_budget > 0,
        }
    }
}

/// Uniform sample without replacement of `min(p, |deleted|)` posts.
pub fn sample_training_set(deleted: &[Post], p: usize, seed: u64) -> Vec<Post> {
    let n = p.min(deleted.len());
    let mut rng = rng_from_seed(seed);
    let mut idx = index::sample(&mut rng, deleted.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| deleted[i].clone()).collect()
}

/// Crowd-sourced labels: each true label flips independently with
/// probability `eta`.
pub fn acquire_labels(posts: &[Post], eta: f64, seed: u64) -> Vec<(Post, u8)> {
    let mut rng = rng_from_seed(seed);
    posts
        .iter()
        .map(|p| {
            let flip = eta > 0.0 && rng.random_bool(eta.min(1.0));
            let observed = if flip { 1 - p.true_label } else { p.true_label };
            (p.clone(), observed)
        })
        .collect()
}

/// What one adversary step did.
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub trained: bool,
    /// Ids of the labeled sample; these never enter the test set.
    pub sample: BTreeSet<PostId>,
}

/// One interval of the adversary: sample, label, train (budget permitting).
pub fn adversary_step(
    state: &mut AdversaryState,
    deleted: &[Post],
    hyper: &TrainHyper,
    label_noise: f64,
    seed: u64,
) -> Result<StepOutcome> {
    if state.mode == AdversaryMode::Adaptive {
        state.budget_remaining = state.recurring_budget;
    }
    if !state.will_train() || deleted.is_empty() {
        return Ok(StepOutcome::default());
    }
    let p = state.sample_size.min(state.budget_remaining);
    let sample = sample_training_set(deleted, p, derive_seed(seed, Stream::AdversarySample, 0));
    if sample.is_empty() {
        return Ok(StepOutcome::default());
    }
    let labeled = acquire_labels(&sample, label_noise, derive_seed(seed, Stream::AdversaryLabels, 0));
    state.budget_remaining -= labeled.len();
    state.budget_spent += labeled.len();

    let batch: Vec<Sample> = labeled
        .iter()
        .map(|(post, y)| (post.features.clone(), *y))
        .collect();
    let start = if state.warm_start {
        state.params.clone()
    } else {
        ClassifierParams::init(
            Role::AdversaryTheta,
            state.params.input_dim(),
            &state.hidden,
            state.init_seed,
        )
    };
    state.params = train(&start, &batch, hyper, derive_seed(seed, Stream::AdversaryTrain, 0))?;
    state.intervals_trained += 1;
    debug!(
        "adversary trained on {} labels ({} spent so far)",
        batch.len(),
        state.budget_spent
    );
    Ok(StepOutcome {
        trained: true,
        sample: sample.iter().map(|p| p.id).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub id: PostId,
    pub label: u8,
    pub probability: f64,
    /// Set when the monitored-query countermeasure forced the label.
    pub countermeasure: bool,
}

/// Adversary's probability that `x` is damaging, for challenger queries.
pub fn query_probability(state: &AdversaryState, x: &[f64]) -> Result<f64> {
    match state.mode {
        AdversaryMode::Random => Ok(state.prior_positive),
        _ => forward_prob(&state.params, x),
    }
}

/// Label every post in `posts` with the current model.
pub fn classify(state: &AdversaryState, posts: &[Post], seed: u64) -> Result<Vec<Prediction>> {
    let mut rng = rng_from_seed(seed);
    posts
        .iter()
        .map(|post| {
            if state.countermeasure && state.monitored_ids.contains(&post.id) {
                return Ok(Prediction {
                    id: post.id,
                    label: NON_DAMAGING,
                    probability: 0.0,
                    countermeasure: true,
                });
            }
            let (label, probability) = match state.mode {
                AdversaryMode::Random => {
                    let q = state.prior_positive;
                    let l = if rng.random_bool(q) { DAMAGING } else { NON_DAMAGING };
                    (l, q)
                }
                _ => {
                    let a = forward_prob(&state.params, &post.features)?;
                    let l = if a >= state.decision_threshold {
                        DAMAGING
                    } else {
                        NON_DAMAGING
                    };
                    (l, a)
                }
            };
            Ok(Prediction {
                id: post.id,
                label,
                probability,
                countermeasure: false,
            })
        })
        .collect()
}
