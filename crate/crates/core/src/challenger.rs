//! Decoy selection.
//!
//! The challenger wants the K volunteered posts that maximize the adversary's
//! loss on them, `V(w) = sum_i -w_i log(1 - a(x_i))` over K-hot `w`. Three
//! access levels give three strategies:
//!
//! * no access: a uniform K-subset of the pool;
//! * unmonitored black-box access: the top K by adversary probability;
//! * monitored access with a per-interval query budget (D²): query the
//!   adversary on a training split only, fit a scorer `g` by maximizing the
//!   softmax relaxation `sum_i alpha_i(g) * -log(1 - a(x_i))`, then take the
//!   top K of the held-out split by `g`. Queried posts are never used as
//!   decoys, since a monitoring adversary would recognise them.
//!
//! A fourth, density-aware strategy screens each volunteered post once with
//! an accept-reject test so that accepted decoys follow the damaging
//! distribution.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::config::{ChallengerMode, GameConfig};
use crate::datagen::{accept_draw, ScenarioSpec};
use crate::domain::{Post, PostId};
use crate::error::{GameError, Result};
use crate::model::{clamp_prob, forward_score, ClassifierParams, Role, TrainHyper};
use crate::rng::{derive_seed, rng_from_seed, Stream};

/// Binary selection over a candidate pool with exactly `k` ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionVector {
    w: Vec<bool>,
    k: usize,
}

impl SelectionVector {
    pub fn new(w: Vec<bool>, k: usize) -> Result<Self> {
        let ones = w.iter().filter(|b| **b).count();
        if ones != k {
            return Err(GameError::Constraint { ones, k });
        }
        Ok(SelectionVector { w, k })
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut w = vec![false; n];
        for &i in indices {
            if i >= n || w[i] {
                return Err(GameError::Config(format!("bad selection index {i} for pool of {n}")));
            }
            w[i] = true;
        }
        Ok(SelectionVector { w, k: indices.len() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.w
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&i| self.w[i]).collect()
    }
}

/// -log(1 - a) with the probability clamped.
pub fn decoy_value(prob: f64) -> f64 {
    -(1.0 - clamp_prob(prob)).ln()
}

/// The discrete objective V(w).
pub fn objective_v(w: &SelectionVector, probs: &[f64]) -> Result<f64> {
    if w.len() != probs.len() {
        return Err(GameError::Dimension {
            expected: w.len(),
            got: probs.len(),
        });
    }
    Ok(w
        .as_slice()
        .iter()
        .zip(probs)
        .filter(|(b, _)| **b)
        .map(|(_, p)| decoy_value(*p))
        .sum())
}

/// Exhaustive maximization of V over all K-hot vectors.
///
/// Ties go to the lexicographically smallest index set, so the answer does
/// not depend on evaluation order.
pub fn brute_force_discrete_optimum(probs: &[f64], k: usize) -> Result<(SelectionVector, f64)> {
    let n = probs.len();
    if n > 20 || k > 5 || k > n {
        return Err(GameError::SizeGuard { n, k });
    }
    let values: Vec<f64> = probs.iter().map(|p| decoy_value(*p)).collect();
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = (combo.clone(), f64::NEG_INFINITY);
    loop {
        let v: f64 = combo.iter().map(|&i| values[i]).sum();
        if v > best.1 {
            best = (combo.clone(), v);
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                let w = SelectionVector::from_indices(n, &best.0)?;
                let v = if k == 0 { 0.0 } else { best.1 };
                return Ok((w, v));
            }
            i -= 1;
            if combo[i] < n - k + i {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Indices of the `k` largest scores; ties by ascending post id.
fn top_k_by(posts: &[&Post], scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..posts.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(posts[a].id.cmp(&posts[b].id))
    });
    order.truncate(k);
    order
}

/// A batch of chosen decoys.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub decoys: Vec<Post>,
    /// Fewer than K candidates were available.
    pub exhausted: bool,
    /// Ids revealed to the adversary while selecting (D² only).
    pub queried: Vec<PostId>,
}

fn clamp_k(k: usize, available: usize) -> (usize, bool) {
    if k > available {
        warn!("decoy pool exhausted: wanted {k}, have {available}");
        (available, true)
    } else {
        (k, false)
    }
}

/// Uniform K-subset of the pool.
pub fn select_random(pool: &[Post], k: usize, seed: u64) -> Selection {
    let (k, exhausted) = clamp_k(k, pool.len());
    let mut rng = rng_from_seed(seed);
    let mut idx = index::sample(&mut rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    Selection {
        decoys: idx.into_iter().map(|i| pool[i].clone()).collect(),
        exhausted,
        queried: Vec::new(),
    }
}

/// The K pool posts the adversary finds most damaging.
pub fn select_oracle<F>(pool: &[Post], k: usize, mut prob_query: F) -> Result<Selection>
where
    F: FnMut(&Post) -> Result<f64>,
{
    let (k, exhausted) = clamp_k(k, pool.len());
    let probs: Vec<f64> = pool.iter().map(&mut prob_query).collect::<Result<_>>()?;
    let refs: Vec<&Post> = pool.iter().collect();
    let decoys = top_k_by(&refs, &probs, k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    Ok(Selection {
        decoys,
        exhausted,
        queried: Vec::new(),
    })
}

/// Softmax of the challenger scores over the training pool.
pub fn d2_alpha(phi: &ClassifierParams, train_pool: &[Post]) -> Result<Vec<f64>> {
    let scores: Vec<f64> = train_pool
        .iter()
        .map(|p| forward_score(phi, &p.features))
        .collect::<Result<_>>()?;
    Ok(softmax(&scores))
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn check_pool(train_pool: &[Post], probs: &[f64]) -> Result<()> {
    if train_pool.is_empty() {
        return Err(GameError::EmptyBatch);
    }
    if train_pool.len() != probs.len() {
        return Err(GameError::Dimension {
            expected: train_pool.len(),
            got: probs.len(),
        });
    }
    Ok(())
}

/// Relaxed objective: `sum_i alpha_i * -log(1 - a_i)`.
pub fn d2_loss(phi: &ClassifierParams, train_pool: &[Post], probs: &[f64]) -> Result<f64> {
    check_pool(train_pool, probs)?;
    let alpha = d2_alpha(phi, train_pool)?;
    Ok(alpha.iter().zip(probs).map(|(a, p)| a * decoy_value(*p)).sum())
}

/// Gradient of [`d2_loss`] in the flat parameter layout.
///
/// With `c_i = -log(1 - a_i)` and `V = sum alpha_i c_i`,
/// `dV/dg_i = alpha_i (c_i - V)`.
pub fn d2_gradient(phi: &ClassifierParams, train_pool: &[Post], probs: &[f64]) -> Result<Vec<f64>> {
    check_pool(train_pool, probs)?;
    let alpha = d2_alpha(phi, train_pool)?;
    let values: Vec<f64> = probs.iter().map(|p| decoy_value(*p)).collect();
    let v: f64 = alpha.iter().zip(&values).map(|(a, c)| a * c).sum();
    let mut grad = vec![0.0; phi.n_params()];
    for ((post, a), c) in train_pool.iter().zip(&alpha).zip(&values) {
        let upstream = a * (c - v);
        if upstream != 0.0 {
            phi.backprop_into(&post.features, upstream, &mut grad)?;
        }
    }
    Ok(grad)
}

/// Full-batch gradient ascent on the relaxed objective.
///
/// The softmax couples every training post, so each step uses the whole
/// training pool; `hyper.batch_size` is ignored. An update that leaves the
/// objective more than 1% below its starting value, or non-finite, is
/// discarded.
pub fn train_d2(
    phi: &ClassifierParams,
    train_pool: &[Post],
    probs: &[f64],
    hyper: &TrainHyper,
    _seed: u64,
) -> Result<ClassifierParams> {
    check_pool(train_pool, probs)?;
    hyper.validate()?;
    let before = d2_loss(phi, train_pool, probs)?;
    let mut current = phi.clone();
    let mut flat = current.to_flat();
    for _ in 0..hyper.epochs {
        let grad = d2_gradient(&current, train_pool, probs)?;
        for (w, g) in flat.iter_mut().zip(&grad) {
            *w += hyper.learning_rate * g;
        }
        current.set_flat(&flat);
    }
    if !current.is_finite() {
        warn!("challenger training produced non-finite parameters; update discarded");
        return Ok(phi.clone());
    }
    let after = d2_loss(&current, train_pool, probs)?;
    if after < before * (1.0 - 0.01) {
        warn!("challenger objective fell from {before:.6} to {after:.6}; update discarded");
        return Ok(phi.clone());
    }
    Ok(current)
}

/// Converged relaxation versus exhaustive search on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationCheck {
    /// Relaxed objective at the end of the ascent.
    pub relaxed_value: f64,
    /// Exhaustive optimum of the discrete objective.
    pub discrete_value: f64,
    /// Top-K indices by the trained scorer, ascending.
    pub relaxed_set: Vec<usize>,
    pub discrete_set: Vec<usize>,
    pub steps: usize,
}

impl RelaxationCheck {
    pub fn sets_agree(&self) -> bool {
        self.relaxed_set == self.discrete_set
    }

    pub fn relative_gap(&self) -> f64 {
        (self.relaxed_value - self.discrete_value).abs() / self.discrete_value.abs().max(1e-12)
    }
}

/// Fit a linear scorer over one-hot features, from zero, by ascent on the
/// relaxed objective until the gradient norm drops below `tol` (or
/// `max_steps`), then compare with [`brute_force_discrete_optimum`].
pub fn relaxation_check(probs: &[f64], k: usize, max_steps: usize, tol: f64) -> Result<RelaxationCheck> {
    let n = probs.len();
    let (discrete, discrete_value) = brute_force_discrete_optimum(probs, k)?;
    let pool: Vec<Post> = (0..n)
        .map(|i| {
            let x = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
            Post::new(i as u64 + 1, x, 0, crate::domain::Origin::Volunteered, 1, None)
        })
        .collect::<Result<_>>()?;
    let mut phi = ClassifierParams::zeros(Role::ChallengerPhi, n, &[]);
    let chunk = TrainHyper {
        learning_rate: 1.0,
        epochs: 100,
        batch_size: n,
        balance_batches: false,
    };
    let mut steps = 0;
    while steps < max_steps {
        phi = train_d2(&phi, &pool, probs, &chunk, 0)?;
        steps += chunk.epochs;
        let g = d2_gradient(&phi, &pool, probs)?;
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < tol {
            break;
        }
    }
    let scores: Vec<f64> = pool
        .iter()
        .map(|p| forward_score(&phi, &p.features))
        .collect::<Result<_>>()?;
    let refs: Vec<&Post> = pool.iter().collect();
    let mut relaxed_set = top_k_by(&refs, &scores, k);
    relaxed_set.sort_unstable();
    Ok(RelaxationCheck {
        relaxed_value: d2_loss(&phi, &pool, probs)?,
        discrete_value,
        relaxed_set,
        discrete_set: discrete.indices(),
        steps,
    })
}

/// [`relaxation_check`] on `instances` random problems with N in 1..=12,
/// K in 1..=min(4, N) and adversary probabilities in [0.01, 0.99].
pub fn relaxation_trials(instances: usize, seed: u64) -> Result<Vec<RelaxationCheck>> {
    let mut rng = rng_from_seed(seed);
    (0..instances)
        .map(|_| {
            let n = rng.random_range(1..=12);
            let k = rng.random_range(1..=n.min(4));
            let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..=0.99)).collect();
            relaxation_check(&probs, k, 20_000, 1e-6)
        })
        .collect()
}

/// The challenger's persistent state across intervals.
#[derive(Debug, Clone)]
pub struct ChallengerState {
    pub mode: ChallengerMode,
    /// Available volunteered posts, keyed by id.
    pub pool: BTreeMap<PostId, Post>,
    pub phi: ClassifierParams,
    pub query_budget: usize,
    pub queried_ids: BTreeSet<PostId>,
    pub hyper: TrainHyper,
    /// Scenario and envelope for the accept-reject strategy.
    rejection: Option<(ScenarioSpec, f64)>,
    /// Posts already put through the accept-reject test.
    screened: BTreeSet<PostId>,
}

impl ChallengerState {
    pub fn from_config(cfg: &GameConfig) -> Self {
        let phi = ClassifierParams::init(
            Role::ChallengerPhi,
            cfg.dim(),
            &cfg.challenger_hidden,
            derive_seed(cfg.seed, Stream::ChallengerInit, 0),
        );
        let rejection = if cfg.challenger_mode == ChallengerMode::Rejection {
            cfg.scenario.envelope().map(|m| (cfg.scenario.clone(), m))
        } else {
            None
        };
        ChallengerState {
            mode: cfg.challenger_mode,
            pool: BTreeMap::new(),
            phi,
            query_budget: cfg.budget_con,
            queried_ids: BTreeSet::new(),
            hyper: cfg.challenger_train,
            rejection,
            screened: BTreeSet::new(),
        }
    }

    pub fn add_volunteers(&mut self, posts: &[Post]) {
        for p in posts {
            debug_assert_eq!(p.true_label, 0, "volunteered posts are non-damaging");
            self.pool.insert(p.id, p.clone());
        }
    }

    pub fn pool_posts(&self) -> Vec<Post> {
        self.pool.values().cloned().collect()
    }

    fn remove(&mut self, selection: &Selection) {
        for d in &selection.decoys {
            self.pool.remove(&d.id);
        }
    }

    /// Choose up to `k` decoys for the next interval and drop them from the
    /// pool. `prob_query` exposes the adversary's current probabilities.
    pub fn select<F>(&mut self, k: usize, seed: u64, prob_query: F) -> Result<Selection>
    where
        F: FnMut(&Post) -> Result<f64>,
    {
        let selection = match self.mode {
            ChallengerMode::None => Selection::default(),
            ChallengerMode::Random => select_random(&self.pool_posts(), k, seed),
            ChallengerMode::Oracle => select_oracle(&self.pool_posts(), k, prob_query)?,
            ChallengerMode::D2 => return select_d2(self, k, seed, prob_query),
            ChallengerMode::Rejection => self.select_rejection(k, seed)?,
        };
        self.remove(&selection);
        Ok(selection)
    }

    /// Screen unscreened pool posts in random order, accepting each with
    /// probability p+(x) / (M pv(x)), until `k` are accepted.
    fn select_rejection(&mut self, k: usize, seed: u64) -> Result<Selection> {
        let (spec, envelope) = self.rejection.clone().ok_or_else(|| {
            GameError::Config("rejection challenger has no bounded density ratio".into())
        })?;
        let mut rng = rng_from_seed(seed);
        let mut candidates: Vec<PostId> = self
            .pool
            .keys()
            .filter(|id| !self.screened.contains(id))
            .copied()
            .collect();
        candidates.shuffle(&mut rng);
        let mut decoys = Vec::with_capacity(k);
        for id in candidates {
            if decoys.len() == k {
                break;
            }
            self.screened.insert(id);
            let post = &self.pool[&id];
            let ratio = spec.density_ratio(&post.features).ok_or_else(|| {
                GameError::Config("scenario has no closed-form density ratio".into())
            })?;
            let u: f64 = rng.random();
            if accept_draw(ratio, envelope, u)? {
                decoys.push(post.clone());
            }
        }
        let exhausted = decoys.len() < k;
        if exhausted {
            warn!(
                "rejection challenger ran out of unscreened volunteers: {} of {k}",
                decoys.len()
            );
        }
        decoys.sort_by_key(|p| p.id);
        Ok(Selection {
            decoys,
            exhausted,
            queried: Vec::new(),
        })
    }
}

/// Monitored-access selection: query the adversary on a training split,
/// fit the scorer, and pick the top K of the never-queried remainder.
pub fn select_d2<F>(
    state: &mut ChallengerState,
    k: usize,
    seed: u64,
    mut prob_query: F,
) -> Result<Selection>
where
    F: FnMut(&Post) -> Result<f64>,
{
    let pool = state.pool_posts();
    let n_train = state.query_budget.min(pool.len() / 2);
    let mut rng = rng_from_seed(derive_seed(seed, Stream::ChallengerSelect, 0));
    let mut train_idx = index::sample(&mut rng, pool.len(), n_train).into_vec();
    train_idx.sort_unstable();
    let train_ids: BTreeSet<PostId> = train_idx.iter().map(|&i| pool[i].id).collect();
    let train_pool: Vec<Post> = train_idx.iter().map(|&i| pool[i].clone()).collect();

    if !train_pool.is_empty() {
        let probs: Vec<f64> = train_pool.iter().map(&mut prob_query).collect::<Result<_>>()?;
        state.queried_ids.extend(train_ids.iter().copied());
        state.phi = train_d2(
            &state.phi,
            &train_pool,
            &probs,
            &state.hyper,
            derive_seed(seed, Stream::ChallengerTrain, 0),
        )?;
    }

    let test: Vec<&Post> = pool
        .iter()
        .filter(|p| !train_ids.contains(&p.id) && !state.queried_ids.contains(&p.id))
        .collect();
    let (k, exhausted) = clamp_k(k, test.len());
    let scores: Vec<f64> = test
        .iter()
        .map(|p| forward_score(&state.phi, &p.features))
        .collect::<Result<_>>()?;
    let decoys: Vec<Post> = top_k_by(&test, &scores, k)
        .into_iter()
        .map(|i| test[i].clone())
        .collect();
    debug!(
        "d2: trained on {} queried posts, picked {} of {} held-out",
        train_pool.len(),
        decoys.len(),
        test.len()
    );
    let selection = Selection {
        decoys,
        exhausted,
        queried: train_ids.into_iter().collect(),
    };
    state.remove(&selection);
    Ok(selection)
}
