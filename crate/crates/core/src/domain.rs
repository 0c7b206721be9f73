//! Core value types shared by every module, plus the scoring metrics used
//! to judge the adversary. The positive class is always "damaging".

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Unique identifier of a post within one game.
pub type PostId = u64;

pub const DAMAGING: u8 = 1;
pub const NON_DAMAGING: u8 = 0;

/// How a post ended up in the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    UserDeletedDamaging,
    UserDeletedNonDamaging,
    Volunteered,
    Decoy,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::UserDeletedDamaging => "user_damaging",
            Origin::UserDeletedNonDamaging => "user_non_damaging",
            Origin::Volunteered => "volunteered",
            Origin::Decoy => "decoy",
        }
    }

    /// Label forced by the origin, if any.
    fn forced_label(&self) -> Option<u8> {
        match self {
            Origin::UserDeletedDamaging => Some(DAMAGING),
            Origin::UserDeletedNonDamaging | Origin::Volunteered | Origin::Decoy => {
                Some(NON_DAMAGING)
            }
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user_damaging" => Ok(Origin::UserDeletedDamaging),
            "user_non_damaging" => Ok(Origin::UserDeletedNonDamaging),
            "volunteered" => Ok(Origin::Volunteered),
            "decoy" => Ok(Origin::Decoy),
            other => Err(GameError::Config(format!("unknown origin '{other}'"))),
        }
    }
}

/// One item of the post stream.
///
/// Identity is the `id` alone: equality and hashing ignore features, so a
/// perturbed copy of a post can never be counted twice.
#[derive(Debug, Clone)]
pub struct Post {
    pub id: PostId,
    pub features: Vec<f64>,
    pub true_label: u8,
    pub origin: Origin,
    pub interval_created: usize,
    pub interval_deleted: Option<usize>,
}

impl Post {
    /// Build a post, checking the origin/label and interval invariants.
    pub fn new(
        id: PostId,
        features: Vec<f64>,
        true_label: u8,
        origin: Origin,
        interval_created: usize,
        interval_deleted: Option<usize>,
    ) -> Result<Self> {
        let post = Post {
            id,
            features,
            true_label,
            origin,
            interval_created,
            interval_deleted,
        };
        post.validate()?;
        Ok(post)
    }

    pub fn validate(&self) -> Result<()> {
        if self.true_label > 1 {
            return Err(GameError::Config(format!(
                "post {}: label {} is not binary",
                self.id, self.true_label
            )));
        }
        if let Some(forced) = self.origin.forced_label() {
            if forced != self.true_label {
                return Err(GameError::Config(format!(
                    "post {}: origin {} requires label {forced}",
                    self.id, self.origin
                )));
            }
        }
        if self.interval_created < 1 {
            return Err(GameError::Config(format!(
                "post {}: intervals start at 1",
                self.id
            )));
        }
        if let Some(del) = self.interval_deleted {
            if del < self.interval_created {
                return Err(GameError::Config(format!(
                    "post {}: deleted at {del} before creation at {}",
                    self.id, self.interval_created
                )));
            }
        }
        Ok(())
    }

    pub fn is_damaging(&self) -> bool {
        self.true_label == DAMAGING
    }

    /// The copy of a volunteered post that the challenger deletes at `interval`.
    pub fn as_decoy(&self, interval: usize) -> Post {
        Post {
            origin: Origin::Decoy,
            interval_deleted: Some(interval),
            ..self.clone()
        }
    }
}

impl PartialEq for Post {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Post {}

impl Hash for Post {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

/// Harmonic mean of precision and recall, zero when both are zero.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    let denom = precision + recall;
    if denom > 0.0 {
        2.0 * precision * recall / denom
    } else {
        0.0
    }
}

/// Confusion counts and the scores derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        Metrics {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
            precision,
            recall,
            f_score: f_score(precision, recall),
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

/// Score binary predictions (1 = damaging) against binary labels.
pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(GameError::Config(format!(
            "prediction/label length mismatch: {} vs {}",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(GameError::Config("cannot score an empty set".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == DAMAGING, y == DAMAGING) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// Everything that happened to posts in one interval.
#[derive(Debug, Clone, Default)]
pub struct IntervalLedger {
    pub t: usize,
    /// User deletions plus injected decoys.
    pub deleted: Vec<Post>,
    /// Ids of the damaging subset of `deleted`.
    pub damaging: BTreeSet<PostId>,
    pub volunteered_new: Vec<Post>,
    pub decoys_injected: BTreeSet<PostId>,
    pub adversary_train_sample: BTreeSet<PostId>,
}

impl IntervalLedger {
    pub fn new(t: usize) -> Self {
        IntervalLedger {
            t,
            ..Default::default()
        }
    }

    pub fn deleted_ids(&self) -> BTreeSet<PostId> {
        self.deleted.iter().map(|p| p.id).collect()
    }

    /// Check the subset and disjointness relations between the ledger's sets.
    pub fn check_invariants(&self) -> Result<()> {
        let deleted = self.deleted_ids();
        let fail = |what: &str| Err(GameError::Config(format!("interval {}: {what}", self.t)));
        if !self.decoys_injected.is_subset(&deleted) {
            return fail("decoys not contained in deleted set");
        }
        if !self.damaging.is_subset(&deleted) {
            return fail("damaging posts not contained in deleted set");
        }
        if !self.adversary_train_sample.is_subset(&deleted) {
            return fail("training sample not contained in deleted set");
        }
        if self
            .volunteered_new
            .iter()
            .any(|p| self.decoys_injected.contains(&p.id))
        {
            return fail("a decoy was volunteered in the interval it was deleted");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f_score_examples() {
        // 42% precision, 58% recall -> about 48%
        assert!((f_score(0.42, 0.58) - 0.48720).abs() < 1e-4);
        assert_eq!(f_score(1.0, 1.0), 1.0);
        assert_eq!(f_score(0.0, 0.7), 0.0);
        assert_eq!(f_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (1, 1, 0));
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f_score - 2.0 / 3.0).abs() < 1e-12);

        let m = compute_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((m.precision, m.recall, m.f_score), (1.0, 1.0, 1.0));

        let m = compute_metrics(&[0, 0], &[1, 1]).unwrap();
        assert_eq!((m.recall, m.f_score), (0.0, 0.0));
    }

    #[test]
    fn metrics_length_mismatch() {
        assert!(compute_metrics(&[1, 0], &[1]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn post_invariants() {
        assert!(Post::new(1, vec![0.0], 1, Origin::Volunteered, 1, None).is_err());
        assert!(Post::new(1, vec![0.0], 0, Origin::UserDeletedDamaging, 1, None).is_err());
        assert!(Post::new(1, vec![0.0], 0, Origin::Decoy, 3, Some(2)).is_err());
        assert!(Post::new(1, vec![0.0], 1, Origin::UserDeletedDamaging, 2, Some(2)).is_ok());
    }

    #[test]
    fn identity_is_id_only() {
        let a = Post::new(5, vec![0.0, 1.0], 0, Origin::Volunteered, 1, None).unwrap();
        let mut b = a.clone();
        b.features = vec![9.0, 9.0];
        assert_eq!(a, b);
        let set: std::collections::HashSet<_> = [a, b].into_iter().collect();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn ledger_detects_stray_decoy() {
        let mut l = IntervalLedger::new(2);
        l.deleted
            .push(Post::new(1, vec![0.0], 1, Origin::UserDeletedDamaging, 2, Some(2)).unwrap());
        l.damaging.insert(1);
        assert!(l.check_invariants().is_ok());
        l.decoys_injected.insert(99);
        assert!(l.check_invariants().is_err());
    }

    proptest! {
        #[test]
        fn f_score_symmetric_and_bounded(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
            let f = f_score(p, r);
            prop_assert!((f - f_score(r, p)).abs() < 1e-15);
            prop_assert!(f <= 2.0 * p.min(r) + 1e-15);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn self_agreement_is_perfect(mut xs in proptest::collection::vec(0u8..=1, 1..64)) {
            xs[0] = 1;
            let m = compute_metrics(&xs, &xs).unwrap();
            prop_assert_eq!(m.f_score, 1.0);
            prop_assert_eq!(m.total(), xs.len());
        }

        #[test]
        fn counts_cover_input(
            pairs in proptest::collection::vec((0u8..=1, 0u8..=1), 1..64)
        ) {
            let (p, y): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let m = compute_metrics(&p, &y).unwrap();
            prop_assert_eq!(m.total(), p.len());
            prop_assert!((m.f_score - f_score(m.precision, m.recall)).abs() < 1e-15);
        }
    }
}
