//! Synthetic post streams for the three support regimes, and the
//! accept-reject sampler that turns volunteer draws into damaging-like decoys.
//!
//! Class 1 is the damaging distribution. Non-damaging deletions and
//! volunteered posts are both drawn from class 0.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{IntervalLedger, Origin, Post, PostId, DAMAGING, NON_DAMAGING};
use crate::error::{GameError, Result};
use crate::rng::{rng_from_seed, sub_rng, GameRng, Stream};

/// Which way the damaging and volunteered supports relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    NonOverlapping,
    FullyOverlapping,
    PartialOverlap,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::NonOverlapping => "non_overlapping",
            ScenarioKind::FullyOverlapping => "fully_overlapping",
            ScenarioKind::PartialOverlap => "partial_overlap",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "non_overlapping" | "nonoverlapping" | "moons" => Ok(ScenarioKind::NonOverlapping),
            "fully_overlapping" | "fullyoverlapping" | "gaussians" => {
                Ok(ScenarioKind::FullyOverlapping)
            }
            "partial_overlap" | "partialoverlap" | "mixture" => Ok(ScenarioKind::PartialOverlap),
            other => Err(GameError::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Distribution parameters of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    /// Interleaved half-moons. Extra dimensions beyond the first two carry
    /// isotropic noise only.
    NonOverlapping { noise: f64, dim: usize },
    /// Class c ~ N(mean_c, sigma_c^2 I). Both densities are positive
    /// everywhere, so the supports coincide.
    FullyOverlapping {
        mean0: Vec<f64>,
        sigma0: f64,
        mean1: Vec<f64>,
        sigma1: f64,
    },
    /// Class 0 = 0.5 N(mean_a) + 0.5 N(mean_shared), class 1 = 0.5 N(mean_b)
    /// + 0.5 N(mean_shared), all with covariance sigma^2 I.
    PartialOverlap {
        mean_a: Vec<f64>,
        mean_b: Vec<f64>,
        mean_shared: Vec<f64>,
        sigma: f64,
    },
}

impl ScenarioSpec {
    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::NonOverlapping => ScenarioSpec::NonOverlapping {
                noise: 0.05,
                dim: 2,
            },
            ScenarioKind::FullyOverlapping => ScenarioSpec::FullyOverlapping {
                mean0: vec![0.0, 0.0],
                sigma0: 1.5,
                mean1: vec![1.0, 0.0],
                sigma1: 1.0,
            },
            ScenarioKind::PartialOverlap => ScenarioSpec::PartialOverlap {
                mean_a: vec![-2.5, 0.0],
                mean_b: vec![2.5, 0.0],
                mean_shared: vec![0.0, 0.0],
                sigma: 1.0,
            },
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioSpec::NonOverlapping { .. } => ScenarioKind::NonOverlapping,
            ScenarioSpec::FullyOverlapping { .. } => ScenarioKind::FullyOverlapping,
            ScenarioSpec::PartialOverlap { .. } => ScenarioKind::PartialOverlap,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScenarioSpec::NonOverlapping { dim, .. } => *dim,
            ScenarioSpec::FullyOverlapping { mean0, .. } => mean0.len(),
            ScenarioSpec::PartialOverlap { mean_a, .. } => mean_a.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GameError::Config(m));
        match self {
            ScenarioSpec::NonOverlapping { noise, dim } => {
                if noise.is_nan() || *noise < 0.0 {
                    return bad(format!("moons noise must be >= 0, got {noise}"));
                }
                if *dim < 2 {
                    return bad(format!("moons need dim >= 2, got {dim}"));
                }
            }
            ScenarioSpec::FullyOverlapping {
                mean0,
                sigma0,
                mean1,
                sigma1,
            } => {
                if mean0.is_empty() || mean0.len() != mean1.len() {
                    return bad("gaussian means must share a nonzero dimension".into());
                }
                if !(*sigma0 > 0.0 && *sigma1 > 0.0) {
                    return bad("gaussian sigmas must be > 0".into());
                }
            }
            ScenarioSpec::PartialOverlap {
                mean_a,
                mean_b,
                mean_shared,
                sigma,
            } => {
                if mean_a.is_empty()
                    || mean_a.len() != mean_b.len()
                    || mean_a.len() != mean_shared.len()
                {
                    return bad("mixture means must share a nonzero dimension".into());
                }
                if sigma.is_nan() || *sigma <= 0.0 {
                    return bad("mixture sigma must be > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Draw one feature vector of class `class` (1 = damaging).
    pub fn sample<R: Rng + ?Sized>(&self, class: u8, rng: &mut R) -> Vec<f64> {
        match self {
            ScenarioSpec::NonOverlapping { noise, dim } => {
                let t: f64 = rng.random_range(0.0..=PI);
                let (x, y) = moon_point(class, t);
                let mut v = Vec::with_capacity(*dim);
                v.push(x + noise * normal(rng));
                v.push(y + noise * normal(rng));
                for _ in 2..*dim {
                    v.push(noise * normal(rng));
                }
                v
            }
            ScenarioSpec::FullyOverlapping {
                mean0,
                sigma0,
                mean1,
                sigma1,
            } => {
                if class == DAMAGING {
                    gaussian_draw(mean1, *sigma1, rng)
                } else {
                    gaussian_draw(mean0, *sigma0, rng)
                }
            }
            ScenarioSpec::PartialOverlap {
                mean_a,
                mean_b,
                mean_shared,
                sigma,
            } => {
                let own = if class == DAMAGING { mean_b } else { mean_a };
                let mean = if rng.random_bool(0.5) {
                    own
                } else {
                    mean_shared
                };
                gaussian_draw(mean, *sigma, rng)
            }
        }
    }

    /// Class-conditional density, when the scenario has one in closed form.
    pub fn density(&self, class: u8, x: &[f64]) -> Option<f64> {
        match self {
            ScenarioSpec::NonOverlapping { .. } => None,
            ScenarioSpec::FullyOverlapping {
                mean0,
                sigma0,
                mean1,
                sigma1,
            } => Some(if class == DAMAGING {
                gaussian_pdf(x, mean1, *sigma1)
            } else {
                gaussian_pdf(x, mean0, *sigma0)
            }),
            ScenarioSpec::PartialOverlap {
                mean_a,
                mean_b,
                mean_shared,
                sigma,
            } => {
                let own = if class == DAMAGING { mean_b } else { mean_a };
                Some(0.5 * gaussian_pdf(x, own, *sigma) + 0.5 * gaussian_pdf(x, mean_shared, *sigma))
            }
        }
    }

    /// Damaging-to-volunteer density ratio p+(x)/pv(x).
    pub fn density_ratio(&self, x: &[f64]) -> Option<f64> {
        match self {
            ScenarioSpec::FullyOverlapping {
                mean0,
                sigma0,
                mean1,
                sigma1,
            } => {
                // Ratio in log space; the two pdfs underflow far from the means.
                let d = x.len() as f64;
                let log_r = d * (sigma0 / sigma1).ln() - sq_dist(x, mean1) / (2.0 * sigma1 * sigma1)
                    + sq_dist(x, mean0) / (2.0 * sigma0 * sigma0);
                Some(log_r.exp())
            }
            _ => {
                let p1 = self.density(DAMAGING, x)?;
                let p0 = self.density(NON_DAMAGING, x)?;
                Some(p1 / p0)
            }
        }
    }

    /// Smallest valid envelope constant M = sup p+/pv, when it is finite.
    pub fn envelope(&self) -> Option<f64> {
        match self {
            ScenarioSpec::FullyOverlapping {
                mean0,
                sigma0,
                mean1,
                sigma1,
            } => {
                let delta2 = sq_dist(mean0, mean1);
                let d = mean0.len() as f64;
                if sigma0 > sigma1 {
                    let a = 1.0 / (sigma1 * sigma1);
                    let b = 1.0 / (sigma0 * sigma0);
                    Some((sigma0 / sigma1).powf(d) * (a * b * delta2 / (2.0 * (a - b))).exp())
                } else if sigma0 == sigma1 && delta2 == 0.0 {
                    Some(1.0)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

fn moon_point(class: u8, t: f64) -> (f64, f64) {
    if class == DAMAGING {
        (1.0 - t.cos(), 0.5 - t.sin())
    } else {
        (t.cos(), t.sin())
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_draw<R: Rng + ?Sized>(mean: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    mean.iter().map(|m| m + sigma * normal(rng)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Isotropic Gaussian density.
pub fn gaussian_pdf(x: &[f64], mean: &[f64], sigma: f64) -> f64 {
    let d = x.len() as f64;
    let var = sigma * sigma;
    (2.0 * PI * var).powf(-d / 2.0) * (-sq_dist(x, mean) / (2.0 * var)).exp()
}

/// Labeled 2-D sample.
pub type LabeledPoints = Vec<(Vec<f64>, u8)>;

/// Interleaved half-moons: class 0 on the upper unit arc around the origin,
/// class 1 on the lower unit arc around (1, 0.5).
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> LabeledPoints {
    let spec = ScenarioSpec::NonOverlapping { noise, dim: 2 };
    gen_balanced(&spec, n, seed)
}

/// Two isotropic Gaussians sharing one scale.
pub fn gen_gaussians(n: usize, mean0: &[f64], mean1: &[f64], sigma: f64, seed: u64) -> LabeledPoints {
    gen_gaussian_pair(n, mean0, sigma, mean1, sigma, seed)
}

/// Two isotropic Gaussians with per-class scales.
pub fn gen_gaussian_pair(
    n: usize,
    mean0: &[f64],
    sigma0: f64,
    mean1: &[f64],
    sigma1: f64,
    seed: u64,
) -> LabeledPoints {
    let spec = ScenarioSpec::FullyOverlapping {
        mean0: mean0.to_vec(),
        sigma0,
        mean1: mean1.to_vec(),
        sigma1,
    };
    gen_balanced(&spec, n, seed)
}

/// `n` points alternating class 0 and class 1, starting with class 0.
pub fn gen_balanced(spec: &ScenarioSpec, n: usize, seed: u64) -> LabeledPoints {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|i| {
            let class = (i % 2) as u8;
            (spec.sample(class, &mut rng), class)
        })
        .collect()
}

/// Per-interval post counts produced by users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalCounts {
    pub n_damaging: usize,
    pub n_nondamaging: usize,
    pub n_volunteered: usize,
}

impl Default for IntervalCounts {
    /// Roughly 42% of deletions are damaging.
    fn default() -> Self {
        IntervalCounts {
            n_damaging: 42,
            n_nondamaging: 58,
            n_volunteered: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanCounts {
    Constant(IntervalCounts),
    PerInterval(Vec<IntervalCounts>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamPlan {
    pub intervals: usize,
    pub counts: PlanCounts,
    pub seed: u64,
}

impl StreamPlan {
    pub fn constant(intervals: usize, counts: IntervalCounts, seed: u64) -> Self {
        StreamPlan {
            intervals,
            counts: PlanCounts::Constant(counts),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PlanCounts::PerInterval(v) = &self.counts {
            if v.len() != self.intervals {
                return Err(GameError::Config(format!(
                    "per-interval counts have length {}, expected T = {}",
                    v.len(),
                    self.intervals
                )));
            }
        }
        Ok(())
    }

    /// Counts for interval `t` (1-based).
    pub fn counts_at(&self, t: usize) -> IntervalCounts {
        match &self.counts {
            PlanCounts::Constant(c) => *c,
            PlanCounts::PerInterval(v) => v[t - 1],
        }
    }
}

/// Generate the user side of every interval: deletions and volunteered posts.
/// Decoys and training samples are filled in later by the game.
pub fn build_stream(spec: &ScenarioSpec, plan: &StreamPlan) -> Result<Vec<IntervalLedger>> {
    spec.validate()?;
    plan.validate()?;
    let mut next_id: PostId = 1;
    let mut ledgers = Vec::with_capacity(plan.intervals);
    for t in 1..=plan.intervals {
        let counts = plan.counts_at(t);
        let mut rng = sub_rng(plan.seed, Stream::Users, t as u64);
        let mut ledger = IntervalLedger::new(t);
        let mut make = |rng: &mut GameRng, label: u8, origin: Origin, deleted: Option<usize>| {
            let post = Post {
                id: next_id,
                features: spec.sample(label, rng),
                true_label: label,
                origin,
                interval_created: t,
                interval_deleted: deleted,
            };
            next_id += 1;
            post
        };
        for _ in 0..counts.n_damaging {
            let p = make(&mut rng, DAMAGING, Origin::UserDeletedDamaging, Some(t));
            ledger.damaging.insert(p.id);
            ledger.deleted.push(p);
        }
        for _ in 0..counts.n_nondamaging {
            let p = make(&mut rng, NON_DAMAGING, Origin::UserDeletedNonDamaging, Some(t));
            ledger.deleted.push(p);
        }
        for _ in 0..counts.n_volunteered {
            let p = make(&mut rng, NON_DAMAGING, Origin::Volunteered, None);
            ledger.volunteered_new.push(p);
        }
        ledgers.push(ledger);
    }
    Ok(ledgers)
}

/// Accepted samples plus the number of proposals it took to get them.
#[derive(Debug, Clone)]
pub struct RejectionOutcome {
    pub samples: Vec<Vec<f64>>,
    pub draws: usize,
}

impl RejectionOutcome {
    pub fn acceptance_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.samples.len() as f64 / self.draws as f64
        }
    }
}

/// One accept/reject decision: accept when `u <= ratio / M`.
pub fn accept_draw(ratio: f64, envelope: f64, u: f64) -> Result<bool> {
    let r = ratio / envelope;
    if r > 1.0 + 1e-12 || !r.is_finite() {
        return Err(GameError::Envelope { ratio_over_m: r });
    }
    Ok(u <= r)
}

/// Filter proposal draws until `count` of them are accepted; the accepted
/// draws are distributed as the target whose density ratio to the proposal
/// is `density_ratio`.
pub fn rejection_sample<P, F>(
    mut proposal_draw: P,
    density_ratio: F,
    envelope: f64,
    count: usize,
    seed: u64,
) -> Result<RejectionOutcome>
where
    P: FnMut(&mut GameRng) -> Vec<f64>,
    F: Fn(&[f64]) -> f64,
{
    if envelope.is_nan() || envelope <= 0.0 {
        return Err(GameError::Config(format!("envelope M must be > 0, got {envelope}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::with_capacity(count);
    let mut draws = 0usize;
    while samples.len() < count {
        let x = proposal_draw(&mut rng);
        let u: f64 = rng.random();
        draws += 1;
        if accept_draw(density_ratio(&x), envelope, u)? {
            samples.push(x);
        }
    }
    Ok(RejectionOutcome { samples, draws })
}

/// Run exactly `n_draws` proposals through the accept-reject test.
pub fn rejection_filter<P, F>(
    mut proposal_draw: P,
    density_ratio: F,
    envelope: f64,
    n_draws: usize,
    seed: u64,
) -> Result<RejectionOutcome>
where
    P: FnMut(&mut GameRng) -> Vec<f64>,
    F: Fn(&[f64]) -> f64,
{
    if envelope.is_nan() || envelope <= 0.0 {
        return Err(GameError::Config(format!("envelope M must be > 0, got {envelope}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::new();
    for _ in 0..n_draws {
        let x = proposal_draw(&mut rng);
        let u: f64 = rng.random();
        if accept_draw(density_ratio(&x), envelope, u)? {
            samples.push(x);
        }
    }
    Ok(RejectionOutcome {
        samples,
        draws: n_draws,
    })
}

/// Dump a stream as tab-separated text, one post per line:
/// `id interval_created interval_deleted origin label x0 x1 ...`, with `-`
/// for a missing deletion interval.
pub fn write_stream<W: Write>(ledgers: &[IntervalLedger], mut out: W) -> Result<()> {
    let dim = ledgers
        .iter()
        .flat_map(|l| l.deleted.iter().chain(&l.volunteered_new))
        .map(|p| p.features.len())
        .next()
        .unwrap_or(0);
    write!(out, "id\tinterval_created\tinterval_deleted\torigin\tlabel")?;
    for j in 0..dim {
        write!(out, "\tx{j}")?;
    }
    writeln!(out)?;
    for l in ledgers {
        for p in l.deleted.iter().chain(&l.volunteered_new) {
            let del = p.interval_deleted.map_or("-".to_string(), |d| d.to_string());
            write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                p.id, p.interval_created, del, p.origin, p.true_label
            )?;
            for v in &p.features {
                write!(out, "\t{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_lie_on_arcs_without_noise() {
        let pts = gen_two_moons(200, 0.0, 3);
        for (x, c) in &pts {
            if *c == 0 {
                assert!((x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-9);
                assert!(x[1] >= -1e-9);
            } else {
                let (dx, dy) = (x[0] - 1.0, x[1] - 0.5);
                assert!((dx * dx + dy * dy - 1.0).abs() < 1e-9);
                assert!(dy <= 1e-9);
            }
        }
    }

    #[test]
    fn moons_balanced() {
        let pts = gen_two_moons(4, 0.0, 11);
        assert_eq!(pts.iter().filter(|(_, c)| *c == 0).count(), 2);
        let pts = gen_two_moons(7, 0.1, 11);
        let ones = pts.iter().filter(|(_, c)| *c == 1).count();
        assert!((ones as i64 - 3).abs() <= 1);
    }

    #[test]
    fn moons_are_strictly_separated() {
        let pts = gen_two_moons(400, 0.0, 5);
        let mut min_d = f64::INFINITY;
        for (a, ca) in &pts {
            for (b, cb) in &pts {
                if ca != cb {
                    min_d = min_d.min(sq_dist(a, b).sqrt());
                }
            }
        }
        assert!(min_d > 0.1, "min inter-class distance {min_d}");
    }

    #[test]
    fn degenerate_gaussian_sits_on_mean() {
        let pts = gen_gaussians(100, &[0.3, -0.2], &[1.0, 1.0], 1e-6, 9);
        let c0: Vec<_> = pts.iter().filter(|(_, c)| *c == 0).collect();
        for j in 0..2 {
            let m = c0.iter().map(|(x, _)| x[j]).sum::<f64>() / c0.len() as f64;
            assert!((m - [0.3, -0.2][j]).abs() < 1e-3);
        }
    }

    #[test]
    fn gaussian_sample_mean_converges() {
        let pts = gen_gaussians(10_000, &[0.0, 0.0], &[1.0, 1.0], 1.0, 17);
        let c0: Vec<_> = pts.iter().filter(|(_, c)| *c == 0).collect();
        for j in 0..2 {
            let m = c0.iter().map(|(x, _)| x[j]).sum::<f64>() / c0.len() as f64;
            assert!(m.abs() < 0.05, "dim {j} mean {m}");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_gaussians(50, &[0.0, 0.0], &[1.0, 1.0], 1.0, 4);
        let b = gen_gaussians(50, &[0.0, 0.0], &[1.0, 1.0], 1.0, 4);
        for ((xa, ca), (xb, cb)) in a.iter().zip(&b) {
            assert_eq!(ca, cb);
            assert_eq!(
                xa.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                xb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn stream_bookkeeping() {
        let spec = ScenarioSpec::default_for(ScenarioKind::PartialOverlap);
        let plan = StreamPlan::constant(
            3,
            IntervalCounts {
                n_damaging: 5,
                n_nondamaging: 7,
                n_volunteered: 20,
            },
            1,
        );
        let ledgers = build_stream(&spec, &plan).unwrap();
        assert_eq!(ledgers.len(), 3);
        let mut ids = std::collections::HashSet::new();
        for (i, l) in ledgers.iter().enumerate() {
            assert_eq!(l.t, i + 1);
            assert_eq!(l.deleted.len(), 12);
            assert_eq!(l.damaging.len(), 5);
            assert_eq!(l.volunteered_new.len(), 20);
            assert!(l.volunteered_new.iter().all(|p| p.true_label == 0));
            l.check_invariants().unwrap();
            for p in l.deleted.iter().chain(&l.volunteered_new) {
                p.validate().unwrap();
                assert!(ids.insert(p.id), "duplicate id {}", p.id);
            }
        }
    }

    #[test]
    fn stream_is_deterministic() {
        let spec = ScenarioSpec::default_for(ScenarioKind::FullyOverlapping);
        let plan = StreamPlan::constant(2, IntervalCounts::default(), 8);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_stream(&build_stream(&spec, &plan).unwrap(), &mut a).unwrap();
        write_stream(&build_stream(&spec, &plan).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("id\tinterval_created\tinterval_deleted\torigin\tlabel\tx0\tx1\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 400);
    }

    #[test]
    fn per_interval_plan_length_checked() {
        let plan = StreamPlan {
            intervals: 3,
            counts: PlanCounts::PerInterval(vec![IntervalCounts::default(); 2]),
            seed: 0,
        };
        assert!(plan.validate().is_err());
    }

    #[test]
    fn identical_distributions_accept_everything() {
        let out = rejection_sample(|rng| vec![normal(rng)], |_| 1.0, 1.0, 1000, 3).unwrap();
        assert_eq!(out.draws, 1000);
        assert_eq!(out.acceptance_rate(), 1.0);
    }

    #[test]
    fn envelope_violation_reported() {
        // Equal-scale Gaussians with shifted means have an unbounded ratio.
        let ratio = |x: &[f64]| (0.5 * x[0] - 0.125).exp();
        let err = rejection_sample(|rng| vec![normal(rng)], ratio, (0.25f64).exp(), 10_000, 3);
        assert!(matches!(err, Err(GameError::Envelope { .. })));
    }

    #[test]
    fn envelope_closed_form_matches_grid_search() {
        let spec = ScenarioSpec::default_for(ScenarioKind::FullyOverlapping);
        let m = spec.envelope().unwrap();
        let mut best: f64 = 0.0;
        for i in -300..=300 {
            for j in -300..=300 {
                let x = [i as f64 * 0.02, j as f64 * 0.02];
                best = best.max(spec.density_ratio(&x).unwrap());
            }
        }
        assert!(best <= m * (1.0 + 1e-12));
        assert!((best - m).abs() / m < 1e-3, "grid {best} vs closed form {m}");
        assert!(ScenarioSpec::default_for(ScenarioKind::PartialOverlap)
            .envelope()
            .is_none());
    }

    #[test]
    fn ratio_matches_density_quotient() {
        let spec = ScenarioSpec::default_for(ScenarioKind::FullyOverlapping);
        let x = [0.3, -0.7];
        let q = spec.density(1, &x).unwrap() / spec.density(0, &x).unwrap();
        assert!((spec.density_ratio(&x).unwrap() - q).abs() < 1e-12 * q.max(1.0));
    }
}
