//! Summary statistics and goodness-of-fit helpers.

use rand_distr::Distribution;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Half-width of the normal-approximation 95% interval of the mean.
pub fn ci95_halfwidth(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        Z95 * std_dev(xs) / (xs.len() as f64).sqrt()
    }
}

/// Outcome of a Pearson chi-squared goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub p_value: f64,
}

impl ChiSquaredTest {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Pearson test of observed counts against expected probabilities.
///
/// Cells whose expected count is below 5 are pooled into one cell before the
/// statistic is formed; `probs` must sum to one.
pub fn chi_squared_gof(observed: &[u64], probs: &[f64], alpha: f64) -> ChiSquaredTest {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * nf;
        if e < 5.0 {
            pooled_o += o as f64;
            pooled_e += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pooled_e > 0.0 {
        cells.push((pooled_o, pooled_e));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    ChiSquaredTest {
        statistic,
        dof,
        critical: dist.inverse_cdf(1.0 - alpha),
        p_value: 1.0 - dist.cdf(statistic),
    }
}

/// Cell probabilities of an isotropic Gaussian on a `bins x bins` grid over
/// `[lo, hi]^2`, plus a final cell holding the mass outside the grid.
pub fn gaussian_grid_probs(mean: [f64; 2], sigma: f64, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let nx = Normal::new(mean[0], sigma).expect("sigma > 0");
    let ny = Normal::new(mean[1], sigma).expect("sigma > 0");
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
    let px: Vec<f64> = edges.windows(2).map(|e| nx.cdf(e[1]) - nx.cdf(e[0])).collect();
    let py: Vec<f64> = edges.windows(2).map(|e| ny.cdf(e[1]) - ny.cdf(e[0])).collect();
    let mut probs = Vec::with_capacity(bins * bins + 1);
    for a in &px {
        for b in &py {
            probs.push(a * b);
        }
    }
    let inside: f64 = probs.iter().sum();
    probs.push((1.0 - inside).max(0.0));
    probs
}

/// Counts of 2-D points in the same layout as [`gaussian_grid_probs`].
pub fn grid_counts(points: &[Vec<f64>], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins * bins + 1];
    let w = (hi - lo) / bins as f64;
    for p in points {
        let (x, y) = (p[0], p[1]);
        if x < lo || x >= hi || y < lo || y >= hi {
            counts[bins * bins] += 1;
            continue;
        }
        let i = (((x - lo) / w) as usize).min(bins - 1);
        let j = (((y - lo) / w) as usize).min(bins - 1);
        counts[i * bins + j] += 1;
    }
    counts
}

/// Result of the accept-reject fidelity check.
#[derive(Debug, Clone, Copy)]
pub struct SamplerFidelity {
    pub draws: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    /// `1 / M`.
    pub expected_rate: f64,
    pub chi2: ChiSquaredTest,
}

impl SamplerFidelity {
    /// Acceptance rate within `rel_tol` of `1 / M` (relative) and the
    /// goodness-of-fit test passing.
    pub fn passes(&self, rel_tol: f64) -> bool {
        (self.acceptance_rate - self.expected_rate).abs() <= rel_tol * self.expected_rate
            && self.chi2.passes()
    }
}

/// Proposal `N(0, 4 I)`, target `N((0.5, 0.5), I)` in two dimensions. Per
/// coordinate the ratio `2 exp(-(x - 0.5)^2 / 2 + x^2 / 8)` peaks at
/// `x = 2/3` with value `2 exp(1/24)`, so `M = 4 exp(1/12)`.
pub const FIDELITY_TARGET_MEAN: [f64; 2] = [0.5, 0.5];

pub fn fidelity_envelope() -> f64 {
    (2.0 * (1.0f64 / 24.0).exp()).powi(2)
}

/// Run `n_draws` proposals through the sampler and test the accepted points
/// against the target on a 10 x 10 grid over `[-4, 4]^2` at level `alpha`.
pub fn sampler_fidelity(n_draws: usize, alpha: f64, seed: u64) -> crate::error::Result<SamplerFidelity> {
    let proposal = rand_distr::Normal::new(0.0, 2.0).expect("valid sigma");
    let mu = FIDELITY_TARGET_MEAN;
    let ratio = |x: &[f64]| {
        crate::datagen::gaussian_pdf(x, &mu, 1.0) / crate::datagen::gaussian_pdf(x, &[0.0, 0.0], 2.0)
    };
    let m = fidelity_envelope();
    let out = crate::datagen::rejection_filter(
        |rng| vec![proposal.sample(rng), proposal.sample(rng)],
        ratio,
        m,
        n_draws,
        seed,
    )?;
    let probs = gaussian_grid_probs(mu, 1.0, -4.0, 4.0, 10);
    let counts = grid_counts(&out.samples, -4.0, 4.0, 10);
    Ok(SamplerFidelity {
        draws: out.draws,
        accepted: out.samples.len(),
        acceptance_rate: out.acceptance_rate(),
        expected_rate: 1.0 / m,
        chi2: chi_squared_gof(&counts, &probs, alpha),
    })
}
