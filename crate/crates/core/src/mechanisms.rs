//! Recommenders over a utility vector: the non-private optimum, the
//! exponential and Laplace (noisy argmax) mechanisms, and linear smoothing
//! toward the uniform distribution.
//!
//! Every distribution is keyed by the same candidate ids as the utility
//! vector it came from. Argmax ties go to the lowest node id.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::graph::NodeId;
use crate::quadrature;
use crate::utility::UtilityVector;

/// Largest candidate set accepted by [`laplace_distribution`].
pub const MAX_LAPLACE_CANDIDATES: usize = 64;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    delta_f: f64,
    seed: u64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta_f: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return domain(format!("epsilon must be positive and finite, got {epsilon}"));
        }
        if !(delta_f > 0.0 && delta_f.is_finite()) {
            return domain(format!("delta_f must be positive and finite, got {delta_f}"));
        }
        Ok(PrivacyParams { epsilon, delta_f, seed })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        PrivacyParams { seed, ..self }
    }

    /// Scale `Δf / ε` of the Laplace noise.
    pub fn laplace_scale(&self) -> f64 {
        self.delta_f / self.epsilon
    }
}

/// Mixes a base seed with a key into an independent-looking 64-bit seed
/// (SplitMix64 finalizer). Used for per-target and per-trial substreams.
pub fn derive_seed(base: u64, key: u64) -> u64 {
    let mut z = base ^ key.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Probability of recommending each candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationDistribution {
    nodes: Vec<NodeId>,
    probs: Vec<f64>,
}

impl RecommendationDistribution {
    pub fn new(nodes: Vec<NodeId>, probs: Vec<f64>) -> Result<Self> {
        if nodes.len() != probs.len() {
            return domain("node and probability lists differ in length");
        }
        if nodes.is_empty() {
            return Err(Error::NoCandidates);
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return domain("negative or NaN probability");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return domain(format!("probabilities sum to {total}"));
        }
        Ok(RecommendationDistribution { nodes, probs })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, node: NodeId) -> Option<f64> {
        self.nodes.binary_search(&node).ok().map(|i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.nodes.iter().copied().zip(self.probs.iter().copied())
    }
}

fn require_candidates(u: &UtilityVector) -> Result<()> {
    if u.is_empty() {
        Err(Error::NoCandidates)
    } else {
        Ok(())
    }
}

/// Point mass on the lowest-id candidate of maximum utility.
pub fn best_recommendation(u: &UtilityVector) -> Result<RecommendationDistribution> {
    let best = u.argmax().ok_or(Error::NoCandidates)?;
    let mut probs = vec![0.0; u.len()];
    probs[best] = 1.0;
    RecommendationDistribution::new(u.nodes().to_vec(), probs)
}

/// `p_i ∝ exp(ε u_i / Δf)`, evaluated with the maximum exponent shifted to 0.
pub fn exponential_distribution(u: &UtilityVector, p: &PrivacyParams) -> Result<RecommendationDistribution> {
    require_candidates(u)?;
    let scale = p.epsilon / p.delta_f;
    let shift = scale * u.u_max();
    let weights: Vec<f64> = u.values().iter().map(|&x| (scale * x - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| w / total).collect();
    RecommendationDistribution::new(u.nodes().to_vec(), probs)
}

/// One draw from Laplace(0, scale) by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let v: f64 = rng.sample(Open01);
    let centered = v - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// Adds independent Laplace(Δf/ε) noise to every utility and returns the
/// candidate with the largest noisy value.
pub fn laplace_sample<R: Rng + ?Sized>(u: &UtilityVector, p: &PrivacyParams, rng: &mut R) -> Result<NodeId> {
    require_candidates(u)?;
    let scale = p.laplace_scale();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, &x) in u.values().iter().enumerate() {
        let noisy = x + sample_laplace(rng, scale);
        if noisy > best.0 {
            best = (noisy, i);
        }
    }
    Ok(u.nodes()[best.1])
}

fn laplace_pdf(x: f64, scale: f64) -> f64 {
    (-x.abs() / scale).exp() / (2.0 * scale)
}

fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

/// Exact win probabilities of the Laplace mechanism,
/// `p_i = ∫ f(x - u_i) Π_{j≠i} F(x - u_j) dx`, by piecewise adaptive
/// quadrature between the utility breakpoints. Each entry is accurate to
/// well within `tol`.
pub fn laplace_distribution(u: &UtilityVector, p: &PrivacyParams, tol: f64) -> Result<RecommendationDistribution> {
    require_candidates(u)?;
    if u.len() > MAX_LAPLACE_CANDIDATES {
        return Err(Error::TooLarge {
            what: "candidate count",
            actual: u.len(),
            limit: MAX_LAPLACE_CANDIDATES,
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return domain(format!("tol must lie in (0, 1), got {tol}"));
    }
    let n = u.len();
    if n == 1 {
        return RecommendationDistribution::new(u.nodes().to_vec(), vec![1.0]);
    }
    let scale = p.laplace_scale();
    let values = u.values();
    // Truncating at ±window beyond the utilities drops at most tail_mass
    // from each entry.
    let tail_mass = tol * 1e-3;
    let window = scale * (1.0 / tail_mass).ln();

    let mut breaks: Vec<f64> = values.to_vec();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let lo = breaks[0] - window;
    let hi = breaks[breaks.len() - 1] + window;
    let mut points = vec![lo];
    points.extend(&breaks);
    points.push(hi);

    let seg_tol = tail_mass / points.len() as f64;
    let mut prefix = vec![1.0; n + 1];
    let mut integrand = |x: f64, out: &mut [f64]| {
        for j in 0..n {
            prefix[j + 1] = prefix[j] * laplace_cdf(x - values[j], scale);
        }
        let mut suffix = 1.0;
        for i in (0..n).rev() {
            out[i] = laplace_pdf(x - values[i], scale) * prefix[i] * suffix;
            suffix *= laplace_cdf(x - values[i], scale);
        }
    };
    let mut probs = vec![0.0; n];
    for w in points.windows(2) {
        let part = quadrature::integrate(&mut integrand, w[0], w[1], n, seg_tol);
        for (acc, v) in probs.iter_mut().zip(part) {
            *acc += v;
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v = (*v / total).max(0.0));
    RecommendationDistribution::new(u.nodes().to_vec(), probs)
}

/// Probability that the higher of two utilities wins under unit-sensitivity
/// Laplace noise: `1 - ½e^{-z} - z/(4e^{z})` with `z = ε·du`.
///
/// For sensitivity Δf pass `du / Δf`.
pub fn laplace_two_node_probability(du: f64, epsilon: f64) -> Result<f64> {
    if !(du >= 0.0) {
        return domain(format!("utility gap must be non-negative, got {du}"));
    }
    if !(epsilon > 0.0) {
        return domain(format!("epsilon must be positive, got {epsilon}"));
    }
    let z = epsilon * du;
    Ok(1.0 - (-z).exp() * (0.5 + 0.25 * z))
}

/// Mixes `base` with the uniform distribution: `p''_i = (1-x)/n + x p_i`.
pub fn smoothing_distribution(base: &RecommendationDistribution, x: f64) -> Result<RecommendationDistribution> {
    check_mix_weight(x)?;
    let floor = (1.0 - x) / base.len() as f64;
    let probs = base.probs().iter().map(|&q| floor + x * q).collect();
    RecommendationDistribution::new(base.nodes().to_vec(), probs)
}

fn check_mix_weight(x: f64) -> Result<()> {
    if !(0.0..1.0).contains(&x) {
        return domain(format!("smoothing weight must lie in [0, 1), got {x}"));
    }
    Ok(())
}

/// Privacy level of smoothing with weight `x` over `n` candidates:
/// `ln(1 + n x / (1 - x))`.
pub fn smoothing_epsilon(x: f64, n: usize) -> Result<f64> {
    check_mix_weight(x)?;
    if n == 0 {
        return Err(Error::NoCandidates);
    }
    Ok((n as f64 * x / (1.0 - x)).ln_1p())
}

/// Inverse of [`smoothing_epsilon`]: the weight giving exactly `epsilon`.
pub fn smoothing_x(epsilon: f64, n: usize) -> Result<f64> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return domain(format!("epsilon must be finite and non-negative, got {epsilon}"));
    }
    if n == 0 {
        return Err(Error::NoCandidates);
    }
    let a = epsilon.exp_m1();
    Ok(a / (a + n as f64))
}

/// `Σ u_i p_i / u_max`.
pub fn expected_accuracy(d: &RecommendationDistribution, u: &UtilityVector) -> Result<f64> {
    if d.nodes() != u.nodes() {
        return Err(Error::Precondition("distribution and utility vector have different candidates".into()));
    }
    if u.u_max() <= 0.0 {
        return Err(Error::Skip("no candidate has positive utility".into()));
    }
    let total: f64 = d.probs().iter().zip(u.values()).map(|(p, x)| p * x).sum();
    Ok((total / u.u_max()).clamp(0.0, 1.0))
}

/// Distinct utility values with their multiplicities.
fn utility_groups(u: &UtilityVector) -> Vec<(f64, u32)> {
    let mut sorted = u.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, u32)> = Vec::new();
    for v in sorted {
        match groups.last_mut() {
            Some((g, m)) if *g == v => *m += 1,
            _ => groups.push((v, 1)),
        }
    }
    groups
}

/// Maximum of `m` independent Laplace(scale) draws, sampled directly by
/// inverting `F(x)^m`.
fn sample_laplace_max<R: Rng + ?Sized>(rng: &mut R, scale: f64, m: u32) -> f64 {
    let v: f64 = rng.sample(Open01);
    let log_w = v.ln() / m as f64;
    let w = log_w.exp();
    if w < 0.5 {
        scale * (2.0 * w).ln()
    } else {
        -scale * (-2.0 * log_w.exp_m1()).ln()
    }
}

/// Utility obtained by one run of the Laplace mechanism.
///
/// Candidates of equal utility are interchangeable for accuracy, so each
/// group's best noisy value is drawn in one step; the winning utility has
/// the same law as in [`laplace_sample`].
fn laplace_trial_utility<R: Rng + ?Sized>(groups: &[(f64, u32)], scale: f64, rng: &mut R) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &(value, m) in groups {
        let noisy = value + sample_laplace_max(rng, scale, m);
        if noisy > best.0 {
            best = (noisy, value);
        }
    }
    best.1
}

/// Mean accuracy over `trials` independent runs of the Laplace mechanism.
/// Trial `k` draws from a stream seeded by `(p.seed(), k)`.
pub fn monte_carlo_accuracy(u: &UtilityVector, p: &PrivacyParams, trials: usize) -> Result<f64> {
    if trials == 0 {
        return domain("trials must be positive");
    }
    require_candidates(u)?;
    if u.u_max() <= 0.0 {
        return Err(Error::Skip("no candidate has positive utility".into()));
    }
    let groups = utility_groups(u);
    let scale = p.laplace_scale();
    let total: f64 = (0..trials as u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, k));
            laplace_trial_utility(&groups, scale, &mut rng)
        })
        .sum();
    Ok(total / trials as f64 / u.u_max())
}
