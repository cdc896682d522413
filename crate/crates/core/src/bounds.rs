//! Privacy/accuracy trade-off calculators.
//!
//! Notation: `n` candidates, of which `k` are "high utility" (above
//! `(1-c)·u_max`), and `t` edge alterations suffice to promote a low-utility
//! candidate to the unique maximum.

use crate::error::{domain, Error, Result};
use crate::utility::{UtilityKind, UtilityVector};

/// A lower bound on ε, or the statement that the inputs do not constrain ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonBound {
    AtLeast(f64),
    NoConstraint,
}

impl EpsilonBound {
    fn from_value(v: f64) -> Self {
        if v > 0.0 {
            EpsilonBound::AtLeast(v)
        } else {
            EpsilonBound::NoConstraint
        }
    }

    /// The bound as a number, with "no constraint" read as 0.
    pub fn value(&self) -> f64 {
        match *self {
            EpsilonBound::AtLeast(v) => v,
            EpsilonBound::NoConstraint => 0.0,
        }
    }
}

/// Inputs shared by the generic trade-off bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: u64,
    pub k: u64,
    pub c: f64,
    pub t: u64,
}

impl BoundInputs {
    pub fn new(n: u64, k: u64, c: f64, t: u64) -> Result<Self> {
        if k >= n {
            return domain(format!("need k < n, got k={k}, n={n}"));
        }
        // c = 1 is the limit of the high/low split when the low group is
        // exactly the zero-utility candidates.
        if !(c > 0.0 && c <= 1.0) {
            return domain(format!("c must lie in (0, 1], got {c}"));
        }
        if t == 0 {
            return domain("t must be at least 1");
        }
        Ok(BoundInputs { n, k, c, t })
    }
}

/// Smallest ε compatible with accuracy `1 - delta`:
/// `(ln((c-δ)/δ) + ln((n-k)/(k+1))) / t`.
pub fn epsilon_lower_bound(b: &BoundInputs, delta: f64) -> Result<EpsilonBound> {
    if !(delta > 0.0) {
        return domain(format!("delta must be positive, got {delta}"));
    }
    if delta >= b.c {
        return domain(format!("delta={delta} must be below c={}", b.c));
    }
    let n_low = (b.n - b.k) as f64;
    let ratio = ((b.c - delta) / delta).ln() + (n_low / (b.k + 1) as f64).ln();
    Ok(EpsilonBound::from_value(ratio / b.t as f64))
}

/// Best accuracy any ε-private monotone recommender can guarantee:
/// `1 - c(n-k) / (n-k + (k+1)e^{εt})`, capped at 1.
pub fn accuracy_upper_bound(b: &BoundInputs, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return domain(format!("epsilon must be non-negative, got {epsilon}"));
    }
    let n_low = (b.n - b.k) as f64;
    // (k+1)e^{εt}/(n-k) computed in log space; exp overflow reads as 1.
    let log_odds = ((b.k + 1) as f64 / n_low).ln() + epsilon * b.t as f64;
    let bound = 1.0 - b.c / (1.0 + log_odds.exp());
    Ok(bound.min(1.0))
}

/// Number of edits that promote a candidate to the top, as used for
/// experiment bounds: `u_max + 1 + [u_max = d_r]` for common neighbors and
/// `floor(u_max) + 2` for weighted paths.
pub fn t_formula(kind: UtilityKind, u_max: f64, d_r: usize) -> Result<u64> {
    if !(u_max > 0.0) {
        return Err(Error::Skip("no candidate has positive utility".into()));
    }
    match kind {
        UtilityKind::CommonNeighbors => {
            if u_max.fract() != 0.0 {
                return domain(format!("common-neighbor utilities are integers, got {u_max}"));
            }
            let top = u_max as u64;
            Ok(top + 1 + u64::from(top == d_r as u64))
        }
        UtilityKind::WeightedPaths => Ok(u_max.floor() as u64 + 2),
    }
}

/// Outcome of [`tightest_accuracy_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightBound {
    pub accuracy: f64,
    /// `(c, k)` attaining the minimum; `None` when no split is admissible
    /// and the bound is reported as unconstrained (1).
    pub split: Option<(f64, u64)>,
}

/// Minimum of [`accuracy_upper_bound`] over the admissible high/low splits
/// of `u`.
///
/// Candidate thresholds are `c = 1 - u/u_max` for every distinct utility
/// `u < u_max` (the split just above `u`), plus `c = 1 - 1/ln n`. The
/// candidate count plays the role of `n`.
pub fn tightest_accuracy_bound(u: &UtilityVector, t: u64, epsilon: f64) -> Result<TightBound> {
    let u_max = u.u_max();
    if !(u_max > 0.0) {
        return Err(Error::Skip("no candidate has positive utility".into()));
    }
    let n = u.len() as u64;
    let mut sorted = u.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let count_above = |threshold: f64| sorted.partition_point(|&v| v > threshold) as u64;

    let mut splits: Vec<(f64, u64)> = Vec::new();
    let mut distinct = sorted.clone();
    distinct.dedup();
    for &v in distinct.iter().filter(|&&v| v < u_max) {
        splits.push((1.0 - v / u_max, count_above(v)));
    }
    let ln_n = (n as f64).ln();
    if ln_n > 1.0 {
        let c = 1.0 - 1.0 / ln_n;
        splits.push((c, count_above((1.0 - c) * u_max)));
    }

    let mut best = TightBound {
        accuracy: 1.0,
        split: None,
    };
    for (c, k) in splits {
        if k == 0 || k >= n || c <= 0.0 {
            continue;
        }
        let bound = accuracy_upper_bound(&BoundInputs::new(n, k, c, t)?, epsilon)?;
        if bound < best.accuracy {
            best = TightBound {
                accuracy: bound,
                split: Some((c, k)),
            };
        }
    }
    Ok(best)
}

/// Which edit-count bound feeds the finite-n ε evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticMode {
    /// `d` is `t` itself.
    Lemma2,
    /// Any utility: `t ≤ 4 d_max`, `d` is `d_max`.
    Theorem1,
    /// Common neighbors: `t ≤ d_r + 2`, `d` is `d_r`.
    Theorem2,
    /// Weighted paths with `s = γ d_max`: `t ≤ (2c - 1) d_r` where `c` is
    /// the smallest root above 1 of `s c² + (3s - 1) c + 1 = 0`.
    Theorem3,
}

/// Smallest root greater than 1 of `s c² + (3s - 1) c + 1 = 0`, i.e. the
/// least `c` with `c - 1 ≥ (c + 1)² s / (1 - s)`.
pub fn weighted_paths_stretch(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("s must lie in (0, 1), got {s}"));
    }
    let b = 3.0 * s - 1.0;
    let disc = b * b - 4.0 * s;
    if disc < 0.0 {
        return Err(Error::Unsupported(format!("no bound derivable at s={s}: quadratic has no real root")));
    }
    // numerically stable smaller root
    let q = -0.5 * (b - disc.sqrt());
    let (r1, r2) = (q / s, 1.0 / q);
    let root = [r1, r2]
        .into_iter()
        .filter(|&r| r > 1.0)
        .fold(f64::INFINITY, f64::min);
    if root.is_finite() {
        Ok(root)
    } else {
        Err(Error::Unsupported(format!("no bound derivable at s={s}: no root above 1")))
    }
}

/// `(ln n - ln β - ln ln n) / T` with `T` chosen by `mode`.
pub fn asymptotic_epsilon(mode: AsymptoticMode, n: u64, beta: u64, d: u64, s: f64) -> Result<EpsilonBound> {
    if n < 3 {
        return domain(format!("n must be at least 3, got {n}"));
    }
    if beta == 0 || d == 0 {
        return domain("beta and d must be at least 1");
    }
    let d = d as f64;
    let edits = match mode {
        AsymptoticMode::Lemma2 => d,
        AsymptoticMode::Theorem1 => 4.0 * d,
        AsymptoticMode::Theorem2 => d + 2.0,
        AsymptoticMode::Theorem3 => (2.0 * weighted_paths_stretch(s)? - 1.0) * d,
    };
    let nf = n as f64;
    let numerator = nf.ln() - (beta as f64).ln() - nf.ln().ln();
    Ok(EpsilonBound::from_value(numerator / edits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn headline() -> BoundInputs {
        BoundInputs::new(400_000_000, 100, 0.99, 150).unwrap()
    }

    #[test]
    fn headline_accuracy_bound() {
        let acc = accuracy_upper_bound(&headline(), 0.1).unwrap();
        assert!((acc - 0.46).abs() < 0.005, "{acc}");
    }

    #[test]
    fn headline_epsilon_bound() {
        let eps = epsilon_lower_bound(&headline(), 0.54).unwrap().value();
        assert!((eps - 0.100).abs() < 5e-4, "{eps}");
    }

    #[test]
    fn vacuous_epsilon_bounds() {
        assert!(epsilon_lower_bound(&headline(), 0.99).is_err());
        assert!(epsilon_lower_bound(&headline(), 1.2).is_err());
        let near = epsilon_lower_bound(&headline(), 0.99 * (1.0 - 1e-12)).unwrap();
        assert_eq!(near, EpsilonBound::NoConstraint);
        // n = k + 2, δ = c/2, t = 1: ln(1/(k+1)) < 0
        let b = BoundInputs::new(12, 10, 0.5, 1).unwrap();
        assert_eq!(epsilon_lower_bound(&b, 0.25).unwrap(), EpsilonBound::NoConstraint);
    }

    #[test]
    fn degenerate_accuracy_bounds() {
        let n = 1000;
        let b = BoundInputs::new(n, 0, 1.0, 1).unwrap();
        let acc = accuracy_upper_bound(&b, 0.0).unwrap();
        assert!((acc - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        assert_eq!(accuracy_upper_bound(&headline(), 1e6).unwrap(), 1.0);
        assert!(accuracy_upper_bound(&headline(), -1.0).is_err());
    }

    #[test]
    fn input_validation() {
        assert!(BoundInputs::new(10, 10, 0.5, 1).is_err());
        assert!(BoundInputs::new(10, 1, 0.0, 1).is_err());
        assert!(BoundInputs::new(10, 1, 1.5, 1).is_err());
        assert!(BoundInputs::new(10, 1, 0.5, 0).is_err());
    }

    #[test]
    fn t_formula_cases() {
        assert_eq!(t_formula(UtilityKind::CommonNeighbors, 2.0, 3).unwrap(), 3);
        assert_eq!(t_formula(UtilityKind::CommonNeighbors, 2.0, 2).unwrap(), 4);
        assert_eq!(t_formula(UtilityKind::WeightedPaths, 2.5, 7).unwrap(), 4);
        assert!(matches!(t_formula(UtilityKind::WeightedPaths, 0.0, 7), Err(Error::Skip(_))));
        assert!(t_formula(UtilityKind::CommonNeighbors, 1.5, 3).is_err());
    }

    #[test]
    fn tightest_bound_single_positive_utility() {
        let mut prev = 1.0;
        for n in [4usize, 10, 100, 1000] {
            let mut vals = vec![0.0; n];
            vals[0] = 5.0;
            let u = UtilityVector::from_values(&vals).unwrap();
            let tb = tightest_accuracy_bound(&u, 6, 1.0).unwrap();
            assert!(tb.accuracy < 1.0);
            assert_eq!(tb.split.unwrap().1, 1);
            assert!(tb.accuracy < prev);
            prev = tb.accuracy;
        }
    }

    #[test]
    fn tightest_bound_all_equal_is_unconstrained() {
        let u = UtilityVector::from_values(&[3.0; 8]).unwrap();
        let tb = tightest_accuracy_bound(&u, 4, 1.0).unwrap();
        assert_eq!(tb, TightBound { accuracy: 1.0, split: None });
        let z = UtilityVector::from_values(&[0.0; 3]).unwrap();
        assert!(matches!(tightest_accuracy_bound(&z, 4, 1.0), Err(Error::Skip(_))));
    }

    #[test]
    fn tightest_bound_is_monotone_in_epsilon() {
        let u = UtilityVector::from_values(&[4.0, 3.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let at = |e| tightest_accuracy_bound(&u, 5, e).unwrap().accuracy;
        assert!(at(3.0) >= at(1.0) && at(1.0) >= at(0.5));
    }

    #[test]
    fn asymptotic_examples() {
        let l2 = asymptotic_epsilon(AsymptoticMode::Lemma2, 1_000_000, 10, 20, 0.0).unwrap().value();
        assert!((l2 - 0.444).abs() < 5e-4, "{l2}");

        let c = weighted_paths_stretch(0.1).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
        // at equality c - 1 = (c + 1)² s / (1 - s)
        assert!(((c - 1.0) - (c + 1.0).powi(2) * 0.1 / 0.9).abs() < 1e-12);
        let t3 = asymptotic_epsilon(AsymptoticMode::Theorem3, 1_000_000, 10, 20, 0.1).unwrap().value();
        let l2_3d = asymptotic_epsilon(AsymptoticMode::Lemma2, 1_000_000, 10, 60, 0.0).unwrap().value();
        assert!((t3 - l2_3d).abs() < 1e-12);

        for (n, beta, d) in [(1000u64, 2u64, 5u64), (1 << 30, 50, 40)] {
            let t2 = asymptotic_epsilon(AsymptoticMode::Theorem2, n, beta, d, 0.0).unwrap();
            let l2 = asymptotic_epsilon(AsymptoticMode::Lemma2, n, beta, d + 2, 0.0).unwrap();
            assert_eq!(t2, l2);
            let t1 = asymptotic_epsilon(AsymptoticMode::Theorem1, n, beta, d, 0.0).unwrap();
            assert_eq!(t1, asymptotic_epsilon(AsymptoticMode::Lemma2, n, beta, 4 * d, 0.0).unwrap());
        }

        assert!(matches!(weighted_paths_stretch(0.2), Err(Error::Unsupported(_))));
        assert!((weighted_paths_stretch(1.0 / 9.0).unwrap() - 3.0).abs() < 1e-6);
        assert!(asymptotic_epsilon(AsymptoticMode::Lemma2, 2, 1, 1, 0.0).is_err());
        assert_eq!(
            asymptotic_epsilon(AsymptoticMode::Lemma2, 100, 100, 1, 0.0).unwrap(),
            EpsilonBound::NoConstraint
        );
    }

    proptest! {
        #[test]
        fn epsilon_and_accuracy_bounds_are_dual(
            n in 10u64..1_000_000_000,
            k_frac in 0.0f64..0.5,
            c in 0.05f64..1.0,
            t in 1u64..200,
            eps in 0.001f64..0.5,
        ) {
            let k = ((n as f64) * k_frac) as u64;
            let b = BoundInputs::new(n, k, c, t).unwrap();
            let acc = accuracy_upper_bound(&b, eps).unwrap();
            let delta = 1.0 - acc;
            prop_assume!(delta > 1e-6 && delta < c * (1.0 - 1e-6));
            let back = epsilon_lower_bound(&b, delta).unwrap().value();
            // relative conditioning of δ ↦ ε is ~ c/(tδ(c−δ)) · ulp(δ)
            let slack = 1e-9f64.max(4.0 * f64::EPSILON * c / (t as f64 * delta * (c - delta)));
            prop_assert!((back - eps).abs() <= slack, "{back} vs {eps}");
        }

        #[test]
        fn accuracy_bound_monotonicity(
            n in 10u64..1_000_000,
            k in 0u64..9,
            c in 0.05f64..1.0,
            t in 1u64..50,
            eps in 0.0f64..2.0,
            bump in 0.0f64..1.0,
        ) {
            let base = accuracy_upper_bound(&BoundInputs::new(n, k, c, t).unwrap(), eps).unwrap();
            prop_assert!(accuracy_upper_bound(&BoundInputs::new(n, k, c, t).unwrap(), eps + bump).unwrap() >= base);
            prop_assert!(accuracy_upper_bound(&BoundInputs::new(n, k, c, t + 1).unwrap(), eps).unwrap() >= base);
            prop_assert!(accuracy_upper_bound(&BoundInputs::new(n + 1000, k, c, t).unwrap(), eps).unwrap() <= base);
        }
    }
}
