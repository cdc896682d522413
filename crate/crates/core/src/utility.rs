//! Link-analysis utilities: candidate sets, common neighbors, truncated
//! weighted walks, and sensitivity bounds for both.
//!
//! Directed graphs are always read along out-edges from the target: a
//! candidate `i` shares a neighbor `w` with `r` when `r -> w -> i`.

use crate::error::{domain, Error, Result};
use crate::graph::{Graph, NodeId};

/// Longest walk length for which a sensitivity bound is available.
pub const MAX_CERTIFIED_PATH_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtilityKind {
    CommonNeighbors,
    WeightedPaths,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityConfig {
    CommonNeighbors,
    /// `sum_{l=2..=max_path_len} gamma^(l-2) * walks_l(r, i)`.
    WeightedPaths { gamma: f64, max_path_len: usize },
}

impl UtilityConfig {
    pub fn weighted_paths(gamma: f64, max_path_len: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return domain(format!("gamma must be a finite non-negative number, got {gamma}"));
        }
        if max_path_len < 2 {
            return domain(format!("max_path_len must be at least 2, got {max_path_len}"));
        }
        Ok(UtilityConfig::WeightedPaths { gamma, max_path_len })
    }

    pub fn kind(&self) -> UtilityKind {
        match self {
            UtilityConfig::CommonNeighbors => UtilityKind::CommonNeighbors,
            UtilityConfig::WeightedPaths { .. } => UtilityKind::WeightedPaths,
        }
    }
}

/// Utilities of every candidate for one target, keyed by ascending node id.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector {
    target: NodeId,
    nodes: Vec<NodeId>,
    values: Vec<f64>,
    u_max: f64,
}

impl UtilityVector {
    /// Builds a vector from `(node, utility)` entries. Entries may come in
    /// any order but node ids must be distinct and utilities finite and
    /// non-negative.
    pub fn new(target: NodeId, mut entries: Vec<(NodeId, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(v, _)| v);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return domain("duplicate candidate in utility vector");
        }
        if let Some(&(v, u)) = entries.iter().find(|&&(_, u)| !(u >= 0.0 && u.is_finite())) {
            return domain(format!("utility of node {v} is {u}; must be finite and >= 0"));
        }
        let (nodes, values): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Ok(Self::from_parts(target, nodes, values))
    }

    /// Convenience for tests and bindings: candidates are `0..values.len()`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(usize::MAX, values.iter().copied().enumerate().collect())
    }

    fn from_parts(target: NodeId, nodes: Vec<NodeId>, values: Vec<f64>) -> Self {
        let u_max = values.iter().copied().fold(0.0, f64::max);
        UtilityVector {
            target,
            nodes,
            values,
            u_max,
        }
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest utility; 0 for an empty vector.
    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn get(&self, node: NodeId) -> Option<f64> {
        self.nodes.binary_search(&node).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    /// Index (into `nodes()`) of the lowest-id node attaining `u_max`.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &u) in self.values.iter().enumerate() {
            if best.is_none_or(|b| u > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Sum of absolute differences over the shared key set.
    pub fn l1_distance(&self, other: &UtilityVector) -> Result<f64> {
        if self.nodes != other.nodes {
            return Err(Error::Precondition("utility vectors have different candidate sets".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

fn check_target(g: &Graph, r: NodeId) -> Result<()> {
    if r >= g.node_count() {
        return domain(format!("target {r} out of range for {} nodes", g.node_count()));
    }
    Ok(())
}

/// Boolean mask of nodes that cannot be recommended to `r`.
fn excluded_mask(g: &Graph, r: NodeId) -> Vec<bool> {
    let mut mask = vec![false; g.node_count()];
    mask[r] = true;
    for &w in g.out_neighbors(r) {
        mask[w] = true;
    }
    mask
}

/// Every node other than `r` that `r` does not already link to.
pub fn candidate_set(g: &Graph, r: NodeId) -> Result<Vec<NodeId>> {
    check_target(g, r)?;
    let mask = excluded_mask(g, r);
    Ok((0..g.node_count()).filter(|&v| !mask[v]).collect())
}

fn restrict_to_candidates(g: &Graph, r: NodeId, scores: &[f64]) -> UtilityVector {
    let mask = excluded_mask(g, r);
    let nodes: Vec<NodeId> = (0..g.node_count()).filter(|&v| !mask[v]).collect();
    let values = nodes.iter().map(|&v| scores[v]).collect();
    UtilityVector::from_parts(r, nodes, values)
}

/// `u_i = |N(r) ∩ N(i)|`, counted by a two-hop expansion from `r`.
pub fn common_neighbors_utility(g: &Graph, r: NodeId) -> Result<UtilityVector> {
    check_target(g, r)?;
    let mut counts = vec![0.0; g.node_count()];
    for &w in g.out_neighbors(r) {
        for &i in g.out_neighbors(w) {
            counts[i] += 1.0;
        }
    }
    Ok(restrict_to_candidates(g, r, &counts))
}

/// Truncated Katz-style score over walks of length `2..=max_path_len`.
pub fn weighted_paths_utility(g: &Graph, r: NodeId, cfg: UtilityConfig) -> Result<UtilityVector> {
    let UtilityConfig::WeightedPaths { gamma, max_path_len } = cfg else {
        return Err(Error::Precondition("weighted_paths_utility needs a weighted-paths config".into()));
    };
    check_target(g, r)?;
    let n = g.node_count();
    let mut walks = vec![0.0; n];
    walks[r] = 1.0;
    let mut next = vec![0.0; n];
    let mut scores = vec![0.0; n];
    for len in 1..=max_path_len {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (v, &count) in walks.iter().enumerate() {
            if count != 0.0 {
                for &w in g.out_neighbors(v) {
                    next[w] += count;
                }
            }
        }
        std::mem::swap(&mut walks, &mut next);
        if len >= 2 {
            let weight = gamma.powi(len as i32 - 2);
            for (s, &c) in scores.iter_mut().zip(&walks) {
                *s += weight * c;
            }
        }
    }
    Ok(restrict_to_candidates(g, r, &scores))
}

pub fn utility_vector(g: &Graph, r: NodeId, cfg: UtilityConfig) -> Result<UtilityVector> {
    match cfg {
        UtilityConfig::CommonNeighbors => common_neighbors_utility(g, r),
        UtilityConfig::WeightedPaths { .. } => weighted_paths_utility(g, r, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityBasis {
    Exact,
    Conservative,
}

/// L1 sensitivity of a utility vector under one non-incident edge edit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBound {
    pub delta_f: f64,
    pub basis: SensitivityBasis,
}

/// Δf for the given utility at target `r`.
///
/// Common neighbors: one edit not touching `r` changes at most one
/// candidate's count, by one. Weighted paths (length ≤ 3): the two-hop part
/// contributes 1 and the new three-walks through the edited edge number at
/// most `d_max + d_r` per endpoint, giving `1 + 2γ(d_max + d_r)`.
pub fn sensitivity_bound(cfg: UtilityConfig, g: &Graph, r: NodeId) -> Result<SensitivityBound> {
    check_target(g, r)?;
    match cfg {
        UtilityConfig::CommonNeighbors => Ok(SensitivityBound {
            delta_f: 1.0,
            basis: SensitivityBasis::Exact,
        }),
        UtilityConfig::WeightedPaths { max_path_len, .. } if max_path_len > MAX_CERTIFIED_PATH_LEN => {
            Err(Error::Unsupported(format!(
                "no sensitivity bound for walks longer than {MAX_CERTIFIED_PATH_LEN} (got {max_path_len})"
            )))
        }
        UtilityConfig::WeightedPaths { gamma, .. } => {
            let spread = (g.max_degree() + g.degree(r)) as f64;
            Ok(SensitivityBound {
                delta_f: 1.0 + 2.0 * gamma * spread,
                basis: if gamma == 0.0 {
                    SensitivityBasis::Exact
                } else {
                    SensitivityBasis::Conservative
                },
            })
        }
    }
}

/// Smallest number of top candidates holding at least `fraction` of the
/// total utility mass. `None` when the total mass is zero.
pub fn concentration(u: &UtilityVector, fraction: f64) -> Result<Option<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("fraction must lie in (0, 1], got {fraction}"));
    }
    let total: f64 = u.values().iter().sum();
    if total <= 0.0 {
        return Ok(None);
    }
    let mut sorted = u.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let goal = fraction * total;
    let mut acc = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        // tolerate rounding when fraction = 1
        if acc >= goal * (1.0 - 1e-12) {
            return Ok(Some(i + 1));
        }
    }
    Ok(Some(sorted.len()))
}
