//! Per-target accuracy experiments: sample targets, score every candidate,
//! evaluate the private mechanisms against the trade-off bound, and
//! tabulate the results as CDFs and degree curves.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{t_formula, tightest_accuracy_bound};
use crate::error::{domain, Error, Result};
use crate::graph::{load_edge_list, Graph, NodeId};
use crate::mechanisms::{
    derive_seed, expected_accuracy, exponential_distribution, monte_carlo_accuracy, smoothing_x, PrivacyParams,
};
use crate::utility::{sensitivity_bound, utility_vector, UtilityConfig, UtilityVector};

/// Default number of Laplace trials per target.
pub const DEFAULT_TRIALS: usize = 1000;
/// γ values used for weighted-paths sweeps.
pub const DEFAULT_GAMMAS: [f64; 3] = [0.05, 0.005, 0.0005];

pub const CSV_HEADER: &str = "target,degree,u_max,t,epsilon,exp_acc,laplace_acc,bound_acc,skipped,reason";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismKind {
    Exponential,
    Laplace,
    Smoothing,
}

impl MechanismKind {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismKind::Exponential => "exponential",
            MechanismKind::Laplace => "laplace",
            MechanismKind::Smoothing => "smoothing",
        }
    }
}

/// A column of per-target accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Mechanism(MechanismKind),
    Bound,
}

impl Series {
    pub fn name(&self) -> &'static str {
        match self {
            Series::Mechanism(m) => m.name(),
            Series::Bound => "bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph_path: PathBuf,
    pub directed: bool,
    pub utility: UtilityConfig,
    pub epsilons: Vec<f64>,
    pub sample_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub mechanisms: Vec<MechanismKind>,
    /// Fixed smoothing weight. When absent, each target uses the weight
    /// whose privacy level equals the run's ε.
    pub smoothing_x: Option<f64>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return domain("at least one epsilon is required");
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return domain(format!("epsilon must be positive, got {e}"));
        }
        if self.mechanisms.is_empty() {
            return domain("at least one mechanism is required");
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return domain(format!("sample fraction must lie in (0, 1], got {}", self.sample_fraction));
        }
        if self.trials == 0 {
            return domain("trials must be positive");
        }
        if let Some(x) = self.smoothing_x {
            if !(0.0..1.0).contains(&x) {
                return domain(format!("smoothing weight must lie in [0, 1), got {x}"));
            }
        }
        Ok(())
    }

    fn wants(&self, m: MechanismKind) -> bool {
        self.mechanisms.contains(&m)
    }
}

/// Accuracies for one target at one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonOutcome {
    pub epsilon: f64,
    pub exp_accuracy: Option<f64>,
    pub laplace_accuracy: Option<f64>,
    pub smoothing_accuracy: Option<f64>,
    pub bound_accuracy: f64,
}

impl EpsilonOutcome {
    pub fn series(&self, s: Series) -> Option<f64> {
        match s {
            Series::Mechanism(MechanismKind::Exponential) => self.exp_accuracy,
            Series::Mechanism(MechanismKind::Laplace) => self.laplace_accuracy,
            Series::Mechanism(MechanismKind::Smoothing) => self.smoothing_accuracy,
            Series::Bound => Some(self.bound_accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRecord {
    /// Original id of the target.
    pub target: u64,
    pub node: NodeId,
    pub degree: usize,
    pub u_max: f64,
    pub t: Option<u64>,
    pub outcomes: Vec<EpsilonOutcome>,
    pub skip_reason: Option<String>,
}

impl AccuracyRecord {
    pub fn skipped(&self) -> bool {
        self.skip_reason.is_some()
    }

    pub fn outcome(&self, epsilon: f64) -> Option<&EpsilonOutcome> {
        self.outcomes.iter().find(|o| o.epsilon == epsilon)
    }
}

/// `ceil(fraction · n)` distinct nodes drawn uniformly without replacement,
/// returned in ascending order.
pub fn sample_targets(g: &Graph, fraction: f64, seed: u64) -> Result<Vec<NodeId>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("fraction must lie in (0, 1], got {fraction}"));
    }
    let n = g.node_count();
    let count = ((fraction * n as f64).ceil() as usize).min(n);
    if count == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn skipped_record(g: &Graph, r: NodeId, u_max: f64, reason: String) -> AccuracyRecord {
    AccuracyRecord {
        target: g.label(r),
        node: r,
        degree: g.degree(r),
        u_max,
        t: None,
        outcomes: Vec::new(),
        skip_reason: Some(reason),
    }
}

fn smoothing_accuracy(u: &UtilityVector, x: f64) -> f64 {
    let n = u.len() as f64;
    let mean = u.values().iter().sum::<f64>() / n;
    (((1.0 - x) * mean + x * u.u_max()) / u.u_max()).clamp(0.0, 1.0)
}

fn evaluate_target(g: &Graph, r: NodeId, cfg: &ExperimentConfig) -> Result<AccuracyRecord> {
    let u = utility_vector(g, r, cfg.utility)?;
    if u.is_empty() {
        return Ok(skipped_record(g, r, 0.0, "no_candidates".into()));
    }
    if u.u_max() <= 0.0 {
        return Ok(skipped_record(g, r, 0.0, "zero_utility".into()));
    }
    let delta_f = sensitivity_bound(cfg.utility, g, r)?.delta_f;
    let t = t_formula(cfg.utility.kind(), u.u_max(), g.degree(r))?;
    let target_seed = derive_seed(cfg.seed, g.label(r));
    let mut outcomes = Vec::with_capacity(cfg.epsilons.len());
    for &epsilon in &cfg.epsilons {
        let p = PrivacyParams::new(epsilon, delta_f, derive_seed(target_seed, epsilon.to_bits()))?;
        let exp_accuracy = if cfg.wants(MechanismKind::Exponential) {
            Some(expected_accuracy(&exponential_distribution(&u, &p)?, &u)?)
        } else {
            None
        };
        let laplace_accuracy = if cfg.wants(MechanismKind::Laplace) {
            Some(monte_carlo_accuracy(&u, &p, cfg.trials)?)
        } else {
            None
        };
        let smoothing = if cfg.wants(MechanismKind::Smoothing) {
            let x = match cfg.smoothing_x {
                Some(x) => x,
                None => smoothing_x(epsilon, u.len())?,
            };
            Some(smoothing_accuracy(&u, x))
        } else {
            None
        };
        let bound = tightest_accuracy_bound(&u, t, epsilon)?;
        outcomes.push(EpsilonOutcome {
            epsilon,
            exp_accuracy,
            laplace_accuracy,
            smoothing_accuracy: smoothing,
            bound_accuracy: bound.accuracy,
        });
    }
    Ok(AccuracyRecord {
        target: g.label(r),
        node: r,
        degree: g.degree(r),
        u_max: u.u_max(),
        t: Some(t),
        outcomes,
        skip_reason: None,
    })
}

/// Runs the experiment on an in-memory graph. Output is sorted by target
/// id and does not depend on thread scheduling.
pub fn run_on_graph(g: &Graph, cfg: &ExperimentConfig) -> Result<Vec<AccuracyRecord>> {
    cfg.validate()?;
    let targets = sample_targets(g, cfg.sample_fraction, cfg.seed)?;
    let mut records: Vec<AccuracyRecord> = targets
        .par_iter()
        .map(|&r| {
            evaluate_target(g, r, cfg).unwrap_or_else(|e| {
                let reason = format!("error: {e}");
                skipped_record(g, r, 0.0, reason)
            })
        })
        .collect();
    records.sort_by_key(|rec| rec.target);
    Ok(records)
}

pub fn load_graph(path: &Path, directed: bool) -> Result<Graph> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(load_edge_list(BufReader::new(file), directed)?.graph)
}

/// Loads the configured graph and runs the experiment on it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<AccuracyRecord>> {
    cfg.validate()?;
    let g = load_graph(&cfg.graph_path, cfg.directed)?;
    run_on_graph(&g, cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per (target, ε) under [`CSV_HEADER`].
pub fn write_records<W: Write>(records: &[AccuracyRecord], epsilons: &[f64], mut sink: W) -> Result<()> {
    writeln!(sink, "{CSV_HEADER}")?;
    for rec in records {
        match &rec.skip_reason {
            Some(reason) => {
                let reason = reason.replace([',', '\n'], ";");
                for eps in epsilons {
                    writeln!(sink, "{},{},{},,{},,,,true,{}", rec.target, rec.degree, rec.u_max, eps, reason)?;
                }
            }
            None => {
                for o in &rec.outcomes {
                    writeln!(
                        sink,
                        "{},{},{},{},{},{},{},{},false,",
                        rec.target,
                        rec.degree,
                        rec.u_max,
                        rec.t.map(|t| t.to_string()).unwrap_or_default(),
                        o.epsilon,
                        fmt_opt(o.exp_accuracy),
                        fmt_opt(o.laplace_accuracy),
                        o.bound_accuracy,
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// `(threshold, fraction of non-skipped targets with accuracy ≤ threshold)`
/// at every distinct observed accuracy, ascending.
pub fn emit_cdf(records: &[AccuracyRecord], epsilon: f64, series: Series) -> Result<Vec<(f64, f64)>> {
    let mut values: Vec<f64> = records
        .iter()
        .filter(|r| !r.skipped())
        .filter_map(|r| r.outcome(epsilon).and_then(|o| o.series(series)))
        .collect();
    if values.is_empty() {
        return Err(Error::Precondition(format!(
            "no {} accuracies recorded at epsilon {epsilon}",
            series.name()
        )));
    }
    values.sort_by(f64::total_cmp);
    let total = values.len() as f64;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let frac = (i + 1) as f64 / total;
        match rows.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => rows.push((v, frac)),
        }
    }
    Ok(rows)
}

/// Fraction of non-skipped targets whose accuracy is strictly below
/// `threshold`.
pub fn fraction_below(records: &[AccuracyRecord], epsilon: f64, series: Series, threshold: f64) -> Option<f64> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| !r.skipped())
        .filter_map(|r| r.outcome(epsilon).and_then(|o| o.series(series)))
        .collect();
    if values.is_empty() {
        return None;
    }
    Some(values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeRow {
    pub degree: usize,
    pub targets: usize,
    pub mean_accuracy: f64,
    pub mean_bound: f64,
}

/// Mean accuracy of `series` and mean bound per target degree.
pub fn degree_table(records: &[AccuracyRecord], epsilon: f64, series: Series) -> Vec<DegreeRow> {
    let mut by_degree: std::collections::BTreeMap<usize, (usize, f64, f64)> = Default::default();
    for rec in records.iter().filter(|r| !r.skipped()) {
        let Some(o) = rec.outcome(epsilon) else { continue };
        let Some(acc) = o.series(series) else { continue };
        let e = by_degree.entry(rec.degree).or_default();
        e.0 += 1;
        e.1 += acc;
        e.2 += o.bound_accuracy;
    }
    by_degree
        .into_iter()
        .map(|(degree, (n, acc, bound))| DegreeRow {
            degree,
            targets: n,
            mean_accuracy: acc / n as f64,
            mean_bound: bound / n as f64,
        })
        .collect()
}

pub fn write_cdf<W: Write>(rows: &[(f64, f64)], mut sink: W) -> Result<()> {
    writeln!(sink, "threshold,fraction")?;
    for (t, f) in rows {
        writeln!(sink, "{t},{f}")?;
    }
    Ok(())
}

pub fn write_degree_table<W: Write>(rows: &[DegreeRow], mut sink: W) -> Result<()> {
    writeln!(sink, "degree,targets,mean_accuracy,bound")?;
    for row in rows {
        writeln!(sink, "{},{},{},{}", row.degree, row.targets, row.mean_accuracy, row.mean_bound)?;
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let mut name = String::new();
    let _ = write!(name, "{stem}_{suffix}.csv");
    path.with_file_name(name)
}

/// Writes the record CSV to `out` plus, for every ε, one CDF file per
/// series (`<stem>_cdf_<series>_eps<ε>.csv`) and a degree table
/// (`<stem>_degree_eps<ε>.csv`). Returns the paths written.
pub fn write_outputs(records: &[AccuracyRecord], cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let create = |p: &Path| -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?))
    };
    let mut main = create(out)?;
    write_records(records, &cfg.epsilons, &mut main)?;
    main.flush()?;
    written.push(out.to_path_buf());

    let mut series: Vec<Series> = cfg.mechanisms.iter().map(|&m| Series::Mechanism(m)).collect();
    series.push(Series::Bound);
    let primary = series[0];
    for &eps in &cfg.epsilons {
        for &s in &series {
            let Ok(rows) = emit_cdf(records, eps, s) else { continue };
            let path = sibling(out, &format!("cdf_{}_eps{eps}", s.name()));
            let mut w = create(&path)?;
            write_cdf(&rows, &mut w)?;
            w.flush()?;
            written.push(path);
        }
        let rows = degree_table(records, eps, primary);
        if !rows.is_empty() {
            let path = sibling(out, &format!("degree_eps{eps}"));
            let mut w = create(&path)?;
            write_degree_table(&rows, &mut w)?;
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Preferential-attachment graph.
///
/// Starts from a clique on `edges_per_node + 1` nodes; every later node
/// links to `edges_per_node` distinct existing nodes chosen with probability
/// proportional to degree. The result is connected and has
/// `C(m+1, 2) + (nodes - m - 1)·m` edges for `m = edges_per_node`.
pub fn generate_synthetic(nodes: usize, edges_per_node: usize, seed: u64) -> Result<Graph> {
    let m = edges_per_node;
    if m < 1 || nodes <= m {
        return domain(format!("need nodes > edges_per_node >= 1, got {nodes} and {m}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(m * nodes);
    // each edge contributes both endpoints; sampling from this list is
    // degree-proportional
    let mut endpoints: Vec<NodeId> = Vec::with_capacity(2 * m * nodes);
    for u in 0..=m {
        for v in (u + 1)..=m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut chosen: Vec<NodeId> = Vec::with_capacity(m);
    for v in (m + 1)..nodes {
        chosen.clear();
        while chosen.len() < m {
            let w = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&w) {
                chosen.push(w);
            }
        }
        for &w in &chosen {
            edges.push((w, v));
            endpoints.extend([w, v]);
        }
    }
    Graph::from_edges(nodes, false, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::is_connected;

    fn cfg(eps: &[f64]) -> ExperimentConfig {
        ExperimentConfig {
            graph_path: PathBuf::new(),
            directed: false,
            utility: UtilityConfig::CommonNeighbors,
            epsilons: eps.to_vec(),
            sample_fraction: 1.0,
            trials: 200,
            seed: 7,
            mechanisms: vec![MechanismKind::Exponential, MechanismKind::Laplace],
            smoothing_x: None,
            output_path: None,
        }
    }

    fn rec(acc: f64) -> AccuracyRecord {
        AccuracyRecord {
            target: 0,
            node: 0,
            degree: 1,
            u_max: 1.0,
            t: Some(2),
            outcomes: vec![EpsilonOutcome {
                epsilon: 1.0,
                exp_accuracy: Some(acc),
                laplace_accuracy: None,
                smoothing_accuracy: None,
                bound_accuracy: 1.0,
            }],
            skip_reason: None,
        }
    }

    #[test]
    fn sampling() {
        let g = Graph::empty(7115, false);
        assert_eq!(sample_targets(&g, 0.1, 3).unwrap().len(), 712);
        assert_eq!(sample_targets(&g, 0.1, 3).unwrap(), sample_targets(&g, 0.1, 3).unwrap());
        assert_ne!(sample_targets(&g, 0.1, 3).unwrap(), sample_targets(&g, 0.1, 4).unwrap());
        let small = Graph::empty(5, false);
        assert_eq!(sample_targets(&small, 1.0, 0).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(sample_targets(&small, 0.0, 0).is_err());
        let picked = sample_targets(&g, 0.3, 1).unwrap();
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn two_node_graph_is_skipped() {
        let g = Graph::from_edges(2, false, &[(0, 1)]).unwrap();
        let recs = run_on_graph(&g, &cfg(&[1.0])).unwrap();
        assert!(recs.iter().all(|r| r.skip_reason.as_deref() == Some("no_candidates")));
    }

    #[test]
    fn g2_exponential_accuracy_is_five_sixths() {
        let g = Graph::from_edges(5, false, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 4)]).unwrap();
        let recs = run_on_graph(&g, &cfg(&[2f64.ln()])).unwrap();
        let r0 = &recs[0];
        assert_eq!(r0.target, 0);
        assert_eq!(r0.t, Some(4));
        let acc = r0.outcomes[0].exp_accuracy.unwrap();
        assert!((acc - 5.0 / 6.0).abs() < 1e-12, "{acc}");
    }

    #[test]
    fn cdf_rows() {
        let rows = emit_cdf(&[rec(0.2), rec(0.2), rec(0.8)], 1.0, Series::Mechanism(MechanismKind::Exponential)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, 0.2);
        assert!((rows[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rows[1], (0.8, 1.0));
        let same = emit_cdf(&[rec(0.5), rec(0.5)], 1.0, Series::Bound).unwrap();
        assert_eq!(same, vec![(1.0, 1.0)]);
        assert!(emit_cdf(&[], 1.0, Series::Bound).is_err());
        assert!(emit_cdf(&[rec(0.5)], 1.0, Series::Mechanism(MechanismKind::Laplace)).is_err());
    }

    #[test]
    fn synthetic_generator() {
        let tree = generate_synthetic(10, 1, 3).unwrap();
        assert_eq!(tree.edge_count(), 9);
        assert!(is_connected(&tree));

        let big = generate_synthetic(10_000, 5, 3).unwrap();
        assert_eq!(big.edge_count(), 15 + (10_000 - 6) * 5);
        assert!(is_connected(&big));
        assert_eq!(big, generate_synthetic(10_000, 5, 3).unwrap());
        assert_ne!(big, generate_synthetic(10_000, 5, 4).unwrap());

        assert!(generate_synthetic(5, 5, 0).is_err());
        assert!(generate_synthetic(5, 0, 0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(&[1.0]);
        assert!(c.validate().is_ok());
        c.epsilons.clear();
        assert!(c.validate().is_err());
        let mut c = cfg(&[1.0]);
        c.sample_fraction = 1.5;
        assert!(c.validate().is_err());
        let mut c = cfg(&[1.0]);
        c.smoothing_x = Some(1.0);
        assert!(c.validate().is_err());
    }
}
