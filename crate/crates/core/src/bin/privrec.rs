use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use privrec::audit::{
    all_graphs, audit_mechanism_with_rule, audit_sensitivity, brute_force_t, connected_graphs, exhaustive_t_check,
    Mechanism, NeighborRule, MAX_ORACLE_DEPTH,
};
use privrec::bounds::{
    accuracy_upper_bound, asymptotic_epsilon, epsilon_lower_bound, t_formula, AsymptoticMode, BoundInputs,
    EpsilonBound,
};
use privrec::experiment::{
    fraction_below, generate_synthetic, load_graph, run_on_graph, write_outputs, ExperimentConfig, MechanismKind,
    Series, DEFAULT_TRIALS,
};
use privrec::mechanisms::{smoothing_x, PrivacyParams};
use privrec::utility::{sensitivity_bound, utility_vector};
use privrec::{write_edge_list, Error, Graph, NodeId, UtilityConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_AUDIT: u8 = 3;

/// Private link recommendation experiments, bounds and audits.
#[derive(Debug, Parser)]
#[command(name = "privrec", version)]
struct Cli {
    /// Flat key=value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-target accuracy of the private recommenders versus the bound.
    Experiment(ExperimentArgs),
    /// Accuracy and privacy trade-off calculators.
    Bound(BoundArgs),
    /// Exact privacy audit of a small graph.
    Audit(AuditArgs),
    /// Brute-force edit counts and sensitivities on small graphs.
    Oracle {
        #[command(subcommand)]
        check: OracleCheck,
    },
    /// Write a seeded preferential-attachment graph as an edge list.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UtilityArg {
    CommonNeighbors,
    WeightedPaths,
}

#[derive(Debug, Args)]
struct UtilityArgs {
    #[arg(long, value_enum, default_value = "common-neighbors")]
    utility: UtilityArg,
    /// Path damping factor for weighted paths.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 3)]
    max_path_len: usize,
}

impl UtilityArgs {
    fn config(&self) -> privrec::Result<UtilityConfig> {
        match self.utility {
            UtilityArg::CommonNeighbors => Ok(UtilityConfig::CommonNeighbors),
            UtilityArg::WeightedPaths => UtilityConfig::weighted_paths(self.gamma, self.max_path_len),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum MechanismArg {
    Exponential,
    Laplace,
    Smoothing,
}

impl From<MechanismArg> for MechanismKind {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Exponential => MechanismKind::Exponential,
            MechanismArg::Laplace => MechanismKind::Laplace,
            MechanismArg::Smoothing => MechanismKind::Smoothing,
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    directed: bool,
    #[command(flatten)]
    utility: UtilityArgs,
    /// Privacy level; repeat for several.
    #[arg(long, required = true)]
    epsilon: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    sample_frac: f64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exponential,laplace")]
    mechanisms: Vec<MechanismArg>,
    /// Fixed smoothing weight; by default chosen per target to match ε.
    #[arg(long)]
    smoothing_x: Option<f64>,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AsymptoticArg {
    Lemma2,
    Theorem1,
    Theorem2,
    Theorem3,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Candidate pool size.
    #[arg(long)]
    n: u64,
    /// High-utility group size.
    #[arg(long)]
    k: Option<u64>,
    /// Utility gap fraction between the groups.
    #[arg(long)]
    c: Option<f64>,
    /// Edit count.
    #[arg(long)]
    t: Option<u64>,
    /// Print the best achievable accuracy at this ε.
    #[arg(long, conflicts_with = "delta")]
    epsilon: Option<f64>,
    /// Print the smallest ε allowing accuracy 1 - δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Print an asymptotic lower bound on ε instead.
    #[arg(long, value_enum, conflicts_with_all = ["epsilon", "delta"])]
    asymptotic: Option<AsymptoticArg>,
    /// Concentration parameter for the asymptotic bounds.
    #[arg(long, default_value_t = 1)]
    beta: u64,
    /// Degree (or t for lemma2) for the asymptotic bounds.
    #[arg(long)]
    d: Option<u64>,
    /// γ·d_max for theorem3.
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long, default_value_t = 2)]
    digits: usize,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    directed: bool,
    #[command(flatten)]
    utility: UtilityArgs,
    #[arg(long, default_value = "1.0")]
    epsilon: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exponential")]
    mechanisms: Vec<MechanismArg>,
    #[arg(long)]
    smoothing_x: Option<f64>,
    /// Original id of the target; all nodes when absent.
    #[arg(long)]
    target: Option<u64>,
    /// Integration tolerance for the Laplace mechanism.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Also consider edits incident to the target.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum OracleCheck {
    /// Minimum edits making each candidate the strict top, versus the formula.
    T {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        directed: bool,
        #[command(flatten)]
        utility: UtilityArgs,
        #[arg(long)]
        target: u64,
        #[arg(long)]
        candidate: Option<u64>,
        #[arg(long, default_value_t = MAX_ORACLE_DEPTH)]
        max_depth: usize,
    },
    /// Edit counts for every graph on a given number of nodes.
    TAll {
        #[arg(long)]
        nodes: usize,
        #[command(flatten)]
        utility: UtilityArgs,
    },
    /// Largest utility change from one edit over every small graph.
    Sensitivity {
        #[arg(long)]
        nodes: usize,
        /// Only connected graphs.
        #[arg(long)]
        connected: bool,
        #[command(flatten)]
        utility: UtilityArgs,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 5)]
    edges_per_node: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(Error),
    Audit(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

const BOOLEAN_KEYS: [&str; 3] = ["directed", "strict", "connected"];

/// Appends `--key value` for every config-file entry whose flag is absent
/// from `args`.
fn merge_config(args: &[String], path: &Path) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let given: HashSet<String> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut merged = args.to_vec();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!("config line {}: expected key=value", i + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" || given.contains(&key) {
            continue;
        }
        if BOOLEAN_KEYS.contains(&key.as_str()) {
            match value {
                "true" => merged.push(format!("--{key}")),
                "false" => {}
                _ => return Err(Failure::Usage(format!("config line {}: {key} must be true or false", i + 1))),
            }
        } else if key == "epsilon" {
            for v in value.split(',') {
                merged.push("--epsilon".into());
                merged.push(v.trim().to_string());
            }
        } else {
            merged.push(format!("--{key}"));
            merged.push(value.to_string());
        }
    }
    Ok(merged)
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn node_of(g: &Graph, label: u64) -> Result<NodeId, Failure> {
    g.labels()
        .binary_search(&label)
        .map_err(|_| Failure::Data(Error::Domain(format!("node {label} is not in the graph"))))
}

fn experiment(a: ExperimentArgs) -> Outcome {
    let mechanisms: Vec<MechanismKind> = a.mechanisms.iter().map(|&m| m.into()).collect();
    let cfg = ExperimentConfig {
        graph_path: a.graph.clone(),
        directed: a.directed,
        utility: a.utility.config()?,
        epsilons: a.epsilon.clone(),
        sample_fraction: a.sample_frac,
        trials: a.trials,
        seed: a.seed,
        mechanisms: mechanisms.clone(),
        smoothing_x: a.smoothing_x,
        output_path: Some(a.out.clone()),
    };
    cfg.validate()?;
    let g = load_graph(&cfg.graph_path, cfg.directed)?;
    let records = run_on_graph(&g, &cfg)?;
    let written = write_outputs(&records, &cfg, &a.out)?;

    let skipped = records.iter().filter(|r| r.skipped()).count();
    println!(
        "nodes={} edges={} targets={} skipped={}",
        g.node_count(),
        g.edge_count(),
        records.len(),
        skipped
    );
    for &eps in &cfg.epsilons {
        let mut line = format!("epsilon={eps}");
        for &m in &mechanisms {
            let s = Series::Mechanism(m);
            if let (Some(lo), Some(mid)) = (
                fraction_below(&records, eps, s, 0.1),
                fraction_below(&records, eps, s, 0.6),
            ) {
                line.push_str(&format!(" {}_below_0.1={lo:.4} {}_below_0.6={mid:.4}", m.name(), m.name()));
            }
        }
        if let Some(b) = fraction_below(&records, eps, Series::Bound, 0.4) {
            line.push_str(&format!(" bound_below_0.4={b:.4}"));
        }
        println!("{line}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn bound(a: BoundArgs) -> Outcome {
    let digits = a.digits;
    if let Some(mode) = a.asymptotic {
        let d = a.d.ok_or_else(|| Failure::Usage("--asymptotic requires --d".into()))?;
        let mode = match mode {
            AsymptoticArg::Lemma2 => AsymptoticMode::Lemma2,
            AsymptoticArg::Theorem1 => AsymptoticMode::Theorem1,
            AsymptoticArg::Theorem2 => AsymptoticMode::Theorem2,
            AsymptoticArg::Theorem3 => AsymptoticMode::Theorem3,
        };
        print_epsilon(asymptotic_epsilon(mode, a.n, a.beta, d, a.s)?, digits);
        return Ok(());
    }
    let (Some(k), Some(c), Some(t)) = (a.k, a.c, a.t) else {
        return Err(Failure::Usage("--k, --c and --t are required unless --asymptotic is given".into()));
    };
    let inputs = BoundInputs::new(a.n, k, c, t)?;
    match (a.epsilon, a.delta) {
        (Some(eps), None) => println!("{:.digits$}", accuracy_upper_bound(&inputs, eps)?),
        (None, Some(delta)) => print_epsilon(epsilon_lower_bound(&inputs, delta)?, digits),
        _ => return Err(Failure::Usage("give exactly one of --epsilon or --delta".into())),
    }
    Ok(())
}

fn print_epsilon(b: EpsilonBound, digits: usize) {
    match b {
        EpsilonBound::AtLeast(v) => println!("{v:.digits$}"),
        EpsilonBound::NoConstraint => println!("no constraint"),
    }
}

fn audit(a: AuditArgs) -> Outcome {
    let cfg = a.utility.config()?;
    let g = load_graph(&a.graph, a.directed)?;
    let targets: Vec<NodeId> = match a.target {
        Some(label) => vec![node_of(&g, label)?],
        None => (0..g.node_count()).collect(),
    };
    let rule = if a.strict { NeighborRule::Strict } else { NeighborRule::Relaxed };
    let mut failures = 0usize;
    let mut audited = 0usize;
    for &r in &targets {
        let candidates = utility_vector(&g, r, cfg)?.len();
        let delta_f = sensitivity_bound(cfg, &g, r)?.delta_f;
        for &eps in &a.epsilon {
            let p = PrivacyParams::new(eps, delta_f, 0)?;
            for &m in &a.mechanisms {
                let mechanism = match m {
                    MechanismArg::Exponential => Mechanism::Exponential,
                    MechanismArg::Laplace => Mechanism::Laplace,
                    MechanismArg::Smoothing => {
                        if candidates == 0 {
                            continue;
                        }
                        let x = match a.smoothing_x {
                            Some(x) => x,
                            None => smoothing_x(eps, candidates)?,
                        };
                        Mechanism::Smoothing { x }
                    }
                };
                let report = audit_mechanism_with_rule(&g, r, mechanism, cfg, &p, a.tol, rule)?;
                audited += 1;
                let verdict = if report.passed() { "pass" } else { "FAIL" };
                if !report.passed() {
                    failures += 1;
                }
                let witness = report
                    .witness
                    .map(|(e, v)| format!(" witness_edit=\"{e}\" witness_node={}", g.label(v)))
                    .unwrap_or_default();
                println!(
                    "target={} mechanism={} epsilon={eps} claimed={} max_log_ratio={} pairs={} {verdict}{witness}",
                    g.label(r),
                    MechanismKind::from(m).name(),
                    report.epsilon_claimed,
                    report.max_log_ratio,
                    report.pairs_checked,
                );
            }
        }
    }
    println!("audited={audited} failed={failures}");
    if failures > 0 {
        return Err(Failure::Audit(format!("{failures} audit(s) exceeded the claimed epsilon")));
    }
    Ok(())
}

fn oracle(check: OracleCheck) -> Outcome {
    match check {
        OracleCheck::T { graph, directed, utility, target, candidate, max_depth } => {
            let cfg = utility.config()?;
            let g = load_graph(&graph, directed)?;
            let r = node_of(&g, target)?;
            let u = utility_vector(&g, r, cfg)?;
            let candidates: Vec<NodeId> = match candidate {
                Some(label) => vec![node_of(&g, label)?],
                None => u.nodes().to_vec(),
            };
            let formula = t_formula(cfg.kind(), u.u_max(), g.degree(r))?;
            let mut exceeding = 0;
            for x in candidates {
                let t = brute_force_t(&g, r, x, cfg, max_depth)?;
                let shown = t.map(|t| t.to_string()).unwrap_or_else(|| format!(">{max_depth}"));
                let over = t.is_none_or(|t| t as u64 > formula);
                if over {
                    exceeding += 1;
                }
                println!(
                    "candidate={} oracle_t={shown} formula_t={formula}{}",
                    g.label(x),
                    if over { " EXCEEDS" } else { "" }
                );
            }
            if exceeding > 0 {
                return Err(Failure::Audit(format!("{exceeding} candidate(s) need more edits than the formula")));
            }
            Ok(())
        }
        OracleCheck::TAll { nodes, utility } => {
            let summary = exhaustive_t_check(nodes, utility.config()?)?;
            println!(
                "compared={} unreachable={} exceeding={} max_slack={}",
                summary.compared,
                summary.unreachable,
                summary.exceeding.len(),
                summary.max_slack
            );
            if let Some(first) = summary.exceeding.first() {
                let edges: Vec<String> = first.graph.edges().map(|(u, v)| format!("{u}-{v}")).collect();
                println!(
                    "example: edges=[{}] target={} candidate={} oracle_t={:?} formula_t={}",
                    edges.join(" "),
                    first.target,
                    first.candidate,
                    first.oracle_t,
                    first.formula_t
                );
                return Err(Failure::Audit("oracle edit count exceeds the formula".into()));
            }
            Ok(())
        }
        OracleCheck::Sensitivity { nodes, connected, utility } => {
            let cfg = utility.config()?;
            if !(2..=6).contains(&nodes) {
                return Err(Failure::Usage("--nodes must lie in 2..=6".into()));
            }
            let report = if connected {
                audit_sensitivity(cfg, connected_graphs(nodes))?
            } else {
                audit_sensitivity(cfg, all_graphs(nodes))?
            };
            println!(
                "instances={} max_change={} worst_ratio={} violations={}",
                report.instances, report.max_change, report.worst_ratio, report.violations
            );
            if report.violations > 0 {
                return Err(Failure::Audit("utility change exceeds the sensitivity bound".into()));
            }
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> Outcome {
    let g = generate_synthetic(a.nodes, a.edges_per_node, a.seed)?;
    let header = format!(
        "# synthetic preferential-attachment graph: nodes={} edges_per_node={} seed={}\n",
        a.nodes, a.edges_per_node, a.seed
    );
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(header.as_bytes())?;
            write_edge_list(&g, &mut w)?;
            w.flush()?;
            eprintln!("wrote synthetic graph: {} nodes, {} edges", g.node_count(), g.edge_count());
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            w.write_all(header.as_bytes())?;
            write_edge_list(&g, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run(args: Vec<String>) -> Outcome {
    let args = match config_path(&args) {
        Some(path) => merge_config(&args, &path)?,
        None => args,
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                return Err(Failure::Usage(e.render().to_string()));
            }
            let _ = e.print();
            return Ok(());
        }
    };
    match cli.command {
        Command::Experiment(a) => experiment(a),
        Command::Bound(a) => bound(a),
        Command::Audit(a) => audit(a),
        Command::Oracle { check } => oracle(check),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", msg.trim_end());
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Audit(msg)) => {
            eprintln!("audit failed: {msg}");
            ExitCode::from(EXIT_AUDIT)
        }
    }
}
