//! Acceptance checks. Runs without the libtest harness so that every check
//! prints exactly one PASS/FAIL line; the process fails if any check fails.
//!
//! The wiki-Vote checks read the SNAP edge list from `$WIKI_VOTE_PATH`, or
//! from `data/wiki-Vote.txt` at the workspace root.

use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use privrec::audit::{
    all_graphs, audit_mechanism, audit_sensitivity, connected_graphs, exhaustive_t_check, random_graphs, Mechanism,
};
use privrec::bounds::{accuracy_upper_bound, BoundInputs};
use privrec::experiment::{
    emit_cdf, fraction_below, generate_synthetic, run_on_graph, sample_targets, write_records, ExperimentConfig,
    MechanismKind, Series,
};
use privrec::mechanisms::{
    best_recommendation, expected_accuracy, exponential_distribution, laplace_distribution, laplace_sample,
    laplace_two_node_probability, smoothing_distribution, smoothing_epsilon, PrivacyParams,
};
use privrec::utility::{sensitivity_bound, utility_vector};
use privrec::{load_edge_list, Graph, UtilityConfig, UtilityVector};

type Check = Result<String, String>;
type CheckFn = fn() -> Check;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn wiki_vote_path() -> PathBuf {
    std::env::var_os("WIKI_VOTE_PATH")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wiki-Vote.txt"))
}

fn wiki_vote() -> Result<Graph, String> {
    let path = wiki_vote_path();
    let file = std::fs::File::open(&path)
        .map_err(|err| format!("wiki-Vote edge list not available at {} ({err})", path.display()))?;
    Ok(e(load_edge_list(BufReader::new(file), false))?.graph)
}

fn wiki_config(seed: u64, mechanisms: Vec<MechanismKind>) -> ExperimentConfig {
    ExperimentConfig {
        graph_path: wiki_vote_path(),
        directed: false,
        utility: UtilityConfig::CommonNeighbors,
        epsilons: vec![0.5, 1.0],
        sample_fraction: 0.1,
        trials: 1000,
        seed,
        mechanisms,
        smoothing_x: None,
        output_path: None,
    }
}

fn headline_bound() -> Check {
    let b = e(BoundInputs::new(400_000_000, 100, 0.99, 150))?;
    let acc = e(accuracy_upper_bound(&b, 0.1))?;
    ensure((acc - 0.46).abs() <= 0.005, format!("bound {acc}"))?;
    Ok(format!("accuracy bound {acc:.4}"))
}

fn dataset_fidelity() -> Check {
    let start = Instant::now();
    let g = wiki_vote()?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        g.node_count() == 7115 && g.edge_count() == 100_762,
        format!("{} nodes, {} edges", g.node_count(), g.edge_count()),
    )?;
    ensure(secs < 5.0, format!("load took {secs:.2}s"))?;
    Ok(format!("7115 nodes, 100762 edges in {secs:.2}s"))
}

fn wiki_vote_cdf_fractions() -> Check {
    let g = wiki_vote()?;
    let exp = Series::Mechanism(MechanismKind::Exponential);
    let seeds = [7u64, 8, 9];
    let mut sums = [0.0f64; 5];
    for &seed in &seeds {
        let records = e(run_on_graph(&g, &wiki_config(seed, vec![MechanismKind::Exponential])))?;
        let frac = |eps, s, th| fraction_below(&records, eps, s, th).unwrap_or(f64::NAN);
        sums[0] += frac(0.5, exp, 0.1);
        sums[1] += frac(1.0, exp, 0.6);
        sums[2] += frac(1.0, exp, 0.1);
        sums[3] += frac(0.5, Series::Bound, 0.4);
        sums[4] += frac(1.0, Series::Bound, 0.4);
    }
    let m: Vec<f64> = sums.iter().map(|s| s / seeds.len() as f64).collect();
    let detail = format!(
        "eps=0.5 exp<0.1 {:.3}; eps=1 exp<0.6 {:.3}, exp<0.1 {:.3}; bound<0.4 {:.3} (eps=0.5), {:.3} (eps=1)",
        m[0], m[1], m[2], m[3], m[4]
    );
    let ok = (m[0] - 0.60).abs() <= 0.10
        && (m[1] - 0.60).abs() <= 0.10
        && (m[2] - 0.45).abs() <= 0.10
        && m[3] >= 0.40
        && m[4] >= 0.20;
    ensure(ok, detail.clone())?;
    Ok(detail)
}

fn laplace_matches_exponential() -> Check {
    let g = wiki_vote()?;
    let cfg = wiki_config(7, vec![MechanismKind::Exponential, MechanismKind::Laplace]);
    let records = e(run_on_graph(&g, &cfg))?;
    let gaps: Vec<f64> = records
        .iter()
        .flat_map(|r| r.outcomes.iter())
        .filter_map(|o| Some((o.laplace_accuracy? - o.exp_accuracy?).abs()))
        .collect();
    ensure(!gaps.is_empty(), "no non-skipped targets")?;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    ensure(mean <= 0.05, format!("mean gap {mean:.4}"))?;
    Ok(format!("mean gap {mean:.4} over {} (target, eps) pairs", gaps.len()))
}

fn laplace_two_node_closed_form() -> Check {
    const DRAWS: usize = 1_000_000;
    let mut worst_sigma: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    for (i, &z) in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0].iter().enumerate() {
        let u = e(UtilityVector::from_values(&[z, 0.0]))?;
        let p = e(PrivacyParams::new(1.0, 1.0, 0))?;
        let want = e(laplace_two_node_probability(z, 1.0))?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let mut hits = 0usize;
        for _ in 0..DRAWS {
            if e(laplace_sample(&u, &p, &mut rng))? == 0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / DRAWS as f64;
        let sigma = (want * (1.0 - want) / DRAWS as f64).sqrt();
        let z_score = (freq - want).abs() / sigma;
        worst_sigma = worst_sigma.max(z_score);
        let quad = e(laplace_distribution(&u, &p, 1e-9))?;
        worst_quad = worst_quad.max((quad.probs()[0] - want).abs());
    }
    ensure(worst_sigma <= 3.0, format!("Monte Carlo off by {worst_sigma:.2} sigma"))?;
    ensure(worst_quad <= 1e-6, format!("quadrature off by {worst_quad:e}"))?;
    Ok(format!("max {worst_sigma:.2} sigma, quadrature error {worst_quad:.1e}"))
}

fn audit_population(cfg: UtilityConfig, x: f64, epsilon: f64) -> Result<(usize, f64), String> {
    let mut audits = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for n in 2..=6 {
        for g in connected_graphs(n) {
            for r in 0..n {
                let delta_f = e(sensitivity_bound(cfg, &g, r))?.delta_f;
                let p = e(PrivacyParams::new(epsilon, delta_f, 0))?;
                for mech in [Mechanism::Exponential, Mechanism::Smoothing { x }] {
                    let report = e(audit_mechanism(&g, r, mech, cfg, &p, 0.0))?;
                    audits += 1;
                    worst_excess = worst_excess.max(report.max_log_ratio - report.epsilon_claimed);
                    if !report.passed() {
                        return Err(format!(
                            "{mech:?} exceeded: ratio {} > claimed {} on {} nodes, target {r}, edges {:?}",
                            report.max_log_ratio,
                            report.epsilon_claimed,
                            n,
                            g.edges().collect::<Vec<_>>()
                        ));
                    }
                }
            }
        }
    }
    Ok((audits, worst_excess))
}

fn exact_privacy_audits() -> Check {
    let wp = e(UtilityConfig::weighted_paths(0.1, 3))?;
    let (a1, w1) = audit_population(UtilityConfig::CommonNeighbors, 0.3, 1.0)?;
    let (a2, w2) = audit_population(wp, 0.3, 1.0)?;

    let tol = 1e-7;
    let mut laplace_audits = 0;
    for g in random_graphs(5, 0.5, 100, false, 42) {
        for r in 0..5 {
            let p = e(PrivacyParams::new(1.0, 1.0, 0))?;
            let report = e(audit_mechanism(&g, r, Mechanism::Laplace, UtilityConfig::CommonNeighbors, &p, tol))?;
            laplace_audits += 1;
            ensure(
                report.max_log_ratio <= report.epsilon_claimed + 3.0 * tol,
                format!("Laplace ratio {} at target {r}", report.max_log_ratio),
            )?;
        }
    }
    Ok(format!(
        "{} exponential/smoothing audits (worst excess {:.1e}), {laplace_audits} Laplace audits",
        a1 + a2,
        w1.max(w2)
    ))
}

fn oracle_dominance() -> Check {
    let wp = e(UtilityConfig::weighted_paths(0.1, 3))?;
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (name, cfg) in [("common-neighbors", UtilityConfig::CommonNeighbors), ("weighted-paths", wp)] {
        let mut exceeding = 0;
        let mut compared = 0;
        let mut example = None;
        for n in 2..=6 {
            let s = e(exhaustive_t_check(n, cfg))?;
            compared += s.compared;
            exceeding += s.exceeding.len();
            if example.is_none() {
                example = s.exceeding.first().map(|c| {
                    format!(
                        "edges {:?} target {} candidate {} oracle {:?} formula {}",
                        c.graph.edges().collect::<Vec<_>>(),
                        c.target,
                        c.candidate,
                        c.oracle_t,
                        c.formula_t
                    )
                });
            }
        }
        notes.push(format!("{name}: t checked on {compared} pairs"));
        if exceeding > 0 {
            failures.push(format!(
                "{name}: oracle t exceeds formula on {exceeding} pairs, e.g. {}",
                example.unwrap_or_default()
            ));
        }

        let mut max_change: f64 = 0.0;
        let mut violations = 0;
        for n in 2..=6 {
            let a = e(audit_sensitivity(cfg, all_graphs(n)))?;
            max_change = max_change.max(a.max_change);
            violations += a.violations;
        }
        if violations > 0 {
            failures.push(format!("{name}: {violations} sensitivity violations"));
        }
        if name == "common-neighbors" && max_change != 1.0 {
            failures.push(format!("common-neighbors exhaustive sensitivity {max_change}"));
        }
        notes.push(format!("{name}: max sensitivity {max_change}"));
    }
    if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

fn smoothing_checks() -> Check {
    let mut attained = 0;
    for x in [0.1, 0.3, 0.7] {
        for g in connected_graphs(5) {
            for r in 0..5 {
                let p = e(PrivacyParams::new(1.0, 1.0, 0))?;
                let rep = e(audit_mechanism(&g, r, Mechanism::Smoothing { x }, UtilityConfig::CommonNeighbors, &p, 0.0))?;
                if rep.max_log_ratio <= 1e-12 {
                    continue;
                }
                ensure(
                    (rep.max_log_ratio - rep.epsilon_claimed).abs() <= 1e-9,
                    format!("measured {} vs claimed {}", rep.max_log_ratio, rep.epsilon_claimed),
                )?;
                attained += 1;
            }
        }
    }
    ensure(attained > 0, "no instance changed the best recommendation")?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30);
        let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        values[0] = values[0].max(0.5);
        let u = e(UtilityVector::from_values(&values))?;
        let p = e(PrivacyParams::new(rng.gen_range(0.01..5.0), 1.0, 0))?;
        let x = rng.gen_range(0.0..1.0);
        let base = e(exponential_distribution(&u, &p))?;
        let smooth = e(smoothing_distribution(&base, x))?;
        let (a_base, a_smooth) = (e(expected_accuracy(&base, &u))?, e(expected_accuracy(&smooth, &u))?);
        ensure(a_smooth >= x * a_base - 1e-12, format!("smoothed {a_smooth} < {x} * {a_base}"))?;

        let uniform = e(smoothing_distribution(&e(best_recommendation(&u))?, 0.0))?;
        ensure(
            uniform.probs().iter().all(|&q| q == 1.0 / n as f64),
            "x = 0 is not exactly uniform",
        )?;
    }
    let eps = e(smoothing_epsilon(0.3, 4))?;
    Ok(format!("{attained} audits attain the claimed level exactly (e.g. {eps:.6} at x=0.3, n=4)"))
}

fn is_monotone(u: &UtilityVector, probs: &[f64], slack: f64) -> bool {
    let v = u.values();
    (0..v.len()).all(|i| (0..v.len()).all(|j| v[i] <= v[j] || probs[i] >= probs[j] - slack))
}

fn invariant_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cn = UtilityConfig::CommonNeighbors;
    let wp = e(UtilityConfig::weighted_paths(0.05, 3))?;

    for g in random_graphs(9, 0.4, 20, false, 3) {
        for r in 0..g.node_count() {
            let u = e(utility_vector(&g, r, wp))?;
            if u.is_empty() {
                continue;
            }
            let p = e(PrivacyParams::new(1.0, e(sensitivity_bound(wp, &g, r))?.delta_f, 0))?;
            let exp = e(exponential_distribution(&u, &p))?;
            let lap = e(laplace_distribution(&u, &p, 1e-8))?;
            let sm = e(smoothing_distribution(&exp, 0.4))?;
            for (name, d, slack) in [("exponential", &exp, 1e-12), ("laplace", &lap, 1e-7), ("smoothing", &sm, 1e-12)] {
                let total: f64 = d.probs().iter().sum();
                ensure((total - 1.0).abs() <= 1e-9, format!("{name} sums to {total}"))?;
                ensure(is_monotone(&u, d.probs(), slack), format!("{name} not monotone"))?;
            }
            let gamma0 = e(utility_vector(&g, r, e(UtilityConfig::weighted_paths(0.0, 3))?))?;
            ensure(gamma0 == e(utility_vector(&g, r, cn))?, "gamma = 0 differs from common neighbors")?;
        }
    }

    let g = &random_graphs(12, 0.35, 1, false, 9)[0];
    let r = 4;
    let u = e(utility_vector(g, r, wp))?;
    let p = e(PrivacyParams::new(0.7, e(sensitivity_bound(wp, g, r))?.delta_f, 0))?;
    let d = e(exponential_distribution(&u, &p))?;
    let others: Vec<usize> = (0..12).filter(|&v| v != r).collect();
    for _ in 0..100 {
        let mut shuffled = others.clone();
        shuffled.shuffle(&mut rng);
        let mut perm = vec![r; 12];
        for (&from, &to) in others.iter().zip(&shuffled) {
            perm[from] = to;
        }
        let h = e(g.permute(&perm))?;
        let up = e(utility_vector(&h, r, wp))?;
        let dp = e(exponential_distribution(&up, &p))?;
        for (v, uv) in u.iter() {
            let ok_u = up.get(perm[v]).is_some_and(|w| (w - uv).abs() <= 1e-12);
            let ok_p = dp.get(perm[v]).zip(d.get(v)).is_some_and(|(a, b)| (a - b).abs() <= 1e-12);
            ensure(ok_u && ok_p, "not exchangeable under relabeling")?;
        }
    }

    let synth = e(generate_synthetic(2000, 5, 1))?;
    let mut checked = 0;
    for utility in [cn, wp] {
        let cfg = ExperimentConfig {
            graph_path: PathBuf::new(),
            directed: false,
            utility,
            epsilons: vec![0.5, 1.0, 3.0],
            sample_fraction: 0.2,
            trials: 200,
            seed: 7,
            mechanisms: vec![MechanismKind::Exponential, MechanismKind::Laplace],
            smoothing_x: None,
            output_path: None,
        };
        let records = e(run_on_graph(&synth, &cfg))?;
        for rec in records.iter().filter(|r| !r.skipped()) {
            for o in &rec.outcomes {
                let exp = o.exp_accuracy.unwrap_or(f64::NAN);
                ensure(
                    exp <= o.bound_accuracy + 0.01,
                    format!("target {} eps {}: exp {exp} > bound {}", rec.target, o.epsilon, o.bound_accuracy),
                )?;
                checked += 1;
            }
        }
        for &eps in &cfg.epsilons {
            for s in [Series::Mechanism(MechanismKind::Exponential), Series::Bound] {
                let rows = e(emit_cdf(&records, eps, s))?;
                ensure(rows.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1), "CDF not monotone")?;
                ensure(rows.last().map(|r| r.1) == Some(1.0), "CDF does not end at 1")?;
            }
        }
        let mut first = Vec::new();
        let mut second = Vec::new();
        e(write_records(&records, &cfg.epsilons, &mut first))?;
        e(write_records(&e(run_on_graph(&synth, &cfg))?, &cfg.epsilons, &mut second))?;
        ensure(first == second, "output differs between identical runs")?;
        ensure(
            e(sample_targets(&synth, 0.2, 7))? == e(sample_targets(&synth, 0.2, 7))?,
            "sampling not deterministic",
        )?;
    }
    Ok(format!("{checked} (target, eps) bound comparisons, 100 permutations"))
}

fn main() {
    let checks: &[(&str, CheckFn)] = &[
        ("bound calculator headline value", headline_bound),
        ("wiki-Vote loads with expected size", dataset_fidelity),
        ("wiki-Vote accuracy CDF fractions", wiki_vote_cdf_fractions),
        ("Laplace accuracy tracks exponential on wiki-Vote", laplace_matches_exponential),
        ("two-candidate Laplace closed form", laplace_two_node_closed_form),
        ("exact privacy audits on small graphs", exact_privacy_audits),
        ("brute-force t and sensitivity within formulas", oracle_dominance),
        ("smoothing privacy level and accuracy", smoothing_checks),
        ("invariant suite", invariant_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {}: PASS {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {}: FAIL {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
