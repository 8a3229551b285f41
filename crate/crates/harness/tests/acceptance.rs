//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances and sizes
//! are pinned here; the checks themselves live in the harness library.

use std::time::{Duration, Instant};

use crtwalk::rng::derive_seed;
use crtwalk_harness::config::ExperimentConfig;
use crtwalk_harness::formulas::{
    exit_time_checks, gamma_law_check, hitting_probability_checks, occupation_mean_checks, occupation_tail_check,
    structural_checks, visit_count_checks,
};
use crtwalk_harness::report::{all_pass, Check, TrendReport};
use crtwalk_harness::trends::{marginal_ks_trend, run_a_hat_trend, run_tightness_suite};

const SEED: u64 = 2024;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
}

fn criterion(
    id: usize,
    name: &'static str,
    limit: Duration,
    run: impl FnOnce() -> Vec<Check>,
) -> Outcome {
    let start = Instant::now();
    let checks = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = all_pass(&checks) && in_time;
    println!(
        "{} criterion {id:>2} {name}: {} checks, {:.1}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        checks.len(),
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    for c in &checks {
        println!("      {c}");
    }
    Outcome { id, name, pass }
}

fn trend_checks(report: crtwalk_harness::Result<TrendReport>) -> Vec<Check> {
    match report {
        Ok(r) => r.verdicts(),
        Err(e) => vec![Check::new("run", false, e.to_string())],
    }
}

fn or_fail(r: crtwalk_harness::Result<Vec<Check>>) -> Vec<Check> {
    r.unwrap_or_else(|e| vec![Check::new("run", false, e.to_string())])
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let mut out = Vec::new();

    // trees up to 6 vertices, D in {1, 2, 3}
    // both checks come from one enumeration; each criterion times its own run
    out.push(criterion(1, "exit-time mean formula", secs(10), || {
        or_fail(exit_time_checks(6, 3)).into_iter().take(1).collect()
    }));
    out.push(criterion(2, "exit-time second-moment bound", secs(30), || {
        or_fail(exit_time_checks(6, 3)).into_iter().skip(1).collect()
    }));

    // oracle tol 1e-12 for k <= 10; Monte Carlo 1e5 replicas, 3 SE per bin
    out.push(criterion(3, "visit-count law", secs(120), || {
        or_fail(visit_count_checks(100_000, derive_seed(SEED, 3)))
    }));

    // h = 0.02, 1e5 replicas, tol 0.01; grid oracle tol 0.02
    out.push(criterion(4, "hitting probability", secs(300), || {
        or_fail(hitting_probability_checks(0.02, 100_000, derive_seed(SEED, 4)))
    }));

    // h = 0.01, 1e5 replicas, relative tol 0.05
    out.push(criterion(5, "mean occupation", secs(300), || {
        or_fail(occupation_mean_checks(0.01, 100_000, derive_seed(SEED, 5)))
    }));

    // R = 2, n = 50, 1e4 replicas, envelope excess <= 3 SE
    out.push(criterion(6, "occupation tail envelope", secs(120), || {
        or_fail(occupation_tail_check(2, 50, 10_000, derive_seed(SEED, 6)).map(|c| vec![c]))
    }));

    // 100 instances, 50 trees, isometry tol 1e-12
    out.push(criterion(7, "structural exactness", secs(60), || {
        or_fail(structural_checks(100, 50, derive_seed(SEED, 7)))
    }));

    out.push(criterion(8, "vertex selection law", secs(60), || vec![gamma_law_check(6)]));

    // k in {2, 4, 8, 16}, 20 path seeds, h = 0.01, at most 1 inversion
    out.push(criterion(9, "additive functional clock trend", secs(900), || {
        let cfg = ExperimentConfig { seeds: 20, h: 0.01, k_list: vec![2, 4, 8, 16], ..ExperimentConfig::a_hat_trend() };
        trend_checks(run_a_hat_trend(&cfg))
    }));

    // n = 2000, geometric(1/2), 20 seeds, at most 1 inversion
    out.push(criterion(10, "tightness trends", secs(1200), || {
        let cfg = ExperimentConfig {
            n_list: vec![2000],
            k_list: vec![2, 4, 8, 16, 32],
            seeds: 20,
            offspring: "geometric:0.5".into(),
            ..ExperimentConfig::tightness()
        };
        trend_checks(run_tightness_suite(&cfg))
    }));

    // n in {250, 500, 1000, 2000}, 2000 replicas, both modes, at most 1 inversion
    out.push(criterion(11, "walk marginal KS trend", secs(1800), || {
        let base = ExperimentConfig {
            n_list: vec![250, 500, 1000, 2000],
            replicas: 2000,
            ..ExperimentConfig::convergence()
        };
        let mut checks = trend_checks(marginal_ks_trend(&base));
        checks.extend(trend_checks(marginal_ks_trend(&ExperimentConfig { annealed: true, ..base })));
        checks
    }));

    let failed: Vec<String> = out.iter().filter(|o| !o.pass).map(|o| format!("{} ({})", o.id, o.name)).collect();
    println!("{} of {} criteria pass", out.len() - failed.len(), out.len());
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
