//! Exact-formula and oracle checks: exit times, visit counts, hitting
//! probabilities, mean occupation, occupation tails and the structural
//! identities of the encodings.

use crtwalk::diffusion::{hitting_prob_estimate, hitting_prob_formula, occupation_density_check, occupation_quadrature, GridTree};
use crtwalk::discrete_tree::{
    enumerate_ordered_trees, projection_counts, reduced_subtree, sample_gw_conditioned, select_vertices,
    tree_from_depth, Offspring,
};
use crtwalk::embedding::sequential_embed;
use crtwalk::excursion::{sample_brownian_excursion, ExcursionSampler};
use crtwalk::metric_tree::{reduced_tree_from_indices, EdgeMeasure, MetricTree, TreePoint};
use crtwalk::oracles::{
    exit_time_mean_formula, exit_time_moments_exact, exit_time_second_moment_bound, gamma_law_exact,
    grid_hitting_probability, visit_count_pmf_exact, visit_count_pmf_formula,
};
use crtwalk::rng::{derive_seed, rng_from_seed};
use crtwalk::stats::least_squares;
use crtwalk::walk::{a_hat, a_hat_from_local_times, jump_chain, occupation_samples, occupation_tail, simulate_srw, visits_before_return};
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::report::Check;

/// Sizes of the formula suite; the defaults are the acceptance sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormulaConfig {
    pub max_tree_size: usize,
    pub max_pendants: usize,
    pub visit_replicas: usize,
    pub hitting_replicas: usize,
    pub hitting_h: f64,
    pub occupation_replicas: usize,
    pub occupation_h: f64,
    pub tail_replicas: usize,
    pub structural_instances: usize,
    pub isometry_trees: usize,
    pub seed: u64,
}

impl Default for FormulaConfig {
    fn default() -> Self {
        FormulaConfig {
            max_tree_size: 6,
            max_pendants: 3,
            visit_replicas: 100_000,
            hitting_replicas: 100_000,
            hitting_h: 0.02,
            occupation_replicas: 100_000,
            occupation_h: 0.01,
            tail_replicas: 10_000,
            structural_instances: 100,
            isometry_trees: 50,
            seed: 2024,
        }
    }
}

fn ratio_str(r: &num_rational::BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Exit-time mean equals `(2|T| - 2 + D) / D` exactly, and the second
/// moment stays below `36 (D + h) |T|^2 / D`, for every ordered tree up to
/// the given size.
pub fn exit_time_checks(max_size: usize, max_pendants: usize) -> Result<Vec<Check>> {
    let mut instances = 0;
    let mut mean_fail = Vec::new();
    let mut bound_fail = Vec::new();
    let mut worst_ratio = 0.0f64;
    for size in 1..=max_size {
        for t in enumerate_ordered_trees(size) {
            for d in 1..=max_pendants {
                instances += 1;
                let (m, s) = exit_time_moments_exact(&t, d)?;
                let f = exit_time_mean_formula(size, d);
                if m != f {
                    mean_fail.push(format!("{:?} D={d}: {} vs {}", t.search_depth(), ratio_str(&m), ratio_str(&f)));
                }
                let b = exit_time_second_moment_bound(size, d, t.height());
                if s > b {
                    bound_fail.push(format!("{:?} D={d}", t.search_depth()));
                }
                worst_ratio = worst_ratio.max((s / b).to_f64().unwrap_or(f64::NAN));
            }
        }
    }
    Ok(vec![
        Check::new(
            "exit-time mean formula",
            mean_fail.is_empty(),
            format!("{instances} (tree, D) instances, |T| <= {max_size}, D <= {max_pendants}, exact rational; failures: {mean_fail:?}"),
        ),
        Check::new(
            "exit-time second-moment bound",
            bound_fail.is_empty(),
            format!("{instances} instances, exact rational; largest oracle/bound ratio {worst_ratio:.4}; failures: {bound_fail:?}"),
        ),
    ])
}

/// Visit-count law: oracle vs closed form, then Monte Carlo at one gadget.
pub fn visit_count_checks(replicas: usize, seed: u64) -> Result<Vec<Check>> {
    const KMAX: usize = 10;
    const TOL: f64 = 1e-12;
    let mut worst = 0.0f64;
    let mut configs = 0;
    for l in 1..=3 {
        for d1 in 1..=3 {
            for d2 in 1..=3 {
                configs += 1;
                let exact = visit_count_pmf_exact(l, d1, d2, KMAX)?;
                for (k, p) in exact.iter().enumerate() {
                    let diff = (p - visit_count_pmf_formula(l, d1, d2, k)).to_f64().unwrap().abs();
                    worst = worst.max(diff);
                }
            }
        }
    }
    let mut out = vec![Check::new(
        "visit-count pmf oracle",
        worst <= TOL,
        format!("{configs} gadgets, k <= {KMAX}: max |oracle - formula| = {worst:.3e} (tol {TOL:e})"),
    )];

    let (l, d1, d2) = (3, 2, 2);
    let samples = visits_before_return(l, d1, d2, replicas, seed)?;
    let r = samples.len() as f64;
    let mut bad_bins = Vec::new();
    let mut worst_z = 0.0f64;
    for k in 0..=KMAX {
        let p = visit_count_pmf_formula(l, d1, d2, k).to_f64().unwrap();
        let f = samples.iter().filter(|&&s| s == k as u64).count() as f64 / r;
        let se = (p * (1.0 - p) / r).sqrt();
        let z = (f - p).abs() / se;
        worst_z = worst_z.max(z);
        if z > 3.0 {
            bad_bins.push(k);
        }
    }
    out.push(Check::new(
        "visit-count pmf Monte Carlo",
        bad_bins.is_empty(),
        format!("(L,D1,D2)=({l},{d1},{d2}), {replicas} replicas, bins 0..={KMAX}: worst |z| = {worst_z:.2} (tol 3); bins outside: {bad_bins:?}"),
    ));
    let eta: Vec<f64> = samples.iter().map(|&s| s as f64 / d2 as f64 - 1.0 / d1 as f64).collect();
    let m = crtwalk::stats::mean(&eta);
    let se = crtwalk::stats::std_error(&eta);
    out.push(Check::new(
        "visit-count centred mean",
        m.abs() <= 3.0 * se,
        format!("mean eta = {m:.5}, SE {se:.5} (tol 3 SE)"),
    ));
    Ok(out)
}

/// A root edge of length 0.2 to a branch point carrying three leaf edges of
/// lengths 0.4, 0.5 and 0.3.
pub fn three_leaf_tree() -> MetricTree {
    MetricTree::from_parts(
        vec![None, Some(0), Some(1), Some(1), Some(1)],
        vec![0.0, 0.2, 0.4, 0.5, 0.3],
        vec![
            TreePoint { node: 2, offset: 0.4 },
            TreePoint { node: 3, offset: 0.5 },
            TreePoint { node: 4, offset: 0.3 },
        ],
        vec![0.25, 0.5, 0.75],
    )
    .expect("fixed tree is valid")
}

/// Hitting probability of the grid diffusion against `d(b(z,x,y),y)/d(x,y)`.
pub fn hitting_probability_checks(h: f64, replicas: usize, seed: u64) -> Result<Vec<Check>> {
    const MC_TOL: f64 = 0.01;
    const ORACLE_TOL: f64 = 0.02;
    let tree = three_leaf_tree();
    let grid = GridTree::new(&tree, h)?;
    let x = tree.leaves()[0];
    let y = tree.leaves()[1];
    let z = TreePoint { node: 4, offset: 0.2 };
    let formula = hitting_prob_formula(&tree, &z, &x, &y);
    let (gx, gy, gz) = (grid.nearest_vertex(&x), grid.nearest_vertex(&y), grid.nearest_vertex(&z));
    let (p, se) = hitting_prob_estimate(&grid, gz, gx, gy, replicas, seed);
    let exact = grid_hitting_probability(&grid, gz, gx, gy)?;
    Ok(vec![
        Check::new(
            "hitting probability Monte Carlo",
            (p - formula).abs() <= MC_TOL,
            format!("h={h}, {replicas} replicas: empirical {p:.4} (SE {se:.4}) vs formula {formula:.4}, tol {MC_TOL}"),
        ),
        Check::new(
            "hitting probability grid oracle",
            (exact - formula).abs() <= ORACLE_TOL,
            format!("grid chain exact {exact:.6} vs formula {formula:.6}, tol {ORACLE_TOL}"),
        ),
    ])
}

/// Mean hitting time against the quadrature of `2 d(b(z,x,y),y) nu(dz)`.
pub fn occupation_mean_checks(h: f64, replicas: usize, seed: u64) -> Result<Vec<Check>> {
    const REL_TOL: f64 = 0.05;
    let unit = MetricTree::from_parts(
        vec![None, Some(0)],
        vec![0.0, 1.0],
        vec![TreePoint { node: 1, offset: 1.0 }],
        vec![0.5],
    )?;
    let length = |t: &MetricTree| EdgeMeasure {
        atoms: Vec::new(),
        density: (0..t.n_nodes()).map(|v| if v == 0 { 0.0 } else { 1.0 }).collect(),
    };
    let q_unit = occupation_quadrature(&unit, &length(&unit), &TreePoint::ROOT, &unit.leaves()[0]);
    let tree = three_leaf_tree();
    let x = tree.leaves()[0];
    let y = tree.leaves()[1];
    let (m, q) = occupation_density_check(&tree, &length(&tree), &x, &y, h, replicas, seed)?;
    let rel = (m.mean - q).abs() / q;
    Ok(vec![
        Check::new(
            "mean occupation unit segment",
            (q_unit - 1.0).abs() < 1e-12,
            format!("quadrature {q_unit:.15} vs 1"),
        ),
        Check::new(
            "mean occupation three-leaf tree",
            rel <= REL_TOL,
            format!(
                "h={h}, {replicas} replicas: E_x sigma_y = {:.4} (SE {:.4}) vs quadrature {q:.4}, relative error {rel:.4}, tol {REL_TOL}",
                m.mean, m.se_mean
            ),
        ),
    ])
}

/// Fit of the occupation log-tail: least-squares slope and the smallest
/// intercept lift giving a line that no point exceeds by more than 3 SE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// `(t, P(xi >= t n), SE)` on the points used.
    pub points: Vec<(f64, f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub lift: f64,
    /// Largest excess of a log-tail point over the envelope, in SE units.
    pub worst_excess: f64,
}

pub fn fit_occupation_tail(samples: &[u64], n: usize, min_hits: f64) -> TailFit {
    let t_grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
    let r = samples.len() as f64;
    let points: Vec<(f64, f64, f64)> = occupation_tail(samples, n, &t_grid)
        .into_iter()
        .filter(|&(_, p, _)| p * r >= min_hits)
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (a, b) = least_squares(&xs, &ys);
    // SE of log p by the delta method; the point p = 1 has none.
    let log_se = |p: &(f64, f64, f64)| if p.1 < 1.0 { p.2 / p.1 } else { 0.0 };
    let lift = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| y - 3.0 * log_se(p) - (a + b * p.0))
        .fold(0.0f64, f64::max);
    let worst_excess = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| {
            let over = y - (a + lift + b * p.0);
            let se = log_se(p);
            if over <= 0.0 {
                0.0
            } else if se > 0.0 {
                over / se
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0f64, f64::max);
    TailFit { points, slope: b, intercept: a, lift, worst_excess }
}

pub fn occupation_tail_check(r: usize, n: usize, replicas: usize, seed: u64) -> Result<Check> {
    let samples = occupation_samples(r, n, 0, replicas, seed)?;
    let fit = fit_occupation_tail(&samples, n, 10.0);
    let monotone = fit.points.windows(2).all(|w| w[1].1 <= w[0].1);
    let starts_at_one = fit.points.first().is_some_and(|p| p.0 == 0.0 && p.1 == 1.0);
    let pass = fit.slope < 0.0 && fit.worst_excess <= 3.0 && monotone && starts_at_one;
    Ok(Check::new(
        "occupation tail envelope",
        pass,
        format!(
            "R={r}, n={n}, {replicas} replicas, {} points: slope {:.4}, intercept {:.4} lifted by {:.4}, worst excess {:.2} SE (tol 3), tail monotone {monotone}",
            fit.points.len(),
            fit.slope,
            fit.intercept,
            fit.lift,
            fit.worst_excess
        ),
    ))
}

/// Contour round trip, walk recovery and clock identities, embedding
/// isometry.
pub fn structural_checks(instances: usize, trees: usize, seed: u64) -> Result<Vec<Check>> {
    let mut round_trips = 0;
    let mut round_trip_ok = true;
    for n in 1..=7 {
        for t in enumerate_ordered_trees(n) {
            round_trips += 1;
            round_trip_ok &= tree_from_depth(&t.contour().depth)? == t;
        }
    }
    let mut out = vec![Check::new(
        "contour round trip",
        round_trip_ok,
        format!("{round_trips} ordered trees with n <= 7"),
    )];

    let geometric = Offspring::Geometric { p: 0.5 };
    let results: Vec<Result<(bool, bool, usize)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let mut rng = rng_from_seed(s);
            let n = rng.random_range(3..=80);
            let t = sample_gw_conditioned(&geometric, n, s)?;
            let c = t.contour();
            let k = rng.random_range(1..=5);
            let u: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let sub = reduced_subtree(&t, &select_vertices(&c, &u)?)?;
            let m = rng.random_range(0..=3000);
            let path = simulate_srw(&t, m, s ^ 0x5bd1);
            let jc = jump_chain(&path.steps, &sub);
            let recovery = path.steps.iter().enumerate().all(|(mm, &x)| sub.proj[x as usize] == jc.jumps[jc.tau(mm)]);
            if sub.edges() == 0 {
                return Ok((recovery, true, 0));
            }
            let counts = projection_counts(&sub);
            let mu: Vec<Ratio<i64>> = counts.iter().map(|&c| Ratio::new(c as i64, n as i64)).collect();
            let exact = a_hat_from_local_times(&jc.jumps, &sub, &mu, Ratio::from_integer(n as i64))?;
            let dense: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            let fast = a_hat(&jc.jumps, &sub, &dense, n)?;
            let mut increments = true;
            for l in 1..exact.len() {
                let x = jc.jumps[l - 1];
                let want = Ratio::new(2 * n as i64, sub.degree[x] as i64) * mu[x];
                increments &= exact[l] - exact[l - 1] == want;
                let f = exact[l].to_f64().unwrap();
                increments &= (fast[l] - f).abs() <= 1e-9 * f.max(1.0);
            }
            Ok((recovery, increments, jc.len()))
        })
        .collect();
    let mut recovery_ok = 0;
    let mut clock_ok = 0;
    let mut jumps = 0;
    for r in results {
        let (a, b, j) = r?;
        recovery_ok += usize::from(a);
        clock_ok += usize::from(b);
        jumps += j;
    }
    out.push(Check::new(
        "walk recovery identity",
        recovery_ok == instances,
        format!("{recovery_ok}/{instances} random (tree, subtree, path) instances exact"),
    ));
    out.push(Check::new(
        "clock increment identity",
        clock_ok == instances,
        format!("{clock_ok}/{instances} instances exact in rational arithmetic ({jumps} jumps)"),
    ));

    let errors: Vec<Result<(f64, usize)>> = (0..trees)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed ^ 0xe3b, i as u64);
            let sampler = if i % 2 == 0 { ExcursionSampler::ConditionedWalk } else { ExcursionSampler::Vervaat };
            let w = sample_brownian_excursion(2000, s, sampler)?;
            let mut rng = rng_from_seed(s);
            let k = rng.random_range(1..=12);
            let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..=w.grid_size())).collect();
            let tree = reduced_tree_from_indices(&w, &idx)?;
            let psi = sequential_embed(&tree);
            let mut pts: Vec<TreePoint> = (0..tree.n_nodes()).map(|v| tree.node_point(v)).collect();
            pts.extend(tree.leaves().iter().copied());
            let img = psi.embed_all(&tree, &pts)?;
            let mut worst = 0.0f64;
            let mut pairs = 0;
            for a in 0..pts.len() {
                for b in a..pts.len() {
                    pairs += 1;
                    worst = worst.max((img[a].l1_distance(&img[b]) - tree.distance(&pts[a], &pts[b])).abs());
                }
            }
            Ok((worst, pairs))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for e in errors {
        let (w, p) = e?;
        worst = worst.max(w);
        pairs += p;
    }
    out.push(Check::new(
        "embedding isometry",
        worst <= 1e-12,
        format!("{trees} trees, {pairs} vertex pairs: max error {worst:.3e} (tol 1e-12)"),
    ));
    Ok(out)
}

/// The time-to-vertex map sends a uniform time to a uniform vertex, exactly.
pub fn gamma_law_check(max_n: usize) -> Check {
    let mut trees = 0;
    let mut bad = Vec::new();
    for n in 1..=max_n {
        for t in enumerate_ordered_trees(n) {
            trees += 1;
            let c = t.contour();
            let law = gamma_law_exact(&c.depth, &c.vertex, n);
            if law.iter().any(|p| *p != Ratio::new(1, n as i64)) {
                bad.push(t.search_depth());
            }
        }
    }
    Check::new(
        "vertex selection law",
        bad.is_empty(),
        format!("{trees} ordered trees with n <= {max_n}, exact rational; non-uniform: {bad:?}"),
    )
}

/// Every check of the formula suite, in acceptance order.
pub fn run_formula_suite(cfg: &FormulaConfig) -> Result<Vec<Check>> {
    let mut out = exit_time_checks(cfg.max_tree_size, cfg.max_pendants)?;
    out.extend(visit_count_checks(cfg.visit_replicas, derive_seed(cfg.seed, 3))?);
    out.extend(hitting_probability_checks(cfg.hitting_h, cfg.hitting_replicas, derive_seed(cfg.seed, 4))?);
    out.extend(occupation_mean_checks(cfg.occupation_h, cfg.occupation_replicas, derive_seed(cfg.seed, 5))?);
    out.push(occupation_tail_check(2, 50, cfg.tail_replicas, derive_seed(cfg.seed, 6))?);
    out.extend(structural_checks(cfg.structural_instances, cfg.isometry_trees, derive_seed(cfg.seed, 7))?);
    out.push(gamma_law_check(6));
    Ok(out)
}
