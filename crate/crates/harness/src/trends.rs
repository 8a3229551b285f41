//! Trend experiments: statistics that should shrink along a parameter.

use crtwalk::diffusion::{grid_bm_with, trace_on_subtree, DiffusionPath, GridTree};
use crtwalk::discrete_tree::{
    delta, gamma_index, projection_counts, reduced_subtree, sample_gw_conditioned, select_vertices,
    AtomicMeasure, DiscreteSubtree, OrderedTree,
};
use crtwalk::embedding::{hausdorff_l1, merge_atoms, sequential_embed, w1_l1, SparseVector};
use crtwalk::excursion::{sample_brownian_excursion, Excursion, ExcursionSampler};
use crtwalk::metric_tree::{mu_k_measure, reduced_tree_from_indices, EdgeMeasure, MetricTree, TreePoint};
use crtwalk::rng::{derive_seed, replica_rng, rng_from_seed, Rng};
use crtwalk::stats::ks_statistic;
use crtwalk::walk::{a_hat, jump_chain, simulate_srw_with};
use rand::Rng as _;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::coupling::MasterContour;
use crate::error::{HarnessError, Result};
use crate::report::{Axis, Check, TrendReport};

const TARGET_ATTEMPTS: u64 = 1000;

fn max_k(cfg: &ExperimentConfig) -> usize {
    *cfg.k_list.iter().max().unwrap()
}

/// Uniform grid indices for `k` leaves.
fn leaf_indices(w: &Excursion, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    (0..k).map(|_| rng.random_range(0..=w.grid_size())).collect()
}

/// First attempt `j` whose leaves give a tree with every edge at least `h`
/// long, so that a grid of spacing `h` resolves it.
fn resolvable_leaves(w: &Excursion, k: usize, h: f64, seed: u64) -> Result<(Vec<usize>, MetricTree, u64)> {
    for j in 0..TARGET_ATTEMPTS {
        let idx = leaf_indices(w, k, derive_seed(seed, j));
        let tree = reduced_tree_from_indices(w, &idx)?;
        if tree.n_nodes() > 1 && tree.min_edge() >= h {
            return Ok((idx, tree, j));
        }
    }
    Err(HarnessError::Config(format!("no leaf set with all edges >= {h} in {TARGET_ATTEMPTS} attempts")))
}

/// `sup_{t <= horizon} |F(t) - t|` for a clock given at visit boundaries and
/// linear in between.
pub fn clock_sup_error(clock: &[(f64, f64)], horizon: f64) -> f64 {
    let mut best = 0.0f64;
    for pair in clock.windows(2) {
        let ((t0, v0), (t1, v1)) = (pair[0], pair[1]);
        if t0 > horizon {
            break;
        }
        best = best.max((v0 - t0).abs());
        if t1 <= horizon {
            best = best.max((v1 - t1).abs());
        } else {
            let v = v0 + (v1 - v0) * (horizon - t0) / (t1 - t0);
            best = best.max((v - horizon).abs());
        }
    }
    best
}

/// Mass of `m` moved to the nearest kept vertex toward the root.
fn project_mass(m: &[f64], proj: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for (x, &w) in m.iter().enumerate() {
        out[proj[x]] += w;
    }
    out
}

/// Clock error of the additive functional: on one excursion, grid Brownian
/// motion on the tree spanned by the largest `k` is traced onto the trees
/// spanned by each `k` in the list, and `sup_{t <= R} |int L_t dmu_k - t|`
/// is recorded per path seed.
pub fn run_a_hat_trend(cfg: &ExperimentConfig) -> Result<TrendReport> {
    cfg.validate()?;
    let kmax = max_k(cfg);
    let excursion_seed = derive_seed(cfg.master_seed, 0);
    let w = sample_brownian_excursion(cfg.excursion_grid, excursion_seed, ExcursionSampler::ConditionedWalk)?;
    let (_, tree, attempt) = resolvable_leaves(&w, kmax, cfg.h, derive_seed(cfg.master_seed, 1))?;
    let grid = GridTree::new(&tree, cfg.h)?;
    let mu = grid.lump(&mu_k_measure(&w, &tree, w.grid_size())?);
    let host_speed = grid.normalized_length_on(&vec![true; grid.len()]);
    let levels: Vec<(usize, Vec<bool>, Vec<f64>, Vec<f64>)> = cfg
        .k_list
        .iter()
        .map(|&k| {
            let keep = grid.subtree_vertices(&tree, k);
            let proj = grid.project_onto(&keep);
            let speed = grid.normalized_length_on(&keep);
            (k, keep, speed, project_mass(&mu, &proj))
        })
        .collect();
    let path_seed = derive_seed(cfg.master_seed, 2);
    let rows: Vec<Vec<(usize, f64)>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|j| {
            let mut horizon = 1.5 * cfg.horizon;
            loop {
                let mut rng = replica_rng(path_seed, j as u64);
                let path = grid_bm_with(&grid, &host_speed, 0, horizon, false, &mut rng);
                let traces: Vec<DiffusionPath> =
                    levels.iter().map(|(_, keep, speed, _)| trace_on_subtree(&path, keep, speed)).collect();
                if traces.iter().all(|t| t.end >= cfg.horizon) {
                    return levels
                        .iter()
                        .zip(&traces)
                        .map(|((k, _, _, mu_k), t)| (*k, clock_sup_error(&t.additive_functional(mu_k), cfg.horizon)))
                        .collect();
                }
                horizon *= 2.0;
            }
        })
        .collect();
    let mut report = TrendReport::new("additive functional", Axis::K, "normalized length");
    for (j, row) in rows.iter().enumerate() {
        for &(k, v) in row {
            report.push("sup_clock_error", cfg.excursion_grid, k, j, v);
        }
    }
    report.extra.push(Check::new(
        "additive functional setup",
        true,
        format!(
            "excursion grid {}, {} leaves (leaf draw {attempt}), total length {:.4}, min edge {:.4}, {} grid vertices at h={}",
            cfg.excursion_grid,
            kmax,
            tree.total_length(),
            tree.min_edge(),
            grid.len(),
            cfg.h
        ),
    ));
    Ok(report)
}

/// The three sup-statistics of one (tree, leaves, walk) sample at one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightnessStats {
    /// `n^{-3/2} sup_{m <= R n Lambda} |A_m - A-hat_m|`.
    pub clock_gap: f64,
    /// `sup_{t <= R} |n^{-3/2} A_{t n Lambda} - t|`.
    pub clock_drift: f64,
    /// `n^{-1/2} Delta`.
    pub projection_gap: f64,
}

fn tightness_stats(tree: &OrderedTree, sub: &DiscreteSubtree, steps: &[u32], horizon: f64) -> Result<TightnessStats> {
    let n = tree.n();
    let nf = n as f64;
    let scale = nf.powf(-1.5);
    let rate = nf.sqrt() * sub.edges() as f64;
    let last = (horizon * rate).floor() as usize;
    let jc = jump_chain(steps, sub);
    if jc.len() <= last {
        return Err(HarnessError::Config("walk too short for the requested horizon".into()));
    }
    let mu = crtwalk::walk::dense_measure(&crtwalk::discrete_tree::pushforward_measure(sub, &AtomicMeasure::uniform(n)), n);
    let hat = a_hat(&jc.jumps, sub, &mu, n)?;
    let mut gap = 0.0f64;
    let mut drift = 0.0f64;
    for l in 0..=last {
        let a = jc.times[l] as f64;
        gap = gap.max((a - hat[l]).abs() * scale);
        let t0 = l as f64 / rate;
        let t1 = ((l + 1) as f64 / rate).min(horizon);
        drift = drift.max((a * scale - t0).abs()).max((a * scale - t1).abs());
    }
    Ok(TightnessStats { clock_gap: gap, clock_drift: drift, projection_gap: delta(tree, sub) as f64 / nf.sqrt() })
}

/// Conditioned Galton-Watson trees of each size in `n_list`; per seed, the
/// clock and projection sup-statistics at every `k` for one walk.
pub fn run_tightness_suite(cfg: &ExperimentConfig) -> Result<TrendReport> {
    cfg.validate()?;
    let offspring = cfg.offspring_law()?;
    let kmax = max_k(cfg);
    if let Some(&n) = cfg.n_list.iter().find(|&&n| kmax * 10 > n) {
        return Err(HarnessError::Config(format!("k = {kmax} is not small against n = {n}")));
    }
    let mut report = TrendReport::new("tightness", Axis::K, "walk steps / n^{3/2}");
    for &n in &cfg.n_list {
        let rows: Vec<Result<Vec<(usize, TightnessStats)>>> = (0..cfg.seeds)
            .into_par_iter()
            .map(|s| {
                let seed = derive_seed(cfg.master_seed, ((n as u64) << 20) | s as u64);
                let tree = sample_gw_conditioned(&offspring, n, seed)?;
                let mut rng = replica_rng(seed, 1);
                let u: Vec<f64> = (0..kmax).map(|_| rng.random()).collect();
                let v = select_vertices(&tree.contour(), &u)?;
                let subs = cfg
                    .k_list
                    .iter()
                    .map(|&k| Ok((k, reduced_subtree(&tree, &v[..k])?)))
                    .collect::<Result<Vec<_>>>()?;
                if let Some((k, _)) = subs.iter().find(|(_, s)| s.edges() == 0) {
                    return Err(HarnessError::Config(format!("degenerate subtree at k = {k}")));
                }
                let mut steps = (2.0 * cfg.horizon * (n as f64).powf(1.5)).ceil() as usize;
                loop {
                    let path = simulate_srw_with(&tree, tree.root(), steps, &mut replica_rng(seed, 2));
                    let stats: Result<Vec<_>> = subs
                        .iter()
                        .map(|(k, sub)| Ok((*k, tightness_stats(&tree, sub, &path, cfg.horizon)?)))
                        .collect();
                    match stats {
                        Ok(s) => return Ok(s),
                        Err(HarnessError::Config(_)) => steps *= 2,
                        Err(e) => return Err(e),
                    }
                }
            })
            .collect();
        for (s, row) in rows.into_iter().enumerate() {
            for (k, st) in row? {
                report.push("clock_gap", n, k, s, st.clock_gap);
                report.push("clock_drift", n, k, s, st.clock_drift);
                report.push("projection_gap", n, k, s, st.projection_gap);
            }
        }
    }
    if cfg.n_list.len() > 1 {
        // the verdict is taken at the largest n
        let top = *cfg.n_list.iter().max().unwrap();
        report.samples.retain(|s| s.n == top);
    }
    Ok(report)
}

/// `n^{-1/2} d(root, X_{floor(n^{3/2})})` for walks on a tree.
fn walk_marginal(tree: &OrderedTree, replicas: usize, seed: u64) -> Vec<f64> {
    let n = tree.n() as f64;
    let steps = n.powf(1.5).floor() as usize;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let path = simulate_srw_with(tree, tree.root(), steps, &mut replica_rng(seed, r as u64));
            tree.depth(*path.last().unwrap() as usize) as f64 / n.sqrt()
        })
        .collect()
}

/// Same marginal with a fresh tree per replica.
fn annealed_marginal(offspring: &crtwalk::discrete_tree::Offspring, n: usize, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    let steps = (n as f64).powf(1.5).floor() as usize;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let tree = sample_gw_conditioned(offspring, n, derive_seed(seed, r as u64))?;
            let path = simulate_srw_with(&tree, tree.root(), steps, &mut replica_rng(seed, r as u64));
            Ok(tree.depth(*path.last().unwrap() as usize) as f64 / (n as f64).sqrt())
        })
        .collect()
}

/// Two-sample KS distance between the rescaled walk marginals at
/// consecutive sizes. Quenched mode fixes one tree per size, all read off a
/// common master contour; annealed mode draws a new tree per replica.
pub fn marginal_ks_trend(cfg: &ExperimentConfig) -> Result<TrendReport> {
    cfg.validate()?;
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    let (name, stat) = if cfg.annealed { ("annealed marginal", "ks_annealed") } else { ("quenched marginal", "ks_quenched") };
    let mut report = TrendReport::new(name, Axis::N, "walk steps / n^{3/2}");
    let mut samples = Vec::with_capacity(ns.len());
    let mut realised = Vec::with_capacity(ns.len());
    if cfg.annealed {
        let offspring = cfg.offspring_law()?;
        for &n in &ns {
            samples.push(annealed_marginal(&offspring, n, cfg.replicas, derive_seed(cfg.master_seed, 100 + n as u64))?);
            realised.push(n);
        }
    } else {
        let master = MasterContour::sample(cfg.master_size, derive_seed(cfg.master_seed, 0))?;
        for &n in &ns {
            let tree = master.coarse_tree(n)?;
            realised.push(tree.n());
            samples.push(walk_marginal(&tree, cfg.replicas, derive_seed(cfg.master_seed, 200 + n as u64)));
        }
    }
    for i in 0..ns.len().saturating_sub(1) {
        report.push(stat, ns[i], 0, 0, ks_statistic(&samples[i], &samples[i + 1]));
    }
    report.extra.push(Check::new(
        format!("{name} sizes"),
        true,
        format!("nominal {ns:?}, realised {realised:?}, {} replicas each", cfg.replicas),
    ));
    Ok(report)
}

fn snap(tree: &MetricTree, p: &TreePoint, step: f64) -> TreePoint {
    let p = tree.normalize(*p);
    if p.node == 0 {
        return p;
    }
    let off = ((p.offset / step).round() * step).min(tree.length(p.node));
    tree.normalize(TreePoint { node: p.node, offset: off })
}

fn embedded_measure(tree: &MetricTree, atoms: &[(TreePoint, f64)], step: f64) -> Result<Vec<(SparseVector, f64)>> {
    let psi = sequential_embed(tree);
    let pts: Vec<TreePoint> = atoms.iter().map(|(p, _)| snap(tree, p, step)).collect();
    let img = psi.embed_all(tree, &pts)?;
    Ok(merge_atoms(img.into_iter().zip(atoms.iter().map(|a| a.1)).collect()))
}

fn embedded_cloud(tree: &MetricTree, spacing: f64) -> Result<Vec<SparseVector>> {
    Ok(sequential_embed(tree).embed_all(tree, &tree.sample_points(spacing))?)
}

/// Uniform measure on the vertices of `tree`, projected onto the subtree
/// spanned by `verts` and placed on the metric tree `metric` (whose leaves
/// are `verts` in order, scaled by `scale`).
fn projected_vertex_measure(
    tree: &OrderedTree,
    verts: &[usize],
    metric: &MetricTree,
    scale: f64,
) -> Result<Vec<(TreePoint, f64)>> {
    let sub = reduced_subtree(tree, verts)?;
    let mut leaf_of = vec![usize::MAX; tree.n()];
    for (i, &v) in verts.iter().enumerate() {
        let mut x = Some(v);
        while let Some(y) = x {
            if leaf_of[y] != usize::MAX {
                break;
            }
            leaf_of[y] = i;
            x = tree.parent(y);
        }
    }
    let counts = projection_counts(&sub);
    let n = tree.n() as f64;
    Ok(sub
        .members
        .iter()
        .filter(|&&p| counts[p] > 0)
        .map(|&p| {
            let leaf = metric.leaves()[leaf_of[p]];
            (metric.point_at_height(&leaf, tree.depth(p) as f64 * scale), counts[p] as f64 / n)
        })
        .collect())
}

/// Distance from the root of jump-chain positions at rescaled time
/// `horizon`, for walks on `tree` projected onto the subtree `sub`.
fn jump_chain_marginal(tree: &OrderedTree, sub: &DiscreteSubtree, horizon: f64, replicas: usize, seed: u64) -> Vec<f64> {
    let n = tree.n() as f64;
    let target = (horizon * n.sqrt() * sub.edges() as f64).floor() as usize;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng: Rng = replica_rng(seed, r as u64);
            let mut v = tree.root();
            let mut current = v;
            let mut jumps = 0;
            while jumps < target {
                let nb = tree.neighbors(v);
                v = nb[rng.random_range(0..nb.len())];
                if v != current && sub.in_sub[v] {
                    current = v;
                    jumps += 1;
                }
            }
            tree.depth(current) as f64 / n.sqrt()
        })
        .collect()
}

/// Distance from the root at time `horizon` of grid Brownian motion on
/// `tree` with the normalised length measure as speed.
fn diffusion_marginal(tree: &MetricTree, h: f64, horizon: f64, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    let grid = GridTree::new(tree, h)?;
    let speed = grid.normalized_length_on(&vec![true; grid.len()]);
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| {
            let path = grid_bm_with(&grid, &speed, 0, horizon, false, &mut replica_rng(seed, r as u64));
            tree.point_height(&grid.points[path.at(horizon) as usize])
        })
        .collect())
}

/// Quenched convergence along `n_list` at the largest `k`: Hausdorff and
/// Wasserstein-1 (Prohorov surrogate) distances in `l1` between the rescaled
/// embedded subtrees of the coupled discrete trees and the tree of the
/// master excursion, the KS distance between the rescaled jump-chain
/// marginal and the diffusion on the limiting subtree, and the KS trend of
/// the walk marginals.
pub fn run_quenched_convergence(cfg: &ExperimentConfig) -> Result<TrendReport> {
    cfg.validate()?;
    let k = max_k(cfg);
    let master = MasterContour::sample(cfg.master_size, derive_seed(cfg.master_seed, 0))?;
    let w = master.excursion()?;
    let (_, target, attempt) = resolvable_leaves(&w, k, cfg.h, derive_seed(cfg.master_seed, 1))?;
    let u: Vec<f64> = target.leaf_times().to_vec();
    let target_cloud = embedded_cloud(&target, cfg.cloud_spacing)?;
    let target_mu = mu_k_measure(&w, &target, cfg.excursion_grid)?;
    let target_measure = embedded_measure(&target, &edge_atoms(&target_mu), cfg.cloud_spacing)?;
    let diffusion = diffusion_marginal(&target, cfg.h, cfg.horizon, cfg.replicas, derive_seed(cfg.master_seed, 3))?;

    let name = if cfg.annealed { "convergence (annealed marginals)" } else { "convergence" };
    let mut report = TrendReport::new(name, Axis::N, "normalized length");
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    let mut realised = Vec::new();
    for &n in &ns {
        let tree = master.coarse_tree(n)?;
        let nn = tree.n();
        realised.push(nn);
        let scale = (nn as f64).powf(-0.5);
        let c = tree.contour();
        let idx = u.iter().map(|&t| gamma_index(&c.depth, t)).collect::<crtwalk::Result<Vec<_>>>()?;
        let verts: Vec<usize> = idx.iter().map(|&i| c.vertex[i]).collect();
        let wn = Excursion::from_depths(&c.depth)?;
        let tn = reduced_tree_from_indices(&wn, &idx)?.scaled(scale);
        let cloud = embedded_cloud(&tn, cfg.cloud_spacing)?;
        report.push("hausdorff", n, k, 0, hausdorff_l1(&cloud, &target_cloud));
        if n == ns[0] {
            let zero = hausdorff_l1(&cloud, &cloud);
            report.extra.push(Check::new("self distance", zero == 0.0, format!("Hausdorff of a cloud with itself = {zero}")));
        }
        let mu_n = projected_vertex_measure(&tree, &verts, &tn, scale)?;
        let measure = embedded_measure(&tn, &mu_n, cfg.cloud_spacing)?;
        report.push("w1_surrogate", n, k, 0, w1_l1(&measure, &target_measure));
        let sub = reduced_subtree(&tree, &verts)?;
        let walk = jump_chain_marginal(&tree, &sub, cfg.horizon, cfg.replicas, derive_seed(cfg.master_seed, 300 + n as u64));
        report.push("ks_jump_chain_vs_diffusion", n, k, 0, ks_statistic(&walk, &diffusion));
    }
    let marginal = marginal_ks_trend(cfg)?;
    report.samples.extend(marginal.samples);
    report.extra.extend(marginal.extra);
    report.extra.push(Check::new(
        "quenched setup",
        true,
        format!(
            "master tree {} vertices, k = {k} (leaf draw {attempt}), target length {:.4}, realised sizes {realised:?}; measure distance is Wasserstein-1 (Prohorov surrogate)",
            cfg.master_size,
            target.total_length()
        ),
    ));
    Ok(report)
}

/// Atoms of an edge measure (densities are not expected here).
fn edge_atoms(m: &EdgeMeasure) -> Vec<(TreePoint, f64)> {
    m.atoms.clone()
}
