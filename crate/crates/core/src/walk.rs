//! Simple random walks on ordered trees and their projections onto reduced
//! subtrees.
//!
//! The projected walk only changes value when the walk enters a subtree
//! vertex different from the current one. Recording those entrance times
//! `A_m` and targets `J_m` gives the jump chain; local times count visits of
//! the jump chain normalised by half the subtree degree.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete_tree::{AtomicMeasure, DiscreteSubtree, OrderedTree};
use crate::error::{Error, Result};
use crate::rng::{replica_rng, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    /// `X_0, ..., X_M`.
    pub steps: Vec<u32>,
    pub seed: u64,
}

#[inline]
fn step(tree: &OrderedTree, v: usize, rng: &mut Rng) -> usize {
    let nb = tree.neighbors(v);
    match nb.len() {
        0 => v,
        1 => nb[0],
        d => nb[rng.random_range(0..d)],
    }
}

/// Walk of `m` steps started at the root.
pub fn simulate_srw(tree: &OrderedTree, m: usize, seed: u64) -> WalkPath {
    let mut rng = rng_from_seed(seed);
    WalkPath { steps: simulate_srw_with(tree, tree.root(), m, &mut rng), seed }
}

pub fn simulate_srw_with(tree: &OrderedTree, start: usize, m: usize, rng: &mut Rng) -> Vec<u32> {
    let mut out = Vec::with_capacity(m + 1);
    let mut v = start;
    out.push(v as u32);
    for _ in 0..m {
        v = step(tree, v, rng);
        out.push(v as u32);
    }
    out
}

/// Entrance times `A_m` and targets `J_m` of the projected walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpChain {
    pub jumps: Vec<usize>,
    pub times: Vec<usize>,
}

impl JumpChain {
    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// `tau(m) = max { l : A_l <= m }`.
    pub fn tau(&self, m: usize) -> usize {
        self.times.partition_point(|&a| a <= m) - 1
    }
}

/// Projected path `phi(X_m)` and its jump chain. A crossing still under
/// way at the end of the path is dropped.
pub fn project_and_decompose(steps: &[u32], sub: &DiscreteSubtree) -> Result<(Vec<usize>, JumpChain)> {
    let first = *steps.first().ok_or_else(|| Error::InvalidArgument("empty path".into()))? as usize;
    if !sub.contains(first) {
        return Err(Error::InvalidArgument("path must start in the subtree".into()));
    }
    let projected = steps.iter().map(|&x| sub.proj[x as usize]).collect();
    Ok((projected, jump_chain(steps, sub)))
}

pub fn jump_chain(steps: &[u32], sub: &DiscreteSubtree) -> JumpChain {
    let mut jumps = vec![steps[0] as usize];
    let mut times = vec![0];
    let mut current = steps[0] as usize;
    for (l, &x) in steps.iter().enumerate().skip(1) {
        let x = x as usize;
        if x != current && sub.in_sub[x] {
            jumps.push(x);
            times.push(l);
            current = x;
        }
    }
    JumpChain { jumps, times }
}

/// Visit counts `l_m(x)` of the jump chain over indices `0..=m`.
pub fn visit_counts(jumps: &[usize], n: usize, m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for &x in &jumps[..=m.min(jumps.len() - 1)] {
        counts[x] += 1;
    }
    counts
}

/// Local times `L_m(x) = l_m(x) / (deg(x) / 2)` with degrees taken inside
/// the subtree.
pub fn local_times(jumps: &[usize], sub: &DiscreteSubtree, m: usize) -> Result<Vec<f64>> {
    if sub.edges() == 0 {
        return Err(Error::DegenerateSubtree);
    }
    let counts = visit_counts(jumps, sub.proj.len(), m);
    Ok(counts
        .iter()
        .zip(&sub.degree)
        .map(|(&c, &d)| if d == 0 { 0.0 } else { 2.0 * c as f64 / d as f64 })
        .collect())
}

/// `A-hat_0 = 0` and `A-hat_{m+1} = A-hat_m + 2 n mu({J_m}) / deg(J_m)`,
/// for `m = 0..len(J)`. `mu` is dense over host vertices.
pub fn a_hat(jumps: &[usize], sub: &DiscreteSubtree, mu: &[f64], n: usize) -> Result<Vec<f64>> {
    if sub.edges() == 0 {
        return Err(Error::DegenerateSubtree);
    }
    let mut out = Vec::with_capacity(jumps.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in jumps {
        acc += 2.0 * n as f64 * mu[x] / sub.degree[x] as f64;
        out.push(acc);
    }
    Ok(out)
}

/// `A-hat_m = n sum_x L_{m-1}(x) mu({x})` evaluated from the definition in
/// any numeric field.
pub fn a_hat_from_local_times<T>(jumps: &[usize], sub: &DiscreteSubtree, mu: &[T], n: T) -> Result<Vec<T>>
where
    T: Clone + num_traits::Num + num_traits::FromPrimitive,
{
    if sub.edges() == 0 {
        return Err(Error::DegenerateSubtree);
    }
    let two = T::from_u32(2).unwrap();
    let mut out = vec![T::zero()];
    for m in 1..=jumps.len() {
        let counts = visit_counts(jumps, sub.proj.len(), m - 1);
        let mut sum = T::zero();
        for &x in &sub.members {
            let l = T::from_u64(counts[x]).unwrap() * two.clone() / T::from_u32(sub.degree[x]).unwrap();
            sum = sum + l * mu[x].clone();
        }
        out.push(n.clone() * sum);
    }
    Ok(out)
}

/// `X-hat_t = J_{tau-hat(t)}` with `tau-hat(t) = max { m : A-hat_m <= t }`,
/// held at the last jump beyond the final knot.
pub fn hat_x(jumps: &[usize], a_hat: &[f64], t: f64) -> usize {
    let m = a_hat.partition_point(|&a| a <= t).max(1) - 1;
    jumps[m.min(jumps.len() - 1)]
}

/// Sample moments of a non-negative integer statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub replicas: usize,
    pub mean: f64,
    pub second: f64,
    pub se_mean: f64,
}

impl Moments {
    pub fn from_samples(x: &[f64]) -> Self {
        let r = x.len() as f64;
        let mean = x.iter().sum::<f64>() / r;
        let second = x.iter().map(|v| v * v).sum::<f64>() / r;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0);
        Moments { replicas: x.len(), mean, second, se_mean: (var / r).sqrt() }
    }
}

/// Exit times from the root of `tree` with `d` pendant vertices attached to
/// the root, until a pendant vertex is hit.
pub fn exit_time_samples(tree: &OrderedTree, d: usize, replicas: usize, seed: u64) -> Vec<u64> {
    let host = tree.with_root_pendants(d);
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let mut v = host.root();
            let mut t = 0u64;
            loop {
                v = step(&host, v, &mut rng);
                t += 1;
                if (1..=d).contains(&v) {
                    return t;
                }
            }
        })
        .collect()
}

pub fn exit_time_stats(tree: &OrderedTree, d: usize, replicas: usize, seed: u64) -> Moments {
    let x: Vec<f64> = exit_time_samples(tree, d, replicas, seed).into_iter().map(|t| t as f64).collect();
    Moments::from_samples(&x)
}

/// Path `x = 0, 1, ..., l = y` with `d1 - 1` pendant vertices at `x` and
/// `d2 - 1` at `y`, so that `deg(x) = d1` and `deg(y) = d2`.
pub fn visit_gadget(l: usize, d1: usize, d2: usize) -> Result<(OrderedTree, usize, usize)> {
    if l == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::InvalidArgument("gadget needs l, d1, d2 >= 1".into()));
    }
    let mut parent: Vec<Option<usize>> = vec![None];
    for v in 1..=l {
        parent.push(Some(v - 1));
    }
    for _ in 1..d1 {
        parent.push(Some(0));
    }
    for _ in 1..d2 {
        parent.push(Some(l));
    }
    Ok((OrderedTree::from_parents(parent)?, 0, l))
}

/// Number of visits to `y` before the first return to `x`, per replica.
pub fn visits_before_return(l: usize, d1: usize, d2: usize, replicas: usize, seed: u64) -> Result<Vec<u64>> {
    let (tree, x, y) = visit_gadget(l, d1, d2)?;
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let mut v = step(&tree, x, &mut rng);
            let mut count = 0u64;
            while v != x {
                if v == y {
                    count += 1;
                }
                v = step(&tree, v, &mut rng);
            }
            count
        })
        .collect())
}

/// Visits to `x` during times `0..=n^2` of the walk on `{0, ..., R n}`
/// started at 0.
pub fn occupation_samples(r: usize, n: usize, x: usize, replicas: usize, seed: u64) -> Result<Vec<u64>> {
    let top = r * n;
    if top == 0 || x > top {
        return Err(Error::InvalidArgument("need R n >= 1 and x inside the segment".into()));
    }
    let horizon = n * n;
    Ok((0..replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_rng(seed, rep as u64);
            let mut v = 0usize;
            let mut count = u64::from(x == 0);
            for _ in 0..horizon {
                v = if v == 0 {
                    1
                } else if v == top {
                    top - 1
                } else if rng.random::<bool>() {
                    v + 1
                } else {
                    v - 1
                };
                if v == x {
                    count += 1;
                }
            }
            count
        })
        .collect())
}

/// `P(xi >= t n)` on a grid of `t`, with binomial standard errors.
pub fn occupation_tail(samples: &[u64], n: usize, t_grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let r = samples.len() as f64;
    t_grid
        .iter()
        .map(|&t| {
            let thr = t * n as f64;
            let p = samples.iter().filter(|&&s| s as f64 >= thr).count() as f64 / r;
            (t, p, (p * (1.0 - p) / r).sqrt())
        })
        .collect()
}

/// Dense pushforward masses over host vertices.
pub fn dense_measure(mu: &AtomicMeasure, n: usize) -> Vec<f64> {
    mu.dense(n)
}
