//! Finite rooted ordered trees.
//!
//! Contour convention: the search-depth sequence of a tree with `n` vertices
//! has `2n + 1` entries. The first `2n - 1` follow the depth-first contour
//! (each edge is walked twice), and the last two entries repeat the root.
//! `w_n(i / 2n)` is entry `i`; `vertex[i]` is the vertex visited at index `i`.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TreeJson {
    parent: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeJson", into = "TreeJson")]
pub struct OrderedTree {
    parent: Vec<Option<usize>>,
    root: usize,
    children: Vec<Vec<usize>>,
    depth: Vec<u32>,
    preorder: Vec<usize>,
    adj_start: Vec<usize>,
    adj: Vec<usize>,
}

impl TryFrom<TreeJson> for OrderedTree {
    type Error = Error;
    fn try_from(j: TreeJson) -> Result<Self> {
        OrderedTree::from_parents(j.parent)
    }
}

impl From<OrderedTree> for TreeJson {
    fn from(t: OrderedTree) -> Self {
        TreeJson { parent: t.parent }
    }
}

/// Search-depth sequence together with the vertex visited at each index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub depth: Vec<u32>,
    pub vertex: Vec<usize>,
}

impl Contour {
    /// Number of vertices `n` of the encoded tree.
    pub fn n(&self) -> usize {
        (self.depth.len() - 1) / 2
    }
}

impl OrderedTree {
    /// Builds a tree from a parent array. Children are ordered by index.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::InvalidTree("empty parent array".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidTree(format!("expected one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::InvalidTree(format!("parent {p} out of range")));
                }
                children[p].push(v);
            }
        }
        let mut depth = vec![0u32; n];
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            for &c in children[v].iter().rev() {
                depth[c] = depth[v] + 1;
                stack.push(c);
            }
        }
        if preorder.len() != n {
            return Err(Error::InvalidTree("parent array contains a cycle".into()));
        }
        let mut adj_start = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(2 * n);
        for v in 0..n {
            adj_start.push(adj.len());
            if let Some(p) = parent[v] {
                adj.push(p);
            }
            adj.extend_from_slice(&children[v]);
        }
        adj_start.push(adj.len());
        Ok(OrderedTree { parent, root, children, depth, preorder, adj_start, adj })
    }

    /// Tree whose vertices, listed in depth-first order, have the given
    /// numbers of children.
    pub fn from_child_counts(counts: &[usize]) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().sum::<usize>() != n - 1 {
            return Err(Error::InvalidTree("child counts must sum to n - 1".into()));
        }
        let mut parent = vec![None; n];
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (v, &c) in counts.iter().enumerate() {
            if v > 0 {
                let top = open
                    .last_mut()
                    .ok_or_else(|| Error::InvalidTree("child counts are not a valid preorder".into()))?;
                parent[v] = Some(top.0);
                top.1 -= 1;
                if top.1 == 0 {
                    open.pop();
                }
            }
            if c > 0 {
                open.push((v, c));
            }
        }
        if !open.is_empty() {
            return Err(Error::InvalidTree("child counts are not a valid preorder".into()));
        }
        OrderedTree::from_parents(parent)
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> u32 {
        self.depth[v]
    }

    pub fn height(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_start[v + 1] - self.adj_start[v]
    }

    /// Neighbours of `v`: parent first, then children in order.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_start[v]..self.adj_start[v + 1]]
    }

    pub fn preorder(&self) -> &[usize] {
        &self.preorder
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        let c = self.lca(a, b);
        self.depth[a] + self.depth[b] - 2 * self.depth[c]
    }

    /// Child counts in depth-first order (the Lukasiewicz code).
    pub fn child_counts(&self) -> Vec<usize> {
        self.preorder.iter().map(|&v| self.children[v].len()).collect()
    }

    pub fn contour(&self) -> Contour {
        let n = self.n();
        let mut depth = Vec::with_capacity(2 * n + 1);
        let mut vertex = Vec::with_capacity(2 * n + 1);
        let mut stack: Vec<(usize, usize)> = vec![(self.root, 0)];
        depth.push(0);
        vertex.push(self.root);
        while let Some(top) = stack.last_mut() {
            let (v, next) = *top;
            if next < self.children[v].len() {
                top.1 += 1;
                let c = self.children[v][next];
                depth.push(self.depth[c]);
                vertex.push(c);
                stack.push((c, 0));
            } else {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    depth.push(self.depth[p]);
                    vertex.push(p);
                }
            }
        }
        while depth.len() < 2 * n + 1 {
            depth.push(0);
            vertex.push(self.root);
        }
        Contour { depth, vertex }
    }

    /// Search-depth sequence `(w_n(i / 2n))_{i = 0..=2n}`.
    pub fn search_depth(&self) -> Vec<u32> {
        self.contour().depth
    }

    /// Copy with vertices relabelled in depth-first order and the given
    /// number of pendant vertices added to the root as its first children.
    pub fn with_root_pendants(&self, d: usize) -> OrderedTree {
        let mut counts = self.child_counts();
        counts[0] += d;
        let mut full = Vec::with_capacity(counts.len() + d);
        full.push(counts[0]);
        full.extend(std::iter::repeat_n(0, d));
        full.extend_from_slice(&counts[1..]);
        OrderedTree::from_child_counts(&full).expect("valid counts")
    }
}

/// Inverse of [`OrderedTree::search_depth`]. Vertices are numbered in
/// depth-first order.
pub fn tree_from_depth(w: &[u32]) -> Result<OrderedTree> {
    if w.len() < 3 || w.len() % 2 == 0 {
        return Err(Error::InvalidDepth("length must be odd and at least 3".into()));
    }
    let n = (w.len() - 1) / 2;
    if w[0] != 0 || w[2 * n - 2] != 0 || w[2 * n - 1] != 0 || w[2 * n] != 0 {
        return Err(Error::InvalidDepth("sequence must start at 0 and end with root padding".into()));
    }
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut current = 0usize;
    for i in 0..2 * n - 2 {
        match w[i + 1] as i64 - w[i] as i64 {
            1 => {
                parent.push(Some(current));
                current = parent.len() - 1;
            }
            -1 => {
                current = parent[current]
                    .ok_or_else(|| Error::InvalidDepth(format!("step below root at index {}", i + 1)))?;
            }
            _ => return Err(Error::InvalidDepth(format!("step at index {} is not +-1", i + 1))),
        }
    }
    if parent.len() != n {
        return Err(Error::InvalidDepth("vertex count does not match length".into()));
    }
    OrderedTree::from_parents(parent)
}

/// All ordered trees with `n` vertices, in lexicographic order of their
/// contours.
pub fn enumerate_ordered_trees(n: usize) -> Vec<OrderedTree> {
    fn rec(path: &mut Vec<u32>, ups: usize, m: usize, out: &mut Vec<Vec<u32>>) {
        let h = *path.last().unwrap();
        let steps = path.len() - 1;
        if steps == 2 * m {
            out.push(path.clone());
            return;
        }
        if ups < m {
            path.push(h + 1);
            rec(path, ups + 1, m, out);
            path.pop();
        }
        if h > 0 {
            path.push(h - 1);
            rec(path, ups, m, out);
            path.pop();
        }
    }
    if n == 0 {
        return Vec::new();
    }
    let mut paths = Vec::new();
    rec(&mut vec![0], 0, n - 1, &mut paths);
    paths
        .into_iter()
        .map(|mut p| {
            p.push(0);
            p.push(0);
            tree_from_depth(&p).expect("valid contour")
        })
        .collect()
}

/// Critical offspring laws for conditioned Galton-Watson trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum Offspring {
    /// `P(k) = p (1 - p)^k`.
    Geometric { p: f64 },
    Poisson { mean: f64 },
    /// Zero or two children with probability one half each.
    Binary,
    /// Finite probability vector indexed by the number of children.
    Pmf { probs: Vec<f64> },
}

impl Offspring {
    pub fn pmf(&self, k: usize) -> f64 {
        match self {
            Offspring::Geometric { p } => p * (1.0 - p).powi(k as i32),
            Offspring::Poisson { mean } => {
                let mut v = (-mean).exp();
                for i in 1..=k {
                    v *= mean / i as f64;
                }
                v
            }
            Offspring::Binary => match k {
                0 | 2 => 0.5,
                _ => 0.0,
            },
            Offspring::Pmf { probs } => probs.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Offspring::Geometric { p } => (1.0 - p) / p,
            Offspring::Poisson { mean } => *mean,
            Offspring::Binary => 1.0,
            Offspring::Pmf { probs } => probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
        }
    }

    fn draw(&self, rng: &mut Rng) -> usize {
        match self {
            Offspring::Geometric { p } => {
                let mut k = 0;
                while rng.random::<f64>() >= *p {
                    k += 1;
                }
                k
            }
            Offspring::Poisson { mean } => Poisson::new(*mean).unwrap().sample(rng) as usize,
            Offspring::Binary => 2 * rng.random_range(0..2usize),
            Offspring::Pmf { probs } => {
                let mut u = rng.random::<f64>();
                for (k, p) in probs.iter().enumerate() {
                    if u < *p {
                        return k;
                    }
                    u -= p;
                }
                probs.len() - 1
            }
        }
    }
}

impl FromStr for Offspring {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| -> Result<f64> {
            a.trim().parse::<f64>().map_err(|e| Error::Parse(format!("offspring parameter: {e}")))
        };
        match name.trim() {
            "geometric" => {
                let p = if arg.is_empty() { 0.5 } else { num(arg)? };
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidArgument("geometric parameter must lie in (0, 1)".into()));
                }
                Ok(Offspring::Geometric { p })
            }
            "poisson" => {
                let mean = if arg.is_empty() { 1.0 } else { num(arg)? };
                if !(mean > 0.0) {
                    return Err(Error::InvalidArgument("poisson mean must be positive".into()));
                }
                Ok(Offspring::Poisson { mean })
            }
            "binary" => Ok(Offspring::Binary),
            "pmf" => {
                let probs = arg.split(',').map(num).collect::<Result<Vec<f64>>>()?;
                let total: f64 = probs.iter().sum();
                if probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 || probs.len() < 2 {
                    return Err(Error::InvalidArgument("pmf must be a probability vector".into()));
                }
                Ok(Offspring::Pmf { probs })
            }
            other => Err(Error::Parse(format!("unknown offspring law '{other}'"))),
        }
    }
}

const REJECTION_BUDGET: u64 = 10_000_000;

/// Offspring counts of `n` i.i.d. vertices conditioned to sum to `n - 1`.
fn conditioned_counts(offspring: &Offspring, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    match offspring {
        // Geometric counts conditioned on their sum are a uniform weak
        // composition, independent of the parameter.
        Offspring::Geometric { .. } => {
            let mut marks: Vec<bool> = std::iter::repeat_n(true, n - 1)
                .chain(std::iter::repeat_n(false, n - 1))
                .collect();
            marks.shuffle(rng);
            let mut counts = vec![0usize; n];
            let mut part = 0;
            for m in marks {
                if m {
                    counts[part] += 1;
                } else {
                    part += 1;
                }
            }
            Ok(counts)
        }
        // Poisson counts conditioned on their sum are multinomial.
        Offspring::Poisson { .. } => {
            let mut counts = vec![0usize; n];
            for _ in 0..n - 1 {
                counts[rng.random_range(0..n)] += 1;
            }
            Ok(counts)
        }
        Offspring::Binary => {
            if n % 2 == 0 {
                return Err(Error::InvalidArgument("binary trees have an odd number of vertices".into()));
            }
            let mut counts: Vec<usize> = std::iter::repeat_n(2, (n - 1) / 2)
                .chain(std::iter::repeat_n(0, n.div_ceil(2)))
                .collect();
            counts.shuffle(rng);
            Ok(counts)
        }
        Offspring::Pmf { .. } => {
            for _ in 0..REJECTION_BUDGET {
                let mut total = 0usize;
                let mut counts = Vec::with_capacity(n);
                for _ in 0..n {
                    let c = offspring.draw(rng);
                    total += c;
                    if total > n - 1 {
                        break;
                    }
                    counts.push(c);
                }
                if counts.len() == n && total == n - 1 {
                    return Ok(counts);
                }
            }
            Err(Error::BudgetExhausted(REJECTION_BUDGET))
        }
    }
}

/// Cyclic shift of a count vector summing to `n - 1` that is a valid
/// depth-first child-count sequence (cycle lemma).
pub fn cycle_lemma_rotation(counts: &mut [usize]) {
    let mut s = 0i64;
    let mut best = i64::MAX;
    let mut arg = 0;
    for (i, &c) in counts.iter().enumerate() {
        s += c as i64 - 1;
        if s < best {
            best = s;
            arg = i + 1;
        }
    }
    let len = counts.len();
    counts.rotate_left(arg % len);
}

/// Galton-Watson tree conditioned to have exactly `n` vertices.
pub fn sample_gw_conditioned(offspring: &Offspring, n: usize, seed: u64) -> Result<OrderedTree> {
    sample_gw_conditioned_with(offspring, n, &mut rng_from_seed(seed))
}

pub fn sample_gw_conditioned_with(offspring: &Offspring, n: usize, rng: &mut Rng) -> Result<OrderedTree> {
    if n == 0 {
        return Err(Error::InvalidArgument("tree size must be positive".into()));
    }
    if n == 1 {
        return OrderedTree::from_parents(vec![None]);
    }
    let mut counts = conditioned_counts(offspring, n, rng)?;
    cycle_lemma_rotation(&mut counts);
    OrderedTree::from_child_counts(&counts)
}

/// Contour index selected by the time `t`: the endpoint of the grid cell
/// containing `t` with the larger depth, ties going to the left endpoint.
pub fn gamma_index(depth: &[u32], t: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    let m = depth.len() - 1;
    let x = t * m as f64;
    let lo = (x.floor() as usize).min(m);
    let hi = (x.ceil() as usize).min(m);
    Ok(if depth[lo] >= depth[hi] { lo } else { hi })
}

/// Vertices `w_n-hat(gamma_n(u_i))` for a sequence of times.
pub fn select_vertices(contour: &Contour, u: &[f64]) -> Result<Vec<usize>> {
    u.iter().map(|&t| Ok(contour.vertex[gamma_index(&contour.depth, t)?])).collect()
}

/// Union of the root paths of a set of vertices, with the nearest-ancestor
/// projection of every vertex of the host tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteSubtree {
    /// The vertices that spanned the subtree, in order (repeats allowed).
    pub leaves: Vec<usize>,
    pub in_sub: Vec<bool>,
    /// Member vertices in depth-first order of the host tree.
    pub members: Vec<usize>,
    /// Degree inside the subtree (zero for non-members).
    pub degree: Vec<u32>,
    /// Deepest member ancestor of each host vertex (itself if a member).
    pub proj: Vec<usize>,
}

impl DiscreteSubtree {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn edges(&self) -> usize {
        self.members.len() - 1
    }

    pub fn contains(&self, v: usize) -> bool {
        self.in_sub[v]
    }
}

pub fn reduced_subtree(tree: &OrderedTree, vertices: &[usize]) -> Result<DiscreteSubtree> {
    let n = tree.n();
    let mut in_sub = vec![false; n];
    in_sub[tree.root()] = true;
    for &v in vertices {
        if v >= n {
            return Err(Error::UnknownVertex(v));
        }
        let mut x = v;
        while !in_sub[x] {
            in_sub[x] = true;
            x = tree.parent(x).unwrap();
        }
    }
    let members: Vec<usize> = tree.preorder().iter().copied().filter(|&v| in_sub[v]).collect();
    let mut degree = vec![0u32; n];
    for &v in &members {
        if let Some(p) = tree.parent(v) {
            degree[v] += 1;
            degree[p] += 1;
        }
    }
    let mut proj = vec![0usize; n];
    for &v in tree.preorder() {
        proj[v] = if in_sub[v] { v } else { proj[tree.parent(v).unwrap()] };
    }
    Ok(DiscreteSubtree { leaves: vertices.to_vec(), in_sub, members, degree, proj })
}

pub fn project_vertex(sub: &DiscreteSubtree, x: usize) -> usize {
    sub.proj[x]
}

/// `max_x d(x, proj(x))` over all host vertices.
pub fn delta(tree: &OrderedTree, sub: &DiscreteSubtree) -> u32 {
    (0..tree.n()).map(|x| tree.depth(x) - tree.depth(sub.proj[x])).max().unwrap_or(0)
}

/// Finitely supported measure on vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    /// `(vertex, mass)` pairs sorted by vertex.
    pub atoms: Vec<(usize, f64)>,
}

impl AtomicMeasure {
    pub fn uniform(n: usize) -> Self {
        AtomicMeasure { atoms: (0..n).map(|v| (v, 1.0 / n as f64)).collect() }
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mass(&self, v: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&v, |a| a.0)
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }

    /// Dense vector of masses over `n` vertices.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(v, m) in &self.atoms {
            out[v] += m;
        }
        out
    }
}

/// Number of host vertices projecting to each vertex.
pub fn projection_counts(sub: &DiscreteSubtree) -> Vec<u64> {
    let mut counts = vec![0u64; sub.proj.len()];
    for &p in &sub.proj {
        counts[p] += 1;
    }
    counts
}

/// Image of `base` under the projection onto the subtree.
pub fn pushforward_measure(sub: &DiscreteSubtree, base: &AtomicMeasure) -> AtomicMeasure {
    let mut dense = vec![0.0; sub.proj.len()];
    for &(v, m) in &base.atoms {
        dense[sub.proj[v]] += m;
    }
    AtomicMeasure {
        atoms: dense.into_iter().enumerate().filter(|a| a.1 > 0.0).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn path(n: usize) -> OrderedTree {
        OrderedTree::from_parents((0..n).map(|v| if v == 0 { None } else { Some(v - 1) }).collect()).unwrap()
    }

    #[test]
    fn small_contours() {
        let single = OrderedTree::from_parents(vec![None]).unwrap();
        assert_eq!(single.search_depth(), vec![0, 0, 0]);
        assert_eq!(path(2).search_depth(), vec![0, 1, 0, 0, 0]);
        assert_eq!(path(3).search_depth(), vec![0, 1, 2, 1, 0, 0, 0]);
        let cherry = OrderedTree::from_parents(vec![None, Some(0), Some(0)]).unwrap();
        assert_eq!(cherry.search_depth(), vec![0, 1, 0, 1, 0, 0, 0]);
        assert_eq!(cherry.contour().vertex, vec![0, 1, 0, 2, 0, 0, 0]);
    }

    #[test]
    fn bad_depth_sequences() {
        assert!(tree_from_depth(&[0, 1, 0, 0]).is_err());
        assert!(tree_from_depth(&[0, 2, 0, 0, 0]).is_err());
        assert!(tree_from_depth(&[0, 1, 1, 0, 0]).is_err());
        assert!(tree_from_depth(&[0, 1, 0, 1, 0]).is_err());
    }

    #[test]
    fn catalan_counts() {
        let counts: Vec<usize> = (1..=7).map(|n| enumerate_ordered_trees(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 14, 42, 132]);
    }

    #[test]
    fn child_counts_round_trip() {
        for t in enumerate_ordered_trees(6) {
            let back = OrderedTree::from_child_counts(&t.child_counts()).unwrap();
            assert_eq!(back.search_depth(), t.search_depth());
        }
    }

    #[test]
    fn cycle_lemma_gives_cherry() {
        let mut c = vec![0, 2, 0];
        cycle_lemma_rotation(&mut c);
        assert_eq!(c, vec![2, 0, 0]);
    }

    #[test]
    fn cherry_projection_example() {
        let cherry = OrderedTree::from_parents(vec![None, Some(0), Some(0)]).unwrap();
        let sub = reduced_subtree(&cherry, &[1]).unwrap();
        assert_eq!(sub.members, vec![0, 1]);
        assert_eq!(project_vertex(&sub, 2), 0);
        assert_eq!(delta(&cherry, &sub), 1);
        let mu = pushforward_measure(&sub, &AtomicMeasure::uniform(3));
        assert!((mu.mass(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((mu.mass(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_example() {
        let c = path(2).contour();
        assert_eq!(gamma_index(&c.depth, 0.1).unwrap(), 1);
        assert_eq!(gamma_index(&c.depth, 0.3).unwrap(), 1);
        assert_eq!(gamma_index(&c.depth, 0.6).unwrap(), 2);
        assert_eq!(select_vertices(&c, &[0.1, 0.9]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn offspring_parsing() {
        assert_eq!("geometric:0.5".parse::<Offspring>().unwrap(), Offspring::Geometric { p: 0.5 });
        assert_eq!("poisson:1".parse::<Offspring>().unwrap(), Offspring::Poisson { mean: 1.0 });
        assert!("pmf:0.5,0.6".parse::<Offspring>().is_err());
        assert!("foo".parse::<Offspring>().is_err());
    }

    #[test]
    fn conditioned_samples_have_right_size() {
        let mut rng = rng_from_seed(2);
        for law in [
            Offspring::Geometric { p: 0.5 },
            Offspring::Poisson { mean: 1.0 },
            Offspring::Binary,
            Offspring::Pmf { probs: vec![0.25, 0.5, 0.25] },
        ] {
            for n in [1usize, 3, 9, 31] {
                let t = sample_gw_conditioned_with(&law, n, &mut rng).unwrap();
                assert_eq!(t.n(), n);
            }
        }
    }

    #[test]
    fn uniform_law_for_geometric_n4() {
        let mut rng = rng_from_seed(9);
        let law = Offspring::Geometric { p: 0.5 };
        let reps = 50_000;
        let mut hist: HashMap<Vec<u32>, usize> = HashMap::new();
        for _ in 0..reps {
            let t = sample_gw_conditioned_with(&law, 4, &mut rng).unwrap();
            *hist.entry(t.search_depth()).or_default() += 1;
        }
        assert_eq!(hist.len(), 5);
        let p = 0.2;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        for c in hist.values() {
            assert!(((*c as f64 / reps as f64) - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn json_round_trip() {
        let t = path(4);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"parent":[null,0,1,2]}"#);
        let back: OrderedTree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<OrderedTree>(r#"{"parent":[1,0]}"#).is_err());
    }
}
