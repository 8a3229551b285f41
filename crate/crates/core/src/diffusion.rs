//! Brownian motion on a finite metric tree, approximated by a walk on a grid.
//!
//! Every edge of length `len` is cut into `max(1, round(len / h))` equal
//! cells. From a grid vertex the walk moves to a neighbour with probability
//! proportional to the inverse cell length. A visit to `x` adds
//! `2 / sum_j (1 / c_j)` to the local time at `x` and lasts that amount
//! times the speed mass of `x`. With the length measure as speed and uniform
//! cells this is the constant step time `h^2` and the local-time increment
//! `h / (deg / 2)`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_tree::{EdgeMeasure, MetricTree, TreePoint, MERGE_TOL};
use crate::rng::{replica_rng, Rng};
use crate::walk::Moments;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridTree {
    pub spacing: f64,
    /// Location of each grid vertex on the host tree.
    pub points: Vec<TreePoint>,
    /// Neighbour toward the root.
    pub parent: Vec<Option<u32>>,
    adj_start: Vec<usize>,
    adj: Vec<u32>,
    /// Cell length of each adjacency entry.
    cell: Vec<f64>,
    uniform_here: Vec<bool>,
    /// `sum_j 1 / c_j` at each vertex.
    pub conductance: Vec<f64>,
    /// Grid vertex sitting on each host node.
    pub node_vertex: Vec<u32>,
    edge_cells: Vec<usize>,
    edge_first: Vec<usize>,
}

impl GridTree {
    pub fn new(tree: &MetricTree, h: f64) -> Result<GridTree> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        if tree.n_nodes() < 2 {
            return Err(Error::InvalidArgument("tree has no edges".into()));
        }
        let min_edge = tree.min_edge();
        if h > min_edge * (1.0 + 1e-9) {
            return Err(Error::GridTooCoarse { h, min_edge });
        }
        let n = tree.n_nodes();
        let mut points = vec![TreePoint::ROOT];
        let mut parent: Vec<Option<u32>> = vec![None];
        let mut node_vertex = vec![0u32; n];
        let mut edge_cells = vec![0usize; n];
        let mut edge_first = vec![0usize; n];
        let mut nbrs: Vec<Vec<(u32, f64)>> = vec![Vec::new()];
        for v in 1..n {
            let len = tree.length(v);
            let g = ((len / h).round() as usize).max(1);
            let c = len / g as f64;
            edge_cells[v] = g;
            edge_first[v] = points.len();
            let mut prev = node_vertex[tree.parent(v).unwrap()];
            for j in 1..=g {
                let id = points.len() as u32;
                let off = if j == g { len } else { c * j as f64 };
                points.push(TreePoint { node: v, offset: off });
                parent.push(Some(prev));
                nbrs.push(Vec::new());
                nbrs[prev as usize].push((id, c));
                nbrs[id as usize].push((prev, c));
                prev = id;
            }
            node_vertex[v] = prev;
        }
        let mut adj_start = Vec::with_capacity(points.len() + 1);
        let mut adj = Vec::new();
        let mut cell = Vec::new();
        let mut uniform_here = Vec::with_capacity(points.len());
        let mut conductance = Vec::with_capacity(points.len());
        for list in &nbrs {
            adj_start.push(adj.len());
            let c0 = list[0].1;
            uniform_here.push(list.iter().all(|e| (e.1 - c0).abs() <= 1e-12 * c0));
            conductance.push(list.iter().map(|e| 1.0 / e.1).sum());
            for &(j, c) in list {
                adj.push(j);
                cell.push(c);
            }
        }
        adj_start.push(adj.len());
        Ok(GridTree {
            spacing: h,
            points,
            parent,
            adj_start,
            adj,
            cell,
            uniform_here,
            conductance,
            node_vertex,
            edge_cells,
            edge_first,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn neighbors(&self, x: usize) -> &[u32] {
        &self.adj[self.adj_start[x]..self.adj_start[x + 1]]
    }

    pub fn cells(&self, x: usize) -> &[f64] {
        &self.cell[self.adj_start[x]..self.adj_start[x + 1]]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adj_start[x + 1] - self.adj_start[x]
    }

    /// True when every cell has length `h` up to rounding.
    pub fn is_uniform(&self) -> bool {
        self.cell.iter().all(|&c| (c - self.spacing).abs() <= 1e-9 * self.spacing)
    }

    /// Local-time increment of one visit.
    pub fn visit_weight(&self, x: usize) -> f64 {
        2.0 / self.conductance[x]
    }

    /// Length measure lumped on vertices: half of every adjacent cell.
    pub fn length_mass(&self) -> Vec<f64> {
        (0..self.len()).map(|x| 0.5 * self.cells(x).iter().sum::<f64>()).collect()
    }

    /// Grid vertex at a point, if the point is a grid vertex.
    pub fn vertex_at(&self, p: &TreePoint) -> Option<usize> {
        if p.node == 0 {
            return Some(0);
        }
        let g = self.edge_cells[p.node];
        let len = self.points[self.node_vertex[p.node] as usize].offset;
        let c = len / g as f64;
        let j = (p.offset / c).round();
        if (p.offset - j * c).abs() > 1e-9 * len.max(1.0) || j < 0.0 {
            return None;
        }
        let j = j as usize;
        Some(if j == 0 { self.parent[self.edge_first[p.node]].unwrap() as usize } else { self.edge_first[p.node] + j - 1 })
    }

    /// Nearest grid vertex on the edge carrying `p`.
    pub fn nearest_vertex(&self, p: &TreePoint) -> usize {
        if p.node == 0 {
            return 0;
        }
        let g = self.edge_cells[p.node];
        let len = self.points[self.node_vertex[p.node] as usize].offset;
        let j = ((p.offset / (len / g as f64)).round() as usize).min(g);
        if j == 0 {
            self.parent[self.edge_first[p.node]].unwrap() as usize
        } else {
            self.edge_first[p.node] + j - 1
        }
    }

    /// Measure lumped on grid vertices: atoms go to the nearest vertex on
    /// their edge, densities are split evenly between cell ends.
    pub fn lump(&self, m: &EdgeMeasure) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (p, w) in &m.atoms {
            out[self.nearest_vertex(p)] += w;
        }
        for v in 1..m.density.len() {
            let d = m.density[v];
            if d == 0.0 {
                continue;
            }
            let g = self.edge_cells[v];
            let len = self.points[self.node_vertex[v] as usize].offset;
            let half = 0.5 * d * len / g as f64;
            let mut prev = self.parent[self.edge_first[v]].unwrap() as usize;
            for j in 0..g {
                let cur = self.edge_first[v] + j;
                out[prev] += half;
                out[cur] += half;
                prev = cur;
            }
        }
        out
    }

    /// Vertices lying on the union of the root paths of the first `k` leaves.
    pub fn subtree_vertices(&self, tree: &MetricTree, k: usize) -> Vec<bool> {
        let leaves = &tree.leaves()[..k.min(tree.leaves().len())];
        self.points
            .iter()
            .map(|p| leaves.iter().any(|l| tree.on_root_path(p, l)))
            .collect()
    }

    /// Nearest member of `keep` on the root path of each vertex.
    pub fn project_onto(&self, keep: &[bool]) -> Vec<usize> {
        let mut proj = vec![0usize; self.len()];
        for x in 0..self.len() {
            // parents precede children in the numbering
            proj[x] = if keep[x] { x } else { proj[self.parent[x].map(|p| p as usize).unwrap_or(0)] };
        }
        proj
    }

    /// Length measure of the cells with both ends in `keep`, lumped and
    /// normalised to total mass one.
    pub fn normalized_length_on(&self, keep: &[bool]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for x in 1..self.len() {
            let p = self.parent[x].unwrap() as usize;
            if keep[x] && keep[p] {
                let pos = self.neighbors(x).iter().position(|&y| y as usize == p).unwrap();
                let c = self.cells(x)[pos];
                out[x] += 0.5 * c;
                out[p] += 0.5 * c;
            }
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            for v in out.iter_mut() {
                *v /= total;
            }
        }
        out
    }

    #[inline]
    pub fn step(&self, x: usize, rng: &mut Rng) -> usize {
        let nb = self.neighbors(x);
        if nb.len() == 1 {
            return nb[0] as usize;
        }
        if self.uniform_here[x] {
            return nb[rng.random_range(0..nb.len())] as usize;
        }
        let cells = self.cells(x);
        let mut u = rng.random::<f64>() * self.conductance[x];
        for (j, &c) in cells.iter().enumerate() {
            u -= 1.0 / c;
            if u < 0.0 {
                return nb[j] as usize;
            }
        }
        nb[nb.len() - 1] as usize
    }
}

/// Visit record of a grid path. Visit `i` at `vertices[i]` starts at
/// `start[i]`, adds `weights[i]` to the local time there, and lasts
/// `weights[i] * speed(vertices[i])`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub vertices: Vec<u32>,
    pub weights: Vec<f64>,
    pub start: Vec<f64>,
    pub end: f64,
}

impl DiffusionPath {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Position at clock time `t` (last position beyond the end).
    pub fn at(&self, t: f64) -> u32 {
        let i = self.start.partition_point(|&s| s <= t).max(1) - 1;
        self.vertices[i]
    }

    /// Consecutive distinct positions.
    pub fn jump_chain(&self) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for &x in &self.vertices {
            if out.last() != Some(&x) {
                out.push(x);
            }
        }
        out
    }

    /// Local times at clock time `t`, linear within a visit.
    pub fn local_times_at(&self, n_vertices: usize, speed: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; n_vertices];
        for i in 0..self.len() {
            if self.start[i] >= t {
                break;
            }
            let x = self.vertices[i] as usize;
            let dur = self.weights[i] * speed[x];
            let frac = if dur > 0.0 { ((t - self.start[i]) / dur).min(1.0) } else { 1.0 };
            out[x] += self.weights[i] * frac;
        }
        out
    }

    /// `int L_t dmu` at every visit boundary `(time, value)`, starting at 0.
    pub fn additive_functional(&self, mu: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        for i in 0..self.len() {
            out.push((self.start[i], acc));
            acc += self.weights[i] * mu[self.vertices[i] as usize];
        }
        out.push((self.end, acc));
        out
    }
}

/// Grid Brownian motion with speed masses `speed`, run from `start` until
/// the clock passes `horizon`. With `hitting_times` each holding time and
/// local-time increment is multiplied by an independent exit time of
/// standard Brownian motion from `(-1, 1)`, which has mean one.
pub fn grid_bm_with(
    grid: &GridTree,
    speed: &[f64],
    start: usize,
    horizon: f64,
    hitting_times: bool,
    rng: &mut Rng,
) -> DiffusionPath {
    let mut path = DiffusionPath::default();
    let mut x = start;
    let mut t = 0.0;
    let mut idle = 0usize;
    while t < horizon {
        let mut w = grid.visit_weight(x);
        if hitting_times {
            w *= sample_unit_exit_time(rng);
        }
        path.vertices.push(x as u32);
        path.weights.push(w);
        path.start.push(t);
        let dt = w * speed[x];
        t += dt;
        idle = if dt > 0.0 { 0 } else { idle + 1 };
        if idle > 100 * grid.len() + 1_000_000 {
            break;
        }
        x = grid.step(x, rng);
    }
    path.end = t;
    path
}

pub fn grid_bm(tree: &MetricTree, h: f64, horizon: f64, seed: u64) -> Result<(GridTree, DiffusionPath)> {
    let grid = GridTree::new(tree, h)?;
    let speed = grid.length_mass();
    let path = grid_bm_with(&grid, &speed, 0, horizon, false, &mut crate::rng::rng_from_seed(seed));
    Ok((grid, path))
}

/// CDF of the exit time of standard Brownian motion from `(-1, 1)`.
pub fn unit_exit_time_cdf(t: f64) -> f64 {
    if t <= 0.005 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..2000 {
        let m = (2 * k + 1) as f64;
        let term = (-(m * m) * std::f64::consts::PI.powi(2) * t / 8.0).exp() / m;
        s += if k % 2 == 0 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (1.0 - 4.0 / std::f64::consts::PI * s).clamp(0.0, 1.0)
}

pub fn sample_unit_exit_time(rng: &mut Rng) -> f64 {
    let u: f64 = rng.random();
    let (mut lo, mut hi) = (0.0, 1.0);
    while unit_exit_time_cdf(hi) < u {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if unit_exit_time_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Trace of a path on the vertices in `keep`, with time measured by the
/// local time integrated against `speed`.
pub fn trace_on_subtree(path: &DiffusionPath, keep: &[bool], speed: &[f64]) -> DiffusionPath {
    let mut out = DiffusionPath::default();
    let mut t = 0.0;
    for i in 0..path.len() {
        let x = path.vertices[i] as usize;
        if keep[x] {
            out.vertices.push(x as u32);
            out.weights.push(path.weights[i]);
            out.start.push(t);
            t += path.weights[i] * speed[x];
        }
    }
    out.end = t;
    out
}

/// Probability of reaching `x` before `y` from `z`, by simulation.
pub fn hitting_prob_estimate(
    grid: &GridTree,
    z: usize,
    x: usize,
    y: usize,
    replicas: usize,
    seed: u64,
) -> (f64, f64) {
    let hits: usize = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let mut v = z;
            loop {
                if v == x {
                    return 1;
                }
                if v == y {
                    return 0;
                }
                v = grid.step(v, &mut rng);
            }
        })
        .sum();
    let p = hits as f64 / replicas as f64;
    (p, (p * (1.0 - p) / replicas as f64).sqrt())
}

/// Clock time to reach `y` from `x` under speed masses `speed`.
pub fn hitting_time_samples(grid: &GridTree, speed: &[f64], x: usize, y: usize, replicas: usize, seed: u64) -> Vec<f64> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let mut v = x;
            let mut t = 0.0;
            while v != y {
                t += grid.visit_weight(v) * speed[v];
                v = grid.step(v, &mut rng);
            }
            t
        })
        .collect()
}

/// Monte Carlo mean of the hitting time of `y` from `x` for the speed
/// measure `nu` (which must be a multiple of the length measure).
pub fn occupation_density_check(
    tree: &MetricTree,
    nu: &EdgeMeasure,
    x: &TreePoint,
    y: &TreePoint,
    h: f64,
    replicas: usize,
    seed: u64,
) -> Result<(Moments, f64)> {
    let grid = GridTree::new(tree, h)?;
    let (gx, gy) = match (grid.vertex_at(x), grid.vertex_at(y)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidArgument("x and y must be grid vertices".into())),
    };
    let speed = grid.lump(nu);
    let samples = hitting_time_samples(&grid, &speed, gx, gy, replicas, seed);
    Ok((Moments::from_samples(&samples), occupation_quadrature(tree, nu, x, y)))
}

/// `int 2 d(b(z, x, y), y) nu(dz)`, exact for atoms plus piecewise-constant
/// densities. `d(b(z, x, y), y)` is the Gromov product `(z | x)_y`.
pub fn occupation_quadrature(tree: &MetricTree, nu: &EdgeMeasure, x: &TreePoint, y: &TreePoint) -> f64 {
    let dxy = tree.distance(x, y);
    let f = |z: &TreePoint| 0.5 * (tree.distance(z, y) + dxy - tree.distance(z, x));
    let mut total: f64 = nu.atoms.iter().map(|(p, m)| 2.0 * m * f(p)).sum();
    let (xn, yn) = (tree.normalize(*x), tree.normalize(*y));
    for v in 1..tree.n_nodes() {
        let d = nu.density[v];
        if d == 0.0 {
            continue;
        }
        let len = tree.length(v);
        let mut cuts = vec![0.0, len];
        for p in [xn, yn] {
            if p.node == v && p.offset > MERGE_TOL && p.offset < len - MERGE_TOL {
                cuts.push(p.offset);
            }
        }
        cuts.sort_by(f64::total_cmp);
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let fa = f(&TreePoint { node: v, offset: a });
            let fb = f(&TreePoint { node: v, offset: b });
            total += 2.0 * d * 0.5 * (fa + fb) * (b - a);
        }
    }
    total
}

/// `d(b(z, x, y), y) / d(x, y)`, the limiting hitting probability.
pub fn hitting_prob_formula(tree: &MetricTree, z: &TreePoint, x: &TreePoint, y: &TreePoint) -> f64 {
    let dxy = tree.distance(x, y);
    if dxy == 0.0 {
        return 1.0;
    }
    0.5 * (tree.distance(z, y) + dxy - tree.distance(z, x)) / dxy
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn segment(len: f64) -> MetricTree {
        MetricTree::from_parts(vec![None, Some(0)], vec![0.0, len], vec![TreePoint { node: 1, offset: len }], vec![0.5])
            .unwrap()
    }

    #[test]
    fn grid_on_segment() {
        let t = segment(1.0);
        let g = GridTree::new(&t, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert!(g.is_uniform());
        let mass = g.length_mass();
        assert_relative_eq!(mass.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.visit_weight(5) * mass[5], 0.01, epsilon = 1e-15);
        assert_eq!(g.vertex_at(&TreePoint { node: 1, offset: 0.3 }), Some(3));
        assert_eq!(g.vertex_at(&TreePoint { node: 1, offset: 0.35 }), None);
    }

    #[test]
    fn coarse_grid_rejected() {
        let t = segment(0.1);
        assert!(matches!(GridTree::new(&t, 0.5), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn unit_segment_quadrature() {
        let t = segment(1.0);
        let nu = EdgeMeasure { atoms: Vec::new(), density: vec![0.0, 1.0] };
        let q = occupation_quadrature(&t, &nu, &TreePoint::ROOT, &t.node_point(1));
        assert_relative_eq!(q, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exit_time_cdf_mean_is_one() {
        // E H = int (1 - F)
        let dt = 1e-3;
        let mean: f64 = (0..20_000).map(|i| (1.0 - unit_exit_time_cdf((i as f64 + 0.5) * dt)) * dt).sum();
        assert_relative_eq!(mean, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn occupation_identity() {
        let t = segment(1.0);
        let g = GridTree::new(&t, 0.05).unwrap();
        let speed = g.length_mass();
        let mut rng = crate::rng::rng_from_seed(3);
        let p = grid_bm_with(&g, &speed, 0, 2.0, false, &mut rng);
        let lt = p.local_times_at(g.len(), &speed, p.end);
        let integral: f64 = lt.iter().zip(&speed).map(|(l, m)| l * m).sum();
        assert_relative_eq!(integral, p.end, epsilon = 1e-9);
        assert_relative_eq!(p.end, 0.0025 * p.len() as f64, epsilon = 1e-9);
    }

    #[test]
    fn trace_composition() {
        let t = segment(1.0);
        let g = GridTree::new(&t, 0.1).unwrap();
        let speed = g.length_mass();
        let mut rng = crate::rng::rng_from_seed(5);
        let p = grid_bm_with(&g, &speed, 0, 5.0, false, &mut rng);
        let keep1: Vec<bool> = (0..g.len()).map(|x| x <= 7).collect();
        let keep2: Vec<bool> = (0..g.len()).map(|x| x <= 4).collect();
        let s1 = g.normalized_length_on(&keep1);
        let s2 = g.normalized_length_on(&keep2);
        let twice = trace_on_subtree(&trace_on_subtree(&p, &keep1, &s1), &keep2, &s2);
        let once = trace_on_subtree(&p, &keep2, &s2);
        assert_eq!(twice, once);
    }
}
