//! Sequential isometric embedding of trees in `l1` and distances between the
//! embedded objects.
//!
//! Leaf `i` of a metric tree leaves the tree spanned by the earlier leaves
//! along a fresh coordinate direction `z_i`. The resulting map is an
//! isometry for the `l1` norm and is nested: adding leaves does not move the
//! points already embedded.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_tree::{LeafAttachment, MetricTree, TreePoint};

/// Finitely supported vector of `l1`, entries sorted by coordinate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector(pub Vec<(u32, f64)>);

impl SparseVector {
    pub fn zero() -> Self {
        SparseVector(Vec::new())
    }

    pub fn unit(coord: u32, value: f64) -> Self {
        SparseVector(vec![(coord, value)])
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.0
    }

    pub fn get(&self, coord: u32) -> f64 {
        self.0.binary_search_by_key(&coord, |e| e.0).map(|i| self.0[i].1).unwrap_or(0.0)
    }

    pub fn add_to(&mut self, coord: u32, value: f64) {
        match self.0.binary_search_by_key(&coord, |e| e.0) {
            Ok(i) => self.0[i].1 += value,
            Err(i) => self.0.insert(i, (coord, value)),
        }
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|e| e.1.abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector(self.0.iter().map(|&(c, v)| (c, v * factor)).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SparseVector, b: f64) -> SparseVector {
        let mut out = Vec::with_capacity(self.0.len().max(other.0.len()));
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            let ci = self.0.get(i).map(|e| e.0).unwrap_or(u32::MAX);
            let cj = other.0.get(j).map(|e| e.0).unwrap_or(u32::MAX);
            if ci == cj {
                out.push((ci, a * self.0[i].1 + b * other.0[j].1));
                i += 1;
                j += 1;
            } else if ci < cj {
                out.push((ci, a * self.0[i].1));
                i += 1;
            } else {
                out.push((cj, b * other.0[j].1));
                j += 1;
            }
        }
        SparseVector(out)
    }

    pub fn l1_distance(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut d = 0.0;
        while i < a.len() && j < b.len() {
            if a[i].0 == b[j].0 {
                d += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            } else if a[i].0 < b[j].0 {
                d += a[i].1.abs();
                i += 1;
            } else {
                d += b[j].1.abs();
                j += 1;
            }
        }
        d + a[i..].iter().map(|e| e.1.abs()).sum::<f64>() + b[j..].iter().map(|e| e.1.abs()).sum::<f64>()
    }
}

/// The sequential embedding of a metric tree.
#[derive(Debug, Clone)]
pub struct TreeEmbedding {
    attachments: Vec<LeafAttachment>,
}

pub fn sequential_embed(tree: &MetricTree) -> TreeEmbedding {
    TreeEmbedding { attachments: tree.attachments() }
}

impl TreeEmbedding {
    /// Image of the point at height `h` on the root path of leaf `i`.
    pub fn along_leaf(&self, mut i: usize, mut h: f64) -> SparseVector {
        let mut out = SparseVector::zero();
        loop {
            let a = self.attachments[i];
            if h > a.attach_height {
                out.add_to(i as u32, h - a.attach_height);
                h = a.attach_height;
            }
            match a.via {
                Some(j) if h > 0.0 => i = j,
                _ => break,
            }
        }
        out
    }

    pub fn embed(&self, tree: &MetricTree, p: &TreePoint) -> Result<SparseVector> {
        let h = tree.point_height(p);
        if h == 0.0 {
            return Ok(SparseVector::zero());
        }
        let i = tree
            .leaves()
            .iter()
            .position(|l| tree.on_root_path(p, l))
            .ok_or_else(|| Error::InvalidArgument("point is not on the tree".into()))?;
        Ok(self.along_leaf(i, h))
    }

    pub fn embed_all(&self, tree: &MetricTree, points: &[TreePoint]) -> Result<Vec<SparseVector>> {
        points.iter().map(|p| self.embed(tree, p)).collect()
    }
}

/// Path in `l1` sampled at increasing times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddedPath {
    pub times: Vec<f64>,
    pub points: Vec<SparseVector>,
}

impl EmbeddedPath {
    /// Path observed at integer times `0, 1, 2, ...`.
    pub fn from_steps(points: Vec<SparseVector>) -> Self {
        EmbeddedPath { times: (0..points.len()).map(|i| i as f64).collect(), points }
    }

    /// Linear interpolation at time `t` (clamped to the observed range).
    pub fn at(&self, t: f64) -> SparseVector {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.points[0].clone();
        }
        if k == self.times.len() {
            return self.points[k - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let theta = (t - t0) / (t1 - t0);
        self.points[k - 1].combine(1.0 - theta, &self.points[k], theta)
    }
}

/// Embedded tree, measure and path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddedTriple {
    pub cloud: Vec<SparseVector>,
    pub measure: Vec<(SparseVector, f64)>,
    pub path: EmbeddedPath,
}

/// Space scaled by `n^{-1/2}`, path time by `n^{3/2}`: the rescaled path at
/// `t` in `[0, 1]` is `n^{-1/2} f(t n^{3/2})`, sampled at `samples + 1`
/// equally spaced times.
pub fn theta_rescale(n: usize, triple: &EmbeddedTriple, samples: usize) -> Result<EmbeddedTriple> {
    let nf = n as f64;
    let space = nf.powf(-0.5);
    let horizon = nf.powf(1.5);
    let last = triple.path.times.last().copied().unwrap_or(-1.0);
    if last + 1e-9 < horizon {
        return Err(Error::PathTooShort { required: horizon.ceil() as usize, available: last.max(0.0) as usize });
    }
    let samples = samples.max(1);
    let times: Vec<f64> = (0..=samples).map(|j| j as f64 / samples as f64).collect();
    let points = times.iter().map(|&t| triple.path.at(t * horizon).scaled(space)).collect();
    Ok(EmbeddedTriple {
        cloud: triple.cloud.iter().map(|v| v.scaled(space)).collect(),
        measure: triple.measure.iter().map(|(v, m)| (v.scaled(space), *m)).collect(),
        path: EmbeddedPath { times, points },
    })
}

/// Exact Hausdorff distance between two finite sets in `l1`.
pub fn hausdorff_l1(a: &[SparseVector], b: &[SparseVector]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let directed = |x: &[SparseVector], y: &[SparseVector]| -> f64 {
        x.par_iter()
            .map(|p| y.iter().map(|q| p.l1_distance(q)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Supremum over a shared time grid of the `l1` distance between two paths.
pub fn path_sup_distance(p: &EmbeddedPath, q: &EmbeddedPath) -> Result<f64> {
    if p.points.len() != q.points.len() {
        return Err(Error::InvalidArgument("paths must share a time grid".into()));
    }
    Ok(p.points.iter().zip(&q.points).map(|(a, b)| a.l1_distance(b)).fold(0.0, f64::max))
}

/// Optimal transport cost between two finitely supported measures for a
/// cost matrix, by successive shortest paths with potentials. Masses of `b`
/// are rescaled to the total of `a`.
pub fn transport_cost(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    let ta: f64 = a.iter().sum();
    let tb: f64 = b.iter().sum();
    if n == 0 || m == 0 || ta <= 0.0 || tb <= 0.0 {
        return 0.0;
    }
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    let mut supply = a.to_vec();
    let mut demand: Vec<f64> = b.iter().map(|x| x * ta / tb).collect();
    let mut flow = vec![0.0; n * m];
    let mut pot = vec![0.0; n + m];
    let eps = 1e-15 * ta.max(1.0);
    let mut total = 0.0;
    loop {
        if supply.iter().all(|&s| s <= eps) {
            break;
        }
        // Dijkstra over sources 0..n and sinks n..n+m.
        let mut dist = vec![f64::INFINITY; n + m];
        let mut prev = vec![usize::MAX; n + m];
        let mut done = vec![false; n + m];
        for i in 0..n {
            if supply[i] > eps {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && demand[u - n] > eps {
                target = Some(u);
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (c[u * m + j] + pot[u] - pot[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= eps {
                        continue;
                    }
                    let rc = (-c[i * m + j] + pot[u] - pot[i]).max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        prev[i] = u;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let dt = dist[t];
        for v in 0..n + m {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut amount = demand[t - n];
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        let start = v;
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
                total += amount * c[u * m + (v - n)];
            } else {
                flow[v * m + (u - n)] -= amount;
                total -= amount * c[v * m + (u - n)];
            }
            v = u;
        }
        supply[start] -= amount;
        demand[t - n] -= amount;
    }
    total
}

/// Wasserstein-1 distance in `l1` between two atomic measures. Used in place
/// of the Prohorov distance and labelled as a surrogate in outputs.
pub fn w1_l1(mu: &[(SparseVector, f64)], nu: &[(SparseVector, f64)]) -> f64 {
    let a: Vec<f64> = mu.iter().map(|x| x.1).collect();
    let b: Vec<f64> = nu.iter().map(|x| x.1).collect();
    transport_cost(&a, &b, &|i, j| mu[i].0.l1_distance(&nu[j].0))
}

/// Combines atoms sitting at identical vectors.
pub fn merge_atoms(mut atoms: Vec<(SparseVector, f64)>) -> Vec<(SparseVector, f64)> {
    atoms.sort_by(|x, y| {
        let a = &x.0 .0;
        let b = &y.0 .0;
        for (p, q) in a.iter().zip(b.iter()) {
            let o = p.0.cmp(&q.0).then(p.1.total_cmp(&q.1));
            if o.is_ne() {
                return o;
            }
        }
        a.len().cmp(&b.len())
    });
    let mut out: Vec<(SparseVector, f64)> = Vec::with_capacity(atoms.len());
    for (v, m) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += m,
            _ => out.push((v, m)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::Excursion;
    use crate::metric_tree::reduced_tree_from_excursion;
    use approx::assert_relative_eq;

    #[test]
    fn sparse_vector_ops() {
        let mut a = SparseVector::zero();
        a.add_to(3, 1.0);
        a.add_to(1, 2.0);
        assert_eq!(a.entries(), &[(1, 2.0), (3, 1.0)]);
        let b = SparseVector::unit(2, -1.0);
        assert_eq!(a.l1_distance(&b), 4.0);
        assert_eq!(a.combine(0.5, &b, 2.0).entries(), &[(1, 1.0), (2, -2.0), (3, 0.5)]);
    }

    #[test]
    fn two_peaks_embedding() {
        let w = Excursion::new(vec![0.0, 0.25, 0.5, 0.375, 0.25, 0.375, 0.5, 0.25, 0.0]).unwrap();
        let t = reduced_tree_from_excursion(&w, &[0.25, 0.75]).unwrap();
        let e = sequential_embed(&t);
        let z1 = e.embed(&t, &t.leaves()[0]).unwrap();
        let z2 = e.embed(&t, &t.leaves()[1]).unwrap();
        assert_eq!(z1.entries(), &[(0, 0.5)]);
        assert_eq!(z2.entries(), &[(0, 0.25), (1, 0.25)]);
        assert_relative_eq!(z1.l1_distance(&z2), 0.5);
    }

    #[test]
    fn hausdorff_of_shifted_sets() {
        let a = vec![SparseVector::zero(), SparseVector::unit(0, 1.0)];
        let b = vec![SparseVector::unit(1, 0.5)];
        assert_relative_eq!(hausdorff_l1(&a, &b), 1.5);
        assert_eq!(hausdorff_l1(&a, &a), 0.0);
    }

    #[test]
    fn transport_on_a_line() {
        // uniform on {0,1,2} against uniform on {1,2,3}: cost 1
        let a = vec![1.0 / 3.0; 3];
        let b = vec![1.0 / 3.0; 3];
        let cost = |i: usize, j: usize| ((i as f64) - (j as f64 + 1.0)).abs();
        assert_relative_eq!(transport_cost(&a, &b, &cost), 1.0, epsilon = 1e-12);
        // a crossing assignment must be undone through a reverse edge
        let a = vec![0.5, 0.5];
        let b = vec![0.5, 0.5];
        let pts_a = [0.0f64, 10.0];
        let pts_b = [9.0, 1.0];
        let cost = |i: usize, j: usize| (pts_a[i] - pts_b[j]).abs();
        assert_relative_eq!(transport_cost(&a, &b, &cost), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rescale_requires_long_paths() {
        let triple = EmbeddedTriple {
            cloud: vec![SparseVector::zero()],
            measure: vec![(SparseVector::zero(), 1.0)],
            path: EmbeddedPath::from_steps(vec![SparseVector::zero(); 5]),
        };
        assert!(matches!(theta_rescale(4, &triple, 10), Err(Error::PathTooShort { required: 8, .. })));
        let same = theta_rescale(1, &triple, 1).unwrap();
        assert_eq!(same.cloud, triple.cloud);
    }
}
