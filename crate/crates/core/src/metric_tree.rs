//! Finite rooted metric trees spanned by leaves.
//!
//! Nodes are the root, the leaf endpoints and the branch points (degree at
//! least three). Node 0 is the root. Every other node owns the edge joining
//! it to its parent. A point of the tree is a [`TreePoint`]: a node and an
//! offset measured from the parent end of that node's edge.
//!
//! Trees are built by inserting leaves one at a time. Leaf `i` hangs off the
//! tree spanned by the earlier leaves at height `max_{j<i} meet(i, j)` on the
//! path to the maximising leaf. A leaf lying on the existing tree (within
//! [`MERGE_TOL`]) is recorded as a point and adds no edge. After insertion,
//! children are ordered by the smallest leaf time they carry and nodes are
//! renumbered depth-first, so trees with the same ordered shape get the same
//! node numbering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::Excursion;

pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreePoint {
    pub node: usize,
    pub offset: f64,
}

impl TreePoint {
    pub const ROOT: TreePoint = TreePoint { node: 0, offset: 0.0 };
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetricTreeJson {
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    leaves: Vec<TreePoint>,
    leaf_time: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricTreeJson", into = "MetricTreeJson")]
pub struct MetricTree {
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    children: Vec<Vec<usize>>,
    height: Vec<f64>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    leaves: Vec<TreePoint>,
    leaf_time: Vec<f64>,
}

impl TryFrom<MetricTreeJson> for MetricTree {
    type Error = Error;
    fn try_from(j: MetricTreeJson) -> Result<Self> {
        MetricTree::from_parts(j.parent, j.length, j.leaves, j.leaf_time)
    }
}

impl From<MetricTree> for MetricTreeJson {
    fn from(t: MetricTree) -> Self {
        MetricTreeJson { parent: t.parent, length: t.length, leaves: t.leaves, leaf_time: t.leaf_time }
    }
}

struct Builder {
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    children: Vec<Vec<usize>>,
    height: Vec<f64>,
    leaves: Vec<TreePoint>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            parent: vec![None],
            length: vec![0.0],
            children: vec![Vec::new()],
            height: vec![0.0],
            leaves: Vec::new(),
        }
    }

    fn add_node(&mut self, parent: usize, len: f64) -> usize {
        let id = self.parent.len();
        self.parent.push(Some(parent));
        self.length.push(len);
        self.children.push(Vec::new());
        self.height.push(self.height[parent] + len);
        self.children[parent].push(id);
        id
    }

    fn point_at_height(&self, from: TreePoint, a: f64) -> TreePoint {
        let mut c = from.node;
        while c != 0 && a <= self.height[self.parent[c].unwrap()] + MERGE_TOL {
            c = self.parent[c].unwrap();
        }
        if c == 0 {
            return TreePoint::ROOT;
        }
        let base = self.height[self.parent[c].unwrap()];
        let off = (a - base).min(self.length[c]);
        if off >= self.length[c] - MERGE_TOL {
            TreePoint { node: c, offset: self.length[c] }
        } else {
            TreePoint { node: c, offset: off }
        }
    }

    fn attach(&mut self, p: TreePoint, len: f64) -> TreePoint {
        if p.node == 0 {
            let id = self.add_node(0, len);
            return TreePoint { node: id, offset: len };
        }
        let c = p.node;
        if p.offset >= self.length[c] - MERGE_TOL {
            if self.children[c].is_empty() {
                self.length[c] += len;
                self.height[c] += len;
                return TreePoint { node: c, offset: self.length[c] };
            }
            let id = self.add_node(c, len);
            return TreePoint { node: id, offset: len };
        }
        let o = p.offset;
        let par = self.parent[c].unwrap();
        let b = self.parent.len();
        self.parent.push(Some(par));
        self.length.push(o);
        self.children.push(vec![c]);
        self.height.push(self.height[par] + o);
        let slot = self.children[par].iter().position(|&x| x == c).unwrap();
        self.children[par][slot] = b;
        self.parent[c] = Some(b);
        self.length[c] -= o;
        for leaf in self.leaves.iter_mut() {
            if leaf.node == c {
                if leaf.offset <= o + MERGE_TOL {
                    *leaf = TreePoint { node: b, offset: leaf.offset.min(o) };
                } else {
                    leaf.offset -= o;
                }
            }
        }
        let id = self.add_node(b, len);
        TreePoint { node: id, offset: len }
    }
}

/// Insertion record of a leaf: where it hangs off the earlier leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafAttachment {
    pub height: f64,
    pub attach_height: f64,
    /// Earlier leaf whose root path carries the attachment point.
    pub via: Option<usize>,
}

impl MetricTree {
    /// Sequential insertion from leaf heights and pairwise meeting heights.
    /// `times` orders siblings and is kept as the leaf labels.
    pub fn from_leaf_data<F>(heights: &[f64], meet: F, times: &[f64]) -> Result<MetricTree>
    where
        F: Fn(usize, usize) -> f64,
    {
        if heights.len() != times.len() {
            return Err(Error::InvalidArgument("heights and times differ in length".into()));
        }
        let mut b = Builder::new();
        for (i, &h) in heights.iter().enumerate() {
            let att = attachment(heights, &meet, i);
            let p = match att.via {
                None => TreePoint::ROOT,
                Some(j) => b.point_at_height(b.leaves[j], att.attach_height),
            };
            let loc = if h - att.attach_height < MERGE_TOL { p } else { b.attach(p, h - att.attach_height) };
            b.leaves.push(loc);
        }
        canonicalize(b, times.to_vec())
    }

    pub fn from_parts(
        parent: Vec<Option<usize>>,
        length: Vec<f64>,
        leaves: Vec<TreePoint>,
        leaf_time: Vec<f64>,
    ) -> Result<MetricTree> {
        let n = parent.len();
        if n == 0 || length.len() != n || parent[0].is_some() {
            return Err(Error::InvalidTree("node 0 must be the root".into()));
        }
        if leaves.len() != leaf_time.len() {
            return Err(Error::InvalidTree("leaf times do not match leaves".into()));
        }
        let mut children = vec![Vec::new(); n];
        for v in 1..n {
            let p = parent[v].ok_or_else(|| Error::InvalidTree("several roots".into()))?;
            if p >= v {
                return Err(Error::InvalidTree("parents must precede children".into()));
            }
            if !(length[v] > 0.0) || !length[v].is_finite() {
                return Err(Error::InvalidTree("edge lengths must be positive".into()));
            }
            children[p].push(v);
        }
        for l in &leaves {
            if l.node >= n || l.offset < 0.0 || l.offset > length[l.node] + MERGE_TOL {
                return Err(Error::InvalidTree("leaf point outside the tree".into()));
            }
        }
        let mut t = MetricTree {
            parent,
            length,
            children,
            height: vec![0.0; n],
            tin: vec![0; n],
            tout: vec![0; n],
            leaves,
            leaf_time,
        };
        t.index();
        Ok(t)
    }

    fn index(&mut self) {
        let n = self.parent.len();
        for v in 1..n {
            self.height[v] = self.height[self.parent[v].unwrap()] + self.length[v];
        }
        let mut clock = 0;
        let mut stack = vec![(0usize, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                self.tout[v] = clock;
                continue;
            }
            self.tin[v] = clock;
            clock += 1;
            stack.push((v, true));
            for &c in self.children[v].iter().rev() {
                stack.push((c, false));
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn length(&self, v: usize) -> f64 {
        self.length[v]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.length
    }

    pub fn height(&self, v: usize) -> f64 {
        self.height[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.children[v].len() + usize::from(v != 0)
    }

    pub fn leaves(&self) -> &[TreePoint] {
        &self.leaves
    }

    pub fn leaf_times(&self) -> &[f64] {
        &self.leaf_time
    }

    /// Sum of edge lengths.
    pub fn total_length(&self) -> f64 {
        self.length.iter().sum()
    }

    pub fn min_edge(&self) -> f64 {
        self.length[1..].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Whether node `a` is an ancestor of (or equal to) node `b`.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        self.tin[a] <= self.tin[b] && self.tout[b] <= self.tout[a]
    }

    pub fn same_shape(&self, other: &MetricTree) -> bool {
        self.parent == other.parent
    }

    pub fn point_height(&self, p: &TreePoint) -> f64 {
        match self.parent[p.node] {
            None => 0.0,
            Some(q) => self.height[q] + p.offset,
        }
    }

    /// Point of a node.
    pub fn node_point(&self, v: usize) -> TreePoint {
        TreePoint { node: v, offset: self.length[v] }
    }

    /// Representation with the offset snapped to the node end when it lies
    /// within [`MERGE_TOL`] of either end of its edge.
    pub fn normalize(&self, p: TreePoint) -> TreePoint {
        if p.node == 0 {
            return TreePoint::ROOT;
        }
        if p.offset >= self.length[p.node] - MERGE_TOL {
            return self.node_point(p.node);
        }
        if p.offset <= MERGE_TOL {
            let q = self.parent[p.node].unwrap();
            return self.node_point(q);
        }
        p
    }

    fn meet_height(&self, p: &TreePoint, q: &TreePoint) -> f64 {
        let (a, b) = (p.node, q.node);
        if a == b {
            return self.point_height(p).min(self.point_height(q));
        }
        if self.is_ancestor(a, b) {
            return self.point_height(p);
        }
        if self.is_ancestor(b, a) {
            return self.point_height(q);
        }
        let mut c = a;
        while !self.is_ancestor(c, b) {
            c = self.parent[c].unwrap();
        }
        self.height[c]
    }

    pub fn distance(&self, p: &TreePoint, q: &TreePoint) -> f64 {
        let d = self.point_height(p) + self.point_height(q) - 2.0 * self.meet_height(p, q);
        d.max(0.0)
    }

    /// Whether `p` lies on the segment from the root to `q`.
    pub fn on_root_path(&self, p: &TreePoint, q: &TreePoint) -> bool {
        let p = self.normalize(*p);
        let q = self.normalize(*q);
        if p.node == 0 {
            return true;
        }
        if p.node == q.node {
            return p.offset <= q.offset + MERGE_TOL;
        }
        self.is_ancestor(p.node, q.node)
    }

    /// Point at height `a` on the segment from the root to `q`.
    pub fn point_at_height(&self, q: &TreePoint, a: f64) -> TreePoint {
        let mut c = q.node;
        while c != 0 && a <= self.height[self.parent[c].unwrap()] + MERGE_TOL {
            c = self.parent[c].unwrap();
        }
        if c == 0 {
            return TreePoint::ROOT;
        }
        let base = self.height[self.parent[c].unwrap()];
        self.normalize(TreePoint { node: c, offset: (a - base).min(self.length[c]) })
    }

    /// Insertion records of the leaves, recomputed from the geometry.
    pub fn attachments(&self) -> Vec<LeafAttachment> {
        let heights: Vec<f64> = self.leaves.iter().map(|l| self.point_height(l)).collect();
        let meet = |i: usize, j: usize| self.meet_height(&self.leaves[i], &self.leaves[j]);
        (0..self.leaves.len()).map(|i| attachment(&heights, &meet, i)).collect()
    }

    /// Points at offsets `j * len / g` on every edge, `g = ceil(len / spacing)`,
    /// plus the root.
    pub fn sample_points(&self, spacing: f64) -> Vec<TreePoint> {
        let mut out = vec![TreePoint::ROOT];
        for v in 1..self.n_nodes() {
            let len = self.length[v];
            let g = (len / spacing).ceil().max(1.0) as usize;
            for j in 1..=g {
                out.push(TreePoint { node: v, offset: len * j as f64 / g as f64 });
            }
        }
        out
    }

    /// Points whose height is an integer multiple of `step`.
    pub fn lattice_points(&self, step: f64) -> Vec<TreePoint> {
        let mut out = vec![TreePoint::ROOT];
        for v in 1..self.n_nodes() {
            let lo = self.height[self.parent[v].unwrap()];
            let hi = self.height[v];
            let mut k = (lo / step + 1e-9).floor() as i64 + 1;
            while (k as f64) * step <= hi + 1e-9 * step {
                let off = (k as f64 * step - lo).min(self.length[v]);
                out.push(TreePoint { node: v, offset: off });
                k += 1;
            }
        }
        out
    }

    /// Copy with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> MetricTree {
        let mut t = self.clone();
        for l in t.length.iter_mut() {
            *l *= factor;
        }
        for h in t.height.iter_mut() {
            *h *= factor;
        }
        for p in t.leaves.iter_mut() {
            p.offset *= factor;
        }
        t
    }

    /// Branch points (non-root, non-leaf nodes) and how many have degree
    /// above three.
    pub fn branch_degree_excess(&self) -> (usize, usize) {
        let mut branch = 0;
        let mut excess = 0;
        for v in 1..self.n_nodes() {
            if !self.children[v].is_empty() {
                branch += 1;
                if self.degree(v) > 3 {
                    excess += 1;
                }
            }
        }
        (branch, excess)
    }
}

fn attachment<F: Fn(usize, usize) -> f64>(heights: &[f64], meet: &F, i: usize) -> LeafAttachment {
    let mut best = 0.0;
    let mut via = None;
    for j in 0..i {
        let m = meet(i, j).min(heights[i]);
        if via.is_none() || m > best {
            best = m;
            via = Some(j);
        }
    }
    LeafAttachment { height: heights[i], attach_height: best.max(0.0), via }
}

fn canonicalize(b: Builder, leaf_time: Vec<f64>) -> Result<MetricTree> {
    let n = b.parent.len();
    let mut key = vec![f64::INFINITY; n];
    for (i, l) in b.leaves.iter().enumerate() {
        let mut c = Some(l.node);
        while let Some(v) = c {
            if leaf_time[i] < key[v] {
                key[v] = leaf_time[i];
            }
            c = b.parent[v];
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        order.push(v);
        let mut ch = b.children[v].clone();
        ch.sort_by(|x, y| key[*x].total_cmp(&key[*y]).then(x.cmp(y)));
        for &c in ch.iter().rev() {
            stack.push(c);
        }
    }
    let mut new_id = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        new_id[v] = i;
    }
    let parent: Vec<Option<usize>> = order.iter().map(|&v| b.parent[v].map(|p| new_id[p])).collect();
    let length: Vec<f64> = order.iter().map(|&v| b.length[v]).collect();
    let leaves: Vec<TreePoint> = b
        .leaves
        .iter()
        .map(|l| TreePoint { node: new_id[l.node], offset: if l.node == 0 { 0.0 } else { l.offset } })
        .collect();
    MetricTree::from_parts(parent, length, leaves, leaf_time)
}

/// Tree spanned by the classes of grid times `u` in the excursion.
pub fn reduced_tree_from_excursion(w: &Excursion, u: &[f64]) -> Result<MetricTree> {
    let idx = u.iter().map(|&t| w.index_of(t)).collect::<Result<Vec<_>>>()?;
    reduced_tree_from_indices(w, &idx)
}

pub fn reduced_tree_from_indices(w: &Excursion, idx: &[usize]) -> Result<MetricTree> {
    if let Some(&bad) = idx.iter().find(|&&i| i > w.grid_size()) {
        return Err(Error::InvalidArgument(format!("grid index {bad} out of range")));
    }
    let heights: Vec<f64> = idx.iter().map(|&i| w.value(i)).collect();
    let times: Vec<f64> = idx.iter().map(|&i| w.time(i)).collect();
    MetricTree::from_leaf_data(&heights, |a, b| w.min_between(idx[a], idx[b]), &times)
}

/// Boundary-augmented leaf times sorted increasingly: `(grid index, leaf)`
/// with `None` standing for the root at times 0 and 1.
fn sorted_marks(w: &Excursion, tree: &MetricTree) -> Result<Vec<(usize, Option<usize>)>> {
    let mut marks: Vec<(usize, Option<usize>)> = vec![(0, None), (w.grid_size(), None)];
    for (i, &t) in tree.leaf_times().iter().enumerate() {
        marks.push((w.index_of(t)?, Some(i)));
    }
    marks.sort_by_key(|m| m.0);
    Ok(marks)
}

fn phi_with_marks(w: &Excursion, tree: &MetricTree, marks: &[(usize, Option<usize>)], t: usize) -> TreePoint {
    let pos = marks.partition_point(|m| m.0 <= t);
    let (ti, li) = marks[pos.saturating_sub(1)];
    let (tj, lj) = marks[pos.min(marks.len() - 1)];
    let mi = w.min_between(t, ti);
    let mj = w.min_between(t, tj);
    let (a, leaf) = if mi >= mj { (mi, li) } else { (mj, lj) };
    match leaf {
        None => TreePoint::ROOT,
        Some(l) => tree.point_at_height(&tree.leaves()[l], a),
    }
}

/// Projection of the class of grid time `t` onto the reduced tree, using the
/// two marked times that bracket `t`.
pub fn phi_k(w: &Excursion, tree: &MetricTree, t: f64) -> Result<TreePoint> {
    let marks = sorted_marks(w, tree)?;
    Ok(phi_with_marks(w, tree, &marks, w.index_of(t)?))
}

/// Projection of every grid time, indexed by grid position.
pub fn phi_k_all(w: &Excursion, tree: &MetricTree) -> Result<Vec<TreePoint>> {
    let marks = sorted_marks(w, tree)?;
    Ok((0..=w.grid_size()).map(|t| phi_with_marks(w, tree, &marks, t)).collect())
}

/// `max_t d_w(t, phi_k(t))` over the excursion grid.
pub fn delta_k(w: &Excursion, tree: &MetricTree) -> Result<f64> {
    let marks = sorted_marks(w, tree)?;
    let mut best: f64 = 0.0;
    for t in 0..=w.grid_size() {
        let pos = marks.partition_point(|m| m.0 <= t);
        let ti = marks[pos.saturating_sub(1)].0;
        let tj = marks[pos.min(marks.len() - 1)].0;
        let a = w.min_between(t, ti).max(w.min_between(t, tj));
        best = best.max(w.value(t) - a);
    }
    Ok(best)
}

/// Measure on a metric tree: point atoms plus a constant density per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMeasure {
    pub atoms: Vec<(TreePoint, f64)>,
    /// Density with respect to length on the edge owned by each node.
    pub density: Vec<f64>,
}

impl EdgeMeasure {
    pub fn zero(tree: &MetricTree) -> Self {
        EdgeMeasure { atoms: Vec::new(), density: vec![0.0; tree.n_nodes()] }
    }

    pub fn total(&self, tree: &MetricTree) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>()
            + (1..tree.n_nodes()).map(|v| self.density[v] * tree.length(v)).sum::<f64>()
    }

    /// Mass of the segment from the root to `x`.
    pub fn path_mass(&self, tree: &MetricTree, x: &TreePoint) -> f64 {
        let x = tree.normalize(*x);
        let mut m: f64 = self.atoms.iter().filter(|(p, _)| tree.on_root_path(p, &x)).map(|a| a.1).sum();
        if x.node != 0 {
            m += self.density[x.node] * x.offset;
            let mut c = tree.parent(x.node).unwrap();
            while c != 0 {
                m += self.density[c] * tree.length(c);
                c = tree.parent(c).unwrap();
            }
        }
        m
    }

    /// Mass of the closed ball of radius `r` around `x`.
    pub fn ball_mass(&self, tree: &MetricTree, x: &TreePoint, r: f64) -> f64 {
        let x = tree.normalize(*x);
        let mut m: f64 = self.atoms.iter().filter(|(p, _)| tree.distance(p, &x) <= r).map(|a| a.1).sum();
        for v in 1..tree.n_nodes() {
            if self.density[v] == 0.0 {
                continue;
            }
            let len = tree.length(v);
            let inside = if x.node == v && x.offset < len {
                (x.offset + r).min(len) - (x.offset - r).max(0.0)
            } else if tree.is_ancestor(v, x.node) {
                r - tree.distance(&tree.node_point(v), &x)
            } else {
                r - tree.distance(&TreePoint { node: v, offset: 0.0 }, &x)
            };
            m += self.density[v] * inside.clamp(0.0, len);
        }
        m
    }

    fn sorted_atoms(&self) -> Vec<(TreePoint, f64)> {
        let mut a = self.atoms.clone();
        a.sort_by(|x, y| x.0.node.cmp(&y.0.node).then(x.0.offset.total_cmp(&y.0.offset)));
        let mut out: Vec<(TreePoint, f64)> = Vec::with_capacity(a.len());
        for (p, m) in a {
            match out.last_mut() {
                Some(last) if last.0 == p => last.1 += m,
                _ => out.push((p, m)),
            }
        }
        out
    }
}

/// Image of Lebesgue measure on the grid under the projection onto the tree.
/// `resolution` grid points carry mass `1 / resolution` each.
pub fn mu_k_measure(w: &Excursion, tree: &MetricTree, resolution: usize) -> Result<EdgeMeasure> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let marks = sorted_marks(w, tree)?;
    let n = w.grid_size();
    let mass = 1.0 / resolution as f64;
    let atoms = (0..resolution)
        .map(|i| {
            let t = (((i as f64 + 0.5) * n as f64 / resolution as f64).floor() as usize).min(n);
            (tree.normalize(phi_with_marks(w, tree, &marks, t)), mass)
        })
        .collect();
    let m = EdgeMeasure { atoms, density: vec![0.0; tree.n_nodes()] };
    Ok(EdgeMeasure { atoms: m.sorted_atoms(), density: m.density })
}

/// Normalised length measure.
pub fn lambda_k_measure(tree: &MetricTree) -> EdgeMeasure {
    let total = tree.total_length();
    let mut density = vec![0.0; tree.n_nodes()];
    if total > 0.0 {
        for d in density.iter_mut().skip(1) {
            *d = 1.0 / total;
        }
    }
    EdgeMeasure { atoms: Vec::new(), density }
}

/// Rescaling homeomorphism between trees of the same shape: each edge is
/// stretched linearly onto its counterpart.
pub fn upsilon_map(from: &MetricTree, to: &MetricTree, p: &TreePoint) -> Result<TreePoint> {
    if !from.same_shape(to) {
        return Err(Error::ShapeMismatch);
    }
    if p.node == 0 {
        return Ok(TreePoint::ROOT);
    }
    let ratio = to.length(p.node) / from.length(p.node);
    Ok(TreePoint { node: p.node, offset: (p.offset * ratio).min(to.length(p.node)) })
}

pub fn upsilon_measure(from: &MetricTree, to: &MetricTree, m: &EdgeMeasure) -> Result<EdgeMeasure> {
    if !from.same_shape(to) {
        return Err(Error::ShapeMismatch);
    }
    let atoms = m
        .atoms
        .iter()
        .map(|(p, w)| Ok((upsilon_map(from, to, p)?, *w)))
        .collect::<Result<Vec<_>>>()?;
    let density = (0..to.n_nodes())
        .map(|v| if v == 0 { 0.0 } else { m.density[v] * from.length(v) / to.length(v) })
        .collect();
    Ok(EdgeMeasure { atoms, density })
}

/// `int |a + b s| ds` over `[lo, hi]`.
fn abs_linear_integral(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let f = |s: f64| a + b * s;
    let (flo, fhi) = (f(lo), f(hi));
    if flo * fhi >= 0.0 {
        0.5 * (flo.abs() + fhi.abs()) * (hi - lo)
    } else {
        let root = -a / b;
        0.5 * flo.abs() * (root - lo) + 0.5 * fhi.abs() * (hi - root)
    }
}

/// Wasserstein-1 distance between two measures of equal mass on the same
/// tree: the integral over the tree of `|mu(beyond x) - nu(beyond x)|`.
pub fn tree_w1(tree: &MetricTree, mu: &EdgeMeasure, nu: &EdgeMeasure) -> f64 {
    let n = tree.n_nodes();
    let mut edge_atoms: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
    for (p, m) in &mu.atoms {
        let p = tree.normalize(*p);
        edge_atoms[p.node].push((p.offset, *m));
    }
    for (p, m) in &nu.atoms {
        let p = tree.normalize(*p);
        edge_atoms[p.node].push((p.offset, -*m));
    }
    let dens: Vec<f64> = (0..n).map(|v| mu.density[v] - nu.density[v]).collect();
    // subtree mass difference, children before parents
    let mut sub = vec![0.0; n];
    for v in (1..n).rev() {
        let own: f64 = edge_atoms[v].iter().map(|a| a.1).sum::<f64>() + dens[v] * tree.length(v);
        sub[v] += own;
        let p = tree.parent(v).unwrap();
        let carry = sub[v];
        sub[p] += carry;
    }
    let mut total = 0.0;
    for v in 1..n {
        let len = tree.length(v);
        let below: f64 = tree.children(v).iter().map(|&c| sub[c]).sum();
        let mut atoms = edge_atoms[v].clone();
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
        // sweep from the node end down to the parent end
        let mut beyond = below;
        let mut hi = len;
        let mut k = 0;
        while k < atoms.len() && atoms[k].0 >= hi {
            beyond += atoms[k].1;
            k += 1;
        }
        loop {
            let lo = if k < atoms.len() { atoms[k].0.max(0.0) } else { 0.0 };
            // D(s) = beyond + dens * (len - s) on (lo, hi)
            total += abs_linear_integral(beyond + dens[v] * len, -dens[v], lo, hi);
            if k >= atoms.len() {
                break;
            }
            let here = atoms[k].0;
            while k < atoms.len() && atoms[k].0 >= here {
                beyond += atoms[k].1;
                k += 1;
            }
            hi = here;
        }
    }
    total
}

/// Components of the 4-tuple distance. `measure` uses the tree-W1
/// surrogate in place of the Prohorov distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleDistance {
    pub shape: f64,
    pub measure_w1_surrogate: f64,
    pub path: f64,
    pub local_time: f64,
    pub total: f64,
}

/// One side of a 4-tuple comparison. `path` is sampled on a time grid
/// shared with the other side; `local_time(j, x)` evaluates the local-time
/// field at time-grid index `j` and point `x`.
pub struct Quadruple<'a> {
    pub tree: &'a MetricTree,
    pub measure: &'a EdgeMeasure,
    pub path: &'a [TreePoint],
    pub local_time: &'a dyn Fn(usize, &TreePoint) -> f64,
}

/// Distance between two 4-tuples, capped at 1. Trees of different shape are
/// at distance 1. Local times are compared at `probe_spacing`-spaced points.
pub fn tuple_distance(a: &Quadruple, b: &Quadruple, probe_spacing: f64) -> Result<TupleDistance> {
    let capped = TupleDistance { shape: f64::INFINITY, measure_w1_surrogate: 0.0, path: 0.0, local_time: 0.0, total: 1.0 };
    if !a.tree.same_shape(b.tree) {
        return Ok(capped);
    }
    if a.path.len() != b.path.len() {
        return Err(Error::InvalidArgument("paths must share a time grid".into()));
    }
    let (ta, tb) = (a.tree, b.tree);
    let shape = (1..ta.n_nodes()).map(|v| (ta.length(v) - tb.length(v)).abs()).fold(0.0, f64::max);
    let measure = tree_w1(ta, a.measure, &upsilon_measure(tb, ta, b.measure)?)
        + tree_w1(tb, &upsilon_measure(ta, tb, a.measure)?, b.measure);
    let mut path: f64 = 0.0;
    for (p, q) in a.path.iter().zip(b.path) {
        let d = ta.distance(p, &upsilon_map(tb, ta, q)?) + tb.distance(&upsilon_map(ta, tb, p)?, q);
        path = path.max(d);
    }
    let probes = ta.sample_points(probe_spacing);
    let mut lt: f64 = 0.0;
    for j in 0..a.path.len() {
        for x in &probes {
            let y = upsilon_map(ta, tb, x)?;
            lt = lt.max(((a.local_time)(j, x) - (b.local_time)(j, &y)).abs());
        }
    }
    let total = (shape + measure + path + lt).min(1.0);
    Ok(TupleDistance { shape, measure_w1_surrogate: measure, path, local_time: lt, total })
}
