//! Exact answers for finite Markov chains, used to validate the simulators
//! and the closed forms.
//!
//! Linear systems are solved by Gaussian elimination in any ordered field;
//! with [`BigRational`] the answers are exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::diffusion::GridTree;
use crate::discrete_tree::{enumerate_ordered_trees, Offspring, OrderedTree};
use crate::error::{Error, Result};
use crate::walk::visit_gadget;

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Solves `a x = b` for several right-hand sides (columns of `b`).
pub fn solve_multi<T>(mut a: Vec<Vec<T>>, mut b: Vec<Vec<T>>) -> Result<Vec<Vec<T>>>
where
    T: Clone + Signed + PartialOrd,
{
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .ok_or(Error::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / p.clone();
            for c in col..n {
                let v = f.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - v;
            }
            for c in 0..b[r].len() {
                let v = f.clone() * b[col][c].clone();
                b[r][c] = b[r][c].clone() - v;
            }
        }
    }
    for r in 0..n {
        let p = a[r][r].clone();
        for v in b[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
    }
    Ok(b)
}

pub fn solve<T>(a: Vec<Vec<T>>, b: Vec<T>) -> Result<Vec<T>>
where
    T: Clone + Signed + PartialOrd,
{
    let cols = b.into_iter().map(|v| vec![v]).collect();
    Ok(solve_multi(a, cols)?.into_iter().map(|mut r| r.remove(0)).collect())
}

/// Markov chain given by sparse transition rows.
#[derive(Debug, Clone)]
pub struct LinearSystemOracle<T> {
    pub rows: Vec<Vec<(usize, T)>>,
}

impl<T> LinearSystemOracle<T>
where
    T: Clone + Signed + PartialOrd,
{
    /// Simple random walk on a graph given by neighbour lists.
    pub fn simple_walk(neighbors: &[Vec<usize>]) -> Self {
        let rows = neighbors
            .iter()
            .map(|nb| {
                let d = T::one() / (0..nb.len()).fold(T::zero(), |acc, _| acc + T::one());
                nb.iter().map(|&j| (j, d.clone())).collect()
            })
            .collect();
        LinearSystemOracle { rows }
    }

    pub fn from_tree(tree: &OrderedTree) -> Self {
        let nb: Vec<Vec<usize>> = (0..tree.n()).map(|v| tree.neighbors(v).to_vec()).collect();
        Self::simple_walk(&nb)
    }

    fn transient_index(&self, absorbing: &[bool]) -> (Vec<usize>, Vec<usize>) {
        let states: Vec<usize> = (0..self.rows.len()).filter(|&v| !absorbing[v]).collect();
        let mut index = vec![usize::MAX; self.rows.len()];
        for (i, &v) in states.iter().enumerate() {
            index[v] = i;
        }
        (states, index)
    }

    fn fundamental_matrix(&self, states: &[usize], index: &[usize]) -> Vec<Vec<T>> {
        let m = states.len();
        let mut a = vec![vec![T::zero(); m]; m];
        for (i, &v) in states.iter().enumerate() {
            a[i][i] = T::one();
            for (j, p) in &self.rows[v] {
                if index[*j] != usize::MAX {
                    let k = index[*j];
                    a[i][k] = a[i][k].clone() - p.clone();
                }
            }
        }
        a
    }

    /// First two moments of the hitting time of `absorbing`, for every
    /// start (zero on absorbing states).
    pub fn hitting_time_moments(&self, absorbing: &[bool]) -> Result<(Vec<T>, Vec<T>)> {
        let (states, index) = self.transient_index(absorbing);
        let a = self.fundamental_matrix(&states, &index);
        let mean = solve(a.clone(), vec![T::one(); states.len()])?;
        // s = 1 + Q (2 m + s)  <=>  (I - Q) s = 1 + 2 Q m
        let two = T::one() + T::one();
        let rhs: Vec<T> = states
            .iter()
            .map(|&v| {
                let mut acc = T::one();
                for (j, p) in &self.rows[v] {
                    if index[*j] != usize::MAX {
                        acc = acc + p.clone() * two.clone() * mean[index[*j]].clone();
                    }
                }
                acc
            })
            .collect();
        let second = solve(a, rhs)?;
        let mut m = vec![T::zero(); self.rows.len()];
        let mut s = vec![T::zero(); self.rows.len()];
        for (i, &v) in states.iter().enumerate() {
            m[v] = mean[i].clone();
            s[v] = second[i].clone();
        }
        Ok((m, s))
    }

    pub fn expected_hitting_time(&self, start: usize, absorbing: &[bool]) -> Result<T> {
        Ok(self.hitting_time_moments(absorbing)?.0[start].clone())
    }

    /// Probability of reaching `a` before `b`, for every start.
    pub fn hitting_probability(&self, a: usize, b: usize) -> Result<Vec<T>> {
        let mut absorbing = vec![false; self.rows.len()];
        absorbing[a] = true;
        absorbing[b] = true;
        let (states, index) = self.transient_index(&absorbing);
        let mat = self.fundamental_matrix(&states, &index);
        let rhs: Vec<T> = states
            .iter()
            .map(|&v| {
                self.rows[v]
                    .iter()
                    .filter(|(j, _)| *j == a)
                    .fold(T::zero(), |acc, (_, p)| acc + p.clone())
            })
            .collect();
        let sol = solve(mat, rhs)?;
        let mut out = vec![T::zero(); self.rows.len()];
        out[a] = T::one();
        for (i, &v) in states.iter().enumerate() {
            out[v] = sol[i].clone();
        }
        Ok(out)
    }
}

/// Exact first and second moments of the exit time from the root of `tree`
/// with `d` pendant vertices attached to the root.
pub fn exit_time_moments_exact(tree: &OrderedTree, d: usize) -> Result<(BigRational, BigRational)> {
    let host = tree.with_root_pendants(d);
    let oracle = LinearSystemOracle::<BigRational>::from_tree(&host);
    let absorbing: Vec<bool> = (0..host.n()).map(|v| (1..=d).contains(&v)).collect();
    let (m, s) = oracle.hitting_time_moments(&absorbing)?;
    Ok((m[host.root()].clone(), s[host.root()].clone()))
}

/// `(2 |T| - 2 + D) / D`.
pub fn exit_time_mean_formula(size: usize, d: usize) -> BigRational {
    rational(2 * size as i64 - 2 + d as i64, d as i64)
}

/// `36 (D + h) |T|^2 / D`.
pub fn exit_time_second_moment_bound(size: usize, d: usize, height: u32) -> BigRational {
    rational(36 * (d as i64 + height as i64) * (size as i64).pow(2), d as i64)
}

/// Exact law of the number of visits to `y` before the first return to `x`
/// on the gadget of [`visit_gadget`], for counts `0..=kmax`. The chain is
/// augmented by the running count; since counts never decrease the
/// absorption probabilities are solved one count layer at a time.
pub fn visit_count_pmf_exact(l: usize, d1: usize, d2: usize, kmax: usize) -> Result<Vec<BigRational>> {
    let (tree, x, y) = visit_gadget(l, d1, d2)?;
    let oracle = LinearSystemOracle::<BigRational>::from_tree(&tree);
    let states: Vec<usize> = (0..tree.n()).filter(|&v| v != x).collect();
    let mut index = vec![usize::MAX; tree.n()];
    for (i, &v) in states.iter().enumerate() {
        index[v] = i;
    }
    let m = states.len();
    // h[c][i][k]: probability of ending with count k from state (states[i], c)
    let mut h: Vec<Vec<Vec<BigRational>>> = vec![vec![vec![BigRational::zero(); kmax + 1]; m]; kmax + 2];
    for c in (0..=kmax).rev() {
        let mut a = vec![vec![BigRational::zero(); m]; m];
        let mut b = vec![vec![BigRational::zero(); kmax + 1]; m];
        for (i, &v) in states.iter().enumerate() {
            a[i][i] = BigRational::one();
            for (j, p) in &oracle.rows[v] {
                if *j == x {
                    b[i][c] += p.clone();
                } else if *j == y {
                    for k in 0..=kmax {
                        b[i][k] += p.clone() * h[c + 1][index[y]][k].clone();
                    }
                } else {
                    a[i][index[*j]] -= p.clone();
                }
            }
        }
        h[c] = solve_multi(a, b)?;
    }
    let mut out = vec![BigRational::zero(); kmax + 1];
    for (j, p) in &oracle.rows[x] {
        let c = usize::from(*j == y);
        for k in 0..=kmax {
            out[k] += p.clone() * h[c][index[*j]][k].clone();
        }
    }
    Ok(out)
}

/// `P(N = 0) = 1 - 1/(L D1)`, `P(N = k) = (1 - 1/(L D2))^{k-1} / (L^2 D1 D2)`.
pub fn visit_count_pmf_formula(l: usize, d1: usize, d2: usize, k: usize) -> BigRational {
    let (l, d1, d2) = (l as i64, d1 as i64, d2 as i64);
    if k == 0 {
        return BigRational::one() - rational(1, l * d1);
    }
    let q = BigRational::one() - rational(1, l * d2);
    let mut p = rational(1, l * l * d1 * d2);
    for _ in 1..k {
        p *= q.clone();
    }
    p
}

/// Exact hitting probability `P_z(reach x before y)` of the grid chain.
pub fn grid_hitting_probability(grid: &GridTree, z: usize, x: usize, y: usize) -> Result<f64> {
    let rows = (0..grid.len())
        .map(|v| {
            let c = grid.conductance[v];
            grid.neighbors(v)
                .iter()
                .zip(grid.cells(v))
                .map(|(&j, &cell)| (j as usize, 1.0 / cell / c))
                .collect()
        })
        .collect();
    let oracle = LinearSystemOracle { rows };
    Ok(oracle.hitting_probability(x, y)?[z])
}

/// Law of the conditioned Galton-Watson tree with `n` vertices, as pairs of
/// (search-depth sequence, probability), by enumeration.
pub fn conditioned_gw_law(offspring: &Offspring, n: usize) -> Vec<(Vec<u32>, f64)> {
    let trees = enumerate_ordered_trees(n);
    let weights: Vec<f64> = trees
        .iter()
        .map(|t| t.child_counts().iter().map(|&c| offspring.pmf(c)).product())
        .collect();
    let total: f64 = weights.iter().sum();
    trees
        .into_iter()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .map(|(t, w)| (t.search_depth(), w / total))
        .collect()
}

/// Exact law of the vertex selected by a uniform time, for a tree given by
/// its contour: mass `1/(2n)` per grid cell, assigned to the deeper end
/// (left end on ties). Returned as numerators over `2n`.
pub fn gamma_law_exact(depth: &[u32], vertex: &[usize], n: usize) -> Vec<num_rational::Ratio<i64>> {
    let m = depth.len() - 1;
    let mut out = vec![num_rational::Ratio::from_integer(0); n];
    for i in 0..m {
        let pick = if depth[i] >= depth[i + 1] { i } else { i + 1 };
        out[vertex[pick]] += num_rational::Ratio::new(1, m as i64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_solver() {
        let a = vec![vec![rational(2, 1), rational(1, 1)], vec![rational(1, 1), rational(3, 1)]];
        let b = vec![rational(3, 1), rational(5, 1)];
        let x = solve(a, b).unwrap();
        assert_eq!(x, vec![rational(4, 5), rational(7, 5)]);
    }

    #[test]
    fn singular_system() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(solve(a, vec![1.0, 1.0]), Err(Error::Singular)));
    }

    #[test]
    fn exit_time_single_vertex() {
        let t = OrderedTree::from_parents(vec![None]).unwrap();
        let (m, s) = exit_time_moments_exact(&t, 3).unwrap();
        assert_eq!(m, rational(1, 1));
        assert_eq!(s, rational(1, 1));
    }

    #[test]
    fn exit_time_edge() {
        // root + one child, D = 1: alpha = 3
        let t = OrderedTree::from_parents(vec![None, Some(0)]).unwrap();
        let (m, _) = exit_time_moments_exact(&t, 1).unwrap();
        assert_eq!(m, exit_time_mean_formula(2, 1));
        assert_eq!(m, rational(3, 1));
    }

    #[test]
    fn visit_pmf_small_case() {
        // L = D1 = D2 = 1: N = 0 surely
        let p = visit_count_pmf_exact(1, 1, 1, 3).unwrap();
        assert_eq!(p[0], rational(0, 1));
        assert_eq!(p[1], rational(1, 1));
        assert_eq!(p[1], visit_count_pmf_formula(1, 1, 1, 1));
    }

    #[test]
    fn poisson_n3_law() {
        let law = conditioned_gw_law(&Offspring::Poisson { mean: 1.0 }, 3);
        let path = law.iter().find(|(d, _)| d == &vec![0, 1, 2, 1, 0, 0, 0]).unwrap().1;
        let cherry = law.iter().find(|(d, _)| d == &vec![0, 1, 0, 1, 0, 0, 0]).unwrap().1;
        assert!((path - 2.0 / 3.0).abs() < 1e-12);
        assert!((cherry - 1.0 / 3.0).abs() < 1e-12);
    }
}
