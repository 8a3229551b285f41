//! Trees of several sizes read off one master contour, so that all of them
//! approximate the same limiting excursion.

use crtwalk::discrete_tree::{tree_from_depth, OrderedTree};
use crtwalk::excursion::{uniform_dyck_steps, Excursion};
use crtwalk::rng::rng_from_seed;

use crate::error::{HarnessError, Result};

/// Heights of a uniform Dyck path, i.e. the contour of a uniform ordered
/// tree with `vertices` vertices (no padding).
#[derive(Debug, Clone)]
pub struct MasterContour {
    pub heights: Vec<u32>,
    pub vertices: usize,
}

impl MasterContour {
    pub fn sample(vertices: usize, seed: u64) -> Result<Self> {
        if vertices < 2 {
            return Err(HarnessError::Config("master tree needs at least two vertices".into()));
        }
        let steps = uniform_dyck_steps(vertices - 1, &mut rng_from_seed(seed));
        let mut heights = Vec::with_capacity(steps.len() + 1);
        let mut h = 0i64;
        heights.push(0);
        for s in steps {
            h += s as i64;
            heights.push(h as u32);
        }
        Ok(MasterContour { heights, vertices })
    }

    /// The master contour as an excursion on `[0, 1]` with heights scaled by
    /// `vertices^{-1/2}`.
    pub fn excursion(&self) -> Result<Excursion> {
        let scale = (self.vertices as f64).powf(-0.5);
        Ok(Excursion::new(self.heights.iter().map(|&h| h as f64 * scale).collect())?)
    }

    /// Coarse contour: the successive distinct hits of the lattice `a Z`,
    /// divided by `a`. It is again a contour with unit steps.
    pub fn coarse_contour(&self, a: u32) -> Vec<u32> {
        let mut out = vec![0u32];
        for &h in &self.heights[1..] {
            if h % a == 0 && h / a != *out.last().unwrap() {
                out.push(h / a);
            }
        }
        out
    }

    /// Lattice step giving a coarse tree of about `n` vertices.
    pub fn lattice_step(&self, n: usize) -> u32 {
        ((self.vertices as f64 / n as f64).sqrt().round() as u32).max(1)
    }

    /// Coarse tree of about `n` vertices. The realised vertex count is
    /// `tree.n()`.
    pub fn coarse_tree(&self, n: usize) -> Result<OrderedTree> {
        let mut depth = self.coarse_contour(self.lattice_step(n));
        depth.extend([0, 0]);
        Ok(tree_from_depth(&depth)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_lattice_gives_master_tree() {
        let m = MasterContour::sample(50, 3).unwrap();
        let t = m.coarse_tree(50).unwrap();
        assert_eq!(m.lattice_step(50), 1);
        assert_eq!(t.n(), 50);
        assert_eq!(&t.contour().depth[..m.heights.len()], &m.heights[..]);
    }

    #[test]
    fn coarse_contours_have_unit_steps() {
        let m = MasterContour::sample(20_000, 9).unwrap();
        for n in [100, 400, 2000] {
            let c = m.coarse_contour(m.lattice_step(n));
            assert_eq!(*c.last().unwrap(), 0);
            assert!(c.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
            let t = m.coarse_tree(n).unwrap();
            let ratio = t.n() as f64 / n as f64;
            assert!(ratio > 0.5 && ratio < 2.0, "n={n}, realised {}", t.n());
        }
    }
}
