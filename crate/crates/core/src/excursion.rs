//! Excursion functions on a uniform grid of `[0, 1]`.
//!
//! An excursion `w` is stored by its values at `i / N`, `i = 0..=N`. The
//! pseudo-distance `d_w(s, t) = w(s) + w(t) - 2 min_{[s ^ t, s v t]} w` is
//! answered in O(1) per query after an O(N log N) sparse-table build.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Relative tolerance used to decide whether a real time lies on the grid.
pub const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct SparseMin {
    levels: Vec<Vec<f64>>,
}

impl SparseMin {
    fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut span = 1;
        while 2 * span <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=values.len() - 2 * span)
                .map(|i| prev[i].min(prev[i + span]))
                .collect();
            levels.push(next);
            span *= 2;
        }
        SparseMin { levels }
    }

    /// Minimum over the inclusive index range `[i, j]`, `i <= j`.
    fn query(&self, i: usize, j: usize) -> f64 {
        let len = j - i + 1;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let row = &self.levels[k];
        row[i].min(row[j + 1 - (1 << k)])
    }
}

#[derive(Debug, Clone)]
pub struct Excursion {
    values: Vec<f64>,
    table: SparseMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExcursionSampler {
    /// `+-1` walk conditioned to first return to zero at step `2N`, obtained by
    /// cycle-lemma rotation and scaled by `(2N)^{-1/2}`.
    #[default]
    ConditionedWalk,
    /// Vervaat transform of a Gaussian bridge with `N` steps.
    Vervaat,
}

impl Excursion {
    /// Builds an excursion from grid values. Requires at least two values,
    /// finite non-negative entries and zeros at both ends.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidExcursion("need at least two grid values".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidExcursion("values must be finite and non-negative".into()));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidExcursion("values must vanish at 0 and 1".into()));
        }
        let table = SparseMin::new(&values);
        Ok(Excursion { values, table })
    }

    pub fn from_depths(depth: &[u32]) -> Result<Self> {
        Excursion::new(depth.iter().map(|&d| d as f64).collect())
    }

    /// Number of grid intervals `N`.
    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// True when the excursion is positive on the open interval.
    pub fn is_strict(&self) -> bool {
        let n = self.grid_size();
        self.values[1..n].iter().all(|&v| v > 0.0)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.grid_size() as f64
    }

    /// Grid index of a time, or [`Error::OffGrid`] if `t` is not a grid point.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let n = self.grid_size();
        let x = t * n as f64;
        let r = x.round();
        if !(0.0..=n as f64).contains(&r) || (x - r).abs() > GRID_TOL * (n as f64).max(1.0) {
            return Err(Error::OffGrid { t, grid: n });
        }
        Ok(r as usize)
    }

    /// Nearest grid index to `t`, clamped to `[0, N]`.
    pub fn snap(&self, t: f64) -> usize {
        let n = self.grid_size();
        ((t * n as f64).round().max(0.0) as usize).min(n)
    }

    /// `min w` over the index range between `i` and `j` (either order).
    pub fn min_between(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.table.query(a, b)
    }

    pub fn distance_idx(&self, i: usize, j: usize) -> f64 {
        let d = self.values[i] + self.values[j] - 2.0 * self.min_between(i, j);
        d.max(0.0)
    }

    pub fn minimum(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.min_between(self.index_of(s)?, self.index_of(t)?))
    }

    pub fn distance(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.distance_idx(self.index_of(s)?, self.index_of(t)?))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Trapezoid integral over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        let n = self.grid_size() as f64;
        self.values.windows(2).map(|p| 0.5 * (p[0] + p[1])).sum::<f64>() / n
    }

    pub fn scaled(&self, factor: f64) -> Result<Excursion> {
        Excursion::new(self.values.iter().map(|v| v * factor).collect())
    }

    /// Writes `t,w` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,w")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.time(i), v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Excursion> {
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let mut cols = line.split(',');
            let _t = cols.next();
            let w = cols
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 1)))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            values.push(w);
        }
        Excursion::new(values)
    }
}

/// Uniform Dyck path with `m` up-steps, as a vector of `+-1` steps.
pub fn uniform_dyck_steps(m: usize, rng: &mut Rng) -> Vec<i8> {
    let mut steps: Vec<i8> = std::iter::repeat_n(1i8, m)
        .chain(std::iter::repeat_n(-1i8, m + 1))
        .collect();
    steps.shuffle(rng);
    // The rotation starting right after the first global minimum of the
    // partial sums stays non-negative until its final step.
    let mut s = 0i64;
    let mut best = 0i64;
    let mut arg = 0usize;
    for (i, &x) in steps.iter().enumerate() {
        s += x as i64;
        if s < best {
            best = s;
            arg = i + 1;
        }
    }
    let len = steps.len();
    steps.rotate_left(arg % len);
    steps.pop();
    steps
}

/// Samples an approximation of the normalised Brownian excursion on a grid
/// of `n` intervals.
pub fn sample_brownian_excursion(n: usize, seed: u64, sampler: ExcursionSampler) -> Result<Excursion> {
    let mut rng = rng_from_seed(seed);
    sample_brownian_excursion_with(n, &mut rng, sampler)
}

pub fn sample_brownian_excursion_with(
    n: usize,
    rng: &mut Rng,
    sampler: ExcursionSampler,
) -> Result<Excursion> {
    if n < 2 {
        return Err(Error::InvalidArgument("excursion grid size must be at least 2".into()));
    }
    let values = match sampler {
        ExcursionSampler::ConditionedWalk => {
            let dyck = uniform_dyck_steps(n - 1, rng);
            let scale = 1.0 / ((2 * n) as f64).sqrt();
            let mut walk = Vec::with_capacity(2 * n + 1);
            walk.push(0i64);
            walk.push(1i64);
            for &x in &dyck {
                let last = *walk.last().unwrap();
                walk.push(last + x as i64);
            }
            walk.push(0);
            (0..=n).map(|i| walk[2 * i] as f64 * scale).collect()
        }
        ExcursionSampler::Vervaat => {
            let sd = 1.0 / (n as f64).sqrt();
            let mut b = Vec::with_capacity(n + 1);
            b.push(0.0f64);
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                b.push(b.last().unwrap() + sd * z);
            }
            let end = b[n];
            for (i, v) in b.iter_mut().enumerate() {
                *v -= end * i as f64 / n as f64;
            }
            b[n] = 0.0;
            let (arg, min) = b[..n]
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            let mut e: Vec<f64> = (0..n).map(|i| (b[(arg + i) % n] - min).max(0.0)).collect();
            e[0] = 0.0;
            e.push(0.0);
            e
        }
    };
    Excursion::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn triangle(n: usize) -> Excursion {
        Excursion::new((0..=n).map(|i| {
            let t = i as f64 / n as f64;
            t.min(1.0 - t)
        }).collect())
        .unwrap()
    }

    #[test]
    fn triangle_distances() {
        let w = triangle(4);
        assert_relative_eq!(w.distance(0.25, 0.75).unwrap(), 0.0);
        assert_relative_eq!(w.distance(0.25, 0.5).unwrap(), 0.25);
        assert_relative_eq!(w.distance(0.0, 0.5).unwrap(), 0.5);
        assert_relative_eq!(w.minimum(0.25, 0.75).unwrap(), 0.25);
        assert_eq!(w.distance(0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn off_grid_times_are_rejected() {
        let w = triangle(4);
        assert!(matches!(w.distance(0.3, 0.5), Err(Error::OffGrid { .. })));
        assert!(w.index_of(1.5).is_err());
    }

    #[test]
    fn rmq_matches_scan() {
        let mut rng = rng_from_seed(3);
        let w = sample_brownian_excursion_with(257, &mut rng, ExcursionSampler::Vervaat).unwrap();
        for i in (0..=257).step_by(7) {
            for j in (i..=257).step_by(5) {
                let scan = w.values()[i..=j].iter().cloned().fold(f64::INFINITY, f64::min);
                assert_eq!(w.min_between(i, j), scan);
                assert_eq!(w.min_between(j, i), scan);
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(Excursion::new(vec![0.0]).is_err());
        assert!(Excursion::new(vec![0.0, -1.0, 0.0]).is_err());
        assert!(Excursion::new(vec![0.0, 1.0, 0.5]).is_err());
        assert!(sample_brownian_excursion(1, 0, ExcursionSampler::Vervaat).is_err());
    }

    #[test]
    fn samplers_produce_excursions() {
        for sampler in [ExcursionSampler::ConditionedWalk, ExcursionSampler::Vervaat] {
            let w = sample_brownian_excursion(1000, 11, sampler).unwrap();
            assert_eq!(w.grid_size(), 1000);
            assert!(w.is_strict() || sampler == ExcursionSampler::Vervaat);
            assert!(w.max_value() > 0.0);
        }
    }

    #[test]
    fn dyck_paths_are_nonnegative() {
        let mut rng = rng_from_seed(1);
        for m in 0..30 {
            let steps = uniform_dyck_steps(m, &mut rng);
            assert_eq!(steps.len(), 2 * m);
            let mut s = 0i64;
            for &x in &steps {
                s += x as i64;
                assert!(s >= 0);
            }
            assert_eq!(s, 0);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let w = sample_brownian_excursion(64, 5, ExcursionSampler::Vervaat).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = Excursion::read_csv(&buf[..]).unwrap();
        assert_eq!(back.values(), w.values());
    }
}
