use std::collections::HashMap;

use crtwalk::discrete_tree::{sample_gw_conditioned, select_vertices, Offspring, OrderedTree};
use crtwalk::excursion::{sample_brownian_excursion, ExcursionSampler};
use crtwalk::metric_tree::reduced_tree_from_indices;
use crtwalk::oracles::conditioned_gw_law;
use crtwalk::rng::{derive_seed, rng_from_seed};
use crtwalk::stats::{ks_pvalue, ks_statistic, mean, std_error};
use rand::Rng as _;
use rayon::prelude::*;

fn areas(n: usize, samples: usize, seed: u64, s: ExcursionSampler) -> Vec<f64> {
    (0..samples)
        .into_par_iter()
        .map(|i| sample_brownian_excursion(n, derive_seed(seed, i as u64), s).unwrap().integral())
        .collect()
}

#[test]
fn excursion_backends_agree_on_mean_area() {
    let a = areas(20_000, 10_000, 1, ExcursionSampler::ConditionedWalk);
    let b = areas(20_000, 10_000, 2, ExcursionSampler::Vervaat);
    let se = (std_error(&a).powi(2) + std_error(&b).powi(2)).sqrt();
    let gap = (mean(&a) - mean(&b)).abs();
    assert!(gap <= 3.0 * se, "mean areas {} vs {}, gap {gap}, se {se}", mean(&a), mean(&b));
}

#[test]
fn excursion_maximum_is_stable_under_refinement() {
    for s in [ExcursionSampler::ConditionedWalk, ExcursionSampler::Vervaat] {
        let max = |n: usize, seed: u64| -> Vec<f64> {
            (0..1000)
                .into_par_iter()
                .map(|i| sample_brownian_excursion(n, derive_seed(seed, i), s).unwrap().max_value())
                .collect()
        };
        let (a, b) = (max(4000, 10), max(8000, 11));
        let p = ks_pvalue(ks_statistic(&a, &b), a.len(), b.len());
        assert!(p > 0.01, "{s:?}: KS p-value {p}");
    }
}

fn shape_frequencies(off: &Offspring, n: usize, samples: usize, seed: u64) -> HashMap<Vec<u32>, usize> {
    let mut freq = HashMap::new();
    for i in 0..samples {
        let t = sample_gw_conditioned(off, n, derive_seed(seed, i as u64)).unwrap();
        assert_eq!(t.n(), n);
        *freq.entry(t.search_depth()).or_insert(0) += 1;
    }
    freq
}

#[test]
fn conditioned_gw_matches_exact_laws() {
    let cases = [
        (Offspring::Geometric { p: 0.5 }, 3),
        (Offspring::Geometric { p: 0.5 }, 4),
        (Offspring::Poisson { mean: 1.0 }, 3),
        (Offspring::Binary, 5),
        (Offspring::Pmf { probs: vec![0.3, 0.45, 0.2, 0.05] }, 4),
    ];
    let samples = 100_000;
    for (off, n) in cases {
        let law = conditioned_gw_law(&off, n);
        let freq = shape_frequencies(&off, n, samples, 99);
        let seen: usize = law.iter().map(|(s, _)| freq.get(s).copied().unwrap_or(0)).sum();
        assert_eq!(seen, samples, "{off:?}: sampled a shape outside the support");
        for (shape, p) in &law {
            let f = freq.get(shape).copied().unwrap_or(0) as f64 / samples as f64;
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            assert!((f - p).abs() <= 3.0 * se, "{off:?} n={n} shape {shape:?}: {f} vs {p}");
        }
    }
    let poisson = conditioned_gw_law(&Offspring::Poisson { mean: 1.0 }, 3);
    let path = poisson.iter().find(|(s, _)| s == &vec![0, 1, 2, 1, 0, 0, 0]).unwrap().1;
    assert!((path - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(conditioned_gw_law(&Offspring::Geometric { p: 0.5 }, 4).len(), 5);
}

#[test]
fn uniform_times_select_uniform_vertices() {
    let t = OrderedTree::from_parents(vec![None, Some(0), Some(1), Some(0), Some(3)]).unwrap();
    let c = t.contour();
    let samples = 100_000;
    let mut rng = rng_from_seed(4);
    let u: Vec<f64> = (0..samples).map(|_| rng.random()).collect();
    let mut counts = [0usize; 5];
    for v in select_vertices(&c, &u).unwrap() {
        counts[v] += 1;
    }
    let se = (0.2f64 * 0.8 / samples as f64).sqrt();
    for c in counts {
        assert!((c as f64 / samples as f64 - 0.2).abs() <= 3.0 * se, "{counts:?}");
    }
}

#[test]
fn excess_branch_degree_is_rare() {
    let (mut branch, mut excess) = (0, 0);
    for seed in 0..20 {
        let w = sample_brownian_excursion(100_000, seed, ExcursionSampler::Vervaat).unwrap();
        let mut rng = rng_from_seed(seed + 1000);
        let idx: Vec<usize> = (0..50).map(|_| rng.random_range(0..=w.grid_size())).collect();
        let (b, e) = reduced_tree_from_indices(&w, &idx).unwrap().branch_degree_excess();
        branch += b;
        excess += e;
    }
    assert!(branch > 0);
    assert!((excess as f64) < 0.01 * branch as f64, "{excess} of {branch} branch points above degree 3");
}
