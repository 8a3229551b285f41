use crtwalk::diffusion::{trace_on_subtree, GridTree};
use crtwalk::discrete_tree::{
    enumerate_ordered_trees, project_vertex, pushforward_measure, reduced_subtree, sample_gw_conditioned,
    select_vertices, tree_from_depth, AtomicMeasure, Offspring, OrderedTree,
};
use crtwalk::embedding::sequential_embed;
use crtwalk::excursion::{sample_brownian_excursion, Excursion, ExcursionSampler};
use crtwalk::metric_tree::{
    delta_k, lambda_k_measure, mu_k_measure, reduced_tree_from_indices, MetricTree, TreePoint,
};
use crtwalk::rng::rng_from_seed;
use crtwalk::walk::{a_hat, a_hat_from_local_times, jump_chain, local_times, simulate_srw, visit_counts};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::Rng as _;

fn random_indices(w: &Excursion, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    (0..k).map(|_| rng.random_range(0..=w.grid_size())).collect()
}

fn random_tree(n: usize, seed: u64) -> OrderedTree {
    sample_gw_conditioned(&Offspring::Geometric { p: 0.5 }, n, seed).unwrap()
}

fn random_points(tree: &MetricTree, count: usize, seed: u64) -> Vec<TreePoint> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let node = rng.random_range(0..tree.n_nodes());
            let offset = if node == 0 { 0.0 } else { rng.random::<f64>() * tree.length(node) };
            TreePoint { node, offset }
        })
        .collect()
}

fn sampler() -> impl Strategy<Value = ExcursionSampler> {
    prop_oneof![Just(ExcursionSampler::ConditionedWalk), Just(ExcursionSampler::Vervaat)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contour_round_trip_on_random_trees(n in 1usize..300, seed in any::<u64>()) {
        let t = random_tree(n, seed);
        let c = t.contour();
        prop_assert_eq!(c.depth.len(), 2 * n + 1);
        prop_assert_eq!(tree_from_depth(&c.depth).unwrap(), t);
    }

    #[test]
    fn excursion_metric_matches_scan(n in 2usize..400, seed in any::<u64>(), s in sampler()) {
        let w = sample_brownian_excursion(n, seed, s).unwrap();
        prop_assert_eq!(w.value(0), 0.0);
        prop_assert_eq!(w.value(n), 0.0);
        let mut rng = rng_from_seed(seed ^ 1);
        for _ in 0..50 {
            let i = rng.random_range(0..=n);
            let j = rng.random_range(0..=n);
            let scan = w.values()[i.min(j)..=i.max(j)].iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(w.min_between(i, j), scan);
            prop_assert_eq!(w.distance_idx(i, j), w.distance_idx(j, i));
            prop_assert!(w.distance_idx(i, j) >= 0.0);
        }
    }

    #[test]
    fn built_trees_reproduce_the_excursion_metric(seed in any::<u64>(), k in 1usize..12, s in sampler()) {
        let w = sample_brownian_excursion(500, seed, s).unwrap();
        let idx = random_indices(&w, k, seed);
        let tree = reduced_tree_from_indices(&w, &idx).unwrap();
        let leaves = tree.leaves();
        for i in 0..k {
            prop_assert!((tree.point_height(&leaves[i]) - w.value(idx[i])).abs() < 1e-12);
            for j in 0..k {
                let d = tree.distance(&leaves[i], &leaves[j]);
                prop_assert!((d - w.distance_idx(idx[i], idx[j])).abs() < 1e-12);
            }
        }
        let total: f64 = tree.lengths().iter().sum();
        prop_assert!((tree.total_length() - total).abs() < 1e-12);
        for v in 1..tree.n_nodes() {
            prop_assert!(tree.length(v) > 0.0);
            if !tree.children(v).is_empty() {
                prop_assert!(tree.degree(v) >= 3);
            }
        }
    }

    #[test]
    fn four_point_condition(seed in any::<u64>(), k in 4usize..10) {
        let w = sample_brownian_excursion(400, seed, ExcursionSampler::ConditionedWalk).unwrap();
        let tree = reduced_tree_from_indices(&w, &random_indices(&w, k, seed)).unwrap();
        let pts = random_points(&tree, 8, seed ^ 7);
        let d = |a: usize, b: usize| tree.distance(&pts[a], &pts[b]);
        for a in 0..8 { for b in a + 1..8 { for c in b + 1..8 { for e in c + 1..8 {
            let mut s = [d(a, b) + d(c, e), d(a, c) + d(b, e), d(a, e) + d(b, c)];
            s.sort_by(f64::total_cmp);
            prop_assert!((s[2] - s[1]).abs() < 1e-12);
        }}}}
    }

    #[test]
    fn embedding_is_an_isometry(seed in any::<u64>(), k in 1usize..10) {
        let w = sample_brownian_excursion(300, seed, ExcursionSampler::Vervaat).unwrap();
        let tree = reduced_tree_from_indices(&w, &random_indices(&w, k, seed)).unwrap();
        let psi = sequential_embed(&tree);
        let mut pts = random_points(&tree, 40, seed ^ 3);
        pts.extend((0..tree.n_nodes()).map(|v| tree.node_point(v)));
        let img = psi.embed_all(&tree, &pts).unwrap();
        prop_assert_eq!(psi.embed(&tree, &TreePoint::ROOT).unwrap().norm1(), 0.0);
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                let err = (img[a].l1_distance(&img[b]) - tree.distance(&pts[a], &pts[b])).abs();
                prop_assert!(err < 1e-12, "isometry error {}", err);
            }
        }
        for (i, l) in tree.leaves().iter().enumerate() {
            let v = psi.embed(&tree, l).unwrap();
            prop_assert!(v.entries().iter().all(|e| (e.0 as usize) <= i));
        }
    }

    #[test]
    fn embedding_is_nested(seed in any::<u64>(), k in 2usize..10) {
        let w = sample_brownian_excursion(300, seed, ExcursionSampler::ConditionedWalk).unwrap();
        let idx = random_indices(&w, k, seed);
        let big = reduced_tree_from_indices(&w, &idx).unwrap();
        let small = reduced_tree_from_indices(&w, &idx[..k - 1]).unwrap();
        let (pb, ps) = (sequential_embed(&big), sequential_embed(&small));
        for i in 0..k - 1 {
            let a = pb.embed(&big, &big.leaves()[i]).unwrap();
            let b = ps.embed(&small, &small.leaves()[i]).unwrap();
            prop_assert!(a.l1_distance(&b) < 1e-12);
        }
    }

    #[test]
    fn projection_error_shrinks_with_more_leaves(seed in any::<u64>()) {
        let w = sample_brownian_excursion(400, seed, ExcursionSampler::ConditionedWalk).unwrap();
        let idx = random_indices(&w, 8, seed);
        let mut last = f64::INFINITY;
        for k in 1..=8 {
            let d = delta_k(&w, &reduced_tree_from_indices(&w, &idx[..k]).unwrap()).unwrap();
            prop_assert!(d <= last + 1e-12);
            last = d;
        }
    }

    #[test]
    fn measures_have_unit_mass(seed in any::<u64>(), k in 1usize..8) {
        let w = sample_brownian_excursion(300, seed, ExcursionSampler::ConditionedWalk).unwrap();
        let tree = reduced_tree_from_indices(&w, &random_indices(&w, k, seed)).unwrap();
        if tree.total_length() > 0.0 {
            prop_assert!((lambda_k_measure(&tree).total(&tree) - 1.0).abs() < 1e-12);
        }
        prop_assert!((mu_k_measure(&w, &tree, 1000).unwrap().total(&tree) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_projection_is_idempotent_and_nested(n in 2usize..200, seed in any::<u64>(), k in 1usize..8) {
        let t = random_tree(n, seed);
        let c = t.contour();
        let mut rng = rng_from_seed(seed);
        let u: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let v = select_vertices(&c, &u).unwrap();
        let mut prev: Option<Vec<bool>> = None;
        let mut prev_delta = u32::MAX;
        for j in 1..=k {
            let sub = reduced_subtree(&t, &v[..j]).unwrap();
            for x in 0..n {
                let p = project_vertex(&sub, x);
                prop_assert!(sub.contains(p));
                prop_assert_eq!(project_vertex(&sub, p), p);
            }
            if let Some(p) = &prev {
                prop_assert!(p.iter().zip(&sub.in_sub).all(|(&a, &b)| !a || b));
            }
            let d = crtwalk::discrete_tree::delta(&t, &sub);
            prop_assert!(d <= prev_delta);
            prev_delta = d;
            let pushed = pushforward_measure(&sub, &AtomicMeasure::uniform(n));
            prop_assert!((pushed.total() - 1.0).abs() < 1e-12);
            prop_assert!(pushed.atoms.iter().all(|a| sub.contains(a.0)));
            prev = Some(sub.in_sub.clone());
        }
    }

    #[test]
    fn jump_chain_identities(n in 3usize..80, seed in any::<u64>(), k in 1usize..5, m in 0usize..2000) {
        let t = random_tree(n, seed);
        let c = t.contour();
        let mut rng = rng_from_seed(seed ^ 5);
        let u: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let sub = reduced_subtree(&t, &select_vertices(&c, &u).unwrap()).unwrap();
        let path = simulate_srw(&t, m, seed);
        for w in path.steps.windows(2) {
            prop_assert!(t.neighbors(w[0] as usize).contains(&(w[1] as usize)));
        }
        let jc = jump_chain(&path.steps, &sub);
        for (mm, &x) in path.steps.iter().enumerate() {
            prop_assert_eq!(sub.proj[x as usize], jc.jumps[jc.tau(mm)]);
        }
        if sub.edges() == 0 {
            return Ok(());
        }
        let last = jc.len() - 1;
        let counts = visit_counts(&jc.jumps, n, last);
        prop_assert_eq!(counts.iter().sum::<u64>() as usize, last + 1);
        let lt = local_times(&jc.jumps, &sub, last).unwrap();
        let occupation: f64 = lt.iter().zip(&sub.degree).map(|(l, &d)| l * d as f64 / 2.0).sum();
        prop_assert!((occupation - (last + 1) as f64).abs() < 1e-9);
        let nu: u32 = sub.degree.iter().sum();
        prop_assert_eq!(nu as usize / 2, sub.edges());

        let mu = pushforward_measure(&sub, &AtomicMeasure::uniform(n));
        let dense = mu.dense(n);
        let fast = a_hat(&jc.jumps, &sub, &dense, n).unwrap();
        let counts_all = crtwalk::discrete_tree::projection_counts(&sub);
        let exact_mu: Vec<Ratio<i64>> = counts_all.iter().map(|&c| Ratio::new(c as i64, n as i64)).collect();
        let exact = a_hat_from_local_times(&jc.jumps, &sub, &exact_mu, Ratio::from_integer(n as i64)).unwrap();
        for i in 1..exact.len() {
            let inc = exact[i] - exact[i - 1];
            let x = jc.jumps[i - 1];
            prop_assert_eq!(inc, Ratio::new(2 * counts_all[x] as i64, sub.degree[x] as i64));
            let f = *exact[i].numer() as f64 / *exact[i].denom() as f64;
            prop_assert!((fast[i] - f).abs() < 1e-9 * f.max(1.0));
        }
    }

    #[test]
    fn traces_compose(seed in any::<u64>()) {
        let w = sample_brownian_excursion(2000, seed, ExcursionSampler::ConditionedWalk).unwrap();
        let idx = random_indices(&w, 6, seed);
        let tree = reduced_tree_from_indices(&w, &idx).unwrap();
        let h = (tree.min_edge() / 2.0).min(0.02);
        prop_assume!(h > 1e-4);
        let grid = GridTree::new(&tree, h).unwrap();
        let speed = grid.length_mass();
        let path = crtwalk::diffusion::grid_bm_with(&grid, &speed, 0, 0.5, false, &mut rng_from_seed(seed));
        let mid = grid.subtree_vertices(&tree, 4);
        let small = grid.subtree_vertices(&tree, 2);
        let s_mid = grid.normalized_length_on(&mid);
        let s_small = grid.normalized_length_on(&small);
        let twice = trace_on_subtree(&trace_on_subtree(&path, &mid, &s_mid), &small, &s_small);
        let once = trace_on_subtree(&path, &small, &s_small);
        prop_assert_eq!(twice, once);
    }
}

#[test]
fn contour_round_trip_on_all_small_trees() {
    for n in 1..=7 {
        for t in enumerate_ordered_trees(n) {
            assert_eq!(tree_from_depth(&t.contour().depth).unwrap(), t);
        }
    }
}

#[test]
fn excursion_triangle_inequality_exhaustive() {
    let w = sample_brownian_excursion(200, 17, ExcursionSampler::ConditionedWalk).unwrap();
    let n = w.grid_size();
    for a in 0..=n {
        for b in 0..=n {
            let dab = w.distance_idx(a, b);
            for c in 0..=n {
                assert!(dab <= w.distance_idx(a, c) + w.distance_idx(c, b) + 1e-12);
            }
        }
    }
}
