use std::sync::Arc;

use cartesian_influence::function::{check_l2_l1_bounds, efron_stein_check, entropy_sq};
use cartesian_influence::isoperimetry::{conductance_functional, set_conductance};
use cartesian_influence::kkl::{corollary_check, depends_only_on, permutation_invariant};
use cartesian_influence::sdp::{
    self, check_triangle, cut_mixture_vectors, gram_vectors, lift_lasserre, lift_sherali_adams, lift_vectors,
    LasserreSolution, LocalDistributions, SdpSolution,
};
use cartesian_influence::spectral::{directional_form, dirichlet_form};
use cartesian_influence::tightness::{build_necklace, influence_monte_carlo, ConsecutiveOnes};
use cartesian_influence::{
    conductance_bruteforce, decompose, eigendecompose, fourier_transform, friedgut_extract, inverse_transform,
    kkl_report, Function, Graph, Product,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Connected weighted graph: a random spanning tree plus random extra edges.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let tree = proptest::collection::vec((0usize..1000, 0.1f64..5.0), n - 1);
        let extra = proptest::collection::vec((0..n, 0..n, 0.1f64..5.0), 0..=n);
        (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
            let mut edges: Vec<(usize, usize, f64)> = tree
                .into_iter()
                .enumerate()
                .map(|(i, (p, w))| (p % (i + 1), i + 1, w))
                .collect();
            for (u, v, w) in extra {
                let (a, b) = (u.min(v), u.max(v));
                if a != b && !edges.iter().any(|&(x, y, _)| (x.min(y), x.max(y)) == (a, b)) {
                    edges.push((a, b, w));
                }
            }
            Graph::build(n, &edges).unwrap()
        })
    })
}

/// Base graph and power with at most `max_len` product vertices.
fn product_strategy(max_n: usize, max_k: usize, max_len: usize) -> impl Strategy<Value = Product> {
    (graph_strategy(max_n), 1..=max_k).prop_filter_map("product too large", move |(g, k)| {
        let p = Product::new(Arc::new(g), k).ok()?;
        (p.vertex_count() <= max_len as u128).then_some(p)
    })
}

fn boolean(product: &Product, seed: u64) -> Function {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let f = Function::random_boolean(product, &mut rng).unwrap();
        if f.variance() > 0.0 {
            return f;
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_form_matches_edge_sum(g in graph_strategy(8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..g.n()).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect();
        let quad = g.laplacian().bilinear(&f, &f);
        let edge_sum: f64 = g.edges().iter().map(|e| 0.5 * e.mass * (f[e.u] - f[e.v]).powi(2)).sum();
        prop_assert!(close(quad, edge_sum, 1e-12));
        prop_assert!(close(g.dirichlet_form(&f), edge_sum, 1e-12));
    }

    #[test]
    fn measures_are_normalized(g in graph_strategy(8)) {
        let report = g.validate_measures();
        prop_assert!(report.passed, "{report:?}");
        let total: f64 = g.edges().iter().map(|e| e.mass).sum();
        prop_assert!(close(total, 1.0, 1e-12));
    }

    #[test]
    fn product_measure_consistency(p in product_strategy(5, 3, 4096)) {
        let measure = p.vertex_measure().unwrap();
        let total: f64 = measure.iter().sum();
        prop_assert!(close(total, 1.0, 1e-12));
        for (idx, &m) in measure.iter().enumerate() {
            let x = p.tuple_of(idx);
            let around: f64 = p.neighbors(&x).iter().map(|(_, w)| w).sum();
            prop_assert!(close(2.0 * m, around, 1e-12), "vertex {x:?}");
            prop_assert_eq!(m, p.vertex_mass(&x));
        }
    }

    #[test]
    fn first_power_is_the_base(g in graph_strategy(8)) {
        let g = Arc::new(g);
        let dense = Product::new(Arc::clone(&g), 1).unwrap().materialize().unwrap();
        prop_assert_eq!(dense.pi(), g.pi());
        for e in g.edges() {
            prop_assert_eq!(dense.mu(e.u, e.v), e.mass);
        }
        prop_assert_eq!(dense.edges().len(), g.edges().len());
    }

    #[test]
    fn spectral_identity(p in product_strategy(5, 3, 729), seed in any::<u64>()) {
        let basis = eigendecompose(p.base()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Function::random_real(&p, &mut rng).unwrap();
        let coeffs = fourier_transform(&f, &basis).unwrap();
        prop_assert!(close(coeffs.dirichlet_form(&basis), dirichlet_form(&f).unwrap(), 1e-9));
        let back = inverse_transform(&coeffs, &basis, &p).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let avg: f64 = (0..p.k()).map(|j| directional_form(&f, j).unwrap()).sum::<f64>() / p.k() as f64;
        prop_assert!(close(avg, dirichlet_form(&f).unwrap(), 1e-12));
    }

    #[test]
    fn tensor_gap_is_base_gap_over_k(g in graph_strategy(5), k in 1usize..=3) {
        let g = Arc::new(g);
        let p = Product::new(Arc::clone(&g), k).unwrap();
        prop_assume!(p.vertex_count() <= 256);
        let basis = eigendecompose(g.as_ref()).unwrap();
        let direct = eigendecompose(&p.materialize().unwrap()).unwrap();
        prop_assert!(close(direct.gap(), basis.gap() / k as f64, 1e-9));
        prop_assert!(close(basis.product_gap(k), basis.gap() / k as f64, 1e-15));
    }

    #[test]
    fn decomposition_invariants(p in product_strategy(4, 3, 512), seed in any::<u64>()) {
        let basis = eigendecompose(p.base()).unwrap();
        let f = boolean(&p, seed);
        let dec = decompose(&f, &basis).unwrap();
        prop_assert!(close(dec.total_norm_sq(), f.variance(), 1e-9));
        prop_assert!(dec.max_cross_inner() <= 1e-9);
        prop_assert!(check_l2_l1_bounds(&f, &dec).unwrap().passed);
        for (a, b) in dec.reconstruct().iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn directional_variance_two_ways(p in product_strategy(5, 3, 729), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Function::random_real(&p, &mut rng).unwrap();
        let mut max_var = 0.0f64;
        for j in 0..p.k() {
            let a = f.variance_along(j).unwrap();
            let b = f.variance_along_form(j).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "coord {j}: {a} vs {b}");
            max_var = max_var.max(a);
        }
        let var = f.variance();
        prop_assert!(max_var <= var + 1e-12);
        prop_assert!(var <= p.k() as f64 * max_var + 1e-12);
        prop_assert!(efron_stein_check(&f).unwrap().passed);
    }

    #[test]
    fn entropy_is_nonnegative(p in product_strategy(5, 2, 256), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Function::random_real(&p, &mut rng).unwrap();
        prop_assert!(f.entropy_sq() >= -1e-15);
        let measure = p.vertex_measure().unwrap();
        let zeros: Vec<f64> = f.values().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        prop_assert!(entropy_sq(&zeros, &measure) >= -1e-15);
    }

    #[test]
    fn boolean_functions_respect_conductance(p in product_strategy(4, 2, 16), seed in any::<u64>()) {
        let phi = conductance_bruteforce(&p.materialize().unwrap()).unwrap().phi;
        let f = boolean(&p, seed);
        prop_assert!(dirichlet_form(&f).unwrap() >= 2.0 * phi * f.variance() - 1e-12);
    }

    #[test]
    fn set_and_functional_conductance_agree(g in graph_strategy(6)) {
        let g = Arc::new(g);
        let n = g.n();
        let p = Product::new(Arc::clone(&g), 1).unwrap();
        for mask in 1..(1u32 << n) - 1 {
            let set: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let f = Function::from_fn(&p, |x| if mask >> x[0] & 1 == 1 { 1.0 } else { -1.0 }).unwrap();
            let a = set_conductance(g.as_ref(), &set).unwrap();
            let b = conductance_functional(&f).unwrap();
            prop_assert!(close(a, b, 1e-12), "{set:?}: {a} vs {b}");
        }
    }

    #[test]
    fn conductance_scales_with_power(g in graph_strategy(4)) {
        let g = Arc::new(g);
        let phi = conductance_bruteforce(g.as_ref()).unwrap().phi;
        let square = Product::new(Arc::clone(&g), 2).unwrap().materialize().unwrap();
        let phi2 = conductance_bruteforce(&square).unwrap().phi;
        prop_assert!((2.0 * phi2 - phi).abs() <= 1e-9, "{phi2} vs {phi}");
    }

    #[test]
    fn max_influence_dominates_average(p in product_strategy(4, 3, 512), seed in any::<u64>()) {
        prop_assume!(p.k() >= 2);
        let f = boolean(&p, seed);
        let report = kkl_report(&f, 1.0).unwrap();
        prop_assert!(report.max_ge_avg);
        let avg = report.influences.iter().sum::<f64>() / p.k() as f64;
        prop_assert!(close(avg, report.total, 1e-12));
    }

    #[test]
    fn corollary_holds_on_boolean_cubes(k in 1usize..=4, seed in any::<u64>(), t in 1e-4f64..(-2.0f64).exp()) {
        let p = Product::new(Arc::new(Graph::complete(2).unwrap()), k).unwrap();
        let basis = eigendecompose(p.base()).unwrap();
        let f = boolean(&p, seed);
        let dec = decompose(&f, &basis).unwrap();
        prop_assert!(corollary_check(&f, &dec, t, 2.0).unwrap().passed);
    }

    #[test]
    fn friedgut_invariants(k in 2usize..=6, seed in any::<u64>(), flips in 0.0f64..0.1, eps in 0.05f64..0.5) {
        let k2 = Arc::new(Graph::complete(2).unwrap());
        let p = Product::new(Arc::clone(&k2), k).unwrap();
        let basis = eigendecompose(k2.as_ref()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Function::noisy_dictator(&p, seed as usize % k, flips, &mut rng).unwrap();
        let r = friedgut_extract(&f, &basis, eps, 2.0, 1.0).unwrap();
        prop_assert!(r.checks.all(), "{:?}", r.checks);
        prop_assert!(r.distance <= 4.0 * r.distance_real + 1e-9);
        prop_assert!(depends_only_on(&r.g_tilde, &r.junta));
        prop_assert!(permutation_invariant(&r.g_tilde, &r.junta, &mut rng, 4));
    }

    #[test]
    fn vector_lift_identities(g in graph_strategy(5), d in 1usize..=4, k in 1usize..=3, seed in any::<u64>()) {
        let g = Arc::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<Vec<f64>> = (0..g.n())
            .map(|_| (0..d).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect())
            .collect();
        let raw = SdpSolution::new(g.as_ref(), vectors).unwrap();
        prop_assume!(raw.spread > 1e-6);
        let sol = raw.normalized(g.as_ref()).unwrap();
        let lift = lift_vectors(&sol, &g, k, seed).unwrap();
        prop_assert!(lift.passed, "gram {} spread {} objective {}", lift.gram_error, lift.spread_error, lift.objective_error);
        prop_assert!((lift.solution.objective - sol.objective / k as f64).abs() <= 1e-9);
    }

    #[test]
    fn triangle_feasibility_survives_lifting(n in 2usize..=4, seed in any::<u64>()) {
        let g = Arc::new(Graph::complete(n).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cuts = sdp::random_cut_mixture::<f64, _>(n, 4, &mut rng).unwrap();
        let sol = SdpSolution::new(g.as_ref(), cut_mixture_vectors(n, &cuts).unwrap())
            .unwrap()
            .normalized(g.as_ref())
            .unwrap();
        prop_assert!(check_triangle(&sol.vectors, sdp::TRIANGLE_BUDGET, seed).passed());
        let lift = lift_vectors(&sol, &g, 2, seed).unwrap();
        let after = check_triangle(&lift.solution.vectors, sdp::TRIANGLE_BUDGET, seed);
        prop_assert!(after.passed() && !after.partial);
    }

    #[test]
    fn hierarchy_lifts_stay_consistent(n in 2usize..=3, k in 1usize..=2, seed in any::<u64>()) {
        let g = Arc::new(Graph::path(n).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cuts = sdp::random_cut_mixture::<f64, _>(n, 4, &mut rng).unwrap();
        let ls = LasserreSolution::from_cut_mixture(n, 2, &cuts).unwrap();
        let las = lift_lasserre(&ls, &g, k, 2).unwrap();
        prop_assert!(las.delta.passed && las.objective_error <= 1e-9);
        let ld = LocalDistributions::from_cut_mixture(n, 2, &cuts).unwrap();
        let vectors = gram_vectors(&ld.gram().unwrap()).unwrap();
        let sa = lift_sherali_adams(&ld, &vectors, &g, k).unwrap();
        prop_assert!(sa.report.passed, "{:?}", sa.report);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn necklace_orbits_partition_the_cube(bits in 3usize..=12) {
        let neck = build_necklace::<f64>(bits).unwrap();
        let total: usize = neck.orbit_sizes().iter().sum();
        prop_assert_eq!(total, (1 << bits) - 2);
        for (class, &rep) in neck.representatives().iter().enumerate() {
            prop_assert_eq!(neck.class_of(rep), Some(class));
            prop_assert_eq!(bits % neck.orbit_sizes()[class], 0);
        }
        prop_assert!(neck.graph().validate_measures().passed);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic(seed in any::<u64>(), k in 2usize..=6) {
        let neck = build_necklace::<f64>(8).unwrap();
        let f = ConsecutiveOnes::new(&neck, k).unwrap();
        let a = influence_monte_carlo(&f, neck.graph(), k, 0, 2000, seed).unwrap();
        let b = influence_monte_carlo(&f, neck.graph(), k, 0, 2000, seed).unwrap();
        prop_assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
