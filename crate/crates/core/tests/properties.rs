use otproto::io::checkpoint::{decode_checkpoint, encode_checkpoint, rng_to_blob};
use otproto::io::{decode_grid, decode_map, decode_mask, encode_grid, encode_map, encode_mask, Mask, ProtoCheckpoint};
use otproto::score::bilinear_upsample;
use otproto::{
    auroc, fused_cost, make_feature_grid, score_grid, solve_costs, AnomalyMap, PrototypeSet, SolverParams,
    ZeroVectorPolicy,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn finite_f32() -> impl Strategy<Value = f32> {
    -1e6f32..1e6
}

fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f32>> {
    proptest::collection::vec(-1.0f32..1.0, d).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn converged(eps: f64) -> SolverParams {
    SolverParams {
        epsilon: eps,
        max_iters: 100_000,
        marginal_tol: 1e-11,
        log_domain: true,
        eps_scaling: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trip(h in 1usize..5, w in 1usize..5, d in 1usize..6, scale in any::<u16>(), seed in any::<u64>()) {
        let vals: Vec<f32> = (0..h * w * d).map(|k| ((seed as f64 + k as f64) * 0.731).sin() as f32 * 100.0).collect();
        let g = make_feature_grid(&vals, h, w, d, scale).unwrap();
        let back = decode_grid(&encode_grid(&g).unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn mask_and_map_round_trip(pixels in proptest::collection::vec(any::<u8>(), 1..64), scores in proptest::collection::vec(0.0f32..10.0, 1..64)) {
        let m = Mask::new(1, pixels.len(), pixels).unwrap();
        prop_assert_eq!(decode_mask(&encode_mask(&m).unwrap()).unwrap(), m);
        let a = AnomalyMap::new(scores.len(), 1, scores).unwrap();
        prop_assert_eq!(decode_map(&encode_map(&a).unwrap()).unwrap(), a);
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise(weights in proptest::collection::vec(finite_f32(), 12), alpha in 0.0f32..=1.0, epoch in any::<u32>(), seed in any::<u64>()) {
        let protos = PrototypeSet::new(2, 2, 1, 3, alpha, 3, weights).unwrap();
        let ck = ProtoCheckpoint { protos, eta: 0.9, epsilon: 0.05, epoch, rng: rng_to_blob(&ChaCha8Rng::seed_from_u64(seed)) };
        let bytes = encode_checkpoint(&ck).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        prop_assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
        prop_assert_eq!(back, ck);
    }

    #[test]
    fn feature_cost_ignores_vector_scale(z in nonzero_vec(5), p in nonzero_vec(5), a in 0.01f32..100.0, b in 0.01f32..100.0, alpha in 0.0f64..=1.0) {
        let c = [0.5, 1.0];
        let rho = [1.0, 0.25];
        let base = fused_cost(&z, c, &p, rho, alpha, ZeroVectorPolicy::Error).unwrap();
        let zs: Vec<f32> = z.iter().map(|v| v * a).collect();
        let ps: Vec<f32> = p.iter().map(|v| v * b).collect();
        let scaled = fused_cost(&zs, c, &ps, rho, alpha, ZeroVectorPolicy::Error).unwrap();
        prop_assert!((base - scaled).abs() < 1e-6);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn converged_plans_meet_marginals(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>(), eps in 0.05f64..1.0) {
        let c: Vec<f64> = (0..rows * cols).map(|k| (((seed % 1000) as f64 + k as f64) * 1.618).fract()).collect();
        let plan = solve_costs(rows, cols, &c, &converged(eps)).unwrap();
        prop_assert!(plan.converged());
        for s in plan.row_sums() {
            prop_assert!((s - 1.0 / rows as f64).abs() <= 1e-11);
        }
        for s in plan.col_sums() {
            prop_assert!((s - 1.0 / cols as f64).abs() <= 1e-11);
        }
        prop_assert!(plan.data().iter().all(|&t| t >= 0.0));
    }

    #[test]
    fn permuting_rows_permutes_the_plan(n in 2usize..6, seed in any::<u64>(), shift in 1usize..5) {
        let c: Vec<f64> = (0..n * n).map(|k| (((seed % 997) as f64 + k as f64) * 0.7071).fract()).collect();
        let perm: Vec<usize> = (0..n).map(|r| (r + shift) % n).collect();
        let mut pc = vec![0.0; n * n];
        for (r, &src) in perm.iter().enumerate() {
            pc[r * n..(r + 1) * n].copy_from_slice(&c[src * n..(src + 1) * n]);
        }
        let a = solve_costs(n, n, &c, &converged(0.2)).unwrap();
        let b = solve_costs(n, n, &pc, &converged(0.2)).unwrap();
        for (r, &src) in perm.iter().enumerate() {
            for j in 0..n {
                prop_assert!((b.get(r, j) - a.get(src, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn transport_cost_grows_with_epsilon(n in 2usize..6, seed in any::<u64>()) {
        let c: Vec<f64> = (0..n * n).map(|k| (((seed % 991) as f64 + k as f64) * 0.4142).fract()).collect();
        let mut last = f64::NEG_INFINITY;
        for eps in [0.05, 0.1, 0.3, 1.0, 3.0] {
            let plan = solve_costs(n, n, &c, &converged(eps)).unwrap();
            let cost = plan.transport_cost(&c);
            prop_assert!(cost >= last - 1e-9, "eps {}: {} < {}", eps, cost, last);
            last = cost;
        }
    }

    #[test]
    fn auroc_is_rank_based(pairs in proptest::collection::vec((0u8..20, any::<bool>()), 2..60)) {
        prop_assume!(pairs.iter().any(|p| p.1) && pairs.iter().any(|p| !p.1));
        let s: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let l: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let base = auroc(&s, &l).unwrap();
        let affine: Vec<f64> = s.iter().map(|v| 3.0 * v + 7.0).collect();
        let exp: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        prop_assert_eq!(auroc(&affine, &l).unwrap(), base);
        prop_assert_eq!(auroc(&exp, &l).unwrap(), base);
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auroc(&flipped, &l).unwrap() - (1.0 - base)).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn upsampling_stays_within_source_range(h in 1usize..5, w in 1usize..5, oh in 1usize..12, ow in 1usize..12, seed in any::<u64>()) {
        let src: Vec<f64> = (0..h * w).map(|k| (((seed % 983) as f64 + k as f64) * 2.236).fract()).collect();
        let lo = src.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let up = bilinear_upsample(&src, h, w, oh, ow);
        prop_assert_eq!(up.len(), oh * ow);
        prop_assert!(up.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        let flat = bilinear_upsample(&vec![0.75; h * w], h, w, oh, ow);
        prop_assert!(flat.iter().all(|&v| v == 0.75));
    }

    #[test]
    fn grid_scores_zero_against_its_own_bank(h in 1usize..4, w in 1usize..4, alpha in 0.0f32..=1.0, seed in any::<u64>()) {
        let d = 4;
        let vals: Vec<f32> = (0..h * w * d).map(|k| (((seed % 977) as f64 + k as f64) * 1.3).sin() as f32 + 1.5).collect();
        let grid = make_feature_grid(&vals, h, w, d, 2).unwrap();
        let bank = PrototypeSet::new(1, h, w, d, alpha, 2, vals).unwrap();
        let (field, assign) = score_grid(&grid, &bank, ZeroVectorPolicy::Error).unwrap();
        prop_assert!(field.values.iter().all(|&v| v.abs() < 1e-9));
        prop_assert!(assign.cells.iter().all(|a| a.cost.abs() < 1e-9));
    }
}
