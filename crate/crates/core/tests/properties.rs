use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtcur::cur::{FiberCur, SampleIndices};
use rtcur::linalg::{truncated_svd, Matrix};
use rtcur::reference::{naive_mode_product, naive_unfold, singular_values_via_gram};
use rtcur::solver::{hard_threshold, zeta_schedule};
use rtcur::synth::{gen_lowrank, InstanceSpec};
use rtcur::tensor::{DenseTensor, IndexSets, Shape};

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 1..5)
}

fn random_tensor(dims: Vec<usize>, seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(Shape::new(dims).unwrap(), |_| rng.random::<f64>() * 2.0 - 1.0)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fold_inverts_unfold(dims in dims(), seed: u64, m in 0usize..4) {
        let t = random_tensor(dims, seed);
        let mode = m % t.order();
        let back = DenseTensor::fold(&t.unfold(mode).unwrap(), mode, t.shape()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn unfold_matches_loop_oracle(dims in dims(), seed: u64, m in 0usize..4) {
        let t = random_tensor(dims, seed);
        let mode = m % t.order();
        prop_assert_eq!(t.unfold(mode).unwrap(), naive_unfold(&t, mode).unwrap());
    }

    #[test]
    fn unfold_preserves_norm(dims in dims(), seed: u64, m in 0usize..4) {
        let t = random_tensor(dims, seed);
        let mode = m % t.order();
        let a = t.fro_norm();
        let b = t.unfold(mode).unwrap().fro_norm();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn linear_offset_is_a_bijection(dims in dims()) {
        let shape = Shape::new(dims).unwrap();
        for off in 0..shape.len() {
            let idx = shape.multi_index(off).unwrap();
            prop_assert_eq!(shape.linear_offset(&idx).unwrap(), off);
        }
        prop_assert!(shape.multi_index(shape.len()).is_err());
    }

    #[test]
    fn fiber_column_numbering_round_trips(dims in prop::collection::vec(1usize..5, 2..5), m in 0usize..4) {
        let shape = Shape::new(dims).unwrap();
        let mode = m % shape.order();
        for col in 0..shape.fiber_count(mode) {
            let others = shape.fiber_column_multiindex(mode, col).unwrap();
            prop_assert_eq!(shape.fiber_column_index(mode, &others).unwrap(), col);
        }
    }

    #[test]
    fn mode_product_matches_loop_oracle(dims in dims(), seed: u64, m in 0usize..4, rows in 1usize..5) {
        let t = random_tensor(dims, seed);
        let mode = m % t.order();
        let a = random_matrix(rows, t.dims()[mode], seed ^ 7);
        let fast = t.mode_product(&a, mode).unwrap();
        let slow = naive_mode_product(&t, &a, mode).unwrap();
        prop_assert!(fast.sub(&slow).unwrap().inf_norm() <= 1e-12);
    }

    #[test]
    fn products_on_distinct_modes_commute(dims in prop::collection::vec(1usize..5, 2..5), seed: u64, p in 1usize..4, q in 1usize..4) {
        let t = random_tensor(dims, seed);
        let a = random_matrix(p, t.dims()[0], seed ^ 1);
        let b = random_matrix(q, t.dims()[1], seed ^ 2);
        let ab = t.mode_product(&a, 0).unwrap().mode_product(&b, 1).unwrap();
        let ba = t.mode_product(&b, 1).unwrap().mode_product(&a, 0).unwrap();
        prop_assert!(ab.sub(&ba).unwrap().inf_norm() <= 1e-12);
    }

    #[test]
    fn hard_threshold_is_idempotent(values in prop::collection::vec(-10.0f64..10.0, 0..40), zeta in 0.0f64..10.0) {
        let once = hard_threshold(&values, zeta);
        prop_assert_eq!(hard_threshold(&once, zeta), once.clone());
        for (x, y) in values.iter().zip(&once) {
            prop_assert!(*y == 0.0 || (x == y && x.abs() > zeta));
        }
    }

    #[test]
    fn zeta_schedule_strictly_decreases(zeta0 in 1e-3f64..1e3, gamma in 0.05f64..0.95) {
        for k in 0..30 {
            prop_assert!(zeta_schedule(zeta0, gamma, k + 1) < zeta_schedule(zeta0, gamma, k));
        }
    }

    #[test]
    fn moore_penrose_conditions(m in 1usize..12, n in 1usize..12, k in 1usize..12, seed: u64) {
        let a = random_matrix(m, n, seed);
        let svd = truncated_svd(&a, k.min(m).min(n)).unwrap();
        let ar = svd.reconstruct();
        let p = svd.pinv();
        let tol = 1e-9 * (1.0 + p.max_abs()).powi(2);
        let ap = ar.matmul(&p).unwrap();
        let pa = p.matmul(&ar).unwrap();
        prop_assert!(ap.matmul(&ar).unwrap().sub(&ar).unwrap().max_abs() <= tol);
        prop_assert!(pa.matmul(&p).unwrap().sub(&p).unwrap().max_abs() <= tol);
        prop_assert!(ap.sub(&ap.transpose()).unwrap().max_abs() <= tol);
        prop_assert!(pa.sub(&pa.transpose()).unwrap().max_abs() <= tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn singular_values_match_jacobi_oracle(m in 1usize..=50, n in 1usize..=50, seed: u64) {
        let a = random_matrix(m, n, seed);
        let k = m.min(n);
        let svd = truncated_svd(&a, k).unwrap();
        let oracle = singular_values_via_gram(&a).unwrap();
        let s1 = svd.singular_values[0];
        for (x, y) in svd.singular_values.iter().zip(&oracle) {
            // The Gram route squares the condition number, so compare
            // against the largest value.
            prop_assert!((x - y).abs() <= 1e-7 * s1, "{} vs {}", x, y);
        }
        let recon = truncated_svd(&a, k).unwrap().reconstruct();
        prop_assert!(recon.sub(&a).unwrap().max_abs() <= 1e-10 * (1.0 + s1));
    }

    #[test]
    fn restricted_evaluation_matches_full_reconstruction(d in 6usize..12, r in 1usize..3, seed: u64) {
        let spec = InstanceSpec::new(3, d, r, 0.0, seed);
        let l = gen_lowrank(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = SampleIndices::sample(l.shape(), &spec.ranks(), 2.0, &mut rng).unwrap();
        let cur = FiberCur::build(&l, samples, &spec.ranks()).unwrap();
        let full = cur.reconstruct_full().unwrap();
        let scale = full.inf_norm().max(1.0);

        let sel = IndexSets::new(vec![vec![0, d - 1], vec![1], (0..d).step_by(2).collect()]).unwrap();
        let sub = cur.eval_subtensor(&sel).unwrap();
        prop_assert!(sub.sub(&full.subtensor(&sel).unwrap()).unwrap().inf_norm() <= 1e-9 * scale);

        for mode in 0..3 {
            let cols = [0, d + 1, d * d - 1];
            let fib = cur.eval_fibers(mode, &cols).unwrap();
            prop_assert!(fib.sub(&full.fibers(mode, &cols).unwrap()).unwrap().max_abs() <= 1e-9 * scale);
        }
    }
}
